// Property suites shared by the unit runner and the acceptance binary.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "synaug/config.hpp"
#include "synaug/csv.hpp"
#include "synaug/diagnostics.hpp"
#include "synaug/experiments.hpp"
#include "synaug/generators.hpp"
#include "synaug/losses.hpp"
#include "synaug/metrics.hpp"
#include "synaug/sim_models.hpp"
#include "synaug/vtss.hpp"

using namespace synaug;

namespace {

RowMatrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  RowMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

Vector random_vector(Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

double rel_error(const Vector& approx, const Vector& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1e-3);
}

double rel_error(const Matrix& approx, const Matrix& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1e-3);
}

Vector fd_gradient(const LossSpec& spec, const Parameter& theta, FeatureRow x, int y, double h) {
  Vector g(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    Parameter up = theta, down = theta;
    up(i) += h;
    down(i) -= h;
    g(i) = (loss_value(spec, up, x, y) - loss_value(spec, down, x, y)) / (2.0 * h);
  }
  return g;
}

Matrix fd_hessian(const LossSpec& spec, const Parameter& theta, FeatureRow x, int y, double h) {
  Matrix hess(theta.size(), theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    Parameter up = theta, down = theta;
    up(i) += h;
    down(i) -= h;
    hess.col(i) = (loss_gradient(spec, up, x, y) - loss_gradient(spec, down, x, y)) / (2.0 * h);
  }
  return hess;
}

// Reference kNN: full stable sort by (distance, index).
std::vector<std::size_t> knn_by_sort(const RowMatrix& pts, std::size_t q, int k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (Index i = 0; i < pts.rows(); ++i) {
    if (static_cast<std::size_t>(i) == q) continue;
    all.emplace_back((pts.row(i) - pts.row(static_cast<Index>(q))).squaredNorm(), static_cast<std::size_t>(i));
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (int i = 0; i < k; ++i) out.push_back(all[static_cast<std::size_t>(i)].second);
  return out;
}

std::string dump_rows(const RowMatrix& m) {
  std::ostringstream os;
  write_matrix_csv(m, os);
  return os.str();
}

// Table data without the '#' config header, which records the worker count.
std::string strip_comments(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '#') out += line + '\n';
  }
  return out;
}

std::string raw_csv(const ResultTable& t) {
  std::ostringstream os;
  write_raw_csv(t, os);
  write_summary_csv(t, os);
  write_failures_csv(t, os);
  return os.str();
}

SimModelHandle shifted_gaussian() {
  Vector mu1(2), mu_syn(2);
  mu1 << 1.0, 0.0;
  mu_syn << 0.5, 0.0;
  return std::make_shared<TwoGaussianModel>(mu1, mu_syn);
}

}  // namespace

TEST_SUITE("property") {

TEST_CASE("loss gradients and Hessians match central differences") {
  Rng rng{RngStream(11)};
  const std::vector<LossSpec> specs = {LossSpec::logistic(), LossSpec::logistic(true), LossSpec::squared_raw(),
                                       LossSpec::squared_raw(true), LossSpec::squared_centered(),
                                       LossSpec::squared_centered(true)};
  for (const auto& spec : specs) {
    for (int trial = 0; trial < 200; ++trial) {
      const Index d = 1 + static_cast<Index>(rng.uniform_index(5));
      const Vector x = random_vector(d, rng, 1.5);
      const Parameter theta = random_vector(spec.parameter_size(d), rng);
      const int y = static_cast<int>(trial % 2);
      const auto xr = x.transpose();
      CHECK(rel_error(fd_gradient(spec, theta, xr, y, 1e-5), loss_gradient(spec, theta, xr, y)) <= 1e-5);
      CHECK(rel_error(fd_hessian(spec, theta, xr, y, 1e-5), loss_hessian(spec, theta, xr, y)) <= 1e-4);
    }
  }
}

TEST_CASE("hinge gradient matches central differences away from the kink") {
  Rng rng{RngStream(12)};
  for (const bool intercept : {false, true}) {
    const LossSpec spec = LossSpec::hinge(intercept);
    int checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
      const Vector x = random_vector(3, rng);
      const Parameter theta = random_vector(spec.parameter_size(3), rng);
      const int y = trial % 2;
      const double margin = (2 * y - 1) * linear_score(spec, theta, x.transpose());
      if (std::abs(1.0 - margin) < 1e-3) continue;
      ++checked;
      CHECK(rel_error(fd_gradient(spec, theta, x.transpose(), y, 1e-6), loss_gradient(spec, theta, x.transpose(), y)) <=
            1e-5);
    }
    CHECK(checked > 300);
  }
}

TEST_CASE("SMOTE rows lie on segments between a base row and one of its k nearest neighbors") {
  Rng rng{RngStream(21)};
  const RowMatrix minority = random_matrix(60, 3, rng);
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Smote;
  spec.k = 5;
  const SyntheticBatch batch = generate(spec, minority, nullptr, 10000, RngStream(22));
  REQUIRE(batch.rows.rows() == 10000);
  REQUIRE(batch.audit.size() == 10000);
  int outside = 0;
  for (Index r = 0; r < batch.rows.rows(); ++r) {
    const auto& rec = batch.audit[static_cast<std::size_t>(r)];
    const auto nn = knn_by_sort(minority, rec.base, spec.k);
    const bool neighbor_ok = std::find(nn.begin(), nn.end(), static_cast<std::size_t>(rec.neighbor)) != nn.end();
    const Eigen::RowVectorXd x = minority.row(static_cast<Index>(rec.base));
    const Eigen::RowVectorXd expect = x + rec.gamma * (minority.row(rec.neighbor) - x);
    const bool on_segment = rec.gamma >= 0.0 && rec.gamma <= 1.0 && (batch.rows.row(r) - expect).norm() <= 1e-12;
    if (!neighbor_ok || !on_segment) ++outside;
  }
  CHECK(outside == 0);

  // Coordinates also stay inside the minority bounding box.
  const Eigen::RowVectorXd lo = minority.colwise().minCoeff(), hi = minority.colwise().maxCoeff();
  CHECK(((batch.rows.rowwise() - lo).array() >= -1e-12).all());
  CHECK(((batch.rows.rowwise() - hi).array() <= 1e-12).all());
}

TEST_CASE("borderline SMOTE and ADASYN rows interpolate minority rows") {
  Rng rng{RngStream(23)};
  const RowMatrix majority = random_matrix(200, 2, rng);
  RowMatrix minority = random_matrix(30, 2, rng);
  minority.col(0).array() += 1.0;
  const LabeledDataset full = LabeledDataset::from_classes(majority, minority);
  for (auto kind : {GeneratorKind::BorderlineSmote, GeneratorKind::Adasyn}) {
    GeneratorSpec spec;
    spec.kind = kind;
    const SyntheticBatch batch = generate(spec, minority, &full, 2000, RngStream(24));
    REQUIRE(batch.rows.rows() == 2000);
    for (Index r = 0; r < batch.rows.rows(); ++r) {
      const auto& rec = batch.audit[static_cast<std::size_t>(r)];
      const Eigen::RowVectorXd x = minority.row(static_cast<Index>(rec.base));
      REQUIRE((batch.rows.row(r) - (x + rec.gamma * (minority.row(rec.neighbor) - x))).norm() <= 1e-12);
    }
  }
}

TEST_CASE("ADASYN allocates exactly the requested count by largest remainder") {
  Rng rng{RngStream(31)};
  const RowMatrix majority = random_matrix(150, 2, rng);
  RowMatrix minority = random_matrix(25, 2, rng);
  minority.col(0).array() += 1.2;
  const LabeledDataset full = LabeledDataset::from_classes(majority, minority);
  const int k = 5;

  // Majority share of each minority row's k nearest full-data rows, its own
  // copy (at index n0 + i) excluded.
  std::vector<double> ratio;
  for (Index i = 0; i < minority.rows(); ++i) {
    std::vector<std::pair<double, Index>> dist;
    for (Index j = 0; j < full.rows(); ++j) {
      if (j == majority.rows() + i) continue;
      dist.emplace_back((full.row(j) - minority.row(i)).squaredNorm(), j);
    }
    std::sort(dist.begin(), dist.end());
    int maj = 0;
    for (int t = 0; t < k; ++t) maj += full.label(dist[static_cast<std::size_t>(t)].second) == 0 ? 1 : 0;
    ratio.push_back(static_cast<double>(maj) / k);
  }
  const double total = std::accumulate(ratio.begin(), ratio.end(), 0.0);
  REQUIRE(total > 0.0);

  for (Index count : {0, 1, 7, 100, 1234}) {
    GeneratorSpec spec;
    spec.kind = GeneratorKind::Adasyn;
    spec.k = k;
    const SyntheticBatch batch = generate(spec, minority, &full, count, RngStream(32));
    CHECK(batch.rows.rows() == count);
    std::vector<Index> per_base(static_cast<std::size_t>(minority.rows()), 0);
    for (const auto& rec : batch.audit) ++per_base[rec.base];

    // Independent largest-remainder allocation.
    std::vector<Index> expect(ratio.size());
    std::vector<std::pair<double, std::size_t>> rem;
    Index assigned = 0;
    for (std::size_t i = 0; i < ratio.size(); ++i) {
      const double exact = static_cast<double>(count) * ratio[i] / total;
      expect[i] = static_cast<Index>(std::floor(exact));
      assigned += expect[i];
      rem.emplace_back(-(exact - std::floor(exact)), i);
    }
    std::sort(rem.begin(), rem.end());
    for (std::size_t r = 0; assigned < count; ++r, ++assigned) ++expect[rem[r].second];
    CHECK(per_base == expect);
  }

  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(1 + rng.uniform_index(20));
    for (auto& x : w) x = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    w[0] += 1e-3;
    const auto total_count = static_cast<Index>(rng.uniform_index(500));
    const auto alloc = largest_remainder_allocation(w, total_count);
    CHECK(std::accumulate(alloc.begin(), alloc.end(), Index{0}) == total_count);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] == 0.0) CHECK(alloc[i] == 0);
    }
  }
}

TEST_CASE("kNN agrees with a full sort on 100 random instances, ties included") {
  Rng rng{RngStream(41)};
  for (int inst = 0; inst < 100; ++inst) {
    const Index n = 2 + static_cast<Index>(rng.uniform_index(60));
    const Index d = 1 + static_cast<Index>(rng.uniform_index(5));
    RowMatrix pts(n, d);
    const bool lattice = inst % 3 == 0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) {
        pts(i, j) = lattice ? static_cast<double>(rng.uniform_index(3)) : rng.normal();
      }
    }
    const int k = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - 1)));
    for (Index q = 0; q < n; ++q) {
      REQUIRE(knn_minority(pts, static_cast<std::size_t>(q), k) == knn_by_sort(pts, static_cast<std::size_t>(q), k));
    }
  }
}

TEST_CASE("VTSS selects the arg-optimum and keeps validation rows away from the generator") {
  const SimModelHandle model = shifted_gaussian();
  for (int trial = 0; trial < 8; ++trial) {
    const LabeledDataset data = model->sample(120 + 10 * trial, 12 + trial, RngStream(500 + trial));
    VtssConfig cfg;
    cfg.gamma_grid = linspace(0.0, 2.0, 5);
    cfg.folds = 5;
    cfg.repeats = 2;
    cfg.loss = LossSpec::squared_raw();
    cfg.generator.kind = trial % 2 ? GeneratorKind::GaussianFit : GeneratorKind::Smote;
    cfg.objective.kind = trial % 3 == 2 ? ObjectiveKind::BalancedAccuracy : ObjectiveKind::BalancedLoss;
    cfg.audit = true;
    const VtssResult res = vtss_tune(data, cfg, RngStream(900 + trial));

    std::size_t best = 0;
    for (std::size_t i = 1; i < res.cv_curve.size(); ++i) {
      const bool better = cfg.objective.minimize() ? res.cv_curve[i].mean < res.cv_curve[best].mean
                                                   : res.cv_curve[i].mean > res.cv_curve[best].mean;
      if (better) best = i;
    }
    CHECK(res.gamma_star == res.cv_curve[best].gamma);
    CHECK(res.n_syn_star == std::llround(res.gamma_star * static_cast<double>(data.n0() - data.n1())));
    CHECK(res.final_model.theta.size() == 2);

    REQUIRE(res.audit.size() == static_cast<std::size_t>(cfg.folds * cfg.repeats));
    std::map<int, std::vector<int>> covered;
    for (const auto& a : res.audit) {
      const std::set<std::size_t> val(a.validation_rows.begin(), a.validation_rows.end());
      std::set<std::size_t> pool(a.generator_pool_rows.begin(), a.generator_pool_rows.end());
      for (auto p : pool) {
        CHECK(data.label(static_cast<Index>(p)) == 1);
        CHECK(val.count(p) == 0);
      }
      // Every minority row outside the validation fold feeds the generator.
      for (Index i = 0; i < data.rows(); ++i) {
        if (data.label(i) == 1 && !val.count(static_cast<std::size_t>(i))) {
          CHECK(pool.count(static_cast<std::size_t>(i)) == 1);
        }
      }
      auto& cov = covered[a.repeat];
      cov.resize(static_cast<std::size_t>(data.rows()), 0);
      for (auto v : a.validation_rows) ++cov[v];
    }
    for (const auto& [rep, cov] : covered) {
      CHECK(std::all_of(cov.begin(), cov.end(), [](int c) { return c == 1; }));
    }
  }
}

TEST_CASE("select_gamma breaks ties toward the smallest gamma and skips invalid points") {
  std::vector<CurvePoint> curve(4);
  for (std::size_t i = 0; i < curve.size(); ++i) curve[i].gamma = static_cast<double>(i);
  curve[0].mean = 0.5;
  curve[1].mean = 0.2;
  curve[2].mean = 0.2;
  curve[3].mean = 0.1;
  curve[3].valid = false;
  CHECK(select_gamma(curve, VtssObjective{}) == 1);
  CHECK(select_gamma(curve, VtssObjective{ObjectiveKind::BalancedAccuracy, 0.5}) == 0);
}

TEST_CASE("seeded pipelines are byte-identical across runs") {
  const SimModelHandle model = shifted_gaussian();
  auto simulate = [&] {
    std::ostringstream os;
    write_dataset_csv(model->sample(50, 8, RngStream(3)), os);
    return os.str();
  };
  CHECK(simulate() == simulate());

  const LabeledDataset data = model->sample(80, 10, RngStream(4));
  const ClassSplit split = split_by_class(data);
  for (auto kind : {GeneratorKind::Bootstrap, GeneratorKind::Smote, GeneratorKind::BorderlineSmote,
                    GeneratorKind::Adasyn, GeneratorKind::GaussianFit, GeneratorKind::Jitter,
                    GeneratorKind::PerturbedSampling, GeneratorKind::Oracle, GeneratorKind::SemiOracle,
                    GeneratorKind::ModelSynthetic}) {
    GeneratorSpec spec;
    spec.kind = kind;
    spec.model_handle = model;
    auto run = [&] { return dump_rows(generate(spec, split.minority, &data, 40, RngStream(5)).rows); };
    CHECK_MESSAGE(run() == run(), to_string(kind));
  }

  VtssConfig vc;
  vc.loss = LossSpec::squared_raw();
  vc.audit = true;
  auto tune = [&] { return to_json(vtss_tune(data, vc, RngStream(6))).dump(); };
  CHECK(tune() == tune());

  auto diagnose = [&] {
    const Parameter theta = fit_class_weighted_erm(data, LossSpec::squared_raw()).theta;
    GeneratorSpec spec;
    const auto syn = generate(spec, split.minority, nullptr, 70, RngStream(7)).rows;
    const auto phi = estimate_phi_gradient(theta, LossSpec::squared_raw(), split.majority, split.minority);
    const auto psi = estimate_psi_gradient(theta, LossSpec::squared_raw(), syn, split.minority);
    return to_json(bias_vector(phi, psi, data.n0(), data.n1(), 70)).dump();
  };
  CHECK(diagnose() == diagnose());

  for (const char* name : {"fig2", "fig3", "fig4", "fig-select0", "fig5-left", "fig-sigmoid"}) {
    ExperimentConfig cfg = load_experiment(name);
    cfg.reps = 1;
    const std::string first = raw_csv(run_experiment(cfg));
    CHECK_MESSAGE(first == raw_csv(run_experiment(cfg)), name);
    cfg.jobs = 2;
    CHECK_MESSAGE(strip_comments(first) == strip_comments(raw_csv(run_experiment(cfg))), name);
  }
}

}  // TEST_SUITE
