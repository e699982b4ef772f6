#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "synaug/error.hpp"
#include "synaug/generators.hpp"
#include "synaug/metrics.hpp"
#include "synaug/sim_models.hpp"
#include "synaug/vtss.hpp"

using namespace synaug;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected synaug::Error");
  return ErrorCode::InvalidArgument;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

SimModelHandle two_gaussian() { return std::make_shared<TwoGaussianModel>(vec({1.0, 0.0}), vec({0.5, 0.0})); }

RowMatrix minority_rows(Index n, std::uint64_t seed) {
  Rng rng{RngStream(seed)};
  return two_gaussian()->sample_class(1, n, rng);
}

bool has_warning(const SyntheticBatch& b, const std::string& needle) {
  return std::any_of(b.warnings.begin(), b.warnings.end(),
                     [&](const std::string& w) { return w.find(needle) != std::string::npos; });
}

GeneratorSpec spec_of(GeneratorKind kind) {
  GeneratorSpec s;
  s.kind = kind;
  s.model_handle = two_gaussian();
  return s;
}

}  // namespace

TEST_SUITE("generators") {

TEST_CASE("spec validation and input errors") {
  GeneratorSpec s;
  s.k = 0;
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::InvalidArgument);
  s.k = 5;
  s.jitter_sigma = -1;
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::InvalidArgument);
  GeneratorSpec oracle;
  oracle.kind = GeneratorKind::Oracle;
  CHECK(code_of([&] { oracle.validate(); }) == ErrorCode::MissingModelHandle);

  CHECK(code_of([] { generate(GeneratorSpec{}, RowMatrix(0, 2), nullptr, 5, RngStream(1)); }) ==
        ErrorCode::EmptyMinority);
  GeneratorSpec ada;
  ada.kind = GeneratorKind::Adasyn;
  CHECK(code_of([&] { generate(ada, minority_rows(10, 1), nullptr, 5, RngStream(1)); }) == ErrorCode::MissingFullData);
  CHECK(code_of([] { knn_minority(minority_rows(4, 1), 0, 4); }) == ErrorCode::KTooLarge);
  CHECK(code_of([] { knn_minority(minority_rows(4, 1), 9, 1); }) == ErrorCode::InvalidArgument);
  CHECK(parse_generator_kind(to_string(GeneratorKind::BorderlineSmote)) == GeneratorKind::BorderlineSmote);
}

TEST_CASE("SMOTE shrinks k for tiny minorities and falls back to jitter for one row") {
  GeneratorSpec s;
  const SyntheticBatch small = generate(s, minority_rows(3, 2), nullptr, 20, RngStream(3));
  CHECK(small.rows.rows() == 20);
  CHECK(has_warning(small, "k reduced from 5 to 2"));
  const SyntheticBatch one = generate(s, minority_rows(1, 2), nullptr, 20, RngStream(3));
  CHECK(one.rows.rows() == 20);
  CHECK(has_warning(one, "fell back to jitter"));
}

TEST_CASE("borderline SMOTE and ADASYN fall back to SMOTE when no row qualifies") {
  RowMatrix maj(50, 2), mino(10, 2);
  Rng rng{RngStream(4)};
  for (Index i = 0; i < 50; ++i) maj.row(i) << rng.normal(), rng.normal();
  for (Index i = 0; i < 10; ++i) mino.row(i) << 100.0 + rng.normal(), rng.normal();
  const LabeledDataset full = LabeledDataset::from_classes(maj, mino);
  GeneratorSpec s;
  s.kind = GeneratorKind::BorderlineSmote;
  CHECK(has_warning(generate(s, mino, &full, 10, RngStream(5)), "DANGER set empty"));
  s.kind = GeneratorKind::Adasyn;
  CHECK(has_warning(generate(s, mino, &full, 10, RngStream(5)), "fell back to smote"));
}

TEST_CASE("prefix-stable kinds share leading rows across batch sizes") {
  const RowMatrix mino = minority_rows(30, 6);
  const LabeledDataset full = LabeledDataset::from_classes(minority_rows(60, 7).array() - 1.0, mino);
  for (auto kind : {GeneratorKind::Bootstrap, GeneratorKind::Smote, GeneratorKind::BorderlineSmote,
                    GeneratorKind::GaussianFit, GeneratorKind::Jitter, GeneratorKind::PerturbedSampling,
                    GeneratorKind::Oracle, GeneratorKind::SemiOracle, GeneratorKind::ModelSynthetic}) {
    REQUIRE(is_prefix_stable(kind));
    const GeneratorSpec s = spec_of(kind);
    const RowMatrix big = generate(s, mino, &full, 50, RngStream(8)).rows;
    const RowMatrix small = generate(s, mino, &full, 20, RngStream(8)).rows;
    CHECK_MESSAGE(big.topRows(20) == small, to_string(kind));
  }
  CHECK_FALSE(is_prefix_stable(GeneratorKind::Adasyn));
}

TEST_CASE("bootstrap rows are copies of minority rows") {
  const RowMatrix mino = minority_rows(15, 9);
  const SyntheticBatch b = generate(spec_of(GeneratorKind::Bootstrap), mino, nullptr, 100, RngStream(10));
  for (Index r = 0; r < 100; ++r) CHECK(b.rows.row(r) == mino.row(static_cast<Index>(b.audit[r].base)));
}

TEST_CASE("distribution-level generators reproduce their target moments") {
  const RowMatrix mino = minority_rows(400, 11);
  const Eigen::RowVectorXd mmean = mino.colwise().mean();
  const Index n = 200000;
  auto mean_of = [&](GeneratorKind kind) {
    return Eigen::RowVectorXd(generate(spec_of(kind), mino, nullptr, n, RngStream(12)).rows.colwise().mean());
  };
  CHECK((mean_of(GeneratorKind::Oracle) - vec({1.0, 0.0}).transpose()).norm() < 0.01);
  CHECK((mean_of(GeneratorKind::ModelSynthetic) - vec({0.5, 0.0}).transpose()).norm() < 0.01);
  CHECK((mean_of(GeneratorKind::SemiOracle) - mmean).norm() < 0.01);
  CHECK((mean_of(GeneratorKind::GaussianFit) - mmean).norm() < 0.01);

  const RowMatrix g = generate(spec_of(GeneratorKind::GaussianFit), mino, nullptr, n, RngStream(13)).rows;
  const Matrix cov_g = (g.rowwise() - g.colwise().mean()).transpose() * (g.rowwise() - g.colwise().mean()) / (n - 1.0);
  const Matrix cov_m = (mino.rowwise() - mmean).transpose() * (mino.rowwise() - mmean) / 399.0;
  CHECK((cov_g - cov_m).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("augment appends minority labels") {
  const RowMatrix mino = minority_rows(10, 14);
  const LabeledDataset base = LabeledDataset::from_classes(minority_rows(30, 15), mino);
  const SyntheticBatch b = generate(GeneratorSpec{}, mino, nullptr, 20, RngStream(16));
  const LabeledDataset aug = augment(base, b);
  CHECK(aug.n0() == 30);
  CHECK(aug.n1() == 30);
}

TEST_CASE("largest remainder allocation") {
  CHECK(largest_remainder_allocation({1, 1, 1}, 10) == std::vector<Index>{4, 3, 3});
  CHECK(largest_remainder_allocation({0.5, 0.25, 0.25}, 3) == std::vector<Index>{1, 1, 1});
  CHECK(largest_remainder_allocation({0, 2}, 5) == std::vector<Index>{0, 5});
  CHECK(code_of([] { largest_remainder_allocation({0, 0}, 5); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { largest_remainder_allocation({-1, 2}, 5); }) == ErrorCode::InvalidArgument);
}

}  // TEST_SUITE

TEST_SUITE("vtss") {

TEST_CASE("grid helpers") {
  const auto g = linspace(0.0, 2.0, 21);
  CHECK(g.size() == 21);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 2.0);
  CHECK(g[3] == 0.3);
  const auto h = linspace(0.6, 1.4, 9);
  CHECK(h[2] == 0.8);
  CHECK(linspace(1.0, 1.0, 1) == std::vector<double>{1.0});
  CHECK(synthetic_count(1.0, 100, 10) == 90);
  CHECK(synthetic_count(0.5, 11, 10) == 1);  // round half away from zero
  CHECK(synthetic_count(2.0, 5, 10) == 0);
  CHECK(parse_objective_kind("balanced_accuracy") == ObjectiveKind::BalancedAccuracy);
  CHECK(parse_objective_kind("weighted-loss") == ObjectiveKind::WeightedLoss);
}

TEST_CASE("configuration and data errors") {
  VtssConfig c;
  c.gamma_grid = {};
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  c.gamma_grid = {-1.0};
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  c.gamma_grid = {0.0};
  c.folds = 1;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  c.folds = 5;
  c.repeats = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);

  const auto model = two_gaussian();
  VtssConfig ok;
  CHECK(code_of([&] { vtss_tune(model->sample(50, 4, RngStream(1)), ok, RngStream(2)); }) == ErrorCode::TooFewMinority);
  CHECK(code_of([&] { vtss_tune(model->sample(10, 10, RngStream(1)), ok, RngStream(2)); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("grid {0} selects zero synthetic rows") {
  const LabeledDataset d = two_gaussian()->sample(200, 20, RngStream(3));
  VtssConfig c;
  c.gamma_grid = {0.0};
  const VtssResult r = vtss_tune(d, c, RngStream(4));
  CHECK(r.gamma_star == 0.0);
  CHECK(r.n_syn_star == 0);
  CHECK(r.seed_record == RngStream(4));
  CHECK((r.final_theta - fit_erm(d, c.loss, c.fit).theta).norm() < 1e-12);
}

TEST_CASE("cross-validated curve matches a fold-by-fold recomputation") {
  const LabeledDataset d = two_gaussian()->sample(150, 15, RngStream(5));
  for (const bool squared : {true, false}) {
    VtssConfig c;
    c.gamma_grid = {0.0, 0.5, 1.0, 2.0};
    c.repeats = 2;
    c.loss = squared ? LossSpec::squared_raw() : LossSpec::logistic();
    c.generator.kind = GeneratorKind::Smote;
    const RngStream root(6);
    const auto curve = cv_curve(d, c, root);

    std::vector<std::vector<double>> values(c.gamma_grid.size());
    for (int r = 0; r < c.repeats; ++r) {
      const FoldAssignment f = stratified_kfold(d, c.folds, derive_stream(derive_stream(root, 0), r));
      for (int k = 0; k < c.folds; ++k) {
        const LabeledDataset train = d.subset(f.training_indices(k));
        const LabeledDataset val = d.subset(f.validation_indices(k));
        const RowMatrix pool = split_by_class(train).minority;
        const Index max_count = synthetic_count(2.0, train.n0(), train.n1());
        const RowMatrix batch =
            generate(c.generator, pool, &train, max_count, derive_stream(derive_stream(derive_stream(root, 1), r), k)).rows;
        for (std::size_t g = 0; g < c.gamma_grid.size(); ++g) {
          const Index n = synthetic_count(c.gamma_grid[g], train.n0(), train.n1());
          const FittedModel m = fit_erm(train.with_rows(batch.topRows(n), 1), c.loss, c.fit);
          values[g].push_back(balanced_empirical_loss(m.theta, c.loss, val));
        }
      }
    }
    for (std::size_t g = 0; g < values.size(); ++g) {
      double mean = 0.0;
      for (double v : values[g]) mean += v / static_cast<double>(values[g].size());
      double ss = 0.0;
      for (double v : values[g]) ss += (v - mean) * (v - mean);
      const double se = std::sqrt(ss / (values[g].size() - 1.0) / static_cast<double>(values[g].size()));
      CHECK(curve[g].evaluations == 10);
      CHECK(curve[g].mean == doctest::Approx(mean).epsilon(1e-9));
      CHECK(curve[g].standard_error == doctest::Approx(se).epsilon(1e-6));
    }
  }
}

TEST_CASE("final fit uses the full data plus round(gamma* (n0 - n1)) rows") {
  const LabeledDataset d = two_gaussian()->sample(120, 12, RngStream(7));
  VtssConfig c;
  c.loss = LossSpec::squared_raw();
  c.generator.kind = GeneratorKind::GaussianFit;
  const RngStream root(8);
  const VtssResult r = vtss_tune(d, c, root);
  const RowMatrix rows = generate(c.generator, split_by_class(d).minority, &d, r.n_syn_star, derive_stream(root, 2)).rows;
  const Parameter expect = fit_erm(d.with_rows(rows, 1), c.loss, c.fit).theta;
  CHECK((r.final_theta - expect).norm() < 1e-10);
  CHECK((r.final_model.theta - r.final_theta).norm() == 0.0);
}

TEST_CASE("holdout curve scores on the separate validation set") {
  const auto model = two_gaussian();
  const LabeledDataset train = model->sample(100, 10, RngStream(9));
  const LabeledDataset val = model->sample(500, 500, RngStream(10));
  VtssConfig c;
  c.gamma_grid = {0.0, 1.0};
  c.loss = LossSpec::squared_raw();
  const auto curve = holdout_curve(train, val, c, RngStream(11));
  CHECK(curve[0].mean == doctest::Approx(balanced_empirical_loss(fit_erm(train, c.loss).theta, c.loss, val)));
  CHECK(curve[0].evaluations == 1);
  CHECK(holdout_curve(train, val, c, RngStream(11))[1].mean == curve[1].mean);
}

TEST_CASE("failed grid values are marked invalid rather than aborting") {
  // Logistic without ridge on separable folds fails at every gamma; accuracy
  // objective with a centered squared loss takes the generic path and still
  // succeeds.
  RowMatrix maj(40, 1), mino(10, 1);
  for (Index i = 0; i < 40; ++i) maj(i) = -1.0 - 0.01 * static_cast<double>(i);
  for (Index i = 0; i < 10; ++i) mino(i) = 1.0 + 0.01 * static_cast<double>(i);
  const LabeledDataset d = LabeledDataset::from_classes(maj, mino);
  VtssConfig c;
  c.gamma_grid = {0.0, 1.0};
  c.fit.ridge = 0.0;
  const auto curve = cv_curve(d, c, RngStream(12));
  CHECK_FALSE(curve[0].valid);
  CHECK(curve[0].failure.find("SeparableWithoutRidge") != std::string::npos);
  CHECK(code_of([&] { select_gamma(curve, c.objective); }) == ErrorCode::InvalidArgument);

  c.loss = LossSpec::squared_centered();
  c.objective.kind = ObjectiveKind::BalancedAccuracy;
  const auto acc = cv_curve(d, c, RngStream(12));
  CHECK(acc[0].valid);
  CHECK(acc[0].mean == doctest::Approx(1.0));
}

}  // TEST_SUITE
