#include "synaug/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synaug/error.hpp"

namespace synaug {

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Bootstrap: return "bootstrap";
    case GeneratorKind::Smote: return "smote";
    case GeneratorKind::BorderlineSmote: return "borderline_smote";
    case GeneratorKind::Adasyn: return "adasyn";
    case GeneratorKind::GaussianFit: return "gaussian_fit";
    case GeneratorKind::Jitter: return "jitter";
    case GeneratorKind::PerturbedSampling: return "perturbed_sampling";
    case GeneratorKind::Oracle: return "oracle";
    case GeneratorKind::SemiOracle: return "semi_oracle";
    case GeneratorKind::ModelSynthetic: return "model_synthetic";
  }
  return "unknown";
}

GeneratorKind parse_generator_kind(std::string_view text) {
  for (GeneratorKind kind :
       {GeneratorKind::Bootstrap, GeneratorKind::Smote, GeneratorKind::BorderlineSmote, GeneratorKind::Adasyn,
        GeneratorKind::GaussianFit, GeneratorKind::Jitter, GeneratorKind::PerturbedSampling, GeneratorKind::Oracle,
        GeneratorKind::SemiOracle, GeneratorKind::ModelSynthetic}) {
    if (text == to_string(kind)) return kind;
  }
  if (text == "borderline-smote" || text == "borderline") return GeneratorKind::BorderlineSmote;
  if (text == "gaussian-fit") return GeneratorKind::GaussianFit;
  if (text == "perturbed-sampling" || text == "perturbed") return GeneratorKind::PerturbedSampling;
  if (text == "semi-oracle") return GeneratorKind::SemiOracle;
  if (text == "model-synthetic") return GeneratorKind::ModelSynthetic;
  throw Error(ErrorCode::InvalidArgument, "unknown generator '" + std::string(text) + "'");
}

bool requires_model(GeneratorKind kind) {
  return kind == GeneratorKind::Oracle || kind == GeneratorKind::SemiOracle || kind == GeneratorKind::ModelSynthetic;
}

bool requires_full_data(GeneratorKind kind) {
  return kind == GeneratorKind::BorderlineSmote || kind == GeneratorKind::Adasyn;
}

bool is_prefix_stable(GeneratorKind kind) { return kind != GeneratorKind::Adasyn; }

void GeneratorSpec::validate() const {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (!(jitter_sigma >= 0.0) || !std::isfinite(jitter_sigma)) {
    throw Error(ErrorCode::InvalidArgument, "jitter_sigma must be finite and nonnegative");
  }
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw Error(ErrorCode::InvalidArgument, "ridge must be nonnegative");
  if (requires_model(kind) && !model_handle) {
    throw Error(ErrorCode::MissingModelHandle,
                std::string(to_string(kind)) + " generator needs a simulation model");
  }
}

namespace {

// (distance^2, index) pairs of all rows other than `skip`, ascending.
std::vector<std::pair<double, std::size_t>> sorted_distances(const RowMatrix& points, Eigen::Ref<const Eigen::RowVectorXd> q,
                                                             std::ptrdiff_t skip) {
  std::vector<std::pair<double, std::size_t>> out;
  out.reserve(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) {
    if (i == skip) continue;
    out.emplace_back((points.row(i) - q).squaredNorm(), static_cast<std::size_t>(i));
  }
  return out;
}

std::vector<std::size_t> k_smallest(std::vector<std::pair<double, std::size_t>> dist, std::size_t k) {
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

struct Context {
  const GeneratorSpec& spec;
  const RowMatrix& minority;
  const LabeledDataset* full;
  Index count;
  Rng rng;
  SyntheticBatch batch;
};

void sample_bootstrap(Context& c) {
  const Index n1 = c.minority.rows();
  c.batch.rows.resize(c.count, c.minority.cols());
  c.batch.audit.reserve(static_cast<std::size_t>(c.count));
  for (Index r = 0; r < c.count; ++r) {
    const std::size_t base = static_cast<std::size_t>(c.rng.uniform_index(static_cast<std::uint64_t>(n1)));
    c.batch.rows.row(r) = c.minority.row(static_cast<Index>(base));
    c.batch.audit.push_back({base, -1, 0.0});
  }
}

Eigen::RowVectorXd minority_sd(const RowMatrix& m) {
  if (m.rows() < 2) return Eigen::RowVectorXd::Zero(m.cols());
  const Eigen::RowVectorXd mean = m.colwise().mean();
  return ((m.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(m.rows() - 1)).sqrt();
}

void sample_jitter(Context& c, bool per_feature) {
  const Index n1 = c.minority.rows();
  const Index d = c.minority.cols();
  const Eigen::RowVectorXd scale = per_feature ? Eigen::RowVectorXd(c.spec.jitter_sigma * minority_sd(c.minority))
                                               : Eigen::RowVectorXd::Constant(d, c.spec.jitter_sigma);
  c.batch.rows.resize(c.count, d);
  c.batch.audit.reserve(static_cast<std::size_t>(c.count));
  for (Index r = 0; r < c.count; ++r) {
    const std::size_t base = static_cast<std::size_t>(c.rng.uniform_index(static_cast<std::uint64_t>(n1)));
    for (Index j = 0; j < d; ++j) {
      c.batch.rows(r, j) = c.minority(static_cast<Index>(base), j) + scale(j) * c.rng.normal();
    }
    c.batch.audit.push_back({base, -1, 0.0});
  }
}

std::vector<std::vector<std::size_t>> minority_neighbors(const RowMatrix& minority, int k) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(minority.rows()));
  for (Index i = 0; i < minority.rows(); ++i) out[static_cast<std::size_t>(i)] = knn_minority(minority, static_cast<std::size_t>(i), k);
  return out;
}

void emit_interpolated(Context& c, Index r, std::size_t base, const std::vector<std::size_t>& neighbors) {
  const std::size_t pick = neighbors[static_cast<std::size_t>(c.rng.uniform_index(neighbors.size()))];
  const double gamma = c.rng.uniform();
  const auto x = c.minority.row(static_cast<Index>(base));
  c.batch.rows.row(r) = x + gamma * (c.minority.row(static_cast<Index>(pick)) - x);
  c.batch.audit.push_back({base, static_cast<std::ptrdiff_t>(pick), gamma});
}

// Effective neighbor count for SMOTE-family kinds; returns 0 when the
// caller must fall back to jitter (single minority row).
int effective_k(Context& c) {
  const Index n1 = c.minority.rows();
  if (n1 == 1) {
    c.batch.warnings.push_back("only one minority row; " + std::string(to_string(c.spec.kind)) +
                               " fell back to jitter");
    return 0;
  }
  if (n1 <= c.spec.k) {
    c.batch.warnings.push_back("k reduced from " + std::to_string(c.spec.k) + " to " + std::to_string(n1 - 1) +
                               " because n1 = " + std::to_string(n1));
    return static_cast<int>(n1 - 1);
  }
  return c.spec.k;
}

void sample_smote_from(Context& c, const std::vector<std::size_t>& bases, int k) {
  const auto neighbors = minority_neighbors(c.minority, k);
  c.batch.rows.resize(c.count, c.minority.cols());
  c.batch.audit.reserve(static_cast<std::size_t>(c.count));
  for (Index r = 0; r < c.count; ++r) {
    const std::size_t base = bases[static_cast<std::size_t>(c.rng.uniform_index(bases.size()))];
    emit_interpolated(c, r, base, neighbors[base]);
  }
}

std::vector<std::size_t> all_rows(Index n) {
  std::vector<std::size_t> out(static_cast<std::size_t>(n));
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

// Majority count among the k nearest rows of the full data to each minority
// row. The minority row's own copy in the full data is skipped once.
std::vector<int> majority_neighbor_counts(const RowMatrix& minority, const LabeledDataset& full, int k,
                                          std::vector<std::string>& warnings) {
  const Index available = full.rows() - 1;
  int kk = k;
  if (available < k) {
    kk = static_cast<int>(std::max<Index>(available, 1));
    warnings.push_back("full-data neighbor count reduced to " + std::to_string(kk));
  }
  std::vector<int> out(static_cast<std::size_t>(minority.rows()), 0);
  for (Index i = 0; i < minority.rows(); ++i) {
    auto dist = sorted_distances(full.features(), minority.row(i), -1);
    std::sort(dist.begin(), dist.end());
    int seen = 0;
    bool skipped_self = false;
    for (const auto& [d2, idx] : dist) {
      if (!skipped_self && d2 == 0.0 && full.label(static_cast<Index>(idx)) == 1) {
        skipped_self = true;
        continue;
      }
      if (full.label(static_cast<Index>(idx)) == 0) ++out[static_cast<std::size_t>(i)];
      if (++seen == kk) break;
    }
  }
  return out;
}

void sample_borderline(Context& c) {
  const int k = effective_k(c);
  if (k == 0) return sample_jitter(c, true);
  const int kk = c.spec.k;
  const auto m = majority_neighbor_counts(c.minority, *c.full, kk, c.batch.warnings);
  std::vector<std::size_t> danger;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (2 * m[i] >= kk && m[i] < kk) danger.push_back(i);
  }
  if (danger.empty()) {
    c.batch.warnings.push_back("DANGER set empty; borderline_smote fell back to smote");
    return sample_smote_from(c, all_rows(c.minority.rows()), k);
  }
  sample_smote_from(c, danger, k);
}

void sample_adasyn(Context& c) {
  const int k = effective_k(c);
  if (k == 0) return sample_jitter(c, true);
  const auto m = majority_neighbor_counts(c.minority, *c.full, c.spec.k, c.batch.warnings);
  std::vector<double> r(m.size());
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    r[i] = static_cast<double>(m[i]) / static_cast<double>(c.spec.k);
    total += r[i];
  }
  if (total == 0.0) {
    c.batch.warnings.push_back("no minority row has majority neighbors; adasyn fell back to smote");
    return sample_smote_from(c, all_rows(c.minority.rows()), k);
  }
  const std::vector<Index> alloc = largest_remainder_allocation(r, c.count);
  const auto neighbors = minority_neighbors(c.minority, k);
  c.batch.rows.resize(c.count, c.minority.cols());
  c.batch.audit.reserve(static_cast<std::size_t>(c.count));
  Index row = 0;
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    for (Index g = 0; g < alloc[i]; ++g) emit_interpolated(c, row++, i, neighbors[i]);
  }
}

void sample_gaussian_fit(Context& c) {
  const Index d = c.minority.cols();
  const Eigen::RowVectorXd mean = c.minority.colwise().mean();
  Matrix cov = Matrix::Zero(d, d);
  if (c.minority.rows() >= 2) {
    const Matrix centered = c.minority.rowwise() - mean;
    cov = centered.transpose() * centered / static_cast<double>(c.minority.rows() - 1);
  }
  const double trace = cov.trace();
  const double jitter = trace > 0.0 ? c.spec.ridge * trace / static_cast<double>(d) : c.spec.ridge;
  cov.diagonal().array() += jitter;
  Matrix factor;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    c.batch.warnings.push_back("fitted covariance not positive definite; used clipped eigen square root");
  }
  c.batch.rows.resize(c.count, d);
  Vector z(d);
  for (Index r = 0; r < c.count; ++r) {
    for (Index j = 0; j < d; ++j) z(j) = c.rng.normal();
    c.batch.rows.row(r) = mean + (factor * z).transpose();
  }
}

void check_model_dim(const Context& c) {
  if (c.minority.rows() > 0 && c.minority.cols() != c.spec.model_handle->dim()) {
    throw Error(ErrorCode::DimensionMismatch, "model dimension differs from minority rows");
  }
}

}  // namespace

std::vector<std::size_t> knn_minority(const RowMatrix& points, std::size_t query, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (static_cast<Index>(query) >= points.rows()) throw Error(ErrorCode::InvalidArgument, "query index out of range");
  if (static_cast<Index>(k) > points.rows() - 1) {
    throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " exceeds the " +
                                          std::to_string(points.rows() - 1) + " other points");
  }
  return k_smallest(sorted_distances(points, points.row(static_cast<Index>(query)), static_cast<std::ptrdiff_t>(query)),
                    static_cast<std::size_t>(k));
}

std::vector<Index> largest_remainder_allocation(const std::vector<double>& weights, Index total) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "allocation weights must be nonnegative");
    sum += w;
  }
  if (!(sum > 0.0)) throw Error(ErrorCode::InvalidArgument, "allocation weights sum to zero");
  std::vector<Index> out(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  Index assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<Index>(std::floor(exact));
    assigned += out[i];
    remainders.emplace_back(exact - static_cast<double>(out[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; r = (r + 1) % remainders.size()) {
    ++out[remainders[r].second];
    ++assigned;
  }
  return out;
}

SyntheticBatch generate(const GeneratorSpec& spec, const RowMatrix& minority, const LabeledDataset* full_data,
                        Index count, const RngStream& stream) {
  spec.validate();
  if (count < 0) throw Error(ErrorCode::InvalidArgument, "synthetic count must be nonnegative");
  const bool model_kind = requires_model(spec.kind);
  if (!model_kind || spec.kind == GeneratorKind::SemiOracle) {
    if (minority.rows() == 0) {
      throw Error(ErrorCode::EmptyMinority, std::string(to_string(spec.kind)) + " needs at least one minority row");
    }
  }
  if (requires_full_data(spec.kind)) {
    if (full_data == nullptr) {
      throw Error(ErrorCode::MissingFullData, std::string(to_string(spec.kind)) + " needs the full dataset");
    }
    if (full_data->dim() != minority.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "full data and minority rows differ in dimension");
    }
  }

  Context c{spec, minority, full_data, count, Rng(stream), SyntheticBatch{}};
  c.batch.generator_used = spec;
  c.batch.seed_record = stream;
  const Index d = model_kind ? spec.model_handle->dim() : minority.cols();
  if (count == 0) {
    c.batch.rows.resize(0, d);
    return c.batch;
  }

  switch (spec.kind) {
    case GeneratorKind::Bootstrap:
      sample_bootstrap(c);
      break;
    case GeneratorKind::Smote: {
      const int k = effective_k(c);
      if (k == 0) {
        sample_jitter(c, true);
      } else {
        sample_smote_from(c, all_rows(minority.rows()), k);
      }
      break;
    }
    case GeneratorKind::BorderlineSmote:
      sample_borderline(c);
      break;
    case GeneratorKind::Adasyn:
      sample_adasyn(c);
      break;
    case GeneratorKind::GaussianFit:
      sample_gaussian_fit(c);
      break;
    case GeneratorKind::Jitter:
      sample_jitter(c, true);
      break;
    case GeneratorKind::PerturbedSampling:
      sample_jitter(c, false);
      break;
    case GeneratorKind::Oracle:
      check_model_dim(c);
      c.batch.rows = spec.model_handle->sample_minority(count, c.rng);
      break;
    case GeneratorKind::SemiOracle: {
      check_model_dim(c);
      const Eigen::RowVectorXd mean = minority.colwise().mean();
      c.batch.rows = spec.model_handle->sample_noise(count, c.rng);
      c.batch.rows.rowwise() += mean;
      break;
    }
    case GeneratorKind::ModelSynthetic:
      check_model_dim(c);
      c.batch.rows = spec.model_handle->sample_synthetic(count, c.rng);
      break;
  }
  return c.batch;
}

LabeledDataset augment(const LabeledDataset& data, const SyntheticBatch& batch) {
  if (batch.rows.rows() > 0 && batch.rows.cols() != data.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "synthetic rows have " + std::to_string(batch.rows.cols()) +
                                                  " columns, dataset has " + std::to_string(data.dim()));
  }
  return data.with_rows(batch.rows, 1);
}

}  // namespace synaug
