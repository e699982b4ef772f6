#include "synaug/sim_models.hpp"

#include <cmath>

#include "synaug/error.hpp"

namespace synaug {

namespace {

void require_positive_count(Index n, int label) {
  if (n < 1) {
    throw Error(label == 1 ? ErrorCode::TooFewMinority : ErrorCode::TooFewSamples,
                std::string(label == 1 ? "n1" : "n0") + " must be at least 1");
  }
}

RowMatrix standard_normal_rows(Index d, Index count, Rng& rng) {
  RowMatrix out(count, d);
  for (Index i = 0; i < count; ++i) {
    for (Index j = 0; j < d; ++j) out(i, j) = rng.normal();
  }
  return out;
}

void require_label(int label) {
  if (label != 0 && label != 1) throw Error(ErrorCode::InvalidArgument, "label must be 0 or 1");
}

bool collinear_with(const Vector& base, const Vector& other, double& coefficient) {
  const double nb = base.squaredNorm();
  if (nb == 0.0) return false;
  coefficient = base.dot(other) / nb;
  return (other - coefficient * base).norm() <= 1e-14 * std::max(1.0, other.norm());
}

}  // namespace

RowMatrix SimModel::sample_noise(Index, Rng&) const {
  throw Error(ErrorCode::Unsupported, std::string(kind()) + " model has no additive noise sampler");
}

RowMatrix SimModel::sample_synthetic(Index, Rng&) const {
  throw Error(ErrorCode::Unsupported, std::string(kind()) + " model has no designated synthetic distribution");
}

double SimModel::balanced_risk(const Parameter&) const {
  throw Error(ErrorCode::Unsupported, std::string(kind()) + " model has no closed-form balanced risk");
}

LabeledDataset SimModel::sample(Index n0, Index n1, const RngStream& stream) const {
  if (n0 < 0 || n1 < 0) throw Error(ErrorCode::InvalidArgument, "class counts must be nonnegative");
  Rng r0(derive_stream(stream, 0));
  Rng r1(derive_stream(stream, 1));
  const RowMatrix majority = sample_class(0, n0, r0);
  const RowMatrix minority = sample_class(1, n1, r1);
  RowMatrix x(n0 + n1, dim());
  x.topRows(n0) = majority;
  x.bottomRows(n1) = minority;
  std::vector<int> y(static_cast<std::size_t>(n0 + n1), 0);
  std::fill(y.begin() + n0, y.end(), 1);
  return LabeledDataset(std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------

TwoGaussianModel::TwoGaussianModel(Vector mu1, std::optional<Vector> mu_syn)
    : mu1_(std::move(mu1)), mu_syn_(std::move(mu_syn)) {
  if (mu1_.size() < 1) throw Error(ErrorCode::InvalidArgument, "mu1 must have at least one entry");
  if (mu_syn_ && mu_syn_->size() != mu1_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "mu_syn and mu1 differ in length");
  }
}

RowMatrix TwoGaussianModel::sample_class(int label, Index count, Rng& rng) const {
  require_label(label);
  RowMatrix out = standard_normal_rows(dim(), count, rng);
  if (label == 1) out.rowwise() += mu1_.transpose();
  return out;
}

RowMatrix TwoGaussianModel::sample_noise(Index count, Rng& rng) const {
  return standard_normal_rows(dim(), count, rng);
}

RowMatrix TwoGaussianModel::sample_synthetic(Index count, Rng& rng) const {
  if (!mu_syn_) return SimModel::sample_synthetic(count, rng);
  RowMatrix out = standard_normal_rows(dim(), count, rng);
  out.rowwise() += mu_syn_->transpose();
  return out;
}

double TwoGaussianModel::balanced_risk(const Parameter& theta) const { return gaussian_balanced_risk(theta, mu1_); }

Parameter TwoGaussianModel::theta_star() const { return gaussian_theta_star(mu1_); }

LabeledDataset sample_two_gaussian(const TwoGaussianModel& model, Index n0, Index n1, const RngStream& stream) {
  require_positive_count(n0, 0);
  require_positive_count(n1, 1);
  return model.sample(n0, n1, stream);
}

Parameter gaussian_theta_star(const Vector& mu1) {
  const Index d = mu1.size();
  const Matrix a = mu1 * mu1.transpose() + 2.0 * Matrix::Identity(d, d);
  return a.llt().solve(mu1);
}

double gaussian_balanced_risk(const Parameter& theta, const Vector& mu1) {
  if (theta.size() != mu1.size()) throw Error(ErrorCode::DimensionMismatch, "theta and mu1 differ in length");
  const double r = theta.dot(mu1) - 1.0;
  return theta.squaredNorm() + 0.5 * r * r;
}

Parameter gaussian_theta_tilde(const Vector& mu1, const Vector& mu_syn, double pi1, double pi_tilde) {
  if (mu1.size() != mu_syn.size()) throw Error(ErrorCode::DimensionMismatch, "mu_syn and mu1 differ in length");
  const Index d = mu1.size();
  const Matrix a = Matrix::Identity(d, d) + pi1 * mu1 * mu1.transpose() + pi_tilde * mu_syn * mu_syn.transpose();
  return a.llt().solve(pi1 * mu1 + pi_tilde * mu_syn);
}

GaussianClosedForms gaussian_closed_forms(const Vector& mu1, const Vector& mu_syn, double pi1, double pi_tilde) {
  if (mu1.size() != mu_syn.size()) throw Error(ErrorCode::DimensionMismatch, "mu_syn and mu1 differ in length");
  if (pi1 < 0.0 || pi_tilde < 0.0 || pi1 + pi_tilde > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "proportions must be nonnegative with pi1 + pi_tilde <= 1");
  }
  const Index d = mu1.size();
  GaussianClosedForms out;
  out.mu1 = mu1;
  out.mu_syn = mu_syn;
  out.theta_star = gaussian_theta_star(mu1);
  out.theta_tilde = gaussian_theta_tilde(mu1, mu_syn, pi1, pi_tilde);
  const double r1 = out.theta_star.dot(mu1) - 1.0;
  const double rs = out.theta_star.dot(mu_syn) - 1.0;
  out.grad_phi_at_star = -2.0 * r1 * mu1;
  out.grad_psi_at_star = 2.0 * rs * mu_syn - 2.0 * r1 * mu1;
  out.hessian_R = 2.0 * Matrix::Identity(d, d) + mu1 * mu1.transpose();
  out.hessian_phi = -2.0 * mu1 * mu1.transpose();
  out.hessian_psi = 2.0 * mu_syn * mu_syn.transpose() - 2.0 * mu1 * mu1.transpose();
  return out;
}

double GaussianClosedForms::bias_cancel_multiplier() const {
  const double mu = mu1.norm();
  if (mu == 0.0) throw Error(ErrorCode::DegenerateGenerator, "mu1 = 0: classes coincide, no asymmetry to cancel");
  double a = 0.0;
  if (collinear_with(mu1, mu_syn, a)) {
    a *= mu;  // signed length of mu_syn along mu1
    if (std::abs(a - mu) <= 1e-12 * std::max(1.0, mu)) return 1.0;
    if (std::abs(a * mu - 2.0) <= 1e-12) {
      throw Error(ErrorCode::DegenerateGenerator,
                  "a = 2/mu: the synthetic gradient vanishes at theta* without matching the minority mean");
    }
    const double denom = a * (mu * mu + 2.0) - mu * (a * a + 1.0);
    if (std::abs(denom) <= 1e-12) {
      throw Error(ErrorCode::DegenerateGenerator, "bias-canceling size is unbounded for this generator mean");
    }
    return mu / denom;
  }
  const double phi2 = grad_phi_at_star.squaredNorm();
  const double denom = 1.0 - 2.0 * grad_phi_at_star.dot(grad_psi_at_star) / phi2;
  if (std::abs(denom) <= 1e-12) {
    throw Error(ErrorCode::DegenerateGenerator, "bias-canceling size is unbounded for this generator mean");
  }
  return 1.0 / denom;
}

double GaussianClosedForms::bias_cancel_n_syn(Index n0, Index n1) const {
  return bias_cancel_multiplier() * static_cast<double>(n0 - n1);
}

// ---------------------------------------------------------------------------

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::UniformCube: return "uniform_cube";
    case NoiseKind::Rademacher: return "rademacher";
    case NoiseKind::UniformSphere: return "uniform_sphere";
    case NoiseKind::Gaussian: return "gaussian";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view text) {
  if (text == "uniform_cube" || text == "cube") return NoiseKind::UniformCube;
  if (text == "rademacher") return NoiseKind::Rademacher;
  if (text == "uniform_sphere" || text == "sphere") return NoiseKind::UniformSphere;
  if (text == "gaussian") return NoiseKind::Gaussian;
  throw Error(ErrorCode::InvalidArgument, "unknown noise kind '" + std::string(text) + "'");
}

RowMatrix sample_noise_vectors(NoiseKind kind, Index d, Index count, Rng& rng) {
  RowMatrix out(count, d);
  const double cube = std::sqrt(3.0);
  const double radius = std::sqrt(static_cast<double>(d));
  for (Index i = 0; i < count; ++i) {
    switch (kind) {
      case NoiseKind::UniformCube:
        for (Index j = 0; j < d; ++j) out(i, j) = cube * (2.0 * rng.uniform() - 1.0);
        break;
      case NoiseKind::Rademacher:
        for (Index j = 0; j < d; ++j) out(i, j) = rng.rademacher();
        break;
      case NoiseKind::UniformSphere: {
        double norm = 0.0;
        do {
          for (Index j = 0; j < d; ++j) out(i, j) = rng.normal();
          norm = out.row(i).norm();
        } while (norm == 0.0);
        out.row(i) *= radius / norm;
        break;
      }
      case NoiseKind::Gaussian:
        for (Index j = 0; j < d; ++j) out(i, j) = rng.normal();
        break;
    }
  }
  return out;
}

MeanShiftModel::MeanShiftModel(Vector mu, NoiseKind noise) : mu_(std::move(mu)), noise_(noise) {
  if (mu_.size() < 1) throw Error(ErrorCode::InvalidArgument, "mu must have at least one entry");
}

RowMatrix MeanShiftModel::sample_class(int label, Index count, Rng& rng) const {
  require_label(label);
  RowMatrix out = sample_noise_vectors(noise_, dim(), count, rng);
  if (label == 1) {
    out.rowwise() += mu_.transpose();
  } else {
    out.rowwise() -= mu_.transpose();
  }
  return out;
}

RowMatrix MeanShiftModel::sample_noise(Index count, Rng& rng) const {
  return sample_noise_vectors(noise_, dim(), count, rng);
}

double MeanShiftModel::balanced_risk(const Parameter& theta) const {
  if (theta.size() != mu_.size()) throw Error(ErrorCode::DimensionMismatch, "theta and mu differ in length");
  const double r = theta.dot(mu_) - 0.5;
  return r * r + theta.squaredNorm();
}

Parameter MeanShiftModel::theta_star() const { return mean_shift_theta_star(*this); }

LabeledDataset sample_mean_shift(const MeanShiftModel& model, Index n0, Index n1, const RngStream& stream) {
  require_positive_count(n0, 0);
  require_positive_count(n1, 1);
  return model.sample(n0, n1, stream);
}

Parameter mean_shift_theta_star(const MeanShiftModel& model) {
  const Vector& mu = model.mu();
  const Index d = mu.size();
  const Matrix a = mu * mu.transpose() + Matrix::Identity(d, d);
  return 0.5 * a.llt().solve(mu);
}

// ---------------------------------------------------------------------------

double discrete_alpha(double a, double b, double c) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw Error(ErrorCode::NonPositiveInput, "a, b and c must be positive");
  const double sa = sigmoid(c * a);
  const double sb = sigmoid(c * b);
  const double wa = a * sa * (1.0 - sa);
  const double wb = b * sb * (1.0 - sb);
  return wb / (wa + wb);
}

double sigmoid_minority_probability(double a, double b, double c, double alpha) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw Error(ErrorCode::NonPositiveInput, "a, b and c must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  return alpha * (1.0 - sigmoid(c * a)) + (1.0 - alpha) * sigmoid(c * b);
}

SigmoidBernoulliModel::SigmoidBernoulliModel(double c, Vector v, double a, double b, std::optional<double> alpha,
                                             SigmoidNoise noise)
    : c_(c), v_(std::move(v)), a_(a), b_(b), noise_(std::move(noise)) {
  if (v_.size() < 1) throw Error(ErrorCode::InvalidArgument, "v must have at least one entry");
  const double norm = v_.norm();
  if (std::abs(norm - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "v must be a unit vector");
  alpha_ = alpha ? *alpha : discrete_alpha(a, b, c);
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  if (!(c_ > 0.0 && a_ > 0.0 && b_ > 0.0)) throw Error(ErrorCode::NonPositiveInput, "a, b and c must be positive");
  if (noise_.shift.size() != 0 && noise_.shift.size() != v_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "noise shift length differs from dimension");
  }
  if (noise_.scale < 0.0) throw Error(ErrorCode::InvalidArgument, "noise scale must be nonnegative");
}

RowMatrix SigmoidBernoulliModel::sample_orthogonal_noise(Index count, Rng& rng) const {
  const Index d = dim();
  RowMatrix w = RowMatrix::Zero(count, d);
  const bool has_shift = noise_.shift.size() == d && noise_.shift.norm() > 0.0;
  if (d == 1 || (noise_.scale == 0.0 && !has_shift)) return w;
  for (Index i = 0; i < count; ++i) {
    for (Index j = 0; j < d; ++j) w(i, j) = noise_.scale * rng.normal();
    if (has_shift) w.row(i) += rng.rademacher() * noise_.shift.transpose();
    w.row(i) -= w.row(i).dot(v_.transpose()) * v_.transpose();
  }
  return w;
}

RowMatrix SigmoidBernoulliModel::sample_class(int label, Index count, Rng& rng) const {
  require_label(label);
  const double p_low_and_1 = alpha_ * (1.0 - sigmoid(c_ * a_));
  const double p1 = minority_probability();
  const double p_low = label == 1 ? p_low_and_1 / p1 : (alpha_ - p_low_and_1) / (1.0 - p1);
  RowMatrix out(count, dim());
  for (Index i = 0; i < count; ++i) {
    const double t = rng.uniform() < p_low ? -a_ : b_;
    RowMatrix w = sample_orthogonal_noise(1, rng);
    out.row(i) = t * v_.transpose() + w.row(0);
  }
  return out;
}

LabeledDataset sample_sigmoid_bernoulli(const SigmoidBernoulliModel& model, Index n, const RngStream& stream) {
  if (n < 1) throw Error(ErrorCode::TooFewSamples, "n must be at least 1");
  Rng rng(stream);
  RowMatrix x(n, model.dim());
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double t = rng.uniform() < model.alpha() ? -model.a() : model.b();
    RowMatrix w = model.sample_orthogonal_noise(1, rng);
    x.row(i) = t * model.v().transpose() + w.row(0);
    y[static_cast<std::size_t>(i)] = rng.uniform() < sigmoid(model.c() * t) ? 1 : 0;
  }
  return LabeledDataset(std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------

GaussianMixtureModel::GaussianMixtureModel(Index d, double delta, double xi) : d_(d), delta_(delta), xi_(xi) {
  if (d_ < 2) throw Error(ErrorCode::InvalidArgument, "mixture model needs d >= 2");
}

RowMatrix GaussianMixtureModel::sample_class(int label, Index count, Rng& rng) const {
  require_label(label);
  RowMatrix out(count, d_);
  for (Index i = 0; i < count; ++i) {
    for (Index j = 0; j < d_; ++j) out(i, j) = rng.normal();
    if (label == 1) {
      out(i, 0) += delta_;
      out(i, 1) += rng.rademacher() * 0.5 * xi_;
    }
  }
  return out;
}

Parameter GaussianMixtureModel::theta_star() const {
  throw Error(ErrorCode::Unsupported, "gaussian_mixture model has no closed-form optimum");
}

}  // namespace synaug
