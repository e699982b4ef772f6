#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "synaug/dataset.hpp"
#include "synaug/losses.hpp"
#include "synaug/rng.hpp"

namespace synaug {

/// A data-generating process with class-conditional samplers.
///
/// Class 0 is the majority and class 1 the minority. Samplers draw rows one
/// after another from a single stream, so the first k rows of a request for
/// n >= k rows equal a request for k rows.
class SimModel {
 public:
  virtual ~SimModel() = default;

  virtual std::string_view kind() const = 0;
  virtual Index dim() const = 0;

  /// Rows from the class-conditional distribution of `label`.
  virtual RowMatrix sample_class(int label, Index count, Rng& rng) const = 0;

  /// Noise vectors whose shift by the minority center gives a minority row.
  /// Throws Unsupported for models without an additive noise structure.
  virtual RowMatrix sample_noise(Index count, Rng& rng) const;

  /// Rows from the model's designated synthetic distribution. Throws
  /// Unsupported when the model has none.
  virtual RowMatrix sample_synthetic(Index count, Rng& rng) const;
  virtual bool has_synthetic() const { return false; }

  /// Loss the model's closed forms refer to.
  virtual LossSpec natural_loss() const = 0;

  /// Balanced population risk under natural_loss(). Throws Unsupported when
  /// not available in closed form.
  virtual double balanced_risk(const Parameter& theta) const;
  virtual bool has_closed_form_risk() const { return false; }

  /// Minimizer of the balanced population risk under natural_loss().
  virtual Parameter theta_star() const = 0;

  /// Majority rows (stream child 0) followed by minority rows (child 1).
  LabeledDataset sample(Index n0, Index n1, const RngStream& stream) const;

  RowMatrix sample_minority(Index count, Rng& rng) const { return sample_class(1, count, rng); }
};

using SimModelHandle = std::shared_ptr<const SimModel>;

// ---------------------------------------------------------------------------
// Two Gaussians with identity covariance: class 0 ~ N(0, I), class 1 ~ N(mu1, I),
// optional synthetic distribution N(mu_syn, I). Risk under the squared loss
// with raw targets.

class TwoGaussianModel final : public SimModel {
 public:
  explicit TwoGaussianModel(Vector mu1, std::optional<Vector> mu_syn = std::nullopt);

  std::string_view kind() const override { return "two_gaussian"; }
  Index dim() const override { return mu1_.size(); }
  RowMatrix sample_class(int label, Index count, Rng& rng) const override;
  RowMatrix sample_noise(Index count, Rng& rng) const override;
  RowMatrix sample_synthetic(Index count, Rng& rng) const override;
  bool has_synthetic() const override { return mu_syn_.has_value(); }
  LossSpec natural_loss() const override { return LossSpec::squared_raw(); }
  double balanced_risk(const Parameter& theta) const override;
  bool has_closed_form_risk() const override { return true; }
  Parameter theta_star() const override;

  const Vector& mu1() const { return mu1_; }
  const std::optional<Vector>& mu_syn() const { return mu_syn_; }

 private:
  Vector mu1_;
  std::optional<Vector> mu_syn_;
};

/// Throws TooFewMinority / TooFewSamples when a count is below 1.
LabeledDataset sample_two_gaussian(const TwoGaussianModel& model, Index n0, Index n1, const RngStream& stream);

/// (mu1 mu1^T + 2 I)^-1 mu1.
Parameter gaussian_theta_star(const Vector& mu1);

/// |theta|^2 + 1/2 (theta^T mu1 - 1)^2.
double gaussian_balanced_risk(const Parameter& theta, const Vector& mu1);

struct GaussianClosedForms {
  Vector mu1;
  Vector mu_syn;
  Parameter theta_star;
  /// Minimizer of the augmented population risk with proportions pi1, pi_tilde.
  Parameter theta_tilde;
  Vector grad_phi_at_star;
  Vector grad_psi_at_star;
  Matrix hessian_R;
  Matrix hessian_phi;
  Matrix hessian_psi;

  /// Bias-canceling synthetic size divided by (n0 - n1). Throws
  /// DegenerateGenerator when the size is undefined for this generator.
  double bias_cancel_multiplier() const;
  double bias_cancel_n_syn(Index n0, Index n1) const;
};

GaussianClosedForms gaussian_closed_forms(const Vector& mu1, const Vector& mu_syn, double pi1, double pi_tilde);

/// Minimizer of |theta|^2 + pi1 (theta^T mu1 - 1)^2 + pi_tilde (theta^T mu_syn - 1)^2.
Parameter gaussian_theta_tilde(const Vector& mu1, const Vector& mu_syn, double pi1, double pi_tilde);

// ---------------------------------------------------------------------------
// Mean shift: class 1 ~ mu + xi, class 0 ~ -mu + xi, xi mean zero with
// identity covariance. Risk under the squared loss with centered targets.

enum class NoiseKind { UniformCube, Rademacher, UniformSphere, Gaussian };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view text);

/// `count` iid noise vectors of dimension d.
RowMatrix sample_noise_vectors(NoiseKind kind, Index d, Index count, Rng& rng);

class MeanShiftModel final : public SimModel {
 public:
  MeanShiftModel(Vector mu, NoiseKind noise);

  std::string_view kind() const override { return "mean_shift"; }
  Index dim() const override { return mu_.size(); }
  RowMatrix sample_class(int label, Index count, Rng& rng) const override;
  RowMatrix sample_noise(Index count, Rng& rng) const override;
  LossSpec natural_loss() const override { return LossSpec::squared_centered(); }
  /// (theta^T mu - 1/2)^2 + |theta|^2.
  double balanced_risk(const Parameter& theta) const override;
  bool has_closed_form_risk() const override { return true; }
  Parameter theta_star() const override;

  const Vector& mu() const { return mu_; }
  NoiseKind noise() const { return noise_; }

 private:
  Vector mu_;
  NoiseKind noise_;
};

LabeledDataset sample_mean_shift(const MeanShiftModel& model, Index n0, Index n1, const RngStream& stream);

/// 1/2 (mu mu^T + I)^-1 mu.
Parameter mean_shift_theta_star(const MeanShiftModel& model);

// ---------------------------------------------------------------------------
// Sigmoid-Bernoulli: x = T v + W with T in {-a, b}, P(T = -a) = alpha,
// W orthogonal to v and independent of T, P(y = 1 | x) = sigma(c v^T x).
// W is the projection onto v-perp of z + s * shift, z ~ N(0, noise_scale^2 I),
// s = +-1 equally likely. noise_scale = 0 and shift = 0 give W = 0.

/// alpha making E[T sigma(cT)(1 - sigma(cT))] vanish. Throws NonPositiveInput.
double discrete_alpha(double a, double b, double c);

/// P(y = 1) = alpha (1 - sigma(c a)) + (1 - alpha) sigma(c b).
double sigmoid_minority_probability(double a, double b, double c, double alpha);

struct SigmoidNoise {
  double scale = 1.0;
  Vector shift;  // length d; empty means zero
};

class SigmoidBernoulliModel final : public SimModel {
 public:
  SigmoidBernoulliModel(double c, Vector v, double a, double b, std::optional<double> alpha, SigmoidNoise noise);

  std::string_view kind() const override { return "sigmoid_bernoulli"; }
  Index dim() const override { return v_.size(); }
  /// Exact class-conditional draw: T from its posterior given the label, W
  /// from its marginal.
  RowMatrix sample_class(int label, Index count, Rng& rng) const override;
  LossSpec natural_loss() const override { return LossSpec::logistic(); }
  /// c v. Under the alpha from discrete_alpha this is also the balanced
  /// minimizer; the property is checked numerically in the test suite.
  Parameter theta_star() const override { return c_ * v_; }

  double alpha() const { return alpha_; }
  double minority_probability() const { return sigmoid_minority_probability(a_, b_, c_, alpha_); }
  double c() const { return c_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const Vector& v() const { return v_; }

  /// One W draw per row.
  RowMatrix sample_orthogonal_noise(Index count, Rng& rng) const;

 private:
  double c_;
  Vector v_;
  double a_;
  double b_;
  double alpha_;
  SigmoidNoise noise_;
};

/// n iid (x, y) pairs with realized class counts.
LabeledDataset sample_sigmoid_bernoulli(const SigmoidBernoulliModel& model, Index n, const RngStream& stream);

// ---------------------------------------------------------------------------
// Majority N(0, I); minority an equal mixture of N(delta e1 + xi/2 e2, I) and
// N(delta e1 - xi/2 e2, I). Requires d >= 2.

class GaussianMixtureModel final : public SimModel {
 public:
  GaussianMixtureModel(Index d, double delta, double xi);

  std::string_view kind() const override { return "gaussian_mixture"; }
  Index dim() const override { return d_; }
  RowMatrix sample_class(int label, Index count, Rng& rng) const override;
  LossSpec natural_loss() const override { return LossSpec::logistic(true); }
  /// Not available in closed form; throws Unsupported.
  Parameter theta_star() const override;

  double delta() const { return delta_; }
  double xi() const { return xi_; }

 private:
  Index d_;
  double delta_;
  double xi_;
};

}  // namespace synaug
