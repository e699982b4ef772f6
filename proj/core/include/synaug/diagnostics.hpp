#pragma once

#include <optional>
#include <string_view>

#include "synaug/dataset.hpp"
#include "synaug/losses.hpp"

namespace synaug {

/// Difference of two mean loss gradients with its per-coordinate standard
/// error sqrt(var_a/m_a + var_b/m_b).
struct GradientEstimate {
  Vector vector;
  Vector standard_error;
  Index n_used = 0;
};

/// Gradient of phi(theta) = E_0 loss(theta; x, 0) - E_1 loss(theta; x, 1),
/// estimated from the two samples. Throws TooFewSamples when either has
/// fewer than two rows.
GradientEstimate estimate_phi_gradient(const Parameter& theta, const LossSpec& spec, const RowMatrix& majority,
                                       const RowMatrix& minority);

/// Gradient of psi(theta) = E_syn loss(theta; x, 1) - E_1 loss(theta; x, 1).
GradientEstimate estimate_psi_gradient(const Parameter& theta, const LossSpec& spec, const RowMatrix& synthetic,
                                       const RowMatrix& minority);

enum class Regime { LocalSymmetry, LocalAsymmetry, Inconclusive };

std::string_view to_string(Regime regime);

/// local_symmetry when |phi| <= 3 |SE|, local_asymmetry when |phi| >= 6 |SE|.
Regime classify_regime(const GradientEstimate& phi);

struct BiasDiagnostics {
  double pi0 = 0.0;
  double pi1 = 0.0;
  double pi_tilde = 0.0;
  double rho = 0.5;
  Vector b;
  /// Angle between grad phi and grad psi; empty when either is zero.
  std::optional<double> cos_angle;
  std::optional<double> sin_angle;
  double norm_phi = 0.0;
  double norm_psi = 0.0;
  Regime regime = Regime::Inconclusive;
};

/// b = (pi0 - rho) grad phi + pi_tilde grad psi with proportions from the
/// counts. The angle is left empty rather than raising when a gradient is
/// zero, so the bias vector stays available; use alignment_cosine for the
/// raising variant.
BiasDiagnostics bias_vector(const GradientEstimate& phi, const GradientEstimate& psi, Index n0, Index n1,
                            Index n_syn, double rho = 0.5);

/// cos of the angle between u and v. Throws ZeroVectorAngle if either is 0.
double alignment_cosine(const Vector& u, const Vector& v);

/// Synthetic size (n0 - n1) / (1 - 2 <phi, psi> / |phi|^2) that removes the
/// component of b along grad phi. May be negative or non-integer.
/// Throws ZeroPhi and DegenerateDenominator.
double bias_canceling_size(const Vector& grad_phi, const Vector& grad_psi, Index n0, Index n1);
double bias_canceling_size(const GradientEstimate& phi, const GradientEstimate& psi, Index n0, Index n1);

enum class HessianSource { ClosedForm, Empirical };
std::string_view to_string(HessianSource source);

struct LeadingTerms {
  double T1 = 0.0;
  double T3_expected = 0.0;
  Index n_total = 0;
  HessianSource hessians_source = HessianSource::Empirical;
};

/// With A = H + J: T1 = 1/2 b^T A^-1 H A^-1 b and
/// T3 = tr(A^-1 H A^-1 Sigma) / (2 n_total).
/// Throws NotPositiveDefinite (H not PD or Sigma not PSD) and SingularMatrix.
LeadingTerms leading_terms(const Vector& b, const Matrix& hessian_R, const Matrix& jacobian_b, const Matrix& sigma,
                           Index n_total, HessianSource source = HessianSource::Empirical);

/// Jacobian of b: (pi0 - rho) hess phi + pi_tilde hess psi.
Matrix bias_jacobian(const Matrix& hessian_phi, const Matrix& hessian_psi, double pi0, double pi_tilde,
                     double rho = 0.5);

/// Mean loss Hessian over `rows`, all labelled `label`.
Matrix mean_loss_hessian(const Parameter& theta, const LossSpec& spec, const RowMatrix& rows, int label);

struct GradientCovariances {
  Matrix sigma0;
  Matrix sigma1;
  std::optional<Matrix> sigma_tilde;
  Matrix pooled;
  Index n0 = 0;
  Index n1 = 0;
  Index n_syn = 0;
};

/// Sample covariances of per-row loss gradients in each set and the pooled
/// (n0 S0 + n1 S1 + n_syn S~) / (n0 + n1 + n_syn). `synthetic` may be null.
GradientCovariances estimate_gradient_covariances(const Parameter& theta, const LossSpec& spec,
                                                  const RowMatrix& majority, const RowMatrix& minority,
                                                  const RowMatrix* synthetic);

/// Synthetic size sqrt(L)/(sqrt(L) - 2s) (n0 - n1) with L = log(n1_for_log)
/// for the collinear toy model; s is +1 or -1.
double collinear_delta_size(Index n0, Index n1, int s, double n1_for_log);

}  // namespace synaug
