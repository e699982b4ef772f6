#include "synaug/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "synaug/error.hpp"

namespace synaug {

namespace {

// Per-row loss gradients, one row per sample.
Matrix gradient_rows(const Parameter& theta, const LossSpec& spec, const RowMatrix& rows, int label) {
  const Index d = rows.cols();
  const Index p = spec.parameter_size(d);
  if (theta.size() != p) {
    throw Error(ErrorCode::DimensionMismatch, "parameter length " + std::to_string(theta.size()) +
                                                  " does not fit feature length " + std::to_string(d));
  }
  Vector s = rows * theta.head(d);
  if (spec.fit_intercept) s.array() += theta(d);
  Matrix g(rows.rows(), p);
  for (Index i = 0; i < rows.rows(); ++i) {
    const double ds = loss_score_derivative(spec, s(i), label);
    g.row(i).head(d) = ds * rows.row(i);
    if (spec.fit_intercept) g(i, d) = ds;
  }
  return g;
}

struct MeanVar {
  Vector mean;
  Vector var;
};

MeanVar column_mean_var(const Matrix& g) {
  const double m = static_cast<double>(g.rows());
  MeanVar out;
  out.mean = g.colwise().mean().transpose();
  out.var = (g.rowwise() - out.mean.transpose()).array().square().colwise().sum().transpose() / (m - 1.0);
  return out;
}

Matrix sample_covariance(const Matrix& g) {
  const Eigen::RowVectorXd mean = g.colwise().mean();
  const Matrix centered = g.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(g.rows() - 1);
}

GradientEstimate difference_estimate(const Matrix& ga, const Matrix& gb) {
  const MeanVar a = column_mean_var(ga);
  const MeanVar b = column_mean_var(gb);
  GradientEstimate out;
  out.vector = a.mean - b.mean;
  out.standard_error =
      (a.var / static_cast<double>(ga.rows()) + b.var / static_cast<double>(gb.rows())).cwiseSqrt();
  out.n_used = ga.rows() + gb.rows();
  return out;
}

void require_rows(const RowMatrix& rows, const char* what) {
  if (rows.rows() < 2) {
    throw Error(ErrorCode::TooFewSamples, std::string(what) + " needs at least 2 rows, got " +
                                              std::to_string(rows.rows()));
  }
}

}  // namespace

GradientEstimate estimate_phi_gradient(const Parameter& theta, const LossSpec& spec, const RowMatrix& majority,
                                       const RowMatrix& minority) {
  require_rows(majority, "majority sample");
  require_rows(minority, "minority sample");
  return difference_estimate(gradient_rows(theta, spec, majority, 0), gradient_rows(theta, spec, minority, 1));
}

GradientEstimate estimate_psi_gradient(const Parameter& theta, const LossSpec& spec, const RowMatrix& synthetic,
                                       const RowMatrix& minority) {
  require_rows(synthetic, "synthetic sample");
  require_rows(minority, "minority sample");
  return difference_estimate(gradient_rows(theta, spec, synthetic, 1), gradient_rows(theta, spec, minority, 1));
}

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::LocalSymmetry: return "local_symmetry";
    case Regime::LocalAsymmetry: return "local_asymmetry";
    case Regime::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Regime classify_regime(const GradientEstimate& phi) {
  const double norm = phi.vector.norm();
  const double se = phi.standard_error.norm();
  if (norm <= 3.0 * se) return Regime::LocalSymmetry;
  if (norm >= 6.0 * se) return Regime::LocalAsymmetry;
  return Regime::Inconclusive;
}

double alignment_cosine(const Vector& u, const Vector& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) {
    throw Error(ErrorCode::ZeroVectorAngle, "angle undefined: a gradient vector is zero");
  }
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

BiasDiagnostics bias_vector(const GradientEstimate& phi, const GradientEstimate& psi, Index n0, Index n1,
                            Index n_syn, double rho) {
  if (n0 < 0 || n1 < 0 || n_syn < 0) throw Error(ErrorCode::InvalidArgument, "counts must be nonnegative");
  const double total = static_cast<double>(n0 + n1 + n_syn);
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "counts sum to zero");
  if (!(rho >= 0.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidRho, "rho must lie in [0, 1]");
  if (phi.vector.size() != psi.vector.size()) {
    throw Error(ErrorCode::DimensionMismatch, "phi and psi gradients differ in length");
  }
  BiasDiagnostics out;
  out.pi0 = static_cast<double>(n0) / total;
  out.pi1 = static_cast<double>(n1) / total;
  out.pi_tilde = static_cast<double>(n_syn) / total;
  out.rho = rho;
  out.b = (out.pi0 - rho) * phi.vector + out.pi_tilde * psi.vector;
  out.norm_phi = phi.vector.norm();
  out.norm_psi = psi.vector.norm();
  if (out.norm_phi > 0.0 && out.norm_psi > 0.0) {
    const double c = alignment_cosine(phi.vector, psi.vector);
    out.cos_angle = c;
    out.sin_angle = std::sqrt(std::max(0.0, 1.0 - c * c));
  }
  out.regime = classify_regime(phi);
  return out;
}

double bias_canceling_size(const Vector& grad_phi, const Vector& grad_psi, Index n0, Index n1) {
  if (grad_phi.size() != grad_psi.size()) {
    throw Error(ErrorCode::DimensionMismatch, "phi and psi gradients differ in length");
  }
  const double phi2 = grad_phi.squaredNorm();
  if (phi2 == 0.0) throw Error(ErrorCode::ZeroPhi, "grad phi is zero; no size cancels a zero asymmetry");
  const double denom = 1.0 - 2.0 * grad_phi.dot(grad_psi) / phi2;
  if (std::abs(denom) < 1e-12) {
    throw Error(ErrorCode::DegenerateDenominator,
                "2 (|psi|/|phi|) cos(angle) equals 1; the bias-canceling size is unbounded");
  }
  return static_cast<double>(n0 - n1) / denom;
}

double bias_canceling_size(const GradientEstimate& phi, const GradientEstimate& psi, Index n0, Index n1) {
  return bias_canceling_size(phi.vector, psi.vector, n0, n1);
}

std::string_view to_string(HessianSource source) {
  return source == HessianSource::ClosedForm ? "closed_form" : "empirical";
}

LeadingTerms leading_terms(const Vector& b, const Matrix& hessian_R, const Matrix& jacobian_b, const Matrix& sigma,
                           Index n_total, HessianSource source) {
  const Index p = b.size();
  if (hessian_R.rows() != p || hessian_R.cols() != p || jacobian_b.rows() != p || jacobian_b.cols() != p ||
      sigma.rows() != p || sigma.cols() != p) {
    throw Error(ErrorCode::DimensionMismatch, "leading-term inputs have inconsistent sizes");
  }
  if (n_total <= 0) throw Error(ErrorCode::InvalidArgument, "n_total must be positive");
  const Matrix h_sym = 0.5 * (hessian_R + hessian_R.transpose());
  Eigen::LLT<Matrix> llt(h_sym);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Hessian of the balanced risk is not positive definite");
  }
  const Matrix s_sym = 0.5 * (sigma + sigma.transpose());
  if (p > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s_sym, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw Error(ErrorCode::NotPositiveDefinite, "gradient covariance is not positive semidefinite");
    }
  }
  const Matrix a = hessian_R + jacobian_b;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularMatrix, "H + grad b is singular");
  const Matrix a_inv = lu.inverse();
  const Matrix m = a_inv * hessian_R * a_inv.transpose();
  LeadingTerms out;
  // The leading parameter shift is -A^-1 b; T1 is its H-weighted half norm.
  const Vector u = lu.solve(b);
  out.T1 = 0.5 * u.dot(hessian_R * u);
  out.T3_expected = (m * s_sym).trace() / (2.0 * static_cast<double>(n_total));
  out.n_total = n_total;
  out.hessians_source = source;
  return out;
}

Matrix bias_jacobian(const Matrix& hessian_phi, const Matrix& hessian_psi, double pi0, double pi_tilde, double rho) {
  return (pi0 - rho) * hessian_phi + pi_tilde * hessian_psi;
}

Matrix mean_loss_hessian(const Parameter& theta, const LossSpec& spec, const RowMatrix& rows, int label) {
  if (rows.rows() == 0) throw Error(ErrorCode::TooFewSamples, "Hessian estimate needs at least one row");
  const Index d = rows.cols();
  const Index p = spec.parameter_size(d);
  if (theta.size() != p) throw Error(ErrorCode::DimensionMismatch, "parameter does not fit feature length");
  Matrix z(rows.rows(), p);
  z.leftCols(d) = rows;
  if (spec.fit_intercept) z.col(d).setOnes();
  const Vector s = z * theta;
  Vector c(rows.rows());
  for (Index i = 0; i < rows.rows(); ++i) c(i) = loss_score_curvature(spec, s(i), label);
  const Matrix scaled = z.array().colwise() * c.array();
  return z.transpose() * scaled / static_cast<double>(rows.rows());
}

GradientCovariances estimate_gradient_covariances(const Parameter& theta, const LossSpec& spec,
                                                  const RowMatrix& majority, const RowMatrix& minority,
                                                  const RowMatrix* synthetic) {
  require_rows(majority, "majority sample");
  require_rows(minority, "minority sample");
  GradientCovariances out;
  out.sigma0 = sample_covariance(gradient_rows(theta, spec, majority, 0));
  out.sigma1 = sample_covariance(gradient_rows(theta, spec, minority, 1));
  out.n0 = majority.rows();
  out.n1 = minority.rows();
  out.pooled = static_cast<double>(out.n0) * out.sigma0 + static_cast<double>(out.n1) * out.sigma1;
  if (synthetic != nullptr) {
    require_rows(*synthetic, "synthetic sample");
    out.sigma_tilde = sample_covariance(gradient_rows(theta, spec, *synthetic, 1));
    out.n_syn = synthetic->rows();
    out.pooled += static_cast<double>(out.n_syn) * *out.sigma_tilde;
  }
  out.pooled /= static_cast<double>(out.n0 + out.n1 + out.n_syn);
  return out;
}

double collinear_delta_size(Index n0, Index n1, int s, double n1_for_log) {
  if (s != 1 && s != -1) throw Error(ErrorCode::InvalidArgument, "sign must be +1 or -1");
  if (!(n1_for_log > 1.0)) throw Error(ErrorCode::NonPositiveInput, "log n1 must be positive");
  const double root = std::sqrt(std::log(n1_for_log));
  const double denom = root - 2.0 * s;
  if (denom <= 1e-9) {
    throw Error(ErrorCode::DegenerateDenominator, "sqrt(log n1) - 2 s is not positive");
  }
  return root / denom * static_cast<double>(n0 - n1);
}

}  // namespace synaug
