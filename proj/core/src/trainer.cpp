#include "synaug/trainer.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "synaug/error.hpp"

namespace synaug {

std::string_view to_string(StepRule rule) {
  switch (rule) {
    case StepRule::NewtonBacktracking: return "newton_backtracking";
    case StepRule::GradientBacktracking: return "gradient_backtracking";
    case StepRule::ClosedForm: return "closed_form";
  }
  return "unknown";
}

StepRule parse_step_rule(std::string_view text) {
  if (text == "newton_backtracking" || text == "newton") return StepRule::NewtonBacktracking;
  if (text == "gradient_backtracking" || text == "gradient") return StepRule::GradientBacktracking;
  if (text == "closed_form") return StepRule::ClosedForm;
  throw Error(ErrorCode::InvalidArgument, "unknown step rule '" + std::string(text) + "'");
}

double FitConfig::resolved_ridge(const LossSpec& spec) const {
  if (ridge) {
    if (!(*ridge >= 0.0) || !std::isfinite(*ridge)) {
      throw Error(ErrorCode::InvalidArgument, "ridge must be a finite nonnegative number");
    }
    return *ridge;
  }
  switch (spec.family) {
    case LossFamily::Squared: return 0.0;
    case LossFamily::Logistic: return 1e-8;
    case LossFamily::Hinge: return 1e-2;
  }
  return 0.0;
}

namespace {

constexpr double kDivergenceNorm = 1e6;
constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

// Weighted ERM over a column-major design matrix. The intercept column, when
// present, is last and excluded from the penalty.
class Problem {
 public:
  Problem(const LabeledDataset& data, std::vector<double> weights, const LossSpec& spec, double ridge)
      : spec_(spec), ridge_(ridge), w_(std::move(weights)) {
    const Index n = data.rows();
    const Index d = data.dim();
    p_ = spec.parameter_size(d);
    z_.resize(n, p_);
    z_.leftCols(d) = data.features();
    if (spec.fit_intercept) z_.col(d).setOnes();
    y_ = data.labels();
    penalized_ = Vector::Ones(p_);
    if (spec.fit_intercept) penalized_(d) = 0.0;
  }

  Index size() const { return p_; }
  const Matrix& design() const { return z_; }
  const std::vector<int>& labels() const { return y_; }
  const std::vector<double>& weights() const { return w_; }
  double ridge() const { return ridge_; }
  const Vector& penalized() const { return penalized_; }

  double objective(const Vector& theta) const {
    const Vector s = z_ * theta;
    double f = 0.0;
    for (Index i = 0; i < s.size(); ++i) f += w_[static_cast<std::size_t>(i)] * loss_from_score(spec_, s(i), y_[static_cast<std::size_t>(i)]);
    return f + ridge_ * theta.cwiseProduct(penalized_).squaredNorm();
  }

  // Objective, gradient and (optionally) Hessian at theta.
  double evaluate(const Vector& theta, Vector& grad, Matrix* hess) const {
    const Vector s = z_ * theta;
    const Index n = s.size();
    Vector dscore(n);
    Vector curv(hess ? n : 0);
    double f = 0.0;
    for (Index i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      f += w_[k] * loss_from_score(spec_, s(i), y_[k]);
      dscore(i) = w_[k] * loss_score_derivative(spec_, s(i), y_[k]);
      if (hess) curv(i) = w_[k] * loss_score_curvature(spec_, s(i), y_[k]);
    }
    grad = z_.transpose() * dscore + 2.0 * ridge_ * theta.cwiseProduct(penalized_);
    if (hess) {
      const Matrix scaled = z_.array().colwise() * curv.array();
      *hess = z_.transpose() * scaled;
      hess->diagonal() += 2.0 * ridge_ * penalized_;
    }
    return f + ridge_ * theta.cwiseProduct(penalized_).squaredNorm();
  }

  const LossSpec& spec() const { return spec_; }

 private:
  LossSpec spec_;
  double ridge_;
  Index p_ = 0;
  Matrix z_;
  std::vector<int> y_;
  std::vector<double> w_;
  Vector penalized_;
};

void check_divergence(const Problem& problem, const Vector& theta) {
  if (problem.spec().family == LossFamily::Logistic && problem.ridge() == 0.0 &&
      theta.norm() > kDivergenceNorm) {
    throw Error(ErrorCode::SeparableWithoutRidge,
                "logistic fit diverged (|theta| > 1e6); data look separable, set a positive ridge");
  }
}

// Without a penalty the logistic loss has no minimizer on separable data; the
// gradient still decays fast enough for the tolerance test to fire long before
// the norm guard. A converged theta that strictly separates every weighted row
// is the witness.
void check_separated(const Problem& problem, const Vector& theta) {
  if (problem.spec().family != LossFamily::Logistic || problem.ridge() != 0.0) return;
  const Vector s = problem.design() * theta;
  for (Index i = 0; i < s.size(); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    if (problem.weights()[k] <= 0.0) continue;
    const double margin = problem.labels()[k] ? s(i) : -s(i);
    if (!(margin > 0.0)) return;
  }
  throw Error(ErrorCode::SeparableWithoutRidge,
              "logistic fit without ridge separates the training data perfectly; set a positive ridge");
}

FittedModel descent_fit(const Problem& problem, const FitConfig& cfg, bool use_newton) {
  FittedModel out;
  out.loss_spec = problem.spec();
  Vector theta = Vector::Zero(problem.size());
  Vector grad;
  Matrix hess;
  double step = 1.0;
  double f = 0.0;
  int iter = 0;
  for (;; ++iter) {
    f = problem.evaluate(theta, grad, use_newton ? &hess : nullptr);
    out.final_grad_norm = grad.norm();
    if (out.final_grad_norm <= cfg.grad_tol) {
      out.converged = true;
      break;
    }
    if (iter >= cfg.max_iters) break;

    Vector direction;
    bool newton_step = false;
    if (use_newton) {
      Eigen::LLT<Matrix> llt(hess);
      if (llt.info() == Eigen::Success) {
        direction = -llt.solve(grad);
        newton_step = direction.allFinite() && direction.dot(grad) < 0.0;
      }
    }
    if (!newton_step) direction = -grad;

    double t = newton_step ? 1.0 : std::min(1.0, 2.0 * step);
    const double slope = grad.dot(direction);
    bool accepted = false;
    Vector candidate;
    for (int h = 0; h < kMaxHalvings; ++h) {
      candidate = theta + t * direction;
      const double fc = problem.objective(candidate);
      if (std::isfinite(fc) && fc <= f + kArmijo * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no representable decrease left
    if (!newton_step) step = t;
    theta = std::move(candidate);
    check_divergence(problem, theta);
  }
  check_divergence(problem, theta);
  if (out.converged) check_separated(problem, theta);
  out.theta = std::move(theta);
  out.iterations = iter;
  out.objective = f;
  return out;
}

// Full-batch subgradient descent with iterate averaging over the second half
// of the run. The penalty makes the objective 2*ridge strongly convex, which
// sets the 1/(2 ridge t) step schedule.
FittedModel subgradient_fit(const Problem& problem, const FitConfig& cfg) {
  FittedModel out;
  out.loss_spec = problem.spec();
  const Index p = problem.size();
  Vector theta = Vector::Zero(p);
  Vector average = Vector::Zero(p);
  Vector grad;
  int averaged = 0;
  const int iters = std::max(cfg.max_iters, 1);
  for (int t = 1; t <= iters; ++t) {
    problem.evaluate(theta, grad, nullptr);
    const double eta = problem.ridge() > 0.0 ? 1.0 / (2.0 * problem.ridge() * t) : 1.0 / std::sqrt(t);
    theta -= eta * grad;
    if (t > iters / 2) {
      ++averaged;
      average += (theta - average) / averaged;
    }
  }
  out.theta = average;
  out.objective = problem.evaluate(average, grad, nullptr);
  out.final_grad_norm = grad.norm();
  out.converged = out.final_grad_norm <= cfg.grad_tol;
  out.iterations = iters;
  return out;
}

std::vector<double> normalized(std::span<const double> weights, Index rows) {
  if (static_cast<Index>(weights.size()) != rows) {
    throw Error(ErrorCode::DimensionMismatch, "weight count does not match row count");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidArgument, "weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "weights sum to zero");
  std::vector<double> out(weights.begin(), weights.end());
  for (double& w : out) w /= total;
  return out;
}

FittedModel fit_problem(const LabeledDataset& train, std::vector<double> weights, const LossSpec& spec,
                        const FitConfig& cfg) {
  if (train.empty()) throw Error(ErrorCode::TooFewSamples, "training set is empty");
  if (cfg.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be positive");
  if (!(cfg.grad_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "grad_tol must be positive");
  const double ridge = cfg.resolved_ridge(spec);
  if (spec.family == LossFamily::Logistic && ridge == 0.0 && (train.n0() == 0 || train.n1() == 0)) {
    throw Error(ErrorCode::SeparableWithoutRidge, "logistic fit without ridge needs both classes");
  }
  if (cfg.step_rule == StepRule::ClosedForm || spec.family == LossFamily::Squared) {
    if (spec.family != LossFamily::Squared) {
      throw Error(ErrorCode::InvalidArgument, "closed_form step rule requires the squared loss");
    }
    if (cfg.step_rule == StepRule::ClosedForm || cfg.step_rule == StepRule::NewtonBacktracking) {
      // One Newton step from zero is the exact solution; solve it directly.
      QuadraticStats stats(spec.parameter_size(train.dim()));
      for (Index i = 0; i < train.rows(); ++i) {
        const double w = weights[static_cast<std::size_t>(i)];
        const Vector z = design_row(spec, train.row(i));
        const double t = squared_target_value(spec, train.label(i));
        stats.gram.noalias() += w * z * z.transpose();
        stats.cross += w * t * z;
        stats.tt += w * t * t;
      }
      stats.weight = 1.0;
      return solve_quadratic(stats, spec, ridge);
    }
  }
  Problem problem(train, std::move(weights), spec, ridge);
  if (spec.family == LossFamily::Hinge) return subgradient_fit(problem, cfg);
  return descent_fit(problem, cfg, cfg.step_rule == StepRule::NewtonBacktracking);
}

}  // namespace

FittedModel fit_erm(const LabeledDataset& train, const LossSpec& spec, const FitConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(train.rows());
  std::vector<double> w(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  return fit_problem(train, std::move(w), spec, cfg);
}

FittedModel fit_weighted_erm(const LabeledDataset& train, std::span<const double> weights,
                             const LossSpec& spec, const FitConfig& cfg) {
  if (train.empty()) throw Error(ErrorCode::TooFewSamples, "training set is empty");
  return fit_problem(train, normalized(weights, train.rows()), spec, cfg);
}

FittedModel fit_class_weighted_erm(const LabeledDataset& train, const LossSpec& spec,
                                   const FitConfig& cfg, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorCode::InvalidRho, "rho must lie in (0, 1)");
  if (train.n0() == 0 || train.n1() == 0) {
    throw Error(ErrorCode::MissingClass, "class-weighted fit needs both classes");
  }
  std::vector<double> w(static_cast<std::size_t>(train.rows()));
  const double w0 = rho / static_cast<double>(train.n0());
  const double w1 = (1.0 - rho) / static_cast<double>(train.n1());
  for (Index i = 0; i < train.rows(); ++i) w[static_cast<std::size_t>(i)] = train.label(i) == 0 ? w0 : w1;
  return fit_problem(train, std::move(w), spec, cfg);
}

double squared_target_value(const LossSpec& spec, int y) {
  return spec.squared_target == SquaredTarget::Raw ? static_cast<double>(y) : y - 0.5;
}

void QuadraticStats::add_rows(const LossSpec& spec, const RowMatrix& rows, int label, double w) {
  add_rows(spec, rows, rows.rows(), label, w);
}

void QuadraticStats::add_rows(const LossSpec& spec, const RowMatrix& rows, Index count, int label,
                              double w) {
  if (count <= 0) return;
  const Index d = rows.cols();
  const Index p = spec.parameter_size(d);
  if (gram.rows() != p) {
    throw Error(ErrorCode::DimensionMismatch, "quadratic statistics sized for a different dimension");
  }
  const double t = squared_target_value(spec, label);
  const auto block = rows.topRows(count);
  gram.topLeftCorner(d, d).noalias() += w * block.transpose() * block;
  const Eigen::RowVectorXd sums = block.colwise().sum();
  cross.head(d) += w * t * sums.transpose();
  if (spec.fit_intercept) {
    gram.block(0, d, d, 1) += w * sums.transpose();
    gram.block(d, 0, 1, d) += w * sums;
    gram(d, d) += w * static_cast<double>(count);
    cross(d) += w * t * static_cast<double>(count);
  }
  tt += w * t * t * static_cast<double>(count);
  weight += w * static_cast<double>(count);
}

QuadraticStats& QuadraticStats::operator+=(const QuadraticStats& other) {
  gram += other.gram;
  cross += other.cross;
  tt += other.tt;
  weight += other.weight;
  return *this;
}

double QuadraticStats::weighted_loss(const Parameter& theta) const {
  return theta.dot(gram * theta) - 2.0 * theta.dot(cross) + tt;
}

FittedModel solve_quadratic(const QuadraticStats& stats, const LossSpec& spec, double ridge) {
  if (spec.family != LossFamily::Squared) {
    throw Error(ErrorCode::InvalidArgument, "quadratic solve requires the squared loss");
  }
  if (!(stats.weight > 0.0)) throw Error(ErrorCode::TooFewSamples, "no rows in quadratic statistics");
  const Index p = stats.gram.rows();
  Matrix lhs = stats.gram / stats.weight;
  const Vector rhs = stats.cross / stats.weight;
  const Index penalized = spec.fit_intercept ? p - 1 : p;
  for (Index j = 0; j < penalized; ++j) lhs(j, j) += ridge;

  Eigen::LDLT<Matrix> ldlt(lhs);
  const double scale = std::max(lhs.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12 ||
      ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-14 * scale) {
    throw Error(ErrorCode::SingularNormalEquations,
                "normal equations are singular; the design is rank deficient (use a positive ridge)");
  }
  FittedModel out;
  out.loss_spec = spec;
  out.theta = ldlt.solve(rhs);
  const Vector residual = lhs * out.theta - rhs;
  out.final_grad_norm = 2.0 * residual.norm();
  out.converged = out.final_grad_norm <= 1e-8 * (1.0 + rhs.norm());
  out.iterations = 1;
  Vector pen = out.theta;
  if (spec.fit_intercept) pen(p - 1) = 0.0;
  out.objective = stats.weighted_loss(out.theta) / stats.weight + ridge * pen.squaredNorm();
  return out;
}

double decision_score(const FittedModel& model, FeatureRow x) {
  return linear_score(model.loss_spec, model.theta, x);
}

double default_threshold(const LossSpec& spec) {
  return spec.family == LossFamily::Squared && spec.squared_target == SquaredTarget::Raw ? 0.5 : 0.0;
}

int predict_label(const FittedModel& model, FeatureRow x, double threshold) {
  return decision_score(model, x) >= threshold ? 1 : 0;
}

int predict_label(const FittedModel& model, FeatureRow x) {
  return predict_label(model, x, default_threshold(model.loss_spec));
}

}  // namespace synaug
