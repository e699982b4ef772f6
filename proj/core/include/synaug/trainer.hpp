#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "synaug/dataset.hpp"
#include "synaug/losses.hpp"

namespace synaug {

enum class StepRule { NewtonBacktracking, GradientBacktracking, ClosedForm };

std::string_view to_string(StepRule rule);
StepRule parse_step_rule(std::string_view text);

struct FitConfig {
  int max_iters = 500;
  double grad_tol = 1e-8;
  /// l2 penalty on the non-intercept coefficients. Unset means the loss
  /// default: 0 for squared, 1e-8 for logistic, 1e-2 for hinge.
  std::optional<double> ridge;
  StepRule step_rule = StepRule::NewtonBacktracking;

  double resolved_ridge(const LossSpec& spec) const;
};

struct FittedModel {
  Parameter theta;
  LossSpec loss_spec;
  bool converged = false;
  double final_grad_norm = 0.0;
  int iterations = 0;
  double objective = 0.0;
};

/// Minimizes (1/n) sum_i loss_i + ridge * |theta|^2 over the rows of `train`.
///
/// Throws TooFewSamples on empty input, SeparableWithoutRidge when a
/// logistic fit without ridge diverges (|theta| > 1e6) or sees one class,
/// SingularNormalEquations when a squared closed-form solve is rank
/// deficient, and InvalidArgument for closed_form with a non-squared loss.
FittedModel fit_erm(const LabeledDataset& train, const LossSpec& spec, const FitConfig& cfg = {});

/// Same objective with per-row weights (normalized internally to sum 1).
FittedModel fit_weighted_erm(const LabeledDataset& train, std::span<const double> weights,
                             const LossSpec& spec, const FitConfig& cfg = {});

/// Class-weighted fit: weight rho/n0 on each class-0 row and (1-rho)/n1 on
/// each class-1 row, i.e. the minimizer of the rho-weighted empirical loss.
/// Throws MissingClass when a class is absent.
FittedModel fit_class_weighted_erm(const LabeledDataset& train, const LossSpec& spec,
                                   const FitConfig& cfg = {}, double rho = 0.5);

/// Weighted sufficient statistics of a squared-loss problem over design
/// rows z (features, plus a trailing 1 with intercept) and targets t:
/// gram = sum w z z^T, cross = sum w t z, tt = sum w t^2.
struct QuadraticStats {
  Matrix gram;
  Vector cross;
  double tt = 0.0;
  double weight = 0.0;

  explicit QuadraticStats(Index p = 0) : gram(Matrix::Zero(p, p)), cross(Vector::Zero(p)) {}

  /// Adds every row of `rows` with label `label` and weight `w` each.
  void add_rows(const LossSpec& spec, const RowMatrix& rows, int label, double w = 1.0);
  void add_rows(const LossSpec& spec, const RowMatrix& rows, Index count, int label, double w);
  QuadraticStats& operator+=(const QuadraticStats& other);

  /// sum w (z^T theta - t)^2
  double weighted_loss(const Parameter& theta) const;
};

/// Squared-loss target for label y under the spec's encoding.
double squared_target_value(const LossSpec& spec, int y);

/// Minimizer of stats.weighted_loss(theta)/stats.weight + ridge * |theta|^2.
/// Throws SingularNormalEquations when the system is singular.
FittedModel solve_quadratic(const QuadraticStats& stats, const LossSpec& spec, double ridge);

double decision_score(const FittedModel& model, FeatureRow x);

/// Threshold used when none is given: 0.5 for squared-raw, 0 otherwise.
double default_threshold(const LossSpec& spec);

/// 1 iff decision_score >= threshold.
int predict_label(const FittedModel& model, FeatureRow x, double threshold);
int predict_label(const FittedModel& model, FeatureRow x);

}  // namespace synaug
