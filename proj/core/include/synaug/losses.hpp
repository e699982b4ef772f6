#pragma once

#include <string>
#include <string_view>

#include "synaug/dataset.hpp"

namespace synaug {

enum class LossFamily { Logistic, Squared, Hinge };

/// Target encoding for the squared loss: (s - y)^2 or (y - 1/2 - s)^2.
enum class SquaredTarget { Raw, Centered };

struct LossSpec {
  LossFamily family = LossFamily::Logistic;
  SquaredTarget squared_target = SquaredTarget::Raw;
  bool fit_intercept = false;

  static LossSpec logistic(bool intercept = false) { return {LossFamily::Logistic, SquaredTarget::Raw, intercept}; }
  static LossSpec squared_raw(bool intercept = false) { return {LossFamily::Squared, SquaredTarget::Raw, intercept}; }
  static LossSpec squared_centered(bool intercept = false) {
    return {LossFamily::Squared, SquaredTarget::Centered, intercept};
  }
  static LossSpec hinge(bool intercept = false) { return {LossFamily::Hinge, SquaredTarget::Raw, intercept}; }

  /// Length of the parameter vector for feature dimension d.
  Index parameter_size(Index d) const { return d + (fit_intercept ? 1 : 0); }

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

std::string_view to_string(LossFamily family);
std::string_view to_string(SquaredTarget target);
LossFamily parse_loss_family(std::string_view text);
SquaredTarget parse_squared_target(std::string_view text);

using Parameter = Vector;
using FeatureRow = Eigen::Ref<const Eigen::RowVectorXd>;

/// theta^T x, plus the trailing intercept entry when the spec fits one.
/// Throws DimensionMismatch when theta does not fit x.
double linear_score(const LossSpec& spec, const Parameter& theta, FeatureRow x);

/// Loss as a function of the score s = theta^T x.
double loss_from_score(const LossSpec& spec, double score, int y);
/// d loss / d score. Hinge returns the subgradient 0 at the kink.
double loss_score_derivative(const LossSpec& spec, double score, int y);
/// d^2 loss / d score^2. Throws Unsupported for hinge.
double loss_score_curvature(const LossSpec& spec, double score, int y);

double loss_value(const LossSpec& spec, const Parameter& theta, FeatureRow x, int y);
Vector loss_gradient(const LossSpec& spec, const Parameter& theta, FeatureRow x, int y);
Matrix loss_hessian(const LossSpec& spec, const Parameter& theta, FeatureRow x, int y);

/// Logistic sigmoid, evaluated without overflow for large |t|.
double sigmoid(double t);
/// log(1 + exp(t)) without overflow.
double softplus(double t);

/// Design row used for scoring: x, or (x, 1) when an intercept is fitted.
Vector design_row(const LossSpec& spec, FeatureRow x);

}  // namespace synaug
