#include "synaug/losses.hpp"

#include <cmath>

#include "synaug/error.hpp"

namespace synaug {

std::string_view to_string(LossFamily family) {
  switch (family) {
    case LossFamily::Logistic: return "logistic";
    case LossFamily::Squared: return "squared";
    case LossFamily::Hinge: return "hinge";
  }
  return "unknown";
}

std::string_view to_string(SquaredTarget target) {
  return target == SquaredTarget::Raw ? "raw" : "centered";
}

LossFamily parse_loss_family(std::string_view text) {
  if (text == "logistic") return LossFamily::Logistic;
  if (text == "squared") return LossFamily::Squared;
  if (text == "hinge") return LossFamily::Hinge;
  throw Error(ErrorCode::InvalidArgument, "unknown loss family '" + std::string(text) + "'");
}

SquaredTarget parse_squared_target(std::string_view text) {
  if (text == "raw") return SquaredTarget::Raw;
  if (text == "centered") return SquaredTarget::Centered;
  throw Error(ErrorCode::InvalidArgument, "unknown squared target '" + std::string(text) + "'");
}

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) {
  if (t > 0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double linear_score(const LossSpec& spec, const Parameter& theta, FeatureRow x) {
  const Index d = x.size();
  if (theta.size() != spec.parameter_size(d)) {
    throw Error(ErrorCode::DimensionMismatch, "parameter length " + std::to_string(theta.size()) +
                                                  " does not fit feature length " + std::to_string(d) +
                                                  (spec.fit_intercept ? " with intercept" : ""));
  }
  double s = x.dot(theta.head(d).transpose());
  if (spec.fit_intercept) s += theta(d);
  return s;
}

Vector design_row(const LossSpec& spec, FeatureRow x) {
  Vector z(spec.parameter_size(x.size()));
  z.head(x.size()) = x.transpose();
  if (spec.fit_intercept) z(x.size()) = 1.0;
  return z;
}

double loss_from_score(const LossSpec& spec, double s, int y) {
  switch (spec.family) {
    case LossFamily::Logistic:
      return softplus(s) - y * s;
    case LossFamily::Squared: {
      const double r = spec.squared_target == SquaredTarget::Raw ? s - y : (y - 0.5) - s;
      return r * r;
    }
    case LossFamily::Hinge: {
      const double margin = (2.0 * y - 1.0) * s;
      return margin < 1.0 ? 1.0 - margin : 0.0;
    }
  }
  return 0.0;
}

double loss_score_derivative(const LossSpec& spec, double s, int y) {
  switch (spec.family) {
    case LossFamily::Logistic:
      return sigmoid(s) - y;
    case LossFamily::Squared:
      return spec.squared_target == SquaredTarget::Raw ? 2.0 * (s - y) : -2.0 * ((y - 0.5) - s);
    case LossFamily::Hinge: {
      const double t = 2.0 * y - 1.0;
      return t * s < 1.0 ? -t : 0.0;
    }
  }
  return 0.0;
}

double loss_score_curvature(const LossSpec& spec, double s, int /*y*/) {
  switch (spec.family) {
    case LossFamily::Logistic: {
      const double p = sigmoid(s);
      return p * (1.0 - p);
    }
    case LossFamily::Squared:
      return 2.0;
    case LossFamily::Hinge:
      throw Error(ErrorCode::Unsupported, "hinge loss has no Hessian");
  }
  return 0.0;
}

double loss_value(const LossSpec& spec, const Parameter& theta, FeatureRow x, int y) {
  return loss_from_score(spec, linear_score(spec, theta, x), y);
}

Vector loss_gradient(const LossSpec& spec, const Parameter& theta, FeatureRow x, int y) {
  const double s = linear_score(spec, theta, x);
  return loss_score_derivative(spec, s, y) * design_row(spec, x);
}

Matrix loss_hessian(const LossSpec& spec, const Parameter& theta, FeatureRow x, int y) {
  if (spec.family == LossFamily::Hinge) throw Error(ErrorCode::Unsupported, "hinge loss has no Hessian");
  const double s = linear_score(spec, theta, x);
  const Vector z = design_row(spec, x);
  return loss_score_curvature(spec, s, y) * (z * z.transpose());
}

}  // namespace synaug
