#include "synaug/metrics.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "synaug/error.hpp"

namespace synaug {

namespace {

void require_both_classes(const LabeledDataset& data) {
  if (data.n0() == 0 || data.n1() == 0) {
    throw Error(ErrorCode::MissingClass, "evaluation data must contain both classes (n0 = " +
                                             std::to_string(data.n0()) + ", n1 = " + std::to_string(data.n1()) + ")");
  }
}

}  // namespace

ClassLosses class_mean_losses(const Parameter& theta, const LossSpec& spec, const LabeledDataset& eval_data) {
  require_both_classes(eval_data);
  ClassLosses out;
  out.n0 = eval_data.n0();
  out.n1 = eval_data.n1();
  for (Index i = 0; i < eval_data.rows(); ++i) {
    const int y = eval_data.label(i);
    const double l = loss_value(spec, theta, eval_data.row(i), y);
    (y == 0 ? out.majority : out.minority) += l;
  }
  out.majority /= static_cast<double>(out.n0);
  out.minority /= static_cast<double>(out.n1);
  return out;
}

double balanced_empirical_loss(const Parameter& theta, const LossSpec& spec, const LabeledDataset& eval_data) {
  const ClassLosses c = class_mean_losses(theta, spec, eval_data);
  return 0.5 * c.majority + 0.5 * c.minority;
}

double weighted_empirical_loss(const Parameter& theta, const LossSpec& spec, const LabeledDataset& eval_data,
                               double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidRho, "rho must lie in [0, 1]");
  const ClassLosses c = class_mean_losses(theta, spec, eval_data);
  return rho * c.majority + (1.0 - rho) * c.minority;
}

double balanced_accuracy(const FittedModel& model, const LabeledDataset& eval_data, double threshold) {
  require_both_classes(eval_data);
  Index tn = 0;
  Index tp = 0;
  for (Index i = 0; i < eval_data.rows(); ++i) {
    const int pred = predict_label(model, eval_data.row(i), threshold);
    if (eval_data.label(i) == 0 && pred == 0) ++tn;
    if (eval_data.label(i) == 1 && pred == 1) ++tp;
  }
  return 0.5 * static_cast<double>(tn) / static_cast<double>(eval_data.n0()) +
         0.5 * static_cast<double>(tp) / static_cast<double>(eval_data.n1());
}

double balanced_accuracy(const FittedModel& model, const LabeledDataset& eval_data) {
  return balanced_accuracy(model, eval_data, default_threshold(model.loss_spec));
}

std::vector<ThresholdPoint> balanced_accuracy_sweep(const FittedModel& model, const LabeledDataset& eval_data,
                                                    const std::vector<double>& thresholds) {
  std::vector<ThresholdPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) out.push_back({t, balanced_accuracy(model, eval_data, t)});
  return out;
}

Parameter plug_in_optimum(const LossSpec& spec, const LabeledDataset& test_data, const FitConfig& cfg) {
  require_both_classes(test_data);
  // The plug-in optimum minimizes the unpenalized balanced loss, so only the
  // optimizer settings are taken from cfg unless a ridge is set explicitly.
  FitConfig inner = cfg;
  if (!inner.ridge) inner.ridge = spec.family == LossFamily::Logistic ? 1e-12 : 0.0;
  if (spec.family == LossFamily::Hinge && *inner.ridge == 0.0) inner.ridge = 1e-6;
  if (spec.family == LossFamily::Hinge && inner.max_iters < 5000) inner.max_iters = 5000;
  return fit_class_weighted_erm(test_data, spec, inner, 0.5).theta;
}

double plug_in_excess_risk(const Parameter& theta_hat, const LossSpec& spec, const LabeledDataset& test_data,
                           const FitConfig& cfg) {
  const Parameter star = plug_in_optimum(spec, test_data, cfg);
  return balanced_empirical_loss(theta_hat, spec, test_data) - balanced_empirical_loss(star, spec, test_data);
}

nlohmann::json to_json(const MetricRecord& record) {
  return nlohmann::json{{"metric", record.metric},
                        {"value", record.value},
                        {"n0_eval", record.n0_eval},
                        {"n1_eval", record.n1_eval},
                        {"seed", record.seed}};
}

}  // namespace synaug
