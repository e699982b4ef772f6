#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "synaug/dataset.hpp"
#include "synaug/losses.hpp"
#include "synaug/trainer.hpp"

namespace synaug {

/// Per-class mean losses of theta on a dataset.
struct ClassLosses {
  double majority = 0.0;
  double minority = 0.0;
  Index n0 = 0;
  Index n1 = 0;
};

/// Throws MissingClass when either class is absent.
ClassLosses class_mean_losses(const Parameter& theta, const LossSpec& spec, const LabeledDataset& eval_data);

/// 1/2 mean class-0 loss + 1/2 mean class-1 loss.
double balanced_empirical_loss(const Parameter& theta, const LossSpec& spec, const LabeledDataset& eval_data);

/// rho mean class-0 loss + (1 - rho) mean class-1 loss. Throws InvalidRho
/// unless rho lies in [0, 1].
double weighted_empirical_loss(const Parameter& theta, const LossSpec& spec, const LabeledDataset& eval_data,
                               double rho);

/// 1/2 true-negative rate + 1/2 true-positive rate at `threshold`.
double balanced_accuracy(const FittedModel& model, const LabeledDataset& eval_data, double threshold);
double balanced_accuracy(const FittedModel& model, const LabeledDataset& eval_data);

struct ThresholdPoint {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
};

/// Balanced accuracy at each threshold, in the given order.
std::vector<ThresholdPoint> balanced_accuracy_sweep(const FittedModel& model, const LabeledDataset& eval_data,
                                                    const std::vector<double>& thresholds);

/// Minimizer of the balanced empirical loss on `test_data` (the plug-in
/// stand-in for theta*).
Parameter plug_in_optimum(const LossSpec& spec, const LabeledDataset& test_data, const FitConfig& cfg = {});

/// R_test(theta_hat) - R_test(theta*_test), where R_test is the balanced
/// empirical loss on `test_data` and theta*_test its minimizer under the same
/// loss. Nonnegative up to optimizer tolerance.
double plug_in_excess_risk(const Parameter& theta_hat, const LossSpec& spec, const LabeledDataset& test_data,
                           const FitConfig& cfg = {});

struct MetricRecord {
  std::string metric;
  double value = 0.0;
  Index n0_eval = 0;
  Index n1_eval = 0;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const MetricRecord& record);

}  // namespace synaug
