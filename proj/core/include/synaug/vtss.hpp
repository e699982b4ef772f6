#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "synaug/dataset.hpp"
#include "synaug/generators.hpp"
#include "synaug/losses.hpp"
#include "synaug/rng.hpp"
#include "synaug/trainer.hpp"

namespace synaug {

enum class ObjectiveKind { BalancedLoss, BalancedAccuracy, WeightedLoss };

struct VtssObjective {
  ObjectiveKind kind = ObjectiveKind::BalancedLoss;
  /// Class-0 weight for WeightedLoss.
  double rho = 0.5;

  bool minimize() const { return kind != ObjectiveKind::BalancedAccuracy; }
};

std::string_view to_string(ObjectiveKind kind);
/// Accepts balanced-loss, balanced-accuracy, weighted-loss (and the
/// underscore spellings).
ObjectiveKind parse_objective_kind(std::string_view text);

/// `count` evenly spaced values from `lo` to `hi` inclusive, rounded to 12
/// decimals.
std::vector<double> linspace(double lo, double hi, int count);

struct VtssConfig {
  std::vector<double> gamma_grid = linspace(0.0, 2.0, 21);
  int folds = 5;
  int repeats = 1;
  VtssObjective objective;
  GeneratorSpec generator;
  LossSpec loss = LossSpec::logistic();
  FitConfig fit;
  /// Record, per (repeat, fold), which source rows fed the generator.
  bool audit = false;

  /// Throws InvalidArgument for an empty or negative grid, K < 2 or m < 1.
  void validate() const;
};

struct CurvePoint {
  double gamma = 0.0;
  double mean = 0.0;
  double standard_error = 0.0;
  int evaluations = 0;
  bool valid = true;
  std::string failure;
};

struct FoldAudit {
  int repeat = 0;
  int fold = 0;
  std::vector<std::size_t> validation_rows;
  /// Source-row indices of the minority rows handed to the generator.
  std::vector<std::size_t> generator_pool_rows;
};

struct VtssResult {
  double gamma_star = 0.0;
  Index n_syn_star = 0;
  std::vector<CurvePoint> cv_curve;
  FittedModel final_model;
  Parameter final_theta;
  RngStream seed_record;
  std::vector<std::string> warnings;
  std::vector<FoldAudit> audit;
};

/// round(gamma * (n0 - n1)) for a training split, never negative.
Index synthetic_count(double gamma, Index n0, Index n1);

/// Cross-validated objective for every grid value.
///
/// Each repeat draws a fresh stratified fold assignment shared by all grid
/// values. In each fold the generator sees only the training split's
/// minority rows, and the synthetic size is round(gamma (n0_tr - n1_tr)).
/// A grid value whose generation or fit fails in any fold is marked
/// invalid. Throws TooFewMinority when n1 < K and InvalidArgument unless
/// n0 > n1.
std::vector<CurvePoint> cv_curve(const LabeledDataset& data, const VtssConfig& cfg, const RngStream& stream,
                                 std::vector<FoldAudit>* audit = nullptr, std::vector<std::string>* warnings = nullptr);

/// Index of the best valid point (smallest gamma among ties). Throws
/// InvalidArgument when no point is valid.
std::size_t select_gamma(const std::vector<CurvePoint>& curve, const VtssObjective& objective);

/// Tunes gamma by cv_curve, then fits on the full data augmented with
/// round(gamma* (n0 - n1)) synthetic rows.
VtssResult vtss_tune(const LabeledDataset& data, const VtssConfig& cfg, const RngStream& stream);

/// Objective of one grid pass scored on a separate validation set instead
/// of folds: synthetic rows come from `train`'s minority only.
std::vector<CurvePoint> holdout_curve(const LabeledDataset& train, const LabeledDataset& validation,
                                      const VtssConfig& cfg, const RngStream& stream);

/// Objective value of a fitted model on evaluation data.
double evaluate_objective(const FittedModel& model, const LabeledDataset& eval_data, const VtssObjective& objective);

}  // namespace synaug
