#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synaug/config.hpp"

namespace synaug {

enum class Protocol {
  /// Synthetic size fixed at multiplier * (n0 - n1) for each arm, swept over n1.
  FixedSizeRule,
  /// Naive balancing against VTSS on the same training sample, swept over n1.
  VtssComparison,
  /// One fit per gamma on a shared training sample, per source and generator.
  GammaSweep,
  /// VTSS-selected gamma per repetition.
  GammaHistogram,
};

std::string_view to_string(Protocol protocol);
Protocol parse_protocol(std::string_view text);

enum class Evaluation { ClosedFormExcessRisk, PlugInExcessRisk, BalancedLoss, BalancedAccuracy, ParamError };

std::string_view to_string(Evaluation evaluation);
Evaluation parse_evaluation(std::string_view text);

/// A simulation model or a CSV dataset.
struct DataSource {
  std::string label;
  std::string reference;
  std::optional<ModelSetup> model;
  std::optional<LabeledDataset> csv;
};

struct NamedGenerator {
  std::string label;
  GeneratorSpec spec;
};

struct SizeArm {
  std::string label;
  double multiplier = 1.0;
};

struct ExperimentConfig {
  std::string name;
  Protocol protocol = Protocol::GammaSweep;
  std::vector<DataSource> sources;
  /// n1 values for FixedSizeRule/VtssComparison, gamma values otherwise.
  std::vector<double> sweep;
  int reps = 100;
  std::uint64_t base_seed = 0;
  int jobs = 1;
  /// n0 = round(ratio * n1) in n1 sweeps.
  double ratio = 20.0;
  /// Class counts for gamma protocols; 0 means the source default.
  Index n0 = 0;
  Index n1 = 0;
  std::vector<NamedGenerator> generators;
  std::vector<SizeArm> arms;
  /// Unset means each source's natural loss.
  std::optional<LossSpec> loss;
  FitConfig fit;
  VtssConfig vtss;
  /// GammaSweep: also run VTSS over the sweep grid and report it under "vtss".
  bool vtss_reference = false;
  std::vector<Evaluation> evaluation;
  /// Balanced test set drawn once per source (simulation sources).
  Index test_per_class = 0;
  /// GammaHistogram: fresh balanced validation set per repetition; 0 means
  /// K-fold cross-validation on the training sample.
  Index validation_per_class = 0;
  /// "model" (closed form) or "test_fit" (plug-in fit on the test set).
  std::string theta_star = "model";
  /// VtssComparison: "fixed" or "inverse_sqrt_log", which shrinks the
  /// synthetic mean to (1 - log(n1)^-1/2) mu1.
  std::string synthetic_mean = "fixed";
  /// CSV sources: stratified train share per repetition.
  double train_fraction = 0.8;
  std::string output_path;

  /// Throws InvalidArgument for unusable combinations.
  void validate() const;
  LossSpec loss_for(const DataSource& source) const;
};

ExperimentConfig experiment_from_json(const Json& doc);
/// Experiment preset by name or JSON path.
ExperimentConfig load_experiment(const std::string& name_or_path);
Json to_json(const ExperimentConfig& cfg);

struct ResultRow {
  std::string sweep;
  double sweep_value = 0.0;
  std::size_t sweep_index = 0;
  int rep = 0;
  std::string metric;
  double value = 0.0;
  std::uint64_t base_seed = 0;
  std::string stream;
};

struct SummaryRow {
  std::string sweep;
  double sweep_value = 0.0;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  /// 1.96 sd / sqrt(reps).
  double ci95 = 0.0;
  int reps = 0;
};

struct CellFailure {
  std::string sweep;
  int rep = 0;
  std::string scope;
  std::string code;
  std::string message;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<CellFailure> failures;
  Json config;

  const SummaryRow* find(std::string_view sweep, std::string_view metric) const;
  /// Raw values of `metric` at `sweep`, in repetition order.
  std::vector<double> values(std::string_view sweep, std::string_view metric) const;
};

/// Label of a numeric sweep value as written to the tables.
std::string sweep_label(double value);

/// Mean, sd, ci95 and count per (sweep, metric), in row order.
std::vector<SummaryRow> summarize_rows(const std::vector<ResultRow>& rows);

/// A unit of work: (sweep index or source index, repetition).
struct CellId {
  std::size_t group = 0;
  int rep = 0;
};

std::vector<CellId> experiment_cells(const ExperimentConfig& cfg);

/// Runs the given cells only; rows match those of a full run.
ResultTable run_cells(const ExperimentConfig& cfg, std::span<const CellId> cells);
ResultTable run_experiment(const ExperimentConfig& cfg);
/// run_experiment restricted to the named protocol.
ResultTable run_vtss_comparison(const ExperimentConfig& cfg);
ResultTable run_gamma_histogram(const ExperimentConfig& cfg);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
};

/// Counts of the raw values of `metric` in `bins` equal-width bins on [lo, hi].
std::vector<HistogramBin> histogram(const ResultTable& table, std::string_view metric, double lo, double hi, int bins);

void write_raw_csv(const ResultTable& table, std::ostream& out);
void write_summary_csv(const ResultTable& table, std::ostream& out);
void write_failures_csv(const ResultTable& table, std::ostream& out);
/// raw.csv, summary.csv, failures.csv and config.json under `directory`.
void write_experiment_outputs(const ResultTable& table, const std::string& directory);

}  // namespace synaug
