#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "synaug/dataset.hpp"
#include "synaug/rng.hpp"
#include "synaug/sim_models.hpp"

namespace synaug {

enum class GeneratorKind {
  Bootstrap,
  Smote,
  BorderlineSmote,
  Adasyn,
  GaussianFit,
  Jitter,
  PerturbedSampling,
  Oracle,
  SemiOracle,
  /// Draws from the simulation model's designated synthetic distribution.
  ModelSynthetic,
};

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view text);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Smote;
  int k = 5;
  double jitter_sigma = 1.0;
  double ridge = 1e-6;
  SimModelHandle model_handle;

  /// Throws InvalidArgument for k < 1 or jitter_sigma < 0 and
  /// MissingModelHandle when a model-based kind has no model.
  void validate() const;
};

bool requires_model(GeneratorKind kind);
bool requires_full_data(GeneratorKind kind);
/// True when the first m rows of a batch of size n >= m equal a batch of
/// size m drawn from the same stream.
bool is_prefix_stable(GeneratorKind kind);

/// One generated row: base row index into the minority set, neighbor index
/// (-1 when the kind does not interpolate) and the interpolation weight.
struct GenerationRecord {
  std::size_t base = 0;
  std::ptrdiff_t neighbor = -1;
  double gamma = 0.0;
};

struct SyntheticBatch {
  RowMatrix rows;
  GeneratorSpec generator_used;
  RngStream seed_record;
  std::vector<std::string> warnings;
  /// Per-row provenance for kinds that resample minority rows.
  std::vector<GenerationRecord> audit;
};

/// Indices of the k rows nearest to row `query` by Euclidean distance,
/// excluding the query; ties go to the lower index. Throws KTooLarge when
/// k > rows - 1 and InvalidArgument for k < 1 or a bad query index.
std::vector<std::size_t> knn_minority(const RowMatrix& points, std::size_t query, int k);

/// Synthetic minority rows from `minority`.
///
/// Throws EmptyMinority when minority is empty (model-based kinds excepted),
/// MissingFullData for borderline_smote/adasyn without `full_data`, and
/// MissingModelHandle for model-based kinds without a model. SMOTE-family
/// kinds shrink k to n1 - 1 when n1 <= k and fall back to jitter when
/// n1 = 1; borderline_smote and adasyn fall back to smote when no row
/// qualifies. Each fallback is recorded in `warnings`.
SyntheticBatch generate(const GeneratorSpec& spec, const RowMatrix& minority, const LabeledDataset* full_data,
                        Index count, const RngStream& stream);

/// `data` with the batch rows appended under label 1.
LabeledDataset augment(const LabeledDataset& data, const SyntheticBatch& batch);

/// Exact totals proportional to `weights` by largest remainder; ties go to
/// the lower index. Weights must be nonnegative with a positive sum.
std::vector<Index> largest_remainder_allocation(const std::vector<double>& weights, Index total);

}  // namespace synaug
