#include "synaug/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synaug/error.hpp"

namespace synaug {

LabeledDataset::LabeledDataset(RowMatrix features, std::vector<int> labels,
                               std::vector<std::string> feature_names)
    : features_(std::move(features)), labels_(std::move(labels)), names_(std::move(feature_names)) {
  if (features_.cols() < 1) {
    throw Error(ErrorCode::InvalidArgument, "dataset needs at least one feature column");
  }
  if (static_cast<Index>(labels_.size()) != features_.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "label count " + std::to_string(labels_.size()) + " != row count " +
                    std::to_string(features_.rows()));
  }
  if (!names_.empty() && static_cast<Index>(names_.size()) != features_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "feature name count does not match column count");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == 0) {
      ++n0_;
    } else if (labels_[i] == 1) {
      ++n1_;
    } else {
      throw Error(ErrorCode::InvalidArgument,
                  "label at row " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

LabeledDataset LabeledDataset::from_classes(const RowMatrix& majority, const RowMatrix& minority) {
  if (majority.rows() > 0 && minority.rows() > 0 && majority.cols() != minority.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "class matrices differ in column count");
  }
  const Index d = majority.rows() > 0 ? majority.cols() : minority.cols();
  RowMatrix x(majority.rows() + minority.rows(), d);
  if (majority.rows() > 0) x.topRows(majority.rows()) = majority;
  if (minority.rows() > 0) x.bottomRows(minority.rows()) = minority;
  std::vector<int> y(static_cast<std::size_t>(x.rows()), 0);
  std::fill(y.begin() + majority.rows(), y.end(), 1);
  return LabeledDataset(std::move(x), std::move(y));
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  RowMatrix x = gather_rows(features_, indices);
  std::vector<int> y;
  y.reserve(indices.size());
  for (std::size_t i : indices) y.push_back(labels_[i]);
  return LabeledDataset(std::move(x), std::move(y), names_);
}

LabeledDataset LabeledDataset::with_rows(const RowMatrix& extra, int label) const {
  if (extra.rows() == 0) return *this;
  if (extra.cols() != dim()) {
    throw Error(ErrorCode::DimensionMismatch, "appended rows have " + std::to_string(extra.cols()) +
                                                  " columns, dataset has " + std::to_string(dim()));
  }
  RowMatrix x(rows() + extra.rows(), dim());
  x.topRows(rows()) = features_;
  x.bottomRows(extra.rows()) = extra;
  std::vector<int> y = labels_;
  y.resize(static_cast<std::size_t>(x.rows()), label);
  return LabeledDataset(std::move(x), std::move(y), names_);
}

RowMatrix gather_rows(const RowMatrix& m, std::span<const std::size_t> indices) {
  RowMatrix out(static_cast<Index>(indices.size()), m.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.row(static_cast<Index>(r)) = m.row(static_cast<Index>(indices[r]));
  }
  return out;
}

ClassSplit split_by_class(const LabeledDataset& data) {
  ClassSplit split;
  for (Index i = 0; i < data.rows(); ++i) {
    (data.label(i) == 0 ? split.majority_index : split.minority_index)
        .push_back(static_cast<std::size_t>(i));
  }
  split.majority = gather_rows(data.features(), split.majority_index);
  split.minority = gather_rows(data.features(), split.minority_index);
  return split;
}

std::vector<std::size_t> FoldAssignment::validation_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::training_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(indices[i - 1], indices[j]);
  }
}

FoldAssignment stratified_kfold(const LabeledDataset& data, int folds, const RngStream& stream) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "fold count must be at least 2");
  if (data.n1() < folds) {
    throw Error(ErrorCode::TooFewMinority, "n1 = " + std::to_string(data.n1()) +
                                               " is smaller than K = " + std::to_string(folds));
  }
  ClassSplit split = split_by_class(data);
  Rng rng(stream);
  shuffle_indices(split.minority_index, rng);
  shuffle_indices(split.majority_index, rng);

  FoldAssignment out;
  out.folds = folds;
  out.fold_of.assign(static_cast<std::size_t>(data.rows()), -1);
  for (std::size_t r = 0; r < split.minority_index.size(); ++r) {
    out.fold_of[split.minority_index[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
  }
  // Majority dealing continues where the minority stopped so total fold
  // sizes stay within one of each other.
  const std::size_t offset = split.minority_index.size() % static_cast<std::size_t>(folds);
  for (std::size_t r = 0; r < split.majority_index.size(); ++r) {
    out.fold_of[split.majority_index[r]] =
        static_cast<int>((r + offset) % static_cast<std::size_t>(folds));
  }
  return out;
}

TrainTestSplit train_test_split(const LabeledDataset& data, double train_fraction, const RngStream& stream) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
  }
  ClassSplit split = split_by_class(data);
  Rng rng(stream);
  shuffle_indices(split.majority_index, rng);
  shuffle_indices(split.minority_index, rng);
  TrainTestSplit out;
  for (const auto* idx : {&split.majority_index, &split.minority_index}) {
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx->size())));
    out.train.insert(out.train.end(), idx->begin(), idx->begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), idx->begin() + static_cast<std::ptrdiff_t>(n_train), idx->end());
  }
  return out;
}

}  // namespace synaug
