#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "synaug/rng.hpp"

namespace synaug {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Dense feature matrix with binary labels; label 0 is the majority class,
/// label 1 the minority class.
class LabeledDataset {
 public:
  /// Throws InvalidArgument unless labels are in {0,1}, sizes agree and d >= 1.
  LabeledDataset(RowMatrix features, std::vector<int> labels,
                 std::vector<std::string> feature_names = {});

  /// Majority rows followed by minority rows.
  static LabeledDataset from_classes(const RowMatrix& majority, const RowMatrix& minority);

  const RowMatrix& features() const noexcept { return features_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }

  Index rows() const noexcept { return features_.rows(); }
  Index dim() const noexcept { return features_.cols(); }
  Index n0() const noexcept { return n0_; }
  Index n1() const noexcept { return n1_; }
  bool empty() const noexcept { return features_.rows() == 0; }

  auto row(Index i) const { return features_.row(i); }
  int label(Index i) const { return labels_[static_cast<std::size_t>(i)]; }

  /// Rows at `indices`, in the given order.
  LabeledDataset subset(std::span<const std::size_t> indices) const;

  /// This dataset with `extra` rows appended, all labelled `label`.
  LabeledDataset with_rows(const RowMatrix& extra, int label) const;

 private:
  RowMatrix features_;
  std::vector<int> labels_;
  std::vector<std::string> names_;
  Index n0_ = 0;
  Index n1_ = 0;
};

/// Per-class views of a dataset; indices refer to rows of the source.
struct ClassSplit {
  RowMatrix majority;
  RowMatrix minority;
  std::vector<std::size_t> majority_index;
  std::vector<std::size_t> minority_index;
};

ClassSplit split_by_class(const LabeledDataset& data);

/// Rows of `m` selected by `indices`.
RowMatrix gather_rows(const RowMatrix& m, std::span<const std::size_t> indices);

struct FoldAssignment {
  int folds = 0;
  std::vector<int> fold_of;

  std::vector<std::size_t> validation_indices(int fold) const;
  std::vector<std::size_t> training_indices(int fold) const;
};

/// Stratified K-fold partition: within each class rows are shuffled by the
/// stream and dealt round-robin. Throws TooFewMinority when n1 < K.
FoldAssignment stratified_kfold(const LabeledDataset& data, int folds, const RngStream& stream);

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split: round(train_fraction * n_c) shuffled rows of each class
/// go to training. Throws InvalidArgument unless 0 < train_fraction < 1.
TrainTestSplit train_test_split(const LabeledDataset& data, double train_fraction, const RngStream& stream);

/// In-place Fisher-Yates shuffle driven by `rng`.
void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng);

}  // namespace synaug
