#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>
#include <vector>

#include "synaug/csv.hpp"
#include "synaug/dataset.hpp"
#include "synaug/error.hpp"
#include "synaug/rng.hpp"

using namespace synaug;

namespace {

LabeledDataset toy(Index n0, Index n1, std::uint64_t seed = 1) {
  Rng rng{RngStream(seed)};
  RowMatrix x(n0 + n1, 2);
  std::vector<int> y;
  for (Index i = 0; i < n0 + n1; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = static_cast<double>(i);
    y.push_back(i < n0 ? 0 : 1);
  }
  return LabeledDataset(x, y);
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected synaug::Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("rng") {

TEST_CASE("a stream replays the same draws") {
  const RngStream s = derive_stream(derive_stream(RngStream(42), 3), 7);
  Rng a(s), b(s);
  for (int i = 0; i < 1000; ++i) REQUIRE(a() == b());
  CHECK(s.label() == "42:3/7");
  CHECK(RngStream(42).label() == "42");
  CHECK(s.algorithm_id() == "splitmix64-counter/v1");
}

TEST_CASE("sibling and seed-distinct streams differ") {
  std::set<std::uint64_t> keys;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::uint64_t i = 0; i < 20; ++i) keys.insert(derive_stream(RngStream(seed), i).key());
  }
  CHECK(keys.size() == 400);
  CHECK(derive_stream(RngStream(1), 0).key() != RngStream(1).key());
  // Path order matters.
  CHECK(derive_stream(derive_stream(RngStream(1), 0), 1).key() != derive_stream(derive_stream(RngStream(1), 1), 0).key());
}

TEST_CASE("uniform, normal and index draws have the expected moments") {
  Rng rng{RngStream(9)};
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, sr = 0;
  std::vector<int> bins(7, 0);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    sr += rng.rademacher();
    ++bins[rng.uniform_index(7)];
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(sr / n) < 0.01);
  for (int c : bins) CHECK(std::abs(c - n / 7.0) < 5.0 * std::sqrt(n / 7.0));
}

TEST_CASE("Rng satisfies the standard bit-generator interface") {
  Rng rng{RngStream(3)};
  std::vector<int> v{1, 2, 3, 4, 5};
  std::shuffle(v.begin(), v.end(), rng);
  std::sort(v.begin(), v.end());
  CHECK(v == std::vector<int>{1, 2, 3, 4, 5});
}

}  // TEST_SUITE

TEST_SUITE("dataset") {

TEST_CASE("construction validates labels and shapes") {
  RowMatrix x(3, 2);
  x.setZero();
  CHECK(code_of([&] { LabeledDataset(x, {0, 1, 2}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { LabeledDataset(x, {0, 1}); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { LabeledDataset(RowMatrix(3, 0), {0, 1, 0}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { LabeledDataset(x, {0, 1, 0}, {"a"}); }) == ErrorCode::DimensionMismatch);
  const LabeledDataset d(x, {0, 1, 0});
  CHECK(d.n0() == 2);
  CHECK(d.n1() == 1);
  CHECK(d.dim() == 2);
}

TEST_CASE("from_classes, subset and with_rows keep rows and labels aligned") {
  RowMatrix maj(2, 1), mino(1, 1);
  maj << 1, 2;
  mino << 3;
  const LabeledDataset d = LabeledDataset::from_classes(maj, mino);
  CHECK(d.labels() == std::vector<int>{0, 0, 1});
  const std::vector<std::size_t> idx{2, 0};
  const LabeledDataset s = d.subset(idx);
  CHECK(s.row(0)(0) == 3.0);
  CHECK(s.label(0) == 1);
  CHECK(s.label(1) == 0);
  RowMatrix extra(2, 1);
  extra << 7, 8;
  const LabeledDataset w = d.with_rows(extra, 1);
  CHECK(w.n1() == 3);
  CHECK(w.row(4)(0) == 8.0);
  CHECK(code_of([&] { d.with_rows(RowMatrix(1, 2), 1); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("split_by_class partitions the rows") {
  const LabeledDataset d = toy(7, 4);
  const ClassSplit s = split_by_class(d);
  CHECK(s.majority.rows() == 7);
  CHECK(s.minority.rows() == 4);
  for (std::size_t i = 0; i < s.minority_index.size(); ++i) {
    CHECK(d.label(static_cast<Index>(s.minority_index[i])) == 1);
    CHECK(s.minority.row(static_cast<Index>(i)) == d.row(static_cast<Index>(s.minority_index[i])));
  }
}

TEST_CASE("stratified folds partition each class evenly") {
  const LabeledDataset d = toy(53, 12);
  const FoldAssignment f = stratified_kfold(d, 5, RngStream(4));
  std::vector<int> per0(5, 0), per1(5, 0);
  for (Index i = 0; i < d.rows(); ++i) {
    const int k = f.fold_of[static_cast<std::size_t>(i)];
    (d.label(i) ? per1 : per0)[static_cast<std::size_t>(k)]++;
  }
  for (int k = 0; k < 5; ++k) {
    CHECK(per0[k] >= 10);
    CHECK(per0[k] <= 11);
    CHECK(per1[k] >= 2);
    CHECK(per1[k] <= 3);
    CHECK(f.validation_indices(k).size() + f.training_indices(k).size() == 65);
  }
  CHECK(f.fold_of == stratified_kfold(d, 5, RngStream(4)).fold_of);
  CHECK(f.fold_of != stratified_kfold(d, 5, RngStream(5)).fold_of);
  CHECK(code_of([&] { stratified_kfold(toy(20, 3), 5, RngStream(1)); }) == ErrorCode::TooFewMinority);
  CHECK(code_of([&] { stratified_kfold(d, 1, RngStream(1)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("train_test_split is stratified and disjoint") {
  const LabeledDataset d = toy(101, 19);
  const TrainTestSplit s = train_test_split(d, 0.8, RngStream(8));
  int train1 = 0;
  for (auto i : s.train) train1 += d.label(static_cast<Index>(i));
  CHECK(s.train.size() + s.test.size() == 120);
  CHECK(train1 == 15);  // round(0.8 * 19)
  CHECK(s.train.size() == 81 + 15);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 120);
  CHECK(code_of([&] { train_test_split(d, 1.0, RngStream(1)); }) == ErrorCode::InvalidArgument);
}

}  // TEST_SUITE

TEST_SUITE("csv") {

TEST_CASE("format_double round-trips bit-exactly and stays short") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(3.0) == "3");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  Rng rng{RngStream(6)};
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t bits = rng();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    REQUIRE(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("write then parse reproduces the dataset exactly") {
  Rng rng{RngStream(2)};
  RowMatrix x(30, 3);
  std::vector<int> y;
  for (Index i = 0; i < 30; ++i) {
    for (Index j = 0; j < 3; ++j) x(i, j) = rng.normal() * std::pow(10.0, static_cast<double>(j * 3));
    y.push_back(i % 4 == 0);
  }
  const LabeledDataset d(x, y);
  std::ostringstream os;
  write_dataset_csv(d, os, {"generated for a test"});
  const LabeledDataset back = parse_dataset_csv(os.str());
  CHECK(back.features() == d.features());
  CHECK(back.labels() == d.labels());
  CHECK(back.feature_names() == std::vector<std::string>{"x1", "x2", "x3"});
}

TEST_CASE("label column may appear anywhere; comments and blank lines are skipped") {
  const LabeledDataset d = parse_dataset_csv("# comment\n\nlabel,a,b\n1,0.5,2\n0,1,-3\n");
  CHECK(d.feature_names() == std::vector<std::string>{"a", "b"});
  CHECK(d.row(0)(0) == 0.5);
  CHECK(d.label(0) == 1);
}

TEST_CASE("malformed input raises ParseError with the line number") {
  auto message = [](const std::string& text) -> std::string {
    try {
      parse_dataset_csv(text, "t.csv");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      return e.what();
    }
    return "";
  };
  CHECK(message("").find("empty CSV") != std::string::npos);
  CHECK(message("x1,x2\n1,2\n").find("label") != std::string::npos);
  CHECK(message("x1,label\n1,0\nfoo,1\n").find("t.csv:3") != std::string::npos);
  CHECK(message("x1,label\n1,0\n1,2,3\n").find("t.csv:3") != std::string::npos);
  CHECK(message("x1,label\n1,0\n2,7\n").find("t.csv:3") != std::string::npos);
  CHECK(message("x1,label\n").find("no data rows") != std::string::npos);
  CHECK(code_of([] { read_dataset_csv("/nonexistent/file.csv"); }) == ErrorCode::IoError);
}

TEST_CASE("error codes map to CLI categories") {
  CHECK(category_of(ErrorCode::InvalidArgument) == ErrorCategory::Usage);
  CHECK(category_of(ErrorCode::ParseError) == ErrorCategory::Data);
  CHECK(category_of(ErrorCode::MissingClass) == ErrorCategory::Data);
  CHECK(category_of(ErrorCode::SingularMatrix) == ErrorCategory::Numeric);
  const Error e(ErrorCode::ZeroPhi, "x");
  CHECK(std::string(e.what()) == "ZeroPhi: x");
}

}  // TEST_SUITE
