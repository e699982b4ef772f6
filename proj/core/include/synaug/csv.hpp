#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "synaug/dataset.hpp"

namespace synaug {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Parses a dataset from CSV text.
///
/// The first non-comment line is the header; the column named `label` holds
/// 0/1 labels and every other column is a feature, in header order. Lines
/// starting with '#' and blank lines are skipped. Malformed cells raise
/// ParseError naming the 1-based line number.
LabeledDataset parse_dataset_csv(std::string_view text, std::string_view source = "<input>");

LabeledDataset read_dataset_csv(const std::string& path);

/// Writes `comments` as '#' lines, then the header and rows. Feature columns
/// are named x1..xd unless the dataset carries names; `label` comes last.
void write_dataset_csv(const LabeledDataset& data, std::ostream& out,
                       const std::vector<std::string>& comments = {});

/// Writes a bare feature matrix (no label column) with x1..xd headers.
void write_matrix_csv(const RowMatrix& rows, std::ostream& out,
                      const std::vector<std::string>& comments = {});

}  // namespace synaug
