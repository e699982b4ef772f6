#include "synaug/csv.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "synaug/error.hpp"

namespace synaug {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool parse_number(std::string_view text, double& value) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

std::string feature_header(const std::vector<std::string>& names, Index d, Index j) {
  if (static_cast<Index>(names.size()) == d) return names[static_cast<std::size_t>(j)];
  return "x" + std::to_string(j + 1);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, "failed to format number");
  return std::string(buf, ptr);
}

LabeledDataset parse_dataset_csv(std::string_view text, std::string_view source) {
  const std::string where(source);
  std::vector<std::string> names;
  std::ptrdiff_t label_col = -1;
  std::size_t columns = 0;
  bool have_header = false;
  std::vector<double> values;
  std::vector<int> labels;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') {
      if (eol == text.size()) break;
      continue;
    }
    auto fields = split_fields(line);
    if (!have_header) {
      have_header = true;
      columns = fields.size();
      for (std::size_t j = 0; j < fields.size(); ++j) {
        if (fields[j] == "label") {
          if (label_col >= 0) {
            throw Error(ErrorCode::ParseError, where + ":" + std::to_string(line_no) +
                                                   ": duplicate 'label' column");
          }
          label_col = static_cast<std::ptrdiff_t>(j);
        } else {
          names.emplace_back(fields[j]);
        }
      }
      if (label_col < 0) {
        throw Error(ErrorCode::ParseError,
                    where + ":" + std::to_string(line_no) + ": header has no 'label' column");
      }
      if (names.empty()) {
        throw Error(ErrorCode::ParseError,
                    where + ":" + std::to_string(line_no) + ": header has no feature columns");
      }
    } else {
      if (fields.size() != columns) {
        throw Error(ErrorCode::ParseError, where + ":" + std::to_string(line_no) + ": expected " +
                                               std::to_string(columns) + " fields, found " +
                                               std::to_string(fields.size()));
      }
      for (std::size_t j = 0; j < fields.size(); ++j) {
        double v = 0.0;
        if (static_cast<std::ptrdiff_t>(j) == label_col) {
          if (fields[j] == "0") {
            labels.push_back(0);
          } else if (fields[j] == "1") {
            labels.push_back(1);
          } else {
            throw Error(ErrorCode::ParseError, where + ":" + std::to_string(line_no) +
                                                   ": label '" + std::string(fields[j]) +
                                                   "' is not 0 or 1");
          }
        } else if (parse_number(fields[j], v)) {
          values.push_back(v);
        } else {
          throw Error(ErrorCode::ParseError, where + ":" + std::to_string(line_no) +
                                                 ": non-numeric value '" + std::string(fields[j]) +
                                                 "' in column '" + names[j - (static_cast<std::ptrdiff_t>(j) > label_col ? 1 : 0)] +
                                                 "'");
        }
      }
    }
    if (eol == text.size()) break;
  }
  if (!have_header) throw Error(ErrorCode::ParseError, where + ":1: empty CSV (no header row)");
  if (labels.empty()) {
    throw Error(ErrorCode::ParseError, where + ":" + std::to_string(line_no) + ": no data rows");
  }
  const Index d = static_cast<Index>(names.size());
  RowMatrix x(static_cast<Index>(labels.size()), d);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = values[static_cast<std::size_t>(i * d + j)];
  }
  return LabeledDataset(std::move(x), std::move(labels), std::move(names));
}

LabeledDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset_csv(buffer.str(), path);
}

void write_dataset_csv(const LabeledDataset& data, std::ostream& out,
                       const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  for (Index j = 0; j < data.dim(); ++j) out << feature_header(data.feature_names(), data.dim(), j) << ',';
  out << "label\n";
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.dim(); ++j) out << format_double(data.features()(i, j)) << ',';
    out << data.label(i) << '\n';
  }
}

void write_matrix_csv(const RowMatrix& rows, std::ostream& out,
                      const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  for (Index j = 0; j < rows.cols(); ++j) out << (j ? "," : "") << "x" << (j + 1);
  out << '\n';
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.cols(); ++j) out << (j ? "," : "") << format_double(rows(i, j));
    out << '\n';
  }
}

}  // namespace synaug
