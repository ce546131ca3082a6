#pragma once

#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace crfiqa {

// Shortest round-trip decimal form, always '.' as the decimal separator.
std::string format_double(double v);

// '\n' line endings, UTF-8, no quoting (fields must not contain ',' or newlines).
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();

  void row(std::span<const std::string> fields);
  void row(std::initializer_list<std::string> fields);

 private:
  std::string path_;
  std::ofstream out_;
};

// Strict reader: mandatory header, '\n' endings only, '.' decimals. Deviations
// raise ParseError carrying file, line, and column.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path);

  // Reads the first row and requires it to equal `names` exactly.
  void expect_header(std::span<const std::string> names);
  void expect_header(std::initializer_list<std::string> names);

  // Advances to the next data row; false at end of file.
  bool next();

  const std::vector<std::string>& fields() const { return fields_; }
  const std::string& field(int i) const { return fields_[static_cast<std::size_t>(i)]; }
  double as_double(int i) const;
  long long as_int(int i) const;

  long long line() const { return line_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(int field_index, const std::string& message) const;

 private:
  bool read_row();

  std::string path_;
  std::ifstream in_;
  std::vector<std::string> fields_;
  std::vector<long long> field_columns_;  // 1-based start column of each field
  long long line_ = 0;
  bool header_done_ = false;
};

}  // namespace crfiqa
