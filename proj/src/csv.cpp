#include "crfiqa/csv.hpp"

#include <charconv>

#include "crfiqa/errors.hpp"

namespace crfiqa {

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

CsvWriter::CsvWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
}

CsvWriter::~CsvWriter() = default;

void CsvWriter::row(std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
  if (!out_) throw IoError("error writing '" + path_ + "'");
}

void CsvWriter::row(std::initializer_list<std::string> fields) {
  row(std::span<const std::string>(fields.begin(), fields.size()));
}

CsvReader::CsvReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open '" + path + "' for reading");
}

bool CsvReader::read_row() {
  std::string raw;
  if (!std::getline(in_, raw)) return false;
  ++line_;
  const std::size_t cr = raw.find('\r');
  if (cr != std::string::npos) {
    throw ParseError(path_, line_, static_cast<long long>(cr) + 1,
                     "carriage return found; files must use '\\n' line endings");
  }
  fields_.clear();
  field_columns_.clear();
  long long col = 1;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = raw.find(',', start);
    const std::size_t end = comma == std::string::npos ? raw.size() : comma;
    fields_.push_back(raw.substr(start, end - start));
    field_columns_.push_back(col);
    if (comma == std::string::npos) break;
    col += static_cast<long long>(end - start) + 1;
    start = comma + 1;
  }
  return true;
}

void CsvReader::expect_header(std::span<const std::string> names) {
  if (!read_row()) throw ParseError(path_, 1, 1, "missing header row");
  if (fields_.size() != names.size()) {
    throw ParseError(path_, line_, 1,
                     "expected " + std::to_string(names.size()) + " header fields, found " +
                         std::to_string(fields_.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (fields_[i] != names[i]) {
      throw ParseError(path_, line_, field_columns_[i],
                       "expected header field '" + names[i] + "', found '" + fields_[i] + "'");
    }
  }
  header_done_ = true;
}

void CsvReader::expect_header(std::initializer_list<std::string> names) {
  expect_header(std::span<const std::string>(names.begin(), names.size()));
}

bool CsvReader::next() {
  if (!header_done_) throw IoError("'" + path_ + "': header must be read first");
  return read_row();
}

double CsvReader::as_double(int i) const {
  const std::string& f = field(i);
  double v = 0.0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
    fail(i, "invalid number '" + f + "'");
  }
  return v;
}

long long CsvReader::as_int(int i) const {
  const std::string& f = field(i);
  long long v = 0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
    fail(i, "invalid integer '" + f + "'");
  }
  return v;
}

void CsvReader::fail(int field_index, const std::string& message) const {
  const long long col =
      field_index >= 0 && static_cast<std::size_t>(field_index) < field_columns_.size()
          ? field_columns_[static_cast<std::size_t>(field_index)]
          : 1;
  throw ParseError(path_, line_, col, message);
}

}  // namespace crfiqa
