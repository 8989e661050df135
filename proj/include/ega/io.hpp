#pragma once

// RFC-4180 CSV reading and writing for item-response tables.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ega/error.hpp"
#include "ega/types.hpp"

namespace ega {

/// Header plus numeric body; rows are observations, columns items.
struct DataTable {
  std::vector<std::string> header;
  Matrix values;
};

namespace detail {

/// Splits CSV text into records of raw fields. Quoted fields may contain
/// separators, doubled quotes and line breaks.
inline std::vector<std::vector<std::string>> parse_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false, after_quote = false;
  int line = 1;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = after_quote = false;
  };
  auto end_record = [&] {
    if (!(record.empty() && !field_started && field.empty())) {
      end_field();
      records.push_back(std::move(record));
    }
    record.clear();
  };
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || after_quote)
          throw InputError("csv: stray quote on line " + std::to_string(line));
        quoted = field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() != '\n') throw InputError("csv: bare carriage return on line " + std::to_string(line));
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (after_quote)
          throw InputError("csv: text after closing quote on line " + std::to_string(line));
        field += c;
        field_started = true;
    }
  }
  if (quoted) throw InputError("csv: unterminated quoted field");
  end_record();
  return records;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Reads a CSV with a header row and numeric cells. Errors name the data
/// row (1-based, header excluded) and column.
inline DataTable read_csv(std::istream& in) {
  auto records = detail::parse_csv_records(in);
  if (records.empty()) throw InputError("csv: empty input");
  DataTable table;
  table.header = std::move(records.front());
  if (table.header[0].starts_with("\xEF\xBB\xBF")) table.header[0].erase(0, 3);
  const std::size_t p = table.header.size();
  const std::size_t n = records.size() - 1;
  if (n == 0) throw InputError("csv: header but no data rows");
  table.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    if (rec.size() != p)
      throw InputError("csv: row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                       " fields, expected " + std::to_string(p));
    for (std::size_t c = 0; c < p; ++c) {
      const auto text = detail::trim(rec[c]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
        throw InputError("csv: row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                         " (" + table.header[c] + "): not a number: '" + std::string(rec[c]) + "'");
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return table;
}

inline DataTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv(in);
}

/// Quotes a field when it contains a separator, quote or line break.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

/// Shortest round-trip representation; empty for NaN.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_csv(std::ostream& out, const DataTable& table) {
  for (std::size_t c = 0; c < table.header.size(); ++c)
    out << (c ? "," : "") << csv_field(table.header[c]);
  out << '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c)
      out << (c ? "," : "") << format_number(table.values(r, c));
    out << '\n';
  }
}

}  // namespace ega
