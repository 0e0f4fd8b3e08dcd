#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trendwatch {

/// A parsed CSV document: header plus raw string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row, for error reports.
  std::vector<std::size_t> lines;

  /// Index of a header column, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Index of a header column; throws SchemaError when absent.
  std::size_t require_column(std::string_view name) const;
};

/// RFC 4180-style reader: quoted fields, doubled quotes, CRLF tolerant.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

std::vector<std::string> split_csv_record(std::string_view line);
std::string csv_escape(std::string_view field);
void write_csv_record(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal representation that round-trips to the same double.
/// NaN is written as the empty string.
std::string format_double(double value);
/// Parses a finite double; returns nullopt on garbage or trailing characters.
std::optional<double> parse_double(std::string_view text);

}  // namespace trendwatch
