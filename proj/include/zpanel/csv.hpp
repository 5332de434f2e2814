#pragma once

#include <optional>
#include <string>
#include <vector>

namespace zpanel::csv {

// Minimal CSV support for the flat artifact files this project exchanges.
// Fields are plain tokens (identifiers, integers, decimals); no quoting.
// An empty cell encodes an absent value.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based physical line of each data row in the source file.
  std::vector<long> lines;

  int column(const std::string& name) const;          // -1 if missing
  int require_column(const std::string& name) const;  // throws if missing
};

Table read_file(const std::string& path);
Table parse(const std::string& text, const std::string& origin);

void write_file(const std::string& path, const Table& t);

std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

std::optional<double> parse_double(const std::string& cell);
std::optional<long> parse_int(const std::string& cell);
std::optional<bool> parse_flag(const std::string& cell);

}  // namespace zpanel::csv
