#pragma once

// CSV emission: comma separator, header row, '.' decimal point, doubles as
// shortest round-trip strings via std::to_chars. Cells needing it get
// RFC-4180 quoting. Output is byte-deterministic for identical inputs.

#include <charconv>
#include <ostream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

namespace ogd {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

using CsvCell = std::variant<long long, double, std::string>;
using CsvRow = std::vector<CsvCell>;

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out;
  out.reserve(s.size() + 2);
  out += '"';
  for (const char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<CsvRow>& rows) {
  for (size_t j = 0; j < header.size(); ++j) {
    if (j > 0) os << ',';
    os << csv_escape(header[j]);
  }
  os << '\n';
  for (const CsvRow& row : rows) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j > 0) os << ',';
      std::visit(
          [&os](const auto& cell) {
            using T = std::decay_t<decltype(cell)>;
            if constexpr (std::is_same_v<T, long long>) {
              os << std::to_string(cell);
            } else if constexpr (std::is_same_v<T, double>) {
              os << format_double(cell);
            } else {
              os << csv_escape(cell);
            }
          },
          row[j]);
    }
    os << '\n';
  }
}

} // namespace ogd
