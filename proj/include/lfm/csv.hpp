#pragma once

#include <string>
#include <vector>

namespace lfm {

/// Column-oriented numeric table with leading '#' comment lines.
/// Values survive a write/read round trip exactly (17 significant digits).
struct CsvTable {
  std::vector<std::string> comments; // without the leading '#'
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data; // data[c][row]

  int rows() const { return columns.empty() ? 0 : static_cast<int>(data[0].size()); }

  /// Index of a named column; throws naming the column when absent.
  int column(const std::string& name) const;
  const std::vector<double>& col(const std::string& name) const {
    return data[column(name)];
  }
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

std::string format_double(double v);

} // namespace lfm
