#include "lfm/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lfm {

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw std::runtime_error("missing column '" + name + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto a = field.find_first_not_of(" \t\r");
    const auto b = field.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

} // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");

  CsvTable table;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string c = line.substr(1);
      if (!c.empty() && c[0] == ' ') c.erase(0, 1);
      table.comments.push_back(c);
      continue;
    }
    const std::vector<std::string> fields = split_fields(line);
    if (!have_header) {
      table.columns = fields;
      table.data.assign(fields.size(), {});
      have_header = true;
      continue;
    }
    if (fields.size() != table.columns.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected " + std::to_string(table.columns.size()) +
                               " fields, got " + std::to_string(fields.size()));
    for (size_t c = 0; c < fields.size(); ++c) {
      try {
        size_t used = 0;
        const double v = std::stod(fields[c], &used);
        if (used != fields[c].size()) throw std::invalid_argument(fields[c]);
        table.data[c].push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": bad number '" + fields[c] + "' in column '" +
                                 table.columns[c] + "'");
      }
    }
  }
  if (!have_header) throw std::runtime_error(path + ": no header row");
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary); // LF line endings everywhere
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& c : table.comments) out << "# " << c << "\n";
  for (size_t c = 0; c < table.columns.size(); ++c)
    out << table.columns[c] << (c + 1 < table.columns.size() ? "," : "");
  out << "\n";
  const int n = table.rows();
  for (int r = 0; r < n; ++r) {
    for (size_t c = 0; c < table.data.size(); ++c)
      out << format_double(table.data[c][r])
          << (c + 1 < table.data.size() ? "," : "");
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

} // namespace lfm
