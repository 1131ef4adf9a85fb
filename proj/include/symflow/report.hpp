#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "symflow/core.hpp"

namespace symflow {

/// Shortest-faithful fixed formatting; %.17g round-trips a double exactly,
/// which is what makes report files byte-reproducible.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// The universal study output: named numeric columns, rows sorted by their
/// leading fields, and a scalar summary recomputable from the rows.
struct ConvergenceReport {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> summary;

  void add_row(std::vector<double> row) {
    if (row.size() != columns.size())
      throw PreconditionError("ConvergenceReport: row width mismatch");
    rows.push_back(std::move(row));
  }

  /// Rows ordered by their leading columns (level, then seed, ...), which
  /// also makes parallel-produced rows merge deterministically.
  void sort_rows() { std::sort(rows.begin(), rows.end()); }

  void write_csv(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw Error("cannot open " + file.string() + " for writing");
    for (std::size_t c = 0; c < columns.size(); ++c)
      out << (c ? "," : "") << columns[c];
    out << "\n";
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c)
        out << (c ? "," : "") << format_double(row[c]);
      out << "\n";
    }
  }
};

}  // namespace symflow
