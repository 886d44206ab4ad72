// Hand-rolled SVG line charts generated from CSV tables only, so a chart can
// be reproduced byte-identically from its emitted CSV.
#pragma once

#include "mfg/csv.hpp"

#include <string>
#include <vector>

namespace mfg {

struct ChartSpec {
  std::string x_col;
  std::vector<std::string> y_cols;
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
};

[[nodiscard]] std::string svg_line_chart(const CsvTable& table,
                                         const ChartSpec& spec);

// Reads the CSV and writes the chart next to it; the chart depends on the
// CSV bytes alone.
void svg_from_csv(const std::string& csv_path, const ChartSpec& spec,
                  const std::string& out_path);

}  // namespace mfg
