// Minimal CSV writing/reading for solver paths, simulation summaries, and
// figure data. %.17g formatting, '\n' line endings, no locale dependence,
// so identical data produces identical bytes.
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace mfg {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] int column(const std::string& name) const;  // -1 if absent
  [[nodiscard]] std::vector<double> col(const std::string& name) const;
};

[[nodiscard]] std::string format_double(double v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

[[nodiscard]] CsvTable read_csv(const std::string& path);

// Flat "key = value" summary files (one entry per line).
void write_summary(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace mfg
