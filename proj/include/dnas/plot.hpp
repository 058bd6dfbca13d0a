#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dnas/search.hpp"

namespace dnas {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Parsed numeric CSV; empty cells become nullopt.
struct CsvTable {
  std::vector<std::string> cols;
  std::vector<std::vector<std::optional<double>>> rows;

  int col(const std::string& name) const;  // -1 when absent
  std::optional<double> cell(size_t row, int c) const;
};

CsvTable parse_history_csv(const std::string& text);

// Step timeline of the gradient-information average against the firing
// threshold, with markers on the steps where an architecture update fired.
// Byte-deterministic for a given table.
std::string fimt_timeline_svg(const CsvTable& t);

// Grid of activated architecture weights over epochs: one panel per
// (state, source) pair, one line per operator, one block per cell type.
std::string alpha_trajectory_svg(const std::vector<AlphaSnapshot>& snaps);

// Loads alpha_ep*.json files from a directory, sorted by name.
std::vector<AlphaSnapshot> load_snapshot_dir(const std::string& dir);

}  // namespace dnas
