#pragma once

#include <string>
#include <vector>

#include "qphase/phasemap.hpp"

namespace qphase {

// Numeric CSV with a fixed header. Values use the shortest round-trip decimal form.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Rows sorted lexicographically on the first `key_columns` columns (stable).
void sort_rows(CsvTable& t, std::size_t key_columns);
std::string to_csv(const CsvTable& t);
CsvTable parse_csv(const std::string& text);
void write_csv(const CsvTable& t, const std::string& path);
CsvTable read_csv(const std::string& path);

// Column schemas:
//   loss_map:       <axis names...>, loss, training
//   boundary:       <axis names...>, axis
//   cost_profile:   <axis names...>, cost, noisy_mean, noisy_stderr
//   energy_sweep:   <axis names...>, energy, exact, error, iterations
//   geometric:      <axis names...>, inner, similarity
//   entropy:        bond, entropy
//   spectrum:       bond, index, lambda
//   lightcone:      t, site, dn
//   correlations:   r, sf, dw
//   energy_trace:   step, energy
CsvTable loss_map_table(const ParameterGrid& grid, const LossMap& map, const std::vector<std::size_t>& training);
// Inverse of loss_map_table for the loss column (grid order).
std::vector<double> loss_from_table(const CsvTable& t, const ParameterGrid& grid);
CsvTable boundary_table(const std::vector<std::string>& axes, const std::vector<BoundaryPoint>& b);

}  // namespace qphase
