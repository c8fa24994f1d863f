#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qphase/anomaly.hpp"
#include "qphase/dmrg.hpp"
#include "qphase/idmrg.hpp"
#include "qphase/mpo.hpp"
#include "qphase/observables.hpp"
#include "qphase/tebd.hpp"

namespace qphase {

struct GridAxis {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  std::size_t steps = 2;
  double value(std::size_t i) const;
};

// Row-major: the last axis varies fastest.
struct ParameterGrid {
  std::vector<GridAxis> axes;
  void validate() const;
  std::size_t size() const;
  std::vector<std::size_t> shape() const;
  std::vector<std::size_t> unravel(std::size_t flat) const;
  std::size_t ravel(const std::vector<std::size_t>& idx) const;
  std::vector<double> point(std::size_t flat) const;
  // Flat indices of the axis neighbours of `flat` (2 per axis in the interior).
  std::vector<std::size_t> neighbours(std::size_t flat) const;
};

enum class SolverKind { DMRG, IDMRG, TEBD };
SolverKind solver_from_string(const std::string& s);
const char* solver_name(SolverKind s);

struct ScanOptions {
  SolverKind solver = SolverKind::DMRG;
  FeatureKind feature = FeatureKind::EntanglementSpectrum;
  DmrgOptions dmrg;
  IdmrgOptions idmrg;
  GroundStateOptions tebd;
  CorrelatorKind correlator = CorrelatorKind::DW;
  std::size_t correlation_range = 16;  // iDMRG correlator rows: distances 1..range
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::size_t chi_max() const;
};

// Spec with the grid point bound onto the couplings. Unknown names are a ConfigError.
HamiltonianSpec bind_point(const HamiltonianSpec& tmpl, const ParameterGrid& grid, std::size_t flat);

// One point. Throws on solver failure.
VecD compute_feature(const HamiltonianSpec& spec, const ScanOptions& opts, std::uint64_t point_seed);

using ScanProgress = std::function<void(const LabeledGrid& partial, std::size_t finished_index)>;

// Points already present with status "ok" in `resume` are kept as they are.
// Failed solves are recorded with a status message and a zero feature.
LabeledGrid scan_grid(const HamiltonianSpec& tmpl, const ParameterGrid& grid, const ScanOptions& opts,
                      const LabeledGrid* resume = nullptr, const ScanProgress& progress = {});

struct Box {
  std::vector<double> lo, hi;
  bool contains(const std::vector<double>& p) const;
};

struct Region {
  std::vector<std::size_t> points;  // flat indices, ascending
  double max_loss = 0.0;
};

struct BoundaryPoint {
  std::vector<double> params;  // midpoint between the two grid points
  std::size_t inside = 0;      // index in the region
  std::size_t outside = 0;
  std::size_t axis = 0;
};

// max(mean + k·std, floor·mean, mean + rise·(max - mean)); rise = 0 drops the last term.
double region_threshold(const LossMap& map, double k_sigma, double floor_factor, double rise_fraction = 0.0,
                        const std::vector<bool>* valid = nullptr);
// Connected above-threshold components, sorted by max loss (descending).
std::vector<Region> extract_regions(const LossMap& map, const ParameterGrid& grid, double threshold,
                                    const std::vector<bool>* valid = nullptr);
std::vector<BoundaryPoint> extract_boundary(const ParameterGrid& grid, const std::vector<Region>& regions,
                                            const std::vector<bool>* valid = nullptr);
// Strict local minima along an axis lying next to a boundary crossing.
std::vector<std::size_t> boundary_valleys(const LossMap& map, const ParameterGrid& grid,
                                          const std::vector<Region>& regions);

struct Algorithm1Config {
  TrainConfig train;
  std::vector<std::size_t> layer_dims;  // empty: default architecture for the feature length
  double k_sigma = 5.0;
  double floor_factor = 2.0;
  double rise_fraction = 0.5;
  int max_rounds = 6;
  double initial_fraction = 0.1;
  bool random_initial = false;
  std::uint64_t seed = 1;
};

struct Round {
  int index = 0;
  std::uint64_t seed = 0;
  Box training_region;
  std::vector<std::size_t> training_indices;
  TrainResult training;
  LossMap map;
  double threshold = 0.0;
  std::vector<Region> regions;
  std::vector<BoundaryPoint> boundary;
  std::vector<std::size_t> valleys;
};

struct PhaseMapResult {
  std::vector<Round> rounds;
  std::string stop_reason;
};

ParameterGrid grid_from_dataset(const LabeledGrid& data);
Box initial_training_box(const ParameterGrid& grid, double fraction, bool random, std::uint64_t seed);
PhaseMapResult run_algorithm1(const LabeledGrid& data, const Algorithm1Config& cfg);

}  // namespace qphase
