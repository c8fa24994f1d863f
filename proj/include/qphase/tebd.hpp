#pragma once

#include <vector>

#include "qphase/mpo.hpp"
#include "qphase/mps.hpp"

namespace qphase {

struct Gate {
  std::size_t site = 0;  // first site
  std::size_t span = 2;  // 1 only for single-site chains
  MatC u;
};

struct TrotterSchedule {
  std::size_t length = 0;
  std::size_t phys_dim = 0;
  double dt = 0.0;
  int order = 2;
  bool imaginary = true;
  bool periodic = false;  // infinite unit cell: bond (L-1, 0) joins the odd layer
  std::vector<std::vector<Gate>> layers;
};

// Even/odd bond layers. Imaginary gates are exp(-τ h), real ones exp(-i τ h).
// Order 1: (even dt, odd dt). Order 2: (even dt/2, odd dt, even dt/2).
TrotterSchedule trotter_layers(const HamiltonianSpec& spec, double dt, int order, bool imaginary,
                               bool periodic = false);

struct EvolveStep {
  double norm = 1.0;        // before renormalization
  double energy = 0.0;      // NaN when no MPO is supplied
  double discarded = 0.0;   // summed relative discarded weight of the step
};

struct EvolveResult {
  MpsState state;
  std::vector<EvolveStep> trace;
  double total_discarded = 0.0;
};

// Finite chains. The state must be in Vidal form. Imaginary evolution renormalizes
// and re-canonicalizes after every step; real evolution keeps the raw norm.
EvolveResult evolve(const MpsState& state, const TrotterSchedule& schedule, int steps,
                    const TruncationPolicy& policy, const Mpo* energy_mpo = nullptr);

struct ImaginaryStage {
  double dt;
  int steps;
};

struct GroundStateOptions {
  std::vector<ImaginaryStage> stages{{0.1, 50}, {0.01, 100}, {0.001, 200}};
  double stage_tol = 1e-9;
  int max_blocks = 40;  // repetitions of one stage block before moving on
  int order = 2;
  TruncationPolicy policy{32, 1e-10, true};
};

struct GroundStateResult {
  MpsState state;
  double energy = 0.0;
  std::vector<double> energy_trace;  // after every step
};

GroundStateResult imaginary_time_ground_state(const HamiltonianSpec& spec, const MpsState& initial,
                                              const GroundStateOptions& options = {});

// Apply b† (σ+ for spins) at `site`, renormalize, evolve in real time and record
// δn_i(t) = <n_i>(t) - <n_i>_ground at each requested time (multiples of dt).
std::vector<std::vector<double>> lightcone_profile(const MpsState& ground, const HamiltonianSpec& spec,
                                                   std::size_t site, const std::vector<double>& times,
                                                   double dt, const TruncationPolicy& policy);

// Infinite-chain evolution on a canonical unit cell (schedule built with periodic = true).
ImpsState evolve_imps(const ImpsState& state, const TrotterSchedule& schedule, int steps,
                      const TruncationPolicy& policy);

}  // namespace qphase
