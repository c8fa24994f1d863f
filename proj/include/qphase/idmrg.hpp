#pragma once

#include <vector>

#include "qphase/linalg.hpp"
#include "qphase/mpo.hpp"
#include "qphase/mps.hpp"

namespace qphase {

struct IdmrgOptions {
  std::size_t chi_max = 32;
  double eps = 1e-10;
  int max_iterations = 400;
  double energy_tol = 1e-10;
  double lambda_tol = 1e-8;
  // Two-site sweeps through the grown cell per iteration (cells larger than 2).
  int cell_sweeps = 1;
  bool throw_on_no_convergence = true;
  std::uint64_t seed = 12345;
  LanczosOptions lanczos{200, 1e-12, true, false, 12345};
};

struct IdmrgStep {
  int iteration = 0;
  double energy_per_site = 0.0;
  double lambda_distance = 0.0;
};

struct IdmrgResult {
  double energy_per_site = 0.0;
  ImpsState state;  // canonical, cell starting on a site of type 0
  std::vector<IdmrgStep> history;
  bool converged = false;
  std::vector<double> center_lambda;
};

// spec.length is the unit cell (even). Site-dependent couplings repeat with that period.
IdmrgResult idmrg_run(const HamiltonianSpec& spec, const IdmrgOptions& options = {});

// Bulk MPO tensors for one unit cell (full automaton, no boundary cut).
std::vector<DenseTensor> bulk_mpo_cell(const HamiltonianSpec& spec);

// ξ = -L / ln|μ2/μ1|; 0 when the subleading transfer eigenvalue vanishes.
double correlation_length(const ImpsState& state);

// Energy of each bond (i, i+1) in the cell, on-site terms split half/half.
std::vector<double> imps_bond_energies(const ImpsState& state, const HamiltonianSpec& spec);

}  // namespace qphase
