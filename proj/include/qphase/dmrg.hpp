#pragma once

#include <vector>

#include "qphase/linalg.hpp"
#include "qphase/mpo.hpp"
#include "qphase/mps.hpp"

namespace qphase {

struct DmrgOptions {
  std::size_t chi_max = 32;
  double eps = 1e-10;
  int max_sweeps = 20;
  double energy_tol = 1e-10;
  LanczosOptions lanczos{200, 1e-12, true, false, 12345};
};

struct DmrgResult {
  double energy = 0.0;
  MpsState state;
  std::vector<double> history;  // energy after each full sweep
  int sweeps = 0;
  bool converged = false;
};

// Single-site DMRG engine. The working state is held as plain site tensors
// in mixed canonical form around the current site.
class DmrgEngine {
 public:
  DmrgEngine(Mpo mpo, const MpsState& initial, DmrgOptions options);

  // H_eff applied to a site tensor (left, phys, right) without forming H_eff.
  DenseTensor effective_apply(std::size_t site, const DenseTensor& m) const;
  // Dense H_eff for oracle checks (small problems only).
  MatC effective_matrix(std::size_t site) const;

  // One left-to-right plus right-to-left pass; returns the last local eigenvalue.
  double sweep();
  DmrgResult run();

  MpsState state() const;
  std::size_t center() const { return center_; }
  const std::vector<DenseTensor>& left_envs() const { return left_; }
  const std::vector<DenseTensor>& right_envs() const { return right_; }
  // Max deviation between stored and rebuilt-from-scratch environments valid for the current center.
  double env_consistency_error() const;
  const std::vector<double>& local_energies() const { return local_energies_; }

 private:
  double optimize_site(std::size_t site);
  void move_right(std::size_t site);
  void move_left(std::size_t site);

  Mpo mpo_;
  DmrgOptions opts_;
  std::vector<DenseTensor> m_;
  std::vector<DenseTensor> left_;   // left_[i]: environment left of site i
  std::vector<DenseTensor> right_;  // right_[i]: environment right of site i
  std::size_t center_ = 0;
  std::vector<double> local_energies_;
};

DmrgResult dmrg_run(const HamiltonianSpec& spec, const DmrgOptions& options, std::uint64_t seed);
DmrgResult dmrg_run(const Mpo& mpo, const MpsState& initial, const DmrgOptions& options);

}  // namespace qphase
