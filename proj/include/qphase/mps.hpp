#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qphase/linalg.hpp"
#include "qphase/tensor.hpp"

namespace qphase {

enum class CanonicalForm { Vidal, Left, Right, Mixed, None };

const char* form_name(CanonicalForm f);

// Finite MPS. Site tensors are (left-virtual, physical, right-virtual).
// lambdas[i] is the bond to the left of site i; lambdas[0] = lambdas[L] = {1}.
// In Vidal form the state is Γ0 Λ1 Γ1 ... Λ(L-1) Γ(L-1); in every other
// form the gammas multiply directly to the state and lambdas are informational.
struct MpsState {
  std::size_t length = 0;
  std::size_t phys_dim = 0;
  std::vector<DenseTensor> gammas;
  std::vector<std::vector<double>> lambdas;
  CanonicalForm form = CanonicalForm::None;
  std::size_t center = 0;  // meaningful for Mixed

  std::vector<std::size_t> bond_dims() const;
  // Tensor multiplying directly into the state at `site` (Γ·Λ for Vidal form).
  DenseTensor site_tensor(std::size_t site) const;
  void validate() const;
};

// Schmidt bond schedule min(d^i, d^(L-i), chi_max).
std::vector<std::size_t> chi_list(std::size_t L, std::size_t d, std::size_t chi_max);

MpsState random_mps(std::size_t L, std::size_t d, std::size_t chi_max, std::uint64_t seed);
MpsState product_state(const std::vector<std::size_t>& config, std::size_t d);
MpsState product_state(const std::vector<VecC>& local_states);
MpsState from_statevector(const VecC& psi, std::size_t L, std::size_t d, const TruncationPolicy& policy);

MpsState canonicalize(const MpsState& state, CanonicalForm target, const TruncationPolicy& policy = {},
                      std::size_t center = 0);

double norm(const MpsState& state);
// Dense coefficient vector, site 0 most significant; requires d^L <= 2^20.
VecC to_statevector(const MpsState& state);

struct BondEntanglement {
  std::vector<double> spectrum;  // Schmidt values λ (not squared), descending
  double entropy = 0.0;
};
// One entry per internal bond; entry b separates sites [0..b] from [b+1..L-1].
std::vector<BondEntanglement> entanglement_profile(const MpsState& state);
double von_neumann_entropy(const std::vector<double>& schmidt);

cplx local_expectation(const MpsState& state, const MatC& op, std::size_t site);
cplx two_point(const MpsState& state, const MatC& op_a, std::size_t i, const MatC& op_b, std::size_t j);
// ⟨A_i S_(i+1) ... S_(j-1) B_j⟩ for i < j.
cplx string_correlation(const MpsState& state, const MatC& op_a, std::size_t i, const MatC& string_op,
                        const MatC& op_b, std::size_t j);

// All pairs i < j of ⟨A_i S_(i+1) ... S_(j-1) B_j⟩ in O(L^2) transfer steps.
// Entry [i][j] is filled for i < j; other entries are zero. `string_op` null means identity.
std::vector<std::vector<cplx>> correlation_matrix(const MpsState& state, const MatC& op_a, const MatC& op_b,
                                                  const MatC* string_op = nullptr);

struct GateResult {
  MpsState state;
  double discarded_weight = 0.0;
};
// gate index convention: row/col = s_i * d + s_(i+1).
GateResult apply_two_site_gate(const MpsState& state, const MatC& gate, std::size_t i,
                               const TruncationPolicy& policy = {});
// In-place variant used by TEBD; returns the discarded weight.
double apply_two_site_gate_inplace(MpsState& state, const MatC& gate, std::size_t i,
                                   const TruncationPolicy& policy = {});
// Applies a one-site operator; non-unitary operators are followed by re-canonicalization.
MpsState apply_one_site(const MpsState& state, const MatC& op, std::size_t site,
                        const TruncationPolicy& policy = {});

std::vector<double> pseudo_inverse(const std::vector<double>& lam, double cutoff = 1e-12);
// diag(lam) · A and A · diag(lam) on the left / right virtual index of a site tensor.
DenseTensor absorb_left(const DenseTensor& a, const std::vector<double>& lam);
DenseTensor absorb_right(const DenseTensor& a, const std::vector<double>& lam);

// Infinite MPS with a periodic unit cell. lambdas[i] is the bond left of site i.
struct ImpsState {
  std::size_t unit_cell = 0;
  std::size_t phys_dim = 0;
  std::vector<DenseTensor> gammas;
  std::vector<std::vector<double>> lambdas;

  // Right-orthonormal B_i = Γ_i Λ_(i+1).
  DenseTensor b_tensor(std::size_t site) const;
  void validate() const;
};

ImpsState imps_product_state(const std::vector<VecC>& cell_states);
ImpsState canonicalize_imps(const ImpsState& state, const TruncationPolicy& policy = {});

// Deviation from the Vidal orthonormality conditions (max over sites).
double vidal_orthonormality_error(const MpsState& state);
double imps_orthonormality_error(const ImpsState& state);

// ⟨A_site B_(site+r)⟩ for each distance r ≥ 1 (r = 0 gives ⟨AB⟩ on one site).
std::vector<cplx> imps_correlation(const ImpsState& state, const MatC& op_a, const MatC& op_b,
                                   const std::vector<std::size_t>& distances, std::size_t site = 0);
cplx imps_local_expectation(const ImpsState& state, const MatC& op, std::size_t site);
// Leading eigenvalues (by magnitude) of the unit-cell identity transfer matrix.
std::vector<cplx> imps_transfer_spectrum(const ImpsState& state, int k);

}  // namespace qphase
