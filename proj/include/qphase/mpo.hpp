#pragma once

#include <map>
#include <string>
#include <vector>

#include "qphase/mps.hpp"

namespace qphase {

enum class ModelKind { TFIM, Heisenberg, ExtendedBoseHubbard, DEBHM, Custom };

ModelKind model_from_string(const std::string& tag);
const char* model_name(ModelKind m);
std::vector<std::string> model_names();

// Custom term: one site (ops.size() == 1) or two sites (ops.size() == 2, sites[0] < sites[1]).
struct CustomTerm {
  std::vector<std::size_t> sites;
  std::vector<std::string> ops;
  double coefficient = 1.0;
};

struct HamiltonianSpec {
  ModelKind model = ModelKind::TFIM;
  std::map<std::string, double> couplings;
  std::size_t length = 2;
  std::vector<CustomTerm> terms;  // Custom only

  double coupling(const std::string& name) const;
  double coupling_or(const std::string& name, double fallback) const;
  bool has(const std::string& name) const { return couplings.count(name) > 0; }
  std::size_t phys_dim() const;
  void validate() const;
};

// Named local operators: X Y Z Sx Sy Sz Sp Sm (d = 2) and b bdag n id (any d).
// Pauli convention Z|0> = +|0>; boson basis index = occupation number.
MatC local_operator(const std::string& name, std::size_t d);

// A term channel: coeff[i] * A_i ⊗ 1 ... ⊗ B_(i+range), for each start site i.
struct Channel {
  MatC a;
  MatC b;
  std::size_t range = 1;
  std::vector<double> coeff;
};

struct LocalTerms {
  std::size_t length = 0;
  std::size_t phys_dim = 0;
  std::vector<MatC> onsite;  // per site, coefficients folded in
  std::vector<Channel> channels;
};

LocalTerms local_terms(const HamiltonianSpec& spec);

// Two-site bond Hamiltonians (d^2 x d^2, index s_i * d + s_(i+1)). Open chains
// split on-site terms half/half with full weight on the end sites; periodic
// cells couple site L-1 to site 0 and split every on-site term half/half.
std::vector<MatC> bond_hamiltonians(const LocalTerms& terms, bool periodic = false);

// Operator tensors (left-bond, right-bond, phys-out, phys-in).
struct Mpo {
  std::vector<DenseTensor> ws;
  std::size_t phys_dim = 0;

  std::size_t length() const { return ws.size(); }
  std::vector<std::size_t> bond_dims() const;
  // Operator-valued entry W[i](bl, br).
  MatC entry(std::size_t site, std::size_t bl, std::size_t br) const;
};

Mpo build_mpo(const HamiltonianSpec& spec);
Mpo build_mpo(const LocalTerms& terms);
Mpo identity_mpo(std::size_t L, std::size_t d);

MpsState apply_mpo(const Mpo& mpo, const MpsState& state, const TruncationPolicy& policy = {});
double mpo_expectation(const Mpo& mpo, const MpsState& state);
cplx mpo_expectation_complex(const Mpo& mpo, const MpsState& state);
// Dense operator with site 0 most significant; requires d^L <= 2^14.
MatC mpo_to_dense(const Mpo& mpo);

// Rank-3 environment tensors (bra, mpo-bond, ket).
DenseTensor env_left_step(const DenseTensor& env, const DenseTensor& a, const DenseTensor& w);
DenseTensor env_right_step(const DenseTensor& env, const DenseTensor& b, const DenseTensor& w);

}  // namespace qphase
