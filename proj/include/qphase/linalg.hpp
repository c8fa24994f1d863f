#pragma once

#include <functional>
#include <vector>

#include "qphase/tensor.hpp"

namespace qphase {

using LinearOp = std::function<VecC(const VecC&)>;

struct LanczosOptions {
  int max_iter = 200;
  double tol = 1e-12;
  bool reorthogonalize = true;
  // When false, an unconverged run returns its best estimate instead of throwing.
  bool require_convergence = true;
  std::uint64_t seed = 12345;
};

struct LanczosResult {
  double value = 0.0;
  VecC vector;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Lowest algebraic eigenpair of a Hermitian operator.
LanczosResult lanczos_ground(const LinearOp& apply, const VecC& v0, const LanczosOptions& opts = {});

struct ArnoldiResult {
  std::vector<cplx> values;  // sorted by decreasing magnitude
  std::vector<VecC> vectors;
  bool converged = false;
};

// Leading `k` eigenpairs (by magnitude) of a general operator of dimension n.
ArnoldiResult arnoldi_dominant(const LinearOp& apply, const VecC& v0, int k, double tol = 1e-12,
                               int krylov_dim = 40, int max_restarts = 300);

// Dense Hermitian helpers.
MatC expm_hermitian(const MatC& h, cplx factor);  // exp(factor * h)
MatC kron(const MatC& a, const MatC& b);

}  // namespace qphase
