#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qphase/mps.hpp"

namespace qphase {

enum class CorrelatorKind { SF, DW, HI };
CorrelatorKind correlator_from_string(const std::string& tag);
const char* correlator_name(CorrelatorKind k);

struct FitResult {
  double slope = 0.0;       // exponent for power laws, c for central-charge fits
  double prefactor = 0.0;   // intercept (log-prefactor for power laws)
  double r_squared = 0.0;
  double xmin = 0.0, xmax = 0.0;
  std::vector<double> residual;  // power laws: ys / fitted envelope
  double alternating = 0.0;      // central-charge fits: oscillation amplitude
};

using SitePair = std::pair<std::size_t, std::size_t>;

double mean_density(const MpsState& state);

// SF: <b†_i b_j>. DW: <δn_i (-1)^|i-j| δn_j>. HI: <δn_i exp(-iπ Σ_(l=i..j-1) δn_l) δn_j>.
// δn uses the measured mean density. HI needs i <= j.
std::vector<cplx> correlator(const MpsState& state, CorrelatorKind kind, const std::vector<SitePair>& pairs);
// Full L x L matrix of the same correlators, HI mirrored onto i > j.
std::vector<std::vector<cplx>> correlator_matrix(const MpsState& state, CorrelatorKind kind);
// Σ_ij C(i,j) / L^2.
double order_parameter(const MpsState& state, CorrelatorKind kind);
double order_parameter(const std::vector<std::vector<cplx>>& c);

struct StructureFactor {
  std::vector<double> q;
  std::vector<double> s;
  FitResult fit;  // linear S(q) = slope q + intercept over the lowest momenta
  double K = 0.0; // 1 / (2π slope)
};
// q_k = 2πk/(L+1); fit over the lowest 5 momenta, shrinking to 3 if r² < 0.99.
StructureFactor structure_factor_K(const MpsState& state);

// S_α per internal bond; α = 1 gives the von Neumann entropy.
std::vector<double> renyi_profile(const MpsState& state, double alpha);
double renyi_entropy(const std::vector<double>& schmidt, double alpha);

// c from S vs ln d(ℓ), d = L/π sin(πℓ/L), over ℓ in [L/4, 3L/4]. boundary_b = 2 for
// open chains. `profile[ℓ-1]` is the entropy after ℓ sites. With `alternating`
// an extra (-1)^ℓ / (L sin(πℓ/L)) regressor absorbs the open-boundary oscillation.
FitResult central_charge_fit(const std::vector<double>& profile, std::size_t L, int boundary_b, double alpha,
                             bool alternating = true);

// ys = A x^slope by least squares in log-log.
FitResult power_law_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// n^2 [E(n+dn) + E(n-dn) - 2E(n)] / dn^2 from a table of (n, E) points.
double inverse_compressibility(const std::vector<std::pair<double, double>>& table, double n, double dn);

struct Diagnostics {
  double s_stag = 0.0;        // Σ(-1)^i <Z_i> / L (spin-1/2 only, else NaN)
  double o_cdw = 0.0;         // Σ_(i<L/2) (-1)^i <δn_i>
  double o_cdw_normalized = 0.0;  // o_cdw / (L/2)
  double d_es = 0.0;          // central bond
};
Diagnostics diagnostics(const MpsState& state);
// Σ_i (-1)^i λ_i^2 over the descending spectrum.
double degeneracy_indicator(std::vector<double> schmidt);

}  // namespace qphase
