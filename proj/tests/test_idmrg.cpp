#include <gtest/gtest.h>

#include <cmath>

#include "qphase/dmrg.hpp"
#include "qphase/idmrg.hpp"

using namespace qphase;

namespace {

HamiltonianSpec tfim(std::size_t L, double J, double gx) {
  HamiltonianSpec s;
  s.model = ModelKind::TFIM;
  s.length = L;
  s.couplings = {{"J", J}, {"g_x", gx}};
  return s;
}

IdmrgOptions opts(std::size_t chi) {
  IdmrgOptions o;
  o.chi_max = chi;
  o.eps = 1e-12;
  return o;
}

double bond_entropy(const ImpsState& s) { return von_neumann_entropy(s.lambdas[0]); }

}  // namespace

TEST(Idmrg, DecoupledLimitIsProductFixedPoint) {
  auto r = idmrg_run(tfim(2, 0.0, 1.0), opts(8));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.energy_per_site, -1.0, 1e-10);
  ASSERT_EQ(r.center_lambda.size(), 1u);
  EXPECT_NEAR(r.center_lambda[0], 1.0, 1e-12);
  EXPECT_NEAR(correlation_length(r.state), 0.0, 1e-12);
}

TEST(Idmrg, GappedEnergyMatchesFiniteSizeExtrapolation) {
  auto r = idmrg_run(tfim(2, 1.0, 2.0), opts(16));
  ASSERT_TRUE(r.converged);
  // Gapped chain: E(L) = e L + b up to exponentially small corrections.
  DmrgOptions d;
  d.chi_max = 16;
  d.max_sweeps = 30;
  const double e24 = dmrg_run(tfim(24, 1.0, 2.0), d, 3).energy;
  const double e32 = dmrg_run(tfim(32, 1.0, 2.0), d, 3).energy;
  EXPECT_NEAR(r.energy_per_site, (e32 - e24) / 8.0, 1e-6);
  EXPECT_LT(imps_orthonormality_error(r.state), 1e-5);
}

TEST(Idmrg, LargerCellAgrees) {
  auto r2 = idmrg_run(tfim(2, 1.0, 1.5), opts(16));
  IdmrgOptions o = opts(16);
  o.cell_sweeps = 2;
  auto r4 = idmrg_run(tfim(4, 1.0, 1.5), o);
  ASSERT_TRUE(r2.converged && r4.converged);
  EXPECT_NEAR(r2.energy_per_site, r4.energy_per_site, 1e-8);
}

TEST(Idmrg, CriticalEntropyGrowsWithBondDimension) {
  double prev = -1.0;
  for (std::size_t chi : {8, 16, 32}) {
    IdmrgOptions o = opts(chi);
    o.max_iterations = 150;
    o.throw_on_no_convergence = false;
    auto r = idmrg_run(tfim(2, 1.0, 1.0), o);
    const double s = bond_entropy(r.state);
    EXPECT_GT(s, prev + 0.02) << "chi " << chi;
    prev = s;
  }
}

TEST(Idmrg, UnitCellMustBeEven) {
  EXPECT_THROW(idmrg_run(tfim(3, 1.0, 1.0)), Error);
}

TEST(Idmrg, NonConvergenceIsReported) {
  IdmrgOptions o = opts(8);
  o.max_iterations = 3;
  try {
    idmrg_run(tfim(2, 1.0, 1.0), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
    EXPECT_NE(std::string(e.what()).find("lambda distance"), std::string::npos);
  }
}

TEST(IdmrgProperty, FixedPointIsStableUnderOneMoreStep) {
  IdmrgOptions o = opts(16);
  auto r = idmrg_run(tfim(2, 1.0, 1.4), o);
  ASSERT_TRUE(r.converged);
  IdmrgOptions more = o;
  more.lambda_tol = 0.0;
  more.energy_tol = 0.0;
  more.throw_on_no_convergence = false;
  more.max_iterations = int(r.history.size()) + 1;
  auto r2 = idmrg_run(tfim(2, 1.0, 1.4), more);
  ASSERT_EQ(r2.center_lambda.size(), r.center_lambda.size());
  for (std::size_t i = 0; i < r.center_lambda.size(); ++i)
    EXPECT_NEAR(r2.center_lambda[i], r.center_lambda[i], 10 * o.lambda_tol);
}

TEST(IdmrgProperty, EnergyDensityUniformAcrossCell) {
  for (std::size_t cell : {2, 4}) {
    auto r = idmrg_run(tfim(cell, 1.0, 1.3), opts(16));
    ASSERT_TRUE(r.converged);
    const auto e = imps_bond_energies(r.state, tfim(cell, 1.0, 1.3));
    double mean = 0.0;
    for (double v : e) mean += v / double(e.size());
    for (double v : e) EXPECT_NEAR(v, mean, 1e-8);
    EXPECT_NEAR(mean, r.energy_per_site, 1e-8);
  }
}

TEST(IdmrgProperty, DimerizedCellHasAlternatingBonds) {
  HamiltonianSpec s;
  s.model = ModelKind::DEBHM;
  s.length = 2;
  s.couplings = {{"J", 1.0}, {"delta_J", 0.5}, {"V", 0.0}, {"mu", 0.0}};
  auto r = idmrg_run(s, opts(16));
  ASSERT_TRUE(r.converged);
  const auto e = imps_bond_energies(r.state, s);
  // Strong and weak bonds differ; the cell average is the energy density.
  EXPECT_GT(std::abs(e[0] - e[1]), 0.1);
  EXPECT_NEAR(0.5 * (e[0] + e[1]), r.energy_per_site, 1e-8);
}

TEST(CorrelationLength, GappedStableAndGrowsTowardCriticality) {
  const double xi16 = correlation_length(idmrg_run(tfim(2, 1.0, 2.0), opts(16)).state);
  const double xi32 = correlation_length(idmrg_run(tfim(2, 1.0, 2.0), opts(32)).state);
  EXPECT_GT(xi16, 0.0);
  EXPECT_NEAR(xi16, xi32, 0.05 * xi32);
  double prev = 0.0;
  for (double g : {2.0, 1.7, 1.5, 1.3, 1.2}) {
    const double xi = correlation_length(idmrg_run(tfim(2, 1.0, g), opts(24)).state);
    EXPECT_GT(xi, prev) << "g " << g;
    prev = xi;
  }
}
