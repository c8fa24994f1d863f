#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qphase/dmrg.hpp"
#include "qphase/observables.hpp"

using namespace qphase;

namespace {

MpsState vidal(const MpsState& s) { return canonicalize(s, CanonicalForm::Vidal, {64, 1e-14, true}); }

MpsState random_state(std::size_t L, std::size_t d, std::uint64_t seed) {
  return vidal(random_mps(L, d, 8, seed));
}

oracle::Mat diag_op(const std::vector<oracle::cplx>& v) {
  oracle::Mat m = oracle::Mat::Zero(v.size(), v.size());
  for (std::size_t k = 0; k < v.size(); ++k) m(k, k) = v[k];
  return m;
}

oracle::cplx expect(const oracle::Vec& psi, const oracle::Mat& op) { return psi.dot(op * psi); }

}  // namespace

TEST(Correlator, ProductFockStateHasNoCoherence) {
  const MpsState s = vidal(product_state({1, 0, 2, 1, 0}, 3));
  auto v = correlator(s, CorrelatorKind::SF, {{0, 1}, {0, 3}, {4, 2}});
  for (auto x : v) EXPECT_LT(std::abs(x), 1e-14);
  EXPECT_NEAR(std::real(correlator(s, CorrelatorKind::SF, {{2, 2}})[0]), 2.0, 1e-12);
}

TEST(Correlator, UnitFillingStringVanishes) {
  const MpsState s = vidal(product_state({1, 1, 1, 1}, 2));
  auto v = correlator(s, CorrelatorKind::HI, {{0, 3}, {1, 2}, {0, 0}});
  for (auto x : v) EXPECT_LT(std::abs(x), 1e-14);
}

TEST(Correlator, RandomHardcoreStateMatchesStatevector) {
  const std::size_t L = 8;
  const MpsState s = random_state(L, 2, 17);
  const oracle::Vec psi = to_statevector(s);
  const oracle::Mat b = oracle::boson_lower(2), bd = b.adjoint(), n = bd * b;
  double nbar = 0.0;
  for (std::size_t i = 0; i < L; ++i) nbar += std::real(expect(psi, oracle::embed(L, 2, {i}, {n}))) / L;
  const oracle::Mat dn = n - nbar * oracle::Mat::Identity(2, 2);
  const oracle::Mat e = diag_op({std::exp(oracle::cplx(0, M_PI * nbar)), std::exp(oracle::cplx(0, -M_PI * (1 - nbar)))});
  const std::vector<SitePair> pairs{{0, 5}, {2, 3}, {1, 7}, {6, 2}, {4, 4}};
  auto sf = correlator(s, CorrelatorKind::SF, pairs);
  auto dw = correlator(s, CorrelatorKind::DW, pairs);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const oracle::cplx want_sf =
        i == j ? expect(psi, oracle::embed(L, 2, {i}, {n})) : expect(psi, oracle::embed(L, 2, {i, j}, {bd, b}));
    EXPECT_LT(std::abs(sf[k] - want_sf), 1e-10) << k;
    const double sg = ((i > j ? i - j : j - i) % 2) ? -1.0 : 1.0;
    const oracle::cplx want_dw = i == j ? expect(psi, oracle::embed(L, 2, {i}, {oracle::Mat(dn * dn)}))
                                        : sg * expect(psi, oracle::embed(L, 2, {i, j}, {dn, dn}));
    EXPECT_LT(std::abs(dw[k] - want_dw), 1e-10) << k;
  }
  // String correlator with the explicit exp(-iπ δn) product on sites i..j-1.
  for (auto [i, j] : std::vector<SitePair>{{0, 5}, {2, 3}, {1, 7}}) {
    std::vector<std::size_t> sites;
    std::vector<oracle::Mat> ops;
    for (std::size_t l = i; l <= j; ++l) {
      sites.push_back(l);
      if (l == i) ops.push_back(dn * e);
      else if (l == j) ops.push_back(dn);
      else ops.push_back(e);
    }
    const oracle::cplx want = expect(psi, oracle::embed(L, 2, sites, ops));
    EXPECT_LT(std::abs(correlator(s, CorrelatorKind::HI, {{i, j}})[0] - want), 1e-10);
  }
}

TEST(Correlator, MisorderedStringPairRejected) {
  const MpsState s = random_state(4, 2, 3);
  EXPECT_THROW(correlator(s, CorrelatorKind::HI, {{3, 1}}), Error);
  EXPECT_THROW(correlator(s, CorrelatorKind::SF, {{0, 4}}), Error);
}

TEST(CorrelatorProperty, MatrixHermitianAndConsistentWithPairs) {
  const MpsState s = random_state(7, 3, 23);
  for (auto kind : {CorrelatorKind::SF, CorrelatorKind::DW, CorrelatorKind::HI}) {
    const auto c = correlator_matrix(s, kind);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = i; j < 7; ++j) {
        const cplx direct = correlator(s, kind, {{i, j}})[0];
        EXPECT_LT(std::abs(c[i][j] - direct), 1e-10);
        if (kind == CorrelatorKind::SF) EXPECT_LT(std::abs(c[i][j] - std::conj(c[j][i])), 1e-12);
      }
  }
}

TEST(OrderParameter, TrivialAverages) {
  std::vector<std::vector<cplx>> zero(4, std::vector<cplx>(4, 0.0)), cst(4, std::vector<cplx>(4, 0.3));
  EXPECT_EQ(order_parameter(zero), 0.0);
  EXPECT_NEAR(order_parameter(cst), 0.3, 1e-15);
}

TEST(OrderParameter, PerfectDensityWave) {
  const MpsState s = vidal(product_state({2, 0, 2, 0, 2, 0}, 3));
  // Direct summation: δn_i = ±1 and the sign factor makes every term +1.
  EXPECT_NEAR(order_parameter(s, CorrelatorKind::DW), 1.0, 1e-12);
  EXPECT_NEAR(order_parameter(s, CorrelatorKind::SF), 1.0 / 6.0 * 1.0, 1e-12);
}

TEST(Renyi, ProductBellAndLimit) {
  const MpsState p = vidal(product_state({0, 1, 1, 0}, 2));
  for (double a : {0.5, 2.0, 3.0})
    for (double v : renyi_profile(p, a)) EXPECT_NEAR(v, 0.0, 1e-12);
  VecC bell = VecC::Zero(4);
  bell[0] = bell[3] = 1.0 / std::sqrt(2.0);
  const MpsState b = from_statevector(bell, 2, 2, {});
  for (double a : {0.5, 1.0, 2.0, 5.0}) EXPECT_NEAR(renyi_profile(b, a)[0], std::log(2.0), 1e-12);
  const MpsState r = random_state(8, 2, 5);
  const auto vn = entanglement_profile(r);
  const auto lim = renyi_profile(r, 1.0);
  for (std::size_t k = 0; k < vn.size(); ++k) EXPECT_NEAR(lim[k], vn[k].entropy, 1e-8);
}

TEST(Renyi, SecondOrderMatchesPurity) {
  const std::size_t L = 8;
  const MpsState r = random_state(L, 2, 9);
  const oracle::Vec psi = to_statevector(r);
  const auto s2 = renyi_profile(r, 2.0);
  for (std::size_t cut = 1; cut < L; ++cut) {
    const Eigen::Index rows = Eigen::Index(1) << cut, cols = Eigen::Index(1) << (L - cut);
    oracle::Mat m(rows, cols);
    for (Eigen::Index a = 0; a < rows; ++a)
      for (Eigen::Index c = 0; c < cols; ++c) m(a, c) = psi[a * cols + c];
    const oracle::Mat rho = m * m.adjoint();
    const double purity = std::real((rho * rho).trace());
    EXPECT_NEAR(s2[cut - 1], -std::log(purity), 1e-8) << cut;
  }
}

TEST(CentralCharge, ProductStateGivesZero) {
  const std::size_t L = 32;
  std::vector<double> prof(L - 1, 0.0);
  EXPECT_NEAR(central_charge_fit(prof, L, 2, 1.0).slope, 0.0, 1e-12);
  EXPECT_THROW(central_charge_fit(std::vector<double>(3, 0.0), 4, 2, 1.0), Error);
}

TEST(CentralCharge, SyntheticCftProfileRecovered) {
  const std::size_t L = 40;
  for (double alpha : {1.0, 2.0}) {
    std::vector<double> prof;
    for (std::size_t l = 1; l < L; ++l) {
      const double sn = std::sin(M_PI * l / L);
      prof.push_back(0.8 / 12.0 * (1 + 1 / alpha) * std::log(L / M_PI * sn) + 0.3 + (l % 2 ? -0.2 : 0.2) / (L * sn));
    }
    auto f = central_charge_fit(prof, L, 2, alpha);
    EXPECT_NEAR(f.slope, 0.8, 1e-10);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  }
}

TEST(CentralCharge, CriticalIsingChain) {
  HamiltonianSpec s;
  s.model = ModelKind::TFIM;
  s.length = 64;
  s.couplings = {{"J", 1.0}, {"g_x", 1.0}};
  DmrgOptions o;
  o.chi_max = 24;
  o.max_sweeps = 12;
  o.energy_tol = 1e-8;
  auto r = dmrg_run(s, o, 7);
  auto f = central_charge_fit(renyi_profile(r.state, 1.0), 64, 2, 1.0);
  EXPECT_NEAR(f.slope, 0.5, 0.1);
}

TEST(PowerLaw, ExactAndConstant) {
  std::vector<double> xs{1, 2, 3, 5, 8, 13}, ys, c;
  for (double x : xs) {
    ys.push_back(std::pow(x, -2.0));
    c.push_back(4.2);
  }
  auto f = power_law_fit(xs, ys);
  EXPECT_NEAR(f.slope, -2.0, 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  for (double r : f.residual) EXPECT_NEAR(r, 1.0, 1e-12);
  EXPECT_NEAR(power_law_fit(xs, c).slope, 0.0, 1e-12);
}

TEST(PowerLaw, NoisySyntheticExponent) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  std::vector<double> xs, ys;
  for (int k = 0; k < 40; ++k) {
    const double x = 2.0 + k + u(gen);
    xs.push_back(x);
    ys.push_back(std::pow(x, -0.7) * (1.0 + 0.05 * std::sin(x)));
  }
  EXPECT_NEAR(power_law_fit(xs, ys).slope, -0.7, 0.05);
}

TEST(PowerLaw, Errors) {
  EXPECT_THROW(power_law_fit({1, 2, 3, 4, 5}, {1, 2, 0, 4, 5}), Error);
  EXPECT_THROW(power_law_fit({1, 2, 3}, {1, 2, 3}), Error);
}

TEST(Compressibility, QuadraticLinearAndGrid) {
  std::vector<std::pair<double, double>> quad, lin;
  for (int k = 0; k < 5; ++k) {
    const double n = 0.2 * k;
    quad.push_back({n, 1.7 * n * n});
    lin.push_back({n, 3.0 * n - 1.0});
  }
  EXPECT_NEAR(inverse_compressibility(quad, 0.4, 0.2), 2 * 1.7 * 0.16, 1e-12);
  EXPECT_NEAR(inverse_compressibility(lin, 0.4, 0.2), 0.0, 1e-12);
  EXPECT_THROW(inverse_compressibility(quad, 0.4, 0.3), Error);
}

TEST(Compressibility, HardcoreSectorsFromExactDiagonalization) {
  // Free hardcore bosons: sector energies are sums of the lowest single-particle levels.
  const std::size_t L = 10;
  const oracle::Mat h = oracle::extended_bose_hubbard(L, 1, 1.0, 0.0, 0.0, 0.0);
  std::vector<std::pair<double, double>> table;
  std::vector<double> analytic;
  double acc = 0.0;
  for (std::size_t N = 0; N <= 7; ++N) {
    if (N > 0) acc += -2.0 * std::cos(M_PI * double(N) / double(L + 1));
    analytic.push_back(acc);
    table.push_back({double(N) / L, oracle::hardcore_sector_energy(h, L, N)});
  }
  for (std::size_t N = 2; N <= 6; ++N) {
    const double n = double(N) / L, dn = 1.0 / L;
    const double want = n * n * (analytic[N + 1] + analytic[N - 1] - 2 * analytic[N]) / (dn * dn);
    EXPECT_NEAR(inverse_compressibility(table, n, dn), want, 1e-10) << N;
  }
}

TEST(Diagnostics, NeelAndDegenerateSpectrum) {
  const auto d = diagnostics(vidal(product_state({0, 1, 0, 1, 0, 1}, 2)));
  EXPECT_NEAR(std::abs(d.s_stag), 1.0, 1e-12);
  EXPECT_EQ(degeneracy_indicator({std::sqrt(0.5), std::sqrt(0.5)}), 0.0);
  EXPECT_EQ(degeneracy_indicator({0.5, 0.5, 0.5, 0.5}), 0.0);
  EXPECT_NEAR(degeneracy_indicator({1.0}), 1.0, 1e-15);
  const auto c = diagnostics(vidal(product_state({1, 0, 1, 0, 1, 0}, 2)));
  EXPECT_NEAR(c.o_cdw, 1.5, 1e-12);
  EXPECT_NEAR(c.o_cdw_normalized, 0.5, 1e-12);
}

TEST(Diagnostics, DimerizedTopologicalVersusTrivial) {
  auto run = [](double dj) {
    HamiltonianSpec s;
    s.model = ModelKind::DEBHM;
    s.length = 12;
    s.couplings = {{"J", 1.0}, {"delta_J", dj}, {"V", 0.5}, {"mu", 0.5}};
    DmrgOptions o;
    o.chi_max = 32;
    o.max_sweeps = 20;
    return diagnostics(dmrg_run(s, o, 3).state).d_es;
  };
  EXPECT_LT(std::abs(run(0.5)), 0.05);
  EXPECT_GT(run(-0.5), 0.5);
}

TEST(StructureFactor, ProductStateRejected) {
  const MpsState p = vidal(product_state({1, 0, 0, 1, 1, 0, 1, 0}, 2));
  try {
    structure_factor_K(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonLinearRegime);
  }
}

TEST(StructureFactor, FreeHardcoreChainAndCorrelatorExponent) {
  const std::size_t L = 64;
  HamiltonianSpec s;
  s.model = ModelKind::ExtendedBoseHubbard;
  s.length = L;
  s.couplings = {{"t", 1.0}, {"U", 0.0}, {"V", 0.0}, {"n_max", 1.0}, {"mu", 0.0}};
  DmrgOptions o;
  o.chi_max = 32;
  o.max_sweeps = 6;
  o.energy_tol = 1e-8;
  o.lanczos.max_iter = 20;
  auto r = dmrg_run(s, o, 7);
  auto sf = structure_factor_K(r.state);
  EXPECT_NEAR(sf.K, 1.0, 0.1);
  EXPECT_GE(sf.fit.r_squared, 0.99);
  // Superfluid correlator around the chain centre decays as r^(-K/2).
  std::vector<SitePair> pairs;
  std::vector<double> xs;
  for (std::size_t d = 2; d <= 16; d += 2) {
    pairs.push_back({L / 2 - d / 2, L / 2 + d / 2});
    xs.push_back(double(d));
  }
  std::vector<double> ys;
  for (auto v : correlator(r.state, CorrelatorKind::SF, pairs)) ys.push_back(std::abs(v));
  auto pl = power_law_fit(xs, ys);
  ASSERT_GE(pl.r_squared, 0.99);
  EXPECT_NEAR(-2.0 * pl.slope, sf.K, 0.15 * sf.K);
}
