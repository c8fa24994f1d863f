#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qphase/dmrg.hpp"

using namespace qphase;

namespace {

HamiltonianSpec tfim(std::size_t L, double J, double gx, double gz) {
  HamiltonianSpec s;
  s.model = ModelKind::TFIM;
  s.length = L;
  s.couplings = {{"J", J}, {"g_x", gx}, {"g_z", gz}};
  return s;
}

}  // namespace

TEST(Lanczos, DiagonalAndPauli) {
  Eigen::VectorXd dg(3);
  dg << 1, 2, 3;
  LinearOp op = [&](const VecC& v) { return VecC(dg.cast<cplx>().cwiseProduct(v)); };
  VecC v0 = VecC::Ones(3);
  auto r = lanczos_ground(op, v0);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.vector[0]), 1.0, 1e-10);
  // Start vector orthogonal to the ground state still finds it.
  VecC e2 = VecC::Zero(3);
  e2[1] = 1;
  EXPECT_NEAR(lanczos_ground(op, e2).value, 1.0, 1e-12);

  const MatC x = oracle::pauli('X');
  LinearOp px = [&](const VecC& v) { return VecC(x * v); };
  VecC s(2);
  s << 1, 0.3;
  EXPECT_NEAR(lanczos_ground(px, s).value, -1.0, 1e-12);
}

TEST(Lanczos, RandomHermitianVsDense) {
  const MatC h = oracle::random_hermitian(64, 5);
  LinearOp op = [&](const VecC& v) { return VecC(h * v); };
  auto r = lanczos_ground(op, oracle::random_state(64, 6));
  EXPECT_NEAR(r.value, oracle::ground_energy(h), 1e-10);
  EXPECT_LT((h * r.vector - r.value * r.vector).norm(), 1e-8);
  EXPECT_TRUE(r.converged);
}

TEST(Lanczos, ZeroStartVector) { EXPECT_THROW(lanczos_ground([](const VecC& v) { return v; }, VecC::Zero(3)), Error); }

TEST(EffectiveApply, MatchesExplicitHeffForTwoSites) {
  HamiltonianSpec s = tfim(2, 1.0, 0.8, 0.3);
  DmrgEngine eng(build_mpo(s), random_mps(2, 2, 4, 1), {});
  // Center at site 0 with a right-canonical site 1: H_eff = B† H B on the site-0 tensor.
  const MatC heff = eng.effective_matrix(0);
  const MpsState st = canonicalize(random_mps(2, 2, 4, 1), CanonicalForm::Right, {4, 0.0, true});
  const MatC b = st.gammas[1].as_matrix(1);  // (k, d) with k = 2
  // Basis of site-0 tensors (1, s, k): ψ = Σ m[s,k] |s> ⊗ B_k.
  MatC iso(4, 4);
  for (std::size_t s0 = 0; s0 < 2; ++s0)
    for (std::size_t k = 0; k < 2; ++k) {
      VecC v = VecC::Zero(4);
      for (std::size_t s1 = 0; s1 < 2; ++s1) v[s0 * 2 + s1] = b(k, s1);
      iso.col(s0 * 2 + k) = v;
    }
  const MatC ref = iso.adjoint() * oracle::tfim(2, 1.0, 0.8, 0.3) * iso;
  EXPECT_LT((heff - ref).norm(), 1e-12);
  DenseTensor zero({1, 2, 2});
  EXPECT_EQ(eng.effective_apply(0, zero).norm(), 0.0);
}

TEST(EffectiveApply, SumOfIdentitiesScalesByLength) {
  HamiltonianSpec s;
  s.model = ModelKind::Custom;
  s.length = 5;
  for (std::size_t i = 0; i < 5; ++i) s.terms.push_back({{i}, {"id"}, 1.0});
  DmrgEngine eng(build_mpo(s), random_mps(5, 2, 4, 3), {});
  DenseTensor m({1, 2, 2});
  for (std::size_t q = 0; q < m.size(); ++q) m[q] = cplx(0.1 * q, 0.2);
  DenseTensor out = eng.effective_apply(0, m);
  EXPECT_LT(max_abs_diff(out, cplx(5.0) * m), 1e-12);
}

TEST(Dmrg, TfimMatchesExactDiagonalization) {
  DmrgOptions o;
  o.chi_max = 32;
  auto r = dmrg_run(tfim(8, 1, 1, 0), o, 7);
  const double exact = oracle::ground_energy(oracle::tfim(8, 1, 1, 0));
  EXPECT_NEAR(r.energy, exact, 1e-8);
  EXPECT_GE(r.energy, exact - 1e-9);
  for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LE(r.history[k], r.history[k - 1] + 1e-10);
  EXPECT_EQ(r.state.form, CanonicalForm::Vidal);
  EXPECT_NEAR(mpo_expectation(build_mpo(tfim(8, 1, 1, 0)), r.state), exact, 1e-8);
}

TEST(Dmrg, HeisenbergTwoSites) {
  HamiltonianSpec h;
  h.model = ModelKind::Heisenberg;
  h.length = 2;
  h.couplings = {{"J", 1}};
  EXPECT_NEAR(dmrg_run(h, {}, 1).energy, -0.75, 1e-12);
}

TEST(Dmrg, ClassicalAntiferromagnet) {
  const std::size_t L = 6;
  auto r = dmrg_run(tfim(L, 1, 0, 0.1), DmrgOptions{8}, 3);
  // Classical enumeration oracle over all 2^L configurations.
  double best = 1e9;
  for (std::size_t c = 0; c < (1u << L); ++c) {
    double e = 0;
    auto z = [&](std::size_t i) { return ((c >> (L - 1 - i)) & 1) ? -1.0 : 1.0; };
    for (std::size_t i = 0; i + 1 < L; ++i) e += z(i) * z(i + 1);
    for (std::size_t i = 0; i < L; ++i) e -= 0.1 * z(i);
    best = std::min(best, e);
  }
  EXPECT_NEAR(r.energy, best, 1e-10);
  EXPECT_NEAR(best, -double(L - 1), 1e-12);  // Néel, ΣZ = 0 for even L
}

TEST(DmrgProperty, VariationalBoundAndEnvironments) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t L = 4 + seed % 7;
    const double gx = 0.3 + 0.3 * seed, gz = 0.05 * seed;
    DmrgOptions o;
    o.chi_max = 32;
    Mpo mpo = build_mpo(tfim(L, 1, gx, gz));
    DmrgEngine eng(mpo, random_mps(L, 2, 32, seed), o);
    DmrgResult r = eng.run();
    EXPECT_LT(eng.env_consistency_error(), 1e-10);
    const double exact = oracle::ground_energy(oracle::tfim(L, 1, gx, gz));
    EXPECT_GE(r.energy, exact - 1e-9);
    EXPECT_LT(r.energy - exact, 1e-7);
    const auto& le = eng.local_energies();
    for (std::size_t k = 1; k < le.size(); ++k) EXPECT_LE(le[k], le[k - 1] + 1e-10);
  }
}
