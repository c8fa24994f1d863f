#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qphase/random.hpp"
#include "qphase/vqad.hpp"

using namespace qphase;

namespace {

using oracle::Mat;

// Oracle convention: site 0 is the most significant bit, so qubit q is site n-1-q.
std::size_t site(std::size_t n, std::size_t q) { return n - 1 - q; }

Mat proj(int b) {
  Mat m = Mat::Zero(2, 2);
  m(b, b) = 1;
  return m;
}

Mat one_qubit(std::size_t n, std::size_t q, const Mat& u) { return oracle::embed(n, 2, {site(n, q)}, {u}); }

Mat two_qubit(std::size_t n, std::size_t a, std::size_t b, const Mat& ua, const Mat& ub) {
  return oracle::embed(n, 2, {site(n, a), site(n, b)}, {ua, ub});
}

// Dense lifted matrix of one gate, written from the gate definitions.
Mat lifted(std::size_t n, const CircuitGate& g, double angle) {
  const Mat I = Mat::Identity(2, 2), X = oracle::pauli('X'), Y = oracle::pauli('Y'), Z = oracle::pauli('Z');
  const std::complex<double> i(0, 1);
  const double c = std::cos(angle / 2), s = std::sin(angle / 2);
  const std::size_t q = g.qubits[0];
  switch (g.kind) {
    case GateKind::RX: return one_qubit(n, q, c * I - i * s * X);
    case GateKind::RY: return one_qubit(n, q, c * I - i * s * Y);
    case GateKind::RZ: return one_qubit(n, q, c * I - i * s * Z);
    case GateKind::H: return one_qubit(n, q, (X + Z) / std::sqrt(2.0));
    case GateKind::X: return one_qubit(n, q, X);
    case GateKind::SX: return one_qubit(n, q, 0.5 * ((1.0 + i) * I + (1.0 - i) * X));
    case GateKind::CZ:
      return two_qubit(n, q, g.qubits[1], proj(0), I) + two_qubit(n, q, g.qubits[1], proj(1), Z);
    case GateKind::CX:
      return two_qubit(n, q, g.qubits[1], proj(0), I) + two_qubit(n, q, g.qubits[1], proj(1), X);
    case GateKind::SWAP:
      return 0.5 * (two_qubit(n, q, g.qubits[1], I, I) + two_qubit(n, q, g.qubits[1], X, X) +
                    two_qubit(n, q, g.qubits[1], Y, Y) + two_qubit(n, q, g.qubits[1], Z, Z));
    default: ADD_FAILURE() << "gate not covered by the oracle"; return Mat();
  }
}

QuantumCircuit random_circuit(std::size_t n, std::size_t depth, std::uint64_t seed) {
  Rng r(seed);
  const GateKind kinds[] = {GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::H, GateKind::X,
                            GateKind::SX, GateKind::CZ, GateKind::CX, GateKind::SWAP};
  QuantumCircuit c;
  c.n_qubits = n;
  for (std::size_t k = 0; k < depth; ++k) {
    const GateKind kind = kinds[r.below(9)];
    const std::size_t a = r.below(n);
    std::size_t b = r.below(n - 1);
    if (b >= a) ++b;
    const bool two = kind == GateKind::CZ || kind == GateKind::CX || kind == GateKind::SWAP;
    std::vector<std::size_t> qs = two ? std::vector<std::size_t>{a, b} : std::vector<std::size_t>{a};
    if (is_parameterizable(kind)) c.add_param_gate(kind, qs);
    else c.add_fixed(kind, qs);
  }
  return c;
}

std::vector<double> random_theta(std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  std::vector<double> t(n);
  for (auto& x : t) x = r.uniform(-M_PI, M_PI);
  return t;
}

Statevector basis(std::size_t n, std::size_t idx) {
  Statevector s = Statevector::Zero(std::size_t(1) << n);
  s[idx] = 1;
  return s;
}

PauliSum single(std::size_t n, std::size_t q, char p) {
  PauliSum h;
  h.n_qubits = n;
  std::string s(n, 'I');
  s[q] = p;
  h.add(1.0, s);
  return h;
}

}  // namespace

TEST(Simulate, TrivialCircuits) {
  QuantumCircuit c;
  c.n_qubits = 3;
  const auto psi = simulate(c, {});
  EXPECT_EQ(psi.size(), 8);
  EXPECT_DOUBLE_EQ(std::abs(psi[0]), 1.0);
  c.add_param_gate(GateKind::RY, {0});
  const auto one = simulate(c, {M_PI});
  EXPECT_NEAR(std::abs(one[1]), 1.0, 1e-15);
  Statevector wrong = Statevector::Zero(4);
  EXPECT_THROW(simulate(c, {0.1}, &wrong), Error);
  EXPECT_THROW(simulate(c, {}), Error);
}

TEST(Simulate, MatchesDenseKronOracle) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const std::size_t n = 4;
    const auto c = random_circuit(n, 30, seed);
    const auto th = random_theta(c.n_params, seed + 50);
    Mat u = Mat::Identity(16, 16);
    for (const auto& g : c.gates) u = lifted(n, g, g.angle(th)) * u;
    // site n-1-q sits at bit q of the oracle index, so columns line up directly
    for (std::size_t k : {0u, 5u, 11u}) {
      const Statevector in = basis(n, k);
      const Statevector out = simulate(c, th, &in);
      double err = 0;
      for (std::size_t i = 0; i < 16; ++i) err = std::max(err, std::abs(out[i] - u(i, k)));
      EXPECT_LT(err, 1e-12) << "seed " << seed << " input " << k;
      EXPECT_NEAR(out.norm(), 1.0, 1e-10);
    }
  }
}

TEST(Simulate, NormPreservedOnLargerRegisters) {
  const auto c = random_circuit(10, 200, 9);
  const auto psi = simulate(c, random_theta(c.n_params, 3));
  EXPECT_NEAR(psi.norm(), 1.0, 1e-10);
}

TEST(Gates, DecompositionIdentities) {
  const auto checks = decomposition_identities();
  EXPECT_GE(checks.size(), 3u);
  for (const auto& c : checks) EXPECT_LT(c.error, 1e-12) << c.name;
}

TEST(Gates, ValidationErrors) {
  QuantumCircuit c;
  c.n_qubits = 2;
  c.add_fixed(GateKind::CZ, {1, 1});
  EXPECT_THROW(c.validate(), Error);
  c.gates.clear();
  c.add_fixed(GateKind::CX, {0, 2});
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(gate_from_string("TOFFOLI"), Error);
  EXPECT_EQ(gate_from_string("SQRT_X"), GateKind::SX);
}

TEST(Pauli, Expectations) {
  EXPECT_DOUBLE_EQ(pauli_expectation(zero_state(1), single(1, 0, 'Z')), 1.0);
  QuantumCircuit plus;
  plus.n_qubits = 1;
  plus.add_fixed(GateKind::H, {0});
  EXPECT_NEAR(pauli_expectation(simulate(plus, {}), single(1, 0, 'X')), 1.0, 1e-15);

  const auto h = tlfi_hamiltonian(3, 1.0, 0.7, 0.2);
  const Mat dense = oracle::tfim(3, 1.0, 0.7, 0.2);
  const auto psi = oracle::random_state(8, 21);
  const double ref = std::real(psi.dot(dense * psi));
  EXPECT_NEAR(pauli_expectation(psi, h), ref, 1e-12);
  EXPECT_LT((pauli_sum_matrix(h) - dense).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(pauli_expectation(Statevector::Zero(4), h), Error);
  PauliSum bad;
  bad.n_qubits = 2;
  EXPECT_THROW(bad.add(1.0, "ZQ"), Error);
}

TEST(Pauli, ExactGroundMatchesDense) {
  const auto h = tlfi_hamiltonian(10, 1.0, 0.8, 0.1);
  const auto g = exact_ground(h);
  EXPECT_NEAR(g.energy, oracle::ground_energy(oracle::tfim(10, 1.0, 0.8, 0.1)), 1e-9);
  EXPECT_NEAR(pauli_expectation(g.state, h), g.energy, 1e-9);
}

TEST(ParameterShift, SingleRotation) {
  QuantumCircuit c;
  c.n_qubits = 1;
  c.add_param_gate(GateKind::RY, {0});
  const auto z = single(1, 0, 'Z');
  EXPECT_NEAR(parameter_shift_gradient(c, {0.0}, z)[0], 0.0, 1e-15);
  EXPECT_NEAR(parameter_shift_gradient(c, {M_PI / 2}, z)[0], -1.0, 1e-14);
}

TEST(ParameterShift, AllShippedAnsaetzeMatchFiniteDifferences) {
  const std::size_t n = 5;
  const auto h = tlfi_hamiltonian(n, 1.0, 0.6, 0.1);
  std::vector<QuantumCircuit> circuits;
  for (auto e : {Entangler::Circular, Entangler::Linear, Entangler::Ladder}) {
    AnsatzParams p;
    p.layers = 2;
    p.entangler = e;
    circuits.push_back(build_ansatz(AnsatzKind::VqeHardwareEfficient, n, p));
  }
  circuits.push_back(build_ansatz(AnsatzKind::VqadSyndrome, n));
  AnsatzParams q;
  q.qaoa_p = 2;
  q.problem = tlfi_hamiltonian(n, 1.0, 0.0, 0.3);
  q.problem.terms.erase(std::remove_if(q.problem.terms.begin(), q.problem.terms.end(),
                                       [](const PauliTerm& t) { return t.coef == 0.0; }),
                        q.problem.terms.end());
  circuits.push_back(build_ansatz(AnsatzKind::Qaoa, n, q));
  std::uint64_t seed = 5;
  for (const auto& c : circuits) {
    const auto th = random_theta(c.n_params, seed++);
    const auto ps = parameter_shift_gradient(c, th, h);
    const auto fd = finite_difference_gradient(c, th, h, 1e-6);
    double err = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) err = std::max(err, std::abs(ps[i] - fd[i]));
    EXPECT_LT(err, 1e-6) << "circuit with " << c.n_params << " parameters";
  }
}

TEST(ParameterShift, RejectsNonPauliRotation) {
  QuantumCircuit c;
  c.n_qubits = 2;
  c.add_param_gate(GateKind::CPhase, {0, 1});
  PauliSum h = single(2, 0, 'Z');
  EXPECT_THROW(parameter_shift_gradient(c, {0.3}, h), Error);
  EXPECT_NO_THROW(simulate(c, {0.3}));
}

TEST(Spsa, QuadraticBowl) {
  SpsaConfig cfg;
  const auto r = spsa_optimize(
      [](const std::vector<double>& t) { return t[0] * t[0] + t[1] * t[1]; }, {1.0, 1.0}, cfg);
  EXPECT_LT(std::hypot(r.theta[0], r.theta[1]), 0.05);
  EXPECT_EQ(r.trace.size(), 200u);
}

TEST(Spsa, NoisyQuadraticAndStepBound) {
  SpsaConfig cfg;
  cfg.seed = 4;
  Rng noise(99);
  const auto r = spsa_optimize(
      [&](const std::vector<double>& t) { return t[0] * t[0] + t[1] * t[1] + 0.1 * noise.normal(); }, {1.0, 1.0},
      cfg);
  EXPECT_LT(std::hypot(r.theta[0], r.theta[1]), 0.2);

  // pure bounded noise: each step is at most a_k / (2 c_k) per coordinate
  Rng flat(7);
  std::vector<double> prev = {0.0, 0.0};
  SpsaConfig one = cfg;
  for (int k = 0; k < 30; ++k) {
    one.iterations = 1;
    one.seed = derive_seed(5, k);
    const auto s = spsa_optimize([&](const std::vector<double>&) { return flat.uniform(-0.5, 0.5); }, prev, one);
    const double bound = cfg.a / std::pow(1 + cfg.A, cfg.alpha) / (2 * cfg.c);
    for (int i = 0; i < 2; ++i) EXPECT_LE(std::abs(s.theta[i] - prev[i]), bound + 1e-15);
    prev = s.theta;
  }
}

TEST(Ansatz, SyndromeStructure) {
  for (std::size_t n : {3u, 4u, 5u, 8u, 12u}) {
    const auto c = build_ansatz(AnsatzKind::VqadSyndrome, n);
    const std::size_t nt = default_trash_count(n);
    EXPECT_EQ(c.n_params, n * nt + nt) << n;
    const auto trash = middle_trash(n, nt);
    std::map<std::pair<std::size_t, std::size_t>, int> meets;
    for (const auto& g : c.gates)
      if (g.kind == GateKind::CZ) ++meets[{g.qubits[0], g.qubits[1]}];
    for (std::size_t q = 0; q < n; ++q) {
      if (std::count(trash.begin(), trash.end(), q)) continue;
      for (auto t : trash) EXPECT_EQ(meets[std::make_pair(q, t)], 1) << "n " << n << " qubit " << q << " trash " << t;
    }
    EXPECT_EQ(meets.size(), (n - nt) * nt);
  }
  EXPECT_EQ(default_trash_count(4), 2u);
  EXPECT_EQ(default_trash_count(3), 1u);
  EXPECT_EQ(default_trash_count(32), 5u);
  EXPECT_EQ(build_ansatz(AnsatzKind::VqadSyndrome, 4).n_params, 10u);
  const std::vector<std::size_t> mid = {2, 3, 4};
  EXPECT_EQ(middle_trash(8, 3), mid);
  AnsatzParams bad;
  bad.n_trash = 4;
  EXPECT_THROW(build_ansatz(AnsatzKind::VqadSyndrome, 4, bad), Error);
  bad.n_trash = 0;
  bad.trash = {0, 1, 2};
  EXPECT_THROW(build_ansatz(AnsatzKind::VqadSyndrome, 3, bad), Error);
  EXPECT_THROW(ansatz_from_string("uccsd"), Error);
}

TEST(Ansatz, QaoaMatchesDenseExponentials) {
  AnsatzParams p;
  p.qaoa_p = 1;
  p.qaoa_prepare_plus = false;
  const auto c = build_ansatz(AnsatzKind::Qaoa, 2, p);
  const double t1 = 0.37, t2 = -1.1;
  const MatC u = circuit_unitary(c, {t1, t2});
  auto expm = [](const Mat& h, double t) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    const Eigen::VectorXcd ph = (es.eigenvalues().cast<std::complex<double>>() * std::complex<double>(0, -t)).array().exp();
    return Mat(es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint());
  };
  const Mat hp = oracle::kron(oracle::pauli('Z'), oracle::pauli('Z'));
  const Mat hx = oracle::kron(oracle::pauli('X'), Mat::Identity(2, 2)) + oracle::kron(Mat::Identity(2, 2), oracle::pauli('X'));
  const Mat ref = expm(hx, t2) * expm(hp, t1);
  EXPECT_LT((u - ref).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((u.adjoint() * u - MatC::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Vqe, LadderAnsatzReachesExactEnergy) {
  const auto h = tlfi_hamiltonian(5, 1.0, 0.5, 0.1);
  const double e0 = exact_ground(h).energy;
  AnsatzParams p;
  p.layers = 3;
  p.entangler = Entangler::Ladder;
  VqeConfig cfg;
  cfg.optimizer = VqeOptimizer::ParameterShiftBfgs;
  cfg.init_scale = 1.0;
  const auto r = vqe_run(h, build_ansatz(AnsatzKind::VqeHardwareEfficient, 5, p), cfg);
  EXPECT_LT(r.energy - e0, 1e-2);
  EXPECT_GE(r.energy, e0 - 1e-9);
  EXPECT_NEAR(pauli_expectation(r.state, h), r.energy, 1e-12);
}

TEST(Vqe, CircularOneLayerIsVariationalButCoarse) {
  const auto h = tlfi_hamiltonian(5, 1.0, 0.5, 0.1);
  const double e0 = exact_ground(h).energy;
  VqeConfig cfg;
  cfg.max_iterations = 300;
  const auto r = vqe_run(h, build_ansatz(AnsatzKind::VqeHardwareEfficient, 5), cfg);
  EXPECT_GE(r.energy, e0 - 1e-9);
  EXPECT_LT(r.energy, e0 + 0.1);
}

TEST(Vqe, ClassicalLimitGivesNeelEnergy) {
  const auto h = tlfi_hamiltonian(5, 1.0, 0.0, 0.1);
  AnsatzParams p;
  p.layers = 1;
  p.entangler = Entangler::Ladder;
  VqeConfig cfg;
  cfg.optimizer = VqeOptimizer::ParameterShiftBfgs;
  cfg.restarts = 4;
  cfg.init_scale = 1.0;
  const auto r = vqe_run(h, build_ansatz(AnsatzKind::VqeHardwareEfficient, 5, p), cfg);
  // 0 1 0 1 0 pattern: four broken... four satisfied bonds and three up spins
  EXPECT_NEAR(r.energy, -4.0 - 0.1, 1e-6);
}

TEST(Vqe, WarmStartNeedsFewerIterations) {
  AnsatzParams p;
  p.layers = 2;
  p.entangler = Entangler::Ladder;
  const auto an = build_ansatz(AnsatzKind::VqeHardwareEfficient, 5, p);
  VqeConfig cold;
  cold.optimizer = VqeOptimizer::ParameterShiftBfgs;
  cold.init_scale = 1.0;
  cold.grad_tol = 1e-6;
  int cold_total = 0, warm_total = 0;
  std::vector<double> prev;
  for (double g : {1.2, 1.3, 1.4, 1.5, 1.6}) {
    const auto h = tlfi_hamiltonian(5, 1.0, g, 0.1);
    const auto rc = vqe_run(h, an, cold);
    VqeConfig warm = cold;
    warm.warm_start = prev.empty() ? rc.theta : prev;
    const auto rw = vqe_run(h, an, warm);
    cold_total += rc.iterations;
    warm_total += rw.iterations;
    prev = rw.theta;
    EXPECT_LT(rw.energy, rc.energy + 1e-6);
  }
  EXPECT_LT(warm_total, cold_total);
}

TEST(Vqe, SpsaLowersTheEnergy) {
  const auto h = tlfi_hamiltonian(3, 1.0, 1.0, 0.1);
  VqeConfig cfg;
  cfg.optimizer = VqeOptimizer::Spsa;
  cfg.spsa.iterations = 300;
  const auto an = build_ansatz(AnsatzKind::VqeHardwareEfficient, 3);
  const auto r = vqe_run(h, an, cfg);
  EXPECT_LT(r.energy, r.history.front());
  EXPECT_GE(r.energy, exact_ground(h).energy - 1e-9);
  EXPECT_EQ(vqe_optimizer_from_string("spsa"), VqeOptimizer::Spsa);
}

TEST(Hamming, ExactAndSampled) {
  const std::vector<std::size_t> trash = {1, 2};
  EXPECT_DOUBLE_EQ(hamming_cost(basis(4, 0b1001), trash), 0.0);
  EXPECT_DOUBLE_EQ(hamming_cost(basis(4, 0b0110), trash), 2.0);
  const auto psi = oracle::random_state(16, 3);
  const double exact = hamming_cost(psi, trash);
  EXPECT_GE(exact, 0.0);
  EXPECT_LE(exact, 2.0);
  // per-shot variance bound of a count in [0, 2]
  double second = 0;
  for (std::size_t i = 0; i < 16; ++i) second += std::norm(psi[i]) * std::pow(((i >> 1) & 1) + ((i >> 2) & 1), 2);
  const double sigma = std::sqrt(second - exact * exact);
  EXPECT_NEAR(hamming_cost(psi, trash, 1000, 11), exact, 3 * sigma / std::sqrt(1000.0));
  double mean = 0;
  for (std::uint64_t s = 0; s < 100; ++s) mean += hamming_cost(psi, trash, 1000, 1000 + s);
  mean /= 100;
  EXPECT_NEAR(mean, exact, 3 * sigma / std::sqrt(1000.0) / 10);
  QuantumCircuit c;
  c.n_qubits = 3;
  EXPECT_THROW(hamming_cost(c, {}, zero_state(3), {}), Error);
  EXPECT_THROW(hamming_cost(c, {}, zero_state(3), {0, 1, 2}), Error);
}

TEST(Noise, ZeroProbabilityIsExact) {
  const auto c = build_ansatz(AnsatzKind::VqadSyndrome, 5);
  const auto th = random_theta(c.n_params, 2);
  const auto h = tlfi_hamiltonian(5, 1.0, 0.4, 0.1);
  NoiseModel nm;
  const auto e = noisy_expectation(c, th, h, nm);
  EXPECT_NEAR(e.mean, circuit_energy(c, th, h), 1e-12);
  EXPECT_EQ(e.stderr_, 0.0);
  nm.p1 = 1.5;
  EXPECT_THROW(noisy_expectation(c, th, h, nm), Error);
}

TEST(Noise, CertainSingleQubitErrorAveragesPaulis) {
  QuantumCircuit c;
  c.n_qubits = 1;
  c.add_param_gate(GateKind::RY, {0});
  NoiseModel nm;
  nm.p1 = 1.0;
  nm.trajectories = 6000;
  const auto e = noisy_expectation(c, {0.0}, single(1, 0, 'Z'), nm);
  // X, Y flip |0>, Z does not: (-1 - 1 + 1) / 3
  EXPECT_NEAR(e.mean, -1.0 / 3.0, 4 * e.stderr_);
  EXPECT_GT(e.stderr_, 0.0);
}

TEST(Vqad, TrainingFloorNoiseless) {
  for (std::size_t L : {3u, 4u, 8u}) {
    const auto state = exact_ground(tlfi_hamiltonian(L, 1.0, 0.2, 0.1)).state;
    const auto syn = build_ansatz(AnsatzKind::VqadSyndrome, L);
    const auto trash = resolve_trash(L, {});
    const auto r = vqad_train(syn, trash, state, VqadConfig{});
    EXPECT_LE(r.final_cost, 0.01) << "L = " << L;
    EXPECT_NEAR(vqad_score_line(syn, r.theta, trash, {state})[0], r.final_cost, 1e-12);
  }
}

TEST(Vqad, DisentangledInputNeedsNoTraining) {
  const auto syn = build_ansatz(AnsatzKind::VqadSyndrome, 4);
  const auto r = vqad_train(syn, resolve_trash(4, {}), zero_state(4), VqadConfig{});
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.final_cost, 0.0);
  for (double t : r.theta) EXPECT_EQ(t, 0.0);
}

TEST(Vqad, OppositeNeelBranchScoresHigh) {
  const std::size_t L = 4;
  const auto syn = build_ansatz(AnsatzKind::VqadSyndrome, L);
  const auto trash = resolve_trash(L, {});
  ASSERT_EQ(trash.front(), 1u);
  // flip trash qubit 1 in the closing RY layer; CZs only add phases on basis states
  VqadConfig cfg;
  cfg.init.assign(syn.n_params, 0.0);
  cfg.init[syn.n_params - trash.size()] = M_PI;
  const auto r = vqad_train(syn, trash, basis(L, 0b1010), cfg);
  EXPECT_LT(r.final_cost, 1e-20);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_NEAR(hamming_cost(syn, r.theta, basis(L, 0b0101), trash), double(trash.size()), 1e-12);
}

TEST(Vqad, ParamagnetSyndromeFlagsOrderedState) {
  const std::size_t L = 5;
  const auto syn = build_ansatz(AnsatzKind::VqadSyndrome, L);
  const auto trash = resolve_trash(L, {});
  const auto para = exact_ground(tlfi_hamiltonian(L, 1.0, 2.0, 0.1)).state;
  const auto ord = exact_ground(tlfi_hamiltonian(L, 1.0, 0.2, 0.1)).state;
  const auto r = vqad_train(syn, trash, para, VqadConfig{});
  EXPECT_GT(hamming_cost(syn, r.theta, ord, trash), 0.5);
}

TEST(Vqad, NoisyTrainingKeepsAFloor) {
  const std::size_t L = 5;
  const auto syn = build_ansatz(AnsatzKind::VqadSyndrome, L);
  const auto trash = resolve_trash(L, {});
  const auto state = exact_ground(tlfi_hamiltonian(L, 1.0, 0.2, 0.1)).state;
  VqadConfig cfg;
  cfg.noisy = true;
  cfg.noise.p1 = 0.001;
  cfg.noise.p2 = 0.01;
  cfg.noise.trajectories = 50;
  cfg.spsa.iterations = 300;
  const auto r = vqad_train(syn, trash, state, cfg);
  EXPECT_LT(r.final_cost, 0.1);
  EXPECT_GT(r.final_noisy_cost, 0.0);
}

TEST(Adapt, DerivativesAndTies) {
  // H = Z on |+>, generator Y/2: i<[Y/2, Z]> has magnitude 1
  PauliSum h = single(1, 0, 'Z');
  QuantumCircuit plus;
  plus.n_qubits = 1;
  plus.add_fixed(GateKind::H, {0});
  const auto psi = simulate(plus, {});
  const std::vector<PoolOperator> pool = {{"Z", "Z", 0.5}, {"Y", "Y", 0.5}, {"Y again", "Y", 0.5}};
  const auto ch = adapt_grow(pool, psi, h);
  EXPECT_EQ(ch.index, 1u);
  EXPECT_NEAR(std::abs(ch.derivative), 1.0, 1e-14);
  EXPECT_NEAR(ch.derivatives[0], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(ch.derivatives[1], ch.derivatives[2]);
  // dense commutator oracle
  const Mat G = 0.5 * oracle::pauli('Y'), H = oracle::pauli('Z');
  const std::complex<double> ref = std::complex<double>(0, 1) * psi.dot((G * H - H * G) * psi);
  EXPECT_NEAR(ch.derivative, ref.real(), 1e-14);
  EXPECT_FALSE(ch.stop);
  EXPECT_TRUE(adapt_grow({{"Z", "Z", 0.5}}, psi, h).stop);
  EXPECT_THROW(adapt_grow({}, psi, h), Error);
}

TEST(Adapt, GrowsTowardTheGroundState) {
  const std::size_t n = 3;
  const auto h = tlfi_hamiltonian(n, 1.0, 0.8, 0.1);
  std::vector<PoolOperator> pool;
  for (std::size_t q = 0; q < n; ++q) {
    std::string s(n, 'I');
    s[q] = 'Y';
    pool.push_back({"Y" + std::to_string(q), s, 0.5});
    if (q + 1 < n) {
      std::string a(n, 'I'), b(n, 'I');
      a[q] = 'Y';
      a[q + 1] = 'Z';
      b[q] = 'Z';
      b[q + 1] = 'Y';
      pool.push_back({"YZ" + std::to_string(q), a, 0.5});
      pool.push_back({"ZY" + std::to_string(q), b, 0.5});
    }
  }
  VqeConfig cfg;
  cfg.max_iterations = 500;
  cfg.learning_rate = 0.05;
  cfg.grad_tol = 1e-5;
  const auto start = basis(n, 0b010);
  const auto r = adapt_vqe(pool, h, start, 12, 1e-4, cfg);
  const double e0 = exact_ground(h).energy;
  EXPECT_GE(r.energy, e0 - 1e-9);
  EXPECT_LT(r.energy, pauli_expectation(start, h) - 0.1);
  EXPECT_LT(r.energy - e0, 0.05);
  EXPECT_FALSE(r.chosen.empty());
}

TEST(Circuit, JsonRoundTrip) {
  const auto c = build_ansatz(AnsatzKind::Qaoa, 3);
  const auto th = random_theta(c.n_params, 8);
  std::vector<double> back_th;
  const auto back = circuit_from_json(circuit_to_json(c, th), &back_th);
  EXPECT_EQ(back_th, th);
  EXPECT_LT((simulate(back, back_th) - simulate(c, th)).norm(), 1e-15);
  EXPECT_THROW(circuit_from_json("{\"n_qubits\": 2}"), Error);
}
