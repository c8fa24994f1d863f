#include "qphase/vqad.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "json.hpp"
#include "qphase/linalg.hpp"
#include "qphase/random.hpp"

namespace qphase {

namespace {

const std::map<std::string, GateKind>& gate_table() {
  static const std::map<std::string, GateKind> t = {
      {"RX", GateKind::RX},     {"RY", GateKind::RY},     {"RZ", GateKind::RZ},
      {"X", GateKind::X},       {"Y", GateKind::Y},       {"Z", GateKind::Z},
      {"H", GateKind::H},       {"SQRT_X", GateKind::SX}, {"SQRT_X_DG", GateKind::SXdg},
      {"CZ", GateKind::CZ},     {"CX", GateKind::CX},     {"SWAP", GateKind::SWAP},
      {"PAULI_ROT", GateKind::PauliRot}, {"CPHASE", GateKind::CPhase}};
  return t;
}

std::size_t arity(GateKind k) {
  switch (k) {
    case GateKind::CZ:
    case GateKind::CX:
    case GateKind::SWAP:
    case GateKind::CPhase: return 2;
    case GateKind::PauliRot: return 0;  // from the Pauli string
    default: return 1;
  }
}

const cplx I1(0.0, 1.0);

MatC pauli2(char p) {
  MatC m = MatC::Zero(2, 2);
  switch (p) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, -I1, I1, 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: throw Error(ErrorCode::UnsupportedGate, std::string("unknown Pauli '") + p + "'");
  }
  return m;
}

// Phase and flip mask of a Pauli string: P|i> = phase(i) |i ^ xmask>.
struct PauliMasks {
  std::uint64_t x = 0, yz = 0;
  int ny = 0;
  bool identity = true;
};

PauliMasks masks_of(const std::string& ops) {
  PauliMasks m;
  for (std::size_t q = 0; q < ops.size(); ++q) {
    const char c = ops[q];
    if (c == 'I') continue;
    m.identity = false;
    if (c == 'X' || c == 'Y') m.x |= 1ULL << q;
    if (c == 'Y' || c == 'Z') m.yz |= 1ULL << q;
    if (c == 'Y') ++m.ny;
    if (c != 'X' && c != 'Y' && c != 'Z') throw Error(ErrorCode::UnsupportedGate, "Pauli strings use I, X, Y, Z");
  }
  return m;
}

cplx ipow(int k) {
  switch (((k % 4) + 4) % 4) {
    case 0: return 1.0;
    case 1: return I1;
    case 2: return -1.0;
    default: return -I1;
  }
}

void check_state(const Statevector& psi, std::size_t n) {
  if (std::size_t(psi.size()) != (std::size_t(1) << n))
    throw Error(ErrorCode::DimMismatch, "state has " + std::to_string(psi.size()) + " amplitudes, expected 2^" +
                                            std::to_string(n));
}

// Full-register Pauli string for a PauliRot gate.
std::string full_string(const CircuitGate& g, std::size_t n) {
  std::string s(n, 'I');
  for (std::size_t k = 0; k < g.qubits.size(); ++k) s[g.qubits[k]] = g.pauli[k];
  return s;
}

}  // namespace

GateKind gate_from_string(const std::string& s) {
  const auto it = gate_table().find(s);
  if (it == gate_table().end()) throw Error(ErrorCode::UnsupportedGate, "unknown gate '" + s + "'");
  return it->second;
}

const char* gate_name(GateKind k) {
  for (const auto& [name, kind] : gate_table())
    if (kind == k) return name.c_str();
  return "?";
}

bool is_parameterizable(GateKind k) {
  return k == GateKind::RX || k == GateKind::RY || k == GateKind::RZ || k == GateKind::PauliRot ||
         k == GateKind::CPhase;
}

bool is_pauli_rotation(GateKind k) {
  return k == GateKind::RX || k == GateKind::RY || k == GateKind::RZ || k == GateKind::PauliRot;
}

double CircuitGate::angle(const std::vector<double>& theta) const {
  if (param < 0) return offset;
  return coef * theta.at(std::size_t(param)) + offset;
}

int QuantumCircuit::add_param_gate(GateKind k, std::vector<std::size_t> qubits, std::string pauli) {
  CircuitGate g;
  g.kind = k;
  g.qubits = std::move(qubits);
  g.param = int(n_params++);
  g.pauli = std::move(pauli);
  gates.push_back(std::move(g));
  return gates.back().param;
}

void QuantumCircuit::add_fixed(GateKind k, std::vector<std::size_t> qubits, double angle, std::string pauli) {
  CircuitGate g;
  g.kind = k;
  g.qubits = std::move(qubits);
  g.offset = angle;
  g.pauli = std::move(pauli);
  gates.push_back(std::move(g));
}

void QuantumCircuit::validate() const {
  if (n_qubits == 0 || n_qubits > 30) throw Error(ErrorCode::DimMismatch, "qubit count must be in 1..30");
  for (const auto& g : gates) {
    const std::size_t a = g.kind == GateKind::PauliRot ? g.pauli.size() : arity(g.kind);
    if (g.qubits.size() != a || a == 0)
      throw Error(ErrorCode::DimMismatch, std::string("gate ") + gate_name(g.kind) + " has the wrong number of targets");
    for (std::size_t i = 0; i < g.qubits.size(); ++i) {
      if (g.qubits[i] >= n_qubits) throw Error(ErrorCode::DimMismatch, "gate target outside the register");
      for (std::size_t j = 0; j < i; ++j)
        if (g.qubits[i] == g.qubits[j]) throw Error(ErrorCode::DimMismatch, "gate targets must be distinct");
    }
    if (g.param >= int(n_params)) throw Error(ErrorCode::DimMismatch, "gate parameter index out of range");
    if (g.param >= 0 && !is_parameterizable(g.kind))
      throw Error(ErrorCode::UnsupportedGate, std::string(gate_name(g.kind)) + " takes no parameter");
  }
}

MatC gate_matrix(const CircuitGate& g, double angle) {
  const double c = std::cos(angle / 2), s = std::sin(angle / 2);
  MatC m;
  switch (g.kind) {
    case GateKind::RX: m.resize(2, 2); m << c, -I1 * s, -I1 * s, c; return m;
    case GateKind::RY: m.resize(2, 2); m << c, -s, s, c; return m;
    case GateKind::RZ: m.resize(2, 2); m << std::exp(-I1 * (angle / 2)), 0, 0, std::exp(I1 * (angle / 2)); return m;
    case GateKind::X: return pauli2('X');
    case GateKind::Y: return pauli2('Y');
    case GateKind::Z: return pauli2('Z');
    case GateKind::H: m.resize(2, 2); m << 1, 1, 1, -1; return m / std::sqrt(2.0);
    case GateKind::SX: m.resize(2, 2); m << cplx(1, 1), cplx(1, -1), cplx(1, -1), cplx(1, 1); return 0.5 * m;
    case GateKind::SXdg: m.resize(2, 2); m << cplx(1, -1), cplx(1, 1), cplx(1, 1), cplx(1, -1); return 0.5 * m;
    case GateKind::CZ: m = MatC::Identity(4, 4); m(3, 3) = -1; return m;
    case GateKind::CX:
      m = MatC::Zero(4, 4);
      m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1;
      return m;
    case GateKind::SWAP:
      m = MatC::Zero(4, 4);
      m(0, 0) = m(1, 2) = m(2, 1) = m(3, 3) = 1;
      return m;
    case GateKind::CPhase: m = MatC::Identity(4, 4); m(3, 3) = std::exp(I1 * angle); return m;
    case GateKind::PauliRot: {
      MatC p = MatC::Ones(1, 1);
      for (char ch : g.pauli) p = kron(p, pauli2(ch));
      return c * MatC::Identity(p.rows(), p.cols()) - I1 * s * p;
    }
  }
  return m;
}

void apply_gate(Statevector& psi, std::size_t n, const CircuitGate& g, double angle) {
  const std::size_t dim = std::size_t(1) << n;
  if (g.kind == GateKind::PauliRot) {
    const auto pm = masks_of(full_string(g, n));
    const double c = std::cos(angle / 2), s = std::sin(angle / 2);
    const cplx base = ipow(pm.ny);
    Statevector out(psi.size());
    for (std::size_t i = 0; i < dim; ++i) {
      const cplx ph = (std::popcount(i & pm.yz) & 1) ? -base : base;
      out[i ^ pm.x] = c * psi[i ^ pm.x] - I1 * s * ph * psi[i];
    }
    psi = std::move(out);
    return;
  }
  const MatC u = gate_matrix(g, angle);
  if (g.qubits.size() == 1) {
    const std::size_t b = std::size_t(1) << g.qubits[0];
    for (std::size_t i = 0; i < dim; ++i) {
      if (i & b) continue;
      const cplx a0 = psi[i], a1 = psi[i | b];
      psi[i] = u(0, 0) * a0 + u(0, 1) * a1;
      psi[i | b] = u(1, 0) * a0 + u(1, 1) * a1;
    }
    return;
  }
  const std::size_t b0 = std::size_t(1) << g.qubits[0], b1 = std::size_t(1) << g.qubits[1];
  for (std::size_t i = 0; i < dim; ++i) {
    if (i & (b0 | b1)) continue;
    const std::size_t idx[4] = {i, i | b1, i | b0, i | b0 | b1};
    cplx a[4];
    for (int k = 0; k < 4; ++k) a[k] = psi[idx[k]];
    for (int r = 0; r < 4; ++r) {
      cplx v = 0;
      for (int k = 0; k < 4; ++k) v += u(r, k) * a[k];
      psi[idx[r]] = v;
    }
  }
}

Statevector zero_state(std::size_t n) {
  Statevector s = Statevector::Zero(std::size_t(1) << n);
  s[0] = 1.0;
  return s;
}

Statevector simulate(const QuantumCircuit& c, const std::vector<double>& theta, const Statevector* initial) {
  c.validate();
  if (theta.size() != c.n_params)
    throw Error(ErrorCode::DimMismatch, "circuit has " + std::to_string(c.n_params) + " parameters, got " +
                                            std::to_string(theta.size()));
  Statevector psi = initial ? *initial : zero_state(c.n_qubits);
  check_state(psi, c.n_qubits);
  for (const auto& g : c.gates) apply_gate(psi, c.n_qubits, g, g.angle(theta));
  return psi;
}

MatC circuit_unitary(const QuantumCircuit& c, const std::vector<double>& theta) {
  if (c.n_qubits > 10) throw Error(ErrorCode::TooLarge, "dense unitary limited to 10 qubits");
  const std::size_t dim = std::size_t(1) << c.n_qubits;
  MatC u(dim, dim);
  for (std::size_t k = 0; k < dim; ++k) {
    Statevector e = Statevector::Zero(dim);
    e[k] = 1.0;
    u.col(k) = simulate(c, theta, &e);
  }
  return u;
}

std::vector<IdentityCheck> decomposition_identities() {
  std::vector<IdentityCheck> out;
  auto err = [](const MatC& a, const MatC& b) { return (a - b).cwiseAbs().maxCoeff(); };

  QuantumCircuit swap3;
  swap3.n_qubits = 2;
  swap3.add_fixed(GateKind::CX, {0, 1});
  swap3.add_fixed(GateKind::CX, {1, 0});
  swap3.add_fixed(GateKind::CX, {0, 1});
  QuantumCircuit swap1;
  swap1.n_qubits = 2;
  swap1.add_fixed(GateKind::SWAP, {0, 1});
  out.push_back({"SWAP = CX(0,1) CX(1,0) CX(0,1)", err(circuit_unitary(swap3, {}), circuit_unitary(swap1, {}))});

  auto one = [](GateKind k) {
    CircuitGate g;
    g.kind = k;
    g.qubits = {0};
    return g;
  };
  const CircuitGate rz = one(GateKind::RZ), ry = one(GateKind::RY), z = one(GateKind::Z), y = one(GateKind::Y);
  const MatC SX = gate_matrix(one(GateKind::SX), 0), SXd = gate_matrix(one(GateKind::SXdg), 0);
  out.push_back({"SQRT_X_DG = SQRT_X^dagger", err(SXd, SX.adjoint())});
  out.push_back({"SQRT_X^2 = X", err(SX * SX, pauli2('X'))});
  double worst = 0;
  for (double th : {M_PI / 2, 0.3, -1.7, M_PI})
    worst = std::max(worst, err(SX.adjoint() * gate_matrix(rz, th) * SX, gate_matrix(ry, th)));
  out.push_back({"RY(t) = SQRT_X^dagger RZ(t) SQRT_X", worst});
  out.push_back({"Y = SQRT_X^dagger Z SQRT_X", err(SX.adjoint() * gate_matrix(z, 0) * SX, gate_matrix(y, 0))});
  return out;
}

void PauliSum::add(double coef, const std::string& ops) {
  if (ops.size() != n_qubits) throw Error(ErrorCode::DimMismatch, "Pauli string length differs from qubit count");
  masks_of(ops);
  terms.push_back({coef, ops});
}

void PauliSum::validate() const {
  for (const auto& t : terms) {
    if (t.ops.size() != n_qubits) throw Error(ErrorCode::DimMismatch, "Pauli string length differs from qubit count");
    masks_of(t.ops);
  }
}

Statevector apply_pauli(const Statevector& psi, const std::string& ops) {
  check_state(psi, ops.size());
  const auto pm = masks_of(ops);
  const cplx base = ipow(pm.ny);
  Statevector out(psi.size());
  for (std::size_t i = 0; i < std::size_t(psi.size()); ++i) {
    const cplx ph = (std::popcount(i & pm.yz) & 1) ? -base : base;
    out[i ^ pm.x] = ph * psi[i];
  }
  return out;
}

Statevector apply_pauli_sum(const Statevector& psi, const PauliSum& h) {
  check_state(psi, h.n_qubits);
  Statevector out = Statevector::Zero(psi.size());
  for (const auto& t : h.terms) {
    const auto pm = masks_of(t.ops);
    const cplx base = t.coef * ipow(pm.ny);
    for (std::size_t i = 0; i < std::size_t(psi.size()); ++i) {
      const cplx ph = (std::popcount(i & pm.yz) & 1) ? -base : base;
      out[i ^ pm.x] += ph * psi[i];
    }
  }
  return out;
}

double pauli_expectation(const Statevector& psi, const PauliSum& h) {
  check_state(psi, h.n_qubits);
  return std::real(psi.dot(apply_pauli_sum(psi, h)));
}

MatC pauli_sum_matrix(const PauliSum& h) {
  if (h.n_qubits > 12) throw Error(ErrorCode::TooLarge, "dense Pauli matrix limited to 12 qubits");
  const std::size_t dim = std::size_t(1) << h.n_qubits;
  MatC m(dim, dim);
  for (std::size_t k = 0; k < dim; ++k) {
    Statevector e = Statevector::Zero(dim);
    e[k] = 1.0;
    m.col(k) = apply_pauli_sum(e, h);
  }
  return m;
}

PauliSum tlfi_hamiltonian(std::size_t n, double J, double gx, double gz) {
  PauliSum h;
  h.n_qubits = n;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::string s(n, 'I');
    s[i] = s[i + 1] = 'Z';
    h.add(J, s);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::string s(n, 'I');
    s[i] = 'X';
    h.add(-gx, s);
    s[i] = 'Z';
    h.add(-gz, s);
  }
  return h;
}

PauliSum trash_cost_hamiltonian(std::size_t n, const std::vector<std::size_t>& trash) {
  PauliSum h;
  h.n_qubits = n;
  h.add(0.5 * double(trash.size()), std::string(n, 'I'));
  for (auto q : trash) {
    if (q >= n) throw Error(ErrorCode::BadTrashCount, "trash qubit outside the register");
    std::string s(n, 'I');
    s[q] = 'Z';
    h.add(-0.5, s);
  }
  return h;
}

ExactGround exact_ground(const PauliSum& h, std::uint64_t seed) {
  h.validate();
  ExactGround g;
  if (h.n_qubits <= 8) {
    Eigen::SelfAdjointEigenSolver<MatC> es(pauli_sum_matrix(h));
    g.energy = es.eigenvalues()[0];
    g.state = es.eigenvectors().col(0);
    return g;
  }
  Rng rng(seed);
  Statevector v0(std::size_t(1) << h.n_qubits);
  for (Eigen::Index i = 0; i < v0.size(); ++i) v0[i] = cplx(rng.normal(), rng.normal());
  LanczosOptions o;
  o.max_iter = 4000;
  o.tol = 1e-12;
  o.seed = seed;
  const auto r = lanczos_ground([&](const VecC& x) { return apply_pauli_sum(x, h); }, v0, o);
  g.energy = r.value;
  g.state = r.vector;
  return g;
}

double circuit_energy(const QuantumCircuit& c, const std::vector<double>& theta, const PauliSum& h,
                      const Statevector* initial) {
  if (h.n_qubits != c.n_qubits) throw Error(ErrorCode::DimMismatch, "observable and circuit sizes differ");
  return pauli_expectation(simulate(c, theta, initial), h);
}

namespace {

// Energy with one gate's angle moved by `shift`.
double shifted_energy(const QuantumCircuit& c, const std::vector<double>& theta, const PauliSum& h,
                      const Statevector* initial, std::size_t gate, double shift) {
  QuantumCircuit s = c;
  s.gates[gate].offset += shift;
  return circuit_energy(s, theta, h, initial);
}

}  // namespace

std::vector<double> parameter_shift_gradient(const QuantumCircuit& c, const std::vector<double>& theta,
                                             const PauliSum& h, const Statevector* initial) {
  c.validate();
  for (const auto& g : c.gates)
    if (g.param >= 0 && !is_pauli_rotation(g.kind))
      throw Error(ErrorCode::UnsupportedGate,
                  std::string("parameter shift needs Pauli rotations, found parameterized ") + gate_name(g.kind));
  std::vector<double> grad(c.n_params, 0.0);
  for (std::size_t k = 0; k < c.gates.size(); ++k) {
    const auto& g = c.gates[k];
    if (g.param < 0) continue;
    const double ep = shifted_energy(c, theta, h, initial, k, M_PI / 2);
    const double em = shifted_energy(c, theta, h, initial, k, -M_PI / 2);
    grad[std::size_t(g.param)] += g.coef * 0.5 * (ep - em);
  }
  return grad;
}

std::vector<double> finite_difference_gradient(const QuantumCircuit& c, const std::vector<double>& theta,
                                               const PauliSum& h, double step, const Statevector* initial) {
  std::vector<double> grad(c.n_params);
  for (std::size_t p = 0; p < c.n_params; ++p) {
    auto tp = theta, tm = theta;
    tp[p] += step;
    tm[p] -= step;
    grad[p] = (circuit_energy(c, tp, h, initial) - circuit_energy(c, tm, h, initial)) / (2 * step);
  }
  return grad;
}

SpsaResult spsa_optimize(const Objective& f, std::vector<double> theta, const SpsaConfig& cfg) {
  Rng rng(cfg.seed);
  SpsaResult r;
  const std::size_t n = theta.size();
  std::vector<double> delta(n), tp(n), tm(n);
  for (int k = 0; k < cfg.iterations; ++k) {
    const double ak = cfg.a / std::pow(k + 1 + cfg.A, cfg.alpha);
    const double ck = cfg.c / std::pow(k + 1, cfg.gamma);
    for (std::size_t i = 0; i < n; ++i) {
      delta[i] = rng.rademacher();
      tp[i] = theta[i] + ck * delta[i];
      tm[i] = theta[i] - ck * delta[i];
    }
    const double yp = f(tp), ym = f(tm);
    for (std::size_t i = 0; i < n; ++i) theta[i] -= ak * (yp - ym) / (2 * ck * delta[i]);
    r.trace.push_back(0.5 * (yp + ym));
  }
  r.theta = std::move(theta);
  return r;
}

AnsatzKind ansatz_from_string(const std::string& s) {
  if (s == "vqe_hardware_efficient") return AnsatzKind::VqeHardwareEfficient;
  if (s == "vqad_syndrome") return AnsatzKind::VqadSyndrome;
  if (s == "qaoa") return AnsatzKind::Qaoa;
  throw Error(ErrorCode::ConfigError, "unknown ansatz '" + s + "' (valid: vqe_hardware_efficient, vqad_syndrome, qaoa)");
}

const char* ansatz_name(AnsatzKind k) {
  switch (k) {
    case AnsatzKind::VqeHardwareEfficient: return "vqe_hardware_efficient";
    case AnsatzKind::VqadSyndrome: return "vqad_syndrome";
    case AnsatzKind::Qaoa: return "qaoa";
  }
  return "?";
}

Entangler entangler_from_string(const std::string& s) {
  if (s == "circular") return Entangler::Circular;
  if (s == "linear") return Entangler::Linear;
  if (s == "ladder") return Entangler::Ladder;
  throw Error(ErrorCode::ConfigError, "unknown entangler '" + s + "' (valid: circular, linear, ladder)");
}

const char* entangler_name(Entangler e) {
  switch (e) {
    case Entangler::Circular: return "circular";
    case Entangler::Linear: return "linear";
    case Entangler::Ladder: return "ladder";
  }
  return "?";
}

std::size_t default_trash_count(std::size_t n) { return n < 2 ? 0 : std::size_t(std::bit_width(n) - 1); }

std::vector<std::size_t> middle_trash(std::size_t n, std::size_t n_t) {
  if (n_t < 1 || n_t >= n) throw Error(ErrorCode::BadTrashCount, "need 1 <= n_t < n");
  std::vector<std::size_t> t;
  const std::size_t start = (n - n_t) / 2;
  for (std::size_t k = 0; k < n_t; ++k) t.push_back(start + k);
  return t;
}

std::vector<std::size_t> resolve_trash(std::size_t n, const AnsatzParams& p) {
  if (!p.trash.empty()) {
    if (p.trash.size() >= n) throw Error(ErrorCode::BadTrashCount, "need fewer trash qubits than qubits");
    for (auto q : p.trash)
      if (q >= n) throw Error(ErrorCode::BadTrashCount, "trash qubit outside the register");
    auto t = p.trash;
    std::sort(t.begin(), t.end());
    if (std::adjacent_find(t.begin(), t.end()) != t.end()) throw Error(ErrorCode::BadTrashCount, "duplicate trash qubit");
    return t;
  }
  if (p.n_trash < 0) throw Error(ErrorCode::BadTrashCount, "negative trash count");
  return middle_trash(n, p.n_trash == 0 ? default_trash_count(n) : std::size_t(p.n_trash));
}

QuantumCircuit build_ansatz(AnsatzKind kind, std::size_t n, const AnsatzParams& p) {
  if (n < 2) throw Error(ErrorCode::DimMismatch, "ansatz needs at least 2 qubits");
  QuantumCircuit c;
  c.n_qubits = n;
  switch (kind) {
    case AnsatzKind::VqeHardwareEfficient: {
      if (p.layers < 1) throw Error(ErrorCode::ConfigError, "layers must be >= 1");
      for (int l = 0; l < p.layers; ++l) {
        for (std::size_t q = 0; q < n; ++q) c.add_param_gate(GateKind::RY, {q});
        for (std::size_t q = 0; q + 1 < n; ++q) {
          c.add_fixed(GateKind::CZ, {q, q + 1});
          if (p.entangler == Entangler::Ladder) {
            c.add_param_gate(GateKind::RY, {q});
            c.add_param_gate(GateKind::RY, {q + 1});
          }
        }
        if (p.entangler == Entangler::Circular && n > 2) c.add_fixed(GateKind::CZ, {n - 1, 0});
      }
      for (std::size_t q = 0; q < n; ++q) c.add_param_gate(GateKind::RY, {q});
      break;
    }
    case AnsatzKind::VqadSyndrome: {
      const auto trash = resolve_trash(n, p);
      const std::size_t nt = trash.size();
      std::vector<std::size_t> keep;
      for (std::size_t q = 0; q < n; ++q)
        if (!std::binary_search(trash.begin(), trash.end(), q)) keep.push_back(q);
      // round robin: in layer l the k-th kept qubit meets trash[(k + l) % n_t]
      for (std::size_t l = 0; l < nt; ++l) {
        for (std::size_t q = 0; q < n; ++q) c.add_param_gate(GateKind::RY, {q});
        for (std::size_t k = 0; k < keep.size(); ++k) c.add_fixed(GateKind::CZ, {keep[k], trash[(k + l) % nt]});
      }
      for (auto q : trash) c.add_param_gate(GateKind::RY, {q});
      break;
    }
    case AnsatzKind::Qaoa: {
      if (p.qaoa_p < 1) throw Error(ErrorCode::ConfigError, "qaoa_p must be >= 1");
      PauliSum hp = p.problem;
      if (hp.terms.empty()) {
        hp.n_qubits = n;
        for (std::size_t q = 0; q + 1 < n; ++q) {
          std::string s(n, 'I');
          s[q] = s[q + 1] = 'Z';
          hp.add(1.0, s);
        }
      }
      if (hp.n_qubits != n) throw Error(ErrorCode::DimMismatch, "QAOA problem size differs from n");
      for (const auto& t : hp.terms)
        for (char ch : t.ops)
          if (ch == 'X' || ch == 'Y') throw Error(ErrorCode::UnsupportedGate, "QAOA problem must be diagonal");
      if (p.qaoa_prepare_plus)
        for (std::size_t q = 0; q < n; ++q) c.add_fixed(GateKind::H, {q});
      for (int layer = 0; layer < p.qaoa_p; ++layer) {
        const int tp = int(c.n_params++), tx = int(c.n_params++);
        for (const auto& t : hp.terms) {
          CircuitGate g;
          g.kind = GateKind::PauliRot;
          for (std::size_t q = 0; q < n; ++q)
            if (t.ops[q] != 'I') {
              g.qubits.push_back(q);
              g.pauli.push_back(t.ops[q]);
            }
          if (g.qubits.empty()) continue;  // identity: global phase
          g.param = tp;
          g.coef = 2.0 * t.coef;  // exp(-i t c P) = PauliRot(2 c t)
          c.gates.push_back(std::move(g));
        }
        for (std::size_t q = 0; q < n; ++q) {
          CircuitGate g;
          g.kind = GateKind::RX;
          g.qubits = {q};
          g.param = tx;
          g.coef = 2.0;
          c.gates.push_back(std::move(g));
        }
      }
      break;
    }
  }
  c.validate();
  return c;
}

namespace {

struct AdamMoments {
  std::vector<double> m, v;
  int t = 0;
  void step(std::vector<double>& x, const std::vector<double>& g, double lr) {
    if (m.empty()) m.assign(x.size(), 0.0), v.assign(x.size(), 0.0);
    ++t;
    const double b1 = 0.9, b2 = 0.999;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
      x[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
};

double norm_inf(const std::vector<double>& g) {
  double m = 0;
  for (double x : g) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

BfgsResult bfgs_minimize(const Objective& f, const GradientFn& grad, std::vector<double> x, int max_iterations,
                         double grad_tol, double value_floor) {
  const std::size_t n = x.size();
  Eigen::VectorXd xv = Eigen::Map<Eigen::VectorXd>(x.data(), Eigen::Index(n));
  auto gv = [&](const Eigen::VectorXd& v) {
    const auto g = grad(std::vector<double>(v.data(), v.data() + v.size()));
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.data(), Eigen::Index(g.size())));
  };
  auto fv = [&](const Eigen::VectorXd& v) { return f(std::vector<double>(v.data(), v.data() + v.size())); };
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(Eigen::Index(n), Eigen::Index(n));
  double fx = fv(xv);
  Eigen::VectorXd g = gv(xv);
  BfgsResult r;
  int it = 0;
  for (; it < max_iterations; ++it) {
    r.history.push_back(fx);
    if (g.lpNorm<Eigen::Infinity>() < grad_tol || fx <= value_floor) break;
    Eigen::VectorXd p = -hinv * g;
    if (p.dot(g) >= 0) {
      hinv.setIdentity();
      p = -g;
    }
    double step = 1.0, fn = 0.0;
    Eigen::VectorXd xn;
    for (int k = 0; k < 40; ++k) {
      xn = xv + step * p;
      fn = fv(xn);
      if (fn <= fx + 1e-4 * step * p.dot(g)) break;
      step *= 0.5;
    }
    if (!(fn < fx)) {
      if (hinv.isIdentity()) break;  // no descent even along -g
      hinv.setIdentity();
      continue;
    }
    const Eigen::VectorXd gn = gv(xn);
    const Eigen::VectorXd s = xn - xv, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(Eigen::Index(n), Eigen::Index(n));
      hinv = (I - rho * s * y.transpose()) * hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    xv = xn;
    fx = fn;
    g = gn;
  }
  r.iterations = it;
  r.x.assign(xv.data(), xv.data() + xv.size());
  r.value = fx;
  return r;
}

VqeOptimizer vqe_optimizer_from_string(const std::string& s) {
  if (s == "parameter_shift_gd") return VqeOptimizer::ParameterShiftGd;
  if (s == "parameter_shift_bfgs") return VqeOptimizer::ParameterShiftBfgs;
  if (s == "spsa") return VqeOptimizer::Spsa;
  throw Error(ErrorCode::ConfigError, "unknown optimizer '" + s + "' (valid: parameter_shift_gd, parameter_shift_bfgs, spsa)");
}

const char* vqe_optimizer_name(VqeOptimizer o) {
  switch (o) {
    case VqeOptimizer::ParameterShiftGd: return "parameter_shift_gd";
    case VqeOptimizer::ParameterShiftBfgs: return "parameter_shift_bfgs";
    case VqeOptimizer::Spsa: return "spsa";
  }
  return "?";
}

VqeResult vqe_run(const PauliSum& h, const QuantumCircuit& ansatz, const VqeConfig& cfg) {
  h.validate();
  if (h.n_qubits != ansatz.n_qubits) throw Error(ErrorCode::DimMismatch, "Hamiltonian and ansatz sizes differ");
  const bool warm = cfg.warm_start.size() == ansatz.n_params;
  const int starts = warm ? 1 : std::max(1, cfg.restarts);
  VqeResult best;
  for (int s = 0; s < starts; ++s) {
    std::vector<double> theta(ansatz.n_params);
    if (warm) {
      theta = cfg.warm_start;
    } else {
      Rng rng(derive_seed(cfg.seed, 0x1417, std::uint64_t(s)));
      for (auto& t : theta) t = cfg.init_scale * rng.normal();
    }
    VqeResult r;
    switch (cfg.optimizer) {
      case VqeOptimizer::Spsa: {
        SpsaConfig sc = cfg.spsa;
        sc.seed = derive_seed(cfg.seed, 0x5b5a, std::uint64_t(s));
        auto out = spsa_optimize([&](const std::vector<double>& t) { return circuit_energy(ansatz, t, h); }, theta, sc);
        theta = out.theta;
        r.history = out.trace;
        r.iterations = sc.iterations;
        break;
      }
      case VqeOptimizer::ParameterShiftBfgs: {
        auto out = bfgs_minimize([&](const std::vector<double>& t) { return circuit_energy(ansatz, t, h); },
                                 [&](const std::vector<double>& t) { return parameter_shift_gradient(ansatz, t, h); },
                                 theta, cfg.max_iterations, cfg.grad_tol);
        theta = out.x;
        r.history = out.history;
        r.iterations = out.iterations;
        break;
      }
      case VqeOptimizer::ParameterShiftGd: {
        AdamMoments adam;
        int it = 0;
        for (; it < cfg.max_iterations; ++it) {
          const auto g = parameter_shift_gradient(ansatz, theta, h);
          r.history.push_back(circuit_energy(ansatz, theta, h));
          if (norm_inf(g) < cfg.grad_tol) break;
          adam.step(theta, g, cfg.learning_rate);
        }
        r.iterations = it;
        break;
      }
    }
    r.theta = theta;
    r.state = simulate(ansatz, theta);
    r.energy = pauli_expectation(r.state, h);
    if (s == 0 || r.energy < best.energy) {
      const int total = best.iterations + r.iterations;
      best = std::move(r);
      best.iterations = total;
    } else {
      best.iterations += r.iterations;
    }
  }
  return best;
}

double hamming_cost(const Statevector& psi, const std::vector<std::size_t>& trash, std::size_t shots,
                    std::uint64_t seed) {
  const std::size_t dim = std::size_t(psi.size());
  std::uint64_t mask = 0;
  for (auto q : trash) {
    if ((std::size_t(1) << q) >= dim) throw Error(ErrorCode::BadTrashCount, "trash qubit outside the register");
    mask |= 1ULL << q;
  }
  if (shots == 0) {
    double c = 0;
    for (std::size_t i = 0; i < dim; ++i) c += std::norm(psi[i]) * std::popcount(i & mask);
    return c;
  }
  std::vector<double> cdf(dim);
  double acc = 0;
  for (std::size_t i = 0; i < dim; ++i) cdf[i] = (acc += std::norm(psi[i]));
  Rng rng(seed);
  double total = 0;
  for (std::size_t s = 0; s < shots; ++s) {
    const double u = rng.uniform() * acc;
    const std::size_t i = std::min<std::size_t>(dim - 1, std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    total += std::popcount(i & mask);
  }
  return total / double(shots);
}

double hamming_cost(const QuantumCircuit& c, const std::vector<double>& theta, const Statevector& input,
                    const std::vector<std::size_t>& trash, std::size_t shots, std::uint64_t seed) {
  if (trash.empty() || trash.size() >= c.n_qubits) throw Error(ErrorCode::BadTrashCount, "need 1 <= n_t < n");
  return hamming_cost(simulate(c, theta, &input), trash, shots, seed);
}

void NoiseModel::validate() const {
  if (!(p1 >= 0 && p1 <= 1 && p2 >= 0 && p2 <= 1)) throw Error(ErrorCode::ConfigError, "noise probabilities must lie in [0, 1]");
  if (trajectories < 1) throw Error(ErrorCode::ConfigError, "need at least one trajectory");
}

NoisyEstimate noisy_expectation(const QuantumCircuit& c, const std::vector<double>& theta, const PauliSum& obs,
                                const NoiseModel& noise, const Statevector* initial) {
  noise.validate();
  c.validate();
  if (theta.size() != c.n_params) throw Error(ErrorCode::DimMismatch, "parameter count mismatch");
  const Statevector start = initial ? *initial : zero_state(c.n_qubits);
  check_state(start, c.n_qubits);
  std::vector<double> vals;
  const char paulis[4] = {'I', 'X', 'Y', 'Z'};
  for (int t = 0; t < noise.trajectories; ++t) {
    Rng rng(derive_seed(noise.seed, 0x7a1, std::uint64_t(t)));
    Statevector psi = start;
    for (const auto& g : c.gates) {
      apply_gate(psi, c.n_qubits, g, g.angle(theta));
      const std::size_t k = g.qubits.size();
      const double p = k == 1 ? noise.p1 : noise.p2;
      if (p <= 0 || rng.uniform() >= p) continue;
      // uniformly random non-identity Pauli on the touched qubits
      const std::uint64_t pick = 1 + rng.below((std::uint64_t(1) << (2 * k)) - 1);
      std::string s(c.n_qubits, 'I');
      for (std::size_t j = 0; j < k; ++j) s[g.qubits[j]] = paulis[(pick >> (2 * j)) & 3];
      psi = apply_pauli(psi, s);
    }
    vals.push_back(pauli_expectation(psi, obs));
    if (noise.p1 == 0 && noise.p2 == 0) break;  // every trajectory is the same
  }
  NoisyEstimate e;
  double s = 0, s2 = 0;
  for (double v : vals) s += v;
  e.mean = s / double(vals.size());
  for (double v : vals) s2 += (v - e.mean) * (v - e.mean);
  e.stderr_ = vals.size() > 1 ? std::sqrt(s2 / double(vals.size() - 1) / double(vals.size())) : 0.0;
  return e;
}

VqadResult vqad_train(const QuantumCircuit& syndrome, const std::vector<std::size_t>& trash, const Statevector& input,
                      const VqadConfig& cfg) {
  if (trash.empty() || trash.size() >= syndrome.n_qubits) throw Error(ErrorCode::BadTrashCount, "need 1 <= n_t < n");
  check_state(input, syndrome.n_qubits);
  const PauliSum cost = trash_cost_hamiltonian(syndrome.n_qubits, trash);
  std::vector<double> theta = cfg.init.size() == syndrome.n_params ? cfg.init : std::vector<double>(syndrome.n_params, 0.0);
  VqadResult r;
  if (cfg.noisy) {
    NoiseModel nm = cfg.noise;
    int calls = 0;
    auto f = [&](const std::vector<double>& t) {
      nm.seed = derive_seed(cfg.noise.seed, 0x5e7, std::uint64_t(calls++));
      return noisy_expectation(syndrome, t, cost, nm, &input).mean;
    };
    auto out = spsa_optimize(f, theta, cfg.spsa);
    theta = out.theta;
    r.history = out.trace;
    r.iterations = cfg.spsa.iterations;
  } else if (cfg.bfgs) {
    auto out = bfgs_minimize([&](const std::vector<double>& t) { return circuit_energy(syndrome, t, cost, &input); },
                             [&](const std::vector<double>& t) {
                               return parameter_shift_gradient(syndrome, t, cost, &input);
                             },
                             theta, cfg.max_iterations, 1e-10, cfg.cost_tol);
    theta = out.x;
    r.history = out.history;
    r.iterations = out.iterations;
  } else {
    AdamMoments adam;
    int it = 0;
    for (; it < cfg.max_iterations; ++it) {
      const double c = circuit_energy(syndrome, theta, cost, &input);
      r.history.push_back(c);
      if (c < cfg.cost_tol) break;
      adam.step(theta, parameter_shift_gradient(syndrome, theta, cost, &input), cfg.learning_rate);
    }
    r.iterations = it;
  }
  r.theta = theta;
  r.final_cost = hamming_cost(syndrome, theta, input, trash);
  if (cfg.noisy) r.final_noisy_cost = noisy_expectation(syndrome, theta, cost, cfg.noise, &input).mean;
  else r.final_noisy_cost = r.final_cost;
  return r;
}

std::vector<double> vqad_score_line(const QuantumCircuit& syndrome, const std::vector<double>& theta,
                                    const std::vector<std::size_t>& trash, const std::vector<Statevector>& states) {
  std::vector<double> out;
  for (const auto& s : states) out.push_back(hamming_cost(syndrome, theta, s, trash));
  return out;
}

std::vector<NoisyEstimate> vqad_score_line_noisy(const QuantumCircuit& syndrome, const std::vector<double>& theta,
                                                 const std::vector<std::size_t>& trash,
                                                 const std::vector<Statevector>& states, const NoiseModel& noise) {
  const PauliSum cost = trash_cost_hamiltonian(syndrome.n_qubits, trash);
  std::vector<NoisyEstimate> out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    NoiseModel nm = noise;
    nm.seed = derive_seed(noise.seed, 0x9a7, i);
    out.push_back(noisy_expectation(syndrome, theta, cost, nm, &states[i]));
  }
  return out;
}

AdaptChoice adapt_grow(const std::vector<PoolOperator>& pool, const Statevector& psi, const PauliSum& h,
                       double threshold) {
  if (pool.empty()) throw Error(ErrorCode::EmptyPool, "operator pool is empty");
  const Statevector hpsi = apply_pauli_sum(psi, h);
  AdaptChoice ch;
  double best = -1;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    if (pool[k].pauli.size() != h.n_qubits) throw Error(ErrorCode::DimMismatch, "pool operator length differs from n");
    const Statevector gpsi = pool[k].coef * apply_pauli(psi, pool[k].pauli);
    // i<[G,H]> = -2 Im <G psi | H psi>
    const double d = -2.0 * std::imag(gpsi.dot(hpsi));
    ch.derivatives.push_back(d);
    if (std::abs(d) > best) {
      best = std::abs(d);
      ch.index = k;
      ch.derivative = d;
    }
  }
  ch.stop = best < threshold;
  return ch;
}

AdaptResult adapt_vqe(const std::vector<PoolOperator>& pool, const PauliSum& h, const Statevector& initial,
                      std::size_t max_ops, double threshold, const VqeConfig& cfg) {
  AdaptResult r;
  r.circuit.n_qubits = h.n_qubits;
  std::vector<double> theta;
  for (std::size_t step = 0; step < max_ops; ++step) {
    const Statevector psi = simulate(r.circuit, theta, &initial);
    const auto ch = adapt_grow(pool, psi, h, threshold);
    if (ch.stop) break;
    const auto& op = pool[ch.index];
    CircuitGate g;
    g.kind = GateKind::PauliRot;
    for (std::size_t q = 0; q < op.pauli.size(); ++q)
      if (op.pauli[q] != 'I') {
        g.qubits.push_back(q);
        g.pauli.push_back(op.pauli[q]);
      }
    g.param = int(r.circuit.n_params++);
    g.coef = 2.0 * op.coef;  // exp(-i θ c P) = PauliRot(2cθ)
    r.circuit.gates.push_back(g);
    theta.push_back(0.0);
    r.chosen.push_back(op.label);
    AdamMoments adam;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      const auto grad = parameter_shift_gradient(r.circuit, theta, h, &initial);
      if (norm_inf(grad) < cfg.grad_tol) break;
      adam.step(theta, grad, cfg.learning_rate);
    }
  }
  r.theta = theta;
  r.energy = circuit_energy(r.circuit, theta, h, &initial);
  return r;
}

std::string circuit_to_json(const QuantumCircuit& c, const std::vector<double>& theta) {
  nlohmann::json j;
  j["n_qubits"] = c.n_qubits;
  j["n_params"] = c.n_params;
  j["gates"] = nlohmann::json::array();
  for (const auto& g : c.gates) {
    nlohmann::json e;
    e["kind"] = gate_name(g.kind);
    e["qubits"] = g.qubits;
    if (g.param >= 0) {
      e["param"] = g.param;
      e["coef"] = g.coef;
    }
    if (g.offset != 0.0) e["angle"] = g.offset;
    if (!g.pauli.empty()) e["pauli"] = g.pauli;
    j["gates"].push_back(e);
  }
  if (!theta.empty()) j["theta"] = theta;
  return j.dump(2);
}

QuantumCircuit circuit_from_json(const std::string& text, std::vector<double>* theta) {
  QuantumCircuit c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.n_qubits = j.at("n_qubits").get<std::size_t>();
    c.n_params = j.at("n_params").get<std::size_t>();
    for (const auto& e : j.at("gates")) {
      CircuitGate g;
      g.kind = gate_from_string(e.at("kind").get<std::string>());
      g.qubits = e.at("qubits").get<std::vector<std::size_t>>();
      g.param = e.value("param", -1);
      g.coef = e.value("coef", 1.0);
      g.offset = e.value("angle", 0.0);
      g.pauli = e.value("pauli", std::string());
      c.gates.push_back(std::move(g));
    }
    if (theta) *theta = j.value("theta", std::vector<double>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("circuit JSON: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace qphase
