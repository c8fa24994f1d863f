#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qphase/tensor.hpp"

namespace qphase {

// Little-endian: qubit q is bit q of the amplitude index.
using Statevector = VecC;

enum class GateKind { RX, RY, RZ, X, Y, Z, H, SX, SXdg, CZ, CX, SWAP, PauliRot, CPhase };
GateKind gate_from_string(const std::string& s);
const char* gate_name(GateKind k);
bool is_parameterizable(GateKind k);
bool is_pauli_rotation(GateKind k);

// angle = coef * theta[param] + offset when param >= 0, else offset.
// PauliRot: exp(-i angle/2 P) with P = pauli[k] acting on qubits[k].
// CPhase: diag(1, 1, 1, e^{i angle}).
struct CircuitGate {
  GateKind kind = GateKind::RY;
  std::vector<std::size_t> qubits;
  int param = -1;
  double coef = 1.0;
  double offset = 0.0;
  std::string pauli;
  double angle(const std::vector<double>& theta) const;
};

struct QuantumCircuit {
  std::size_t n_qubits = 0;
  std::size_t n_params = 0;
  std::vector<CircuitGate> gates;

  // Returns the new parameter index.
  int add_param_gate(GateKind k, std::vector<std::size_t> qubits, std::string pauli = "");
  void add_fixed(GateKind k, std::vector<std::size_t> qubits, double angle = 0.0, std::string pauli = "");
  void validate() const;
};

// Dense local matrix; for multi-qubit gates the first listed qubit is the most significant bit.
MatC gate_matrix(const CircuitGate& g, double angle);
void apply_gate(Statevector& psi, std::size_t n, const CircuitGate& g, double angle);
Statevector zero_state(std::size_t n);
Statevector simulate(const QuantumCircuit& c, const std::vector<double>& theta, const Statevector* initial = nullptr);
// Column k = circuit applied to basis state k (n <= 10).
MatC circuit_unitary(const QuantumCircuit& c, const std::vector<double>& theta);

struct IdentityCheck {
  std::string name;
  double error = 0.0;  // max-abs entry difference (up to a fixed global phase where stated)
};
std::vector<IdentityCheck> decomposition_identities();

struct PauliTerm {
  double coef = 0.0;
  std::string ops;  // ops[q] in {I,X,Y,Z} for qubit q
};

struct PauliSum {
  std::size_t n_qubits = 0;
  std::vector<PauliTerm> terms;
  void add(double coef, const std::string& ops);
  void validate() const;
};

// P|psi> for a full-length Pauli string.
Statevector apply_pauli(const Statevector& psi, const std::string& ops);
Statevector apply_pauli_sum(const Statevector& psi, const PauliSum& h);
double pauli_expectation(const Statevector& psi, const PauliSum& h);
MatC pauli_sum_matrix(const PauliSum& h);  // n <= 12

// H = J Σ Z_i Z_{i+1} - g_x Σ X_i - g_z Σ Z_i (open chain)
PauliSum tlfi_hamiltonian(std::size_t n, double J, double gx, double gz);
// ½ Σ_{j in trash} (1 - Z_j)
PauliSum trash_cost_hamiltonian(std::size_t n, const std::vector<std::size_t>& trash);

struct ExactGround {
  double energy = 0.0;
  Statevector state;
};
// Matrix-free Lanczos for the lowest state.
ExactGround exact_ground(const PauliSum& h, std::uint64_t seed = 7);

double circuit_energy(const QuantumCircuit& c, const std::vector<double>& theta, const PauliSum& h,
                      const Statevector* initial = nullptr);
// Sums coef * ½[E(+π/2) - E(-π/2)] over the gates that use each parameter.
std::vector<double> parameter_shift_gradient(const QuantumCircuit& c, const std::vector<double>& theta,
                                             const PauliSum& h, const Statevector* initial = nullptr);
std::vector<double> finite_difference_gradient(const QuantumCircuit& c, const std::vector<double>& theta,
                                               const PauliSum& h, double step = 1e-6,
                                               const Statevector* initial = nullptr);

struct SpsaConfig {
  double a = 0.2;
  double c = 0.1;
  double A = 10.0;
  double alpha = 0.602;
  double gamma = 0.101;
  int iterations = 200;
  std::uint64_t seed = 1;
};
struct SpsaResult {
  std::vector<double> theta;
  std::vector<double> trace;  // mean of the two evaluations per iteration
};
using Objective = std::function<double(const std::vector<double>&)>;
SpsaResult spsa_optimize(const Objective& f, std::vector<double> theta0, const SpsaConfig& cfg);

enum class AnsatzKind { VqeHardwareEfficient, VqadSyndrome, Qaoa };
AnsatzKind ansatz_from_string(const std::string& s);
const char* ansatz_name(AnsatzKind k);

// circular: RY layer then CZ on (i,i+1) and (n-1,0); linear: no wrap-around CZ;
// ladder: CZ(i,i+1) followed by RY on both qubits, pair by pair.
enum class Entangler { Circular, Linear, Ladder };
Entangler entangler_from_string(const std::string& s);
const char* entangler_name(Entangler e);

struct AnsatzParams {
  int layers = 1;                   // hardware-efficient layers
  Entangler entangler = Entangler::Circular;
  int n_trash = 0;                  // 0: floor(log2 n)
  std::vector<std::size_t> trash;   // empty: middle indices
  int qaoa_p = 1;
  PauliSum problem;                 // QAOA cost; empty: Σ Z_i Z_{i+1}
  bool qaoa_prepare_plus = true;    // leading H layer
};

std::size_t default_trash_count(std::size_t n);
std::vector<std::size_t> middle_trash(std::size_t n, std::size_t n_t);
std::vector<std::size_t> resolve_trash(std::size_t n, const AnsatzParams& p);
QuantumCircuit build_ansatz(AnsatzKind kind, std::size_t n, const AnsatzParams& p = {});

// Quasi-Newton (BFGS, Armijo backtracking) on an exact gradient.
struct BfgsResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  std::vector<double> history;
};
using GradientFn = std::function<std::vector<double>(const std::vector<double>&)>;
BfgsResult bfgs_minimize(const Objective& f, const GradientFn& grad, std::vector<double> x0, int max_iterations,
                         double grad_tol, double value_floor = -1e300);

enum class VqeOptimizer { ParameterShiftGd, ParameterShiftBfgs, Spsa };
VqeOptimizer vqe_optimizer_from_string(const std::string& s);
const char* vqe_optimizer_name(VqeOptimizer o);
struct VqeConfig {
  VqeOptimizer optimizer = VqeOptimizer::ParameterShiftGd;
  int max_iterations = 2000;
  double learning_rate = 0.05;  // ADAM-scaled steps on the exact gradient
  double grad_tol = 1e-6;
  double init_scale = 0.1;
  int restarts = 1;  // independent random starts, best kept (ignored with a warm start)
  std::uint64_t seed = 1;
  SpsaConfig spsa;
  std::vector<double> warm_start;  // used instead of random init when sized correctly
};
struct VqeResult {
  double energy = 0.0;
  std::vector<double> theta;
  Statevector state;
  int iterations = 0;
  std::vector<double> history;
};
VqeResult vqe_run(const PauliSum& h, const QuantumCircuit& ansatz, const VqeConfig& cfg);

// Exact when shots == 0; otherwise the mean Hamming weight of sampled trash bits.
double hamming_cost(const Statevector& psi, const std::vector<std::size_t>& trash, std::size_t shots = 0,
                    std::uint64_t seed = 1);
double hamming_cost(const QuantumCircuit& c, const std::vector<double>& theta, const Statevector& input,
                    const std::vector<std::size_t>& trash, std::size_t shots = 0, std::uint64_t seed = 1);

struct NoiseModel {
  double p1 = 0.0;
  double p2 = 0.0;
  int trajectories = 200;
  std::uint64_t seed = 1;
  void validate() const;
};
struct NoisyEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};
NoisyEstimate noisy_expectation(const QuantumCircuit& c, const std::vector<double>& theta, const PauliSum& obs,
                                const NoiseModel& noise, const Statevector* initial = nullptr);

struct VqadConfig {
  bool bfgs = true;  // false: ADAM steps
  int max_iterations = 3000;
  double learning_rate = 0.05;
  double cost_tol = 1e-4;       // stop once the exact cost is below this
  std::vector<double> init;     // empty: identity initialisation (all zeros)
  bool noisy = false;           // SPSA on the trajectory-averaged cost
  NoiseModel noise;
  SpsaConfig spsa;
};
struct VqadResult {
  std::vector<double> theta;
  double final_cost = 0.0;  // exact mode, noiseless
  double final_noisy_cost = 0.0;
  int iterations = 0;
  std::vector<double> history;
};
VqadResult vqad_train(const QuantumCircuit& syndrome, const std::vector<std::size_t>& trash,
                      const Statevector& input, const VqadConfig& cfg);
// Exact-mode cost per input state.
std::vector<double> vqad_score_line(const QuantumCircuit& syndrome, const std::vector<double>& theta,
                                    const std::vector<std::size_t>& trash, const std::vector<Statevector>& states);
std::vector<NoisyEstimate> vqad_score_line_noisy(const QuantumCircuit& syndrome, const std::vector<double>& theta,
                                                 const std::vector<std::size_t>& trash,
                                                 const std::vector<Statevector>& states, const NoiseModel& noise);

// Pool element: generator G = coef * P; the appended unitary is exp(-i θ G).
struct PoolOperator {
  std::string label;
  std::string pauli;  // full length, one char per qubit
  double coef = 0.5;
};
struct AdaptChoice {
  std::size_t index = 0;
  double derivative = 0.0;  // i<[G, H]>
  bool stop = false;
  std::vector<double> derivatives;
};
AdaptChoice adapt_grow(const std::vector<PoolOperator>& pool, const Statevector& psi, const PauliSum& h,
                       double threshold = 1e-6);
struct AdaptResult {
  QuantumCircuit circuit;
  std::vector<double> theta;
  double energy = 0.0;
  std::vector<std::string> chosen;
};
// Grow from `initial` until every pool derivative falls below the threshold or max_ops is hit.
AdaptResult adapt_vqe(const std::vector<PoolOperator>& pool, const PauliSum& h, const Statevector& initial,
                      std::size_t max_ops, double threshold, const VqeConfig& cfg);

std::string circuit_to_json(const QuantumCircuit& c, const std::vector<double>& theta = {});
QuantumCircuit circuit_from_json(const std::string& text, std::vector<double>* theta = nullptr);

}  // namespace qphase
