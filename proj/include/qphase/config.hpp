#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qphase/error.hpp"
#include "qphase/phasemap.hpp"
#include "qphase/vqad.hpp"

namespace qphase {

enum class Command { DMRG, IDMRG, TEBD, Scan, Map, VQE, VQAD };
Command command_from_string(const std::string& s);
const char* command_name(Command c);

struct SolverBlock {
  SolverKind kind = SolverKind::DMRG;
  std::size_t chi_max = 32;
  double eps = 1e-10;
  int max_sweeps = 20;
  double energy_tol = 1e-10;
  int max_iterations = 400;  // iDMRG
  double lambda_tol = 1e-8;  // iDMRG
  std::vector<ImaginaryStage> stages{{0.1, 50}, {0.01, 100}, {0.001, 200}};  // TEBD
  int order = 2;
  FeatureKind feature = FeatureKind::EntanglementSpectrum;
  CorrelatorKind correlator = CorrelatorKind::DW;
  std::size_t correlation_range = 16;
};

// Real-time quench after the TEBD ground state (optional).
struct LightconeBlock {
  std::size_t site = 0;
  double dt = 0.05;
  std::vector<double> times;
};

struct AnomalyBlock {
  int epochs = 200;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  std::vector<std::size_t> layer_dims;
  double k_sigma = 5.0;
  double floor_factor = 2.0;
  double rise_fraction = 0.5;
  int max_rounds = 6;
  double initial_fraction = 0.1;
  bool random_initial = false;
  std::string dataset;  // existing container; empty: scan first
};

struct CircuitBlock {
  AnsatzKind ansatz = AnsatzKind::VqeHardwareEfficient;
  int layers = 1;
  Entangler entangler = Entangler::Circular;
  VqeOptimizer optimizer = VqeOptimizer::ParameterShiftGd;
  int max_iterations = 2000;
  double learning_rate = 0.05;
  double grad_tol = 1e-6;
  double init_scale = 0.1;
  int restarts = 1;
  bool warm_start = true;
  int spsa_iterations = 200;
  // vqad
  int n_trash = 0;
  std::map<std::string, double> train_point;  // couplings of the training state
  bool noisy_training = false;
  double p1 = 0.0;
  double p2 = 0.0;
  int trajectories = 200;
  std::size_t shots = 0;
};

struct RunConfig {
  Command command = Command::DMRG;
  std::optional<std::uint64_t> seed;
  std::string output = "out";
  HamiltonianSpec model;
  bool has_model = false;
  ParameterGrid grid;
  bool has_grid = false;
  SolverBlock solver;
  std::optional<LightconeBlock> lightcone;
  AnomalyBlock anomaly;
  bool has_anomaly = false;
  CircuitBlock circuit;
  bool has_circuit = false;

  std::uint64_t master_seed() const;
};

// Every problem found, not just the first.
class ConfigErrors : public Error {
 public:
  ConfigErrors(ErrorCode code, std::vector<std::string> issues);
  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

ScanOptions scan_options(const RunConfig& cfg, std::size_t workers);
Algorithm1Config algorithm1_config(const RunConfig& cfg);

}  // namespace qphase
