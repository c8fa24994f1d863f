#include "qphase/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "qphase/random.hpp"

namespace qphase {

namespace {

const std::vector<std::pair<std::string, Command>>& command_table() {
  static const std::vector<std::pair<std::string, Command>> t = {
      {"dmrg", Command::DMRG}, {"idmrg", Command::IDMRG}, {"tebd", Command::TEBD}, {"scan", Command::Scan},
      {"map", Command::Map},   {"vqe", Command::VQE},     {"vqad", Command::VQAD}};
  return t;
}

std::string join(const std::vector<std::string>& v, const char* sep = ", ") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

// Collects problems instead of stopping at the first one.
struct Reader {
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  void only(const YAML::Node& n, const std::string& path, const std::set<std::string>& keys) {
    if (!n.IsMap()) return;
    for (const auto& kv : n) {
      const auto k = kv.first.as<std::string>();
      if (!keys.count(k)) fail(path + "." + k, "unknown key");
    }
  }

  bool map(const YAML::Node& n, const std::string& path) {
    if (n.IsMap()) return true;
    fail(path, "expected a mapping");
    return false;
  }

  template <class T>
  void get(const YAML::Node& parent, const std::string& key, const std::string& path, T& out) {
    const YAML::Node n = parent[key];
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      fail(path + "." + key, "bad value '" + (n.IsScalar() ? n.Scalar() : std::string("<non-scalar>")) + "'");
    }
  }

  void get_size(const YAML::Node& parent, const std::string& key, const std::string& path, std::size_t& out) {
    long long v = static_cast<long long>(out);
    get(parent, key, path, v);
    if (v < 0) fail(path + "." + key, "must be non-negative");
    else out = static_cast<std::size_t>(v);
  }

  template <class E, class F>
  void get_enum(const YAML::Node& parent, const std::string& key, const std::string& path, E& out, F parse) {
    std::string s;
    if (!parent[key]) return;
    get(parent, key, path, s);
    try {
      out = parse(s);
    } catch (const Error& e) {
      fail(path + "." + key, e.what());
    }
  }
};

void read_model(Reader& r, const YAML::Node& n, RunConfig& cfg) {
  if (!r.map(n, "model")) return;
  r.only(n, "model", {"name", "length", "couplings", "terms"});
  if (!n["name"]) r.fail("model.name", "missing");
  else {
    std::string tag;
    r.get(n, "name", "model", tag);
    try {
      cfg.model.model = model_from_string(tag);
    } catch (const Error& e) {
      r.fail("model.name", e.what());
    }
  }
  if (!n["length"]) r.fail("model.length", "missing");
  r.get_size(n, "length", "model", cfg.model.length);
  if (const auto c = n["couplings"]) {
    if (r.map(c, "model.couplings"))
      for (const auto& kv : c) {
        const auto k = kv.first.as<std::string>();
        double v = 0;
        r.get(c, k, "model.couplings", v);
        cfg.model.couplings[k] = v;
      }
  }
  if (const auto t = n["terms"]) {
    if (!t.IsSequence()) r.fail("model.terms", "expected a list");
    else
      for (std::size_t i = 0; i < t.size(); ++i) {
        const std::string p = "model.terms[" + std::to_string(i) + "]";
        if (!r.map(t[i], p)) continue;
        r.only(t[i], p, {"sites", "ops", "coefficient"});
        CustomTerm term;
        r.get(t[i], "sites", p, term.sites);
        r.get(t[i], "ops", p, term.ops);
        r.get(t[i], "coefficient", p, term.coefficient);
        cfg.model.terms.push_back(term);
      }
  }
}

void read_grid(Reader& r, const YAML::Node& n, RunConfig& cfg) {
  if (!n.IsSequence()) {
    r.fail("grid", "expected a list of axes");
    return;
  }
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::string p = "grid[" + std::to_string(i) + "]";
    if (!r.map(n[i], p)) continue;
    r.only(n[i], p, {"axis", "min", "max", "steps"});
    GridAxis a;
    if (!n[i]["axis"]) r.fail(p + ".axis", "missing");
    r.get(n[i], "axis", p, a.name);
    r.get(n[i], "min", p, a.min);
    r.get(n[i], "max", p, a.max);
    r.get_size(n[i], "steps", p, a.steps);
    cfg.grid.axes.push_back(a);
  }
}

void read_solver(Reader& r, const YAML::Node& n, SolverBlock& s) {
  if (!r.map(n, "solver")) return;
  r.only(n, "solver", {"kind", "chi_max", "eps", "max_sweeps", "energy_tol", "max_iterations", "lambda_tol", "stages",
                       "order", "feature", "correlator", "correlation_range"});
  r.get_enum(n, "kind", "solver", s.kind, solver_from_string);
  r.get_size(n, "chi_max", "solver", s.chi_max);
  r.get(n, "eps", "solver", s.eps);
  r.get(n, "max_sweeps", "solver", s.max_sweeps);
  r.get(n, "energy_tol", "solver", s.energy_tol);
  r.get(n, "max_iterations", "solver", s.max_iterations);
  r.get(n, "lambda_tol", "solver", s.lambda_tol);
  if (const auto st = n["stages"]) {
    std::vector<std::pair<double, int>> raw;
    try {
      for (const auto& e : st) raw.emplace_back(e[0].as<double>(), e[1].as<int>());
      s.stages.clear();
      for (auto [dt, k] : raw) s.stages.push_back({dt, k});
    } catch (const YAML::Exception&) {
      r.fail("solver.stages", "expected a list of [dt, steps] pairs");
    }
  }
  r.get(n, "order", "solver", s.order);
  r.get_enum(n, "feature", "solver", s.feature, feature_kind_from_string);
  r.get_enum(n, "correlator", "solver", s.correlator, correlator_from_string);
  r.get_size(n, "correlation_range", "solver", s.correlation_range);
}

void read_lightcone(Reader& r, const YAML::Node& n, RunConfig& cfg) {
  if (!r.map(n, "lightcone")) return;
  r.only(n, "lightcone", {"site", "dt", "times"});
  LightconeBlock lc;
  r.get_size(n, "site", "lightcone", lc.site);
  r.get(n, "dt", "lightcone", lc.dt);
  r.get(n, "times", "lightcone", lc.times);
  cfg.lightcone = lc;
}

void read_anomaly(Reader& r, const YAML::Node& n, AnomalyBlock& a) {
  if (!r.map(n, "anomaly")) return;
  r.only(n, "anomaly", {"epochs", "batch_size", "learning_rate", "layer_dims", "k_sigma", "floor_factor",
                        "rise_fraction", "max_rounds", "initial_fraction", "random_initial", "dataset"});
  r.get(n, "epochs", "anomaly", a.epochs);
  r.get_size(n, "batch_size", "anomaly", a.batch_size);
  r.get(n, "learning_rate", "anomaly", a.learning_rate);
  r.get(n, "layer_dims", "anomaly", a.layer_dims);
  r.get(n, "k_sigma", "anomaly", a.k_sigma);
  r.get(n, "floor_factor", "anomaly", a.floor_factor);
  r.get(n, "rise_fraction", "anomaly", a.rise_fraction);
  r.get(n, "max_rounds", "anomaly", a.max_rounds);
  r.get(n, "initial_fraction", "anomaly", a.initial_fraction);
  r.get(n, "random_initial", "anomaly", a.random_initial);
  r.get(n, "dataset", "anomaly", a.dataset);
}

void read_circuit(Reader& r, const YAML::Node& n, CircuitBlock& c) {
  if (!r.map(n, "circuit")) return;
  r.only(n, "circuit", {"ansatz", "layers", "entangler", "optimizer", "max_iterations", "learning_rate", "grad_tol",
                        "init_scale", "restarts", "warm_start", "spsa_iterations", "n_trash", "train_point",
                        "noisy_training", "p1", "p2", "trajectories", "shots"});
  r.get_enum(n, "ansatz", "circuit", c.ansatz, ansatz_from_string);
  r.get(n, "layers", "circuit", c.layers);
  r.get_enum(n, "entangler", "circuit", c.entangler, entangler_from_string);
  r.get_enum(n, "optimizer", "circuit", c.optimizer, vqe_optimizer_from_string);
  r.get(n, "max_iterations", "circuit", c.max_iterations);
  r.get(n, "learning_rate", "circuit", c.learning_rate);
  r.get(n, "grad_tol", "circuit", c.grad_tol);
  r.get(n, "init_scale", "circuit", c.init_scale);
  r.get(n, "restarts", "circuit", c.restarts);
  r.get(n, "warm_start", "circuit", c.warm_start);
  r.get(n, "spsa_iterations", "circuit", c.spsa_iterations);
  r.get(n, "n_trash", "circuit", c.n_trash);
  r.get(n, "train_point", "circuit", c.train_point);
  r.get(n, "noisy_training", "circuit", c.noisy_training);
  r.get(n, "p1", "circuit", c.p1);
  r.get(n, "p2", "circuit", c.p2);
  r.get(n, "trajectories", "circuit", c.trajectories);
  r.get_size(n, "shots", "circuit", c.shots);
}

template <class F>
void check(Reader& r, const std::string& path, F f) {
  try {
    f();
  } catch (const Error& e) {
    r.fail(path, e.what());
  }
}

void validate(Reader& r, const YAML::Node& root, RunConfig& cfg) {
  if (!root["seed"]) r.fail("seed", "missing (a master seed is mandatory)");
  if (!root["command"]) r.fail("command", "missing");
  if (!cfg.has_model) r.fail("model", "missing block");
  else check(r, "model", [&] { cfg.model.validate(); });

  const Command c = cfg.command;
  const bool needs_grid = c == Command::Scan || c == Command::VQAD || (c == Command::Map && cfg.anomaly.dataset.empty());
  if (needs_grid && !cfg.has_grid) r.fail("grid", std::string("missing block (required by ") + command_name(c) + ")");
  if (cfg.has_grid) {
    check(r, "grid", [&] { cfg.grid.validate(); });
    if (cfg.has_model && r.errors.empty())
      check(r, "grid", [&] { bind_point(cfg.model, cfg.grid, 0); });
  }
  if (c == Command::Map && !cfg.has_anomaly) r.fail("anomaly", "missing block (required by map)");
  if ((c == Command::VQE || c == Command::VQAD) && cfg.has_model && cfg.model.model != ModelKind::TFIM)
    r.fail("model.name", "circuit commands support TFIM only");
  if (c == Command::VQAD) {
    if (!cfg.has_circuit) r.fail("circuit", "missing block (required by vqad)");
    else if (cfg.circuit.train_point.empty()) r.fail("circuit.train_point", "missing (couplings of the training state)");
  }
  if ((c == Command::VQE || c == Command::VQAD) && cfg.model.length > 14)
    r.fail("model.length", "statevector commands are limited to 14 qubits");
  if (c == Command::IDMRG && cfg.model.length % 2 != 0) r.fail("model.length", "iDMRG needs an even unit cell");
  if (c == Command::TEBD && cfg.solver.stages.empty()) r.fail("solver.stages", "empty");
  if (cfg.lightcone && cfg.lightcone->site >= cfg.model.length) r.fail("lightcone.site", "outside the chain");
  if (cfg.has_circuit) {
    NoiseModel nm{cfg.circuit.p1, cfg.circuit.p2, cfg.circuit.trajectories, 1};
    check(r, "circuit", [&] { nm.validate(); });
    if (cfg.circuit.layers < 1) r.fail("circuit.layers", "must be >= 1");
  }
  if (cfg.has_anomaly) {
    TrainConfig tc;
    tc.epochs = cfg.anomaly.epochs;
    tc.batch_size = cfg.anomaly.batch_size;
    tc.learning_rate = cfg.anomaly.learning_rate;
    check(r, "anomaly", [&] { tc.validate(); });
  }
}

}  // namespace

Command command_from_string(const std::string& s) {
  std::vector<std::string> names;
  for (const auto& [n, c] : command_table()) {
    if (n == s) return c;
    names.push_back(n);
  }
  throw Error(ErrorCode::ValidationError, "unknown command '" + s + "' (valid: " + join(names) + ")");
}

const char* command_name(Command c) {
  for (const auto& [n, k] : command_table())
    if (k == c) return n.c_str();
  return "?";
}

std::uint64_t RunConfig::master_seed() const {
  if (!seed) throw Error(ErrorCode::ValidationError, "seed: missing");
  return *seed;
}

ConfigErrors::ConfigErrors(ErrorCode code, std::vector<std::string> issues)
    : Error(code, join(issues, "; ")), issues_(std::move(issues)) {}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigErrors(ErrorCode::ParseError, {e.what()});
  }
  if (!root.IsMap()) throw ConfigErrors(ErrorCode::ParseError, {"top level must be a mapping"});

  Reader r;
  RunConfig cfg;
  r.only(root, "config", {"command", "seed", "output", "model", "grid", "solver", "lightcone", "anomaly", "circuit"});
  r.get_enum(root, "command", "config", cfg.command, command_from_string);
  if (root["seed"]) {
    long long s = 0;
    try {
      if (root["seed"].Scalar().find('-') != std::string::npos) throw YAML::Exception({}, "negative");
      cfg.seed = root["seed"].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      r.fail("seed", "expected a non-negative integer");
    }
    (void)s;
  }
  r.get(root, "output", "config", cfg.output);
  if (root["model"]) {
    cfg.has_model = true;
    read_model(r, root["model"], cfg);
  }
  if (root["grid"]) {
    cfg.has_grid = true;
    read_grid(r, root["grid"], cfg);
  }
  if (root["solver"]) read_solver(r, root["solver"], cfg.solver);
  if (root["lightcone"]) read_lightcone(r, root["lightcone"], cfg);
  if (root["anomaly"]) {
    cfg.has_anomaly = true;
    read_anomaly(r, root["anomaly"], cfg.anomaly);
  }
  if (root["circuit"]) {
    cfg.has_circuit = true;
    read_circuit(r, root["circuit"], cfg.circuit);
  }
  validate(r, root, cfg);
  if (!r.errors.empty()) throw ConfigErrors(ErrorCode::ValidationError, r.errors);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "command" << YAML::Value << command_name(cfg.command);
  if (cfg.seed) e << YAML::Key << "seed" << YAML::Value << *cfg.seed;
  e << YAML::Key << "output" << YAML::Value << cfg.output;
  if (cfg.has_model) {
    e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << model_name(cfg.model.model);
    e << YAML::Key << "length" << YAML::Value << cfg.model.length;
    e << YAML::Key << "couplings" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : cfg.model.couplings) e << YAML::Key << k << YAML::Value << v;
    e << YAML::EndMap;
    if (!cfg.model.terms.empty()) {
      e << YAML::Key << "terms" << YAML::Value << YAML::BeginSeq;
      for (const auto& t : cfg.model.terms)
        e << YAML::Flow << YAML::BeginMap << YAML::Key << "sites" << YAML::Value << t.sites << YAML::Key << "ops"
          << YAML::Value << t.ops << YAML::Key << "coefficient" << YAML::Value << t.coefficient << YAML::EndMap;
      e << YAML::EndSeq;
    }
    e << YAML::EndMap;
  }
  if (cfg.has_grid) {
    e << YAML::Key << "grid" << YAML::Value << YAML::BeginSeq;
    for (const auto& a : cfg.grid.axes)
      e << YAML::Flow << YAML::BeginMap << YAML::Key << "axis" << YAML::Value << a.name << YAML::Key << "min"
        << YAML::Value << a.min << YAML::Key << "max" << YAML::Value << a.max << YAML::Key << "steps" << YAML::Value
        << a.steps << YAML::EndMap;
    e << YAML::EndSeq;
  }
  const auto& s = cfg.solver;
  e << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << solver_name(s.kind);
  e << YAML::Key << "chi_max" << YAML::Value << s.chi_max;
  e << YAML::Key << "eps" << YAML::Value << s.eps;
  e << YAML::Key << "max_sweeps" << YAML::Value << s.max_sweeps;
  e << YAML::Key << "energy_tol" << YAML::Value << s.energy_tol;
  e << YAML::Key << "max_iterations" << YAML::Value << s.max_iterations;
  e << YAML::Key << "lambda_tol" << YAML::Value << s.lambda_tol;
  e << YAML::Key << "stages" << YAML::Value << YAML::BeginSeq;
  for (const auto& st : s.stages) e << YAML::Flow << YAML::BeginSeq << st.dt << st.steps << YAML::EndSeq;
  e << YAML::EndSeq;
  e << YAML::Key << "order" << YAML::Value << s.order;
  e << YAML::Key << "feature" << YAML::Value << feature_kind_name(s.feature);
  e << YAML::Key << "correlator" << YAML::Value << correlator_name(s.correlator);
  e << YAML::Key << "correlation_range" << YAML::Value << s.correlation_range;
  e << YAML::EndMap;
  if (cfg.lightcone) {
    e << YAML::Key << "lightcone" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "site" << YAML::Value << cfg.lightcone->site;
    e << YAML::Key << "dt" << YAML::Value << cfg.lightcone->dt;
    e << YAML::Key << "times" << YAML::Value << YAML::Flow << cfg.lightcone->times;
    e << YAML::EndMap;
  }
  if (cfg.has_anomaly) {
    const auto& a = cfg.anomaly;
    e << YAML::Key << "anomaly" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "epochs" << YAML::Value << a.epochs;
    e << YAML::Key << "batch_size" << YAML::Value << a.batch_size;
    e << YAML::Key << "learning_rate" << YAML::Value << a.learning_rate;
    e << YAML::Key << "layer_dims" << YAML::Value << YAML::Flow << a.layer_dims;
    e << YAML::Key << "k_sigma" << YAML::Value << a.k_sigma;
    e << YAML::Key << "floor_factor" << YAML::Value << a.floor_factor;
    e << YAML::Key << "rise_fraction" << YAML::Value << a.rise_fraction;
    e << YAML::Key << "max_rounds" << YAML::Value << a.max_rounds;
    e << YAML::Key << "initial_fraction" << YAML::Value << a.initial_fraction;
    e << YAML::Key << "random_initial" << YAML::Value << a.random_initial;
    e << YAML::Key << "dataset" << YAML::Value << a.dataset;
    e << YAML::EndMap;
  }
  if (cfg.has_circuit) {
    const auto& c = cfg.circuit;
    e << YAML::Key << "circuit" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "ansatz" << YAML::Value << ansatz_name(c.ansatz);
    e << YAML::Key << "layers" << YAML::Value << c.layers;
    e << YAML::Key << "entangler" << YAML::Value << entangler_name(c.entangler);
    e << YAML::Key << "optimizer" << YAML::Value << vqe_optimizer_name(c.optimizer);
    e << YAML::Key << "max_iterations" << YAML::Value << c.max_iterations;
    e << YAML::Key << "learning_rate" << YAML::Value << c.learning_rate;
    e << YAML::Key << "grad_tol" << YAML::Value << c.grad_tol;
    e << YAML::Key << "init_scale" << YAML::Value << c.init_scale;
    e << YAML::Key << "restarts" << YAML::Value << c.restarts;
    e << YAML::Key << "warm_start" << YAML::Value << c.warm_start;
    e << YAML::Key << "spsa_iterations" << YAML::Value << c.spsa_iterations;
    e << YAML::Key << "n_trash" << YAML::Value << c.n_trash;
    e << YAML::Key << "train_point" << YAML::Value << YAML::Flow << YAML::BeginMap;
    for (const auto& [k, v] : c.train_point) e << YAML::Key << k << YAML::Value << v;
    e << YAML::EndMap;
    e << YAML::Key << "noisy_training" << YAML::Value << c.noisy_training;
    e << YAML::Key << "p1" << YAML::Value << c.p1;
    e << YAML::Key << "p2" << YAML::Value << c.p2;
    e << YAML::Key << "trajectories" << YAML::Value << c.trajectories;
    e << YAML::Key << "shots" << YAML::Value << c.shots;
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

ScanOptions scan_options(const RunConfig& cfg, std::size_t workers) {
  const auto& s = cfg.solver;
  ScanOptions o;
  o.solver = s.kind;
  o.feature = s.feature;
  o.correlator = s.correlator;
  o.correlation_range = s.correlation_range;
  o.dmrg.chi_max = s.chi_max;
  o.dmrg.eps = s.eps;
  o.dmrg.max_sweeps = s.max_sweeps;
  o.dmrg.energy_tol = s.energy_tol;
  o.idmrg.chi_max = s.chi_max;
  o.idmrg.eps = s.eps;
  o.idmrg.max_iterations = s.max_iterations;
  o.idmrg.energy_tol = s.energy_tol;
  o.idmrg.lambda_tol = s.lambda_tol;
  o.tebd.stages = s.stages;
  o.tebd.order = s.order;
  o.tebd.policy.chi_max = s.chi_max;
  o.tebd.policy.eps = s.eps;
  o.seed = derive_seed(cfg.master_seed(), 0x5c);
  o.idmrg.seed = derive_seed(cfg.master_seed(), 0x1d);
  o.workers = workers;
  return o;
}

Algorithm1Config algorithm1_config(const RunConfig& cfg) {
  const auto& a = cfg.anomaly;
  Algorithm1Config c;
  c.train.epochs = a.epochs;
  c.train.batch_size = a.batch_size;
  c.train.learning_rate = a.learning_rate;
  c.layer_dims = a.layer_dims;
  c.k_sigma = a.k_sigma;
  c.floor_factor = a.floor_factor;
  c.rise_fraction = a.rise_fraction;
  c.max_rounds = a.max_rounds;
  c.initial_fraction = a.initial_fraction;
  c.random_initial = a.random_initial;
  c.seed = derive_seed(cfg.master_seed(), 0xa1a1);
  return c;
}

}  // namespace qphase
