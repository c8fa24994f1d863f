#include "qphase/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "qphase/dataset.hpp"
#include "qphase/plotdata.hpp"
#include "qphase/random.hpp"

namespace qphase {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Output {
  fs::path dir;
  std::ofstream log;
  std::ostream* progress = nullptr;

  explicit Output(const fs::path& d, std::ostream* p) : dir(d), progress(p) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    log.open(dir / "run.log", std::ios::app);
    if (!log) throw Error(ErrorCode::IoError, "cannot write " + (dir / "run.log").string());
  }

  void note(const std::string& msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    log << stamp << " " << msg << "\n";
    log.flush();
    if (progress) *progress << msg << "\n";
  }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  void text(const std::string& name, const std::string& body) const {
    const auto tmp = path(name + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
      out << body;
      if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp);
    }
    fs::rename(tmp, path(name));
  }

  void json_file(const std::string& name, const json& j) const { text(name, j.dump(2) + "\n"); }
  void csv(const std::string& name, const CsvTable& t) const { text(name, to_csv(t)); }
};

std::vector<double> entropies(const MpsState& s) {
  std::vector<double> out;
  for (const auto& b : entanglement_profile(s)) out.push_back(b.entropy);
  return out;
}

void write_state_csvs(Output& o, const MpsState& s) {
  CsvTable ent{{"bond", "entropy"}, {}}, spec{{"bond", "index", "lambda"}, {}};
  const auto prof = entanglement_profile(s);
  for (std::size_t b = 0; b < prof.size(); ++b) {
    ent.rows.push_back({double(b), prof[b].entropy});
    for (std::size_t k = 0; k < prof[b].spectrum.size(); ++k)
      spec.rows.push_back({double(b), double(k), prof[b].spectrum[k]});
  }
  o.csv("entropy.csv", ent);
  o.csv("spectrum.csv", spec);
}

DmrgOptions dmrg_options(const SolverBlock& s) {
  DmrgOptions d;
  d.chi_max = s.chi_max;
  d.eps = s.eps;
  d.max_sweeps = s.max_sweeps;
  d.energy_tol = s.energy_tol;
  return d;
}

void run_dmrg(const RunConfig& cfg, Output& o) {
  const auto r = dmrg_run(cfg.model, dmrg_options(cfg.solver), derive_seed(cfg.master_seed(), 0xd3));
  o.note("dmrg energy " + std::to_string(r.energy) + " after " + std::to_string(r.sweeps) + " sweeps");
  o.json_file("result.json", {{"energy", r.energy},
                              {"energy_per_site", r.energy / double(cfg.model.length)},
                              {"sweeps", r.sweeps},
                              {"converged", r.converged},
                              {"history", r.history},
                              {"bond_dims", r.state.bond_dims()},
                              {"entropies", entropies(r.state)}});
  write_state_csvs(o, r.state);
  DatasetWriter w;
  add_mps(w, "state", r.state);
  w.save(o.path("state.qpd"));
}

void run_idmrg(const RunConfig& cfg, Output& o) {
  const auto s = scan_options(cfg, 1);
  const auto r = idmrg_run(cfg.model, s.idmrg);
  const std::size_t d = cfg.model.phys_dim();
  const MatC b = local_operator("b", d), bd = local_operator("bdag", d), n = local_operator("n", d);
  std::vector<std::size_t> dist;
  for (std::size_t k = 1; k <= cfg.solver.correlation_range; ++k) dist.push_back(k);
  const auto sf = imps_correlation(r.state, bd, b, dist);
  const auto nn = imps_correlation(r.state, n, n, dist);
  const double n0 = imps_local_expectation(r.state, n, 0).real();
  CsvTable corr{{"r", "sf", "dw"}, {}};
  for (std::size_t k = 0; k < dist.size(); ++k) {
    const double sign = dist[k] % 2 ? -1.0 : 1.0;
    const double nr = imps_local_expectation(r.state, n, dist[k] % r.state.unit_cell).real();
    corr.rows.push_back({double(dist[k]), sf[k].real(), sign * (nn[k].real() - n0 * nr)});
  }
  o.csv("correlations.csv", corr);
  o.json_file("result.json", {{"energy_per_site", r.energy_per_site},
                              {"converged", r.converged},
                              {"iterations", r.history.size()},
                              {"correlation_length", correlation_length(r.state)},
                              {"center_lambda", r.center_lambda}});
  DatasetWriter w;
  for (std::size_t i = 0; i < r.state.unit_cell; ++i) {
    w.add_complex("imps/gamma/" + std::to_string(i), r.state.gammas[i]);
    w.add_real("imps/lambda/" + std::to_string(i), {r.state.lambdas[i].size()}, r.state.lambdas[i]);
  }
  w.meta()["imps"] = {{"unit_cell", r.state.unit_cell}, {"phys_dim", r.state.phys_dim}};
  w.save(o.path("state.qpd"));
  o.note("idmrg energy per site " + std::to_string(r.energy_per_site));
}

void run_tebd(const RunConfig& cfg, Output& o) {
  const auto s = scan_options(cfg, 1);
  const std::size_t L = cfg.model.length, d = cfg.model.phys_dim();
  const auto init = canonicalize(random_mps(L, d, std::min<std::size_t>(4, cfg.solver.chi_max),
                                            derive_seed(cfg.master_seed(), 0x7eb)),
                                 CanonicalForm::Vidal);
  const auto g = imaginary_time_ground_state(cfg.model, init, s.tebd);
  CsvTable trace{{"step", "energy"}, {}};
  for (std::size_t k = 0; k < g.energy_trace.size(); ++k) trace.rows.push_back({double(k + 1), g.energy_trace[k]});
  o.csv("energy_trace.csv", trace);
  write_state_csvs(o, g.state);
  json res = {{"energy", g.energy}, {"steps", g.energy_trace.size()}, {"entropies", entropies(g.state)}};
  if (cfg.lightcone) {
    const auto& lc = *cfg.lightcone;
    const auto prof = lightcone_profile(g.state, cfg.model, lc.site, lc.times, lc.dt, s.tebd.policy);
    CsvTable t{{"t", "site", "dn"}, {}};
    for (std::size_t k = 0; k < prof.size(); ++k)
      for (std::size_t i = 0; i < prof[k].size(); ++i) t.rows.push_back({lc.times[k], double(i), prof[k][i]});
    o.csv("lightcone.csv", t);
    res["lightcone_points"] = t.rows.size();
  }
  o.json_file("result.json", res);
  DatasetWriter w;
  add_mps(w, "state", g.state);
  w.save(o.path("state.qpd"));
  o.note("tebd energy " + std::to_string(g.energy));
}

LabeledGrid scan(const RunConfig& cfg, const RunOptions& opts, Output& o) {
  const auto sopt = scan_options(cfg, opts.workers);
  const std::string path = o.path("dataset.qpd");
  std::optional<LabeledGrid> prior;
  if (opts.resume && fs::exists(path)) {
    prior = load_grid(path);
    std::size_t ok = 0;
    for (const auto& p : prior->points) ok += p.ok();
    o.note("resuming scan with " + std::to_string(ok) + " finished points");
  }
  const json meta = {{"solver", solver_name(sopt.solver)}, {"model", model_name(cfg.model.model)}};
  const std::size_t n = cfg.grid.size();
  const std::size_t every = std::max<std::size_t>(1, n / 20);
  std::size_t done = 0;
  auto progress = [&](const LabeledGrid& partial, std::size_t i) {
    if (++done % every == 0) save_grid(partial, path, meta);
    o.note("point " + std::to_string(i) + " " + partial.points[i].status);
  };
  auto grid = scan_grid(cfg.model, cfg.grid, sopt, prior ? &*prior : nullptr, progress);
  save_grid(grid, path, meta);
  CsvTable pts;
  for (const auto& a : cfg.grid.axes) pts.header.push_back(a.name);
  pts.header.push_back("ok");
  for (const auto& p : grid.points) {
    auto row = p.params;
    row.push_back(p.ok() ? 1.0 : 0.0);
    pts.rows.push_back(row);
  }
  o.csv("points.csv", pts);
  std::size_t failed = 0;
  for (const auto& p : grid.points) failed += !p.ok();
  if (failed == grid.points.size() && failed > 0)
    throw Error(ErrorCode::SolverFailure, "every grid point failed: " + grid.points[0].status);
  return grid;
}

void run_scan(const RunConfig& cfg, const RunOptions& opts, Output& o) {
  const auto g = scan(cfg, opts, o);
  std::size_t failed = 0;
  for (const auto& p : g.points) failed += !p.ok();
  o.json_file("result.json", {{"points", g.points.size()}, {"failed", failed}, {"feature_dim", g.feature_dim()}});
}

json boundary_json(const std::vector<BoundaryPoint>& b) {
  json out = json::array();
  for (const auto& p : b) out.push_back({{"params", p.params}, {"axis", p.axis}, {"inside", p.inside}, {"outside", p.outside}});
  return out;
}

void run_map(const RunConfig& cfg, const RunOptions& opts, Output& o) {
  LabeledGrid data = cfg.anomaly.dataset.empty() ? scan(cfg, opts, o) : load_grid(cfg.anomaly.dataset);
  const auto grid = grid_from_dataset(data);
  const auto res = run_algorithm1(data, algorithm1_config(cfg));
  json rounds = json::array();
  for (const auto& r : res.rounds) {
    const std::string tag = std::to_string(r.index);
    o.csv("loss_round" + tag + ".csv", loss_map_table(grid, r.map, r.training_indices));
    o.csv("boundary_round" + tag + ".csv", boundary_table(data.axis_names, r.boundary));
    json regions = json::array();
    for (const auto& g : r.regions) regions.push_back({{"points", g.points}, {"max_loss", g.max_loss}});
    rounds.push_back({{"index", r.index},
                      {"seed", r.seed},
                      {"training_indices", r.training_indices},
                      {"training_box", {{"lo", r.training_region.lo}, {"hi", r.training_region.hi}}},
                      {"initial_loss", r.training.initial_loss},
                      {"final_loss", r.training.final_loss()},
                      {"train_mean", r.map.train_mean},
                      {"train_std", r.map.train_std},
                      {"threshold", r.threshold},
                      {"regions", regions},
                      {"boundary", boundary_json(r.boundary)},
                      {"valleys", r.valleys}});
    o.note("round " + tag + ": " + std::to_string(r.regions.size()) + " regions");
  }
  if (!res.rounds.empty() && !res.rounds[0].training_indices.empty()) {
    const auto feats = data.features();
    const std::size_t ref = res.rounds[0].training_indices.front();
    const auto inner = geometric_scores(feats, ref, GeometricKind::Inner);
    const auto sim = geometric_scores(feats, ref, GeometricKind::Similarity);
    CsvTable t;
    t.header = data.axis_names;
    t.header.push_back("inner");
    t.header.push_back("similarity");
    for (std::size_t i = 0; i < feats.size(); ++i) {
      auto row = data.points[i].params;
      row.push_back(inner[i]);
      row.push_back(sim[i]);
      t.rows.push_back(row);
    }
    sort_rows(t, data.axis_names.size());
    o.csv("geometric.csv", t);
  }
  o.json_file("phasemap.json", {{"rounds", rounds}, {"stop_reason", res.stop_reason}});
}

std::map<std::string, double> point_couplings(const RunConfig& cfg, std::size_t flat) {
  if (!cfg.has_grid) return cfg.model.couplings;
  return bind_point(cfg.model, cfg.grid, flat).couplings;
}

PauliSum tlfi_from(std::size_t L, const std::map<std::string, double>& c) {
  auto get = [&](const char* k) {
    auto it = c.find(k);
    return it == c.end() ? 0.0 : it->second;
  };
  return tlfi_hamiltonian(L, c.count("J") ? c.at("J") : 1.0, get("g_x"), get("g_z"));
}

AnsatzParams ansatz_params(const CircuitBlock& c) {
  AnsatzParams p;
  p.layers = c.layers;
  p.entangler = c.entangler;
  p.n_trash = c.n_trash;
  return p;
}

void run_vqe(const RunConfig& cfg, Output& o) {
  const auto& c = cfg.circuit;
  const std::size_t L = cfg.model.length;
  const auto ansatz = build_ansatz(c.ansatz, L, ansatz_params(c));
  const std::size_t n = cfg.has_grid ? cfg.grid.size() : 1;
  CsvTable t;
  if (cfg.has_grid)
    for (const auto& a : cfg.grid.axes) t.header.push_back(a.name);
  for (const char* h : {"energy", "exact", "error", "iterations"}) t.header.push_back(h);
  std::vector<double> prev;
  double worst = 0.0, worst_violation = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = tlfi_from(L, point_couplings(cfg, i));
    const double exact = exact_ground(h).energy;
    VqeConfig vc;
    vc.optimizer = c.optimizer;
    vc.max_iterations = c.max_iterations;
    vc.learning_rate = c.learning_rate;
    vc.grad_tol = c.grad_tol;
    vc.init_scale = c.init_scale;
    vc.restarts = c.restarts;
    vc.seed = derive_seed(cfg.master_seed(), 0x7e, i);
    vc.spsa.iterations = c.spsa_iterations;
    vc.spsa.seed = derive_seed(cfg.master_seed(), 0x7f, i);
    if (c.warm_start) vc.warm_start = prev;
    const auto r = vqe_run(h, ansatz, vc);
    prev = r.theta;
    std::vector<double> row = cfg.has_grid ? cfg.grid.point(i) : std::vector<double>{};
    row.insert(row.end(), {r.energy, exact, r.energy - exact, double(r.iterations)});
    t.rows.push_back(row);
    worst = std::max(worst, r.energy - exact);
    worst_violation = std::max(worst_violation, exact - r.energy);
    o.note("vqe point " + std::to_string(i) + " error " + std::to_string(r.energy - exact));
  }
  if (cfg.has_grid) sort_rows(t, cfg.grid.axes.size());
  o.csv("energies.csv", t);
  o.text("circuit.json", circuit_to_json(ansatz, prev) + "\n");
  o.json_file("result.json",
              {{"points", n}, {"max_error", worst}, {"max_variational_violation", worst_violation}, {"parameters", ansatz.n_params}});
}

void run_vqad(const RunConfig& cfg, Output& o) {
  const auto& c = cfg.circuit;
  const std::size_t L = cfg.model.length;
  const auto params = ansatz_params(c);
  const auto syn = build_ansatz(AnsatzKind::VqadSyndrome, L, params);
  const auto trash = resolve_trash(L, params);
  auto train_c = cfg.model.couplings;
  for (const auto& [k, v] : c.train_point) train_c[k] = v;
  const auto train_state = exact_ground(tlfi_from(L, train_c)).state;

  const std::uint64_t seed = cfg.master_seed();
  NoiseModel noise{c.p1, c.p2, c.trajectories, derive_seed(seed, 0x401)};
  VqadConfig vc;
  vc.bfgs = c.optimizer != VqeOptimizer::ParameterShiftGd;
  vc.max_iterations = c.max_iterations;
  vc.learning_rate = c.learning_rate;
  vc.noisy = c.noisy_training;
  vc.noise = noise;
  vc.spsa.iterations = c.spsa_iterations;
  vc.spsa.seed = derive_seed(seed, 0x5b5a);
  const auto tr = vqad_train(syn, trash, train_state, vc);
  o.note("vqad trained to cost " + std::to_string(tr.final_cost));

  const std::size_t n = cfg.grid.size();
  std::vector<Statevector> states;
  for (std::size_t i = 0; i < n; ++i) states.push_back(exact_ground(tlfi_from(L, point_couplings(cfg, i))).state);
  const auto exact = vqad_score_line(syn, tr.theta, trash, states);
  const bool noisy = c.p1 > 0 || c.p2 > 0;
  std::vector<NoisyEstimate> est(n);
  if (noisy) est = vqad_score_line_noisy(syn, tr.theta, trash, states, noise);
  std::vector<double> sampled(n, 0.0);
  if (c.shots > 0)
    for (std::size_t i = 0; i < n; ++i)
      sampled[i] = hamming_cost(syn, tr.theta, states[i], trash, c.shots, derive_seed(seed, 0x5407, i));

  // score used for the boundary: noisy mean, else sampled, else exact
  LossMap map;
  map.loss.resize(n);
  for (std::size_t i = 0; i < n; ++i) map.loss[i] = noisy ? est[i].mean : c.shots > 0 ? sampled[i] : exact[i];
  if (noisy) map.train_mean = noisy_expectation(syn, tr.theta, trash_cost_hamiltonian(L, trash), noise, &train_state).mean;
  else map.train_mean = hamming_cost(syn, tr.theta, train_state, trash);
  map.train_std = 0.0;
  const double thr = region_threshold(map, cfg.anomaly.k_sigma, cfg.anomaly.floor_factor, cfg.anomaly.rise_fraction);
  const auto regions = extract_regions(map, cfg.grid, thr);
  const auto boundary = extract_boundary(cfg.grid, regions);

  CsvTable t;
  for (const auto& a : cfg.grid.axes) t.header.push_back(a.name);
  for (const char* h : {"cost", "noisy_mean", "noisy_stderr", "sampled"}) t.header.push_back(h);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = cfg.grid.point(i);
    row.insert(row.end(), {exact[i], est[i].mean, est[i].stderr_, sampled[i]});
    t.rows.push_back(row);
  }
  sort_rows(t, cfg.grid.axes.size());
  o.csv("cost_profile.csv", t);
  std::vector<std::string> names;
  for (const auto& a : cfg.grid.axes) names.push_back(a.name);
  o.csv("boundary.csv", boundary_table(names, boundary));
  o.text("syndrome.json", circuit_to_json(syn, tr.theta) + "\n");
  o.json_file("result.json", {{"train_cost", tr.final_cost},
                              {"train_noisy_cost", tr.final_noisy_cost},
                              {"iterations", tr.iterations},
                              {"trash", trash},
                              {"score_reference", map.train_mean},
                              {"threshold", thr},
                              {"boundary", boundary_json(boundary)}});
}

}  // namespace

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownModel:
    case ErrorCode::MissingCoupling:
    case ErrorCode::BadTrashCount:
    case ErrorCode::UnsupportedGate:
    case ErrorCode::EmptyPool:
    case ErrorCode::UnsupportedRange:
    case ErrorCode::TooLarge:
      return 1;
    case ErrorCode::IoError:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::SchemaVersionMismatch:
      return 3;
    default:
      return 2;
  }
}

RunConfig apply_overrides(RunConfig cfg, const RunOptions& opts) {
  if (opts.out) cfg.output = *opts.out;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.workers < 1) throw ConfigErrors(ErrorCode::ValidationError, {"--workers: must be >= 1"});
  return parse_config(serialize_config(cfg));
}

void run_pipeline(const RunConfig& cfg, const RunOptions& opts, std::ostream* progress) {
  Output o(cfg.output, progress);
  o.note(std::string("start ") + command_name(cfg.command) + " seed " + std::to_string(cfg.master_seed()));
  o.text("config.yaml", serialize_config(cfg));
  switch (cfg.command) {
    case Command::DMRG: run_dmrg(cfg, o); break;
    case Command::IDMRG: run_idmrg(cfg, o); break;
    case Command::TEBD: run_tebd(cfg, o); break;
    case Command::Scan: run_scan(cfg, opts, o); break;
    case Command::Map: run_map(cfg, opts, o); break;
    case Command::VQE: run_vqe(cfg, o); break;
    case Command::VQAD: run_vqad(cfg, o); break;
  }
  o.note("done");
}

}  // namespace qphase
