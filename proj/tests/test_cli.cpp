#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qphase/dataset.hpp"
#include "qphase/pipeline.hpp"
#include "qphase/plotdata.hpp"
#include "qphase/random.hpp"

using namespace qphase;
namespace fs = std::filesystem;

namespace {

const char* kMinimalDmrg = R"(command: dmrg
seed: 3
output: out/x
model:
  name: TFIM
  length: 6
  couplings: {J: 1.0, g_x: 1.0, g_z: 0.0}
)";

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("qphase_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() != ".log")
      out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

std::vector<std::string> issues_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigErrors& e) {
    return e.issues();
  }
  return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& what) {
  for (const auto& i : issues)
    if (i.find(what) != std::string::npos) return true;
  return false;
}

std::size_t rss_bytes() {
  std::ifstream in("/proc/self/statm");
  std::size_t pages = 0, resident = 0;
  in >> pages >> resident;
  return resident * static_cast<std::size_t>(sysconf(_SC_PAGESIZE));
}

}  // namespace

TEST(Config, MinimalDmrgRoundTrips) {
  const auto cfg = parse_config(kMinimalDmrg);
  EXPECT_EQ(cfg.command, Command::DMRG);
  EXPECT_EQ(*cfg.seed, 3u);
  EXPECT_EQ(cfg.model.length, 6u);
  const auto text = serialize_config(cfg);
  const auto again = parse_config(text);
  EXPECT_EQ(serialize_config(again), text);
  EXPECT_EQ(again.model.couplings, cfg.model.couplings);
}

TEST(Config, FullConfigRoundTripsExactly) {
  const std::string text = R"(command: vqad
seed: 18446744073709551615
model: {name: TFIM, length: 5, couplings: {J: 1, g_x: 0.1, g_z: 0.1}}
grid: [{axis: g_x, min: 0.2, max: 2.0, steps: 19}]
solver: {kind: tebd, stages: [[0.1, 3], [0.3333333333333333, 7]]}
lightcone: {site: 2, dt: 0.05, times: [0, 0.1]}
anomaly: {epochs: 3, layer_dims: [4, 2, 4], rise_fraction: 0.3}
circuit: {train_point: {g_x: 0.2}, p1: 0.001, p2: 0.01, entangler: ladder, shots: 100}
)";
  const auto cfg = parse_config(text);
  const auto s1 = serialize_config(cfg);
  EXPECT_EQ(serialize_config(parse_config(s1)), s1);
  EXPECT_EQ(parse_config(s1).solver.stages[1].dt, 1.0 / 3.0);
  EXPECT_EQ(*cfg.seed, 18446744073709551615ull);
}

TEST(Config, MissingSeedNamesTheField) {
  std::string text = kMinimalDmrg;
  text.erase(text.find("seed: 3\n"), 8);
  try {
    parse_config(text);
    FAIL() << "accepted a config without a seed";
  } catch (const ConfigErrors& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationError);
    EXPECT_TRUE(mentions(e.issues(), "seed"));
  }
}

TEST(Config, UnknownModelListsValidTags) {
  std::string text = kMinimalDmrg;
  text.replace(text.find("TFIM"), 4, "Potts");
  const auto issues = issues_of(text);
  ASSERT_FALSE(issues.empty());
  for (const auto& tag : model_names()) EXPECT_TRUE(mentions(issues, tag)) << tag;
}

TEST(Config, CollectsEveryError) {
  const auto issues = issues_of(R"(command: scan
model: {name: Potts, length: 4}
solver: {chi_max: lots, feature: pixels}
colour: blue
)");
  EXPECT_TRUE(mentions(issues, "seed"));
  EXPECT_TRUE(mentions(issues, "model.name"));
  EXPECT_TRUE(mentions(issues, "solver.chi_max"));
  EXPECT_TRUE(mentions(issues, "solver.feature"));
  EXPECT_TRUE(mentions(issues, "colour"));
  EXPECT_TRUE(mentions(issues, "grid"));
  EXPECT_GE(issues.size(), 6u);
}

TEST(Config, CommandSpecificBlocks) {
  EXPECT_TRUE(mentions(issues_of("command: map\nseed: 1\nmodel: {name: TFIM, length: 4, couplings: {J: 1, g_x: 1}}\n"),
                       "anomaly"));
  EXPECT_TRUE(mentions(issues_of("command: vqad\nseed: 1\nmodel: {name: TFIM, length: 4, couplings: {J: 1, g_x: 1}}\n"
                                 "grid: [{axis: g_x, min: 0, max: 1, steps: 3}]\n"),
                       "circuit"));
  EXPECT_TRUE(mentions(issues_of("command: scan\nseed: 1\nmodel: {name: TFIM, length: 4, couplings: {J: 1, g_x: 1}}\n"
                                 "grid: [{axis: n_max, min: 0, max: 1, steps: 3}]\n"),
                       "grid"));
  EXPECT_TRUE(mentions(issues_of("command: idmrg\nseed: 1\nmodel: {name: TFIM, length: 3, couplings: {J: 1, g_x: 1}}\n"),
                       "even"));
  EXPECT_TRUE(mentions(issues_of("command: dmrg\nseed: -4\nmodel: {name: TFIM, length: 4, couplings: {J: 1, g_x: 1}}\n"),
                       "seed"));
}

TEST(Config, MalformedYamlIsAParseError) {
  try {
    parse_config("command: [dmrg\n");
    FAIL();
  } catch (const ConfigErrors& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}

TEST(Config, OverridesRevalidate) {
  RunOptions o;
  o.seed = 99;
  o.out = "elsewhere";
  const auto cfg = apply_overrides(parse_config(kMinimalDmrg), o);
  EXPECT_EQ(*cfg.seed, 99u);
  EXPECT_EQ(cfg.output, "elsewhere");
  o.workers = 0;
  EXPECT_THROW(apply_overrides(parse_config(kMinimalDmrg), o), ConfigErrors);
}

TEST(Dataset, RoundTripIsBitIdentical) {
  const auto dir = scratch("rt");
  Rng r(4);
  std::vector<double> a(300);
  for (auto& x : a) x = r.normal() * std::pow(10.0, r.uniform(-300, 300));
  a[0] = -0.0;
  a[1] = std::numeric_limits<double>::denorm_min();
  a[2] = std::numeric_limits<double>::infinity();
  DenseTensor t({2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = cplx(r.normal(), r.normal());
  DatasetWriter w;
  w.add_real("a", {3, 100}, a, "random");
  w.add_complex("t", t, "random");
  w.meta()["note"] = "x";
  w.save((dir / "d.qpd").string());

  DatasetReader rd((dir / "d.qpd").string());
  rd.verify();
  const auto back = rd.read_real("a");
  ASSERT_EQ(back.size(), a.size());
  EXPECT_EQ(std::memcmp(back.data(), a.data(), a.size() * 8), 0);
  const auto bt = rd.read_complex("t");
  EXPECT_EQ(bt.shape(), t.shape());
  EXPECT_EQ(std::memcmp(bt.raw(), t.raw(), t.size() * sizeof(cplx)), 0);
  EXPECT_EQ(rd.entry("a").provenance, "random");
  EXPECT_EQ(rd.meta()["note"], "x");
  // no temp files left behind
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
  EXPECT_EQ(files, 1u);
}

TEST(Dataset, BlobIsLittleEndianDoubles) {
  const auto dir = scratch("le");
  DatasetWriter w;
  w.add_real("x", {1}, {1.0});
  w.save((dir / "d.qpd").string());
  const auto bytes = slurp(dir / "d.qpd");
  const unsigned char one[8] = {0, 0, 0, 0, 0, 0, 0xf0, 0x3f};
  EXPECT_EQ(std::memcmp(bytes.data() + bytes.size() - 8, one, 8), 0);
}

TEST(Dataset, CorruptionIsDetected) {
  const auto dir = scratch("bad");
  DatasetWriter w;
  std::vector<double> a(64, 1.5);
  w.add_real("a", {64}, a);
  const auto path = dir / "d.qpd";
  w.save(path.string());
  auto bytes = slurp(path);

  auto flipped = bytes;
  flipped[flipped.size() - 20] ^= 0x01;
  spit(path, flipped);
  {
    DatasetReader rd(path.string());
    EXPECT_THROW(rd.verify(), Error);
    try {
      rd.read_real("a");
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ChecksumMismatch);
    }
  }
  spit(path, bytes.substr(0, bytes.size() - 8));
  try {
    DatasetReader rd(path.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ChecksumMismatch);
  }
  auto schema = bytes;
  const auto at = schema.find("\"schema_version\": 1");
  ASSERT_NE(at, std::string::npos);
  schema[at + 18] = '7';
  spit(path, schema);
  try {
    DatasetReader rd(path.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaVersionMismatch);
  }
  try {
    DatasetReader rd((dir / "missing.qpd").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Dataset, LazyLoadingTouchesOnlyRequestedEntries) {
  const auto dir = scratch("lazy");
  const std::size_t n = 10000, dim = 256;
  {
    DatasetWriter w;
    std::vector<double> row(dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < dim; ++k) row[k] = double(i) + 1e-3 * double(k);
      w.add_real("p" + std::to_string(i), {dim}, row);
    }
    w.save((dir / "big.qpd").string());
  }
  const std::size_t blob = n * dim * 8;
  const std::size_t before = rss_bytes();
  DatasetReader rd((dir / "big.qpd").string());
  const std::size_t manifest_bytes = rd.bytes_read();
  const auto x = rd.read_real("p7");
  const auto y = rd.read_real("p9999");
  EXPECT_EQ(x[3], 7.0 + 3e-3);
  EXPECT_EQ(y[0], 9999.0);
  EXPECT_EQ(rd.bytes_read(), manifest_bytes + 2 * dim * 8);
  EXPECT_LT(manifest_bytes, blob / 5);
  const std::size_t grown = rss_bytes() > before ? rss_bytes() - before : 0;
  EXPECT_LT(grown, blob / 2) << "resident growth " << grown << " for a " << blob << " byte blob";
}

TEST(Dataset, GridAndMpsRoundTrip) {
  const auto dir = scratch("grid");
  LabeledGrid g;
  g.axis_names = {"g_x", "g_z"};
  g.shape = {2, 2};
  g.kind = FeatureKind::CorrelatorRows;
  for (int i = 0; i < 4; ++i) {
    GridPoint p;
    p.params = {0.1 * i, 0.3};
    p.feature = VecD::LinSpaced(5, i, i + 1);
    g.points.push_back(p);
  }
  g.points[2].status = "solver failure: x";
  g.points[2].feature = VecD::Zero(5);
  save_grid(g, (dir / "g.qpd").string());
  const auto b = load_grid((dir / "g.qpd").string());
  EXPECT_EQ(b.axis_names, g.axis_names);
  EXPECT_EQ(b.kind, g.kind);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(b.points[i].status, g.points[i].status);
    EXPECT_EQ(b.points[i].params, g.points[i].params);
    EXPECT_EQ(b.points[i].feature, g.points[i].feature);
  }

  const auto s = canonicalize(random_mps(6, 2, 4, 3), CanonicalForm::Vidal);
  DatasetWriter w;
  add_mps(w, "psi", s);
  w.save((dir / "m.qpd").string());
  DatasetReader rd((dir / "m.qpd").string());
  const auto back = read_mps(rd, "psi");
  EXPECT_EQ(back.form, CanonicalForm::Vidal);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(max_abs_diff(back.gammas[i], s.gammas[i]), 0.0);
  EXPECT_EQ(back.lambdas, s.lambdas);
}

TEST(Csv, EmptyMapIsHeaderOnly) {
  ParameterGrid grid{{{"g_x", 0, 1, 2}}};
  CsvTable t = loss_map_table(grid, LossMap{}, {});
  EXPECT_EQ(to_csv(t), "g_x,loss,training\n");
  EXPECT_EQ(parse_csv(to_csv(t)).rows.size(), 0u);
}

TEST(Csv, LossMapSortedAndExact) {
  ParameterGrid grid{{{"a", 0.5, 1.5, 2}, {"b", -1.0, 0.0, 2}}};
  LossMap m;
  m.loss = {0.1, 1.0 / 3.0, 2e-300, 7.25};
  const auto t = loss_map_table(grid, m, {1});
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "loss", "training"}));
  for (std::size_t i = 1; i < 4; ++i)
    EXPECT_TRUE(t.rows[i - 1][0] < t.rows[i][0] || (t.rows[i - 1][0] == t.rows[i][0] && t.rows[i - 1][1] < t.rows[i][1]));
  const auto back = parse_csv(to_csv(t));
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(loss_from_table(back, grid), m.loss);
  // shuffled input rows come out in the same order
  CsvTable s = t;
  std::reverse(s.rows.begin(), s.rows.end());
  sort_rows(s, 2);
  EXPECT_EQ(to_csv(s), to_csv(t));
  EXPECT_THROW(parse_csv("x,y\n1,zz\n"), Error);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(ErrorCode::ValidationError), 1);
  EXPECT_EQ(exit_code_for(ErrorCode::ParseError), 1);
  EXPECT_EQ(exit_code_for(ErrorCode::NoConvergence), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::SolverFailure), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::IoError), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::ChecksumMismatch), 3);
}

#ifdef QPHASE_CLI_PATH
TEST(ExitCodes, Binary) {
  const auto dir = scratch("bin");
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(QPHASE_CLI_PATH) + " -q " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  };
  spit(dir / "ok.yaml", kMinimalDmrg);
  EXPECT_EQ(run("--config " + (dir / "ok.yaml").string() + " --out " + (dir / "ok").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ok" / "result.json"));
  EXPECT_EQ(run("dmrg --config " + (dir / "ok.yaml").string() + " --out " + (dir / "ok2").string()), 0);
  EXPECT_EQ(run("vqe --config " + (dir / "ok.yaml").string()), 1);
  spit(dir / "bad.yaml", "command: dmrg\nmodel: {name: TFIM, length: 4}\n");
  EXPECT_EQ(run("--config " + (dir / "bad.yaml").string()), 1);
  EXPECT_EQ(run("--config " + (dir / "nope.yaml").string()), 3);
  EXPECT_EQ(run(""), 1);
  spit(dir / "stuck.yaml", "command: idmrg\nseed: 1\nmodel: {name: TFIM, length: 2, couplings: {J: 1, g_x: 1}}\n"
                           "solver: {kind: idmrg, max_iterations: 2}\n");
  EXPECT_EQ(run("--config " + (dir / "stuck.yaml").string() + " --out " + (dir / "stuck").string()), 2);
  spit(dir / "unwritable.yaml", std::string(kMinimalDmrg));
  EXPECT_EQ(run("--config " + (dir / "unwritable.yaml").string() + " --out /proc/qphase_cannot_write"), 3);
}
#endif

namespace {

RunConfig small_scan(const fs::path& out) {
  auto cfg = parse_config(R"(command: scan
seed: 21
model: {name: TFIM, length: 6, couplings: {J: -1.0, g_x: 1.0, g_z: 0.02}}
grid: [{axis: g_x, min: 0.2, max: 1.8, steps: 6}]
solver: {kind: dmrg, chi_max: 8}
anomaly: {epochs: 60, batch_size: 2, learning_rate: 0.003, max_rounds: 3}
)");
  cfg.output = out.string();
  return cfg;
}

}  // namespace

TEST(Pipeline, ReplayIsByteIdenticalAcrossWorkerCounts) {
  const auto dir = scratch("replay");
  auto cfg = small_scan(dir / "a");
  cfg.command = Command::Map;
  RunOptions one, three;
  three.workers = 3;
  run_pipeline(cfg, one);
  cfg.output = (dir / "b").string();
  run_pipeline(cfg, three);
  const auto a = tree(dir / "a"), b = tree(dir / "b");
  ASSERT_GT(a.size(), 5u);
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, bytes] : a) {
    if (name == "config.yaml") continue;  // records its own output path
    EXPECT_TRUE(b.count(name) && b.at(name) == bytes) << name;
  }
  EXPECT_TRUE(fs::exists(dir / "a" / "run.log"));
}

TEST(Pipeline, ResumeFinishesAnInterruptedScan) {
  const auto dir = scratch("resume");
  auto cfg = small_scan(dir / "full");
  run_pipeline(cfg, {});
  const auto full = slurp(dir / "full" / "dataset.qpd");

  // interrupted copy: half the points still pending
  cfg.output = (dir / "cut").string();
  fs::create_directories(dir / "cut");
  auto g = load_grid((dir / "full" / "dataset.qpd").string());
  for (std::size_t i = 3; i < g.points.size(); ++i) {
    g.points[i].status = "pending";
    g.points[i].feature = VecD::Zero(g.points[i].feature.size());
  }
  save_grid(g, (dir / "cut" / "dataset.qpd").string(), {{"solver", "dmrg"}, {"model", "TFIM"}});
  RunOptions r;
  r.resume = true;
  run_pipeline(cfg, r);
  EXPECT_EQ(slurp(dir / "cut" / "dataset.qpd"), full);

  // resume from a corrupted container is an I/O-class error
  auto bytes = full;
  bytes[bytes.size() - 3] ^= 0x10;
  spit(dir / "cut" / "dataset.qpd", bytes);
  try {
    run_pipeline(cfg, r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(exit_code_for(e.code()), 3);
  }
}

TEST(Pipeline, CircuitCommandsReplay) {
  const auto dir = scratch("circ");
  auto vqad = parse_config(R"(command: vqad
seed: 2
model: {name: TFIM, length: 4, couplings: {J: 1.0, g_x: 0.2, g_z: 0.1}}
grid: [{axis: g_x, min: 0.2, max: 2.0, steps: 7}]
circuit: {optimizer: parameter_shift_bfgs, train_point: {g_x: 0.2}, p1: 0.001, p2: 0.01, trajectories: 40, shots: 200}
)");
  auto vqe = parse_config(R"(command: vqe
seed: 2
model: {name: TFIM, length: 3, couplings: {J: 1.0, g_x: 0.5, g_z: 0.1}}
grid: [{axis: g_x, min: 0.5, max: 1.5, steps: 3}]
circuit: {layers: 2, entangler: ladder, optimizer: parameter_shift_bfgs, init_scale: 1.0}
)");
  for (auto* c : {&vqad, &vqe}) {
    const std::string name = command_name(c->command);
    c->output = (dir / (name + "1")).string();
    run_pipeline(*c, {});
    c->output = (dir / (name + "2")).string();
    run_pipeline(*c, {});
    auto a = tree(dir / (name + "1")), b = tree(dir / (name + "2"));
    a.erase("config.yaml");
    b.erase("config.yaml");
    EXPECT_EQ(a, b) << name;
  }
  const auto prof = read_csv((dir / "vqad1" / "cost_profile.csv").string());
  EXPECT_EQ(prof.rows.size(), 7u);
  EXPECT_LT(prof.rows[0][1], 0.01);
  const auto en = read_csv((dir / "vqe1" / "energies.csv").string());
  for (const auto& r : en.rows) EXPECT_GE(r[3], -1e-9);
}
