#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "qphase/config.hpp"
#include "qphase/dataset.hpp"
#include "qphase/dmrg.hpp"
#include "qphase/observables.hpp"
#include "qphase/pipeline.hpp"
#include "qphase/vqad.hpp"

namespace py = pybind11;
using namespace qphase;

namespace {

HamiltonianSpec make_spec(const std::string& model, std::size_t length, const std::map<std::string, double>& couplings) {
  HamiltonianSpec s;
  s.model = model_from_string(model);
  s.length = length;
  s.couplings = couplings;
  return s;
}

py::dict dmrg(const std::string& model, std::size_t length, const std::map<std::string, double>& couplings,
              std::size_t chi_max, int max_sweeps, double energy_tol, std::uint64_t seed) {
  DmrgOptions o;
  o.chi_max = chi_max;
  o.max_sweeps = max_sweeps;
  o.energy_tol = energy_tol;
  DmrgResult r;
  {
    py::gil_scoped_release nogil;
    r = dmrg_run(make_spec(model, length, couplings), o, seed);
  }
  std::vector<double> entropy;
  std::vector<std::vector<double>> spectra;
  for (const auto& b : entanglement_profile(r.state)) {
    entropy.push_back(b.entropy);
    spectra.push_back(b.spectrum);
  }
  py::dict d;
  d["energy"] = r.energy;
  d["sweeps"] = r.sweeps;
  d["converged"] = r.converged;
  d["history"] = r.history;
  d["entropy"] = entropy;
  d["spectra"] = spectra;
  return d;
}

void run(const std::string& config_text, std::optional<std::string> out, std::optional<std::uint64_t> seed,
         std::size_t workers, bool resume) {
  RunOptions opts;
  opts.out = out;
  opts.seed = seed;
  opts.workers = workers;
  opts.resume = resume;
  const RunConfig cfg = apply_overrides(parse_config(config_text), opts);
  py::gil_scoped_release nogil;
  run_pipeline(cfg, opts);
}

py::dict load_grid_py(const std::string& path) {
  const LabeledGrid g = load_grid(path);
  const std::size_t n = g.points.size(), dim = g.feature_dim(), ax = g.axis_names.size();
  py::array_t<double> feats({n, dim}), params({n, ax});
  auto f = feats.mutable_unchecked<2>();
  auto p = params.mutable_unchecked<2>();
  std::vector<std::string> status;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim; ++k) f(i, k) = g.points[i].feature[Eigen::Index(k)];
    for (std::size_t k = 0; k < ax; ++k) p(i, k) = g.points[i].params[k];
    status.push_back(g.points[i].status);
  }
  py::dict d;
  d["axis_names"] = g.axis_names;
  d["shape"] = g.shape;
  d["feature_kind"] = std::string(feature_kind_name(g.kind));
  d["features"] = feats;
  d["params"] = params;
  d["status"] = status;
  return d;
}

std::vector<double> vqad_profile(std::size_t n, double J, double gz, double train_gx, const std::vector<double>& gxs,
                                 std::uint64_t seed) {
  py::gil_scoped_release nogil;
  AnsatzParams p;
  const auto c = build_ansatz(AnsatzKind::VqadSyndrome, n, p);
  const auto trash = resolve_trash(n, p);
  VqadConfig cfg;
  cfg.init = std::vector<double>(c.n_params);
  for (std::size_t i = 0; i < cfg.init.size(); ++i) cfg.init[i] = 0.3 * std::sin(2.3 * double(i + 1 + seed));
  const auto t = vqad_train(c, trash, exact_ground(tlfi_hamiltonian(n, J, train_gx, gz)).state, cfg);
  std::vector<Statevector> states;
  for (double g : gxs) states.push_back(exact_ground(tlfi_hamiltonian(n, J, g, gz)).state);
  return vqad_score_line(c, t.theta, trash, states);
}

py::dict vqe(std::size_t n, double J, double gx, double gz, int layers, const std::string& entangler, int restarts,
             std::uint64_t seed) {
  AnsatzParams p;
  p.layers = layers;
  p.entangler = entangler_from_string(entangler);
  const auto circ = build_ansatz(AnsatzKind::VqeHardwareEfficient, n, p);
  const auto h = tlfi_hamiltonian(n, J, gx, gz);
  VqeConfig cfg;
  cfg.optimizer = VqeOptimizer::ParameterShiftBfgs;
  cfg.init_scale = 1.0;
  cfg.restarts = restarts;
  cfg.seed = seed;
  VqeResult r;
  double exact = 0.0;
  {
    py::gil_scoped_release nogil;
    r = vqe_run(h, circ, cfg);
    exact = exact_ground(h).energy;
  }
  py::dict d;
  d["energy"] = r.energy;
  d["exact"] = exact;
  d["theta"] = r.theta;
  d["iterations"] = r.iterations;
  d["circuit"] = circuit_to_json(circ, r.theta);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "qphase native core";
  static py::exception<Error> err(m, "QphaseError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigErrors& e) {
      std::ostringstream s;
      s << e.what();
      for (const auto& i : e.issues()) s << "\n  " << i;
      py::set_error(err, s.str().c_str());
    } catch (const Error& e) {
      py::set_error(err, e.what());
    }
  });

  m.def("model_names", &model_names);
  m.def("dmrg", &dmrg, py::arg("model"), py::arg("length"), py::arg("couplings"), py::arg("chi_max") = 32,
        py::arg("max_sweeps") = 20, py::arg("energy_tol") = 1e-10, py::arg("seed") = 1);
  m.def("normalize_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
        py::arg("text"));
  m.def("run", &run, py::arg("config_text"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
        py::arg("workers") = 1, py::arg("resume") = false);
  m.def("load_grid", &load_grid_py, py::arg("path"));
  m.def("vqad_profile", &vqad_profile, py::arg("length"), py::arg("J"), py::arg("g_z"), py::arg("train_g_x"),
        py::arg("g_x"), py::arg("seed") = 1);
  m.def("tlfi_vqe", &vqe, py::arg("length"), py::arg("J"), py::arg("g_x"), py::arg("g_z"), py::arg("layers") = 3,
        py::arg("entangler") = "ladder", py::arg("restarts") = 2, py::arg("seed") = 1);
}
