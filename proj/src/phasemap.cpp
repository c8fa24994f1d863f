#include "qphase/phasemap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "qphase/random.hpp"

namespace qphase {

double GridAxis::value(std::size_t i) const {
  if (steps < 2) return min;
  return min + (max - min) * double(i) / double(steps - 1);
}

void ParameterGrid::validate() const {
  if (axes.empty()) throw Error(ErrorCode::ConfigError, "grid needs at least one axis");
  std::set<std::string> names;
  for (const auto& a : axes) {
    if (a.steps < 2) throw Error(ErrorCode::ConfigError, "axis '" + a.name + "' needs steps >= 2");
    if (!(a.min < a.max)) throw Error(ErrorCode::ConfigError, "axis '" + a.name + "' needs min < max");
    if (!names.insert(a.name).second) throw Error(ErrorCode::ConfigError, "duplicate axis '" + a.name + "'");
  }
}

std::size_t ParameterGrid::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.steps;
  return axes.empty() ? 0 : n;
}

std::vector<std::size_t> ParameterGrid::shape() const {
  std::vector<std::size_t> s;
  for (const auto& a : axes) s.push_back(a.steps);
  return s;
}

std::vector<std::size_t> ParameterGrid::unravel(std::size_t flat) const {
  std::vector<std::size_t> idx(axes.size());
  for (std::size_t k = axes.size(); k-- > 0;) {
    idx[k] = flat % axes[k].steps;
    flat /= axes[k].steps;
  }
  return idx;
}

std::size_t ParameterGrid::ravel(const std::vector<std::size_t>& idx) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < axes.size(); ++k) flat = flat * axes[k].steps + idx[k];
  return flat;
}

std::vector<double> ParameterGrid::point(std::size_t flat) const {
  const auto idx = unravel(flat);
  std::vector<double> p;
  for (std::size_t k = 0; k < axes.size(); ++k) p.push_back(axes[k].value(idx[k]));
  return p;
}

std::vector<std::size_t> ParameterGrid::neighbours(std::size_t flat) const {
  std::vector<std::size_t> out;
  auto idx = unravel(flat);
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (idx[k] > 0) {
      --idx[k];
      out.push_back(ravel(idx));
      ++idx[k];
    }
    if (idx[k] + 1 < axes[k].steps) {
      ++idx[k];
      out.push_back(ravel(idx));
      --idx[k];
    }
  }
  return out;
}

SolverKind solver_from_string(const std::string& s) {
  if (s == "dmrg") return SolverKind::DMRG;
  if (s == "idmrg") return SolverKind::IDMRG;
  if (s == "tebd") return SolverKind::TEBD;
  throw Error(ErrorCode::ConfigError, "unknown solver '" + s + "' (valid: dmrg, idmrg, tebd)");
}

const char* solver_name(SolverKind s) {
  switch (s) {
    case SolverKind::DMRG: return "dmrg";
    case SolverKind::IDMRG: return "idmrg";
    case SolverKind::TEBD: return "tebd";
  }
  return "?";
}

std::size_t ScanOptions::chi_max() const {
  switch (solver) {
    case SolverKind::DMRG: return dmrg.chi_max;
    case SolverKind::IDMRG: return idmrg.chi_max;
    case SolverKind::TEBD: return tebd.policy.chi_max;
  }
  return dmrg.chi_max;
}

namespace {

const std::map<ModelKind, std::set<std::string>>& bindable() {
  static const std::map<ModelKind, std::set<std::string>> m = {
      {ModelKind::TFIM, {"J", "g_x", "g_z"}},
      {ModelKind::Heisenberg, {"J", "J_x", "J_y", "J_z", "h"}},
      {ModelKind::ExtendedBoseHubbard, {"t", "U", "V", "mu"}},
      {ModelKind::DEBHM, {"J", "delta_J", "V", "U", "mu"}},
  };
  return m;
}

VecD central_feature(const DenseTensor& a, std::size_t chi) {
  const std::size_t l = a.dim(0), d = a.dim(1), r = a.dim(2);
  VecD v = VecD::Zero(chi * d * chi);
  for (std::size_t i = 0; i < std::min(l, chi); ++i)
    for (std::size_t s = 0; s < d; ++s)
      for (std::size_t j = 0; j < std::min(r, chi); ++j) v[(i * d + s) * chi + j] = std::abs(a.at({i, s, j}));
  return v;
}

VecD finite_feature(const MpsState& st, const ScanOptions& o) {
  const std::size_t L = st.length, chi = o.chi_max();
  const std::size_t c = L / 2;
  switch (o.feature) {
    case FeatureKind::EntanglementSpectrum:
      return spectrum_feature(st.lambdas[c], chi);
    case FeatureKind::CentralTensor: {
      const std::size_t s = std::min(c, L - 1);
      return central_feature(absorb_right(absorb_left(st.gammas[s], st.lambdas[s]), st.lambdas[s + 1]), chi);
    }
    case FeatureKind::CorrelatorRows: {
      const auto m = correlator_matrix(st, o.correlator);
      VecD v(L * L);
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < L; ++j) v[i * L + j] = m[i][j].real();
      return v;
    }
  }
  return {};
}

VecD infinite_feature(const ImpsState& st, const ScanOptions& o) {
  const std::size_t chi = o.chi_max();
  switch (o.feature) {
    case FeatureKind::EntanglementSpectrum:
      return spectrum_feature(st.lambdas[0], chi);
    case FeatureKind::CentralTensor:
      return central_feature(absorb_right(absorb_left(st.gammas[0], st.lambdas[0]), st.lambdas[1 % st.unit_cell]),
                             chi);
    case FeatureKind::CorrelatorRows: {
      const std::size_t d = st.phys_dim, R = o.correlation_range, n = st.unit_cell;
      std::vector<std::size_t> dist(R);
      for (std::size_t r = 0; r < R; ++r) dist[r] = r + 1;
      VecD v(R);
      if (o.correlator == CorrelatorKind::SF) {
        const auto c = imps_correlation(st, local_operator("bdag", d), local_operator("b", d), dist);
        for (std::size_t r = 0; r < R; ++r) v[r] = c[r].real();
        return v;
      }
      if (o.correlator == CorrelatorKind::HI)
        throw Error(ErrorCode::ConfigError, "string correlator rows are only available for finite chains");
      const MatC nop = local_operator("n", d);
      const auto c = imps_correlation(st, nop, nop, dist);
      const double n0 = imps_local_expectation(st, nop, 0).real();
      for (std::size_t r = 0; r < R; ++r) {
        const double nr = imps_local_expectation(st, nop, (r + 1) % n).real();
        v[r] = ((r + 1) % 2 ? -1.0 : 1.0) * (c[r].real() - n0 * nr);
      }
      return v;
    }
  }
  return {};
}

}  // namespace

HamiltonianSpec bind_point(const HamiltonianSpec& tmpl, const ParameterGrid& grid, std::size_t flat) {
  const auto it = bindable().find(tmpl.model);
  if (it == bindable().end()) throw Error(ErrorCode::ConfigError, "custom models cannot be scanned");
  HamiltonianSpec s = tmpl;
  const auto p = grid.point(flat);
  for (std::size_t k = 0; k < grid.axes.size(); ++k) {
    if (!it->second.count(grid.axes[k].name))
      throw Error(ErrorCode::ConfigError,
                  "axis '" + grid.axes[k].name + "' is not a coupling of model " + model_name(tmpl.model));
    s.couplings[grid.axes[k].name] = p[k];
  }
  return s;
}

VecD compute_feature(const HamiltonianSpec& spec, const ScanOptions& opts, std::uint64_t point_seed) {
  switch (opts.solver) {
    case SolverKind::DMRG:
      return finite_feature(dmrg_run(spec, opts.dmrg, point_seed).state, opts);
    case SolverKind::TEBD: {
      const MpsState init = canonicalize(random_mps(spec.length, spec.phys_dim(), std::min<std::size_t>(4, opts.chi_max()),
                                                    point_seed),
                                         CanonicalForm::Vidal);
      return finite_feature(imaginary_time_ground_state(spec, init, opts.tebd).state, opts);
    }
    case SolverKind::IDMRG: {
      IdmrgOptions o = opts.idmrg;
      o.seed = point_seed;
      return infinite_feature(idmrg_run(spec, o).state, opts);
    }
  }
  return {};
}

LabeledGrid scan_grid(const HamiltonianSpec& tmpl, const ParameterGrid& grid, const ScanOptions& opts,
                      const LabeledGrid* resume, const ScanProgress& progress) {
  grid.validate();
  const std::size_t n = grid.size();
  for (std::size_t i = 0; i < n; ++i) bind_point(tmpl, grid, i).validate();

  LabeledGrid out;
  for (const auto& a : grid.axes) out.axis_names.push_back(a.name);
  out.shape = grid.shape();
  out.kind = opts.feature;
  out.points.resize(n);
  std::vector<char> todo(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    out.points[i].params = grid.point(i);
    out.points[i].status = "pending";
    if (resume && i < resume->points.size() && resume->points[i].ok() &&
        resume->points[i].params == out.points[i].params) {
      out.points[i] = resume->points[i];
      todo[i] = 0;
    }
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      if (!todo[i]) continue;
      GridPoint p;
      p.params = grid.point(i);
      try {
        p.feature = compute_feature(bind_point(tmpl, grid, i), opts, derive_seed(opts.seed, 0x5ca9, i));
        p.status = "ok";
      } catch (const std::exception& e) {
        p.status = std::string("solver failure: ") + e.what();
      }
      std::lock_guard<std::mutex> lock(mu);
      out.points[i] = std::move(p);
      if (progress) progress(out, i);
    }
  };
  const std::size_t nw = std::max<std::size_t>(1, std::min(opts.workers, n));
  if (nw == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::size_t dim = 0;
  for (const auto& p : out.points)
    if (p.ok()) dim = std::max<std::size_t>(dim, p.feature.size());
  for (auto& p : out.points)
    if (!p.ok()) p.feature = VecD::Zero(dim);
  out.validate();
  return out;
}

bool Box::contains(const std::vector<double>& p) const {
  const double tol = 1e-12;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] < lo[k] - tol || p[k] > hi[k] + tol) return false;
  return true;
}

double region_threshold(const LossMap& map, double k_sigma, double floor_factor, double rise_fraction,
                        const std::vector<bool>* valid) {
  double t = std::max(map.train_mean + k_sigma * map.train_std, floor_factor * map.train_mean);
  if (rise_fraction > 0) {
    double mx = map.train_mean;
    for (std::size_t i = 0; i < map.loss.size(); ++i)
      if (!valid || (*valid)[i]) mx = std::max(mx, map.loss[i]);
    t = std::max(t, map.train_mean + rise_fraction * (mx - map.train_mean));
  }
  return t;
}

std::vector<Region> extract_regions(const LossMap& map, const ParameterGrid& grid, double threshold,
                                    const std::vector<bool>* valid) {
  const std::size_t n = map.loss.size();
  if (n != grid.size()) throw Error(ErrorCode::DimMismatch, "loss map does not cover the grid");
  auto above = [&](std::size_t i) { return (!valid || (*valid)[i]) && map.loss[i] > threshold; };
  std::vector<char> seen(n, 0);
  std::vector<Region> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s] || !above(s)) continue;
    Region r;
    std::vector<std::size_t> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      r.points.push_back(i);
      r.max_loss = std::max(r.max_loss, map.loss[i]);
      for (auto j : grid.neighbours(i))
        if (!seen[j] && above(j)) {
          seen[j] = 1;
          stack.push_back(j);
        }
    }
    std::sort(r.points.begin(), r.points.end());
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const Region& a, const Region& b) { return a.max_loss > b.max_loss; });
  return out;
}

std::vector<BoundaryPoint> extract_boundary(const ParameterGrid& grid, const std::vector<Region>& regions,
                                            const std::vector<bool>* valid) {
  std::vector<char> in(grid.size(), 0);
  for (const auto& r : regions)
    for (auto i : r.points) in[i] = 1;
  std::vector<BoundaryPoint> out;
  for (const auto& r : regions)
    for (auto i : r.points) {
      const auto ii = grid.unravel(i);
      for (auto j : grid.neighbours(i)) {
        if (in[j] || (valid && !(*valid)[j])) continue;
        const auto jj = grid.unravel(j);
        BoundaryPoint b;
        b.inside = i;
        b.outside = j;
        for (std::size_t k = 0; k < ii.size(); ++k)
          if (ii[k] != jj[k]) b.axis = k;
        const auto pi = grid.point(i), pj = grid.point(j);
        for (std::size_t k = 0; k < pi.size(); ++k) b.params.push_back(0.5 * (pi[k] + pj[k]));
        out.push_back(std::move(b));
      }
    }
  std::sort(out.begin(), out.end(), [](const BoundaryPoint& a, const BoundaryPoint& b) {
    return std::tie(a.inside, a.outside) < std::tie(b.inside, b.outside);
  });
  return out;
}

std::vector<std::size_t> boundary_valleys(const LossMap& map, const ParameterGrid& grid,
                                          const std::vector<Region>& regions) {
  std::vector<char> near(grid.size(), 0);
  for (const auto& b : extract_boundary(grid, regions)) near[b.outside] = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!near[i]) continue;
    const auto idx = grid.unravel(i);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] == 0 || idx[k] + 1 >= grid.axes[k].steps) continue;
      auto lo = idx, hi = idx;
      --lo[k];
      ++hi[k];
      if (map.loss[i] < map.loss[grid.ravel(lo)] && map.loss[i] < map.loss[grid.ravel(hi)]) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

ParameterGrid grid_from_dataset(const LabeledGrid& data) {
  data.validate();
  ParameterGrid g;
  for (std::size_t k = 0; k < data.axis_names.size(); ++k) {
    GridAxis a;
    a.name = data.axis_names[k];
    a.steps = data.shape.at(k);
    a.min = 1e300;
    a.max = -1e300;
    for (const auto& p : data.points) {
      a.min = std::min(a.min, p.params.at(k));
      a.max = std::max(a.max, p.params.at(k));
    }
    g.axes.push_back(a);
  }
  g.validate();
  if (g.size() != data.points.size()) throw Error(ErrorCode::DimMismatch, "dataset does not fill its grid");
  return g;
}

Box initial_training_box(const ParameterGrid& grid, double fraction, bool random, std::uint64_t seed) {
  Box b;
  Rng rng(derive_seed(seed, 0xb0c5));
  for (const auto& a : grid.axes) {
    const double step = (a.max - a.min) / double(a.steps - 1);
    const double width = std::max(fraction * (a.max - a.min), 0.0);
    // at least one grid point per axis
    const std::size_t cells = std::min<std::size_t>(a.steps - 1, std::size_t(std::floor(width / step + 1e-9)));
    const std::size_t start = random ? rng.below(a.steps - cells) : 0;
    b.lo.push_back(a.value(start));
    b.hi.push_back(a.value(start + cells));
  }
  return b;
}

namespace {

Autoencoder make_model(std::size_t dim, const Algorithm1Config& cfg, std::uint64_t seed) {
  if (!cfg.layer_dims.empty()) {
    if (cfg.layer_dims.front() != dim) throw Error(ErrorCode::DimMismatch, "layer_dims do not match the feature length");
    return make_autoencoder(cfg.layer_dims, Activation::ReLU, Activation::Identity, seed);
  }
  if (dim >= 4) return default_autoencoder(dim, seed);
  return make_autoencoder({dim, std::max<std::size_t>(1, dim / 2), dim}, Activation::ReLU, Activation::Identity,
                          seed);
}

Box bounding_box(const LabeledGrid& data, const std::vector<std::size_t>& pts) {
  Box b;
  const std::size_t na = data.axis_names.size();
  b.lo.assign(na, 1e300);
  b.hi.assign(na, -1e300);
  for (auto i : pts)
    for (std::size_t k = 0; k < na; ++k) {
      b.lo[k] = std::min(b.lo[k], data.points[i].params[k]);
      b.hi[k] = std::max(b.hi[k], data.points[i].params[k]);
    }
  return b;
}

}  // namespace

PhaseMapResult run_algorithm1(const LabeledGrid& data, const Algorithm1Config& cfg) {
  const ParameterGrid grid = grid_from_dataset(data);
  const std::size_t n = data.points.size();
  std::vector<bool> valid(n);
  for (std::size_t i = 0; i < n; ++i) valid[i] = data.points[i].ok();
  const std::vector<VecD> feats = data.features();

  PhaseMapResult res;
  std::vector<char> used(n, 0);
  Box box = initial_training_box(grid, cfg.initial_fraction, cfg.random_initial, cfg.seed);
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < n; ++i)
    if (valid[i] && box.contains(data.points[i].params)) train_idx.push_back(i);
  if (train_idx.empty()) throw Error(ErrorCode::ConfigError, "initial training region holds no valid points");

  for (int round = 0;; ++round) {
    Round r;
    r.index = round;
    r.seed = derive_seed(cfg.seed, 0xa1, std::uint64_t(round));
    r.training_region = box;
    r.training_indices = train_idx;
    for (auto i : train_idx) used[i] = 1;

    Autoencoder ae = make_model(data.feature_dim(), cfg, r.seed);
    TrainConfig tc = cfg.train;
    tc.seed = r.seed;
    std::vector<VecD> ts;
    for (auto i : train_idx) ts.push_back(feats[i]);
    r.training = train(ae, ts, tc);
    r.map = score_map(ae, feats, train_idx);
    r.threshold = region_threshold(r.map, cfg.k_sigma, cfg.floor_factor, cfg.rise_fraction, &valid);
    r.regions = extract_regions(r.map, grid, r.threshold, &valid);
    r.boundary = extract_boundary(grid, r.regions, &valid);
    r.valleys = boundary_valleys(r.map, grid, r.regions);

    const Region* pick = nullptr;
    for (const auto& reg : r.regions) {
      bool disjoint = true;
      for (auto i : reg.points) disjoint = disjoint && !used[i];
      if (disjoint) {
        pick = &reg;
        break;
      }
    }
    res.rounds.push_back(r);
    if (!pick) {
      res.stop_reason = r.regions.empty() ? "no high-loss region" : "all high-loss regions already trained on";
      break;
    }
    if (round + 1 >= cfg.max_rounds) {
      res.stop_reason = "round cap reached";
      break;
    }
    train_idx = pick->points;
    box = bounding_box(data, train_idx);
  }
  return res;
}

}  // namespace qphase
