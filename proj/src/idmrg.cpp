#include "qphase/idmrg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace qphase {

namespace {

VecC to_vec(const DenseTensor& t) { return Eigen::Map<const VecC>(t.raw(), t.size()); }

DenseTensor from_vec(const VecC& v, const Shape& shape) {
  DenseTensor t(shape);
  Eigen::Map<VecC>(t.raw(), t.size()) = v;
  return t;
}

DenseTensor from_mat(const MatC& m, std::size_t l, std::size_t d, std::size_t r) {
  DenseTensor t({l, d, r});
  Eigen::Map<MatC>(t.raw(), m.rows(), m.cols()) = m;
  return t;
}

// (x, b, y) boundary vector selecting automaton state `b`.
DenseTensor boundary_env(std::size_t D, std::size_t b) {
  DenseTensor e({1, D, 1});
  e[b] = 1.0;
  return e;
}

// out = L W1 W2 R theta for theta (l, s1, s2, r).
DenseTensor two_site_apply(const DenseTensor& le, const DenseTensor& w1, const DenseTensor& w2,
                           const DenseTensor& re, const DenseTensor& theta) {
  DenseTensor t1 = contract(le, {2}, theta, {0});      // (x, b, s1, s2, y')
  DenseTensor t2 = contract(t1, {1, 2}, w1, {0, 3});   // (x, s2, y', b1, o1)
  DenseTensor t3 = contract(t2, {3, 1}, w2, {0, 3});   // (x, y', o1, b2, o2)
  return contract(t3, {1, 3}, re, {2, 1});             // (x, o1, o2, x')
}

struct Split {
  DenseTensor u, vh;
  std::vector<double> s;
  double energy = 0.0;
};

Split optimize_bond(const DenseTensor& le, const DenseTensor& w1, const DenseTensor& w2, const DenseTensor& re,
                    const DenseTensor& a, const DenseTensor& b, const TruncationPolicy& policy,
                    const LanczosOptions& lopts) {
  const DenseTensor theta = contract(a, {2}, b, {0});
  const Shape shape = theta.shape();
  LinearOp op = [&](const VecC& v) { return to_vec(two_site_apply(le, w1, w2, re, from_vec(v, shape))); };
  VecC v0 = to_vec(theta);
  if (!(v0.norm() > 1e-300)) v0 = VecC::Ones(v0.size());
  const LanczosResult r = lanczos_ground(op, v0, lopts);
  const DenseTensor opt = from_vec(r.vector, shape);
  MatSvd sv = svd_truncated(opt.as_matrix(2), policy);
  const std::size_t l = shape[0], d1 = shape[1], d2 = shape[2], rr = shape[3], k = sv.s.size();
  Split out;
  out.u = from_mat(sv.u, l, d1, k);
  out.vh = from_mat(sv.vh, k, d2, rr);
  out.s.assign(sv.s.data(), sv.s.data() + k);
  out.energy = r.value;
  return out;
}

DenseTensor absorb_s_right(const Split& sp) { return absorb_right(sp.u, sp.s); }
DenseTensor absorb_s_left(const Split& sp) { return absorb_left(sp.vh, sp.s); }

// Brings a window into right-canonical form with the norm on site 0.
void right_canonicalize(std::vector<DenseTensor>& t) {
  for (std::size_t k = t.size(); k-- > 1;) {
    const std::size_t l = t[k].dim(0), d = t[k].dim(1), r = t[k].dim(2);
    auto [q, rr] = qr_reduced(MatC(t[k].as_matrix(1).adjoint()));
    const std::size_t m = q.cols();
    t[k] = from_mat(MatC(q.adjoint()), m, d, r);
    const MatC prev = t[k - 1].as_matrix(2) * rr.adjoint();
    t[k - 1] = from_mat(prev, t[k - 1].dim(0), t[k - 1].dim(1), m);
    (void)l;
  }
  const double n = t[0].norm();
  if (n > 0) t[0] *= cplx(1.0 / n);
}

// Two-site sweeps over a window between fixed environments. On return the
// first half holds left-orthonormal tensors, the second half right-orthonormal
// ones, and `lam` the Schmidt values on the middle bond.
double optimize_window(const DenseTensor& lenv, const DenseTensor& renv, const std::vector<DenseTensor>& ws,
                       std::vector<DenseTensor>& t, int sweeps, const TruncationPolicy& policy,
                       const LanczosOptions& lopts, std::vector<double>& lam) {
  const std::size_t n = t.size(), h = n / 2;
  right_canonicalize(t);
  std::vector<DenseTensor> lw(n), rw(n);
  lw[0] = lenv;
  rw[n - 1] = renv;
  for (std::size_t k = n - 1; k >= 1; --k) rw[k - 1] = env_right_step(rw[k], t[k], ws[k]);

  if (n == 2) {
    Split sp = optimize_bond(lw[0], ws[0], ws[1], rw[1], t[0], t[1], policy, lopts);
    t[0] = sp.u;
    t[1] = sp.vh;
    lam = sp.s;
    return sp.energy;
  }
  double e = 0.0;
  for (int s = 0; s < sweeps; ++s) {
    const bool last = (s + 1 == sweeps);
    for (std::size_t b = 0; b + 1 < n; ++b) {
      Split sp = optimize_bond(lw[b], ws[b], ws[b + 1], rw[b + 1], t[b], t[b + 1], policy, lopts);
      e = sp.energy;
      if (b + 2 < n) {
        t[b] = sp.u;
        t[b + 1] = absorb_s_left(sp);
        lw[b + 1] = env_left_step(lw[b], t[b], ws[b]);
      } else {
        t[b] = absorb_s_right(sp);
        t[b + 1] = sp.vh;
        rw[b] = env_right_step(rw[b + 1], t[b + 1], ws[b + 1]);
      }
    }
    const std::size_t stop = last ? h - 1 : 0;
    for (std::size_t b = n - 2; b-- > stop;) {
      Split sp = optimize_bond(lw[b], ws[b], ws[b + 1], rw[b + 1], t[b], t[b + 1], policy, lopts);
      e = sp.energy;
      if (last && b == stop) {
        t[b] = sp.u;
        t[b + 1] = sp.vh;
        lam = sp.s;
      } else {
        t[b] = absorb_s_right(sp);
        t[b + 1] = sp.vh;
        rw[b] = env_right_step(rw[b + 1], t[b + 1], ws[b + 1]);
      }
    }
  }
  return e;
}

double lambda_distance(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::max(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = i < a.size() ? a[i] : 0.0, y = i < b.size() ? b[i] : 0.0;
    s += (x - y) * (x - y);
  }
  return std::sqrt(s);
}

}  // namespace

std::vector<DenseTensor> bulk_mpo_cell(const HamiltonianSpec& spec) {
  if (spec.model == ModelKind::Custom) throw Error(ErrorCode::ConfigError, "infinite chains need a named model");
  const std::size_t n = spec.length;
  HamiltonianSpec big = spec;
  big.length = 3 * n;
  const Mpo mpo = build_mpo(big);
  return std::vector<DenseTensor>(mpo.ws.begin() + n, mpo.ws.begin() + 2 * n);
}

IdmrgResult idmrg_run(const HamiltonianSpec& spec, const IdmrgOptions& opts) {
  const std::size_t n = spec.length;
  if (n < 2 || n % 2 != 0) throw Error(ErrorCode::ConfigError, "unit cell must be even and >= 2");
  if (opts.max_iterations < 1 || opts.cell_sweeps < 1)
    throw Error(ErrorCode::ConfigError, "max_iterations and cell_sweeps must be positive");
  spec.validate();
  const std::size_t h = n / 2, d = spec.phys_dim();
  const std::vector<DenseTensor> cell = bulk_mpo_cell(spec);
  const std::size_t D = cell[0].dim(0);
  const TruncationPolicy policy{opts.chi_max, opts.eps, true};

  DenseTensor lenv = boundary_env(D, D - 1), renv = boundary_env(D, 0);
  std::vector<DenseTensor> window = random_mps(n, d, opts.chi_max, opts.seed).gammas;
  std::vector<double> lam, lam_prev{1.0};
  std::vector<std::vector<double>> lam_hist;
  IdmrgResult res;
  double e_prev = 0.0, e_site_prev = std::numeric_limits<double>::quiet_NaN();
  std::size_t offset = 0;  // absolute position of the first window site

  for (int it = 0; it < opts.max_iterations; ++it) {
    std::vector<DenseTensor> ws(n);
    for (std::size_t j = 0; j < n; ++j) ws[j] = cell[(offset + j) % n];
    if (it > 0) {
      // Predicted window: Λ B ... B Λprev⁻¹ A ... A Λ.
      std::vector<DenseTensor> guess(n);
      for (std::size_t j = 0; j < h; ++j) guess[j] = window[h + j];
      for (std::size_t j = 0; j < h; ++j) guess[h + j] = window[j];
      guess[0] = absorb_left(guess[0], lam);
      guess[h] = absorb_left(guess[h], pseudo_inverse(lam_prev));
      guess[n - 1] = absorb_right(guess[n - 1], lam);
      window = std::move(guess);
    }
    std::vector<double> lam_new;
    const int sweeps = it == 0 ? std::max(2, opts.cell_sweeps) : opts.cell_sweeps;
    const double e = optimize_window(lenv, renv, ws, window, sweeps, policy, opts.lanczos, lam_new);

    IdmrgStep step;
    step.iteration = it;
    step.energy_per_site = it == 0 ? e / double(n) : (e - e_prev) / double(n);
    lam_hist.push_back(lam_new);
    step.lambda_distance = lam_hist.size() >= 3 ? lambda_distance(lam_new, lam_hist[lam_hist.size() - 3])
                                                 : std::numeric_limits<double>::infinity();
    res.history.push_back(step);

    const bool done = it >= 2 && std::abs(step.energy_per_site - e_site_prev) < opts.energy_tol &&
                      step.lambda_distance < opts.lambda_tol;
    e_prev = e;
    e_site_prev = step.energy_per_site;
    if (it > 0) lam_prev = lam;
    lam = lam_new;
    if (done) {
      res.converged = true;
      break;
    }
    if (it + 1 == opts.max_iterations) break;
    for (std::size_t j = 0; j < h; ++j) lenv = env_left_step(lenv, window[j], ws[j]);
    for (std::size_t j = n; j-- > h;) renv = env_right_step(renv, window[j], ws[j]);
    offset += h;
  }

  if (!res.converged && opts.throw_on_no_convergence) {
    std::ostringstream os;
    os << "iDMRG did not reach the fixed point in " << opts.max_iterations
       << " iterations; last lambda distance " << res.history.back().lambda_distance;
    throw Error(ErrorCode::NoConvergence, os.str());
  }

  // The converged window repeats as A..A Λ B..B Λprev⁻¹.
  std::vector<DenseTensor> raw(window);
  raw[h - 1] = absorb_right(raw[h - 1], lam);
  raw[n - 1] = absorb_right(raw[n - 1], pseudo_inverse(lam_prev));
  ImpsState st;
  st.unit_cell = n;
  st.phys_dim = d;
  st.gammas.resize(n);
  st.lambdas.resize(n);
  const std::size_t s0 = offset % n;
  for (std::size_t t = 0; t < n; ++t) {
    st.gammas[t] = raw[(t + n - s0) % n];
    st.lambdas[t].assign(st.gammas[t].dim(0), 1.0);
  }
  res.state = canonicalize_imps(st, policy);
  res.energy_per_site = res.history.back().energy_per_site;
  res.center_lambda = lam;
  return res;
}

double correlation_length(const ImpsState& state) {
  const std::vector<cplx> mu = imps_transfer_spectrum(state, 2);
  if (mu.size() < 2) return 0.0;
  const double r = std::abs(mu[1]) / std::abs(mu[0]);
  if (r < 1e-12) return 0.0;
  if (r >= 1.0) return std::numeric_limits<double>::infinity();
  return -double(state.unit_cell) / std::log(r);
}

std::vector<double> imps_bond_energies(const ImpsState& state, const HamiltonianSpec& spec) {
  state.validate();
  HamiltonianSpec cellspec = spec;
  cellspec.length = state.unit_cell;
  const std::vector<MatC> hs = bond_hamiltonians(local_terms(cellspec), true);
  const std::size_t n = state.unit_cell, d = state.phys_dim;
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    const DenseTensor a = absorb_left(state.b_tensor(i), state.lambdas[i]);
    const DenseTensor theta = contract(a, {2}, state.b_tensor(i + 1), {0});  // (l, s1, s2, r)
    const std::size_t l = theta.dim(0), r = theta.dim(3);
    double e = 0.0;
    for (std::size_t x = 0; x < l; ++x)
      for (std::size_t y = 0; y < r; ++y) {
        VecC v(d * d);
        for (std::size_t s = 0; s < d * d; ++s) v[s] = theta[(x * d * d + s) * r + y];
        e += std::real(v.dot(hs[i] * v));
      }
    out.push_back(e);
  }
  return out;
}

}  // namespace qphase
