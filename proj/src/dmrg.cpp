#include "qphase/dmrg.hpp"

#include <cmath>

namespace qphase {

namespace {

VecC to_vec(const DenseTensor& t) { return Eigen::Map<const VecC>(t.raw(), t.size()); }

DenseTensor from_vec(const VecC& v, const Shape& shape) {
  DenseTensor t(shape);
  Eigen::Map<VecC>(t.raw(), t.size()) = v;
  return t;
}

DenseTensor unit_env() { return DenseTensor({1, 1, 1}, {cplx(1.0)}); }

}  // namespace

DmrgEngine::DmrgEngine(Mpo mpo, const MpsState& initial, DmrgOptions options)
    : mpo_(std::move(mpo)), opts_(options) {
  if (mpo_.length() != initial.length || mpo_.phys_dim != initial.phys_dim)
    throw Error(ErrorCode::ShapeMismatch, "MPO and initial state sizes differ");
  if (opts_.max_sweeps < 1 || !(opts_.energy_tol > 0))
    throw Error(ErrorCode::ConfigError, "max_sweeps >= 1 and energy_tol > 0 required");
  TruncationPolicy keep_all{opts_.chi_max, 0.0, true};
  MpsState right = canonicalize(initial, CanonicalForm::Right, keep_all);
  const std::size_t L = right.length;
  m_ = right.gammas;
  left_.assign(L, unit_env());
  right_.assign(L, unit_env());
  for (std::size_t i = L; i-- > 1;) right_[i - 1] = env_right_step(right_[i], m_[i], mpo_.ws[i]);
  center_ = 0;
}

DenseTensor DmrgEngine::effective_apply(std::size_t site, const DenseTensor& m) const {
  if (site >= m_.size()) throw Error(ErrorCode::SiteOutOfRange, "site outside chain");
  const DenseTensor& le = left_[site];
  const DenseTensor& re = right_[site];
  const DenseTensor& w = mpo_.ws[site];
  if (m.rank() != 3 || m.dim(0) != le.dim(2) || m.dim(1) != w.dim(3) || m.dim(2) != re.dim(2))
    throw Error(ErrorCode::ShapeMismatch, "site tensor does not match environments");
  DenseTensor t1 = contract(le, {2}, m, {0});         // (x, b, t, y')
  DenseTensor t2 = contract(t1, {1, 2}, w, {0, 3});   // (x, y', b', s)
  return contract(t2, {1, 2}, re, {2, 1});  // (x, s, x')
}

MatC DmrgEngine::effective_matrix(std::size_t site) const {
  const Shape shape = m_.at(site).shape();
  const std::size_t n = shape_product(shape);
  MatC h(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    DenseTensor e(shape);
    e[c] = 1.0;
    const DenseTensor col = effective_apply(site, e);
    for (std::size_t r = 0; r < n; ++r) h(r, c) = col[r];
  }
  return h;
}

double DmrgEngine::optimize_site(std::size_t site) {
  const Shape shape = m_[site].shape();
  LinearOp op = [&](const VecC& v) { return to_vec(effective_apply(site, from_vec(v, shape))); };
  LanczosResult r = lanczos_ground(op, to_vec(m_[site]), opts_.lanczos);
  m_[site] = from_vec(r.vector, shape);
  local_energies_.push_back(r.value);
  return r.value;
}

void DmrgEngine::move_right(std::size_t site) {
  const DenseTensor& m = m_[site];
  const std::size_t l = m.dim(0), d = m.dim(1), r = m.dim(2);
  auto [q, rr] = qr_reduced(m.as_matrix(2));
  const std::size_t k = q.cols();
  DenseTensor a({l, d, k});
  Eigen::Map<MatC>(a.raw(), l * d, k) = q;
  m_[site] = a;
  const MatC next = rr * m_[site + 1].as_matrix(1);
  DenseTensor n({k, d, m_[site + 1].dim(2)});
  Eigen::Map<MatC>(n.raw(), next.rows(), next.cols()) = next;
  m_[site + 1] = n;
  left_[site + 1] = env_left_step(left_[site], m_[site], mpo_.ws[site]);
  (void)r;
  center_ = site + 1;
}

void DmrgEngine::move_left(std::size_t site) {
  const DenseTensor& m = m_[site];
  const std::size_t l = m.dim(0), d = m.dim(1), r = m.dim(2);
  // LQ via QR of the adjoint.
  auto [q, rr] = qr_reduced(MatC(m.as_matrix(1).adjoint()));
  const std::size_t k = q.cols();
  const MatC b = q.adjoint();  // (k, d*r)
  DenseTensor bt({k, d, r});
  Eigen::Map<MatC>(bt.raw(), k, d * r) = b;
  m_[site] = bt;
  const MatC prev = m_[site - 1].as_matrix(2) * rr.adjoint();
  DenseTensor p({m_[site - 1].dim(0), d, k});
  Eigen::Map<MatC>(p.raw(), prev.rows(), prev.cols()) = prev;
  m_[site - 1] = p;
  right_[site - 1] = env_right_step(right_[site], m_[site], mpo_.ws[site]);
  (void)l;
  center_ = site - 1;
}

double DmrgEngine::sweep() {
  const std::size_t L = m_.size();
  double e = 0.0;
  if (L == 1) return optimize_site(0);
  // The engine always starts a sweep with the center at site 0.
  for (std::size_t i = 0; i + 1 < L; ++i) {
    e = optimize_site(i);
    move_right(i);
  }
  for (std::size_t i = L - 1; i >= 1; --i) {
    e = optimize_site(i);
    move_left(i);
  }
  return e;
}

DmrgResult DmrgEngine::run() {
  DmrgResult res;
  double prev = 0.0;
  for (int s = 0; s < opts_.max_sweeps; ++s) {
    const double e = sweep();
    res.history.push_back(e);
    res.sweeps = s + 1;
    if (s > 0 && std::abs(e - prev) < opts_.energy_tol) {
      res.converged = true;
      break;
    }
    prev = e;
  }
  res.energy = res.history.back();
  res.state = state();
  return res;
}

MpsState DmrgEngine::state() const {
  MpsState raw;
  raw.length = m_.size();
  raw.phys_dim = mpo_.phys_dim;
  raw.form = CanonicalForm::None;
  raw.gammas = m_;
  for (const auto& g : m_) raw.lambdas.emplace_back(g.dim(0), 1.0);
  raw.lambdas.emplace_back(1, 1.0);
  return canonicalize(raw, CanonicalForm::Vidal, TruncationPolicy{opts_.chi_max, opts_.eps, true});
}

double DmrgEngine::env_consistency_error() const {
  const std::size_t L = m_.size();
  double err = 0.0;
  DenseTensor env = unit_env();
  for (std::size_t i = 0; i < center_; ++i) {
    env = env_left_step(env, m_[i], mpo_.ws[i]);
    err = std::max(err, max_abs_diff(env, left_[i + 1]));
  }
  env = unit_env();
  for (std::size_t i = L; i-- > center_ + 1;) {
    env = env_right_step(env, m_[i], mpo_.ws[i]);
    err = std::max(err, max_abs_diff(env, right_[i - 1]));
  }
  return err;
}

DmrgResult dmrg_run(const Mpo& mpo, const MpsState& initial, const DmrgOptions& options) {
  DmrgEngine eng(mpo, initial, options);
  return eng.run();
}

DmrgResult dmrg_run(const HamiltonianSpec& spec, const DmrgOptions& options, std::uint64_t seed) {
  const Mpo mpo = build_mpo(spec);
  const MpsState init = random_mps(spec.length, spec.phys_dim(), options.chi_max, seed);
  return dmrg_run(mpo, init, options);
}

}  // namespace qphase
