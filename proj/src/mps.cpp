#include "qphase/mps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qphase/random.hpp"

namespace qphase {

namespace {

using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;

std::size_t lsz(const DenseTensor& t) { return t.dim(0); }
std::size_t rsz(const DenseTensor& t) { return t.dim(2); }

// Physical slice A[:, s, :].
MatC slice(const DenseTensor& a, std::size_t s) {
  const std::size_t l = a.dim(0), d = a.dim(1), r = a.dim(2);
  MatC m(l, r);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < r; ++j) m(i, j) = a[(i * d + s) * r + j];
  return m;
}

DenseTensor scale_left(const DenseTensor& a, const std::vector<double>& lam) {
  DenseTensor out = a;
  const std::size_t l = a.dim(0), dr = a.dim(1) * a.dim(2);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t k = 0; k < dr; ++k) out[i * dr + k] *= lam[i];
  return out;
}

DenseTensor scale_right(const DenseTensor& a, const std::vector<double>& lam) {
  DenseTensor out = a;
  const std::size_t r = a.dim(2), n = a.size() / r;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < r; ++k) out[i * r + k] *= lam[k];
  return out;
}

DenseTensor tensor3(const MatC& m, std::size_t l, std::size_t d, std::size_t r) {
  DenseTensor t({l, d, r});
  Eigen::Map<MatC>(t.raw(), m.rows(), m.cols()) = m;
  return t;
}

// E'[c,c'] = Σ conj(A[b,s,c]) E[b,b'] O[s,t] A[b',t,c'].
MatC transfer_left(const MatC& env, const DenseTensor& a, const MatC* op) {
  const std::size_t d = a.dim(1);
  std::vector<MatC> ys(d);
  std::vector<MatC> as(d);
  for (std::size_t t = 0; t < d; ++t) {
    as[t] = slice(a, t);
    ys[t] = env * as[t];
  }
  MatC out = MatC::Zero(rsz(a), rsz(a));
  for (std::size_t s = 0; s < d; ++s) {
    MatC z;
    if (op) {
      z = MatC::Zero(lsz(a), rsz(a));
      for (std::size_t t = 0; t < d; ++t)
        if ((*op)(s, t) != cplx(0.0)) z += (*op)(s, t) * ys[t];
    } else {
      z = ys[s];
    }
    out.noalias() += as[s].adjoint() * z;
  }
  return out;
}

// R'[b,b'] = Σ A[b,s,c] R[c,c'] conj(A[b',s,c']).
MatC transfer_right(const MatC& env, const DenseTensor& a) {
  const std::size_t d = a.dim(1);
  MatC out = MatC::Zero(lsz(a), lsz(a));
  for (std::size_t s = 0; s < d; ++s) {
    const MatC as = slice(a, s);
    out.noalias() += as * env * as.adjoint();
  }
  return out;
}

// Fix the phase of each row of vh so its largest-magnitude entry is real-positive.
void fix_row_gauge(MatSvd& r) {
  for (Eigen::Index k = 0; k < r.vh.rows(); ++k) {
    Eigen::Index best = 0;
    double bmag = -1.0;
    for (Eigen::Index j = 0; j < r.vh.cols(); ++j) {
      const double a = std::abs(r.vh(k, j));
      if (a > bmag + 1e-14) {
        bmag = a;
        best = j;
      }
    }
    if (bmag > 0) {
      const cplx ph = r.vh(k, best) / bmag;
      r.vh.row(k) *= std::conj(ph);
      r.u.col(k) *= ph;
    }
  }
}

std::vector<double> to_std(const VecR& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void require_vidal(const MpsState& s) {
  if (s.form != CanonicalForm::Vidal) throw Error(ErrorCode::NotCanonical, "operation requires Vidal form");
}

}  // namespace

const char* form_name(CanonicalForm f) {
  switch (f) {
    case CanonicalForm::Vidal: return "vidal";
    case CanonicalForm::Left: return "left";
    case CanonicalForm::Right: return "right";
    case CanonicalForm::Mixed: return "mixed";
    case CanonicalForm::None: return "none";
  }
  return "none";
}

std::vector<std::size_t> MpsState::bond_dims() const {
  std::vector<std::size_t> out;
  out.reserve(length + 1);
  for (std::size_t i = 0; i < length; ++i) out.push_back(gammas[i].dim(0));
  out.push_back(gammas.empty() ? 1 : gammas.back().dim(2));
  return out;
}

DenseTensor MpsState::site_tensor(std::size_t site) const {
  if (form == CanonicalForm::Vidal) return scale_right(gammas.at(site), lambdas.at(site + 1));
  return gammas.at(site);
}

void MpsState::validate() const {
  if (gammas.size() != length || lambdas.size() != length + 1)
    throw Error(ErrorCode::ShapeMismatch, "MPS tensor/lambda count mismatch");
  for (std::size_t i = 0; i < length; ++i) {
    const auto& g = gammas[i];
    if (g.rank() != 3 || g.dim(1) != phys_dim) throw Error(ErrorCode::ShapeMismatch, "site tensor shape");
    if (g.dim(0) != lambdas[i].size() || g.dim(2) != lambdas[i + 1].size())
      throw Error(ErrorCode::ShapeMismatch, "bond dimension inconsistent with lambdas");
  }
}

std::vector<std::size_t> chi_list(std::size_t L, std::size_t d, std::size_t chi_max) {
  std::vector<std::size_t> chi(L + 1, 1);
  for (std::size_t i = 0; i <= L; ++i) {
    const std::size_t e = std::min(i, L - i);
    std::size_t v = 1;
    for (std::size_t k = 0; k < e && v <= chi_max; ++k) v *= d;
    chi[i] = std::min(v, chi_max);
  }
  return chi;
}

MpsState random_mps(std::size_t L, std::size_t d, std::size_t chi_max, std::uint64_t seed) {
  if (L < 1 || d < 1 || chi_max < 1) throw Error(ErrorCode::ShapeMismatch, "random_mps needs L, d, chi >= 1");
  Rng rng(seed);
  const auto chi = chi_list(L, d, chi_max);
  MpsState s;
  s.length = L;
  s.phys_dim = d;
  s.form = CanonicalForm::None;
  for (std::size_t i = 0; i < L; ++i) {
    DenseTensor g({chi[i], d, chi[i + 1]});
    for (auto& v : g.data()) v = cplx(rng.normal(), rng.normal());
    s.gammas.push_back(std::move(g));
  }
  for (std::size_t i = 0; i <= L; ++i)
    s.lambdas.emplace_back(chi[i], 1.0 / std::sqrt(static_cast<double>(chi[i])));
  return s;
}

MpsState product_state(const std::vector<std::size_t>& config, std::size_t d) {
  std::vector<VecC> locals;
  for (auto c : config) {
    if (c >= d) throw Error(ErrorCode::ShapeMismatch, "local configuration exceeds physical dimension");
    VecC v = VecC::Zero(d);
    v[c] = 1.0;
    locals.push_back(v);
  }
  return product_state(locals);
}

MpsState product_state(const std::vector<VecC>& local_states) {
  if (local_states.empty()) throw Error(ErrorCode::ShapeMismatch, "empty product state");
  MpsState s;
  s.length = local_states.size();
  s.phys_dim = local_states[0].size();
  s.form = CanonicalForm::Vidal;
  for (const auto& v : local_states) {
    if (static_cast<std::size_t>(v.size()) != s.phys_dim)
      throw Error(ErrorCode::ShapeMismatch, "local dimensions differ");
    const double n = v.norm();
    if (!(n > 0)) throw Error(ErrorCode::ZeroNorm, "zero local state");
    DenseTensor g({1, s.phys_dim, 1});
    for (std::size_t k = 0; k < s.phys_dim; ++k) g[k] = v[k] / n;
    s.gammas.push_back(std::move(g));
  }
  s.lambdas.assign(s.length + 1, {1.0});
  return s;
}

MpsState from_statevector(const VecC& psi, std::size_t L, std::size_t d, const TruncationPolicy& policy) {
  std::size_t dim = 1;
  for (std::size_t i = 0; i < L; ++i) dim *= d;
  if (static_cast<std::size_t>(psi.size()) != dim) throw Error(ErrorCode::ShapeMismatch, "statevector length");
  MpsState s;
  s.length = L;
  s.phys_dim = d;
  s.form = CanonicalForm::Left;
  MatC rest = Eigen::Map<const MatC>(psi.data(), 1, dim);
  std::size_t left = 1;
  TruncationPolicy p = policy;
  p.renormalize = false;
  for (std::size_t i = 0; i + 1 < L; ++i) {
    const std::size_t cols = rest.size() / (left * d);
    MatC m = Eigen::Map<const MatC>(rest.data(), left * d, cols);
    MatSvd r = svd_truncated(m, p);
    const std::size_t k = r.s.size();
    s.gammas.push_back(tensor3(r.u, left, d, k));
    rest = r.s.cast<cplx>().asDiagonal() * r.vh;
    left = k;
  }
  MatC last = Eigen::Map<const MatC>(rest.data(), left, d);
  s.gammas.push_back(tensor3(last, left, d, 1));
  s.lambdas.clear();
  for (std::size_t i = 0; i < L; ++i) s.lambdas.emplace_back(s.gammas[i].dim(0), 1.0);
  s.lambdas.emplace_back(1, 1.0);
  return canonicalize(s, CanonicalForm::Vidal, policy);
}

MpsState canonicalize(const MpsState& state, CanonicalForm target, const TruncationPolicy& policy,
                      std::size_t center) {
  state.validate();
  const std::size_t L = state.length, d = state.phys_dim;
  std::vector<DenseTensor> m(L);
  for (std::size_t i = 0; i < L; ++i) m[i] = state.site_tensor(i);

  // Left-to-right QR sweep.
  for (std::size_t i = 0; i + 1 < L; ++i) {
    const std::size_t l = m[i].dim(0), r = m[i].dim(2);
    auto [q, rr] = qr_reduced(m[i].as_matrix(2));
    const std::size_t k = q.cols();
    m[i] = tensor3(q, l, d, k);
    const MatC next = rr * m[i + 1].as_matrix(1);
    m[i + 1] = tensor3(next, k, d, m[i + 1].dim(2));
    (void)r;
  }
  const double nrm = m[L - 1].norm();
  if (!(nrm > 1e-300)) throw Error(ErrorCode::ZeroNorm, "state has zero norm");
  m[L - 1] *= cplx(1.0 / nrm);

  // Right-to-left SVD sweep producing right-canonical tensors and Schmidt values.
  std::vector<std::vector<double>> lam(L + 1, std::vector<double>{1.0});
  for (std::size_t i = L - 1; i >= 1; --i) {
    const std::size_t l = m[i].dim(0), r = m[i].dim(2);
    MatSvd sv = svd_truncated(m[i].as_matrix(1), policy);
    fix_row_gauge(sv);
    const std::size_t k = sv.s.size();
    m[i] = tensor3(sv.vh, k, d, r);
    lam[i] = to_std(sv.s);
    const MatC us = sv.u * sv.s.cast<cplx>().asDiagonal();
    const MatC prev = m[i - 1].as_matrix(2) * us;
    m[i - 1] = tensor3(prev, m[i - 1].dim(0), d, k);
    (void)l;
  }
  const double n0 = m[0].norm();
  if (!(n0 > 1e-300)) throw Error(ErrorCode::ZeroNorm, "state has zero norm after truncation");
  m[0] *= cplx(1.0 / n0);

  MpsState out;
  out.length = L;
  out.phys_dim = d;
  out.lambdas = lam;
  out.form = target;
  out.center = center;
  out.gammas.resize(L);
  for (std::size_t i = 0; i < L; ++i) {
    const auto inv_r = pseudo_inverse(lam[i + 1]);
    switch (target) {
      case CanonicalForm::Vidal:
        out.gammas[i] = scale_right(m[i], inv_r);
        break;
      case CanonicalForm::Right:
      case CanonicalForm::None:
        out.gammas[i] = m[i];
        break;
      case CanonicalForm::Left:
        out.gammas[i] = scale_right(scale_left(m[i], lam[i]), inv_r);
        break;
      case CanonicalForm::Mixed:
        if (center >= L) throw Error(ErrorCode::SiteOutOfRange, "mixed-form center outside chain");
        if (i < center)
          out.gammas[i] = scale_right(scale_left(m[i], lam[i]), inv_r);
        else if (i == center)
          out.gammas[i] = scale_left(m[i], lam[i]);
        else
          out.gammas[i] = m[i];
        break;
    }
  }
  return out;
}

double norm(const MpsState& state) {
  state.validate();
  MatC env = MatC::Identity(1, 1);
  for (std::size_t i = 0; i < state.length; ++i) env = transfer_left(env, state.site_tensor(i), nullptr);
  return std::sqrt(std::max(0.0, std::real(env.trace())));
}

VecC to_statevector(const MpsState& state) {
  state.validate();
  double logdim = state.length * std::log2(static_cast<double>(state.phys_dim));
  if (logdim > 20.0) throw Error(ErrorCode::TooLarge, "statevector larger than 2^20");
  MatC psi = MatC::Ones(1, 1);
  for (std::size_t i = 0; i < state.length; ++i) {
    const DenseTensor a = state.site_tensor(i);
    const MatC prod = psi * a.as_matrix(1);
    const std::size_t rows = psi.rows() * state.phys_dim;
    psi = Eigen::Map<const MatC>(prod.data(), rows, a.dim(2));
  }
  return Eigen::Map<const VecC>(psi.data(), psi.size());
}

double von_neumann_entropy(const std::vector<double>& schmidt) {
  double s = 0.0;
  for (double l : schmidt) {
    const double p = l * l;
    if (p > 1e-300) s -= p * std::log(p);
  }
  return s;
}

std::vector<BondEntanglement> entanglement_profile(const MpsState& state) {
  require_vidal(state);
  std::vector<BondEntanglement> out;
  for (std::size_t b = 1; b < state.length; ++b) {
    BondEntanglement e;
    e.spectrum = state.lambdas[b];
    e.entropy = von_neumann_entropy(e.spectrum);
    out.push_back(std::move(e));
  }
  return out;
}

cplx local_expectation(const MpsState& state, const MatC& op, std::size_t site) {
  require_vidal(state);
  if (site >= state.length) throw Error(ErrorCode::SiteOutOfRange, "site outside chain");
  if (op.rows() != static_cast<Eigen::Index>(state.phys_dim) || op.cols() != op.rows())
    throw Error(ErrorCode::ShapeMismatch, "operator dimension");
  const DenseTensor theta = scale_left(state.site_tensor(site), state.lambdas[site]);
  const MatC env = MatC::Identity(theta.dim(0), theta.dim(0));
  return transfer_left(env, theta, &op).trace();
}

cplx string_correlation(const MpsState& state, const MatC& op_a, std::size_t i, const MatC& string_op,
                        const MatC& op_b, std::size_t j) {
  require_vidal(state);
  if (i >= j || j >= state.length) throw Error(ErrorCode::SiteOutOfRange, "need i < j < L");
  const MatC* sop = string_op.size() == 0 ? nullptr : &string_op;
  MatC env = MatC::Identity(state.gammas[i].dim(0), state.gammas[i].dim(0));
  for (std::size_t k = i; k < j; ++k) {
    const DenseTensor a = scale_left(state.gammas[k], state.lambdas[k]);
    env = transfer_left(env, a, k == i ? &op_a : sop);
  }
  const DenseTensor theta = scale_left(state.site_tensor(j), state.lambdas[j]);
  return transfer_left(env, theta, &op_b).trace();
}

std::vector<std::vector<cplx>> correlation_matrix(const MpsState& state, const MatC& op_a, const MatC& op_b,
                                                  const MatC* string_op) {
  require_vidal(state);
  const std::size_t L = state.length;
  std::vector<std::vector<cplx>> out(L, std::vector<cplx>(L, cplx(0.0)));
  std::vector<DenseTensor> a(L);
  for (std::size_t k = 0; k < L; ++k) a[k] = scale_left(state.gammas[k], state.lambdas[k]);
  for (std::size_t i = 0; i + 1 < L; ++i) {
    MatC env = transfer_left(MatC::Identity(lsz(a[i]), lsz(a[i])), a[i], &op_a);
    for (std::size_t j = i + 1; j < L; ++j) {
      const MatC closed = transfer_left(env, a[j], &op_b);
      cplx v = 0.0;
      const auto& lam = state.lambdas[j + 1];
      for (std::size_t c = 0; c < lam.size(); ++c) v += closed(c, c) * lam[c] * lam[c];
      out[i][j] = v;
      if (j + 1 < L) env = transfer_left(env, a[j], string_op);
    }
  }
  return out;
}

cplx two_point(const MpsState& state, const MatC& op_a, std::size_t i, const MatC& op_b, std::size_t j) {
  return string_correlation(state, op_a, i, MatC(), op_b, j);
}

std::vector<double> pseudo_inverse(const std::vector<double>& lam, double cutoff) {
  std::vector<double> out(lam.size());
  for (std::size_t k = 0; k < lam.size(); ++k) out[k] = lam[k] >= cutoff ? 1.0 / lam[k] : 0.0;
  return out;
}

DenseTensor absorb_left(const DenseTensor& a, const std::vector<double>& lam) { return scale_left(a, lam); }
DenseTensor absorb_right(const DenseTensor& a, const std::vector<double>& lam) { return scale_right(a, lam); }

double apply_two_site_gate_inplace(MpsState& state, const MatC& gate, std::size_t i,
                                   const TruncationPolicy& policy) {
  require_vidal(state);
  const std::size_t d = state.phys_dim;
  if (i + 1 >= state.length) throw Error(ErrorCode::SiteOutOfRange, "bond outside chain");
  if (gate.rows() != static_cast<Eigen::Index>(d * d) || gate.cols() != gate.rows())
    throw Error(ErrorCode::ShapeMismatch, "gate must be d^2 x d^2");
  const DenseTensor b1 = state.site_tensor(i);
  const DenseTensor b2 = state.site_tensor(i + 1);
  const std::size_t l = b1.dim(0), r = b2.dim(2);
  const std::size_t m = b1.dim(2);
  // theta[a, s1, s2, c] = B1 B2, then apply the gate on (s1, s2).
  const MatC t12 = b1.as_matrix(2) * b2.as_matrix(1);  // (l*d, d*r)
  DenseTensor theta({l, d, d, r});
  Eigen::Map<MatC>(theta.raw(), l * d, d * r) = t12;
  DenseTensor tp = theta.permute({1, 2, 0, 3});  // (d, d, l, r)
  MatC g = gate * tp.as_matrix(2);
  DenseTensor gt({d, d, l, r});
  Eigen::Map<MatC>(gt.raw(), d * d, l * r) = g;
  DenseTensor th = gt.permute({2, 0, 1, 3});  // (l, d, d, r)
  const MatC thm = th.as_matrix(2);           // (l*d, d*r)

  // Schmidt decomposition of Λ_i θ.
  MatC lt = thm;
  for (std::size_t a = 0; a < l; ++a) lt.middleRows(a * d, d) *= state.lambdas[i][a];
  TruncationPolicy p = policy;
  p.renormalize = false;
  MatSvd sv = svd_truncated(lt, p);
  fix_row_gauge(sv);
  const std::size_t k = sv.s.size();
  double total = 0.0;
  for (Eigen::Index q = 0; q < sv.s.size(); ++q) total += sv.s[q] * sv.s[q];
  total += sv.discarded_weight;
  double scale = 1.0;
  if (policy.renormalize) {
    const double kept = sv.s.norm();
    if (!(kept > 0)) throw Error(ErrorCode::ZeroNorm, "gate annihilated the state");
    scale = 1.0 / kept;
  }
  // New B_i = θ Z† (avoids inverting Λ_i), B_(i+1) = Z.
  const MatC bnew = thm * sv.vh.adjoint() * scale;
  std::vector<double> lam(k);
  for (std::size_t q = 0; q < k; ++q) lam[q] = sv.s[q] * scale;
  state.gammas[i] = scale_right(tensor3(bnew, l, d, k), pseudo_inverse(lam));
  state.gammas[i + 1] = scale_right(tensor3(sv.vh, k, d, r), pseudo_inverse(state.lambdas[i + 2]));
  state.lambdas[i + 1] = lam;
  (void)m;
  return total > 0 ? sv.discarded_weight / total : 0.0;
}

GateResult apply_two_site_gate(const MpsState& state, const MatC& gate, std::size_t i,
                               const TruncationPolicy& policy) {
  GateResult res{state, 0.0};
  res.discarded_weight = apply_two_site_gate_inplace(res.state, gate, i, policy);
  return res;
}

MpsState apply_one_site(const MpsState& state, const MatC& op, std::size_t site, const TruncationPolicy& policy) {
  require_vidal(state);
  if (site >= state.length) throw Error(ErrorCode::SiteOutOfRange, "site outside chain");
  const std::size_t d = state.phys_dim;
  if (op.rows() != static_cast<Eigen::Index>(d) || op.cols() != op.rows())
    throw Error(ErrorCode::ShapeMismatch, "operator dimension");
  MpsState out = state;
  const DenseTensor& g = state.gammas[site];
  DenseTensor gp = g.permute({1, 0, 2});
  MatC m = op * gp.as_matrix(1);
  DenseTensor t({d, g.dim(0), g.dim(2)});
  Eigen::Map<MatC>(t.raw(), d, g.dim(0) * g.dim(2)) = m;
  out.gammas[site] = t.permute({1, 0, 2});
  const MatC id = MatC::Identity(d, d);
  if (!(op.adjoint() * op).isApprox(id, 1e-12)) out = canonicalize(out, CanonicalForm::Vidal, policy);
  return out;
}

double vidal_orthonormality_error(const MpsState& state) {
  require_vidal(state);
  double err = 0.0;
  for (std::size_t i = 0; i < state.length; ++i) {
    const DenseTensor a = scale_left(state.gammas[i], state.lambdas[i]);
    const MatC el = transfer_left(MatC::Identity(a.dim(0), a.dim(0)), a, nullptr);
    err = std::max(err, (el - MatC::Identity(el.rows(), el.cols())).cwiseAbs().maxCoeff());
    const DenseTensor b = state.site_tensor(i);
    const MatC er = transfer_right(MatC::Identity(b.dim(2), b.dim(2)), b);
    err = std::max(err, (er - MatC::Identity(er.rows(), er.cols())).cwiseAbs().maxCoeff());
  }
  return err;
}

// ---------------------------------------------------------------- infinite

DenseTensor ImpsState::b_tensor(std::size_t site) const {
  return scale_right(gammas.at(site % unit_cell), lambdas.at((site + 1) % unit_cell));
}

void ImpsState::validate() const {
  if (unit_cell == 0 || gammas.size() != unit_cell || lambdas.size() != unit_cell)
    throw Error(ErrorCode::ShapeMismatch, "iMPS unit cell inconsistent");
  for (std::size_t i = 0; i < unit_cell; ++i) {
    const auto& g = gammas[i];
    if (g.rank() != 3 || g.dim(1) != phys_dim || g.dim(0) != lambdas[i].size() ||
        g.dim(2) != lambdas[(i + 1) % unit_cell].size())
      throw Error(ErrorCode::ShapeMismatch, "iMPS bond dimensions inconsistent");
  }
}

ImpsState imps_product_state(const std::vector<VecC>& cell_states) {
  ImpsState s;
  s.unit_cell = cell_states.size();
  if (s.unit_cell == 0) throw Error(ErrorCode::ShapeMismatch, "empty unit cell");
  s.phys_dim = cell_states[0].size();
  for (const auto& v : cell_states) {
    DenseTensor g({1, s.phys_dim, 1});
    const VecC w = v / v.norm();
    for (std::size_t k = 0; k < s.phys_dim; ++k) g[k] = w[k];
    s.gammas.push_back(g);
  }
  s.lambdas.assign(s.unit_cell, {1.0});
  return s;
}

namespace {

VecC flatten(const MatC& m) { return Eigen::Map<const VecC>(m.data(), m.size()); }
MatC unflatten(const VecC& v, Eigen::Index n) { return Eigen::Map<const MatC>(v.data(), n, n); }

// Hermitian PSD square root factors: returns (F, F_pinv) with M = F F†.
std::pair<MatC, MatC> psd_factor(const MatC& mm) {
  CMat h = 0.5 * (mm + mm.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  const VecR ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = ev.size(); k-- > 0;)
    if (ev[k] > 1e-13 * top) keep.push_back(k);
  MatC f(h.rows(), keep.size()), finv(keep.size(), h.rows());
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const double sq = std::sqrt(ev[keep[c]]);
    f.col(c) = es.eigenvectors().col(keep[c]) * sq;
    finv.row(c) = es.eigenvectors().col(keep[c]).adjoint() / sq;
  }
  return {f, finv};
}

MatC dominant_fixed_point(const LinearOp& op, Eigen::Index n) {
  const VecC v0 = flatten(MatC::Identity(n, n));
  ArnoldiResult ar = arnoldi_dominant(op, v0, 1, 1e-13);
  if (!ar.converged || ar.values.empty())
    throw Error(ErrorCode::NonConvergedEigensolve, "transfer-matrix fixed point did not converge");
  MatC fp = unflatten(ar.vectors[0], n);
  const cplx tr = fp.trace();
  fp /= (std::abs(tr) > 1e-14 ? tr : fp(0, 0));
  return 0.5 * (fp + MatC(fp.adjoint()));
}

}  // namespace

namespace {

// Cyclic QR sweeps: returns left-orthonormal A_k with C A_k ∝ A_k' C'.
std::vector<DenseTensor> left_orthonormalize(const std::vector<DenseTensor>& u, MatC c) {
  const std::size_t n = u.size(), d = u[0].dim(1);
  std::vector<DenseTensor> a(n);
  for (int pass = 0; pass < 20000; ++pass) {
    const MatC start = c;
    for (std::size_t k = 0; k < n; ++k) {
      const MatC m = c * u[k].as_matrix(1);
      const std::size_t rows = m.rows(), r = u[k].dim(2);
      auto [q, rr] = qr_reduced(MatC(Eigen::Map<const MatC>(m.data(), rows * d, r)));
      a[k] = tensor3(q, rows, d, q.cols());
      c = rr / rr.norm();
    }
    if (pass > 0 && c.rows() == start.rows() && c.cols() == start.cols() && (c - start).norm() < 1e-14) break;
  }
  return a;
}

// Cyclic LQ sweeps: returns right-orthonormal B_k and D_k with A_k D_(k+1) ∝ D_k B_k.
std::pair<std::vector<DenseTensor>, std::vector<MatC>> right_orthonormalize(const std::vector<DenseTensor>& a,
                                                                          MatC dmat) {
  const std::size_t n = a.size(), d = a[0].dim(1);
  std::vector<DenseTensor> b(n);
  std::vector<MatC> ds(n);
  for (int pass = 0; pass < 20000; ++pass) {
    const MatC start = dmat;
    for (std::size_t k = n; k-- > 0;) {
      const MatC m = a[k].as_matrix(2) * dmat;  // (l d, r')
      const std::size_t l = a[k].dim(0), r = m.cols();
      const MatC mm = Eigen::Map<const MatC>(m.data(), l, d * r);
      auto [q, rr] = qr_reduced(MatC(mm.adjoint()));
      b[k] = tensor3(MatC(q.adjoint()), q.cols(), d, r);
      dmat = rr.adjoint();
      dmat /= dmat.norm();
      ds[k] = dmat;
    }
    if (pass > 0 && dmat.rows() == start.rows() && dmat.cols() == start.cols() && (dmat - start).norm() < 1e-14)
      break;
  }
  return {b, ds};
}

ImpsState canonicalize_imps_impl(const ImpsState& state, const TruncationPolicy& policy, bool allow_retry) {
  state.validate();
  const std::size_t n = state.unit_cell, d = state.phys_dim;
  std::vector<DenseTensor> u(n);
  for (std::size_t k = 0; k < n; ++k) u[k] = scale_left(state.gammas[k], state.lambdas[k]);
  const Eigen::Index chi = state.lambdas[0].size();

  // Seed the QR iteration with the factored left fixed point.
  LinearOp left_op = [&](const VecC& v) {
    MatC l = unflatten(v, chi);
    for (std::size_t k = 0; k < n; ++k) l = transfer_left(l, u[k], nullptr);
    return flatten(l);
  };
  MatC c0 = psd_factor(dominant_fixed_point(left_op, chi)).first.adjoint();
  const std::vector<DenseTensor> a = left_orthonormalize(u, c0 / c0.norm());

  const Eigen::Index chi_a = a[0].dim(0);
  LinearOp right_op = [&](const VecC& v) {
    MatC r = unflatten(v, chi_a);
    for (std::size_t k = n; k-- > 0;) r = transfer_right(r, a[k]);
    return flatten(r);
  };
  MatC d0 = psd_factor(dominant_fixed_point(right_op, chi_a)).first;
  auto [b, ds] = right_orthonormalize(a, d0 / d0.norm());
  (void)b;

  // Schmidt decomposition of each bond matrix: D_k = U_k S_k V_k†.
  std::vector<MatSvd> sv(n);
  bool truncated = false;
  for (std::size_t k = 0; k < n; ++k) {
    TruncationPolicy p = policy;
    p.renormalize = true;
    sv[k] = svd_truncated(ds[k], p);
    if (sv[k].s.size() < std::min(ds[k].rows(), ds[k].cols()) || sv[k].discarded_weight > 0) truncated = true;
  }
  ImpsState out;
  out.unit_cell = n;
  out.phys_dim = d;
  out.gammas.resize(n);
  out.lambdas.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.lambdas[k] = to_std(sv[k].s);
  for (std::size_t k = 0; k < n; ++k) {
    const MatC& ul = sv[k].u;
    const MatC& ur = sv[(k + 1) % n].u;
    const std::size_t l = a[k].dim(0), r = a[k].dim(2), kl = ul.cols(), kr = ur.cols();
    const MatC left = ul.adjoint() * a[k].as_matrix(1);  // (kl, d r)
    const MatC resh = Eigen::Map<const MatC>(left.data(), kl * d, r);
    const MatC g = resh * ur;
    out.gammas[k] = scale_left(tensor3(g, kl, d, kr), pseudo_inverse(out.lambdas[k]));
    (void)l;
  }
  if (truncated && allow_retry) return canonicalize_imps_impl(out, policy, false);
  return out;
}

}  // namespace

ImpsState canonicalize_imps(const ImpsState& state, const TruncationPolicy& policy) {
  return canonicalize_imps_impl(state, policy, true);
}

double imps_orthonormality_error(const ImpsState& state) {
  state.validate();
  double err = 0.0;
  for (std::size_t i = 0; i < state.unit_cell; ++i) {
    const DenseTensor a = scale_left(state.gammas[i], state.lambdas[i]);
    const MatC el = transfer_left(MatC::Identity(a.dim(0), a.dim(0)), a, nullptr);
    err = std::max(err, (el - MatC::Identity(el.rows(), el.cols())).cwiseAbs().maxCoeff());
    const DenseTensor b = state.b_tensor(i);
    const MatC er = transfer_right(MatC::Identity(b.dim(2), b.dim(2)), b);
    err = std::max(err, (er - MatC::Identity(er.rows(), er.cols())).cwiseAbs().maxCoeff());
  }
  return err;
}

cplx imps_local_expectation(const ImpsState& state, const MatC& op, std::size_t site) {
  state.validate();
  const std::size_t k = site % state.unit_cell;
  const DenseTensor theta = scale_left(state.b_tensor(k), state.lambdas[k]);
  return transfer_left(MatC::Identity(theta.dim(0), theta.dim(0)), theta, &op).trace();
}

std::vector<cplx> imps_correlation(const ImpsState& state, const MatC& op_a, const MatC& op_b,
                                   const std::vector<std::size_t>& distances, std::size_t site) {
  state.validate();
  const std::size_t n = state.unit_cell;
  const std::size_t i0 = site % n;
  auto a_tensor = [&](std::size_t s) { return scale_left(state.gammas[s % n], state.lambdas[s % n]); };
  auto theta = [&](std::size_t s) { return scale_left(state.b_tensor(s % n), state.lambdas[s % n]); };

  const DenseTensor a0 = a_tensor(i0);
  const MatC start = transfer_left(MatC::Identity(a0.dim(0), a0.dim(0)), a0, &op_a);
  const Eigen::Index chi = start.rows();  // bond (i0 + 1)

  auto cell_apply = [&](const MatC& e) {
    MatC x = e;
    for (std::size_t k = 1; k <= n; ++k) x = transfer_left(x, a_tensor(i0 + k), nullptr);
    return x;
  };

  // Dense eigendecomposition of the cell transfer matrix when affordable.
  bool have_eig = false;
  CMat evecs, evecs_inv;
  VecC evals;
  if (chi * chi <= 1024) {
    const Eigen::Index nn = chi * chi;
    CMat tm(nn, nn);
    for (Eigen::Index c = 0; c < nn; ++c) {
      VecC e = VecC::Zero(nn);
      e[c] = 1.0;
      tm.col(c) = flatten(cell_apply(unflatten(e, chi)));
    }
    Eigen::ComplexEigenSolver<CMat> es(tm);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NonConvergedEigensolve, "transfer eigensolve failed");
    evecs = es.eigenvectors();
    Eigen::FullPivLU<CMat> lu(evecs);
    if (lu.isInvertible()) {
      evecs_inv = lu.inverse();
      evals = es.eigenvalues();
      const double rec = (evecs * evals.asDiagonal() * evecs_inv - tm).cwiseAbs().maxCoeff();
      have_eig = rec < 1e-9;
    }
  }

  std::vector<cplx> out;
  out.reserve(distances.size());
  for (std::size_t r : distances) {
    if (r == 0) {
      out.push_back(imps_local_expectation(state, MatC(op_a * op_b), i0));
      continue;
    }
    // Sites i0+1 .. i0+r-1 carry identities; close at i0+r.
    const std::size_t between = r - 1;
    const std::size_t cells = between / n, rem = between % n;
    MatC env = start;
    if (cells > 0) {
      if (have_eig) {
        VecC coeff = evecs_inv * flatten(env);
        for (Eigen::Index q = 0; q < coeff.size(); ++q) coeff[q] *= std::pow(evals[q], static_cast<double>(cells));
        env = unflatten(evecs * coeff, chi);
      } else {
        for (std::size_t c = 0; c < cells; ++c) env = cell_apply(env);
      }
    }
    for (std::size_t k = 1; k <= rem; ++k) env = transfer_left(env, a_tensor(i0 + k), nullptr);
    out.push_back(transfer_left(env, theta(i0 + r), &op_b).trace());
  }
  return out;
}

std::vector<cplx> imps_transfer_spectrum(const ImpsState& state, int k) {
  state.validate();
  const std::size_t n = state.unit_cell;
  const Eigen::Index chi = state.lambdas[0].size();
  if (chi == 1) {
    // One-dimensional transfer space: the only eigenvalue is the norm per cell.
    MatC e = MatC::Identity(1, 1);
    for (std::size_t s = 0; s < n; ++s)
      e = transfer_left(e, scale_left(state.gammas[s], state.lambdas[s]), nullptr);
    std::vector<cplx> out{e(0, 0)};
    while (static_cast<int>(out.size()) < k) out.push_back(0.0);
    return out;
  }
  LinearOp op = [&](const VecC& v) {
    MatC e = unflatten(v, chi);
    for (std::size_t s = 0; s < n; ++s) e = transfer_left(e, scale_left(state.gammas[s], state.lambdas[s]), nullptr);
    return flatten(e);
  };
  Rng rng(99);
  VecC v0(chi * chi);
  for (Eigen::Index q = 0; q < v0.size(); ++q) v0[q] = cplx(rng.normal(), rng.normal());
  ArnoldiResult ar = arnoldi_dominant(op, v0, k, 1e-10, 60, 400);
  if (!ar.converged) throw Error(ErrorCode::NonConvergedEigensolve, "transfer spectrum did not converge");
  std::vector<cplx> out = ar.values;
  while (static_cast<int>(out.size()) < k) out.push_back(0.0);
  return out;
}

}  // namespace qphase
