#include "qphase/tebd.hpp"

#include <cmath>
#include <limits>

namespace qphase {

namespace {

MatC gate_from(const MatC& h, double tau, bool imaginary) {
  return imaginary ? expm_hermitian(h, cplx(-tau, 0.0)) : expm_hermitian(h, cplx(0.0, -tau));
}

std::vector<Gate> bond_layer(const std::vector<MatC>& hs, std::size_t parity, double tau, bool imaginary) {
  std::vector<Gate> layer;
  for (std::size_t b = parity; b < hs.size(); b += 2) layer.push_back({b, 2, gate_from(hs[b], tau, imaginary)});
  return layer;
}

// Applies a one-site operator to a Vidal state without re-canonicalizing.
void apply_local_raw(MpsState& s, const MatC& op, std::size_t site) {
  const DenseTensor& g = s.gammas[site];
  const std::size_t d = s.phys_dim, l = g.dim(0), r = g.dim(2);
  DenseTensor out({l, d, r});
  for (std::size_t a = 0; a < l; ++a)
    for (std::size_t c = 0; c < r; ++c)
      for (std::size_t x = 0; x < d; ++x) {
        cplx v = 0.0;
        for (std::size_t y = 0; y < d; ++y) v += op(x, y) * g[(a * d + y) * r + c];
        out[(a * d + x) * r + c] = v;
      }
  s.gammas[site] = out;
}

double imps_gate(ImpsState& s, const MatC& gate, std::size_t i, const TruncationPolicy& policy) {
  const std::size_t n = s.unit_cell, d = s.phys_dim, j = (i + 1) % n, k = (i + 2) % n;
  const DenseTensor a = absorb_left(s.b_tensor(i), s.lambdas[i]);
  const DenseTensor b = s.b_tensor(j);
  const std::size_t l = a.dim(0), r = b.dim(2);
  const MatC t12 = a.as_matrix(2) * b.as_matrix(1);  // (l d, d r)
  DenseTensor theta({l, d, d, r});
  Eigen::Map<MatC>(theta.raw(), l * d, d * r) = t12;
  DenseTensor tp = theta.permute({1, 2, 0, 3});
  const MatC g = gate * tp.as_matrix(2);
  DenseTensor gt({d, d, l, r});
  Eigen::Map<MatC>(gt.raw(), d * d, l * r) = g;
  const DenseTensor th = gt.permute({2, 0, 1, 3});
  TruncationPolicy p = policy;
  p.renormalize = true;
  MatSvd sv = svd_truncated(th.as_matrix(2), p);
  const std::size_t m = sv.s.size();
  DenseTensor u({l, d, m}), vh({m, d, r});
  Eigen::Map<MatC>(u.raw(), l * d, m) = sv.u;
  Eigen::Map<MatC>(vh.raw(), m, d * r) = sv.vh;
  s.gammas[i] = absorb_left(u, pseudo_inverse(s.lambdas[i]));
  s.lambdas[j].assign(sv.s.data(), sv.s.data() + m);
  s.gammas[j] = absorb_right(vh, pseudo_inverse(s.lambdas[k]));
  return sv.discarded_weight;
}

}  // namespace

TrotterSchedule trotter_layers(const HamiltonianSpec& spec, double dt, int order, bool imaginary, bool periodic) {
  if (order != 1 && order != 2) throw Error(ErrorCode::ConfigError, "Trotter order must be 1 or 2");
  if (!std::isfinite(dt) || (imaginary && dt < 0.0))
    throw Error(ErrorCode::ConfigError, "dt must be finite, and non-negative in imaginary time");
  const LocalTerms terms = local_terms(spec);
  TrotterSchedule sch;
  sch.length = spec.length;
  sch.phys_dim = terms.phys_dim;
  sch.dt = dt;
  sch.order = order;
  sch.imaginary = imaginary;
  sch.periodic = periodic;
  if (periodic && (spec.length < 2 || spec.length % 2 != 0))
    throw Error(ErrorCode::ConfigError, "periodic schedules need an even unit cell");
  if (spec.length == 1) {
    if (!bond_hamiltonians(terms).empty()) throw Error(ErrorCode::ShapeMismatch, "unexpected bonds");
    sch.layers.push_back({{0, 1, gate_from(terms.onsite[0], dt, imaginary)}});
    return sch;
  }
  const std::vector<MatC> hs = bond_hamiltonians(terms, periodic);
  if (order == 1) {
    sch.layers.push_back(bond_layer(hs, 0, dt, imaginary));
    sch.layers.push_back(bond_layer(hs, 1, dt, imaginary));
  } else {
    sch.layers.push_back(bond_layer(hs, 0, 0.5 * dt, imaginary));
    sch.layers.push_back(bond_layer(hs, 1, dt, imaginary));
    sch.layers.push_back(bond_layer(hs, 0, 0.5 * dt, imaginary));
  }
  return sch;
}

EvolveResult evolve(const MpsState& state, const TrotterSchedule& schedule, int steps,
                    const TruncationPolicy& policy, const Mpo* energy_mpo) {
  if (state.form != CanonicalForm::Vidal) throw Error(ErrorCode::NotCanonical, "evolve needs a Vidal state");
  if (state.length != schedule.length || state.phys_dim != schedule.phys_dim)
    throw Error(ErrorCode::ShapeMismatch, "schedule does not match the state");
  if (schedule.periodic) throw Error(ErrorCode::ConfigError, "periodic schedule on a finite chain");
  EvolveResult res;
  res.state = state;
  TruncationPolicy raw = policy;
  raw.renormalize = false;
  for (int step = 0; step < steps; ++step) {
    EvolveStep st;
    for (const auto& layer : schedule.layers)
      for (const auto& g : layer) {
        if (g.span == 1) apply_local_raw(res.state, g.u, g.site);
        else st.discarded += apply_two_site_gate_inplace(res.state, g.u, g.site, raw);
      }
    st.norm = norm(res.state);
    if (schedule.imaginary) res.state = canonicalize(res.state, CanonicalForm::Vidal, policy);
    if (energy_mpo) {
      const double n2 = schedule.imaginary ? 1.0 : st.norm * st.norm;
      st.energy = mpo_expectation(*energy_mpo, res.state) / n2;
    } else {
      st.energy = std::numeric_limits<double>::quiet_NaN();
    }
    res.total_discarded += st.discarded;
    res.trace.push_back(st);
  }
  // truncated real-time gates leave the other bonds only approximately canonical
  if (!schedule.imaginary && res.total_discarded > 0.0) res.state = canonicalize(res.state, CanonicalForm::Vidal, raw);
  return res;
}

GroundStateResult imaginary_time_ground_state(const HamiltonianSpec& spec, const MpsState& initial,
                                              const GroundStateOptions& opts) {
  const Mpo mpo = build_mpo(spec);
  GroundStateResult res;
  res.state = canonicalize(initial, CanonicalForm::Vidal, opts.policy);
  double e_prev = mpo_expectation(mpo, res.state);
  for (const auto& stage : opts.stages) {
    const TrotterSchedule sch = trotter_layers(spec, stage.dt, opts.order, true);
    for (int block = 0; block < opts.max_blocks; ++block) {
      EvolveResult r = evolve(res.state, sch, stage.steps, opts.policy, &mpo);
      res.state = std::move(r.state);
      for (const auto& st : r.trace) res.energy_trace.push_back(st.energy);
      const double e = r.trace.back().energy;
      const bool settled = std::abs(e - e_prev) < opts.stage_tol;
      e_prev = e;
      if (settled) break;
    }
  }
  res.energy = e_prev;
  return res;
}

std::vector<std::vector<double>> lightcone_profile(const MpsState& ground, const HamiltonianSpec& spec,
                                                   std::size_t site, const std::vector<double>& times,
                                                   double dt, const TruncationPolicy& policy) {
  if (site >= ground.length) throw Error(ErrorCode::SiteOutOfRange, "perturbation site outside chain");
  if (!(dt > 0)) throw Error(ErrorCode::ConfigError, "dt must be positive");
  const std::size_t d = ground.phys_dim, L = ground.length;
  const MatC nop = local_operator("n", d);
  MpsState g = ground.form == CanonicalForm::Vidal ? ground : canonicalize(ground, CanonicalForm::Vidal, policy);
  std::vector<double> n0(L);
  for (std::size_t i = 0; i < L; ++i) n0[i] = std::real(local_expectation(g, nop, i));
  MpsState psi = apply_one_site(g, local_operator("bdag", d), site, policy);
  if (psi.form != CanonicalForm::Vidal) psi = canonicalize(psi, CanonicalForm::Vidal, policy);
  const TrotterSchedule sch = trotter_layers(spec, dt, 2, false);

  std::vector<std::vector<double>> out;
  long done = 0;
  for (double t : times) {
    const long target = std::lround(t / dt);
    if (target < done || std::abs(double(target) * dt - t) > 1e-9)
      throw Error(ErrorCode::ConfigError, "times must be non-decreasing multiples of dt");
    if (target > done) {
      psi = evolve(psi, sch, int(target - done), policy).state;
      done = target;
    }
    const double nn = norm(psi);
    std::vector<double> row(L);
    for (std::size_t i = 0; i < L; ++i) row[i] = std::real(local_expectation(psi, nop, i)) / (nn * nn) - n0[i];
    out.push_back(row);
  }
  return out;
}

ImpsState evolve_imps(const ImpsState& state, const TrotterSchedule& schedule, int steps,
                      const TruncationPolicy& policy) {
  state.validate();
  if (!schedule.periodic || schedule.length != state.unit_cell || schedule.phys_dim != state.phys_dim)
    throw Error(ErrorCode::ShapeMismatch, "schedule does not match the unit cell");
  ImpsState s = state;
  for (int step = 0; step < steps; ++step) {
    for (const auto& layer : schedule.layers)
      for (const auto& g : layer) imps_gate(s, g.u, g.site, policy);
    if (schedule.imaginary) s = canonicalize_imps(s, policy);
  }
  return s;
}

}  // namespace qphase
