#include "qphase/mpo.hpp"

#include <cmath>

namespace qphase {

namespace {

const std::vector<std::pair<std::string, ModelKind>>& model_table() {
  static const std::vector<std::pair<std::string, ModelKind>> t = {
      {"TFIM", ModelKind::TFIM},
      {"Heisenberg", ModelKind::Heisenberg},
      {"ExtendedBoseHubbard", ModelKind::ExtendedBoseHubbard},
      {"DEBHM", ModelKind::DEBHM},
      {"Custom", ModelKind::Custom},
  };
  return t;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s;
}

}  // namespace

ModelKind model_from_string(const std::string& tag) {
  for (const auto& [name, kind] : model_table())
    if (name == tag) return kind;
  throw Error(ErrorCode::UnknownModel, "unknown model '" + tag + "'; valid tags: " + join(model_names()));
}

const char* model_name(ModelKind m) {
  for (const auto& [name, kind] : model_table())
    if (kind == m) return name.c_str();
  return "?";
}

std::vector<std::string> model_names() {
  std::vector<std::string> out;
  for (const auto& e : model_table()) out.push_back(e.first);
  return out;
}

double HamiltonianSpec::coupling(const std::string& name) const {
  auto it = couplings.find(name);
  if (it == couplings.end())
    throw Error(ErrorCode::MissingCoupling, std::string(model_name(model)) + " requires coupling '" + name + "'");
  return it->second;
}

double HamiltonianSpec::coupling_or(const std::string& name, double fallback) const {
  auto it = couplings.find(name);
  return it == couplings.end() ? fallback : it->second;
}

std::size_t HamiltonianSpec::phys_dim() const {
  switch (model) {
    case ModelKind::TFIM:
    case ModelKind::Heisenberg:
      return 2;
    case ModelKind::ExtendedBoseHubbard:
      return static_cast<std::size_t>(coupling("n_max")) + 1;
    case ModelKind::DEBHM:
      return static_cast<std::size_t>(coupling_or("n_max", 1.0)) + 1;
    case ModelKind::Custom:
      return static_cast<std::size_t>(coupling_or("n_max", 1.0)) + 1;
  }
  return 2;
}

void HamiltonianSpec::validate() const {
  if (length < 1) throw Error(ErrorCode::ShapeMismatch, "chain length must be >= 1");
  switch (model) {
    case ModelKind::TFIM:
      coupling("J");
      coupling("g_x");
      break;
    case ModelKind::Heisenberg:
      if (!has("J")) {
        coupling("J_x");
        coupling("J_y");
        coupling("J_z");
      }
      break;
    case ModelKind::ExtendedBoseHubbard:
      for (const char* k : {"t", "U", "V", "n_max"}) coupling(k);
      break;
    case ModelKind::DEBHM:
      for (const char* k : {"J", "delta_J", "V"}) coupling(k);
      break;
    case ModelKind::Custom:
      for (const auto& t : terms) {
        if (t.ops.empty() || t.ops.size() > 2 || t.sites.size() != t.ops.size())
          throw Error(ErrorCode::ShapeMismatch, "custom term needs one or two (site, op) pairs");
        for (auto s : t.sites)
          if (s >= length) throw Error(ErrorCode::SiteOutOfRange, "custom term site outside chain");
        if (t.sites.size() == 2 && t.sites[0] >= t.sites[1])
          throw Error(ErrorCode::ShapeMismatch, "two-site term needs sites[0] < sites[1]");
      }
      break;
  }
  const double nmax = coupling_or("n_max", 1.0);
  if (nmax < 1.0) throw Error(ErrorCode::MissingCoupling, "n_max must be >= 1");
}

MatC local_operator(const std::string& name, std::size_t d) {
  MatC m = MatC::Zero(d, d);
  const cplx I(0.0, 1.0);
  if (name == "id") return MatC::Identity(d, d);
  if (name == "b" || name == "bdag" || name == "n") {
    for (std::size_t k = 1; k < d; ++k) m(k - 1, k) = std::sqrt(static_cast<double>(k));
    if (name == "b") return m;
    if (name == "bdag") return m.adjoint();
    return m.adjoint() * m;
  }
  if (d != 2) throw Error(ErrorCode::ShapeMismatch, "spin operator '" + name + "' requires d = 2");
  if (name == "X") m << 0, 1, 1, 0;
  else if (name == "Y") m << 0, -I, I, 0;
  else if (name == "Z") m << 1, 0, 0, -1;
  else if (name == "Sx") m << 0, 0.5, 0.5, 0;
  else if (name == "Sy") m << 0, -0.5 * I, 0.5 * I, 0;
  else if (name == "Sz") m << 0.5, 0, 0, -0.5;
  else if (name == "Sp") m << 0, 1, 0, 0;
  else if (name == "Sm") m << 0, 0, 1, 0;
  else throw Error(ErrorCode::ShapeMismatch, "unknown operator name '" + name + "'");
  return m;
}

LocalTerms local_terms(const HamiltonianSpec& spec) {
  spec.validate();
  LocalTerms lt;
  const std::size_t L = spec.length, d = spec.phys_dim();
  lt.length = L;
  lt.phys_dim = d;
  lt.onsite.assign(L, MatC::Zero(d, d));
  auto uniform = [&](double c) { return std::vector<double>(L, c); };
  auto add_nn = [&](const std::string& a, const std::string& b, std::vector<double> coeff) {
    lt.channels.push_back({local_operator(a, d), local_operator(b, d), 1, std::move(coeff)});
  };

  switch (spec.model) {
    case ModelKind::TFIM: {
      const double J = spec.coupling("J"), gx = spec.coupling("g_x"), gz = spec.coupling_or("g_z", 0.0);
      for (auto& o : lt.onsite) o = -gx * local_operator("X", 2) - gz * local_operator("Z", 2);
      add_nn("Z", "Z", uniform(J));
      break;
    }
    case ModelKind::Heisenberg: {
      const double jx = spec.has("J_x") ? spec.coupling("J_x") : spec.coupling("J");
      const double jy = spec.has("J_y") ? spec.coupling("J_y") : spec.coupling("J");
      const double jz = spec.has("J_z") ? spec.coupling("J_z") : spec.coupling("J");
      const double h = spec.coupling_or("h", 0.0);
      for (auto& o : lt.onsite) o = -h * local_operator("Sz", 2);
      add_nn("Sx", "Sx", uniform(jx));
      add_nn("Sy", "Sy", uniform(jy));
      add_nn("Sz", "Sz", uniform(jz));
      break;
    }
    case ModelKind::ExtendedBoseHubbard: {
      const double t = spec.coupling("t"), U = spec.coupling("U"), V = spec.coupling("V");
      const double mu = spec.coupling_or("mu", 0.0);
      const MatC n = local_operator("n", d), id = MatC::Identity(d, d);
      for (auto& o : lt.onsite) o = 0.5 * U * n * (n - id) - mu * n;
      add_nn("bdag", "b", uniform(-t));
      add_nn("b", "bdag", uniform(-t));
      add_nn("n", "n", uniform(V));
      break;
    }
    case ModelKind::DEBHM: {
      const double J = spec.coupling("J"), dJ = spec.coupling("delta_J"), V = spec.coupling("V");
      const double U = spec.coupling_or("U", 0.0), mu = spec.coupling_or("mu", 0.0);
      const MatC n = local_operator("n", d), id = MatC::Identity(d, d);
      for (auto& o : lt.onsite) o = 0.5 * U * n * (n - id) - mu * n;
      std::vector<double> hop(L);
      for (std::size_t b = 0; b < L; ++b) hop[b] = -(J - dJ * (b % 2 == 0 ? 1.0 : -1.0));
      add_nn("bdag", "b", hop);
      add_nn("b", "bdag", hop);
      add_nn("n", "n", uniform(V));
      break;
    }
    case ModelKind::Custom: {
      // Two-site terms sharing (opA, opB, range) share one automaton channel.
      std::map<std::tuple<std::string, std::string, std::size_t>, std::size_t> index;
      for (const auto& t : spec.terms) {
        if (t.ops.size() == 1) {
          lt.onsite[t.sites[0]] += t.coefficient * local_operator(t.ops[0], d);
          continue;
        }
        const std::size_t range = t.sites[1] - t.sites[0];
        auto key = std::make_tuple(t.ops[0], t.ops[1], range);
        auto it = index.find(key);
        if (it == index.end()) {
          it = index.emplace(key, lt.channels.size()).first;
          lt.channels.push_back({local_operator(t.ops[0], d), local_operator(t.ops[1], d), range,
                                 std::vector<double>(L, 0.0)});
        }
        lt.channels[it->second].coeff[t.sites[0]] += t.coefficient;
      }
      break;
    }
  }
  return lt;
}

std::vector<MatC> bond_hamiltonians(const LocalTerms& terms, bool periodic) {
  const std::size_t L = terms.length, d = terms.phys_dim;
  for (const auto& c : terms.channels)
    if (c.range > 1)
      for (double v : c.coeff)
        if (v != 0.0) throw Error(ErrorCode::UnsupportedRange, "bond gates need nearest-neighbour terms only");
  const MatC id = MatC::Identity(d, d);
  const std::size_t nb = periodic ? L : (L >= 1 ? L - 1 : 0);
  std::vector<MatC> out;
  for (std::size_t i = 0; i < nb; ++i) {
    const std::size_t j = (i + 1) % L;
    MatC h = MatC::Zero(d * d, d * d);
    for (const auto& c : terms.channels) h += c.coeff[i] * kron(c.a, c.b);
    double wl = 0.5, wr = 0.5;
    if (!periodic) {
      if (i == 0) wl = 1.0;
      if (i + 2 == L) wr = 1.0;
    }
    h += wl * kron(terms.onsite[i], id) + wr * kron(id, terms.onsite[j]);
    out.push_back(h);
  }
  return out;
}

std::vector<std::size_t> Mpo::bond_dims() const {
  std::vector<std::size_t> out;
  for (const auto& w : ws) out.push_back(w.dim(0));
  if (!ws.empty()) out.push_back(ws.back().dim(1));
  return out;
}

MatC Mpo::entry(std::size_t site, std::size_t bl, std::size_t br) const {
  const DenseTensor& w = ws.at(site);
  const std::size_t d = w.dim(2);
  MatC m(d, d);
  for (std::size_t s = 0; s < d; ++s)
    for (std::size_t t = 0; t < d; ++t) m(s, t) = w.at({bl, br, s, t});
  return m;
}

Mpo build_mpo(const LocalTerms& terms) {
  const std::size_t L = terms.length, d = terms.phys_dim;
  std::size_t D = 2;
  for (const auto& c : terms.channels) D += c.range;
  const std::size_t last = D - 1;
  Mpo mpo;
  mpo.phys_dim = d;
  const MatC id = MatC::Identity(d, d);

  for (std::size_t i = 0; i < L; ++i) {
    DenseTensor w({D, D, d, d});
    auto put = [&](std::size_t bl, std::size_t br, const MatC& op) {
      for (std::size_t s = 0; s < d; ++s)
        for (std::size_t t = 0; t < d; ++t) w.at({bl, br, s, t}) += op(s, t);
    };
    put(0, 0, id);
    put(last, last, id);
    put(last, 0, terms.onsite[i]);
    std::size_t q = 1;
    for (const auto& c : terms.channels) {
      if (i + c.range < L && c.coeff[i] != 0.0) put(last, q, c.coeff[i] * c.a);
      for (std::size_t m = 0; m + 1 < c.range; ++m) put(q + m, q + m + 1, id);
      put(q + c.range - 1, 0, c.b);
      q += c.range;
    }
    // Boundary vectors folded in: first tensor keeps the last row, last keeps the first column.
    const std::size_t r0 = (i == 0) ? last : 0, nr = (i == 0) ? 1 : D;
    const std::size_t c0 = 0, nc = (i + 1 == L) ? 1 : D;
    DenseTensor cut({nr, nc, d, d});
    for (std::size_t a = 0; a < nr; ++a)
      for (std::size_t b = 0; b < nc; ++b)
        for (std::size_t s = 0; s < d; ++s)
          for (std::size_t t = 0; t < d; ++t) cut.at({a, b, s, t}) = w.at({r0 + a, c0 + b, s, t});
    mpo.ws.push_back(std::move(cut));
  }
  return mpo;
}

Mpo build_mpo(const HamiltonianSpec& spec) { return build_mpo(local_terms(spec)); }

Mpo identity_mpo(std::size_t L, std::size_t d) {
  Mpo mpo;
  mpo.phys_dim = d;
  for (std::size_t i = 0; i < L; ++i) {
    DenseTensor w({1, 1, d, d});
    for (std::size_t s = 0; s < d; ++s) w.at({0, 0, s, s}) = 1.0;
    mpo.ws.push_back(w);
  }
  return mpo;
}

MpsState apply_mpo(const Mpo& mpo, const MpsState& state, const TruncationPolicy& policy) {
  state.validate();
  if (mpo.length() != state.length || mpo.phys_dim != state.phys_dim)
    throw Error(ErrorCode::ShapeMismatch, "MPO and MPS sizes differ");
  const std::size_t d = state.phys_dim;
  MpsState raw;
  raw.length = state.length;
  raw.phys_dim = d;
  raw.form = CanonicalForm::None;
  for (std::size_t i = 0; i < state.length; ++i) {
    const DenseTensor m = state.site_tensor(i);  // (a, t, c)
    const DenseTensor& w = mpo.ws[i];            // (bl, br, s, t)
    DenseTensor n = contract(w, {3}, m, {1});     // (bl, br, s, a, c)
    n = n.permute({3, 0, 2, 4, 1});               // (a, bl, s, c, br)
    const std::size_t l = m.dim(0) * w.dim(0), r = m.dim(2) * w.dim(1);
    raw.gammas.push_back(n.reshape({l, d, r}));
  }
  for (std::size_t i = 0; i < state.length; ++i) raw.lambdas.emplace_back(raw.gammas[i].dim(0), 1.0);
  raw.lambdas.emplace_back(1, 1.0);
  const double nrm = norm(raw);
  if (!(nrm > 1e-300)) {
    // Annihilated state: return the zero vector on the original bond structure.
    MpsState z = state;
    z.form = CanonicalForm::None;
    for (std::size_t i = 0; i < z.length; ++i) z.gammas[i] = state.site_tensor(i);
    z.gammas[0] *= cplx(0.0);
    return z;
  }
  MpsState c = canonicalize(raw, CanonicalForm::Right, policy);
  c.form = CanonicalForm::None;
  c.gammas[0] *= cplx(nrm);
  return c;
}

DenseTensor env_left_step(const DenseTensor& env, const DenseTensor& a, const DenseTensor& w) {
  // env (x, b, y), a (y, t, y'), w (b, b', s, t) -> (x', b', y')
  DenseTensor t1 = contract(env, {2}, a, {0});      // (x, b, t, y')
  DenseTensor t2 = contract(t1, {1, 2}, w, {0, 3});  // (x, y', b', s)
  DenseTensor t3 = contract(t2, {0, 3}, a.conj(), {0, 1});  // (y', b', x')
  return t3.permute({2, 1, 0});
}

DenseTensor env_right_step(const DenseTensor& env, const DenseTensor& b, const DenseTensor& w) {
  // env (x', b', y'), b (y, t, y'), w (b, b', s, t) -> (x, b, y)
  DenseTensor t1 = contract(b, {2}, env, {2});       // (y, t, x', b')
  DenseTensor t2 = contract(t1, {1, 3}, w, {3, 1});  // (y, x', b, s)
  DenseTensor t3 = contract(t2, {1, 3}, b.conj(), {2, 1});  // (y, b, x)
  return t3.permute({2, 1, 0});
}

cplx mpo_expectation_complex(const Mpo& mpo, const MpsState& state) {
  state.validate();
  if (mpo.length() != state.length || mpo.phys_dim != state.phys_dim)
    throw Error(ErrorCode::ShapeMismatch, "MPO and MPS sizes differ");
  DenseTensor env({1, 1, 1}, {cplx(1.0)});
  for (std::size_t i = 0; i < state.length; ++i) env = env_left_step(env, state.site_tensor(i), mpo.ws[i]);
  return env[0];
}

double mpo_expectation(const Mpo& mpo, const MpsState& state) {
  return std::real(mpo_expectation_complex(mpo, state));
}

MatC mpo_to_dense(const Mpo& mpo) {
  const std::size_t L = mpo.length(), d = mpo.phys_dim;
  if (L * std::log2(static_cast<double>(d)) > 14.0 + 1e-9)
    throw Error(ErrorCode::TooLarge, "dense materialization limited to 2^14 states");
  std::vector<MatC> ops;
  for (std::size_t br = 0; br < mpo.ws[0].dim(1); ++br) ops.push_back(mpo.entry(0, 0, br));
  for (std::size_t i = 1; i < L; ++i) {
    const std::size_t D_out = mpo.ws[i].dim(1);
    std::vector<MatC> next(D_out, MatC::Zero(ops[0].rows() * d, ops[0].cols() * d));
    for (std::size_t bl = 0; bl < ops.size(); ++bl)
      for (std::size_t br = 0; br < D_out; ++br) {
        const MatC e = mpo.entry(i, bl, br);
        if (e.cwiseAbs().maxCoeff() == 0.0) continue;
        next[br] += kron(ops[bl], e);
      }
    ops = std::move(next);
  }
  return ops[0];
}

}  // namespace qphase
