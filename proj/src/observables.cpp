#include "qphase/observables.hpp"

#include <algorithm>
#include <cmath>

#include "qphase/mpo.hpp"

namespace qphase {

namespace {

struct LinFit {
  Eigen::VectorXd coef;
  double r2 = 0.0;
  Eigen::VectorXd fitted;
};

// Ordinary least squares; columns of x are regressors (include a ones column for an intercept).
LinFit least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  LinFit f;
  f.coef = x.colPivHouseholderQr().solve(y);
  f.fitted = x * f.coef;
  const double mean = y.mean();
  const double ss_tot = (y.array() - mean).square().sum();
  const double ss_res = (y - f.fitted).squaredNorm();
  if (ss_tot > 1e-300) f.r2 = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
  else f.r2 = ss_res < 1e-24 ? 1.0 : 0.0;
  return f;
}

MatC delta_n(std::size_t d, double nbar) { return local_operator("n", d) - nbar * MatC::Identity(d, d); }

MatC parity_string(std::size_t d, double nbar) {
  MatC e = MatC::Zero(d, d);
  for (std::size_t k = 0; k < d; ++k) e(k, k) = std::exp(cplx(0.0, -M_PI * (double(k) - nbar)));
  return e;
}

cplx diag_value(const MpsState& s, CorrelatorKind kind, std::size_t i, double nbar) {
  const std::size_t d = s.phys_dim;
  if (kind == CorrelatorKind::SF) return local_expectation(s, local_operator("n", d), i);
  const MatC dn = delta_n(d, nbar);
  return local_expectation(s, MatC(dn * dn), i);
}

}  // namespace

CorrelatorKind correlator_from_string(const std::string& tag) {
  if (tag == "SF") return CorrelatorKind::SF;
  if (tag == "DW") return CorrelatorKind::DW;
  if (tag == "HI") return CorrelatorKind::HI;
  throw Error(ErrorCode::ConfigError, "unknown correlator '" + tag + "' (valid: SF, DW, HI)");
}

const char* correlator_name(CorrelatorKind k) {
  switch (k) {
    case CorrelatorKind::SF: return "SF";
    case CorrelatorKind::DW: return "DW";
    case CorrelatorKind::HI: return "HI";
  }
  return "?";
}

double mean_density(const MpsState& state) {
  const MatC n = local_operator("n", state.phys_dim);
  double s = 0.0;
  for (std::size_t i = 0; i < state.length; ++i) s += std::real(local_expectation(state, n, i));
  return s / double(state.length);
}

std::vector<cplx> correlator(const MpsState& state, CorrelatorKind kind, const std::vector<SitePair>& pairs) {
  const std::size_t L = state.length, d = state.phys_dim;
  for (const auto& [i, j] : pairs)
    if (i >= L || j >= L || (kind == CorrelatorKind::HI && i > j))
      throw Error(ErrorCode::SiteOutOfRange, "correlator pair outside chain or misordered");
  const double nbar = kind == CorrelatorKind::SF ? 0.0 : mean_density(state);
  const MatC b = local_operator("b", d), bd = local_operator("bdag", d);
  const MatC dn = delta_n(d, nbar), e = parity_string(d, nbar);
  std::vector<cplx> out;
  for (const auto& [i, j] : pairs) {
    if (i == j) {
      out.push_back(diag_value(state, kind, i, nbar));
      continue;
    }
    switch (kind) {
      case CorrelatorKind::SF:
        out.push_back(i < j ? two_point(state, bd, i, b, j) : two_point(state, b, j, bd, i));
        break;
      case CorrelatorKind::DW: {
        const double sg = ((i > j ? i - j : j - i) % 2) ? -1.0 : 1.0;
        out.push_back(sg * two_point(state, dn, std::min(i, j), dn, std::max(i, j)));
        break;
      }
      case CorrelatorKind::HI:
        out.push_back(string_correlation(state, MatC(dn * e), i, e, dn, j));
        break;
    }
  }
  return out;
}

std::vector<std::vector<cplx>> correlator_matrix(const MpsState& state, CorrelatorKind kind) {
  const std::size_t L = state.length, d = state.phys_dim;
  const double nbar = kind == CorrelatorKind::SF ? 0.0 : mean_density(state);
  std::vector<std::vector<cplx>> c;
  const MatC dn = delta_n(d, nbar), e = parity_string(d, nbar);
  switch (kind) {
    case CorrelatorKind::SF:
      c = correlation_matrix(state, local_operator("bdag", d), local_operator("b", d));
      break;
    case CorrelatorKind::DW:
      c = correlation_matrix(state, dn, dn);
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = i + 1; j < L; ++j)
          if ((j - i) % 2) c[i][j] = -c[i][j];
      break;
    case CorrelatorKind::HI:
      c = correlation_matrix(state, MatC(dn * e), dn, &e);
      break;
  }
  for (std::size_t i = 0; i < L; ++i) {
    c[i][i] = diag_value(state, kind, i, nbar);
    for (std::size_t j = 0; j < i; ++j) c[i][j] = kind == CorrelatorKind::SF ? std::conj(c[j][i]) : c[j][i];
  }
  return c;
}

double order_parameter(const std::vector<std::vector<cplx>>& c) {
  const std::size_t L = c.size();
  if (L == 0) return 0.0;
  cplx s = 0.0;
  for (const auto& row : c)
    for (const auto& v : row) s += v;
  return std::real(s) / double(L * L);
}

double order_parameter(const MpsState& state, CorrelatorKind kind) {
  return order_parameter(correlator_matrix(state, kind));
}

StructureFactor structure_factor_K(const MpsState& state) {
  const std::size_t L = state.length, d = state.phys_dim;
  const MatC n = local_operator("n", d);
  std::vector<double> mean(L);
  for (std::size_t i = 0; i < L; ++i) mean[i] = std::real(local_expectation(state, n, i));
  const auto nn = correlation_matrix(state, n, n);
  Eigen::MatrixXd conn(L, L);
  for (std::size_t i = 0; i < L; ++i) {
    conn(i, i) = std::real(local_expectation(state, MatC(n * n), i)) - mean[i] * mean[i];
    for (std::size_t j = i + 1; j < L; ++j) conn(i, j) = conn(j, i) = std::real(nn[i][j]) - mean[i] * mean[j];
  }
  StructureFactor sf;
  const std::size_t kmax = std::min<std::size_t>(5, L);
  for (std::size_t k = 1; k <= kmax; ++k) {
    const double q = 2.0 * M_PI * double(k) / double(L + 1);
    double s = 0.0;
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < L; ++j) s += std::cos(q * (double(i) - double(j))) * conn(i, j);
    sf.q.push_back(q);
    sf.s.push_back(s / double(L));
  }
  for (std::size_t w = kmax; w >= 3; --w) {
    Eigen::MatrixXd x(w, 2);
    Eigen::VectorXd y(w);
    for (std::size_t k = 0; k < w; ++k) {
      x(k, 0) = 1.0;
      x(k, 1) = sf.q[k];
      y(k) = sf.s[k];
    }
    const LinFit f = least_squares(x, y);
    if (f.r2 >= 0.99 && f.coef(1) > 1e-12) {
      sf.fit.slope = f.coef(1);
      sf.fit.prefactor = f.coef(0);
      sf.fit.r_squared = f.r2;
      sf.fit.xmin = sf.q.front();
      sf.fit.xmax = sf.q[w - 1];
      sf.K = 1.0 / (2.0 * M_PI * sf.fit.slope);
      return sf;
    }
  }
  throw Error(ErrorCode::NonLinearRegime, "S(q) is not linear over the lowest momenta");
}

double renyi_entropy(const std::vector<double>& schmidt, double alpha) {
  if (!(alpha > 0)) throw Error(ErrorCode::ConfigError, "Renyi index must be positive");
  if (std::abs(alpha - 1.0) < 1e-12) return von_neumann_entropy(schmidt);
  double s = 0.0;
  for (double l : schmidt)
    if (l > 0) s += std::pow(l * l, alpha);
  return std::log(s) / (1.0 - alpha);
}

std::vector<double> renyi_profile(const MpsState& state, double alpha) {
  std::vector<double> out;
  for (const auto& b : entanglement_profile(state)) out.push_back(renyi_entropy(b.spectrum, alpha));
  return out;
}

FitResult central_charge_fit(const std::vector<double>& profile, std::size_t L, int boundary_b, double alpha,
                             bool alternating) {
  if (boundary_b != 1 && boundary_b != 2) throw Error(ErrorCode::ConfigError, "boundary_b must be 1 or 2");
  if (!(alpha > 0)) throw Error(ErrorCode::ConfigError, "Renyi index must be positive");
  if (profile.size() + 1 != L) throw Error(ErrorCode::ShapeMismatch, "profile must have L-1 entries");
  const std::size_t lo = std::max<std::size_t>(1, (L + 3) / 4), hi = std::min<std::size_t>(L - 1, 3 * L / 4);
  const std::size_t npar = alternating ? 3 : 2;
  if (hi < lo || hi - lo + 1 < npar + 1) throw Error(ErrorCode::PoorFit, "too few points in the fit window");
  const std::size_t m = hi - lo + 1;
  Eigen::MatrixXd x(m, npar);
  Eigen::VectorXd y(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double l = double(lo + k), sn = std::sin(M_PI * l / double(L));
    x(k, 0) = 1.0;
    x(k, 1) = std::log(double(L) / M_PI * sn);
    if (alternating) x(k, 2) = ((lo + k) % 2 ? -1.0 : 1.0) / (double(L) * sn);
    y(k) = profile[lo + k - 1];
  }
  const LinFit f = least_squares(x, y);
  if (!f.coef.allFinite()) throw Error(ErrorCode::PoorFit, "central-charge regression failed");
  FitResult r;
  r.slope = f.coef(1) * 6.0 * boundary_b * alpha / (1.0 + alpha);
  r.prefactor = f.coef(0);
  r.alternating = alternating ? f.coef(2) : 0.0;
  r.r_squared = f.r2;
  r.xmin = double(lo);
  r.xmax = double(hi);
  return r;
}

FitResult power_law_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::ShapeMismatch, "xs and ys differ in length");
  if (xs.size() < 5) throw Error(ErrorCode::PoorFit, "power-law fit needs at least 5 points");
  const std::size_t m = xs.size();
  Eigen::MatrixXd x(m, 2);
  Eigen::VectorXd y(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (!(xs[k] > 0) || !(ys[k] > 0)) throw Error(ErrorCode::NonPositiveData, "power-law data must be positive");
    x(k, 0) = 1.0;
    x(k, 1) = std::log(xs[k]);
    y(k) = std::log(ys[k]);
  }
  const LinFit f = least_squares(x, y);
  FitResult r;
  r.slope = f.coef(1);
  r.prefactor = std::exp(f.coef(0));
  r.r_squared = f.r2;
  r.xmin = *std::min_element(xs.begin(), xs.end());
  r.xmax = *std::max_element(xs.begin(), xs.end());
  for (std::size_t k = 0; k < m; ++k) r.residual.push_back(ys[k] / (r.prefactor * std::pow(xs[k], r.slope)));
  return r;
}

double inverse_compressibility(const std::vector<std::pair<double, double>>& table, double n, double dn) {
  if (!(dn > 0)) throw Error(ErrorCode::NonUniformGrid, "dn must be positive");
  auto lookup = [&](double x) {
    for (const auto& [nn, e] : table)
      if (std::abs(nn - x) <= 1e-9 * std::max(1.0, std::abs(x))) return e;
    throw Error(ErrorCode::NonUniformGrid, "filling " + std::to_string(x) + " missing from the table");
  };
  const double ep = lookup(n + dn), e0 = lookup(n), em = lookup(n - dn);
  return n * n * (ep + em - 2.0 * e0) / (dn * dn);
}

double degeneracy_indicator(std::vector<double> schmidt) {
  std::sort(schmidt.begin(), schmidt.end(), std::greater<double>());
  double s = 0.0;
  for (std::size_t i = 0; i < schmidt.size(); ++i) s += (i % 2 ? -1.0 : 1.0) * schmidt[i] * schmidt[i];
  return s;
}

Diagnostics diagnostics(const MpsState& state) {
  const std::size_t L = state.length, d = state.phys_dim;
  Diagnostics out;
  if (d == 2) {
    const MatC z = local_operator("Z", 2);
    for (std::size_t i = 0; i < L; ++i) out.s_stag += (i % 2 ? -1.0 : 1.0) * std::real(local_expectation(state, z, i));
    out.s_stag /= double(L);
  } else {
    out.s_stag = std::nan("");
  }
  const double nbar = mean_density(state);
  const MatC n = local_operator("n", d);
  for (std::size_t i = 0; i < L / 2; ++i)
    out.o_cdw += (i % 2 ? -1.0 : 1.0) * (std::real(local_expectation(state, n, i)) - nbar);
  out.o_cdw_normalized = L >= 2 ? out.o_cdw / double(L / 2) : 0.0;
  if (L >= 2) out.d_es = degeneracy_indicator(entanglement_profile(state)[L / 2 - 1].spectrum);
  return out;
}

}  // namespace qphase
