#include "qphase/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qphase/random.hpp"

namespace qphase {

namespace {

using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;

VecC random_vector(Rng& rng, Eigen::Index n) {
  VecC v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(rng.normal(), rng.normal());
  return v;
}

// Two passes of classical Gram-Schmidt against the first `k` columns.
void orthogonalize(const CMat& basis, Eigen::Index k, VecC& w) {
  for (int pass = 0; pass < 2; ++pass) {
    if (k == 0) return;
    const VecC c = basis.leftCols(k).adjoint() * w;
    w.noalias() -= basis.leftCols(k) * c;
  }
}

}  // namespace

LanczosResult lanczos_ground(const LinearOp& apply, const VecC& v0, const LanczosOptions& opts) {
  const Eigen::Index n = v0.size();
  if (n == 0) throw Error(ErrorCode::ShapeMismatch, "empty start vector");
  double v0n = v0.norm();
  if (!(v0n > 0.0)) throw Error(ErrorCode::Breakdown, "start vector has zero norm");
  Rng rng(opts.seed);

  const Eigen::Index kmax = std::min<Eigen::Index>(n, std::max(2, std::min(opts.max_iter, 100)));
  VecC start = v0 / v0n;
  LanczosResult res;
  int matvecs = 0;
  double best_value = 0.0;
  VecC best_vec = start;

  while (true) {
    CMat basis(n, kmax);
    std::vector<double> alpha, beta;
    basis.col(0) = start;
    Eigen::Index k = 0;
    bool exhausted = false;
    double ritz = 0.0;
    Eigen::VectorXd y;
    double anorm = 0.0;
    bool converged = false;

    for (;;) {
      VecC w = apply(basis.col(k));
      ++matvecs;
      const double a = std::real(basis.col(k).dot(w));
      alpha.push_back(a);
      w -= a * basis.col(k);
      if (k > 0) w -= beta.back() * basis.col(k - 1);
      if (opts.reorthogonalize) orthogonalize(basis, k + 1, w);
      double b = w.norm();

      const Eigen::Index m = k + 1;
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
      for (Eigen::Index i = 0; i < m; ++i) {
        t(i, i) = alpha[i];
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      ritz = es.eigenvalues()[0];
      y = es.eigenvectors().col(0);
      anorm = std::max({anorm, std::abs(es.eigenvalues()[0]), std::abs(es.eigenvalues()[m - 1])});
      const double est = b * std::abs(y[m - 1]);
      const double scale = std::max(1.0, anorm);

      if (b <= 1e-13 * scale) {
        // Invariant subspace reached; extend with a fresh direction if possible.
        if (m >= n) {
          exhausted = true;
          converged = true;
          break;
        }
        if (m >= kmax) break;
        VecC r = random_vector(rng, n);
        orthogonalize(basis, m, r);
        double rn = r.norm();
        if (rn < 1e-12) {
          exhausted = true;
          converged = true;
          break;
        }
        beta.push_back(0.0);
        basis.col(m) = r / rn;
        k = m;
        continue;
      }
      if (est <= opts.tol * scale && m >= 2) {
        converged = true;
        break;
      }
      if (m >= kmax || matvecs >= opts.max_iter) break;
      beta.push_back(b);
      basis.col(m) = w / b;
      k = m;
    }
    (void)exhausted;
    const Eigen::Index m = static_cast<Eigen::Index>(alpha.size());
    VecC x = basis.leftCols(m) * y.cast<cplx>();
    x /= x.norm();
    best_value = ritz;
    best_vec = x;
    if (converged || matvecs >= opts.max_iter) {
      res.converged = converged;
      break;
    }
    start = x;
  }

  VecC ax = apply(best_vec);
  res.value = std::real(best_vec.dot(ax));
  res.vector = best_vec;
  res.residual = (ax - res.value * best_vec).norm();
  res.iterations = matvecs;
  if (!res.converged && opts.require_convergence)
    throw Error(ErrorCode::NoConvergence,
                "Lanczos did not converge, residual " + std::to_string(res.residual));
  (void)best_value;
  return res;
}

ArnoldiResult arnoldi_dominant(const LinearOp& apply, const VecC& v0, int k, double tol,
                               int krylov_dim, int max_restarts) {
  const Eigen::Index n = v0.size();
  ArnoldiResult out;
  if (n == 0 || !(v0.norm() > 0)) throw Error(ErrorCode::NonConvergedEigensolve, "bad start vector");
  const Eigen::Index m_max = std::min<Eigen::Index>(n, std::max(krylov_dim, k + 2));
  VecC v = v0 / v0.norm();
  Rng rng(7);

  for (int restart = 0; restart <= max_restarts; ++restart) {
    CMat basis(n, m_max + 1);
    CMat h = CMat::Zero(m_max + 1, m_max);
    basis.col(0) = v;
    Eigen::Index m = 0;
    bool invariant = false;
    for (Eigen::Index j = 0; j < m_max; ++j) {
      VecC w = apply(basis.col(j));
      for (int pass = 0; pass < 2; ++pass) {
        const VecC c = basis.leftCols(j + 1).adjoint() * w;
        w.noalias() -= basis.leftCols(j + 1) * c;
        h.col(j).head(j + 1) += c;
      }
      const double b = w.norm();
      h(j + 1, j) = b;
      m = j + 1;
      if (b < 1e-13) {
        if (m >= n) {
          invariant = true;
          break;
        }
        // Deflated direction: continue the Krylov space with a random vector.
        VecC r = random_vector(rng, n);
        for (int pass = 0; pass < 2; ++pass) r -= basis.leftCols(m) * (basis.leftCols(m).adjoint() * r);
        h(j + 1, j) = 0.0;
        basis.col(j + 1) = r / r.norm();
        continue;
      }
      basis.col(j + 1) = w / b;
    }
    const CMat hm = h.topLeftCorner(m, m);
    Eigen::ComplexEigenSolver<CMat> es(hm);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NonConvergedEigensolve, "Hessenberg eigensolve failed");
    std::vector<Eigen::Index> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
    });
    const int kk = static_cast<int>(std::min<Eigen::Index>(k, m));
    const double scale = std::max(1e-300, std::abs(es.eigenvalues()[order[0]]));
    bool ok = true;
    out.values.clear();
    out.vectors.clear();
    VecC next = VecC::Zero(n);
    for (int i = 0; i < kk; ++i) {
      const VecC y = es.eigenvectors().col(order[i]);
      const double resid = invariant ? 0.0 : std::abs(h(m, m - 1)) * std::abs(y[m - 1]);
      if (resid > tol * scale) ok = false;
      VecC x = basis.leftCols(m) * y;
      x /= x.norm();
      out.values.push_back(es.eigenvalues()[order[i]]);
      out.vectors.push_back(x);
      next += x;
    }
    if (ok || invariant || m >= n) {
      out.converged = true;
      return out;
    }
    if (next.norm() < 1e-12) next = out.vectors[0];
    v = next / next.norm();
  }
  out.converged = false;
  return out;
}

MatC expm_hermitian(const MatC& h, cplx factor) {
  CMat hc = h;
  Eigen::SelfAdjointEigenSolver<CMat> es(hc);
  const VecC ev = (factor * es.eigenvalues().cast<cplx>()).array().exp().matrix();
  CMat out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  return out;
}

MatC kron(const MatC& a, const MatC& b) {
  MatC out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace qphase
