#include "qphase/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qphase {

std::size_t shape_product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

static void check_shape(const Shape& s) {
  for (auto e : s)
    if (e == 0) throw Error(ErrorCode::ShapeMismatch, "shape entries must be >= 1");
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_product(shape_), cplx(0.0));
}

DenseTensor::DenseTensor(Shape shape, std::vector<cplx> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_product(shape_))
    throw Error(ErrorCode::ShapeMismatch, "data length does not match shape");
}

DenseTensor DenseTensor::from_matrix(const MatC& m) {
  DenseTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<MatC>(t.raw(), m.rows(), m.cols()) = m;
  return t;
}

DenseTensor DenseTensor::identity(std::size_t n) {
  DenseTensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t[i * n + i] = 1.0;
  return t;
}

DenseTensor DenseTensor::scalar(cplx v) { return DenseTensor({1}, {v}); }

std::size_t DenseTensor::flat_index(const std::vector<std::size_t>& idx) const {
  if (idx.size() != shape_.size()) throw Error(ErrorCode::ShapeMismatch, "index rank");
  std::size_t f = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= shape_[k]) throw Error(ErrorCode::ShapeMismatch, "index out of range");
    f = f * shape_[k] + idx[k];
  }
  return f;
}

cplx& DenseTensor::at(std::initializer_list<std::size_t> idx) {
  return data_[flat_index(std::vector<std::size_t>(idx))];
}

cplx DenseTensor::at(std::initializer_list<std::size_t> idx) const {
  return data_[flat_index(std::vector<std::size_t>(idx))];
}

DenseTensor DenseTensor::reshape(Shape new_shape) const {
  if (shape_product(new_shape) != data_.size())
    throw Error(ErrorCode::ShapeMismatch, "reshape changes element count");
  return DenseTensor(std::move(new_shape), data_);
}

DenseTensor DenseTensor::permute(const std::vector<std::size_t>& perm) const {
  const std::size_t r = rank();
  if (perm.size() != r) throw Error(ErrorCode::ShapeMismatch, "permutation rank");
  std::vector<bool> seen(r, false);
  for (auto p : perm) {
    if (p >= r || seen[p]) throw Error(ErrorCode::ShapeMismatch, "invalid permutation");
    seen[p] = true;
  }
  Shape ns(r);
  for (std::size_t k = 0; k < r; ++k) ns[k] = shape_[perm[k]];
  std::vector<std::size_t> old_strides(r, 1);
  for (std::size_t k = r; k-- > 1;) old_strides[k - 1] = old_strides[k] * shape_[k];
  std::vector<std::size_t> stride(r);
  for (std::size_t k = 0; k < r; ++k) stride[k] = old_strides[perm[k]];

  DenseTensor out(ns);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  const std::size_t n = data_.size();
  for (std::size_t f = 0; f < n; ++f) {
    out.data_[f] = data_[src];
    for (std::size_t k = r; k-- > 0;) {
      ++idx[k];
      src += stride[k];
      if (idx[k] < ns[k]) break;
      src -= stride[k] * ns[k];
      idx[k] = 0;
    }
  }
  return out;
}

DenseTensor DenseTensor::conj() const {
  DenseTensor out = *this;
  for (auto& v : out.data_) v = std::conj(v);
  return out;
}

MatC DenseTensor::matrix() const {
  if (rank() != 2) throw Error(ErrorCode::NonMatrix, "tensor rank is not 2");
  return as_matrix(1);
}

MatC DenseTensor::as_matrix(std::size_t split) const {
  std::size_t rows = 1;
  for (std::size_t k = 0; k < split && k < rank(); ++k) rows *= shape_[k];
  const std::size_t cols = data_.size() / rows;
  return Eigen::Map<const MatC>(data_.data(), rows, cols);
}

double DenseTensor::norm() const {
  double s = 0.0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

DenseTensor& DenseTensor::operator*=(cplx s) {
  for (auto& v : data_) v *= s;
  return *this;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& o) {
  if (o.shape_ != shape_) throw Error(ErrorCode::ShapeMismatch, "addition shapes differ");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& o) {
  if (o.shape_ != shape_) throw Error(ErrorCode::ShapeMismatch, "subtraction shapes differ");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

DenseTensor operator*(cplx s, DenseTensor t) { return t *= s; }
DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw Error(ErrorCode::ShapeMismatch, "compare shapes differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

MatSvd svd_truncated(const MatC& m, const TruncationPolicy& policy) {
  if (policy.chi_max < 1) throw Error(ErrorCode::EmptySpectrum, "chi_max must be >= 1");
  Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic> cm = m;
  Eigen::BDCSVD<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>> svd(
      cm, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecR s = svd.singularValues();
  const Eigen::Index n = s.size();
  Eigen::Index keep = 0;
  for (Eigen::Index k = 0; k < n; ++k)
    if (s[k] >= policy.eps) ++keep;
  keep = std::min<Eigen::Index>(keep, static_cast<Eigen::Index>(policy.chi_max));
  if (keep == 0) throw Error(ErrorCode::EmptySpectrum, "all singular values below eps");

  MatSvd r;
  r.discarded_weight = 0.0;
  for (Eigen::Index k = keep; k < n; ++k) r.discarded_weight += s[k] * s[k];
  r.u = svd.matrixU().leftCols(keep);
  r.vh = svd.matrixV().leftCols(keep).adjoint();
  r.s = s.head(keep);

  // Gauge: largest-magnitude entry of each left vector real-positive.
  for (Eigen::Index k = 0; k < keep; ++k) {
    Eigen::Index best = 0;
    double bmag = -1.0;
    for (Eigen::Index i = 0; i < r.u.rows(); ++i) {
      const double a = std::abs(r.u(i, k));
      if (a > bmag + 1e-14) {
        bmag = a;
        best = i;
      }
    }
    if (bmag > 0) {
      const cplx ph = r.u(best, k) / bmag;
      r.u.col(k) *= std::conj(ph);
      r.vh.row(k) *= ph;
    }
  }
  if (policy.renormalize) {
    const double nrm = r.s.norm();
    if (nrm == 0.0) throw Error(ErrorCode::EmptySpectrum, "kept spectrum has zero norm");
    r.s /= nrm;
  }
  return r;
}

SvdResult svd_truncated(const DenseTensor& m, const TruncationPolicy& policy) {
  if (m.rank() != 2) throw Error(ErrorCode::NonMatrix, "svd_truncated needs a rank-2 tensor");
  MatSvd r = svd_truncated(m.matrix(), policy);
  SvdResult out;
  out.u = DenseTensor::from_matrix(r.u);
  out.vh = DenseTensor::from_matrix(r.vh);
  out.s.assign(r.s.data(), r.s.data() + r.s.size());
  out.discarded_weight = r.discarded_weight;
  return out;
}

std::pair<MatC, MatC> qr_reduced(const MatC& m) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  const Eigen::Index k = std::min(rows, cols);
  Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic> cm = m;
  Eigen::HouseholderQR<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>> qr(cm);
  MatC q = qr.householderQ() * Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>::Identity(rows, k);
  MatC r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < k; ++i) {
    const double a = std::abs(r(i, i));
    if (a > 0) {
      const cplx ph = r(i, i) / a;
      q.col(i) *= ph;
      r.row(i) *= std::conj(ph);
      r(i, i) = a;
    }
  }
  return {q, r};
}

std::pair<DenseTensor, DenseTensor> qr_reduced(const DenseTensor& m) {
  if (m.rank() != 2) throw Error(ErrorCode::NonMatrix, "qr_reduced needs a rank-2 tensor");
  auto [q, r] = qr_reduced(m.matrix());
  return {DenseTensor::from_matrix(q), DenseTensor::from_matrix(r)};
}

DenseTensor contract(const DenseTensor& a, const std::vector<std::size_t>& axes_a,
                     const DenseTensor& b, const std::vector<std::size_t>& axes_b) {
  if (axes_a.size() != axes_b.size())
    throw Error(ErrorCode::ShapeMismatch, "contracted axis lists differ in length");
  std::vector<bool> ca(a.rank(), false), cb(b.rank(), false);
  std::size_t kdim = 1;
  for (std::size_t k = 0; k < axes_a.size(); ++k) {
    const auto ia = axes_a[k], ib = axes_b[k];
    if (ia >= a.rank() || ib >= b.rank() || ca[ia] || cb[ib])
      throw Error(ErrorCode::ShapeMismatch, "invalid contraction axis");
    if (a.dim(ia) != b.dim(ib))
      throw Error(ErrorCode::ShapeMismatch, "paired axes have different extents");
    ca[ia] = cb[ib] = true;
    kdim *= a.dim(ia);
  }
  std::vector<std::size_t> pa, pb;
  Shape out_shape;
  std::size_t rows = 1, cols = 1;
  for (std::size_t k = 0; k < a.rank(); ++k)
    if (!ca[k]) {
      pa.push_back(k);
      out_shape.push_back(a.dim(k));
      rows *= a.dim(k);
    }
  for (auto k : axes_a) pa.push_back(k);
  for (auto k : axes_b) pb.push_back(k);
  for (std::size_t k = 0; k < b.rank(); ++k)
    if (!cb[k]) {
      pb.push_back(k);
      out_shape.push_back(b.dim(k));
      cols *= b.dim(k);
    }
  const DenseTensor ap = a.permute(pa);
  const DenseTensor bp = b.permute(pb);
  Eigen::Map<const MatC> ma(ap.raw(), rows, kdim);
  Eigen::Map<const MatC> mb(bp.raw(), kdim, cols);
  if (out_shape.empty()) out_shape = {1};
  DenseTensor out(out_shape);
  Eigen::Map<MatC>(out.raw(), rows, cols).noalias() = ma * mb;
  return out;
}

}  // namespace qphase
