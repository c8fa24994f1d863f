#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qphase/error.hpp"

namespace qphase {

using cplx = std::complex<double>;
using MatC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecC = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;
using Shape = std::vector<std::size_t>;

// Row-major complex tensor.
class DenseTensor {
 public:
  DenseTensor() : shape_{1}, data_(1, cplx(0.0)) {}
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<cplx> data);

  static DenseTensor from_matrix(const MatC& m);
  static DenseTensor identity(std::size_t n);
  static DenseTensor scalar(cplx v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  const std::vector<cplx>& data() const { return data_; }
  std::vector<cplx>& data() { return data_; }
  cplx* raw() { return data_.data(); }
  const cplx* raw() const { return data_.data(); }

  cplx& operator[](std::size_t flat) { return data_[flat]; }
  const cplx& operator[](std::size_t flat) const { return data_[flat]; }
  cplx& at(std::initializer_list<std::size_t> idx);
  cplx at(std::initializer_list<std::size_t> idx) const;

  std::size_t flat_index(const std::vector<std::size_t>& idx) const;

  DenseTensor reshape(Shape new_shape) const;
  DenseTensor permute(const std::vector<std::size_t>& perm) const;
  DenseTensor conj() const;

  // Rank-2 view helpers; matrix() requires rank 2.
  MatC matrix() const;
  // Group the first `split` axes as rows and the rest as columns.
  MatC as_matrix(std::size_t split) const;

  double norm() const;
  DenseTensor& operator*=(cplx s);
  DenseTensor& operator+=(const DenseTensor& o);
  DenseTensor& operator-=(const DenseTensor& o);

 private:
  Shape shape_;
  std::vector<cplx> data_;
};

DenseTensor operator*(cplx s, DenseTensor t);
DenseTensor operator+(DenseTensor a, const DenseTensor& b);
DenseTensor operator-(DenseTensor a, const DenseTensor& b);

std::size_t shape_product(const Shape& s);
double max_abs_diff(const DenseTensor& a, const DenseTensor& b);

struct TruncationPolicy {
  std::size_t chi_max = 64;
  double eps = 1e-10;
  bool renormalize = true;
};

struct SvdResult {
  DenseTensor u;
  std::vector<double> s;
  DenseTensor vh;
  double discarded_weight = 0.0;
};

SvdResult svd_truncated(const DenseTensor& m, const TruncationPolicy& policy);
// Matrix-level variant used by the tensor-network modules.
struct MatSvd {
  MatC u;
  VecR s;
  MatC vh;
  double discarded_weight = 0.0;
};
MatSvd svd_truncated(const MatC& m, const TruncationPolicy& policy);

std::pair<DenseTensor, DenseTensor> qr_reduced(const DenseTensor& m);
std::pair<MatC, MatC> qr_reduced(const MatC& m);

DenseTensor contract(const DenseTensor& a, const std::vector<std::size_t>& axes_a,
                     const DenseTensor& b, const std::vector<std::size_t>& axes_b);

}  // namespace qphase
