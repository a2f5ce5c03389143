#include "hmoe/tensor.hpp"

#include <cmath>
#include <utility>

#include "hmoe/errors.hpp"

namespace hmoe {

namespace {

std::int64_t shape_size(const std::vector<int>& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  std::int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw DimensionError("tensor extents must be positive");
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_size(shape_)), 0.0);
  cols_ = shape_.size() == 2 ? shape_[1] : 0;
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_size(shape_) != static_cast<std::int64_t>(values.size()))
    throw DimensionError("tensor value count does not match shape");
  data_ = std::move(values);
  cols_ = shape_.size() == 2 ? shape_[1] : 0;
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

int Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() requires a rank-2 tensor");
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() requires a rank-2 tensor");
  return shape_[1];
}

std::vector<double>& Tensor::grad() {
  if (!has_grad_) {
    grad_.assign(data_.size(), 0.0);
    has_grad_ = true;
  }
  return grad_;
}

void Tensor::zero_grad() {
  if (has_grad_) grad_.assign(data_.size(), 0.0);
}

void Tensor::drop_grad() {
  grad_.clear();
  has_grad_ = false;
}

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

void gemm_nn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* ci = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  // a: m x k, b: n x k, c += a * b^T
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* ci = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  // a: k x m, b: k x n, c += a^T * b
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<size_t>(p) * m;
    const double* bp = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double api = ap[i];
      double* ci = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

}  // namespace hmoe
