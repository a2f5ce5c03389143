#pragma once

#include <cstdint>
#include <vector>

namespace hmoe {

/// Dense row-major tensor of 64-bit floats with an optional gradient
/// buffer of the same shape. Rank is 1 or 2 everywhere in this library;
/// scalars are shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  int rows() const;  // rank-2 only
  int cols() const;  // rank-2 only

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  /// Gradient buffer, allocated (zero-filled) on first access.
  std::vector<double>& grad();
  const std::vector<double>* maybe_grad() const { return has_grad_ ? &grad_ : nullptr; }
  bool has_grad() const { return has_grad_; }
  void zero_grad();
  void drop_grad();

  bool all_finite() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool has_grad_ = false;
  int cols_ = 0;  // cached for at()
};

// C = A * B variants on raw row-major buffers. The _acc forms accumulate
// into C; callers zero the output first when they need a plain product.
void gemm_nn_acc(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nt_acc(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n);

}  // namespace hmoe
