#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hicl {

/// Dense row-major tensor of 64-bit floats, rank 1 or 2.
///
/// Tensors behave as values: copies share the underlying buffer and the
/// convention throughout the library is that a tensor is never written
/// after construction. The one sanctioned exception is an optimizer
/// updating parameters between steps, which requires exclusive access.
class Tensor {
 public:
  Tensor() = default;

  /// Uninitialized storage of the given shape (rank 1 or 2).
  explicit Tensor(std::vector<std::size_t> shape);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor from_vector(std::vector<double> v);
  static Tensor from_matrix(std::size_t rows, std::size_t cols,
                            std::vector<double> v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  /// Row/column view of a rank-2 tensor; a rank-1 tensor is a single row.
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    return shape_.size() == 2 ? shape_[1] : (shape_.empty() ? 0 : shape_[0]);
  }

  double at(std::size_t i) const { return data_.get()[i]; }
  double at(std::size_t r, std::size_t c) const {
    return data_.get()[r * cols() + c];
  }

  double* data() { return data_.get(); }
  const double* data() const { return data_.get(); }
  std::span<double> span() { return {data_.get(), size_}; }
  std::span<const double> span() const { return {data_.get(), size_}; }

  /// Deep copy that owns fresh storage.
  Tensor clone() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::size_t size_ = 0;
  std::shared_ptr<double[]> data_;
};

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Bitwise equality of shape and payload.
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace hicl
