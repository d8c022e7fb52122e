#include "hicl/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "hicl/errors.hpp"

namespace hicl {

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 2) {
    throw NumericsError("tensor rank must be 1 or 2, got rank " +
                        std::to_string(shape_.size()));
  }
  size_ = 1;
  for (std::size_t d : shape_) size_ *= d;
  data_ = std::shared_ptr<double[]>(new double[size_ == 0 ? 1 : size_]);
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t.data()[0] = v;
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  return full(std::move(shape), 0.0);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = v;
  return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
  Tensor t({v.size()});
  std::memcpy(t.data(), v.data(), v.size() * sizeof(double));
  return t;
}

Tensor Tensor::from_matrix(std::size_t rows, std::size_t cols,
                           std::vector<double> v) {
  if (v.size() != rows * cols) {
    throw NumericsError("from_matrix: payload size " +
                        std::to_string(v.size()) + " != " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
  Tensor t({rows, cols});
  std::memcpy(t.data(), v.data(), v.size() * sizeof(double));
  return t;
}

Tensor Tensor::clone() const {
  if (!data_) return Tensor();
  Tensor t(shape_);
  std::memcpy(t.data(), data(), size_ * sizeof(double));
  return t;
}

bool Tensor::all_finite() const {
  const double* p = data();
  for (std::size_t i = 0; i < size_; ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << ")";
  return os.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw NumericsError("max_abs_diff: shape mismatch " + a.shape_str() +
                        " vs " + b.shape_str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(a.at(i) - b.at(i)));
  }
  return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace hicl
