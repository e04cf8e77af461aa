#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "viper/errors.hpp"

namespace viper {

// Dense row-major tensor of 64-bit floats. Plain value type; gradients are
// tracked on the autodiff tape, but leaves keep an optional grad mirror so
// optimizer code can work on named tensors directly.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor zeros_like(const Tensor& other);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t rows() const { return extent(0); }
  std::size_t cols() const { return extent(1); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool is_scalar() const { return data_.size() == 1; }

  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);
bool bit_equal(const Tensor& a, const Tensor& b);

// Plain forward math. Every tape op computes its forward value through these
// functions, so graph-attached and frozen-model evaluations are bit-identical.
namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor sub_scalar(const Tensor& a, double c);   // a - c
Tensor rsub_scalar(double c, const Tensor& a);  // c - a
Tensor mul_scalar(const Tensor& a, double c);
Tensor pow_scalar(const Tensor& a, double exponent);
Tensor pow(const Tensor& a, const Tensor& b);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor max0(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor sum_axis(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a);
Tensor mean_axis(const Tensor& a, std::size_t axis);
Tensor reduce_max(const Tensor& a);
Tensor reduce_max_axis(const Tensor& a, std::size_t axis);
double frobenius_norm(const Tensor& a);

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

double l2_norm(const Tensor& a);
Tensor l2_normalize(const Tensor& a);
Tensor l2_normalize_rows(const Tensor& a, double eps);

Tensor stack_rows(const std::vector<const Tensor*>& rows);
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
Tensor row(const Tensor& a, std::size_t index);
double dot(const Tensor& a, const Tensor& b);

}  // namespace ops
}  // namespace viper
