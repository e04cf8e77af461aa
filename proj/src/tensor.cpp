#include "viper/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace viper {
namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_string(shape));
    n *= e;
  }
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " +
                     shape_string(a.shape()));
  }
}

bool is_integer(double x) { return x == std::floor(x); }

double pow_checked(double base, double exponent) {
  if (base < 0.0 && !is_integer(exponent)) {
    throw DomainError("pow: negative base with non-integer exponent");
  }
  if (base == 0.0 && exponent < 0.0) {
    throw DomainError("pow: zero base with negative exponent");
  }
  const double r = std::pow(base, exponent);
  if (!std::isfinite(r)) throw DomainError("pow: result overflow");
  return r;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != data_.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::zeros_like(const Tensor& other) { return Tensor(other.shape_); }

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for " +
                     shape_string(shape_));
  }
  return shape_[axis];
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    // bitwise comparison, distinguishes -0.0 and NaN payloads
    if (std::memcmp(&a.data()[i], &b.data()[i], sizeof(double)) != 0) return false;
  }
  return true;
}

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a.at(i, l);
      if (av == 0.0) continue;
      const double* brow = b.data() + l * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      out.at(i, j) = acc;
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: inner dimensions " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a.data() + l * m;
    const double* brow = b.data() + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += b.at(i);
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) -= b.at(i);
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= b.at(i);
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += c;
  return out;
}

Tensor sub_scalar(const Tensor& a, double c) { return add_scalar(a, -c); }

Tensor rsub_scalar(double c, const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = c - out.at(i);
  return out;
}

Tensor mul_scalar(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= c;
  return out;
}

Tensor pow_scalar(const Tensor& a, double exponent) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = pow_checked(out.at(i), exponent);
  return out;
}

Tensor pow(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "pow");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = pow_checked(out.at(i), b.at(i));
  return out;
}

Tensor exp(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.at(i) > 709.0) throw DomainError("exp: argument overflow");
    out.at(i) = std::exp(out.at(i));
  }
  return out;
}

Tensor log(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.at(i) <= 0.0) throw DomainError("log: non-positive argument");
    out.at(i) = std::log(out.at(i));
  }
  return out;
}

Tensor max0(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::max(out.at(i), 0.0);
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.at(i);
  return Tensor::scalar(acc);
}

namespace {

// Iteration strides for reducing one axis of a row-major tensor.
struct AxisView {
  std::size_t outer, axis_len, inner;
};

AxisView axis_view(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) {
    throw ShapeError("reduce: axis " + std::to_string(axis) + " out of range for " +
                     shape_string(a.shape()));
  }
  AxisView v{1, a.shape()[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= a.shape()[i];
  for (std::size_t i = axis + 1; i < a.rank(); ++i) v.inner *= a.shape()[i];
  return v;
}

std::vector<std::size_t> drop_axis(const std::vector<std::size_t>& shape, std::size_t axis) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out.push_back(shape[i]);
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  const AxisView v = axis_view(a, axis);
  Tensor out(drop_axis(a.shape(), axis));
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t k = 0; k < v.axis_len; ++k)
      for (std::size_t i = 0; i < v.inner; ++i)
        out.at(o * v.inner + i) += a.at((o * v.axis_len + k) * v.inner + i);
  return out;
}

Tensor mean(const Tensor& a) {
  Tensor s = sum(a);
  s.at(0) /= static_cast<double>(a.size());
  return s;
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
  Tensor s = sum_axis(a, axis);
  const double inv = 1.0 / static_cast<double>(a.shape()[axis]);
  for (std::size_t i = 0; i < s.size(); ++i) s.at(i) *= inv;
  return s;
}

Tensor reduce_max(const Tensor& a) {
  double best = a.at(0);
  for (std::size_t i = 1; i < a.size(); ++i) best = std::max(best, a.at(i));
  return Tensor::scalar(best);
}

Tensor reduce_max_axis(const Tensor& a, std::size_t axis) {
  const AxisView v = axis_view(a, axis);
  Tensor out = Tensor::full(drop_axis(a.shape(), axis), -std::numeric_limits<double>::infinity());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t k = 0; k < v.axis_len; ++k)
      for (std::size_t i = 0; i < v.inner; ++i) {
        double& slot = out.at(o * v.inner + i);
        slot = std::max(slot, a.at((o * v.axis_len + k) * v.inner + i));
      }
  return out;
}

double frobenius_norm(const Tensor& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.at(i) * a.at(i);
  return std::sqrt(acc);
}

Tensor softmax_rows(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  Tensor out = a;
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* r = out.data() + i * n;
    double mx = r[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, r[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = std::exp(r[j] - mx);
      denom += r[j];
    }
    for (std::size_t j = 0; j < n; ++j) r[j] /= denom;
  }
  return out;
}

Tensor log_softmax_rows(const Tensor& a) {
  require_matrix(a, "log_softmax_rows");
  Tensor out = a;
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* r = out.data() + i * n;
    double mx = r[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, r[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) denom += std::exp(r[j] - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < n; ++j) r[j] -= lse;
  }
  return out;
}

double l2_norm(const Tensor& a) { return frobenius_norm(a); }

Tensor l2_normalize(const Tensor& a) {
  const double n = l2_norm(a);
  if (n <= 1e-12) throw DegenerateInputError("l2_normalize: norm below 1e-12");
  return mul_scalar(a, 1.0 / n);
}

Tensor l2_normalize_rows(const Tensor& a, double eps) {
  require_matrix(a, "l2_normalize_rows");
  Tensor out = a;
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* r = out.data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += r[j] * r[j];
    const double norm = std::sqrt(acc);
    if (norm <= eps) continue;  // degenerate rows pass through unchanged
    for (std::size_t j = 0; j < n; ++j) r[j] /= norm;
  }
  return out;
}

Tensor stack_rows(const std::vector<const Tensor*>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t n = rows[0]->size();
  for (const Tensor* r : rows) {
    if (r->rank() != 1 || r->size() != n) {
      throw ShapeError("stack_rows: rows must be equal-length vectors");
    }
  }
  Tensor out({rows.size(), n});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = rows[i]->at(j);
  return out;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
  Tensor out(std::move(shape), a.values());
  return out;
}

Tensor row(const Tensor& a, std::size_t index) {
  require_matrix(a, "row");
  if (index >= a.rows()) {
    throw ShapeError("row: index " + std::to_string(index) + " out of range for " +
                     shape_string(a.shape()));
  }
  Tensor out({a.cols()});
  for (std::size_t j = 0; j < a.cols(); ++j) out.at(j) = a.at(index, j);
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.at(i) * b.at(i);
  return acc;
}

}  // namespace ops
}  // namespace viper
