#include "viper/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace viper::ad {
namespace {

// Derivative of x^q in x with the same subgradient conventions the hinge
// uses: at x == 0 the q < 1 branch (infinite slope) is clamped to 0.
double pow_base_derivative(double x, double q) {
  if (x == 0.0) {
    if (q == 1.0) return 1.0;
    return 0.0;
  }
  return q * std::pow(x, q - 1.0);
}

struct AxisView {
  std::size_t outer, axis_len, inner;
};

AxisView axis_view(const std::vector<std::size_t>& shape, std::size_t axis) {
  AxisView v{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

Var emit(Tape& tape, Op op, std::vector<std::size_t> inputs, Tensor value, double scalar,
         long axis);

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("var: empty handle");
  return tape_->nodes_[id_].value;
}

const Tensor& Var::grad() const {
  if (!tape_) throw ContractError("var: empty handle");
  const Tape::Node& n = tape_->nodes_[id_];
  if (!n.has_grad) throw ContractError("var: gradient not populated; run backward first");
  return n.grad;
}

bool Var::has_grad() const { return tape_ && tape_->nodes_[id_].has_grad; }

bool Var::requires_grad() const { return tape_ && tape_->nodes_[id_].requires_grad; }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.op = Op::Leaf;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Tensor& delta) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.value);
    n.has_grad = true;
  }
  for (std::size_t i = 0; i < delta.size(); ++i) n.grad.at(i) += delta.at(i);
}

void Tape::backward(const Var& root) {
  if (root.tape() != this) throw ContractError("backward: root from another tape");
  if (backward_done_) throw ContractError("backward: called twice without reset_grads");
  const Node& r = nodes_[root.id()];
  if (r.value.size() != 1) throw ContractError("backward: root must be scalar");
  backward_done_ = true;
  if (!r.requires_grad) return;  // nothing trainable upstream
  {
    Node& rn = nodes_[root.id()];
    rn.grad = Tensor::full(rn.value.shape(), 1.0);
    rn.has_grad = true;
  }
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    backprop_node(i);
  }
}

void Tape::reset_grads() {
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  backward_done_ = false;
}

void Tape::backprop_node(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad || !n.requires_grad || n.op == Op::Leaf) return;
  const Tensor& g = n.grad;
  const auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul:
      accumulate(n.inputs[0], ops::matmul_nt(g, in(1)));
      accumulate(n.inputs[1], ops::matmul_tn(in(0), g));
      break;
    case Op::Transpose:
      accumulate(n.inputs[0], ops::transpose(g));
      break;
    case Op::Add:
      accumulate(n.inputs[0], g);
      accumulate(n.inputs[1], g);
      break;
    case Op::Sub:
      accumulate(n.inputs[0], g);
      accumulate(n.inputs[1], ops::mul_scalar(g, -1.0));
      break;
    case Op::Mul:
      accumulate(n.inputs[0], ops::mul(g, in(1)));
      accumulate(n.inputs[1], ops::mul(g, in(0)));
      break;
    case Op::AddScalar:
      accumulate(n.inputs[0], g);
      break;
    case Op::RsubScalar:
      accumulate(n.inputs[0], ops::mul_scalar(g, -1.0));
      break;
    case Op::MulScalar:
      accumulate(n.inputs[0], ops::mul_scalar(g, n.scalar));
      break;
    case Op::PowScalar: {
      const Tensor& x = in(0);
      Tensor d = Tensor::zeros_like(x);
      for (std::size_t i = 0; i < x.size(); ++i)
        d.at(i) = g.at(i) * pow_base_derivative(x.at(i), n.scalar);
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::PowTensor: {
      const Tensor& x = in(0);
      const Tensor& e = in(1);
      if (nodes_[n.inputs[0]].requires_grad) {
        Tensor d = Tensor::zeros_like(x);
        for (std::size_t i = 0; i < x.size(); ++i)
          d.at(i) = g.at(i) * pow_base_derivative(x.at(i), e.at(i));
        accumulate(n.inputs[0], d);
      }
      if (nodes_[n.inputs[1]].requires_grad) {
        Tensor d = Tensor::zeros_like(e);
        for (std::size_t i = 0; i < e.size(); ++i) {
          const double base = x.at(i);
          if (base == 0.0 && e.at(i) > 0.0) {
            d.at(i) = 0.0;
            continue;
          }
          if (base <= 0.0) throw DomainError("pow: exponent gradient needs positive base");
          d.at(i) = g.at(i) * n.value.at(i) * std::log(base);
        }
        accumulate(n.inputs[1], d);
      }
      break;
    }
    case Op::Exp:
      accumulate(n.inputs[0], ops::mul(g, n.value));
      break;
    case Op::Log: {
      const Tensor& x = in(0);
      Tensor d = Tensor::zeros_like(x);
      for (std::size_t i = 0; i < x.size(); ++i) d.at(i) = g.at(i) / x.at(i);
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::Max0: {
      const Tensor& x = in(0);
      Tensor d = Tensor::zeros_like(x);
      for (std::size_t i = 0; i < x.size(); ++i) d.at(i) = x.at(i) > 0.0 ? g.at(i) : 0.0;
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::Sum: {
      accumulate(n.inputs[0], Tensor::full(in(0).shape(), g.at(0)));
      break;
    }
    case Op::Mean: {
      accumulate(n.inputs[0],
                 Tensor::full(in(0).shape(), g.at(0) / static_cast<double>(in(0).size())));
      break;
    }
    case Op::SumAxis:
    case Op::MeanAxis: {
      const Tensor& x = in(0);
      const AxisView v = axis_view(x.shape(), static_cast<std::size_t>(n.axis));
      const double scale =
          n.op == Op::MeanAxis ? 1.0 / static_cast<double>(v.axis_len) : 1.0;
      Tensor d = Tensor::zeros_like(x);
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t k = 0; k < v.axis_len; ++k)
          for (std::size_t i = 0; i < v.inner; ++i)
            d.at((o * v.axis_len + k) * v.inner + i) = g.at(o * v.inner + i) * scale;
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::Max: {
      const Tensor& x = in(0);
      Tensor d = Tensor::zeros_like(x);
      std::size_t best = 0;
      for (std::size_t i = 1; i < x.size(); ++i)
        if (x.at(i) > x.at(best)) best = i;
      d.at(best) = g.at(0);
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::MaxAxis: {
      const Tensor& x = in(0);
      const AxisView v = axis_view(x.shape(), static_cast<std::size_t>(n.axis));
      Tensor d = Tensor::zeros_like(x);
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < v.inner; ++i) {
          std::size_t best = 0;
          double bv = x.at((o * v.axis_len) * v.inner + i);
          for (std::size_t k = 1; k < v.axis_len; ++k) {
            const double cv = x.at((o * v.axis_len + k) * v.inner + i);
            if (cv > bv) {
              bv = cv;
              best = k;
            }
          }
          d.at((o * v.axis_len + best) * v.inner + i) = g.at(o * v.inner + i);
        }
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::FrobeniusNorm: {
      const Tensor& x = in(0);
      const double norm = n.value.at(0);
      Tensor d = Tensor::zeros_like(x);
      if (norm != 0.0) {  // gradient at the zero tensor is defined as zero
        for (std::size_t i = 0; i < x.size(); ++i) d.at(i) = g.at(0) * x.at(i) / norm;
      }
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::SoftmaxRows: {
      const Tensor& y = n.value;
      Tensor d = Tensor::zeros_like(y);
      const std::size_t cols = y.cols();
      for (std::size_t i = 0; i < y.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += g.at(i, j) * y.at(i, j);
        for (std::size_t j = 0; j < cols; ++j)
          d.at(i, j) = y.at(i, j) * (g.at(i, j) - s);
      }
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::LogSoftmaxRows: {
      const Tensor& y = n.value;  // log-probabilities
      Tensor d = Tensor::zeros_like(y);
      const std::size_t cols = y.cols();
      for (std::size_t i = 0; i < y.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += g.at(i, j);
        for (std::size_t j = 0; j < cols; ++j)
          d.at(i, j) = g.at(i, j) - std::exp(y.at(i, j)) * s;
      }
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::L2Normalize: {
      const Tensor& x = in(0);
      const Tensor& y = n.value;
      const double norm = ops::l2_norm(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += g.at(i) * y.at(i);
      Tensor d = Tensor::zeros_like(x);
      for (std::size_t i = 0; i < x.size(); ++i) d.at(i) = (g.at(i) - y.at(i) * s) / norm;
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::L2NormalizeRows: {
      const Tensor& x = in(0);
      const Tensor& y = n.value;
      const std::size_t cols = x.cols();
      Tensor d = Tensor::zeros_like(x);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < cols; ++j) sq += x.at(i, j) * x.at(i, j);
        const double norm = std::sqrt(sq);
        if (norm <= n.scalar) {
          // degenerate rows were passed through unchanged
          for (std::size_t j = 0; j < cols; ++j) d.at(i, j) = g.at(i, j);
          continue;
        }
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += g.at(i, j) * y.at(i, j);
        for (std::size_t j = 0; j < cols; ++j)
          d.at(i, j) = (g.at(i, j) - y.at(i, j) * s) / norm;
      }
      accumulate(n.inputs[0], d);
      break;
    }
    case Op::StackRows: {
      const std::size_t cols = n.value.cols();
      for (std::size_t r = 0; r < n.inputs.size(); ++r) {
        Tensor d({cols});
        for (std::size_t j = 0; j < cols; ++j) d.at(j) = g.at(r, j);
        accumulate(n.inputs[r], d);
      }
      break;
    }
    case Op::Reshape:
      accumulate(n.inputs[0], ops::reshape(g, in(0).shape()));
      break;
    case Op::Row: {
      const Tensor& x = in(0);
      Tensor d = Tensor::zeros_like(x);
      const std::size_t r = static_cast<std::size_t>(n.axis);
      for (std::size_t j = 0; j < x.cols(); ++j) d.at(r, j) = g.at(j);
      accumulate(n.inputs[0], d);
      break;
    }
  }
}

namespace {

Tape& same_tape(const Var& a, const Var& b, const char* op) {
  if (!a.tape() || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands from different tapes");
  }
  return *a.tape();
}

Tape& own_tape(const Var& a, const char* op) {
  if (!a.tape()) throw ContractError(std::string(op) + ": empty handle");
  return *a.tape();
}

}  // namespace

Var emit(Tape& tape, Op op, std::vector<std::size_t> inputs, Tensor value, double scalar,
         long axis) {
  Tape::Node node;
  node.op = op;
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  node.scalar = scalar;
  node.axis = axis;
  for (std::size_t id : node.inputs) {
    node.requires_grad = node.requires_grad || tape.nodes_[id].requires_grad;
  }
  tape.nodes_.push_back(std::move(node));
  return Var(&tape, tape.nodes_.size() - 1);
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "matmul");
  return emit(t, Op::MatMul, {a.id(), b.id()}, ops::matmul(a.value(), b.value()), 0.0, -1);
}

Var transpose(const Var& a) {
  Tape& t = own_tape(a, "transpose");
  return emit(t, Op::Transpose, {a.id()}, ops::transpose(a.value()), 0.0, -1);
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "add");
  return emit(t, Op::Add, {a.id(), b.id()}, ops::add(a.value(), b.value()), 0.0, -1);
}

Var add(const Var& a, double c) {
  Tape& t = own_tape(a, "add");
  return emit(t, Op::AddScalar, {a.id()}, ops::add_scalar(a.value(), c), c, -1);
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "sub");
  return emit(t, Op::Sub, {a.id(), b.id()}, ops::sub(a.value(), b.value()), 0.0, -1);
}

Var sub(const Var& a, double c) { return add(a, -c); }

Var sub(double c, const Var& a) {
  Tape& t = own_tape(a, "sub");
  return emit(t, Op::RsubScalar, {a.id()}, ops::rsub_scalar(c, a.value()), c, -1);
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "mul");
  return emit(t, Op::Mul, {a.id(), b.id()}, ops::mul(a.value(), b.value()), 0.0, -1);
}

Var mul(const Var& a, double c) {
  Tape& t = own_tape(a, "mul");
  return emit(t, Op::MulScalar, {a.id()}, ops::mul_scalar(a.value(), c), c, -1);
}

Var pow(const Var& a, double exponent) {
  Tape& t = own_tape(a, "pow");
  return emit(t, Op::PowScalar, {a.id()}, ops::pow_scalar(a.value(), exponent), exponent, -1);
}

Var pow(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "pow");
  return emit(t, Op::PowTensor, {a.id(), b.id()}, ops::pow(a.value(), b.value()), 0.0, -1);
}

Var exp(const Var& a) {
  Tape& t = own_tape(a, "exp");
  return emit(t, Op::Exp, {a.id()}, ops::exp(a.value()), 0.0, -1);
}

Var log(const Var& a) {
  Tape& t = own_tape(a, "log");
  return emit(t, Op::Log, {a.id()}, ops::log(a.value()), 0.0, -1);
}

Var max0(const Var& a) {
  Tape& t = own_tape(a, "max0");
  return emit(t, Op::Max0, {a.id()}, ops::max0(a.value()), 0.0, -1);
}

Var sum(const Var& a) {
  Tape& t = own_tape(a, "sum");
  return emit(t, Op::Sum, {a.id()}, ops::sum(a.value()), 0.0, -1);
}

Var sum(const Var& a, std::size_t axis) {
  Tape& t = own_tape(a, "sum");
  return emit(t, Op::SumAxis, {a.id()}, ops::sum_axis(a.value(), axis), 0.0,
              static_cast<long>(axis));
}

Var mean(const Var& a) {
  Tape& t = own_tape(a, "mean");
  return emit(t, Op::Mean, {a.id()}, ops::mean(a.value()), 0.0, -1);
}

Var mean(const Var& a, std::size_t axis) {
  Tape& t = own_tape(a, "mean");
  return emit(t, Op::MeanAxis, {a.id()}, ops::mean_axis(a.value(), axis), 0.0,
              static_cast<long>(axis));
}

Var reduce_max(const Var& a) {
  Tape& t = own_tape(a, "reduce_max");
  return emit(t, Op::Max, {a.id()}, ops::reduce_max(a.value()), 0.0, -1);
}

Var reduce_max(const Var& a, std::size_t axis) {
  Tape& t = own_tape(a, "reduce_max");
  return emit(t, Op::MaxAxis, {a.id()}, ops::reduce_max_axis(a.value(), axis), 0.0,
              static_cast<long>(axis));
}

Var frobenius_norm(const Var& a) {
  Tape& t = own_tape(a, "frobenius_norm");
  return emit(t, Op::FrobeniusNorm, {a.id()},
              Tensor::scalar(ops::frobenius_norm(a.value())), 0.0, -1);
}

Var softmax_rows(const Var& a) {
  Tape& t = own_tape(a, "softmax_rows");
  return emit(t, Op::SoftmaxRows, {a.id()}, ops::softmax_rows(a.value()), 0.0, -1);
}

Var log_softmax_rows(const Var& a) {
  Tape& t = own_tape(a, "log_softmax_rows");
  return emit(t, Op::LogSoftmaxRows, {a.id()}, ops::log_softmax_rows(a.value()), 0.0, -1);
}

Var l2_normalize(const Var& a) {
  Tape& t = own_tape(a, "l2_normalize");
  return emit(t, Op::L2Normalize, {a.id()}, ops::l2_normalize(a.value()), 0.0, -1);
}

Var l2_normalize_rows(const Var& a, double eps) {
  Tape& t = own_tape(a, "l2_normalize_rows");
  return emit(t, Op::L2NormalizeRows, {a.id()}, ops::l2_normalize_rows(a.value(), eps), eps,
              -1);
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  Tape& t = own_tape(rows[0], "stack_rows");
  std::vector<std::size_t> inputs;
  std::vector<const Tensor*> values;
  for (const Var& r : rows) {
    same_tape(rows[0], r, "stack_rows");
    inputs.push_back(r.id());
    values.push_back(&r.value());
  }
  return emit(t, Op::StackRows, std::move(inputs), ops::stack_rows(values), 0.0, -1);
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
  Tape& t = own_tape(a, "reshape");
  return emit(t, Op::Reshape, {a.id()}, ops::reshape(a.value(), std::move(shape)), 0.0, -1);
}

Var row(const Var& a, std::size_t index) {
  Tape& t = own_tape(a, "row");
  return emit(t, Op::Row, {a.id()}, ops::row(a.value(), index), 0.0,
              static_cast<long>(index));
}

Var dot(const Var& a, const Var& b) { return sum(mul(a, b)); }

namespace {

GradcheckReport fd_compare(const std::function<double(const Tensor&)>& eval,
                           const Tensor& analytic, const Tensor& x, double step,
                           double tol) {
  GradcheckReport report;
  report.coordinates = x.size();
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe.at(i) = x.at(i) + step;
    const double up = eval(probe);
    probe.at(i) = x.at(i) - step;
    const double down = eval(probe);
    probe.at(i) = x.at(i);
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.at(i);
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 0.01});
    const double rel = std::fabs(a - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = i;
    }
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

}  // namespace

GradcheckReport gradcheck(const ScalarFn& f, const Tensor& x, double step, double tol) {
  Tape tape;
  Var vx = tape.leaf(x, true);
  Var y = f(tape, vx);
  if (y.value().size() != 1) throw ContractError("gradcheck: f must be scalar-valued");
  tape.backward(y);
  const Tensor analytic = vx.has_grad() ? vx.grad() : Tensor::zeros_like(x);
  const auto eval = [&f](const Tensor& p) {
    Tape t;
    Var v = t.leaf(p, false);
    Var out = f(t, v);
    if (out.value().size() != 1) throw ContractError("gradcheck: f must be scalar-valued");
    return out.value().at(0);
  };
  return fd_compare(eval, analytic, x, step, tol);
}

GradcheckReport gradcheck_against(const std::function<double(const Tensor&)>& f,
                                  const Tensor& analytic_grad, const Tensor& x, double step,
                                  double tol) {
  if (!analytic_grad.same_shape(x)) {
    throw ShapeError("gradcheck_against: gradient shape mismatch");
  }
  return fd_compare(f, analytic_grad, x, step, tol);
}

}  // namespace viper::ad
