#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "viper/tensor.hpp"

namespace viper::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; owns nothing.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Tensor& grad() const;  // ContractError before backward
  bool has_grad() const;
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Transpose,
  Add,
  Sub,
  Mul,
  AddScalar,
  RsubScalar,
  MulScalar,
  PowScalar,
  PowTensor,
  Exp,
  Log,
  Max0,
  Sum,
  SumAxis,
  Mean,
  MeanAxis,
  Max,
  MaxAxis,
  FrobeniusNorm,
  SoftmaxRows,
  LogSoftmaxRows,
  L2Normalize,
  L2NormalizeRows,
  StackRows,
  Reshape,
  Row,
};

// Append-only computation graph. Node order is the topological order; the
// backward pass walks it once in reverse.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);

  // Populates grads of every requires_grad node reachable from root.
  // root must be scalar; calling twice without reset_grads is an error.
  void backward(const Var& root);
  void reset_grads();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  friend class Var;
  friend Var emit(Tape& tape, Op op, std::vector<std::size_t> inputs, Tensor value,
                  double scalar, long axis);

  struct Node {
    Op op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    double scalar = 0.0;  // scalar operand / eps / row index
    long axis = -1;       // -1 = full reduction
  };

  void accumulate(std::size_t id, const Tensor& delta);
  void backprop_node(std::size_t id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Graph-building operations. Two-input forms require both vars on one tape.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var add(const Var& a, double c);
Var sub(const Var& a, const Var& b);
Var sub(const Var& a, double c);
Var sub(double c, const Var& a);
Var mul(const Var& a, const Var& b);
Var mul(const Var& a, double c);
Var pow(const Var& a, double exponent);
Var pow(const Var& a, const Var& b);
Var exp(const Var& a);
Var log(const Var& a);
Var max0(const Var& a);
Var sum(const Var& a);
Var sum(const Var& a, std::size_t axis);
Var mean(const Var& a);
Var mean(const Var& a, std::size_t axis);
Var reduce_max(const Var& a);
Var reduce_max(const Var& a, std::size_t axis);
Var frobenius_norm(const Var& a);
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var l2_normalize(const Var& a);
Var l2_normalize_rows(const Var& a, double eps = 1e-12);
Var stack_rows(const std::vector<Var>& rows);
Var reshape(const Var& a, std::vector<std::size_t> shape);
Var row(const Var& a, std::size_t index);
Var dot(const Var& a, const Var& b);

// Central finite-difference verification of the tape's gradients.
struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t coordinates = 0;
  bool pass = true;
};

using ScalarFn = std::function<Var(Tape&, const Var&)>;

// Relative error uses denominator max(|analytic|, |numeric|, 0.01) so that
// finite-difference noise on near-zero gradients does not dominate.
GradcheckReport gradcheck(const ScalarFn& f, const Tensor& x, double step, double tol);

// Same comparison, but against a caller-supplied gradient; used to verify the
// detector itself catches wrong backward rules.
GradcheckReport gradcheck_against(const std::function<double(const Tensor&)>& f,
                                  const Tensor& analytic_grad, const Tensor& x,
                                  double step, double tol);

}  // namespace viper::ad
