#pragma once

// Matrix-valued reverse-mode automatic differentiation.
//
// A Tape records every operation applied to Var handles. Values are dense
// Eigen matrices; scalars are 1x1 matrices. Elementwise binary operations
// broadcast along any dimension of extent 1, so a 1x1 scalar combines with a
// column of collocation values and a 1xC bias row combines with an NxC
// activation block.
//
// Every recorded value is checked for NaN/Inf and a NonFiniteError naming the
// operation is thrown on the first offender. Gradients are checked the same
// way during the backward sweep.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace elastodyn::ad {

using Matrix = Eigen::MatrixXd;

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  AddScalar,
  MulScalar,
  MatMul,
  Tanh,
  Sigmoid,
  Sin,
  Cos,
  Exp,
  Pow,
  Square,
  Sum,
  Mean,
  Column,
};

std::string_view op_name(Op op) noexcept;

class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string op, bool during_backward);

  const std::string& op() const noexcept { return op_; }
  bool during_backward() const noexcept { return backward_; }

 private:
  std::string op_;
  bool backward_;
};

class Tape;

/// Handle to a node on a Tape. Copies are cheap and refer to the same node.
/// A Var is valid until its tape is cleared or destroyed.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double item() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf.
  Var variable(Matrix value);
  Var variable(double value);
  /// Leaf excluded from differentiation.
  Var constant(Matrix value);
  Var constant(double value);

  /// Reverse sweep from a 1x1 `loss`. Returns d(loss)/d(w) for each entry of
  /// `wrt`, shaped like w. Leaves that do not influence the loss get zeros.
  std::vector<Matrix> gradient(const Var& loss, std::span<const Var> wrt) const;

  /// Same as gradient() but concatenated; each block is laid out in Eigen's
  /// column-major storage order.
  Eigen::VectorXd flat_gradient(const Var& loss, std::span<const Var> wrt) const;

  void clear() noexcept { nodes_.clear(); }
  std::size_t size() const noexcept { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Appends a node. Used by the operator implementations; `value` must
  /// already hold the forward result. Throws NonFiniteError on NaN/Inf.
  Var record(Op op, Matrix value, std::size_t lhs, std::size_t rhs = npos,
             double scalar = 0.0);

 private:
  struct Node {
    Op op;
    std::size_t lhs;
    std::size_t rhs;
    double scalar;
    bool requires_grad;
    Matrix value;
  };

  void backward_node(const Node& node, const Matrix& grad,
                     std::vector<Matrix>& grads) const;

  std::vector<Node> nodes_;
};

// Elementwise arithmetic with broadcasting.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

Var operator+(const Var& a, double s);
Var operator+(double s, const Var& a);
Var operator-(const Var& a, double s);
Var operator-(double s, const Var& a);
Var operator*(const Var& a, double s);
Var operator*(double s, const Var& a);
Var operator/(const Var& a, double s);
Var operator/(double s, const Var& a);

Var matmul(const Var& a, const Var& b);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var exp(const Var& a);
Var pow(const Var& a, double exponent);
Var square(const Var& a);
/// Sum of all entries, 1x1.
Var sum(const Var& a);
/// Mean of all entries, 1x1.
Var mean(const Var& a);
/// Column `j` as an Nx1 node.
Var column(const Var& a, Eigen::Index j);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double square(double x) { return x * x; }

}  // namespace elastodyn::ad
