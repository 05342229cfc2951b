#include "elastodyn/autodiff/tape.hpp"

#include <sstream>
#include <utility>

namespace elastodyn::ad {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

Tape* common_tape(const Var& a, const Var& b, Op op) {
  if (!a.valid() || !b.valid()) {
    throw std::invalid_argument(std::string(op_name(op)) + ": operand is not bound to a tape");
  }
  if (a.tape() != b.tape()) {
    throw std::invalid_argument(std::string(op_name(op)) + ": operands live on different tapes");
  }
  return a.tape();
}

Tape* tape_of(const Var& a, Op op) {
  if (!a.valid()) {
    throw std::invalid_argument(std::string(op_name(op)) + ": operand is not bound to a tape");
  }
  return a.tape();
}

Eigen::Index broadcast_extent(Eigen::Index a, Eigen::Index b, bool& ok) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  ok = false;
  return 0;
}

std::pair<Eigen::Index, Eigen::Index> broadcast_shape(const Matrix& a, const Matrix& b, Op op) {
  bool ok = true;
  const auto r = broadcast_extent(a.rows(), b.rows(), ok);
  const auto c = broadcast_extent(a.cols(), b.cols(), ok);
  if (!ok) {
    throw std::invalid_argument(std::string(op_name(op)) + ": cannot broadcast " +
                                shape_str(a) + " with " + shape_str(b));
  }
  return {r, c};
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sum a broadcast gradient back down to the operand's shape.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix r = g;
  if (rows == 1 && r.rows() != 1) r = r.colwise().sum().eval();
  if (cols == 1 && r.cols() != 1) r = r.rowwise().sum().eval();
  return r;
}

void accumulate(std::vector<Matrix>& grads, std::size_t id, Matrix contribution) {
  Matrix& slot = grads[id];
  if (slot.size() == 0) {
    slot = std::move(contribution);
  } else {
    slot += contribution;
  }
}

}  // namespace

std::string_view op_name(Op op) noexcept {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::AddScalar: return "add_scalar";
    case Op::MulScalar: return "mul_scalar";
    case Op::MatMul: return "matmul";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Pow: return "pow";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Column: return "column";
  }
  return "unknown";
}

NonFiniteError::NonFiniteError(std::string op, bool during_backward)
    : std::runtime_error("non-finite value produced by '" + op + "'" +
                         (during_backward ? " during the backward sweep" : "")),
      op_(std::move(op)),
      backward_(during_backward) {}

const Matrix& Var::value() const {
  if (!tape_) throw std::logic_error("Var is not bound to a tape");
  return tape_->value(id_);
}

double Var::item() const {
  const Matrix& v = value();
  if (v.size() != 1) {
    throw std::invalid_argument("item() requires a 1x1 value, got " + shape_str(v));
  }
  return v(0, 0);
}

Var Tape::variable(Matrix value) {
  if (!value.allFinite()) throw NonFiniteError("leaf", false);
  nodes_.push_back(Node{Op::Leaf, npos, npos, 0.0, true, std::move(value)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(double value) { return variable(Matrix::Constant(1, 1, value)); }

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NonFiniteError("leaf", false);
  nodes_.push_back(Node{Op::Leaf, npos, npos, 0.0, false, std::move(value)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::record(Op op, Matrix value, std::size_t lhs, std::size_t rhs, double scalar) {
  if (!value.allFinite()) throw NonFiniteError(std::string(op_name(op)), false);
  bool needs = nodes_[lhs].requires_grad;
  if (rhs != npos) needs = needs || nodes_[rhs].requires_grad;
  nodes_.push_back(Node{op, lhs, rhs, scalar, needs, std::move(value)});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward_node(const Node& node, const Matrix& g, std::vector<Matrix>& grads) const {
  const auto wants = [&](std::size_t id) { return id != npos && nodes_[id].requires_grad; };
  const std::size_t a = node.lhs;
  const std::size_t b = node.rhs;
  switch (node.op) {
    case Op::Leaf:
      return;
    case Op::Add: {
      if (wants(a)) accumulate(grads, a, reduce_to(g, nodes_[a].value.rows(), nodes_[a].value.cols()));
      if (wants(b)) accumulate(grads, b, reduce_to(g, nodes_[b].value.rows(), nodes_[b].value.cols()));
      return;
    }
    case Op::Sub: {
      if (wants(a)) accumulate(grads, a, reduce_to(g, nodes_[a].value.rows(), nodes_[a].value.cols()));
      if (wants(b)) {
        accumulate(grads, b, reduce_to(-g, nodes_[b].value.rows(), nodes_[b].value.cols()));
      }
      return;
    }
    case Op::Mul: {
      const Matrix& av = nodes_[a].value;
      const Matrix& bv = nodes_[b].value;
      if (wants(a)) {
        Matrix ga = (g.array() * expand(bv, g.rows(), g.cols()).array()).matrix();
        accumulate(grads, a, reduce_to(ga, av.rows(), av.cols()));
      }
      if (wants(b)) {
        Matrix gb = (g.array() * expand(av, g.rows(), g.cols()).array()).matrix();
        accumulate(grads, b, reduce_to(gb, bv.rows(), bv.cols()));
      }
      return;
    }
    case Op::Div: {
      const Matrix& av = nodes_[a].value;
      const Matrix& bv = nodes_[b].value;
      const Matrix bx = expand(bv, g.rows(), g.cols());
      if (wants(a)) {
        Matrix ga = (g.array() / bx.array()).matrix();
        accumulate(grads, a, reduce_to(ga, av.rows(), av.cols()));
      }
      if (wants(b)) {
        Matrix gb = (-g.array() * node.value.array() / bx.array()).matrix();
        accumulate(grads, b, reduce_to(gb, bv.rows(), bv.cols()));
      }
      return;
    }
    case Op::Neg:
      if (wants(a)) accumulate(grads, a, -g);
      return;
    case Op::AddScalar:
      if (wants(a)) accumulate(grads, a, g);
      return;
    case Op::MulScalar:
      if (wants(a)) accumulate(grads, a, node.scalar * g);
      return;
    case Op::MatMul: {
      if (wants(a)) accumulate(grads, a, g * nodes_[b].value.transpose());
      if (wants(b)) accumulate(grads, b, nodes_[a].value.transpose() * g);
      return;
    }
    case Op::Tanh: {
      if (!wants(a)) return;
      const auto y = node.value.array();
      accumulate(grads, a, (g.array() * (1.0 - y * y)).matrix());
      return;
    }
    case Op::Sigmoid: {
      if (!wants(a)) return;
      const auto y = node.value.array();
      accumulate(grads, a, (g.array() * y * (1.0 - y)).matrix());
      return;
    }
    case Op::Sin:
      if (wants(a)) accumulate(grads, a, (g.array() * nodes_[a].value.array().cos()).matrix());
      return;
    case Op::Cos:
      if (wants(a)) accumulate(grads, a, (-g.array() * nodes_[a].value.array().sin()).matrix());
      return;
    case Op::Exp:
      if (wants(a)) accumulate(grads, a, (g.array() * node.value.array()).matrix());
      return;
    case Op::Pow: {
      if (!wants(a)) return;
      const double p = node.scalar;
      accumulate(grads, a, (g.array() * p * nodes_[a].value.array().pow(p - 1.0)).matrix());
      return;
    }
    case Op::Square:
      if (wants(a)) accumulate(grads, a, (2.0 * g.array() * nodes_[a].value.array()).matrix());
      return;
    case Op::Sum: {
      if (!wants(a)) return;
      const Matrix& av = nodes_[a].value;
      accumulate(grads, a, Matrix::Constant(av.rows(), av.cols(), g(0, 0)));
      return;
    }
    case Op::Mean: {
      if (!wants(a)) return;
      const Matrix& av = nodes_[a].value;
      const double share = g(0, 0) / static_cast<double>(av.size());
      accumulate(grads, a, Matrix::Constant(av.rows(), av.cols(), share));
      return;
    }
    case Op::Column: {
      if (!wants(a)) return;
      const Matrix& av = nodes_[a].value;
      Matrix ga = Matrix::Zero(av.rows(), av.cols());
      ga.col(static_cast<Eigen::Index>(node.scalar)) = g.col(0);
      accumulate(grads, a, std::move(ga));
      return;
    }
  }
}

std::vector<Matrix> Tape::gradient(const Var& loss, std::span<const Var> wrt) const {
  if (loss.tape() != this) throw std::invalid_argument("gradient: loss belongs to another tape");
  if (value(loss.id()).size() != 1) {
    throw std::invalid_argument("gradient: loss must be 1x1, got " + shape_str(value(loss.id())));
  }
  for (const Var& w : wrt) {
    if (w.tape() != this) throw std::invalid_argument("gradient: parameter belongs to another tape");
  }

  std::vector<Matrix> grads(loss.id() + 1);
  if (nodes_[loss.id()].requires_grad) {
    grads[loss.id()] = Matrix::Ones(1, 1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      if (grads[i].size() == 0) continue;
      const Node& node = nodes_[i];
      if (!grads[i].allFinite()) throw NonFiniteError(std::string(op_name(node.op)), true);
      backward_node(node, grads[i], grads);
      if (node.op != Op::Leaf) grads[i].resize(0, 0);
    }
  }

  std::vector<Matrix> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    const Matrix& v = value(w.id());
    if (w.id() < grads.size() && grads[w.id()].size() != 0) {
      out.push_back(grads[w.id()]);
    } else {
      out.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
  }
  return out;
}

Eigen::VectorXd Tape::flat_gradient(const Var& loss, std::span<const Var> wrt) const {
  const auto blocks = gradient(loss, wrt);
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Eigen::VectorXd flat(total);
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    flat.segment(offset, b.size()) = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
    offset += b.size();
  }
  return flat;
}

// ---------------------------------------------------------------------------
// Operators

Var operator+(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b, Op::Add);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const auto [r, c] = broadcast_shape(av, bv, Op::Add);
  Matrix out;
  if (av.rows() == r && av.cols() == c && bv.rows() == 1 && r != 1 && bv.cols() == c) {
    out = av.rowwise() + bv.row(0);
  } else if (bv.rows() == r && bv.cols() == c && av.rows() == 1 && r != 1 && av.cols() == c) {
    out = bv.rowwise() + av.row(0);
  } else {
    out = expand(av, r, c) + expand(bv, r, c);
  }
  return t->record(Op::Add, std::move(out), a.id(), b.id());
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b, Op::Sub);
  const auto [r, c] = broadcast_shape(a.value(), b.value(), Op::Sub);
  Matrix out = expand(a.value(), r, c) - expand(b.value(), r, c);
  return t->record(Op::Sub, std::move(out), a.id(), b.id());
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b, Op::Mul);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const auto [r, c] = broadcast_shape(av, bv, Op::Mul);
  Matrix out;
  if (av.size() == 1) {
    out = av(0, 0) * bv;
  } else if (bv.size() == 1) {
    out = bv(0, 0) * av;
  } else {
    out = (expand(av, r, c).array() * expand(bv, r, c).array()).matrix();
  }
  return t->record(Op::Mul, std::move(out), a.id(), b.id());
}

Var operator/(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b, Op::Div);
  const auto [r, c] = broadcast_shape(a.value(), b.value(), Op::Div);
  Matrix out = (expand(a.value(), r, c).array() / expand(b.value(), r, c).array()).matrix();
  return t->record(Op::Div, std::move(out), a.id(), b.id());
}

Var operator-(const Var& a) {
  Tape* t = tape_of(a, Op::Neg);
  Matrix out = -a.value();
  return t->record(Op::Neg, std::move(out), a.id());
}

Var operator+(const Var& a, double s) {
  Tape* t = tape_of(a, Op::AddScalar);
  Matrix out = (a.value().array() + s).matrix();
  return t->record(Op::AddScalar, std::move(out), a.id(), Tape::npos, s);
}

Var operator+(double s, const Var& a) { return a + s; }
Var operator-(const Var& a, double s) { return a + (-s); }
Var operator-(double s, const Var& a) { return (-a) + s; }

Var operator*(const Var& a, double s) {
  Tape* t = tape_of(a, Op::MulScalar);
  Matrix out = s * a.value();
  return t->record(Op::MulScalar, std::move(out), a.id(), Tape::npos, s);
}

Var operator*(double s, const Var& a) { return a * s; }
Var operator/(const Var& a, double s) { return a * (1.0 / s); }
Var operator/(double s, const Var& a) { return pow(a, -1.0) * s; }

Var matmul(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b, Op::MatMul);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ (" + shape_str(av) + " * " +
                                shape_str(bv) + ")");
  }
  Matrix out = av * bv;
  return t->record(Op::MatMul, std::move(out), a.id(), b.id());
}

Var tanh(const Var& a) {
  Tape* t = tape_of(a, Op::Tanh);
  Matrix out = a.value().array().tanh().matrix();
  return t->record(Op::Tanh, std::move(out), a.id());
}

Var sigmoid(const Var& a) {
  Tape* t = tape_of(a, Op::Sigmoid);
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return t->record(Op::Sigmoid, std::move(out), a.id());
}

Var sin(const Var& a) {
  Tape* t = tape_of(a, Op::Sin);
  Matrix out = a.value().array().sin().matrix();
  return t->record(Op::Sin, std::move(out), a.id());
}

Var cos(const Var& a) {
  Tape* t = tape_of(a, Op::Cos);
  Matrix out = a.value().array().cos().matrix();
  return t->record(Op::Cos, std::move(out), a.id());
}

Var exp(const Var& a) {
  Tape* t = tape_of(a, Op::Exp);
  Matrix out = a.value().array().exp().matrix();
  return t->record(Op::Exp, std::move(out), a.id());
}

Var pow(const Var& a, double exponent) {
  Tape* t = tape_of(a, Op::Pow);
  Matrix out = a.value().array().pow(exponent).matrix();
  return t->record(Op::Pow, std::move(out), a.id(), Tape::npos, exponent);
}

Var square(const Var& a) {
  Tape* t = tape_of(a, Op::Square);
  Matrix out = a.value().array().square().matrix();
  return t->record(Op::Square, std::move(out), a.id());
}

Var sum(const Var& a) {
  Tape* t = tape_of(a, Op::Sum);
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return t->record(Op::Sum, std::move(out), a.id());
}

Var mean(const Var& a) {
  Tape* t = tape_of(a, Op::Mean);
  Matrix out = Matrix::Constant(1, 1, a.value().mean());
  return t->record(Op::Mean, std::move(out), a.id());
}

Var column(const Var& a, Eigen::Index j) {
  Tape* t = tape_of(a, Op::Column);
  const Matrix& av = a.value();
  if (j < 0 || j >= av.cols()) {
    throw std::out_of_range("column: index " + std::to_string(j) + " outside " + shape_str(av));
  }
  Matrix out = av.col(j);
  return t->record(Op::Column, std::move(out), a.id(), Tape::npos, static_cast<double>(j));
}

}  // namespace elastodyn::ad
