#pragma once

// Reverse-mode automatic differentiation over a batch-vectorized tape.
//
// Every node holds one value per batch lane (width 1 gives the scalar case).
// Nodes are appended in evaluation order, so parents always precede children
// and a single reverse sweep yields exact gradients. Composite operations
// (such as a whole network layer stack) plug in through CustomOp.
//
// Subgradient conventions: relu passes gradient only for x > 0; max(a, b)
// routes to a only when a > b, min(a, b) only when a < b, so ties and
// clamps at a constant contribute zero.

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "decum/error.hpp"

namespace decum::ad {

using Array = Eigen::ArrayXd;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

  inline const Array& value() const;
  double value(Eigen::Index lane) const { return value()(lane); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class CustomOp {
 public:
  virtual ~CustomOp() = default;
  // Accumulate this node's adjoint into the adjoints of its parents (same order as registered).
  virtual void backward(const Array& adjoint, std::span<Array*> parent_adjoints) = 0;
};

enum class Op : std::uint8_t {
  Input, Leaf, Add, Sub, Mul, Div, AddConst, MulConst, ConstSub, ConstDiv, Neg,
  Exp, Log, PowConst, Max, Min, MaxConst, MinConst, Sigmoid, Relu, Custom
};

class Tape {
 public:
  explicit Tape(Eigen::Index width) : width_(width) {
    if (width < 1) throw ConfigError("tape width must be positive");
  }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Eigen::Index width() const { return width_; }
  std::size_t size() const { return nodes_.size(); }

  // Constant data: participates in the computation but receives no gradient.
  Var input(const Array& values) { return push(Op::Input, -1, -1, 0.0, checked(values)); }
  Var input(double value) { return input(Array::Constant(width_, value)); }

  // Independent variable whose adjoint is readable after backward().
  Var variable(const Array& values) { return push(Op::Leaf, -1, -1, 0.0, checked(values)); }
  Var variable(double value) { return variable(Array::Constant(width_, value)); }

  Var custom(std::vector<int> parents, Array value, std::unique_ptr<CustomOp> op) {
    for (int p : parents)
      if (p < 0 || p >= static_cast<int>(nodes_.size())) throw NumericError("custom node: bad parent index");
    Var v = push(Op::Custom, -1, -1, 0.0, checked(std::move(value)));
    nodes_.back().parents = std::move(parents);
    nodes_.back().custom = std::move(op);
    return v;
  }

  Var record(Op op, const Var& a, double c, Array value) { return push(op, own(a), -1, c, std::move(value)); }
  Var record(Op op, const Var& a, const Var& b, Array value) {
    return push(op, own(a), own(b), 0.0, std::move(value));
  }

  const Array& value(int id) const { return nodes_[id].value; }

  void backward(const Var& output) { backward(output, Array::Ones(width_)); }

  void backward(const Var& output, const Array& seed) {
    const int out = own(output);
    if (seed.size() != width_) throw NumericError("backward: seed width does not match tape");
    adjoints_.assign(nodes_.size(), Array());
    for (int i = 0; i <= out; ++i) adjoints_[i] = Array::Zero(width_);
    adjoints_[out] = seed;
    std::vector<Array*> parent_adjoints;
    for (int i = out; i >= 0; --i) {
      const Node& n = nodes_[i];
      const Array& g = adjoints_[i];
      if (n.op == Op::Input || n.op == Op::Leaf) continue;
      if (n.op == Op::Custom) {
        parent_adjoints.clear();
        for (int p : n.parents) parent_adjoints.push_back(&adjoints_[p]);
        n.custom->backward(g, parent_adjoints);
        continue;
      }
      Array& ga = adjoints_[n.a];
      const Array& va = nodes_[n.a].value;
      switch (n.op) {
        case Op::Add: ga += g; adjoints_[n.b] += g; break;
        case Op::Sub: ga += g; adjoints_[n.b] -= g; break;
        case Op::Mul:
          ga += g * nodes_[n.b].value;
          adjoints_[n.b] += g * va;
          break;
        case Op::Div:
          ga += g / nodes_[n.b].value;
          adjoints_[n.b] -= g * n.value / nodes_[n.b].value;
          break;
        case Op::AddConst: ga += g; break;
        case Op::MulConst: ga += g * n.c; break;
        case Op::ConstSub: ga -= g; break;
        case Op::ConstDiv: ga -= g * n.value / va; break;
        case Op::Neg: ga -= g; break;
        case Op::Exp: ga += g * n.value; break;
        case Op::Log: ga += g / va; break;
        case Op::PowConst: {
          const double c = n.c;
          ga += g * c * va.unaryExpr([c](double x) { return std::pow(x, c - 1); });
          break;
        }
        case Op::Max: {
          const auto& vb = nodes_[n.b].value;
          ga += (va > vb).select(g, 0.0);
          adjoints_[n.b] += (va > vb).select(0.0, g);
          break;
        }
        case Op::Min: {
          const auto& vb = nodes_[n.b].value;
          ga += (va < vb).select(g, 0.0);
          adjoints_[n.b] += (va < vb).select(0.0, g);
          break;
        }
        case Op::MaxConst: ga += (va > n.c).select(g, 0.0); break;
        case Op::MinConst: ga += (va < n.c).select(g, 0.0); break;
        case Op::Sigmoid: ga += g * n.value * (1.0 - n.value); break;
        case Op::Relu: ga += (va > 0.0).select(g, 0.0); break;
        default: break;
      }
    }
  }

  const Array& adjoint(const Var& v) const {
    const int id = own(v);
    if (id >= static_cast<int>(adjoints_.size()) || adjoints_[id].size() == 0)
      throw NumericError("adjoint requested for a node outside the last backward sweep");
    return adjoints_[id];
  }

 private:
  struct Node {
    Op op;
    int a = -1, b = -1;
    double c = 0;
    Array value;
    std::vector<int> parents;
    std::unique_ptr<CustomOp> custom;
  };

  int own(const Var& v) const {
    if (v.tape() != this || v.id() < 0 || v.id() >= static_cast<int>(nodes_.size()))
      throw NumericError("variable does not belong to this tape");
    return v.id();
  }

  Array checked(Array values) const {
    if (values.size() != width_) throw NumericError("value width does not match tape");
    return values;
  }

  Var push(Op op, int a, int b, double c, Array value) {
    nodes_.push_back(Node{op, a, b, c, std::move(value), {}, nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  Eigen::Index width_;
  std::vector<Node> nodes_;
  std::vector<Array> adjoints_;
};

inline const Array& Var::value() const {
  if (!valid()) throw NumericError("use of an unbound variable");
  return tape_->value(id_);
}

namespace detail {
inline Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw NumericError("operands live on different tapes");
  return *a.tape();
}
template <class F>
Array map(const Array& x, F f) {
  return x.unaryExpr(f);
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::same_tape(a, b).record(Op::Add, a, b, a.value() + b.value());
}
inline Var operator-(const Var& a, const Var& b) {
  return detail::same_tape(a, b).record(Op::Sub, a, b, a.value() - b.value());
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::same_tape(a, b).record(Op::Mul, a, b, a.value() * b.value());
}
inline Var operator/(const Var& a, const Var& b) {
  return detail::same_tape(a, b).record(Op::Div, a, b, a.value() / b.value());
}
inline Var operator+(const Var& a, double c) { return a.tape()->record(Op::AddConst, a, c, a.value() + c); }
inline Var operator+(double c, const Var& a) { return a.tape()->record(Op::AddConst, a, c, c + a.value()); }
inline Var operator-(const Var& a, double c) { return a.tape()->record(Op::AddConst, a, -c, a.value() - c); }
inline Var operator-(double c, const Var& a) { return a.tape()->record(Op::ConstSub, a, c, c - a.value()); }
inline Var operator*(const Var& a, double c) { return a.tape()->record(Op::MulConst, a, c, a.value() * c); }
inline Var operator*(double c, const Var& a) { return a.tape()->record(Op::MulConst, a, c, c * a.value()); }
inline Var operator/(const Var& a, double c) {
  // Recorded as a division so the result matches scalar arithmetic bit for bit.
  Array v = a.value() / c;
  return a.tape()->record(Op::MulConst, a, 1.0 / c, std::move(v));
}
inline Var operator/(double c, const Var& a) { return a.tape()->record(Op::ConstDiv, a, c, c / a.value()); }
inline Var operator-(const Var& a) { return a.tape()->record(Op::Neg, a, 0.0, -a.value()); }

inline Var exp(const Var& a) {
  return a.tape()->record(Op::Exp, a, 0.0, detail::map(a.value(), [](double x) { return std::exp(x); }));
}
inline Var log(const Var& a) {
  return a.tape()->record(Op::Log, a, 0.0, detail::map(a.value(), [](double x) { return std::log(x); }));
}
inline Var pow(const Var& a, double c) {
  return a.tape()->record(Op::PowConst, a, c, detail::map(a.value(), [c](double x) { return std::pow(x, c); }));
}
inline Var max(const Var& a, const Var& b) {
  return detail::same_tape(a, b).record(Op::Max, a, b, (a.value() > b.value()).select(a.value(), b.value()));
}
inline Var min(const Var& a, const Var& b) {
  return detail::same_tape(a, b).record(Op::Min, a, b, (a.value() < b.value()).select(a.value(), b.value()));
}
inline Var max(const Var& a, double c) {
  return a.tape()->record(Op::MaxConst, a, c, (a.value() > c).select(a.value(), c));
}
inline Var max(double c, const Var& a) { return max(a, c); }
inline Var min(const Var& a, double c) {
  return a.tape()->record(Op::MinConst, a, c, (a.value() < c).select(a.value(), c));
}
inline Var min(double c, const Var& a) { return min(a, c); }
inline Var sigmoid(const Var& a) {
  return a.tape()->record(Op::Sigmoid, a, 0.0,
                          detail::map(a.value(), [](double x) { return 1.0 / (1.0 + std::exp(-x)); }));
}
inline Var relu(const Var& a) { return a.tape()->record(Op::Relu, a, 0.0, (a.value() > 0.0).select(a.value(), 0.0)); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Lane-wise helpers shared by scalar and taped code paths.
inline bool all_finite(double x) { return std::isfinite(x); }
inline bool all_finite(const Var& v) { return v.value().isFinite().all(); }
inline double lane_min(double x) { return x; }
inline double lane_min(const Var& v) { return v.value().minCoeff(); }

}  // namespace decum::ad
