#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tse::ad {

// Reverse-mode tape: a Wengert list whose local partials are fixed at record
// time. Nodes are created in evaluation order, so a single reverse sweep
// yields the adjoint of every node with respect to one output.
class Tape {
public:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  std::uint32_t leaf(double) { return push(kNone, kNone, 0.0, 0.0); }

  std::uint32_t unary(std::uint32_t a, double wa) {
    return push(a, kNone, wa, 0.0);
  }

  std::uint32_t binary(std::uint32_t a, std::uint32_t b, double wa, double wb) {
    return push(a, b, wa, wb);
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  // Adjoints of every node with respect to node `of`.
  std::vector<double> gradient(std::uint32_t of) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    if (of >= nodes_.size()) return adj;
    adj[of] = 1.0;
    for (std::uint32_t i = of + 1; i-- > 0;) {
      const Node& n = nodes_[i];
      const double a = adj[i];
      if (a == 0.0) continue;
      if (n.a != kNone) adj[n.a] += n.wa * a;
      if (n.b != kNone) adj[n.b] += n.wb * a;
    }
    return adj;
  }

private:
  struct Node {
    double wa, wb;
    std::uint32_t a, b;
  };

  std::uint32_t push(std::uint32_t a, std::uint32_t b, double wa, double wb) {
    nodes_.push_back(Node{wa, wb, a, b});
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

// Scalar recorded on a Tape. A Var without a tape is a plain constant;
// arithmetic folds constants so that literals cost no tape nodes.
class Var {
public:
  Var() = default;
  Var(double v) : v_(v) {}  // constant, not tracked
  Var(Tape& tape, double v) : tape_(&tape), idx_(tape.leaf(v)), v_(v) {}

  double value() const { return v_; }
  bool tracked() const { return tape_ != nullptr; }
  std::uint32_t index() const { return idx_; }
  Tape* tape() const { return tape_; }

  static Var from_node(Tape& tape, std::uint32_t idx, double v) {
    Var r;
    r.tape_ = &tape;
    r.idx_ = idx;
    r.v_ = v;
    return r;
  }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

  friend Var operator-(const Var& a) {
    if (!a.tape_) return Var(-a.v_);
    return from_node(*a.tape_, a.tape_->unary(a.idx_, -1.0), -a.v_);
  }

  friend Var operator+(const Var& a, const Var& b) {
    const double v = a.v_ + b.v_;
    if (a.tape_ && b.tape_)
      return from_node(*a.tape_, a.tape_->binary(a.idx_, b.idx_, 1.0, 1.0), v);
    if (a.tape_) return from_node(*a.tape_, a.tape_->unary(a.idx_, 1.0), v);
    if (b.tape_) return from_node(*b.tape_, b.tape_->unary(b.idx_, 1.0), v);
    return Var(v);
  }

  friend Var operator-(const Var& a, const Var& b) {
    const double v = a.v_ - b.v_;
    if (a.tape_ && b.tape_)
      return from_node(*a.tape_, a.tape_->binary(a.idx_, b.idx_, 1.0, -1.0), v);
    if (a.tape_) return from_node(*a.tape_, a.tape_->unary(a.idx_, 1.0), v);
    if (b.tape_) return from_node(*b.tape_, b.tape_->unary(b.idx_, -1.0), v);
    return Var(v);
  }

  friend Var operator*(const Var& a, const Var& b) {
    const double v = a.v_ * b.v_;
    if (a.tape_ && b.tape_)
      return from_node(*a.tape_, a.tape_->binary(a.idx_, b.idx_, b.v_, a.v_), v);
    if (a.tape_) return from_node(*a.tape_, a.tape_->unary(a.idx_, b.v_), v);
    if (b.tape_) return from_node(*b.tape_, b.tape_->unary(b.idx_, a.v_), v);
    return Var(v);
  }

  friend Var operator/(const Var& a, const Var& b) {
    const double v = a.v_ / b.v_;
    if (a.tape_ && b.tape_)
      return from_node(*a.tape_,
                       a.tape_->binary(a.idx_, b.idx_, 1.0 / b.v_, -v / b.v_), v);
    if (a.tape_) return from_node(*a.tape_, a.tape_->unary(a.idx_, 1.0 / b.v_), v);
    if (b.tape_) return from_node(*b.tape_, b.tape_->unary(b.idx_, -v / b.v_), v);
    return Var(v);
  }

private:
  Tape* tape_ = nullptr;
  std::uint32_t idx_ = 0;
  double v_ = 0.0;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Var tanh(const Var& a) {
  const double t = std::tanh(a.value());
  if (!a.tracked()) return Var(t);
  return Var::from_node(*a.tape(), a.tape()->unary(a.index(), 1.0 - t * t), t);
}

inline Var sigmoid(const Var& a) {
  const double s = sigmoid(a.value());
  if (!a.tracked()) return Var(s);
  return Var::from_node(*a.tape(), a.tape()->unary(a.index(), s * (1.0 - s)), s);
}

inline Var exp(const Var& a) {
  const double e = std::exp(a.value());
  if (!a.tracked()) return Var(e);
  return Var::from_node(*a.tape(), a.tape()->unary(a.index(), e), e);
}

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

}  // namespace tse::ad
