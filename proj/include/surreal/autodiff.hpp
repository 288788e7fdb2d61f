#pragma once

// Minimal scalar reverse-mode autodiff. Every operation appends one node to a
// tape, storing its value and the local partials with respect to up to two
// parents. Construction order is a topological order, so backward() is a
// single reverse sweep with no graph walk.
//
// Nondifferentiable points get subgradient 0 (relu, sqrt at the origin) or
// the almost-everywhere derivative 1 (angle wrapping). A tape-level flag
// records whether any forward value landed within a configurable margin of
// such a point, which lets finite-difference harnesses discard and resample
// draws that straddle a kink.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "surreal/manifold.hpp"

namespace surreal::ad {

class Tape;

/// Handle into a tape; cheap to copy, invalidated by Tape::clear().
struct Var {
  Tape* tape = nullptr;
  std::int32_t idx = -1;
};

class Tape {
 public:
  /// Differentiable input. Gradients are read back via grad() after backward().
  Var leaf(double v) { return emit(v, -1, 0.0, -1, 0.0); }

  /// Value that takes part in the computation but whose gradient is ignored.
  Var constant(double v) { return emit(v, -1, 0.0, -1, 0.0); }

  double val(Var x) const { return nodes_[static_cast<std::size_t>(x.idx)].val; }
  double grad(Var x) const { return nodes_[static_cast<std::size_t>(x.idx)].grad; }

  /// Accumulates d(top)/d(node) into every node reachable from top.
  void backward(Var top) {
    for (auto& n : nodes_) n.grad = 0.0;
    nodes_[static_cast<std::size_t>(top.idx)].grad = 1.0;
    for (std::int32_t i = top.idx; i >= 0; --i) {
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad == 0.0) continue;
      if (n.p1 >= 0) nodes_[static_cast<std::size_t>(n.p1)].grad += n.d1 * n.grad;
      if (n.p2 >= 0) nodes_[static_cast<std::size_t>(n.p2)].grad += n.d2 * n.grad;
    }
  }

  void clear() {
    nodes_.clear();
    kink_hit_ = false;
  }

  std::size_t size() const { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  /// Margin for kink detection; 0 disables it.
  void set_kink_margin(double m) { kink_margin_ = m; }
  double kink_margin() const { return kink_margin_; }
  bool kink_hit() const { return kink_hit_; }
  void reset_kink_flag() { kink_hit_ = false; }
  void flag_kink() { kink_hit_ = true; }

  /// Raw node constructor used by the operator overloads below.
  Var emit(double v, std::int32_t p1, double d1, std::int32_t p2, double d2) {
    nodes_.push_back(Node{v, 0.0, d1, d2, p1, p2});
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

 private:
  struct Node {
    double val;
    double grad;
    double d1;
    double d2;
    std::int32_t p1;
    std::int32_t p2;
  };

  std::vector<Node> nodes_;
  double kink_margin_ = 0.0;
  bool kink_hit_ = false;
};

inline double val(Var x) { return x.tape->val(x); }

inline Var operator+(Var a, Var b) {
  return a.tape->emit(val(a) + val(b), a.idx, 1.0, b.idx, 1.0);
}
inline Var operator-(Var a, Var b) {
  return a.tape->emit(val(a) - val(b), a.idx, 1.0, b.idx, -1.0);
}
inline Var operator*(Var a, Var b) {
  return a.tape->emit(val(a) * val(b), a.idx, val(b), b.idx, val(a));
}
inline Var operator/(Var a, Var b) {
  const double vb = val(b);
  return a.tape->emit(val(a) / vb, a.idx, 1.0 / vb, b.idx, -val(a) / (vb * vb));
}
inline Var operator-(Var a) { return a.tape->emit(-val(a), a.idx, -1.0, -1, 0.0); }

inline Var operator+(Var a, double c) { return a.tape->emit(val(a) + c, a.idx, 1.0, -1, 0.0); }
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a.tape->emit(val(a) - c, a.idx, 1.0, -1, 0.0); }
inline Var operator-(double c, Var a) { return a.tape->emit(c - val(a), a.idx, -1.0, -1, 0.0); }
inline Var operator*(Var a, double c) { return a.tape->emit(val(a) * c, a.idx, c, -1, 0.0); }
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) { return a.tape->emit(val(a) / c, a.idx, 1.0 / c, -1, 0.0); }

inline Var exp(Var a) {
  const double e = std::exp(val(a));
  return a.tape->emit(e, a.idx, e, -1, 0.0);
}

inline Var log(Var a) {
  const double v = val(a);
  return a.tape->emit(std::log(v), a.idx, 1.0 / v, -1, 0.0);
}

inline Var sqrt(Var a) {
  const double v = val(a);
  const double s = std::sqrt(v);
  // subgradient 0 at the origin; the true derivative diverges there
  const double d = v > 0.0 ? 0.5 / s : 0.0;
  if (v < a.tape->kink_margin()) a.tape->flag_kink();
  return a.tape->emit(s, a.idx, d, -1, 0.0);
}

inline Var relu(Var a) {
  const double v = val(a);
  if (std::fabs(v) < a.tape->kink_margin()) a.tape->flag_kink();
  return a.tape->emit(v > 0.0 ? v : 0.0, a.idx, v > 0.0 ? 1.0 : 0.0, -1, 0.0);
}

/// Angle wrapping to (-pi, pi]. Piecewise a shift by a constant, so the
/// derivative is 1 almost everywhere; near the branch cut the kink flag trips.
inline Var wrap(Var a) {
  const double w = wrap_angle(val(a));
  if (kPi - std::fabs(w) < a.tape->kink_margin()) a.tape->flag_kink();
  return a.tape->emit(w, a.idx, 1.0, -1, 0.0);
}

}  // namespace surreal::ad
