#pragma once

// Second-order Taylor jets.
//
// Jet2<T> carries (f, f', f'') along one input direction. MultiJet<T> carries
// one value with first derivatives along several directions and, where
// requested, the matching diagonal second derivative. T is either double or a
// tape Var; with Var every derivative stream lives on the tape, so parameter
// gradients of expressions that contain input derivatives come from one
// reverse sweep.

#include "elastodyn/autodiff/tape.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace elastodyn::ad {

template <class T>
struct Jet2 {
  T value;
  T d1;
  T d2;
};

/// Unary composition: given f(a), f'(a), f''(a) evaluated at a.value.
template <class T>
Jet2<T> compose(const Jet2<T>& a, const T& f0, const T& f1, const T& f2) {
  return {f0, f1 * a.d1, f1 * a.d2 + f2 * (a.d1 * a.d1)};
}

template <class T>
Jet2<T> operator+(const Jet2<T>& a, const Jet2<T>& b) {
  return {a.value + b.value, a.d1 + b.d1, a.d2 + b.d2};
}

template <class T>
Jet2<T> operator-(const Jet2<T>& a, const Jet2<T>& b) {
  return {a.value - b.value, a.d1 - b.d1, a.d2 - b.d2};
}

template <class T>
Jet2<T> operator-(const Jet2<T>& a) {
  return {-a.value, -a.d1, -a.d2};
}

// (fg)'' = f''g + 2f'g' + fg''
template <class T>
Jet2<T> operator*(const Jet2<T>& a, const Jet2<T>& b) {
  return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
          a.d2 * b.value + 2.0 * (a.d1 * b.d1) + a.value * b.d2};
}

template <class T>
Jet2<T> operator+(const Jet2<T>& a, double s) {
  return {a.value + s, a.d1, a.d2};
}
template <class T>
Jet2<T> operator+(double s, const Jet2<T>& a) {
  return a + s;
}
template <class T>
Jet2<T> operator-(const Jet2<T>& a, double s) {
  return {a.value - s, a.d1, a.d2};
}
template <class T>
Jet2<T> operator-(double s, const Jet2<T>& a) {
  return {s - a.value, -a.d1, -a.d2};
}
template <class T>
Jet2<T> operator*(const Jet2<T>& a, double s) {
  return {a.value * s, a.d1 * s, a.d2 * s};
}
template <class T>
Jet2<T> operator*(double s, const Jet2<T>& a) {
  return a * s;
}
template <class T>
Jet2<T> operator/(const Jet2<T>& a, double s) {
  return a * (1.0 / s);
}

template <class T>
Jet2<T> reciprocal(const Jet2<T>& a) {
  const T r = 1.0 / a.value;
  const T r2 = r * r;
  return compose(a, r, -1.0 * r2, 2.0 * (r2 * r));
}

template <class T>
Jet2<T> operator/(const Jet2<T>& a, const Jet2<T>& b) {
  return a * reciprocal(b);
}

template <class T>
Jet2<T> operator/(double s, const Jet2<T>& a) {
  return s * reciprocal(a);
}

template <class T>
Jet2<T> tanh(const Jet2<T>& a) {
  using std::tanh;
  const T y = tanh(a.value);
  const T s = 1.0 - y * y;
  return compose(a, y, s, -2.0 * (y * s));
}

template <class T>
Jet2<T> sigmoid(const Jet2<T>& a) {
  using elastodyn::ad::sigmoid;
  const T y = sigmoid(a.value);
  const T s = y * (1.0 - y);
  return compose(a, y, s, s * (1.0 - 2.0 * y));
}

template <class T>
Jet2<T> sin(const Jet2<T>& a) {
  using std::cos;
  using std::sin;
  const T s = sin(a.value);
  return compose(a, s, cos(a.value), -1.0 * s);
}

template <class T>
Jet2<T> cos(const Jet2<T>& a) {
  using std::cos;
  using std::sin;
  const T c = cos(a.value);
  return compose(a, c, -1.0 * sin(a.value), -1.0 * c);
}

template <class T>
Jet2<T> exp(const Jet2<T>& a) {
  using std::exp;
  const T e = exp(a.value);
  return compose(a, e, e, e);
}

template <class T>
Jet2<T> pow(const Jet2<T>& a, double p) {
  using std::pow;
  return compose(a, pow(a.value, p), p * pow(a.value, p - 1.0),
                 p * (p - 1.0) * pow(a.value, p - 2.0));
}

template <class T>
Jet2<T> square(const Jet2<T>& a) {
  return a * a;
}

/// Scalar function of n jets, used with jet_eval.
using JetFunction = std::function<Jet2<double>(std::span<const Jet2<double>>)>;

/// Evaluates f at `point` and returns f, df/dx_k and d2f/dx_k2 for
/// k = direction. Throws std::out_of_range for a bad direction and
/// NonFiniteError if any component is NaN/Inf.
Jet2<double> jet_eval(const JetFunction& f, std::span<const double> point,
                      std::size_t direction);

// ---------------------------------------------------------------------------

/// Value plus first derivatives along several input directions. d2[k] holds
/// the second derivative along direction k when it is tracked.
template <class T>
struct MultiJet {
  T value;
  std::vector<T> d1;
  std::vector<std::optional<T>> d2;

  std::size_t directions() const { return d1.size(); }
};

/// Applies a linear map to every stream.
template <class T, class F>
MultiJet<T> map_linear(const MultiJet<T>& a, F&& f) {
  MultiJet<T> r{f(a.value), {}, {}};
  r.d1.reserve(a.d1.size());
  r.d2.reserve(a.d2.size());
  for (const auto& t : a.d1) r.d1.push_back(f(t));
  for (const auto& t : a.d2) r.d2.push_back(t ? std::optional<T>(f(*t)) : std::nullopt);
  return r;
}

template <class T>
MultiJet<T> compose(const MultiJet<T>& a, const T& f0, const T& f1, const T& f2) {
  MultiJet<T> r{f0, {}, {}};
  r.d1.reserve(a.d1.size());
  r.d2.reserve(a.d2.size());
  for (std::size_t k = 0; k < a.d1.size(); ++k) {
    r.d1.push_back(f1 * a.d1[k]);
    if (a.d2[k]) {
      r.d2.push_back(f1 * *a.d2[k] + f2 * (a.d1[k] * a.d1[k]));
    } else {
      r.d2.push_back(std::nullopt);
    }
  }
  return r;
}

namespace detail {
inline void check_same_directions(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("MultiJet operands track different directions");
}
}  // namespace detail

template <class T>
MultiJet<T> operator+(const MultiJet<T>& a, const MultiJet<T>& b) {
  detail::check_same_directions(a.directions(), b.directions());
  MultiJet<T> r{a.value + b.value, {}, {}};
  for (std::size_t k = 0; k < a.d1.size(); ++k) {
    r.d1.push_back(a.d1[k] + b.d1[k]);
    r.d2.push_back(a.d2[k] && b.d2[k] ? std::optional<T>(*a.d2[k] + *b.d2[k]) : std::nullopt);
  }
  return r;
}

template <class T>
MultiJet<T> operator-(const MultiJet<T>& a, const MultiJet<T>& b) {
  detail::check_same_directions(a.directions(), b.directions());
  MultiJet<T> r{a.value - b.value, {}, {}};
  for (std::size_t k = 0; k < a.d1.size(); ++k) {
    r.d1.push_back(a.d1[k] - b.d1[k]);
    r.d2.push_back(a.d2[k] && b.d2[k] ? std::optional<T>(*a.d2[k] - *b.d2[k]) : std::nullopt);
  }
  return r;
}

template <class T>
MultiJet<T> operator*(const MultiJet<T>& a, const MultiJet<T>& b) {
  detail::check_same_directions(a.directions(), b.directions());
  MultiJet<T> r{a.value * b.value, {}, {}};
  for (std::size_t k = 0; k < a.d1.size(); ++k) {
    r.d1.push_back(a.d1[k] * b.value + a.value * b.d1[k]);
    if (a.d2[k] && b.d2[k]) {
      r.d2.push_back(*a.d2[k] * b.value + 2.0 * (a.d1[k] * b.d1[k]) + a.value * *b.d2[k]);
    } else {
      r.d2.push_back(std::nullopt);
    }
  }
  return r;
}

template <class T>
MultiJet<T> operator*(double s, const MultiJet<T>& a) {
  return map_linear(a, [s](const T& t) { return s * t; });
}

template <class T>
MultiJet<T> tanh(const MultiJet<T>& a) {
  using std::tanh;
  const T y = tanh(a.value);
  const T s = 1.0 - y * y;
  return compose(a, y, s, -2.0 * (y * s));
}

}  // namespace elastodyn::ad
