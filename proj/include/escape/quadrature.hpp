#pragma once

#include <array>
#include <cmath>
#include <algorithm>
#include <type_traits>

namespace escape::quad {

namespace detail {

template <class F, class T>
T simpson_step(const F& f, double a, double b, const T& fa, const T& fm, const T& fb,
               const T& whole, double tol, int depth, double scale);

inline double magnitude(double v) { return std::abs(v); }
template <class T>
double magnitude(const T& v) { return v.cwiseAbs().maxCoeff(); }

template <class F, class T>
T simpson_step(const F& f, double a, double b, const T& fa, const T& fm, const T& fb,
               const T& whole, double tol, int depth, double scale) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const T flm = f(lm);
  const T frm = f(rm);
  const T left = ((m - a) / 6.0) * (fa + 4.0 * flm + fm);
  const T right = ((b - m) / 6.0) * (fm + 4.0 * frm + fb);
  const T delta = left + right - whole;
  if (depth <= 0 || magnitude(delta) <= 15.0 * tol * scale) {
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, scale) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, scale);
}

}  // namespace detail

/// Adaptive Simpson with Richardson correction. `rel_tol` is relative to the
/// magnitude of the coarse estimate (floored at 1). Works for scalars and
/// Eigen matrices alike.
template <class F>
auto adaptive_simpson(const F& f, double a, double b, double rel_tol = 1e-10, int max_depth = 40) {
  const auto fa = f(a);
  const auto fb = f(b);
  const auto fm = f(0.5 * (a + b));
  using T = std::decay_t<decltype(fa)>;
  const T whole = ((b - a) / 6.0) * (fa + 4.0 * fm + fb);
  const double scale = std::max(1.0, detail::magnitude(whole));
  return detail::simpson_step<F, T>(f, a, b, fa, fm, fb, whole, rel_tol, max_depth, scale);
}

/// Fixed 10-point Gauss-Legendre on [a, b]. A smooth function of its
/// endpoints, which matters when the result is later differenced.
template <class F>
auto gauss_legendre10(const F& f, double a, double b) {
  static constexpr std::array<double, 5> kNodes = {
      0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
      0.8650633666889845, 0.9739065285171717};
  static constexpr std::array<double, 5> kWeights = {
      0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
      0.1494513491505806, 0.0666713443086881};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  using T = std::decay_t<decltype(f(a))>;
  T sum = kWeights[0] * (f(c - h * kNodes[0]) + f(c + h * kNodes[0]));
  for (std::size_t k = 1; k < kNodes.size(); ++k) {
    sum = sum + kWeights[k] * (f(c - h * kNodes[k]) + f(c + h * kNodes[k]));
  }
  return T(h * sum);
}

}  // namespace escape::quad
