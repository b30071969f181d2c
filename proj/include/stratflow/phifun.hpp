#pragma once

#include <cmath>
#include <complex>

#include "stratflow/util.hpp"

namespace stratflow {

// phi1m(z) = (1 - e^{-z})/z, the integrating-factor kernel
//   int_0^t e^{-mu(t-s)} ds = t * phi1m(mu*t).
// For Re z >= 0 it is bounded, so expressions built from it never overflow no
// matter how stiff the mode is. Series evaluation below the cancellation
// radius, direct evaluation above it.
inline Complex phi1m(Complex z) {
  if (std::abs(z) < 0.5) {
    // sum_{k>=0} (-z)^k / (k+1)!
    Complex term(1.0, 0.0);
    Complex sum(1.0, 0.0);
    for (int k = 1; k <= 24; ++k) {
      term *= -z / static_cast<double>(k + 1);
      sum += term;
    }
    return sum;
  }
  return (1.0 - std::exp(-z)) / z;
}

namespace detail {

// Derivatives of phi1m from z f(z) = 1 - e^{-z}:
//   f^{(k)}(z) = ((-1)^{k+1} e^{-z} - k f^{(k-1)}(z)) / z.
// Stable for |z| >~ 1, which is the only place they are needed.
inline void phi1m_derivs(Complex z, Complex out[6]) {
  const Complex ez = std::exp(-z);
  out[0] = (1.0 - ez) / z;
  double sign = 1.0;  // (-1)^{k+1} for k = 1
  for (int k = 1; k <= 5; ++k) {
    out[k] = (sign * ez - static_cast<double>(k) * out[k - 1]) / z;
    sign = -sign;
  }
}

}  // namespace detail

// Divided difference (phi1m(x) - phi1m(y)) / (x - y), continuous at x == y.
// This is the kernel of the Duhamel coupling integral of v_h to theta; near
// the degenerate set lambda_+ ~ lambda_- the naive quotient cancels, so three
// regimes are used:
//   * both arguments small  -> joint power series,
//   * well separated        -> direct quotient,
//   * close but not small   -> even-order Taylor expansion at the midpoint.
inline Complex dd_phi1m(Complex x, Complex y) {
  const double ax = std::abs(x);
  const double ay = std::abs(y);
  if (std::max(ax, ay) <= 2.0) {
    // phi1m(z) = sum_j c_j z^j, c_j = (-1)^j/(j+1)!;
    // dd = sum_{j>=1} c_j * h_{j-1},  h_j = sum_{i=0..j} x^i y^{j-i}.
    Complex h(1.0, 0.0);   // h_0
    Complex ypow = y;      // y^{j}
    double cj = -0.5;      // c_1
    Complex sum = cj * h;
    for (int j = 2; j <= 40; ++j) {
      h = x * h + ypow;
      ypow *= y;
      cj = -cj / static_cast<double>(j + 1);
      sum += cj * h;
    }
    return sum;
  }
  const Complex m = 0.5 * (x + y);
  const Complex h = 0.5 * (x - y);
  const double am = std::abs(m);
  if (std::abs(x - y) >= 2e-3 * std::max(1.0, am)) {
    return (phi1m(x) - phi1m(y)) / (x - y);
  }
  Complex d[6];
  detail::phi1m_derivs(m, d);
  const Complex h2 = h * h;
  return d[1] + h2 * (d[3] / 6.0 + h2 * d[5] / 120.0);
}

}  // namespace stratflow
