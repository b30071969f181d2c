#include <complex>

#include "doctest.h"
#include "stratflow/phifun.hpp"

using stratflow::Complex;
using stratflow::dd_phi1m;
using stratflow::phi1m;

namespace {

// long-double reference for (1 - e^{-z})/z; Taylor below the cancellation
// radius so the reference is accurate everywhere.
Complex phi1m_ref(Complex z) {
  const std::complex<long double> zl(z.real(), z.imag());
  if (std::abs(z) < 0.7) {
    std::complex<long double> term(1.0L, 0.0L), sum(1.0L, 0.0L);
    for (int k = 1; k <= 30; ++k) {
      term *= -zl / static_cast<long double>(k + 1);
      sum += term;
    }
    return Complex(static_cast<double>(sum.real()), static_cast<double>(sum.imag()));
  }
  const std::complex<long double> r = (1.0L - std::exp(-zl)) / zl;
  return Complex(static_cast<double>(r.real()), static_cast<double>(r.imag()));
}

Complex dd_ref(Complex x, Complex y) {
  const std::complex<long double> xl(x.real(), x.imag());
  const std::complex<long double> yl(y.real(), y.imag());
  const std::complex<long double> r =
      ((1.0L - std::exp(-xl)) / xl - (1.0L - std::exp(-yl)) / yl) / (xl - yl);
  return Complex(static_cast<double>(r.real()), static_cast<double>(r.imag()));
}

double rel(Complex got, Complex want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

}  // namespace

TEST_CASE("phi1m basic values") {
  CHECK(phi1m(Complex(0.0, 0.0)) == Complex(1.0, 0.0));
  // (1 - e^{-1})/1
  CHECK(rel(phi1m(Complex(1.0, 0.0)), Complex(1.0 - std::exp(-1.0), 0.0)) < 1e-15);
}

TEST_CASE("phi1m series/direct agree across the switch radius") {
  for (double r : {1e-8, 1e-4, 0.1, 0.4, 0.49, 0.51, 0.7, 2.0, 20.0, 200.0}) {
    for (double ang : {0.0, 0.3, 1.0, 1.5, -0.7}) {
      const Complex z = std::polar(r, ang);
      if (z.real() < -5.0) continue;
      CHECK(rel(phi1m(z), phi1m_ref(z)) < 5e-15);
    }
  }
}

TEST_CASE("dd_phi1m matches the long-double quotient when it is well-conditioned") {
  const Complex pts[] = {{0.3, 0.1}, {1.0, -0.5}, {1.9, 0.0},  {3.0, 1.0},
                         {8.0, 2.0}, {30.0, 5.0}, {90.0, 0.0}, {0.01, 0.0}};
  for (const Complex& x : pts) {
    for (const Complex& y : pts) {
      if (std::abs(x - y) < 1e-6) continue;
      CHECK(rel(dd_phi1m(x, y), dd_ref(x, y)) < 1e-12);
    }
  }
}

TEST_CASE("dd_phi1m is stable through near-degenerate separations") {
  // x ~ y at many magnitudes; the long-double quotient keeps ~19-3 digits at
  // eps = 1e-3 relative separation, plenty to certify 1e-12 here.
  for (double base : {0.05, 0.4, 1.5, 3.0, 12.0, 60.0}) {
    for (double sep : {1e-3, 1e-5, 3e-7}) {
      const Complex x(base, 0.2 * base);
      const Complex y = x + Complex(sep * base, -0.3 * sep * base);
      CHECK(rel(dd_phi1m(x, y), dd_ref(x, y)) < 1e-10);
    }
  }
}

TEST_CASE("dd_phi1m continuous at coincident arguments") {
  const Complex x(2.5, 0.7);
  const Complex near = x + Complex(1e-13, 0.0);
  CHECK(std::abs(dd_phi1m(x, near) - dd_phi1m(x, x)) < 1e-12);
  // dd(x, x) equals the derivative of phi1m
  const double h = 1e-6;
  const Complex fd = (phi1m(x + Complex(h, 0.0)) - phi1m(x - Complex(h, 0.0))) / (2.0 * h);
  CHECK(std::abs(dd_phi1m(x, x) - fd) < 1e-9);
}

TEST_CASE("dd_phi1m is symmetric") {
  const Complex x(5.0, 1.0), y(4.999, 1.0002);
  CHECK(std::abs(dd_phi1m(x, y) - dd_phi1m(y, x)) < 1e-16);
}
