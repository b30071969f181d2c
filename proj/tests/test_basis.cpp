#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "stratflow/basis.hpp"

using namespace stratflow;

namespace {

ModeIndex mk2(int n, int q) {
  ModeIndex m;
  m.n = {n, 0};
  m.q = q;
  m.dh = 1;
  return m;
}

SpectralField random_field(const Truncation& tr, Basis tag, std::uint64_t seed,
                           int nmax = -1, int qmax = -1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  SpectralField f(tag, tr);
  for_each_mode(tr, tag, [&](long i, const ModeIndex& m) {
    int na = 0;
    for (int a = 0; a < tr.dh(); ++a) na = std::max(na, std::abs(m.n[static_cast<size_t>(a)]));
    if (nmax >= 0 && na > nmax) return;
    if (qmax >= 0 && m.q > qmax) return;
    f.coef[static_cast<size_t>(i)] = Complex(g(rng), g(rng));
  });
  f.enforce_reality();
  return f;
}

double max_diff(const SpectralField& a, const SpectralField& b) {
  REQUIRE(a.tag == b.tag);
  double worst = 0.0;
  for (size_t i = 0; i < a.coef.size(); ++i)
    worst = std::max(worst, std::abs(a.coef[i] - b.coef[i]));
  return worst;
}

}  // namespace

TEST_CASE("shifted sign table sigma_q = tau_q = (-1)^{floor(q/2)}") {
  // Pins the empirical sign tables that make the vertical direction a plain
  // shifted sine/cosine transform.
  for (int q = 0; q <= 13; ++q) {
    for (double x : {-0.93, -0.4, 0.0, 0.17, 0.5, 0.88}) {
      const double s = shifted_sign(q);
      CHECK(b_profile(q, x) == doctest::Approx(s * std::sin(0.5 * kPi * q * (x + 1.0))).epsilon(1e-14));
      CHECK(c_profile(q, x) == doctest::Approx(s * std::cos(0.5 * kPi * q * (x + 1.0))).epsilon(1e-14));
    }
  }
}

TEST_CASE("evaluate_basis reference values") {
  CHECK(evaluate_basis(mk2(0, 0), Basis::C, {0.37, 0.21}).real() == doctest::Approx(1.0));
  CHECK(std::abs(evaluate_basis(mk2(0, 2), Basis::B, {0.1, 1.0})) < 1e-15);
  CHECK(evaluate_basis(mk2(0, 1), Basis::B, {0.6, 0.0}).real() == doctest::Approx(1.0));
  CHECK_THROWS_AS(evaluate_basis(mk2(0, 0), Basis::B, {0.0, 0.0}), InvalidModeError);
}

TEST_CASE("truncation construction and flattening") {
  const Truncation tr = Truncation::make(2, 5, 8);
  CHECK(tr.mh[0] >= 3 * 5 + 1);
  CHECK(2 * tr.mv >= 3 * 8 + 2);
  CHECK(tr.mode_count(Basis::B) == 11 * 8);
  CHECK(tr.mode_count(Basis::C) == 11 * 9);
  for_each_mode(tr, Basis::B, [&](long i, const ModeIndex& m) {
    CHECK(tr.flatten(m, Basis::B) == i);
  });
  CHECK_THROWS_AS(Truncation::make_with_grid(2, 5, 8, 10, 14), DimensionError);
  CHECK_THROWS_AS(Truncation::make(2, 5, 3), DimensionError);
  CHECK_THROWS_AS(Truncation::make(4, 5, 8), DimensionError);
}

TEST_CASE("forward of single basis functions is one-hot") {
  const Truncation tr = Truncation::make(2, 4, 8);
  const SpectralOps ops(tr);
  for (Basis tag : {Basis::B, Basis::C}) {
    for (const ModeIndex probe :
         {mk2(0, tr.q_min(tag)), mk2(1, 2), mk2(-3, 5), mk2(4, 8), mk2(2, tr.q_min(tag))}) {
      GridField grid(static_cast<size_t>(tr.grid_count()));
      for (int ih = 0; ih < tr.mh[0]; ++ih) {
        for (int j = 0; j < tr.mv; ++j) {
          const std::vector<double> x{static_cast<double>(ih) / tr.mh[0], tr.vertical_node(j)};
          grid[static_cast<size_t>(ih) * tr.mv + j] = evaluate_basis(probe, tag, x).real();
        }
      }
      // real part of B_{n,q} = (B_{n,q} + B_{-n,q})/2
      const SpectralField got = ops.forward(grid, tag);
      for_each_mode(tr, tag, [&](long i, const ModeIndex& m) {
        double want = 0.0;
        if (m.q == probe.q && std::abs(m.n[0]) == std::abs(probe.n[0]))
          want = probe.n[0] == 0 ? 1.0 : 0.5;
        CHECK(std::abs(got.coef[static_cast<size_t>(i)] - Complex(want, 0.0)) < 1e-12);
      });
    }
  }
}

TEST_CASE("transform roundtrip on random band-limited fields") {
  const Truncation tr = Truncation::make(2, 6, 10);
  const SpectralOps ops(tr);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (Basis tag : {Basis::B, Basis::C}) {
      const SpectralField f = random_field(tr, tag, seed);
      const SpectralField back = ops.forward(ops.inverse(f), tag);
      CHECK(max_diff(f, back) < 1e-12);
    }
  }
}

TEST_CASE("forward matches the direct quadrature oracle") {
  const Truncation tr = Truncation::make(2, 3, 6);
  const SpectralOps ops(tr);
  // forward(sin(pi x_d) cos(2 pi x_1)) -> +-1/2 at (n = +-1, q = 2)
  auto fn = [](const std::vector<double>& x) {
    return std::sin(kPi * x[1]) * std::cos(2.0 * kPi * x[0]);
  };
  GridField grid(static_cast<size_t>(tr.grid_count()));
  for (int ih = 0; ih < tr.mh[0]; ++ih)
    for (int j = 0; j < tr.mv; ++j)
      grid[static_cast<size_t>(ih) * tr.mv + j] =
          fn({static_cast<double>(ih) / tr.mh[0], tr.vertical_node(j)});
  const SpectralField got = ops.forward(grid, Basis::B);
  for_each_mode(tr, Basis::B, [&](long i, const ModeIndex& m) {
    const double want = (std::abs(m.n[0]) == 1 && m.q == 2) ? 0.5 : 0.0;
    CHECK(std::abs(got.coef[static_cast<size_t>(i)] - Complex(want, 0.0)) < 1e-12);
    // independent quadrature route
    const Complex q = oracles::quad_coefficient(fn, m, Basis::B, tr);
    CHECK(std::abs(got.coef[static_cast<size_t>(i)] - q) < 1e-11);
  });
  // a handful of C coefficients of a generic smooth function, against quadrature
  auto fn2 = [](const std::vector<double>& x) {
    return std::exp(std::sin(2.0 * kPi * x[0])) * std::cos(0.5 * kPi * 2.0 * x[1]) +
           0.3 * std::cos(0.5 * kPi * 4.0 * x[1]);
  };
  for (size_t i = 0; i < grid.size(); ++i) {
    const int ih = static_cast<int>(i) / tr.mv;
    const int j = static_cast<int>(i) % tr.mv;
    grid[i] = fn2({static_cast<double>(ih) / tr.mh[0], tr.vertical_node(j)});
  }
  const SpectralField gc = ops.forward(grid, Basis::C);
  for (const ModeIndex m : {mk2(0, 0), mk2(1, 2), mk2(-2, 4), mk2(3, 0)}) {
    const Complex want = oracles::quad_coefficient(fn2, m, Basis::C, tr, 6);
    CHECK(std::abs(gc.at(m) - want) < 1e-9);
  }
}

TEST_CASE("derivative rules") {
  const Truncation tr = Truncation::make(2, 3, 6);
  const SpectralOps ops(tr);

  SUBCASE("d_d B -> q~ C") {
    SpectralField f(Basis::B, tr);
    f.at(mk2(1, 3)) = Complex(1.0, 0.0);
    const SpectralField d = ops.derivative(f, 1);
    CHECK(d.tag == Basis::C);
    CHECK(std::abs(d.at(mk2(1, 3)) - Complex(0.5 * kPi * 3, 0.0)) < 1e-14);
  }
  SUBCASE("d_d C_{n,0} = 0") {
    SpectralField f(Basis::C, tr);
    f.at(mk2(2, 0)) = Complex(1.0, 0.0);
    const SpectralField d = ops.derivative(f, 1);
    CHECK(d.max_abs() == 0.0);
  }
  SUBCASE("d_1 d_d B_{(1),2} = i 2pi^2 C_{(1),2}") {
    SpectralField f(Basis::B, tr);
    f.at(mk2(1, 2)) = Complex(1.0, 0.0);
    const SpectralField d = ops.derivative(ops.derivative(f, 1), 0);
    CHECK(std::abs(d.at(mk2(1, 2)) - Complex(0.0, 2.0 * kPi * kPi)) < 1e-12);
  }
  SUBCASE("second vertical derivative of B returns -q~^2 B") {
    const SpectralField f = random_field(tr, Basis::B, 7);
    const SpectralField dd = ops.derivative(ops.derivative(f, 1), 1);
    CHECK(dd.tag == Basis::B);
    for_each_mode(tr, Basis::B, [&](long i, const ModeIndex& m) {
      const Complex want = -m.q_tilde() * m.q_tilde() * f.coef[static_cast<size_t>(i)];
      CHECK(std::abs(dd.coef[static_cast<size_t>(i)] - want) < 1e-12);
    });
  }
  SUBCASE("derivatives match finite differences of the evaluated field") {
    const SpectralField f = random_field(tr, Basis::B, 11);
    const SpectralField dx = ops.derivative(f, 0);
    const SpectralField dd = ops.derivative(f, 1);
    const double h = 1e-5;
    for (const std::vector<double> x : {std::vector<double>{0.13, -0.42},
                                        std::vector<double>{0.77, 0.31}}) {
      const double fd_x = (oracles::evaluate_field(f, {x[0] + h, x[1]}) -
                           oracles::evaluate_field(f, {x[0] - h, x[1]})) /
                          (2.0 * h);
      const double fd_d = (oracles::evaluate_field(f, {x[0], x[1] + h}) -
                           oracles::evaluate_field(f, {x[0], x[1] - h})) /
                          (2.0 * h);
      CHECK(oracles::evaluate_field(dx, x) == doctest::Approx(fd_x).epsilon(1e-6));
      CHECK(oracles::evaluate_field(dd, x) == doctest::Approx(fd_d).epsilon(1e-6));
    }
  }
}

TEST_CASE("product reference cases") {
  const Truncation tr = Truncation::make(2, 3, 8);
  const SpectralOps ops(tr);

  SUBCASE("B_{0,2} * C_{0,0} = B_{0,2}") {
    SpectralField b(Basis::B, tr), c(Basis::C, tr);
    b.at(mk2(0, 2)) = Complex(1.0, 0.0);
    c.at(mk2(0, 0)) = Complex(1.0, 0.0);
    const SpectralField p = ops.product(b, c);
    CHECK(p.tag == Basis::B);
    CHECK(max_diff(p, b) < 1e-13);
  }
  SUBCASE("B_{0,2}^2 = 1/2 C_{0,0} - 1/2 C_{0,4}") {
    SpectralField b(Basis::B, tr);
    b.at(mk2(0, 2)) = Complex(1.0, 0.0);
    const SpectralField p = ops.product(b, b);
    CHECK(p.tag == Basis::C);
    for_each_mode(tr, Basis::C, [&](long i, const ModeIndex& m) {
      Complex want(0.0, 0.0);
      if (m.n[0] == 0 && m.q == 0) want = Complex(0.5, 0.0);
      if (m.n[0] == 0 && m.q == 4) want = Complex(-0.5, 0.0);
      CHECK(std::abs(p.coef[static_cast<size_t>(i)] - want) < 1e-13);
    });
  }
}

TEST_CASE("product matches the convolution oracle") {
  const Truncation tr = Truncation::make(2, 4, 8);
  const SpectralOps ops(tr);
  struct Pair {
    Basis a, b;
  };
  for (const Pair tags : {Pair{Basis::B, Basis::C}, Pair{Basis::B, Basis::B},
                          Pair{Basis::C, Basis::C}}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const SpectralField f = random_field(tr, tags.a, seed);
      const SpectralField g = random_field(tr, tags.b, seed + 100);
      const SpectralField p = ops.product(f, g);
      const oracles::ProductExpansion want = oracles::convolve_oracle(f, g);
      const SpectralField& target = p.tag == Basis::B ? want.b_part : want.c_part;
      const SpectralField& other = p.tag == Basis::B ? want.c_part : want.b_part;
      const double scale = std::max(target.max_abs(), 1e-300);
      CHECK(max_diff(p, target) / scale < 1e-11);
      CHECK(other.max_abs() == 0.0);  // parity closure, exact at identity level
    }
  }
}

TEST_CASE("parity closure: half-support products are fully captured by the target tag") {
  const Truncation tr = Truncation::make(2, 6, 12);
  const SpectralOps ops(tr);
  const SpectralField f = random_field(tr, Basis::B, 3, 3, 6);
  const SpectralField g = random_field(tr, Basis::C, 4, 3, 6);
  const GridField prod = ops.multiply_grids(ops.inverse(f), ops.inverse(g));
  const SpectralField p = ops.forward(prod, Basis::B);
  const GridField back = ops.inverse(p);
  double resid = 0.0, scale = 0.0;
  for (size_t i = 0; i < prod.size(); ++i) {
    resid = std::max(resid, std::abs(back[i] - prod[i]));
    scale = std::max(scale, std::abs(prod[i]));
  }
  CHECK(resid / scale < 1e-12);
}

TEST_CASE("l1 submultiplicativity of products") {
  const Truncation tr = Truncation::make(2, 4, 8);
  const SpectralOps ops(tr);
  for (std::uint64_t seed = 21; seed <= 24; ++seed) {
    const SpectralField f = random_field(tr, Basis::B, seed);
    const SpectralField g = random_field(tr, Basis::C, seed + 7);
    const SpectralField p = ops.product(f, g);
    auto l1 = [](const SpectralField& h) {
      double s = 0.0;
      for (const Complex& c : h.coef) s += std::abs(c);
      return s;
    };
    CHECK(l1(p) <= l1(f) * l1(g) * (1.0 + 1e-12));
  }
}

TEST_CASE("inverse-transformed B fields vanish on the walls") {
  const Truncation tr = Truncation::make(2, 4, 9);
  const SpectralField f = random_field(tr, Basis::B, 5);
  const double scale = std::max(f.max_abs(), 1.0);
  for (double xh : {0.0, 0.31, 0.77}) {
    for (double wall : {-1.0, 1.0}) {
      CHECK(std::abs(oracles::evaluate_field(f, {xh, wall})) < 1e-10 * scale);
    }
  }
}

TEST_CASE("dimension mismatch raises") {
  const Truncation tr = Truncation::make(2, 4, 8);
  const Truncation tr2 = Truncation::make(2, 3, 8);
  const SpectralOps ops(tr);
  const SpectralField f(Basis::B, tr2);
  CHECK_THROWS_AS(ops.inverse(f), DimensionError);
  GridField bad(10, 0.0);
  CHECK_THROWS_AS(ops.forward(bad, Basis::B), DimensionError);
}

TEST_CASE("d = 3 roundtrip and product") {
  const Truncation tr = Truncation::make(3, 2, 4);
  const SpectralOps ops(tr);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  SpectralField f(Basis::B, tr), h(Basis::C, tr);
  for (Complex& c : f.coef) c = Complex(g(rng), g(rng));
  for (Complex& c : h.coef) c = Complex(g(rng), g(rng));
  f.enforce_reality();
  h.enforce_reality();
  CHECK(max_diff(f, ops.forward(ops.inverse(f), Basis::B)) < 1e-12);
  const SpectralField p = ops.product(f, h);
  const oracles::ProductExpansion want = oracles::convolve_oracle(f, h);
  const double scale = std::max(want.b_part.max_abs(), 1e-300);
  CHECK(max_diff(p, want.b_part) / scale < 1e-11);
  CHECK(want.c_part.max_abs() == 0.0);
}
