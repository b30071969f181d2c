#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "stratflow/diagnostics.hpp"

using namespace stratflow;

namespace {

ModeIndex mk2(int n, int q) {
  ModeIndex m;
  m.n = {n, 0};
  m.q = q;
  m.dh = 1;
  return m;
}

FlowState random_state(const Truncation& tr, int alpha, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  FlowState s = FlowState::zero(tr, alpha);
  auto fill = [&](SpectralField& f) {
    for (Complex& c : f.coef) c = Complex(g(rng), g(rng));
    f.enforce_reality();
  };
  for (auto& f : s.vh) fill(f);
  fill(s.vd);
  fill(s.theta);
  return s;
}

}  // namespace

TEST_CASE("energy_E") {
  const Truncation tr = Truncation::make(2, 3, 6);
  CHECK(energy_E(FlowState::zero(tr, 0), 3) == 0.0);

  FlowState s = FlowState::zero(tr, 0);
  s.theta.at(mk2(1, 2)) = Complex(1.0, 0.0);
  // a single B mode (without its conjugate partner) has unit L2 mass
  CHECK(energy_E(s, 0) == doctest::Approx(1.0).epsilon(1e-14));

  const FlowState r = random_state(tr, 0, 3);
  double e2 = 0.0;
  for (const auto& f : r.vh) {
    const double n = sobolev_norm(f, NormSpec::sobolev(2.0));
    e2 += n * n;
  }
  const double nd = sobolev_norm(r.vd, NormSpec::sobolev(2.0));
  const double nt = sobolev_norm(r.theta, NormSpec::sobolev(2.0));
  CHECK(energy_E(r, 2) == doctest::Approx(std::sqrt(e2 + nd * nd + nt * nt)).epsilon(1e-13));
  CHECK(energy_E(r, 0) <= energy_E(r, 2));
  CHECK_THROWS_AS(energy_E(r, -1.0), DomainError);
}

TEST_CASE("cross_A") {
  const Truncation tr = Truncation::make(2, 3, 6);
  CHECK_THROWS_AS(cross_A(FlowState::zero(tr, 0), 0), DomainError);

  SUBCASE("disjoint supports give zero") {
    FlowState s = FlowState::zero(tr, 0);
    s.vd.at(mk2(1, 2)) = Complex(0.3, 0.1);
    s.vd.at(mk2(-1, 2)) = Complex(0.3, -0.1);
    s.theta.at(mk2(2, 3)) = Complex(0.5, 0.0);
    s.theta.at(mk2(-2, 3)) = Complex(0.5, 0.0);
    CHECK(cross_A(s, 3) == 0.0);
  }
  SUBCASE("single shared n = 0 mode: A_1 = |eta|^2") {
    FlowState s = FlowState::zero(tr, 0);
    s.vd.at(mk2(0, 2)) = Complex(1.0, 0.0);
    s.theta.at(mk2(0, 2)) = Complex(1.0, 0.0);
    const ModeIndex m = mk2(0, 2);
    CHECK(cross_A(s, 1) == doctest::Approx(m.eta_sq()).epsilon(1e-14));
    // hand evaluation for k = 2: h_1 + h_2 with one variable q~^2
    const double qt2 = m.q_tilde() * m.q_tilde();
    CHECK(cross_A(s, 2) == doctest::Approx(qt2 + qt2 * qt2).epsilon(1e-14));
  }
  SUBCASE("|A_k| <= E_k^2 / 2 on random states") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const FlowState s = random_state(tr, 0, seed);
      for (int k : {1, 2, 4}) {
        const double e = energy_E(s, k);
        CHECK(std::abs(cross_A(s, k)) <= 0.5 * e * e * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("key quantity accumulators") {
  const Truncation tr = Truncation::make(2, 3, 6);
  RunRecord rec;

  SUBCASE("zero velocity leaves accumulators unchanged") {
    FlowState s = FlowState::zero(tr, 0);
    s.theta.at(mk2(1, 1)) = Complex(1.0, 0.0);
    key_quantities_step(s, 0.5, rec);
    CHECK(rec.k1 == 0.0);
    CHECK(rec.k2 == 0.0);
  }
  SUBCASE("single v_h mode increments by dt |eta| |coef| plus the partner") {
    FlowState s = FlowState::zero(tr, 0);
    const ModeIndex m = mk2(1, 2);
    s.vh[0].at(m) = Complex(0.0, 0.4);
    s.vh[0].at(mk2(-1, 2)) = Complex(0.0, -0.4);
    key_quantities_step(s, 0.25, rec);
    CHECK(rec.k1 == doctest::Approx(0.25 * 2.0 * m.eta() * 0.4).epsilon(1e-13));
    CHECK(rec.k2 == 0.0);
  }
  SUBCASE("l1 surrogates dominate the collocation maxima") {
    const Truncation tr2 = Truncation::make(2, 4, 8);
    const SpectralOps ops(tr2);
    const FlowState s = random_state(tr2, 0, 9);
    CHECK(grad_v_linf_grid(s, ops) <= grad_v_linf_l1(s) * (1.0 + 1e-10));
    CHECK(dd_vd_linf_grid(s, ops) <= dd_vd_linf_l1(s) * (1.0 + 1e-10));
  }
}

TEST_CASE("fit_decay_exponent") {
  std::vector<double> t, y;
  for (int i = 0; i <= 48; ++i) t.push_back(std::pow(1.0 + 300.0, i / 48.0) - 1.0);

  SUBCASE("exact power law") {
    y.clear();
    for (double ti : t) y.push_back(std::pow(1.0 + ti, -2.0));
    const FitResult f = fit_decay_exponent(t, y, 0.0, 300.0);
    CHECK(f.slope == doctest::Approx(-2.0).epsilon(1e-10));
    CHECK(f.stderr_ < 1e-10);
  }
  SUBCASE("prefactor invariance") {
    y.clear();
    for (double ti : t) y.push_back(3.0 * std::pow(1.0 + ti, -0.5));
    CHECK(fit_decay_exponent(t, y, 0.0, 300.0).slope == doctest::Approx(-0.5).epsilon(1e-10));
  }
  SUBCASE("transient washes out as the window moves right") {
    y.clear();
    for (double ti : t) y.push_back(std::pow(1.0 + ti, -2.0) + std::exp(-0.25 * ti));
    const double early = fit_decay_exponent(t, y, 0.1, 10.0).slope;
    const double late = fit_decay_exponent(t, y, 60.0, 300.0).slope;
    CHECK(std::abs(late - (-2.0)) < 0.05);
    CHECK(std::abs(late - (-2.0)) < std::abs(early - (-2.0)));
  }
  SUBCASE("errors") {
    y.assign(t.size(), 1.0);
    y[5] = -1.0;
    CHECK_THROWS_AS(fit_decay_exponent(t, y, 0.0, 300.0), DomainError);
    std::vector<double> t3{1.0, 2.0, 3.0}, y3{1.0, 1.0, 1.0};
    CHECK_THROWS_AS(fit_decay_exponent(t3, y3, 0.0, 10.0), DomainError);
  }
}

TEST_CASE("sigma_profile") {
  const int nq = 6;
  std::vector<Complex> theta0(nq, Complex(0.0, 0.0));
  theta0[0] = Complex(0.8, 0.0);
  theta0[3] = Complex(-0.2, 0.0);

  SUBCASE("linear run: zero flux reproduces the initial mean exactly") {
    std::vector<double> t;
    std::vector<std::vector<Complex>> flux;
    for (int i = 0; i < 12; ++i) {
      t.push_back(i * 1.0);
      flux.emplace_back(nq, Complex(0.0, 0.0));
    }
    const SigmaProfile s = sigma_profile(t, flux, theta0);
    CHECK(s.ok);
    CHECK(s.tail_error == 0.0);
    for (int q = 0; q < nq; ++q) CHECK(s.coef_q[static_cast<size_t>(q)] == theta0[static_cast<size_t>(q)]);
  }
  SUBCASE("mean-free initial data gives sigma = 0 in a linear run") {
    std::vector<Complex> zero0(nq, Complex(0.0, 0.0));
    std::vector<double> t;
    std::vector<std::vector<Complex>> flux;
    for (int i = 0; i < 12; ++i) {
      t.push_back(i * 1.0);
      flux.emplace_back(nq, Complex(0.0, 0.0));
    }
    const SigmaProfile s = sigma_profile(t, flux, zero0);
    CHECK(s.ok);
    CHECK(s.l2_norm() == 0.0);
  }
  SUBCASE("algebraic flux: stable under halved sample density") {
    auto make = [&](int stride) {
      std::vector<double> t;
      std::vector<std::vector<Complex>> flux;
      for (int i = 0; i <= 64; i += stride) {
        const double ti = std::pow(1.0 + 50.0, i / 64.0) - 1.0;
        t.push_back(ti);
        std::vector<Complex> row(nq, Complex(0.0, 0.0));
        row[1] = Complex(1e-4 * std::pow(1.0 + ti, -3.0), 0.0);
        flux.push_back(std::move(row));
      }
      return sigma_profile(t, flux, theta0, 1e-4);
    };
    const SigmaProfile full = make(1);
    const SigmaProfile half = make(2);
    CHECK(full.ok);
    CHECK(std::abs(full.l2_norm() - half.l2_norm()) < 10.0 * 1e-4);
  }
  SUBCASE("insufficient history is reported, not valued") {
    std::vector<double> t{0.0, 1.0};
    std::vector<std::vector<Complex>> flux(2, std::vector<Complex>(nq, Complex(1.0, 0.0)));
    const SigmaProfile s = sigma_profile(t, flux, theta0);
    CHECK_FALSE(s.ok);
    CHECK_FALSE(s.message.empty());
  }
}

TEST_CASE("a record with no diagnostic columns still emits the time column") {
  RunRecord rec;
  rec.add_row(0.0, {});
  rec.add_row(1.0, {});
  CHECK(record_csv(rec) == "t\n0\n1\n");
}

TEST_CASE("run record bookkeeping and serialization") {
  RunRecord rec;
  rec.set_columns({"a", "b"});
  rec.add_row(0.0, {1.0, 2.0});
  rec.add_row(1.5, {0.5, 1.0});
  CHECK_THROWS_AS(rec.add_row(1.0, {0.1, 0.1}), DomainError);  // times must increase
  CHECK_THROWS_AS(rec.add_row(2.0, {0.1}), DimensionError);
  CHECK(rec.column("b")[1] == 1.0);
  CHECK_THROWS_AS(rec.column("zzz"), DomainError);

  rec.k1 = 0.125;
  rec.fits.push_back({"a", -2.0, 0.01, 0.1, 1.5, 9});
  const std::string csv = record_csv(rec);
  CHECK(csv.rfind("t,a,b\n", 0) == 0);
  const std::string json = record_json(rec, "{\"scenario\":\"x\"}");
  const RunRecord back = record_from_json(json);
  CHECK(record_csv(back) == csv);  // byte-identical regeneration
  CHECK(back.fits.size() == 1);
  CHECK(back.fits[0].slope == -2.0);
  CHECK(back.k1 == 0.125);
}
