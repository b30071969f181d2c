#include "stratflow/linear.hpp"

#include <cmath>
#include <sstream>

#include "stratflow/phifun.hpp"

namespace stratflow {

std::string region_name(Region r) {
  switch (r) {
    case Region::D1: return "D1";
    case Region::D2: return "D2";
    case Region::D3: return "D3";
    case Region::ZeroN: return "ZeroN";
  }
  return "?";
}

namespace {
inline double mode_mu(const ModeIndex& m, int alpha) {
  return alpha == 0 ? 1.0 : m.eta_sq();
}
}  // namespace

Region classify_region(const ModeIndex& mode, int alpha) {
  if (!mode.in_set(Basis::B)) throw InvalidModeError("region classification needs q >= 1");
  if (mode.nt_sq() == 0.0) return Region::ZeroN;
  const double mu = mode_mu(mode, alpha);
  const double disc = mu * mu - 4.0 * mode.nt_sq() / mode.eta_sq();
  if (disc < 0.0) return Region::D1;
  if (disc < 0.25 * mu * mu) return Region::D2;
  return Region::D3;
}

ModeEigenSystem eigensystem(const ModeIndex& mode, int alpha) {
  if (!mode.in_set(Basis::B)) throw InvalidModeError("eigensystem needs q >= 1");
  ModeEigenSystem es;
  es.mode = mode;
  es.alpha = alpha;
  es.mu = mode_mu(mode, alpha);
  es.beta = mode.nt_sq() / mode.eta_sq();
  es.disc = es.mu * es.mu - 4.0 * es.beta;
  const Complex root = std::sqrt(Complex(es.disc, 0.0));
  es.lambda_plus = 0.5 * (es.mu + root);
  // mu - root cancels badly when 4 beta << mu^2; the determinant route
  // lambda_- = beta / lambda_+ is uniformly accurate (and exact at beta = 0).
  es.lambda_minus = es.disc >= 0.0 ? Complex(es.beta, 0.0) / es.lambda_plus
                                   : 0.5 * (es.mu - root);
  es.a_plus = {es.lambda_plus, Complex(-es.beta, 0.0)};
  es.a_minus = {es.lambda_minus, Complex(-es.beta, 0.0)};
  es.region = classify_region(mode, alpha);
  es.b_defined = es.region != Region::ZeroN;
  if (es.b_defined) {
    const Complex dl = es.lambda_plus - es.lambda_minus;
    const double r = mode.eta_sq() / mode.nt_sq();
    es.b_plus = {1.0 / dl, r * es.lambda_minus / dl};
    es.b_minus = {-1.0 / dl, -r * es.lambda_plus / dl};
  }
  return es;
}

C2 propagate_mode(const C2& u0, const ModeEigenSystem& es, double t) {
  if (t < 0.0) throw DomainError("propagation time must be nonnegative");
  const Complex ep = std::exp(-es.lambda_plus * t);
  const Complex psi = t * std::exp(-es.lambda_minus * t) *
                      phi1m((es.lambda_plus - es.lambda_minus) * t);
  // (lambda_+ I - M) u0 = (-lambda_- u0_1 + beta u0_2, -u0_1 + lambda_+ u0_2)
  const Complex r0 = -es.lambda_minus * u0[0] + es.beta * u0[1];
  const Complex r1 = -u0[0] + es.lambda_plus * u0[1];
  return {ep * u0[0] + psi * r0, ep * u0[1] + psi * r1};
}

C2 propagate_mode(const C2& u0, const ModeIndex& mode, int alpha, double t) {
  return propagate_mode(u0, eigensystem(mode, alpha), t);
}

EigenTable EigenTable::build(const Truncation& tr, int alpha) {
  EigenTable tab;
  tab.tr = tr;
  tab.alpha = alpha;
  tab.entries.resize(static_cast<size_t>(tr.mode_count(Basis::B)));
  for_each_mode(tr, Basis::B, [&](long i, const ModeIndex& m) {
    tab.entries[static_cast<size_t>(i)] = eigensystem(m, alpha);
  });
  return tab;
}

std::string eigen_table_csv(const Truncation& tr, int alpha) {
  std::ostringstream out;
  if (tr.dh() == 1)
    out << "n,q,eta,disc,region,re_lambda_plus,im_lambda_plus,re_lambda_minus,im_lambda_minus\n";
  else
    out << "n1,n2,q,eta,disc,region,re_lambda_plus,im_lambda_plus,re_lambda_minus,im_lambda_minus\n";
  for_each_mode(tr, Basis::B, [&](long, const ModeIndex& m) {
    const ModeEigenSystem es = eigensystem(m, alpha);
    for (int a = 0; a < tr.dh(); ++a) out << m.n[static_cast<size_t>(a)] << ",";
    out << m.q << "," << format_double(m.eta()) << "," << format_double(es.disc) << ","
        << region_name(es.region) << "," << format_double(es.lambda_plus.real()) << ","
        << format_double(es.lambda_plus.imag()) << "," << format_double(es.lambda_minus.real())
        << "," << format_double(es.lambda_minus.imag()) << "\n";
  });
  return out.str();
}

FlowState propagate_linear(const FlowState& s0, double t, const EigenTable& table, int threads) {
  if (t < 0.0) throw DomainError("propagation time must be nonnegative");
  if (table.tr != s0.tr || table.alpha != s0.alpha)
    throw DimensionError("eigen table does not match state");
  FlowState s = s0;
  s.t = s0.t + t;

  const long bcount = s0.tr.mode_count(Basis::B);
  parallel_for(bcount, threads, [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      const ModeEigenSystem& es = table.at(i);
      const C2 u0{s0.vd.coef[static_cast<size_t>(i)], s0.theta.coef[static_cast<size_t>(i)]};
      const C2 u = propagate_mode(u0, es, t);
      s.vd.coef[static_cast<size_t>(i)] = u[0];
      s.theta.coef[static_cast<size_t>(i)] = u[1];
    }
  });

  // v_h rows: d/dt V = -mu V + i q~ n~_a / |eta|^2 Theta(tau), solved exactly.
  // With a = lambda_- t, eps = (lambda_+ - lambda_-) t,
  //   int_0^t e^{-mu(t-s)} e^{-lambda_+ s} ds = t e^{-lambda_+ t} phi1m(a),
  //   int_0^t e^{-mu(t-s)} psi(s) ds
  //     = t^2 e^{-a} (dd_phi1m(a+eps, a) + phi1m(a) phi1m(eps)),
  // both expressed purely in decaying factors (mu = lambda_+ + lambda_-).
  const long ccount = s0.tr.mode_count(Basis::C);
  parallel_for(ccount, threads, [&](long lo, long hi) {
    for (long ci = lo; ci < hi; ++ci) {
      const ModeIndex m = s0.tr.unflatten(ci, Basis::C);
      if (m.q == 0) {
        const double mu0 = s0.alpha == 0 ? 1.0 : m.nt_sq();
        const double decay = std::exp(-mu0 * t);
        for (int a = 0; a < s0.tr.dh(); ++a)
          s.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)] =
              decay * s0.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)];
        continue;
      }
      const long bi = s0.tr.flatten(m, Basis::B);
      const ModeEigenSystem& es = table.at(bi);
      const Complex decay = std::exp(Complex(-es.mu * t, 0.0));
      Complex coupling(0.0, 0.0);
      if (m.nt_sq() > 0.0) {
        const Complex theta0 = s0.theta.coef[static_cast<size_t>(bi)];
        const Complex w = -s0.vd.coef[static_cast<size_t>(bi)] + es.lambda_plus * theta0;
        const Complex a = es.lambda_minus * t;
        const Complex eps = (es.lambda_plus - es.lambda_minus) * t;
        const Complex g_plus = t * std::exp(-es.lambda_plus * t) * phi1m(a);
        const Complex dcoup =
            t * t * std::exp(-a) * (dd_phi1m(a + eps, a) + phi1m(a) * phi1m(eps));
        coupling = theta0 * g_plus + w * dcoup;
      }
      const double inv_e2 = 1.0 / m.eta_sq();
      for (int a = 0; a < s0.tr.dh(); ++a) {
        const Complex gain = Complex(0.0, m.q_tilde() * m.n_tilde(a) * inv_e2);
        s.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)] =
            decay * s0.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)] + gain * coupling;
      }
    }
  });

  return s;
}

FlowState propagate_linear(const FlowState& s0, double t) {
  return propagate_linear(s0, t, EigenTable::build(s0.tr, s0.alpha));
}

double decay_envelope(double s, double m, double t, int alpha, EnvelopeKind kind) {
  if (s < 0.0 || s > m) throw DomainError("envelope requires 0 <= s <= m");
  double p = (m - s) / (2.0 * (1.0 + alpha));
  if (kind == EnvelopeKind::VerticalVelocity) p += 1.0;
  return std::exp(-0.25 * t) + std::pow(1.0 + t, -p);
}

KernelBoundMargins kernel_bound_margins(const ModeEigenSystem& es, double t) {
  KernelBoundMargins m{};
  const double abs_plus = std::exp(-es.lambda_plus.real() * t);
  m.plus = std::exp(-0.5 * es.mu * t) - abs_plus;
  const double abs_minus = std::exp(-es.lambda_minus.real() * t);
  const double bound =
      es.disc <= 0.0 ? std::exp(-0.5 * es.mu * t) : std::exp(-es.beta / es.mu * t);
  m.minus = bound - abs_minus;
  return m;
}

}  // namespace stratflow
