#include "stratflow/dynamics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace stratflow {

TendencyPart TendencyPart::zero(const Truncation& tr) {
  TendencyPart p;
  p.dvh.assign(static_cast<size_t>(tr.dh()), SpectralField(Basis::C, tr));
  p.dvd = SpectralField(Basis::B, tr);
  p.dtheta = SpectralField(Basis::B, tr);
  return p;
}

TendencyPart& TendencyPart::operator+=(const TendencyPart& o) {
  for (size_t a = 0; a < dvh.size(); ++a) dvh[a] += o.dvh[a];
  dvd += o.dvd;
  dtheta += o.dtheta;
  return *this;
}

TendencyPart& TendencyPart::operator*=(double s) {
  for (auto& f : dvh) f *= s;
  dvd *= s;
  dtheta *= s;
  return *this;
}

TendencyPart Tendency::total() const {
  TendencyPart sum = linear_stiff;
  sum += buoyancy;
  sum += nonlinear;
  return sum;
}

namespace {

struct Advection {
  std::vector<SpectralField> adv_h;  // F_c[(v.grad) v_h,a]
  SpectralField adv_d;               // F_b[(v.grad) v_d]
  SpectralField adv_theta;           // F_b[(v.grad) theta]
};

// (v.grad)F = sum_a v_h,a d_a F + v_d d_d F, dealiased on the padded grid.
// Parity: the horizontal part keeps F's tag, the vertical part flips it under
// d_d and flips back in the product, so every term lands in F's own tag.
Advection compute_advection(const FlowState& s, const SpectralOps& ops) {
  const Truncation& tr = s.tr;
  const int dh = tr.dh();
  std::vector<GridField> vel(static_cast<size_t>(dh + 1));
  for (int a = 0; a < dh; ++a) vel[static_cast<size_t>(a)] = ops.inverse(s.vh[static_cast<size_t>(a)]);
  vel[static_cast<size_t>(dh)] = ops.inverse(s.vd);

  auto advect = [&](const SpectralField& f) {
    GridField acc(static_cast<size_t>(tr.grid_count()), 0.0);
    for (int axis = 0; axis < tr.d; ++axis) {
      const GridField df = ops.inverse(ops.derivative(f, axis));
      const GridField& va = vel[static_cast<size_t>(axis)];
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += va[i] * df[i];
    }
    return ops.forward(acc, f.tag);
  };

  Advection out;
  out.adv_h.reserve(static_cast<size_t>(dh));
  for (int a = 0; a < dh; ++a) out.adv_h.push_back(advect(s.vh[static_cast<size_t>(a)]));
  out.adv_d = advect(s.vd);
  out.adv_theta = advect(s.theta);
  return out;
}

}  // namespace

PressureGradient pressure_gradient(const FlowState& s, const SpectralOps& ops) {
  const Advection adv = compute_advection(s, ops);
  const Truncation& tr = s.tr;
  PressureGradient pg;
  pg.grad_h.assign(static_cast<size_t>(tr.dh()), SpectralField(Basis::C, tr));
  pg.d_vertical = SpectralField(Basis::B, tr);

  for_each_mode(tr, Basis::C, [&](long ci, const ModeIndex& m) {
    const double e2 = m.eta_sq();
    if (e2 == 0.0) return;  // pressure gauge
    Complex ndota(0.0, 0.0);
    for (int a = 0; a < tr.dh(); ++a)
      ndota += m.n_tilde(a) * adv.adv_h[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)];
    Complex advd(0.0, 0.0), th(0.0, 0.0);
    if (m.q >= 1) {
      advd = adv.adv_d.at(m);
      th = s.theta.at(m);
    }
    const double qt = m.q_tilde();
    for (int a = 0; a < tr.dh(); ++a) {
      const double nt = m.n_tilde(a);
      pg.grad_h[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)] =
          (-nt * ndota + Complex(0.0, qt * nt) * (advd - th)) / e2;
    }
    if (m.q >= 1)
      pg.d_vertical.at(m) = (Complex(0.0, -qt) * ndota + qt * qt * (th - advd)) / e2;
  });
  return pg;
}

void leray_project(std::vector<SpectralField>& w_h, SpectralField& w_d) {
  if (w_h.empty()) throw DimensionError("leray_project needs at least one horizontal component");
  const Truncation& tr = w_h[0].tr;
  for_each_mode(tr, Basis::C, [&](long ci, const ModeIndex& m) {
    const double e2 = m.eta_sq();
    if (e2 == 0.0) return;  // mean mode passes through
    const double qt = m.q_tilde();
    Complex s(0.0, 0.0);
    for (int a = 0; a < tr.dh(); ++a)
      s += m.n_tilde(a) * w_h[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)];
    if (m.q >= 1) s -= Complex(0.0, qt) * w_d.at(m);
    s /= e2;
    for (int a = 0; a < tr.dh(); ++a)
      w_h[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)] -= m.n_tilde(a) * s;
    if (m.q >= 1) w_d.at(m) -= Complex(0.0, qt) * s;
  });
  // n~ = 0 rows of the vertical component are exact zeros of the projector.
  for (int q = 1; q <= tr.q_max; ++q) {
    ModeIndex m;
    m.dh = tr.dh();
    m.q = q;
    w_d.at(m) = Complex(0.0, 0.0);
  }
}

Tendency nonlinear_rhs(const FlowState& s, const SpectralOps& ops) {
  const Truncation& tr = s.tr;
  Tendency td;
  td.linear_stiff = TendencyPart::zero(tr);
  td.buoyancy = TendencyPart::zero(tr);
  td.nonlinear = TendencyPart::zero(tr);

  const Advection adv = compute_advection(s, ops);
  for (int a = 0; a < tr.dh(); ++a) {
    td.nonlinear.dvh[static_cast<size_t>(a)] = adv.adv_h[static_cast<size_t>(a)];
    td.nonlinear.dvh[static_cast<size_t>(a)] *= -1.0;
  }
  td.nonlinear.dvd = adv.adv_d;
  td.nonlinear.dvd *= -1.0;
  leray_project(td.nonlinear.dvh, td.nonlinear.dvd);
  td.nonlinear.dtheta = adv.adv_theta;
  td.nonlinear.dtheta *= -1.0;

  for_each_mode(tr, Basis::B, [&](long bi, const ModeIndex& m) {
    const double e2 = m.eta_sq();
    const double mu = s.alpha == 0 ? 1.0 : e2;
    const Complex th = s.theta.coef[static_cast<size_t>(bi)];
    const Complex vd = s.vd.coef[static_cast<size_t>(bi)];
    td.linear_stiff.dvd.coef[static_cast<size_t>(bi)] = -mu * vd;
    td.linear_stiff.dtheta.coef[static_cast<size_t>(bi)] = -vd;
    td.buoyancy.dvd.coef[static_cast<size_t>(bi)] = (m.nt_sq() / e2) * th;
  });
  for_each_mode(tr, Basis::C, [&](long ci, const ModeIndex& m) {
    const double mu = s.alpha == 0 ? 1.0 : m.eta_sq();
    for (int a = 0; a < tr.dh(); ++a) {
      const Complex vh = s.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)];
      td.linear_stiff.dvh[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)] = -mu * vh;
      if (m.q >= 1) {
        const Complex th = s.theta.at(m);
        td.buoyancy.dvh[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)] =
            Complex(0.0, m.q_tilde() * m.n_tilde(a) / m.eta_sq()) * th;
      }
    }
  });
  return td;
}

double cfl_max_dt(const FlowState& s, double cfl_c) {
  double l1 = 0.0;
  for_each_mode(s.tr, Basis::C, [&](long ci, const ModeIndex&) {
    double mag2 = 0.0;
    for (int a = 0; a < s.tr.dh(); ++a)
      mag2 += std::norm(s.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(ci)]);
    l1 += std::sqrt(mag2);
  });
  for (const Complex& c : s.vd.coef) l1 += std::abs(c);
  if (l1 == 0.0) return std::numeric_limits<double>::infinity();
  ModeIndex top;
  top.dh = s.tr.dh();
  for (int a = 0; a < s.tr.dh(); ++a) top.n[static_cast<size_t>(a)] = s.tr.nh_max;
  top.q = s.tr.q_max;
  return cfl_c / (top.eta() * l1);
}

namespace {

// Stiff flow with the buoyancy coupling removed: every row decays by its own
// e^{-mu t} and theta absorbs -int_0^t v_d in closed form.
FlowState propagate_stiff_nobuoyancy(const FlowState& s0, double t) {
  FlowState s = s0;
  s.t = s0.t + t;
  for_each_mode(s0.tr, Basis::B, [&](long i, const ModeIndex& m) {
    const double mu = s0.alpha == 0 ? 1.0 : m.eta_sq();
    const double decay = std::exp(-mu * t);
    const Complex vd0 = s0.vd.coef[static_cast<size_t>(i)];
    s.vd.coef[static_cast<size_t>(i)] = decay * vd0;
    s.theta.coef[static_cast<size_t>(i)] -= vd0 * ((1.0 - decay) / mu);
  });
  for_each_mode(s0.tr, Basis::C, [&](long i, const ModeIndex& m) {
    const double mu = s0.alpha == 0 ? 1.0 : m.eta_sq();
    const double decay = std::exp(-mu * t);
    for (int a = 0; a < s0.tr.dh(); ++a)
      s.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(i)] =
          decay * s0.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(i)];
  });
  return s;
}

FlowState apply_part(const FlowState& s, const TendencyPart& p, double w) {
  FlowState out = s;
  for (int a = 0; a < s.tr.dh(); ++a) {
    auto& dst = out.vh[static_cast<size_t>(a)].coef;
    const auto& src = p.dvh[static_cast<size_t>(a)].coef;
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
  }
  for (size_t i = 0; i < out.vd.coef.size(); ++i) out.vd.coef[i] += w * p.dvd.coef[i];
  for (size_t i = 0; i < out.theta.coef.size(); ++i) out.theta.coef[i] += w * p.dtheta.coef[i];
  return out;
}

}  // namespace

FlowState step(const FlowState& s, double dt, const SpectralOps& ops, const EigenTable& table,
               const StepOptions& opt) {
  if (dt <= 0.0) throw StepSizeError("dt must be positive");
  if (opt.enforce_cfl && opt.nonlinear) {
    const double dt_max = cfl_max_dt(s, opt.cfl_c);
    if (dt > dt_max) throw StepSizeError("dt exceeds the advective CFL bound");
  }
  const double h = 0.5 * dt;
  auto flow = [&](const FlowState& u, double tau) {
    return opt.explicit_buoyancy ? propagate_stiff_nobuoyancy(u, tau)
                                 : propagate_linear(u, tau, table, ops.threads());
  };
  auto explicit_part = [&](const Tendency& td) {
    TendencyPart p = TendencyPart::zero(s.tr);
    if (opt.nonlinear) p += td.nonlinear;
    if (opt.explicit_buoyancy) p += td.buoyancy;
    return p;
  };
  FlowState out;
  if (opt.nonlinear || opt.explicit_buoyancy) {
    const Tendency n1 = nonlinear_rhs(s, ops);
    const FlowState mid = flow(apply_part(s, explicit_part(n1), h), h);
    const Tendency n2 = nonlinear_rhs(mid, ops);
    FlowState tail = flow(s, h);
    tail = apply_part(tail, explicit_part(n2), dt);
    out = flow(tail, h);
  } else {
    out = propagate_linear(s, dt, table, ops.threads());
  }
  leray_project(out.vh, out.vd);
  out.enforce_reality();
  return out;
}

Conserved conserved_quantities(const FlowState& s) {
  Conserved c;
  // int_Omega theta = sum over n = 0, odd q of theta(0,q) int b_q, with
  // int_{-1}^{1} b_q = 4 (-1)^{(q-1)/2} / (pi q) for odd q and 0 for even q.
  double acc = 0.0;
  for (int q = 1; q <= s.tr.q_max; q += 2) {
    ModeIndex m;
    m.dh = s.tr.dh();
    m.q = q;
    const double w = 4.0 * ((q - 1) / 2 % 2 == 0 ? 1.0 : -1.0) / (kPi * q);
    acc += w * s.theta.at(m).real();
  }
  c.integral_theta = acc;
  ModeIndex zero;
  zero.dh = s.tr.dh();
  for (int a = 0; a < s.tr.dh(); ++a)
    c.integral_vh[static_cast<size_t>(a)] = 2.0 * s.vh[static_cast<size_t>(a)].at(zero).real();
  for (int q = 1; q <= s.tr.q_max; ++q) {
    ModeIndex m;
    m.dh = s.tr.dh();
    m.q = q;
    c.max_vd_mean_abs = std::max(c.max_vd_mean_abs, std::abs(s.vd.at(m)));
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  nlohmann::json j;
  j["format"] = "stratflow-checkpoint-v1";
  j["state"] = nlohmann::json::parse(state_to_json(c.state));
  j["integration"] = {{"t", c.state.t}, {"dt_history", c.dt_history}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(1);
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint c;
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "stratflow-checkpoint-v1")
      throw IoError("unknown checkpoint format");
    c.state = state_from_json(j.at("state").dump());
    c.dt_history = j.at("integration").at("dt_history").get<std::vector<double>>();
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError("invalid checkpoint " + path + ": " + e.what());
  }
  return c;
}

}  // namespace stratflow
