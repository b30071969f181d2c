#include "stratflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace stratflow {

double energy_E(const FlowState& s, double k) {
  if (k < 0.0) throw DomainError("energy order must be nonnegative");
  const NormSpec spec = NormSpec::sobolev(k);
  double sum = 0.0;
  for (const auto& f : s.vh) {
    const double n = sobolev_norm(f, spec);
    sum += n * n;
  }
  const double nd = sobolev_norm(s.vd, spec);
  const double nt = sobolev_norm(s.theta, spec);
  return std::sqrt(sum + nd * nd + nt * nt);
}

namespace {

// Complete homogeneous sums H_j(vars) for j = 0..k: the distinct-multi-index
// weight sum_{|gamma|=j} prod symbol^{2 gamma}.
void complete_homogeneous(const std::vector<double>& vars, int k, std::vector<double>& h) {
  h.assign(static_cast<size_t>(k) + 1, 0.0);
  h[0] = 1.0;
  for (double v : vars) {
    for (int j = 1; j <= k; ++j) h[static_cast<size_t>(j)] += v * h[static_cast<size_t>(j) - 1];
  }
}

}  // namespace

double cross_A(const FlowState& s, int k) {
  if (k < 1) throw DomainError("cross_A needs k >= 1");
  double acc = 0.0;
  std::vector<double> vars(static_cast<size_t>(s.tr.d));
  std::vector<double> h;
  for_each_mode(s.tr, Basis::B, [&](long i, const ModeIndex& m) {
    for (int a = 0; a < s.tr.dh(); ++a)
      vars[static_cast<size_t>(a)] = m.n_tilde(a) * m.n_tilde(a);
    vars[static_cast<size_t>(s.tr.dh())] = m.q_tilde() * m.q_tilde();
    complete_homogeneous(vars, k, h);
    double w = 0.0;
    for (int j = 1; j <= k; ++j) w += h[static_cast<size_t>(j)];
    const Complex vd = s.vd.coef[static_cast<size_t>(i)];
    const Complex th = s.theta.coef[static_cast<size_t>(i)];
    acc += w * (vd * std::conj(th)).real();
  });
  return acc;
}

double grad_v_linf_l1(const FlowState& s) {
  double sum = 0.0;
  for_each_mode(s.tr, Basis::C, [&](long i, const ModeIndex& m) {
    double mag2 = 0.0;
    for (int a = 0; a < s.tr.dh(); ++a)
      mag2 += std::norm(s.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(i)]);
    sum += m.eta() * std::sqrt(mag2);
  });
  for_each_mode(s.tr, Basis::B, [&](long i, const ModeIndex& m) {
    sum += m.eta_sq() * std::abs(s.vd.coef[static_cast<size_t>(i)]);
  });
  return sum;
}

double dd_vd_linf_l1(const FlowState& s) {
  double sum = 0.0;
  for_each_mode(s.tr, Basis::B, [&](long i, const ModeIndex& m) {
    sum += m.q_tilde() * std::abs(s.vd.coef[static_cast<size_t>(i)]);
  });
  return sum;
}

double grad_v_linf_grid(const FlowState& s, const SpectralOps& ops) {
  const long g = s.tr.grid_count();
  std::vector<double> sq(static_cast<size_t>(g), 0.0);
  auto add = [&](const SpectralField& f) {
    for (int axis = 0; axis < s.tr.d; ++axis) {
      const GridField d = ops.inverse(ops.derivative(f, axis));
      for (long i = 0; i < g; ++i) sq[static_cast<size_t>(i)] += d[static_cast<size_t>(i)] * d[static_cast<size_t>(i)];
    }
  };
  for (const auto& f : s.vh) add(f);
  add(s.vd);
  double worst = 0.0;
  for (double v : sq) worst = std::max(worst, v);
  return std::sqrt(worst);
}

double dd_vd_linf_grid(const FlowState& s, const SpectralOps& ops) {
  const GridField d = ops.inverse(ops.derivative(s.vd, s.tr.d - 1));
  double worst = 0.0;
  for (double v : d) worst = std::max(worst, std::abs(v));
  return worst;
}

FitResult fit_decay_exponent(const std::vector<double>& t, const std::vector<double>& y,
                             double t_lo, double t_hi, const std::string& name) {
  if (t.size() != y.size()) throw DimensionError("fit series length mismatch");
  std::vector<double> xs, ys;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    if (!(y[i] > 0.0)) throw DomainError("fit_decay_exponent needs positive samples");
    xs.push_back(std::log1p(t[i]));
    ys.push_back(std::log(y[i]));
  }
  const long n = static_cast<long>(xs.size());
  if (n < 8) throw DomainError("fit_decay_exponent needs at least 8 samples in the window");
  double mx = 0.0, my = 0.0;
  for (long i = 0; i < n; ++i) {
    mx += xs[static_cast<size_t>(i)];
    my += ys[static_cast<size_t>(i)];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (long i = 0; i < n; ++i) {
    const double dx = xs[static_cast<size_t>(i)] - mx;
    sxx += dx * dx;
    sxy += dx * (ys[static_cast<size_t>(i)] - my);
  }
  FitResult res;
  res.name = name;
  res.slope = sxy / sxx;
  res.t_lo = t_lo;
  res.t_hi = t_hi;
  res.npoints = n;
  double ss = 0.0;
  for (long i = 0; i < n; ++i) {
    const double r = ys[static_cast<size_t>(i)] - my - res.slope * (xs[static_cast<size_t>(i)] - mx);
    ss += r * r;
  }
  res.stderr_ = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
  return res;
}

void RunRecord::add_row(double t, std::vector<double> values) {
  if (values.size() != columns.size()) throw DimensionError("row width does not match columns");
  if (!times.empty() && t <= times.back()) throw DomainError("sample times must increase");
  times.push_back(t);
  rows.push_back(std::move(values));
}

long RunRecord::column_index(const std::string& name) const {
  for (size_t j = 0; j < columns.size(); ++j)
    if (columns[j] == name) return static_cast<long>(j);
  return -1;
}

std::vector<double> RunRecord::column(const std::string& name) const {
  const long j = column_index(name);
  if (j < 0) throw DomainError("no such column: " + name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[static_cast<size_t>(j)]);
  return out;
}

void key_quantities_step(const FlowState& s, double dt, RunRecord& rec) {
  if (dt < 0.0) throw DomainError("dt must be nonnegative");
  rec.k1 += dt * grad_v_linf_l1(s);
  rec.k2 += dt * dd_vd_linf_l1(s);
}

double SigmaProfile::l2_norm() const {
  double sum = 0.0;
  for (const Complex& c : coef_q) sum += std::norm(c);
  return std::sqrt(sum);
}

std::vector<Complex> mean_profile(const SpectralField& f) {
  std::vector<Complex> out(static_cast<size_t>(f.tr.q_max), Complex(0.0, 0.0));
  for (int q = 1; q <= f.tr.q_max; ++q) {
    ModeIndex m;
    m.dh = f.tr.dh();
    m.q = q;
    out[static_cast<size_t>(q - 1)] = f.at(m);
  }
  return out;
}

double profile_distance(const SpectralField& f, const std::vector<Complex>& sigma_q) {
  const std::vector<Complex> own = mean_profile(f);
  if (own.size() != sigma_q.size()) throw DimensionError("profile length mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < own.size(); ++i) sum += std::norm(own[i] - sigma_q[i]);
  return std::sqrt(sum);
}

SigmaProfile sigma_profile(const std::vector<double>& times,
                           const std::vector<std::vector<Complex>>& flux_mean_h,
                           const std::vector<Complex>& theta0_mean_h, double tail_tol) {
  SigmaProfile out;
  if (times.size() != flux_mean_h.size() || times.size() < 3) {
    out.message = "insufficient history";
    return out;
  }
  const size_t nq = theta0_mean_h.size();
  out.coef_q.assign(nq, Complex(0.0, 0.0));
  std::vector<double> flux_norm(times.size(), 0.0);
  for (size_t i = 0; i < times.size(); ++i) {
    if (flux_mean_h[i].size() != nq) throw DimensionError("flux profile length mismatch");
    double s = 0.0;
    for (const Complex& c : flux_mean_h[i]) s += std::norm(c);
    flux_norm[i] = std::sqrt(s);
  }
  std::vector<Complex> integral(nq, Complex(0.0, 0.0));
  for (size_t i = 1; i < times.size(); ++i) {
    const double h = 0.5 * (times[i] - times[i - 1]);
    for (size_t q = 0; q < nq; ++q) integral[q] += h * (flux_mean_h[i - 1][q] + flux_mean_h[i][q]);
  }
  for (size_t q = 0; q < nq; ++q) out.coef_q[q] = theta0_mean_h[q] - integral[q];

  // Tail beyond T: extrapolate with the fitted algebraic decay of the flux
  // norm; without a usable fit fall back to the crude bound ||flux(T)|| * T.
  const double T = times.back();
  double tail = flux_norm.back() * std::max(T, 1.0);
  try {
    const FitResult fit = fit_decay_exponent(times, flux_norm, T / 10.0, T, "flux_tail");
    if (fit.slope < -1.0)
      tail = flux_norm.back() * (1.0 + T) / (-fit.slope - 1.0);
  } catch (const DomainError&) {
    // keep the crude bound (short or nonpositive histories)
  }
  out.tail_error = tail;
  out.ok = tail <= tail_tol;
  if (!out.ok) out.message = "tail error above tolerance";
  return out;
}

std::string record_csv(const RunRecord& rec) {
  std::ostringstream os;
  os << "t";
  for (const auto& c : rec.columns) os << "," << c;
  os << "\n";
  for (size_t i = 0; i < rec.times.size(); ++i) {
    os << format_double(rec.times[i]);
    for (double v : rec.rows[i]) os << "," << format_double(v);
    os << "\n";
  }
  return os.str();
}

std::string record_json(const RunRecord& rec, const std::string& config_echo_json) {
  nlohmann::json j;
  j["format"] = "stratflow-record-v1";
  j["columns"] = rec.columns;
  j["times"] = rec.times;
  j["rows"] = rec.rows;
  j["key_quantities"] = {{"int_grad_v_linf_l1", rec.k1}, {"int_dd_vd_linf_l1", rec.k2}};
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : rec.fits) {
    fits.push_back({{"name", f.name},
                    {"slope", f.slope},
                    {"stderr", f.stderr_},
                    {"window", {f.t_lo, f.t_hi}},
                    {"npoints", f.npoints}});
  }
  j["fits"] = std::move(fits);
  if (!config_echo_json.empty()) j["config"] = nlohmann::json::parse(config_echo_json);
  return j.dump(1);
}

RunRecord record_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("format").get<std::string>() != "stratflow-record-v1")
    throw IoError("unknown record format");
  RunRecord rec;
  rec.columns = j.at("columns").get<std::vector<std::string>>();
  rec.times = j.at("times").get<std::vector<double>>();
  rec.rows = j.at("rows").get<std::vector<std::vector<double>>>();
  rec.k1 = j.at("key_quantities").at("int_grad_v_linf_l1").get<double>();
  rec.k2 = j.at("key_quantities").at("int_dd_vd_linf_l1").get<double>();
  for (const auto& f : j.at("fits")) {
    FitResult fit;
    fit.name = f.at("name").get<std::string>();
    fit.slope = f.at("slope").get<double>();
    fit.stderr_ = f.at("stderr").get<double>();
    fit.t_lo = f.at("window")[0].get<double>();
    fit.t_hi = f.at("window")[1].get<double>();
    fit.npoints = f.at("npoints").get<long>();
    rec.fits.push_back(std::move(fit));
  }
  return rec;
}

}  // namespace stratflow
