#include "stratflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace stratflow {

namespace {

const char* kScenarios[] = {"linear_decay", "linear_sharpness", "conservation",
                            "nonlinear_smalldata", "sigma_convergence"};

bool known_scenario(const std::string& name) {
  for (const char* s : kScenarios)
    if (name == s) return true;
  return false;
}

bool is_linear(const std::string& name) {
  return name == "linear_decay" || name == "linear_sharpness";
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!known_scenario(scenario)) throw ConfigError("unknown scenario: " + scenario);
  if (d != 2 && d != 3) throw ConfigError("d must be 2 or 3");
  if (alpha != 0 && alpha != 1) throw ConfigError("alpha must be 0 or 1");
  const double m_min = (alpha == 1 ? 3.0 : 2.0) + 0.5 * d;
  if (!(m > m_min))
    throw ConfigError("m must exceed " + format_double(m_min) + " for alpha=" +
                      std::to_string(alpha) + ", d=" + std::to_string(d));
  if (t_final <= 0.0) throw ConfigError("t_final must be positive");
  if (samples < 9) throw ConfigError("need at least 9 samples");
  if (eps <= 0.0) throw ConfigError("eps must be positive");
  if (delta <= 0.0) throw ConfigError("delta must be positive");
  if (nh_max < 1 || q_max < 4) throw ConfigError("truncation too small");
}

Truncation ScenarioConfig::truncation() const { return Truncation::make(d, nh_max, q_max); }

ScenarioConfig default_config(const std::string& scenario) {
  ScenarioConfig cfg;
  cfg.scenario = scenario;
  if (!known_scenario(scenario)) return cfg;  // validate() reports later
  if (is_linear(scenario)) {
    cfg.nh_max = 32;
    cfg.q_max = 64;
    cfg.t_final = 200.0;
    cfg.m = 4;
  } else {
    cfg.nh_max = 16;
    cfg.q_max = 24;
    cfg.t_final = scenario == "conservation" ? 5.0 : 20.0;
    cfg.samples = 48;
    cfg.m = 4;
  }
  return cfg;
}

ScenarioConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = val;
  }
  if (!kv.count("scenario")) throw ConfigError("config must set `scenario`");
  ScenarioConfig cfg = default_config(kv.at("scenario"));
  auto geti = [&](const std::string& k, int& dst) {
    if (kv.count(k)) dst = std::stoi(kv.at(k));
  };
  auto getd = [&](const std::string& k, double& dst) {
    if (kv.count(k)) dst = std::stod(kv.at(k));
  };
  auto gets = [&](const std::string& k, std::string& dst) {
    if (kv.count(k)) dst = kv.at(k);
  };
  geti("d", cfg.d);
  geti("alpha", cfg.alpha);
  geti("m", cfg.m);
  geti("nh_max", cfg.nh_max);
  geti("q_max", cfg.q_max);
  geti("samples", cfg.samples);
  geti("threads", cfg.threads);
  getd("t_final", cfg.t_final);
  getd("dt", cfg.dt);
  getd("cfl", cfg.cfl);
  getd("eps", cfg.eps);
  getd("delta", cfg.delta);
  getd("tail_tol", cfg.tail_tol);
  getd("fit_lo", cfg.fit_lo);
  getd("fit_hi", cfg.fit_hi);
  getd("fit_top_lo", cfg.fit_top_lo);
  getd("fit_top_hi", cfg.fit_top_hi);
  gets("init", cfg.init);
  gets("label", cfg.label);
  gets("out_dir", cfg.out_dir);
  if (kv.count("seed")) cfg.seed = std::stoull(kv.at("seed"));
  if (kv.count("emit_plots")) cfg.emit_plots = kv.at("emit_plots") != "0";
  static const char* known[] = {"scenario",   "d",       "alpha",    "m",        "nh_max",
                                "q_max",      "samples", "threads",  "t_final",  "dt",
                                "cfl",        "eps",     "delta",    "tail_tol", "fit_lo",
                                "fit_hi",     "fit_top_lo", "fit_top_hi", "init", "label",
                                "out_dir",    "seed",    "emit_plots"};
  for (const auto& [k, v] : kv) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError("unknown config key: " + k);
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string config_echo_json(const ScenarioConfig& cfg) {
  const Truncation tr = cfg.truncation();
  nlohmann::json j;
  j["scenario"] = cfg.scenario;
  j["label"] = cfg.label.empty() ? cfg.scenario : cfg.label;
  j["d"] = cfg.d;
  j["alpha"] = cfg.alpha;
  j["m"] = cfg.m;
  j["nh_max"] = cfg.nh_max;
  j["q_max"] = cfg.q_max;
  j["t_final"] = cfg.t_final;
  j["dt"] = cfg.dt;
  j["cfl"] = cfg.cfl;
  j["samples"] = cfg.samples;
  j["eps"] = cfg.eps;
  j["delta"] = cfg.delta;
  j["tail_tol"] = cfg.tail_tol;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["init"] = cfg.init;
  j["fit_window"] = {cfg.fit_lo, cfg.fit_hi};
  j["fit_window_top_norm"] = {cfg.fit_top_lo, cfg.fit_top_hi};
  j["grid"] = {{"horizontal", {tr.mh[0], tr.mh[1]}},
               {"vertical", tr.mv},
               {"vertical_nodes", "midpoint x_d = -1 + 2(j+1/2)/mv, endpoints excluded"},
               {"dealiasing", "3/2-rule padding in every axis"}};
  j["normalization"] =
      "coefficients against the raw profiles (c_0 = 1); q = 0 cosine modes carry measure 2";
  j["tolerances"] = {{"divergence_rel", 1e-10},
                     {"vd_mean_abs", 1e-13},
                     {"reality_abs", 1e-12},
                     {"ingest_residual_rel", 1e-8},
                     {"tail_tol", cfg.tail_tol}};
  return j.dump(1);
}

FlowState sharpness_data(int m, double eps, int alpha, const Truncation& tr) {
  if (eps <= 0.0) throw ConfigError("sharpness data needs eps > 0");
  FlowState s = FlowState::zero(tr, alpha);
  long included = 0;
  for_each_mode(tr, Basis::B, [&](long i, const ModeIndex& mode) {
    long n1 = 0;
    for (int a = 0; a < tr.dh(); ++a) n1 += std::abs(mode.n[static_cast<size_t>(a)]);
    int nmax = 0;
    for (int a = 0; a < tr.dh(); ++a)
      nmax = std::max(nmax, std::abs(mode.n[static_cast<size_t>(a)]));
    if (n1 != 1 || nmax != 1) return;  // |n| = 1 in the integer lattice
    if (classify_region(mode, alpha) != Region::D3) return;
    s.theta.coef[static_cast<size_t>(i)] =
        Complex(std::pow(static_cast<double>(mode.q), -(m + 0.5 + eps)), 0.0);
    ++included;
  });
  if (included < 32)
    throw ConfigError("truncation holds only " + std::to_string(included) +
                      " modes in D3 with |n| = 1; need at least 32");
  return s;
}

FlowState random_smooth_state(const Truncation& tr, int alpha, std::uint64_t seed,
                              double amplitude, bool mean_offsets) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double q0 = tr.q_max / 8.0;
  const double n0 = std::max(1.0, tr.nh_max / 8.0);
  auto envelope = [&](const ModeIndex& m) {
    double r = (m.q / q0) * (m.q / q0);
    for (int a = 0; a < tr.dh(); ++a) {
      const double na = m.n[static_cast<size_t>(a)] / n0;
      r += na * na;
    }
    return std::exp(-r);
  };
  FlowState s = FlowState::zero(tr, alpha);
  auto fill = [&](SpectralField& f) {
    for_each_mode(tr, f.tag, [&](long i, const ModeIndex& m) {
      f.coef[static_cast<size_t>(i)] =
          amplitude * envelope(m) * Complex(gauss(rng), gauss(rng));
    });
    f.enforce_reality();
  };
  for (auto& f : s.vh) fill(f);
  fill(s.vd);
  fill(s.theta);
  leray_project(s.vh, s.vd);
  if (mean_offsets) {
    ModeIndex zero;
    zero.dh = tr.dh();
    for (auto& f : s.vh) f.at(zero) += Complex(0.5 * amplitude, 0.0);
    ModeIndex q1 = zero;
    q1.q = 1;
    s.theta.at(q1) += Complex(0.7 * amplitude, 0.0);  // nonzero int theta
  }
  return s;
}

FlowState smalldata_state(const ScenarioConfig& cfg, const Truncation& tr) {
  FlowState s = sharpness_data(cfg.m, cfg.eps, cfg.alpha, tr);
  const FlowState vpart = random_smooth_state(tr, cfg.alpha, cfg.seed, 1.0, false);
  const double theta_scale = sobolev_norm(s.theta, NormSpec::sobolev(cfg.m));
  const double v_scale = std::max(energy_E(vpart, cfg.m), 1e-300);
  for (int a = 0; a < tr.dh(); ++a) {
    SpectralField f = vpart.vh[static_cast<size_t>(a)];
    f *= 0.2 * theta_scale / v_scale;
    s.vh[static_cast<size_t>(a)] += f;
  }
  {
    SpectralField f = vpart.vd;
    f *= 0.2 * theta_scale / v_scale;
    s.vd += f;
  }
  // Non-decaying horizontal-mean content so sigma is exercised.
  for (int q = 1; q <= std::min(6, tr.q_max); ++q) {
    ModeIndex m0;
    m0.dh = tr.dh();
    m0.q = q;
    s.theta.at(m0) += Complex(0.3 * theta_scale * std::exp(-0.5 * q * q), 0.0);
  }
  const double total = energy_E(s, cfg.m);
  const double scale = cfg.delta / total;
  for (auto& f : s.vh) f *= scale;
  s.vd *= scale;
  s.theta *= scale;
  return s;
}

namespace {

std::vector<double> sample_times(double t_final, int samples) {
  std::vector<double> t(static_cast<size_t>(samples));
  for (int i = 0; i < samples; ++i)
    t[static_cast<size_t>(i)] = std::pow(1.0 + t_final, static_cast<double>(i) / (samples - 1)) - 1.0;
  t.front() = 0.0;
  t.back() = t_final;
  return t;
}

struct Columns {
  std::vector<std::string> names;
  std::vector<double> s_list;
  int dh = 1;
  bool with_sigma = false;
  bool with_grid_linf = false;

  static Columns build(const ScenarioConfig& cfg) {
    Columns c;
    c.dh = cfg.d - 1;
    c.s_list = {0.0, 1.0, 2.0, static_cast<double>(cfg.m)};
    c.with_sigma = !is_linear(cfg.scenario);
    c.with_grid_linf = !is_linear(cfg.scenario);
    auto sname = [](double s) {
      std::ostringstream os;
      os << s;
      return os.str();
    };
    c.names = {"E_m", "E_1", "A_1", "A_m"};
    for (double s : c.s_list) c.names.push_back("theta_bar_hs" + sname(s));
    for (double s : c.s_list) c.names.push_back("vd_hs" + sname(s));
    c.names.push_back("v_l2");
    c.names.push_back("v_lameps");  // ||Lambda^{-eps} v-bar||_L2 diagnostic
    c.names.push_back("int_theta");
    for (int a = 0; a < c.dh; ++a) c.names.push_back("int_vh" + std::to_string(a));
    c.names.insert(c.names.end(), {"vd_mean_max", "div_rel", "grad_v_linf_l1", "dd_vd_linf_l1"});
    if (c.with_grid_linf)
      c.names.insert(c.names.end(), {"grad_v_linf_grid", "dd_vd_linf_grid"});
    c.names.insert(c.names.end(), {"k1", "k2", "diss_v", "diss_theta", "B_m"});
    if (c.with_sigma) c.names.push_back("theta_minus_sigma");
    return c;
  }

  std::vector<double> sample(const FlowState& st, const ScenarioConfig& cfg,
                             const SpectralOps& ops, const RunRecord& rec) const {
    std::vector<double> row;
    row.reserve(names.size());
    row.push_back(energy_E(st, cfg.m));
    row.push_back(energy_E(st, 1.0));
    row.push_back(cross_A(st, 1));
    row.push_back(cross_A(st, cfg.m));
    const SpectralField tb = project_mean_free(st.theta);
    for (double s : s_list) row.push_back(sobolev_norm(tb, NormSpec::sobolev(s, true)));
    for (double s : s_list) row.push_back(sobolev_norm(st.vd, NormSpec::sobolev(s, true)));
    double v2 = sobolev_norm(st.vd, NormSpec::l2());
    v2 *= v2;
    for (const auto& f : st.vh) {
      const double n = sobolev_norm(f, NormSpec::l2());
      v2 += n * n;
    }
    row.push_back(std::sqrt(v2));
    NormSpec lameps = NormSpec::l2();
    lameps.lambda_power = -0.1;
    lameps.restrict_to_nonzero_n = true;
    double ve2 = sobolev_norm(st.vd, lameps);
    ve2 *= ve2;
    for (const auto& f : st.vh) {
      const double n = sobolev_norm(f, lameps);
      ve2 += n * n;
    }
    row.push_back(std::sqrt(ve2));
    const Conserved cons = conserved_quantities(st);
    row.push_back(cons.integral_theta);
    for (int a = 0; a < dh; ++a) row.push_back(cons.integral_vh[static_cast<size_t>(a)]);
    row.push_back(cons.max_vd_mean_abs);
    const ValidationReport rep = validate_state(st);
    row.push_back(rep.find("divergence_free")->violation);
    row.push_back(grad_v_linf_l1(st));
    row.push_back(dd_vd_linf_l1(st));
    if (with_grid_linf) {
      row.push_back(grad_v_linf_grid(st, ops));
      row.push_back(dd_vd_linf_grid(st, ops));
    }
    row.push_back(rec.k1);
    row.push_back(rec.k2);
    // Dissipation integrands of the global energy bound.
    NormSpec dv = NormSpec::sobolev(cfg.m);
    dv.lambda_power = cfg.alpha;
    double dnorm = sobolev_norm(st.vd, dv);
    double diss_v = dnorm * dnorm;
    for (const auto& f : st.vh) {
      const double n = sobolev_norm(f, dv);
      diss_v += n * n;
    }
    row.push_back(diss_v);
    NormSpec dth = NormSpec::sobolev(cfg.m - 1 - cfg.alpha);
    dth.riesz_power = 1;
    dth.lambda_power = 1.0;
    const double tnorm = sobolev_norm(st.theta, dth);
    row.push_back(tnorm * tnorm);
    row.push_back(0.0);  // B_m, filled by the run loop
    if (with_sigma) row.push_back(0.0);  // filled after sigma is known
    return row;
  }
};

FlowState initial_state(const ScenarioConfig& cfg, const Truncation& tr) {
  if (!cfg.init.empty()) {
    if (cfg.init.rfind("snapshot:", 0) == 0) {
      FlowState s = load_state(cfg.init.substr(9));
      if (s.tr != tr || s.alpha != cfg.alpha)
        throw ConfigError("snapshot does not match the configured truncation/alpha");
      return s;
    }
    throw ConfigError("unknown init descriptor: " + cfg.init);
  }
  if (cfg.scenario == "linear_sharpness") return sharpness_data(cfg.m, cfg.eps, cfg.alpha, tr);
  if (cfg.scenario == "linear_decay")
    return random_smooth_state(tr, cfg.alpha, cfg.seed, 1.0, false);
  if (cfg.scenario == "conservation")
    return random_smooth_state(tr, cfg.alpha, cfg.seed, 0.02, true);
  return smalldata_state(cfg, tr);
}

void attach_fits(RunRecord& rec, const ScenarioConfig& cfg) {
  const double T = cfg.t_final;
  const double lo = cfg.fit_lo >= 0.0 ? cfg.fit_lo : T / 10.0;
  const double hi = cfg.fit_hi >= 0.0 ? cfg.fit_hi : T;
  auto try_fit = [&](const std::string& col, double a, double b) {
    try {
      rec.fits.push_back(fit_decay_exponent(rec.times, rec.column(col), a, b, col));
    } catch (const DomainError&) {
      // nonpositive or sparse series carry no usable slope
    }
  };
  std::ostringstream sm;
  sm << static_cast<double>(cfg.m);
  // The top norm's plateau lasts only until the retained spectrum starts to
  // e-fold, so it gets an early window of its own.
  const double top_lo = cfg.fit_top_lo >= 0.0 ? cfg.fit_top_lo : std::min(0.4, T / 10.0);
  const double top_hi = cfg.fit_top_hi >= 0.0 ? cfg.fit_top_hi : std::min(4.0, T);
  for (const char* base : {"theta_bar_hs", "vd_hs"}) {
    for (const char* s : {"0", "1", "2"}) try_fit(std::string(base) + s, lo, hi);
    try_fit(std::string(base) + sm.str(), top_lo, top_hi);
  }
  try_fit("v_l2", lo, hi);
  try_fit("v_lameps", lo, hi);
  if (rec.column_index("theta_minus_sigma") >= 0) try_fit("theta_minus_sigma", lo, hi);
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const Truncation tr = cfg.truncation();
  SpectralOps ops(tr, cfg.threads);
  const EigenTable table = EigenTable::build(tr, cfg.alpha);
  const Columns cols = Columns::build(cfg);

  ScenarioResult res;
  res.record.set_columns(cols.names);

  FlowState state = initial_state(cfg, tr);
  res.initial_energy_m = energy_E(state, cfg.m);
  const std::vector<double> times = sample_times(cfg.t_final, cfg.samples);

  const std::vector<Complex> theta0_mean = mean_profile(state.theta);
  std::vector<std::vector<Complex>> flux_history;
  std::vector<std::vector<Complex>> theta_profiles;

  const long jbm = res.record.column_index("B_m");
  double sup_em2 = 0.0;
  if (is_linear(cfg.scenario)) {
    const FlowState s0 = state;
    double prev_diss = -1.0;
    for (size_t i = 0; i < times.size(); ++i) {
      const FlowState st = propagate_linear(s0, times[i], table, cfg.threads);
      if (i > 0) res.record.k1 += (times[i] - times[i - 1]) * grad_v_linf_l1(st);
      if (i > 0) res.record.k2 += (times[i] - times[i - 1]) * dd_vd_linf_l1(st);
      std::vector<double> row = cols.sample(st, cfg, ops, res.record);
      const double em = row[0];
      sup_em2 = std::max(sup_em2, em * em);
      const long jdv = res.record.column_index("diss_v");
      const double diss = row[static_cast<size_t>(jdv)] + row[static_cast<size_t>(jdv) + 1];
      if (prev_diss >= 0.0)
        res.dissipation_integral += 0.5 * (times[i] - times[i - 1]) * (prev_diss + diss);
      prev_diss = diss;
      row[static_cast<size_t>(jbm)] = std::sqrt(sup_em2 + res.dissipation_integral);
      res.record.add_row(times[i], std::move(row));
      flux_history.emplace_back(theta0_mean.size(), Complex(0.0, 0.0));
      theta_profiles.push_back(mean_profile(st.theta));
      if (i + 1 == times.size()) res.final_state = st;
    }
  } else {
    const double dt_target = cfg.dt > 0.0 ? cfg.dt
                                          : std::min(0.02, 0.8 * cfl_max_dt(state, cfg.cfl));
    StepOptions sopt;
    sopt.cfl_c = cfg.cfl;
    const double int_theta0 = conserved_quantities(state).integral_theta;
    const double drift_scale = std::max(std::abs(int_theta0), res.initial_energy_m);
    double prev_diss = -1.0;

    auto record_sample = [&](const FlowState& st) {
      std::vector<double> row = cols.sample(st, cfg, ops, res.record);
      sup_em2 = std::max(sup_em2, row[0] * row[0]);
      row[static_cast<size_t>(jbm)] = std::sqrt(sup_em2 + res.dissipation_integral);
      res.record.add_row(st.t, std::move(row));
      const Tendency td = nonlinear_rhs(st, ops);
      SpectralField flux = td.nonlinear.dtheta;  // -(v.grad)theta
      flux *= -1.0;
      flux_history.push_back(mean_profile(flux));
      theta_profiles.push_back(mean_profile(st.theta));
    };

    record_sample(state);
    bool unstable = false;
    for (size_t i = 1; i < times.size() && !unstable; ++i) {
      const double span = times[i] - times[i - 1];
      const int nsub = std::max(1, static_cast<int>(std::ceil(span / dt_target)));
      const double h = span / nsub;
      for (int k = 0; k < nsub; ++k) {
        const Conserved before = conserved_quantities(state);
        FlowState next;
        try {
          next = step(state, h, ops, table, sopt);
        } catch (const StepSizeError& e) {
          unstable = true;
          res.message = std::string("step failure: ") + e.what();
          break;
        }
        const Conserved after = conserved_quantities(next);
        res.max_step_dtheta_int =
            std::max(res.max_step_dtheta_int,
                     std::abs(after.integral_theta - before.integral_theta) / drift_scale);
        if (cfg.alpha == 1) {
          for (int a = 0; a < tr.dh(); ++a)
            res.max_step_dvh_int = std::max(
                res.max_step_dvh_int, std::abs(after.integral_vh[static_cast<size_t>(a)] -
                                               before.integral_vh[static_cast<size_t>(a)]));
        }
        res.dt_history.push_back(h);
        key_quantities_step(next, h, res.record);
        const ValidationReport rep = validate_state(next);
        res.max_div_rel = std::max(res.max_div_rel, rep.find("divergence_free")->violation);
        res.max_vd_mean = std::max(res.max_vd_mean, after.max_vd_mean_abs);
        NormSpec dv = NormSpec::sobolev(cfg.m);
        dv.lambda_power = cfg.alpha;
        double dnorm = sobolev_norm(next.vd, dv);
        double diss = dnorm * dnorm;
        for (const auto& f : next.vh) {
          const double n = sobolev_norm(f, dv);
          diss += n * n;
        }
        NormSpec dth = NormSpec::sobolev(cfg.m - 1 - cfg.alpha);
        dth.riesz_power = 1;
        dth.lambda_power = 1.0;
        const double tnorm = sobolev_norm(next.theta, dth);
        diss += tnorm * tnorm;
        if (prev_diss < 0.0) prev_diss = diss;
        res.dissipation_integral += 0.5 * h * (prev_diss + diss);
        prev_diss = diss;
        state = std::move(next);
        if (energy_E(state, cfg.m) > 10.0 * std::max(res.initial_energy_m, 1e-300)) {
          unstable = true;
          break;
        }
      }
      if (state.t > res.record.times.back()) record_sample(state);
    }
    res.final_state = state;
    if (unstable) {
      res.exit_code = 3;
      if (res.message.empty())
        res.message = "instability: E_m exceeded 10x its initial value at t = " +
                      format_double(state.t);
    }
  }

  res.sigma = sigma_profile(res.record.times, flux_history, theta0_mean, cfg.tail_tol);
  if (cols.with_sigma && !res.sigma.coef_q.empty()) {
    const long j = res.record.column_index("theta_minus_sigma");
    for (size_t i = 0; i < res.record.rows.size(); ++i) {
      double sum = 0.0;
      for (size_t q = 0; q < res.sigma.coef_q.size(); ++q)
        sum += std::norm(theta_profiles[i][q] - res.sigma.coef_q[q]);
      // the mean-free part decays on its own; theta - sigma adds it back
      double bar2 = 0.0;
      const long jb = res.record.column_index("theta_bar_hs0");
      bar2 = res.record.rows[i][static_cast<size_t>(jb)];
      res.record.rows[i][static_cast<size_t>(j)] = std::sqrt(sum + bar2 * bar2);
    }
  }
  attach_fits(res.record, cfg);
  return res;
}

namespace {

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_decay_svg(const RunRecord& rec, const ScenarioConfig& cfg) {
  const int W = 860, H = 580, ml = 70, mr = 220, mt = 40, mb = 55;
  struct Series {
    std::string name;
    const char* color;
  };
  std::vector<Series> series = {{"theta_bar_hs0", "#1f77b4"},
                                {"vd_hs0", "#d62728"},
                                {"v_l2", "#2ca02c"},
                                {"theta_minus_sigma", "#9467bd"}};
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> data;
  for (const auto& s : series) {
    if (rec.column_index(s.name) < 0) continue;
    std::vector<std::pair<double, double>> pts;
    const std::vector<double> col = rec.column(s.name);
    for (size_t i = 0; i < rec.times.size(); ++i) {
      if (!(col[i] > 0.0)) continue;
      const double x = std::log10(1.0 + rec.times[i]);
      const double y = std::log10(col[i]);
      pts.emplace_back(x, y);
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    if (!pts.empty()) data.emplace_back(s.name, std::move(pts));
  }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"monospace\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (data.empty() || xmax <= xmin || ymax <= ymin) {
    os << "<text x=\"20\" y=\"30\">no positive series to plot</text>\n</svg>\n";
    return os.str();
  }
  ymin -= 0.3;
  ymax += 0.3;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << (W - ml - mr) << "\" height=\""
     << (H - mt - mb) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int gx = static_cast<int>(std::ceil(xmin)); gx <= std::floor(xmax); ++gx) {
    os << "<line x1=\"" << px(gx) << "\" y1=\"" << py(ymin) << "\" x2=\"" << px(gx) << "\" y2=\""
       << py(ymax) << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << px(gx) - 12 << "\" y=\"" << H - mb + 18 << "\">1e" << gx << "</text>\n";
  }
  for (int gy = static_cast<int>(std::ceil(ymin)); gy <= std::floor(ymax); ++gy) {
    os << "<line x1=\"" << px(xmin) << "\" y1=\"" << py(gy) << "\" x2=\"" << px(xmax)
       << "\" y2=\"" << py(gy) << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << 8 << "\" y=\"" << py(gy) + 4 << "\">1e" << gy << "</text>\n";
  }
  os << "<text x=\"" << (ml + (W - ml - mr) / 2 - 30) << "\" y=\"" << H - 12
     << "\">1 + t (log)</text>\n";
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  int ci = 0, legend_y = mt + 10;
  for (const auto& [name, pts] : data) {
    const char* color = colors[ci++ % 4];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (const auto& [x, y] : pts) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << W - mr + 10 << "\" y=\"" << legend_y << "\" fill=\"" << color << "\">"
       << svg_escape(name) << "</text>\n";
    legend_y += 16;
    for (const auto& f : rec.fits) {
      if (f.name != name) continue;
      const double x0 = std::log10(1.0 + std::max(f.t_lo, 1e-12));
      const double x1 = std::log10(1.0 + f.t_hi);
      // anchor the fitted line at the series value nearest the window start
      double y0 = 0.0;
      double best = 1e300;
      for (const auto& [x, y] : pts) {
        if (std::abs(x - x0) < best) {
          best = std::abs(x - x0);
          y0 = y;
        }
      }
      os << "<line x1=\"" << px(x0) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(x1) << "\" y2=\""
         << py(y0 + f.slope * (x1 - x0)) << "\" stroke=\"" << color
         << "\" stroke-dasharray=\"6,4\"/>\n";
      std::ostringstream lbl;
      lbl.precision(3);
      lbl << "slope " << f.slope;
      os << "<text x=\"" << W - mr + 10 << "\" y=\"" << legend_y << "\" fill=\"" << color << "\">"
         << lbl.str() << "</text>\n";
      legend_y += 16;
    }
  }
  // reference slopes of the linear theory
  const double p_theta = -(cfg.m - 0.0) / (2.0 * (1.0 + cfg.alpha));
  const double p_vd = p_theta - 1.0;
  for (double p : {p_theta, p_vd}) {
    const double x0 = xmin + 0.55 * (xmax - xmin), x1 = xmax;
    const double y0 = ymin + 0.82 * (ymax - ymin);
    os << "<line x1=\"" << px(x0) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(x1) << "\" y2=\""
       << py(y0 + p * (x1 - x0)) << "\" stroke=\"#888888\" stroke-dasharray=\"2,3\"/>\n";
    std::ostringstream lbl;
    lbl.precision(3);
    lbl << "ref " << p;
    os << "<text x=\"" << px(x1) - 52 << "\" y=\"" << py(y0 + p * (x1 - x0)) - 4
       << "\" fill=\"#888888\">" << lbl.str() << "</text>\n";
  }
  os << "<text x=\"" << ml << "\" y=\"" << mt - 14 << "\">" << svg_escape(cfg.scenario)
     << "  (alpha=" << cfg.alpha << ", m=" << cfg.m << ")</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::vector<std::string> emit_report(const RunRecord& rec, const ScenarioConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir);
  const std::string base = cfg.out_dir + "/" + (cfg.label.empty() ? cfg.scenario : cfg.label);
  std::vector<std::string> written;
  auto write = [&](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + path);
    written.push_back(path);
  };
  write(base + ".csv", record_csv(rec));
  write(base + ".json", record_json(rec, config_echo_json(cfg)));
  if (cfg.emit_plots) write(base + ".svg", render_decay_svg(rec, cfg));
  return written;
}

}  // namespace stratflow
