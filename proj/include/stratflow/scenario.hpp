#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stratflow/diagnostics.hpp"

namespace stratflow {

// Scenario library.
//   linear_decay        exact linear flow on random smooth data
//   linear_sharpness    exact linear flow on the borderline-regularity data
//   conservation        nonlinear run checking the mean/average laws
//   nonlinear_smalldata nonlinear run with the energy-bound witness
//   sigma_convergence   nonlinear run focused on the asymptotic profile
struct ScenarioConfig {
  std::string scenario = "linear_decay";
  std::string label;  // output basename; defaults to the scenario name
  int d = 2;
  int alpha = 0;
  int m = 4;
  int nh_max = 32;
  int q_max = 64;
  double t_final = 200.0;
  double dt = 0.0;  // 0: pick from accuracy/CFL
  double cfl = 0.5;
  int samples = 64;
  double eps = 0.1;     // spectral-tail exponent offset of the sharpness data
  double delta = 1e-3;  // H^m size of nonlinear initial data
  double tail_tol = 1e-8;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = ".";
  std::string init;  // "" (scenario default) or "snapshot:<path>"
  double fit_lo = -1.0, fit_hi = -1.0;        // default window [T/10, T]
  double fit_top_lo = -1.0, fit_top_hi = -1.0;  // s = m window, default [0.4, 4]
  bool emit_plots = true;

  void validate() const;
  Truncation truncation() const;
};

ScenarioConfig default_config(const std::string& scenario);
ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig parse_config_file(const std::string& path);
std::string config_echo_json(const ScenarioConfig& cfg);

// Borderline-regularity initial data: v_0 = 0 and
// F_b theta_0(eta) = |q|^{-(m + 1/2 + eps)} on D3 with |n| = 1, symmetrized
// over +-n, zero elsewhere. Needs at least 32 such modes in the truncation.
FlowState sharpness_data(int m, double eps, int alpha, const Truncation& tr);

// Smooth random data with Gaussian spectral envelope, projected
// divergence-free; `mean_offsets` adds nonzero int theta / int v_h content.
FlowState random_smooth_state(const Truncation& tr, int alpha, std::uint64_t seed,
                              double amplitude, bool mean_offsets);

// Nonlinear small-data generator: the heavy-tail theta column plus a small
// random smooth velocity and a nontrivial horizontal-mean theta profile,
// scaled so that E_m = delta.
FlowState smalldata_state(const ScenarioConfig& cfg, const Truncation& tr);

struct ScenarioResult {
  int exit_code = 0;  // 0 ok, 2 config, 3 instability, 4 io
  std::string message;
  RunRecord record;
  FlowState final_state;
  std::vector<double> dt_history;  // nonlinear runs only
  SigmaProfile sigma;
  double initial_energy_m = 0.0;
  double dissipation_integral = 0.0;  // run-accumulated witness integral
  double max_step_dtheta_int = 0.0;   // max per-step |d int theta| (relative)
  double max_step_dvh_int = 0.0;      // max per-step |d int v_h| (alpha = 1)
  double max_div_rel = 0.0;           // max relative divergence after steps
  double max_vd_mean = 0.0;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

// CSV + JSON (+ SVG when enabled) under cfg.out_dir; returns written paths.
std::vector<std::string> emit_report(const RunRecord& rec, const ScenarioConfig& cfg);

std::string render_decay_svg(const RunRecord& rec, const ScenarioConfig& cfg);

}  // namespace stratflow
