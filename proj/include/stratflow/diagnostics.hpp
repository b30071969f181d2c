#pragma once

#include <string>
#include <vector>

#include "stratflow/dynamics.hpp"

namespace stratflow {

// E_k = (||v||_{H^k}^2 + ||theta||_{H^k}^2)^{1/2}, inhomogeneous weights.
double energy_E(const FlowState& s, double k);

// A_k = sum_{1 <= |gamma| <= k} int d^gamma v_d d^gamma theta, evaluated
// spectrally; the multi-index weight is the complete homogeneous sum of the
// squared symbols, so |A_k| <= E_k^2 / 2 holds mode by mode.
double cross_A(const FlowState& s, int k);

// l1 coefficient surrogates for the sup norms tracked by the key-quantity
// accumulators: sum |eta||F_c v_h| + sum |eta|^2 |F_b v_d| bounds
// ||grad v||_inf, and sum q~ |F_b v_d| bounds ||d_d v_d||_inf.
double grad_v_linf_l1(const FlowState& s);
double dd_vd_linf_l1(const FlowState& s);
// Collocation maxima of the same quantities, logged alongside the l1 bounds.
double grad_v_linf_grid(const FlowState& s, const SpectralOps& ops);
double dd_vd_linf_grid(const FlowState& s, const SpectralOps& ops);

struct FitResult {
  std::string name;
  double slope = 0.0;
  double stderr_ = 0.0;
  double t_lo = 0.0, t_hi = 0.0;
  long npoints = 0;
};

// Least-squares slope of log y against log(1+t) over [t_lo, t_hi]; needs at
// least 8 strictly positive samples in the window.
FitResult fit_decay_exponent(const std::vector<double>& t, const std::vector<double>& y,
                             double t_lo, double t_hi, const std::string& name = "fit");

struct RunRecord {
  std::vector<std::string> columns;
  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  double k1 = 0.0;  // int ||grad v||_inf dt          (l1 surrogate)
  double k2 = 0.0;  // int ||d_d v_d||_inf dt         (l1 surrogate)
  std::vector<FitResult> fits;

  void set_columns(std::vector<std::string> names) { columns = std::move(names); }
  void add_row(double t, std::vector<double> values);
  long column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

// Accumulates dt * (l1 surrogate) into the record's running key quantities.
void key_quantities_step(const FlowState& s, double dt, RunRecord& rec);

struct SigmaProfile {
  bool ok = false;
  std::vector<Complex> coef_q;  // B coefficients at n = 0, q = 1..Q
  double tail_error = 0.0;
  std::string message;

  double l2_norm() const;
};

// sigma(x_d) = mean_h theta_0 - int_0^inf mean_h[(v.grad)theta] dt; the mean
// of v_d vanishes identically so only the nonlinear flux contributes. The
// integral is trapezoidal over the stored samples and the algebraic tail is
// estimated from the fitted decay of the flux norm.
SigmaProfile sigma_profile(const std::vector<double>& times,
                           const std::vector<std::vector<Complex>>& flux_mean_h,
                           const std::vector<Complex>& theta0_mean_h, double tail_tol = 1e-8);

// theta mean-profile coefficients (n = 0 row, q = 1..Q) of a B field.
std::vector<Complex> mean_profile(const SpectralField& f);

// ||f(n=0,.) - sigma||_{L^2} for a B field against a profile.
double profile_distance(const SpectralField& f, const std::vector<Complex>& sigma_q);

std::string record_csv(const RunRecord& rec);
std::string record_json(const RunRecord& rec, const std::string& config_echo_json = "");
RunRecord record_from_json(const std::string& text);

}  // namespace stratflow
