#pragma once

#include <string>
#include <vector>

#include "stratflow/basis.hpp"

namespace stratflow {

// Weighted-l2 norm specification: weight
//   [ homogeneous ? |eta|^{2s} : (1+|eta|^2)^s ] * (|n~|/|eta|)^{2a} * |eta|^{2b}
// per mode, with the bar flag dropping every n = 0 mode.
struct NormSpec {
  double s = 0.0;
  bool homogeneous = false;
  int riesz_power = 0;      // a, the R_h = grad_h Lambda^{-1} multiplier power
  double lambda_power = 0;  // b, the Lambda^b multiplier power
  bool restrict_to_nonzero_n = false;

  static NormSpec l2() { return NormSpec{}; }
  static NormSpec sobolev(double s, bool homogeneous = false) {
    return NormSpec{s, homogeneous, 0, 0.0, false};
  }
};

double norm_weight(const NormSpec& spec, const ModeIndex& m);
double sobolev_norm(const SpectralField& f, const NormSpec& spec);

// Zeroes every n = 0 coefficient (the bar operator f - mean_h f).
SpectralField project_mean_free(const SpectralField& f);

// The full unknown: v_h in the C basis, v_d and theta in the B basis.
struct FlowState {
  double t = 0.0;
  int alpha = 0;  // 0: velocity damping, 1: velocity diffusion
  Truncation tr;
  std::vector<SpectralField> vh;
  SpectralField vd;
  SpectralField theta;

  static FlowState zero(const Truncation& tr, int alpha);
  void enforce_reality();
  double max_abs() const;
};

// Per-C-mode divergence sum_i i n~_i Vh_i + q~ Vd.
SpectralField divergence_field(const FlowState& s);

struct ValidationCheck {
  std::string name;
  bool pass = true;
  double violation = 0.0;
  double tolerance = 0.0;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  const ValidationCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

struct ValidateOptions {
  double div_tol = 1e-10;
  double vd_mean_tol = 1e-13;
  double reality_tol = 1e-12;
};

ValidationReport validate_state(const FlowState& s, const ValidateOptions& opt = {});

// Physical-sample ingestion: forward transforms plus compatibility vetting.
// A sample set is accepted only if the band-limited B/C reconstruction
// reproduces it to `tol` (relative max norm); that is exactly membership in
// the solution spaces, and in particular implies the even-order boundary
// traces of theta vanish. The traces are also evaluated from the
// full-resolution vertical cosine interpolant and reported.
struct IngestResult {
  bool accepted = false;
  FlowState state;
  ValidationReport report;
};

IngestResult ingest_state(const SpectralOps& ops, const std::vector<GridField>& vh_grids,
                          const GridField& vd_grid, const GridField& theta_grid, int alpha,
                          int sobolev_m, double tol = 1e-8);

// Snapshot files: self-describing JSON, coefficients in lexicographic
// (n_1, ..., n_{d-1}, q) order.
std::string state_to_json(const FlowState& s);
FlowState state_from_json(const std::string& text);
void save_state(const FlowState& s, const std::string& path);
FlowState load_state(const std::string& path);

}  // namespace stratflow
