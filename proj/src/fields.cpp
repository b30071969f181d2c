#include "stratflow/fields.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace stratflow {

double norm_weight(const NormSpec& spec, const ModeIndex& m) {
  const double e2 = m.eta_sq();
  if (spec.restrict_to_nonzero_n && m.n_zero()) return 0.0;
  if (e2 == 0.0) {
    // Only the (n,q) = (0,0) cosine mode lands here.
    if (spec.lambda_power < 0.0 || (spec.homogeneous && spec.s < 0.0))
      throw SpecError("negative power applied to the |eta| = 0 mode");
    if (spec.riesz_power > 0) return 0.0;
    if (spec.homogeneous && spec.s > 0.0) return 0.0;
    if (spec.lambda_power > 0.0) return 0.0;
    return 1.0;
  }
  double w = spec.homogeneous ? std::pow(e2, spec.s) : std::pow(1.0 + e2, spec.s);
  if (spec.riesz_power != 0) w *= std::pow(m.nt_sq() / e2, spec.riesz_power);
  if (spec.lambda_power != 0.0) w *= std::pow(e2, spec.lambda_power);
  return w;
}

double sobolev_norm(const SpectralField& f, const NormSpec& spec) {
  double sum = 0.0;
  for_each_mode(f.tr, f.tag, [&](long i, const ModeIndex& m) {
    const double w = norm_weight(spec, m);
    if (w == 0.0) return;
    sum += f.mode_measure(m) * w * std::norm(f.coef[static_cast<size_t>(i)]);
  });
  return std::sqrt(sum);
}

SpectralField project_mean_free(const SpectralField& f) {
  SpectralField out = f;
  for_each_mode(f.tr, f.tag, [&](long i, const ModeIndex& m) {
    if (m.n_zero()) out.coef[static_cast<size_t>(i)] = Complex(0.0, 0.0);
  });
  return out;
}

FlowState FlowState::zero(const Truncation& tr, int alpha) {
  FlowState s;
  s.tr = tr;
  s.alpha = alpha;
  s.vh.assign(static_cast<size_t>(tr.dh()), SpectralField(Basis::C, tr));
  s.vd = SpectralField(Basis::B, tr);
  s.theta = SpectralField(Basis::B, tr);
  return s;
}

void FlowState::enforce_reality() {
  for (auto& f : vh) f.enforce_reality();
  vd.enforce_reality();
  theta.enforce_reality();
}

double FlowState::max_abs() const {
  double m = std::max(vd.max_abs(), theta.max_abs());
  for (const auto& f : vh) m = std::max(m, f.max_abs());
  return m;
}

SpectralField divergence_field(const FlowState& s) {
  SpectralField div(Basis::C, s.tr);
  for_each_mode(s.tr, Basis::C, [&](long i, const ModeIndex& m) {
    Complex acc(0.0, 0.0);
    for (int a = 0; a < s.tr.dh(); ++a)
      acc += Complex(0.0, m.n_tilde(a)) * s.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(i)];
    if (m.q >= 1) acc += m.q_tilde() * s.vd.at(m);
    div.coef[static_cast<size_t>(i)] = acc;
  });
  return div;
}

ValidationReport validate_state(const FlowState& s, const ValidateOptions& opt) {
  ValidationReport rep;

  const SpectralField div = divergence_field(s);
  double num = 0.0, den = 0.0;
  for_each_mode(s.tr, Basis::C, [&](long i, const ModeIndex& m) {
    num = std::max(num, std::abs(div.coef[static_cast<size_t>(i)]));
    double scale = 0.0;
    for (int a = 0; a < s.tr.dh(); ++a)
      scale += std::abs(m.n_tilde(a)) *
               std::abs(s.vh[static_cast<size_t>(a)].coef[static_cast<size_t>(i)]);
    if (m.q >= 1) scale += m.q_tilde() * std::abs(s.vd.at(m));
    den = std::max(den, scale);
  });
  const double div_rel = den > 0.0 ? num / den : num;
  rep.checks.push_back({"divergence_free", div_rel <= opt.div_tol, div_rel, opt.div_tol});

  double vd_mean = 0.0;
  for (int q = 1; q <= s.tr.q_max; ++q) {
    ModeIndex m;
    m.dh = s.tr.dh();
    m.q = q;
    vd_mean = std::max(vd_mean, std::abs(s.vd.at(m)));
  }
  rep.checks.push_back({"vd_horizontal_mean", vd_mean <= opt.vd_mean_tol, vd_mean, opt.vd_mean_tol});

  double reality = std::max(s.vd.reality_defect(), s.theta.reality_defect());
  for (const auto& f : s.vh) reality = std::max(reality, f.reality_defect());
  rep.checks.push_back({"reality", reality <= opt.reality_tol, reality, opt.reality_tol});

  return rep;
}

namespace {

// One-sided derivative weights at the wall from the nearest npts midpoint
// nodes: weights = (order)! * row of the inverse Vandermonde.
std::vector<double> wall_fd_weights(const std::vector<double>& offsets, int order) {
  const int n = static_cast<int>(offsets.size());
  std::vector<double> a(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int k = 0; k < n; ++k) {
      a[static_cast<size_t>(k) * n + i] = p;  // rows: power k, cols: node i
      p *= offsets[static_cast<size_t>(i)];
    }
  }
  std::vector<double> rhs(static_cast<size_t>(n), 0.0);
  double fact = 1.0;
  for (int k = 2; k <= order; ++k) fact *= k;
  rhs[static_cast<size_t>(order)] = fact;
  // dense solve a^T w = rhs with partial pivoting
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[static_cast<size_t>(r) * n + col]) >
          std::abs(a[static_cast<size_t>(piv) * n + col]))
        piv = r;
    for (int c = 0; c < n; ++c)
      std::swap(a[static_cast<size_t>(col) * n + c], a[static_cast<size_t>(piv) * n + c]);
    std::swap(rhs[static_cast<size_t>(col)], rhs[static_cast<size_t>(piv)]);
    const double d = a[static_cast<size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<size_t>(r) * n + col] / d;
      for (int c = col; c < n; ++c)
        a[static_cast<size_t>(r) * n + c] -= f * a[static_cast<size_t>(col) * n + c];
      rhs[static_cast<size_t>(r)] -= f * rhs[static_cast<size_t>(col)];
    }
  }
  std::vector<double> w(static_cast<size_t>(n));
  for (int r = n - 1; r >= 0; --r) {
    double s = rhs[static_cast<size_t>(r)];
    for (int c = r + 1; c < n; ++c) s -= a[static_cast<size_t>(r) * n + c] * w[static_cast<size_t>(c)];
    w[static_cast<size_t>(r)] = s / a[static_cast<size_t>(r) * n + r];
  }
  return w;
}

// Even-order wall traces of the part of the data the B basis cannot
// represent. The compatible (band-limited, trace-satisfying) content cancels
// exactly in grid - P_B grid, so for admissible data this is rounding-level;
// for inadmissible data it resolves the violating derivative at the wall.
double boundary_trace_residual(const SpectralOps& ops, const GridField& grid,
                               const GridField& projected, int order2k) {
  const Truncation& tr = ops.trunc();
  const int mv = tr.mv;
  long lines = 1;
  for (int a = 0; a < tr.dh(); ++a) lines *= tr.mh[static_cast<size_t>(a)];
  const int npts = std::min(mv, order2k + 4);
  std::vector<double> off_bot(static_cast<size_t>(npts)), off_top(static_cast<size_t>(npts));
  for (int i = 0; i < npts; ++i) {
    off_bot[static_cast<size_t>(i)] = tr.vertical_node(i) - (-1.0);
    off_top[static_cast<size_t>(i)] = tr.vertical_node(mv - 1 - i) - 1.0;
  }
  const std::vector<double> wb = wall_fd_weights(off_bot, order2k);
  const std::vector<double> wt = wall_fd_weights(off_top, order2k);
  double worst = 0.0;
  for (long l = 0; l < lines; ++l) {
    const double* f = grid.data() + l * mv;
    const double* p = projected.data() + l * mv;
    double bot = 0.0, top = 0.0;
    for (int i = 0; i < npts; ++i) {
      bot += wb[static_cast<size_t>(i)] * (f[i] - p[i]);
      top += wt[static_cast<size_t>(i)] * (f[mv - 1 - i] - p[mv - 1 - i]);
    }
    worst = std::max({worst, std::abs(bot), std::abs(top)});
  }
  return worst;
}

double roundtrip_residual(const GridField& grid, const GridField& back) {
  double resid = 0.0, scale = 0.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    resid = std::max(resid, std::abs(back[i] - grid[i]));
    scale = std::max(scale, std::abs(grid[i]));
  }
  return scale > 0.0 ? resid / scale : resid;
}

}  // namespace

IngestResult ingest_state(const SpectralOps& ops, const std::vector<GridField>& vh_grids,
                          const GridField& vd_grid, const GridField& theta_grid, int alpha,
                          int sobolev_m, double tol) {
  const Truncation& tr = ops.trunc();
  if (static_cast<int>(vh_grids.size()) != tr.dh())
    throw DimensionError("ingest expects d-1 horizontal velocity grids");

  IngestResult res;
  res.state = FlowState::zero(tr, alpha);
  for (int a = 0; a < tr.dh(); ++a)
    res.state.vh[static_cast<size_t>(a)] = ops.forward(vh_grids[static_cast<size_t>(a)], Basis::C);
  res.state.vd = ops.forward(vd_grid, Basis::B);
  res.state.theta = ops.forward(theta_grid, Basis::B);

  const GridField theta_back = ops.inverse(res.state.theta);
  double resid = std::max(roundtrip_residual(vd_grid, ops.inverse(res.state.vd)),
                          roundtrip_residual(theta_grid, theta_back));
  for (int a = 0; a < tr.dh(); ++a)
    resid = std::max(resid, roundtrip_residual(vh_grids[static_cast<size_t>(a)],
                                               ops.inverse(res.state.vh[static_cast<size_t>(a)])));
  res.report.checks.push_back({"representation_residual", resid <= tol, resid, tol});

  // Wall-derivative estimates amplify grid noise by ~ (mv/2)^{2k}; the
  // per-order threshold carries that conditioning factor.
  const int m_star = sobolev_m % 2 == 0 ? sobolev_m - 2 : sobolev_m - 1;
  double theta_scale = 0.0;
  for (double v : theta_grid) theta_scale = std::max(theta_scale, std::abs(v));
  for (int k2 = 0; k2 <= m_star; k2 += 2) {
    const double trace = boundary_trace_residual(ops, theta_grid, theta_back, k2);
    const double cond = std::pow(0.5 * tr.mv, k2);
    const double thr = tol * std::max(theta_scale, 1e-300) * std::max(cond, 1.0);
    res.report.checks.push_back(
        {"theta_boundary_trace_d" + std::to_string(k2), trace <= thr, trace, thr});
  }

  const ValidationReport base = validate_state(res.state);
  for (const auto& c : base.checks) res.report.checks.push_back(c);

  res.accepted = res.report.all_pass();
  return res;
}

namespace {

nlohmann::json field_to_json(const SpectralField& f) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Complex& c : f.coef) arr.push_back({c.real(), c.imag()});
  return {{"tag", f.tag == Basis::B ? "B" : "C"}, {"coef", std::move(arr)}};
}

SpectralField field_from_json(const nlohmann::json& j, const Truncation& tr) {
  const Basis tag = j.at("tag").get<std::string>() == "B" ? Basis::B : Basis::C;
  SpectralField f(tag, tr);
  const auto& arr = j.at("coef");
  if (arr.size() != f.coef.size()) throw IoError("snapshot coefficient count mismatch");
  for (size_t i = 0; i < f.coef.size(); ++i)
    f.coef[i] = Complex(arr[i][0].get<double>(), arr[i][1].get<double>());
  return f;
}

}  // namespace

std::string state_to_json(const FlowState& s) {
  nlohmann::json j;
  j["format"] = "stratflow-state-v1";
  j["d"] = s.tr.d;
  j["alpha"] = s.alpha;
  j["t"] = s.t;
  j["truncation"] = {{"nh_max", s.tr.nh_max},
                     {"q_max", s.tr.q_max},
                     {"grid_h", {s.tr.mh[0], s.tr.mh[1]}},
                     {"grid_v", s.tr.mv}};
  j["mode_ordering"] = "lexicographic in (n_1,...,n_{d-1},q); n ascending from -nh_max; q ascending";
  j["vertical_grid"] = "midpoint nodes x_d = -1 + 2(j+1/2)/grid_v, endpoints excluded";
  nlohmann::json vh = nlohmann::json::array();
  for (const auto& f : s.vh) vh.push_back(field_to_json(f));
  j["v_h"] = std::move(vh);
  j["v_d"] = field_to_json(s.vd);
  j["theta"] = field_to_json(s.theta);
  return j.dump(1);
}

FlowState state_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("format").get<std::string>() != "stratflow-state-v1")
    throw IoError("unknown snapshot format");
  const auto& tj = j.at("truncation");
  Truncation tr = Truncation::make_with_grid(j.at("d").get<int>(), tj.at("nh_max").get<int>(),
                                             tj.at("q_max").get<int>(),
                                             tj.at("grid_h")[0].get<int>(), tj.at("grid_v").get<int>());
  FlowState s = FlowState::zero(tr, j.at("alpha").get<int>());
  s.t = j.at("t").get<double>();
  const auto& vh = j.at("v_h");
  if (static_cast<int>(vh.size()) != tr.dh()) throw IoError("snapshot v_h component count mismatch");
  for (int a = 0; a < tr.dh(); ++a) s.vh[static_cast<size_t>(a)] = field_from_json(vh[a], tr);
  s.vd = field_from_json(j.at("v_d"), tr);
  s.theta = field_from_json(j.at("theta"), tr);
  return s;
}

void save_state(const FlowState& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << state_to_json(s);
  if (!out) throw IoError("write failed: " + path);
}

FlowState load_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return state_from_json(text);
}

}  // namespace stratflow
