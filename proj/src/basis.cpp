#include "stratflow/basis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace stratflow {

double b_profile(int q, double xd) {
  const double a = 0.5 * kPi * q * xd;
  return q % 2 == 0 ? std::sin(a) : std::cos(a);
}

double c_profile(int q, double xd) {
  const double a = 0.5 * kPi * q * xd;
  return q % 2 == 0 ? std::cos(a) : -std::sin(a);
}

Complex evaluate_basis(const ModeIndex& mode, Basis tag, const std::vector<double>& x) {
  if (!mode.in_set(tag)) throw InvalidModeError("mode outside index set of requested basis");
  if (static_cast<int>(x.size()) != mode.dh + 1)
    throw DimensionError("evaluation point has wrong dimension");
  double phase = 0.0;
  for (int a = 0; a < mode.dh; ++a) phase += mode.n_tilde(a) * x[static_cast<size_t>(a)];
  const Complex horiz = std::polar(1.0, phase);
  const double xd = x[static_cast<size_t>(mode.dh)];
  return horiz * (tag == Basis::B ? b_profile(mode.q, xd) : c_profile(mode.q, xd));
}

namespace {
int next_pow2(int n) {
  int p = 4;
  while (p < n) p *= 2;
  return p;
}
}  // namespace

Truncation Truncation::make(int d, int nh_max, int q_max) {
  Truncation tr;
  tr.d = d;
  tr.nh_max = nh_max;
  tr.q_max = q_max;
  const int mh = next_pow2(3 * nh_max + 1);
  tr.mh = {mh, d == 3 ? mh : 1};
  tr.mv = 3 * q_max / 2 + 2;
  tr.validate();
  return tr;
}

Truncation Truncation::make_with_grid(int d, int nh_max, int q_max, int mh, int mv) {
  Truncation tr;
  tr.d = d;
  tr.nh_max = nh_max;
  tr.q_max = q_max;
  tr.mh = {mh, d == 3 ? mh : 1};
  tr.mv = mv;
  tr.validate();
  return tr;
}

void Truncation::validate() const {
  if (d != 2 && d != 3) throw DimensionError("dimension must be 2 or 3");
  if (nh_max < 0) throw DimensionError("nh_max must be nonnegative");
  if (q_max < 4) throw DimensionError("q_max must be at least 4");
  for (int a = 0; a < dh(); ++a) {
    if (mh[static_cast<size_t>(a)] < 3 * nh_max + 1)
      throw DimensionError("horizontal grid violates the 3/2 dealiasing bound");
  }
  if (2 * mv < 3 * q_max + 2) throw DimensionError("vertical grid violates the 3/2 dealiasing bound");
}

long Truncation::flatten(const ModeIndex& m, Basis tag) const {
  const int qc = q_count(tag);
  const int qmin = q_min(tag);
  long idx = 0;
  for (int a = 0; a < dh(); ++a) idx = idx * n_count() + (m.n[static_cast<size_t>(a)] + nh_max);
  return idx * qc + (m.q - qmin);
}

ModeIndex Truncation::unflatten(long idx, Basis tag) const {
  const int qc = q_count(tag);
  const int qmin = q_min(tag);
  ModeIndex m;
  m.dh = dh();
  m.q = static_cast<int>(idx % qc) + qmin;
  long rest = idx / qc;
  for (int a = dh() - 1; a >= 0; --a) {
    m.n[static_cast<size_t>(a)] = static_cast<int>(rest % n_count()) - nh_max;
    rest /= n_count();
  }
  return m;
}

void SpectralField::enforce_reality() {
  for_each_mode(tr, tag, [&](long i, const ModeIndex& m) {
    ModeIndex neg = m;
    for (int a = 0; a < m.dh; ++a) neg.n[static_cast<size_t>(a)] = -m.n[static_cast<size_t>(a)];
    const long j = tr.flatten(neg, tag);
    if (j < i) return;
    const Complex avg = 0.5 * (coef[static_cast<size_t>(i)] + std::conj(coef[static_cast<size_t>(j)]));
    coef[static_cast<size_t>(i)] = avg;
    coef[static_cast<size_t>(j)] = std::conj(avg);
  });
}

double SpectralField::reality_defect() const {
  double worst = 0.0;
  for_each_mode(tr, tag, [&](long i, const ModeIndex& m) {
    ModeIndex neg = m;
    for (int a = 0; a < m.dh; ++a) neg.n[static_cast<size_t>(a)] = -m.n[static_cast<size_t>(a)];
    const long j = tr.flatten(neg, tag);
    worst = std::max(worst, std::abs(coef[static_cast<size_t>(i)] -
                                     std::conj(coef[static_cast<size_t>(j)])));
  });
  return worst;
}

double SpectralField::max_abs() const {
  double m = 0.0;
  for (const Complex& c : coef) m = std::max(m, std::abs(c));
  return m;
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  if (tag != o.tag || tr != o.tr) throw DimensionError("field mismatch in +=");
  for (size_t i = 0; i < coef.size(); ++i) coef[i] += o.coef[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  if (tag != o.tag || tr != o.tr) throw DimensionError("field mismatch in -=");
  for (size_t i = 0; i < coef.size(); ++i) coef[i] -= o.coef[i];
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  for (Complex& c : coef) c *= s;
  return *this;
}

struct SpectralOps::FftPlans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::vector<Complex> scratch;
  ~FftPlans() {
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

SpectralOps::SpectralOps(const Truncation& tr, int threads) : tr_(tr), threads_(threads > 0 ? threads : 1) {
  tr_.validate();
  hlines_ = 1;
  for (int a = 0; a < tr_.dh(); ++a) hlines_ *= tr_.mh[static_cast<size_t>(a)];

  // Vertical synthesis/analysis matrices on the interior (midpoint) grid
  // x_j = -1 + 2(j+1/2)/mv. The shifted sine/cosine family is exactly
  // orthogonal there, so forward o inverse is the identity on q <= q_max.
  const int mv = tr_.mv;
  const int qcb = tr_.q_count(Basis::B);
  const int qcc = tr_.q_count(Basis::C);
  vb_.assign(static_cast<size_t>(mv) * qcb, 0.0);
  vc_.assign(static_cast<size_t>(mv) * qcc, 0.0);
  vb_anal_.assign(static_cast<size_t>(qcb) * mv, 0.0);
  vc_anal_.assign(static_cast<size_t>(qcc) * mv, 0.0);
  for (int j = 0; j < mv; ++j) {
    const double xd = tr_.vertical_node(j);
    for (int q = 1; q <= tr_.q_max; ++q) {
      const double v = b_profile(q, xd);
      vb_[static_cast<size_t>(j) * qcb + (q - 1)] = v;
      vb_anal_[static_cast<size_t>(q - 1) * mv + j] = 2.0 * v / mv;
    }
    for (int q = 0; q <= tr_.q_max; ++q) {
      const double v = c_profile(q, xd);
      vc_[static_cast<size_t>(j) * qcc + q] = v;
      // Dual weight: 1/mv at q = 0 (profile norm^2 = 2), 2/mv otherwise.
      vc_anal_[static_cast<size_t>(q) * mv + j] = (q == 0 ? 1.0 : 2.0) * v / mv;
    }
  }

  plans_ = std::make_unique<FftPlans>();
  plans_->scratch.assign(static_cast<size_t>(tr_.grid_count()), Complex(0.0, 0.0));
  auto* data = reinterpret_cast<fftw_complex*>(plans_->scratch.data());
  int n[2] = {tr_.mh[0], tr_.mh[1]};
  const int rank = tr_.dh();
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->fwd = fftw_plan_many_dft(rank, n, mv, data, nullptr, mv, 1, data, nullptr, mv, 1,
                                   FFTW_FORWARD, flags);
  plans_->bwd = fftw_plan_many_dft(rank, n, mv, data, nullptr, mv, 1, data, nullptr, mv, 1,
                                   FFTW_BACKWARD, flags);
  if (!plans_->fwd || !plans_->bwd) throw DimensionError("fftw plan creation failed");
}

SpectralOps::~SpectralOps() = default;

void SpectralOps::forward_horizontal(std::vector<Complex>& buf) const {
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(plans_->fwd, p, p);
  const double scale = 1.0 / static_cast<double>(hlines_);
  for (Complex& c : buf) c *= scale;
}

void SpectralOps::inverse_horizontal(std::vector<Complex>& buf) const {
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(plans_->bwd, p, p);
}

namespace {
inline long line_offset(const Truncation& tr, const ModeIndex& m) {
  long off = 0;
  for (int a = 0; a < tr.dh(); ++a) {
    const int mh = tr.mh[static_cast<size_t>(a)];
    const int bin = ((m.n[static_cast<size_t>(a)] % mh) + mh) % mh;
    off = off * mh + bin;
  }
  return off * tr.mv;
}
}  // namespace

void SpectralOps::forward_vertical(const std::vector<Complex>& grid, std::vector<Complex>& modes,
                                   Basis tag) const {
  const int mv = tr_.mv;
  const int qc = tr_.q_count(tag);
  const int qmin = tr_.q_min(tag);
  const double* anal = tag == Basis::B ? vb_anal_.data() : vc_anal_.data();
  const long ncols = tr_.mode_count(tag) / qc;  // number of kept n-tuples
  parallel_for(ncols, threads_, [&](long lo, long hi) {
    for (long col = lo; col < hi; ++col) {
      ModeIndex m = tr_.unflatten(col * qc, tag);
      const Complex* line = grid.data() + line_offset(tr_, m);
      Complex* out = modes.data() + col * qc;
      for (int q = qmin; q <= tr_.q_max; ++q) {
        const double* w = anal + static_cast<size_t>(q - qmin) * mv;
        Complex acc(0.0, 0.0);
        for (int j = 0; j < mv; ++j) acc += w[j] * line[j];
        out[q - qmin] = acc;
      }
    }
  });
}

void SpectralOps::inverse_vertical(const std::vector<Complex>& modes, std::vector<Complex>& grid,
                                   Basis tag) const {
  const int mv = tr_.mv;
  const int qc = tr_.q_count(tag);
  const double* synth = tag == Basis::B ? vb_.data() : vc_.data();
  const long ncols = tr_.mode_count(tag) / qc;
  parallel_for(ncols, threads_, [&](long lo, long hi) {
    for (long col = lo; col < hi; ++col) {
      ModeIndex m = tr_.unflatten(col * qc, tag);
      const Complex* in = modes.data() + col * qc;
      Complex* line = grid.data() + line_offset(tr_, m);
      for (int j = 0; j < mv; ++j) {
        const double* w = synth + static_cast<size_t>(j) * qc;
        Complex acc(0.0, 0.0);
        for (int q = 0; q < qc; ++q) acc += w[q] * in[q];
        line[j] = acc;
      }
    }
  });
}

SpectralField SpectralOps::forward(const GridField& grid, Basis tag) const {
  if (static_cast<long>(grid.size()) != tr_.grid_count())
    throw DimensionError("grid size does not match truncation");
  std::vector<Complex> buf(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) buf[i] = Complex(grid[i], 0.0);
  forward_horizontal(buf);
  SpectralField out(tag, tr_);
  forward_vertical(buf, out.coef, tag);
  return out;
}

GridField SpectralOps::inverse(const SpectralField& f) const {
  if (f.tr != tr_) throw DimensionError("field truncation does not match engine");
  std::vector<Complex> buf(static_cast<size_t>(tr_.grid_count()), Complex(0.0, 0.0));
  inverse_vertical(f.coef, buf, f.tag);
  inverse_horizontal(buf);
  GridField out(buf.size());
  for (size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
  return out;
}

GridField SpectralOps::multiply_grids(const GridField& a, const GridField& b) const {
  if (a.size() != b.size()) throw DimensionError("grid size mismatch");
  GridField out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

SpectralField SpectralOps::product(const SpectralField& f, const SpectralField& g) const {
  if (f.tr != tr_ || g.tr != tr_) throw DimensionError("product with mismatched truncations");
  const GridField fg = multiply_grids(inverse(f), inverse(g));
  return forward(fg, product_tag(f.tag, g.tag));
}

SpectralField SpectralOps::derivative(const SpectralField& f, int axis) const {
  if (axis < 0 || axis >= tr_.d) throw DimensionError("derivative axis out of range");
  if (axis < tr_.dh()) {
    SpectralField out = f;
    for_each_mode(tr_, f.tag, [&](long i, const ModeIndex& m) {
      out.coef[static_cast<size_t>(i)] *= Complex(0.0, m.n_tilde(axis));
    });
    return out;
  }
  const Basis target = f.tag == Basis::B ? Basis::C : Basis::B;
  SpectralField out(target, tr_);
  if (f.tag == Basis::B) {
    for_each_mode(tr_, Basis::B, [&](long i, const ModeIndex& m) {
      out.at(m) = m.q_tilde() * f.coef[static_cast<size_t>(i)];
    });
  } else {
    for_each_mode(tr_, Basis::C, [&](long i, const ModeIndex& m) {
      if (m.q == 0) return;  // constant profile differentiates to zero
      out.at(m) = -m.q_tilde() * f.coef[static_cast<size_t>(i)];
    });
  }
  return out;
}

}  // namespace stratflow
