#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "stratflow/util.hpp"

namespace stratflow {

// Two mixed bases on T^{d-1} x [-1,1]:
//   B_{n,q}(x) = e^{2 pi i n.x_h} b_q(x_d),  q >= 1   (vanishes on the walls)
//   C_{n,q}(x) = e^{2 pi i n.x_h} c_q(x_d),  q >= 0   (wall-normal derivative vanishes)
// with
//   b_q = sin(pi q x_d / 2) for even q, cos(pi q x_d / 2) for odd q,
//   c_q = cos(pi q x_d / 2) for even q, -sin(pi q x_d / 2) for odd q.
// All q >= 1 functions are L^2-normalized on the strip; c_0 == 1 has squared
// norm 2, and the forward transform uses the dual weight so that
// inverse(forward(f)) == f holds exactly on band-limited fields. Norm
// reductions account for the q = 0 measure via mode_measure().
enum class Basis : uint8_t { B, C };

struct ModeIndex {
  std::array<int, 2> n{0, 0};  // horizontal indices, first dh entries used
  int q = 0;
  int dh = 1;  // number of horizontal axes (d - 1)

  double n_tilde(int axis) const { return 2.0 * kPi * n[static_cast<size_t>(axis)]; }
  double q_tilde() const { return 0.5 * kPi * q; }
  double nt_sq() const {
    double s = 0.0;
    for (int a = 0; a < dh; ++a) s += n_tilde(a) * n_tilde(a);
    return s;
  }
  double eta_sq() const { return nt_sq() + q_tilde() * q_tilde(); }
  double eta() const { return std::sqrt(eta_sq()); }
  bool n_zero() const {
    for (int a = 0; a < dh; ++a)
      if (n[static_cast<size_t>(a)] != 0) return false;
    return true;
  }
  bool in_set(Basis tag) const { return tag == Basis::B ? q >= 1 : q >= 0; }
};

double b_profile(int q, double xd);  // b_q(x_d)
double c_profile(int q, double xd);  // c_q(x_d)

// b_q(x_d) = sign * sin(pi q (x_d+1)/2), c_q(x_d) = sign * cos(pi q (x_d+1)/2)
// with the same sign table; pinned by a unit test, it is what makes the
// vertical direction a plain shifted sine/cosine transform.
inline double shifted_sign(int q) { return (q / 2) % 2 == 0 ? 1.0 : -1.0; }

Complex evaluate_basis(const ModeIndex& mode, Basis tag, const std::vector<double>& x);

struct Truncation {
  int d = 2;       // space dimension, 2 or 3
  int nh_max = 0;  // max |n_i| per horizontal axis
  int q_max = 0;   // max q
  std::array<int, 2> mh{1, 1};  // horizontal grid sizes, first d-1 used
  int mv = 1;                   // vertical grid size

  // Grids default to the 3/2-rule dealiasing bounds, horizontal sizes rounded
  // up to a power of two for the FFT.
  static Truncation make(int d, int nh_max, int q_max);
  static Truncation make_with_grid(int d, int nh_max, int q_max, int mh, int mv);

  void validate() const;

  int dh() const { return d - 1; }
  int n_count() const { return 2 * nh_max + 1; }
  int q_min(Basis tag) const { return tag == Basis::B ? 1 : 0; }
  int q_count(Basis tag) const { return q_max + (tag == Basis::B ? 0 : 1); }
  long mode_count(Basis tag) const {
    long m = q_count(tag);
    for (int a = 0; a < dh(); ++a) m *= n_count();
    return m;
  }
  long grid_count() const {
    long g = mv;
    for (int a = 0; a < dh(); ++a) g *= mh[static_cast<size_t>(a)];
    return g;
  }
  double vertical_node(int j) const { return -1.0 + 2.0 * (j + 0.5) / mv; }

  // Lexicographic flattening in (n_1, ..., n_{d-1}, q), n ascending from -N.
  long flatten(const ModeIndex& m, Basis tag) const;
  ModeIndex unflatten(long idx, Basis tag) const;

  bool operator==(const Truncation& o) const {
    return d == o.d && nh_max == o.nh_max && q_max == o.q_max && mh == o.mh && mv == o.mv;
  }
  bool operator!=(const Truncation& o) const { return !(*this == o); }
};

struct SpectralField {
  Basis tag = Basis::B;
  Truncation tr;
  std::vector<Complex> coef;

  SpectralField() = default;
  SpectralField(Basis tag_, const Truncation& tr_)
      : tag(tag_), tr(tr_), coef(static_cast<size_t>(tr_.mode_count(tag_)), Complex(0.0, 0.0)) {}

  Complex& at(const ModeIndex& m) { return coef[static_cast<size_t>(tr.flatten(m, tag))]; }
  const Complex& at(const ModeIndex& m) const {
    return coef[static_cast<size_t>(tr.flatten(m, tag))];
  }
  Complex& at2(int n1, int q) { return at(mode2(n1, q)); }
  const Complex& at2(int n1, int q) const { return at(mode2(n1, q)); }
  ModeIndex mode2(int n1, int q) const {
    ModeIndex m;
    m.n = {n1, 0};
    m.q = q;
    m.dh = tr.dh();
    return m;
  }

  // L^2 measure of the mode relative to the unit-norm ones (2 for the q = 0
  // cosine profile, 1 otherwise).
  double mode_measure(const ModeIndex& m) const {
    return (tag == Basis::C && m.q == 0) ? 2.0 : 1.0;
  }

  void set_zero() { std::fill(coef.begin(), coef.end(), Complex(0.0, 0.0)); }
  // coef(-n, q) := conj(coef(n, q)); makes the physical field real.
  void enforce_reality();
  double reality_defect() const;  // max |coef(-n,q) - conj(coef(n,q))|
  double max_abs() const;

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double s);
};

template <typename F>
void for_each_mode(const Truncation& tr, Basis tag, F&& f) {
  const long count = tr.mode_count(tag);
  for (long i = 0; i < count; ++i) f(i, tr.unflatten(i, tag));
}

// Real collocation values, layout [i_1][...][i_{d-1}][j_v], vertical fastest.
using GridField = std::vector<double>;

// Transform engine bound to one truncation: forward/inverse between
// collocation values and B/C coefficients, spectral derivatives, and the
// dealiased product. The horizontal direction runs through FFTW, the vertical
// one through dense shifted sine/cosine matrices built from b_q/c_q.
class SpectralOps {
 public:
  explicit SpectralOps(const Truncation& tr, int threads = 1);
  ~SpectralOps();
  SpectralOps(const SpectralOps&) = delete;
  SpectralOps& operator=(const SpectralOps&) = delete;

  const Truncation& trunc() const { return tr_; }
  int threads() const { return threads_; }
  void set_threads(int t) { threads_ = t > 0 ? t : 1; }

  SpectralField forward(const GridField& grid, Basis tag) const;
  GridField inverse(const SpectralField& f) const;

  // Dealiased pointwise product; target basis from parity: BxB->C, CxC->C,
  // BxC->B.
  SpectralField product(const SpectralField& f, const SpectralField& g) const;
  static Basis product_tag(Basis a, Basis b) { return a == b ? Basis::C : Basis::B; }

  // axis in [0, d-2] horizontal, axis == d-1 vertical. Vertical flips the
  // basis: d/dx_d B_q = q~ C_q, d/dx_d C_q = -q~ B_q (C_0 -> 0).
  SpectralField derivative(const SpectralField& f, int axis) const;

  GridField multiply_grids(const GridField& a, const GridField& b) const;

 private:
  void forward_horizontal(std::vector<Complex>& buf) const;
  void inverse_horizontal(std::vector<Complex>& buf) const;
  void forward_vertical(const std::vector<Complex>& grid, std::vector<Complex>& modes,
                        Basis tag) const;
  void inverse_vertical(const std::vector<Complex>& modes, std::vector<Complex>& grid,
                        Basis tag) const;

  Truncation tr_;
  int threads_ = 1;
  long hlines_ = 1;  // number of horizontal collocation columns = prod(mh)
  std::vector<double> vb_;       // [j][q] b_q(x_j)
  std::vector<double> vc_;       // [j][q] c_q(x_j)
  std::vector<double> vb_anal_;  // [q][j] forward weights, B
  std::vector<double> vc_anal_;  // [q][j] forward weights, C (dual at q = 0)
  struct FftPlans;
  std::unique_ptr<FftPlans> plans_;
};

}  // namespace stratflow
