#pragma once

// Periodic-box discretization of R^N, discrete Fourier transforms, the Bessel
// multiplier (1+|xi|^2)^s and the norms built on it.
//
// Conventions
//   * the box is the torus [-L/2, L/2)^dim, point j sits at -L/2 + j*h;
//   * angular frequencies xi_k = 2*pi*k/L with k in the centered range;
//   * Spectrum coefficients approximate the continuous transform
//     \hat u(xi) = \int u(x) e^{-i xi.x} dx, i.e. cell_volume * DFT with the
//     phase of the box origin folded in, so Parseval reads
//     \int |u|^2 = (1/|box|) sum_k |\hat u_k|^2.

#include "besselmp/detail/fft.hpp"
#include "besselmp/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace besselmp {

class grid_mismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct Grid {
  int dim = 1;
  std::size_t n = 0;
  std::array<double, 3> length{0.0, 0.0, 0.0};

  std::size_t size() const {
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= n;
    return total;
  }
  /// Number of r2c coefficients (last axis halved).
  std::size_t half_size() const { return size() / n * (n / 2 + 1); }

  double spacing(int axis) const { return length[axis] / static_cast<double>(n); }
  double cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < dim; ++d) v *= spacing(d);
    return v;
  }
  double volume() const {
    double v = 1.0;
    for (int d = 0; d < dim; ++d) v *= length[d];
    return v;
  }
  double coordinate(int axis, std::size_t i) const {
    return -0.5 * length[axis] + static_cast<double>(i) * spacing(axis);
  }

  /// Per-axis indices of a row-major flat index (axis 0 slowest).
  std::array<std::size_t, 3> multi_index(std::size_t flat) const {
    std::array<std::size_t, 3> idx{0, 0, 0};
    for (int d = dim - 1; d >= 0; --d) {
      idx[d] = flat % n;
      flat /= n;
    }
    return idx;
  }
  std::size_t flat_index(const std::array<std::size_t, 3>& idx) const {
    std::size_t flat = 0;
    for (int d = 0; d < dim; ++d) flat = flat * n + idx[d];
    return flat;
  }

  std::array<double, 3> point(std::size_t flat) const {
    const auto idx = multi_index(flat);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) x[d] = coordinate(d, idx[d]);
    return x;
  }

  /// Signed wavenumber of DFT index i (centered range; Nyquist maps to -n/2).
  static long wavenumber(std::size_t i, std::size_t n) {
    const long k = static_cast<long>(i);
    const long nn = static_cast<long>(n);
    return 2 * k < nn ? k : k - nn;
  }
  double frequency(int axis, std::size_t i) const {
    return 2.0 * std::numbers::pi * static_cast<double>(wavenumber(i, n)) / length[axis];
  }

  bool power_of_two() const { return n != 0 && (n & (n - 1)) == 0; }

  bool operator==(const Grid&) const = default;
};

inline Grid make_grid(int dim, std::size_t n, std::array<double, 3> lengths) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("grid dimension must be 1, 2 or 3, got " + std::to_string(dim));
  if (n == 0) throw std::invalid_argument("grid needs a positive number of points per axis");
  Grid g;
  g.dim = dim;
  g.n = n;
  for (int d = 0; d < dim; ++d) {
    if (!(lengths[d] > 0.0) || !std::isfinite(lengths[d]))
      throw std::invalid_argument("box length must be positive and finite");
    g.length[d] = lengths[d];
  }
  return g;
}

inline Grid make_grid(int dim, std::size_t n, double box_length) {
  return make_grid(dim, n, {box_length, box_length, box_length});
}

/// Real samples of a function on a Grid, row-major.
class Field {
public:
  Field() = default;
  explicit Field(const Grid& grid) : grid_(grid), values_(grid.size(), 0.0) {}
  Field(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size())
      throw std::invalid_argument("field has " + std::to_string(values_.size()) + " values, grid expects " +
                                  std::to_string(grid_.size()));
    for (double v : values_)
      if (!std::isfinite(v)) throw std::invalid_argument("field values must be finite");
  }

  /// Samples fn(point) at every grid point; fn takes std::span<const double>.
  template <class Fn>
  static Field from_function(const Grid& grid, Fn&& fn) {
    Field f(grid);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto x = grid.point(i);
      f.values_[i] = fn(std::span<const double>(x.data(), static_cast<std::size_t>(grid.dim)));
    }
    return f;
  }

  static Field constant(const Grid& grid, double c) { return Field(grid, std::vector<double>(grid.size(), c)); }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& data() const { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool is_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Field& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }
  /// this += a * x
  Field& axpy(double a, const Field& x) {
    check_same(x);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend Field operator*(Field a, double s) { return a *= s; }

  bool operator==(const Field&) const = default;

  void check_same(const Field& o) const {
    if (!(grid_ == o.grid_)) throw grid_mismatch("fields live on different grids");
  }

private:
  Grid grid_;
  std::vector<double> values_;
};

/// Full complex spectrum, same flat layout as the Field it came from.
struct Spectrum {
  Grid grid;
  std::vector<std::complex<double>> coefficients;

  /// Angular frequency vector of flat index i.
  std::array<double, 3> frequency(std::size_t flat) const {
    const auto idx = grid.multi_index(flat);
    std::array<double, 3> xi{0.0, 0.0, 0.0};
    for (int d = 0; d < grid.dim; ++d) xi[d] = grid.frequency(d, idx[d]);
    return xi;
  }

  /// Flat index of the coefficient at -k.
  std::size_t conjugate_index(std::size_t flat) const {
    auto idx = grid.multi_index(flat);
    for (int d = 0; d < grid.dim; ++d) idx[d] = (grid.n - idx[d]) % grid.n;
    return grid.flat_index(idx);
  }

  /// max_k |c_k - conj(c_{-k})| relative to max |c_k|.
  double hermitian_defect() const {
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
      worst = std::max(worst, std::abs(coefficients[i] - std::conj(coefficients[conjugate_index(i)])));
      scale = std::max(scale, std::abs(coefficients[i]));
    }
    return scale > 0.0 ? worst / scale : 0.0;
  }
};

namespace detail {

/// (-1)^k per axis: moves the DFT origin to the box origin -L/2.
inline double origin_phase(const Grid& g, std::size_t flat) {
  const auto idx = g.multi_index(flat);
  long parity = 0;
  for (int d = 0; d < g.dim; ++d) parity += Grid::wavenumber(idx[d], g.n);
  return (parity % 2 == 0) ? 1.0 : -1.0;
}

/// Visits every r2c coefficient with |xi|^2 and its Hermitian multiplicity.
template <class Fn>
void for_each_half_mode(const Grid& g, Fn&& fn) {
  const std::size_t nh = g.n / 2 + 1;
  const std::size_t outer = g.size() / g.n;
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t o = 0; o < outer; ++o) {
    double xi2_outer = 0.0;
    std::size_t rem = o;
    for (int d = g.dim - 2; d >= 0; --d) {
      const std::size_t i = rem % g.n;
      rem /= g.n;
      const double xi = two_pi * static_cast<double>(Grid::wavenumber(i, g.n)) / g.length[d];
      xi2_outer += xi * xi;
    }
    const int last = g.dim - 1;
    for (std::size_t j = 0; j < nh; ++j) {
      const double xi = two_pi * static_cast<double>(j) / g.length[last];
      const bool self_conjugate = (j == 0) || (g.n % 2 == 0 && j == g.n / 2);
      fn(o * nh + j, xi2_outer + xi * xi, self_conjugate ? 1.0 : 2.0);
    }
  }
}

inline void real_forward(const Field& u, ComplexBuffer& out) {
  const Grid& g = u.grid();
  RealBuffer in(g.size());
  std::copy(u.values().begin(), u.values().end(), in.data());
  fftw_plan plan = PlanCache::instance().get(FftKind::real_to_complex, g.dim, static_cast<int>(g.n));
  fftw_execute_dft_r2c(plan, in.data(), as_fftw(out.data()));
}

/// Overwrites `in` (c2r destroys its input). Result is unnormalized.
inline Field real_backward(const Grid& g, ComplexBuffer& in) {
  RealBuffer out(g.size());
  fftw_plan plan = PlanCache::instance().get(FftKind::complex_to_real, g.dim, static_cast<int>(g.n));
  fftw_execute_dft_c2r(plan, as_fftw(in.data()), out.data());
  const double scale = 1.0 / static_cast<double>(g.size());
  std::vector<double> values(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) values[i] = out[i] * scale;
  return Field(g, std::move(values));
}

}  // namespace detail

inline Spectrum transform(const Field& u) {
  const Grid& g = u.grid();
  detail::ComplexBuffer in(g.size()), out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) in[i] = u[i];
  fftw_plan plan = detail::PlanCache::instance().get(detail::FftKind::forward, g.dim, static_cast<int>(g.n));
  fftw_execute_dft(plan, detail::as_fftw(in.data()), detail::as_fftw(out.data()));
  Spectrum s{g, std::vector<std::complex<double>>(g.size())};
  const double h = g.cell_volume();
  for (std::size_t i = 0; i < g.size(); ++i) s.coefficients[i] = out[i] * (h * detail::origin_phase(g, i));
  return s;
}

inline Field inverse_transform(const Spectrum& s) {
  const Grid& g = s.grid;
  if (s.coefficients.size() != g.size()) throw grid_mismatch("spectrum size does not match its grid");
  detail::ComplexBuffer in(g.size()), out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) in[i] = s.coefficients[i] * detail::origin_phase(g, i);
  fftw_plan plan = detail::PlanCache::instance().get(detail::FftKind::backward, g.dim, static_cast<int>(g.n));
  fftw_execute_dft(plan, detail::as_fftw(in.data()), detail::as_fftw(out.data()));
  const double scale = 1.0 / g.volume();
  std::vector<double> values(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) values[i] = out[i].real() * scale;
  return Field(g, std::move(values));
}

/// Multiplies the spectrum by symbol(|xi|^2). The symbol must be real.
template <class Symbol>
Field apply_radial_symbol(const Field& u, Symbol&& symbol) {
  const Grid& g = u.grid();
  detail::ComplexBuffer spec(g.half_size());
  detail::real_forward(u, spec);
  detail::for_each_half_mode(g, [&](std::size_t i, double xi2, double) { spec[i] *= symbol(xi2); });
  return detail::real_backward(g, spec);
}

/// (I - Delta)^s u, i.e. the multiplier (1+|xi|^2)^s.
inline Field apply_multiplier(const Field& u, double s) {
  if (!std::isfinite(s)) throw std::invalid_argument("multiplier exponent must be finite");
  if (s == 0.0) return u;
  return apply_radial_symbol(u, [s](double xi2) { return std::pow(1.0 + xi2, s); });
}

/// d^order u / dx_axis^order by spectral differentiation; the Nyquist mode is
/// dropped for odd orders so the result stays real.
inline Field spectral_derivative(const Field& u, int axis, int order = 1) {
  const Grid& g = u.grid();
  if (axis < 0 || axis >= g.dim) throw std::invalid_argument("derivative axis out of range");
  if (order < 0) throw std::invalid_argument("derivative order must be non-negative");
  if (order == 0) return u;
  detail::ComplexBuffer spec(g.half_size());
  detail::real_forward(u, spec);
  const std::size_t nh = g.n / 2 + 1;
  const std::complex<double> i_unit(0.0, 1.0);
  for (std::size_t flat = 0; flat < g.half_size(); ++flat) {
    // recover the index along `axis` in the half layout
    std::size_t idx;
    if (axis == g.dim - 1) {
      idx = flat % nh;
    } else {
      std::size_t rem = flat / nh;
      for (int d = g.dim - 2; d > axis; --d) rem /= g.n;
      idx = rem % g.n;
    }
    const long k = (axis == g.dim - 1) ? static_cast<long>(idx) : Grid::wavenumber(idx, g.n);
    const bool nyquist = (g.n % 2 == 0) && (static_cast<std::size_t>(std::labs(k)) == g.n / 2);
    if (nyquist && order % 2 == 1) {
      spec[flat] = 0.0;
      continue;
    }
    const double xi = 2.0 * std::numbers::pi * static_cast<double>(k) / g.length[axis];
    spec[flat] *= std::pow(i_unit * xi, order);
  }
  return detail::real_backward(g, spec);
}

/// L^2 inner product by the rectangle rule.
inline double inner(const Field& a, const Field& b) {
  a.check_same(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * a.grid().cell_volume();
}

/// <(I-Delta)^{alpha/2} a, (I-Delta)^{alpha/2} b>_{L^2} via the spectral sum.
inline double bessel_inner(const Field& a, const Field& b, double alpha) {
  a.check_same(b);
  const Grid& g = a.grid();
  detail::ComplexBuffer sa(g.half_size()), sb(g.half_size());
  detail::real_forward(a, sa);
  detail::real_forward(b, sb);
  double total = 0.0;
  detail::for_each_half_mode(g, [&](std::size_t i, double xi2, double weight) {
    total += weight * std::pow(1.0 + xi2, alpha) * (sa[i] * std::conj(sb[i])).real();
  });
  return total * g.cell_volume() / static_cast<double>(g.size());
}

/// ||(I-Delta)^{alpha/2} u||_2^2 over the box.
inline double bessel_norm_sq(const Field& u, double alpha) {
  if (!u.is_finite()) throw std::invalid_argument("bessel_norm_sq: non-finite field");
  return bessel_inner(u, u, alpha);
}

/// ||u||_lambda^2 = ||u||_{alpha,2}^2 + lambda * int V u^2.
inline double weighted_norm_sq(const Field& u, const Field& potential, double lambda, double alpha) {
  u.check_same(potential);
  if (!(lambda > 0.0)) throw std::invalid_argument("weighted norm needs lambda > 0");
  double weighted = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (potential[i] < 0.0)
      throw std::invalid_argument("weighted norm needs a non-negative potential (negative sample at index " +
                                  std::to_string(i) + ")");
    weighted += potential[i] * u[i] * u[i];
  }
  return bessel_norm_sq(u, alpha) + lambda * weighted * u.grid().cell_volume();
}

/// (sum |u|^r h^d)^{1/r}; r = +inf gives the max norm.
inline double lp_norm(const Field& u, double r) {
  if (!(r >= 1.0)) throw std::invalid_argument("lp_norm needs r >= 1");
  if (std::isinf(r)) {
    double m = 0.0;
    for (double v : u.values()) m = std::max(m, std::abs(v));
    return m;
  }
  double s = 0.0;
  if (r == 2.0) {
    for (double v : u.values()) s += v * v;
    return std::sqrt(s * u.grid().cell_volume());
  }
  for (double v : u.values()) s += std::pow(std::abs(v), r);
  return std::pow(s * u.grid().cell_volume(), 1.0 / r);
}

inline double max_abs(const Field& u) { return lp_norm(u, std::numeric_limits<double>::infinity()); }

/// Critical Sobolev exponent 2N/(N-2alpha); +inf when N <= 2 alpha.
inline double critical_exponent(int dim, double alpha) {
  const double n = static_cast<double>(dim);
  if (n <= 2.0 * alpha) return std::numeric_limits<double>::infinity();
  return 2.0 * n / (n - 2.0 * alpha);
}

/// u(x - shift * e_axis) by a spectral phase shift (exact for band-limited u).
inline Field translate(const Field& u, double shift, int axis = 0) {
  Spectrum s = transform(u);
  const Grid& g = u.grid();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto idx = g.multi_index(i);
    const long k = Grid::wavenumber(idx[axis], g.n);
    if (g.n % 2 == 0 && static_cast<std::size_t>(std::labs(k)) == g.n / 2) {
      s.coefficients[i] *= std::cos(g.frequency(axis, idx[axis]) * shift);
      continue;
    }
    s.coefficients[i] *= std::polar(1.0, -g.frequency(axis, idx[axis]) * shift);
  }
  return inverse_transform(s);
}

/// Band-limited Gaussian random field: i.i.d. normal coefficients on every mode
/// with |k_axis| <= band_modes, zero elsewhere. Each coefficient is drawn from
/// a stream keyed by its wavenumbers, so the same seed yields the same
/// continuous field on any grid that resolves the band. Normalized to unit
/// L^2 norm.
inline Field random_field(const Grid& g, const CounterRng& rng, std::size_t band_modes) {
  Spectrum s{g, std::vector<std::complex<double>>(g.size())};
  const long band = static_cast<long>(band_modes);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto idx = g.multi_index(i);
    std::array<long, 3> k{0, 0, 0};
    bool inside = true;
    for (int d = 0; d < g.dim; ++d) {
      k[d] = Grid::wavenumber(idx[d], g.n);
      if (std::labs(k[d]) > band || (g.n % 2 == 0 && static_cast<std::size_t>(std::labs(k[d])) == g.n / 2))
        inside = false;
    }
    if (!inside) continue;
    CounterRng mode = rng.split({k[0], k[1], k[2]});
    const double re = mode.normal();
    const double im = mode.normal();
    s.coefficients[i] = {re, im};
  }
  // Hermitian part so the field is real; the real part of the inverse
  // transform is exactly that projection.
  Field f = inverse_transform(s);
  const double norm = lp_norm(f, 2.0);
  if (norm > 0.0) f *= 1.0 / norm;
  return f;
}

/// Trigonometric interpolant of a 1-D periodic field, evaluable anywhere.
class TrigInterpolant {
public:
  explicit TrigInterpolant(const Field& u) : grid_(u.grid()) {
    if (grid_.dim != 1) throw std::invalid_argument("TrigInterpolant supports dim = 1 only");
    const std::size_t n = grid_.n;
    detail::ComplexBuffer spec(grid_.half_size());
    detail::real_forward(u, spec);
    coeffs_.resize(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
      double w = (k == 0 || (n % 2 == 0 && k == n / 2)) ? 1.0 : 2.0;
      coeffs_[k] = spec[k] * (w / static_cast<double>(n));
    }
  }

  /// Value at x (periodic extension of the box).
  double operator()(double x) const {
    const double theta = 2.0 * std::numbers::pi * (x - grid_.coordinate(0, 0)) / grid_.length[0];
    const std::complex<double> step = std::polar(1.0, theta);
    std::complex<double> phase(1.0, 0.0);
    double value = 0.0;
    for (std::size_t k = 0; k < coeffs_.size(); ++k) {
      value += (coeffs_[k] * phase).real();
      phase *= step;
    }
    return value;
  }

private:
  Grid grid_;
  std::vector<std::complex<double>> coeffs_;
};

}  // namespace besselmp
