#pragma once

// Real-space representations of the Bessel operator, used as oracles for the
// spectral multiplier:
//   * the convolution kernel G_a with transform (1+|xi|^2)^{-a/2}, evaluated
//     from its one-dimensional t-integral;
//   * the singular-integral form
//       (I-Delta)^alpha u(x) = c_{N,alpha} P.V. \int (u(x)-u(y)) |x-y|^{-nu}
//                                K_nu(|x-y|) dy + u(x),   nu = (N+2 alpha)/2.
//
// The t-integral is written with exp(-pi |x|^2/t) exp(-t/(4 pi)). Checked
// against a numerical inverse transform of the symbol: in the angular
// convention used by grid_spectral this is already the kernel of
// (1+|xi|^2)^{-a/2}; no rescaling of x is needed.

#include "besselmp/detail/parallel.hpp"
#include "besselmp/grid_spectral.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace besselmp {

class quadrature_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct KernelEval {
  double radius = 0.0;
  double order = 0.0;
  int dim = 1;
  double value = 0.0;
  double est_error = 0.0;
};

/// G_alpha(|x| = radius) in dimension dim by adaptive Gauss-Kronrod on the
/// log-variable s = ln t, centered on the integrand's analytic peak.
inline KernelEval bessel_kernel(double radius, double alpha, int dim, double rel_tol = 1e-9) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("bessel_kernel needs radius > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("bessel_kernel needs alpha > 0");
  if (dim < 1 || dim > 3) throw std::invalid_argument("bessel_kernel supports dim 1..3");

  const double pi = std::numbers::pi;
  const double power = 0.5 * (alpha - dim);  // exponent of t after dt = t ds
  const double a = pi * radius * radius;
  auto log_integrand = [&](double s) { return -a * std::exp(-s) - std::exp(s) / (4.0 * pi) + power * s; };

  // stationary point: E^2 - 2 pi (alpha-N) E - 4 pi^2 r^2 = 0 with E = e^s
  const double am = alpha - dim;
  const double peak_t = pi * (am + std::sqrt(am * am + 4.0 * radius * radius));
  const double s_peak = std::log(peak_t);
  const double log_peak = log_integrand(s_peak);

  constexpr double cutoff = 46.0;  // e^-46 ~ 1e-20 below the peak
  double lo = s_peak, hi = s_peak;
  while (log_integrand(lo) > log_peak - cutoff) lo -= 0.5;
  while (log_integrand(hi) > log_peak - cutoff) hi += 0.5;

  auto scaled = [&](double s) { return std::exp(log_integrand(s) - log_peak); };
  double err = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(scaled, lo, hi, 15, 1e-13, &err);

  const double prefactor = std::exp(log_peak) / (std::pow(4.0 * pi, 0.5 * alpha) * std::tgamma(0.5 * alpha));
  KernelEval out{radius, alpha, dim, integral * prefactor, err * prefactor};
  if (!(out.value > 0.0) || !std::isfinite(out.value))
    throw quadrature_error("bessel_kernel: non-positive or non-finite value at r=" + std::to_string(radius));
  if (out.est_error > rel_tol * out.value)
    throw quadrature_error("bessel_kernel: quadrature did not reach the requested accuracy at r=" +
                           std::to_string(radius));
  return out;
}

/// Modified Bessel function of the second kind K_nu(r).
inline double bessel_K(double nu, double r) {
  if (!(nu >= 0.0)) throw std::invalid_argument("bessel_K needs nu >= 0");
  if (!(r > 0.0)) throw std::invalid_argument("bessel_K needs r > 0");
  return std::cyl_bessel_k(nu, r);
}

struct PointwiseOptions {
  /// Reject fields that are not decayed at the box edge, since the real-line
  /// integral then sees the periodic images.
  bool require_decay = true;
  double decay_tolerance = 1e-6;
};

/// P.V. \int (u(x)-u(y)) k(|x-y|) dy with k(r) = r^{-nu} K_nu(r), d = 1.
///
/// The integral is folded onto r > 0 as \int_0^inf (2u(x)-u(x+r)-u(x-r)) k(r) dr.
/// On (0, h) (one grid cell) the bracket is replaced by its Taylor expansion
/// -u''(x) r^2 - u''''(x) r^4/12, whose moments against k are integrable for
/// alpha < 1. Beyond h each cell [m h, (m+1) h] gets Gauss-Legendre nodes; the
/// field at x_i +- (m h + h t) is read from copies of u translated spectrally by
/// h t, so every node costs one lookup. The sum stops where k drops below
/// double precision.
class SingularIntegral {
public:
  SingularIntegral(const Field& u, double alpha, PointwiseOptions opts = {}) : u_(u), nu_(0.5 + alpha) {
    const Grid& g = u.grid();
    if (g.dim != 1) throw std::invalid_argument("pointwise operator is implemented for dim = 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("pointwise operator needs 0 < alpha < 1");
    const std::size_t n = g.n;
    if (n < 4) throw std::invalid_argument("pointwise operator needs n >= 4");
    if (opts.require_decay) {
      const double peak = max_abs(u);
      const double edge = std::max({std::abs(u[0]), std::abs(u[1]), std::abs(u[n - 1]), std::abs(u[n - 2])});
      if (peak > 0.0 && edge > opts.decay_tolerance * peak)
        throw std::invalid_argument("pointwise operator: field is not decayed at the box edge (wraparound would "
                                    "contaminate the integral)");
    }
    h_ = g.spacing(0);
    d2_ = spectral_derivative(u, 0, 2);
    d4_ = spectral_derivative(u, 0, 4);

    // r^{1-2a} g(r) with g(r) = r^nu K_nu(r) bounded at 0; substitute w = r^{2-2a}.
    const double e = 2.0 - 2.0 * alpha;
    const double g0 = std::pow(2.0, nu_ - 1.0) * std::tgamma(nu_);
    boost::math::quadrature::tanh_sinh<double> endpoint_rule;
    auto moment = [&](int extra_power) {
      auto f = [&, extra_power](double w) {
        const double r = std::pow(w, 1.0 / e);
        const double gr = r < 1e-100 ? g0 : std::pow(r, nu_) * std::cyl_bessel_k(nu_, r);
        return gr * std::pow(r, extra_power) / e;
      };
      return endpoint_rule.integrate(f, 0.0, std::pow(h_, e), 1e-13);
    };
    m2_ = moment(0);
    m4_ = moment(2);

    using rule = boost::math::quadrature::gauss<double, 10>;
    std::vector<double> t, w;
    for (std::size_t q = 0; q < rule::abscissa().size(); ++q) {
      const double a = rule::abscissa()[q], wt = rule::weights()[q];
      t.push_back(0.5 * (1.0 + a));
      w.push_back(0.5 * wt);
      if (a != 0.0) {
        t.push_back(0.5 * (1.0 - a));
        w.push_back(0.5 * wt);
      }
    }
    for (double tq : t) {
      ahead_.push_back(translate(u, -h_ * tq));
      behind_.push_back(translate(u, h_ * tq));
    }
    for (std::size_t m = 1; kernel(m * h_) > 1e-18; ++m) {
      std::vector<double> row(t.size());
      for (std::size_t q = 0; q < t.size(); ++q) row[q] = h_ * w[q] * kernel((m + t[q]) * h_);
      weights_.push_back(std::move(row));
    }
  }

  double kernel(double r) const { return std::pow(r, -nu_) * std::cyl_bessel_k(nu_, r); }

  /// The principal-value integral at grid index i.
  double at(std::size_t i) const {
    const std::size_t n = u_.grid().n;
    const double ux = u_[i];
    double outer = 0.0;
    for (std::size_t m = 1; m <= weights_.size(); ++m) {
      const std::size_t fwd = (i + m) % n;
      const std::size_t back = (i + n - m % n) % n;
      const auto& row = weights_[m - 1];
      double cell = 0.0;
      for (std::size_t q = 0; q < row.size(); ++q) cell += row[q] * (2.0 * ux - ahead_[q][fwd] - behind_[q][back]);
      outer += cell;
    }
    return -d2_[i] * m2_ - d4_[i] * m4_ / 12.0 + outer;
  }

private:
  Field u_;
  double nu_;
  double h_ = 0.0;
  Field d2_, d4_;
  double m2_ = 0.0, m4_ = 0.0;
  std::vector<Field> ahead_, behind_;
  std::vector<std::vector<double>> weights_;
};

/// Least-squares calibration of c_{1,alpha}: match c * PV + u against the
/// spectral (I-Delta)^alpha u on the reference Gaussian e^{-x^2} (n = 256,
/// L = 40) at the points where |u| > 1e-3 max|u|. Cached per alpha.
inline double calibrate_pointwise_constant(double alpha) {
  static std::mutex mutex;
  static std::map<double, double> cache;
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(alpha); it != cache.end()) return it->second;
  }
  const Grid g = make_grid(1, 256, 40.0);
  const Field u = Field::from_function(g, [](auto x) { return std::exp(-x[0] * x[0]); });
  const Field spectral = apply_multiplier(u, alpha);
  const SingularIntegral pv(u, alpha);
  const double peak = max_abs(u);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::abs(u[i]) <= 1e-3 * peak) continue;
    const double I = pv.at(i);
    num += I * (spectral[i] - u[i]);
    den += I * I;
  }
  const double c = num / den;
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(alpha, c);
  return c;
}

/// (I-Delta)^alpha u at grid index i through the singular-integral form, with
/// the calibrated constant. d = 1, 0 < alpha < 1.
inline double pointwise_apply(const Field& u, std::size_t index, double alpha, PointwiseOptions opts = {}) {
  const SingularIntegral pv(u, alpha, opts);
  return calibrate_pointwise_constant(alpha) * pv.at(index) + u[index];
}

/// Same, at every index in `indices`, sharing the per-field setup.
inline std::vector<double> pointwise_apply(const Field& u, const std::vector<std::size_t>& indices, double alpha,
                                           PointwiseOptions opts = {}) {
  const SingularIntegral pv(u, alpha, opts);
  const double c = calibrate_pointwise_constant(alpha);
  std::vector<double> out(indices.size());
  detail::parallel_for(indices.size(), [&](std::size_t k) { out[k] = c * pv.at(indices[k]) + u[indices[k]]; });
  return out;
}

}  // namespace besselmp
