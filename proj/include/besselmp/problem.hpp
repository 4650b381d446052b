#pragma once

// Problem instances of
//   (I-Delta)^alpha u + lambda V(x) u = f(x,u) + mu xi(x) |u|^{p-2} u
// on the periodic box, their energy
//   Phi(u) = 1/2 ||u||_lambda^2 - \int F(x,u) - (mu/p) \int xi |u|^p
// with ||u||_lambda^2 = ||u||_{alpha,2}^2 + lambda \int V u^2, and its
// L^2 gradient (the strong-form residual).

#include "besselmp/grid_spectral.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace besselmp {

using Point = std::array<double, 3>;

inline double radius(const Point& x, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += x[d] * x[d];
  return std::sqrt(s);
}

/// f(u) = |u|^{q-2} u, F(u) = |u|^q / q; satisfies the growth conditions with
/// theta = q.
struct PowerNonlinearity {
  double q = 4.0;
};

/// User-supplied f(x,u) and its antiderivative F(x,u) with declared exponents.
/// Must be thread-safe.
struct CustomNonlinearity {
  std::function<double(const Point&, double)> f;
  std::function<double(const Point&, double)> F;
  double q = 4.0;
  double theta = 4.0;
  std::string name = "custom";
};

using Nonlinearity = std::variant<PowerNonlinearity, CustomNonlinearity>;

/// V(x) = 1 + |x|^2.
struct CoercivePotential {};

/// V = 0 on |x| <= r0, V = M min(1, ((|x|-r0)/w)^2) outside.
struct WellPotential {
  double r0 = 1.0;
  double M = 50.0;
  double w = 1.0;
};

struct ConstantPotential {
  double value = 1.0;
};

struct CustomPotential {
  std::function<double(const Point&)> V;
  std::string name = "custom";
};

using Potential = std::variant<CoercivePotential, WellPotential, ConstantPotential, CustomPotential>;

/// xi(x) = exp(-|x|^2).
struct GaussianWeight {};

struct CustomWeight {
  std::function<double(const Point&)> xi;
  std::string name = "custom";
};

using Weight = std::variant<GaussianWeight, CustomWeight>;

inline double evaluate(const Potential& V, const Point& x, int dim) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, CoercivePotential>) {
          const double r = radius(x, dim);
          return 1.0 + r * r;
        } else if constexpr (std::is_same_v<T, WellPotential>) {
          const double r = radius(x, dim);
          if (r <= v.r0) return 0.0;
          const double s = (r - v.r0) / v.w;
          return v.M * std::min(1.0, s * s);
        } else if constexpr (std::is_same_v<T, ConstantPotential>) {
          return v.value;
        } else {
          return v.V(x);
        }
      },
      V);
}

inline double evaluate(const Weight& xi, const Point& x, int dim) {
  return std::visit(
      [&](const auto& w) -> double {
        using T = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<T, GaussianWeight>) {
          const double r = radius(x, dim);
          return std::exp(-r * r);
        } else {
          return w.xi(x);
        }
      },
      xi);
}

inline std::string describe(const Potential& V) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, CoercivePotential>) return "coercive";
        else if constexpr (std::is_same_v<T, WellPotential>) return "well";
        else if constexpr (std::is_same_v<T, ConstantPotential>) return "constant";
        else return v.name;
      },
      V);
}

class invalid_spec : public std::invalid_argument {
public:
  invalid_spec(const std::vector<std::string>& errors) : std::invalid_argument(join(errors)), errors_(errors) {}
  const std::vector<std::string>& errors() const { return errors_; }

private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string s = "invalid problem specification:";
    for (const auto& e : errors) s += "\n  " + e;
    return s;
  }
  std::vector<std::string> errors_;
};

class non_finite_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ProblemParams {
  double alpha = 0.75;
  double lambda = 1.0;
  double mu = 0.01;
  double p = 1.5;
  Nonlinearity nonlinearity = PowerNonlinearity{4.0};
  Potential potential = CoercivePotential{};
  Weight weight = GaussianWeight{};
  /// Reject custom nonlinearities that fail the sampled growth and sign
  /// conditions. Off only for deliberately degenerate test problems.
  bool check_custom_nonlinearity = true;
};

class ProblemSpec;
std::vector<std::string> check_nonlinearity_samples(const ProblemSpec& spec);

/// Validated, immutable problem instance with V and xi sampled on the grid.
class ProblemSpec {
public:
  ProblemSpec(const Grid& grid, ProblemParams params) : grid_(grid), params_(std::move(params)) {
    std::vector<std::string> errors;
    const double a = params_.alpha;
    if (!(a > 0.0 && a < 1.0)) errors.push_back("alpha must lie in (0,1)");
    if (!(params_.lambda > 0.0) || !std::isfinite(params_.lambda)) errors.push_back("lambda must be > 0");
    if (!(params_.mu >= 0.0) || !std::isfinite(params_.mu)) errors.push_back("mu must be >= 0");
    if (!(params_.p > 1.0 && params_.p < 2.0)) errors.push_back("p must satisfy 1 < p < 2");
    const double qv = q(), th = theta();
    if (!(qv > 2.0)) errors.push_back("q must be > 2");
    if (a > 0.0 && a < 1.0 && qv >= critical_exponent(grid.dim, a))
      errors.push_back("q must be below the critical exponent 2N/(N-2 alpha) = " +
                       std::to_string(critical_exponent(grid.dim, a)));
    if (!(th > 2.0)) errors.push_back("theta must be > 2");
    if (auto* w = std::get_if<WellPotential>(&params_.potential)) {
      if (!(w->r0 > 0.0) || !(w->M > 0.0) || !(w->w > 0.0)) errors.push_back("well needs r0, M, w > 0");
    }
    if (auto* c = std::get_if<CustomNonlinearity>(&params_.nonlinearity)) {
      if (!c->f || !c->F) errors.push_back("custom nonlinearity needs both f and F");
    }
    if (auto* c = std::get_if<CustomPotential>(&params_.potential); c && !c->V)
      errors.push_back("custom potential needs a callable");
    if (auto* c = std::get_if<CustomWeight>(&params_.weight); c && !c->xi)
      errors.push_back("custom weight needs a callable");
    if (!errors.empty()) throw invalid_spec(errors);

    V_ = Field(grid_);
    xi_ = Field(grid_);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const Point x = grid_.point(i);
      V_[i] = evaluate(params_.potential, x, grid_.dim);
      xi_[i] = evaluate(params_.weight, x, grid_.dim);
    }
    if (!V_.is_finite()) errors.push_back("potential is not finite on the grid");
    if (*std::min_element(V_.data().begin(), V_.data().end()) < 0.0)
      errors.push_back("potential must be nonnegative");
    if (!xi_.is_finite() || *std::min_element(xi_.data().begin(), xi_.data().end()) < 0.0)
      errors.push_back("weight xi must be nonnegative and finite");
    if (std::holds_alternative<CustomNonlinearity>(params_.nonlinearity) && params_.check_custom_nonlinearity) {
      auto more = check_nonlinearity_samples(*this);
      errors.insert(errors.end(), more.begin(), more.end());
    }
    if (!errors.empty()) throw invalid_spec(errors);
  }

  const Grid& grid() const { return grid_; }
  const ProblemParams& params() const { return params_; }
  double alpha() const { return params_.alpha; }
  double lambda() const { return params_.lambda; }
  double mu() const { return params_.mu; }
  double p() const { return params_.p; }
  double q() const {
    if (auto* c = std::get_if<CustomNonlinearity>(&params_.nonlinearity)) return c->q;
    return std::get<PowerNonlinearity>(params_.nonlinearity).q;
  }
  double theta() const {
    if (auto* c = std::get_if<CustomNonlinearity>(&params_.nonlinearity)) return c->theta;
    return q();
  }
  const Field& potential() const { return V_; }
  const Field& xi_weight() const { return xi_; }

  double f(const Point& x, double u) const {
    if (auto* c = std::get_if<CustomNonlinearity>(&params_.nonlinearity)) return c->f(x, u);
    return std::pow(std::abs(u), q() - 2.0) * u;
  }
  double F(const Point& x, double u) const {
    if (auto* c = std::get_if<CustomNonlinearity>(&params_.nonlinearity)) return c->F(x, u);
    return std::pow(std::abs(u), q()) / q();
  }
  bool autonomous() const { return std::holds_alternative<PowerNonlinearity>(params_.nonlinearity); }

  ProblemSpec with_lambda(double lambda) const {
    ProblemParams p = params_;
    p.lambda = lambda;
    return ProblemSpec(grid_, p);
  }
  ProblemSpec with_mu(double mu) const {
    ProblemParams p = params_;
    p.mu = mu;
    return ProblemSpec(grid_, p);
  }
  ProblemSpec on_grid(const Grid& g) const { return ProblemSpec(g, params_); }

private:
  Grid grid_;
  ProblemParams params_;
  Field V_, xi_;
};

/// d=1, alpha=0.75, q=4, p=1.5, lambda=1, mu=0.01, V=1+x^2, xi=e^{-x^2},
/// n=256, L=40.
inline ProblemSpec canonical_coercive_spec(std::size_t n = 256, double box = 40.0) {
  return ProblemSpec(make_grid(1, n, box), ProblemParams{});
}

/// d=1, alpha=0.75, q=4, p=1.5, well r0=1, M=50, w=1, lambda=100, mu=0.05.
inline ProblemSpec canonical_well_spec(std::size_t n = 256, double box = 20.0) {
  ProblemParams p;
  p.lambda = 100.0;
  p.mu = 0.05;
  p.potential = WellPotential{};
  return ProblemSpec(make_grid(1, n, box), p);
}

inline double eval_f(const ProblemSpec& spec, double u) { return spec.f(Point{}, u); }
inline double eval_F(const ProblemSpec& spec, double u) { return spec.F(Point{}, u); }
inline double eval_f(const ProblemSpec& spec, const Point& x, double u) { return spec.f(x, u); }
inline double eval_F(const ProblemSpec& spec, const Point& x, double u) { return spec.F(x, u); }

/// 1/2 u f(x,u) - F(x,u).
inline double eval_scrF(const ProblemSpec& spec, const Point& x, double u) {
  return 0.5 * u * spec.f(x, u) - spec.F(x, u);
}
inline double eval_scrF(const ProblemSpec& spec, double u) { return eval_scrF(spec, Point{}, u); }

/// |u|^{p-2} u, extended by 0 at u = 0.
inline double signed_power(double u, double p) {
  if (u == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(u), p - 1.0), u);
}

inline double lambda_norm_sq(const ProblemSpec& spec, const Field& u) {
  return weighted_norm_sq(u, spec.potential(), spec.lambda(), spec.alpha());
}
inline double lambda_norm(const ProblemSpec& spec, const Field& u) { return std::sqrt(lambda_norm_sq(spec, u)); }

struct EnergyBreakdown {
  double quad = 0.0;
  double f_term = 0.0;
  double xi_term = 0.0;
  double total = 0.0;
};

inline EnergyBreakdown energy(const ProblemSpec& spec, const Field& u) {
  const Grid& g = spec.grid();
  if (!(u.grid() == g)) throw grid_mismatch("energy: field is not on the problem grid");
  EnergyBreakdown e;
  e.quad = 0.5 * lambda_norm_sq(spec, u);
  const Field& xi = spec.xi_weight();
  double fs = 0.0, xs = 0.0;
  const double p = spec.p();
  for (std::size_t i = 0; i < u.size(); ++i) {
    fs += spec.autonomous() ? spec.F(Point{}, u[i]) : spec.F(g.point(i), u[i]);
    xs += xi[i] * std::pow(std::abs(u[i]), p);
  }
  e.f_term = fs * g.cell_volume();
  e.xi_term = spec.mu() / p * xs * g.cell_volume();
  e.total = e.quad - e.f_term - e.xi_term;
  if (!std::isfinite(e.quad) || !std::isfinite(e.f_term) || !std::isfinite(e.xi_term) || !std::isfinite(e.total)) {
    std::ostringstream msg;
    msg << "energy: non-finite value (quad=" << e.quad << ", f_term=" << e.f_term << ", xi_term=" << e.xi_term << ")";
    throw non_finite_error(msg.str());
  }
  return e;
}

/// r(u) = (I-Delta)^alpha u + lambda V u - f(x,u) - mu xi |u|^{p-2} u, the L^2
/// representative of DPhi(u): DPhi(u)[v] = <r(u), v> on the grid.
inline Field residual(const ProblemSpec& spec, const Field& u) {
  const Grid& g = spec.grid();
  if (!(u.grid() == g)) throw grid_mismatch("residual: field is not on the problem grid");
  Field r = apply_multiplier(u, spec.alpha());
  const Field& V = spec.potential();
  const Field& xi = spec.xi_weight();
  const double lambda = spec.lambda(), mu = spec.mu(), p = spec.p();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double fu = spec.autonomous() ? spec.f(Point{}, u[i]) : spec.f(g.point(i), u[i]);
    r[i] += lambda * V[i] * u[i] - fu - mu * xi[i] * signed_power(u[i], p);
  }
  return r;
}

inline double residual_norm(const ProblemSpec& spec, const Field& u) { return lp_norm(residual(spec, u), 2.0); }

/// (I-Delta)^{-alpha} r(u).
inline Field precond_gradient(const ProblemSpec& spec, const Field& u) {
  return apply_multiplier(residual(spec, u), -spec.alpha());
}

/// \int_{B(y,1)} dx / V(x) by Gauss-Kronrod (d=1) or Gauss-Legendre in
/// polar/spherical coordinates. +inf when V vanishes at a node.
inline double ball_integral_inverse(const Potential& V, int dim, const Point& center) {
  bool vanished = false;
  auto inv = [&](const Point& x) {
    const double v = evaluate(V, x, dim);
    if (!(v > 0.0)) {
      vanished = true;
      return 0.0;
    }
    return 1.0 / v;
  };
  double result = 0.0;
  if (dim == 1) {
    // split at the center and at +-1 around it so kinks of piecewise V are resolved
    auto f = [&](double s) { return inv(Point{center[0] + s, 0.0, 0.0}); };
    using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
    result = gk::integrate(f, -1.0, 0.0, 12, 1e-10) + gk::integrate(f, 0.0, 1.0, 12, 1e-10);
  } else {
    using rule = boost::math::quadrature::gauss<double, 30>;
    std::vector<double> nodes, weights;
    for (std::size_t k = 0; k < rule::abscissa().size(); ++k) {
      nodes.push_back(rule::abscissa()[k]);
      weights.push_back(rule::weights()[k]);
      if (rule::abscissa()[k] != 0.0) {
        nodes.push_back(-rule::abscissa()[k]);
        weights.push_back(rule::weights()[k]);
      }
    }
    constexpr int angles = 64;
    const double pi = std::numbers::pi;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const double r = 0.5 * (nodes[a] + 1.0);
      const double wr = 0.5 * weights[a];
      if (dim == 2) {
        for (int k = 0; k < angles; ++k) {
          const double th = 2.0 * pi * k / angles;
          result += wr * r * (2.0 * pi / angles) *
                    inv(Point{center[0] + r * std::cos(th), center[1] + r * std::sin(th), 0.0});
        }
      } else {
        for (std::size_t b = 0; b < nodes.size(); ++b) {
          const double c = nodes[b], s = std::sqrt(1.0 - c * c);
          for (int k = 0; k < angles; ++k) {
            const double ph = 2.0 * pi * k / angles;
            result += wr * r * r * weights[b] * (2.0 * pi / angles) *
                      inv(Point{center[0] + r * s * std::cos(ph), center[1] + r * s * std::sin(ph), center[2] + r * c});
          }
        }
      }
    }
  }
  return vanished ? std::numeric_limits<double>::infinity() : result;
}

/// Grid measure of {x : V(x) < b}.
inline double sublevel_measure(const Field& V, double b) {
  std::size_t count = 0;
  for (double v : V.values())
    if (v < b) ++count;
  return static_cast<double>(count) * V.grid().cell_volume();
}

struct AssumptionCheck {
  std::string name;
  bool pass = false;
  bool advisory = false;
  std::string detail;
  std::vector<double> witnesses;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;

  const AssumptionCheck& at(std::string_view name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw std::out_of_range("no assumption check named " + std::string(name));
  }
  bool passed(std::string_view name) const { return at(name).pass; }
};

namespace detail {

inline std::vector<double> magnitude_ladder(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t k = 0; k < count; ++k) out[k] = std::exp(a + (b - a) * k / (count - 1));
  return out;
}

inline std::vector<Point> sample_points(const Grid& g, std::size_t count) {
  std::vector<Point> pts;
  const std::size_t stride = std::max<std::size_t>(1, g.size() / std::max<std::size_t>(1, count));
  for (std::size_t i = 0; i < g.size() && pts.size() < count; i += stride) pts.push_back(g.point(i));
  return pts;
}

inline AssumptionCheck check_growth(const ProblemSpec& spec, const std::vector<Point>& xs, std::size_t samples) {
  AssumptionCheck c{"f1"};
  const auto ladder = magnitude_ladder(1e-6, 1e6, samples);
  const double q = spec.q();
  double worst = 0.0;
  auto ratio = [&](const Point& x, double u) { return std::abs(spec.f(x, u)) / (1.0 + std::pow(std::abs(u), q - 1.0)); };
  bool finite = true;
  for (const auto& x : xs)
    for (double u : ladder)
      for (double s : {-1.0, 1.0}) {
        const double r = ratio(x, s * u);
        if (!std::isfinite(r)) finite = false;
        worst = std::max(worst, r);
      }
  // growth faster than |u|^{q-1} shows up as a ratio still rising at the top
  const double top = ladder.back();
  double rise = 0.0;
  for (const auto& x : xs) rise = std::max(rise, ratio(x, top) / std::max(ratio(x, top / 10.0), 1e-300));
  c.pass = finite && rise < 1.5;
  c.witnesses = {worst, rise};
  c.detail = "c estimate " + std::to_string(worst) + ", top-decade ratio growth " + std::to_string(rise);
  return c;
}

inline AssumptionCheck check_small_u(const ProblemSpec& spec, const std::vector<Point>& xs) {
  AssumptionCheck c{"f2"};
  c.pass = true;
  double worst_tail = 0.0;
  for (const auto& x : xs)
    for (double s : {-1.0, 1.0}) {
      double previous = std::numeric_limits<double>::infinity();
      double first = 0.0, last = 0.0;
      for (int k = 1; k <= 8; ++k) {
        const double u = s * std::pow(10.0, -k);
        const double r = std::abs(spec.f(x, u) / u);
        if (k == 1) first = r;
        last = r;
        if (!(r <= previous)) c.pass = false;
        previous = r;
      }
      if (!(last < 0.5 * first) && last > 0.0) c.pass = false;
      worst_tail = std::max(worst_tail, last);
      if (!c.pass && c.witnesses.empty()) c.witnesses = {x[0], s};
    }
  c.detail = "|f(u)/u| at |u|=1e-8: " + std::to_string(worst_tail);
  return c;
}

inline AssumptionCheck check_ambrosetti_rabinowitz(const ProblemSpec& spec, const std::vector<Point>& xs,
                                                   std::size_t samples) {
  AssumptionCheck c{"f3"};
  c.pass = true;
  const double theta = spec.theta();
  for (const auto& x : xs)
    for (double u : magnitude_ladder(1e-4, 1e4, samples))
      for (double s : {-1.0, 1.0}) {
        const double v = s * u;
        const double F = spec.F(x, v), uf = v * spec.f(x, v);
        const bool ok = F > 0.0 && theta * F <= uf * (1.0 + 1e-12);
        if (!ok) {
          c.pass = false;
          if (c.witnesses.size() < 8) c.witnesses.insert(c.witnesses.end(), {x[0], v});
        }
      }
  c.detail = c.pass ? "0 < theta F <= u f on all samples" : "violated at (x, u) witnesses";
  return c;
}

}  // namespace detail

/// Sampled checks of the structural assumptions. Each entry names one
/// condition: f1 (growth), f2 (f = o(u) at 0), f3 (0 < theta F <= u f),
/// V1 (inf V > 0), V2 (ball integrals of 1/V decay), V3 (V >= 0), V4 (some
/// sublevel set has finite measure), V5 (zero set has nonempty interior,
/// advisory), xi (xi > 0, xi in L^{2/(2-p)}).
inline ValidationReport validate_assumptions(const ProblemSpec& spec, std::size_t samples = 100) {
  if (samples < 100) throw std::invalid_argument("validate_assumptions needs at least 100 samples per check");
  const Grid& g = spec.grid();
  const auto xs = spec.autonomous() ? std::vector<Point>{Point{}} : detail::sample_points(g, 16);
  ValidationReport report;
  report.checks.push_back(detail::check_growth(spec, xs, samples));
  report.checks.push_back(detail::check_small_u(spec, xs));
  report.checks.push_back(detail::check_ambrosetti_rabinowitz(spec, xs, samples));

  const Field& V = spec.potential();
  const auto [vmin_it, vmax_it] = std::minmax_element(V.data().begin(), V.data().end());
  const double vmin = *vmin_it, vmax = *vmax_it;
  {
    AssumptionCheck c{"V1"};
    c.pass = vmin > 0.0;
    c.witnesses = {vmin};
    const std::size_t at = static_cast<std::size_t>(vmin_it - V.data().begin());
    if (!c.pass) c.witnesses.push_back(g.point(at)[0]);
    c.detail = "min V on grid = " + std::to_string(vmin);
    report.checks.push_back(c);
  }
  {
    AssumptionCheck c{"V2"};
    const double half = 0.5 * g.length[0];
    const double reach = std::max(0.0, half - 1.0);
    const std::size_t rungs = std::max<std::size_t>(samples / 10, 10);
    std::vector<double> ladder;
    for (std::size_t k = 0; k < rungs; ++k) {
      const double r = reach * k / (rungs - 1);
      ladder.push_back(ball_integral_inverse(spec.params().potential, g.dim, Point{r, 0.0, 0.0}));
    }
    bool finite = std::all_of(ladder.begin(), ladder.end(), [](double v) { return std::isfinite(v); });
    bool tail_decreasing = true;
    for (std::size_t k = ladder.size() / 2 + 1; k < ladder.size(); ++k)
      if (ladder[k] > ladder[k - 1] * (1.0 + 1e-9)) tail_decreasing = false;
    c.pass = finite && tail_decreasing && ladder.back() < 0.1 * ladder.front();
    c.witnesses = ladder;
    c.detail = finite ? "ball integrals of 1/V from |y|=0 to |y|=" + std::to_string(reach)
                      : "1/V not integrable (V vanishes)";
    report.checks.push_back(c);
  }
  {
    AssumptionCheck c{"V3"};
    c.pass = vmin >= 0.0;
    c.witnesses = {vmin};
    c.detail = "min V on grid = " + std::to_string(vmin);
    report.checks.push_back(c);
  }
  {
    // a sublevel set that stays clear of the box boundary has finite measure
    // in the whole space, assuming V keeps growing or stays flat outside
    AssumptionCheck c{"V4"};
    auto boundary_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto idx = g.multi_index(i);
      bool edge = false;
      for (int d = 0; d < g.dim; ++d) edge = edge || idx[d] == 0 || idx[d] == g.n - 1;
      if (edge) boundary_min = std::min(boundary_min, V[i]);
    }
    c.pass = boundary_min > 0.0;
    if (c.pass) {
      const double b = 0.5 * boundary_min;
      c.witnesses = {b, sublevel_measure(V, b)};
      c.detail = "V^b with b=" + std::to_string(b) + " has measure " + std::to_string(c.witnesses[1]);
    } else {
      c.detail = "V vanishes on the box boundary";
    }
    report.checks.push_back(c);
  }
  {
    AssumptionCheck c{"V5"};
    c.advisory = true;
    const double zero_tol = 1e-14 * std::max(1.0, vmax);
    std::vector<int> label(g.size(), -1);
    int components = 0;
    bool touches_boundary = false;
    std::size_t interior_cells = 0;
    for (std::size_t s = 0; s < g.size(); ++s) {
      if (V[s] > zero_tol || label[s] >= 0) continue;
      std::vector<std::size_t> stack{s};
      label[s] = components;
      while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        ++interior_cells;
        auto idx = g.multi_index(i);
        for (int d = 0; d < g.dim; ++d) {
          if (idx[d] == 0 || idx[d] == g.n - 1) touches_boundary = true;
          for (int step : {-1, 1}) {
            auto nb = idx;
            nb[d] = (idx[d] + g.n + step) % g.n;
            const std::size_t j = g.flat_index(nb);
            if (V[j] <= zero_tol && label[j] < 0) {
              label[j] = components;
              stack.push_back(j);
            }
          }
        }
      }
      ++components;
    }
    c.pass = components > 0 && !touches_boundary && interior_cells >= static_cast<std::size_t>(3 * components);
    c.witnesses = {static_cast<double>(components), static_cast<double>(interior_cells) * g.cell_volume()};
    c.detail = std::to_string(components) + " zero-set component(s), measure " + std::to_string(c.witnesses[1]) +
               "; boundary smoothness not certified";
    report.checks.push_back(c);
  }
  {
    AssumptionCheck c{"xi"};
    const Field& xi = spec.xi_weight();
    const double r = 2.0 / (2.0 - spec.p());
    double total = 0.0, outer = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = std::pow(xi[i], r);
      total += v;
      const auto pt = g.point(i);
      bool far = false;
      for (int d = 0; d < g.dim; ++d) far = far || std::abs(pt[d]) > 0.4 * g.length[d];
      if (far) outer += v;
    }
    total *= g.cell_volume();
    outer *= g.cell_volume();
    // positivity is sampled off-grid too: far grid values may underflow to 0
    bool positive = true;
    for (const auto& x : detail::sample_points(g, samples))
      if (!(evaluate(spec.params().weight, x, g.dim) > 0.0) && radius(x, g.dim) < 10.0) positive = false;
    c.pass = positive && std::isfinite(total) && outer <= 1e-6 * total;
    c.witnesses = {std::pow(total, 1.0 / r), outer};
    c.detail = "||xi||_{L^" + std::to_string(r) + "} = " + std::to_string(c.witnesses[0]) +
               ", mass in the outer 10% of the box " + std::to_string(outer);
    report.checks.push_back(c);
  }
  return report;
}

inline std::vector<std::string> check_nonlinearity_samples(const ProblemSpec& spec) {
  std::vector<std::string> errors;
  const auto xs = detail::sample_points(spec.grid(), 8);
  for (const auto& x : xs)
    if (spec.F(x, 0.0) != 0.0) {
      errors.push_back("custom nonlinearity: F(x,0) must be 0");
      break;
    }
  if (!detail::check_growth(spec, xs, 100).pass) errors.push_back("custom nonlinearity fails the growth bound");
  if (!detail::check_small_u(spec, xs).pass) errors.push_back("custom nonlinearity is not o(|u|) at 0");
  if (!detail::check_ambrosetti_rabinowitz(spec, xs, 100).pass)
    errors.push_back("custom nonlinearity violates 0 < theta F <= u f");
  return errors;
}

}  // namespace besselmp
