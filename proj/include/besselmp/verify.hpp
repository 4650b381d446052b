#pragma once

// Stand-alone numerical checks of the quantitative estimates behind the
// existence theory, runnable without a solve. Every checker returns a typed
// result plus a JSON record {checker, params, seed, pass, witnesses}.

#include "besselmp/detail/parallel.hpp"
#include "besselmp/problem.hpp"
#include "besselmp/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace besselmp {

struct CheckRecord {
  std::string checker;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  bool pass = false;
  nlohmann::json witnesses = nlohmann::json::array();
  std::string diagnostic;

  nlohmann::json to_json() const {
    nlohmann::json j{{"checker", checker}, {"params", params}, {"seed", seed}, {"pass", pass}, {"witnesses", witnesses}};
    if (!diagnostic.empty()) j["diagnostic"] = diagnostic;
    return j;
  }
};

// ---------------------------------------------------------------------------
// |f(x,u)|^tau / |u|^tau <= scrF(x,u) for large |u|

/// Open interval of admissible tau: (max{1, N/(2 alpha)}, q/(q-2)).
inline std::pair<double, double> tau_window(int dim, double alpha, double q) {
  return {std::max(1.0, dim / (2.0 * alpha)), q / (q - 2.0)};
}

struct SuperquadraticResult {
  double R = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
  CheckRecord record;
};

/// Scans |u| over [u_lo, u_hi] (log-spaced, both signs) at the point x and
/// returns the smallest R such that the inequality holds for every scanned
/// |u| >= R, sharpened by bisection on the last sign change.
inline SuperquadraticResult check_superquadratic_bound(const ProblemSpec& spec, double tau, double u_lo, double u_hi,
                                                       std::size_t points = 20001, Point x = {}) {
  const auto [lo_tau, hi_tau] = tau_window(spec.grid().dim, spec.alpha(), spec.q());
  if (!(tau > lo_tau && tau < hi_tau))
    throw std::invalid_argument("tau = " + std::to_string(tau) + " outside the admissible window (" +
                                std::to_string(lo_tau) + ", " + std::to_string(hi_tau) + ")");
  if (!(u_lo > 0.0 && u_hi > u_lo) || points < 2) throw std::invalid_argument("bad |u| scan range");

  auto holds = [&](double a) {
    for (double u : {a, -a}) {
      const double lhs = std::pow(std::abs(spec.f(x, u)), tau) / std::pow(a, tau);
      if (!(lhs <= eval_scrF(spec, x, u))) return false;
    }
    return true;
  };

  const auto ladder = detail::magnitude_ladder(u_lo, u_hi, points);
  std::size_t first_good = ladder.size();
  for (std::size_t k = ladder.size(); k-- > 0;) {
    if (!holds(ladder[k])) break;
    first_good = k;
  }

  SuperquadraticResult out;
  out.record.checker = "superquadratic_bound";
  out.record.params = {{"tau", tau}, {"u_lo", u_lo}, {"u_hi", u_hi}, {"points", points}, {"q", spec.q()}};
  if (first_good == ladder.size()) {
    out.record.diagnostic = "inequality fails at the top of the scan range; R lies above " + std::to_string(u_hi);
    out.record.witnesses.push_back({{"u", u_hi}, {"holds", false}});
    return out;
  }
  double R = ladder[first_good];
  if (first_good > 0) {
    double bad = ladder[first_good - 1], good = R;
    for (int it = 0; it < 100 && good - bad > 1e-14 * good; ++it) {
      const double mid = 0.5 * (bad + good);
      (holds(mid) ? good : bad) = mid;
    }
    R = good;
    out.record.witnesses.push_back({{"u", bad}, {"holds", false}});
  }
  out.record.witnesses.push_back({{"u", R}, {"holds", true}});
  out.R = R;
  out.pass = true;
  out.record.pass = true;
  return out;
}

// ---------------------------------------------------------------------------
// L^2 mass controlled by the lambda-norm outside the sublevel set V^b

struct MassSplitResult {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  bool pass = false;
  CheckRecord record;
};

/// One instance of  int d^2 <= ||d||_lambda^2 / (lambda b) + int_{V<b} d^2.
struct MassSplitTerms {
  double lhs = 0.0;
  double norm_term = 0.0;
  double sublevel_term = 0.0;
  double slack() const { return norm_term + sublevel_term - lhs; }
};

inline MassSplitTerms mass_split_terms(const ProblemSpec& spec, const Field& d, double b) {
  MassSplitTerms t;
  const Field& V = spec.potential();
  const double h = spec.grid().cell_volume();
  for (std::size_t i = 0; i < d.size(); ++i) {
    t.lhs += d[i] * d[i];
    if (V[i] < b) t.sublevel_term += d[i] * d[i];
  }
  t.lhs *= h;
  t.sublevel_term *= h;
  t.norm_term = lambda_norm_sq(spec, d) / (spec.lambda() * b);
  return t;
}

/// Random band-limited fields of varying amplitude on the spec with the given
/// lambda; b must lie in (0, sup V).
inline MassSplitResult check_mass_split(const ProblemSpec& spec, double lambda, double b, std::size_t trials,
                                        std::uint64_t seed = 1) {
  const ProblemSpec s = spec.with_lambda(lambda);
  const Field& V = s.potential();
  const double vmax = *std::max_element(V.values().begin(), V.values().end());
  if (!(b > 0.0 && b < vmax)) throw std::invalid_argument("b must lie strictly between 0 and the barrier height");
  const Grid& g = s.grid();
  const CounterRng root(seed, 0x3100);
  std::vector<MassSplitTerms> terms(trials);
  detail::parallel_for(trials, [&](std::size_t k) {
    const CounterRng rng = root.split(static_cast<std::uint64_t>(k));
    Field d = random_field(g, rng, std::max<std::size_t>(1, g.n / 4));
    d *= std::exp(rng.split(1).uniform(-3.0, 3.0));
    terms[k] = mass_split_terms(s, d, b);
  });

  MassSplitResult out;
  out.trials = trials;
  out.record.checker = "mass_split";
  out.record.seed = seed;
  out.record.params = {{"lambda", lambda}, {"b", b}, {"trials", trials}};
  for (std::size_t k = 0; k < trials; ++k) {
    const auto& t = terms[k];
    const double slack = t.slack() / std::max(t.lhs, std::numeric_limits<double>::min());
    out.min_slack = std::min(out.min_slack, slack);
    if (t.lhs > (t.norm_term + t.sublevel_term) * (1.0 + 1e-12)) {
      ++out.violations;
      out.record.witnesses.push_back(
          {{"trial", k}, {"lhs", t.lhs}, {"norm_term", t.norm_term}, {"sublevel_term", t.sublevel_term}});
    }
  }
  out.pass = out.violations == 0;
  out.record.pass = out.pass;
  out.record.params["min_relative_slack"] = trials ? out.min_slack : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Energy splitting for far-apart bumps

struct SplitRow {
  double separation = 0.0;
  double total = 0.0;   // |Phi(u_s) - Phi(u_s - u0) - Phi(u0)|
  double f_term = 0.0;  // same for int F
  double xi_term = 0.0; // same for (mu/p) int xi |u|^p
};

struct SplittingResult {
  std::vector<SplitRow> rows;
  double overlap_separation = 0.0;  // separations beyond this have disjoint effective supports
  bool monotone = false;
  bool pass = false;
  CheckRecord record;
};

/// Radius around the origin containing every sample with |u| > fraction max|u|.
inline double effective_support_radius(const Field& u, double fraction = 1e-6) {
  const double peak = max_abs(u);
  double r = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (std::abs(u[i]) > fraction * peak) r = std::max(r, radius(u.grid().point(i), u.grid().dim));
  return r;
}

/// Deviation table for u_s = u0 + w(. - s e_1). Rows beyond the support
/// overlap must be non-increasing and the last one below threshold.
inline SplittingResult check_splitting(const ProblemSpec& spec, const Field& u0, const Field& w,
                                       const std::vector<double>& separations, double threshold = 1e-3) {
  const Grid& g = spec.grid();
  if (!(u0.grid() == g) || !(w.grid() == g)) throw grid_mismatch("check_splitting: fields not on the problem grid");
  if (separations.empty() || !std::is_sorted(separations.begin(), separations.end()))
    throw std::invalid_argument("check_splitting: separations must be an increasing ladder");
  const double r0 = effective_support_radius(u0), rw = effective_support_radius(w);
  const double half = 0.5 * g.length[0];
  if (r0 >= half - g.spacing(0) || rw >= half - g.spacing(0))
    throw std::invalid_argument("check_splitting: a support reaches the box boundary");
  if (separations.back() + rw >= half)
    throw std::invalid_argument("check_splitting: translated support crosses the box boundary");

  SplittingResult out;
  out.overlap_separation = r0 + rw;
  out.rows.resize(separations.size());
  const EnergyBreakdown e0 = energy(spec, u0);
  detail::parallel_for(separations.size(), [&](std::size_t k) {
    const double s = separations[k];
    const Field ws = translate(w, s, 0);
    const Field us = u0 + ws;
    const EnergyBreakdown a = energy(spec, us), b = energy(spec, ws);
    out.rows[k] = {s, std::abs(a.total - b.total - e0.total), std::abs(a.f_term - b.f_term - e0.f_term),
                   std::abs(a.xi_term - b.xi_term - e0.xi_term)};
  });

  out.monotone = true;
  const double floor = 1e-13 * (1.0 + std::abs(e0.total));
  for (std::size_t k = 1; k < out.rows.size(); ++k) {
    if (out.rows[k - 1].separation < out.overlap_separation) continue;
    const auto& a = out.rows[k - 1];
    const auto& b = out.rows[k];
    if (b.total > a.total + floor || b.f_term > a.f_term + floor || b.xi_term > a.xi_term + floor) {
      out.monotone = false;
      out.record.witnesses.push_back({{"separation", b.separation}, {"previous", a.total}, {"total", b.total}});
    }
  }
  const auto& last = out.rows.back();
  out.pass = out.monotone && last.total < threshold && last.f_term < threshold && last.xi_term < threshold;
  out.record.checker = "splitting";
  out.record.params = {{"separations", separations}, {"threshold", threshold}, {"overlap_separation", out.overlap_separation}};
  out.record.pass = out.pass;
  for (const auto& r : out.rows)
    out.record.witnesses.push_back({{"separation", r.separation}, {"total", r.total}, {"f_term", r.f_term}, {"xi_term", r.xi_term}});
  return out;
}

// ---------------------------------------------------------------------------
// Ball integrals of 1/V and sublevel measures along a ray

struct CoercivityRow {
  double radius = 0.0;
  double inverse_integral = 0.0;   // int_{B(y,1)} dx / V
  double sublevel_measure = 0.0;   // measure of B(y,1) intersected with {V < b}
};

struct CoercivityResult {
  std::vector<CoercivityRow> rows;
  bool positive = true;  // V > 0 on every ball (otherwise the integral diverges)
  bool pass = false;
  CheckRecord record;
};

/// Measure of B(center,1) intersected with {V < b} by midpoint sampling on a
/// (resolution)^dim lattice over the enclosing cube.
inline double ball_sublevel_measure(const Potential& V, int dim, const Point& center, double b,
                                    std::size_t resolution = 2000) {
  if (dim > 1) resolution = std::min<std::size_t>(resolution, dim == 2 ? 400 : 80);
  const double h = 2.0 / static_cast<double>(resolution);
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= resolution;
  std::size_t hits = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    Point x{};
    double r2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double off = -1.0 + (static_cast<double>(rest % resolution) + 0.5) * h;
      rest /= resolution;
      r2 += off * off;
      x[d] = center[d] + off;
    }
    if (r2 <= 1.0 && evaluate(V, x, dim) < b) ++hits;
  }
  return static_cast<double>(hits) * std::pow(h, dim);
}

/// Ladder of int_{B(y,1)} dx/V at y = r e_1 for r in radii; passes when the
/// ladder is non-increasing and ends below 0.1 times its first value.
inline CoercivityResult coercivity_probe(const Potential& V, int dim, const std::vector<double>& radii, double b = 1.0) {
  if (radii.empty() || !std::is_sorted(radii.begin(), radii.end()))
    throw std::invalid_argument("coercivity_probe: radii must be an increasing ladder");
  CoercivityResult out;
  out.rows.resize(radii.size());
  detail::parallel_for(radii.size(), [&](std::size_t k) {
    Point y{};
    y[0] = radii[k];
    out.rows[k] = {radii[k], ball_integral_inverse(V, dim, y), ball_sublevel_measure(V, dim, y, b)};
  });
  out.record.checker = "coercivity_probe";
  out.record.params = {{"potential", describe(V)}, {"dim", dim}, {"radii", radii}, {"b", b}};
  for (const auto& r : out.rows) {
    if (!std::isfinite(r.inverse_integral)) {
      out.positive = false;
      out.record.witnesses.push_back({{"radius", r.radius}, {"violation", "V vanishes on the ball (V1)"}});
    }
  }
  if (!out.positive) {
    out.record.diagnostic = "V is not bounded away from zero (V1 violated)";
    return out;
  }
  bool monotone = true;
  for (std::size_t k = 1; k < out.rows.size(); ++k)
    if (out.rows[k].inverse_integral > out.rows[k - 1].inverse_integral * (1.0 + 1e-12)) monotone = false;
  out.pass = monotone && out.rows.back().inverse_integral < 0.1 * out.rows.front().inverse_integral;
  out.record.pass = out.pass;
  for (const auto& r : out.rows)
    out.record.witnesses.push_back(
        {{"radius", r.radius}, {"inverse_integral", r.inverse_integral}, {"sublevel_measure", r.sublevel_measure}});
  return out;
}

/// Grid measure of {V < b}: cells with V < b times the cell volume.
inline double superlevel_measure(const Field& V, double b) { return sublevel_measure(V, b); }

// ---------------------------------------------------------------------------
// Hoelder quotients

/// Discrete sup of |u(x) - u(y)| / |x - y|^beta over grid pairs with
/// min_distance <= |x - y| <= box_length / 4 (Euclidean in the box, no
/// wrap). For beta > 1 the quotient with exponent beta - 1 is taken on each
/// spectral partial derivative.
inline double holder_estimate(const Field& u, double beta, double min_distance = 0.0) {
  if (!(beta > 0.0 && beta < 2.0)) throw std::invalid_argument("holder_estimate needs 0 < beta < 2");
  const Grid& g = u.grid();
  std::vector<Field> targets;
  double exponent = beta;
  if (beta > 1.0) {
    exponent = beta - 1.0;
    for (int d = 0; d < g.dim; ++d) targets.push_back(spectral_derivative(u, d, 1));
  } else {
    targets.push_back(u);
  }
  const double reach = 0.25 * *std::min_element(g.length.begin(), g.length.begin() + g.dim);
  const std::size_t N = g.size();
  std::vector<Point> pts(N);
  for (std::size_t i = 0; i < N; ++i) pts[i] = g.point(i);
  std::vector<double> best(N, 0.0);
  detail::parallel_for(N, [&](std::size_t i) {
    double m = 0.0;
    for (std::size_t j = i + 1; j < N; ++j) {
      double r2 = 0.0;
      for (int d = 0; d < g.dim; ++d) r2 += (pts[i][d] - pts[j][d]) * (pts[i][d] - pts[j][d]);
      const double r = std::sqrt(r2);
      if (r > reach || r < min_distance || r == 0.0) continue;
      const double denom = exponent == 1.0 ? r : std::pow(r, exponent);
      for (const auto& t : targets) m = std::max(m, std::abs(t[i] - t[j]) / denom);
    }
    best[i] = m;
  });
  return *std::max_element(best.begin(), best.end());
}

// ---------------------------------------------------------------------------
// Empirical embedding constants

struct EmbeddingRow {
  double s = 0.0;
  double gamma = 0.0;
  std::size_t trials = 0;
};

struct EmbeddingResult {
  std::vector<EmbeddingRow> rows;
  CheckRecord record;
};

/// gamma_s = max over random band-limited fields of ||u||_{L^s} / ||u||_{alpha}.
/// Trial k always draws the same field, so estimates are running maxima and
/// never decrease as trials grow. band_modes = 0 selects n/4.
inline EmbeddingResult estimate_embedding_constants(double alpha, const Grid& g, const std::vector<double>& s_list,
                                                    std::size_t trials, std::uint64_t seed = 1,
                                                    std::size_t band_modes = 0) {
  const double crit = critical_exponent(g.dim, alpha);
  for (double s : s_list)
    if (!(s >= 2.0 && s < crit))
      throw std::invalid_argument("embedding exponent " + std::to_string(s) + " outside [2, 2*)");
  if (trials == 0) throw std::invalid_argument("estimate_embedding_constants needs trials > 0");
  if (band_modes == 0) band_modes = std::max<std::size_t>(1, g.n / 4);

  const CounterRng root(seed, 0xe3b0);
  std::vector<std::vector<double>> ratios(trials, std::vector<double>(s_list.size()));
  detail::parallel_for(trials, [&](std::size_t k) {
    const Field u = random_field(g, root.split(static_cast<std::uint64_t>(k)), band_modes);
    const double b = std::sqrt(bessel_norm_sq(u, alpha));
    for (std::size_t j = 0; j < s_list.size(); ++j) ratios[k][j] = lp_norm(u, s_list[j]) / b;
  });

  EmbeddingResult out;
  out.record.checker = "embedding_constants";
  out.record.seed = seed;
  out.record.params = {{"alpha", alpha}, {"dim", g.dim}, {"n", g.n}, {"box_length", g.length[0]},
                       {"s", s_list}, {"trials", trials}, {"band_modes", band_modes}};
  for (std::size_t j = 0; j < s_list.size(); ++j) {
    EmbeddingRow row{s_list[j], 0.0, trials};
    for (std::size_t k = 0; k < trials; ++k) row.gamma = std::max(row.gamma, ratios[k][j]);
    out.rows.push_back(row);
    out.record.witnesses.push_back({{"s", row.s}, {"gamma", row.gamma}});
  }
  out.record.pass = true;
  return out;
}

}  // namespace besselmp
