#pragma once

// Critical points of Phi: a string (path-deformation) method with a climbing
// image for the mountain-pass level, projected descent in a ball for the
// negative level, the sphere/ray probe that supplies rho, eta and the far
// endpoint e, and boundedness diagnostics along solver iterates.

#include "besselmp/detail/parallel.hpp"
#include "besselmp/problem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace besselmp {

class solver_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class MetricKind { automatic, bessel, weighted };

inline const char* to_string(MetricKind k) {
  switch (k) {
    case MetricKind::bessel: return "bessel";
    case MetricKind::weighted: return "weighted";
    default: return "automatic";
  }
}

/// Inner product used for steepest descent.
///
/// bessel:   <a,b> = <(I-Delta)^alpha a, b>, gradient (I-Delta)^{-alpha} r.
/// weighted: <a,b> = <(I-Delta)^alpha a + lambda V a, b> (the energy norm),
///           gradient solves ((I-Delta)^alpha + lambda V) g = r. Dense Cholesky
///           up to dense_limit grid points, preconditioned CG beyond.
/// automatic picks weighted.
class Metric {
public:
  static constexpr std::size_t dense_limit = 2048;

  Metric(const ProblemSpec& spec, MetricKind kind = MetricKind::automatic)
      : alpha_(spec.alpha()), lambda_(spec.lambda()), V_(spec.potential()),
        kind_(kind == MetricKind::automatic ? MetricKind::weighted : kind) {
    if (kind_ != MetricKind::weighted) return;
    const Grid& g = spec.grid();
    if (g.size() > dense_limit) return;
    const std::size_t N = g.size();
    Eigen::MatrixXd A(N, N);
    Field unit(g);
    for (std::size_t j = 0; j < N; ++j) {
      unit[j] = 1.0;
      const Field col = apply_multiplier(unit, alpha_);
      unit[j] = 0.0;
      for (std::size_t i = 0; i < N; ++i) A(i, j) = col[i];
    }
    A = 0.5 * (A + A.transpose()).eval();
    for (std::size_t i = 0; i < N; ++i) A(i, i) += lambda_ * V_[i];
    factor_ = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(A);
    if (factor_->info() != Eigen::Success) throw solver_error("metric: Cholesky factorization failed");
  }

  MetricKind kind() const { return kind_; }

  /// M a as grid values.
  Field apply(const Field& a) const {
    Field out = apply_multiplier(a, alpha_);
    if (kind_ == MetricKind::weighted)
      for (std::size_t i = 0; i < a.size(); ++i) out[i] += lambda_ * V_[i] * a[i];
    return out;
  }

  /// Riesz representative of the residual: M g = r.
  Field gradient(const Field& r) const {
    if (kind_ == MetricKind::bessel) return apply_multiplier(r, -alpha_);
    if (factor_) {
      Eigen::Map<const Eigen::VectorXd> rhs(r.data().data(), static_cast<Eigen::Index>(r.size()));
      Eigen::VectorXd x = factor_->solve(rhs);
      return Field(r.grid(), std::vector<double>(x.data(), x.data() + x.size()));
    }
    return conjugate_gradient(r);
  }

  double inner(const Field& a, const Field& b) const {
    double s = bessel_inner(a, b, alpha_);
    if (kind_ == MetricKind::weighted) {
      double w = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) w += V_[i] * a[i] * b[i];
      s += lambda_ * w * a.grid().cell_volume();
    }
    return s;
  }

  double norm(const Field& a) const { return std::sqrt(std::max(0.0, inner(a, a))); }

private:
  Field conjugate_gradient(const Field& r) const {
    auto dot = [](const Field& a, const Field& b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    };
    Field x(r.grid());
    Field res = r;
    Field z = apply_multiplier(res, -alpha_);
    Field d = z;
    double rz = dot(res, z);
    const double target = 1e-28 * dot(r, r);
    for (int it = 0; it < 10000 && dot(res, res) > target; ++it) {
      const Field Ad = apply(d);
      const double step = rz / dot(d, Ad);
      x.axpy(step, d);
      res.axpy(-step, Ad);
      z = apply_multiplier(res, -alpha_);
      const double rz_new = dot(res, z);
      d *= rz_new / rz;
      d += z;
      rz = rz_new;
    }
    return x;
  }

  double alpha_;
  double lambda_;
  Field V_;
  MetricKind kind_;
  std::shared_ptr<Eigen::LLT<Eigen::MatrixXd>> factor_;
};

/// Smooth positive bump adapted to the potential: inverse iteration with the
/// energy-norm operator (I-Delta)^alpha + lambda V, started from a Gaussian at
/// the minimizer of V (closest to the origin among ties). Unit lambda-norm.
inline Field ground_bump(const ProblemSpec& spec, std::size_t iterations = 30) {
  const Grid& g = spec.grid();
  const Field& V = spec.potential();
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (V[i] < V[best] || (V[i] == V[best] && radius(g.point(i), g.dim) < radius(g.point(best), g.dim))) best = i;
  }
  const Point c = g.point(best);
  Field phi = Field::from_function(g, [&](auto x) {
    double r2 = 0.0;
    for (int d = 0; d < g.dim; ++d) r2 += (x[d] - c[d]) * (x[d] - c[d]);
    return std::exp(-r2);
  });
  const Metric metric(spec, MetricKind::weighted);
  for (std::size_t it = 0; it < iterations; ++it) {
    phi = metric.gradient(phi);
    phi *= 1.0 / lp_norm(phi, 2.0);
  }
  phi *= 1.0 / lambda_norm(spec, phi);
  return phi;
}

/// Armijo descent of Phi restricted to the sphere ||u||_lambda = rho: the
/// metric gradient minus its radial part, followed by rescaling.
inline Field sphere_descent(const ProblemSpec& spec, const Metric& metric, Field u, std::size_t iterations,
                            double c1 = 1e-4) {
  const double rho = lambda_norm(spec, u);
  double eu = energy(spec, u).total;
  double step = 1.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const Field r = residual(spec, u);
    Field g = metric.gradient(r);
    g.axpy(-metric.inner(g, u) / metric.inner(u, u), u);
    const double slope = inner(r, g);
    if (!(slope > 0.0)) break;
    double s = std::min({1.0, 2.0 * step, 0.5 * rho / metric.norm(g)});
    bool accepted = false;
    for (int bt = 0; bt < 40 && !accepted; ++bt, s *= 0.5) {
      Field trial = u;
      trial.axpy(-s, g);
      trial *= rho / lambda_norm(spec, trial);
      const double et = energy(spec, trial).total;
      if (et <= eu - c1 * s * slope) {
        u = std::move(trial);
        eu = et;
        step = s;
        accepted = true;
      }
    }
    if (!accepted) break;
  }
  return u;
}

struct GeometryProbe {
  double rho = 0.0;
  double eta = 0.0;
  double mu0_estimate = 0.0;
  Field e;
  double e_norm = 0.0;
  double e_energy = 0.0;
  std::size_t sample_count = 0;
  std::vector<double> rho_grid;
  std::vector<double> sphere_minima;  // sampled min of Phi per rho
};

struct ProbeOptions {
  /// Sphere radii; empty selects {0.02, 0.04, 0.06, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5}
  /// times the t where Phi(t phi0) turns negative.
  std::vector<double> rho_grid;
  std::size_t samples_per_rho = 64;
  std::uint64_t seed = 1;
  /// The lowest samples on each sphere are refined by constrained descent so
  /// eta approaches the infimum from above.
  std::size_t descent_starts = 3;
  std::size_t descent_iterations = 40;
  MetricKind metric = MetricKind::automatic;
};

class probe_failure : public solver_error {
public:
  using solver_error::solver_error;
};

namespace detail {

/// Unit-norm directions for sphere sampling: the ground bump, band-limited
/// random fields and randomly placed Gaussian bumps, alternating.
inline std::vector<Field> sphere_directions(const ProblemSpec& spec, std::size_t count, std::uint64_t seed) {
  const Grid& g = spec.grid();
  std::vector<Field> out;
  out.push_back(ground_bump(spec));
  const CounterRng root(seed, 0x5e7e);
  for (std::size_t k = 1; k < count; ++k) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(k));
    Field s(g);
    if (k % 2 == 1) {
      s = random_field(g, rng, std::max<std::size_t>(1, g.n / 4));
    } else {
      Point c{};
      for (int d = 0; d < g.dim; ++d) c[d] = rng.uniform(-0.25, 0.25) * g.length[d];
      const double width = rng.uniform(0.5, 2.0);
      s = Field::from_function(g, [&](auto x) {
        double r2 = 0.0;
        for (int d = 0; d < g.dim; ++d) r2 += (x[d] - c[d]) * (x[d] - c[d]);
        return std::exp(-r2 / (width * width));
      });
    }
    s *= 1.0 / lambda_norm(spec, s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

/// Samples Phi on spheres ||u||_lambda = rho, picks the rho with the largest
/// sampled minimum eta, and scales the ground bump until Phi(t phi0) < 0.
inline GeometryProbe probe_geometry(const ProblemSpec& spec, const ProbeOptions& opts = {}) {
  if (opts.samples_per_rho == 0) throw std::invalid_argument("probe_geometry needs samples");
  GeometryProbe out;
  const Field phi0 = ground_bump(spec);

  double t = 1.0;
  for (int k = 0; k < 200 && energy(spec, t * phi0).total >= 0.0; ++k) t *= 2.0;
  if (energy(spec, t * phi0).total >= 0.0) throw probe_failure("probe_geometry: Phi(t phi0) stays nonnegative");
  // last sign change of Phi(t phi0) below t; the default ladder scales with it
  double lo = 0.5 * t, hi = t;
  if (energy(spec, lo * phi0).total < 0.0) lo = 0.0;
  for (int it = 0; it < 40 && hi - lo > 1e-3 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (energy(spec, mid * phi0).total < 0.0 ? hi : lo) = mid;
  }
  const double crossing = hi;
  t = 1.25 * crossing;
  while (energy(spec, t * phi0).total >= 0.0) t *= 2.0;

  out.rho_grid = opts.rho_grid;
  if (out.rho_grid.empty())
    for (double f : {0.02, 0.04, 0.06, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5}) out.rho_grid.push_back(f * crossing);
  if (!std::is_sorted(out.rho_grid.begin(), out.rho_grid.end()) || out.rho_grid.front() <= 0.0)
    throw std::invalid_argument("probe_geometry: rho grid must be positive and increasing");
  while (t <= out.rho_grid.back()) t *= 2.0;
  out.e = t * phi0;
  out.e_norm = lambda_norm(spec, out.e);
  out.e_energy = energy(spec, out.e).total;
  if (!(out.e_energy < 0.0)) throw probe_failure("probe_geometry: Phi(e) is not negative");

  const auto dirs = detail::sphere_directions(spec, opts.samples_per_rho, opts.seed);

  // Phi(rho s) = A(rho, s) - mu B(rho, s); A and B do not depend on mu
  const std::size_t R = out.rho_grid.size(), S = dirs.size();
  const ProblemSpec unweighted = spec.with_mu(0.0);
  auto split_terms = [&](const Field& u) {
    double w = 0.0;
    const Field& xi = spec.xi_weight();
    for (std::size_t i = 0; i < u.size(); ++i) w += xi[i] * std::pow(std::abs(u[i]), spec.p());
    return std::pair{energy(unweighted, u).total, w * spec.grid().cell_volume() / spec.p()};
  };
  std::vector<std::vector<std::pair<double, double>>> terms(R, std::vector<std::pair<double, double>>(S));
  detail::parallel_for(R * S, [&](std::size_t k) { terms[k / S][k % S] = split_terms(out.rho_grid[k / S] * dirs[k % S]); });

  const Metric metric(spec, opts.metric);
  const std::size_t starts = std::min(opts.descent_starts, S);
  std::vector<std::vector<std::pair<double, double>>> refined(R, std::vector<std::pair<double, double>>(starts));
  detail::parallel_for(R * starts, [&](std::size_t k) {
    const std::size_t r = k / starts, j = k % starts;
    std::vector<std::size_t> order(S);
    for (std::size_t i = 0; i < S; ++i) order[i] = i;
    std::partial_sort(order.begin(), order.begin() + starts, order.end(), [&](std::size_t a, std::size_t b) {
      return terms[r][a].first - spec.mu() * terms[r][a].second < terms[r][b].first - spec.mu() * terms[r][b].second;
    });
    const Field u = sphere_descent(spec, metric, out.rho_grid[r] * dirs[order[j]], opts.descent_iterations);
    refined[r][j] = split_terms(u);
  });
  for (std::size_t r = 0; r < R; ++r) terms[r].insert(terms[r].end(), refined[r].begin(), refined[r].end());
  out.sample_count = terms.front().size();

  auto sphere_min = [&](double mu, std::size_t r) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : terms[r]) m = std::min(m, a - mu * b);
    return m;
  };
  auto eta_of = [&](double mu) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < R; ++r) best = std::max(best, sphere_min(mu, r));
    return best;
  };

  out.sphere_minima.resize(R);
  std::size_t best = 0;
  for (std::size_t r = 0; r < R; ++r) {
    out.sphere_minima[r] = sphere_min(spec.mu(), r);
    if (out.sphere_minima[r] > out.sphere_minima[best]) best = r;
  }
  out.rho = out.rho_grid[best];
  out.eta = out.sphere_minima[best];
  if (!(out.eta > 0.0))
    throw probe_failure("probe_geometry: no rho in the ladder gives a positive sampled minimum (best " +
                        std::to_string(out.eta) + " at rho=" + std::to_string(out.rho) + "); mu too large");

  lo = spec.mu();
  hi = std::max(2.0 * spec.mu(), 1e-8);
  while (eta_of(hi) > 0.0 && hi < 1e12) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (eta_of(mid) > 0.0 ? lo : hi) = mid;
  }
  out.mu0_estimate = lo;
  return out;
}

enum class Classification { mountain_pass, local_min };

inline const char* to_string(Classification c) {
  return c == Classification::mountain_pass ? "mountain_pass" : "local_min";
}

struct TraceRow {
  std::size_t iter = 0;
  /// Path solvers: sup of Phi over the polygonal path near its highest node.
  double energy = 0.0;
  double node_energy = 0.0;
  double residual_norm = 0.0;
  double step_size = 0.0;
  std::size_t max_node_index = 0;
};

struct SolveReport {
  Field solution;
  double energy = 0.0;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  Classification classification = Classification::mountain_pass;
  bool converged = false;
  std::string message;
  std::vector<TraceRow> trace;
  /// Iterates kept for diagnostics (the max node every few iterations, or
  /// every descent iterate).
  std::vector<Field> snapshots;
  /// Final path, endpoints included (mountain pass only).
  std::vector<Field> path;
  /// First trace row of the climbing-image phase (mountain pass only).
  std::size_t climb_start = 0;
  std::size_t restarts = 0;
};

struct MountainPassOptions {
  std::size_t path_nodes = 41;
  double tol = 1e-8;
  std::size_t max_iter = 5000;
  MetricKind metric = MetricKind::automatic;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  /// String iterations end once the max node's residual is below this (or the
  /// max energy stagnates) and the climbing image takes over.
  double climb_threshold = 1e-3;
  /// Sphere radius from the probe; enables the nontriviality guard when > 0.
  double rho = 0.0;
  std::size_t max_restarts = 3;
  std::uint64_t seed = 1;
  std::size_t snapshot_every = 10;
};

struct PathState {
  std::vector<Field> nodes;
  std::vector<double> energies;
  std::size_t max_index = 0;
};

namespace detail {

inline std::size_t path_max(const std::vector<double>& energies) {
  const double top = *std::max_element(energies.begin(), energies.end());
  for (std::size_t k = 0; k < energies.size(); ++k)
    if (energies[k] >= top - 1e-12) return k;
  return 0;
}

/// Moves nodes first+1 .. last-1 to equal metric arc length between nodes
/// first and last by piecewise-linear interpolation. Nodes first and last are
/// left untouched.
inline void reparametrize(std::vector<Field>& nodes, std::size_t first, std::size_t last, const Metric& metric) {
  if (last <= first + 1) return;
  std::vector<double> s(last - first + 1, 0.0);
  for (std::size_t k = first + 1; k <= last; ++k) s[k - first] = s[k - first - 1] + metric.norm(nodes[k] - nodes[k - 1]);
  const double total = s.back();
  if (!(total > 0.0)) return;
  std::vector<Field> fresh;
  std::size_t seg = 0;
  for (std::size_t j = first + 1; j < last; ++j) {
    const double target = total * static_cast<double>(j - first) / static_cast<double>(last - first);
    while (seg + 1 < s.size() - 1 && s[seg + 1] < target) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double w = len > 0.0 ? (target - s[seg]) / len : 0.0;
    Field f = nodes[first + seg];
    f *= 1.0 - w;
    f.axpy(w, nodes[first + seg + 1]);
    fresh.push_back(std::move(f));
  }
  for (std::size_t j = first + 1; j < last; ++j) nodes[j] = std::move(fresh[j - first - 1]);
}

/// Largest Phi on the segments joining the highest node to its neighbours,
/// by golden-section search on each segment.
inline double polygon_peak(const ProblemSpec& spec, const std::vector<Field>& nodes, const std::vector<double>& energies,
                           std::size_t top) {
  double best = energies[top];
  auto segment = [&](const Field& a, const Field& b) {
    const Field d = b - a;
    auto phi = [&](double t) {
      Field x = a;
      x.axpy(t, d);
      return energy(spec, x).total;
    };
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.0, hi = 1.0;
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    double f1 = phi(x1), f2 = phi(x2);
    for (int it = 0; it < 40 && hi - lo > 1e-6; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + ratio * (hi - lo);
        f2 = phi(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - ratio * (hi - lo);
        f1 = phi(x1);
      }
    }
    best = std::max({best, f1, f2});
  };
  if (top > 0) segment(nodes[top - 1], nodes[top]);
  if (top + 1 < nodes.size()) segment(nodes[top], nodes[top + 1]);
  return best;
}

}  // namespace detail

/// Mountain-pass critical point between 0 and e.
///
/// String phase: every interior node takes an Armijo steepest-descent step in
/// the metric, then the path is reparametrized to equal arc length; endpoints
/// are never written. Climbing phase: the highest node follows -g reflected
/// along the path tangent, which drives it to the saddle; the two sub-strings
/// on either side keep relaxing.
inline SolveReport mountain_pass_solve(const ProblemSpec& spec, const Field& e, const MountainPassOptions& opts = {}) {
  if (opts.path_nodes < 3) throw std::invalid_argument("mountain_pass_solve needs at least 3 path nodes");
  if (!(e.grid() == spec.grid())) throw grid_mismatch("mountain_pass_solve: endpoint not on the problem grid");
  if (!(energy(spec, e).total < 0.0)) throw std::invalid_argument("mountain_pass_solve needs Phi(e) < 0");

  const Metric metric(spec, opts.metric);
  const std::size_t m = opts.path_nodes;
  SolveReport report;
  report.classification = Classification::mountain_pass;

  auto initial_path = [&](std::size_t attempt) {
    std::vector<Field> nodes;
    nodes.reserve(m);
    const CounterRng rng(opts.seed, 0xa7a7 + attempt);
    for (std::size_t k = 0; k < m; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(m - 1);
      Field node = t * e;
      if (attempt > 0 && k > 0 && k + 1 < m) {
        Field bump = random_field(spec.grid(), rng.split(k), std::max<std::size_t>(1, spec.grid().n / 8));
        node.axpy(0.1 * std::sin(M_PI * t) * metric.norm(e) / metric.norm(bump), bump);
      }
      nodes.push_back(std::move(node));
    }
    nodes.front() = Field(spec.grid());
    nodes.back() = e;
    return nodes;
  };

  PathState path;
  std::size_t iter = 0;
  for (std::size_t attempt = 0; attempt <= opts.max_restarts; ++attempt) {
    path.nodes = initial_path(attempt);
    path.energies.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) path.energies[k] = energy(spec, path.nodes[k]).total;
    std::vector<double> steps(m, 1.0);
    bool climbing = false;
    std::size_t stable = 0;
    double climb_step = 0.5;
    double previous_top = std::numeric_limits<double>::infinity();
    std::size_t previous_index = m;
    bool done = false;

    // Nodes at negative energy already sit below every mountain-pass level;
    // moving them only lets the string run downhill without bound.
    auto relax = [&](std::size_t k, double spacing) {
      if (!(path.energies[k] > 0.0)) return;
      Field& u = path.nodes[k];
      const Field r = residual(spec, u);
      const Field g = metric.gradient(r);
      const double slope = inner(r, g);
      if (!(slope > 0.0)) return;
      double s = std::min({1.0, 2.0 * steps[k], spacing / std::sqrt(slope)});
      for (int bt = 0; bt < 60; ++bt) {
        Field trial = u;
        trial.axpy(-s, g);
        const double et = energy(spec, trial).total;
        if (et <= path.energies[k] - opts.armijo_c1 * s * slope) {
          u = std::move(trial);
          path.energies[k] = et;
          steps[k] = s;
          return;
        }
        s *= opts.backtrack;
      }
      steps[k] = s;
    };

    for (; iter < opts.max_iter; ++iter) {
      const std::size_t top = detail::path_max(path.energies);
      path.max_index = top;
      const Field r_top = residual(spec, path.nodes[top]);
      const double res = lp_norm(r_top, 2.0);
      if (iter % opts.snapshot_every == 0) report.snapshots.push_back(path.nodes[top]);
      const double peak = detail::polygon_peak(spec, path.nodes, path.energies, top);
      report.trace.push_back({iter, peak, path.energies[top], res, climbing ? climb_step : steps[top], top});

      if (climbing && res <= opts.tol) {
        done = true;
        break;
      }
      if (top == 0 || top + 1 == m) throw solver_error("mountain_pass_solve: path maximum sits at an endpoint");

      if (!climbing) {
        stable = (top == previous_index && std::abs(previous_top - path.energies[top]) <=
                                                1e-7 * std::abs(path.energies[top]))
                     ? stable + 1
                     : 0;
        if (res <= opts.climb_threshold || stable >= 20) {
          climbing = true;
          report.climb_start = report.trace.size() - 1;
        }
      }
      previous_top = path.energies[top];
      previous_index = top;

      double spacing = 0.0;
      for (std::size_t k = 1; k < m; ++k) spacing += metric.norm(path.nodes[k] - path.nodes[k - 1]);
      spacing /= static_cast<double>(m - 1);

      if (!climbing) {
        detail::parallel_for(m - 2, [&](std::size_t j) { relax(j + 1, spacing); });
        detail::reparametrize(path.nodes, 0, m - 1, metric);
        for (std::size_t k = 1; k + 1 < m; ++k) path.energies[k] = energy(spec, path.nodes[k]).total;
        bool collapsed = true;
        for (std::size_t k = 1; k + 1 < m && collapsed; ++k)
          collapsed = metric.norm(path.nodes[k]) <= opts.tol;
        if (collapsed) throw solver_error("mountain_pass_solve: path collapsed to 0 (degenerate endpoint)");
        continue;
      }

      // climbing image on the top node
      Field& u = path.nodes[top];
      const Field g = metric.gradient(r_top);
      Field tau = path.nodes[top + 1] - path.nodes[top - 1];
      const double tt = metric.inner(tau, tau);
      Field d = -1.0 * g;
      if (tt > 0.0) d.axpy(2.0 * metric.inner(g, tau) / tt, tau);
      const double gn = metric.norm(g);
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt) {
        Field trial = u;
        trial.axpy(climb_step, d);
        const double trial_gn = metric.norm(metric.gradient(residual(spec, trial)));
        if (trial_gn < gn) {
          u = std::move(trial);
          path.energies[top] = energy(spec, u).total;
          climb_step = std::min(0.5, 1.5 * climb_step);
          moved = true;
          break;
        }
        climb_step *= 0.5;
      }
      if (!moved) {
        climb_step = 0.5;
        report.message = "climbing image stalled";
      }
      // keep the neighbours on the minimum-energy path
      for (std::size_t k = 1; k + 1 < m; ++k)
        if (k != top) relax(k, spacing);
      detail::reparametrize(path.nodes, 0, top, metric);
      detail::reparametrize(path.nodes, top, m - 1, metric);
      for (std::size_t k = 1; k + 1 < m; ++k)
        if (k != top) path.energies[k] = energy(spec, path.nodes[k]).total;
    }

    const std::size_t top = detail::path_max(path.energies);
    report.solution = path.nodes[top];
    report.energy = path.energies[top];
    report.path = path.nodes;
    report.residual_norm = residual_norm(spec, report.solution);
    report.iterations = iter;
    report.converged = done && report.residual_norm <= opts.tol;
    if (report.converged && opts.rho > 0.0 && lambda_norm(spec, report.solution) < 0.1 * opts.rho) {
      report.converged = false;
      report.restarts = attempt + 1;
      report.message = "converged to a near-zero critical point; restarting with a perturbed path";
      continue;
    }
    break;
  }
  if (!report.converged && report.message.empty()) report.message = "max_iter exceeded";
  if (report.converged) report.message = "converged";
  return report;
}

struct BallOptions {
  double tol = 1e-8;
  std::size_t max_iter = 5000;
  MetricKind metric = MetricKind::automatic;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  /// Interior certificate: final ||u||_lambda <= (1 - margin) rho.
  double margin = 0.05;
};

/// Minimizes Phi over the closed ball ||u||_lambda <= rho by projected descent
/// from the most negative point t phi0 on a ladder of small t.
inline SolveReport ball_min_solve(const ProblemSpec& spec, double rho, const BallOptions& opts = {}) {
  if (!(rho > 0.0)) throw std::invalid_argument("ball_min_solve needs rho > 0");
  SolveReport report;
  report.classification = Classification::local_min;
  if (!(spec.mu() > 0.0)) {
    report.solution = Field(spec.grid());
    report.message = "mu = 0: no negative energy in the ball (0 is the minimizer)";
    return report;
  }
  const Metric metric(spec, opts.metric);
  const Field phi0 = ground_bump(spec);
  double best_t = 0.0, best_e = 0.0;
  for (int j = 0; j < 60; ++j) {
    const double t = rho * 0.5 * std::ldexp(1.0, -j);
    const double e = energy(spec, t * phi0).total;
    if (e < best_e) {
      best_e = e;
      best_t = t;
    }
  }
  if (!(best_e < 0.0)) {
    report.solution = Field(spec.grid());
    report.message = "no negative energy found along t phi0";
    return report;
  }

  auto project = [&](Field u) {
    const double n = lambda_norm(spec, u);
    if (n > rho) u *= rho / n;
    return u;
  };

  Field u = best_t * phi0;
  double eu = best_e;
  double step = 1.0;
  std::size_t iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    const Field r = residual(spec, u);
    const double res = lp_norm(r, 2.0);
    report.trace.push_back({iter, eu, eu, res, step, 0});
    report.snapshots.push_back(u);
    if (res <= opts.tol) break;
    const Field g = metric.gradient(r);
    double s = std::min(1.0, 2.0 * step);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      Field trial = u;
      trial.axpy(-s, g);
      trial = project(std::move(trial));
      const double et = energy(spec, trial).total;
      if (et <= eu + opts.armijo_c1 * inner(r, trial - u)) {
        u = std::move(trial);
        eu = et;
        step = s;
        accepted = true;
        break;
      }
      s *= opts.backtrack;
    }
    if (!accepted) {
      report.message = "line search failed";
      break;
    }
  }
  report.solution = u;
  report.energy = eu;
  report.residual_norm = residual_norm(spec, u);
  report.iterations = iter;
  const double norm = lambda_norm(spec, u);
  const bool interior = norm <= (1.0 - opts.margin) * rho;
  report.converged = report.residual_norm <= opts.tol && interior && eu < 0.0;
  if (report.converged) report.message = "converged";
  else if (!interior) report.message = "iterate pinned to the sphere ||u|| = rho";
  else if (report.message.empty()) report.message = "max_iter exceeded";
  return report;
}

struct TwoSolutionOptions {
  ProbeOptions probe;
  MountainPassOptions mountain_pass;
  BallOptions ball;
  double delta = 1e-3;
};

struct TwoSolutionResult {
  GeometryProbe probe;
  SolveReport mountain_pass;
  SolveReport ball;
  double distinctness = 0.0;
  bool success = false;
  std::string failed_stage;
  std::string message;
};

/// Probe, mountain pass, then ball minimization on one spec.
inline TwoSolutionResult two_solution_experiment(const ProblemSpec& spec, const TwoSolutionOptions& opts = {}) {
  TwoSolutionResult out;
  try {
    out.probe = probe_geometry(spec, opts.probe);
  } catch (const std::exception& ex) {
    out.failed_stage = "probe";
    out.message = ex.what();
    return out;
  }
  MountainPassOptions mp = opts.mountain_pass;
  mp.rho = out.probe.rho;
  try {
    out.mountain_pass = mountain_pass_solve(spec, out.probe.e, mp);
  } catch (const std::exception& ex) {
    out.failed_stage = "mountain_pass";
    out.message = ex.what();
    return out;
  }
  try {
    out.ball = ball_min_solve(spec, out.probe.rho, opts.ball);
  } catch (const std::exception& ex) {
    out.failed_stage = "ball_min";
    out.message = ex.what();
    return out;
  }
  out.distinctness = lp_norm(out.mountain_pass.solution - out.ball.solution, 2.0);
  if (!out.mountain_pass.converged) {
    out.failed_stage = "mountain_pass";
    out.message = out.mountain_pass.message;
  } else if (!out.ball.converged) {
    out.failed_stage = "ball_min";
    out.message = out.ball.message;
  } else if (!(out.mountain_pass.energy > 0.0 && out.ball.energy < 0.0)) {
    out.failed_stage = "levels";
    out.message = "energies do not straddle zero";
  } else if (!(out.distinctness > opts.delta)) {
    out.failed_stage = "distinctness";
    out.message = "solutions coincide within delta";
  } else {
    out.success = true;
    out.message = "two distinct solutions";
  }
  return out;
}

struct SweepEntry {
  double lambda = 0.0;
  double mu = 0.0;
  TwoSolutionResult result;
};

/// Runs the experiment for each (lambda, mu) in order and stops at the first
/// success unless exhaustive is set.
inline std::vector<SweepEntry> two_solution_sweep(const ProblemSpec& base,
                                                  const std::vector<std::pair<double, double>>& candidates,
                                                  const TwoSolutionOptions& opts = {}, bool exhaustive = false) {
  std::vector<SweepEntry> out;
  for (const auto& [lambda, mu] : candidates) {
    ProblemParams p = base.params();
    p.lambda = lambda;
    p.mu = mu;
    const ProblemSpec spec(base.grid(), p);
    out.push_back({lambda, mu, two_solution_experiment(spec, opts)});
    if (out.back().result.success && !exhaustive) break;
  }
  return out;
}

/// Default sweep: the canonical pair first, then larger lambda and smaller mu.
inline std::vector<std::pair<double, double>> default_sweep_candidates() {
  std::vector<std::pair<double, double>> c;
  for (double lambda : {100.0, 200.0, 400.0})
    for (double mu : {0.05, 0.02, 0.01}) c.emplace_back(lambda, mu);
  return c;
}

struct PsRow {
  double norm = 0.0;
  double energy = 0.0;
  double dual_norm = 0.0;  // ||DPhi(u)|| in the dual of the energy norm
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = true;
};

struct PsReport {
  std::vector<PsRow> rows;
  std::size_t violations = 0;
  double max_norm = 0.0;
  double implied_bound = 0.0;
  double level = 0.0;
  double embedding_constant = 1.0;
  double xi_norm = 0.0;
};

/// Checks (1/2 - 1/theta)||u||^2 <= 1 + c + ||u|| + C (1/p - 1/theta) mu
/// ||xi||_{L^{2/(2-p)}} ||u||^p along a sequence, with c the largest energy in
/// the sequence (or `level` if given) and C = gamma_2^p from the L^2 embedding
/// constant gamma_2 <= 1. Also reports the largest ||u|| the inequality allows.
inline PsReport ps_diagnostics(const ProblemSpec& spec, const std::vector<Field>& iterates, double gamma2 = 1.0,
                               std::optional<double> level = std::nullopt) {
  PsReport out;
  const double theta = spec.theta(), p = spec.p(), mu = spec.mu();
  const Grid& g = spec.grid();
  const double r = 2.0 / (2.0 - p);
  double xs = 0.0;
  for (double v : spec.xi_weight().values()) xs += std::pow(v, r);
  out.xi_norm = std::pow(xs * g.cell_volume(), 1.0 / r);
  out.embedding_constant = std::pow(gamma2, p);

  double c = level.value_or(-std::numeric_limits<double>::infinity());
  std::vector<double> energies;
  for (const auto& u : iterates) energies.push_back(energy(spec, u).total);
  if (!level) {
    c = 0.0;
    for (double e : energies) c = std::max(c, e);
  }
  out.level = c;
  const double a = 0.5 - 1.0 / theta;
  const double k = out.embedding_constant * (1.0 / p - 1.0 / theta) * mu * out.xi_norm;
  auto rhs = [&](double t) { return 1.0 + c + t + k * std::pow(t, p); };

  const Metric metric(spec, MetricKind::weighted);
  for (std::size_t i = 0; i < iterates.size(); ++i) {
    PsRow row;
    row.norm = lambda_norm(spec, iterates[i]);
    row.energy = energies[i];
    row.dual_norm = metric.norm(metric.gradient(residual(spec, iterates[i])));
    row.lhs = a * row.norm * row.norm;
    row.rhs = rhs(row.norm);
    row.ok = row.lhs <= row.rhs;
    if (!row.ok) ++out.violations;
    out.max_norm = std::max(out.max_norm, row.norm);
    out.rows.push_back(row);
  }
  double lo = 0.0, hi = 1.0;
  while (a * hi * hi <= rhs(hi)) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (a * mid * mid <= rhs(mid) ? lo : hi) = mid;
  }
  out.implied_bound = hi;
  return out;
}

}  // namespace besselmp
