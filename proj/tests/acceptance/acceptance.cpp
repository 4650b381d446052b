// Acceptance suite: one PASS/FAIL line per criterion, each with its own
// tolerance and wall-clock limit. Exit status is the number of failures.

#include "besselmp/cli_io.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>

using namespace besselmp;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& ex) {
    o = {false, std::string("exception: ") + ex.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_seconds;
  const bool pass = o.ok && in_time;
  if (!pass) ++failures;
  std::printf("%s [%2d] %s: %s (%.3f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              secs, limit_seconds, in_time ? "" : ", TOO SLOW");
  std::fflush(stdout);
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

Field gaussian(const Grid& g, double width = 1.0) {
  return Field::from_function(g, [width](std::span<const double> x) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return std::exp(-r2 / (width * width));
  });
}

Outcome eigenfunctions() {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double L = 20.0;
  double worst = 0.0;
  for (int dim : {1, 2}) {
    const Grid g = make_grid(dim, 64, L);
    for (int k0 : {0, 1, 5, 17, 31, 32})
      for (int k1 : dim == 1 ? std::vector<int>{0} : std::vector<int>{0, 3, 32}) {
        const double w0 = two_pi * k0 / L, w1 = two_pi * k1 / L;
        const Field u = Field::from_function(g, [&](std::span<const double> x) {
          return std::cos(w0 * x[0] + (dim == 2 ? w1 * x[1] : 0.0));
        });
        for (double s : {-1.0, -0.75, -0.375, 0.25, 0.375, 0.75, 1.0}) {
          const double scale = std::pow(1.0 + w0 * w0 + w1 * w1, s);
          const Field a = apply_multiplier(u, s);
          double err = 0.0, ref = 0.0;
          for (std::size_t i = 0; i < u.size(); ++i) {
            err = std::max(err, std::abs(a[i] - scale * u[i]));
            ref = std::max(ref, std::abs(scale * u[i]));
          }
          worst = std::max(worst, err / ref);
        }
      }
  }
  return {worst <= 1e-12, fmt("max relative error %.2e over cosine modes in d=1,2, |s| <= 1 (tol 1e-12)", worst)};
}

Outcome kernel_exponential() {
  double worst = 0.0;
  for (int k = 0; k <= 75; ++k) {
    const double r = 0.25 + 3.75 * k / 75.0;
    worst = std::max(worst, rel(bessel_kernel(r, 2.0, 1).value, 0.5 * std::exp(-r)));
  }
  return {worst <= 1e-6, fmt("max relative error %.2e vs exp(-|x|)/2 on [0.25, 4] (tol 1e-6)", worst)};
}

Outcome pointwise_operator() {
  const Grid g = make_grid(1, 256, 40.0);
  double worst = 0.0;
  for (double width : {1.0, 1.6}) {
    const Field u = gaussian(g, width);
    const double peak = max_abs(u);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (std::abs(u[i]) > 1e-3 * peak) idx.push_back(i);
    for (double alpha : {0.25, 0.5, 0.75}) {
      const Field spectral = apply_multiplier(u, alpha);
      const auto values = pointwise_apply(u, idx, alpha);
      for (std::size_t k = 0; k < idx.size(); ++k) worst = std::max(worst, rel(values[k], spectral[idx[k]]));
    }
  }
  return {worst <= 1e-3, fmt("max relative deviation %.2e, alpha in {0.25,0.5,0.75}, widths 1 and 1.6 (tol 1e-3)", worst)};
}

Outcome gradient_consistency() {
  const ProblemSpec spec = canonical_coercive_spec();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    Field u = random_field(spec.grid(), CounterRng(1000 + t), 16);
    const Field v = random_field(spec.grid(), CounterRng(2000 + t), 16);
    u *= 0.5;
    const double pairing = inner(residual(spec, u), v);
    Field up = u, um = u;
    up.axpy(h, v);
    um.axpy(-h, v);
    const double fd = (energy(spec, up).total - energy(spec, um).total) / (2.0 * h);
    worst = std::max(worst, rel(fd, pairing));
  }
  return {worst <= 1e-6, fmt("20 random pairs, max relative gap %.2e (tol 1e-6)", worst)};
}

Outcome coercive_mountain_pass() {
  const ProblemSpec spec = canonical_coercive_spec();
  const GeometryProbe probe = probe_geometry(spec);
  MountainPassOptions o;
  o.rho = probe.rho;
  const SolveReport mp = mountain_pass_solve(spec, probe.e, o);
  const double res = residual_norm(spec, mp.solution);
  const double pinned = 3.22418890431;
  const bool ok = probe.eta > 0.0 && probe.e_energy < 0.0 && mp.converged && res <= 1e-8 && mp.energy >= probe.eta &&
                  rel(mp.energy, pinned) <= 1e-8;
  return {ok, fmt("eta=%.6g Phi(e)=%.6g residual=%.2e energy=%.11f (pinned %.11f)", probe.eta, probe.e_energy, res,
                  mp.energy, pinned)};
}

Outcome two_solutions() {
  const ProblemSpec base = canonical_well_spec();
  const auto entries = two_solution_sweep(base, default_sweep_candidates());
  if (entries.empty() || !entries.back().result.success)
    return {false, fmt("no successful pair among %zu attempts", entries.size())};
  const SweepEntry& found = entries.back();
  const TwoSolutionResult& r = found.result;
  const ProblemSpec spec = base.with_lambda(found.lambda).with_mu(found.mu);
  Field diff = r.mountain_pass.solution;
  diff.axpy(-1.0, r.ball.solution);
  const double distance = lp_norm(diff, 2.0);
  const double res_mp = residual_norm(spec, r.mountain_pass.solution);
  const double res_ball = residual_norm(spec, r.ball.solution);
  const double m = energy(spec, r.ball.solution).total, c = energy(spec, r.mountain_pass.solution).total;
  const bool pinned = found.lambda == 100.0 && found.mu == 0.05 && rel(c, 1.47508089972) <= 1e-8 &&
                      rel(m, -1.0148e-7) <= 1e-3;
  const bool ok = r.mountain_pass.converged && r.ball.converged && res_mp <= 1e-8 && res_ball <= 1e-8 && m < 0.0 &&
                  c > 0.0 && distance > 1e-3 && pinned;
  return {ok, fmt("pair (lambda=%g, mu=%g): m=%.5g < 0 < c=%.11f, L2 distance %.4g, residuals %.1e/%.1e", found.lambda,
                  found.mu, m, c, distance, res_mp, res_ball)};
}

Outcome superquadratic() {
  const double q = 4.0, tau = 1.5;
  const double analytic = std::pow(0.5 - 1.0 / q, -1.0 / (q - (q - 2.0) * tau));
  const auto r = check_superquadratic_bound(canonical_coercive_spec(), tau, 1e-3, 1e3);
  const double err = rel(r.R, analytic);
  return {r.pass && err <= 0.01, fmt("R=%.6f vs analytic %.6f, relative error %.2e (tol 1e-2)", r.R, analytic, err)};
}

Outcome mass_split() {
  const auto r = check_mass_split(canonical_well_spec(), 100.0, 10.0, 100, 1);
  return {r.pass && r.violations == 0 && r.trials == 100,
          fmt("%zu violations in %zu fields, min slack %.3g", r.violations, r.trials, r.min_slack)};
}

Outcome splitting() {
  const ProblemSpec spec = canonical_coercive_spec();
  const Field u0 = gaussian(spec.grid());
  std::vector<double> seps;
  for (int k = 0; k <= 30; ++k) seps.push_back(0.5 * k);
  const auto r = check_splitting(spec, u0, u0, seps);
  const double last = std::abs(r.rows.back().total);
  return {r.monotone && last < 1e-3 && r.pass,
          fmt("monotone beyond overlap %.3g: %s, deviation %.2e at separation %.1f (tol 1e-3)", r.overlap_separation,
              r.monotone ? "yes" : "no", last, r.rows.back().separation)};
}

Outcome regularity() {
  const double beta = 0.9 * 2.0 * 0.75;
  std::vector<double> estimates;
  for (std::size_t n : {256u, 512u}) {
    const ProblemSpec spec = canonical_coercive_spec(n);
    const GeometryProbe probe = probe_geometry(spec);
    MountainPassOptions o;
    o.rho = probe.rho;
    const SolveReport mp = mountain_pass_solve(spec, probe.e, o);
    if (!mp.converged) return {false, fmt("solve at n=%zu did not converge", n)};
    estimates.push_back(holder_estimate(mp.solution, beta));
  }
  const double drift = rel(estimates[1], estimates[0]);
  return {drift < 0.05, fmt("beta=%.2f estimate %.5g (n=256) vs %.5g (n=512), drift %.2f%% (tol 5%%)", beta,
                            estimates[0], estimates[1], 100.0 * drift)};
}

}  // namespace

int main() {
  criterion(1, "spectral eigenfunction exactness", 1.0, eigenfunctions);
  criterion(2, "kernel duality, d=1 alpha=2", 5.0, kernel_exponential);
  criterion(3, "pointwise vs spectral operator", 30.0, pointwise_operator);
  criterion(4, "gradient consistency", 10.0, gradient_consistency);
  criterion(5, "mountain-pass geometry and solve", 60.0, coercive_mountain_pass);
  criterion(6, "two-solution regime", 300.0, two_solutions);
  criterion(7, "superquadratic bound R", 1.0, superquadratic);
  criterion(8, "mass-split inequality", 10.0, mass_split);
  criterion(9, "splitting deviation", 30.0, splitting);
  criterion(10, "regularity under refinement", 120.0, regularity);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
