#include "spectralflow/check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "spectralflow/activation.hpp"
#include "spectralflow/field.hpp"
#include "spectralflow/functionals.hpp"
#include "spectralflow/geometry.hpp"
#include "spectralflow/potentials.hpp"
#include "spectralflow/reference.hpp"
#include "spectralflow/rng.hpp"

namespace spectralflow {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

Particle random_particle(Rng& rng, int d, double a_lo, double a_hi, double b_range) {
  Particle p;
  p.a = rng.uniform(a_lo, a_hi) * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
  p.w.resize(d);
  rng.unit_sphere(p.w);
  p.b = rng.uniform(-b_range, b_range);
  return p;
}

Ensemble random_ensemble(Rng& rng, int d, int m, double tau) {
  Ensemble ens;
  ens.d = d;
  ens.tau = tau;
  const double b_range = std::sqrt(static_cast<double>(d)) + 2.0;
  for (int i = 0; i < m; ++i) {
    ens.particles.push_back(random_particle(rng, d, 0.5, 2.0, b_range));
  }
  return ens;
}

// Common amplitude rescale putting the quadrature constraint at zero.
bool normalize_field(Ensemble& ens, const MollifierTable& table,
                     const QuadratureSet& q) {
  const EnsembleEvaluator u(ens, table);
  const double nrm = l2_norm(u, q);
  if (!(nrm > 0.0)) return false;
  for (Particle& p : ens.particles) p.a /= nrm;
  return true;
}

TangentVector random_tangent(Rng& rng, const Particle& p) {
  std::vector<double> g(p.w.size());
  for (double& c : g) c = rng.gaussian();
  TangentVector t = tangent_project(p, rng.gaussian(), g, rng.gaussian());
  const double n = tangent_norm(t);
  t.da /= n;
  t.db /= n;
  for (double& c : t.dw) c /= n;
  return t;
}

CheckResult check_mollifier_table() {
  CheckResult r{"mollifier_table", false, ""};
  const MollifierTable table = build_mollifier(4096);
  const int n = table.resolution;
  const double h = 2.0 / n;
  double trap = 0.0, asym = 0.0, neg = 0.0, mono = 0.0;
  for (int k = 0; k <= n; ++k) {
    trap += (k == 0 || k == n) ? 0.5 * table.rho[k] : table.rho[k];
    asym = std::max(asym, std::abs(table.rho[k] - table.rho[n - k]));
    neg = std::min(neg, table.rho[k]);
    if (k > 0) mono = std::min(mono, table.cdf[k] - table.cdf[k - 1]);
  }
  trap *= h;
  const double mass_err = std::abs(trap - 1.0);
  const double cdf_ends =
      std::max(std::abs(table.cdf[0]), std::abs(table.cdf[n] - 1.0));
  const double m1_end = std::abs(table.m1[n]);
  r.passed = mass_err <= 1e-10 && cdf_ends <= 1e-12 && m1_end <= 1e-12 &&
             asym <= 1e-13 && neg >= 0.0 && mono >= 0.0;
  r.detail = "trapezoid mass err " + fmt(mass_err) + " (<=1e-10), cdf ends " +
             fmt(cdf_ends) + ", odd moment " + fmt(m1_end) + ", asymmetry " +
             fmt(asym);
  return r;
}

CheckResult check_activation_derivatives(std::uint64_t seed) {
  CheckResult r{"activation_derivatives", false, ""};
  const MollifierTable table = build_mollifier(4096);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  const double h = 1e-5;
  // worst1 is measured net of the central difference's own h^2/6 sup|d3|
  // truncation, which scales like tau^2 and exceeds 1e-6 at tau = 100.
  double worst1 = 0.0, worst2 = 0.0;  // worst2 pre-divided by tau
  for (const double tau : {5.0, 20.0, 100.0}) {
    const double trunc = 4.0 * h * h * tau * tau;
    for (int k = 0; k < 100; ++k) {
      const double y = rng.uniform(-1.5, 1.5);
      const ActivationEval e = hrelu_tau(table, tau, y);
      const ActivationEval ep = hrelu_tau(table, tau, y + h);
      const ActivationEval em = hrelu_tau(table, tau, y - h);
      const double err1 = std::abs((ep.value - em.value) / (2 * h) - e.d1);
      worst1 = std::max(worst1, std::max(err1 - trunc, 0.0));
      worst2 =
          std::max(worst2, std::abs((ep.d1 - em.d1) / (2 * h) - e.d2) / tau);
    }
  }
  r.passed = worst1 <= 1e-6 && worst2 <= 1e-4;
  r.detail = "max |fd - d1| less truncation " + fmt(worst1) +
             " (<=1e-6), max |fd - d2|/tau " + fmt(worst2) + " (<=1e-4)";
  return r;
}

CheckResult check_potential_gradients(std::uint64_t seed) {
  CheckResult r{"potential_gradients", false, ""};
  const MollifierTable table = build_mollifier(4096);
  const double tau = 20.0;
  Rng rng(seed ^ 0xbf58476d1ce4e5b9ull);
  Ensemble ens = random_ensemble(rng, 2, 30, tau);
  const QuadratureSet q = tensor_grid_quadrature(2, 64);
  if (!normalize_field(ens, table, q)) {
    r.detail = "field vanished on the grid";
    return r;
  }
  const EnsembleEvaluator u(ens, table);
  const PotentialSpec W = PotentialSpec::parse("cos1d:100");
  const double h = 2e-5;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Particle p = random_particle(rng, 2, 0.5, 2.0, 1.5);
    const TangentVector xi = random_tangent(rng, p);
    const Particle pp = exp_map(p, xi, h), pm = exp_map(p, xi, -h);

    const TangentVector gv = grad_V(u, table, tau, p, q, W);
    const double fd_v = (potential_V(u, table, tau, pp, q, W) -
                         potential_V(u, table, tau, pm, q, W)) /
                        (2 * h);
    const double scale_v = std::max(tangent_norm(gv), 1e-8);
    worst = std::max(worst, std::abs(fd_v - tangent_inner(gv, xi)) / scale_v);

    const TangentVector gc = grad_C(u, table, tau, p, q);
    const double fd_c = (potential_C(u, table, tau, pp, q) -
                         potential_C(u, table, tau, pm, q)) /
                        (2 * h);
    const double scale_c = std::max(tangent_norm(gc), 1e-8);
    worst = std::max(worst, std::abs(fd_c - tangent_inner(gc, xi)) / scale_c);
  }
  r.passed = worst <= 1e-5;
  r.detail = "max relative grad mismatch " + fmt(worst) + " (<=1e-5)";
  return r;
}

CheckResult check_velocity_orthogonality(std::uint64_t seed) {
  CheckResult r{"velocity_orthogonality", false, ""};
  const MollifierTable table = build_mollifier(4096);
  Rng rng(seed ^ 0x94d049bb133111ebull);
  const QuadratureSet q = tensor_grid_quadrature(2, 32);
  const PotentialSpec W = PotentialSpec::parse("cos1d:100");
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Ensemble ens = random_ensemble(rng, 2, 20, 20.0);
    const VelocityField vf = velocity(ens, table, q, W);
    double inner = 0.0, v2 = 0.0, c2 = 0.0;
    for (int i = 0; i < ens.size(); ++i) {
      inner += tangent_inner(vf.v[i], vf.grad_c[i]);
      v2 += tangent_inner(vf.v[i], vf.v[i]);
      c2 += tangent_inner(vf.grad_c[i], vf.grad_c[i]);
    }
    const double m = ens.size();
    const double bound = 1e-10 * std::sqrt(v2 / m) * std::sqrt(c2 / m) + 1e-300;
    worst = std::max(worst, std::abs(inner / m) / bound);
  }
  r.passed = worst <= 1.0;
  r.detail = "max |<v,grad_C>| over 1e-10*norms: " + fmt(worst) + " (<=1)";
  return r;
}

CheckResult check_non_degeneracy(std::uint64_t seed) {
  CheckResult r{"non_degeneracy", false, ""};
  const MollifierTable table = build_mollifier(4096);
  Rng rng(seed ^ 0xd6e8feb86659fd93ull);
  const QuadratureSet q = tensor_grid_quadrature(2, 32);
  const PotentialSpec W = PotentialSpec::parse("cos1d:100");
  double worst = 2.0;
  for (int k = 0; k < 20; ++k) {
    Ensemble ens = random_ensemble(rng, 2, 20, 20.0);
    if (!normalize_field(ens, table, q)) {
      r.detail = "field vanished on the grid";
      return r;
    }
    const VelocityField vf = velocity(ens, table, q, W);
    double a2 = 0.0;
    for (const Particle& p : ens.particles) a2 += p.a * p.a;
    a2 /= ens.size();
    worst = std::min(worst, vf.grad_c_norm2_mean * a2);
  }
  r.passed = worst >= 1.0 - 1e-6;
  r.detail = "min |grad_C|^2 * mean(a^2) = " + fmt(worst) + " (>=1-1e-6)";
  return r;
}

CheckResult check_wasserstein_oracle(std::uint64_t seed) {
  CheckResult r{"wasserstein_oracle", false, ""};
  Rng rng(seed ^ 0x2545f4914f6cdd1dull);
  const auto draw = [&rng](int m) {
    std::vector<Particle> ps;
    for (int i = 0; i < m; ++i) ps.push_back(random_particle(rng, 3, 0.2, 2.0, 3.0));
    return ps;
  };
  const auto brute = [](const std::vector<Particle>& a,
                        const std::vector<Particle>& b) {
    const int m = static_cast<int>(a.size());
    std::vector<double> cost(m * m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const double g = geodesic_distance(a[i], b[j]);
        cost[i * m + j] = g * g;
      }
    }
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double total = 0.0;
      for (int i = 0; i < m; ++i) total += cost[i * m + perm[i]];
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / m);
  };
  int mismatches = 0;
  double worst_axiom = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto a = draw(4), b = draw(4);
    if (wasserstein2(a, b) != brute(a, b)) ++mismatches;
  }
  for (int k = 0; k < 50; ++k) {
    const auto a = draw(4), b = draw(4), c = draw(4);
    const double ab = wasserstein2(a, b), ba = wasserstein2(b, a);
    const double ac = wasserstein2(a, c), bc = wasserstein2(b, c);
    worst_axiom = std::max(worst_axiom, std::abs(ab - ba));
    worst_axiom = std::max(worst_axiom, ab - (ac + bc));  // triangle inequality
    worst_axiom = std::max(worst_axiom, std::abs(wasserstein2(a, a)));
  }
  r.passed = mismatches == 0 && worst_axiom <= 1e-10;
  r.detail = std::to_string(mismatches) +
             "/100 brute-force mismatches, axiom slack " + fmt(worst_axiom) +
             " (<=1e-10)";
  return r;
}

CheckResult check_fd_convergence() {
  CheckResult r{"fd_convergence", false, ""};
  const PotentialSpec W = PotentialSpec::parse("cos1d:100");
  const double l32 = ground_eigenpair(W, 32).lambda;
  const double l64 = ground_eigenpair(W, 64).lambda;
  const double l128 = ground_eigenpair(W, 128).lambda;
  const RichardsonResult rr = richardson(l32, l64, l128);
  r.passed = !rr.degenerate && rr.order >= 1.5 && rr.order <= 2.5;
  r.detail = "eigenvalue order " + fmt(rr.order) + " (in [1.5,2.5]), lambda " +
             fmt(l128) + " -> " + fmt(rr.extrapolated);
  return r;
}

}  // namespace

std::vector<CheckResult> run_invariant_checks(std::uint64_t seed) {
  std::vector<CheckResult> results;
  results.push_back(check_mollifier_table());
  results.push_back(check_activation_derivatives(seed));
  results.push_back(check_potential_gradients(seed));
  results.push_back(check_velocity_orthogonality(seed));
  results.push_back(check_non_degeneracy(seed));
  results.push_back(check_wasserstein_oracle(seed));
  results.push_back(check_fd_convergence());
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

std::string format_check_report(const std::vector<CheckResult>& results) {
  std::ostringstream out;
  for (const CheckResult& r : results) {
    out << (r.passed ? "PASS" : "FAIL") << ' ' << r.name << ": " << r.detail
        << '\n';
  }
  return out.str();
}

}  // namespace spectralflow
