#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "spectralflow/errors.hpp"
#include "spectralflow/reference.hpp"
#include "spectralflow/rng.hpp"

using namespace spectralflow;

namespace {

// Dense generalized eigensolver results for the same assembly, cos1d:100.
constexpr double kLambda1Cos100N16 = -58.6550160300016;
constexpr double kLambda1Cos100N32 = -58.3531165573355;

// Closed-form generalized eigenvalue of the 1D Neumann stencil for the
// cosine mode cos(k*pi*x): lambda_k = 2(1 - cos(k*pi*h))/h^2.
double stencil_lambda(int k, int n) {
  const double h = 1.0 / n;
  return 2.0 * (1.0 - std::cos(k * M_PI * h)) / (h * h);
}

std::vector<double> cosine_mode_1d(int k, int n) {
  std::vector<double> u(n + 1);
  for (int i = 0; i <= n; ++i) u[i] = std::cos(k * M_PI * i / double(n));
  return u;
}

double generalized_residual(const FdOperator& op, const std::vector<double>& u,
                            double lambda) {
  std::vector<double> ku(op.nodes());
  op.stiffness.multiply(u, ku);
  double worst = 0.0;
  for (int i = 0; i < op.nodes(); ++i) {
    worst = std::max(worst, std::abs(ku[i] - lambda * op.mass[i] * u[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("assembled stiffness is exactly symmetric") {
  const FdOperator op = assemble_fd(PotentialSpec::parse("cos1d:100"), 24);
  std::map<std::pair<int, int>, double> entries;
  for (int i = 0; i < op.stiffness.n; ++i) {
    for (int k = op.stiffness.row_ptr[i]; k < op.stiffness.row_ptr[i + 1]; ++k) {
      entries[{i, op.stiffness.col[k]}] = op.stiffness.val[k];
    }
  }
  for (const auto& [ij, v] : entries) {
    const auto it = entries.find({ij.second, ij.first});
    REQUIRE(it != entries.end());
    CHECK(it->second == v);
  }
}

TEST_CASE("zero potential annihilates constants exactly") {
  for (int n : {8, 24, 32}) {
    const FdOperator op = assemble_fd(PotentialSpec::parse("zero"), n);
    std::vector<double> ones(op.nodes(), 1.0), out(op.nodes());
    op.stiffness.multiply(ones, out);
    for (double v : out) CHECK(v == 0.0);
    for (double mi : op.mass) {
      CHECK(mi > 0.0);
      CHECK(mi <= 1.0);
    }
  }
}

TEST_CASE("cosine modes are exact discrete eigenvectors in 1d") {
  for (int n : {32, 64, 100}) {
    const FdOperator op = assemble_fd_1d(PotentialSpec::parse("zero"), n);
    for (int k : {1, 2, 5}) {
      const std::vector<double> u = cosine_mode_1d(k, n);
      const double lam = stencil_lambda(k, n);
      CHECK(generalized_residual(op, u, lam) <= 1e-9 * (1.0 + std::abs(lam)));
    }
  }
}

TEST_CASE("tensor cosine modes are exact discrete eigenvectors in 2d") {
  const int n = 32;
  const FdOperator op = assemble_fd(PotentialSpec::parse("zero"), n);
  const std::pair<int, int> modes[] = {{1, 0}, {1, 1}, {2, 3}};
  for (const auto& [k, l] : modes) {
    std::vector<double> u((n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        u[j * (n + 1) + i] =
            std::cos(k * M_PI * i / double(n)) * std::cos(l * M_PI * j / double(n));
      }
    }
    const double lam = stencil_lambda(k, n) + stencil_lambda(l, n);
    CHECK(generalized_residual(op, u, lam) <= 1e-9 * (1.0 + std::abs(lam)));
  }
}

TEST_CASE("ground eigenpair of flat potentials") {
  SUBCASE("zero potential gives the constant mode at eigenvalue zero") {
    const ReferenceSolution sol = ground_eigenpair(PotentialSpec::parse("zero"), 16);
    CHECK(std::abs(sol.lambda) <= 1e-8);
    CHECK(sol.residual <= 1e-8);
    const auto [lo, hi] = std::minmax_element(sol.u.begin(), sol.u.end());
    CHECK(*lo > 0.0);  // positive-mean normalization picks the positive branch
    CHECK(*hi - *lo <= 1e-6 * *hi);
  }
  SUBCASE("constant potential shifts the eigenvalue exactly") {
    const ReferenceSolution sol =
        ground_eigenpair(PotentialSpec::parse("constant:7.5"), 16);
    CHECK(sol.lambda == doctest::Approx(7.5).epsilon(1e-8));
  }
}

TEST_CASE("ground eigenvalue matches a dense factorization of the same matrix") {
  const ReferenceSolution s16 = ground_eigenpair(PotentialSpec::parse("cos1d:100"), 16);
  CHECK(s16.lambda == doctest::Approx(kLambda1Cos100N16).epsilon(1e-9));
  const ReferenceSolution s32 = ground_eigenpair(PotentialSpec::parse("cos1d:100"), 32);
  CHECK(s32.lambda == doctest::Approx(kLambda1Cos100N32).epsilon(1e-9));
  CHECK(s32.residual <= 1e-8);
  // Grid normalization: sqrt(h^2 u^T D u) = 1.
  const FdOperator op = assemble_fd(PotentialSpec::parse("cos1d:100"), 32);
  double q = 0.0;
  for (std::size_t i = 0; i < s32.u.size(); ++i) {
    q += op.mass[i] * s32.u[i] * s32.u[i];
  }
  CHECK(std::sqrt(q) / 32.0 == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("eigenvalue sequence converges at second order") {
  const PotentialSpec W = PotentialSpec::parse("cos1d:100");
  const double c = ground_eigenpair(W, 16).lambda;
  const double m = ground_eigenpair(W, 32).lambda;
  const double f = ground_eigenpair(W, 64).lambda;
  const RichardsonResult r = richardson(c, m, f);
  CHECK(!r.degenerate);
  CHECK(r.order >= 1.5);
  CHECK(r.order <= 2.5);
  CHECK(std::abs(r.extrapolated - f) <= std::abs(f - m));
}

TEST_CASE("richardson on synthetic sequences") {
  SUBCASE("exact quadratic decay") {
    const double L = -3.0, c = 0.64;
    const RichardsonResult r = richardson(L + c, L + c / 4, L + c / 16);
    CHECK(!r.degenerate);
    CHECK(r.order == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.extrapolated == doctest::Approx(L).epsilon(1e-12));
  }
  SUBCASE("flat sequences are degenerate") {
    const RichardsonResult r = richardson(1.5, 1.5, 1.5);
    CHECK(r.degenerate);
    CHECK(r.extrapolated == 1.5);
  }
}

TEST_CASE("solver guards") {
  EigenSolveOptions opts;
  opts.tol = 1e-12;
  opts.max_outer = 1;
  CHECK_THROWS_AS(ground_eigenpair(PotentialSpec::parse("cos1d:100"), 16, opts),
                  SolverError);
  CHECK_THROWS_AS(assemble_fd(PotentialSpec::parse("zero"), 4), ConfigError);
  CHECK_THROWS_AS(assemble_fd(PotentialSpec::parse("zero"), 1024), ConfigError);
  CHECK_THROWS_AS(assemble_fd_1d(PotentialSpec::parse("zero"), 1), ConfigError);
}

TEST_CASE("grid interpolant reproduces nodal data and extends flatly") {
  const ReferenceSolution sol = ground_eigenpair(PotentialSpec::parse("cos1d:100"), 32);
  const ReferenceEvaluator ref(sol, 4);
  CHECK(ref.lambda() == sol.lambda);
  const int n = sol.grid_n;
  for (int j = 0; j <= n; j += 8) {
    for (int i = 0; i <= n; i += 8) {
      const std::vector<double> x{i / double(n), j / double(n), 0.3, 0.8};
      CHECK(ref.value(x) == doctest::Approx(sol.u[i * (n + 1) + j]).epsilon(1e-12));
    }
  }
  SUBCASE("trailing coordinates are inert") {
    const std::vector<double> a{0.31, 0.47, 0.0, 0.0};
    const std::vector<double> b{0.31, 0.47, 0.9, 0.2};
    CHECK(ref.value(a) == ref.value(b));
    std::vector<double> g(4);
    ref.gradient(a, g);
    CHECK(g[2] == 0.0);
    CHECK(g[3] == 0.0);
  }
  SUBCASE("gradient matches finite differences inside a cell") {
    const std::vector<double> x{0.31, 0.47, 0.5, 0.5};
    std::vector<double> g(4);
    ref.gradient(x, g);
    const double h = 1e-6;
    for (int axis = 0; axis < 2; ++axis) {
      std::vector<double> xp = x, xm = x;
      xp[axis] += h;
      xm[axis] -= h;
      const double fd = (ref.value(xp) - ref.value(xm)) / (2 * h);
      CHECK(g[axis] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  SUBCASE("constructor guards") {
    CHECK_THROWS_AS(ReferenceEvaluator(sol, 1), ConfigError);
    ReferenceSolution bad = sol;
    bad.u.pop_back();
    CHECK_THROWS_AS(ReferenceEvaluator(bad, 2), ConfigError);
  }
}

TEST_CASE("nodal normalization carries over to quadrature norms") {
  Rng rng(113);
  const ReferenceSolution sol = ground_eigenpair(PotentialSpec::parse("cos1d:100"), 64);
  const ReferenceEvaluator ref(sol, 2);
  // Trapezoid nodes coincide with grid nodes, where the interpolant is exact.
  const QuadratureSet grid = tensor_grid_quadrature(2, 64);
  CHECK(l2_norm(ref, grid) == doctest::Approx(1.0).epsilon(1e-10));
  // Monte Carlo in an extended dimension sees the same norm up to noise and
  // the O(h^2) gap between nodal and interpolated mass.
  const ReferenceEvaluator ref4(sol, 4);
  const QuadratureSet mc = mc_quadrature(4, 40000, rng);
  CHECK(l2_norm(ref4, mc) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("interpolated eigenpairs are nearly stationary for the integral form") {
  const MollifierTable table = build_mollifier();
  const PotentialSpec W = PotentialSpec::parse("cos1d:100");
  const QuadratureSet q = tensor_grid_quadrature(2, 256);
  int idx = 0;
  double res[2] = {0, 0};
  for (int n : {64, 128}) {
    const ReferenceSolution sol = ground_eigenpair(W, n);
    const ReferenceEvaluator ref(sol, 2);
    Rng probes(6007);
    res[idx++] = stationarity_residual_given(ref, sol.lambda, table, 20.0, q, W, 30,
                                             probes);
  }
  CHECK(res[0] <= 0.5);
  CHECK(res[1] <= 0.7 * res[0] + 1e-4);
}

TEST_CASE("sign-aligned l2 distance") {
  const QuadratureSet q = tensor_grid_quadrature(2, 32);
  const AnalyticEvaluator a(
      2, [](std::span<const double>) { return 1.2; },
      [](std::span<const double>, std::span<double> g) { g[0] = g[1] = 0.0; });
  const AnalyticEvaluator b(
      2, [](std::span<const double>) { return -1.0; },
      [](std::span<const double>, std::span<double> g) { g[0] = g[1] = 0.0; });
  // Flipping the sign of the reference must not matter.
  CHECK(l2_error(a, b, q) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(l2_error(a, a, q) == 0.0);
}

TEST_CASE("reference checkpoint round-trip") {
  const ReferenceSolution sol = ground_eigenpair(PotentialSpec::parse("cos1d:100"), 16);
  const std::string text = serialize_reference(sol);
  const ReferenceSolution back = parse_reference(text);
  CHECK(back.grid_n == sol.grid_n);
  CHECK(back.dim == sol.dim);
  CHECK(back.lambda == sol.lambda);
  CHECK(back.residual == sol.residual);
  REQUIRE(back.u.size() == sol.u.size());
  for (std::size_t i = 0; i < sol.u.size(); ++i) CHECK(back.u[i] == sol.u[i]);

  CHECK_THROWS_AS(parse_reference(""), ConfigError);
  CHECK_THROWS_AS(parse_reference("spectralflow.reference.v9\n"), ConfigError);
  std::string truncated = text.substr(0, text.size() / 2);
  CHECK_THROWS_AS(parse_reference(truncated), ConfigError);
}
