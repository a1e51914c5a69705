#include <doctest.h>

#include <cmath>
#include <vector>

#include "spectralflow/activation.hpp"
#include "spectralflow/errors.hpp"
#include "spectralflow/rng.hpp"

using namespace spectralflow;

// mpmath tanh-sinh quadrature oracles (tests/oracles/quadrature_oracle.py).
namespace {
constexpr double kOracleZ = 0.95573680146556869995;
constexpr double kOracleSoftplus10At0 = 0.014458024971666246344;
// sigma_{H,10}(0) = sigma_10(1) - sigma_10(2*0) + sigma_10(-1) = 1 - sigma_10(0):
// the outer terms are past the mollification window and therefore exact.
constexpr double kOracleHrelu10At0 = 0.985541975028333753656;
}  // namespace

TEST_CASE("mollifier table invariants") {
  const MollifierTable table = build_mollifier(4096);
  const int n = table.resolution;
  REQUIRE(n == 4096);
  REQUIRE(static_cast<int>(table.rho.size()) == n + 1);

  CHECK(table.normalization == doctest::Approx(kOracleZ).epsilon(1e-12));
  CHECK(table.max_density == doctest::Approx(kOracleZ).epsilon(1e-12));
  CHECK(table.rho[0] == 0.0);
  CHECK(table.rho[n] == 0.0);
  CHECK(table.cdf[0] == 0.0);
  CHECK(std::abs(table.cdf[n] - 1.0) <= 1e-13);
  CHECK(std::abs(table.m1[n]) <= 1e-13);  // odd first moment cancels

  double trap = 0.0;
  for (int k = 0; k <= n; ++k) {
    trap += (k == 0 || k == n) ? 0.5 * table.rho[k] : table.rho[k];
    CHECK(table.rho[k] >= 0.0);
    CHECK(table.rho[k] == table.rho[n - k]);  // even density, symmetric grid
    if (k > 0) CHECK(table.cdf[k] >= table.cdf[k - 1]);
  }
  CHECK(std::abs(trap * 2.0 / n - 1.0) <= 1e-10);

  CHECK(mollifier_cdf(table, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mollifier_cdf(table, -2.0) == 0.0);
  CHECK(mollifier_cdf(table, 2.0) == 1.0);
  CHECK(mollifier_density(table, 1.0) == 0.0);
  CHECK(mollifier_density(table, -1.0) == 0.0);
}

TEST_CASE("mollifier normalization stable under refinement") {
  const double z1 = build_mollifier(4096).normalization;
  const double z2 = build_mollifier(8192).normalization;
  CHECK(std::abs(z1 - z2) <= 1e-8);
}

TEST_CASE("mollifier resolution guard") {
  CHECK_THROWS_AS(build_mollifier(32), ConfigError);
  CHECK_NOTHROW(build_mollifier(64));
}

TEST_CASE("softplus closed branches and oracle value") {
  const MollifierTable table = build_mollifier(4096);
  CHECK(softplus_tau(table, 1.0, 2.0) == 2.0);
  CHECK(softplus_tau(table, 1.0, -2.0) == 0.0);
  CHECK(softplus_tau(table, 4.0, 0.25) == 0.25);    // tau*y = 1 exactly
  CHECK(softplus_tau(table, 4.0, -0.25) == 0.0);
  CHECK(softplus_tau(table, 10.0, 0.0) ==
        doctest::Approx(kOracleSoftplus10At0).epsilon(1e-10));
  CHECK_THROWS_AS(softplus_tau(table, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(softplus_tau(table, -3.0, 1.0), ConfigError);
}

TEST_CASE("exact hat is piecewise linear") {
  CHECK(hrelu(0.0) == 1.0);
  CHECK(hrelu(1.0) == 0.0);
  CHECK(hrelu(-1.0) == 0.0);
  CHECK(hrelu(-0.5) == 0.5);
  CHECK(hrelu(0.25) == 0.75);
  CHECK(hrelu(3.0) == 0.0);
  for (double y = -2.0; y <= 2.0; y += 1.0 / 64) {
    const double expect = (y <= -1.0 || y >= 1.0) ? 0.0 : (y < 0 ? 1 + y : 1 - y);
    CHECK(hrelu(y) == doctest::Approx(expect).epsilon(1e-15));
  }
  CHECK(hrelu_d1(-0.5) == 1.0);
  CHECK(hrelu_d1(0.5) == -1.0);
  CHECK(hrelu_d1(0.0) == 0.0);
  CHECK(hrelu_d1(-1.0) == 0.5);
  CHECK(hrelu_d1(1.0) == -0.5);
  CHECK(hrelu_d1(2.0) == 0.0);
}

TEST_CASE("mollified hat values") {
  const MollifierTable table = build_mollifier(4096);
  SUBCASE("outside the mollified support everything vanishes") {
    for (const double tau : {1.0, 10.0, 100.0}) {
      const ActivationEval e = hrelu_tau(table, tau, 3.0);
      CHECK(e.value == 0.0);
      CHECK(e.d1 == 0.0);
      CHECK(e.d2 == 0.0);
    }
  }
  SUBCASE("peak value against the convolution oracle") {
    const ActivationEval e = hrelu_tau(table, 10.0, 0.0);
    CHECK(e.value == doctest::Approx(kOracleHrelu10At0).epsilon(1e-10));
  }
  SUBCASE("pointwise limit toward the exact hat") {
    const ActivationEval e = hrelu_tau(table, 1e6, 0.5);
    CHECK(std::abs(e.value - 0.5) <= 1e-5);
  }
  SUBCASE("agreement with the exact hat outside the kink slabs") {
    for (const double tau : {2.0, 16.0, 128.0}) {
      for (const double y : {-1.7, -0.8, -0.4, 0.3, 0.7, 1.9}) {
        if (std::abs(y + 1.0) <= 1.0 / tau || std::abs(y) <= 0.5 / tau ||
            std::abs(y - 1.0) <= 1.0 / tau) {
          continue;
        }
        const ActivationEval e = hrelu_tau(table, tau, y);
        CHECK(std::abs(e.value - hrelu(y)) <= 1e-14);
        CHECK(std::abs(e.d1 - hrelu_d1(y)) <= 1e-14);
      }
    }
  }
  SUBCASE("second derivative vanishes between the kink slabs") {
    CHECK(hrelu_tau(table, 10.0, 0.5).d2 == 0.0);
    CHECK(hrelu_tau(table, 10.0, -0.5).d2 == 0.0);
  }
  CHECK_THROWS_AS(hrelu_tau(table, 0.0, 0.5), ConfigError);
}

TEST_CASE("derivatives match central finite differences") {
  const MollifierTable table = build_mollifier(4096);
  Rng rng(17);
  const double h = 1e-5;
  for (const double tau : {5.0, 20.0, 100.0}) {
    double worst1 = 0.0, worst2 = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double y = rng.uniform(-1.5, 1.5);
      const ActivationEval e = hrelu_tau(table, tau, y);
      const ActivationEval ep = hrelu_tau(table, tau, y + h);
      const ActivationEval em = hrelu_tau(table, tau, y - h);
      worst1 = std::max(worst1, std::abs((ep.value - em.value) / (2 * h) - e.d1));
      worst2 = std::max(worst2, std::abs((ep.d1 - em.d1) / (2 * h) - e.d2));
    }
    // The h^2/6 * sup|d3| truncation of the central difference itself scales
    // like tau^2 (sup|d3| <= 10 tau^2 sup|rho'|) and tops 1e-6 at tau = 100,
    // so the bound carries an explicit truncation allowance.
    CHECK(worst1 <= 1e-6 + 4.0 * h * h * tau * tau);
    CHECK(worst2 <= 1e-4 * tau);
  }
}

TEST_CASE("uniform bounds over a dense grid") {
  const MollifierTable table = build_mollifier(4096);
  for (const double tau : {5.0, 20.0, 100.0}) {
    double v = 0, d1 = 0, d2 = 0;
    for (double y = -2.0; y <= 2.0; y += 1e-3) {
      const ActivationEval e = hrelu_tau(table, tau, y);
      v = std::max(v, std::abs(e.value));
      d1 = std::max(d1, std::abs(e.d1));
      d2 = std::max(d2, std::abs(e.d2));
    }
    CHECK(v <= 1.0 + 2.0 / tau);
    CHECK(d1 <= 4.0);
    CHECK(d2 <= 4.0 * tau * table.max_density * (1.0 + 1e-12));
  }
}

TEST_CASE("H1 gap decays in tau") {
  const MollifierTable table = build_mollifier(4096);
  SUBCASE("monotone nonincreasing") {
    double prev = 1e300;
    for (double tau = 4.0; tau <= 256.0; tau *= 2.0) {
      const double g = h1_gap(table, tau, 6000);
      CHECK(g <= prev * (1.0 + 1e-12));
      prev = g;
    }
  }
  SUBCASE("log-log slope at most -0.4") {
    std::vector<double> lt, lg;
    for (const double tau : {4.0, 16.0, 64.0, 256.0}) {
      lt.push_back(std::log(tau));
      lg.push_back(std::log(h1_gap(table, tau, 6000)));
    }
    double mt = 0, mg = 0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
      mt += lt[i];
      mg += lg[i];
    }
    mt /= lt.size();
    mg /= lg.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
      num += (lt[i] - mt) * (lg[i] - mg);
      den += (lt[i] - mt) * (lt[i] - mt);
    }
    CHECK(num / den <= -0.4);
  }
  SUBCASE("stable under grid refinement") {
    CHECK(std::abs(h1_gap(table, 4.0, 6000) - h1_gap(table, 4.0, 12000)) <= 1e-3);
  }
  SUBCASE("huge tau surrogate is small") {
    CHECK(h1_gap(table, 1e6, 6000) < 1e-2);
  }
  CHECK_THROWS_AS(h1_gap(table, 4.0, 999), ConfigError);
}
