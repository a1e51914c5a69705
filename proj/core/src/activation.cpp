#include "spectralflow/activation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "spectralflow/errors.hpp"

namespace spectralflow {

namespace {

// Unnormalized density. tan blows up toward the endpoints, which drives the
// exponential to exactly 0 well before |y| reaches 1 in double precision.
double raw_density(double y) {
  if (std::abs(y) >= 1.0) return 0.0;
  const double t = std::tan(0.5 * M_PI * y);
  const double e = -0.5 * t * t;
  if (e < -745.0) return 0.0;  // exp underflows; avoid inf*inf edge cases
  return std::exp(e);
}

// d/dy exp(-tan(pi*y/2)^2/2) = -raw * g * (pi/2)(1+g^2), g = tan(pi*y/2).
// The density decays faster than g^3 grows, so the product limits to 0.
double raw_density_prime(double y) {
  if (std::abs(y) >= 1.0) return 0.0;
  const double g = std::tan(0.5 * M_PI * y);
  const double e = -0.5 * g * g;
  if (e < -700.0) return 0.0;
  return -std::exp(e) * g * (0.5 * M_PI) * (1.0 + g * g);
}

struct Cell {
  int i = 0;      // left node index
  double t = 0;   // position in [0,1] within the cell
  double h = 0;   // cell width
};

Cell locate(const MollifierTable& table, double y) {
  Cell c;
  c.h = 2.0 / table.resolution;
  const double s = (y + 1.0) / c.h;
  c.i = std::clamp(static_cast<int>(s), 0, table.resolution - 1);
  c.t = s - c.i;
  return c;
}

// Cubic Hermite cell with nodal values p0, p1 and nodal slopes s0, s1.
double hermite(const Cell& c, double p0, double s0, double p1, double s1) {
  const double t2 = c.t * c.t, t3 = t2 * c.t;
  return (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + c.t) * c.h * s0 +
         (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * c.h * s1;
}

}  // namespace

MollifierTable build_mollifier(int resolution) {
  if (resolution < 64) {
    throw ConfigError("mollifier resolution must be >= 64, got " +
                      std::to_string(resolution));
  }
  MollifierTable table;
  table.resolution = resolution;
  const int n = resolution;
  const double h = 2.0 / n;
  table.y.resize(n + 1);
  table.rho.resize(n + 1);
  table.rho_prime.resize(n + 1);
  table.cdf.resize(n + 1);
  table.m1.resize(n + 1);

  for (int k = 0; k <= n; ++k) table.y[k] = -1.0 + h * k;

  // Simpson on each cell (endpoints + midpoint) for mass and first moment.
  std::vector<double> raw(n + 1), cell_mass(n), cell_m1(n);
  for (int k = 0; k <= n; ++k) raw[k] = raw_density(table.y[k]);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    const double ym = table.y[k] + 0.5 * h;
    const double rm = raw_density(ym);
    cell_mass[k] = h / 6.0 * (raw[k] + 4.0 * rm + raw[k + 1]);
    cell_m1[k] = h / 6.0 *
                 (table.y[k] * raw[k] + 4.0 * ym * rm + table.y[k + 1] * raw[k + 1]);
    total += cell_mass[k];
  }
  const double z = 1.0 / total;
  table.normalization = z;

  double mass = 0.0, moment = 0.0;
  table.cdf[0] = 0.0;
  table.m1[0] = 0.0;
  for (int k = 0; k <= n; ++k) {
    table.rho[k] = z * raw[k];
    table.rho_prime[k] = z * raw_density_prime(table.y[k]);
    if (k > 0) {
      mass += z * cell_mass[k - 1];
      moment += z * cell_m1[k - 1];
      table.cdf[k] = mass;
      table.m1[k] = moment;
    }
  }
  table.max_density = *std::max_element(table.rho.begin(), table.rho.end());
  return table;
}

double mollifier_density(const MollifierTable& table, double y) {
  if (std::abs(y) >= 1.0) return 0.0;
  const Cell c = locate(table, y);
  return hermite(c, table.rho[c.i], table.rho_prime[c.i], table.rho[c.i + 1],
                 table.rho_prime[c.i + 1]);
}

double mollifier_cdf(const MollifierTable& table, double y) {
  if (y <= -1.0) return 0.0;
  if (y >= 1.0) return 1.0;
  const Cell c = locate(table, y);
  return hermite(c, table.cdf[c.i], table.rho[c.i], table.cdf[c.i + 1],
                 table.rho[c.i + 1]);
}

double mollifier_m1(const MollifierTable& table, double y) {
  if (y <= -1.0 || y >= 1.0) return 0.0;
  const Cell c = locate(table, y);
  return hermite(c, table.m1[c.i], table.y[c.i] * table.rho[c.i],
                 table.m1[c.i + 1], table.y[c.i + 1] * table.rho[c.i + 1]);
}

double softplus_tau(const MollifierTable& table, double tau, double y) {
  if (!(tau > 0.0)) throw ConfigError("softplus_tau requires tau > 0");
  const double s = tau * y;
  if (s >= 1.0) return y;   // mollifier support passed: convolution is exact
  if (s <= -1.0) return 0.0;
  return y * mollifier_cdf(table, s) - mollifier_m1(table, s) / tau;
}

double hrelu(double y) {
  const auto relu = [](double v) { return v > 0.0 ? v : 0.0; };
  return relu(y + 1.0) - relu(2.0 * y) + relu(y - 1.0);
}

double hrelu_d1(double y) {
  if (y == -1.0) return 0.5;
  if (y == 1.0) return -0.5;
  if (y > -1.0 && y < 0.0) return 1.0;
  if (y > 0.0 && y < 1.0) return -1.0;
  return 0.0;
}

ActivationEval hrelu_tau(const MollifierTable& table, double tau, double y) {
  if (!(tau > 0.0)) throw ConfigError("hrelu_tau requires tau > 0");
  ActivationEval out;
  // Past the outermost mollification window every term is in its exact linear
  // (or zero) branch and the combination cancels identically; return exact
  // zeros instead of the ~1e-16 rounding residue of (y+1) - 2y + (y-1).
  // Downstream code leans on the compact support being exact.
  if (tau * (y - 1.0) >= 1.0 || tau * (y + 1.0) <= -1.0) return out;
  out.value = softplus_tau(table, tau, y + 1.0) - softplus_tau(table, tau, 2.0 * y) +
              softplus_tau(table, tau, y - 1.0);
  out.d1 = mollifier_cdf(table, tau * (y + 1.0)) -
           2.0 * mollifier_cdf(table, tau * 2.0 * y) +
           mollifier_cdf(table, tau * (y - 1.0));
  out.d2 = tau * (mollifier_density(table, tau * (y + 1.0)) -
                  4.0 * mollifier_density(table, tau * 2.0 * y) +
                  mollifier_density(table, tau * (y - 1.0)));
  return out;
}

// Hat slope on the open interval containing y (kinks excluded by callers).
static double hat_slope(double y) {
  if (y <= -1.0 || y >= 1.0) return 0.0;
  return y < 0.0 ? 1.0 : -1.0;
}

double h1_gap(const MollifierTable& table, double tau, int grid_n) {
  if (grid_n < 1000) throw ConfigError("h1_gap requires grid_n >= 1000");
  // Both the value and the derivative of sigma_H - sigma_{H,tau} vanish
  // identically outside three slabs around the kinks (mollification keeps
  // the linear pieces exact), so the H1 integral reduces to panel integrals
  // over the slabs. A uniform node grid would either park a node on a kink
  // (an O(h) spike/notch, the derivative jumps there) or skip slabs narrower
  // than a cell entirely at large tau; panels with the kinks as boundaries
  // and one-sided hat slopes avoid both. Composite trapezoid per panel.
  const double w_edge = 1.0 / tau, w_mid = 0.5 / tau;
  std::vector<std::pair<double, double>> ivs = {
      {-1.0 - w_edge, -1.0 + w_edge}, {-w_mid, w_mid}, {1.0 - w_edge, 1.0 + w_edge}};
  // Merge overlaps (slabs collide for tau < 1.5), then split at the kinks.
  std::vector<std::pair<double, double>> merged;
  for (const auto& iv : ivs) {
    if (!merged.empty() && iv.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, iv.second);
    } else {
      merged.push_back(iv);
    }
  }
  std::vector<std::pair<double, double>> panels;
  for (const auto& [lo, hi] : merged) {
    double cuts[5] = {lo, hi, hi, hi, hi};
    int n_cuts = 1;
    for (double kink : {-1.0, 0.0, 1.0}) {
      if (kink > lo && kink < hi) cuts[n_cuts++] = kink;
    }
    cuts[n_cuts++] = hi;
    std::sort(cuts, cuts + n_cuts);
    for (int k = 0; k + 1 < n_cuts; ++k) {
      if (cuts[k + 1] > cuts[k]) panels.push_back({cuts[k], cuts[k + 1]});
    }
  }
  double acc = 0.0;
  for (const auto& [lo, hi] : panels) {
    const double len = hi - lo;
    const int n = std::max(64, static_cast<int>(std::ceil(grid_n * len / 6.0)));
    const double h = len / n;
    const double slope = hat_slope(0.5 * (lo + hi));
    double panel = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double y = lo + h * k;
      const ActivationEval e = hrelu_tau(table, tau, y);
      const double dv = hrelu(y) - e.value;
      const double dd = slope - e.d1;
      const double f = dv * dv + dd * dd;
      panel += (k == 0 || k == n) ? 0.5 * f : f;
    }
    acc += panel * h;
  }
  return std::sqrt(acc);
}

}  // namespace spectralflow
