#include "spectralflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace spectralflow {

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double tangent_norm(const TangentVector& v) {
  return std::sqrt(v.da * v.da + dot(v.dw, v.dw) + v.db * v.db);
}

double tangent_inner(const TangentVector& u, const TangentVector& v) {
  return u.da * v.da + dot(u.dw, v.dw) + u.db * v.db;
}

double geodesic_distance(const Particle& p, const Particle& q) {
  if (p.dim() != q.dim()) {
    throw std::invalid_argument("geodesic_distance: dimension mismatch");
  }
  // Sphere angle via 2*atan2(|w_p - w_q|, |w_p + w_q|): well conditioned at
  // both ends, and exactly 0 for identical w (acos(dot) loses ~1e-8 there).
  double diff2 = 0.0, sum2 = 0.0;
  for (int i = 0; i < p.dim(); ++i) {
    const double d = p.w[i] - q.w[i];
    const double s = p.w[i] + q.w[i];
    diff2 += d * d;
    sum2 += s * s;
  }
  const double ang = 2.0 * std::atan2(std::sqrt(diff2), std::sqrt(sum2));
  const double da = p.a - q.a;
  const double db = p.b - q.b;
  return std::sqrt(da * da + ang * ang + db * db);
}

TangentVector tangent_project(const Particle& p, double ga,
                              std::span<const double> gw, double gb) {
  if (static_cast<int>(gw.size()) != p.dim()) {
    throw std::invalid_argument("tangent_project: dimension mismatch");
  }
  TangentVector v;
  v.da = ga;
  v.db = gb;
  v.dw.resize(gw.size());
  const double radial = dot(gw, p.w);
  for (std::size_t i = 0; i < gw.size(); ++i) v.dw[i] = gw[i] - radial * p.w[i];
  return v;
}

Particle exp_map(const Particle& p, const TangentVector& v, double step) {
  if (static_cast<int>(v.dw.size()) != p.dim()) {
    throw std::invalid_argument("exp_map: dimension mismatch");
  }
  const double dw_norm = norm(v.dw);
  if (std::abs(dot(v.dw, p.w)) > 1e-6 * (1.0 + dw_norm)) {
    throw std::invalid_argument("exp_map: dw is not tangent at p");
  }
  Particle out = p;
  out.a = p.a + step * v.da;
  out.b = p.b + step * v.db;
  if (dw_norm > 0.0 && step != 0.0) {
    const double angle = step * dw_norm;
    const double c = std::cos(angle);
    const double s = std::sin(angle) / dw_norm;
    for (int i = 0; i < p.dim(); ++i) out.w[i] = c * p.w[i] + s * v.dw[i];
    const double r = norm(out.w);
    if (r > 0.0) {
      for (double& c_i : out.w) c_i /= r;
    }
  }
  return out;
}

double support_box_radius(std::span<const Particle> particles) {
  if (particles.empty()) {
    throw std::invalid_argument("support_box_radius: empty ensemble");
  }
  double r = 0.0;
  for (const Particle& p : particles) {
    r = std::max(r, std::max(std::abs(p.a), std::abs(p.b)));
  }
  return r;
}

std::vector<int> min_cost_assignment(std::span<const double> cost, int n) {
  if (n <= 0 || cost.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("min_cost_assignment: bad matrix size");
  }
  const double inf = std::numeric_limits<double>::infinity();
  // Dual potentials u, v; p[j] = row matched to column j (1-based, 0 = none).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * static_cast<std::size_t>(n) + (j - 1)] -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) match[p[j] - 1] = j - 1;
  }
  return match;
}

double wasserstein2(std::span<const Particle> lhs, std::span<const Particle> rhs) {
  if (lhs.size() != rhs.size()) {
    throw std::invalid_argument("wasserstein2: particle counts differ");
  }
  const int m = static_cast<int>(lhs.size());
  if (m == 0) throw std::invalid_argument("wasserstein2: empty ensembles");
  if (m > 512) {
    throw std::invalid_argument("wasserstein2: m > 512 (exact assignment cap)");
  }
  std::vector<double> cost(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double d = geodesic_distance(lhs[i], rhs[j]);
      cost[i * static_cast<std::size_t>(m) + j] = d * d;
    }
  }
  const std::vector<int> match = min_cost_assignment(cost, m);
  // Re-sum in row order so the total is reproducible independently of the
  // solver's internal dual updates.
  double total = 0.0;
  for (int i = 0; i < m; ++i) total += cost[i * static_cast<std::size_t>(m) + match[i]];
  return std::sqrt(total / m);
}

}  // namespace spectralflow
