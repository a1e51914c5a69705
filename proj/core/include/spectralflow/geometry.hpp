#pragma once

#include <span>
#include <vector>

namespace spectralflow {

/// One particle of the empirical measure: amplitude a in R, direction w on the
/// unit sphere of R^d, bias b in R.
struct Particle {
  double a = 0;
  std::vector<double> w;
  double b = 0;

  int dim() const { return static_cast<int>(w.size()); }
};

/// Tangent vector at a particle; dw is orthogonal to the base direction.
struct TangentVector {
  double da = 0;
  std::vector<double> dw;
  double db = 0;
};

double dot(std::span<const double> x, std::span<const double> y);
double norm(std::span<const double> x);

/// Product metric: sqrt(da^2 + |dw|^2 + db^2).
double tangent_norm(const TangentVector& v);
double tangent_inner(const TangentVector& u, const TangentVector& v);

/// sqrt((a-a')^2 + arccos(w.w')^2 + (b-b')^2), with the dot product clamped
/// so collinear and antipodal directions stay finite.
double geodesic_distance(const Particle& p, const Particle& q);

/// Projects an ambient gradient (ga, gw, gb) onto the tangent space at p:
/// the sphere block becomes gw - (gw.w)w, the scalar blocks pass through.
TangentVector tangent_project(const Particle& p, double ga,
                              std::span<const double> gw, double gb);

/// Geodesic step of length step*|v| from p: scalars move linearly, the
/// direction rotates by angle step*|dw| in the plane spanned by (w, dw) using
/// the exact sphere exponential, then is renormalized. Requires dw tangent.
Particle exp_map(const Particle& p, const TangentVector& v, double step);

/// max over particles of max(|a|, |b|); the activation slab makes feature
/// support depend on (a, b) only through this box radius.
double support_box_radius(std::span<const Particle> particles);

/// Exact minimum-cost assignment of an n x n cost matrix (row-major),
/// Jonker-Volgenant style with dual potentials, O(n^3). Returns row -> column.
std::vector<int> min_cost_assignment(std::span<const double> cost, int n);

/// Exact 2-Wasserstein distance between two uniform empirical measures with
/// the same particle count m <= 512, squared geodesic ground cost:
/// sqrt(min_perm (1/m) sum_i d(p_i, q_perm(i))^2).
double wasserstein2(std::span<const Particle> lhs, std::span<const Particle> rhs);

}  // namespace spectralflow
