#pragma once

#include <functional>
#include <span>
#include <vector>

#include "spectralflow/activation.hpp"
#include "spectralflow/field.hpp"
#include "spectralflow/geometry.hpp"
#include "spectralflow/potentials.hpp"
#include "spectralflow/rng.hpp"

namespace spectralflow {

/// Normalized quadrature on the unit box: weights are positive and sum to 1,
/// so inner products approximate integrals against Lebesgue measure.
struct QuadratureSet {
  enum class Kind { MonteCarlo, TensorGrid };

  Kind kind = Kind::MonteCarlo;
  int d = 0;
  std::vector<double> points;   // row-major n x d
  std::vector<double> weights;  // n entries

  int size() const { return static_cast<int>(weights.size()); }
  std::span<const double> point(int j) const {
    return std::span<const double>(points).subspan(static_cast<std::size_t>(j) * d, d);
  }
};

/// Tensor-product trapezoid grid with cells_per_axis cells per axis; only
/// sensible for d <= 3 (point count grows as (cells+1)^d).
QuadratureSet tensor_grid_quadrature(int d, int cells_per_axis);

/// n i.i.d. uniform points, weights 1/n.
QuadratureSet mc_quadrature(int d, int n, Rng& rng);

/// Wraps existing points (row-major n x d) with uniform weights.
QuadratureSet quadrature_from_points(int d, std::vector<double> points);

/// Checks the quadrature invariants (points in the box, weights positive and
/// summing to 1 within 1e-12); throws ConfigError on violation.
void validate_quadrature(const QuadratureSet& q);

/// Field abstraction so the integral functionals accept networks, analytic
/// expressions, and grid interpolants through one interface.
class FieldEvaluator {
 public:
  virtual ~FieldEvaluator() = default;
  virtual int dim() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual void gradient(std::span<const double> x, std::span<double> out) const = 0;
};

/// Network-backed evaluator; holds references, so the ensemble and table must
/// outlive it.
class EnsembleEvaluator final : public FieldEvaluator {
 public:
  EnsembleEvaluator(const Ensemble& ens, const MollifierTable& table)
      : ens_(ens), table_(table) {}
  int dim() const override { return ens_.d; }
  double value(std::span<const double> x) const override {
    return evaluate(ens_, table_, x);
  }
  void gradient(std::span<const double> x, std::span<double> out) const override {
    evaluate_grad(ens_, table_, x, out);
  }
  const Ensemble& ensemble() const { return ens_; }
  const MollifierTable& table() const { return table_; }

 private:
  const Ensemble& ens_;
  const MollifierTable& table_;
};

/// Closed-form evaluator for oracle fields in tests and diagnostics.
class AnalyticEvaluator final : public FieldEvaluator {
 public:
  using ValueFn = std::function<double(std::span<const double>)>;
  using GradFn = std::function<void(std::span<const double>, std::span<double>)>;
  AnalyticEvaluator(int d, ValueFn value, GradFn grad)
      : d_(d), value_(std::move(value)), grad_(std::move(grad)) {}
  int dim() const override { return d_; }
  double value(std::span<const double> x) const override { return value_(x); }
  void gradient(std::span<const double> x, std::span<double> out) const override {
    grad_(x, out);
  }

 private:
  int d_;
  ValueFn value_;
  GradFn grad_;
};

/// Dirichlet-plus-potential energy: sum_j w_j (|grad u(x_j)|^2 + W(x_j) u(x_j)^2).
double energy(const FieldEvaluator& u, const QuadratureSet& q, const PotentialSpec& W);

/// Mean plus the weighted standard error of the same integrand; the error is
/// only statistically meaningful for Monte Carlo quadratures.
struct MeanWithError {
  double mean = 0;
  double se = 0;
};
MeanWithError energy_with_se(const FieldEvaluator& u, const QuadratureSet& q,
                             const PotentialSpec& W);

/// Quadrature L2 norm of u.
double l2_norm(const FieldEvaluator& u, const QuadratureSet& q);

/// Norm-form constraint ||u||_q - 1.
double constraint(const FieldEvaluator& u, const QuadratureSet& q);

/// Linearized energy potential at probe particle p with the field frozen:
/// V(p) = <grad u, grad Phi(p)>_q + <W u, Phi(p)>_q.
double potential_V(const FieldEvaluator& u, const MollifierTable& table, double tau,
                   const Particle& p, const QuadratureSet& q, const PotentialSpec& W);

/// Constraint potential C(p) = <u, Phi(p)>_q / ||u||_q. Throws
/// DegenerateStateError when ||u||_q = 0.
double potential_C(const FieldEvaluator& u, const MollifierTable& table, double tau,
                   const Particle& p, const QuadratureSet& q);

/// Tangent-projected parameter gradients of the potentials at p.
TangentVector grad_V(const FieldEvaluator& u, const MollifierTable& table, double tau,
                     const Particle& p, const QuadratureSet& q, const PotentialSpec& W);
TangentVector grad_C(const FieldEvaluator& u, const MollifierTable& table, double tau,
                     const Particle& p, const QuadratureSet& q);

/// Constrained steepest-descent direction for every particle of the ensemble,
/// sharing one pass of field samples across particles:
///   sigma  = sum_i <grad_V_i, grad_C_i> / sum_i |grad_C_i|^2
///   v_i    = -(grad_V_i - sigma * grad_C_i)
///   slope  = sqrt((1/m) sum_i |v_i|^2)
/// By construction (1/m) sum_i <v_i, grad_C_i> vanishes up to roundoff.
struct VelocityField {
  std::vector<TangentVector> v;
  std::vector<TangentVector> grad_v;  // tangent-projected energy gradients
  std::vector<TangentVector> grad_c;  // tangent-projected constraint gradients
  double sigma_mu = 0;
  double local_slope = 0;
  double grad_c_norm2_mean = 0;  // (1/m) sum_i |grad_C_i|^2
};

VelocityField velocity(const Ensemble& ens, const MollifierTable& table,
                       const QuadratureSet& q, const PotentialSpec& W);

/// Lagrange multiplier alone (same computation as velocity()).
double sigma_mu(const Ensemble& ens, const MollifierTable& table,
                const QuadratureSet& q, const PotentialSpec& W);

/// Max over random probe particles (a = 1, w uniform on the sphere, b uniform
/// in [-sqrt(d)-2, sqrt(d)+2]) of |V(theta) - sigma * C(theta)|; zero for
/// every probe exactly when u is a constrained critical point.
double stationarity_residual(const Ensemble& ens, const MollifierTable& table,
                             const QuadratureSet& q, const PotentialSpec& W,
                             int probe_count, Rng& rng);

/// Same residual for an arbitrary field and externally supplied multiplier
/// (used to check reference eigenpairs, where sigma is the eigenvalue).
double stationarity_residual_given(const FieldEvaluator& u, double sigma,
                                   const MollifierTable& table, double tau,
                                   const QuadratureSet& q, const PotentialSpec& W,
                                   int probe_count, Rng& rng);

}  // namespace spectralflow
