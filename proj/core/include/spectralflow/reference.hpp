#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spectralflow/functionals.hpp"
#include "spectralflow/potentials.hpp"

namespace spectralflow {

/// Compressed sparse row matrix (symmetric by construction here).
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr;  // n+1
  std::vector<int> col;
  std::vector<double> val;

  void multiply(std::span<const double> x, std::span<double> y) const;
};

/// Neumann finite differences on the unit interval/square in flux form.
/// The mirror ghost-node closure of the 5-point stencil is D^{-1} K with K
/// symmetric and D the diagonal of trapezoid boundary factors, so the
/// operator is kept as the generalized pair  K_W u = lambda D u  with
/// K_W = K + D diag(W). apply() gives the plain stencil A = D^{-1} K_W.
struct FdOperator {
  int grid_n = 0;  // cells per axis
  int dim = 0;     // 1 or 2
  CsrMatrix stiffness;       // K_W, symmetric
  std::vector<double> mass;  // D, entries in (0,1]

  int nodes() const { return stiffness.n; }
  void apply(std::span<const double> x, std::span<double> y) const;
};

/// 2D assembly; W is sampled at the nodes ((i*h, j*h), remaining coordinates
/// absent). Laplacian rows sum to zero; W=0 annihilates constants exactly.
FdOperator assemble_fd(const PotentialSpec& W, int grid_n);

/// 1D variant on [0,1] (used for convergence oracles).
FdOperator assemble_fd_1d(const PotentialSpec& W, int grid_n);

/// Ground eigenpair of the finite-difference operator. u is stored nodally,
/// L2-normalized on the grid (sqrt(h^dim * u^T D u) = 1) with positive mean.
struct ReferenceSolution {
  int grid_n = 0;
  int dim = 2;
  double lambda = 0;
  double residual = 0;  // ||A u - lambda u||_2 / ||u||_2 at exit
  std::vector<double> u;
};

struct EigenSolveOptions {
  double tol = 1e-8;       // outer residual target
  int max_outer = 300;     // inverse-iteration cap
  double cg_tol = 1e-10;   // inner relative residual
  int cg_max_iter = 200000;
};

/// Shift-inverted power iteration with conjugate-gradient inner solves.
/// The shift sits 1 below the Gershgorin bound min_i W_i (Laplacian rows sum
/// to zero with nonpositive off-diagonal entries), so the shifted matrix is
/// positive definite. Deterministic given (W, grid_n). Throws SolverError on
/// iteration-cap overrun.
ReferenceSolution ground_eigenpair(const PotentialSpec& W, int grid_n,
                                   const EigenSolveOptions& opts = {});

/// Extends a 2D grid solution to [0,1]^d: bilinear interpolation in (x1,x2),
/// constant in the remaining coordinates. Holds a copy of the nodal data.
class ReferenceEvaluator final : public FieldEvaluator {
 public:
  ReferenceEvaluator(const ReferenceSolution& sol, int d);
  int dim() const override { return d_; }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  double lambda() const { return lambda_; }

 private:
  int d_;
  int grid_n_;
  double lambda_;
  std::vector<double> u_;
};

/// Sign-aligned quadrature L2 distance: min over s in {+1,-1} of ||u - s*ref||.
double l2_error(const FieldEvaluator& u, const FieldEvaluator& ref,
                const QuadratureSet& q);

/// Observed convergence order from three nested grids (N, 2N, 4N) and the
/// matching extrapolation. Flat sequences are flagged degenerate and return
/// the finest value unchanged.
struct RichardsonResult {
  double order = 0;
  double extrapolated = 0;
  bool degenerate = false;
};
RichardsonResult richardson(double coarse, double medium, double fine);

/// Versioned text persistence for reference solutions.
std::string serialize_reference(const ReferenceSolution& sol);
ReferenceSolution parse_reference(std::string_view text);

}  // namespace spectralflow
