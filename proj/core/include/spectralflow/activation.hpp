#pragma once

#include <vector>

namespace spectralflow {

/// Compactly supported mollifier rho(y) = Z * exp(-tan(pi*y/2)^2 / 2) on
/// [-1,1], tabulated on a uniform grid together with its antiderivatives.
/// Z is fixed so the integral of rho over [-1,1] is 1. All derivatives of rho
/// vanish at the endpoints, so simple composite quadrature on this grid is
/// accurate to near machine precision at the default resolution.
struct MollifierTable {
  int resolution = 0;             // grid cells on [-1,1]; >= 64
  double normalization = 0;       // Z
  double max_density = 0;         // sup of rho, used in derivative bounds
  std::vector<double> y;          // nodes, size resolution+1
  std::vector<double> rho;        // rho(y_k)
  std::vector<double> rho_prime;  // rho'(y_k), closed form
  std::vector<double> cdf;        // integral of rho from -1 to y_k
  std::vector<double> m1;         // integral of t*rho(t) from -1 to y_k
};

/// Builds the table with per-cell Simpson quadrature (midpoint refinement).
/// Throws ConfigError unless resolution >= 64.
MollifierTable build_mollifier(int resolution = 4096);

/// Interpolation of the stored samples; zero outside [-1,1]. All three
/// readers use cubic Hermite cells with the exactly known nodal slopes
/// (cdf' = rho, m1' = y*rho, rho' closed form), so interpolation error is
/// ~1e-13 and survives division by finite-difference steps in the tests.
double mollifier_density(const MollifierTable& table, double y);
/// CDF; clamps to 0 below -1 and 1 above +1.
double mollifier_cdf(const MollifierTable& table, double y);
/// First-moment antiderivative; 0 outside (both tails: m1(-1) = 0 and
/// m1(1) = 0 by symmetry of rho).
double mollifier_m1(const MollifierTable& table, double y);

/// Mollified ReLU sigma_tau = (rho_tau * relu), rho_tau(y) = tau*rho(tau*y).
/// Exactly y for tau*y >= 1 and exactly 0 for tau*y <= -1; in between it is
/// y*cdf(tau*y) - m1(tau*y)/tau, read off the antiderivative tables.
/// Throws ConfigError for tau <= 0.
double softplus_tau(const MollifierTable& table, double tau, double y);

/// Value and first two derivatives of the mollified hat at one point.
struct ActivationEval {
  double value = 0;
  double d1 = 0;
  double d2 = 0;
};

/// Exact hat: relu(y+1) - relu(2y) + relu(y-1); supported on [-1,1] with
/// peak value 1 at y = 0.
double hrelu(double y);

/// Derivative of the exact hat with the midpoint convention at the kinks
/// (+-1/2 at y = -+1, 0 at y = 0), matching the tau -> infinity limit of the
/// mollified derivative.
double hrelu_d1(double y);

/// Mollified hat sigma_{H,tau}(y) = sigma_tau(y+1) - sigma_tau(2y)
/// + sigma_tau(y-1), with chain-rule derivatives:
///   d1 = cdf_tau(y+1) - 2*cdf_tau(2y) + cdf_tau(y-1)
///   d2 = rho_tau(y+1) - 4*rho_tau(2y) + rho_tau(y-1)
/// where cdf_tau(z) = cdf(tau*z) clamped and rho_tau(z) = tau*rho(tau*z).
ActivationEval hrelu_tau(const MollifierTable& table, double tau, double y);

/// H1 distance between the exact and mollified hat, approximated with the
/// trapezoid rule on grid_n uniform cells over [-3,3]. Decays like
/// C/sqrt(tau). Throws ConfigError unless grid_n >= 1000.
double h1_gap(const MollifierTable& table, double tau, int grid_n);

}  // namespace spectralflow
