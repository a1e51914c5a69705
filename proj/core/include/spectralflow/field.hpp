#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spectralflow/activation.hpp"
#include "spectralflow/geometry.hpp"

namespace spectralflow {

/// Empirical measure with uniform weights 1/m; the represented field is
/// u(x) = (1/m) * sum_i a_i * hrelu_tau(w_i . x + b_i).
struct Ensemble {
  int d = 0;
  double tau = 20.0;
  std::vector<Particle> particles;

  int size() const { return static_cast<int>(particles.size()); }
};

/// Ambient parameter gradient of a feature; gw is not tangent-projected.
struct AmbientGrad {
  double ga = 0;
  std::vector<double> gw;
  double gb = 0;
};

/// Single-particle feature a * hrelu_tau(w.x + b). Zero whenever
/// |w.x + b| >= 1 + 1/tau, in particular for |b| >= sqrt(d) + 1 + 1/tau.
double feature(const MollifierTable& table, double tau, const Particle& p,
               std::span<const double> x);

/// Spatial gradient a * hrelu_tau'(z) * w written into out (size d).
void feature_xgrad(const MollifierTable& table, double tau, const Particle& p,
                   std::span<const double> x, std::span<double> out);

/// Ambient parameter gradient: (hrelu_tau(z), a*hrelu_tau'(z)*x, a*hrelu_tau'(z)).
AmbientGrad feature_theta_grad(const MollifierTable& table, double tau,
                               const Particle& p, std::span<const double> x);

/// Network value at one point: mean of features with deterministic pairwise
/// summation over particles.
double evaluate(const Ensemble& ens, const MollifierTable& table,
                std::span<const double> x);

/// Network spatial gradient at one point, written into out (size d).
void evaluate_grad(const Ensemble& ens, const MollifierTable& table,
                   std::span<const double> x, std::span<double> out);

/// Values and spatial gradients of the network on a batch of points
/// (row-major n x d). Reductions are pairwise over particles and points are
/// processed in fixed chunks, so results are bit-reproducible.
struct FieldSamples {
  int n = 0;
  int d = 0;
  std::vector<double> values;  // n
  std::vector<double> grads;   // n*d
};

FieldSamples evaluate_batch(const Ensemble& ens, const MollifierTable& table,
                            std::span<const double> points);

/// Versioned text checkpoint; doubles round-trip exactly (shortest form that
/// parses back to the same bits).
std::string serialize_ensemble(const Ensemble& ens);
Ensemble parse_ensemble(std::string_view text);

}  // namespace spectralflow
