#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spectralflow/field.hpp"
#include "spectralflow/functionals.hpp"
#include "spectralflow/potentials.hpp"
#include "spectralflow/reference.hpp"
#include "spectralflow/rng.hpp"

namespace spectralflow {

struct FlowConfig {
  enum class Integrator { SgdRenorm, Lagrangian };

  int d = 2;
  int m = 100;
  double tau = 20.0;
  Integrator integrator = Integrator::SgdRenorm;
  std::int64_t steps = 20000;
  double eta = 0.0;  // <= 0 selects the default 1/(tau*m)
  int batch_n = 100;
  std::int64_t dataset_size = 100000;
  std::uint64_t seed = 1;
  std::int64_t eval_cadence = 100;
  int eval_grid_n = 0;   // 0 selects 512/64/24 for d = 1/2/3
  int eval_mc_n = 10000; // held-out sample size when d > 3
  int norm_grid_n = 0;   // sgd renormalization grid; 0 renormalizes on the batch
  int probe_count = 64;
  double r_max = 0.0;    // optional hard cap on max(|a|,|b|); 0 disables
  int mollifier_resolution = 4096;
  PotentialSpec potential;

  double effective_eta() const { return eta > 0.0 ? eta : 1.0 / (tau * m); }
  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/// Coverage diagnostics of the initial draw.
struct InitStats {
  int attempts = 1;
  double b_gap = 0;        // largest gap between consecutive sorted biases
  double sphere_gap = 0;   // max over probe directions of the nearest w angle
};

/// Draws m particles with w uniform on the sphere, b uniform in
/// [-sqrt(d)-2, sqrt(d)+2], a = 1, then rescales every amplitude by the
/// common factor 1/||u|| measured on norm_q so the constraint starts at 0.
/// Retries with fresh draws when the field vanishes on norm_q; throws
/// DegenerateStateError after 8 failed attempts.
Ensemble init_ensemble(const FlowConfig& cfg, const MollifierTable& table,
                       const QuadratureSet& norm_q, Rng& rng,
                       InitStats* stats = nullptr);

struct StepReport {
  double sigma_mu = 0;
  double local_slope = 0;
  double rescale = 1;  // common amplitude factor applied after the move
};

/// Moves every particle along v by one exp_map step of size eta, then applies
/// one common amplitude rescale restoring ||u|| = 1 on renorm_q. Zero
/// velocity leaves the state unchanged and reports rescale 1 (up to roundoff).
double advance_and_rescale(Ensemble& ens, const MollifierTable& table,
                           const std::vector<TangentVector>& v, double eta,
                           const QuadratureSet& renorm_q);

/// Constrained step: velocity -(grad_V - sigma*grad_C) on q, exp_map advance,
/// multiplicative drift correction on q.
StepReport step_lagrangian(Ensemble& ens, const MollifierTable& table,
                           const QuadratureSet& q, const PotentialSpec& W,
                           double eta);

/// Unconstrained minibatch step: velocity -grad_V on batch_q, exp_map
/// advance, then every amplitude rescaled by 1/||u|| on renorm_q (the batch
/// itself when renorm_q is null).
StepReport step_sgd_renorm(Ensemble& ens, const MollifierTable& table,
                           const QuadratureSet& batch_q, const PotentialSpec& W,
                           double eta, const QuadratureSet* renorm_q = nullptr);

/// One evaluation-cadence row. time_s is flow time (step * eta); wall_ms is
/// measured and therefore excluded from determinism comparisons; energy_se
/// only carries statistical meaning for Monte Carlo evaluation quadratures.
struct EvalRow {
  std::int64_t step = 0;
  double time_s = 0;
  double energy = 0;
  double energy_se = 0;
  double rayleigh = 0;
  double sigma_mu = 0;
  double constraint = 0;
  double local_slope = 0;
  double l2_error = 0;  // NaN when no reference was supplied
  double r_t = 0;
  std::int64_t wall_ms = 0;
};

struct RunRecord {
  std::string config_text;  // canonical serialized config snapshot
  InitStats init;
  std::vector<EvalRow> rows;
  Ensemble final_state;
  std::vector<std::int64_t> r_max_hits;  // steps where the hard cap clipped
  bool incomplete = false;
  std::string error;

  /// CSV with the fixed column set
  /// step,time_s,energy,rayleigh,sigma_mu,constraint,local_slope,l2_error,r_t,wall_ms.
  /// Passing include_wall_ms = false writes 0 in the timing column, giving
  /// byte-identical output for identical (seed, config).
  std::string to_csv(bool include_wall_ms = true) const;
};

/// Full run: build tables and quadratures, init, iterate, evaluate every
/// eval_cadence steps plus the final step. Degenerate-measure and solver
/// failures are caught and recorded (incomplete = true, rows kept).
RunRecord run_flow(const FlowConfig& cfg, const ReferenceSolution* reference = nullptr);

/// Support radius diagnostics over the recorded rows: all radii finite, the
/// least-squares growth rate of log r_t against flow time, and any hard-cap
/// clips. The radius is never clipped unless r_max was configured.
struct SupportGrowthReport {
  bool finite = true;
  double growth_rate = 0;
  double r_first = 0;
  double r_last = 0;
  std::vector<std::int64_t> r_max_hits;
};
SupportGrowthReport support_growth_check(const RunRecord& record);

}  // namespace spectralflow
