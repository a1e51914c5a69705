#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "spectralflow/errors.hpp"
#include "spectralflow/flow.hpp"
#include "spectralflow/rng.hpp"

using namespace spectralflow;

namespace {

const MollifierTable& table() {
  static const MollifierTable t = build_mollifier();
  return t;
}

FlowConfig small_config() {
  FlowConfig cfg;
  cfg.d = 2;
  cfg.m = 16;
  cfg.tau = 20.0;
  cfg.steps = 200;
  cfg.batch_n = 64;
  cfg.eval_cadence = 50;
  cfg.eval_grid_n = 24;
  cfg.probe_count = 8;
  cfg.potential = PotentialSpec::parse("cos1d:100");
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  FlowConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.effective_eta() == doctest::Approx(1.0 / (20.0 * 16)).epsilon(1e-15));
  cfg.eta = 0.25;
  CHECK(cfg.effective_eta() == 0.25);

  SUBCASE("bad fields throw") {
    FlowConfig bad = small_config();
    bad.m = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.d = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.steps = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.batch_n = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.eval_cadence = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.mollifier_resolution = 16;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.potential = PotentialSpec::parse("cos_diag:1");
    bad.d = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_CASE("initial ensembles start on the constraint manifold") {
  Rng rng(131);
  FlowConfig cfg = small_config();
  cfg.m = 40;
  const QuadratureSet q = tensor_grid_quadrature(2, 48);
  InitStats stats;
  const Ensemble ens = init_ensemble(cfg, table(), q, rng, &stats);
  REQUIRE(ens.size() == 40);
  CHECK(ens.d == 2);
  CHECK(ens.tau == 20.0);
  CHECK(stats.attempts >= 1);
  CHECK(stats.b_gap > 0.0);

  const double limit = std::sqrt(2.0) + 2.0;
  double a0 = std::abs(ens.particles[0].a);
  for (const Particle& p : ens.particles) {
    CHECK(std::abs(p.b) <= limit);
    CHECK(std::abs(norm(p.w) - 1.0) <= 1e-12);
    // One common amplitude for every particle.
    CHECK(std::abs(p.a) == doctest::Approx(a0).epsilon(1e-15));
  }
  const EnsembleEvaluator u(ens, table());
  CHECK(std::abs(constraint(u, q)) <= 1e-10);

  SUBCASE("single particle still normalizes") {
    FlowConfig one = small_config();
    one.m = 1;
    Rng r2(17);
    const Ensemble e1 = init_ensemble(one, table(), q, r2);
    const EnsembleEvaluator u1(e1, table());
    CHECK(std::abs(constraint(u1, q)) <= 1e-10);
  }
}

TEST_CASE("advancing with zero velocity is the identity up to renormalization") {
  Rng rng(137);
  FlowConfig cfg = small_config();
  const QuadratureSet q = tensor_grid_quadrature(2, 32);
  Ensemble ens = init_ensemble(cfg, table(), q, rng);
  const Ensemble before = ens;
  std::vector<TangentVector> zero(ens.size());
  for (int i = 0; i < ens.size(); ++i) {
    zero[i].da = 0.0;
    zero[i].db = 0.0;
    zero[i].dw.assign(2, 0.0);
  }
  const double rescale = advance_and_rescale(ens, table(), zero, 0.01, q);
  CHECK(std::abs(rescale - 1.0) <= 1e-12);
  for (int i = 0; i < ens.size(); ++i) {
    CHECK(std::abs(ens.particles[i].a - before.particles[i].a) <=
          1e-14 * std::abs(before.particles[i].a));
    CHECK(ens.particles[i].b == before.particles[i].b);
    for (int j = 0; j < 2; ++j)
      CHECK(ens.particles[i].w[j] == before.particles[i].w[j]);
  }
}

TEST_CASE("step displacement scales linearly with the step size") {
  Rng rng(139);
  FlowConfig cfg = small_config();
  const QuadratureSet q = tensor_grid_quadrature(2, 48);
  const Ensemble start = init_ensemble(cfg, table(), q, rng);
  const PotentialSpec W = cfg.potential;

  const auto displacement = [&](double eta) {
    Ensemble ens = start;
    step_lagrangian(ens, table(), q, W, eta);
    double acc = 0.0;
    for (int i = 0; i < ens.size(); ++i) {
      const double g = geodesic_distance(start.particles[i], ens.particles[i]);
      acc += g * g;
    }
    return std::sqrt(acc / ens.size());
  };
  const double full = displacement(2e-4);
  const double half = displacement(1e-4);
  CHECK(full / half == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("lagrangian steps preserve the constraint") {
  Rng rng(149);
  FlowConfig cfg = small_config();
  const QuadratureSet q = tensor_grid_quadrature(2, 48);
  Ensemble ens = init_ensemble(cfg, table(), q, rng);
  const PotentialSpec W = cfg.potential;
  for (int s = 0; s < 25; ++s) {
    const StepReport rep = step_lagrangian(ens, table(), q, W, cfg.effective_eta());
    CHECK(std::isfinite(rep.sigma_mu));
    CHECK(rep.local_slope >= 0.0);
    const EnsembleEvaluator u(ens, table());
    CHECK(std::abs(constraint(u, q)) <= 1e-12);
  }
}

TEST_CASE("sgd steps renormalize on the supplied quadrature") {
  Rng rng(151);
  FlowConfig cfg = small_config();
  const QuadratureSet norm_q = tensor_grid_quadrature(2, 32);
  Ensemble ens = init_ensemble(cfg, table(), norm_q, rng);
  const PotentialSpec W = cfg.potential;
  for (int s = 0; s < 10; ++s) {
    const QuadratureSet batch = mc_quadrature(2, 128, rng);
    step_sgd_renorm(ens, table(), batch, W, cfg.effective_eta(), &norm_q);
    const EnsembleEvaluator u(ens, table());
    CHECK(std::abs(constraint(u, norm_q)) <= 1e-12);
  }

  // Null renormalization grid falls back to the batch itself.
  Ensemble e2 = init_ensemble(cfg, table(), norm_q, rng);
  const QuadratureSet batch = mc_quadrature(2, 128, rng);
  step_sgd_renorm(e2, table(), batch, W, cfg.effective_eta(), nullptr);
  const EnsembleEvaluator u2(e2, table());
  CHECK(std::abs(constraint(u2, batch)) <= 1e-12);
}

TEST_CASE("deterministic full-gradient flow descends the energy") {
  FlowConfig cfg = small_config();
  cfg.integrator = FlowConfig::Integrator::Lagrangian;
  cfg.m = 12;
  cfg.steps = 400;
  cfg.eval_cadence = 10;
  cfg.eval_grid_n = 32;
  cfg.potential = PotentialSpec::parse("cos1d:100");
  const RunRecord rec = run_flow(cfg);
  REQUIRE(!rec.incomplete);
  REQUIRE(rec.rows.size() >= 10);

  // Eventually monotone within a per-step tolerance that absorbs the
  // O(eta^2) drift of the explicit integrator.
  const double eta = cfg.effective_eta();
  int violations = 0;
  double worst = 0.0;
  for (std::size_t k = 1; k < rec.rows.size(); ++k) {
    const double jump = rec.rows[k].energy - rec.rows[k - 1].energy;
    const std::int64_t dsteps = rec.rows[k].step - rec.rows[k - 1].step;
    const double allow = 50.0 * eta * eta * cfg.tau * cfg.tau * double(dsteps);
    if (jump > allow) {
      ++violations;
      worst = std::max(worst, jump);
    }
  }
  CHECK(violations == 0);
  CHECK(rec.rows.back().energy < rec.rows.front().energy);
  // Flow time advances as steps * eta.
  CHECK(rec.rows.back().time_s ==
        doctest::Approx(double(rec.rows.back().step) * eta).epsilon(1e-12));
}

TEST_CASE("run bookkeeping") {
  FlowConfig cfg = small_config();
  cfg.steps = 0;
  const RunRecord rec = run_flow(cfg);
  REQUIRE(!rec.incomplete);
  REQUIRE(rec.rows.size() == 1);  // the final state is always evaluated
  CHECK(rec.rows[0].step == 0);
  CHECK(std::isnan(rec.rows[0].l2_error));
  CHECK(rec.rows[0].r_t > 0.0);
  CHECK(!rec.config_text.empty());

  SUBCASE("csv header and row count") {
    const std::string csv = rec.to_csv(false);
    const std::string header =
        "step,time_s,energy,rayleigh,sigma_mu,constraint,local_slope,l2_error,r_t,"
        "wall_ms";
    CHECK(csv.substr(0, header.size()) == header);
    CHECK(csv.find("\n0,") != std::string::npos);
  }
}

TEST_CASE("identical seed and config reproduce the run byte for byte") {
  FlowConfig cfg = small_config();
  cfg.steps = 120;
  const RunRecord a = run_flow(cfg);
  const RunRecord b = run_flow(cfg);
  CHECK(a.to_csv(false) == b.to_csv(false));
  CHECK(serialize_ensemble(a.final_state) == serialize_ensemble(b.final_state));
  FlowConfig other = cfg;
  other.seed = cfg.seed + 1;
  const RunRecord c = run_flow(other);
  CHECK(a.to_csv(false) != c.to_csv(false));
}

TEST_CASE("sgd run keeps the constraint column small and tracks a reference") {
  const ReferenceSolution ref = ground_eigenpair(PotentialSpec::parse("cos1d:100"), 64);
  FlowConfig cfg = small_config();
  cfg.m = 32;
  cfg.steps = 300;
  cfg.eval_cadence = 60;
  cfg.norm_grid_n = 32;
  const RunRecord rec = run_flow(cfg, &ref);
  REQUIRE(!rec.incomplete);
  for (const EvalRow& row : rec.rows) {
    CHECK(std::abs(row.constraint) <= 1e-8);
    CHECK(std::isfinite(row.l2_error));
    CHECK(row.l2_error >= 0.0);
    CHECK(std::isfinite(row.rayleigh));
    CHECK(row.r_t > 0.0);
  }
}

TEST_CASE("hard support cap clips and is reported") {
  FlowConfig cfg = small_config();
  cfg.steps = 150;
  cfg.r_max = 1.05;  // tight enough that the cap engages quickly
  const RunRecord rec = run_flow(cfg);
  REQUIRE(!rec.incomplete);
  for (const EvalRow& row : rec.rows) CHECK(row.r_t <= cfg.r_max + 1e-12);
  const SupportGrowthReport rep = support_growth_check(rec);
  CHECK(rep.finite);
  CHECK(rep.r_max_hits == rec.r_max_hits);

  FlowConfig free = small_config();
  free.steps = 150;
  const SupportGrowthReport unclipped = support_growth_check(run_flow(free));
  CHECK(unclipped.finite);
  CHECK(unclipped.r_max_hits.empty());
  CHECK(unclipped.r_first > 0.0);
  CHECK(unclipped.r_last > 0.0);
}
