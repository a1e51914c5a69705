#include "spectralflow/flow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "spectralflow/config.hpp"
#include "spectralflow/errors.hpp"
#include "spectralflow/summation.hpp"
#include "text_util.hpp"

namespace spectralflow {

namespace {

// splitmix64 of (seed, stream): independent deterministic substreams.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

int default_eval_grid(int d) {
  switch (d) {
    case 1:
      return 512;
    case 2:
      return 64;
    default:
      return 24;
  }
}

double ensemble_norm(const Ensemble& ens, const MollifierTable& table,
                     const QuadratureSet& q) {
  const FieldSamples s = evaluate_batch(ens, table, q.points);
  std::vector<double> terms(q.size());
  for (int j = 0; j < q.size(); ++j) {
    terms[j] = q.weights[j] * s.values[j] * s.values[j];
  }
  const double n2 = pairwise_sum(terms);
  return n2 > 0.0 ? std::sqrt(n2) : 0.0;
}

struct EnergyStats {
  double energy = 0;
  double se = 0;
  double norm2 = 0;
};

EnergyStats energy_from_samples(const FieldSamples& s, const QuadratureSet& q,
                                const std::vector<double>& wvals) {
  const int n = q.size();
  const int d = q.d;
  std::vector<double> f(n), terms(n);
  for (int j = 0; j < n; ++j) {
    const auto g = std::span<const double>(s.grads).subspan(
        static_cast<std::size_t>(j) * d, d);
    f[j] = dot(g, g) + wvals[j] * s.values[j] * s.values[j];
    terms[j] = q.weights[j] * f[j];
  }
  EnergyStats out;
  out.energy = pairwise_sum(terms);
  for (int j = 0; j < n; ++j) {
    const double dev = f[j] - out.energy;
    terms[j] = q.weights[j] * q.weights[j] * dev * dev;
  }
  out.se = std::sqrt(pairwise_sum(terms));
  for (int j = 0; j < n; ++j) {
    terms[j] = q.weights[j] * s.values[j] * s.values[j];
  }
  out.norm2 = pairwise_sum(terms);
  return out;
}

double aligned_l2_error(const FieldSamples& s, const std::vector<double>& ref_vals,
                        const QuadratureSet& q) {
  const int n = q.size();
  std::vector<double> minus(n), plus(n);
  for (int j = 0; j < n; ++j) {
    const double a = s.values[j], b = ref_vals[j];
    minus[j] = q.weights[j] * (a - b) * (a - b);
    plus[j] = q.weights[j] * (a + b) * (a + b);
  }
  return std::sqrt(std::min(pairwise_sum(minus), pairwise_sum(plus)));
}

}  // namespace

void FlowConfig::validate() const {
  if (d < 1) throw ConfigError("flow: d must be >= 1");
  if (m < 1) throw ConfigError("flow: m must be >= 1");
  if (!(tau > 0.0)) throw ConfigError("flow: tau must be positive");
  if (steps < 0) throw ConfigError("flow: steps must be >= 0");
  if (eta < 0.0) throw ConfigError("flow: eta must be >= 0 (0 means 1/(tau*m))");
  if (batch_n < 1) throw ConfigError("flow: batch must be >= 1");
  if (dataset_size < batch_n) throw ConfigError("flow: dataset smaller than batch");
  if (eval_cadence < 1) throw ConfigError("flow: eval_cadence must be >= 1");
  if (eval_grid_n < 0 || eval_grid_n == 1) throw ConfigError("flow: bad eval_grid");
  if (eval_mc_n < 2) throw ConfigError("flow: eval_mc must be >= 2");
  if (norm_grid_n < 0 || norm_grid_n == 1) throw ConfigError("flow: bad norm_grid");
  if (norm_grid_n > 0 && d > 3) {
    throw ConfigError("flow: norm_grid needs d <= 3 (tensor grid)");
  }
  if (probe_count < 1) throw ConfigError("flow: probe_count must be >= 1");
  if (r_max < 0.0) throw ConfigError("flow: r_max must be >= 0");
  if (mollifier_resolution < 64) {
    throw ConfigError("flow: mollifier_resolution must be >= 64");
  }
  if (potential.min_dim() > d) {
    throw ConfigError("flow: potential " + potential.to_string() +
                      " needs d >= " + std::to_string(potential.min_dim()));
  }
}

Ensemble init_ensemble(const FlowConfig& cfg, const MollifierTable& table,
                       const QuadratureSet& norm_q, Rng& rng, InitStats* stats) {
  const double b_range = std::sqrt(static_cast<double>(cfg.d)) + 2.0;
  for (int attempt = 1; attempt <= 8; ++attempt) {
    Ensemble ens;
    ens.d = cfg.d;
    ens.tau = cfg.tau;
    ens.particles.resize(cfg.m);
    for (Particle& p : ens.particles) {
      p.a = 1.0;
      p.w.resize(cfg.d);
      rng.unit_sphere(p.w);
      p.b = rng.uniform(-b_range, b_range);
    }
    const double norm = ensemble_norm(ens, table, norm_q);
    if (norm <= 0.0) continue;  // all slabs missed the quadrature; redraw
    const double scale = 1.0 / norm;
    for (Particle& p : ens.particles) p.a *= scale;
    if (stats != nullptr) {
      stats->attempts = attempt;
      std::vector<double> bs(cfg.m);
      for (int i = 0; i < cfg.m; ++i) bs[i] = ens.particles[i].b;
      std::sort(bs.begin(), bs.end());
      double gap = 0.0;
      for (int i = 1; i < cfg.m; ++i) gap = std::max(gap, bs[i] - bs[i - 1]);
      stats->b_gap = gap;
      std::vector<double> probe(cfg.d);
      double worst = 0.0;
      for (int t = 0; t < 64; ++t) {
        rng.unit_sphere(probe);
        double best = M_PI;
        for (const Particle& p : ens.particles) {
          const double c = std::clamp(dot(p.w, probe), -1.0, 1.0);
          best = std::min(best, std::acos(c));
        }
        worst = std::max(worst, best);
      }
      stats->sphere_gap = worst;
    }
    return ens;
  }
  throw DegenerateStateError(
      "init_ensemble: field vanished on the quadrature in 8 attempts");
}

double advance_and_rescale(Ensemble& ens, const MollifierTable& table,
                           const std::vector<TangentVector>& v, double eta,
                           const QuadratureSet& renorm_q) {
  if (v.size() != ens.particles.size()) {
    throw ConfigError("advance_and_rescale: velocity count mismatch");
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    ens.particles[i] = exp_map(ens.particles[i], v[i], eta);
  }
  const double norm = ensemble_norm(ens, table, renorm_q);
  if (norm <= 0.0) {
    throw DegenerateStateError("advance_and_rescale: field vanished after the step");
  }
  const double scale = 1.0 / norm;
  for (Particle& p : ens.particles) p.a *= scale;
  return scale;
}

StepReport step_lagrangian(Ensemble& ens, const MollifierTable& table,
                           const QuadratureSet& q, const PotentialSpec& W,
                           double eta) {
  const VelocityField vf = velocity(ens, table, q, W);
  StepReport rep;
  rep.sigma_mu = vf.sigma_mu;
  rep.local_slope = vf.local_slope;
  rep.rescale = advance_and_rescale(ens, table, vf.v, eta, q);
  return rep;
}

StepReport step_sgd_renorm(Ensemble& ens, const MollifierTable& table,
                           const QuadratureSet& batch_q, const PotentialSpec& W,
                           double eta, const QuadratureSet* renorm_q) {
  const VelocityField vf = velocity(ens, table, batch_q, W);
  std::vector<TangentVector> descent(vf.grad_v.size());
  for (std::size_t i = 0; i < vf.grad_v.size(); ++i) {
    TangentVector& t = descent[i];
    const TangentVector& g = vf.grad_v[i];
    t.da = -g.da;
    t.db = -g.db;
    t.dw.resize(g.dw.size());
    for (std::size_t k = 0; k < g.dw.size(); ++k) t.dw[k] = -g.dw[k];
  }
  StepReport rep;
  rep.sigma_mu = vf.sigma_mu;
  rep.local_slope = vf.local_slope;
  rep.rescale = advance_and_rescale(ens, table, descent, eta,
                                    renorm_q != nullptr ? *renorm_q : batch_q);
  return rep;
}

RunRecord run_flow(const FlowConfig& cfg, const ReferenceSolution* reference) {
  cfg.validate();
  RunRecord rec;
  rec.config_text = serialize_flow_config(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const double eta = cfg.effective_eta();
  const bool sgd = cfg.integrator == FlowConfig::Integrator::SgdRenorm;

  try {
    const MollifierTable table = build_mollifier(cfg.mollifier_resolution);
    Rng rng_init(sub_seed(cfg.seed, 0));
    Rng rng_data(sub_seed(cfg.seed, 1));
    Rng rng_eval(sub_seed(cfg.seed, 2));

    QuadratureSet eval_q = cfg.d <= 3
                               ? tensor_grid_quadrature(
                                     cfg.d, cfg.eval_grid_n > 0 ? cfg.eval_grid_n
                                                                : default_eval_grid(cfg.d))
                               : mc_quadrature(cfg.d, cfg.eval_mc_n, rng_eval);
    std::vector<double> eval_wvals(eval_q.size());
    for (int j = 0; j < eval_q.size(); ++j) {
      eval_wvals[j] = eval_potential(cfg.potential, eval_q.point(j));
    }
    std::vector<double> ref_vals;
    if (reference != nullptr) {
      const ReferenceEvaluator ref_eval(*reference, cfg.d);
      ref_vals.resize(eval_q.size());
      for (int j = 0; j < eval_q.size(); ++j) {
        ref_vals[j] = ref_eval.value(eval_q.point(j));
      }
    }

    // Dataset and deterministic cycling minibatches (sgd only).
    std::vector<double> dataset;
    if (sgd) {
      dataset.resize(static_cast<std::size_t>(cfg.dataset_size) * cfg.d);
      for (double& c : dataset) c = rng_data.uniform01();
    }
    const auto build_batch = [&](std::int64_t step_index) {
      std::vector<double> pts(static_cast<std::size_t>(cfg.batch_n) * cfg.d);
      const std::int64_t offset =
          (step_index * cfg.batch_n) % cfg.dataset_size;
      for (int r = 0; r < cfg.batch_n; ++r) {
        const std::int64_t src = (offset + r) % cfg.dataset_size;
        for (int k = 0; k < cfg.d; ++k) {
          pts[static_cast<std::size_t>(r) * cfg.d + k] =
              dataset[static_cast<std::size_t>(src) * cfg.d + k];
        }
      }
      return quadrature_from_points(cfg.d, std::move(pts));
    };

    // Renormalization quadrature: fixed grid when configured, otherwise the
    // lagrangian integration quadrature or the most recent sgd batch.
    QuadratureSet norm_grid;
    const bool has_norm_grid = sgd && cfg.norm_grid_n > 0;
    if (has_norm_grid) norm_grid = tensor_grid_quadrature(cfg.d, cfg.norm_grid_n);
    std::int64_t last_batch_index = 0;
    const auto current_norm_q = [&]() -> QuadratureSet {
      if (!sgd) return eval_q;
      if (has_norm_grid) return norm_grid;
      return build_batch(last_batch_index);
    };

    const QuadratureSet init_q = current_norm_q();
    Ensemble ens = init_ensemble(cfg, table, init_q, rng_init, &rec.init);

    // Hard support cap: projection applied to every state the run produces,
    // including the initial one; hits are labelled by the state index they
    // clipped (the state after advancing step k is state k + 1).
    const auto clamp_support = [&](std::int64_t state_index) {
      if (cfg.r_max <= 0.0) return;
      bool clipped = false;
      for (Particle& p : ens.particles) {
        if (std::abs(p.a) > cfg.r_max) {
          p.a = std::clamp(p.a, -cfg.r_max, cfg.r_max);
          clipped = true;
        }
        if (std::abs(p.b) > cfg.r_max) {
          p.b = std::clamp(p.b, -cfg.r_max, cfg.r_max);
          clipped = true;
        }
      }
      if (clipped) rec.r_max_hits.push_back(state_index);
    };
    clamp_support(0);

    const auto emit_row = [&](std::int64_t step) {
      EvalRow row;
      row.step = step;
      row.time_s = static_cast<double>(step) * eta;
      const FieldSamples samples = evaluate_batch(ens, table, eval_q.points);
      const EnergyStats es = energy_from_samples(samples, eval_q, eval_wvals);
      if (es.norm2 <= 0.0) {
        throw DegenerateStateError("run_flow: field vanished on the evaluation grid");
      }
      row.energy = es.energy;
      row.energy_se = es.se;
      row.rayleigh = es.energy / es.norm2;
      const VelocityField vf = velocity(ens, table, eval_q, cfg.potential);
      row.sigma_mu = vf.sigma_mu;
      row.local_slope = vf.local_slope;
      const QuadratureSet norm_q = current_norm_q();
      row.constraint = ensemble_norm(ens, table, norm_q) - 1.0;
      row.l2_error = reference != nullptr
                         ? aligned_l2_error(samples, ref_vals, eval_q)
                         : std::numeric_limits<double>::quiet_NaN();
      row.r_t = support_box_radius(ens.particles);
      row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
      rec.rows.push_back(row);
    };

    for (std::int64_t step = 0;; ++step) {
      if (step % cfg.eval_cadence == 0 || step == cfg.steps) emit_row(step);
      if (step >= cfg.steps) break;
      if (sgd) {
        const QuadratureSet batch = build_batch(step);
        last_batch_index = step;
        step_sgd_renorm(ens, table, batch, cfg.potential, eta,
                        has_norm_grid ? &norm_grid : nullptr);
      } else {
        step_lagrangian(ens, table, eval_q, cfg.potential, eta);
      }
      clamp_support(step + 1);
    }
    rec.final_state = ens;
  } catch (const DegenerateStateError& e) {
    rec.incomplete = true;
    rec.error = e.what();
  } catch (const SolverError& e) {
    rec.incomplete = true;
    rec.error = e.what();
  }
  return rec;
}

std::string RunRecord::to_csv(bool include_wall_ms) const {
  std::string out =
      "step,time_s,energy,rayleigh,sigma_mu,constraint,local_slope,l2_error,r_t,"
      "wall_ms\n";
  for (const EvalRow& r : rows) {
    out += std::to_string(r.step);
    out += ',';
    out += detail::format_double(r.time_s);
    out += ',';
    out += detail::format_double(r.energy);
    out += ',';
    out += detail::format_double(r.rayleigh);
    out += ',';
    out += detail::format_double(r.sigma_mu);
    out += ',';
    out += detail::format_double(r.constraint);
    out += ',';
    out += detail::format_double(r.local_slope);
    out += ',';
    out += detail::format_double(r.l2_error);
    out += ',';
    out += detail::format_double(r.r_t);
    out += ',';
    out += std::to_string(include_wall_ms ? r.wall_ms : 0);
    out += '\n';
  }
  return out;
}

SupportGrowthReport support_growth_check(const RunRecord& record) {
  SupportGrowthReport rep;
  if (record.rows.empty()) return rep;
  rep.r_first = record.rows.front().r_t;
  rep.r_last = record.rows.back().r_t;
  rep.r_max_hits = record.r_max_hits;
  double sum_t = 0, sum_y = 0, sum_tt = 0, sum_ty = 0;
  int n = 0;
  for (const EvalRow& r : record.rows) {
    if (!std::isfinite(r.r_t)) {
      rep.finite = false;
      return rep;
    }
    if (r.r_t <= 0.0) continue;
    const double y = std::log(r.r_t);
    sum_t += r.time_s;
    sum_y += y;
    sum_tt += r.time_s * r.time_s;
    sum_ty += r.time_s * y;
    ++n;
  }
  if (n >= 2) {
    const double var = sum_tt - sum_t * sum_t / n;
    if (var > 0.0) rep.growth_rate = (sum_ty - sum_t * sum_y / n) / var;
  }
  return rep;
}

}  // namespace spectralflow
