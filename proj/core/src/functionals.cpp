#include "spectralflow/functionals.hpp"

#include <cmath>
#include <cstddef>
#include <string>

#include "spectralflow/errors.hpp"
#include "spectralflow/summation.hpp"

namespace spectralflow {

namespace {

constexpr double kWeightSumTol = 1e-12;

// Per-point data shared by every particle-level reduction on one quadrature.
struct SampleContext {
  FieldSamples field;            // u and grad u at the quadrature points
  std::vector<double> wvals;     // potential samples
  double norm = 0;               // quadrature L2 norm of u
};

std::vector<double> potential_samples(const QuadratureSet& q, const PotentialSpec& W) {
  std::vector<double> wvals(q.size());
  for (int j = 0; j < q.size(); ++j) wvals[j] = eval_potential(W, q.point(j));
  return wvals;
}

FieldSamples sample_evaluator(const FieldEvaluator& u, const QuadratureSet& q) {
  FieldSamples s;
  s.n = q.size();
  s.d = q.d;
  s.values.resize(s.n);
  s.grads.resize(static_cast<std::size_t>(s.n) * s.d);
  std::vector<double> g(q.d);
  for (int j = 0; j < s.n; ++j) {
    const auto x = q.point(j);
    s.values[j] = u.value(x);
    u.gradient(x, g);
    for (int k = 0; k < q.d; ++k) s.grads[static_cast<std::size_t>(j) * q.d + k] = g[k];
  }
  return s;
}

double samples_norm(const FieldSamples& s, const QuadratureSet& q) {
  std::vector<double> terms(q.size());
  for (int j = 0; j < q.size(); ++j) {
    terms[j] = q.weights[j] * s.values[j] * s.values[j];
  }
  const double n2 = pairwise_sum(terms);
  return n2 > 0.0 ? std::sqrt(n2) : 0.0;
}

// Activation traces of one particle along the quadrature, plus grad u . w.
struct ParticleTrace {
  std::vector<double> val;   // hrelu_tau(z_j)
  std::vector<double> d1;    // first derivative
  std::vector<double> d2;    // second derivative
  std::vector<double> gdotw; // grad u(x_j) . w

  void resize(int n) {
    val.resize(n);
    d1.resize(n);
    d2.resize(n);
    gdotw.resize(n);
  }
};

void fill_trace(const MollifierTable& table, double tau, const Particle& p,
                const QuadratureSet& q, const FieldSamples& s, ParticleTrace& tr) {
  const int n = q.size();
  const int d = q.d;
  tr.resize(n);
  for (int j = 0; j < n; ++j) {
    const auto x = q.point(j);
    const double z = dot(p.w, x) + p.b;
    const ActivationEval e = hrelu_tau(table, tau, z);
    tr.val[j] = e.value;
    tr.d1[j] = e.d1;
    tr.d2[j] = e.d2;
    tr.gdotw[j] = dot(std::span<const double>(s.grads).subspan(
                          static_cast<std::size_t>(j) * d, d),
                      p.w);
  }
}

// Ambient energy-potential gradient of one particle; scratch holds n terms.
void ambient_grad_V(const Particle& p, const QuadratureSet& q, const SampleContext& ctx,
                    const ParticleTrace& tr, std::vector<double>& scratch, double& ga,
                    std::vector<double>& gw, double& gb) {
  const int n = q.size();
  const int d = q.d;
  scratch.resize(n);
  for (int j = 0; j < n; ++j) {
    scratch[j] = q.weights[j] *
                 (tr.gdotw[j] * tr.d1[j] + ctx.wvals[j] * ctx.field.values[j] * tr.val[j]);
  }
  ga = pairwise_sum(scratch);
  for (int j = 0; j < n; ++j) {
    scratch[j] = q.weights[j] *
                 (tr.gdotw[j] * tr.d2[j] + ctx.wvals[j] * ctx.field.values[j] * tr.d1[j]);
  }
  gb = p.a * pairwise_sum(scratch);
  gw.resize(d);
  for (int k = 0; k < d; ++k) {
    for (int j = 0; j < n; ++j) {
      const auto x = q.point(j);
      const double du_k = ctx.field.grads[static_cast<std::size_t>(j) * d + k];
      scratch[j] = q.weights[j] *
                   (tr.gdotw[j] * tr.d2[j] * x[k] + tr.d1[j] * du_k +
                    ctx.wvals[j] * ctx.field.values[j] * tr.d1[j] * x[k]);
    }
    gw[k] = p.a * pairwise_sum(scratch);
  }
}

// Ambient constraint-potential gradient; requires ctx.norm > 0.
void ambient_grad_C(const Particle& p, const QuadratureSet& q, const SampleContext& ctx,
                    const ParticleTrace& tr, std::vector<double>& scratch, double& ga,
                    std::vector<double>& gw, double& gb) {
  const int n = q.size();
  const int d = q.d;
  const double inv_norm = 1.0 / ctx.norm;
  scratch.resize(n);
  for (int j = 0; j < n; ++j) {
    scratch[j] = q.weights[j] * ctx.field.values[j] * tr.val[j];
  }
  ga = pairwise_sum(scratch) * inv_norm;
  for (int j = 0; j < n; ++j) {
    scratch[j] = q.weights[j] * ctx.field.values[j] * tr.d1[j];
  }
  gb = p.a * pairwise_sum(scratch) * inv_norm;
  gw.resize(d);
  for (int k = 0; k < d; ++k) {
    for (int j = 0; j < n; ++j) {
      const auto x = q.point(j);
      scratch[j] = q.weights[j] * ctx.field.values[j] * tr.d1[j] * x[k];
    }
    gw[k] = p.a * pairwise_sum(scratch) * inv_norm;
  }
}

// V(p) and C(p)*||u|| from shared samples, one O(n) pass.
void potentials_at(const Particle& p, const MollifierTable& table, double tau,
                   const QuadratureSet& q, const SampleContext& ctx,
                   std::vector<double>& scratch_v, std::vector<double>& scratch_c,
                   double& v_out, double& c_unnormalized) {
  const int n = q.size();
  const int d = q.d;
  scratch_v.resize(n);
  scratch_c.resize(n);
  for (int j = 0; j < n; ++j) {
    const auto x = q.point(j);
    const double z = dot(p.w, x) + p.b;
    const ActivationEval e = hrelu_tau(table, tau, z);
    const double gdotw = dot(std::span<const double>(ctx.field.grads)
                                 .subspan(static_cast<std::size_t>(j) * d, d),
                             p.w);
    scratch_v[j] = q.weights[j] * (gdotw * p.a * e.d1 +
                                   ctx.wvals[j] * ctx.field.values[j] * p.a * e.value);
    scratch_c[j] = q.weights[j] * ctx.field.values[j] * p.a * e.value;
  }
  v_out = pairwise_sum(scratch_v);
  c_unnormalized = pairwise_sum(scratch_c);
}

VelocityField velocity_from_context(const Ensemble& ens, const MollifierTable& table,
                                    const QuadratureSet& q, const SampleContext& ctx) {
  if (ctx.norm <= 0.0) {
    throw DegenerateStateError("velocity: field vanishes on the quadrature");
  }
  const int m = ens.size();
  VelocityField out;
  out.grad_v.resize(m);
  out.grad_c.resize(m);
  out.v.resize(m);

  ParticleTrace tr;
  std::vector<double> scratch;
  std::vector<double> num(m), den(m);
  for (int i = 0; i < m; ++i) {
    const Particle& p = ens.particles[i];
    fill_trace(table, ens.tau, p, q, ctx.field, tr);
    double ga = 0, gb = 0;
    std::vector<double> gw;
    ambient_grad_V(p, q, ctx, tr, scratch, ga, gw, gb);
    out.grad_v[i] = tangent_project(p, ga, gw, gb);
    ambient_grad_C(p, q, ctx, tr, scratch, ga, gw, gb);
    out.grad_c[i] = tangent_project(p, ga, gw, gb);
    num[i] = tangent_inner(out.grad_v[i], out.grad_c[i]);
    den[i] = tangent_inner(out.grad_c[i], out.grad_c[i]);
  }
  const double den_sum = pairwise_sum(den);
  if (den_sum <= 0.0) {
    throw DegenerateStateError("velocity: constraint gradient vanishes on every particle");
  }
  out.sigma_mu = pairwise_sum(num) / den_sum;
  out.grad_c_norm2_mean = den_sum / m;

  std::vector<double> speed2(m);
  for (int i = 0; i < m; ++i) {
    TangentVector& v = out.v[i];
    const TangentVector& gv = out.grad_v[i];
    const TangentVector& gc = out.grad_c[i];
    v.da = -(gv.da - out.sigma_mu * gc.da);
    v.db = -(gv.db - out.sigma_mu * gc.db);
    v.dw.resize(gv.dw.size());
    for (std::size_t k = 0; k < gv.dw.size(); ++k) {
      v.dw[k] = -(gv.dw[k] - out.sigma_mu * gc.dw[k]);
    }
    speed2[i] = tangent_inner(v, v);
  }
  out.local_slope = std::sqrt(pairwise_sum(speed2) / m);
  return out;
}

SampleContext make_context_for_ensemble(const Ensemble& ens, const MollifierTable& table,
                                        const QuadratureSet& q, const PotentialSpec& W) {
  if (q.d != ens.d) throw ConfigError("quadrature dimension does not match ensemble");
  SampleContext ctx;
  ctx.field = evaluate_batch(ens, table, q.points);
  ctx.wvals = potential_samples(q, W);
  ctx.norm = samples_norm(ctx.field, q);
  return ctx;
}

double residual_over_probes(const SampleContext& ctx, double sigma,
                            const MollifierTable& table, double tau, int d,
                            const QuadratureSet& q, int probe_count, Rng& rng) {
  if (probe_count < 1) throw ConfigError("stationarity residual needs probe_count >= 1");
  if (ctx.norm <= 0.0) {
    throw DegenerateStateError("stationarity residual: field vanishes on the quadrature");
  }
  const double b_range = std::sqrt(static_cast<double>(d)) + 2.0;
  std::vector<double> scratch_v, scratch_c;
  double worst = 0.0;
  Particle probe;
  probe.a = 1.0;
  probe.w.resize(d);
  for (int t = 0; t < probe_count; ++t) {
    rng.unit_sphere(probe.w);
    probe.b = rng.uniform(-b_range, b_range);
    double v = 0, c_raw = 0;
    potentials_at(probe, table, tau, q, ctx, scratch_v, scratch_c, v, c_raw);
    worst = std::max(worst, std::abs(v - sigma * c_raw / ctx.norm));
  }
  return worst;
}

}  // namespace

QuadratureSet tensor_grid_quadrature(int d, int cells_per_axis) {
  if (d < 1 || d > 3) {
    throw ConfigError("tensor grid quadrature supports 1 <= d <= 3, got " +
                      std::to_string(d));
  }
  if (cells_per_axis < 1) throw ConfigError("tensor grid needs >= 1 cell per axis");
  const int nodes = cells_per_axis + 1;
  QuadratureSet q;
  q.kind = QuadratureSet::Kind::TensorGrid;
  q.d = d;
  const double h = 1.0 / cells_per_axis;
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= nodes;
  q.points.resize(total * d);
  q.weights.resize(total);
  std::vector<int> idx(d, 0);
  for (std::size_t j = 0; j < total; ++j) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      q.points[j * d + k] = idx[k] * h;
      const bool edge = idx[k] == 0 || idx[k] == cells_per_axis;
      w *= h * (edge ? 0.5 : 1.0);
    }
    q.weights[j] = w;
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[k] < nodes) break;
      idx[k] = 0;
    }
  }
  return q;
}

QuadratureSet mc_quadrature(int d, int n, Rng& rng) {
  if (d < 1) throw ConfigError("mc quadrature needs d >= 1");
  if (n < 1) throw ConfigError("mc quadrature needs n >= 1");
  QuadratureSet q;
  q.kind = QuadratureSet::Kind::MonteCarlo;
  q.d = d;
  q.points.resize(static_cast<std::size_t>(n) * d);
  for (double& c : q.points) c = rng.uniform01();
  q.weights.assign(n, 1.0 / n);
  return q;
}

QuadratureSet quadrature_from_points(int d, std::vector<double> points) {
  if (d < 1 || points.empty() || points.size() % d != 0) {
    throw ConfigError("quadrature_from_points: bad point buffer");
  }
  QuadratureSet q;
  q.kind = QuadratureSet::Kind::MonteCarlo;
  q.d = d;
  const int n = static_cast<int>(points.size() / d);
  q.points = std::move(points);
  q.weights.assign(n, 1.0 / n);
  return q;
}

void validate_quadrature(const QuadratureSet& q) {
  if (q.d < 1) throw ConfigError("quadrature: d must be >= 1");
  if (q.weights.empty() ||
      q.points.size() != q.weights.size() * static_cast<std::size_t>(q.d)) {
    throw ConfigError("quadrature: size mismatch between points and weights");
  }
  double sum = 0.0;
  for (double w : q.weights) {
    if (!(w > 0.0)) throw ConfigError("quadrature: weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTol) {
    throw ConfigError("quadrature: weights sum to " + std::to_string(sum) +
                      ", expected 1");
  }
  for (double c : q.points) {
    if (!(c >= 0.0 && c <= 1.0)) {
      throw ConfigError("quadrature: point outside the unit box");
    }
  }
}

double energy(const FieldEvaluator& u, const QuadratureSet& q, const PotentialSpec& W) {
  const int n = q.size();
  std::vector<double> terms(n), g(q.d);
  for (int j = 0; j < n; ++j) {
    const auto x = q.point(j);
    const double val = u.value(x);
    u.gradient(x, g);
    terms[j] = q.weights[j] *
               (dot(g, g) + eval_potential(W, x) * val * val);
  }
  return pairwise_sum(terms);
}

MeanWithError energy_with_se(const FieldEvaluator& u, const QuadratureSet& q,
                             const PotentialSpec& W) {
  const int n = q.size();
  std::vector<double> f(n), g(q.d);
  for (int j = 0; j < n; ++j) {
    const auto x = q.point(j);
    const double val = u.value(x);
    u.gradient(x, g);
    f[j] = dot(g, g) + eval_potential(W, x) * val * val;
  }
  std::vector<double> terms(n);
  for (int j = 0; j < n; ++j) terms[j] = q.weights[j] * f[j];
  MeanWithError out;
  out.mean = pairwise_sum(terms);
  for (int j = 0; j < n; ++j) {
    const double dev = f[j] - out.mean;
    terms[j] = q.weights[j] * q.weights[j] * dev * dev;
  }
  out.se = std::sqrt(pairwise_sum(terms));
  return out;
}

double l2_norm(const FieldEvaluator& u, const QuadratureSet& q) {
  const int n = q.size();
  std::vector<double> terms(n);
  for (int j = 0; j < n; ++j) {
    const double val = u.value(q.point(j));
    terms[j] = q.weights[j] * val * val;
  }
  const double n2 = pairwise_sum(terms);
  return n2 > 0.0 ? std::sqrt(n2) : 0.0;
}

double constraint(const FieldEvaluator& u, const QuadratureSet& q) {
  return l2_norm(u, q) - 1.0;
}

double potential_V(const FieldEvaluator& u, const MollifierTable& table, double tau,
                   const Particle& p, const QuadratureSet& q, const PotentialSpec& W) {
  SampleContext ctx;
  ctx.field = sample_evaluator(u, q);
  ctx.wvals = potential_samples(q, W);
  ctx.norm = 1.0;  // unused by V
  std::vector<double> sv, sc;
  double v = 0, c_raw = 0;
  potentials_at(p, table, tau, q, ctx, sv, sc, v, c_raw);
  return v;
}

double potential_C(const FieldEvaluator& u, const MollifierTable& table, double tau,
                   const Particle& p, const QuadratureSet& q) {
  SampleContext ctx;
  ctx.field = sample_evaluator(u, q);
  ctx.wvals.assign(q.size(), 0.0);
  ctx.norm = samples_norm(ctx.field, q);
  if (ctx.norm <= 0.0) {
    throw DegenerateStateError("potential_C: field vanishes on the quadrature");
  }
  std::vector<double> sv, sc;
  double v = 0, c_raw = 0;
  potentials_at(p, table, tau, q, ctx, sv, sc, v, c_raw);
  return c_raw / ctx.norm;
}

TangentVector grad_V(const FieldEvaluator& u, const MollifierTable& table, double tau,
                     const Particle& p, const QuadratureSet& q, const PotentialSpec& W) {
  SampleContext ctx;
  ctx.field = sample_evaluator(u, q);
  ctx.wvals = potential_samples(q, W);
  ctx.norm = 1.0;
  ParticleTrace tr;
  fill_trace(table, tau, p, q, ctx.field, tr);
  std::vector<double> scratch, gw;
  double ga = 0, gb = 0;
  ambient_grad_V(p, q, ctx, tr, scratch, ga, gw, gb);
  return tangent_project(p, ga, gw, gb);
}

TangentVector grad_C(const FieldEvaluator& u, const MollifierTable& table, double tau,
                     const Particle& p, const QuadratureSet& q) {
  SampleContext ctx;
  ctx.field = sample_evaluator(u, q);
  ctx.norm = samples_norm(ctx.field, q);
  if (ctx.norm <= 0.0) {
    throw DegenerateStateError("grad_C: field vanishes on the quadrature");
  }
  ParticleTrace tr;
  fill_trace(table, tau, p, q, ctx.field, tr);
  std::vector<double> scratch, gw;
  double ga = 0, gb = 0;
  ambient_grad_C(p, q, ctx, tr, scratch, ga, gw, gb);
  return tangent_project(p, ga, gw, gb);
}

VelocityField velocity(const Ensemble& ens, const MollifierTable& table,
                       const QuadratureSet& q, const PotentialSpec& W) {
  const SampleContext ctx = make_context_for_ensemble(ens, table, q, W);
  return velocity_from_context(ens, table, q, ctx);
}

double sigma_mu(const Ensemble& ens, const MollifierTable& table,
                const QuadratureSet& q, const PotentialSpec& W) {
  return velocity(ens, table, q, W).sigma_mu;
}

double stationarity_residual(const Ensemble& ens, const MollifierTable& table,
                             const QuadratureSet& q, const PotentialSpec& W,
                             int probe_count, Rng& rng) {
  const SampleContext ctx = make_context_for_ensemble(ens, table, q, W);
  const VelocityField vf = velocity_from_context(ens, table, q, ctx);
  return residual_over_probes(ctx, vf.sigma_mu, table, ens.tau, ens.d, q, probe_count,
                              rng);
}

double stationarity_residual_given(const FieldEvaluator& u, double sigma,
                                   const MollifierTable& table, double tau,
                                   const QuadratureSet& q, const PotentialSpec& W,
                                   int probe_count, Rng& rng) {
  SampleContext ctx;
  ctx.field = sample_evaluator(u, q);
  ctx.wvals = potential_samples(q, W);
  ctx.norm = samples_norm(ctx.field, q);
  return residual_over_probes(ctx, sigma, table, tau, u.dim(), q, probe_count, rng);
}

}  // namespace spectralflow
