#include "spectralflow/field.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "spectralflow/errors.hpp"
#include "spectralflow/summation.hpp"

namespace spectralflow {

namespace {

void check_dims(const Ensemble& ens, std::size_t x_size) {
  if (x_size != static_cast<std::size_t>(ens.d)) {
    throw std::invalid_argument("field: point dimension does not match ensemble");
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(std::string_view token, int line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ConfigError("ensemble checkpoint: bad number '" + std::string(token) +
                      "' on line " + std::to_string(line));
  }
  return v;
}

}  // namespace

double feature(const MollifierTable& table, double tau, const Particle& p,
               std::span<const double> x) {
  const double z = dot(p.w, x) + p.b;
  return p.a * hrelu_tau(table, tau, z).value;
}

void feature_xgrad(const MollifierTable& table, double tau, const Particle& p,
                   std::span<const double> x, std::span<double> out) {
  const double z = dot(p.w, x) + p.b;
  const double s = p.a * hrelu_tau(table, tau, z).d1;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = s * p.w[k];
}

AmbientGrad feature_theta_grad(const MollifierTable& table, double tau,
                               const Particle& p, std::span<const double> x) {
  const double z = dot(p.w, x) + p.b;
  const ActivationEval e = hrelu_tau(table, tau, z);
  AmbientGrad g;
  g.ga = e.value;
  g.gb = p.a * e.d1;
  g.gw.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) g.gw[k] = p.a * e.d1 * x[k];
  return g;
}

double evaluate(const Ensemble& ens, const MollifierTable& table,
                std::span<const double> x) {
  check_dims(ens, x.size());
  const int m = ens.size();
  std::vector<double> terms(m);
  for (int i = 0; i < m; ++i) {
    terms[i] = feature(table, ens.tau, ens.particles[i], x);
  }
  return pairwise_sum(terms) / m;
}

void evaluate_grad(const Ensemble& ens, const MollifierTable& table,
                   std::span<const double> x, std::span<double> out) {
  check_dims(ens, x.size());
  const int m = ens.size();
  const int d = ens.d;
  std::vector<double> terms(static_cast<std::size_t>(m));
  std::vector<double> slopes(m);
  for (int i = 0; i < m; ++i) {
    const Particle& p = ens.particles[i];
    const double z = dot(p.w, x) + p.b;
    slopes[i] = p.a * hrelu_tau(table, ens.tau, z).d1;
  }
  for (int k = 0; k < d; ++k) {
    for (int i = 0; i < m; ++i) terms[i] = slopes[i] * ens.particles[i].w[k];
    out[k] = pairwise_sum(terms) / m;
  }
}

FieldSamples evaluate_batch(const Ensemble& ens, const MollifierTable& table,
                            std::span<const double> points) {
  const int d = ens.d;
  if (d <= 0 || points.size() % d != 0) {
    throw std::invalid_argument("evaluate_batch: bad point buffer size");
  }
  const int n = static_cast<int>(points.size() / d);
  const int m = ens.size();
  FieldSamples out;
  out.n = n;
  out.d = d;
  out.values.resize(n);
  out.grads.resize(static_cast<std::size_t>(n) * d);

  std::vector<double> terms(m), slopes(m), comp(m);
  for (int j = 0; j < n; ++j) {
    const std::span<const double> x = points.subspan(static_cast<std::size_t>(j) * d, d);
    for (int i = 0; i < m; ++i) {
      const Particle& p = ens.particles[i];
      const double z = dot(p.w, x) + p.b;
      const ActivationEval e = hrelu_tau(table, ens.tau, z);
      terms[i] = p.a * e.value;
      slopes[i] = p.a * e.d1;
    }
    out.values[j] = pairwise_sum(terms) / m;
    for (int k = 0; k < d; ++k) {
      for (int i = 0; i < m; ++i) comp[i] = slopes[i] * ens.particles[i].w[k];
      out.grads[static_cast<std::size_t>(j) * d + k] = pairwise_sum(comp) / m;
    }
  }
  return out;
}

std::string serialize_ensemble(const Ensemble& ens) {
  std::string out = "spectralflow.ensemble.v1\n";
  out += "d " + std::to_string(ens.d) + "\n";
  out += "tau " + format_double(ens.tau) + "\n";
  out += "m " + std::to_string(ens.size()) + "\n";
  for (const Particle& p : ens.particles) {
    out += format_double(p.a);
    for (double c : p.w) {
      out += ' ';
      out += format_double(c);
    }
    out += ' ';
    out += format_double(p.b);
    out += '\n';
  }
  return out;
}

Ensemble parse_ensemble(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != "spectralflow.ensemble.v1") {
    throw ConfigError("ensemble checkpoint: missing or unsupported version header");
  }
  Ensemble ens;
  int m = -1;
  for (const char* key : {"d", "tau", "m"}) {
    ++line_no;
    if (!std::getline(in, line)) {
      throw ConfigError("ensemble checkpoint: truncated header");
    }
    std::istringstream ls(line);
    std::string name, value;
    ls >> name >> value;
    if (name != key || value.empty()) {
      throw ConfigError("ensemble checkpoint: expected '" + std::string(key) +
                        "' on line " + std::to_string(line_no));
    }
    if (std::string(key) == "d") {
      ens.d = static_cast<int>(parse_double(value, line_no));
    } else if (std::string(key) == "tau") {
      ens.tau = parse_double(value, line_no);
    } else {
      m = static_cast<int>(parse_double(value, line_no));
    }
  }
  if (ens.d < 1 || m < 0 || !(ens.tau > 0)) {
    throw ConfigError("ensemble checkpoint: invalid header values");
  }
  ens.particles.reserve(m);
  for (int i = 0; i < m; ++i) {
    ++line_no;
    if (!std::getline(in, line)) {
      throw ConfigError("ensemble checkpoint: expected " + std::to_string(m) +
                        " particle lines, got " + std::to_string(i));
    }
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.size() != static_cast<std::size_t>(ens.d) + 2) {
      throw ConfigError("ensemble checkpoint: wrong field count on line " +
                        std::to_string(line_no));
    }
    Particle p;
    p.a = parse_double(tokens.front(), line_no);
    p.w.resize(ens.d);
    for (int k = 0; k < ens.d; ++k) p.w[k] = parse_double(tokens[k + 1], line_no);
    p.b = parse_double(tokens.back(), line_no);
    ens.particles.push_back(std::move(p));
  }
  return ens;
}

}  // namespace spectralflow
