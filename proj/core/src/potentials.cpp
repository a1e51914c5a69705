#include "spectralflow/potentials.hpp"

#include <charconv>
#include <cmath>

#include "spectralflow/errors.hpp"

namespace spectralflow {

int PotentialSpec::min_dim() const {
  switch (variant) {
    case Variant::CosDiag:
    case Variant::ExpDiag:
      return 2;
    default:
      return 1;
  }
}

std::string PotentialSpec::to_string() const {
  const auto with_amp = [&](const char* name) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), amplitude);
    return std::string(name) + ":" + std::string(buf, end);
  };
  switch (variant) {
    case Variant::Zero:
      return "zero";
    case Variant::Constant:
      return with_amp("constant");
    case Variant::Cos1d:
      return with_amp("cos1d");
    case Variant::CosDiag:
      return with_amp("cos_diag");
    case Variant::ExpDiag:
      return with_amp("exp_diag");
    case Variant::DoubleWell:
      return with_amp("double_well");
  }
  return "zero";
}

PotentialSpec PotentialSpec::parse(std::string_view text) {
  std::string_view name = text;
  std::string_view amp;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    name = text.substr(0, colon);
    amp = text.substr(colon + 1);
  }
  PotentialSpec spec;
  if (name == "zero") {
    spec.variant = Variant::Zero;
    if (!amp.empty()) throw ConfigError("potential 'zero' takes no amplitude");
    return spec;
  }
  if (name == "constant") {
    spec.variant = Variant::Constant;
  } else if (name == "cos1d") {
    spec.variant = Variant::Cos1d;
  } else if (name == "cos_diag") {
    spec.variant = Variant::CosDiag;
  } else if (name == "exp_diag") {
    spec.variant = Variant::ExpDiag;
  } else if (name == "double_well") {
    spec.variant = Variant::DoubleWell;
  } else {
    throw ConfigError("unknown potential variant '" + std::string(name) + "'");
  }
  if (amp.empty()) {
    throw ConfigError("potential '" + std::string(name) +
                      "' needs an amplitude, e.g. '" + std::string(name) + ":100'");
  }
  const char* first = amp.data();
  const char* last = amp.data() + amp.size();
  auto [ptr, ec] = std::from_chars(first, last, spec.amplitude);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("bad potential amplitude '" + std::string(amp) + "'");
  }
  return spec;
}

double eval_potential(const PotentialSpec& spec, std::span<const double> x) {
  if (static_cast<int>(x.size()) < spec.min_dim()) {
    throw ConfigError("potential " + spec.to_string() + " needs dimension >= " +
                      std::to_string(spec.min_dim()));
  }
  switch (spec.variant) {
    case PotentialSpec::Variant::Zero:
      return 0.0;
    case PotentialSpec::Variant::Constant:
      return spec.amplitude;
    case PotentialSpec::Variant::Cos1d:
      return spec.amplitude * std::cos(2.0 * M_PI * x[0]);
    case PotentialSpec::Variant::CosDiag:
      return -spec.amplitude * std::cos(2.0 * M_PI * (x[0] - x[1]));
    case PotentialSpec::Variant::ExpDiag: {
      const double t = x[0] - x[1];
      return -spec.amplitude * std::exp(-0.5 * t * t);
    }
    case PotentialSpec::Variant::DoubleWell: {
      const double s = 4.0 * (x[0] - 0.5);
      const double q = s * s - 1.0;
      if (std::abs(q) <= 1e-8) return 0.0;  // continuity closure at the poles
      const double g = 1.0 / (q * q);
      return spec.amplitude * std::exp(-g);
    }
  }
  return 0.0;
}

}  // namespace spectralflow
