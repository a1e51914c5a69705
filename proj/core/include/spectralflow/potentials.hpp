#pragma once

#include <span>
#include <string>
#include <string_view>

namespace spectralflow {

/// Bounded potential W on the unit box. Variants:
///   zero                 W = 0
///   constant:c           W = c
///   cos1d:A              W = A*cos(2*pi*x1)
///   cos_diag:A           W = -A*cos(2*pi*(x1 - x2))        (needs d >= 2)
///   exp_diag:A           W = -A*exp(-(x1 - x2)^2 / 2)      (needs d >= 2)
///   double_well:A        W = A*exp(-g(x1)),  g(z) = f(4*(z - 1/2)),
///                        f(s) = (s^2 - 1)^(-2); wells at x1 = 1/4, 3/4
struct PotentialSpec {
  enum class Variant { Zero, Constant, Cos1d, CosDiag, ExpDiag, DoubleWell };

  Variant variant = Variant::Zero;
  double amplitude = 0;

  /// Smallest spatial dimension the variant is defined for.
  int min_dim() const;

  /// Canonical "name:amplitude" form ("zero" carries no amplitude).
  std::string to_string() const;

  /// Parses "name" or "name:amplitude". Unknown names and missing amplitudes
  /// raise ConfigError naming the offending token.
  static PotentialSpec parse(std::string_view text);
};

/// Evaluates W at x in [0,1]^d. Throws ConfigError when x is shorter than the
/// variant needs. The double-well map is closed by continuity: W = 0 where
/// |(4*(x1-1/2))^2 - 1| <= 1e-8, where g blows up.
double eval_potential(const PotentialSpec& spec, std::span<const double> x);

}  // namespace spectralflow
