#pragma once

#include <cstddef>
#include <span>

namespace spectralflow {

/// Pairwise (cascade) summation with a fixed recursion pattern. Used for every
/// reduction whose result lands in a persisted record, so that a given input
/// order always produces the same bits.
inline double pairwise_sum(std::span<const double> v) {
  constexpr std::size_t kLeaf = 32;
  if (v.size() <= kLeaf) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace spectralflow
