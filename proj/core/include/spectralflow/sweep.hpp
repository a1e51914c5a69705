#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spectralflow/config.hpp"
#include "spectralflow/flow.hpp"

namespace spectralflow {

/// Metric columns aggregated across sweep runs, in CSV order.
inline constexpr std::array<const char*, 7> kSweepMetrics = {
    "energy", "rayleigh", "sigma_mu", "constraint", "local_slope", "l2_error", "r_t"};

struct SweepSummaryRow {
  std::int64_t step = 0;
  std::array<double, 7> mean{};
  std::array<double, 7> variance{};  // population variance; 0 for a single run
};

struct SweepSummary {
  int runs = 0;
  std::uint64_t config_hash = 0;
  std::vector<SweepSummaryRow> rows;

  /// Header: step,<metric>_mean,<metric>_var,... in kSweepMetrics order.
  std::string to_csv() const;
};

/// Runs `runs` copies of the base config with seeds seed, seed+1, ... .
/// Runs execute concurrently up to `parallelism` threads; each run keeps its
/// own generator streams, so results are independent of the schedule.
std::vector<RunRecord> run_sweep(const RunConfig& base, int runs, int parallelism,
                                 const ReferenceSolution* reference = nullptr);

/// Per-step mean and population variance across runs, truncated to the row
/// count every run reached (shorter incomplete runs shorten the summary).
SweepSummary summarize_sweep(const RunConfig& base, std::span<const RunRecord> records);

}  // namespace spectralflow
