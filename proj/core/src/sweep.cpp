#include "spectralflow/sweep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>

#include "spectralflow/errors.hpp"
#include "text_util.hpp"

namespace spectralflow {

namespace {

std::array<double, 7> row_metrics(const EvalRow& r) {
  return {r.energy, r.rayleigh, r.sigma_mu, r.constraint,
          r.local_slope, r.l2_error, r.r_t};
}

}  // namespace

std::vector<RunRecord> run_sweep(const RunConfig& base, int runs, int parallelism,
                                 const ReferenceSolution* reference) {
  if (runs < 1) throw ConfigError("sweep: runs must be >= 1");
  if (parallelism < 1) throw ConfigError("sweep: parallelism must be >= 1");
  std::vector<RunRecord> records(runs);
  std::vector<std::future<RunRecord>> inflight;
  int next = 0, launched_base = 0;
  while (launched_base < runs) {
    const int batch = std::min(parallelism, runs - launched_base);
    inflight.clear();
    for (int k = 0; k < batch; ++k) {
      FlowConfig cfg = base.flow;
      cfg.seed = base.flow.seed + static_cast<std::uint64_t>(launched_base + k);
      inflight.push_back(std::async(std::launch::async, [cfg, reference]() {
        return run_flow(cfg, reference);
      }));
    }
    for (auto& f : inflight) records[next++] = f.get();
    launched_base += batch;
  }
  return records;
}

SweepSummary summarize_sweep(const RunConfig& base, std::span<const RunRecord> records) {
  SweepSummary summary;
  summary.runs = static_cast<int>(records.size());
  summary.config_hash = config_hash(base);
  if (records.empty()) return summary;
  std::size_t common = records.front().rows.size();
  for (const RunRecord& r : records) common = std::min(common, r.rows.size());
  summary.rows.resize(common);
  for (std::size_t row = 0; row < common; ++row) {
    SweepSummaryRow& out = summary.rows[row];
    out.step = records.front().rows[row].step;
    // Aggregate per metric over the finite samples only: l2_error is NaN for
    // runs without a reference, and one poisoned column must not leak into
    // the others or into band plots. No finite samples -> NaN mean, 0 spread.
    std::array<int, kSweepMetrics.size()> counts{};
    for (const RunRecord& r : records) {
      const auto vals = row_metrics(r.rows[row]);
      for (std::size_t k = 0; k < vals.size(); ++k) {
        if (!std::isfinite(vals[k])) continue;
        out.mean[k] += vals[k];
        ++counts[k];
      }
    }
    for (std::size_t k = 0; k < out.mean.size(); ++k) {
      out.mean[k] = counts[k] > 0 ? out.mean[k] / counts[k]
                                  : std::numeric_limits<double>::quiet_NaN();
    }
    for (const RunRecord& r : records) {
      const auto vals = row_metrics(r.rows[row]);
      for (std::size_t k = 0; k < vals.size(); ++k) {
        if (!std::isfinite(vals[k])) continue;
        const double dev = vals[k] - out.mean[k];
        out.variance[k] += dev * dev;
      }
    }
    for (std::size_t k = 0; k < out.variance.size(); ++k) {
      if (counts[k] > 0) out.variance[k] /= counts[k];
    }
  }
  return summary;
}

std::string SweepSummary::to_csv() const {
  std::string out = "step";
  for (const char* name : kSweepMetrics) {
    out += ',';
    out += name;
    out += "_mean,";
    out += name;
    out += "_var";
  }
  out += '\n';
  for (const SweepSummaryRow& row : rows) {
    out += std::to_string(row.step);
    for (std::size_t k = 0; k < kSweepMetrics.size(); ++k) {
      out += ',';
      out += detail::format_double(row.mean[k]);
      out += ',';
      out += detail::format_double(row.variance[k]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace spectralflow
