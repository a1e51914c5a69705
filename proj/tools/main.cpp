// Command-line front end: single runs, multi-seed sweeps, the
// finite-difference reference solver, the invariant suite, and SVG plots.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spectralflow/check.hpp"
#include "spectralflow/config.hpp"
#include "spectralflow/errors.hpp"
#include "spectralflow/flow.hpp"
#include "spectralflow/plot.hpp"
#include "spectralflow/reference.hpp"
#include "spectralflow/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw spectralflow::ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw spectralflow::ConfigError("cannot write " + path.string());
  out << content;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string reference_file;
  std::int64_t seed = -1;  // <0 keeps the config value
};

spectralflow::RunConfig load_run_config(const CommonArgs& args) {
  spectralflow::RunConfig cfg = spectralflow::parse_config(read_file(args.config_path));
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (!args.reference_file.empty()) cfg.reference_file = args.reference_file;
  if (args.seed >= 0) cfg.flow.seed = static_cast<std::uint64_t>(args.seed);
  cfg.flow.validate();
  return cfg;
}

std::optional<spectralflow::ReferenceSolution> load_reference(
    const spectralflow::RunConfig& cfg) {
  if (cfg.reference_file.empty()) return std::nullopt;
  return spectralflow::parse_reference(read_file(cfg.reference_file));
}

json row_json(const spectralflow::EvalRow& row) {
  return json{{"step", row.step},
              {"energy", row.energy},
              {"rayleigh", row.rayleigh},
              {"sigma_mu", row.sigma_mu},
              {"constraint", row.constraint},
              {"local_slope", row.local_slope},
              {"l2_error", row.l2_error},
              {"r_t", row.r_t}};
}

int cmd_run(const CommonArgs& args) {
  const spectralflow::RunConfig cfg = load_run_config(args);
  const auto reference = load_reference(cfg);
  const spectralflow::RunRecord record =
      spectralflow::run_flow(cfg.flow, reference ? &*reference : nullptr);

  const fs::path out(cfg.output_dir);
  // wall_ms is masked in the CSV so identical (seed, config) give identical
  // bytes; measured timings live in the JSON sidecar.
  write_file(out / "run.csv", record.to_csv(false));
  write_file(out / "run.json", spectralflow::run_record_json(cfg, record));
  write_file(out / "final.ensemble", spectralflow::serialize_ensemble(record.final_state));

  if (record.rows.empty()) {
    std::cerr << "run produced no evaluation rows\n";
    return 1;
  }
  const spectralflow::EvalRow& last = record.rows.back();
  std::printf("sigma_mu %.10g\n", last.sigma_mu);
  std::printf("rayleigh %.10g\n", last.rayleigh);
  if (reference) {
    std::printf("l2_error %.10g\n", last.l2_error);
    std::printf("reference_lambda %.10g\n", reference->lambda);
  }
  if (record.incomplete) {
    std::cerr << "run incomplete: " << record.error << "\n";
    return 1;
  }
  return 0;
}

int cmd_sweep(const CommonArgs& args, int runs, int parallel) {
  const spectralflow::RunConfig cfg = load_run_config(args);
  const auto reference = load_reference(cfg);
  const std::vector<spectralflow::RunRecord> records =
      spectralflow::run_sweep(cfg, runs, parallel, reference ? &*reference : nullptr);
  const spectralflow::SweepSummary summary = spectralflow::summarize_sweep(cfg, records);

  const fs::path out(cfg.output_dir);
  bool any_incomplete = false;
  json meta;
  meta["runs"] = runs;
  meta["config_hash"] = summary.config_hash;
  meta["config"] = spectralflow::serialize_config(cfg);
  meta["per_run"] = json::array();
  for (int k = 0; k < static_cast<int>(records.size()); ++k) {
    const spectralflow::RunRecord& rec = records[k];
    write_file(out / ("run_" + std::to_string(k) + ".csv"), rec.to_csv(false));
    any_incomplete = any_incomplete || rec.incomplete;
    json entry;
    entry["seed"] = cfg.flow.seed + static_cast<std::uint64_t>(k);
    entry["incomplete"] = rec.incomplete;
    if (!rec.error.empty()) entry["error"] = rec.error;
    if (!rec.rows.empty()) entry["final"] = row_json(rec.rows.back());
    meta["per_run"].push_back(entry);
  }
  write_file(out / "summary.csv", summary.to_csv());
  write_file(out / "sweep.json", meta.dump(2) + "\n");

  if (!summary.rows.empty()) {
    const spectralflow::SweepSummaryRow& last = summary.rows.back();
    std::printf("final rayleigh mean %.10g var %.3g\n", last.mean[1], last.variance[1]);
    std::printf("final l2_error mean %.10g var %.3g\n", last.mean[5], last.variance[5]);
  }
  if (any_incomplete) {
    std::cerr << "one or more runs incomplete\n";
    return 1;
  }
  return 0;
}

int cmd_reference(const std::string& potential, int grid_n, const std::string& out_path) {
  const spectralflow::PotentialSpec W = spectralflow::PotentialSpec::parse(potential);
  const spectralflow::ReferenceSolution fine = spectralflow::ground_eigenpair(W, grid_n);
  std::printf("lambda[N=%d] %.12g (residual %.3g)\n", grid_n, fine.lambda,
              fine.residual);
  if (grid_n % 4 == 0 && grid_n / 4 >= 8) {
    const double coarse = spectralflow::ground_eigenpair(W, grid_n / 4).lambda;
    const double medium = spectralflow::ground_eigenpair(W, grid_n / 2).lambda;
    const auto rr = spectralflow::richardson(coarse, medium, fine.lambda);
    if (rr.degenerate) {
      std::printf("richardson degenerate (flat sequence); lambda %.12g\n",
                  rr.extrapolated);
    } else {
      std::printf("richardson order %.3f extrapolated %.12g\n", rr.order,
                  rr.extrapolated);
    }
  }
  write_file(out_path, spectralflow::serialize_reference(fine));
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_check(std::uint64_t seed) {
  const auto results = spectralflow::run_invariant_checks(seed);
  std::fputs(spectralflow::format_check_report(results).c_str(), stdout);
  return spectralflow::all_passed(results) ? 0 : 1;
}

int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& out_path,
             spectralflow::PlotOptions options) {
  std::vector<std::string> texts;
  for (const std::string& p : csv_paths) texts.push_back(read_file(p));
  if (options.title.empty()) options.title = options.metric;
  write_file(out_path, spectralflow::render_plot_svg(texts, options));
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained particle gradient flow for ground eigenpairs"};
  app.require_subcommand(1);

  CommonArgs common;
  int runs = 8;
  int parallel = 4;
  std::int64_t check_seed = 1;
  std::string ref_potential = "cos1d:100";
  int ref_grid_n = 256;
  std::string ref_out = "reference.dat";
  std::vector<std::string> plot_inputs;
  std::string plot_out = "plot.svg";
  spectralflow::PlotOptions plot_options;
  double plot_reference = std::numeric_limits<double>::quiet_NaN();

  const auto add_common = [&](CLI::App* cmd, bool config_required) {
    cmd->add_option("--config", common.config_path, "config file (key=value sections)")
        ->envname("SPECTRALFLOW_CONFIG")
        ->required(config_required);
    cmd->add_option("--out", common.out_dir, "output directory (overrides [output])")
        ->envname("SPECTRALFLOW_OUT");
    cmd->add_option("--seed", common.seed, "seed override")
        ->envname("SPECTRALFLOW_SEED");
    cmd->add_option("--reference-file", common.reference_file,
                    "reference eigenpair file for the l2_error column")
        ->envname("SPECTRALFLOW_REFERENCE_FILE");
  };

  CLI::App* run = app.add_subcommand("run", "single flow run; writes CSV/JSON/checkpoint");
  add_common(run, true);

  CLI::App* sweep = app.add_subcommand("sweep", "multi-seed runs with mean/variance summary");
  add_common(sweep, true);
  sweep->add_option("--runs", runs, "number of runs (seeds seed..seed+runs-1)")
      ->envname("SPECTRALFLOW_RUNS")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--parallel", parallel, "concurrent runs")
      ->envname("SPECTRALFLOW_PARALLEL")
      ->check(CLI::PositiveNumber);

  CLI::App* reference = app.add_subcommand("reference", "finite-difference ground eigenpair");
  reference->add_option("--potential", ref_potential, "potential, e.g. cos1d:100");
  reference->add_option("--grid-n", ref_grid_n, "cells per axis (8..512)");
  reference->add_option("--out", ref_out, "output file")->envname("SPECTRALFLOW_OUT");

  CLI::App* check = app.add_subcommand("check", "run the invariant suite");
  check->add_option("--seed", check_seed, "suite seed")->envname("SPECTRALFLOW_SEED");

  CLI::App* plot = app.add_subcommand("plot", "render run/summary CSVs to SVG");
  plot->add_option("csv", plot_inputs, "input CSV files")->required()->expected(-1);
  plot->add_option("--out", plot_out, "output SVG path")->envname("SPECTRALFLOW_OUT");
  plot->add_option("--metric", plot_options.metric, "metric column to plot");
  plot->add_flag("--log-y", plot_options.log_y, "log10 vertical axis");
  plot->add_option("--reference", plot_reference, "horizontal reference value");
  plot->add_option("--title", plot_options.title, "plot title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(common);
    if (sweep->parsed()) return cmd_sweep(common, runs, parallel);
    if (reference->parsed()) return cmd_reference(ref_potential, ref_grid_n, ref_out);
    if (check->parsed()) return cmd_check(static_cast<std::uint64_t>(check_seed));
    if (plot->parsed()) {
      plot_options.reference = plot_reference;
      return cmd_plot(plot_inputs, plot_out, plot_options);
    }
  } catch (const spectralflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
