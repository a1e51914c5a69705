#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "spectralflow/config.hpp"
#include "spectralflow/errors.hpp"
#include "spectralflow/plot.hpp"
#include "spectralflow/sweep.hpp"

using namespace spectralflow;

namespace {

RunConfig tiny_run() {
  RunConfig cfg;
  cfg.flow.d = 2;
  cfg.flow.m = 12;
  cfg.flow.steps = 100;
  cfg.flow.batch_n = 48;
  cfg.flow.eval_cadence = 25;
  cfg.flow.eval_grid_n = 16;
  cfg.flow.probe_count = 4;
  // Mild amplitude: the default eta = 1/(tau*m) is large at m = 12, and these
  // tests exercise the tooling layer, not the dynamics.
  cfg.flow.potential = PotentialSpec::parse("cos1d:5");
  cfg.flow.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("minimal config text picks defaults") {
  const RunConfig cfg = parse_config("d=2\npotential=cos1d:100\n");
  CHECK(cfg.flow.d == 2);
  CHECK(cfg.flow.m == 100);
  CHECK(cfg.flow.tau == 20.0);
  CHECK(cfg.flow.steps == 20000);
  CHECK(cfg.flow.integrator == FlowConfig::Integrator::SgdRenorm);
  CHECK(cfg.flow.potential.to_string() == "cos1d:100");
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.reference_file.empty());
}

TEST_CASE("sectioned config round-trips through the canonical form") {
  const std::string text =
      "# comment line\n"
      "[flow]\n"
      "d=3\n"
      "m=64\n"
      "tau=40\n"
      "integrator=lagrangian\n"
      "steps=5000\n"
      "eta=0.001\n"
      "batch=200\n"
      "seed=99\n"
      "eval_cadence=250\n"
      "[potential]\n"
      "potential=double_well:100\n"
      "[reference]\n"
      "file=ref.txt\n"
      "[output]\n"
      "dir=results\n";
  const RunConfig cfg = parse_config(text);
  CHECK(cfg.flow.d == 3);
  CHECK(cfg.flow.m == 64);
  CHECK(cfg.flow.tau == 40.0);
  CHECK(cfg.flow.integrator == FlowConfig::Integrator::Lagrangian);
  CHECK(cfg.flow.eta == 0.001);
  CHECK(cfg.flow.seed == 99);
  CHECK(cfg.flow.potential.to_string() == "double_well:100");
  CHECK(cfg.reference_file == "ref.txt");
  CHECK(cfg.output_dir == "results");

  const std::string canon = serialize_config(cfg);
  const RunConfig back = parse_config(canon);
  CHECK(serialize_config(back) == canon);
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(back.flow.integrator == cfg.flow.integrator);
  CHECK(back.flow.eta == cfg.flow.eta);
}

TEST_CASE("config errors carry enough context") {
  CHECK_THROWS_AS(parse_config("frobnicate=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("d=2\npotential=cos1d:100\nm=0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[flow]\nd=two\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[flow]\nintegrator=verlet\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[mystery]\nd=2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[flow]\nd\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[potential]\nkind=zero\n"), ConfigError);
  // A potential is optional; the free-particle default applies.
  CHECK(parse_config("d=2\n").flow.potential.to_string() == "zero");
}

TEST_CASE("config hash separates distinct configurations") {
  RunConfig a = tiny_run();
  RunConfig b = tiny_run();
  CHECK(config_hash(a) == config_hash(b));
  b.flow.tau = 21.0;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("run record json carries the run's metrics") {
  const RunConfig cfg = tiny_run();
  const RunRecord rec = run_flow(cfg.flow);
  REQUIRE(!rec.incomplete);
  const std::string json = run_record_json(cfg, rec);
  CHECK(json.find("\"row_diagnostics\"") != std::string::npos);
  CHECK(json.find("\"rayleigh\"") != std::string::npos);
  CHECK(json.find("\"config_hash\"") != std::string::npos);
  CHECK(json.find("\"incomplete\": false") != std::string::npos);
  CHECK(json.find("\"wall_ms\"") != std::string::npos);
  CHECK(json.find("\"energy_se\"") != std::string::npos);
}

TEST_CASE("sweeps are schedule-invariant and seeded sequentially") {
  RunConfig base = tiny_run();
  base.flow.steps = 60;
  base.flow.eval_cadence = 20;
  const std::vector<RunRecord> serial = run_sweep(base, 3, 1);
  const std::vector<RunRecord> parallel = run_sweep(base, 3, 3);
  REQUIRE(serial.size() == 3);
  REQUIRE(parallel.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(serial[k].to_csv(false) == parallel[k].to_csv(false));
    FlowConfig solo = base.flow;
    solo.seed = base.flow.seed + static_cast<std::uint64_t>(k);
    const RunRecord lone = run_flow(solo);
    CHECK(lone.to_csv(false) == serial[k].to_csv(false));
  }
}

TEST_CASE("sweep summary aggregates the metric columns") {
  RunConfig base = tiny_run();
  base.flow.steps = 60;
  base.flow.eval_cadence = 20;
  const std::vector<RunRecord> records = run_sweep(base, 2, 2);
  const SweepSummary summary = summarize_sweep(base, records);
  CHECK(summary.runs == 2);
  CHECK(summary.config_hash == config_hash(base));
  REQUIRE(!summary.rows.empty());
  CHECK(summary.rows.front().step == records[0].rows.front().step);

  // Mean and population variance recomputed by hand for the energy column.
  const std::size_t last = summary.rows.size() - 1;
  const double e0 = records[0].rows[last].energy;
  const double e1 = records[1].rows[last].energy;
  const double mean = (e0 + e1) / 2;
  const double var = ((e0 - mean) * (e0 - mean) + (e1 - mean) * (e1 - mean)) / 2;
  CHECK(summary.rows[last].mean[0] == doctest::Approx(mean).epsilon(1e-12));
  CHECK(summary.rows[last].variance[0] == doctest::Approx(var).epsilon(1e-10));

  SUBCASE("single-run sweeps have zero variance") {
    const std::vector<RunRecord> one = run_sweep(base, 1, 1);
    const SweepSummary s1 = summarize_sweep(base, one);
    for (const SweepSummaryRow& row : s1.rows) {
      for (double v : row.variance) CHECK(v == 0.0);
    }
  }
  SUBCASE("summary csv header lists every metric twice") {
    const std::string csv = summary.to_csv();
    const std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header.substr(0, 5) == "step,");
    for (const char* metric : kSweepMetrics) {
      CHECK(header.find(std::string(metric) + "_mean") != std::string::npos);
      CHECK(header.find(std::string(metric) + "_var") != std::string::npos);
    }
  }
}

TEST_CASE("svg rendering of run and summary csv") {
  RunConfig base = tiny_run();
  base.flow.steps = 60;
  base.flow.eval_cadence = 20;
  const RunRecord rec = run_flow(base.flow);
  const std::string run_csv = rec.to_csv(false);

  SUBCASE("run series") {
    PlotOptions opt;
    opt.metric = "energy";
    opt.title = "energy";
    const std::string svg = render_plot_svg({run_csv}, opt);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("energy") != std::string::npos);
  }
  SUBCASE("reference rule is dashed") {
    PlotOptions opt;
    opt.metric = "rayleigh";
    opt.reference = -58.0;
    const std::string svg = render_plot_svg({run_csv}, opt);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
  }
  SUBCASE("summary series draw a variance band") {
    const std::vector<RunRecord> records = run_sweep(base, 2, 2);
    const std::string sum_csv = summarize_sweep(base, records).to_csv();
    PlotOptions opt;
    opt.metric = "rayleigh";
    const std::string svg = render_plot_svg({sum_csv}, opt);
    CHECK(svg.find("<polygon") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
  }
  SUBCASE("log axis drops nonpositive samples but keeps the series") {
    PlotOptions opt;
    opt.metric = "local_slope";
    opt.log_y = true;
    const std::string svg = render_plot_svg({run_csv}, opt);
    CHECK(svg.find("<polyline") != std::string::npos);
  }
  SUBCASE("missing metric column throws") {
    PlotOptions opt;
    opt.metric = "no_such_metric";
    CHECK_THROWS_AS(render_plot_svg({run_csv}, opt), ConfigError);
    CHECK_THROWS_AS(render_plot_svg({}, opt), ConfigError);
  }
}
