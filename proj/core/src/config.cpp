#include "spectralflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <json.hpp>

#include "spectralflow/errors.hpp"
#include "text_util.hpp"

namespace spectralflow {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::string_view unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::string integrator_name(FlowConfig::Integrator integrator) {
  return integrator == FlowConfig::Integrator::SgdRenorm ? "sgd_renorm" : "lagrangian";
}

FlowConfig::Integrator parse_integrator(std::string_view value, const std::string& ctx) {
  if (value == "sgd_renorm") return FlowConfig::Integrator::SgdRenorm;
  if (value == "lagrangian") return FlowConfig::Integrator::Lagrangian;
  throw ConfigError(ctx + ": unknown integrator '" + std::string(value) +
                    "' (expected sgd_renorm or lagrangian)");
}

// Applies one flow-section key; returns false when the key is not a flow key.
bool apply_flow_key(FlowConfig& flow, std::string_view key, std::string_view value,
                    const std::string& ctx) {
  if (key == "d") {
    flow.d = static_cast<int>(detail::parse_int(value, ctx));
  } else if (key == "m") {
    flow.m = static_cast<int>(detail::parse_int(value, ctx));
  } else if (key == "tau") {
    flow.tau = detail::parse_double(value, ctx);
  } else if (key == "integrator") {
    flow.integrator = parse_integrator(value, ctx);
  } else if (key == "steps") {
    flow.steps = detail::parse_int(value, ctx);
  } else if (key == "eta") {
    flow.eta = detail::parse_double(value, ctx);
  } else if (key == "batch") {
    flow.batch_n = static_cast<int>(detail::parse_int(value, ctx));
  } else if (key == "dataset") {
    flow.dataset_size = detail::parse_int(value, ctx);
  } else if (key == "seed") {
    flow.seed = static_cast<std::uint64_t>(detail::parse_int(value, ctx));
  } else if (key == "eval_cadence") {
    flow.eval_cadence = detail::parse_int(value, ctx);
  } else if (key == "eval_grid") {
    flow.eval_grid_n = static_cast<int>(detail::parse_int(value, ctx));
  } else if (key == "eval_mc") {
    flow.eval_mc_n = static_cast<int>(detail::parse_int(value, ctx));
  } else if (key == "norm_grid") {
    flow.norm_grid_n = static_cast<int>(detail::parse_int(value, ctx));
  } else if (key == "probe_count") {
    flow.probe_count = static_cast<int>(detail::parse_int(value, ctx));
  } else if (key == "r_max") {
    flow.r_max = detail::parse_double(value, ctx);
  } else if (key == "mollifier_resolution") {
    flow.mollifier_resolution = static_cast<int>(detail::parse_int(value, ctx));
  } else {
    return false;
  }
  return true;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;  // empty until the first [header]
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string ctx = "config line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(ctx + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "flow" && section != "potential" && section != "reference" &&
          section != "output") {
        throw ConfigError(ctx + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(ctx + ": expected key=value, got '" + std::string(line) + "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = unquote(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(ctx + ": empty key");
    const std::string key_ctx = ctx + ", key '" + std::string(key) + "'";

    if (section == "potential" || (section.empty() && key == "potential")) {
      if (key != "potential") {
        throw ConfigError(key_ctx + ": unknown key in [potential]");
      }
      cfg.flow.potential = PotentialSpec::parse(value);
    } else if (section == "reference") {
      if (key != "file") throw ConfigError(key_ctx + ": unknown key in [reference]");
      cfg.reference_file = std::string(value);
    } else if (section == "output") {
      if (key != "dir") throw ConfigError(key_ctx + ": unknown key in [output]");
      cfg.output_dir = std::string(value);
    } else {
      // [flow] or the sectionless preamble.
      if (!apply_flow_key(cfg.flow, key, value, key_ctx)) {
        throw ConfigError(key_ctx + ": unknown key in [" +
                          (section.empty() ? "flow" : section) + "]");
      }
    }
  }
  cfg.flow.validate();
  return cfg;
}

std::string serialize_flow_config(const FlowConfig& flow) {
  std::string out = "[flow]\n";
  out += "d = " + std::to_string(flow.d) + "\n";
  out += "m = " + std::to_string(flow.m) + "\n";
  out += "tau = " + detail::format_double(flow.tau) + "\n";
  out += "integrator = " + integrator_name(flow.integrator) + "\n";
  out += "steps = " + std::to_string(flow.steps) + "\n";
  out += "eta = " + detail::format_double(flow.eta) + "\n";
  out += "batch = " + std::to_string(flow.batch_n) + "\n";
  out += "dataset = " + std::to_string(flow.dataset_size) + "\n";
  out += "seed = " + std::to_string(flow.seed) + "\n";
  out += "eval_cadence = " + std::to_string(flow.eval_cadence) + "\n";
  out += "eval_grid = " + std::to_string(flow.eval_grid_n) + "\n";
  out += "eval_mc = " + std::to_string(flow.eval_mc_n) + "\n";
  out += "norm_grid = " + std::to_string(flow.norm_grid_n) + "\n";
  out += "probe_count = " + std::to_string(flow.probe_count) + "\n";
  out += "r_max = " + detail::format_double(flow.r_max) + "\n";
  out += "mollifier_resolution = " + std::to_string(flow.mollifier_resolution) + "\n";
  out += "[potential]\n";
  out += "potential = \"" + flow.potential.to_string() + "\"\n";
  return out;
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out = serialize_flow_config(cfg.flow);
  out += "[reference]\n";
  out += "file = \"" + cfg.reference_file + "\"\n";
  out += "[output]\n";
  out += "dir = \"" + cfg.output_dir + "\"\n";
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string text = serialize_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string run_record_json(const RunConfig& cfg, const RunRecord& record) {
  nlohmann::json j;
  j["config"] = serialize_config(cfg);
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.flow.seed;
  j["incomplete"] = record.incomplete;
  j["error"] = record.error;
  j["init"] = {{"attempts", record.init.attempts},
               {"b_gap", record.init.b_gap},
               {"sphere_gap", record.init.sphere_gap}};
  j["r_max_hits"] = record.r_max_hits;
  if (!record.rows.empty()) {
    const EvalRow& last = record.rows.back();
    j["final"] = {{"step", last.step},           {"energy", last.energy},
                  {"rayleigh", last.rayleigh},   {"sigma_mu", last.sigma_mu},
                  {"constraint", last.constraint}, {"local_slope", last.local_slope},
                  {"l2_error", last.l2_error},   {"r_t", last.r_t},
                  {"wall_ms", last.wall_ms}};
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& r : record.rows) {
    rows.push_back({{"step", r.step},
                    {"energy_se", r.energy_se},
                    {"wall_ms", r.wall_ms}});
  }
  j["row_diagnostics"] = rows;
  return j.dump(2) + "\n";
}

}  // namespace spectralflow
