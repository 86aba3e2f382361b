// Copyright 2026 The GST Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// gst: command-line front end for the grouped sequential training toolkit.
//
//   gst gen-tasks --config exp.json --out runs/exp
//   gst run --config exp.json --out runs/exp [--only train] [--seeds 1,2,3]
//   gst bench --name two-cluster --seeds 20 --out runs/bench
//
// Exit codes: 0 success, 2 configuration or input error, 3 numeric or
// verification failure. Failures print one JSON error record on stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "gst/harness.h"

namespace {

using gst::json;

int fail(int code, const std::string& kind, const std::string& message, const std::string& field = "") {
  json err = {{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  std::cerr << err.dump() << "\n";
  return code;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw gst::ConfigError("--seeds", "expected a comma-separated list of non-negative integers");
    }
    out.push_back(std::stoull(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

gst::ExperimentConfig resolve_config(const std::string& config_path, const std::string& out, const std::string& seeds) {
  std::filesystem::path p = config_path;
  if (p.empty()) {
    p = std::filesystem::path(out) / "config.json";
    if (!std::filesystem::exists(p)) throw gst::ConfigError("--config", "not given and " + p.string() + " does not exist");
  }
  json j;
  try {
    j = json::parse(gst::read_file(p));
  } catch (const json::parse_error& e) {
    throw gst::ConfigError("/", std::string("invalid JSON in ") + p.string() + ": " + e.what());
  }
  // config.json written by a previous run carries provenance; drop it.
  j.erase("provenance");
  gst::ExperimentConfig cfg = gst::parse_config(j);
  if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
  return cfg;
}

void report(const gst::StageResult& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& f : r.written) std::cout << f.string() << "\n";
}

int bench(const std::string& name, int num_seeds, const std::string& out) {
  const gst::RaceSpec spec = gst::race_by_name(name);
  const auto outcome = gst::run_race(spec, gst::seed_range(1, num_seeds));
  json j = {{"benchmark", name}, {"budget", spec.budget}, {"seeds", num_seeds}, {"ranking", gst::to_json(outcome.ranking)}};
  json finals = json::object();
  for (std::size_t k = 0; k < spec.schedules.size(); ++k) {
    finals[spec.schedules[k].label()] = gst::median(outcome.final_mean_loss(k));
  }
  j["median_final_loss"] = finals;
  if (!out.empty()) {
    gst::write_json(std::filesystem::path(out) / ("bench_" + name + ".json"), j);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grouped sequential training toolkit"};
  app.require_subcommand(1);
  std::string config, out, seeds, only, bench_name;
  int bench_seeds = 20;

  std::vector<CLI::App*> stage_cmds;
  for (gst::Stage s : gst::all_stages()) {
    auto* cmd = app.add_subcommand(gst::to_string(s), "Run the " + gst::to_string(s) + " stage");
    cmd->add_option("--config", config, "Experiment config (defaults to <out>/config.json)");
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--seeds", seeds, "Comma-separated run seeds, overriding the config");
    stage_cmds.push_back(cmd);
  }
  auto* run = app.add_subcommand("run", "Run the whole pipeline");
  run->add_option("--config", config, "Experiment config")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--seeds", seeds, "Comma-separated run seeds, overriding the config");
  run->add_option("--only", only, "Run a single stage");

  auto* bench_cmd = app.add_subcommand("bench", "Run a named multi-seed benchmark race");
  bench_cmd->add_option("--name", bench_name, "Benchmark name")->required();
  bench_cmd->add_option("--seeds", bench_seeds, "Number of seeds (1..N)")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", out, "Directory for the JSON summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(2, "usage", e.what());
  }

  try {
    if (bench_cmd->parsed()) return bench(bench_name, bench_seeds, out);
    const gst::ExperimentConfig cfg = resolve_config(config, out, seeds);
    if (run->parsed()) {
      std::optional<gst::Stage> stage;
      if (!only.empty()) stage = gst::stage_from_string(only);
      report(gst::run_pipeline(cfg, out, stage));
      return 0;
    }
    for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
      if (!stage_cmds[i]->parsed()) continue;
      const gst::Stage s = gst::all_stages()[i];
      if (s == gst::Stage::GenTasks) {
        // The first stage also records the effective config.
        json c = cfg.to_json();
        c["provenance"] = gst::Provenance{cfg.hash(), cfg.recipe.seed}.to_json();
        gst::write_json(std::filesystem::path(out) / "config.json", c);
      }
      report(gst::run_stage(s, cfg, out));
    }
    return 0;
  } catch (const gst::ConfigError& e) {
    return fail(2, "config", e.what(), e.field());
  } catch (const gst::VerificationFailure& e) {
    return fail(3, "verification", e.what());
  } catch (const gst::NumericError& e) {
    return fail(3, "numeric", e.what());
  } catch (const gst::StructuralError& e) {
    return fail(2, "input", e.what());
  } catch (const json::exception& e) {
    return fail(2, "input", e.what());
  } catch (const std::exception& e) {
    return fail(3, "internal", e.what());
  }
}
