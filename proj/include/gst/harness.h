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

#pragma once

// Config-driven pipeline: gen-tasks -> probe -> cluster -> train -> compare
// -> verify -> plot. Each stage reads the previous stage's files from the
// output directory, so stages can be rerun independently.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gst/benchmarks.h"
#include "gst/io.h"

namespace gst {

// Malformed configuration; `field` is a JSON pointer to the offending entry.
class ConfigError : public StructuralError {
 public:
  ConfigError(std::string field, const std::string& message)
      : StructuralError(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// An identity or bound check failed.
class VerificationFailure : public NumericError {
 public:
  using NumericError::NumericError;
};

struct VerifyFlags {
  bool decomposition = true;
  bool sum_identity = true;
  bool group_bounds = true;
  bool variance = true;
  int variance_draws = 10000;
};

struct ExperimentConfig {
  HeterogeneityRecipe recipe;
  int probe_steps = 10;
  double probe_lr = 0.05;
  Accumulation accumulate = Accumulation::MeanGradients;
  ProbeOracle oracle = ProbeOracle::Auto;
  AffinityKind affinity = AffinityKind::GradientDistance;
  int transfer_steps = 50;
  double probe_init_offset = 0.0;
  SpectralConfig spectral;
  long budget = 640;
  LrSchedule lr{LrSchedule::Shape::Constant, 0.2, 0.1};
  RunOptions run;
  GstOptions gst;
  double init_offset = 0.0;
  std::vector<ScheduleSpec> schedules;
  std::vector<std::uint64_t> seeds{1};
  int num_probe_points = 16;
  VerifyFlags verify;

  // Canonical form; the config hash is taken over its compact dump.
  json to_json() const;
  std::uint64_t hash() const;
};

ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& p);

enum class Stage { GenTasks, Probe, Cluster, Train, Compare, Verify, Plot };
Stage stage_from_string(const std::string& s);
std::string to_string(Stage s);
std::vector<Stage> all_stages();

struct StageResult {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

StageResult run_stage(Stage stage, const ExperimentConfig& cfg, const std::filesystem::path& out);
// Runs every stage in order, or just `only`. Writes config.json first.
StageResult run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out,
                         std::optional<Stage> only = std::nullopt);

// Training start for a run seed: mean minimizer + offset * N(0, I / d).
ParamVector training_init(const QuadraticFamily& f, double offset, std::uint64_t seed);

// One chart per metric plus the CSV behind it. Empty traces are skipped
// with a warning.
StageResult emit_plots(const std::vector<RunTrace>& traces, const std::vector<int>& tracked_group,
                       const std::filesystem::path& dir, const Provenance& prov, const std::string& suffix = "");

// Verification suite on a family and partition; the JSON carries a "passed"
// flag per suite.
json verify_family(const QuadraticFamily& f, const GroupPartition& p, const VerifyFlags& flags, int num_probe_points);

}  // namespace gst
