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

// Multi-seed convergence races on quadratic families. Each seed draws its
// own family and starting point, groups the tasks from the probe affinity,
// and runs every listed schedule from the same start with the same random
// stream.

#include <string>
#include <vector>

#include "gst/grouping.h"
#include "gst/heterogeneity.h"
#include "gst/scheduler.h"
#include "gst/tasks.h"

namespace gst {

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Parallel;
  OrderPolicy order_policy = OrderPolicy::GivenOrder;
  int passes = 1;  // sequential only

  std::string label() const;
};

struct RaceSpec {
  std::string name;
  HeterogeneityRecipe recipe;
  int num_groups = 2;
  long budget = 640;
  LrSchedule lr{LrSchedule::Shape::Constant, 0.2, 0.1};
  RunOptions run;
  GstOptions gst;
  // Start = mean minimizer + init_offset * N(0, I / d).
  double init_offset = 0.0;
  int probe_steps = 10;
  double probe_lr = 0.05;
  int num_probe_points = 16;
  std::vector<ScheduleSpec> schedules;
  std::uint64_t family_seed_base = 1000;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  QuadraticFamily family;
  ParamVector theta0;
  GroupPartition partition;
  HeterogeneityEstimate estimate;
  std::vector<RunTrace> traces;  // one per RaceSpec::schedules entry
};

struct RaceOutcome {
  RaceSpec spec;
  std::vector<SeedOutcome> seeds;
  MultiSeedRanking ranking;

  // Index of the schedule with the given label; throws if absent.
  std::size_t index_of(const std::string& label) const;
  std::vector<double> final_mean_loss(std::size_t schedule) const;
};

SeedOutcome run_race_seed(const RaceSpec& spec, std::uint64_t seed);
RaceOutcome run_race(const RaceSpec& spec, const std::vector<std::uint64_t>& seeds);

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count);

// Named setups used by the acceptance suite and the `bench` subcommand.
RaceSpec high_heterogeneity_race();
RaceSpec low_heterogeneity_race();
RaceSpec two_cluster_race();
RaceSpec forgetting_race();
RaceSpec outlier_group_race();
std::vector<std::string> race_names();
RaceSpec race_by_name(const std::string& name);

// Instance i of the structured quadratic suite: 2 to 4 latent clusters,
// intra spread an order of magnitude below the inter spread, mild
// curvature jitter.
HeterogeneityRecipe structured_suite_recipe(int i);

}  // namespace gst
