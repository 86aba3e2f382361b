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

// Training regimes under a shared gradient budget: parallel mix-all, strict
// sequential, grouped sequential (strict cycle, progressive, reverse) and
// independent per-task runs. Every regime is a list of segments, each a
// task pool plus a gradient allotment, run by the same SGD loop.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gst/core.h"
#include "gst/grouping.h"
#include "gst/heterogeneity.h"

namespace gst {

enum class ScheduleKind { Parallel, Sequential, StrictCycleGST, ProgressiveGST, ReverseProgressiveGST, Independent };
enum class GstMode { StrictCycle, Progressive, Reverse };
enum class OrderPolicy { GivenOrder, StabilityFirst, Reverse };

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

struct LrSchedule {
  enum class Shape { Constant, WarmupCosine };
  Shape shape = Shape::Constant;
  double base_lr = 0.05;
  double warmup_fraction = 0.1;

  // Step size after `consumed` of `budget` gradients.
  double at(long consumed, long budget) const;
};

struct RunOptions {
  // Average one draw per active task per step instead of one draw per step.
  bool batch_mode = false;
  // Gradients between instrumentation points; 0 selects budget / 200.
  long log_interval = 0;
  double divergence_loss = 1e12;
  bool keep_snapshots = false;
};

struct TraceRound {
  long step = 0;
  long grads_consumed = 0;
  double grad_norm_sq = 0.0;  // ||grad F(theta)||^2, exact, not charged
  double c_of_r = 0.0;        // running minimum of grad_norm_sq
  double loss = 0.0;          // F(theta)
  std::vector<double> per_task_loss;
  std::uint64_t theta_hash = 0;
};

struct TraceSegment {
  std::vector<int> pool;
  int group = -1;  // newest group in the pool for grouped regimes
  long start_grads = 0;
  long end_grads = 0;
};

struct RunTrace {
  ScheduleKind kind = ScheduleKind::Parallel;
  std::string label;
  std::uint64_t seed = 0;
  long budget = 0;
  std::vector<TraceRound> rounds;
  std::vector<TraceSegment> segments;
  std::vector<ParamVector> snapshots;  // parallel to rounds when requested
  ParamVector final_theta;
  bool diverged = false;

  long grads_consumed() const { return rounds.empty() ? 0 : rounds.back().grads_consumed; }
};

// Each step draws one stochastic gradient from a uniformly chosen task, or
// one per task in batch mode.
RunTrace run_parallel(std::span<const TaskPtr> tasks, const ParamVector& theta0, const LrSchedule& lr, long budget,
                      const SeededRng& rng, const RunOptions& opts = {});

// Equal budget per task (remainder to the earliest), trained one at a time
// in `order`; `passes` > 1 repeats the sweep with the budget split across
// all passes.
RunTrace run_sequential(std::span<const TaskPtr> tasks, const ParamVector& theta0, const LrSchedule& lr, long budget,
                        std::span<const int> order, const SeededRng& rng, const RunOptions& opts = {}, int passes = 1);

struct GstOptions {
  int num_cycles = 5;
  // Overrides budget / (K * num_cycles) for StrictCycle.
  long interval = 0;
};

RunTrace run_gst(std::span<const TaskPtr> tasks, const GroupPartition& p, const ParamVector& theta0,
                 const LrSchedule& lr, long budget, GstMode mode, const SeededRng& rng, const RunOptions& opts = {},
                 const GstOptions& gst = {});

// Groups by ascending zeta_k^2, then beta_k^2, then group index.
GroupPartition stability_first_order(const GroupPartition& p, const HeterogeneityEstimate& est);

// One run per task from theta0 on rng.substream(task index), budget / M each.
std::vector<RunTrace> run_independent(std::span<const TaskPtr> tasks, const ParamVector& theta0, const LrSchedule& lr,
                                      long budget, const SeededRng& rng, const RunOptions& opts = {});

// C(R) linearly interpolated at `grads`; throws if the trace ends earlier.
double c_at_budget(const RunTrace& t, long grads);

struct Ranking {
  std::vector<std::string> labels;
  std::vector<double> c_at_budget;
  std::vector<int> ranks;  // competition ranking, 1 = smallest C
};

Ranking compare_convergence(std::span<const RunTrace> traces, long at_budget);

struct MultiSeedRanking {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> per_seed_ranks;       // [seed][schedule]
  std::vector<std::vector<double>> per_seed_c;        // [seed][schedule]
  std::vector<double> median_rank;
  std::vector<double> median_c;
};

// `runs[s]` holds the traces of seed s, schedules in the same order for
// every seed.
MultiSeedRanking compare_convergence(const std::vector<std::vector<RunTrace>>& runs, long at_budget);

double median(std::vector<double> v);

// Mean loss of the given tasks at each instrumentation point.
std::vector<double> group_loss_curve(const RunTrace& t, std::span<const int> members);

// Largest rise of the members' mean loss above its value at a segment
// switch, taken over the instrumentation points of the following segment.
double max_loss_increase_after_switch(const RunTrace& t, std::span<const int> members);

}  // namespace gst
