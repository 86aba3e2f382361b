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

// Two-level heterogeneity: the intra/inter decomposition of gradient
// deviation, per-group and inter-group bound constants, the group-size
// bounds relating them to the global constants, and the group
// stochastic-gradient variance bound.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gst/core.h"
#include "gst/grouping.h"
#include "gst/tasks.h"

namespace gst {

struct DecompositionReport {
  double global_variance = 0.0;  // (1/M) sum_m ||g_m - g||^2
  double intra_sum = 0.0;        // (1/M) sum_k sum_{m in G_k} ||g_m - g^(k)||^2
  double inter_sum = 0.0;        // (1/M) sum_k M_k ||g^(k) - g||^2
  double residual = 0.0;         // global - intra - inter
};

// Each of the three sums is accumulated by its own loop from the raw task
// gradients.
DecompositionReport decompose_variance(std::span<const TaskPtr> tasks, const GroupPartition& p,
                                       const ParamVector& theta);

struct HeterogeneityEstimate {
  HeterogeneityConstants global;
  std::vector<HeterogeneityConstants> per_group;  // indexed by group
  HeterogeneityConstants inter_group;
  double sigma = 0.0;                // max task noise level
  std::vector<double> sigma_k;       // per group, worst case over the probe set
  double sigma_g = 0.0;              // max_k sigma_k
  std::vector<double> max_group_grad_norm_sq;
  std::vector<ParamVector> probe_points;
  std::uint64_t probe_hash = 0;
  std::uint64_t partition_hash = 0;
};

std::uint64_t probe_set_hash(std::span<const ParamVector> points);
// Hash of the grouping alone; visiting order does not enter.
std::uint64_t grouping_hash(const GroupPartition& p);

// Per-group fit over (||grad F^(k)||^2, (1/M_k) sum_{m in G_k} ||grad F_m - grad F^(k)||^2)
// and inter-group fit over (||grad F||^2, (1/K) sum_k ||grad F^(k) - grad F||^2),
// all with fit_heterogeneity_bound on the same probe points.
HeterogeneityEstimate estimate_group_constants(std::span<const TaskPtr> tasks, const GroupPartition& p,
                                               std::span<const ParamVector> probe_points);

// sigma_k^2 = sigma^2 / M_k + beta_k^2 x + zeta_k^2.
double sigma_k_sq(double sigma, int group_size, const HeterogeneityConstants& c, double grad_norm_sq);

struct GroupBoundReport {
  int num_tasks = 0;
  int num_groups = 0;
  int min_group_size = 0;
  double factor = 0.0;  // M / (K * M_min)
  std::optional<double> beta_g_sq;
  std::optional<double> beta_bound;  // factor * beta^2
  std::optional<double> beta_slack;  // bound - beta_g^2
  double zeta_g_sq = 0.0;
  double zeta_bound = 0.0;
  double zeta_slack = 0.0;
  bool beta_holds = true;  // vacuous when either side is undetermined
  bool zeta_holds = true;
  bool holds() const { return beta_holds && zeta_holds; }
  // Groups whose intra constants exceed the global ones. These are findings,
  // not errors: nothing forces them below the global level for an
  // arbitrary partition.
  std::vector<int> intra_violations;
};

// Throws StructuralError if the estimate was computed for another grouping
// or its probe set was altered.
GroupBoundReport check_group_bounds(const HeterogeneityEstimate& est, const GroupPartition& p);

struct VarianceCheck {
  double empirical_var = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;
  double noise_term = 0.0;      // sigma^2 / M_k
  double deviation_term = 0.0;  // (1/M_k) sum ||grad F_m - grad F^(k)||^2 at theta
  double fitted_term = 0.0;     // beta_k^2 ||grad F^(k)||^2 + zeta_k^2
  int num_draws = 0;
};

// Monte-Carlo estimate of E||g^(k) - grad F^(k)||^2 where g^(k) averages one
// stochastic gradient per member task. Throws NumericError when the
// estimate exceeds the bound by more than five standard errors.
VarianceCheck check_variance_bound(std::span<const TaskPtr> tasks, std::span<const int> group,
                                   const ParamVector& theta, int num_draws, const SeededRng& rng,
                                   const HeterogeneityConstants& group_constants);

}  // namespace gst
