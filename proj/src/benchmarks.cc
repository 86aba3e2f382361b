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

#include "gst/benchmarks.h"

#include <cmath>

#include "gst/affinity.h"

namespace gst {

std::string ScheduleSpec::label() const {
  std::string s = to_string(kind);
  if (order_policy == OrderPolicy::StabilityFirst) s += "-stability";
  if (order_policy == OrderPolicy::Reverse) s += "-reversed";
  if (kind == ScheduleKind::Sequential && passes > 1) s += "-x" + std::to_string(passes);
  return s;
}

std::size_t RaceOutcome::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < spec.schedules.size(); ++i) {
    if (spec.schedules[i].label() == label) return i;
  }
  throw StructuralError("race '" + spec.name + "' has no schedule '" + label + "'");
}

std::vector<double> RaceOutcome::final_mean_loss(std::size_t schedule) const {
  std::vector<double> out;
  for (const auto& s : seeds) out.push_back(s.traces.at(schedule).rounds.back().loss);
  return out;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  std::vector<std::uint64_t> v;
  for (int i = 0; i < count; ++i) v.push_back(first + static_cast<std::uint64_t>(i));
  return v;
}

namespace {

RunTrace run_schedule(const ScheduleSpec& s, const TaskList& tasks, const GroupPartition& base,
                      const HeterogeneityEstimate& est, const ParamVector& theta0, const RaceSpec& spec,
                      const SeededRng& rng) {
  GroupPartition p = base;
  if (s.order_policy == OrderPolicy::StabilityFirst) p = stability_first_order(base, est);
  if (s.order_policy == OrderPolicy::Reverse) p = base.reversed();
  RunTrace t;
  switch (s.kind) {
    case ScheduleKind::Parallel:
      t = run_parallel(tasks, theta0, spec.lr, spec.budget, rng, spec.run);
      break;
    case ScheduleKind::Sequential: {
      std::vector<int> order;
      for (const auto& g : p.order()) {
        for (int m : p.members(g)) order.push_back(m);
      }
      t = run_sequential(tasks, theta0, spec.lr, spec.budget, order, rng, spec.run, s.passes);
      break;
    }
    case ScheduleKind::StrictCycleGST:
      t = run_gst(tasks, p, theta0, spec.lr, spec.budget, GstMode::StrictCycle, rng, spec.run, spec.gst);
      break;
    case ScheduleKind::ProgressiveGST:
      t = run_gst(tasks, p, theta0, spec.lr, spec.budget, GstMode::Progressive, rng, spec.run, spec.gst);
      break;
    case ScheduleKind::ReverseProgressiveGST:
      t = run_gst(tasks, p, theta0, spec.lr, spec.budget, GstMode::Reverse, rng, spec.run, spec.gst);
      break;
    case ScheduleKind::Independent:
      throw StructuralError("race: independent runs are not ranked");
  }
  t.label = s.label();
  return t;
}

}  // namespace

SeedOutcome run_race_seed(const RaceSpec& spec, std::uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;
  HeterogeneityRecipe recipe = spec.recipe;
  recipe.seed = spec.family_seed_base + seed;
  out.family = generate_quadratic_family(recipe);
  const TaskList tasks = out.family.task_list();

  const SeededRng root(seed, 0);
  SeededRng init_rng = root.substream(2);
  const auto d = static_cast<std::size_t>(recipe.dim);
  out.theta0 = ParamVector(out.family.mean_minimizer() +
                           spec.init_offset / std::sqrt(static_cast<double>(d)) * init_rng.normal_vector(d));

  ProbeConfig probe;
  probe.init_point = out.theta0;
  probe.probe_steps = spec.probe_steps;
  probe.probe_lr = spec.probe_lr;
  const AffinityMatrix a = probe_affinity_matrix(tasks, probe, root.substream(3));
  SpectralConfig sc;
  sc.num_groups = spec.num_groups;
  sc.seed = seed;
  out.partition = spectral_cluster(a, sc);
  out.estimate = estimate_group_constants(tasks, out.partition, default_probe_points(out.family, spec.num_probe_points));

  const SeededRng train_rng = root.substream(1);
  for (const auto& s : spec.schedules) {
    out.traces.push_back(run_schedule(s, tasks, out.partition, out.estimate, out.theta0, spec, train_rng));
  }
  return out;
}

RaceOutcome run_race(const RaceSpec& spec, const std::vector<std::uint64_t>& seeds) {
  RaceOutcome out;
  out.spec = spec;
  std::vector<std::vector<RunTrace>> runs;
  for (auto s : seeds) {
    out.seeds.push_back(run_race_seed(spec, s));
    runs.push_back(out.seeds.back().traces);
  }
  out.ranking = compare_convergence(runs, spec.budget);
  return out;
}

namespace {

HeterogeneityRecipe race_recipe(int m, int clusters, double intra, double inter, double sigma) {
  HeterogeneityRecipe r;
  r.num_tasks = m;
  r.dim = 10;
  r.num_latent_clusters = clusters;
  r.intra_cluster_spread = intra;
  r.inter_cluster_spread = inter;
  r.noise_sigma = sigma;
  r.min_curvature = 0.1;
  r.max_curvature = 1.0;
  return r;
}

const ScheduleSpec kParallel{ScheduleKind::Parallel};
const ScheduleSpec kSequential{ScheduleKind::Sequential};
const ScheduleSpec kStrict{ScheduleKind::StrictCycleGST};
const ScheduleSpec kProgressive{ScheduleKind::ProgressiveGST};

}  // namespace

RaceSpec high_heterogeneity_race() {
  RaceSpec s;
  s.name = "high-heterogeneity";
  s.recipe = race_recipe(8, 4, 0.3, 1.0, 0.01);
  s.num_groups = 4;
  s.budget = 640;
  s.run.batch_mode = true;
  s.init_offset = 100.0;
  s.schedules = {kParallel, kSequential, kProgressive};
  return s;
}

RaceSpec low_heterogeneity_race() {
  RaceSpec s = high_heterogeneity_race();
  s.name = "low-heterogeneity";
  s.recipe = race_recipe(8, 4, 0.01, 0.01, 100.0);
  s.schedules = {kParallel, kSequential, kProgressive};
  return s;
}

RaceSpec two_cluster_race() {
  RaceSpec s;
  s.name = "two-cluster";
  s.recipe = race_recipe(8, 2, 0.1, 4.0, 0.01);
  s.num_groups = 2;
  s.budget = 640;
  s.run.batch_mode = true;
  s.init_offset = 100.0;
  s.schedules = {kParallel, kSequential, kStrict, kProgressive};
  return s;
}

RaceSpec forgetting_race() {
  RaceSpec s;
  s.name = "forgetting";
  s.recipe = race_recipe(8, 2, 0.05, 5.0, 0.01);
  s.num_groups = 2;
  s.budget = 8000;
  s.run.batch_mode = true;
  s.init_offset = 0.0;
  s.schedules = {kStrict, kProgressive};
  return s;
}

RaceSpec outlier_group_race() {
  RaceSpec s;
  s.name = "outlier-group";
  s.recipe = race_recipe(9, 3, 0.1, 8.0, 0.01);
  s.recipe.cluster_intra_spreads = {0.1, 0.1, 1.0};
  s.recipe.center_last_cluster = true;
  s.num_groups = 3;
  s.budget = 900;
  s.run.batch_mode = true;
  s.init_offset = 0.0;
  s.schedules = {{ScheduleKind::ProgressiveGST, OrderPolicy::StabilityFirst},
                 {ScheduleKind::ReverseProgressiveGST, OrderPolicy::StabilityFirst}};
  return s;
}

std::vector<std::string> race_names() {
  return {"high-heterogeneity", "low-heterogeneity", "two-cluster", "forgetting", "outlier-group"};
}

RaceSpec race_by_name(const std::string& name) {
  if (name == "high-heterogeneity") return high_heterogeneity_race();
  if (name == "low-heterogeneity") return low_heterogeneity_race();
  if (name == "two-cluster") return two_cluster_race();
  if (name == "forgetting") return forgetting_race();
  if (name == "outlier-group") return outlier_group_race();
  throw StructuralError("unknown benchmark '" + name + "'");
}

HeterogeneityRecipe structured_suite_recipe(int i) {
  HeterogeneityRecipe r;
  r.num_tasks = 4 + (i * 5) % 13;
  r.dim = 2 + (i * 7) % 31;
  r.num_latent_clusters = std::min(r.num_tasks / 2, 2 + i % 3);
  r.intra_cluster_spread = 0.1;
  r.inter_cluster_spread = 2.0;
  r.curvature_jitter = 0.05;
  r.noise_sigma = 0.5;
  r.seed = 5000 + static_cast<std::uint64_t>(i);
  return r;
}

}  // namespace gst
