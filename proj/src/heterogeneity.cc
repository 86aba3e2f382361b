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

#include "gst/heterogeneity.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace gst {

DecompositionReport decompose_variance(std::span<const TaskPtr> tasks, const GroupPartition& p,
                                       const ParamVector& theta) {
  if (static_cast<int>(tasks.size()) != p.num_tasks()) throw StructuralError("decompose_variance: partition size mismatch");
  const Eigen::MatrixXd g = task_gradients(tasks, theta);
  const Eigen::Index m_count = g.cols();
  const double inv_m = 1.0 / static_cast<double>(m_count);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(g.rows());
  for (Eigen::Index m = 0; m < m_count; ++m) mean += g.col(m);
  mean *= inv_m;

  DecompositionReport r;
  for (Eigen::Index m = 0; m < m_count; ++m) r.global_variance += (g.col(m) - mean).squaredNorm();
  r.global_variance *= inv_m;

  for (const auto& members : p.groups()) {
    Eigen::VectorXd gk = Eigen::VectorXd::Zero(g.rows());
    for (int m : members) gk += g.col(m);
    gk /= static_cast<double>(members.size());
    for (int m : members) r.intra_sum += (g.col(m) - gk).squaredNorm();
    r.inter_sum += static_cast<double>(members.size()) * (gk - mean).squaredNorm();
  }
  r.intra_sum *= inv_m;
  r.inter_sum *= inv_m;
  r.residual = r.global_variance - r.intra_sum - r.inter_sum;
  return r;
}

std::uint64_t probe_set_hash(std::span<const ParamVector> points) {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const auto& p : points) h = hash_vector(p.values(), h);
  return h;
}

std::uint64_t grouping_hash(const GroupPartition& p) {
  return fnv1a(p.assignments().data(), p.assignments().size() * sizeof(int));
}

double sigma_k_sq(double sigma, int group_size, const HeterogeneityConstants& c, double grad_norm_sq) {
  return sigma * sigma / group_size + c.beta_sq.value_or(0.0) * grad_norm_sq + c.zeta_sq;
}

HeterogeneityEstimate estimate_group_constants(std::span<const TaskPtr> tasks, const GroupPartition& p,
                                               std::span<const ParamVector> probe_points) {
  if (tasks.empty()) throw StructuralError("estimate_group_constants: no tasks");
  if (probe_points.empty()) throw StructuralError("estimate_group_constants: no probe points");
  if (static_cast<int>(tasks.size()) != p.num_tasks()) throw StructuralError("estimate_group_constants: partition size mismatch");
  const int k_count = p.num_groups();
  const auto groups = p.groups();

  std::vector<BoundSample> global_s, inter_s;
  std::vector<std::vector<BoundSample>> group_s(static_cast<std::size_t>(k_count));
  HeterogeneityEstimate est;
  est.max_group_grad_norm_sq.assign(static_cast<std::size_t>(k_count), 0.0);
  for (const auto& theta : probe_points) {
    const Eigen::MatrixXd g = task_gradients(tasks, theta);
    const Eigen::VectorXd mean = g.rowwise().mean();
    global_s.push_back({mean.squaredNorm(), (g.colwise() - mean).colwise().squaredNorm().mean()});
    double inter = 0.0;
    for (int k = 0; k < k_count; ++k) {
      const auto& members = groups[static_cast<std::size_t>(k)];
      Eigen::VectorXd gk = Eigen::VectorXd::Zero(g.rows());
      for (int m : members) gk += g.col(m);
      gk /= static_cast<double>(members.size());
      double dev = 0.0;
      for (int m : members) dev += (g.col(m) - gk).squaredNorm();
      dev /= static_cast<double>(members.size());
      group_s[static_cast<std::size_t>(k)].push_back({gk.squaredNorm(), dev});
      est.max_group_grad_norm_sq[static_cast<std::size_t>(k)] =
          std::max(est.max_group_grad_norm_sq[static_cast<std::size_t>(k)], gk.squaredNorm());
      inter += (gk - mean).squaredNorm();
    }
    inter_s.push_back({mean.squaredNorm(), inter / k_count});
  }

  est.global = fit_heterogeneity_bound(global_s);
  est.inter_group = fit_heterogeneity_bound(inter_s);
  for (int k = 0; k < k_count; ++k) est.per_group.push_back(fit_heterogeneity_bound(group_s[static_cast<std::size_t>(k)]));

  for (const auto& t : tasks) est.sigma = std::max(est.sigma, t->noise_sigma());
  for (int k = 0; k < k_count; ++k) {
    const double s2 = sigma_k_sq(est.sigma, p.group_sizes()[static_cast<std::size_t>(k)],
                                 est.per_group[static_cast<std::size_t>(k)],
                                 est.max_group_grad_norm_sq[static_cast<std::size_t>(k)]);
    est.sigma_k.push_back(std::sqrt(s2));
    est.sigma_g = std::max(est.sigma_g, est.sigma_k.back());
  }
  est.probe_points.assign(probe_points.begin(), probe_points.end());
  est.probe_hash = probe_set_hash(probe_points);
  est.partition_hash = grouping_hash(p);
  return est;
}

GroupBoundReport check_group_bounds(const HeterogeneityEstimate& est, const GroupPartition& p) {
  if (est.partition_hash != grouping_hash(p)) {
    throw StructuralError("check_group_bounds: estimate was computed for a different partition");
  }
  if (est.probe_hash != probe_set_hash(est.probe_points)) {
    throw StructuralError("check_group_bounds: probe set does not match the one the constants were fit on");
  }
  if (static_cast<int>(est.per_group.size()) != p.num_groups()) {
    throw StructuralError("check_group_bounds: per-group constants do not match K");
  }
  GroupBoundReport r;
  r.num_tasks = p.num_tasks();
  r.num_groups = p.num_groups();
  r.min_group_size = p.min_group_size();
  r.factor = static_cast<double>(r.num_tasks) / (static_cast<double>(r.num_groups) * r.min_group_size);

  r.zeta_g_sq = est.inter_group.zeta_sq;
  r.zeta_bound = r.factor * est.global.zeta_sq;
  r.zeta_slack = r.zeta_bound - r.zeta_g_sq;
  r.zeta_holds = r.zeta_slack >= 0.0;

  r.beta_g_sq = est.inter_group.beta_sq;
  if (est.global.beta_sq) r.beta_bound = r.factor * *est.global.beta_sq;
  if (r.beta_g_sq && r.beta_bound) {
    r.beta_slack = *r.beta_bound - *r.beta_g_sq;
    r.beta_holds = *r.beta_slack >= 0.0;
  }

  for (int k = 0; k < r.num_groups; ++k) {
    const auto& c = est.per_group[static_cast<std::size_t>(k)];
    const bool beta_over = c.beta_sq && est.global.beta_sq && *c.beta_sq > *est.global.beta_sq;
    if (beta_over || c.zeta_sq > est.global.zeta_sq) r.intra_violations.push_back(k);
  }
  return r;
}

VarianceCheck check_variance_bound(std::span<const TaskPtr> tasks, std::span<const int> group,
                                   const ParamVector& theta, int num_draws, const SeededRng& rng,
                                   const HeterogeneityConstants& group_constants) {
  if (group.empty()) throw StructuralError("check_variance_bound: empty group");
  if (num_draws < 1000) throw StructuralError("check_variance_bound: num_draws must be >= 1000");
  for (int m : group) {
    if (m < 0 || m >= static_cast<int>(tasks.size())) throw StructuralError("check_variance_bound: task index out of range");
  }
  const ObjectiveValue fk = group_objective(tasks, group, theta);
  const auto mk = static_cast<double>(group.size());

  double sigma = 0.0;
  for (int m : group) sigma = std::max(sigma, tasks[static_cast<std::size_t>(m)]->noise_sigma());

  VarianceCheck r;
  r.num_draws = num_draws;
  for (int m : group) r.deviation_term += (tasks[static_cast<std::size_t>(m)]->grad(theta).values() - fk.grad.values()).squaredNorm();
  r.deviation_term /= mk;
  r.noise_term = sigma * sigma / mk;
  r.fitted_term = group_constants.beta_sq.value_or(0.0) * fk.grad.norm_sq() + group_constants.zeta_sq;
  r.bound = r.noise_term + r.fitted_term;

  // Welford accumulation of the squared error.
  std::vector<SeededRng> streams;
  for (int m : group) streams.push_back(rng.substream(static_cast<std::uint64_t>(m)));
  double mean = 0.0, m2 = 0.0;
  for (int n = 1; n <= num_draws; ++n) {
    Eigen::VectorXd gk = Eigen::VectorXd::Zero(fk.grad.values().size());
    for (std::size_t i = 0; i < group.size(); ++i) {
      gk += tasks[static_cast<std::size_t>(group[i])]->stoch_grad(theta, streams[i]).values();
    }
    gk /= mk;
    const double x = (gk - fk.grad.values()).squaredNorm();
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }
  r.empirical_var = mean;
  r.standard_error = num_draws > 1 ? std::sqrt(m2 / (num_draws - 1) / num_draws) : 0.0;
  if (r.empirical_var - 5.0 * r.standard_error > r.bound * (1.0 + 1e-12)) {
    throw NumericError("check_variance_bound: empirical variance " + std::to_string(r.empirical_var) +
                       " exceeds bound " + std::to_string(r.bound) + " by more than 5 standard errors");
  }
  return r;
}

}  // namespace gst
