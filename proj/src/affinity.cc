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

#include "gst/affinity.h"

#include <cmath>
#include <string>

namespace gst {

double gradient_distance(const TaskObjective& task_m, const TaskObjective& task_n, const ParamVector& theta) {
  if (task_m.dim() != theta.dim() || task_n.dim() != theta.dim()) {
    throw StructuralError("gradient_distance: dimension mismatch");
  }
  return (task_m.grad(theta).values() - task_n.grad(theta).values()).squaredNorm();
}

AffinityMatrix probe_affinity_matrix(std::span<const TaskPtr> tasks, const ProbeConfig& config, const SeededRng& rng) {
  if (tasks.empty()) throw StructuralError("probe_affinity_matrix: no tasks");
  if (config.probe_steps < 1) throw StructuralError("probe_affinity_matrix: probe_steps must be >= 1");
  if (!(config.probe_lr > 0)) throw StructuralError("probe_affinity_matrix: probe_lr must be > 0");
  require_dim(tasks, config.init_point.dim());

  const auto m_count = static_cast<Eigen::Index>(tasks.size());
  const auto d = static_cast<Eigen::Index>(config.init_point.dim());
  Eigen::MatrixXd acc(d, m_count);
  bool any_exact = false, any_stochastic = false;
  for (Eigen::Index m = 0; m < m_count; ++m) {
    const TaskObjective& task = *tasks[static_cast<std::size_t>(m)];
    const bool exact = config.oracle == ProbeOracle::Exact ||
                       (config.oracle == ProbeOracle::Auto && task.closed_form());
    (exact ? any_exact : any_stochastic) = true;
    SeededRng stream = rng.substream(static_cast<std::uint64_t>(m));
    Eigen::VectorXd theta = config.init_point.values();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    for (int step = 0; step < config.probe_steps; ++step) {
      const ParamVector at(theta);
      const Eigen::VectorXd g = exact ? task.grad(at).values() : task.stoch_grad(at, stream).values();
      sum += g;
      theta -= config.probe_lr * g;
      if (!theta.allFinite() || !sum.allFinite() || sum.norm() > kProbeDivergenceNorm) {
        throw NumericError("probe_affinity_matrix: probe for task " + std::to_string(task.id()) +
                           " diverged at step " + std::to_string(step + 1) + "; matrix rejected");
      }
    }
    if (config.accumulate == Accumulation::MeanGradients) sum /= config.probe_steps;
    acc.col(m) = sum;
  }

  AffinityMatrix out;
  out.kind = AffinityKind::GradientDistance;
  out.symmetric = true;
  out.oracle = any_exact && any_stochastic ? OracleKind::Mixed : (any_exact ? OracleKind::Exact : OracleKind::Stochastic);
  out.values = Eigen::MatrixXd::Zero(m_count, m_count);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    out.task_ids.push_back(tasks[static_cast<std::size_t>(m)]->id());
    for (Eigen::Index n = m + 1; n < m_count; ++n) {
      const double v = (acc.col(m) - acc.col(n)).squaredNorm();
      out.values(m, n) = v;
      out.values(n, m) = v;
    }
  }
  return out;
}

SumIdentity sum_identity_check(std::span<const TaskPtr> tasks, const ParamVector& theta) {
  if (tasks.size() < 2) throw StructuralError("sum_identity_check: needs at least two tasks");
  const Eigen::MatrixXd g = task_gradients(tasks, theta);
  const Eigen::Index m_count = g.cols();

  SumIdentity out;
  for (Eigen::Index m = 0; m < m_count; ++m) {
    for (Eigen::Index n = 0; n < m_count; ++n) {
      const double dist = (g.col(m) - g.col(n)).squaredNorm();
      out.lhs_ordered += dist;
      if (m < n) out.lhs_unordered += dist;
    }
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(g.rows());
  for (Eigen::Index m = 0; m < m_count; ++m) mean += g.col(m);
  mean /= static_cast<double>(m_count);
  for (Eigen::Index m = 0; m < m_count; ++m) out.rhs += (g.col(m) - mean).squaredNorm();

  if (out.rhs == 0.0) {
    if (out.lhs_ordered != 0.0) throw NumericError("sum_identity_check: zero deviation but nonzero pairwise sum");
    return out;
  }
  out.ratio = out.lhs_ordered / out.rhs;
  return out;
}

ParamVector train_single_task(const TaskObjective& task, const ParamVector& init, int steps, double lr,
                              SeededRng rng) {
  Eigen::VectorXd theta = init.values();
  for (int s = 0; s < steps; ++s) {
    theta -= lr * task.stoch_grad(ParamVector(theta), rng).values();
    if (!theta.allFinite()) throw NumericError("train_single_task: diverged on task " + std::to_string(task.id()));
  }
  return ParamVector(theta);
}

namespace {

double relative_gap(double cross, double own, double guard) {
  const double denom = std::abs(own) + guard;
  if (guard <= 0.0 && std::abs(own) < 1e-12) {
    throw NumericError("transferability: |F_n(theta_n)| < 1e-12, ratio undefined");
  }
  return (cross - own) / denom;
}

}  // namespace

double transferability(const TaskObjective& task_m, const TaskObjective& task_n, const TransferConfig& config,
                       const SeededRng& rng) {
  if (task_m.dim() != config.init_point.dim() || task_n.dim() != config.init_point.dim()) {
    throw StructuralError("transferability: dimension mismatch");
  }
  if (config.train_steps < 0 || !(config.lr > 0)) throw StructuralError("transferability: invalid training config");
  const ParamVector theta_m = train_single_task(task_m, config.init_point, config.train_steps, config.lr,
                                                rng.substream(static_cast<std::uint64_t>(task_m.id())));
  const ParamVector theta_n =
      &task_m == &task_n ? theta_m
                         : train_single_task(task_n, config.init_point, config.train_steps, config.lr,
                                             rng.substream(static_cast<std::uint64_t>(task_n.id())));
  return relative_gap(task_n.eval(theta_m), task_n.eval(theta_n), config.denominator_guard);
}

AffinityMatrix transferability_matrix(std::span<const TaskPtr> tasks, const TransferConfig& config,
                                      const SeededRng& rng) {
  if (tasks.empty()) throw StructuralError("transferability_matrix: no tasks");
  require_dim(tasks, config.init_point.dim());
  std::vector<ParamVector> trained;
  for (const auto& t : tasks) {
    trained.push_back(train_single_task(*t, config.init_point, config.train_steps, config.lr,
                                        rng.substream(static_cast<std::uint64_t>(t->id()))));
  }
  const auto n_tasks = static_cast<Eigen::Index>(tasks.size());
  AffinityMatrix out;
  out.kind = AffinityKind::Transferability;
  out.symmetric = false;
  out.oracle = OracleKind::Stochastic;
  out.values = Eigen::MatrixXd::Zero(n_tasks, n_tasks);
  for (Eigen::Index n = 0; n < n_tasks; ++n) {
    const TaskObjective& target = *tasks[static_cast<std::size_t>(n)];
    const double own = target.eval(trained[static_cast<std::size_t>(n)]);
    for (Eigen::Index m = 0; m < n_tasks; ++m) {
      if (m == n) continue;
      out.values(m, n) = relative_gap(target.eval(trained[static_cast<std::size_t>(m)]), own, config.denominator_guard);
    }
  }
  for (const auto& t : tasks) out.task_ids.push_back(t->id());
  return out;
}

AffinityMatrix symmetrize(const AffinityMatrix& a) {
  if (a.kind != AffinityKind::Transferability) throw StructuralError("symmetrize: expects a transferability matrix");
  if (a.values.rows() != a.values.cols()) throw StructuralError("symmetrize: matrix is not square");
  AffinityMatrix out = a;
  out.values = 0.5 * (a.values + a.values.transpose());
  out.symmetric = true;
  return out;
}

}  // namespace gst
