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

// Pairwise dataset relationships: squared distances between (accumulated)
// dataset gradients, and empirical transferability between trained models.

#include <optional>
#include <span>
#include <vector>

#include "gst/core.h"

namespace gst {

enum class AffinityKind { GradientDistance, Transferability };
enum class OracleKind { Exact, Stochastic, Mixed };

struct AffinityMatrix {
  Eigen::MatrixXd values;
  AffinityKind kind = AffinityKind::GradientDistance;
  bool symmetric = true;
  OracleKind oracle = OracleKind::Exact;
  std::vector<int> task_ids;

  int size() const { return static_cast<int>(values.rows()); }
};

enum class Accumulation { SumGradients, MeanGradients };
enum class ProbeOracle { Auto, Exact, Stochastic };

struct ProbeConfig {
  ParamVector init_point;
  int probe_steps = 10;
  double probe_lr = 0.05;
  Accumulation accumulate = Accumulation::MeanGradients;
  // Auto: exact gradients for closed-form tasks, stochastic otherwise.
  ProbeOracle oracle = ProbeOracle::Auto;
};

inline constexpr double kProbeDivergenceNorm = 1e8;

// ||grad F_m(theta) - grad F_n(theta)||^2.
double gradient_distance(const TaskObjective& task_m, const TaskObjective& task_n, const ParamVector& theta);

// Runs probe_steps of SGD per task from the shared init point, accumulating
// the gradients seen along the way; entry (m, n) is the squared distance
// between the accumulated gradients of m and n. Task m draws from
// rng.substream(m). Throws NumericError naming the task if a probe diverges.
AffinityMatrix probe_affinity_matrix(std::span<const TaskPtr> tasks, const ProbeConfig& config, const SeededRng& rng);

// Both sides of the pairwise-distance sum identity, computed independently.
// Over ordered pairs (m, n) the sum equals 2M * sum_m ||g_m - g||^2; over
// unordered pairs m < n it equals M * sum_m ||g_m - g||^2.
struct SumIdentity {
  double lhs_ordered = 0.0;
  double lhs_unordered = 0.0;
  double rhs = 0.0;                // sum_m ||grad F_m - grad F||^2
  std::optional<double> ratio;     // lhs_ordered / rhs; empty when both are zero
};

SumIdentity sum_identity_check(std::span<const TaskPtr> tasks, const ParamVector& theta);

struct TransferConfig {
  ParamVector init_point;
  int train_steps = 50;
  double lr = 0.05;
  // Added to |F_n(theta_n)| in the denominator; zero disables the guard and
  // makes a vanishing denominator an error.
  double denominator_guard = 1e-9;
};

// Trf(m -> n) = (F_n(theta_m) - F_n(theta_n)) / (|F_n(theta_n)| + guard), where
// theta_k is trained on task k alone from the shared init using
// rng.substream(k). Lower means m's model transfers better to n.
double transferability(const TaskObjective& task_m, const TaskObjective& task_n, const TransferConfig& config,
                       const SeededRng& rng);

// All pairs at once; each model is trained a single time.
AffinityMatrix transferability_matrix(std::span<const TaskPtr> tasks, const TransferConfig& config,
                                      const SeededRng& rng);

// (A + A^T) / 2 for transferability matrices.
AffinityMatrix symmetrize(const AffinityMatrix& a);

// Trains `steps` SGD iterations of one task from `init`.
ParamVector train_single_task(const TaskObjective& task, const ParamVector& init, int steps, double lr,
                              SeededRng rng);

}  // namespace gst
