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

// Synthetic task families with known heterogeneity: quadratic objectives
// whose gradient-deviation constants have closed forms, and a small
// one-hidden-layer regression objective used as a non-convex stress test.

#include <optional>
#include <span>
#include <vector>

#include "gst/core.h"

namespace gst {

// F_m(theta) = 1/2 (theta - theta*)^T H (theta - theta*). Stochastic
// gradients add isotropic Gaussian noise with E||noise||^2 = noise_sigma^2.
class QuadraticTask : public TaskObjective {
 public:
  QuadraticTask(int id, Eigen::MatrixXd hessian, Eigen::VectorXd theta_star, double noise_sigma);

  int id() const override { return id_; }
  std::size_t dim() const override { return static_cast<std::size_t>(theta_star_.size()); }
  double eval(const ParamVector& theta) const override;
  ParamVector grad(const ParamVector& theta) const override;
  ParamVector stoch_grad(const ParamVector& theta, SeededRng& rng) const override;
  double smoothness() const override { return smoothness_; }
  double noise_sigma() const override { return noise_sigma_; }
  bool closed_form() const override { return true; }

  const Eigen::MatrixXd& hessian() const { return hessian_; }
  const Eigen::VectorXd& theta_star() const { return theta_star_; }

 private:
  int id_;
  Eigen::MatrixXd hessian_;
  Eigen::VectorXd theta_star_;
  double noise_sigma_;
  double smoothness_;
};

struct HeterogeneityRecipe {
  int num_tasks = 8;
  int dim = 10;
  int num_latent_clusters = 2;
  double intra_cluster_spread = 0.1;  // std of minimizers around their cluster center
  double inter_cluster_spread = 1.0;  // std of cluster centers
  double curvature_jitter = 0.0;      // log-normal per-task perturbation of the spectrum
  double noise_sigma = 0.0;
  double min_curvature = 0.1;
  double max_curvature = 1.0;
  std::uint64_t seed = 0;
  // Optional per-cluster override of intra_cluster_spread.
  std::vector<double> cluster_intra_spreads;
  // Shift the last cluster so its mean minimizer coincides with the mean of
  // all other minimizers (a wide group sitting between tight ones).
  bool center_last_cluster = false;
};

struct QuadraticFamily {
  HeterogeneityRecipe recipe;
  std::vector<QuadraticTask> tasks;
  // Latent cluster of each task; tasks are laid out in contiguous blocks.
  std::vector<int> latent_clusters;

  TaskList task_list() const;
  Eigen::VectorXd mean_minimizer() const;
  std::uint64_t fingerprint() const;
};

QuadraticFamily generate_quadratic_family(const HeterogeneityRecipe& recipe);

// Constants of the bound (1/M) sum ||grad F_m - grad F||^2 <= beta^2 ||grad F||^2 + zeta^2.
// beta_sq is empty when it cannot be identified from the probe set.
struct HeterogeneityConstants {
  std::optional<double> beta_sq;
  double zeta_sq = 0.0;
};

// One observation for a bound fit: x = ||reference gradient||^2,
// y = mean squared deviation at the same point.
struct BoundSample {
  double grad_norm_sq = 0.0;
  double deviation = 0.0;
};

inline constexpr int kBetaGridSize = 64;

// Tightest (beta^2, zeta^2) with y_i <= beta^2 x_i + zeta^2 at every sample:
// beta^2 is swept over zero plus a 64-point log grid, zeta^2 is the smallest
// feasible offset for each, and the point minimising beta^2 + zeta^2 / scale
// (scale = median x) is returned.
HeterogeneityConstants fit_heterogeneity_bound(std::span<const BoundSample> samples);

// Exact constants for a quadratic family, valid at every theta rather than
// only at the probe points. The probe set fixes the scale used to pick one
// point on the (beta^2, zeta^2) trade-off curve.
HeterogeneityConstants closed_form_heterogeneity(std::span<const QuadraticTask> tasks,
                                                 std::span<const ParamVector> probe_points);

// Mean squared deviation (1/M) sum ||grad F_m - grad F||^2 at theta.
double gradient_deviation(std::span<const TaskPtr> tasks, const ParamVector& theta);

// `count` Gaussian points around `center` (per-coordinate std radius/sqrt(d))
// followed by the origin.
std::vector<ParamVector> default_probe_points(const Eigen::VectorXd& center, double radius, int count,
                                              SeededRng& rng);
std::vector<ParamVector> default_probe_points(const QuadraticFamily& family, int count = 16);

// y = v^T tanh(W x + b) + c regressed onto a task-specific teacher network.
// Parameters are packed as [W (row-major, width x input), b, v, c].
class NonlinearTask : public TaskObjective {
 public:
  NonlinearTask(int id, int hidden_width, Eigen::MatrixXd inputs, Eigen::VectorXd targets, int batch_size);

  int id() const override { return id_; }
  std::size_t dim() const override;
  double eval(const ParamVector& theta) const override;
  ParamVector grad(const ParamVector& theta) const override;
  // Minibatch gradient, samples drawn with replacement.
  ParamVector stoch_grad(const ParamVector& theta, SeededRng& rng) const override;
  double smoothness() const override { return smoothness_; }
  double noise_sigma() const override { return noise_sigma_; }
  bool closed_form() const override { return false; }

  int hidden_width() const { return width_; }
  int input_dim() const { return static_cast<int>(inputs_.cols()); }
  int num_samples() const { return static_cast<int>(inputs_.rows()); }

  // Output of the network with parameters theta at input x.
  double predict(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const;

  // Both are estimated at a reference point during construction: the
  // minibatch noise level, and twice the largest observed gradient
  // Lipschitz ratio over random nearby pairs.
  void calibrate(const Eigen::VectorXd& reference, SeededRng& rng);

 private:
  double sample_loss_grad(const Eigen::VectorXd& theta, int i, Eigen::VectorXd* grad) const;

  int id_;
  int width_;
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd targets_;
  int batch_size_;
  double noise_sigma_ = 0.0;
  double smoothness_ = 0.0;
};

struct NonlinearRecipe {
  int num_tasks = 4;
  int num_latent_clusters = 2;
  int input_dim = 3;
  int hidden_width = 6;
  int samples_per_task = 128;
  int batch_size = 8;
  double intra_cluster_spread = 0.1;
  double inter_cluster_spread = 1.0;
  double label_noise = 0.05;
  std::uint64_t seed = 0;
};

struct NonlinearFamily {
  NonlinearRecipe recipe;
  std::vector<std::shared_ptr<NonlinearTask>> tasks;
  std::vector<int> latent_clusters;
  Eigen::VectorXd reference_point;

  TaskList task_list() const;
};

NonlinearFamily generate_nonlinear_family(const NonlinearRecipe& recipe);

}  // namespace gst
