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

#include <doctest.h>

#include <cmath>

#include "gst/grouping.h"
#include "gst/tasks.h"
#include "test_util.h"

using namespace gst;
using namespace gst::testing;

namespace {

HeterogeneityRecipe base_recipe() {
  HeterogeneityRecipe r;
  r.num_tasks = 6;
  r.dim = 5;
  r.num_latent_clusters = 2;
  r.intra_cluster_spread = 0.2;
  r.inter_cluster_spread = 1.5;
  r.seed = 11;
  return r;
}

std::vector<ParamVector> as_points(const QuadraticFamily& f) { return default_probe_points(f, 16); }

}  // namespace

TEST_CASE("family generation is deterministic in the seed") {
  const auto a = generate_quadratic_family(base_recipe());
  const auto b = generate_quadratic_family(base_recipe());
  CHECK(a.fingerprint() == b.fingerprint());
  auto r = base_recipe();
  r.seed = 12;
  CHECK(generate_quadratic_family(r).fingerprint() != a.fingerprint());
  CHECK(a.latent_clusters == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("invalid recipes are rejected") {
  auto r = base_recipe();
  r.num_tasks = 1;
  CHECK_THROWS_AS(generate_quadratic_family(r), StructuralError);
  r = base_recipe();
  r.noise_sigma = -1;
  CHECK_THROWS_AS(generate_quadratic_family(r), StructuralError);
  r = base_recipe();
  r.min_curvature = 0;
  CHECK_THROWS_AS(generate_quadratic_family(r), StructuralError);
  r = base_recipe();
  r.cluster_intra_spreads = {0.1};
  CHECK_THROWS_AS(generate_quadratic_family(r), StructuralError);
}

TEST_CASE("zero spreads give identical tasks and zero constants") {
  auto r = base_recipe();
  r.intra_cluster_spread = 0;
  r.inter_cluster_spread = 0;
  const auto f = generate_quadratic_family(r);
  for (const auto& t : f.tasks) {
    CHECK(t.theta_star() == f.tasks[0].theta_star());
    CHECK(t.hessian() == f.tasks[0].hessian());
  }
  const auto c = closed_form_heterogeneity(f.tasks, as_points(f));
  REQUIRE(c.beta_sq.has_value());
  CHECK(*c.beta_sq == 0.0);
  CHECK(c.zeta_sq == 0.0);
}

TEST_CASE("shared curvature gives beta zero and zeta from the minimizer spread") {
  const auto f = generate_quadratic_family(base_recipe());
  const Eigen::MatrixXd& h = f.tasks[0].hessian();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
  for (const auto& t : f.tasks) mean += t.theta_star();
  mean /= 6.0;
  double zeta = 0;
  for (const auto& t : f.tasks) zeta += (h * (mean - t.theta_star())).squaredNorm();
  zeta /= 6.0;
  const auto c = closed_form_heterogeneity(f.tasks, as_points(f));
  REQUIRE(c.beta_sq.has_value());
  CHECK(*c.beta_sq == 0.0);
  CHECK(c.zeta_sq == doctest::Approx(zeta).epsilon(1e-10));
}

TEST_CASE("a single task has zero constants") {
  auto r = base_recipe();
  r.num_tasks = 1;
  r.num_latent_clusters = 1;
  const auto f = generate_quadratic_family(r);
  const auto c = closed_form_heterogeneity(f.tasks, as_points(f));
  CHECK(c.beta_sq.value() == 0.0);
  CHECK(c.zeta_sq == 0.0);
}

TEST_CASE("smoothness equals the largest Hessian eigenvalue") {
  auto r = base_recipe();
  r.curvature_jitter = 0.3;
  const auto f = generate_quadratic_family(r);
  for (const auto& t : f.tasks) {
    const auto eig = jacobi_eigendecomposition(t.hessian());
    CHECK(t.smoothness() == doctest::Approx(eig.eigenvalues.maxCoeff()).epsilon(1e-10));
    CHECK(eig.eigenvalues.minCoeff() >= r.min_curvature * std::exp(-6 * r.curvature_jitter));
  }
}

TEST_CASE("closed-form constants bound the deviation away from the probe set") {
  auto r = base_recipe();
  r.curvature_jitter = 0.25;
  const auto f = generate_quadratic_family(r);
  const auto c = closed_form_heterogeneity(f.tasks, as_points(f));
  REQUIRE(c.beta_sq.has_value());
  CHECK(*c.beta_sq > 0.0);
  const TaskList tasks = f.task_list();
  SeededRng rng(21, 0);
  for (int i = 0; i < 200; ++i) {
    // Points far outside the probe cloud as well as near it.
    const ParamVector x = random_point(5, rng, i < 100 ? 1.0 : 50.0);
    const double y = gradient_deviation(tasks, x);
    const double gn = global_objective(tasks, x).grad.norm_sq();
    CHECK(y <= (*c.beta_sq * gn + c.zeta_sq) * (1 + 1e-9) + 1e-12);
  }
}

TEST_CASE("varying curvature needs at least two probe points") {
  auto r = base_recipe();
  r.curvature_jitter = 0.2;
  const auto f = generate_quadratic_family(r);
  const std::vector<ParamVector> one{ParamVector::zeros(5)};
  CHECK_THROWS_AS(closed_form_heterogeneity(f.tasks, one), StructuralError);
}

TEST_CASE("bound fit is feasible at every sample") {
  const std::vector<BoundSample> s{{1.0, 2.0}, {4.0, 3.0}, {9.0, 8.0}, {0.5, 1.2}};
  const auto c = fit_heterogeneity_bound(s);
  REQUIRE(c.beta_sq.has_value());
  for (const auto& x : s) CHECK(x.deviation <= *c.beta_sq * x.grad_norm_sq + c.zeta_sq + 1e-12);
}

TEST_CASE("bound fit with zero gradients leaves beta undetermined") {
  const std::vector<BoundSample> s{{0.0, 2.0}, {0.0, 3.0}};
  const auto c = fit_heterogeneity_bound(s);
  CHECK_FALSE(c.beta_sq.has_value());
  CHECK(c.zeta_sq == 3.0);
  const std::vector<BoundSample> zero{{1.0, 0.0}, {2.0, 0.0}};
  CHECK(fit_heterogeneity_bound(zero).beta_sq.value() == 0.0);
  CHECK(fit_heterogeneity_bound(zero).zeta_sq == 0.0);
}

TEST_CASE("nonlinear gradients match central finite differences") {
  NonlinearRecipe r;
  r.seed = 3;
  const auto fam = generate_nonlinear_family(r);
  const auto& task = *fam.tasks[1];
  const auto d = static_cast<Eigen::Index>(task.dim());
  SeededRng rng(31, 0);
  for (int p = 0; p < 10; ++p) {
    const Eigen::VectorXd x = fam.reference_point + 0.3 * rng.normal_vector(static_cast<std::size_t>(d));
    const Eigen::VectorXd g = task.grad(ParamVector(x)).values();
    Eigen::VectorXd fd(d);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < d; ++i) {
      Eigen::VectorXd a = x, b = x;
      a[i] += h;
      b[i] -= h;
      fd[i] = (task.eval(ParamVector(a)) - task.eval(ParamVector(b))) / (2 * h);
    }
    CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("nonlinear minibatch gradients are unbiased") {
  NonlinearRecipe r;
  r.seed = 4;
  const auto fam = generate_nonlinear_family(r);
  const auto& task = *fam.tasks[0];
  const ParamVector x(fam.reference_point);
  const Eigen::VectorXd exact = task.grad(x).values();
  SeededRng rng(5, 0);
  const int n = 20000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(exact.size());
  double sq = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd g = task.stoch_grad(x, rng).values();
    sum += g;
    sq += (g - exact).squaredNorm();
  }
  const double se = std::sqrt(sq / n / n);
  CHECK((sum / n - exact).norm() <= 5 * se + 1e-12);
  CHECK(task.noise_sigma() > 0.0);
  CHECK_FALSE(task.closed_form());
}

TEST_CASE("nonlinear families are deterministic") {
  NonlinearRecipe r;
  r.seed = 8;
  const auto a = generate_nonlinear_family(r), b = generate_nonlinear_family(r);
  const ParamVector x(a.reference_point);
  for (std::size_t m = 0; m < a.tasks.size(); ++m) CHECK(a.tasks[m]->eval(x) == b.tasks[m]->eval(x));
}
