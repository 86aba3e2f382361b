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

// Small builders shared by the unit tests.

#include <memory>
#include <vector>

#include "gst/core.h"
#include "gst/tasks.h"

namespace gst::testing {

inline Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline ParamVector pv(std::initializer_list<double> xs) { return ParamVector(vec(xs)); }

// F(theta) = 1/2 ||theta - theta*||^2 scaled by `curvature`.
inline TaskPtr iso_task(int id, Eigen::VectorXd theta_star, double curvature = 1.0, double sigma = 0.0) {
  const auto d = theta_star.size();
  return std::make_shared<QuadraticTask>(id, curvature * Eigen::MatrixXd::Identity(d, d), std::move(theta_star), sigma);
}

// Task whose gradient at the origin is `g` (identity Hessian, theta* = -g).
inline TaskPtr task_with_grad_at_origin(int id, const Eigen::VectorXd& g, double sigma = 0.0) {
  return iso_task(id, -g, 1.0, sigma);
}

inline Eigen::MatrixXd random_spd(int d, SeededRng& rng, double lo = 0.2, double hi = 2.0) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lam(d);
  for (int i = 0; i < d; ++i) lam[i] = lo + (hi - lo) * rng.uniform();
  return q * lam.asDiagonal() * q.transpose();
}

// M random quadratics sharing nothing.
inline TaskList random_quadratics(int m, int d, SeededRng& rng, double sigma = 0.0) {
  TaskList out;
  for (int i = 0; i < m; ++i) {
    out.push_back(std::make_shared<QuadraticTask>(i, random_spd(d, rng), 2.0 * rng.normal_vector(static_cast<std::size_t>(d)), sigma));
  }
  return out;
}

inline ParamVector random_point(int d, SeededRng& rng, double scale = 1.0) {
  return ParamVector(scale * rng.normal_vector(static_cast<std::size_t>(d)));
}

}  // namespace gst::testing
