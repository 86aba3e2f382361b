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

#include "gst/core.h"

#include <cmath>
#include <limits>
#include <cstdio>
#include <numbers>

namespace gst {

ParamVector::ParamVector(Eigen::VectorXd values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw NumericError("ParamVector: non-finite entry");
}

ParamVector ParamVector::zeros(std::size_t dim) {
  return ParamVector(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream_id))) {}

SeededRng SeededRng::substream(std::uint64_t id) const {
  return SeededRng(seed_, splitmix64(stream_id_ * 0x9E3779B97F4A7C15ULL + id + 1));
}

double SeededRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
  if (n == 0) throw StructuralError("uniform_index: empty range");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 is kept away from zero.
  const double u1 = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Eigen::VectorXd SeededRng::normal_vector(std::size_t dim) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal();
  return v;
}

void require_dim(std::span<const TaskPtr> tasks, std::size_t dim) {
  for (const auto& t : tasks) {
    if (!t) throw StructuralError("null task");
    if (t->dim() != dim) {
      throw StructuralError("task " + std::to_string(t->id()) + " has dimension " + std::to_string(t->dim()) +
                            ", expected " + std::to_string(dim));
    }
  }
}

namespace {

ObjectiveValue mean_objective(std::span<const TaskPtr> tasks, std::span<const int> members,
                              const ParamVector& theta) {
  double loss = 0.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.dim()));
  for (int m : members) {
    const auto& task = tasks[static_cast<std::size_t>(m)];
    const double l = task->eval(theta);
    if (!std::isfinite(l)) throw NumericError("task " + std::to_string(task->id()) + ": non-finite loss");
    loss += l;
    g += task->grad(theta).values();
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  return {loss * inv, ParamVector(g * inv)};
}

}  // namespace

ObjectiveValue global_objective(std::span<const TaskPtr> tasks, const ParamVector& theta) {
  if (tasks.empty()) throw StructuralError("global_objective: no tasks");
  require_dim(tasks, theta.dim());
  std::vector<int> all(tasks.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return mean_objective(tasks, all, theta);
}

ObjectiveValue group_objective(std::span<const TaskPtr> tasks, std::span<const int> group,
                               const ParamVector& theta) {
  if (group.empty()) throw StructuralError("group_objective: empty group");
  require_dim(tasks, theta.dim());
  for (int m : group) {
    if (m < 0 || static_cast<std::size_t>(m) >= tasks.size()) {
      throw StructuralError("group_objective: task index " + std::to_string(m) + " out of range");
    }
  }
  return mean_objective(tasks, group, theta);
}

Eigen::MatrixXd task_gradients(std::span<const TaskPtr> tasks, const ParamVector& theta) {
  require_dim(tasks, theta.dim());
  Eigen::MatrixXd g(static_cast<Eigen::Index>(theta.dim()), static_cast<Eigen::Index>(tasks.size()));
  for (std::size_t m = 0; m < tasks.size(); ++m) g.col(static_cast<Eigen::Index>(m)) = tasks[m]->grad(theta).values();
  return g;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_vector(const Eigen::VectorXd& v, std::uint64_t h) {
  return fnv1a(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double), h);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace gst
