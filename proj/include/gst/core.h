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

// Numeric foundation shared by every module: the parameter vector type, the
// deterministic random stream, the per-dataset objective contract, and the
// aggregate (global and group-level) objectives built on top of it.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gst {

// Raised when inputs have the wrong shape: dimension mismatches, empty
// groups, invalid partitions, malformed configuration.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a computation produces or receives non-finite values, fails to
// converge, or violates an identity it was asked to verify.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A point in parameter space. Entries are always finite; the dimension is
// fixed at construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Eigen::VectorXd values);
  static ParamVector zeros(std::size_t dim);

  std::size_t dim() const { return static_cast<std::size_t>(values_.size()); }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  double norm_sq() const { return values_.squaredNorm(); }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.values_.size() == b.values_.size() && (a.values_.array() == b.values_.array()).all();
  }

 private:
  Eigen::VectorXd values_;
};

// Deterministic random stream identified by (seed, stream_id). Distinct
// stream ids give statistically independent sequences; the same pair always
// yields the same draws. Sampling routines are implemented here instead of
// using <random> distributions, whose outputs are implementation-defined.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Child stream; children of different ids never share a sequence.
  SeededRng substream(std::uint64_t id) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1).
  double uniform();
  // Uniform integer on [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  Eigen::VectorXd normal_vector(std::size_t dim);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// One dataset's loss F_m with exact and stochastic gradient oracles.
// Implementations are stateless with respect to evaluation, so a single
// instance may be shared across threads.
class TaskObjective {
 public:
  virtual ~TaskObjective() = default;

  virtual int id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual double eval(const ParamVector& theta) const = 0;
  virtual ParamVector grad(const ParamVector& theta) const = 0;
  // Unbiased estimate of grad(theta) with E||noise||^2 <= noise_sigma()^2.
  virtual ParamVector stoch_grad(const ParamVector& theta, SeededRng& rng) const = 0;
  virtual double smoothness() const = 0;
  virtual double noise_sigma() const = 0;
  // True when grad() is an analytic expression rather than a data average.
  virtual bool closed_form() const = 0;
};

using TaskPtr = std::shared_ptr<const TaskObjective>;
using TaskList = std::vector<TaskPtr>;

struct ObjectiveValue {
  double loss = 0.0;
  ParamVector grad;
};

// F(theta) = (1/M) sum_m F_m(theta) and its gradient.
ObjectiveValue global_objective(std::span<const TaskPtr> tasks, const ParamVector& theta);

// F^(k)(theta) = (1/M_k) sum_{m in group} F_m(theta) and its gradient.
ObjectiveValue group_objective(std::span<const TaskPtr> tasks, std::span<const int> group,
                               const ParamVector& theta);

// Exact gradients of every task at theta, one column per task.
Eigen::MatrixXd task_gradients(std::span<const TaskPtr> tasks, const ParamVector& theta);

// Throws StructuralError unless every task has dimension `dim`.
void require_dim(std::span<const TaskPtr> tasks, std::size_t dim);

// FNV-1a over raw bytes; used for trace and input fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ULL);
std::uint64_t hash_vector(const Eigen::VectorXd& v, std::uint64_t h = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);

}  // namespace gst
