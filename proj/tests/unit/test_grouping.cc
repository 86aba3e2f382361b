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

#include <algorithm>
#include <cmath>
#include <functional>

#include "gst/grouping.h"
#include "test_util.h"

using namespace gst;
using namespace gst::testing;

namespace {

Eigen::MatrixXd random_symmetric(int n, SeededRng& rng) {
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
  return a;
}

AffinityMatrix distance_matrix(const Eigen::MatrixXd& v) {
  AffinityMatrix a;
  a.values = v;
  return a;
}

// Block affinity: small within blocks, large across.
AffinityMatrix block_affinity(const std::vector<int>& labels, SeededRng& rng, double intra = 0.1, double inter = 10.0) {
  const int m = static_cast<int>(labels.size());
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      v(i, j) = v(j, i) = labels[i] == labels[j] ? intra * rng.uniform() : inter * (1 + 0.1 * rng.uniform());
  return distance_matrix(v);
}

// Exhaustive search over all partitions into exactly k groups.
GroupPartition brute_force_partition(const Eigen::MatrixXd& a, int k) {
  const int m = static_cast<int>(a.rows());
  std::vector<int> rgs(static_cast<std::size_t>(m), 0), best;
  double best_cost = 1e300;
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == m) {
      if (used != k) return;
      double cost = 0;
      for (int x = 0; x < m; ++x)
        for (int y = x + 1; y < m; ++y)
          if (rgs[x] == rgs[y]) cost += a(x, y);
      if (cost < best_cost) best_cost = cost, best = rgs;
      return;
    }
    if (m - i < k - used) return;
    for (int g = 0; g <= std::min(used, k - 1); ++g) {
      rgs[i] = g;
      rec(i + 1, std::max(used, g + 1));
    }
  };
  rec(0, 0);
  return GroupPartition::from_assignments(best);
}

}  // namespace

TEST_CASE("partitions are canonically numbered") {
  const auto p = GroupPartition::from_assignments({2, 2, 0, 1, 0});
  CHECK(p.assignments() == std::vector<int>{0, 0, 1, 2, 1});
  CHECK(p.group_sizes() == std::vector<int>{2, 2, 1});
  CHECK(p.min_group_size() == 1);
  CHECK(p.members(1) == std::vector<int>{2, 4});
  CHECK(p.order() == std::vector<int>{0, 1, 2});
  CHECK(p.same_groups(GroupPartition::from_groups({{0, 1}, {2, 4}, {3}})));
  CHECK(p.reversed().order() == std::vector<int>{2, 1, 0});
  CHECK(p.reversed().same_groups(p));
  CHECK_FALSE(p.reversed() == p);
  CHECK(p.fingerprint() != p.reversed().fingerprint());
}

TEST_CASE("partition order refers to the caller's labels") {
  const auto p = GroupPartition::from_assignments({5, 5, 3}, {3, 5});
  CHECK(p.assignments() == std::vector<int>{0, 0, 1});
  CHECK(p.order() == std::vector<int>{1, 0});
}

TEST_CASE("malformed partitions are rejected") {
  CHECK_THROWS_AS(GroupPartition::from_assignments({}), StructuralError);
  CHECK_THROWS_AS(GroupPartition::from_assignments({0, -1}), StructuralError);
  CHECK_THROWS_AS(GroupPartition::from_groups({{0, 1}, {}}), StructuralError);
  CHECK_THROWS_AS(GroupPartition::from_groups({{0, 1}, {1}}), StructuralError);
  CHECK_THROWS_AS(GroupPartition::from_groups({{0, 3}, {1}}), StructuralError);
  const auto p = GroupPartition::from_assignments({0, 1, 1});
  CHECK_THROWS_AS(p.with_order({0, 0}), StructuralError);
  CHECK_THROWS_AS(p.with_order({0}), StructuralError);
  CHECK_THROWS_AS(p.with_order({0, 2}), StructuralError);
}

TEST_CASE("Jacobi solves known spectra") {
  const auto id = jacobi_eigendecomposition(Eigen::MatrixXd::Identity(4, 4));
  for (int i = 0; i < 4; ++i) CHECK(id.eigenvalues[i] == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
  d.diagonal() << 3, 1, 2;
  const auto de = jacobi_eigendecomposition(d);
  CHECK(de.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(de.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(de.eigenvalues[2] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(de.eigenvectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(de.eigenvectors(0, 2)) == doctest::Approx(1.0));

  Eigen::MatrixXd two(2, 2);
  two << 2, 1, 1, 2;
  const auto te = jacobi_eigendecomposition(two);
  CHECK(std::abs(te.eigenvalues[0] - 1.0) < 1e-10);
  CHECK(std::abs(te.eigenvalues[1] - 3.0) < 1e-10);
  CHECK(std::abs(std::abs(te.eigenvectors(0, 1)) - std::sqrt(0.5)) < 1e-10);
}

TEST_CASE("Jacobi reconstructs random symmetric matrices") {
  SeededRng rng(1, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(64));
    const Eigen::MatrixXd s = random_symmetric(n, rng);
    const auto e = jacobi_eigendecomposition(s);
    const Eigen::MatrixXd& v = e.eigenvectors;
    const Eigen::MatrixXd rec = v * e.eigenvalues.asDiagonal() * v.transpose();
    CHECK((rec - s).norm() <= 1e-8 * std::max(1.0, s.norm()));
    CHECK((v.transpose() * v - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    for (int i = 1; i < n; ++i) CHECK(e.eigenvalues[i - 1] <= e.eigenvalues[i]);
    // Reference values from a different algorithm.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(s);
    CHECK((ref.eigenvalues() - e.eigenvalues).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, s.norm()));
  }
}

TEST_CASE("Jacobi rejects bad input and reports non-convergence") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  CHECK_THROWS_AS(jacobi_eigendecomposition(a), StructuralError);
  CHECK_THROWS_AS(jacobi_eigendecomposition(Eigen::MatrixXd::Identity(257, 257)), StructuralError);
  SeededRng rng(2, 0);
  CHECK_THROWS_AS(jacobi_eigendecomposition(random_symmetric(12, rng), 1e-14, 1), NumericError);
}

TEST_CASE("spectral clustering handles K = 1 and K = M") {
  SeededRng rng(3, 0);
  const auto a = block_affinity({0, 0, 1, 1, 2}, rng);
  SpectralConfig c;
  c.num_groups = 1;
  CHECK(spectral_cluster(a, c) == GroupPartition::single_group(5));
  c.num_groups = 5;
  CHECK(spectral_cluster(a, c) == GroupPartition::singletons(5));
  c.num_groups = 6;
  CHECK_THROWS_AS(spectral_cluster(a, c), StructuralError);
}

TEST_CASE("spectral clustering recovers well-separated blocks") {
  SeededRng rng(4, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 4 + static_cast<int>(rng.uniform_index(7));
    const int k = 2 + static_cast<int>(rng.uniform_index(std::min(3, m / 2)));
    std::vector<int> labels(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) labels[i] = i < k ? i : static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
    const auto a = block_affinity(labels, rng);
    SpectralConfig c;
    c.num_groups = k;
    c.seed = static_cast<std::uint64_t>(trial);
    const auto p = spectral_cluster(a, c);
    const auto oracle = brute_force_partition(a.values, k);
    CHECK(p.same_groups(oracle));
    CHECK(p.same_groups(GroupPartition::from_assignments(labels)));
  }
}

TEST_CASE("spectral clustering is invariant to rescaling the affinity") {
  SeededRng rng(5, 0);
  const auto a = block_affinity({0, 1, 0, 1, 2, 2, 0}, rng, 1.0, 6.0);
  SpectralConfig c;
  c.num_groups = 3;
  const auto p = spectral_cluster(a, c);
  for (double s : {1e-3, 7.0, 1e4}) CHECK(spectral_cluster(distance_matrix(s * a.values), c) == p);
}

TEST_CASE("spectral clustering is deterministic in the seed") {
  SeededRng rng(6, 0);
  const auto a = block_affinity({0, 0, 1, 1, 1, 2, 2, 2}, rng, 2.0, 5.0);
  SpectralConfig c;
  c.num_groups = 3;
  c.seed = 9;
  CHECK(spectral_cluster(a, c) == spectral_cluster(a, c));
}

TEST_CASE("spectral clustering puts isolated tasks in their own group") {
  SeededRng rng(7, 0);
  AffinityMatrix a = block_affinity({0, 0, 1, 1, 0}, rng);
  for (int j = 0; j < 5; ++j)
    if (j != 4) a.values(4, j) = a.values(j, 4) = 1e6;
  SpectralConfig c;
  c.num_groups = 3;
  const auto p = spectral_cluster(a, c);
  CHECK(p.group_sizes().size() == 3);
  CHECK(p.members(p.assignments()[4]) == std::vector<int>{4});
  CHECK(p.same_groups(GroupPartition::from_assignments({0, 0, 1, 1, 2})));
}

TEST_CASE("spectral clustering rejects asymmetric input") {
  AffinityMatrix a;
  a.values = Eigen::MatrixXd::Zero(3, 3);
  a.values(0, 1) = 1.0;
  a.values(1, 0) = 2.0;
  SpectralConfig c;
  CHECK_THROWS_AS(spectral_cluster(a, c), StructuralError);
}

TEST_CASE("kmeans separates obvious clusters and replays") {
  Eigen::MatrixXd pts(6, 2);
  pts << 0, 0, 0.1, 0, 0, 0.1, 5, 5, 5.1, 5, 5, 5.1;
  const auto r = kmeans(pts, 2, 4, SeededRng(1, 0));
  CHECK(r.labels[0] == r.labels[1]);
  CHECK(r.labels[0] == r.labels[2]);
  CHECK(r.labels[3] == r.labels[4]);
  CHECK(r.labels[0] != r.labels[3]);
  // Each triangle has within-cluster sum of squares 12/900.
  CHECK(r.inertia == doctest::Approx(24.0 / 900.0).epsilon(1e-9));
  CHECK(kmeans(pts, 2, 4, SeededRng(1, 0)).labels == r.labels);
}

TEST_CASE("partition quality on block and uniform matrices") {
  AffinityMatrix a;
  a.values = Eigen::MatrixXd::Constant(4, 4, 10.0);
  a.values(0, 1) = a.values(1, 0) = 0.1;
  a.values(2, 3) = a.values(3, 2) = 0.1;
  a.values.diagonal().setZero();
  const auto p = GroupPartition::from_assignments({0, 0, 1, 1});
  const auto q = partition_quality(a, p);
  CHECK(q.intra_mean.value() == doctest::Approx(0.1));
  CHECK(q.inter_mean.value() == doctest::Approx(10.0));
  CHECK(intra_group_cost(a.values, p) == doctest::Approx(0.2));

  const auto s = partition_quality(a, GroupPartition::singletons(4));
  CHECK_FALSE(s.intra_mean.has_value());
  CHECK(s.inter_mean.value() == doctest::Approx((4 * 10.0 + 2 * 0.1) / 6.0));
  CHECK_FALSE(partition_quality(a, GroupPartition::single_group(4)).inter_mean.has_value());

  a.values = Eigen::MatrixXd::Constant(4, 4, 3.0);
  a.values.diagonal().setZero();
  const auto u = partition_quality(a, p);
  CHECK(u.intra_mean.value() == doctest::Approx(3.0));
  CHECK(u.inter_mean.value() == doctest::Approx(3.0));
}

TEST_CASE("median off-diagonal entry") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a(0, 1) = a(1, 0) = 1;
  a(0, 2) = a(2, 0) = 5;
  a(1, 2) = a(2, 1) = 2;
  CHECK(median_off_diagonal(a) == doctest::Approx(2.0));
}
