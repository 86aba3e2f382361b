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

// Affinity matrix -> task groups: cyclic Jacobi eigensolver, normalized
// spectral embedding and seeded k-means.

#include <optional>
#include <span>
#include <vector>

#include "gst/affinity.h"
#include "gst/core.h"

namespace gst {

// Disjoint, nonempty groups covering tasks 0..M-1, plus the order in which a
// schedule visits them. Groups are numbered by their lowest member.
class GroupPartition {
 public:
  GroupPartition() = default;
  // Validates and canonicalizes; `order` defaults to 0..K-1.
  static GroupPartition from_assignments(std::vector<int> assignments, std::vector<int> order = {});
  static GroupPartition from_groups(const std::vector<std::vector<int>>& groups, std::vector<int> order = {});
  static GroupPartition single_group(int num_tasks);
  static GroupPartition singletons(int num_tasks);

  int num_tasks() const { return static_cast<int>(assignments_.size()); }
  int num_groups() const { return static_cast<int>(sizes_.size()); }
  const std::vector<int>& assignments() const { return assignments_; }
  const std::vector<int>& order() const { return order_; }
  const std::vector<int>& group_sizes() const { return sizes_; }
  int min_group_size() const;
  // Members of group k in ascending task order.
  std::vector<int> members(int k) const;
  std::vector<std::vector<int>> groups() const;

  GroupPartition with_order(std::vector<int> order) const;
  GroupPartition reversed() const;
  std::uint64_t fingerprint() const;

  friend bool operator==(const GroupPartition& a, const GroupPartition& b) {
    return a.assignments_ == b.assignments_ && a.order_ == b.order_;
  }
  // Same grouping regardless of numbering or visiting order.
  bool same_groups(const GroupPartition& other) const;

 private:
  std::vector<int> assignments_;
  std::vector<int> order_;
  std::vector<int> sizes_;
};

struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // column i pairs with eigenvalues[i]
  int sweeps = 0;
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// tol * ||S||_F. Requires symmetry within 1e-10 and n <= 256.
EigenDecomposition jacobi_eigendecomposition(const Eigen::MatrixXd& s, double tol = 1e-14, int max_sweeps = 100);

struct SpectralConfig {
  int num_groups = 2;
  // Empty selects the median off-diagonal entry.
  std::optional<double> fixed_bandwidth;
  int kmeans_restarts = 16;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<int> labels;
  double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeds, best of `restarts` runs. Distance
// ties go to the lowest cluster index; inertia ties keep the earlier restart.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, const SeededRng& rng);

// Similarity exp(-A/bandwidth) with zero diagonal, normalized Laplacian
// I - D^-1/2 W D^-1/2, K smallest eigenvectors, row normalization, k-means.
GroupPartition spectral_cluster(const AffinityMatrix& a, const SpectralConfig& config);

double median_off_diagonal(const Eigen::MatrixXd& a);

// Mean affinity over same-group and cross-group pairs (m < n); empty when
// no such pair exists.
struct PartitionQuality {
  std::optional<double> intra_mean;
  std::optional<double> inter_mean;
};

PartitionQuality partition_quality(const AffinityMatrix& a, const GroupPartition& p);

// Sum of A over same-group pairs (m < n).
double intra_group_cost(const Eigen::MatrixXd& a, const GroupPartition& p);

}  // namespace gst
