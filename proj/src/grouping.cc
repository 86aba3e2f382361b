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

#include "gst/grouping.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

namespace gst {

// --- GroupPartition --------------------------------------------------------

GroupPartition GroupPartition::from_assignments(std::vector<int> assignments, std::vector<int> order) {
  if (assignments.empty()) throw StructuralError("partition: no tasks");
  // Renumber groups by first appearance so group k contains its lowest task
  // before group k+1 does.
  std::map<int, int> relabel;
  for (int a : assignments) {
    if (a < 0) throw StructuralError("partition: negative group index");
    relabel.try_emplace(a, -1);
  }
  int next = 0;
  for (int& a : assignments) {
    int& target = relabel[a];
    if (target < 0) target = next++;
    a = target;
  }
  GroupPartition p;
  p.sizes_.assign(static_cast<std::size_t>(next), 0);
  for (int a : assignments) ++p.sizes_[static_cast<std::size_t>(a)];
  if (!order.empty()) {
    // The caller's order refers to the original labels.
    std::vector<int> mapped;
    for (int g : order) {
      auto it = relabel.find(g);
      if (it == relabel.end()) throw StructuralError("partition: order references unknown group " + std::to_string(g));
      mapped.push_back(it->second);
    }
    order = std::move(mapped);
  }
  p.assignments_ = std::move(assignments);
  return p.with_order(std::move(order));
}

GroupPartition GroupPartition::from_groups(const std::vector<std::vector<int>>& groups, std::vector<int> order) {
  int total = 0;
  for (const auto& g : groups) total += static_cast<int>(g.size());
  std::vector<int> assign(static_cast<std::size_t>(total), -1);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) throw StructuralError("partition: empty group " + std::to_string(k));
    for (int m : groups[k]) {
      if (m < 0 || m >= total) throw StructuralError("partition: task index " + std::to_string(m) + " out of range");
      if (assign[static_cast<std::size_t>(m)] >= 0) throw StructuralError("partition: task " + std::to_string(m) + " in two groups");
      assign[static_cast<std::size_t>(m)] = static_cast<int>(k);
    }
  }
  return from_assignments(std::move(assign), std::move(order));
}

GroupPartition GroupPartition::single_group(int num_tasks) {
  return from_assignments(std::vector<int>(static_cast<std::size_t>(num_tasks), 0));
}

GroupPartition GroupPartition::singletons(int num_tasks) {
  std::vector<int> a(static_cast<std::size_t>(num_tasks));
  std::iota(a.begin(), a.end(), 0);
  return from_assignments(std::move(a));
}

int GroupPartition::min_group_size() const { return *std::min_element(sizes_.begin(), sizes_.end()); }

std::vector<int> GroupPartition::members(int k) const {
  std::vector<int> out;
  for (std::size_t m = 0; m < assignments_.size(); ++m) {
    if (assignments_[m] == k) out.push_back(static_cast<int>(m));
  }
  return out;
}

std::vector<std::vector<int>> GroupPartition::groups() const {
  std::vector<std::vector<int>> out(sizes_.size());
  for (std::size_t m = 0; m < assignments_.size(); ++m) out[static_cast<std::size_t>(assignments_[m])].push_back(static_cast<int>(m));
  return out;
}

GroupPartition GroupPartition::with_order(std::vector<int> order) const {
  const int k = num_groups();
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
  }
  std::vector<int> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < k; ++i) {
    if (static_cast<int>(sorted.size()) != k || sorted[static_cast<std::size_t>(i)] != i) {
      throw StructuralError("partition: order is not a permutation of the groups");
    }
  }
  GroupPartition p = *this;
  p.order_ = std::move(order);
  return p;
}

GroupPartition GroupPartition::reversed() const {
  std::vector<int> o(order_.rbegin(), order_.rend());
  return with_order(std::move(o));
}

std::uint64_t GroupPartition::fingerprint() const {
  std::uint64_t h = fnv1a(assignments_.data(), assignments_.size() * sizeof(int));
  return fnv1a(order_.data(), order_.size() * sizeof(int), h);
}

bool GroupPartition::same_groups(const GroupPartition& other) const {
  // Both are canonically numbered, so equal groupings have equal labels.
  return assignments_ == other.assignments_;
}

// --- Jacobi eigensolver ----------------------------------------------------

EigenDecomposition jacobi_eigendecomposition(const Eigen::MatrixXd& s, double tol, int max_sweeps) {
  const Eigen::Index n = s.rows();
  if (n != s.cols()) throw StructuralError("jacobi: matrix is not square");
  if (n == 0) return {};
  if (n > 256) throw StructuralError("jacobi: n > 256");
  if (!s.allFinite()) throw NumericError("jacobi: non-finite entry");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw StructuralError("jacobi: matrix is not symmetric");

  Eigen::MatrixXd a = 0.5 * (s + s.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double target = tol * std::max(a.norm(), std::numeric_limits<double>::min());

  auto off_norm = [&]() {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) sum += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(sum);
  };

  int sweep = 0;
  while (off_norm() > target) {
    if (sweep == max_sweeps) {
      throw NumericError("jacobi: no convergence after " + std::to_string(max_sweeps) + " sweeps");
    }
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle chosen to annihilate a(p, q).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  out.sweeps = sweep;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvalues[i] = a(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(i)]);
    Eigen::VectorXd col = v.col(idx[static_cast<std::size_t>(i)]);
    // Sign convention: largest-magnitude component positive.
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0) col = -col;
    out.eigenvectors.col(i) = col;
  }
  return out;
}

// --- k-means ---------------------------------------------------------------

namespace {

int nearest(const Eigen::MatrixXd& centers, const Eigen::VectorXd& x, double* dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double dd = (centers.row(c).transpose() - x).squaredNorm();
    if (dd < best_d) {
      best_d = dd;
      best = static_cast<int>(c);
    }
  }
  if (dist != nullptr) *dist = best_d;
  return best;
}

KMeansResult kmeans_once(const Eigen::MatrixXd& pts, int k, SeededRng& rng) {
  const Eigen::Index n = pts.rows();
  Eigen::MatrixXd centers(k, pts.cols());
  // k-means++ seeding.
  centers.row(0) = pts.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double dd = std::numeric_limits<double>::infinity();
      for (int j = 0; j < c; ++j) dd = std::min(dd, (pts.row(i) - centers.row(j)).squaredNorm());
      d2[static_cast<std::size_t>(i)] = dd;
      total += dd;
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= d2[static_cast<std::size_t>(i)];
        if (u < 0.0) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = pts.row(pick);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int l = nearest(centers, pts.row(i).transpose(), nullptr);
      if (l != labels[static_cast<std::size_t>(i)]) {
        labels[static_cast<std::size_t>(i)] = l;
        changed = true;
      }
    }
    // Empty clusters take the point farthest from its current center.
    for (int c = 0; c < k; ++c) {
      if (std::find(labels.begin(), labels.end(), c) != labels.end()) continue;
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (int l : labels) ++counts[static_cast<std::size_t>(l)];
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(l)] <= 1) continue;
        const double dd = (pts.row(i) - centers.row(l)).squaredNorm();
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      if (far < 0) break;
      labels[static_cast<std::size_t>(far)] = c;
      centers.row(c) = pts.row(far);
      changed = true;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, pts.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += pts.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
    if (!changed) break;
  }
  KMeansResult r;
  r.labels = labels;
  for (Eigen::Index i = 0; i < n; ++i) r.inertia += (pts.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  return r;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, const SeededRng& rng) {
  if (k < 1 || k > points.rows()) throw StructuralError("kmeans: k must be in [1, n]");
  if (restarts < 1) throw StructuralError("kmeans: restarts must be >= 1");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    SeededRng stream = rng.substream(static_cast<std::uint64_t>(r));
    KMeansResult cand = kmeans_once(points, k, stream);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

// --- spectral clustering ---------------------------------------------------

double median_off_diagonal(const Eigen::MatrixXd& a) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) v.push_back(a(i, j));
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

GroupPartition spectral_cluster(const AffinityMatrix& a, const SpectralConfig& config) {
  const int m = a.size();
  if (m < 1 || a.values.cols() != m) throw StructuralError("spectral_cluster: matrix is not square");
  const int k = config.num_groups;
  if (k < 1 || k > m) throw StructuralError("spectral_cluster: K must be in [1, M]");
  if (config.kmeans_restarts < 1) throw StructuralError("spectral_cluster: kmeans_restarts must be >= 1");
  const double scale = std::max(1.0, a.values.cwiseAbs().maxCoeff());
  if (!a.values.allFinite()) throw NumericError("spectral_cluster: non-finite affinity");
  if ((a.values - a.values.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw StructuralError("spectral_cluster: affinity is not symmetric (symmetrize transferability first)");
  }
  if (k == 1) return GroupPartition::single_group(m);
  if (k == m) return GroupPartition::singletons(m);

  double bw = config.fixed_bandwidth.value_or(median_off_diagonal(a.values));
  if (config.fixed_bandwidth && !(bw > 0)) throw StructuralError("spectral_cluster: bandwidth must be > 0");
  if (!(bw > 0)) {
    // Degenerate median (at least half the pairs at distance zero).
    double sum = 0.0;
    int cnt = 0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        if (a.values(i, j) > 0) {
          sum += a.values(i, j);
          ++cnt;
        }
    bw = cnt > 0 ? sum / cnt : 1.0;
  }

  Eigen::MatrixXd w(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) w(i, j) = i == j ? 0.0 : std::exp(-a.values(i, j) / bw);
  const Eigen::VectorXd degree = w.rowwise().sum();

  std::vector<int> isolated, connected;
  for (int i = 0; i < m; ++i) (degree[i] > 0.0 ? connected : isolated).push_back(i);
  const int k_connected = k - static_cast<int>(isolated.size());
  if (!isolated.empty() && (k_connected < 0 || (k_connected == 0 && !connected.empty()) ||
                            k_connected > static_cast<int>(connected.size()))) {
    throw StructuralError("spectral_cluster: " + std::to_string(isolated.size()) +
                          " isolated task(s) cannot each get a group with K=" + std::to_string(k));
  }

  std::vector<int> assign(static_cast<std::size_t>(m), -1);
  int label = 0;
  for (int i : isolated) assign[static_cast<std::size_t>(i)] = label++;
  if (!connected.empty()) {
    const int n = static_cast<int>(connected.size());
    std::vector<int> sub_labels;
    if (k_connected == 1) {
      sub_labels.assign(static_cast<std::size_t>(n), 0);
    } else if (k_connected == n) {
      sub_labels.resize(static_cast<std::size_t>(n));
      std::iota(sub_labels.begin(), sub_labels.end(), 0);
    } else {
      Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const int ci = connected[static_cast<std::size_t>(i)], cj = connected[static_cast<std::size_t>(j)];
          lap(i, j) -= w(ci, cj) / std::sqrt(degree[ci] * degree[cj]);
        }
      const EigenDecomposition eig = jacobi_eigendecomposition(lap);
      Eigen::MatrixXd emb = eig.eigenvectors.leftCols(k_connected);
      for (int i = 0; i < n; ++i) {
        const double norm = emb.row(i).norm();
        if (norm > 0) emb.row(i) /= norm;
      }
      sub_labels = kmeans(emb, k_connected, config.kmeans_restarts, SeededRng(config.seed, 0x5bec)).labels;
    }
    for (int i = 0; i < n; ++i) assign[static_cast<std::size_t>(connected[static_cast<std::size_t>(i)])] = label + sub_labels[static_cast<std::size_t>(i)];
  }
  return GroupPartition::from_assignments(std::move(assign));
}

PartitionQuality partition_quality(const AffinityMatrix& a, const GroupPartition& p) {
  if (a.size() != p.num_tasks()) throw StructuralError("partition_quality: size mismatch");
  if (!a.symmetric) throw StructuralError("partition_quality: affinity must be symmetric");
  double intra = 0.0, inter = 0.0;
  int n_intra = 0, n_inter = 0;
  const auto& as = p.assignments();
  for (int i = 0; i < a.size(); ++i)
    for (int j = i + 1; j < a.size(); ++j) {
      if (as[static_cast<std::size_t>(i)] == as[static_cast<std::size_t>(j)]) {
        intra += a.values(i, j);
        ++n_intra;
      } else {
        inter += a.values(i, j);
        ++n_inter;
      }
    }
  PartitionQuality q;
  if (n_intra > 0) q.intra_mean = intra / n_intra;
  if (n_inter > 0) q.inter_mean = inter / n_inter;
  return q;
}

double intra_group_cost(const Eigen::MatrixXd& a, const GroupPartition& p) {
  double cost = 0.0;
  const auto& as = p.assignments();
  for (int i = 0; i < p.num_tasks(); ++i)
    for (int j = i + 1; j < p.num_tasks(); ++j)
      if (as[static_cast<std::size_t>(i)] == as[static_cast<std::size_t>(j)]) cost += a(i, j);
  return cost;
}

}  // namespace gst
