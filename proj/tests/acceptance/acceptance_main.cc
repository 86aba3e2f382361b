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

// Acceptance suite: one PASS/FAIL line per criterion. Reference values are
// recomputed here from the task oracles rather than taken from the library.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gst/benchmarks.h"
#include "gst/harness.h"

using namespace gst;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[192];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Eigen::MatrixXd random_spd(int d, SeededRng& rng) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lam(d);
  for (int i = 0; i < d; ++i) lam[i] = 0.1 + 1.9 * rng.uniform();
  return q * lam.asDiagonal() * q.transpose();
}

TaskList random_tasks(int m, int d, SeededRng& rng) {
  TaskList out;
  for (int i = 0; i < m; ++i) {
    out.push_back(std::make_shared<QuadraticTask>(i, random_spd(d, rng), 3.0 * rng.normal_vector(static_cast<std::size_t>(d)), 0.0));
  }
  return out;
}

std::vector<Eigen::VectorXd> grads_at(const TaskList& tasks, const ParamVector& x) {
  std::vector<Eigen::VectorXd> g;
  for (const auto& t : tasks) g.push_back(t->grad(x).values());
  return g;
}

Eigen::VectorXd mean_of(const std::vector<Eigen::VectorXd>& g, const std::vector<int>& idx) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(g[0].size());
  for (int i : idx) s += g[static_cast<std::size_t>(i)];
  return s / static_cast<double>(idx.size());
}

std::vector<int> iota_vec(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

// --- 1 ---------------------------------------------------------------------

Outcome decomposition_identity() {
  SeededRng rng(101, 0);
  double worst = 0.0, worst_lib = 0.0;
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_index(15));
    const int d = 1 + static_cast<int>(rng.uniform_index(32));
    const int k = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(std::min(4, m))));
    std::vector<int> assign(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) assign[static_cast<std::size_t>(i)] = i < k ? i : static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
    const auto p = GroupPartition::from_assignments(assign);
    const TaskList tasks = random_tasks(m, d, rng);
    const ParamVector x(2.0 * rng.normal_vector(static_cast<std::size_t>(d)));

    const auto g = grads_at(tasks, x);
    const Eigen::VectorXd gbar = mean_of(g, iota_vec(m));
    double global = 0, intra = 0, inter = 0;
    for (const auto& v : g) global += (v - gbar).squaredNorm() / m;
    for (const auto& members : p.groups()) {
      const Eigen::VectorXd gk = mean_of(g, members);
      for (int i : members) intra += (g[static_cast<std::size_t>(i)] - gk).squaredNorm() / m;
      inter += static_cast<double>(members.size()) * (gk - gbar).squaredNorm() / m;
    }
    const double rel = std::abs(global - intra - inter) / std::max(1.0, global);
    const auto lib = decompose_variance(tasks, p, x);
    const double lib_rel = std::abs(lib.residual) / std::max(1.0, lib.global_variance);
    const bool agree = std::abs(lib.global_variance - global) <= 1e-10 * std::max(1.0, global) &&
                       std::abs(lib.intra_sum - intra) <= 1e-10 * std::max(1.0, global) &&
                       std::abs(lib.inter_sum - inter) <= 1e-10 * std::max(1.0, global);
    worst = std::max(worst, rel);
    worst_lib = std::max(worst_lib, lib_rel);
    if (rel > 1e-10 || lib_rel > 1e-10 || !agree) ++bad;
  }
  return {bad == 0, "100 instances, worst relative residual " + fmt("%.2e (reference) / %.2e (library)", worst, worst_lib)};
}

// --- 2 ---------------------------------------------------------------------

Outcome sum_identity() {
  SeededRng rng(202, 0);
  int bad = 0, m_constant_holds = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_index(15));
    const int d = 1 + static_cast<int>(rng.uniform_index(32));
    const TaskList tasks = random_tasks(m, d, rng);
    const ParamVector x(rng.normal_vector(static_cast<std::size_t>(d)));
    const auto g = grads_at(tasks, x);
    const Eigen::VectorXd gbar = mean_of(g, iota_vec(m));
    double ordered = 0, dev = 0;
    for (int a = 0; a < m; ++a) {
      dev += (g[static_cast<std::size_t>(a)] - gbar).squaredNorm();
      for (int b = 0; b < m; ++b) ordered += (g[static_cast<std::size_t>(a)] - g[static_cast<std::size_t>(b)]).squaredNorm();
    }
    // Brute force fixes the ordered-pair constant.
    const double constant = ordered / dev;
    const auto s = sum_identity_check(tasks, x);
    const double rel = std::max({std::abs(constant - 2.0 * m) / (2.0 * m), std::abs(s.lhs_ordered - 2.0 * m * s.rhs) / s.lhs_ordered,
                                 std::abs(s.lhs_unordered - m * s.rhs) / s.lhs_unordered});
    worst = std::max(worst, rel);
    if (rel > 1e-10) ++bad;
    if (std::abs(ordered - m * dev) <= 1e-10 * ordered) ++m_constant_holds;
  }
  return {bad == 0 && m_constant_holds == 0,
          "ordered pairs = 2M * sum (worst rel err " + fmt("%.2e", worst) + "); constant M over ordered pairs held on " +
              std::to_string(m_constant_holds) + "/100, M holds for unordered pairs"};
}

// --- 3 ---------------------------------------------------------------------

Outcome group_bounds() {
  int held = 0, recovered = 0, pointwise = 0;
  double min_zeta_slack = 1e300, min_beta_slack = 1e300, worst_ratio = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto f = generate_quadratic_family(structured_suite_recipe(i));
    const TaskList tasks = f.task_list();
    ProbeConfig pc;
    pc.init_point = ParamVector(f.mean_minimizer());
    const auto a = probe_affinity_matrix(tasks, pc, SeededRng(static_cast<std::uint64_t>(i), 3));
    SpectralConfig sc;
    sc.num_groups = f.recipe.num_latent_clusters;
    sc.seed = static_cast<std::uint64_t>(i);
    const auto p = spectral_cluster(a, sc);
    if (p.same_groups(GroupPartition::from_assignments(f.latent_clusters))) ++recovered;
    const auto probes = default_probe_points(f, 16);
    const auto est = estimate_group_constants(tasks, p, probes);
    const auto r = check_group_bounds(est, p);
    const bool slack_ok = r.zeta_slack >= 0 && (!r.beta_slack || *r.beta_slack >= 0);
    if (r.holds() && slack_ok) ++held;
    min_zeta_slack = std::min(min_zeta_slack, r.zeta_slack);
    if (r.beta_slack) min_beta_slack = std::min(min_beta_slack, *r.beta_slack);

    // The same inequality on raw deviations at each probe point, before any
    // constants are fitted.
    const double factor = static_cast<double>(p.num_tasks()) / (p.num_groups() * p.min_group_size());
    bool all_points = true;
    for (const auto& x : probes) {
      const auto g = grads_at(tasks, x);
      const Eigen::VectorXd gbar = mean_of(g, iota_vec(p.num_tasks()));
      double global = 0, inter = 0;
      for (const auto& v : g) global += (v - gbar).squaredNorm() / p.num_tasks();
      for (const auto& members : p.groups()) inter += (mean_of(g, members) - gbar).squaredNorm() / p.num_groups();
      if (global > 0) worst_ratio = std::max(worst_ratio, inter / (factor * global));
      if (inter > factor * global * (1 + 1e-12)) all_points = false;
    }
    if (all_points) ++pointwise;
  }
  return {held == 50, "fitted constants within bounds on " + std::to_string(held) + "/50 (latent grouping recovered on " +
                          std::to_string(recovered) + "/50), min slack zeta " +
                          fmt("%.3g beta %.3g", min_zeta_slack, min_beta_slack) + "; raw deviations within bound at every probe point on " +
                          std::to_string(pointwise) + "/50 (max ratio " + fmt("%.4f", worst_ratio) + ")"};
}

// --- 4 ---------------------------------------------------------------------

Outcome variance_bound() {
  int checked = 0, within = 0, tight_groups = 0, tight_below = 0;
  double worst_z = -1e300;
  for (int i = 0; i < 20; ++i) {
    HeterogeneityRecipe r = structured_suite_recipe(i);
    const auto f = generate_quadratic_family(r);
    const TaskList tasks = f.task_list();
    const auto p = GroupPartition::from_assignments(f.latent_clusters);
    const auto probes = default_probe_points(f, 16);
    const auto est = estimate_group_constants(tasks, p, probes);
    for (int k = 0; k < p.num_groups(); ++k) {
      const auto members = p.members(k);
      ++checked;
      try {
        const auto v = check_variance_bound(tasks, members, probes[static_cast<std::size_t>(k) % probes.size()], 10000,
                                            SeededRng(static_cast<std::uint64_t>(i), 4 + static_cast<std::uint64_t>(k)),
                                            est.per_group[static_cast<std::size_t>(k)]);
        ++within;
        worst_z = std::max(worst_z, (v.empirical_var - v.bound) / v.standard_error);
      } catch (const NumericError&) {
      }
    }

    // Same geometry with tight groups: intra spread well below the noise.
    r.intra_cluster_spread = 0.01;
    r.curvature_jitter = 0.0;
    r.noise_sigma = 1.0;
    const auto ft = generate_quadratic_family(r);
    const auto pt = GroupPartition::from_assignments(ft.latent_clusters);
    const auto et = estimate_group_constants(ft.task_list(), pt, default_probe_points(ft, 16));
    for (int k = 0; k < pt.num_groups(); ++k) {
      if (pt.group_sizes()[static_cast<std::size_t>(k)] < 2) continue;
      ++tight_groups;
      if (et.sigma_k[static_cast<std::size_t>(k)] < et.sigma) ++tight_below;
    }
  }
  return {within == checked && tight_below == tight_groups,
          std::to_string(within) + "/" + std::to_string(checked) + " groups within 5 SE (max z " + fmt("%.2f", worst_z) +
              "); sigma_k < sigma on " + std::to_string(tight_below) + "/" + std::to_string(tight_groups) + " tight groups"};
}

// --- 5 ---------------------------------------------------------------------

double intra_cost(const Eigen::MatrixXd& a, const std::vector<int>& labels) {
  double c = 0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i + 1; j < a.rows(); ++j)
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) c += a(i, j);
  return c;
}

std::vector<int> exhaustive_partition(const Eigen::MatrixXd& a, int k) {
  const int m = static_cast<int>(a.rows());
  std::vector<int> rgs(static_cast<std::size_t>(m), 0), best;
  double best_cost = 1e300;
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == m) {
      if (used == k) {
        const double c = intra_cost(a, rgs);
        if (c < best_cost) best_cost = c, best = rgs;
      }
      return;
    }
    if (m - i < k - used) return;
    for (int g = 0; g <= std::min(used, k - 1); ++g) {
      rgs[static_cast<std::size_t>(i)] = g;
      rec(i + 1, std::max(used, g + 1));
    }
  };
  rec(0, 0);
  return best;
}

Outcome clustering_recovery() {
  SeededRng rng(505, 0);
  int match = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 4 + static_cast<int>(rng.uniform_index(7));
    const int k = 2 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(std::min(3, m / 2))));
    std::vector<int> labels(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) labels[static_cast<std::size_t>(i)] = i < k ? i : static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
    // Within-block distances in (0, 1], across-block in [10, 20].
    AffinityMatrix a;
    a.values = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        a.values(i, j) = a.values(j, i) = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]
                                              ? 0.05 + 0.95 * rng.uniform()
                                              : 10.0 + 10.0 * rng.uniform();
    SpectralConfig c;
    c.num_groups = k;
    c.seed = static_cast<std::uint64_t>(trial);
    const auto p = spectral_cluster(a, c);
    if (p.same_groups(GroupPartition::from_assignments(exhaustive_partition(a.values, k)))) ++match;
  }
  return {match == 30, std::to_string(match) + "/30 match the exhaustive optimum"};
}

// --- 6 to 10 ---------------------------------------------------------------

double median_c(const RaceOutcome& r, const std::string& label) { return r.ranking.median_c[r.index_of(label)]; }

Outcome high_heterogeneity() {
  const auto r = run_race(high_heterogeneity_race(), seed_range(1, 20));
  const double par = median_c(r, "parallel"), seq = median_c(r, "sequential"), prog = median_c(r, "gst-progressive");
  return {seq < par && prog <= seq,
          "20 seeds, median C: parallel " + fmt("%.4g", par) + ", sequential " + fmt("%.4g", seq) + ", gst-progressive " +
              fmt("%.4g", prog)};
}

Outcome low_heterogeneity() {
  const auto r = run_race(low_heterogeneity_race(), seed_range(1, 20));
  const double par = median_c(r, "parallel"), seq = median_c(r, "sequential");
  return {par <= seq, "20 seeds, median C: parallel " + fmt("%.4g", par) + ", sequential " + fmt("%.4g", seq)};
}

Outcome gst_advantage() {
  const auto r = run_race(two_cluster_race(), seed_range(1, 20));
  const double par = median_c(r, "parallel"), seq = median_c(r, "sequential");
  const double strict = median_c(r, "gst-strict"), prog = median_c(r, "gst-progressive");
  const double pure = std::min(par, seq);
  return {strict <= pure && prog <= pure, "20 seeds, median C: parallel " + fmt("%.4g", par) + ", sequential " +
                                              fmt("%.4g", seq) + ", gst-strict " + fmt("%.4g", strict) +
                                              ", gst-progressive " + fmt("%.4g", prog)};
}

Outcome forgetting() {
  const auto r = run_race(forgetting_race(), seed_range(1, 20));
  const std::size_t is = r.index_of("gst-strict"), ip = r.index_of("gst-progressive");
  std::vector<double> strict, prog;
  for (const auto& s : r.seeds) {
    double a = 0, b = 0;
    for (int k = 0; k < s.partition.num_groups(); ++k) {
      const auto members = s.partition.members(k);
      a = std::max(a, max_loss_increase_after_switch(s.traces[is], members));
      b = std::max(b, max_loss_increase_after_switch(s.traces[ip], members));
    }
    strict.push_back(a);
    prog.push_back(b);
  }
  const double ms = median(strict), mp = median(prog);
  const double ratio = mp > 0 ? ms / mp : (ms > 0 ? INFINITY : 0.0);
  return {ms >= 2.0 * mp, "20 seeds, median max group-loss rise after a switch: strict " + fmt("%.4g", ms) +
                              ", progressive " + fmt("%.4g", mp) + " (ratio " + fmt("%.2f", ratio) + ")"};
}

// min F over theta for a quadratic family: solve (mean H) theta = mean(H theta*).
double optimum_loss(const QuadraticFamily& f) {
  const auto d = f.tasks[0].theta_star().size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
  for (const auto& t : f.tasks) {
    h += t.hessian();
    c += t.hessian() * t.theta_star();
  }
  const Eigen::VectorXd x = h.ldlt().solve(c);
  double loss = 0;
  for (const auto& t : f.tasks) loss += 0.5 * (x - t.theta_star()).dot(t.hessian() * (x - t.theta_star()));
  return loss / static_cast<double>(f.tasks.size());
}

Outcome outlier_ordering() {
  const auto r = run_race(outlier_group_race(), seed_range(1, 20));
  const std::size_t is = r.index_of("gst-progressive-stability"), ir = r.index_of("gst-reverse-stability");
  std::vector<double> excess_s, excess_r;
  int wins = 0;
  for (const auto& s : r.seeds) {
    const double opt = optimum_loss(s.family);
    excess_s.push_back(s.traces[is].rounds.back().loss - opt);
    excess_r.push_back(s.traces[ir].rounds.back().loss - opt);
    if (s.traces[is].rounds.back().loss <= s.traces[ir].rounds.back().loss) ++wins;
  }
  const double fs = median(r.final_mean_loss(is)), fr = median(r.final_mean_loss(ir));
  return {fs <= fr, "20 seeds, median final loss stability-first " + fmt("%.6g", fs) + " vs reverse " + fmt("%.6g", fr) +
                        "; excess over optimum " + fmt("%.3g vs %.3g", median(excess_s), median(excess_r)) + "; " +
                        std::to_string(wins) + "/20 seeds favour stability-first"};
}

// --- 11 --------------------------------------------------------------------

Outcome eigensolver() {
  SeededRng rng(1111, 0);
  double worst_rec = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(64));
    Eigen::MatrixXd s(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) s(i, j) = s(j, i) = rng.normal();
    const auto e = jacobi_eigendecomposition(s);
    const Eigen::MatrixXd rec = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose();
    worst_rec = std::max(worst_rec, (rec - s).norm() / s.norm());
  }
  // Known spectra: Q diag(lambda) Q^T with Q from a QR factorization.
  double worst_known = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + 6 * trial;
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd lam(n);
    for (int i = 0; i < n; ++i) lam[i] = static_cast<double>(i - n / 2);
    Eigen::MatrixXd s = q * lam.asDiagonal() * q.transpose();
    s = (0.5 * (s + s.transpose())).eval();
    const auto e = jacobi_eigendecomposition(s);
    worst_known = std::max(worst_known, (e.eigenvalues - lam).cwiseAbs().maxCoeff());
  }
  Eigen::MatrixXd two(2, 2);
  two << 2, 1, 1, 2;
  const auto e2 = jacobi_eigendecomposition(two);
  worst_known = std::max({worst_known, std::abs(e2.eigenvalues[0] - 1.0), std::abs(e2.eigenvalues[1] - 3.0)});
  return {worst_rec <= 1e-8 && worst_known <= 1e-10,
          "worst reconstruction " + fmt("%.2e", worst_rec) + " (50 matrices), worst known-spectrum error " + fmt("%.2e", worst_known)};
}

// --- 12 --------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

Outcome reproducibility() {
  const fs::path cfg_path = fs::path(GST_SOURCE_DIR) / "configs" / "two_cluster.json";
  const auto cfg = load_config(cfg_path);
  const fs::path base = fs::temp_directory_path() / ("gst_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  run_pipeline(cfg, base / "a");
  run_pipeline(cfg, base / "b");
  const auto a = snapshot(base / "a"), b = snapshot(base / "b");
  int differing = 0;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  fs::remove_all(base);
  return {differing == 0 && a.size() == b.size() && !a.empty(),
          std::to_string(a.size()) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  // By default the exit status only reports whether the suite ran; --strict
  // also fails on any FAIL line.
  const bool strict = argc > 1 && std::string(argv[1]) == "--strict";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"decomposition identity", decomposition_identity},
      {"gradient-distance sum identity", sum_identity},
      {"group-size heterogeneity bounds", group_bounds},
      {"group gradient variance bound", variance_bound},
      {"clustering recovery", clustering_recovery},
      {"high-heterogeneity ordering", high_heterogeneity},
      {"low-heterogeneity ordering", low_heterogeneity},
      {"grouped advantage on two clusters", gst_advantage},
      {"forgetting signature", forgetting},
      {"stability-first ordering", outlier_ordering},
      {"eigensolver", eigensolver},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return strict && failed > 0 ? 1 : 0;
}
