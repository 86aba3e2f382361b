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

#include "gst/io.h"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gst {

json Provenance::to_json() const {
  return {{"config_hash", hex64(config_hash)}, {"seed", seed}, {"tool_version", kToolVersion}};
}

std::string Provenance::csv_comment() const {
  return "# gst config_hash=" + hex64(config_hash) + " seed=" + std::to_string(seed) + "\n";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const json& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto c = n == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.at(0).size());
  Eigen::MatrixXd m(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != c) throw StructuralError("matrix rows have unequal length");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_version(const json& j, const char* what) {
  const int v = j.at("format_version").get<int>();
  if (v != kFormatVersion) {
    throw StructuralError(std::string(what) + ": unsupported format_version " + std::to_string(v));
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const HeterogeneityRecipe& r) {
  return {{"num_tasks", r.num_tasks},
          {"dim", r.dim},
          {"num_latent_clusters", r.num_latent_clusters},
          {"intra_cluster_spread", r.intra_cluster_spread},
          {"inter_cluster_spread", r.inter_cluster_spread},
          {"curvature_jitter", r.curvature_jitter},
          {"noise_sigma", r.noise_sigma},
          {"min_curvature", r.min_curvature},
          {"max_curvature", r.max_curvature},
          {"seed", r.seed},
          {"cluster_intra_spreads", r.cluster_intra_spreads},
          {"center_last_cluster", r.center_last_cluster}};
}

json to_json(const QuadraticFamily& f, const Provenance& prov) {
  json tasks = json::array();
  for (const auto& t : f.tasks) {
    tasks.push_back({{"id", t.id()},
                     {"hessian", matrix_rows(t.hessian())},
                     {"theta_star", vec(t.theta_star())},
                     {"noise_sigma", t.noise_sigma()}});
  }
  return {{"format_version", kFormatVersion},
          {"kind", "quadratic"},
          {"provenance", prov.to_json()},
          {"recipe", to_json(f.recipe)},
          {"latent_clusters", f.latent_clusters},
          {"fingerprint", hex64(f.fingerprint())},
          {"tasks", tasks}};
}

QuadraticFamily family_from_json(const json& j) {
  check_version(j, "family");
  if (j.at("kind").get<std::string>() != "quadratic") throw StructuralError("family: only quadratic families are stored");
  QuadraticFamily f;
  const json& r = j.at("recipe");
  f.recipe.num_tasks = r.at("num_tasks");
  f.recipe.dim = r.at("dim");
  f.recipe.num_latent_clusters = r.at("num_latent_clusters");
  f.recipe.intra_cluster_spread = r.at("intra_cluster_spread");
  f.recipe.inter_cluster_spread = r.at("inter_cluster_spread");
  f.recipe.curvature_jitter = r.at("curvature_jitter");
  f.recipe.noise_sigma = r.at("noise_sigma");
  f.recipe.min_curvature = r.at("min_curvature");
  f.recipe.max_curvature = r.at("max_curvature");
  f.recipe.seed = r.at("seed");
  f.recipe.cluster_intra_spreads = r.at("cluster_intra_spreads").get<std::vector<double>>();
  f.recipe.center_last_cluster = r.at("center_last_cluster");
  f.latent_clusters = j.at("latent_clusters").get<std::vector<int>>();
  for (const auto& t : j.at("tasks")) {
    f.tasks.emplace_back(t.at("id").get<int>(), matrix_from_rows(t.at("hessian")), vec_from(t.at("theta_star")),
                         t.at("noise_sigma").get<double>());
  }
  if (f.latent_clusters.size() != f.tasks.size()) throw StructuralError("family: latent_clusters length mismatch");
  return f;
}

const char* to_string(AffinityKind k) {
  return k == AffinityKind::GradientDistance ? "gradient_distance" : "transferability";
}

const char* to_string(OracleKind k) {
  switch (k) {
    case OracleKind::Exact: return "exact";
    case OracleKind::Stochastic: return "stochastic";
    case OracleKind::Mixed: return "mixed";
  }
  return "unknown";
}

json to_json(const AffinityMatrix& a, const Provenance& prov) {
  return {{"format_version", kFormatVersion},
          {"provenance", prov.to_json()},
          {"kind", to_string(a.kind)},
          {"symmetric", a.symmetric},
          {"oracle", to_string(a.oracle)},
          {"task_ids", a.task_ids},
          {"values", matrix_rows(a.values)}};
}

AffinityMatrix affinity_from_json(const json& j) {
  check_version(j, "affinity");
  AffinityMatrix a;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gradient_distance") {
    a.kind = AffinityKind::GradientDistance;
  } else if (kind == "transferability") {
    a.kind = AffinityKind::Transferability;
  } else {
    throw StructuralError("affinity: unknown kind '" + kind + "'");
  }
  a.symmetric = j.at("symmetric");
  const auto oracle = j.at("oracle").get<std::string>();
  a.oracle = oracle == "exact" ? OracleKind::Exact : oracle == "stochastic" ? OracleKind::Stochastic : OracleKind::Mixed;
  a.task_ids = j.at("task_ids").get<std::vector<int>>();
  a.values = matrix_from_rows(j.at("values"));
  if (a.values.rows() != a.values.cols()) throw StructuralError("affinity: matrix is not square");
  return a;
}

std::string affinity_csv(const AffinityMatrix& a, const Provenance& prov) {
  std::string out = prov.csv_comment();
  out += "task";
  for (int id : a.task_ids) out += "," + std::to_string(id);
  out += "\n";
  for (Eigen::Index i = 0; i < a.values.rows(); ++i) {
    out += std::to_string(a.task_ids.at(static_cast<std::size_t>(i)));
    for (Eigen::Index j = 0; j < a.values.cols(); ++j) out += "," + format_double(a.values(i, j));
    out += "\n";
  }
  return out;
}

json to_json(const GroupPartition& p) {
  return {{"K", p.num_groups()}, {"order", p.order()}, {"groups", p.groups()}};
}

GroupPartition partition_from_json(const json& j) {
  const auto groups = j.at("groups").get<std::vector<std::vector<int>>>();
  if (j.at("K").get<int>() != static_cast<int>(groups.size())) throw StructuralError("partition: K does not match groups");
  auto order = j.at("order").get<std::vector<int>>();
  // Groups are listed by their lowest member after canonicalization, so the
  // stored order refers to the same numbering as long as that holds.
  for (std::size_t k = 1; k < groups.size(); ++k) {
    if (groups[k].empty() || groups[k - 1].empty() ||
        *std::min_element(groups[k].begin(), groups[k].end()) < *std::min_element(groups[k - 1].begin(), groups[k - 1].end())) {
      throw StructuralError("partition: groups must be listed by ascending lowest member");
    }
  }
  return GroupPartition::from_groups(groups, std::move(order));
}

json to_json(const HeterogeneityConstants& c) {
  return {{"beta_sq", optional_number(c.beta_sq)}, {"zeta_sq", c.zeta_sq}};
}

json to_json(const HeterogeneityEstimate& e) {
  json groups = json::array();
  for (const auto& g : e.per_group) groups.push_back(to_json(g));
  return {{"global", to_json(e.global)},
          {"per_group", groups},
          {"inter_group", to_json(e.inter_group)},
          {"sigma", e.sigma},
          {"sigma_k", e.sigma_k},
          {"sigma_g", e.sigma_g},
          {"num_probe_points", e.probe_points.size()},
          {"probe_hash", hex64(e.probe_hash)},
          {"partition_hash", hex64(e.partition_hash)}};
}

json to_json(const DecompositionReport& r) {
  return {{"global_variance", r.global_variance}, {"intra_sum", r.intra_sum}, {"inter_sum", r.inter_sum}, {"residual", r.residual}};
}

json to_json(const GroupBoundReport& r) {
  return {{"M", r.num_tasks},
          {"K", r.num_groups},
          {"M_min", r.min_group_size},
          {"factor", r.factor},
          {"beta_g_sq", optional_number(r.beta_g_sq)},
          {"beta_bound", optional_number(r.beta_bound)},
          {"beta_slack", optional_number(r.beta_slack)},
          {"zeta_g_sq", r.zeta_g_sq},
          {"zeta_bound", r.zeta_bound},
          {"zeta_slack", r.zeta_slack},
          {"holds", r.holds()},
          {"intra_violations", r.intra_violations}};
}

json to_json(const VarianceCheck& v) {
  return {{"empirical_var", v.empirical_var}, {"standard_error", v.standard_error}, {"bound", v.bound},
          {"noise_term", v.noise_term},       {"deviation_term", v.deviation_term}, {"fitted_term", v.fitted_term},
          {"num_draws", v.num_draws}};
}

std::string trace_csv(const RunTrace& t, const Provenance& prov) {
  std::string out = prov.csv_comment();
  out += "round,step,grads_consumed,grad_norm_sq,c_of_r,loss";
  const std::size_t m = t.rounds.empty() ? 0 : t.rounds.front().per_task_loss.size();
  for (std::size_t i = 0; i < m; ++i) out += ",loss_task_" + std::to_string(i);
  out += "\n";
  for (std::size_t r = 0; r < t.rounds.size(); ++r) {
    const auto& row = t.rounds[r];
    out += std::to_string(r) + "," + std::to_string(row.step) + "," + std::to_string(row.grads_consumed) + "," +
           format_double(row.grad_norm_sq) + "," + format_double(row.c_of_r) + "," + format_double(row.loss);
    for (double l : row.per_task_loss) out += "," + format_double(l);
    out += "\n";
  }
  return out;
}

json to_json(const RunTrace& t, const Provenance& prov) {
  json rounds = json::array();
  for (const auto& r : t.rounds) {
    rounds.push_back({{"step", r.step},
                      {"grads_consumed", r.grads_consumed},
                      {"grad_norm_sq", r.grad_norm_sq},
                      {"c_of_r", r.c_of_r},
                      {"loss", r.loss},
                      {"per_task_loss", r.per_task_loss},
                      {"theta_hash", hex64(r.theta_hash)}});
  }
  json segs = json::array();
  for (const auto& s : t.segments) {
    segs.push_back({{"pool", s.pool}, {"group", s.group}, {"start_grads", s.start_grads}, {"end_grads", s.end_grads}});
  }
  return {{"format_version", kFormatVersion},
          {"provenance", prov.to_json()},
          {"kind", to_string(t.kind)},
          {"label", t.label},
          {"seed", t.seed},
          {"budget", t.budget},
          {"diverged", t.diverged},
          {"final_theta", vec(t.final_theta.values())},
          {"segments", segs},
          {"rounds", rounds}};
}

RunTrace trace_from_json(const json& j) {
  check_version(j, "trace");
  RunTrace t;
  t.kind = schedule_kind_from_string(j.at("kind").get<std::string>());
  t.label = j.at("label");
  t.seed = j.at("seed");
  t.budget = j.at("budget");
  t.diverged = j.at("diverged");
  t.final_theta = ParamVector(vec_from(j.at("final_theta")));
  for (const auto& s : j.at("segments")) {
    t.segments.push_back({s.at("pool").get<std::vector<int>>(), s.at("group").get<int>(), s.at("start_grads").get<long>(),
                          s.at("end_grads").get<long>()});
  }
  for (const auto& r : j.at("rounds")) {
    TraceRound row;
    row.step = r.at("step");
    row.grads_consumed = r.at("grads_consumed");
    row.grad_norm_sq = r.at("grad_norm_sq");
    row.c_of_r = r.at("c_of_r");
    row.loss = r.at("loss");
    row.per_task_loss = r.at("per_task_loss").get<std::vector<double>>();
    row.theta_hash = std::stoull(r.at("theta_hash").get<std::string>(), nullptr, 16);
    t.rounds.push_back(std::move(row));
  }
  return t;
}

json to_json(const Ranking& r) {
  return {{"labels", r.labels}, {"c_at_budget", r.c_at_budget}, {"ranks", r.ranks}};
}

json to_json(const MultiSeedRanking& r) {
  return {{"labels", r.labels},
          {"median_rank", r.median_rank},
          {"median_c", r.median_c},
          {"per_seed_ranks", r.per_seed_ranks},
          {"per_seed_c", r.per_seed_c}};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw StructuralError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw StructuralError("cannot write " + p.string());
  out << content;
}

json read_json(const std::filesystem::path& p) { return json::parse(read_file(p)); }

void write_json(const std::filesystem::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

}  // namespace gst
