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

#include "gst/harness.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gst/svg.h"

namespace gst {

namespace fs = std::filesystem;

// --- config parsing --------------------------------------------------------

namespace {

bool is_non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : j_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        throw ConfigError(path_ + "/" + k, "unknown field");
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  std::string path(const char* key) const { return path_ + "/" + key; }

  Node child(const char* key) const {
    static const json kEmpty = json::object();
    return has(key) ? Node(j_.at(key), path(key)) : Node(kEmpty, path(key));
  }

  const json& raw(const char* key) const { return j_.at(key); }

  double number(const char* key, double def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(path(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path(key), "must be finite");
    return d;
  }

  long integer(const char* key, long def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
    return v.get<long>();
  }

  std::uint64_t unsigned_int(const char* key, std::uint64_t def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!is_non_negative_integer(v)) throw ConfigError(path(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(path(key), "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
};

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

std::string policy_name(OrderPolicy p) {
  switch (p) {
    case OrderPolicy::GivenOrder: return "given";
    case OrderPolicy::StabilityFirst: return "stability_first";
    case OrderPolicy::Reverse: return "reverse";
  }
  return "given";
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  const Node root(j, "");
  root.allow_only({"format_version", "family", "probe", "spectral", "train", "schedules", "seeds", "verify"});
  require(root.has("format_version"), "/format_version", "missing");
  require(root.integer("format_version", 0) == kFormatVersion, "/format_version",
          "unsupported version (expected " + std::to_string(kFormatVersion) + ")");
  ExperimentConfig c;

  const Node fam = root.child("family");
  fam.allow_only({"kind", "num_tasks", "dim", "num_latent_clusters", "intra_cluster_spread", "inter_cluster_spread",
                  "curvature_jitter", "noise_sigma", "min_curvature", "max_curvature", "seed", "cluster_intra_spreads",
                  "center_last_cluster"});
  require(fam.string("kind", "quadratic") == "quadratic", fam.path("kind"), "only \"quadratic\" is supported");
  auto& r = c.recipe;
  r.num_tasks = static_cast<int>(fam.integer("num_tasks", r.num_tasks));
  r.dim = static_cast<int>(fam.integer("dim", r.dim));
  r.num_latent_clusters = static_cast<int>(fam.integer("num_latent_clusters", r.num_latent_clusters));
  r.intra_cluster_spread = fam.number("intra_cluster_spread", r.intra_cluster_spread);
  r.inter_cluster_spread = fam.number("inter_cluster_spread", r.inter_cluster_spread);
  r.curvature_jitter = fam.number("curvature_jitter", r.curvature_jitter);
  r.noise_sigma = fam.number("noise_sigma", r.noise_sigma);
  r.min_curvature = fam.number("min_curvature", r.min_curvature);
  r.max_curvature = fam.number("max_curvature", r.max_curvature);
  r.seed = fam.unsigned_int("seed", r.seed);
  r.center_last_cluster = fam.boolean("center_last_cluster", false);
  if (fam.has("cluster_intra_spreads")) {
    const json& v = fam.raw("cluster_intra_spreads");
    require(v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); }),
            fam.path("cluster_intra_spreads"), "expected an array of numbers");
    r.cluster_intra_spreads = v.get<std::vector<double>>();
  }
  require(r.num_tasks >= 1, fam.path("num_tasks"), "must be >= 1");
  require(r.dim >= 1 && r.dim <= 1024, fam.path("dim"), "must be in [1, 1024]");
  require(r.num_latent_clusters >= 1 && r.num_latent_clusters <= r.num_tasks, fam.path("num_latent_clusters"),
          "must be in [1, num_tasks]");
  require(r.intra_cluster_spread >= 0, fam.path("intra_cluster_spread"), "must be >= 0");
  require(r.inter_cluster_spread >= 0, fam.path("inter_cluster_spread"), "must be >= 0");
  require(r.curvature_jitter >= 0, fam.path("curvature_jitter"), "must be >= 0");
  require(r.noise_sigma >= 0, fam.path("noise_sigma"), "must be >= 0");
  require(r.min_curvature > 0, fam.path("min_curvature"), "must be > 0");
  require(r.max_curvature >= r.min_curvature, fam.path("max_curvature"), "must be >= min_curvature");
  require(r.cluster_intra_spreads.empty() || static_cast<int>(r.cluster_intra_spreads.size()) == r.num_latent_clusters,
          fam.path("cluster_intra_spreads"), "needs one entry per latent cluster");

  const Node probe = root.child("probe");
  probe.allow_only({"kind", "steps", "lr", "accumulate", "oracle", "init_offset", "transfer_steps"});
  const auto kind = probe.string("kind", "gradient_distance");
  require(kind == "gradient_distance" || kind == "transferability", probe.path("kind"),
          "expected \"gradient_distance\" or \"transferability\"");
  c.affinity = kind == "gradient_distance" ? AffinityKind::GradientDistance : AffinityKind::Transferability;
  c.probe_steps = static_cast<int>(probe.integer("steps", c.probe_steps));
  require(c.probe_steps >= 1, probe.path("steps"), "must be >= 1");
  c.probe_lr = probe.number("lr", c.probe_lr);
  require(c.probe_lr > 0, probe.path("lr"), "must be > 0");
  const auto acc = probe.string("accumulate", "mean");
  require(acc == "mean" || acc == "sum", probe.path("accumulate"), "expected \"mean\" or \"sum\"");
  c.accumulate = acc == "mean" ? Accumulation::MeanGradients : Accumulation::SumGradients;
  const auto oracle = probe.string("oracle", "auto");
  require(oracle == "auto" || oracle == "exact" || oracle == "stochastic", probe.path("oracle"),
          "expected \"auto\", \"exact\" or \"stochastic\"");
  c.oracle = oracle == "auto" ? ProbeOracle::Auto : oracle == "exact" ? ProbeOracle::Exact : ProbeOracle::Stochastic;
  c.probe_init_offset = probe.number("init_offset", 0.0);
  require(c.probe_init_offset >= 0, probe.path("init_offset"), "must be >= 0");
  c.transfer_steps = static_cast<int>(probe.integer("transfer_steps", c.transfer_steps));
  require(c.transfer_steps >= 0, probe.path("transfer_steps"), "must be >= 0");

  const Node spec = root.child("spectral");
  spec.allow_only({"K", "bandwidth", "kmeans_restarts", "seed"});
  c.spectral.num_groups = static_cast<int>(spec.integer("K", 2));
  require(c.spectral.num_groups >= 1 && c.spectral.num_groups <= r.num_tasks, spec.path("K"), "must be in [1, num_tasks]");
  if (spec.has("bandwidth")) {
    const json& bw = spec.raw("bandwidth");
    if (bw.is_string()) {
      require(bw.get<std::string>() == "median", spec.path("bandwidth"), "expected \"median\" or a positive number");
    } else {
      require(bw.is_number() && bw.get<double>() > 0, spec.path("bandwidth"), "expected \"median\" or a positive number");
      c.spectral.fixed_bandwidth = bw.get<double>();
    }
  }
  c.spectral.kmeans_restarts = static_cast<int>(spec.integer("kmeans_restarts", 16));
  require(c.spectral.kmeans_restarts >= 1, spec.path("kmeans_restarts"), "must be >= 1");
  c.spectral.seed = spec.unsigned_int("seed", r.seed);

  const Node train = root.child("train");
  train.allow_only({"budget", "lr", "lr_shape", "warmup_fraction", "batch_mode", "log_interval", "init_offset",
                    "num_cycles", "interval", "divergence_loss"});
  c.budget = train.integer("budget", c.budget);
  require(c.budget >= 0, train.path("budget"), "must be >= 0");
  c.lr.base_lr = train.number("lr", c.lr.base_lr);
  require(c.lr.base_lr > 0, train.path("lr"), "must be > 0");
  const auto shape = train.string("lr_shape", "constant");
  require(shape == "constant" || shape == "warmup_cosine", train.path("lr_shape"),
          "expected \"constant\" or \"warmup_cosine\"");
  c.lr.shape = shape == "constant" ? LrSchedule::Shape::Constant : LrSchedule::Shape::WarmupCosine;
  c.lr.warmup_fraction = train.number("warmup_fraction", 0.1);
  require(c.lr.warmup_fraction >= 0 && c.lr.warmup_fraction < 1, train.path("warmup_fraction"), "must be in [0, 1)");
  c.run.batch_mode = train.boolean("batch_mode", false);
  c.run.log_interval = train.integer("log_interval", 0);
  require(c.run.log_interval >= 0, train.path("log_interval"), "must be >= 0");
  c.run.divergence_loss = train.number("divergence_loss", 1e12);
  require(c.run.divergence_loss > 0, train.path("divergence_loss"), "must be > 0");
  c.init_offset = train.number("init_offset", 0.0);
  require(c.init_offset >= 0, train.path("init_offset"), "must be >= 0");
  c.gst.num_cycles = static_cast<int>(train.integer("num_cycles", 5));
  require(c.gst.num_cycles >= 1, train.path("num_cycles"), "must be >= 1");
  c.gst.interval = train.integer("interval", 0);
  require(c.gst.interval >= 0, train.path("interval"), "must be >= 0");

  if (root.has("schedules")) {
    const json& arr = root.raw("schedules");
    require(arr.is_array() && !arr.empty(), "/schedules", "expected a non-empty array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Node s(arr[i], "/schedules/" + std::to_string(i));
      s.allow_only({"kind", "order_policy", "passes"});
      require(s.has("kind"), s.path("kind"), "missing");
      ScheduleSpec spec_i;
      try {
        spec_i.kind = schedule_kind_from_string(s.string("kind", ""));
      } catch (const StructuralError& e) {
        throw ConfigError(s.path("kind"), e.what());
      }
      const auto pol = s.string("order_policy", "given");
      require(pol == "given" || pol == "stability_first" || pol == "reverse", s.path("order_policy"),
              "expected \"given\", \"stability_first\" or \"reverse\"");
      spec_i.order_policy = pol == "given" ? OrderPolicy::GivenOrder
                            : pol == "stability_first" ? OrderPolicy::StabilityFirst
                                                       : OrderPolicy::Reverse;
      spec_i.passes = static_cast<int>(s.integer("passes", 1));
      require(spec_i.passes >= 1, s.path("passes"), "must be >= 1");
      require(seen.insert(spec_i.label()).second, s.path("kind"), "duplicate schedule '" + spec_i.label() + "'");
      c.schedules.push_back(spec_i);
    }
  } else {
    c.schedules = {{ScheduleKind::Parallel}, {ScheduleKind::Sequential}, {ScheduleKind::ProgressiveGST}};
  }

  if (root.has("seeds")) {
    const json& s = root.raw("seeds");
    require(s.is_array() && !s.empty() && std::all_of(s.begin(), s.end(), is_non_negative_integer),
            "/seeds", "expected a non-empty array of non-negative integers");
    c.seeds = s.get<std::vector<std::uint64_t>>();
    require(std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() == c.seeds.size(), "/seeds", "duplicate seed");
  }

  const Node ver = root.child("verify");
  ver.allow_only({"decomposition", "sum_identity", "group_bounds", "variance", "variance_draws", "num_probe_points"});
  c.verify.decomposition = ver.boolean("decomposition", true);
  c.verify.sum_identity = ver.boolean("sum_identity", true);
  c.verify.group_bounds = ver.boolean("group_bounds", true);
  c.verify.variance = ver.boolean("variance", true);
  c.verify.variance_draws = static_cast<int>(ver.integer("variance_draws", 10000));
  require(c.verify.variance_draws >= 1000, ver.path("variance_draws"), "must be >= 1000");
  c.num_probe_points = static_cast<int>(ver.integer("num_probe_points", 16));
  require(c.num_probe_points >= 1, ver.path("num_probe_points"), "must be >= 1");
  return c;
}

ExperimentConfig load_config(const fs::path& p) {
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

json ExperimentConfig::to_json() const {
  json schedules_j = json::array();
  for (const auto& s : schedules) {
    schedules_j.push_back({{"kind", gst::to_string(s.kind)}, {"order_policy", policy_name(s.order_policy)}, {"passes", s.passes}});
  }
  json fam = gst::to_json(recipe);
  fam["kind"] = "quadratic";
  return {{"format_version", kFormatVersion},
          {"family", fam},
          {"probe",
           {{"kind", gst::to_string(affinity)},
            {"steps", probe_steps},
            {"lr", probe_lr},
            {"accumulate", accumulate == Accumulation::MeanGradients ? "mean" : "sum"},
            {"oracle", oracle == ProbeOracle::Auto ? "auto" : oracle == ProbeOracle::Exact ? "exact" : "stochastic"},
            {"init_offset", probe_init_offset},
            {"transfer_steps", transfer_steps}}},
          {"spectral",
           {{"K", spectral.num_groups},
            {"bandwidth", spectral.fixed_bandwidth ? json(*spectral.fixed_bandwidth) : json("median")},
            {"kmeans_restarts", spectral.kmeans_restarts},
            {"seed", spectral.seed}}},
          {"train",
           {{"budget", budget},
            {"lr", lr.base_lr},
            {"lr_shape", lr.shape == LrSchedule::Shape::Constant ? "constant" : "warmup_cosine"},
            {"warmup_fraction", lr.warmup_fraction},
            {"batch_mode", run.batch_mode},
            {"log_interval", run.log_interval},
            {"divergence_loss", run.divergence_loss},
            {"init_offset", init_offset},
            {"num_cycles", gst.num_cycles},
            {"interval", gst.interval}}},
          {"schedules", schedules_j},
          {"seeds", seeds},
          {"verify",
           {{"decomposition", verify.decomposition},
            {"sum_identity", verify.sum_identity},
            {"group_bounds", verify.group_bounds},
            {"variance", verify.variance},
            {"variance_draws", verify.variance_draws},
            {"num_probe_points", num_probe_points}}}};
}

std::uint64_t ExperimentConfig::hash() const {
  const std::string s = to_json().dump();
  return fnv1a(s.data(), s.size());
}

// --- stages ----------------------------------------------------------------

Stage stage_from_string(const std::string& s) {
  for (Stage st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("--only", "unknown stage '" + s + "'");
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::GenTasks: return "gen-tasks";
    case Stage::Probe: return "probe";
    case Stage::Cluster: return "cluster";
    case Stage::Train: return "train";
    case Stage::Compare: return "compare";
    case Stage::Verify: return "verify";
    case Stage::Plot: return "plot";
  }
  return "unknown";
}

std::vector<Stage> all_stages() {
  return {Stage::GenTasks, Stage::Probe, Stage::Cluster, Stage::Train, Stage::Compare, Stage::Verify, Stage::Plot};
}

ParamVector training_init(const QuadraticFamily& f, double offset, std::uint64_t seed) {
  const auto d = static_cast<std::size_t>(f.recipe.dim);
  SeededRng rng = SeededRng(seed, 0).substream(2);
  return ParamVector(f.mean_minimizer() + offset / std::sqrt(static_cast<double>(d)) * rng.normal_vector(d));
}

namespace {

QuadraticFamily load_family(const fs::path& out) { return family_from_json(read_json(out / "family.json")); }

GroupPartition load_partition(const fs::path& out) { return partition_from_json(read_json(out / "partition.json")); }

std::string trace_stem(const std::string& label, std::uint64_t seed) {
  return label + "_seed" + std::to_string(seed);
}

void update_report(const fs::path& out, const char* key, json value, const Provenance& prov) {
  const fs::path p = out / "report.json";
  json report = fs::exists(p) ? read_json(p) : json::object();
  report["format_version"] = kFormatVersion;
  report["provenance"] = prov.to_json();
  report[key] = std::move(value);
  write_json(p, report);
}

std::vector<RunTrace> load_seed_traces(const ExperimentConfig& cfg, const fs::path& out, std::uint64_t seed) {
  std::vector<RunTrace> traces;
  for (const auto& s : cfg.schedules) {
    if (s.kind == ScheduleKind::Independent) continue;
    traces.push_back(trace_from_json(read_json(out / "traces" / (trace_stem(s.label(), seed) + ".json"))));
  }
  return traces;
}

StageResult gen_tasks(const ExperimentConfig& cfg, const fs::path& out, const Provenance& prov) {
  const QuadraticFamily f = generate_quadratic_family(cfg.recipe);
  write_json(out / "family.json", to_json(f, prov));
  return {{out / "family.json"}, {}};
}

StageResult probe(const ExperimentConfig& cfg, const fs::path& out, const Provenance& prov) {
  const QuadraticFamily f = load_family(out);
  const TaskList tasks = f.task_list();
  const ParamVector init = training_init(f, cfg.probe_init_offset, f.recipe.seed);
  const SeededRng rng = SeededRng(f.recipe.seed, 0).substream(3);
  AffinityMatrix a;
  if (cfg.affinity == AffinityKind::GradientDistance) {
    ProbeConfig pc;
    pc.init_point = init;
    pc.probe_steps = cfg.probe_steps;
    pc.probe_lr = cfg.probe_lr;
    pc.accumulate = cfg.accumulate;
    pc.oracle = cfg.oracle;
    a = probe_affinity_matrix(tasks, pc, rng);
  } else {
    TransferConfig tc;
    tc.init_point = init;
    tc.train_steps = cfg.transfer_steps;
    tc.lr = cfg.probe_lr;
    a = transferability_matrix(tasks, tc, rng);
  }
  write_file(out / "affinity.csv", affinity_csv(a, prov));
  write_json(out / "affinity.json", to_json(a, prov));
  return {{out / "affinity.csv", out / "affinity.json"}, {}};
}

StageResult cluster(const ExperimentConfig& cfg, const fs::path& out, const Provenance& prov) {
  AffinityMatrix a = affinity_from_json(read_json(out / "affinity.json"));
  if (a.kind == AffinityKind::Transferability && !a.symmetric) a = symmetrize(a);
  const GroupPartition p = spectral_cluster(a, cfg.spectral);
  json j = to_json(p);
  j["provenance"] = prov.to_json();
  const PartitionQuality q = partition_quality(a, p);
  j["quality"] = {{"intra_mean", q.intra_mean ? json(*q.intra_mean) : json("none")},
                  {"inter_mean", q.inter_mean ? json(*q.inter_mean) : json("none")}};
  write_json(out / "partition.json", j);
  return {{out / "partition.json"}, {}};
}

RunTrace run_one(const ScheduleSpec& s, const TaskList& tasks, const GroupPartition& base,
                 const HeterogeneityEstimate& est, const ParamVector& theta0, const ExperimentConfig& cfg,
                 const SeededRng& rng) {
  GroupPartition p = base;
  if (s.order_policy == OrderPolicy::StabilityFirst) p = stability_first_order(base, est);
  if (s.order_policy == OrderPolicy::Reverse) p = base.reversed();
  RunTrace t;
  switch (s.kind) {
    case ScheduleKind::Parallel: t = run_parallel(tasks, theta0, cfg.lr, cfg.budget, rng, cfg.run); break;
    case ScheduleKind::Sequential: {
      std::vector<int> order;
      for (int g : p.order()) {
        for (int m : p.members(g)) order.push_back(m);
      }
      t = run_sequential(tasks, theta0, cfg.lr, cfg.budget, order, rng, cfg.run, s.passes);
      break;
    }
    case ScheduleKind::StrictCycleGST:
      t = run_gst(tasks, p, theta0, cfg.lr, cfg.budget, GstMode::StrictCycle, rng, cfg.run, cfg.gst);
      break;
    case ScheduleKind::ProgressiveGST:
      t = run_gst(tasks, p, theta0, cfg.lr, cfg.budget, GstMode::Progressive, rng, cfg.run, cfg.gst);
      break;
    case ScheduleKind::ReverseProgressiveGST:
      t = run_gst(tasks, p, theta0, cfg.lr, cfg.budget, GstMode::Reverse, rng, cfg.run, cfg.gst);
      break;
    case ScheduleKind::Independent: throw StructuralError("run_one: independent runs are handled separately");
  }
  t.label = s.label();
  return t;
}

StageResult train(const ExperimentConfig& cfg, const fs::path& out) {
  const QuadraticFamily f = load_family(out);
  const TaskList tasks = f.task_list();
  const GroupPartition p = load_partition(out);
  if (p.num_tasks() != static_cast<int>(tasks.size())) throw StructuralError("partition.json does not match family.json");
  const HeterogeneityEstimate est = estimate_group_constants(tasks, p, default_probe_points(f, cfg.num_probe_points));
  StageResult res;
  const std::uint64_t h = cfg.hash();
  for (std::uint64_t seed : cfg.seeds) {
    const Provenance prov{h, seed};
    const ParamVector theta0 = training_init(f, cfg.init_offset, seed);
    const SeededRng rng = SeededRng(seed, 0).substream(1);
    std::vector<RunTrace> traces;
    for (const auto& s : cfg.schedules) {
      if (s.kind == ScheduleKind::Independent) {
        for (auto& t : run_independent(tasks, theta0, cfg.lr, cfg.budget, rng, cfg.run)) traces.push_back(std::move(t));
      } else {
        traces.push_back(run_one(s, tasks, p, est, theta0, cfg, rng));
      }
    }
    for (const auto& t : traces) {
      const fs::path stem = out / "traces" / trace_stem(t.label, seed);
      write_file(stem.string() + ".csv", trace_csv(t, prov));
      write_json(stem.string() + ".json", to_json(t, prov));
      res.written.push_back(stem.string() + ".csv");
      if (t.diverged) res.warnings.push_back("trace " + t.label + " (seed " + std::to_string(seed) + ") diverged");
    }
  }
  return res;
}

StageResult compare(const ExperimentConfig& cfg, const fs::path& out, const Provenance& prov) {
  const GroupPartition p = load_partition(out);
  const std::vector<int> first_group = p.members(p.order().front());
  std::vector<std::vector<RunTrace>> runs;
  for (std::uint64_t seed : cfg.seeds) runs.push_back(load_seed_traces(cfg, out, seed));
  json j = json::object();
  j["budget"] = cfg.budget;
  j["seeds"] = cfg.seeds;
  if (runs.front().empty()) {
    j["note"] = "no ranked schedules configured";
  } else {
    const MultiSeedRanking r = compare_convergence(runs, cfg.budget);
    j["ranking"] = to_json(r);
    json per = json::object();
    for (std::size_t k = 0; k < r.labels.size(); ++k) {
      std::vector<double> final_loss, forgetting;
      for (const auto& seed_runs : runs) {
        final_loss.push_back(seed_runs[k].rounds.back().loss);
        forgetting.push_back(max_loss_increase_after_switch(seed_runs[k], first_group));
      }
      per[r.labels[k]] = {{"median_final_loss", median(final_loss)}, {"median_forgetting", median(forgetting)}};
    }
    j["schedules"] = per;
  }
  update_report(out, "comparison", j, prov);
  return {{out / "report.json"}, {}};
}

StageResult verify(const ExperimentConfig& cfg, const fs::path& out, const Provenance& prov) {
  const QuadraticFamily f = load_family(out);
  const GroupPartition p = load_partition(out);
  const json v = verify_family(f, p, cfg.verify, cfg.num_probe_points);
  update_report(out, "verification", v, prov);
  if (!v.at("passed").get<bool>()) {
    throw VerificationFailure("verification failed; see report.json");
  }
  return {{out / "report.json"}, {}};
}

StageResult plot(const ExperimentConfig& cfg, const fs::path& out) {
  const GroupPartition p = load_partition(out);
  const std::vector<int> first_group = p.members(p.order().front());
  StageResult res;
  const std::uint64_t h = cfg.hash();
  for (std::uint64_t seed : cfg.seeds) {
    const auto r = emit_plots(load_seed_traces(cfg, out, seed), first_group, out / "plots", {h, seed},
                              "_seed" + std::to_string(seed));
    res.written.insert(res.written.end(), r.written.begin(), r.written.end());
    res.warnings.insert(res.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  return res;
}

}  // namespace

StageResult run_stage(Stage stage, const ExperimentConfig& cfg, const fs::path& out) {
  const Provenance prov{cfg.hash(), cfg.recipe.seed};
  switch (stage) {
    case Stage::GenTasks: return gen_tasks(cfg, out, prov);
    case Stage::Probe: return probe(cfg, out, prov);
    case Stage::Cluster: return cluster(cfg, out, prov);
    case Stage::Train: return train(cfg, out);
    case Stage::Compare: return compare(cfg, out, prov);
    case Stage::Verify: return verify(cfg, out, prov);
    case Stage::Plot: return plot(cfg, out);
  }
  return {};
}

StageResult run_pipeline(const ExperimentConfig& cfg, const fs::path& out, std::optional<Stage> only) {
  json c = cfg.to_json();
  c["provenance"] = Provenance{cfg.hash(), cfg.recipe.seed}.to_json();
  write_json(out / "config.json", c);
  StageResult all{{out / "config.json"}, {}};
  for (Stage s : all_stages()) {
    if (only && *only != s) continue;
    auto r = run_stage(s, cfg, out);
    all.written.insert(all.written.end(), r.written.begin(), r.written.end());
    all.warnings.insert(all.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  return all;
}

// --- plots -----------------------------------------------------------------

StageResult emit_plots(const std::vector<RunTrace>& traces, const std::vector<int>& tracked_group, const fs::path& dir,
                       const Provenance& prov, const std::string& suffix) {
  StageResult res;
  std::vector<Series> c_series, loss_series;
  std::string c_csv = prov.csv_comment() + "schedule,grads_consumed,c_of_r\n";
  std::string loss_csv = prov.csv_comment() + "schedule,grads_consumed,group_loss\n";
  for (const auto& t : traces) {
    if (t.rounds.empty()) {
      res.warnings.push_back("trace '" + t.label + "' is empty; skipped");
      continue;
    }
    Series c{t.label, {}, {}}, l{t.label, {}, {}};
    const auto curve = group_loss_curve(t, tracked_group);
    for (std::size_t i = 0; i < t.rounds.size(); ++i) {
      const auto g = static_cast<double>(t.rounds[i].grads_consumed);
      c.xs.push_back(g);
      c.ys.push_back(t.rounds[i].c_of_r);
      l.xs.push_back(g);
      l.ys.push_back(curve[i]);
      c_csv += t.label + "," + std::to_string(t.rounds[i].grads_consumed) + "," + format_double(t.rounds[i].c_of_r) + "\n";
      loss_csv += t.label + "," + std::to_string(t.rounds[i].grads_consumed) + "," + format_double(curve[i]) + "\n";
    }
    c_series.push_back(std::move(c));
    loss_series.push_back(std::move(l));
  }
  if (c_series.empty()) return res;
  const std::string comment = "gst config_hash=" + hex64(prov.config_hash) + " seed=" + std::to_string(prov.seed);
  const fs::path c_path = dir / ("c_of_r" + suffix + ".svg");
  const fs::path l_path = dir / ("group_loss" + suffix + ".svg");
  write_file(c_path, svg_line_chart(c_series, {"C(R): running min of squared full-gradient norm", "gradients consumed",
                                               "C(R)", true, comment}));
  write_file(l_path, svg_line_chart(loss_series, {"Loss of the first-trained group", "gradients consumed",
                                                  "mean group loss", false, comment}));
  write_file(dir / ("c_of_r" + suffix + ".csv"), c_csv);
  write_file(dir / ("group_loss" + suffix + ".csv"), loss_csv);
  res.written = {c_path, l_path, dir / ("c_of_r" + suffix + ".csv"), dir / ("group_loss" + suffix + ".csv")};
  return res;
}

// --- verification ----------------------------------------------------------

json verify_family(const QuadraticFamily& f, const GroupPartition& p, const VerifyFlags& flags, int num_probe_points) {
  const TaskList tasks = f.task_list();
  if (p.num_tasks() != static_cast<int>(tasks.size())) throw StructuralError("verify: partition does not match family");
  const auto probes = default_probe_points(f, num_probe_points);
  const auto m = static_cast<double>(tasks.size());
  json out = json::object();
  bool passed = true;

  if (flags.decomposition) {
    double worst = 0.0;
    for (const auto& theta : probes) {
      const auto r = decompose_variance(tasks, p, theta);
      worst = std::max(worst, std::abs(r.residual) / std::max(1.0, r.global_variance));
    }
    const bool ok = worst <= 1e-10;
    out["decomposition"] = {{"max_relative_residual", worst}, {"tolerance", 1e-10}, {"points", probes.size()}, {"passed", ok}};
    passed = passed && ok;
  }

  if (flags.sum_identity) {
    if (tasks.size() < 2) {
      out["sum_identity"] = {{"skipped", "needs at least two tasks"}, {"passed", true}};
    } else {
      double worst_ordered = 0.0, worst_unordered = 0.0;
      for (const auto& theta : probes) {
        const auto s = sum_identity_check(tasks, theta);
        const double denom = std::max(s.rhs * 2.0 * m, 1e-300);
        worst_ordered = std::max(worst_ordered, std::abs(s.lhs_ordered - 2.0 * m * s.rhs) / denom);
        worst_unordered = std::max(worst_unordered, std::abs(s.lhs_unordered - m * s.rhs) / denom);
      }
      const bool ok = worst_ordered <= 1e-10 && worst_unordered <= 1e-10;
      out["sum_identity"] = {
          {"ordered_pairs_constant", "2M"},
          {"unordered_pairs_constant", "M"},
          {"max_relative_error_ordered", worst_ordered},
          {"max_relative_error_unordered", worst_unordered},
          {"note", "sum over ordered pairs (m, n) equals 2M sum_m ||g_m - g||^2; the factor M holds only for unordered pairs m < n"},
          {"passed", ok}};
      passed = passed && ok;
    }
  }

  const HeterogeneityEstimate est = estimate_group_constants(tasks, p, probes);
  out["estimate"] = to_json(est);

  if (flags.group_bounds) {
    const GroupBoundReport r = check_group_bounds(est, p);
    json j = to_json(r);
    // Fitted constants are chosen per objective and need not dominate
    // component-wise; only the pointwise inequality is a hard check.
    j["fitted_constants_hold"] = r.holds();
    const double factor = m / (p.num_groups() * static_cast<double>(p.min_group_size()));
    double worst_ratio = 0.0;
    bool ok = true;
    for (const auto& theta : probes) {
      std::vector<Eigen::VectorXd> g;
      Eigen::VectorXd gbar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.recipe.dim));
      for (const auto& t : tasks) {
        g.push_back(t->grad(theta).values());
        gbar += g.back() / m;
      }
      double global = 0.0, inter = 0.0;
      for (const auto& v : g) global += (v - gbar).squaredNorm() / m;
      for (const auto& members : p.groups()) {
        Eigen::VectorXd gk = Eigen::VectorXd::Zero(gbar.size());
        for (int i : members) gk += g[static_cast<std::size_t>(i)];
        gk /= static_cast<double>(members.size());
        inter += (gk - gbar).squaredNorm() / p.num_groups();
      }
      if (global > 0) worst_ratio = std::max(worst_ratio, inter / (factor * global));
      if (inter > factor * global * (1 + 1e-10) + 1e-300) ok = false;
    }
    j["pointwise_max_ratio"] = worst_ratio;
    j["passed"] = ok;
    out["group_bounds"] = j;
    passed = passed && ok;
  }

  if (flags.variance) {
    json groups = json::array();
    bool ok = true;
    const SeededRng rng = SeededRng(f.recipe.seed, 0).substream(9);
    for (int k = 0; k < p.num_groups(); ++k) {
      const auto members = p.members(k);
      json g = {{"group", k}};
      try {
        const auto v = check_variance_bound(tasks, members, probes.front(), flags.variance_draws,
                                            rng.substream(static_cast<std::uint64_t>(k)),
                                            est.per_group[static_cast<std::size_t>(k)]);
        g.update(to_json(v));
        g["passed"] = true;
      } catch (const NumericError& e) {
        g["passed"] = false;
        g["error"] = e.what();
        ok = false;
      }
      groups.push_back(g);
    }
    out["variance"] = {{"groups", groups}, {"passed", ok}};
    passed = passed && ok;
  }
  out["passed"] = passed;
  return out;
}

}  // namespace gst
