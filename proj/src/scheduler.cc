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

#include "gst/scheduler.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gst {

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Parallel: return "parallel";
    case ScheduleKind::Sequential: return "sequential";
    case ScheduleKind::StrictCycleGST: return "gst-strict";
    case ScheduleKind::ProgressiveGST: return "gst-progressive";
    case ScheduleKind::ReverseProgressiveGST: return "gst-reverse";
    case ScheduleKind::Independent: return "independent";
  }
  return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  for (auto k : {ScheduleKind::Parallel, ScheduleKind::Sequential, ScheduleKind::StrictCycleGST,
                 ScheduleKind::ProgressiveGST, ScheduleKind::ReverseProgressiveGST, ScheduleKind::Independent}) {
    if (to_string(k) == s) return k;
  }
  throw StructuralError("unknown schedule kind '" + s + "'");
}

double LrSchedule::at(long consumed, long budget) const {
  if (shape == Shape::Constant || budget <= 0) return base_lr;
  const double frac = static_cast<double>(consumed) / static_cast<double>(budget);
  const double w = std::clamp(warmup_fraction, 0.0, 1.0);
  if (frac < w) return base_lr * (static_cast<double>(consumed) + 1.0) / (w * static_cast<double>(budget) + 1.0);
  if (w >= 1.0) return base_lr;
  const double t = std::clamp((frac - w) / (1.0 - w), 0.0, 1.0);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

namespace {

struct PlanSegment {
  std::vector<int> pool;
  int group = -1;
  long grads = 0;
};

class Runner {
 public:
  Runner(std::span<const TaskPtr> tasks, const ParamVector& theta0, const LrSchedule& lr, long budget,
         SeededRng rng, const RunOptions& opts)
      : tasks_(tasks), theta_(theta0.values()), last_finite_(theta0.values()), lr_(lr), budget_(budget), rng_(std::move(rng)), opts_(opts) {
    if (tasks.empty()) throw StructuralError("scheduler: no tasks");
    if (budget < 0) throw StructuralError("scheduler: negative budget");
    if (!(lr.base_lr > 0)) throw StructuralError("scheduler: learning rate must be > 0");
    require_dim(tasks, theta0.dim());
    interval_ = opts.log_interval > 0 ? opts.log_interval : std::max<long>(1, budget / 200);
    next_log_ = interval_;
  }

  RunTrace run(std::vector<PlanSegment> plan, ScheduleKind kind, std::string label) {
    trace_.kind = kind;
    trace_.label = std::move(label);
    trace_.seed = rng_.seed();
    trace_.budget = budget_;

    // Adjacent segments on the same pool are one continuous stretch of SGD.
    std::vector<PlanSegment> merged;
    for (auto& s : plan) {
      if (s.grads <= 0) continue;
      if (!merged.empty() && merged.back().pool == s.pool) {
        merged.back().grads += s.grads;
      } else {
        merged.push_back(std::move(s));
      }
    }
    long total = 0;
    for (const auto& s : merged) total += s.grads;
    if (total != budget_) throw StructuralError("scheduler: segment budgets do not sum to the total budget");

    record();
    for (const auto& seg : merged) {
      if (trace_.diverged) break;
      TraceSegment ts{seg.pool, seg.group, consumed_, consumed_};
      run_segment(seg);
      ts.end_grads = consumed_;
      trace_.segments.push_back(std::move(ts));
      if (!trace_.diverged && !trace_.rounds.empty() && trace_.rounds.back().grads_consumed < consumed_) record();
    }
    trace_.final_theta = ParamVector(last_finite_);
    return std::move(trace_);
  }

 private:
  void run_segment(const PlanSegment& seg) {
    const long end = consumed_ + seg.grads;
    const auto d = theta_.size();
    const auto pool_size = static_cast<long>(seg.pool.size());
    while (consumed_ < end) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
      long cost = 1;
      const ParamVector at(theta_);
      if (!opts_.batch_mode) {
        const int m = pool_size == 1 ? seg.pool[0]
                                     : seg.pool[static_cast<std::size_t>(rng_.uniform_index(static_cast<std::uint64_t>(pool_size)))];
        g = tasks_[static_cast<std::size_t>(m)]->stoch_grad(at, rng_).values();
      } else if (end - consumed_ >= pool_size) {
        for (int m : seg.pool) g += tasks_[static_cast<std::size_t>(m)]->stoch_grad(at, rng_).values();
        cost = pool_size;
        g /= static_cast<double>(cost);
      } else {
        // Partial batch: a random subset sized to the remaining allotment.
        std::vector<int> pool = seg.pool;
        cost = end - consumed_;
        for (long i = 0; i < cost; ++i) {
          const auto j = i + static_cast<long>(rng_.uniform_index(static_cast<std::uint64_t>(pool_size - i)));
          std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
          g += tasks_[static_cast<std::size_t>(pool[static_cast<std::size_t>(i)])]->stoch_grad(at, rng_).values();
        }
        g /= static_cast<double>(cost);
      }
      theta_ -= lr_.at(consumed_, budget_) * g;
      consumed_ += cost;
      ++step_;
      if (!theta_.allFinite()) {
        trace_.diverged = true;
        return;
      }
      if (consumed_ >= next_log_) {
        while (next_log_ <= consumed_) next_log_ += interval_;
        record();
        if (trace_.diverged) return;
      }
    }
  }

  void record() {
    const ParamVector at(theta_);
    TraceRound r;
    r.step = step_;
    r.grads_consumed = consumed_;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta_.size());
    for (const auto& t : tasks_) {
      const double l = t->eval(at);
      r.per_task_loss.push_back(l);
      r.loss += l;
      grad += t->grad(at).values();
    }
    const auto m = static_cast<double>(tasks_.size());
    r.loss /= m;
    grad /= m;
    if (!std::isfinite(r.loss) || r.loss > opts_.divergence_loss || !grad.allFinite()) {
      trace_.diverged = true;
      return;
    }
    r.grad_norm_sq = grad.squaredNorm();
    r.c_of_r = trace_.rounds.empty() ? r.grad_norm_sq : std::min(trace_.rounds.back().c_of_r, r.grad_norm_sq);
    r.theta_hash = hash_vector(theta_);
    trace_.rounds.push_back(std::move(r));
    if (opts_.keep_snapshots) trace_.snapshots.push_back(at);
    last_finite_ = theta_;
  }

  std::span<const TaskPtr> tasks_;
  Eigen::VectorXd theta_;
  Eigen::VectorXd last_finite_;
  LrSchedule lr_;
  long budget_;
  SeededRng rng_;
  RunOptions opts_;
  long interval_ = 1;
  long next_log_ = 1;
  long consumed_ = 0;
  long step_ = 0;
  RunTrace trace_;
};

std::vector<int> all_tasks(std::size_t m) {
  std::vector<int> v(m);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::vector<long> split_even(long budget, long parts) {
  std::vector<long> out(static_cast<std::size_t>(parts), budget / parts);
  for (long i = 0; i < budget % parts; ++i) ++out[static_cast<std::size_t>(i)];
  return out;
}

void check_partition(std::span<const TaskPtr> tasks, const GroupPartition& p) {
  if (p.num_tasks() != static_cast<int>(tasks.size())) {
    throw StructuralError("run_gst: partition covers " + std::to_string(p.num_tasks()) + " tasks, family has " +
                          std::to_string(tasks.size()));
  }
}

}  // namespace

RunTrace run_parallel(std::span<const TaskPtr> tasks, const ParamVector& theta0, const LrSchedule& lr, long budget,
                      const SeededRng& rng, const RunOptions& opts) {
  Runner runner(tasks, theta0, lr, budget, rng, opts);
  return runner.run({{all_tasks(tasks.size()), -1, budget}}, ScheduleKind::Parallel, "parallel");
}

RunTrace run_sequential(std::span<const TaskPtr> tasks, const ParamVector& theta0, const LrSchedule& lr, long budget,
                        std::span<const int> order, const SeededRng& rng, const RunOptions& opts, int passes) {
  std::vector<int> sorted(order.begin(), order.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted != all_tasks(tasks.size())) throw StructuralError("run_sequential: order is not a permutation of the tasks");
  if (passes < 1) throw StructuralError("run_sequential: passes must be >= 1");
  Runner runner(tasks, theta0, lr, budget, rng, opts);
  const auto shares = split_even(budget, static_cast<long>(order.size()) * passes);
  std::vector<PlanSegment> plan;
  std::size_t i = 0;
  for (int pass = 0; pass < passes; ++pass) {
    for (int m : order) plan.push_back({{m}, m, shares[i++]});
  }
  return runner.run(std::move(plan), ScheduleKind::Sequential, "sequential");
}

RunTrace run_gst(std::span<const TaskPtr> tasks, const GroupPartition& p, const ParamVector& theta0,
                 const LrSchedule& lr, long budget, GstMode mode, const SeededRng& rng, const RunOptions& opts,
                 const GstOptions& gst) {
  check_partition(tasks, p);
  const GroupPartition part = mode == GstMode::Reverse ? p.reversed() : p;
  const auto groups = part.groups();
  const auto& order = part.order();
  const int k_count = part.num_groups();
  Runner runner(tasks, theta0, lr, budget, rng, opts);
  std::vector<PlanSegment> plan;

  if (mode == GstMode::StrictCycle) {
    if (gst.num_cycles < 1) throw StructuralError("run_gst: num_cycles must be >= 1");
    const long interval = gst.interval > 0 ? gst.interval : std::max<long>(1, budget / (static_cast<long>(k_count) * gst.num_cycles));
    long remaining = budget;
    for (std::size_t i = 0; remaining > 0; ++i) {
      const int g = order[i % order.size()];
      const long n = std::min(interval, remaining);
      plan.push_back({groups[static_cast<std::size_t>(g)], g, n});
      remaining -= n;
    }
    return runner.run(std::move(plan), ScheduleKind::StrictCycleGST, "gst-strict");
  }

  // Stage k trains on the union of the first k groups; its share of the
  // budget is proportional to the size of that union.
  std::vector<long> weights;
  long cum = 0;
  for (int g : order) {
    cum += static_cast<long>(groups[static_cast<std::size_t>(g)].size());
    weights.push_back(cum);
  }
  const long wsum = std::accumulate(weights.begin(), weights.end(), 0L);
  std::vector<int> pool;
  long assigned = 0;
  for (int s = 0; s < k_count; ++s) {
    const int g = order[static_cast<std::size_t>(s)];
    const auto& members = groups[static_cast<std::size_t>(g)];
    pool.insert(pool.end(), members.begin(), members.end());
    std::sort(pool.begin(), pool.end());
    long n = s + 1 == k_count ? budget - assigned
                              : static_cast<long>(static_cast<double>(budget) * static_cast<double>(weights[static_cast<std::size_t>(s)]) /
                                                  static_cast<double>(wsum));
    assigned += n;
    plan.push_back({pool, g, n});
  }
  const bool reverse = mode == GstMode::Reverse;
  return runner.run(std::move(plan), reverse ? ScheduleKind::ReverseProgressiveGST : ScheduleKind::ProgressiveGST,
                    reverse ? "gst-reverse" : "gst-progressive");
}

GroupPartition stability_first_order(const GroupPartition& p, const HeterogeneityEstimate& est) {
  if (static_cast<int>(est.per_group.size()) != p.num_groups()) {
    throw StructuralError("stability_first_order: estimate has " + std::to_string(est.per_group.size()) +
                          " groups, partition has " + std::to_string(p.num_groups()));
  }
  std::vector<int> order(static_cast<std::size_t>(p.num_groups()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = est.per_group[static_cast<std::size_t>(a)];
    const auto& cb = est.per_group[static_cast<std::size_t>(b)];
    if (ca.zeta_sq != cb.zeta_sq) return ca.zeta_sq < cb.zeta_sq;
    return ca.beta_sq.value_or(0.0) < cb.beta_sq.value_or(0.0);
  });
  return p.with_order(std::move(order));
}

std::vector<RunTrace> run_independent(std::span<const TaskPtr> tasks, const ParamVector& theta0, const LrSchedule& lr,
                                      long budget, const SeededRng& rng, const RunOptions& opts) {
  if (tasks.empty()) throw StructuralError("run_independent: no tasks");
  const auto shares = split_even(budget, static_cast<long>(tasks.size()));
  std::vector<RunTrace> out;
  for (std::size_t m = 0; m < tasks.size(); ++m) {
    const TaskList single{tasks[m]};
    Runner runner(single, theta0, lr, shares[m], rng.substream(static_cast<std::uint64_t>(m)), opts);
    out.push_back(runner.run({{{0}, static_cast<int>(m), shares[m]}}, ScheduleKind::Independent,
                             "independent-" + std::to_string(m)));
  }
  return out;
}

double c_at_budget(const RunTrace& t, long grads) {
  if (t.rounds.empty() || t.grads_consumed() < grads) {
    throw StructuralError("compare_convergence: trace '" + t.label + "' ends at " + std::to_string(t.grads_consumed()) +
                          " gradients, before the comparison budget " + std::to_string(grads));
  }
  const auto it = std::lower_bound(t.rounds.begin(), t.rounds.end(), grads,
                                   [](const TraceRound& r, long g) { return r.grads_consumed < g; });
  if (it->grads_consumed == grads || it == t.rounds.begin()) return it->c_of_r;
  const auto prev = std::prev(it);
  const double w = static_cast<double>(grads - prev->grads_consumed) /
                   static_cast<double>(it->grads_consumed - prev->grads_consumed);
  return prev->c_of_r + w * (it->c_of_r - prev->c_of_r);
}

Ranking compare_convergence(std::span<const RunTrace> traces, long at_budget) {
  if (traces.empty()) throw StructuralError("compare_convergence: no traces");
  Ranking r;
  for (const auto& t : traces) {
    r.labels.push_back(t.label);
    r.c_at_budget.push_back(c_at_budget(t, at_budget));
  }
  for (double c : r.c_at_budget) {
    r.ranks.push_back(1 + static_cast<int>(std::count_if(r.c_at_budget.begin(), r.c_at_budget.end(),
                                                         [c](double o) { return o < c; })));
  }
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) throw StructuralError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MultiSeedRanking compare_convergence(const std::vector<std::vector<RunTrace>>& runs, long at_budget) {
  if (runs.empty()) throw StructuralError("compare_convergence: no seeds");
  MultiSeedRanking out;
  for (const auto& t : runs.front()) out.labels.push_back(t.label);
  for (const auto& seed_runs : runs) {
    if (seed_runs.size() != out.labels.size()) throw StructuralError("compare_convergence: schedule count differs across seeds");
    const Ranking r = compare_convergence(seed_runs, at_budget);
    if (r.labels != out.labels) throw StructuralError("compare_convergence: schedule order differs across seeds");
    out.per_seed_ranks.push_back(r.ranks);
    out.per_seed_c.push_back(r.c_at_budget);
  }
  for (std::size_t j = 0; j < out.labels.size(); ++j) {
    std::vector<double> ranks, cs;
    for (std::size_t s = 0; s < runs.size(); ++s) {
      ranks.push_back(out.per_seed_ranks[s][j]);
      cs.push_back(out.per_seed_c[s][j]);
    }
    out.median_rank.push_back(median(ranks));
    out.median_c.push_back(median(cs));
  }
  return out;
}

std::vector<double> group_loss_curve(const RunTrace& t, std::span<const int> members) {
  if (members.empty()) throw StructuralError("group_loss_curve: empty group");
  std::vector<double> out;
  for (const auto& r : t.rounds) {
    double s = 0.0;
    for (int m : members) s += r.per_task_loss.at(static_cast<std::size_t>(m));
    out.push_back(s / static_cast<double>(members.size()));
  }
  return out;
}

double max_loss_increase_after_switch(const RunTrace& t, std::span<const int> members) {
  const auto curve = group_loss_curve(t, members);
  double worst = 0.0;
  for (std::size_t i = 1; i < t.segments.size(); ++i) {
    const auto& seg = t.segments[i];
    std::size_t r = 0;
    while (r < t.rounds.size() && t.rounds[r].grads_consumed < seg.start_grads) ++r;
    if (r == t.rounds.size()) break;
    const double base = curve[r];
    for (std::size_t j = r + 1; j < t.rounds.size() && t.rounds[j].grads_consumed <= seg.end_grads; ++j) {
      worst = std::max(worst, curve[j] - base);
    }
  }
  return worst;
}

}  // namespace gst
