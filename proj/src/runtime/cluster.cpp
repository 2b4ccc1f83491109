#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>

#include "brace/ir.hpp"
#include "brace/runtime.hpp"

namespace brace::runtime {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct ReplicaMsg {
  AgentRecord agent;
  int owner = 0;
  std::uint64_t hash = 0;
};

bool plain_agent_refs(const dsl::Expr &e) {
  if (e.type == dsl::Type::Agent && e.kind != dsl::ExprKind::This &&
      !(e.kind == dsl::ExprKind::Name && (e.ref == dsl::RefKind::LoopVar || e.ref == dsl::RefKind::This))) {
    return false;
  }
  for (const auto &a : e.args) {
    if (!plain_agent_refs(a)) return false;
  }
  return true;
}

bool plain_agent_refs(const std::vector<dsl::Stmt> &body) {
  for (const auto &s : body) {
    if (s.kind == dsl::StmtKind::Const && s.decl_type == dsl::ValueType::Agent) return false;
    if ((s.kind == dsl::StmtKind::RemoteEffect || s.has_target) && !plain_agent_refs(s.target)) return false;
    if (!plain_agent_refs(s.value) || !plain_agent_refs(s.body) || !plain_agent_refs(s.else_body)) return false;
  }
  return true;
}

void count_loops(const std::vector<dsl::Stmt> &body, int &loops) {
  for (const auto &s : body) {
    if (s.kind == dsl::StmtKind::Foreach) ++loops;
    count_loops(s.body, loops);
    count_loops(s.else_body, loops);
  }
}

// Relative box holding every neighbour any loop can act on, or the full
// visibility box when agents are reached other than through loop variables.
std::vector<AxisRange> read_region(const CheckedScript &script, const std::vector<AxisRange> &axes,
                                   const std::vector<ProbeHint> &hints, const spatial::HyperRect &world) {
  if (!plain_agent_refs(script.ast.run_body)) return axes;
  int loops = 0;
  count_loops(script.ast.run_body, loops);
  std::vector<AxisRange> out = axes;
  for (auto &r : out) r.lo = r.hi = 0.0;
  for (int l = 0; l < loops; ++l) {
    const ProbeHint *h = nullptr;
    for (const auto &p : hints) {
      if (p.loop == l && p.axes.size() == axes.size()) h = &p;
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
      double lo = axes[a].lo, hi = axes[a].hi;
      if (h) {
        const double span = std::max(std::fabs(world.axes[a].lo), std::fabs(world.axes[a].hi));
        const double slack = 1e-6 * (1.0 + span + std::fabs(h->axes[a].lo) + std::fabs(h->axes[a].hi));
        lo = std::max(lo, h->axes[a].lo - slack);
        hi = std::min(hi, h->axes[a].hi + slack);
      }
      out[a].lo = std::min(out[a].lo, lo);
      out[a].hi = std::max(out[a].hi, hi);
    }
  }
  return out;
}

}  // namespace

const char *pipeline_name(Pipeline p) { return p == Pipeline::OneReduce ? "one-reduce" : "two-reduce"; }

void WorkerStats::reset_counters() {
  effect_msgs = agent_msgs = migrations = handoffs = clamps = births = deaths = 0;
  query_seconds = update_seconds = 0.0;
}

Cluster::Cluster(const CheckedScript &script, ClusterConfig cfg, std::vector<AgentRecord> agents,
                 std::uint64_t tick, std::optional<std::vector<double>> cuts)
    : script_(script), cfg_(std::move(cfg)), kernel_(script_, cfg_.kernel), tick_(tick) {
  if (cfg_.workers < 1) throw ConfigError("at least one worker is required");
  const bool local = script_.locality == Locality::LocalOnly;
  pipeline_ = cfg_.pipeline.value_or(local ? Pipeline::OneReduce : Pipeline::TwoReduce);
  if (pipeline_ == Pipeline::OneReduce && !local) {
    throw ConfigError("the one-reduce pipeline needs a script with local effects only");
  }
  axes_ = visibility_axes(script_);
  const int dim = script_.dimension();
  if (dim > 2) throw ConfigError("only one or two spatial axes are supported");
  if (static_cast<int>(cfg_.world.bounds.size()) != dim) {
    throw ConfigError("world bounds must be given for each of the " + std::to_string(dim) + " spatial axes");
  }
  spatial::HyperRect world{cfg_.world.bounds};
  spatial::HyperRect offset;
  const auto region = read_region(script_, axes_, cfg_.kernel.probes, world);
  for (int a = 0; a < dim; ++a) {
    const double w = world.axes[a].hi - world.axes[a].lo;
    if (cfg_.kernel.visibility == VisibilityMode::Off) {
      offset.axes.push_back({-w, w});
    } else {
      offset.axes.push_back({region[a].lo, region[a].hi});
    }
  }
  std::vector<int> counts(dim, 1);
  if (dim > 0) counts[0] = cfg_.workers;
  grid_ = spatial::uniform_grid(world, counts, offset);
  if (cuts && dim > 0 && static_cast<int>(cuts->size()) == cfg_.workers - 1) grid_.cuts[0] = *cuts;

  workers_.resize(cfg_.workers);
  for (int w = 0; w < cfg_.workers; ++w) workers_[w].partition = w;
  const auto theta = ir::theta_vector(script_);
  for (auto &a : agents) a.e = theta;
  std::vector<std::vector<AgentRecord>> held(cfg_.workers);
  held[0] = std::move(agents);
  route(held);
  reset_counters();
}

std::size_t Cluster::population() const {
  std::size_t n = 0;
  for (const auto &w : workers_) n += w.owned.size();
  return n;
}

std::vector<AgentRecord> Cluster::gather() const {
  std::vector<AgentRecord> out;
  out.reserve(population());
  for (const auto &w : workers_) out.insert(out.end(), w.owned.begin(), w.owned.end());
  sort_by_oid(out);
  return out;
}

void Cluster::reset_counters() {
  for (auto &w : workers_) w.stats.reset_counters();
}

void Cluster::run_workers(const std::function<void(int)> &fn) {
  const int n = static_cast<int>(workers_.size());
  if (cfg_.scheduler == Scheduler::Sequential || n == 1) {
    for (int w = 0; w < n; ++w) fn(w);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (int w = 0; w < n; ++w) {
    try {
      fn(w);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  }
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Sends every agent held by worker w to its owner, and copies to the other
// partitions whose visible region contains it. Agents that stay put are
// handed over in memory.
void Cluster::route(std::vector<std::vector<AgentRecord>> &held) {
  const int n = static_cast<int>(workers_.size());
  std::vector<std::vector<std::vector<AgentRecord>>> moved(n, std::vector<std::vector<AgentRecord>>(n));
  std::vector<std::vector<std::vector<ReplicaMsg>>> copies(n, std::vector<std::vector<ReplicaMsg>>(n));

  run_workers([&](int w) {
    auto &st = workers_[w].stats;
    for (auto &a : held[w]) {
      double loc[8];
      for (int ax = 0; ax < grid_.dim(); ++ax) {
        const auto &b = grid_.world.axes[ax];
        const double v = a.s[axes_[ax].field];
        loc[ax] = v >= b.lo ? (v <= b.hi ? v : b.hi) : b.lo;
      }
      const std::span<const double> where(loc, grid_.dim());
      const int owner = grid_.dim() == 0 ? 0 : spatial::assign_partition(grid_, where);
      if (grid_.dim() > 0) {
        const std::uint64_t h = cfg_.debug_checks ? state_hash(a) : 0;
        for (int p : spatial::replication_targets(grid_, where)) {
          if (p == owner) continue;
          copies[w][p].push_back({AgentRecord{a.oid, a.s, {}}, owner, h});
          ++st.agent_msgs;
        }
      }
      if (owner != w) {
        ++st.migrations;
        ++st.agent_msgs;
      } else {
        ++st.handoffs;
      }
      moved[w][owner].push_back(std::move(a));
    }
    held[w].clear();
  });

  run_workers([&](int w) {
    auto &ws = workers_[w];
    ws.owned.clear();
    for (int src = 0; src < n; ++src) {
      auto &in = moved[src][w];
      std::move(in.begin(), in.end(), std::back_inserter(ws.owned));
    }
    sort_by_oid(ws.owned);
    std::vector<ReplicaMsg> reps;
    for (int src = 0; src < n; ++src) {
      auto &in = copies[src][w];
      std::move(in.begin(), in.end(), std::back_inserter(reps));
    }
    std::sort(reps.begin(), reps.end(), [](const ReplicaMsg &a, const ReplicaMsg &b) { return a.agent.oid < b.agent.oid; });
    ws.replicas.clear();
    ws.replica_owner.clear();
    ws.replica_hash.clear();
    for (auto &r : reps) {
      ws.replicas.push_back(std::move(r.agent));
      ws.replica_owner.push_back(r.owner);
      ws.replica_hash.push_back(r.hash);
    }
    ws.stats.owned = ws.owned.size();
    ws.stats.replicas = ws.replicas.size();

    ws.view.clear(static_cast<int>(script_.states.size()));
    for (const auto &a : ws.owned) ws.view.add(a.oid, a.s);
    for (const auto &a : ws.replicas) ws.view.add(a.oid, a.s);
    if (cfg_.kernel.use_index && !axes_.empty()) ws.view.build_index(axes_);
  });
}

void Cluster::tick() {
  const int n = static_cast<int>(workers_.size());
  const std::uint64_t t = tick_;
  const std::uint64_t seed = cfg_.seed;

  if (cfg_.debug_checks) {
    std::unordered_map<std::uint64_t, std::uint64_t> truth;
    for (const auto &w : workers_) {
      for (const auto &a : w.owned) truth.emplace(a.oid, state_hash(a));
    }
    for (const auto &w : workers_) {
      for (std::size_t i = 0; i < w.replicas.size(); ++i) {
        auto it = truth.find(w.replicas[i].oid);
        if (it == truth.end() || it->second != w.replica_hash[i] || state_hash(w.replicas[i]) != it->second) {
          ++replica_mismatches_;
        }
      }
    }
  }

  const auto theta = ir::theta_vector(script_);
  std::vector<std::vector<AgentRecord>> held(n);

  auto update_one = [&](WorkerState &ws, AgentRecord &&a, const std::vector<double> &e,
                        std::vector<AgentRecord> &next) {
    UpdateOutcome r = kernel_.update(a.oid, a.s, e, seed, t);
    for (std::size_t ax = 0; ax < script_.spatial_fields.size() && ax < cfg_.world.bounds.size(); ++ax) {
      if (apply_boundary(cfg_.world.policy, cfg_.world.bounds[ax], a.s[script_.spatial_fields[ax].state_index])) {
        ++ws.stats.clamps;
      }
    }
    a.e = theta;
    if (r.dies) {
      ++ws.stats.deaths;
      return;
    }
    if (r.spawns) {
      AgentRecord child = a;
      child.oid = spawned_oid(a.oid, t);
      for (const auto &[f, v] : r.overrides) child.s[f] = v;
      next.push_back(std::move(child));
      ++ws.stats.births;
    }
    next.push_back(std::move(a));
  };

  if (pipeline_ == Pipeline::OneReduce) {
    // Every contribution targets its author, so each agent folds and updates
    // in the map step without any exchange.
    run_workers([&](int w) {
      auto &ws = workers_[w];
      auto &next = held[w];
      next.reserve(ws.owned.size());
      const std::size_t ne = theta.size();
      std::vector<EffectMessage> out;
      std::vector<double> folded(ws.owned.size() * ne);
      std::vector<double> e;
      const auto t0 = Clock::now();
      for (std::uint32_t i = 0; i < ws.owned.size(); ++i) {
        out.clear();
        kernel_.query(ws.view, i, seed, t, out);
        e = theta;
        fold_local(script_, ws.owned[i].oid, out, e);
        std::copy(e.begin(), e.end(), folded.begin() + i * ne);
      }
      const auto t1 = Clock::now();
      for (std::uint32_t i = 0; i < ws.owned.size(); ++i) {
        e.assign(folded.begin() + i * ne, folded.begin() + (i + 1) * ne);
        update_one(ws, std::move(ws.owned[i]), e, next);
      }
      ws.owned.clear();
      ws.stats.query_seconds += std::chrono::duration<double>(t1 - t0).count();
      ws.stats.update_seconds += seconds_since(t1);
    });
  } else {
    // reduce (query): contributions of owned agents, split by the target's owner.
    std::vector<std::vector<std::vector<EffectMessage>>> sent(n, std::vector<std::vector<EffectMessage>>(n));
    run_workers([&](int w) {
      auto &ws = workers_[w];
      const auto t0 = Clock::now();
      std::vector<EffectMessage> out;
      for (std::uint32_t i = 0; i < ws.owned.size(); ++i) kernel_.query(ws.view, i, seed, t, out);
      const std::size_t owned = ws.owned.size();
      for (const auto &m : out) {
        const std::uint32_t idx = ws.view.by_oid.at(m.k);
        const int dst = idx < owned ? w : ws.replica_owner[idx - owned];
        if (dst != w) ++ws.stats.effect_msgs;
        sent[w][dst].push_back(m);
      }
      ws.stats.query_seconds += seconds_since(t0);
    });

    // reduce₂ (fold) and map (update, boundary, births and deaths).
    run_workers([&](int w) {
      auto &ws = workers_[w];
      const auto t0 = Clock::now();
      std::vector<EffectMessage> mine;
      for (int src = 0; src < n; ++src) {
        auto &in = sent[src][w];
        mine.insert(mine.end(), in.begin(), in.end());
      }
      std::unordered_map<std::uint64_t, std::uint32_t> index;
      index.reserve(ws.owned.size());
      for (std::uint32_t i = 0; i < ws.owned.size(); ++i) index.emplace(ws.owned[i].oid, i);
      std::vector<std::vector<double>> effects(ws.owned.size(), theta);
      fold_effects(script_, mine, index, effects);

      auto &next = held[w];
      next.reserve(ws.owned.size());
      for (std::uint32_t i = 0; i < ws.owned.size(); ++i) update_one(ws, std::move(ws.owned[i]), effects[i], next);
      ws.owned.clear();
      ws.stats.update_seconds += seconds_since(t0);
    });
  }

  route(held);
  tick_ = t + 1;
}

void Cluster::repartition(std::vector<double> cuts) {
  if (grid_.dim() == 0) return;
  grid_.cuts[0] = std::move(cuts);
  std::vector<std::vector<AgentRecord>> held(workers_.size());
  for (std::size_t w = 0; w < workers_.size(); ++w) held[w] = std::move(workers_[w].owned);
  route(held);
}

std::vector<std::size_t> Cluster::histogram(int buckets) const {
  std::vector<double> xs;
  if (grid_.dim() == 0) return std::vector<std::size_t>(buckets, 0);
  for (const auto &w : workers_) {
    for (const auto &a : w.owned) xs.push_back(a.s[axes_[0].field]);
  }
  return spatial::histogram(xs, grid_.world.axes[0], buckets);
}

std::optional<std::vector<double>> rebalance(std::span<const std::size_t> owned,
                                             std::span<const std::size_t> histogram,
                                             const dsl::Interval &axis0, double threshold) {
  if (owned.size() <= 1) return std::nullopt;
  std::size_t total = 0, most = 0;
  for (auto c : owned) {
    total += c;
    most = std::max(most, c);
  }
  if (total == 0) return std::nullopt;
  const double mean = static_cast<double>(total) / static_cast<double>(owned.size());
  if (static_cast<double>(most) / mean <= threshold) return std::nullopt;
  return spatial::quantile_cuts(histogram, axis0, static_cast<int>(owned.size()));
}

std::vector<EpochMetrics> run_epochs(Cluster &cluster, const EpochConfig &cfg, int n_epochs,
                                     const EpochHooks &hooks) {
  std::vector<EpochMetrics> rows;
  for (int epoch = 1; epoch <= n_epochs; ++epoch) {
    cluster.reset_counters();
    const auto t0 = Clock::now();
    double agent_ticks = 0.0;
    for (int i = 0; i < cfg.ticks_per_epoch; ++i) {
      agent_ticks += static_cast<double>(cluster.population());
      cluster.tick();
      if (hooks.on_tick) hooks.on_tick(cluster);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.tick = cluster.current_tick();
    m.wall_seconds = seconds_since(t0);
    m.agent_ticks_per_sec = m.wall_seconds > 0 ? agent_ticks / m.wall_seconds : 0.0;

    if (cfg.rebalance && cluster.partitioning().dim() > 0) {
      std::vector<std::size_t> owned;
      for (const auto &w : cluster.workers()) owned.push_back(w.owned.size());
      const auto hist = cluster.histogram();
      if (auto cuts = rebalance(owned, hist, cluster.partitioning().world.axes[0], cfg.imbalance_threshold)) {
        cluster.repartition(std::move(*cuts));
        m.rebalanced = true;
      }
    }
    for (const auto &w : cluster.workers()) m.workers.push_back(w.stats);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(cluster, epoch);
    }
    if (hooks.on_epoch) hooks.on_epoch(m, cluster);
    rows.push_back(std::move(m));
  }
  return rows;
}

}  // namespace brace::runtime
