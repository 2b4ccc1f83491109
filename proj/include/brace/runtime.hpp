#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "brace/agents.hpp"
#include "brace/sema.hpp"
#include "brace/spatial.hpp"

namespace brace::runtime {

/// ⟨k, e, v⟩ with k the target oid.
struct EffectMessage {
  std::uint64_t k = 0;
  std::uint32_t e = 0;
  double v = 0.0;
};

/// The agents one worker can read during a query: owned first, then replicas.
struct AgentView {
  int stride = 0;
  std::vector<std::uint64_t> oids;
  std::vector<double> states;  // stride values per agent
  std::unordered_map<std::uint64_t, std::uint32_t> by_oid;
  spatial::KdIndex index;
  bool indexed = false;

  std::size_t size() const { return oids.size(); }
  const double *state(std::uint32_t i) const { return states.data() + static_cast<std::size_t>(i) * stride; }

  void clear(int state_count);
  void add(std::uint64_t oid, const std::vector<double> &s);
  void build_index(std::span<const AxisRange> axes);
};

/// Narrower probe for one foreach loop, relative to the acting agent. The
/// loop body must do nothing for neighbours outside it.
struct ProbeHint {
  int loop = 0;  // foreach statements numbered in source order
  std::vector<dsl::Interval> axes;
};

struct KernelOptions {
  VisibilityMode visibility = VisibilityMode::Restricted;
  bool use_index = true;
  std::vector<ProbeHint> probes;
};

struct UpdateOutcome {
  bool dies = false;
  bool spawns = false;
  std::vector<std::pair<int, double>> overrides;  // child fields that differ from the parent
};

/// The checked script flattened into a compact form for the workers.
class Kernel {
public:
  Kernel(const CheckedScript &script, KernelOptions opts = {});
  ~Kernel();
  Kernel(Kernel &&) noexcept;
  Kernel &operator=(Kernel &&) noexcept;

  const CheckedScript &script() const;
  const KernelOptions &options() const;

  /// Runs the query for agent `self` of the view; appends its effect contributions.
  void query(const AgentView &view, std::uint32_t self, std::uint64_t seed, std::uint64_t tick,
             std::vector<EffectMessage> &out) const;

  /// Update phase for one agent with folded effects: rewrites `s` in place.
  UpdateOutcome update(std::uint64_t oid, std::vector<double> &s, const std::vector<double> &e,
                       std::uint64_t seed, std::uint64_t tick) const;

  struct Impl;

private:
  std::unique_ptr<Impl> impl_;
};

/// Folds contributions per target and ρ in canonical order; `effects` is
/// indexed like `oids` and starts at θ.
void fold_effects(const CheckedScript &script, std::vector<EffectMessage> &contributions,
                  const std::unordered_map<std::uint64_t, std::uint32_t> &owner_index,
                  std::vector<std::vector<double>> &effects);

/// Folds one agent's own contributions into `effects` (θ on entry); throws
/// ConfigError if any of them targets another agent.
void fold_local(const CheckedScript &script, std::uint64_t oid, std::vector<EffectMessage> &contributions,
                std::vector<double> &effects);

enum class Pipeline { OneReduce, TwoReduce };
enum class Scheduler { Parallel, Sequential };

const char *pipeline_name(Pipeline p);

struct WorkerStats {
  std::size_t owned = 0;
  std::size_t replicas = 0;
  std::uint64_t effect_msgs = 0;     // contributions sent to another worker
  std::uint64_t agent_msgs = 0;      // serialized agents: replicas and migrations
  std::uint64_t migrations = 0;
  std::uint64_t handoffs = 0;        // owner unchanged, moved in memory
  std::uint64_t clamps = 0;
  std::uint64_t births = 0;
  std::uint64_t deaths = 0;
  double query_seconds = 0.0;
  double update_seconds = 0.0;

  void reset_counters();
};

struct WorkerState {
  int partition = 0;
  std::vector<AgentRecord> owned;  // sorted by oid
  std::vector<AgentRecord> replicas;
  std::vector<int> replica_owner;
  std::vector<std::uint64_t> replica_hash;
  AgentView view;
  WorkerStats stats;
};

struct ClusterConfig {
  int workers = 1;
  Scheduler scheduler = Scheduler::Parallel;
  std::optional<Pipeline> pipeline;  // default follows the script's locality
  KernelOptions kernel;
  WorldSpec world;
  std::uint64_t seed = 1;
  bool debug_checks = false;
};

class Cluster {
public:
  /// Agents are partitioned with equal cells along axis 0 unless `cuts` is given.
  Cluster(const CheckedScript &script, ClusterConfig cfg, std::vector<AgentRecord> agents,
          std::uint64_t tick = 0, std::optional<std::vector<double>> cuts = std::nullopt);

  void tick();
  std::uint64_t current_tick() const { return tick_; }
  std::size_t population() const;

  /// All owned agents sorted by oid.
  std::vector<AgentRecord> gather() const;

  const std::vector<WorkerState> &workers() const { return workers_; }
  const spatial::GridPartitioning &partitioning() const { return grid_; }
  const ClusterConfig &config() const { return cfg_; }
  const CheckedScript &script() const { return script_; }
  Pipeline pipeline() const { return pipeline_; }
  const Kernel &kernel() const { return kernel_; }

  /// Installs new axis-0 cuts and moves agents to their new owners.
  void repartition(std::vector<double> cuts);

  /// Axis-0 histogram of owned agents over the world bounds.
  std::vector<std::size_t> histogram(int buckets = 1024) const;

  void reset_counters();
  std::uint64_t replica_mismatches() const { return replica_mismatches_; }

private:
  void route(std::vector<std::vector<AgentRecord>> &held);
  void run_workers(const std::function<void(int)> &fn);

  CheckedScript script_;
  ClusterConfig cfg_;
  Kernel kernel_;
  Pipeline pipeline_;
  spatial::GridPartitioning grid_;
  std::vector<AxisRange> axes_;
  std::vector<WorkerState> workers_;
  std::uint64_t tick_ = 0;
  std::uint64_t replica_mismatches_ = 0;
};

/// New axis-0 cuts when max/mean owned exceeds the threshold, else nothing.
std::optional<std::vector<double>> rebalance(std::span<const std::size_t> owned,
                                             std::span<const std::size_t> histogram,
                                             const dsl::Interval &axis0, double threshold);

struct EpochConfig {
  int ticks_per_epoch = 10;
  int checkpoint_every = 0;  // epochs; 0 = off
  bool rebalance = false;
  double imbalance_threshold = 1.5;
};

struct EpochMetrics {
  int epoch = 0;
  std::uint64_t tick = 0;
  double wall_seconds = 0.0;
  double agent_ticks_per_sec = 0.0;
  bool rebalanced = false;
  std::vector<WorkerStats> workers;
};

struct EpochHooks {
  std::function<void(const EpochMetrics &, const Cluster &)> on_epoch;
  std::function<void(const Cluster &, int epoch)> on_checkpoint;
  std::function<void(const Cluster &)> on_tick;
};

std::vector<EpochMetrics> run_epochs(Cluster &cluster, const EpochConfig &cfg, int n_epochs,
                                     const EpochHooks &hooks = {});

// Checkpoints.
constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t seed = 0;
  std::uint64_t tick = 0;
  std::vector<double> cuts;
  std::uint32_t state_count = 0;
  std::vector<std::vector<AgentRecord>> partitions;  // owned agents (states only)
};

Checkpoint snapshot(const Cluster &cluster);
void checkpoint_write(const Checkpoint &cp, std::ostream &out);
void checkpoint_write(const Cluster &cluster, const std::string &path);
Checkpoint checkpoint_read(std::istream &in);
Checkpoint checkpoint_read(const std::string &path);

/// Rebuilds a cluster; effects come back as θ.
Cluster checkpoint_restore(const CheckedScript &script, ClusterConfig cfg, const Checkpoint &cp);

}  // namespace brace::runtime
