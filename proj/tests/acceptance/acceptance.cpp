// One line per acceptance criterion. Exit status is non-zero when any fails.
//   brace_acceptance [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "brace/error.hpp"
#include "brace/ir.hpp"
#include "brace/models.hpp"
#include "brace/optimizer.hpp"
#include "brace/random.hpp"
#include "brace/runtime.hpp"
#include "brace/spatial.hpp"

using namespace brace;
using models::Model;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void fail(const std::string &why) {
    if (pass) detail.str("");
    pass = false;
    detail << why;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

models::ModelConfig config(Model m, std::size_t n, std::uint64_t seed) {
  models::ModelConfig mc;
  mc.model = m;
  mc.n = n;
  mc.seed = seed;
  return mc;
}

runtime::ClusterConfig cluster_config(const models::ModelConfig &mc, int workers) {
  runtime::ClusterConfig cfg;
  cfg.workers = workers;
  cfg.world = models::world_of(mc);
  cfg.seed = mc.seed;
  return cfg;
}

// 1 ------------------------------------------------------------------------

Outcome oracle_equivalence() {
  Outcome o;
  int runs = 0;
  for (auto m : models::all_models()) {
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto mc = config(m, 200, seed);
      const auto cs = compile_script(models::bundled_script(mc));
      auto pop = models::initialize(cs, mc);
      std::vector<runtime::Cluster> clusters;
      for (int w : {1, 2, 4, 8}) clusters.emplace_back(cs, cluster_config(mc, w), pop);
      for (int t = 0; t < 100 && o.pass; ++t) {
        pop = ir::run_tick_sequential(cs, pop, VisibilityMode::Restricted, seed, t, models::world_of(mc));
        for (auto &c : clusters) {
          c.tick();
          const auto got = c.gather();
          if (!same_population(pop, got)) {
            std::ostringstream os;
            os << models::model_name(m) << " seed " << seed << " workers " << c.config().workers << " tick " << t
               << ": " << describe_difference(pop, got);
            o.fail(os.str());
            break;
          }
        }
      }
      runs += 4;
    }
  }
  if (o.pass) o.detail << runs << " runs x 100 ticks bit-identical";
  return o;
}

// 2 ------------------------------------------------------------------------

Outcome visibility_equivalence() {
  Outcome o;
  int checked = 0;
  for (auto m : models::all_models()) {
    for (int k = 0; k < 50 && o.pass; ++k) {
      auto mc = config(m, 1 + static_cast<std::size_t>(k * 13 % 64), 500 + k);
      if (m == Model::Traffic) mc.traffic.length = 600;
      if (m == Model::Fish) mc.bounds = {{-8, 8}, {-8, 8}};
      const auto cs = compile_script(models::bundled_script(mc));
      const auto world = models::world_of(mc);
      auto a = models::initialize(cs, mc);
      auto b = a;
      for (int t = 0; t < 3; ++t) {
        a = ir::run_tick_sequential(cs, a, VisibilityMode::WeakRef, mc.seed, t, world);
        b = ir::run_tick_sequential(cs, b, VisibilityMode::Restricted, mc.seed, t, world);
        if (!same_population(a, b)) {
          o.fail(std::string(models::model_name(m)) + " population " + std::to_string(k) + ": " +
                 describe_difference(a, b));
          break;
        }
      }
      ++checked;
    }
  }
  if (o.pass) o.detail << checked << " populations identical over 3 ticks";
  return o;
}

// 3 ------------------------------------------------------------------------

Outcome inversion_equivalence() {
  Outcome o;
  const auto cs = compile_script(models::bundled_script(Model::PredatorNonlocal));
  const auto inv = opt::invert_effects(cs);
  if (inv.locality != Locality::LocalOnly) o.fail("inverted script still has non-local effects");
  for (std::size_t a = 0; a < cs.spatial_fields.size(); ++a) {
    if (inv.spatial_fields[a].range.hi != 2 * cs.spatial_fields[a].range.hi ||
        inv.spatial_fields[a].range.lo != 2 * cs.spatial_fields[a].range.lo) {
      o.fail("visibility bound not doubled");
    }
  }
  for (std::uint64_t seed = 1; seed <= 20 && o.pass; ++seed) {
    const auto mc = config(Model::PredatorNonlocal, 64 - (seed % 4) * 8, seed);
    const auto world = models::world_of(mc);
    auto a = models::initialize(cs, mc);
    auto b = a;
    for (int t = 0; t < 20; ++t) {
      a = ir::run_tick_sequential(cs, a, VisibilityMode::Restricted, seed, t, world);
      b = ir::run_tick_sequential(inv, b, VisibilityMode::Restricted, seed, t, world);
      if (!same_population(a, b)) {
        o.fail("seed " + std::to_string(seed) + " tick " + std::to_string(t) + ": " + describe_difference(a, b));
        break;
      }
    }
  }
  if (o.pass) o.detail << "local-only, bound doubled, 20 seeds x 20 ticks identical";
  return o;
}

// 4 and 5 ------------------------------------------------------------------

/// Best time of a single-worker tick over `reps` fresh clusters, each after one warm-up tick.
double time_per_tick(const CheckedScript &cs, const models::ModelConfig &mc, bool index, int reps,
                     const std::vector<runtime::ProbeHint> &probes = {}) {
  auto cfg = cluster_config(mc, 1);
  cfg.scheduler = runtime::Scheduler::Sequential;
  cfg.kernel.use_index = index;
  cfg.kernel.probes = probes;
  const auto pop = models::initialize(cs, mc);
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    runtime::Cluster c(cs, cfg, pop);
    c.tick();
    const auto t0 = Clock::now();
    c.tick();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

Outcome indexing_asymptotics() {
  Outcome o;
  const std::vector<std::size_t> sizes = {1000, 2000, 4000, 8000};
  std::vector<double> scan(sizes.size(), 1e300), idx(sizes.size(), 1e300);
  const auto cs = compile_script(models::bundled_script(config(Model::Fish, 1000, 11)));
  // Rounds sweep every size so that a slow stretch of the machine hits all of them.
  for (int round = 0; round < 5; ++round) {
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      auto mc = config(Model::Fish, sizes[i], 11);
      const double half = 4.0 * std::sqrt(static_cast<double>(sizes[i]));
      mc.bounds = {{-half, half}, {-half, half}};
      scan[i] = std::min(scan[i], time_per_tick(cs, mc, false, 1));
      idx[i] = std::min(idx[i], time_per_tick(cs, mc, true, 2));
    }
  }
  o.detail.precision(3);
  o.detail << "no-index x";
  for (std::size_t i = 1; i < sizes.size(); ++i) o.detail << (i > 1 ? "/" : "") << scan[i] / scan[i - 1];
  o.detail << ", index x";
  for (std::size_t i = 1; i < sizes.size(); ++i) o.detail << (i > 1 ? "/" : "") << idx[i] / idx[i - 1];
  o.detail << " per doubling (" << scan[0] * 1e3 << "/" << idx[0] * 1e3 << " ms at 1k)";
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (scan[i] / scan[i - 1] < 3.5 || idx[i] / idx[i - 1] > 2.6) o.pass = false;
  }
  return o;
}

Outcome indexing_visibility() {
  Outcome o;
  const std::vector<double> rhos = {1.5, 3, 6, 12};
  std::vector<double> scan, idx;
  for (double rho : rhos) {
    auto mc = config(Model::Fish, 4000, 12);
    mc.fish.rho = rho;
    const auto cs = compile_script(models::bundled_script(mc));
    idx.push_back(time_per_tick(cs, mc, true, 5));
    scan.push_back(time_per_tick(cs, mc, false, 2));
  }
  o.detail.precision(3);
  o.detail << "rho";
  for (std::size_t i = 0; i < rhos.size(); ++i) o.detail << " " << rhos[i] << ":" << scan[i] / idx[i] << "x";
  o.detail << " (scan/index)";
  for (std::size_t i = 1; i < rhos.size(); ++i) {
    if (idx[i] < idx[i - 1]) o.pass = false;
  }
  if (scan[0] / idx[0] < 1.5 || scan[1] <= idx[1]) o.pass = false;
  return o;
}

// 6 ------------------------------------------------------------------------

Outcome inversion_benefit() {
  Outcome o;
  const auto cs = compile_script(models::bundled_script(Model::PredatorNonlocal));
  opt::PlanOptions with;
  with.invert = true;
  const auto plain = opt::classify_and_plan(cs);
  const auto inverted = opt::classify_and_plan(cs, with);
  if (inverted.pipeline != runtime::Pipeline::OneReduce) o.fail("inverted plan is not one-reduce");
  o.detail.precision(3);
  for (bool index : {true, false}) {
    // Variants alternate and each run is repeated; the faster repetition counts.
    double best[2][3] = {};
    for (int rep = 0; rep < 2; ++rep) {
      for (std::uint64_t seed : {1, 2, 3}) {
        for (int variant = 0; variant < 2; ++variant) {
          const auto &planned = variant ? inverted : plain;
          const auto mc = config(Model::PredatorNonlocal, 4000, seed);
          auto cfg = cluster_config(mc, 4);
          cfg.kernel.use_index = index;
          cfg.kernel.probes = planned.probes;
          runtime::Cluster c(planned.script, cfg, models::initialize(cs, mc));
          std::uint64_t effect_msgs = 0;
          double agent_ticks = 0, seconds = 0;
          for (int t = 0; t < 50; ++t) {
            agent_ticks += static_cast<double>(c.population());
            const auto t0 = Clock::now();
            c.tick();
            seconds += seconds_since(t0);
            for (const auto &w : c.workers()) effect_msgs += w.stats.effect_msgs;
            c.reset_counters();
          }
          double &b = best[variant][seed - 1];
          b = std::max(b, agent_ticks / seconds);
          if (variant == 1 && effect_msgs != 0) o.fail("inverted run sent effect messages");
        }
      }
    }
    double rate[2] = {0, 0};
    for (int v = 0; v < 2; ++v) rate[v] = best[v][0] + best[v][1] + best[v][2];
    o.detail << (index ? "index " : ", no-index ") << rate[1] / rate[0] << "x";
    if (rate[1] < rate[0]) o.pass = false;
  }
  o.detail << " throughput with inversion";
  return o;
}

// 7 ------------------------------------------------------------------------

Outcome load_balancing() {
  Outcome o;
  auto start = config(Model::Fish, 1600, 21);
  start.fish.informed = 1.0;
  start.fish.omega = 3.0;
  start.bounds = {{-20, 20}, {-20, 20}};
  const auto cs = compile_script(models::bundled_script(start));
  auto world_cfg = start;
  world_cfg.bounds = {{-230, 230}, {-230, 230}};
  const auto pop = models::initialize(cs, start);

  double share_a = 0, share_b = 0;
  double worst = 0;
  int rebalances = 0;
  for (bool rebalance : {false, true}) {
    auto cfg = cluster_config(world_cfg, 8);
    runtime::Cluster c(cs, cfg, pop);
    runtime::EpochConfig ec;
    ec.ticks_per_epoch = 10;
    ec.rebalance = rebalance;
    ec.imbalance_threshold = 1.5;
    bool seen_rebalance = false;
    runtime::EpochHooks hooks;
    hooks.on_epoch = [&](const runtime::EpochMetrics &m, const runtime::Cluster &cl) {
      if (!rebalance) return;
      seen_rebalance = seen_rebalance || m.rebalanced;
      rebalances += m.rebalanced ? 1 : 0;
      if (!seen_rebalance) return;
      std::size_t most = 0, total = 0;
      for (const auto &w : cl.workers()) {
        most = std::max(most, w.owned.size());
        total += w.owned.size();
      }
      worst = std::max(worst, static_cast<double>(most) * 8.0 / static_cast<double>(total));
    };
    runtime::run_epochs(c, ec, 40, hooks);
    if (!rebalance) {
      std::vector<double> shares;
      for (const auto &w : c.workers()) {
        shares.push_back(static_cast<double>(w.owned.size()) / static_cast<double>(c.population()));
      }
      std::sort(shares.rbegin(), shares.rend());
      share_a = shares[0];
      share_b = shares[1];
    }
  }
  o.detail.precision(3);
  o.detail << "off: top shares " << share_a << ", " << share_b << "; on: " << rebalances
           << " rebalances, worst max/mean " << worst;
  o.pass = share_b > 0.45 && rebalances > 0 && worst <= 1.5;
  return o;
}

// 8 ------------------------------------------------------------------------

Outcome checkpoint_replay() {
  Outcome o;
  const auto mc = config(Model::PredatorNonlocal, 400, 8);
  const auto cs = compile_script(models::bundled_script(mc));
  const auto cfg = cluster_config(mc, 4);
  runtime::Cluster whole(cs, cfg, models::initialize(cs, mc));
  std::string bytes;
  for (int t = 0; t < 80; ++t) {
    if (t == 40) {
      std::ostringstream os;
      runtime::checkpoint_write(runtime::snapshot(whole), os);
      bytes = os.str();
    }
    whole.tick();
  }
  std::istringstream is(bytes);
  auto resumed = runtime::checkpoint_restore(cs, cfg, runtime::checkpoint_read(is));
  while (resumed.current_tick() < 80) resumed.tick();
  const auto a = whole.gather(), b = resumed.gather();
  if (!same_population(a, b)) o.fail("resumed run differs: " + describe_difference(a, b));

  std::string bad = bytes;
  bad[bad.size() / 2] ^= 0x5a;
  std::istringstream corrupt(bad);
  try {
    runtime::checkpoint_read(corrupt);
    o.fail("corrupted checkpoint accepted");
  } catch (const ChecksumMismatch &) {
  }
  if (o.pass) o.detail << a.size() << " agents identical at tick 80, corrupted file rejected";
  return o;
}

// 9 ------------------------------------------------------------------------

Outcome component_oracles() {
  Outcome o;
  SplitMix64 rng(99);
  std::vector<double> coords;
  std::vector<std::uint32_t> items;
  for (std::uint32_t i = 0; i < 1000; ++i) {
    coords.push_back(rng.uniform(-50, 50));
    coords.push_back(rng.uniform(-50, 50));
    items.push_back(i);
  }
  const auto idx = spatial::kd_build(2, coords, items);
  for (int q = 0; q < 100; ++q) {
    spatial::HyperRect r;
    for (int a = 0; a < 2; ++a) {
      const double c = rng.uniform(-55, 55), w = rng.uniform(0, 30);
      r.axes.push_back({c - w, c + w});
    }
    auto got = spatial::kd_range(idx, r);
    std::sort(got.begin(), got.end());
    std::vector<std::uint32_t> want;
    for (std::uint32_t i = 0; i < 1000; ++i) {
      if (r.contains({&coords[2 * i], 2})) want.push_back(i);
    }
    if (got != want) {
      o.fail("kd query " + std::to_string(q) + " differs from the scan");
      break;
    }
  }

  for (int trial = 0; trial < 20 && o.pass; ++trial) {
    const int buckets = 64 + trial * 7, parts = 2 + trial % 7;
    const dsl::Interval extent{-10.0 - trial, 30.0};
    std::vector<std::size_t> hist(buckets);
    for (auto &h : hist) h = rng.next() % (trial % 3 ? 40 : 3);
    hist[rng.next() % buckets] += 500;
    const auto cuts = spatial::quantile_cuts(hist, extent, parts);
    std::vector<double> prefix{0};
    for (auto h : hist) prefix.push_back(prefix.back() + static_cast<double>(h));
    const double width = (extent.hi - extent.lo) / buckets;
    for (int k = 1; k < parts; ++k) {
      const double target = prefix.back() * k / parts;
      double least = 1e300;
      for (int b = 0; b <= buckets; ++b) least = std::min(least, std::abs(prefix[b] - target));
      double nearest = 1e300;
      for (int b = 0; b <= buckets; ++b) {
        if (std::abs(prefix[b] - target) == least) {
          nearest = std::min(nearest, std::abs(cuts[k - 1] - (extent.lo + b * width)));
        }
      }
      if (nearest > width + 1e-9) {
        o.fail("quantile cut " + std::to_string(k) + " of trial " + std::to_string(trial) +
               " is more than a bucket from the optimum");
        break;
      }
    }
  }

  for (auto m : models::all_models()) {
    const auto ast = dsl::parse(models::bundled_script(m));
    if (!dsl::same_tree(ast, dsl::parse({dsl::pretty_print(ast)}))) {
      o.fail(std::string("round trip changed ") + models::model_name(m));
    }
  }
  if (o.pass) o.detail << "kd-tree = scan on 100 queries, cuts within a bucket, 4 scripts round-trip";
  return o;
}

struct Criterion {
  int id;
  const char *name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char **argv) {
  const std::vector<Criterion> all = {
      {1, "oracle equivalence", oracle_equivalence},
      {2, "visibility semantics", visibility_equivalence},
      {3, "effect inversion", inversion_equivalence},
      {4, "indexing asymptotics", indexing_asymptotics},
      {5, "indexing vs visibility", indexing_visibility},
      {6, "inversion benefit", inversion_benefit},
      {7, "load balancing", load_balancing},
      {8, "checkpoint replay", checkpoint_replay},
      {9, "component oracles", component_oracles},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto &c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception &e) {
      out.fail(std::string("exception: ") + e.what());
    }
    std::printf("criterion %d %-24s %s  %s (%.1fs)\n", c.id, c.name, out.pass ? "PASS" : "FAIL",
                out.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
    failed += out.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
