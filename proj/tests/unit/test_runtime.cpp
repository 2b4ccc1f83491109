#include <algorithm>
#include <cmath>
#include <sstream>

#include "brace/ir.hpp"
#include "brace/random.hpp"
#include "brace/runtime.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace brace;
using namespace brace::runtime;

namespace {

const char *kBiters = R"(class Fish {
  public state float x : x + vx; #range[-2, 2];
  public state float y : y + vy; #range[-2, 2];
  public state float vx : (rand() - 0.5) * 0.8;
  public state float vy : (rand() - 0.5) * 0.8;
  public state float health : health - hurt;
  public state int age : age + 1;
  private effect float hurt : sum;
  private effect int seen : sum;
  spawn when (rand() < 0.05) { health : 3; age : 0; }
  die when (hurt >= health);
  public void run() {
    foreach (Fish p : Extent<Fish>) {
      seen <- 1;
      if (abs(p.x - x) < 1) { p.hurt <- 0.3 + rand() * 0.1; }
    }
  } })";

std::vector<AgentRecord> scatter(const CheckedScript &cs, std::size_t n, std::uint64_t seed, double half) {
  SplitMix64 rng(seed);
  std::vector<AgentRecord> pop;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(cs.states.size(), 0.0);
    s[0] = rng.uniform(-half, half);
    s[1] = rng.uniform(-half, half);
    for (std::size_t f = 2; f < s.size(); ++f) s[f] = rng.uniform(0, 1);
    if (cs.states.size() > 4) s[4] = 1.0 + rng.uniform(0, 2);
    pop.push_back({1000 + i * 3, std::move(s), ir::theta_vector(cs)});
  }
  return pop;
}

WorldSpec square(double half) { return {{{-half, half}, {-half, half}}, BoundaryPolicy::Clamp}; }

void check_against_oracle(const CheckedScript &cs, std::vector<AgentRecord> pop, ClusterConfig cfg, int ticks) {
  Cluster c(cs, cfg, pop);
  for (int t = 0; t < ticks; ++t) {
    pop = ir::run_tick_sequential(cs, pop, VisibilityMode::Restricted, cfg.seed, t, cfg.world);
    c.tick();
    const auto got = c.gather();
    INFO("tick " << t << ": " << describe_difference(pop, got));
    REQUIRE(same_population(pop, got));
  }
}

}  // namespace

TEST_CASE("one worker reproduces the oracle") {
  auto cs = compile_script(test_support::model_source("simple_fish"));
  ClusterConfig cfg;
  cfg.world = square(10);
  check_against_oracle(cs, scatter(cs, 60, 1, 10), cfg, 5);
}

TEST_CASE("several workers reproduce the oracle for a local script") {
  auto cs = compile_script(test_support::model_source("simple_fish"));
  for (int workers : {2, 4}) {
    for (bool index : {true, false}) {
      ClusterConfig cfg;
      cfg.workers = workers;
      cfg.world = square(12);
      cfg.kernel.use_index = index;
      cfg.seed = 7;
      cfg.debug_checks = true;
      cfg.scheduler = index ? Scheduler::Parallel : Scheduler::Sequential;
      check_against_oracle(cs, scatter(cs, 200, workers, 12), cfg, 12);
    }
  }
}

TEST_CASE("non-local effects, births and deaths cross partitions correctly") {
  auto cs = compile_script({kBiters});
  REQUIRE(cs.locality == Locality::HasNonLocal);
  for (int workers : {1, 3, 4}) {
    ClusterConfig cfg;
    cfg.workers = workers;
    cfg.world = square(8);
    cfg.seed = 3;
    Cluster probe(cs, cfg, {});
    CHECK(probe.pipeline() == Pipeline::TwoReduce);
    check_against_oracle(cs, scatter(cs, 128, 11, 8), cfg, 20);
  }
}

TEST_CASE("an effect assigned to a replica reaches its owner") {
  auto cs = compile_script({kBiters});
  ClusterConfig cfg;
  cfg.workers = 2;
  cfg.world = {{{-10, 10}, {-10, 10}}, BoundaryPolicy::Clamp};
  const auto theta = ir::theta_vector(cs);
  // Cut at x = 0; the two fish sit on either side of it.
  std::vector<AgentRecord> pop{{1, {-0.25, 0, 0, 0, 5, 0}, theta}, {2, {0.25, 0, 0, 0, 0.5, 0}, theta}};
  Cluster c(cs, cfg, pop);
  REQUIRE(c.workers()[0].owned.size() == 1);
  REQUIRE(c.workers()[1].owned.size() == 1);
  CHECK(c.workers()[0].replicas.size() == 1);
  c.tick();
  auto want = ir::run_tick_sequential(cs, pop, VisibilityMode::Restricted, cfg.seed, 0, cfg.world);
  CHECK(same_population(want, c.gather()));
  std::uint64_t sent = 0;
  for (const auto &w : c.workers()) sent += w.stats.effect_msgs;
  CHECK(sent == 2);
}

TEST_CASE("an agent crossing a cut changes owner and nothing is lost") {
  const char *src = R"(class A {
    public state float x : x + 1; #range[-1, 1];
    public void run() {} })";
  auto cs = compile_script({src});
  ClusterConfig cfg;
  cfg.workers = 2;
  cfg.world = {{{0, 10}}, BoundaryPolicy::Clamp};
  Cluster c(cs, cfg, {{1, {4.5}, {}}, {2, {1.0}, {}}});
  CHECK(c.workers()[0].owned.size() == 2);
  c.tick();
  CHECK(c.workers()[0].owned.size() == 1);
  CHECK(c.workers()[1].owned.size() == 1);
  CHECK(c.workers()[1].owned[0].oid == 1);
  CHECK(c.workers()[0].stats.migrations == 1);
  CHECK(c.workers()[0].stats.handoffs == 1);
  CHECK(c.population() == 2);
}

TEST_CASE("agents that stay with their owner are never serialized") {
  auto cs = compile_script(test_support::model_source("simple_fish"));
  ClusterConfig cfg;
  cfg.world = square(10);
  Cluster c(cs, cfg, scatter(cs, 50, 2, 10));
  for (int i = 0; i < 3; ++i) c.tick();
  CHECK(c.workers()[0].stats.agent_msgs == 0);
  CHECK(c.workers()[0].stats.handoffs == 150);
}

TEST_CASE("runs are deterministic") {
  auto cs = compile_script({kBiters});
  ClusterConfig cfg;
  cfg.workers = 4;
  cfg.world = square(8);
  auto pop = scatter(cs, 100, 5, 8);
  Cluster a(cs, cfg, pop), b(cs, cfg, pop);
  for (int i = 0; i < 10; ++i) {
    a.tick();
    b.tick();
  }
  CHECK(same_population(a.gather(), b.gather()));
}

TEST_CASE("the one-reduce pipeline rejects non-local scripts") {
  auto cs = compile_script({kBiters});
  ClusterConfig cfg;
  cfg.world = square(8);
  cfg.pipeline = Pipeline::OneReduce;
  CHECK_THROWS_AS(Cluster(cs, cfg, {}), ConfigError);
}

TEST_CASE("rebalance decisions") {
  const dsl::Interval axis{0, 400};
  std::vector<std::size_t> hist(1024, 0);
  const std::size_t even[] = {100, 100, 100, 100};
  CHECK_FALSE(rebalance(even, hist, axis, 1.5).has_value());
  const std::size_t one[] = {400};
  CHECK_FALSE(rebalance(one, hist, axis, 1.5).has_value());

  // 370 agents in the first quarter of the axis, 10 in each of the others.
  std::vector<double> xs;
  SplitMix64 rng(8);
  for (int i = 0; i < 370; ++i) xs.push_back(rng.uniform(0, 100));
  for (int q = 1; q < 4; ++q) {
    for (int i = 0; i < 10; ++i) xs.push_back(rng.uniform(100 * q, 100 * q + 100));
  }
  hist = spatial::histogram(xs, axis, 1024);
  const std::size_t skewed[] = {370, 10, 10, 10};
  auto cuts = rebalance(skewed, hist, axis, 1.5);
  REQUIRE(cuts.has_value());
  REQUIRE(cuts->size() == 3);
  const double bucket = 400.0 / 1024;
  std::sort(xs.begin(), xs.end());
  std::vector<double> bounds{0};
  bounds.insert(bounds.end(), cuts->begin(), cuts->end());
  bounds.push_back(400.0);
  for (int cell = 0; cell < 4; ++cell) {
    std::size_t mass = 0, slack = 0;
    for (double x : xs) {
      mass += x >= bounds[cell] && x < bounds[cell + 1];
      slack += (x >= bounds[cell] - bucket && x < bounds[cell]) || (x >= bounds[cell + 1] && x < bounds[cell + 1] + bucket);
    }
    CHECK(std::abs(static_cast<double>(mass) - 100.0) <= static_cast<double>(slack) + 1.0);
  }
}

TEST_CASE("repartitioning keeps trajectories identical") {
  auto cs = compile_script(test_support::model_source("simple_fish"));
  ClusterConfig cfg;
  cfg.workers = 4;
  cfg.world = square(12);
  auto pop = scatter(cs, 150, 4, 12);
  Cluster a(cs, cfg, pop), b(cs, cfg, pop);
  for (int i = 0; i < 6; ++i) {
    if (i == 3) b.repartition({-11, -10, 5});
    a.tick();
    b.tick();
  }
  CHECK(b.partitioning().cuts[0] == std::vector<double>{-11, -10, 5});
  CHECK(same_population(a.gather(), b.gather()));
}

TEST_CASE("epochs report per-worker counts and rebalance on skew") {
  auto cs = compile_script(test_support::model_source("simple_fish"));
  ClusterConfig cfg;
  cfg.workers = 4;
  cfg.world = {{{0, 40}, {0, 10}}, BoundaryPolicy::Clamp};
  auto pop = scatter(cs, 200, 6, 5);
  for (auto &a : pop) {
    a.s[0] = a.s[0] + 5;
    a.s[1] = a.s[1] + 5;
  }
  Cluster c(cs, cfg, pop);
  EpochConfig ec;
  ec.ticks_per_epoch = 2;
  ec.rebalance = true;
  auto rows = run_epochs(c, ec, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].rebalanced);
  std::size_t most = 0, total = 0;
  for (const auto &w : rows[0].workers) {
    most = std::max(most, w.owned);
    total += w.owned;
  }
  CHECK(total == 200);
  CHECK(static_cast<double>(most) <= 1.5 * total / 4.0);
  CHECK(rows[1].tick == 4);
}

TEST_CASE("checkpoints round-trip and replay exactly") {
  auto cs = compile_script({kBiters});
  ClusterConfig cfg;
  cfg.workers = 3;
  cfg.world = square(8);
  cfg.seed = 12;
  Cluster full(cs, cfg, scatter(cs, 90, 9, 8));
  for (int i = 0; i < 8; ++i) full.tick();
  std::stringstream file;
  checkpoint_write(snapshot(full), file);
  const std::string bytes = file.str();
  for (int i = 0; i < 8; ++i) full.tick();

  std::stringstream in(bytes);
  auto cp = checkpoint_read(in);
  CHECK(cp.tick == 8);
  CHECK(cp.seed == 12);
  cfg.seed = 999;
  Cluster resumed = checkpoint_restore(cs, cfg, cp);
  CHECK(resumed.config().seed == 12);
  for (int i = 0; i < 8; ++i) resumed.tick();
  CHECK(same_population(full.gather(), resumed.gather()));

  std::stringstream cut(bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(checkpoint_read(cut), ChecksumMismatch);
  std::string flipped = bytes;
  flipped[30] ^= 0x40;
  std::stringstream bad(flipped);
  CHECK_THROWS_AS(checkpoint_read(bad), ChecksumMismatch);

  Checkpoint future = cp;
  future.version = 7;
  std::stringstream fv;
  checkpoint_write(future, fv);
  CHECK_THROWS_AS(checkpoint_read(fv), VersionMismatch);
}

TEST_CASE("an empty simulation checkpoints") {
  auto cs = compile_script(test_support::model_source("simple_fish"));
  ClusterConfig cfg;
  cfg.workers = 2;
  cfg.world = square(5);
  Cluster c(cs, cfg, {});
  c.tick();
  std::stringstream f;
  checkpoint_write(snapshot(c), f);
  auto cp = checkpoint_read(f);
  CHECK(cp.tick == 1);
  CHECK(checkpoint_restore(cs, cfg, cp).population() == 0);
}
