#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "brace/error.hpp"
#include "brace/ir.hpp"
#include "brace/models.hpp"
#include "brace/runtime.hpp"

using namespace brace;
using models::Model;

namespace {

models::ModelConfig config(Model m, std::size_t n, std::uint64_t seed) {
  models::ModelConfig mc;
  mc.model = m;
  mc.n = n;
  mc.seed = seed;
  return mc;
}

std::map<std::uint64_t, const AgentRecord *> by_oid(const std::vector<AgentRecord> &pop) {
  std::map<std::uint64_t, const AgentRecord *> out;
  for (const auto &a : pop) out[a.oid] = &a;
  return out;
}

}  // namespace

TEST_CASE("bundled scripts compile with the expected locality") {
  CHECK(compile_script(models::bundled_script(Model::Fish)).locality == Locality::LocalOnly);
  CHECK(compile_script(models::bundled_script(Model::Traffic)).locality == Locality::LocalOnly);
  CHECK(compile_script(models::bundled_script(Model::PredatorLocal)).locality == Locality::LocalOnly);
  CHECK(compile_script(models::bundled_script(Model::PredatorNonlocal)).locality == Locality::HasNonLocal);
}

TEST_CASE("bundled scripts survive a print and reparse") {
  for (auto m : models::all_models()) {
    INFO(models::model_name(m));
    const auto ast = dsl::parse(models::bundled_script(m));
    const auto again = dsl::parse({dsl::pretty_print(ast)});
    CHECK(dsl::same_tree(ast, again));
  }
}

TEST_CASE("model names round-trip") {
  for (auto m : models::all_models()) CHECK(models::model_from_name(models::model_name(m)) == m);
  CHECK_FALSE(models::model_from_name("sharks").has_value());
}

TEST_CASE("placeholder substitution") {
  CHECK(models::substitute("a ${x} b", {{"x", "1.5"}}) == "a 1.5 b");
  CHECK_THROWS_AS(models::substitute("${y}", {{"x", "1"}}), ConfigError);
  CHECK_THROWS_AS(models::substitute("${x", {{"x", "1"}}), ConfigError);
  auto p = models::script_parameters(config(Model::Fish, 10, 1));
  CHECK(p.at("rho") == "4.0");
  CHECK(p.at("alpha") == "1.0");
}

TEST_CASE("parameter validation") {
  auto bad = config(Model::Fish, 10, 1);
  bad.fish.alpha = 5;
  CHECK_THROWS_AS(models::validate(bad), ConfigError);
  auto look = config(Model::Traffic, 10, 1);
  look.traffic.lookahead = 150;
  CHECK_THROWS_AS(models::validate(look), ConfigError);
  auto neg = config(Model::PredatorNonlocal, 10, 1);
  neg.predator.damage = -1;
  CHECK_THROWS_AS(models::validate(neg), ConfigError);
  CHECK_NOTHROW(models::validate(config(Model::Traffic, 10, 1)));
}

TEST_CASE("predator variants produce identical trajectories") {
  auto mc = config(Model::PredatorLocal, 80, 9);
  auto local = compile_script(models::bundled_script(Model::PredatorLocal));
  auto remote = compile_script(models::bundled_script(Model::PredatorNonlocal));
  auto a = models::initialize(local, mc);
  auto b = a;
  const auto world = models::world_of(mc);
  for (int t = 0; t < 15; ++t) {
    a = ir::run_tick_sequential(local, a, VisibilityMode::Restricted, mc.seed, t, world);
    b = ir::run_tick_sequential(remote, b, VisibilityMode::Restricted, mc.seed, t, world);
    INFO("tick " << t << ": " << describe_difference(a, b));
    REQUIRE(same_population(a, b));
  }
  CHECK(a.size() != 80);
}

TEST_CASE("initialization") {
  auto fish = compile_script(models::bundled_script(Model::Fish));
  CHECK(models::initialize(fish, config(Model::Fish, 0, 1)).empty());
  CHECK(models::initialize(fish, config(Model::Fish, 50, 4)) == models::initialize(fish, config(Model::Fish, 50, 4)));
  CHECK(models::initialize(fish, config(Model::Fish, 50, 4)) != models::initialize(fish, config(Model::Fish, 50, 5)));

  const auto mc = config(Model::Fish, 1000, 2);
  const auto pop = models::initialize(fish, mc);
  REQUIRE(pop.size() == 1000);
  const auto world = models::world_of(mc);
  const int x = fish.state_index("x"), y = fish.state_index("y");
  const int vx = fish.state_index("vx"), vy = fish.state_index("vy");
  std::set<std::uint64_t> oids;
  for (const auto &a : pop) {
    CHECK(std::abs(std::hypot(a.s[vx], a.s[vy]) - 1.0) <= 1e-9);
    CHECK(a.s[x] >= world.bounds[0].lo);
    CHECK(a.s[x] <= world.bounds[0].hi);
    CHECK(a.s[y] >= world.bounds[1].lo);
    CHECK(a.s[y] <= world.bounds[1].hi);
    oids.insert(a.oid);
  }
  CHECK(oids.size() == 1000);

  auto cars = compile_script(models::bundled_script(Model::Traffic));
  auto tc = config(Model::Traffic, 300, 2);
  for (const auto &a : models::initialize(cars, tc)) {
    const double lane = a.s[cars.state_index("lane")];
    CHECK(lane >= 0);
    CHECK(lane < tc.traffic.lanes);
    CHECK(a.s[cars.state_index("v")] == tc.traffic.inflow * tc.traffic.vmax);
  }

  auto pred = compile_script(models::bundled_script(Model::PredatorNonlocal));
  auto pc = config(Model::PredatorNonlocal, 30, 2);
  for (const auto &a : models::initialize(pred, pc)) CHECK(a.s[pred.state_index("health")] == pc.predator.health);
}

TEST_CASE("fish metrics") {
  auto fish = compile_script(models::bundled_script(Model::Fish));
  const auto mc = config(Model::Fish, 0, 1);
  const int x = fish.state_index("x"), y = fish.state_index("y"), vx = fish.state_index("vx");
  auto make = [&](double px, double py) {
    AgentRecord a;
    a.s.assign(fish.states.size(), 0.0);
    a.s[x] = px;
    a.s[y] = py;
    a.s[vx] = 1;
    return a;
  };
  std::vector<AgentRecord> same(5, make(3, -2));
  auto r = models::model_metrics(mc, fish, same, 0);
  CHECK(r.get("spread") == 0.0);
  CHECK(r.get("centroid_x") == 3.0);
  CHECK(r.get("polarization") == doctest::Approx(1.0));

  std::vector<AgentRecord> two;
  for (int i = 0; i < 4; ++i) two.push_back(make(i % 2 ? 7.0 : -7.0, 0));
  r = models::model_metrics(mc, fish, two, 0);
  CHECK(r.get("centroid_x") == 0.0);
  CHECK(r.get("spread") == 7.0);
}

TEST_CASE("traffic metrics for a single stationary car") {
  auto cars = compile_script(models::bundled_script(Model::Traffic));
  const auto mc = config(Model::Traffic, 1, 1);
  AgentRecord a;
  a.s.assign(cars.states.size(), 0.0);
  a.s[cars.state_index("lane")] = 2;
  a.s[cars.state_index("x")] = 100;
  std::vector<AgentRecord> pop{a};
  auto r = models::model_metrics(mc, cars, pop, 0);
  CHECK(r.get("lane3_density") == 1.0);
  CHECK(r.get("lane3_velocity") == 0.0);
  CHECK(r.get("lane1_density") == 0.0);
  CHECK(r.get("lane_changes") == 0.0);
  CHECK(models::metric_columns(mc).size() == r.values.size());
}

TEST_CASE("predator metrics count population and turnover") {
  auto pred = compile_script(models::bundled_script(Model::PredatorNonlocal));
  const auto mc = config(Model::PredatorNonlocal, 3, 1);
  auto pop = models::initialize(pred, mc);
  auto r = models::model_metrics(mc, pred, pop, 4, {2, 1});
  CHECK(r.get("population") == 3.0);
  CHECK(r.get("births") == 2.0);
  CHECK(r.get("deaths") == 1.0);
}

TEST_CASE("fish move at most their range per tick and keep unit headings") {
  auto mc = config(Model::Fish, 300, 6);
  mc.fish.informed = 0.3;
  auto fish = compile_script(models::bundled_script(mc));
  const int x = fish.state_index("x"), y = fish.state_index("y");
  const int vx = fish.state_index("vx"), vy = fish.state_index("vy");
  auto pop = models::initialize(fish, mc);
  const auto world = models::world_of(mc);
  for (int t = 0; t < 5; ++t) {
    auto next = ir::run_tick_sequential(fish, pop, VisibilityMode::Restricted, mc.seed, t, world);
    REQUIRE(next.size() == pop.size());
    auto before = by_oid(pop);
    for (const auto &a : next) {
      const auto *old = before.at(a.oid);
      CHECK(std::abs(a.s[x] - old->s[x]) <= mc.fish.rho);
      CHECK(std::abs(a.s[y] - old->s[y]) <= mc.fish.rho);
      CHECK(std::abs(std::hypot(a.s[vx], a.s[vy]) - 1.0) <= 1e-9);
    }
    pop = std::move(next);
  }
}

TEST_CASE("cars that keep their lane never overtake each other") {
  auto mc = config(Model::Traffic, 1500, 4);
  mc.traffic.length = 6000;
  auto cars = compile_script(models::bundled_script(mc));
  const int x = cars.state_index("x"), lane = cars.state_index("lane"), changed = cars.state_index("changed");
  auto pop = models::initialize(cars, mc);
  const auto world = models::world_of(mc);
  int compared = 0;
  for (int t = 0; t < 8; ++t) {
    auto next = ir::run_tick_sequential(cars, pop, VisibilityMode::Restricted, mc.seed, t, world);
    auto after = by_oid(next);
    std::map<int, std::vector<std::pair<double, double>>> lanes;
    for (const auto &a : pop) {
      const auto *n = after.at(a.oid);
      if (n->s[changed] != 0 || n->s[x] < a.s[x]) continue;
      lanes[static_cast<int>(a.s[lane])].emplace_back(a.s[x], n->s[x]);
    }
    for (auto &[l, v] : lanes) {
      std::sort(v.begin(), v.end());
      for (std::size_t i = 1; i < v.size(); ++i) {
        CHECK(v[i - 1].second < v[i].second);
        ++compared;
      }
    }
    pop = std::move(next);
  }
  CHECK(compared > 1000);
}

TEST_CASE("predator health only falls and deaths follow the folded bites") {
  auto mc = config(Model::PredatorNonlocal, 120, 8);
  auto pred = compile_script(models::bundled_script(mc));
  const int x = pred.state_index("x"), y = pred.state_index("y"), health = pred.state_index("health");
  const double bite2 = mc.predator.bite * mc.predator.bite;
  auto pop = models::initialize(pred, mc);
  const auto world = models::world_of(mc);
  int deaths = 0;
  for (int t = 0; t < 20; ++t) {
    std::map<std::uint64_t, double> hurt;
    for (const auto &a : pop) {
      for (const auto &b : pop) {
        if (a.oid == b.oid) continue;
        const double dx = b.s[x] - a.s[x], dy = b.s[y] - a.s[y];
        if (dx * dx + dy * dy < bite2) hurt[b.oid] += mc.predator.damage;
      }
    }
    auto next = ir::run_tick_sequential(pred, pop, VisibilityMode::Restricted, mc.seed, t, world);
    auto after = by_oid(next);
    for (const auto &a : pop) {
      const double h = hurt[a.oid];
      const auto it = after.find(a.oid);
      if (h >= a.s[health]) {
        CHECK(it == after.end());
        ++deaths;
      } else {
        REQUIRE(it != after.end());
        CHECK(it->second->s[health] == a.s[health] - h);
        CHECK(it->second->s[health] <= a.s[health]);
      }
    }
    pop = std::move(next);
  }
  CHECK(deaths > 0);
}

TEST_CASE("the runtime matches the oracle on every bundled model") {
  for (auto m : models::all_models()) {
    INFO(models::model_name(m));
    auto mc = config(m, m == Model::Traffic ? 400 : 150, 3);
    if (m == Model::Traffic) mc.traffic.length = 2000;
    auto cs = compile_script(models::bundled_script(mc));
    runtime::ClusterConfig cfg;
    cfg.workers = 3;
    cfg.world = models::world_of(mc);
    cfg.seed = mc.seed;
    cfg.debug_checks = true;
    auto pop = models::initialize(cs, mc);
    runtime::Cluster c(cs, cfg, pop);
    for (int t = 0; t < 6; ++t) {
      pop = ir::run_tick_sequential(cs, pop, VisibilityMode::Restricted, mc.seed, t, cfg.world);
      c.tick();
      const auto got = c.gather();
      INFO("tick " << t << ": " << describe_difference(pop, got));
      REQUIRE(same_population(pop, got));
    }
  }
}
