#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "brace/random.hpp"
#include "brace/spatial.hpp"
#include "doctest.h"

using namespace brace;
using namespace brace::spatial;

namespace {

HyperRect box(std::initializer_list<dsl::Interval> axes) { return HyperRect{axes}; }

GridPartitioning line4(double off = 0.0) {
  const int counts[] = {4};
  return uniform_grid(box({{0, 100}}), counts, box({{-off, off}}));
}

// Brute force over every cell rectangle with the half-open convention.
int scan_assign(const GridPartitioning &g, std::span<const double> loc) {
  for (int p = 0; p < g.partition_count(); ++p) {
    HyperRect c = g.cell(p);
    bool in = true;
    for (int a = 0; a < g.dim(); ++a) {
      const bool last = c.axes[a].hi == g.world.axes[a].hi;
      in = in && loc[a] >= c.axes[a].lo && (last ? loc[a] <= c.axes[a].hi : loc[a] < c.axes[a].hi);
    }
    if (in) return p;
  }
  return -1;
}

}  // namespace

TEST_CASE("partition assignment on a 1-D grid") {
  auto g = line4();
  CHECK(g.partition_count() == 4);
  double a[] = {25.0}, b[] = {99.999}, c[] = {100.0}, d[] = {0.0}, e[] = {24.999};
  CHECK(assign_partition(g, a) == 1);
  CHECK(assign_partition(g, b) == 3);
  CHECK(assign_partition(g, c) == 3);
  CHECK(assign_partition(g, d) == 0);
  CHECK(assign_partition(g, e) == 0);
  double out[] = {100.5};
  CHECK_THROWS_AS(assign_partition(g, out), OutOfBounds);
}

TEST_CASE("partition assignment matches a scan of the cell rectangles") {
  const int counts[] = {3, 5};
  auto g = uniform_grid(box({{-10, 10}, {0, 7}}), counts, box({{-1, 1}, {-1, 1}}));
  SplitMix64 rng(4);
  for (int i = 0; i < 2000; ++i) {
    double loc[] = {rng.uniform(-10, 10), rng.uniform(0, 7)};
    if (i % 10 == 0) loc[0] = g.cuts[0][i % 2];
    if (i % 15 == 0) loc[1] = 7.0;
    CHECK(assign_partition(g, loc) == scan_assign(g, loc));
  }
}

TEST_CASE("partition visible regions") {
  auto g = line4(10);
  auto vr = partition_visible_region(g, 1);
  CHECK(vr.axes[0].lo == 15.0);
  CHECK(vr.axes[0].hi == 60.0);
  CHECK(partition_visible_region(g, 0).axes[0].lo == 0.0);
  CHECK(partition_visible_region(g, 3).axes[0].hi == 100.0);
  auto g0 = line4(0);
  CHECK(partition_visible_region(g0, 2) == g0.cell(2));

  SplitMix64 rng(9);
  for (int i = 0; i < 500; ++i) {
    double l = rng.uniform(25, 50);
    HyperRect single{{{std::max(0.0, l - 10), std::min(100.0, l + 10)}}};
    CHECK(single.axes[0].lo >= vr.axes[0].lo);
    CHECK(single.axes[0].hi <= vr.axes[0].hi);
  }
}

TEST_CASE("replication targets") {
  auto g = line4(3);
  double mid[] = {37.5}, edge[] = {49.0}, cut[] = {50.0};
  CHECK(replication_targets(g, mid) == std::vector<int>{1});
  CHECK(replication_targets(g, edge) == std::vector<int>{1, 2});
  CHECK(replication_targets(g, cut) == std::vector<int>{1, 2});
  auto wide = line4(1000);
  CHECK(replication_targets(wide, mid) == std::vector<int>{0, 1, 2, 3});

  const int counts[] = {3, 2};
  auto g2 = uniform_grid(box({{0, 30}, {0, 20}}), counts, box({{-2, 2}, {-2, 2}}));
  SplitMix64 rng(2);
  for (int i = 0; i < 500; ++i) {
    double loc[] = {rng.uniform(0, 30), rng.uniform(0, 20)};
    std::vector<int> expect;
    for (int p = 0; p < g2.partition_count(); ++p) {
      if (partition_visible_region(g2, p).contains(loc)) expect.push_back(p);
    }
    auto got = replication_targets(g2, loc);
    CHECK(got == expect);
    CHECK(std::find(got.begin(), got.end(), assign_partition(g2, loc)) != got.end());
  }
}

TEST_CASE("replication is sound for visible pairs") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SplitMix64 rng(seed);
    std::vector<double> cuts;
    for (int i = 0; i < 3; ++i) cuts.push_back(rng.uniform(0, 50));
    std::sort(cuts.begin(), cuts.end());
    GridPartitioning g{box({{0, 50}, {0, 50}}), {cuts, {}}, box({{-1.5, 2.5}, {-1, 1}})};
    std::vector<std::array<double, 2>> pts(256);
    for (auto &p : pts) p = {rng.uniform(0, 50), rng.uniform(0, 50)};
    for (const auto &a : pts) {
      for (const auto &b : pts) {
        const bool visible = b[0] >= a[0] - 1.5 && b[0] <= a[0] + 2.5 && b[1] >= a[1] - 1 && b[1] <= a[1] + 1;
        if (!visible) continue;
        auto t = replication_targets(g, b);
        CHECK(std::find(t.begin(), t.end(), assign_partition(g, a)) != t.end());
      }
    }
  }
}

TEST_CASE("balanced cuts split the population evenly") {
  SplitMix64 rng(3);
  std::vector<double> xs;
  for (int i = 0; i < 4000; ++i) xs.push_back(rng.uniform() < 0.5 ? rng.uniform(0, 10) : rng.uniform(90, 100));
  auto g = balanced_grid(box({{0, 100}}), 8, xs, box({{-1, 1}}));
  REQUIRE(g.cuts[0].size() == 7);
  CHECK(std::is_sorted(g.cuts[0].begin(), g.cuts[0].end()));
  std::vector<int> owned(8, 0);
  for (double x : xs) {
    double loc[] = {x};
    ++owned[assign_partition(g, loc)];
  }
  for (int n : owned) CHECK(n == doctest::Approx(500).epsilon(0.05));
}

TEST_CASE("kd-tree range queries equal a linear scan") {
  const std::vector<double> none;
  auto empty = kd_build(2, none, {});
  CHECK(kd_range(empty, box({{-1, 1}, {-1, 1}})).empty());

  for (int dim : {1, 2}) {
    SplitMix64 rng(17 + dim);
    std::vector<double> coords;
    std::vector<std::uint32_t> items;
    for (std::uint32_t i = 0; i < 1000; ++i) {
      for (int a = 0; a < dim; ++a) coords.push_back(std::floor(rng.uniform(0, 100) * 4) / 4);
      items.push_back(i);
    }
    auto idx = kd_build(dim, coords, items);
    HyperRect all;
    for (int a = 0; a < dim; ++a) all.axes.push_back({0, 100});
    CHECK(kd_range(idx, all).size() == 1000);
    for (int q = 0; q < 100; ++q) {
      HyperRect r;
      for (int a = 0; a < dim; ++a) {
        double lo = std::floor(rng.uniform(0, 100) * 4) / 4;
        double hi = lo + std::floor(rng.uniform(0, 30) * 4) / 4;
        r.axes.push_back({lo, hi});
      }
      std::set<std::uint32_t> expect;
      for (std::uint32_t i = 0; i < 1000; ++i) {
        if (r.contains(std::span<const double>(&coords[i * dim], dim))) expect.insert(i);
      }
      auto got = kd_range(idx, r);
      CHECK(got.size() == expect.size());
      CHECK(std::set<std::uint32_t>(got.begin(), got.end()) == expect);
    }
  }
}

TEST_CASE("reachability cropping") {
  CHECK(crop_reachability({-1, 1}, 5.0, 7.3) == 6.0);
  CHECK(crop_reachability({-1, 1}, 5.0, 3.2) == 4.0);
  CHECK(crop_reachability({-1, 1}, 5.0, 5.5) == 5.5);
  SplitMix64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    dsl::Interval r{rng.uniform(-3, 0), rng.uniform(0, 3)};
    double old = rng.uniform(-50, 50), nw = rng.uniform(-60, 60);
    CHECK(std::fabs(crop_reachability(r, old, nw) - old) <= std::max(std::fabs(r.lo), std::fabs(r.hi)) + 1e-12);
  }
}
