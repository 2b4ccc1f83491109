#include <algorithm>
#include <cmath>
#include <string>

#include "brace/spatial.hpp"

namespace brace::spatial {

bool HyperRect::contains(std::span<const double> loc) const {
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (!(loc[i] >= axes[i].lo && loc[i] <= axes[i].hi)) return false;
  }
  return true;
}

bool HyperRect::intersects(const HyperRect &o) const {
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (o.axes[i].hi < axes[i].lo || o.axes[i].lo > axes[i].hi) return false;
  }
  return true;
}

int GridPartitioning::partition_count() const {
  int n = 1;
  for (int a = 0; a < dim(); ++a) n *= cells_on_axis(a);
  return n;
}

HyperRect GridPartitioning::cell(int p) const {
  HyperRect r;
  r.axes.resize(dim());
  for (int a = dim() - 1; a >= 0; --a) {
    const int n = cells_on_axis(a);
    const int i = p % n;
    p /= n;
    r.axes[a].lo = i == 0 ? world.axes[a].lo : cuts[a][i - 1];
    r.axes[a].hi = i == n - 1 ? world.axes[a].hi : cuts[a][i];
  }
  return r;
}

GridPartitioning uniform_grid(const HyperRect &world, std::span<const int> counts, const HyperRect &offset) {
  GridPartitioning g{world, {}, offset};
  g.cuts.resize(world.dim());
  for (int a = 0; a < world.dim(); ++a) {
    const int n = a < static_cast<int>(counts.size()) ? std::max(1, counts[a]) : 1;
    const double lo = world.axes[a].lo;
    const double w = world.axes[a].hi - lo;
    for (int i = 1; i < n; ++i) g.cuts[a].push_back(lo + w * i / n);
  }
  return g;
}

std::vector<std::size_t> histogram(std::span<const double> xs, const dsl::Interval &extent, int buckets) {
  std::vector<std::size_t> hist(buckets, 0);
  const double w = extent.hi - extent.lo;
  for (double x : xs) {
    const int b = w > 0 ? static_cast<int>((x - extent.lo) / w * buckets) : 0;
    ++hist[std::clamp(b, 0, buckets - 1)];
  }
  return hist;
}

std::vector<double> quantile_cuts(std::span<const std::size_t> hist, const dsl::Interval &extent, int parts) {
  std::vector<double> cuts;
  const int buckets = static_cast<int>(hist.size());
  const double w = extent.hi - extent.lo;
  std::size_t total = 0;
  for (auto h : hist) total += h;
  std::size_t seen = 0;
  int b = 0;
  for (int k = 1; k < parts; ++k) {
    const double target = static_cast<double>(total) * k / parts;
    while (b < buckets && static_cast<double>(seen + hist[b]) <= target) seen += hist[b++];
    // Interpolate inside the bucket that crosses the quantile.
    double frac = 0.0;
    if (b < buckets && hist[b] > 0) frac = (target - static_cast<double>(seen)) / static_cast<double>(hist[b]);
    double cut = extent.lo + w * (b + frac) / buckets;
    if (!cuts.empty()) cut = std::max(cut, cuts.back());
    cuts.push_back(std::min(cut, extent.hi));
  }
  return cuts;
}

GridPartitioning balanced_grid(const HyperRect &world, int parts, std::span<const double> axis0,
                               const HyperRect &offset, int buckets) {
  GridPartitioning g{world, {}, offset};
  g.cuts.resize(world.dim());
  if (parts <= 1) return g;
  if (axis0.empty()) return uniform_grid(world, std::vector<int>{parts}, offset);
  g.cuts[0] = quantile_cuts(histogram(axis0, world.axes[0], buckets), world.axes[0], parts);
  return g;
}

int assign_partition(const GridPartitioning &g, std::span<const double> loc) {
  if (!g.world.contains(loc)) {
    std::string where;
    for (double v : loc) where += (where.empty() ? "" : ", ") + std::to_string(v);
    throw OutOfBounds("location (" + where + ") is outside the world");
  }
  int p = 0;
  for (int a = 0; a < g.dim(); ++a) {
    const auto &c = g.cuts[a];
    const int i = static_cast<int>(std::upper_bound(c.begin(), c.end(), loc[a]) - c.begin());
    p = p * g.cells_on_axis(a) + i;
  }
  return p;
}

HyperRect partition_visible_region(const GridPartitioning &g, int p) {
  HyperRect r = g.cell(p);
  for (int a = 0; a < g.dim(); ++a) {
    r.axes[a].lo = std::max(g.world.axes[a].lo, r.axes[a].lo + g.offset.axes[a].lo);
    r.axes[a].hi = std::min(g.world.axes[a].hi, r.axes[a].hi + g.offset.axes[a].hi);
  }
  return r;
}

std::vector<int> replication_targets(const GridPartitioning &g, std::span<const double> loc) {
  // Per axis, the cells i with loc ∈ [cell_lo(i) + off.lo, cell_hi(i) + off.hi].
  std::vector<std::pair<int, int>> span(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    const int n = g.cells_on_axis(a);
    const auto &c = g.cuts[a];
    const auto &off = g.offset.axes[a];
    auto cell_lo = [&](int i) { return i == 0 ? g.world.axes[a].lo : c[i - 1]; };
    auto cell_hi = [&](int i) { return i == n - 1 ? g.world.axes[a].hi : c[i]; };
    int first = n, last = -1;
    for (int i = 0; i < n; ++i) {
      const double vlo = std::max(g.world.axes[a].lo, cell_lo(i) + off.lo);
      const double vhi = std::min(g.world.axes[a].hi, cell_hi(i) + off.hi);
      if (loc[a] >= vlo && loc[a] <= vhi) {
        first = std::min(first, i);
        last = i;
      }
    }
    span[a] = {first, last};
  }
  std::vector<int> out;
  std::vector<int> idx(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    if (span[a].first > span[a].second) return out;
    idx[a] = span[a].first;
  }
  while (true) {
    int p = 0;
    for (int a = 0; a < g.dim(); ++a) p = p * g.cells_on_axis(a) + idx[a];
    out.push_back(p);
    int a = g.dim() - 1;
    while (a >= 0 && idx[a] == span[a].second) {
      idx[a] = span[a].first;
      --a;
    }
    if (a < 0) break;
    ++idx[a];
  }
  return out;
}

double crop_reachability(const dsl::Interval &range, double old_value, double new_value) {
  return brace::crop_reachability(range.lo, range.hi, old_value, new_value);
}

}  // namespace brace::spatial
