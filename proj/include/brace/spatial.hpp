#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brace/dsl.hpp"
#include "brace/error.hpp"

namespace brace::spatial {

using Location = std::vector<double>;

/// Closed box, one interval per axis.
struct HyperRect {
  std::vector<dsl::Interval> axes;

  int dim() const { return static_cast<int>(axes.size()); }
  bool contains(std::span<const double> loc) const;
  bool intersects(const HyperRect &o) const;

  friend bool operator==(const HyperRect &, const HyperRect &) = default;
};

/// Rectilinear grid over the world. Partition ids are row-major with axis 0
/// varying slowest. Cells are half-open except the last cell on each axis.
struct GridPartitioning {
  HyperRect world;
  std::vector<std::vector<double>> cuts;  // interior cut points per axis, ascending
  HyperRect offset;                       // visibility offset, relative to a location

  int dim() const { return world.dim(); }
  int cells_on_axis(int axis) const { return static_cast<int>(cuts[axis].size()) + 1; }
  int partition_count() const;
  HyperRect cell(int p) const;
};

/// `counts[i]` equal cells along axis i.
GridPartitioning uniform_grid(const HyperRect &world, std::span<const int> counts, const HyperRect &offset);

/// `parts` cells along axis 0 holding roughly equal numbers of the given
/// axis-0 coordinates. Uses a fixed-resolution histogram of the world extent.
GridPartitioning balanced_grid(const HyperRect &world, int parts, std::span<const double> axis0,
                               const HyperRect &offset, int buckets = 1024);

/// Counts of xs in `buckets` equal slices of the extent (outliers go to the end buckets).
std::vector<std::size_t> histogram(std::span<const double> xs, const dsl::Interval &extent, int buckets);

/// parts - 1 cut points giving each cell an equal share of the histogram mass,
/// interpolated linearly inside the bucket where a quantile falls.
std::vector<double> quantile_cuts(std::span<const std::size_t> hist, const dsl::Interval &extent, int parts);

int assign_partition(const GridPartitioning &g, std::span<const double> loc);

/// cell(p) grown by the visibility offset, clipped to the world.
HyperRect partition_visible_region(const GridPartitioning &g, int p);

/// Every partition whose visible region contains loc, in ascending order.
std::vector<int> replication_targets(const GridPartitioning &g, std::span<const double> loc);

/// clamp(new, old + lo, old + hi)
double crop_reachability(const dsl::Interval &range, double old_value, double new_value);

/// Static balanced KD-tree over points with an opaque 32-bit payload each.
class KdIndex {
public:
  KdIndex() = default;

  int dim() const { return dim_; }
  std::size_t size() const { return items_.size(); }

  /// Appends the payload of every point inside the closed box [lo, hi].
  void range(const double *lo, const double *hi, std::vector<std::uint32_t> &out) const;

private:
  friend KdIndex kd_build(int dim, std::span<const double> coords, std::span<const std::uint32_t> items);

  void build(std::size_t begin, std::size_t end, int depth);
  void query(std::size_t begin, std::size_t end, int depth, const double *lo, const double *hi,
             std::vector<std::uint32_t> &out) const;

  int dim_ = 0;
  std::vector<double> coords_;  // dim_ per point, permuted with items_
  std::vector<std::uint32_t> items_;
  std::vector<std::size_t> order_;  // only during build
};

/// `coords` holds dim values per point; `items` one payload per point.
KdIndex kd_build(int dim, std::span<const double> coords, std::span<const std::uint32_t> items);

std::vector<std::uint32_t> kd_range(const KdIndex &idx, const HyperRect &r);

}  // namespace brace::spatial
