#include <algorithm>
#include <numeric>

#include "brace/spatial.hpp"

namespace brace::spatial {

namespace {
constexpr std::size_t kLeafSize = 8;
}

KdIndex kd_build(int dim, std::span<const double> coords, std::span<const std::uint32_t> items) {
  KdIndex idx;
  idx.dim_ = dim;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  idx.coords_.assign(coords.begin(), coords.end());
  idx.items_.assign(items.begin(), items.end());
  idx.order_ = std::move(order);
  idx.build(0, items.size(), 0);
  std::vector<double> c(coords.size());
  std::vector<std::uint32_t> it(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::copy_n(&coords[idx.order_[i] * dim], dim, &c[i * dim]);
    it[i] = items[idx.order_[i]];
  }
  idx.coords_ = std::move(c);
  idx.items_ = std::move(it);
  idx.order_.clear();
  idx.order_.shrink_to_fit();
  return idx;
}

// Median split on the permutation; coordinates are gathered once at the end.
void KdIndex::build(std::size_t begin, std::size_t end, int depth) {
  if (end - begin <= kLeafSize) return;
  const int axis = depth % dim_;
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) { return coords_[a * dim_ + axis] < coords_[b * dim_ + axis]; });
  build(begin, mid, depth + 1);
  build(mid + 1, end, depth + 1);
}

void KdIndex::query(std::size_t begin, std::size_t end, int depth, const double *lo, const double *hi,
                    std::vector<std::uint32_t> &out) const {
  auto inside = [&](std::size_t i) {
    const double *p = &coords_[i * dim_];
    for (int a = 0; a < dim_; ++a) {
      if (!(p[a] >= lo[a] && p[a] <= hi[a])) return false;
    }
    return true;
  };
  if (end - begin <= kLeafSize) {
    for (std::size_t i = begin; i < end; ++i) {
      if (inside(i)) out.push_back(items_[i]);
    }
    return;
  }
  const int axis = depth % dim_;
  const std::size_t mid = begin + (end - begin) / 2;
  const double split = coords_[mid * dim_ + axis];
  if (lo[axis] <= split) query(begin, mid, depth + 1, lo, hi, out);
  if (inside(mid)) out.push_back(items_[mid]);
  if (hi[axis] >= split) query(mid + 1, end, depth + 1, lo, hi, out);
}

void KdIndex::range(const double *lo, const double *hi, std::vector<std::uint32_t> &out) const {
  if (items_.empty()) return;
  query(0, items_.size(), 0, lo, hi, out);
}

std::vector<std::uint32_t> kd_range(const KdIndex &idx, const HyperRect &r) {
  std::vector<double> lo, hi;
  for (const auto &a : r.axes) {
    lo.push_back(a.lo);
    hi.push_back(a.hi);
  }
  std::vector<std::uint32_t> out;
  idx.range(lo.data(), hi.data(), out);
  return out;
}

}  // namespace brace::spatial
