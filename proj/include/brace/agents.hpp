#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brace/scalar.hpp"
#include "brace/sema.hpp"

namespace brace {

/// ⟨oid, s, e⟩. States are stored as doubles in field order; agent-typed
/// fields hold the referenced oid, or NaN for NIL.
struct AgentRecord {
  std::uint64_t oid = 0;
  std::vector<double> s;
  std::vector<double> e;

  friend bool operator==(const AgentRecord &, const AgentRecord &) = default;
};

/// Bitwise comparison of two populations (NaN-safe, -0 distinct from +0).
bool same_population(std::span<const AgentRecord> a, std::span<const AgentRecord> b);

/// First difference between two populations, or empty.
std::string describe_difference(std::span<const AgentRecord> a, std::span<const AgentRecord> b);

/// Order-independent content hash of one agent's state.
std::uint64_t state_hash(const AgentRecord &a);

/// Sorts by oid.
void sort_by_oid(std::vector<AgentRecord> &agents);

Scalar state_scalar(const CheckedScript &script, int state_index, double v);
double scalar_to_state(const CheckedScript &script, int state_index, const Scalar &v);

/// One spatial axis of the visibility rectangle: `field` is a state index.
struct AxisRange {
  int field = 0;
  double lo = 0.0;
  double hi = 0.0;
};

std::vector<AxisRange> visibility_axes(const CheckedScript &script);

/// b lies in a's visibility rectangle: a.f + lo <= b.f <= a.f + hi on every axis.
inline bool visible_box(const double *a, const double *b, std::span<const AxisRange> axes) {
  for (const auto &ax : axes) {
    const double v = b[ax.field];
    if (!(v >= a[ax.field] + ax.lo)) return false;
    if (!(v <= a[ax.field] + ax.hi)) return false;
  }
  return true;
}

enum class BoundaryPolicy { Clamp, Wrap };

const char *boundary_policy_name(BoundaryPolicy p);

/// World bounds per spatial axis, in axis order.
struct WorldSpec {
  std::vector<dsl::Interval> bounds;
  BoundaryPolicy policy = BoundaryPolicy::Clamp;
};

/// Brings an out-of-bounds coordinate back into [lo, hi]. Returns true when
/// the value had to be changed by clamping (wrapping is not counted).
bool apply_boundary(BoundaryPolicy policy, const dsl::Interval &bounds, double &v);

/// How references are resolved during the query phase.
enum class VisibilityMode {
  Off,         // every other agent is in the extent
  WeakRef,     // full extent; loops and dereferences check visibility
  Restricted,  // extent pre-filtered to the visible rectangle
};

const char *visibility_mode_name(VisibilityMode m);

}  // namespace brace
