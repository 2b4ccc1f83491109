#include "brace/agents.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "brace/random.hpp"

namespace brace {

bool same_population(std::span<const AgentRecord> a, std::span<const AgentRecord> b) {
  return describe_difference(a, b).empty();
}

std::string describe_difference(std::span<const AgentRecord> a, std::span<const AgentRecord> b) {
  std::ostringstream os;
  if (a.size() != b.size()) {
    os << "population size " << a.size() << " vs " << b.size();
    return os.str();
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].oid != b[i].oid) {
      os << "agent " << i << ": oid " << a[i].oid << " vs " << b[i].oid;
      return os.str();
    }
    if (a[i].s.size() != b[i].s.size()) {
      os << "oid " << a[i].oid << ": state width differs";
      return os.str();
    }
    for (std::size_t f = 0; f < a[i].s.size(); ++f) {
      if (std::bit_cast<std::uint64_t>(a[i].s[f]) != std::bit_cast<std::uint64_t>(b[i].s[f])) {
        os.precision(17);
        os << "oid " << a[i].oid << " field " << f << ": " << a[i].s[f] << " vs " << b[i].s[f];
        return os.str();
      }
    }
  }
  return {};
}

std::uint64_t state_hash(const AgentRecord &a) {
  std::uint64_t h = mix64(a.oid ^ 0x9e3779b97f4a7c15ULL);
  for (double v : a.s) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  return h;
}

void sort_by_oid(std::vector<AgentRecord> &agents) {
  std::sort(agents.begin(), agents.end(),
            [](const AgentRecord &x, const AgentRecord &y) { return x.oid < y.oid; });
}

Scalar state_scalar(const CheckedScript &script, int state_index, double v) {
  if (script.states[state_index].type == dsl::ValueType::Agent) {
    return std::isnan(v) ? Scalar::nil() : Scalar{Scalar::Kind::Key, v};
  }
  return Scalar::num(v);
}

double scalar_to_state(const CheckedScript &script, int state_index, const Scalar &v) {
  if (script.states[state_index].type == dsl::ValueType::Agent) {
    return v.kind == Scalar::Kind::Key ? v.v : std::nan("");
  }
  return v.v;
}

std::vector<AxisRange> visibility_axes(const CheckedScript &script) {
  std::vector<AxisRange> out;
  for (const auto &sf : script.spatial_fields) out.push_back({sf.state_index, sf.range.lo, sf.range.hi});
  return out;
}

const char *boundary_policy_name(BoundaryPolicy p) {
  return p == BoundaryPolicy::Clamp ? "clamp" : "wrap";
}

bool apply_boundary(BoundaryPolicy policy, const dsl::Interval &b, double &v) {
  if (std::isnan(v)) {
    v = b.lo;
    return true;
  }
  if (v >= b.lo && v <= b.hi) return false;
  if (policy == BoundaryPolicy::Wrap) {
    const double w = b.hi - b.lo;
    if (w > 0.0) {
      double r = std::fmod(v - b.lo, w);
      if (r < 0.0) r += w;
      v = b.lo + r;
      if (v >= b.lo && v <= b.hi) return false;
    }
  }
  v = v < b.lo ? b.lo : b.hi;
  return true;
}

const char *visibility_mode_name(VisibilityMode m) {
  switch (m) {
    case VisibilityMode::Off: return "off";
    case VisibilityMode::WeakRef: return "weak-ref";
    case VisibilityMode::Restricted: return "restricted";
  }
  return "?";
}

}  // namespace brace
