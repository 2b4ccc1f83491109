#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace brace {

/// Which part of a tick issued a rand() call.
enum class RandPhase : std::uint64_t { Query = 1, Update = 2, Spawn = 3, Die = 4 };

std::uint64_t mix64(std::uint64_t x);

/// Counter-based generator: the value depends only on its coordinates, never
/// on how many draws happened before. `loop_keys` are the oids bound by the
/// enclosing foreach loops, outermost first.
double counter_uniform(std::uint64_t seed, std::uint64_t oid, std::uint64_t tick, RandPhase phase,
                       std::uint64_t stream, std::span<const std::uint64_t> loop_keys = {});

/// Object id of an agent spawned by `parent` during `tick`; fits in 53 bits.
std::uint64_t spawned_oid(std::uint64_t parent, std::uint64_t tick);

/// Sequential generator for population initializers.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
  std::uint64_t state_;
};

}  // namespace brace
