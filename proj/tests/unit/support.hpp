#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "brace/agents.hpp"
#include "brace/dsl.hpp"
#include "brace/ir.hpp"
#include "brace/random.hpp"

namespace test_support {

inline std::string read_file(const std::string &path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline brace::dsl::ScriptSource model_source(const std::string &name) {
  const std::string path = std::string(BRACE_MODELS_DIR) + "/" + name + ".brasil";
  return {read_file(path), path};
}

/// Random agents inside [-half, half] on every spatial axis; other fields in
/// [-1, 1], integers in {0, 1, 2}, agent references to another oid.
inline std::vector<brace::AgentRecord> random_population(const brace::CheckedScript &cs, std::size_t n,
                                                         std::uint64_t seed, double half) {
  brace::SplitMix64 rng(seed);
  std::vector<brace::AgentRecord> pop;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(cs.states.size(), 0.0);
    for (std::size_t f = 0; f < s.size(); ++f) {
      const auto &st = cs.states[f];
      if (st.range) {
        s[f] = rng.uniform(-half, half);
      } else if (st.type == brace::dsl::ValueType::Int) {
        s[f] = std::floor(rng.uniform(0, 3));
      } else if (st.type == brace::dsl::ValueType::Agent) {
        s[f] = static_cast<double>(1 + static_cast<std::uint64_t>(rng.uniform(0, static_cast<double>(n))));
      } else {
        s[f] = rng.uniform(-1, 1);
      }
    }
    pop.push_back({i + 1, std::move(s), brace::ir::theta_vector(cs)});
  }
  return pop;
}

}  // namespace test_support
