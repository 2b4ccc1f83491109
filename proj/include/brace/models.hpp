#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "brace/agents.hpp"
#include "brace/dsl.hpp"
#include "brace/sema.hpp"

namespace brace::models {

enum class Model { Fish, Traffic, PredatorLocal, PredatorNonlocal };

const char *model_name(Model m);
std::optional<Model> model_from_name(std::string_view name);
std::vector<Model> all_models();

struct FishParams {
  double alpha = 1.0;     // avoidance radius
  double rho = 4.0;       // attraction radius and visibility bound
  double omega = 0.5;     // preferred-direction weight
  double informed = 0.1;  // fraction of informed fish, split over two groups
  double speed = 0.5;
  double dir1[2] = {1.0, 0.0};
  double dir2[2] = {-1.0, 0.0};
};

struct TrafficParams {
  double length = 20000.0;
  int lanes = 4;
  double lookahead = 200.0;
  double inflow = 0.6;  // entry speed as a fraction of vmax
  double vmax = 30.0;
  double accel = 3.0;
  double min_gap = 8.0;
  double rear_gap = 10.0;
  double w_speed = 0.2;
  double w_density = 0.5;
  double reluctance = 4.0;
};

struct PredatorParams {
  double range = 2.0;
  double bite = 0.6;
  double damage = 0.5;
  double spawn = 0.03;
  double health = 3.0;
  double speed = 0.8;
};

struct ModelConfig {
  Model model = Model::Fish;
  std::size_t n = 0;
  /// World bounds per spatial axis; empty means the model default for n.
  std::vector<dsl::Interval> bounds;
  FishParams fish;
  TrafficParams traffic;
  PredatorParams predator;
  std::uint64_t seed = 1;
};

/// Raw asset text with `${name}` placeholders.
std::string_view bundled_asset(Model m);

/// The model's script with its parameters filled in.
dsl::ScriptSource bundled_script(const ModelConfig &cfg);
dsl::ScriptSource bundled_script(Model m);

/// Parameter values substituted into the asset.
std::map<std::string, std::string> script_parameters(const ModelConfig &cfg);

/// Replaces `${name}`; throws ConfigError on unknown or unterminated placeholders.
std::string substitute(std::string_view text, const std::map<std::string, std::string> &params);

/// Throws ConfigError on parameter violations.
void validate(const ModelConfig &cfg);

std::vector<dsl::Interval> default_bounds(Model m, std::size_t n, const ModelConfig &cfg);
WorldSpec world_of(const ModelConfig &cfg);

std::vector<AgentRecord> initialize(const CheckedScript &script, const ModelConfig &cfg);

struct MetricRow {
  std::vector<std::pair<std::string, double>> values;
  double get(const std::string &name) const;
};

struct TickCounts {
  std::uint64_t births = 0;
  std::uint64_t deaths = 0;
};

std::vector<std::string> metric_columns(const ModelConfig &cfg);
MetricRow model_metrics(const ModelConfig &cfg, const CheckedScript &script, std::span<const AgentRecord> agents,
                        std::uint64_t tick, const TickCounts &counts = {});

}  // namespace brace::models
