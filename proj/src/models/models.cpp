#include <charconv>
#include <cmath>
#include <numbers>

#include "brace/ir.hpp"
#include "brace/models.hpp"
#include "brace/random.hpp"

namespace brace::models {

// Defined in the generated bundled_models.cpp.
extern const char *const kFishAsset;
extern const char *const kTrafficAsset;
extern const char *const kPredatorLocalAsset;
extern const char *const kPredatorNonlocalAsset;

const char *model_name(Model m) {
  switch (m) {
    case Model::Fish: return "fish";
    case Model::Traffic: return "traffic";
    case Model::PredatorLocal: return "predator-local";
    case Model::PredatorNonlocal: return "predator-nonlocal";
  }
  return "?";
}

std::optional<Model> model_from_name(std::string_view name) {
  for (Model m : all_models()) {
    if (name == model_name(m)) return m;
  }
  return std::nullopt;
}

std::vector<Model> all_models() {
  return {Model::Fish, Model::Traffic, Model::PredatorLocal, Model::PredatorNonlocal};
}

std::string_view bundled_asset(Model m) {
  switch (m) {
    case Model::Fish: return kFishAsset;
    case Model::Traffic: return kTrafficAsset;
    case Model::PredatorLocal: return kPredatorLocalAsset;
    case Model::PredatorNonlocal: return kPredatorNonlocalAsset;
  }
  return {};
}

namespace {

std::string real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string integer(long long v) { return std::to_string(v); }

}  // namespace

std::map<std::string, std::string> script_parameters(const ModelConfig &cfg) {
  std::map<std::string, std::string> p;
  switch (cfg.model) {
    case Model::Fish: {
      const auto &f = cfg.fish;
      p = {{"alpha", real(f.alpha)}, {"rho", real(f.rho)},       {"omega", real(f.omega)},
           {"speed", real(f.speed)}, {"dir1x", real(f.dir1[0])}, {"dir1y", real(f.dir1[1])},
           {"dir2x", real(f.dir2[0])}, {"dir2y", real(f.dir2[1])}};
      break;
    }
    case Model::Traffic: {
      const auto &t = cfg.traffic;
      p = {{"lanes", integer(t.lanes)},       {"lookahead", real(t.lookahead)}, {"vmax", real(t.vmax)},
           {"accel", real(t.accel)},          {"min_gap", real(t.min_gap)},     {"rear_gap", real(t.rear_gap)},
           {"w_speed", real(t.w_speed)},      {"w_density", real(t.w_density)},
           {"reluctance", real(t.reluctance)}};
      break;
    }
    case Model::PredatorLocal:
    case Model::PredatorNonlocal: {
      const auto &d = cfg.predator;
      p = {{"range", real(d.range)},   {"bite", real(d.bite)},     {"damage", real(d.damage)},
           {"spawn", real(d.spawn)},   {"health", real(d.health)}, {"speed", real(d.speed)}};
      break;
    }
  }
  return p;
}

std::string substitute(std::string_view text, const std::map<std::string, std::string> &params) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t open = text.find("${", i);
    if (open == std::string_view::npos) {
      out.append(text.substr(i));
      break;
    }
    out.append(text.substr(i, open - i));
    const std::size_t close = text.find('}', open);
    if (close == std::string_view::npos) throw ConfigError("unterminated ${ in model script");
    const std::string key(text.substr(open + 2, close - open - 2));
    auto it = params.find(key);
    if (it == params.end()) throw ConfigError("unknown model parameter '" + key + "'");
    out += it->second;
    i = close + 1;
  }
  return out;
}

dsl::ScriptSource bundled_script(const ModelConfig &cfg) {
  validate(cfg);
  return {substitute(bundled_asset(cfg.model), script_parameters(cfg)),
          std::string("<model ") + model_name(cfg.model) + ">"};
}

dsl::ScriptSource bundled_script(Model m) {
  ModelConfig cfg;
  cfg.model = m;
  return bundled_script(cfg);
}

void validate(const ModelConfig &cfg) {
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw ConfigError(what);
  };
  for (const auto &b : cfg.bounds) require(b.lo < b.hi, "world bounds must have lo < hi");
  switch (cfg.model) {
    case Model::Fish: {
      const auto &f = cfg.fish;
      require(f.alpha > 0 && f.alpha < f.rho, "fish: need 0 < alpha < rho");
      require(f.omega >= 0, "fish: omega must be non-negative");
      require(f.informed >= 0 && f.informed <= 1, "fish: informed fraction must lie in [0, 1]");
      require(f.speed >= 0 && f.speed <= f.rho, "fish: speed must lie in [0, rho]");
      break;
    }
    case Model::Traffic: {
      const auto &t = cfg.traffic;
      require(t.lanes >= 1, "traffic: need at least one lane");
      require(t.lookahead == 200.0, "traffic: lookahead is fixed at 200");
      require(t.length > 0, "traffic: segment length must be positive");
      require(t.vmax > 0 && t.vmax < t.lookahead, "traffic: need 0 < vmax < lookahead");
      require(t.inflow >= 0 && t.inflow <= 1, "traffic: inflow must lie in [0, 1]");
      require(t.accel >= 0 && t.min_gap >= 0 && t.rear_gap >= 0 && t.w_speed >= 0 && t.w_density >= 0 &&
                  t.reluctance >= 0,
              "traffic: parameters must be non-negative");
      break;
    }
    case Model::PredatorLocal:
    case Model::PredatorNonlocal: {
      const auto &d = cfg.predator;
      require(d.range > 0 && d.bite >= 0 && d.damage >= 0 && d.spawn >= 0 && d.health >= 0 && d.speed >= 0,
              "predator: parameters must be non-negative");
      require(d.spawn <= 1, "predator: spawn probability must be at most 1");
      require(d.bite < d.range, "predator: bite radius must be below the range");
      require(d.speed <= 2 * d.range, "predator: speed must not exceed twice the range");
      break;
    }
  }
}

std::vector<dsl::Interval> default_bounds(Model m, std::size_t n, const ModelConfig &cfg) {
  switch (m) {
    case Model::Fish: {
      const double half = std::max(10.0, 1.5 * std::sqrt(static_cast<double>(n)));
      return {{-half, half}, {-half, half}};
    }
    case Model::Traffic:
      return {{0.0, cfg.traffic.length}};
    case Model::PredatorLocal:
    case Model::PredatorNonlocal: {
      const double half = std::max(5.0, std::sqrt(static_cast<double>(n)));
      return {{-half, half}, {-half, half}};
    }
  }
  return {};
}

WorldSpec world_of(const ModelConfig &cfg) {
  WorldSpec w;
  w.bounds = cfg.bounds.empty() ? default_bounds(cfg.model, cfg.n, cfg) : cfg.bounds;
  w.policy = cfg.model == Model::Traffic ? BoundaryPolicy::Wrap : BoundaryPolicy::Clamp;
  return w;
}

namespace {

int field(const CheckedScript &s, const char *name) {
  const int i = s.state_index(name);
  if (i < 0) throw ConfigError(std::string("model script has no state field '") + name + "'");
  return i;
}

}  // namespace

std::vector<AgentRecord> initialize(const CheckedScript &script, const ModelConfig &cfg) {
  validate(cfg);
  const WorldSpec world = world_of(cfg);
  SplitMix64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 17);
  const auto theta = ir::theta_vector(script);
  std::vector<AgentRecord> out;
  out.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    AgentRecord a{i + 1, std::vector<double>(script.states.size(), 0.0), theta};
    switch (cfg.model) {
      case Model::Fish: {
        a.s[field(script, "x")] = rng.uniform(world.bounds[0].lo, world.bounds[0].hi);
        a.s[field(script, "y")] = rng.uniform(world.bounds[1].lo, world.bounds[1].hi);
        const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
        a.s[field(script, "vx")] = std::cos(heading);
        a.s[field(script, "vy")] = std::sin(heading);
        const double u = rng.uniform();
        a.s[field(script, "group")] = u < cfg.fish.informed / 2 ? 1.0 : (u < cfg.fish.informed ? 2.0 : 0.0);
        break;
      }
      case Model::Traffic: {
        a.s[field(script, "x")] = rng.uniform(world.bounds[0].lo, world.bounds[0].hi);
        a.s[field(script, "lane")] = std::floor(rng.uniform() * cfg.traffic.lanes);
        a.s[field(script, "v")] = cfg.traffic.inflow * cfg.traffic.vmax;
        break;
      }
      case Model::PredatorLocal:
      case Model::PredatorNonlocal: {
        a.s[field(script, "x")] = rng.uniform(world.bounds[0].lo, world.bounds[0].hi);
        a.s[field(script, "y")] = rng.uniform(world.bounds[1].lo, world.bounds[1].hi);
        a.s[field(script, "vx")] = (rng.uniform() - 0.5) * cfg.predator.speed;
        a.s[field(script, "vy")] = (rng.uniform() - 0.5) * cfg.predator.speed;
        a.s[field(script, "health")] = cfg.predator.health;
        break;
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

double MetricRow::get(const std::string &name) const {
  for (const auto &[k, v] : values) {
    if (k == name) return v;
  }
  throw ConfigError("no metric '" + name + "'");
}

std::vector<std::string> metric_columns(const ModelConfig &cfg) {
  switch (cfg.model) {
    case Model::Fish:
      return {"centroid_x", "centroid_y", "spread", "polarization"};
    case Model::Traffic: {
      std::vector<std::string> cols;
      for (int l = 0; l < cfg.traffic.lanes; ++l) {
        cols.push_back("lane" + std::to_string(l + 1) + "_velocity");
        cols.push_back("lane" + std::to_string(l + 1) + "_density");
      }
      cols.push_back("lane_changes");
      return cols;
    }
    case Model::PredatorLocal:
    case Model::PredatorNonlocal:
      return {"population", "births", "deaths"};
  }
  return {};
}

MetricRow model_metrics(const ModelConfig &cfg, const CheckedScript &script, std::span<const AgentRecord> agents,
                        std::uint64_t, const TickCounts &counts) {
  MetricRow row;
  const double n = static_cast<double>(agents.size());
  switch (cfg.model) {
    case Model::Fish: {
      const int x = field(script, "x"), y = field(script, "y");
      const int vx = field(script, "vx"), vy = field(script, "vy");
      double cx = 0, cy = 0, px = 0, py = 0;
      for (const auto &a : agents) {
        cx += a.s[x];
        cy += a.s[y];
        px += a.s[vx];
        py += a.s[vy];
      }
      if (n > 0) {
        cx /= n;
        cy /= n;
      }
      double spread = 0;
      for (const auto &a : agents) spread += std::hypot(a.s[x] - cx, a.s[y] - cy);
      row.values = {{"centroid_x", cx},
                    {"centroid_y", cy},
                    {"spread", n > 0 ? spread / n : 0.0},
                    {"polarization", n > 0 ? std::hypot(px, py) / n : 0.0}};
      break;
    }
    case Model::Traffic: {
      const int lane = field(script, "lane"), v = field(script, "v"), changed = field(script, "changed");
      const int lanes = cfg.traffic.lanes;
      std::vector<double> speed(lanes, 0.0), count(lanes, 0.0);
      double changes = 0;
      for (const auto &a : agents) {
        const int l = static_cast<int>(a.s[lane]);
        if (l >= 0 && l < lanes) {
          speed[l] += a.s[v];
          count[l] += 1;
        }
        changes += a.s[changed] != 0 ? 1 : 0;
      }
      for (int l = 0; l < lanes; ++l) {
        const std::string name = "lane" + std::to_string(l + 1);
        row.values.emplace_back(name + "_velocity", count[l] > 0 ? speed[l] / count[l] : 0.0);
        row.values.emplace_back(name + "_density", count[l]);
      }
      row.values.emplace_back("lane_changes", changes);
      break;
    }
    case Model::PredatorLocal:
    case Model::PredatorNonlocal:
      row.values = {{"population", n},
                    {"births", static_cast<double>(counts.births)},
                    {"deaths", static_cast<double>(counts.deaths)}};
      break;
  }
  return row;
}

}  // namespace brace::models
