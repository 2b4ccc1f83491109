#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "brace/cli.hpp"
#include "brace/error.hpp"

namespace brace::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, const char *want) {
  throw ConfigError("'" + std::string(key) + "': expected " + want + ", got '" + std::string(value) + "'");
}

double real(std::string_view key, std::string_view v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a number");
  return out;
}

long long integer(std::string_view key, std::string_view v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "an integer");
  return out;
}

bool boolean(std::string_view key, std::string_view v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  bad(key, v, "true or false");
}

std::vector<double> reals(std::string_view key, std::string_view v) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < v.size()) {
    while (i < v.size() && (v[i] == ' ' || v[i] == ',')) ++i;
    std::size_t j = i;
    while (j < v.size() && v[j] != ' ' && v[j] != ',') ++j;
    if (j > i) out.push_back(real(key, v.substr(i, j - i)));
    i = j;
  }
  return out;
}

void direction(std::string_view key, std::string_view v, double (&d)[2]) {
  auto xs = reals(key, v);
  if (xs.size() != 2) bad(key, v, "two numbers");
  d[0] = xs[0];
  d[1] = xs[1];
}

using Setter = std::function<void(RunConfig &, std::string_view, std::string_view)>;

struct Key {
  const char *name;
  const char *help;
  Setter set;
};

#define REAL(field) [](RunConfig &c, std::string_view k, std::string_view v) { c.field = real(k, v); }

const std::vector<Key> &keys() {
  static const std::vector<Key> table = {
      {"model", "fish | traffic | predator-local | predator-nonlocal",
       [](RunConfig &c, std::string_view k, std::string_view v) {
         auto m = models::model_from_name(v);
         if (!m) bad(k, v, "a model name");
         c.model.model = *m;
       }},
      {"script", "path of a script to run instead of the bundled one",
       [](RunConfig &c, std::string_view, std::string_view v) { c.script = std::string(v); }},
      {"n", "initial number of agents",
       [](RunConfig &c, std::string_view k, std::string_view v) {
         const auto n = integer(k, v);
         if (n < 0) bad(k, v, "a count");
         c.model.n = static_cast<std::size_t>(n);
       }},
      {"seed", "global random seed",
       [](RunConfig &c, std::string_view k, std::string_view v) {
         c.model.seed = static_cast<std::uint64_t>(integer(k, v));
       }},
      {"bounds", "world bounds as lo hi pairs per axis",
       [](RunConfig &c, std::string_view k, std::string_view v) {
         auto xs = reals(k, v);
         if (xs.empty() || xs.size() % 2) bad(k, v, "lo hi pairs");
         c.model.bounds.clear();
         for (std::size_t i = 0; i < xs.size(); i += 2) c.model.bounds.push_back({xs[i], xs[i + 1]});
       }},
      {"workers", "number of workers",
       [](RunConfig &c, std::string_view k, std::string_view v) { c.workers = static_cast<int>(integer(k, v)); }},
      {"ticks", "total ticks to simulate",
       [](RunConfig &c, std::string_view k, std::string_view v) { c.ticks = static_cast<int>(integer(k, v)); }},
      {"ticks_per_epoch", "ticks between metric rows",
       [](RunConfig &c, std::string_view k, std::string_view v) {
         c.epoch.ticks_per_epoch = static_cast<int>(integer(k, v));
       }},
      {"checkpoint_every", "epochs between checkpoints, 0 disables",
       [](RunConfig &c, std::string_view k, std::string_view v) {
         c.epoch.checkpoint_every = static_cast<int>(integer(k, v));
       }},
      {"checkpoint", "checkpoint path; {tick} expands to the tick",
       [](RunConfig &c, std::string_view, std::string_view v) { c.checkpoint = std::string(v); }},
      {"rebalance", "repartition at epoch boundaries",
       [](RunConfig &c, std::string_view k, std::string_view v) { c.epoch.rebalance = boolean(k, v); }},
      {"imbalance_threshold", "max/mean owned agents that triggers a repartition", REAL(epoch.imbalance_threshold)},
      {"index", "use the spatial index for neighbour probes",
       [](RunConfig &c, std::string_view k, std::string_view v) { c.index = boolean(k, v); }},
      {"invert", "rewrite non-local effect assignments into local ones",
       [](RunConfig &c, std::string_view k, std::string_view v) { c.invert = boolean(k, v); }},
      {"simplify", "run the algebraic plan rewrites",
       [](RunConfig &c, std::string_view k, std::string_view v) { c.simplify = boolean(k, v); }},
      {"scheduler", "parallel | sequential",
       [](RunConfig &c, std::string_view k, std::string_view v) {
         if (v == "parallel") c.scheduler = runtime::Scheduler::Parallel;
         else if (v == "sequential") c.scheduler = runtime::Scheduler::Sequential;
         else bad(k, v, "parallel or sequential");
       }},
      {"visibility", "restricted | weakref | off",
       [](RunConfig &c, std::string_view k, std::string_view v) {
         if (v == "restricted") c.visibility = VisibilityMode::Restricted;
         else if (v == "weakref") c.visibility = VisibilityMode::WeakRef;
         else if (v == "off") c.visibility = VisibilityMode::Off;
         else bad(k, v, "restricted, weakref or off");
       }},
      {"metrics", "metrics CSV path, stdout when empty",
       [](RunConfig &c, std::string_view, std::string_view v) { c.metrics = std::string(v); }},
      {"canonical", "zero the timing columns",
       [](RunConfig &c, std::string_view k, std::string_view v) { c.canonical = boolean(k, v); }},
      {"fish.alpha", "avoidance radius", REAL(model.fish.alpha)},
      {"fish.rho", "attraction radius and visibility bound", REAL(model.fish.rho)},
      {"fish.omega", "preferred-direction weight", REAL(model.fish.omega)},
      {"fish.informed", "fraction of informed fish", REAL(model.fish.informed)},
      {"fish.speed", "distance per tick", REAL(model.fish.speed)},
      {"fish.dir1", "preferred direction of group 1",
       [](RunConfig &c, std::string_view k, std::string_view v) { direction(k, v, c.model.fish.dir1); }},
      {"fish.dir2", "preferred direction of group 2",
       [](RunConfig &c, std::string_view k, std::string_view v) { direction(k, v, c.model.fish.dir2); }},
      {"traffic.length", "segment length", REAL(model.traffic.length)},
      {"traffic.lanes", "lane count",
       [](RunConfig &c, std::string_view k, std::string_view v) {
         c.model.traffic.lanes = static_cast<int>(integer(k, v));
       }},
      {"traffic.lookahead", "lookahead distance (must be 200)", REAL(model.traffic.lookahead)},
      {"traffic.inflow", "entry speed as a fraction of vmax", REAL(model.traffic.inflow)},
      {"traffic.vmax", "speed limit", REAL(model.traffic.vmax)},
      {"traffic.accel", "speed gain per tick", REAL(model.traffic.accel)},
      {"traffic.min_gap", "gap kept to the leader", REAL(model.traffic.min_gap)},
      {"traffic.rear_gap", "extra rear gap for a lane change", REAL(model.traffic.rear_gap)},
      {"traffic.w_speed", "lane-change eagerness", REAL(model.traffic.w_speed)},
      {"traffic.w_density", "utility penalty per car in a lane", REAL(model.traffic.w_density)},
      {"traffic.reluctance", "utility penalty of the rightmost lane", REAL(model.traffic.reluctance)},
      {"predator.range", "visibility bound", REAL(model.predator.range)},
      {"predator.bite", "bite radius", REAL(model.predator.bite)},
      {"predator.damage", "damage per bite", REAL(model.predator.damage)},
      {"predator.spawn", "spawn probability per tick", REAL(model.predator.spawn)},
      {"predator.health", "initial health", REAL(model.predator.health)},
      {"predator.speed", "random-walk step", REAL(model.predator.speed)},
  };
  return table;
}

#undef REAL

}  // namespace

void apply_setting(RunConfig &cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto &k : keys()) {
    if (key == k.name) {
      k.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError &e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::string &path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto &k : keys()) out.emplace_back(k.name, k.help);
  return out;
}

void validate(const RunConfig &cfg) {
  if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  if (cfg.ticks < 0) throw ConfigError("ticks must be non-negative");
  if (cfg.epoch.ticks_per_epoch < 1) throw ConfigError("ticks_per_epoch must be at least 1");
  if (cfg.epoch.checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (cfg.epoch.checkpoint_every > 0 && cfg.checkpoint.empty()) {
    throw ConfigError("checkpoint_every needs a checkpoint path");
  }
  if (cfg.epoch.imbalance_threshold < 1) throw ConfigError("imbalance_threshold must be at least 1");
  models::validate(cfg.model);
}

}  // namespace brace::cli
