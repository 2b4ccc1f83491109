#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "brace/cli.hpp"
#include "brace/error.hpp"
#include "brace/ir.hpp"

namespace brace::cli {

namespace {

std::string read_text(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string expand_tick(std::string path, std::uint64_t tick) {
  const std::string tag = "{tick}";
  for (auto p = path.find(tag); p != std::string::npos; p = path.find(tag)) {
    path.replace(p, tag.size(), std::to_string(tick));
  }
  return path;
}

void report(std::ostream &err, const SemanticErrors &e) {
  for (const auto &d : e.diagnostics) err << "error: " << to_string(d.pos) << ": " << d.message << "\n";
}

template <class F>
int guarded(std::ostream &err, F &&body) {
  try {
    return body();
  } catch (const SemanticErrors &e) {
    report(err, e);
  } catch (const LexError &e) {
    err << "error: " << e.what() << "\n";
  } catch (const ParseError &e) {
    err << "error: " << e.what() << "\n";
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUserError;
}

models::TickCounts counts_of(const runtime::EpochMetrics &m) {
  models::TickCounts c;
  for (const auto &w : m.workers) {
    c.births += w.births;
    c.deaths += w.deaths;
  }
  return c;
}

void print_plan(std::ostream &out, const ir::QueryPhasePlan &p) {
  out << "query: " << ir::print_plan(p.q) << "\n";
  out << "effects: " << ir::print_plan(p.effect_gen) << "\n";
  if (p.non_local) out << "redistribute: " << ir::print_plan(p.redistribute) << "\n";
  out << "inline: " << ir::print_plan(p.inline_effects) << "\n";
  out << "update: " << ir::print_plan(p.update) << "\n";
}

}  // namespace

CheckedScript load_script(const RunConfig &cfg) {
  if (cfg.script.empty()) return compile_script(models::bundled_script(cfg.model));
  std::string text = read_text(cfg.script);
  if (text.find("${") != std::string::npos) text = models::substitute(text, models::script_parameters(cfg.model));
  return compile_script({std::move(text), cfg.script});
}

Prepared prepare(const RunConfig &cfg) {
  validate(cfg);
  Prepared p;
  p.original = load_script(cfg);
  opt::PlanOptions po;
  po.invert = cfg.invert;
  po.simplify = cfg.simplify;
  po.lowering.visibility = cfg.visibility;
  p.planned = opt::classify_and_plan(p.original, po);
  p.cluster.workers = cfg.workers;
  p.cluster.scheduler = cfg.scheduler;
  p.cluster.kernel.visibility = cfg.visibility;
  p.cluster.kernel.use_index = cfg.index;
  p.cluster.kernel.probes = p.planned.probes;
  p.cluster.world = models::world_of(cfg.model);
  p.cluster.seed = cfg.model.seed;
  return p;
}

std::vector<std::string> csv_header(const RunConfig &cfg) {
  std::vector<std::string> h = {"epoch", "tick",  "wall_seconds", "agent_ticks_per_sec", "worker",
                                "owned", "replicas", "msgs",     "migrations"};
  for (auto &c : models::metric_columns(cfg.model)) h.push_back(std::move(c));
  return h;
}

void write_csv_rows(std::ostream &out, const RunConfig &cfg, const runtime::EpochMetrics &m,
                    const models::MetricRow &metrics) {
  const double wall = cfg.canonical ? 0.0 : m.wall_seconds;
  const double rate = cfg.canonical ? 0.0 : m.agent_ticks_per_sec;
  for (std::size_t w = 0; w < m.workers.size(); ++w) {
    const auto &s = m.workers[w];
    out << m.epoch << ',' << m.tick << ',' << wall << ',' << rate << ',' << w << ',' << s.owned << ','
        << s.replicas << ',' << (s.effect_msgs + s.agent_msgs) << ',' << s.migrations;
    for (const auto &[name, v] : metrics.values) out << ',' << v;
    out << '\n';
  }
}

int cmd_compile(const std::string &target, bool dump_plan, bool explain, const RunConfig &cfg, std::ostream &out,
                std::ostream &err) {
  return guarded(err, [&] {
    RunConfig c = cfg;
    if (auto m = models::model_from_name(target)) {
      c.model.model = *m;
      c.script.clear();
    } else {
      c.script = target;
      std::string stem = std::filesystem::path(target).stem().string();
      std::replace(stem.begin(), stem.end(), '_', '-');
      if (auto m = models::model_from_name(stem)) c.model.model = *m;
    }
    auto cs = load_script(c);
    opt::PlanOptions po;
    po.invert = c.invert;
    po.simplify = c.simplify;
    po.lowering.visibility = c.visibility;
    auto planned = opt::classify_and_plan(cs, po);
    out << "ok: " << locality_name(cs.locality) << ", " << runtime::pipeline_name(planned.pipeline) << "\n";
    if (c.invert && planned.report.count("invert_effects") > 0) {
      out << "inverted script:\n" << dsl::pretty_print(planned.script.ast);
    }
    if (dump_plan) print_plan(out, planned.plan);
    if (explain) out << opt::explain(planned.report);
    return static_cast<int>(kOk);
  });
}

int cmd_run(const RunConfig &cfg, std::ostream &err, const std::optional<std::string> &resume_from) {
  return guarded(err, [&]() -> int {
    Prepared p = prepare(cfg);
    std::optional<runtime::Cluster> cluster;
    if (resume_from) {
      auto cp = runtime::checkpoint_read(*resume_from);
      if (cp.seed != cfg.model.seed) throw ConfigError("checkpoint was written with a different seed");
      cluster.emplace(runtime::checkpoint_restore(p.planned.script, p.cluster, cp));
    } else {
      cluster.emplace(p.planned.script, p.cluster, models::initialize(p.original, cfg.model));
    }

    std::ofstream file;
    if (!cfg.metrics.empty()) {
      file.open(cfg.metrics, resume_from ? std::ios::app : std::ios::trunc);
      if (!file) throw std::runtime_error("cannot write '" + cfg.metrics + "'");
    }
    std::ostream &out = cfg.metrics.empty() ? std::cout : file;
    out.precision(10);
    const bool header = !resume_from;
    if (header) {
      const auto h = csv_header(cfg);
      for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
      out << '\n';
    }

    const std::uint64_t total = static_cast<std::uint64_t>(cfg.ticks);
    const std::uint64_t per = static_cast<std::uint64_t>(cfg.epoch.ticks_per_epoch);
    while (cluster->current_tick() < total) {
      runtime::EpochConfig ec = cfg.epoch;
      ec.checkpoint_every = 0;
      ec.ticks_per_epoch = static_cast<int>(std::min(per, total - cluster->current_tick()));
      auto rows = runtime::run_epochs(*cluster, ec, 1);
      auto &m = rows.front();
      m.epoch = static_cast<int>((cluster->current_tick() + per - 1) / per);
      const auto metrics = models::model_metrics(cfg.model, cluster->script(), cluster->gather(),
                                                 cluster->current_tick(), counts_of(m));
      write_csv_rows(out, cfg, m, metrics);
      if (cfg.epoch.checkpoint_every > 0 && m.epoch % cfg.epoch.checkpoint_every == 0) {
        runtime::checkpoint_write(*cluster, expand_tick(cfg.checkpoint, cluster->current_tick()));
      }
    }
    out.flush();
    if (!out) throw std::runtime_error("failed writing metrics");
    return kOk;
  });
}

int cmd_verify(const RunConfig &cfg, std::ostream &out, std::ostream &err) {
  return guarded(err, [&]() -> int {
    Prepared p = prepare(cfg);
    auto oracle = models::initialize(p.original, cfg.model);
    runtime::Cluster cluster(p.planned.script, p.cluster, oracle);
    out << "verify: " << models::model_name(cfg.model.model) << ", " << cfg.workers << " workers, "
        << runtime::pipeline_name(cluster.pipeline()) << ", " << cfg.ticks << " ticks\n";
    for (int t = 0; t < cfg.ticks; ++t) {
      auto next = ir::run_tick_sequential(p.original, oracle, cfg.visibility, cfg.model.seed,
                                          static_cast<std::uint64_t>(t), p.cluster.world);
      const auto planned = ir::run_tick_with_plan(p.planned.script, p.planned.plan, oracle, cfg.model.seed,
                                                  static_cast<std::uint64_t>(t), p.cluster.world);
      cluster.tick();
      const auto got = cluster.gather();
      if (!same_population(next, planned)) {
        out << "tick " << t << ": optimized plan differs: " << describe_difference(next, planned) << "\n";
        return static_cast<int>(kUserError);
      }
      if (!same_population(next, got)) {
        out << "tick " << t << ": runtime differs: " << describe_difference(next, got) << "\n";
        return static_cast<int>(kUserError);
      }
      oracle = std::move(next);
    }
    out << "bit-equal after " << cfg.ticks << " ticks (" << oracle.size() << " agents)\n";
    return static_cast<int>(kOk);
  });
}

}  // namespace brace::cli
