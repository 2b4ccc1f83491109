#include <CLI11.hpp>

#include <iostream>

#include "brace/cli.hpp"
#include "brace/error.hpp"

using namespace brace;

namespace {

struct Overrides {
  std::string config;
  std::string model;
  std::string script;
  std::optional<long long> n, seed, workers, ticks, ticks_per_epoch;
  std::string metrics;
  bool no_index = false;
  bool index = false;
  bool invert = false;
  bool no_invert = false;
  bool canonical = false;
  std::string scheduler;
  std::vector<std::string> sets;
};

void add_common(CLI::App *cmd, Overrides &o) {
  cmd->add_option("--config", o.config, "key = value config file");
  cmd->add_option("--model", o.model, "fish | traffic | predator-local | predator-nonlocal");
  cmd->add_option("--script", o.script, "script file used instead of the bundled one");
  cmd->add_option("--n", o.n, "initial agent count");
  cmd->add_option("--seed", o.seed, "global seed");
  cmd->add_option("--workers", o.workers, "worker count");
  cmd->add_option("--ticks", o.ticks, "total ticks");
  cmd->add_option("--ticks-per-epoch", o.ticks_per_epoch, "ticks per metrics row");
  cmd->add_option("--metrics", o.metrics, "metrics CSV path");
  cmd->add_option("--scheduler", o.scheduler, "parallel | sequential");
  cmd->add_flag("--index", o.index, "use the spatial index");
  cmd->add_flag("--no-index", o.no_index, "scan instead of probing the index");
  cmd->add_flag("--invert", o.invert, "invert non-local effect assignments");
  cmd->add_flag("--no-invert", o.no_invert, "keep non-local effect assignments");
  cmd->add_flag("--canonical", o.canonical, "zero the timing columns");
  cmd->add_option("--set", o.sets, "extra key=value settings")->take_all();
}

cli::RunConfig build(const Overrides &o) {
  cli::RunConfig c;
  if (!o.config.empty()) c = cli::load_config(o.config);
  auto set = [&](const char *k, const std::string &v) { cli::apply_setting(c, k, v); };
  if (!o.model.empty()) set("model", o.model);
  if (!o.script.empty()) set("script", o.script);
  if (o.n) set("n", std::to_string(*o.n));
  if (o.seed) set("seed", std::to_string(*o.seed));
  if (o.workers) set("workers", std::to_string(*o.workers));
  if (o.ticks) set("ticks", std::to_string(*o.ticks));
  if (o.ticks_per_epoch) set("ticks_per_epoch", std::to_string(*o.ticks_per_epoch));
  if (!o.metrics.empty()) set("metrics", o.metrics);
  if (!o.scheduler.empty()) set("scheduler", o.scheduler);
  if (o.index) c.index = true;
  if (o.no_index) c.index = false;
  if (o.invert) c.invert = true;
  if (o.no_invert) c.invert = false;
  if (o.canonical) c.canonical = true;
  for (const auto &kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cli::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Behavioral simulation compiler and runtime"};
  app.require_subcommand(1);

  Overrides compile_o, run_o, verify_o, resume_o;
  std::string target;
  bool dump_plan = false, explain = false;
  auto *compile = app.add_subcommand("compile", "check a script and show its plan");
  compile->add_option("target", target, "script path or bundled model name")->required();
  compile->add_flag("--dump-plan", dump_plan, "print the lowered and rewritten plan");
  compile->add_flag("--explain", explain, "print the rewrite report");
  add_common(compile, compile_o);

  auto *run = app.add_subcommand("run", "simulate and write per-epoch metrics");
  add_common(run, run_o);

  auto *verify = app.add_subcommand("verify", "compare the runtime with the sequential oracle");
  add_common(verify, verify_o);

  std::string from;
  auto *resume = app.add_subcommand("resume", "continue a run from a checkpoint");
  resume->add_option("--from", from, "checkpoint file")->required();
  add_common(resume, resume_o);

  auto *keys = app.add_subcommand("keys", "list config keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kUserError;
  }

  try {
    if (*compile) return cli::cmd_compile(target, dump_plan, explain, build(compile_o), std::cout, std::cerr);
    if (*run) return cli::cmd_run(build(run_o), std::cerr);
    if (*verify) return cli::cmd_verify(build(verify_o), std::cout, std::cerr);
    if (*resume) return cli::cmd_run(build(resume_o), std::cerr, from);
    if (*keys) {
      for (const auto &[k, h] : cli::config_keys()) std::cout << k << "\t" << h << "\n";
      return cli::kOk;
    }
  } catch (const ConfigError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUserError;
  }
  return cli::kOk;
}
