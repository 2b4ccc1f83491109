#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brace/models.hpp"
#include "brace/optimizer.hpp"
#include "brace/runtime.hpp"

namespace brace::cli {

enum Exit { kOk = 0, kUserError = 1, kRuntimeError = 2 };

struct RunConfig {
  std::string script;  // path; empty means the bundled model script
  models::ModelConfig model;
  int workers = 1;
  int ticks = 100;
  runtime::EpochConfig epoch;
  bool index = true;
  bool invert = false;
  bool simplify = true;
  runtime::Scheduler scheduler = runtime::Scheduler::Parallel;
  VisibilityMode visibility = VisibilityMode::Restricted;
  std::string metrics;     // empty means stdout
  std::string checkpoint;  // "{tick}" is replaced by the checkpoint tick
  bool canonical = false;

  RunConfig() { model.n = 1000; }
};

/// Sets one `key = value` entry; throws ConfigError on unknown keys or bad values.
void apply_setting(RunConfig &cfg, std::string_view key, std::string_view value);

/// Line-oriented `key = value` text with `#` comments.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::string &path, RunConfig base = {});

/// Every accepted key with a one-line description.
std::vector<std::pair<std::string, std::string>> config_keys();

/// Throws ConfigError on out-of-range values.
void validate(const RunConfig &cfg);

/// The bundled script for the model, or the file named by `script`.
CheckedScript load_script(const RunConfig &cfg);

/// Script, plan and cluster settings for a run.
struct Prepared {
  CheckedScript original;
  opt::PlanResult planned;
  runtime::ClusterConfig cluster;
};

Prepared prepare(const RunConfig &cfg);

std::vector<std::string> csv_header(const RunConfig &cfg);

/// One row per worker for an epoch.
void write_csv_rows(std::ostream &out, const RunConfig &cfg, const runtime::EpochMetrics &m,
                    const models::MetricRow &metrics);

int cmd_compile(const std::string &target, bool dump_plan, bool explain, const RunConfig &cfg, std::ostream &out,
                std::ostream &err);
int cmd_run(const RunConfig &cfg, std::ostream &err, const std::optional<std::string> &resume_from = std::nullopt);
int cmd_verify(const RunConfig &cfg, std::ostream &out, std::ostream &err);

}  // namespace brace::cli
