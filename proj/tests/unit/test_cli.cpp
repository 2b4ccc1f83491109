#include <filesystem>
#include <fstream>
#include <sstream>

#include "brace/cli.hpp"
#include "brace/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace brace;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const auto dir = fs::temp_directory_path() / "brace_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> lines_of(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

cli::RunConfig small_run(models::Model m) {
  cli::RunConfig c;
  c.model.model = m;
  c.model.n = 120;
  c.model.seed = 7;
  c.workers = 3;
  c.ticks = 12;
  c.epoch.ticks_per_epoch = 4;
  c.canonical = true;
  return c;
}

}  // namespace

TEST_CASE("config text sets keys and reports the offending line") {
  const auto c = cli::parse_config(R"(# experiment
model = predator-nonlocal
n = 500   # agents
workers = 4
index = off
invert = on
scheduler = sequential
predator.damage = 0.25
bounds = -10 10, -5 5
)");
  CHECK(c.model.model == models::Model::PredatorNonlocal);
  CHECK(c.model.n == 500);
  CHECK(c.workers == 4);
  CHECK_FALSE(c.index);
  CHECK(c.invert);
  CHECK(c.scheduler == runtime::Scheduler::Sequential);
  CHECK(c.model.predator.damage == 0.25);
  REQUIRE(c.model.bounds.size() == 2);
  CHECK(c.model.bounds[1].lo == -5.0);

  try {
    cli::parse_config("n = 10\nworkrs = 2\n");
    FAIL("unknown key accepted");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("workrs") != std::string::npos);
  }
  CHECK_THROWS_AS(cli::parse_config("n = ten\n"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("index = maybe\n"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("just words\n"), ConfigError);
}

TEST_CASE("every documented key is accepted by the parser") {
  for (const auto &[key, help] : cli::config_keys()) {
    CHECK_FALSE(help.empty());
  }
  CHECK(cli::config_keys().size() > 30);
}

TEST_CASE("validation rejects out-of-range settings") {
  cli::RunConfig c;
  c.workers = 0;
  CHECK_THROWS_AS(cli::validate(c), ConfigError);
  c.workers = 2;
  c.epoch.checkpoint_every = 2;
  CHECK_THROWS_AS(cli::validate(c), ConfigError);
  c.checkpoint = "cp.bin";
  CHECK_NOTHROW(cli::validate(c));
  c.epoch.imbalance_threshold = 0.5;
  CHECK_THROWS_AS(cli::validate(c), ConfigError);
}

TEST_CASE("the CSV header starts with the fixed columns") {
  const auto h = cli::csv_header(small_run(models::Model::Fish));
  const std::vector<std::string> fixed = {"epoch", "tick", "wall_seconds", "agent_ticks_per_sec", "worker",
                                          "owned", "replicas", "msgs", "migrations"};
  REQUIRE(h.size() > fixed.size());
  for (std::size_t i = 0; i < fixed.size(); ++i) CHECK(h[i] == fixed[i]);
}

TEST_CASE("compile output is deterministic and errors map to exit codes") {
  const cli::RunConfig c;
  std::ostringstream a, b, err;
  CHECK(cli::cmd_compile(std::string(BRACE_MODELS_DIR) + "/fish.brasil", true, true, c, a, err) == cli::kOk);
  CHECK(cli::cmd_compile(std::string(BRACE_MODELS_DIR) + "/fish.brasil", true, true, c, b, err) == cli::kOk);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("local-only") != std::string::npos);

  std::ostringstream inv;
  cli::RunConfig ci;
  ci.invert = true;
  CHECK(cli::cmd_compile("predator-nonlocal", false, false, ci, inv, err) == cli::kOk);
  CHECK(inv.str().find("one-reduce") != std::string::npos);

  const auto bad = scratch("bad.brasil");
  std::ofstream(bad) << "class A { public state float x : y; }";
  std::ostringstream out, diag;
  CHECK(cli::cmd_compile(bad.string(), false, false, c, out, diag) == cli::kUserError);
  CHECK(diag.str().find("error:") != std::string::npos);
}

TEST_CASE("runs with canonical timing are reproducible") {
  const auto p1 = scratch("run1.csv"), p2 = scratch("run2.csv");
  auto c = small_run(models::Model::Fish);
  std::ostringstream err;
  c.metrics = p1.string();
  REQUIRE(cli::cmd_run(c, err) == cli::kOk);
  c.metrics = p2.string();
  c.scheduler = runtime::Scheduler::Sequential;
  REQUIRE(cli::cmd_run(c, err) == cli::kOk);
  const auto t1 = test_support::read_file(p1.string());
  CHECK(t1 == test_support::read_file(p2.string()));
  const auto rows = lines_of(t1);
  CHECK(rows.size() == 1 + 3 * 3);
  CHECK(rows[1].rfind("1,4,0,0,0,", 0) == 0);
}

TEST_CASE("resume continues a run from its checkpoint") {
  auto c = small_run(models::Model::PredatorNonlocal);
  const auto full = scratch("full.csv"), part = scratch("part.csv");
  std::ostringstream err;
  c.metrics = full.string();
  REQUIRE(cli::cmd_run(c, err) == cli::kOk);

  c.metrics = part.string();
  c.checkpoint = scratch("cp_{tick}.bin").string();
  c.epoch.checkpoint_every = 1;
  c.ticks = 8;
  REQUIRE(cli::cmd_run(c, err) == cli::kOk);
  c.ticks = 12;
  c.epoch.checkpoint_every = 0;
  REQUIRE(cli::cmd_run(c, err, scratch("cp_8.bin").string()) == cli::kOk);
  CHECK(test_support::read_file(full.string()) == test_support::read_file(part.string()));

  c.model.seed = 8;
  CHECK(cli::cmd_run(c, err, scratch("cp_8.bin").string()) == cli::kUserError);
  CHECK(cli::cmd_run(c, err, scratch("missing.bin").string()) == cli::kRuntimeError);
}

TEST_CASE("verify reports bit-equality with the oracle") {
  auto c = small_run(models::Model::PredatorNonlocal);
  c.workers = 8;
  c.ticks = 6;
  std::ostringstream out, err;
  CHECK(cli::cmd_verify(c, out, err) == cli::kOk);
  CHECK(out.str().find("bit-equal") != std::string::npos);
  c.invert = true;
  std::ostringstream out2;
  CHECK(cli::cmd_verify(c, out2, err) == cli::kOk);
}
