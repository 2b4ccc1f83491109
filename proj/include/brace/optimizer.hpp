#pragma once

#include <string>
#include <utility>
#include <vector>

#include "brace/ir.hpp"
#include "brace/runtime.hpp"
#include "brace/sema.hpp"

namespace brace::opt {

struct RewriteReport {
  std::vector<std::pair<std::string, int>> applied;
  Locality locality_before = Locality::LocalOnly;
  Locality locality_after = Locality::LocalOnly;
  std::vector<double> bound_before;  // hi - lo per spatial axis
  std::vector<double> bound_after;
  std::size_t nodes_before = 0;
  std::size_t nodes_after = 0;
  std::vector<std::string> notes;

  void add(const std::string &rewrite, int count);
  int count(const std::string &rewrite) const;
};

/// Human-readable summary used by `compile --explain`.
std::string explain(const RewriteReport &r);

// Plan rewrites. Both return a plan that evaluates identically on every input
// and never has more nodes than the input.
ir::Plan simplify_foreach(const ir::Plan &p, int *rewrites = nullptr);
ir::QueryPhasePlan simplify_foreach(const ir::QueryPhasePlan &p, int *rewrites = nullptr);
ir::Plan dead_tuple_elimination(const ir::Plan &p, int *rewrites = nullptr);
ir::QueryPhasePlan dead_tuple_elimination(const ir::QueryPhasePlan &p, int *rewrites = nullptr);

struct InversionOptions {
  /// Off means unconstrained references: no guards and no range doubling.
  VisibilityMode visibility = VisibilityMode::Restricted;
};

/// Rewrites every non-local effect assignment into a local one. A local-only
/// script comes back unchanged.
CheckedScript invert_effects(const CheckedScript &script, const InversionOptions &opts = {});

/// The inverted script as source text, before checking.
dsl::ScriptAst invert_effects_ast(const CheckedScript &script, const InversionOptions &opts = {});

/// Probe rectangles for loops whose whole body is `if (box test on the loop variable) {...}`.
std::vector<runtime::ProbeHint> derive_probe_hints(const CheckedScript &script);

struct PlanOptions {
  bool invert = false;
  bool simplify = true;
  ir::LoweringOptions lowering;
};

struct PlanResult {
  runtime::Pipeline pipeline = runtime::Pipeline::OneReduce;
  CheckedScript script;  // the inverted script when inversion was applied
  ir::QueryPhasePlan plan;
  RewriteReport report;
  std::vector<runtime::ProbeHint> probes;
};

PlanResult classify_and_plan(const CheckedScript &script, const PlanOptions &opts = {});

}  // namespace brace::opt
