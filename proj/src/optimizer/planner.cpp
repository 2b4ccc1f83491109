#include <sstream>

#include "brace/optimizer.hpp"

namespace brace::opt {

void RewriteReport::add(const std::string &rewrite, int n) {
  for (auto &[name, c] : applied) {
    if (name == rewrite) {
      c += n;
      return;
    }
  }
  applied.emplace_back(rewrite, n);
}

int RewriteReport::count(const std::string &rewrite) const {
  for (const auto &[name, c] : applied) {
    if (name == rewrite) return c;
  }
  return 0;
}

namespace {

std::vector<double> bounds(const CheckedScript &s) {
  std::vector<double> out;
  for (const auto &sf : s.spatial_fields) out.push_back(sf.range.hi - sf.range.lo);
  return out;
}

std::size_t plan_nodes(const ir::QueryPhasePlan &p) { return ir::node_count(p.whole_tick()); }

}  // namespace

PlanResult classify_and_plan(const CheckedScript &script, const PlanOptions &opts) {
  PlanResult r;
  r.report.locality_before = script.locality;
  r.report.bound_before = bounds(script);
  r.script = script;

  if (opts.invert && script.locality == Locality::HasNonLocal) {
    try {
      r.script = invert_effects(script, {opts.lowering.visibility});
      r.report.add("invert_effects", 1);
    } catch (const InversionUnsupported &e) {
      r.report.notes.push_back(std::string("inversion skipped: ") + e.what());
    }
  }
  r.report.locality_after = r.script.locality;
  r.report.bound_after = bounds(r.script);
  r.pipeline = r.script.locality == Locality::LocalOnly ? runtime::Pipeline::OneReduce
                                                         : runtime::Pipeline::TwoReduce;

  r.plan = ir::lower(r.script, opts.lowering);
  r.report.nodes_before = plan_nodes(r.plan);
  if (opts.simplify) {
    int loops = 0, tuples = 0;
    r.plan = simplify_foreach(r.plan, &loops);
    r.plan = dead_tuple_elimination(r.plan, &tuples);
    r.report.add("simplify_foreach", loops);
    r.report.add("dead_tuple_elimination", tuples);
  }
  r.report.nodes_after = plan_nodes(r.plan);
  r.probes = derive_probe_hints(r.script);
  return r;
}

std::string explain(const RewriteReport &r) {
  std::ostringstream os;
  os << "locality: " << locality_name(r.locality_before);
  if (r.locality_after != r.locality_before) os << " -> " << locality_name(r.locality_after);
  os << "\n";
  os << "pipeline: " << (r.locality_after == Locality::LocalOnly ? "one-reduce" : "two-reduce") << "\n";
  if (!r.bound_before.empty()) {
    os << "visibility bound:";
    for (std::size_t i = 0; i < r.bound_before.size(); ++i) {
      os << (i ? ", " : " ") << "axis " << i << " " << r.bound_before[i];
      if (i < r.bound_after.size() && r.bound_after[i] != r.bound_before[i]) os << " -> " << r.bound_after[i];
    }
    os << "\n";
  }
  os << "rewrites:\n";
  for (const auto &[name, c] : r.applied) os << "  " << name << " x" << c << "\n";
  os << "plan nodes: " << r.nodes_before << " -> " << r.nodes_after << "\n";
  for (const auto &n : r.notes) os << "note: " << n << "\n";
  return os.str();
}

}  // namespace brace::opt
