#include <algorithm>
#include <cmath>

#include "brace/ir.hpp"

namespace brace::ir {

using namespace dsl;

const std::string kKeyAttr = "#key";
const std::string kDieAttr = "#die";
const std::string kSpawnAttr = "#spawn";

std::string child_attr(const std::string &field) { return "#child." + field; }

std::vector<double> theta_vector(const CheckedScript &script) {
  std::vector<double> out;
  for (const auto &e : script.effects) out.push_back(e.theta);
  return out;
}

namespace {

ScalarOp binary_scalar_op(const Expr &e) {
  switch (e.binary) {
    case BinaryOp::Add: return ScalarOp::Add;
    case BinaryOp::Sub: return ScalarOp::Sub;
    case BinaryOp::Mul: return ScalarOp::Mul;
    case BinaryOp::Div: {
      auto integral = [](Type t) { return t == Type::Int || t == Type::Bool; };
      return integral(e.args[0].type) && integral(e.args[1].type) ? ScalarOp::IDiv : ScalarOp::Div;
    }
    case BinaryOp::Lt: return ScalarOp::Lt;
    case BinaryOp::Le: return ScalarOp::Le;
    case BinaryOp::Gt: return ScalarOp::Gt;
    case BinaryOp::Ge: return ScalarOp::Ge;
    case BinaryOp::Eq: return ScalarOp::Eq;
    case BinaryOp::Ne: return ScalarOp::Ne;
    case BinaryOp::And: return ScalarOp::And;
    case BinaryOp::Or: return ScalarOp::Or;
  }
  return ScalarOp::Add;
}

Plan empty_set_plan() { return constant(Value::empty_set()); }

Plan num(double v) { return constant(Value::num(v)); }

AggKind agg_of(Combinator c) {
  switch (c) {
    case Combinator::Sum: return AggKind::Sum;
    case Combinator::Min: return AggKind::Min;
    case Combinator::Max: return AggKind::Max;
  }
  return AggKind::Sum;
}

/// Lazy conditional: SNG ∘ SELECT(c) ∘ MAP(a) ⊕ SNG ∘ SELECT(¬c) ∘ MAP(b), then GET.
Plan conditional(Plan cond, Plan then_p, Plan else_p) {
  auto branch = [&](ScalarOp test, Plan body) {
    return compose({sng(), select(arith(test, {cond})), map(std::move(body))});
  };
  return compose({effect_union(branch(ScalarOp::Truthy, std::move(then_p)),
                               branch(ScalarOp::Falsy, std::move(else_p))),
                  get()});
}

class Lowerer {
public:
  Lowerer(const CheckedScript &s, const LoweringOptions &o) : s_(s), opts_(o) {
    for (const auto &sf : s_.spatial_fields) {
      axes_.push_back({sf.state_index, sf.range.lo, sf.range.hi});
      axis_names_.push_back(s_.states[sf.state_index].name);
    }
  }

  // -- query phase ----------------------------------------------------------

  Plan statements(const std::vector<Stmt> &body) {
    std::vector<Plan> stages;
    for (const auto &st : body) stages.push_back(statement(st));
    return compose(std::move(stages));
  }

  /// Visibility predicate V(a, b) where a and b are plans yielding agent tuples.
  Plan visible(const Plan &a, const Plan &b) const {
    Plan acc;
    for (std::size_t i = 0; i < axes_.size(); ++i) {
      const auto &f = axis_names_[i];
      Plan bf = compose({b, proj(f)});
      Plan af = compose({a, proj(f)});
      Plan lo = arith(ScalarOp::Ge, {bf, arith(ScalarOp::Add, {af, num(axes_[i].lo)})});
      Plan hi = arith(ScalarOp::Le, {bf, arith(ScalarOp::Add, {af, num(axes_[i].hi)})});
      Plan both = arith(ScalarOp::And, {lo, hi});
      acc = acc ? arith(ScalarOp::And, {acc, both}) : both;
    }
    return arith(ScalarOp::Truthy, {acc ? acc : num(1.0)});
  }

  /// The agents a query iterates over: component 2, filtered when references are weak.
  Plan extent() const {
    if (opts_.visibility != VisibilityMode::WeakRef) return proj("2");
    return compose({tuple({{"1", proj("1")}, {"2", proj("2")}}), pairwith("2"),
                    select(visible(proj("1"), proj("2"))), map(proj("2"))});
  }

  /// Looks an agent up by key in component 2, or this agent itself.
  Plan deref(Plan key) const {
    Plan candidates = effect_union(proj("2"), compose({proj("1"), sng()}));
    Plan same_key = arith(ScalarOp::Eq, {path({"2", kKeyAttr}), proj("#k")});
    Plan pred = same_key;
    if (opts_.visibility == VisibilityMode::WeakRef) {
      Plan is_self = arith(ScalarOp::Eq, {path({"2", kKeyAttr}), path({"1", kKeyAttr})});
      pred = arith(ScalarOp::And,
                   {same_key, arith(ScalarOp::Or, {is_self, visible(proj("1"), proj("2"))})});
    }
    return compose({tuple({{"1", proj("1")}, {"#k", std::move(key)}, {"2", candidates}}),
                    pairwith("2"), select(pred), map(proj("2")), get()});
  }

  Plan agent_tuple(const Expr &e) const {
    if (e.kind == ExprKind::This) return proj("1");
    if (e.kind == ExprKind::Name && e.ref == RefKind::LoopVar) return path({"1", e.name});
    if (e.kind == ExprKind::Name && e.ref == RefKind::Const) return deref(path({"1", e.name}));
    throw LoweringError("not an agent reference: " + print_expr(e));
  }

  Plan target_key(const Stmt &st) const {
    if (st.kind == StmtKind::LocalEffect) return path({"1", kKeyAttr});
    return compose({agent_tuple(st.target), proj(kKeyAttr)});
  }

  Plan effect_read(int rho) const {
    const auto &info = s_.effects[rho];
    Plan pred = arith(ScalarOp::And, {arith(ScalarOp::Eq, {path({"3", "e"}), effect_id(rho)}),
                                      arith(ScalarOp::Eq, {path({"3", "k"}), path({"1", kKeyAttr})})});
    return compose({pairwith("3"), select(pred), map(path({"3", "v"})), agg(agg_of(info.combinator))});
  }

  Plan statement(const Stmt &st) {
    switch (st.kind) {
      case StmtKind::Const: {
        Plan v = expr(st.value);
        if (st.decl_type == ValueType::Int) v = arith(ScalarOp::Trunc, {v});
        return tuple({{"1", extend(st.name, v)}, {"2", proj("2")}, {"3", proj("3")}});
      }
      case StmtKind::LocalEffect:
      case StmtKind::RemoteEffect: {
        const int rho = st.slot;
        Plan v = expr(st.value);
        if (s_.effects[rho].type == ValueType::Int) v = arith(ScalarOp::Trunc, {v});
        Plan triple = tuple({{"k", target_key(st)}, {"e", effect_id(rho)}, {"v", v}});
        return tuple({{"1", proj("1")}, {"2", proj("2")},
                      {"3", effect_union(proj("3"), compose({triple, sng()}))}});
      }
      case StmtKind::If: {
        Plan cond = expr(st.value);
        auto branch = [&](ScalarOp test, const std::vector<Stmt> &body) {
          return compose({sng(), select(arith(test, {cond})), map(statements(body))});
        };
        Plan chosen = compose({effect_union(branch(ScalarOp::Truthy, st.body),
                                            branch(ScalarOp::Falsy, st.else_body)),
                               get(), proj("3")});
        return tuple({{"1", proj("1")}, {"2", proj("2")}, {"3", chosen}});
      }
      case StmtKind::Foreach: {
        loops_.push_back(st.name);
        Plan body = statements(st.body);
        loops_.pop_back();
        Plan loop = compose({
            tuple({{"1", proj("1")}, {"2", proj("2")}, {"3", empty_set_plan()}, {st.name, extent()}}),
            pairwith(st.name),
            map(tuple({{"1", extend(st.name, proj(st.name))}, {"2", proj("2")}, {"3", proj("3")}})),
            flatmap(compose({body, proj("3")})),
        });
        return tuple({{"1", proj("1")}, {"2", proj("2")}, {"3", effect_union(proj("3"), loop)}});
      }
      case StmtKind::Assign:
        break;
    }
    throw LoweringError("statement outside the checked grammar");
  }

  Plan expr(const Expr &e) {
    switch (e.kind) {
      case ExprKind::Literal: return num(e.number);
      case ExprKind::Nil: return constant(Value::nil());
      case ExprKind::This: return path({"1", kKeyAttr});
      case ExprKind::Name:
        switch (e.ref) {
          case RefKind::StateField: return path({"1", e.name});
          case RefKind::Const: return path({"1", e.name});
          case RefKind::LoopVar: return path({"1", e.name, kKeyAttr});
          case RefKind::EffectField: return effect_read(e.index);
          default: break;
        }
        break;
      case ExprKind::Member: {
        const Expr &t = e.args[0];
        if (t.kind == ExprKind::This) return path({"1", e.name});
        return compose({agent_tuple(t), proj(e.name)});
      }
      case ExprKind::Unary:
        return arith(e.unary == UnaryOp::Neg ? ScalarOp::Neg : ScalarOp::Not, {expr(e.args[0])});
      case ExprKind::Binary:
        return arith(binary_scalar_op(e), {expr(e.args[0]), expr(e.args[1])});
      case ExprKind::Ternary:
        return conditional(expr(e.args[0]), expr(e.args[1]), expr(e.args[2]));
      case ExprKind::Call: return call(e);
    }
    throw LoweringError("expression outside the checked grammar: " + print_expr(e));
  }

  Plan call(const Expr &e) {
    if (e.name == "rand") {
      std::vector<Plan> keys{path({"1", kKeyAttr})};
      for (const auto &l : loops_) keys.push_back(path({"1", l, kKeyAttr}));
      return rand_draw(RandPhase::Query, e.rand_stream, std::move(keys));
    }
    if (e.name == "visible") return visible(agent_tuple(e.args[0]), agent_tuple(e.args[1]));
    return builtin(e, [this](const Expr &x) { return expr(x); });
  }

  template <class F>
  Plan builtin(const Expr &e, F &&sub) {
    if (e.name == "abs") return arith(ScalarOp::Abs, {sub(e.args[0])});
    if (e.name == "sqrt") return arith(ScalarOp::Sqrt, {sub(e.args[0])});
    if (e.name == "min") return arith(ScalarOp::Min, {sub(e.args[0]), sub(e.args[1])});
    if (e.name == "max") return arith(ScalarOp::Max, {sub(e.args[0]), sub(e.args[1])});
    throw LoweringError("unknown function " + e.name);
  }

  // -- update phase ---------------------------------------------------------

  Plan update_expr(const Expr &e, RandPhase phase) {
    switch (e.kind) {
      case ExprKind::Literal: return num(e.number);
      case ExprKind::Nil: return constant(Value::nil());
      case ExprKind::This: return proj(kKeyAttr);
      case ExprKind::Name: return proj(e.name);
      case ExprKind::Member: return proj(e.name);
      case ExprKind::Unary:
        return arith(e.unary == UnaryOp::Neg ? ScalarOp::Neg : ScalarOp::Not,
                     {update_expr(e.args[0], phase)});
      case ExprKind::Binary:
        return arith(binary_scalar_op(e), {update_expr(e.args[0], phase), update_expr(e.args[1], phase)});
      case ExprKind::Ternary:
        return conditional(update_expr(e.args[0], phase), update_expr(e.args[1], phase),
                           update_expr(e.args[2], phase));
      case ExprKind::Call:
        if (e.name == "rand") return rand_draw(phase, e.rand_stream, {proj(kKeyAttr)});
        return builtin(e, [&](const Expr &x) { return update_expr(x, phase); });
    }
    throw LoweringError("expression outside the checked grammar: " + print_expr(e));
  }

  /// New value of state field i: coerced, cropped, and NIL-absorbing.
  Plan state_update(int i) {
    const auto &info = s_.states[i];
    const auto &decl = s_.ast.fields[info.decl_index];
    Plan old = proj(info.name);
    if (!decl.update) return old;
    Plan v = update_expr(*decl.update, RandPhase::Update);
    if (info.type == ValueType::Int) v = arith(ScalarOp::Trunc, {v});
    if (info.range) {
      Plan lower = arith(ScalarOp::Add, {old, num(info.range->lo)});
      Plan upper = arith(ScalarOp::Add, {old, num(info.range->hi)});
      v = arith(ScalarOp::Min, {arith(ScalarOp::Max, {v, lower}), upper});
    }
    return arith(ScalarOp::Coalesce, {v, old});
  }

  Plan update_plan() {
    std::vector<std::pair<std::string, Plan>> fields{{kKeyAttr, proj(kKeyAttr)}};
    for (std::size_t i = 0; i < s_.states.size(); ++i) {
      fields.emplace_back(s_.states[i].name, state_update(static_cast<int>(i)));
    }
    if (s_.ast.die) {
      fields.emplace_back(kDieAttr, arith(ScalarOp::Truthy, {update_expr(*s_.ast.die, RandPhase::Die)}));
    }
    if (s_.ast.spawn) {
      fields.emplace_back(kSpawnAttr, arith(ScalarOp::Truthy,
                                            {update_expr(s_.ast.spawn->condition, RandPhase::Spawn)}));
      for (const auto &[name, e] : s_.ast.spawn->overrides) {
        const int si = s_.state_index(name);
        Plan v = update_expr(e, RandPhase::Spawn);
        if (s_.states[si].type == ValueType::Int) v = arith(ScalarOp::Trunc, {v});
        fields.emplace_back(child_attr(name), arith(ScalarOp::Coalesce, {v, state_update(si)}));
      }
    }
    return map(tuple(std::move(fields)));
  }

  // -- whole tick -----------------------------------------------------------

  Plan others_extent() const {
    if (opts_.visibility == VisibilityMode::Restricted && opts_.range_index) {
      std::vector<Attr> names;
      for (const auto &n : axis_names_) names.push_back(attr(n));
      return range_select(axes_, names);
    }
    Plan pred = arith(ScalarOp::Ne, {path({"1", kKeyAttr}), path({"2", kKeyAttr})});
    if (opts_.visibility == VisibilityMode::Restricted) {
      pred = arith(ScalarOp::And, {pred, visible(proj("1"), proj("2"))});
    }
    return compose({pairwith("2"), select(pred), map(proj("2"))});
  }

  QueryPhasePlan lower_all() {
    QueryPhasePlan p;
    p.non_local = s_.locality == Locality::HasNonLocal;
    p.q = statements(s_.ast.run_body);
    p.q_hat = compose({tuple({{"1", proj("1")}, {"2", proj("2")}, {"3", empty_set_plan()}}), p.q,
                       tuple({{"1", proj("1")}, {"2", proj("3")}})});
    p.effect_gen = compose({tuple({{"1", id()}, {"2", id()}}), pairwith("1"),
                            map(tuple({{"1", proj("1")}, {"2", others_extent()}})), map(p.q_hat)});

    Plan agents = compose({map(proj("1")), map(tuple({{"k", proj(kKeyAttr)}, {"#agent", id()}}))});
    Plan effects = compose({map(proj("2")), flatten()});
    p.redistribute = compose({
        effect_union(agents, effects),
        nest("k"),
        map(tuple({{"1", compose({proj("#group"), select(arith(ScalarOp::Defined, {proj("#agent")})),
                                  map(proj("#agent")), get()})},
                   {"2", compose({proj("#group"), select(arith(ScalarOp::Defined, {proj("e")}))})}})),
        select(arith(ScalarOp::Defined, {proj("1")})),
    });

    std::vector<std::pair<std::string, Plan>> inl{{kKeyAttr, path({"1", kKeyAttr})}};
    for (const auto &st : s_.states) inl.emplace_back(st.name, path({"1", st.name}));
    for (const auto &ef : s_.effects) {
      inl.emplace_back(ef.name, compose({proj("2"),
                                          select(arith(ScalarOp::Eq, {proj("e"), effect_id(ef.rho)})),
                                          map(proj("v")), agg(agg_of(ef.combinator))}));
    }
    p.inline_effects = map(tuple(std::move(inl)));
    p.update = update_plan();
    return p;
  }

private:
  const CheckedScript &s_;
  LoweringOptions opts_;
  std::vector<AxisRange> axes_;
  std::vector<std::string> axis_names_;
  std::vector<std::string> loops_;
};

}  // namespace

Plan QueryPhasePlan::whole_tick() const {
  if (non_local) return compose({effect_gen, redistribute, inline_effects, update});
  return compose({effect_gen, inline_effects, update});
}

QueryPhasePlan lower(const CheckedScript &script, const LoweringOptions &opts) {
  return Lowerer(script, opts).lower_all();
}

Plan lower_statements(const CheckedScript &script, const std::vector<Stmt> &body,
                      const LoweringOptions &opts) {
  return Lowerer(script, opts).statements(body);
}

// ---------------------------------------------------------------------------
// Sequential oracle

std::vector<AgentRecord> run_tick_with_plan(const CheckedScript &script, const QueryPhasePlan &plan,
                                            const std::vector<AgentRecord> &agents,
                                            std::uint64_t seed, std::uint64_t tick,
                                            const WorldSpec &world, TickEvents *events) {
  std::vector<AgentRecord> sorted = agents;
  sort_by_oid(sorted);
  Elems input;
  input.reserve(sorted.size());
  for (const auto &a : sorted) input.push_back(agent_value(script, a));

  const Value out = eval_plan(plan.whole_tick(), Value::set(std::move(input)), {seed, tick});

  const Attr key_attr = attr(kKeyAttr);
  const Attr die_attr = attr(kDieAttr);
  const Attr spawn_attr = attr(kSpawnAttr);
  std::vector<Attr> state_attrs;
  for (const auto &st : script.states) state_attrs.push_back(attr(st.name));
  std::vector<std::pair<int, Attr>> overrides;
  if (script.ast.spawn) {
    for (const auto &[name, e] : script.ast.spawn->overrides) {
      overrides.emplace_back(script.state_index(name), attr(child_attr(name)));
    }
  }
  const std::vector<double> theta = theta_vector(script);

  TickEvents ev;
  std::vector<AgentRecord> result;
  result.reserve(out.elems().size());
  for (const auto &t : out.elems()) {
    AgentRecord r;
    r.oid = t.find(key_attr)->as_scalar().oid();
    r.s.resize(script.states.size());
    for (std::size_t i = 0; i < state_attrs.size(); ++i) {
      r.s[i] = scalar_to_state(script, static_cast<int>(i), t.find(state_attrs[i])->as_scalar());
    }
    for (std::size_t ax = 0; ax < script.spatial_fields.size() && ax < world.bounds.size(); ++ax) {
      if (apply_boundary(world.policy, world.bounds[ax], r.s[script.spatial_fields[ax].state_index])) {
        ++ev.clamps;
      }
    }
    r.e = theta;
    const Value *die = t.find(die_attr);
    if (die && truthy(die->as_scalar())) {
      ++ev.deaths;
      continue;
    }
    const Value *spawn = t.find(spawn_attr);
    if (spawn && truthy(spawn->as_scalar())) {
      AgentRecord child = r;
      child.oid = spawned_oid(r.oid, tick);
      for (const auto &[si, a] : overrides) {
        child.s[si] = scalar_to_state(script, si, t.find(a)->as_scalar());
      }
      result.push_back(std::move(child));
      ++ev.births;
    }
    result.push_back(std::move(r));
  }
  sort_by_oid(result);
  if (events) *events = ev;
  return result;
}

std::vector<AgentRecord> run_tick_sequential(const CheckedScript &script,
                                             const std::vector<AgentRecord> &agents,
                                             VisibilityMode visibility, std::uint64_t seed,
                                             std::uint64_t tick, const WorldSpec &world,
                                             TickEvents *events) {
  LoweringOptions opts;
  opts.visibility = visibility;
  return run_tick_with_plan(script, lower(script, opts), agents, seed, tick, world, events);
}

}  // namespace brace::ir
