#include <optional>

#include "brace/optimizer.hpp"

namespace brace::opt {

using namespace ir;

namespace {

const Attr A1 = attr("1");
const Attr A2 = attr("2");
const Attr A3 = attr("3");
const Attr APair = attr("#pair");

bool is_proj(const Plan &p, Attr a) { return p->op == Op::Proj && p->attrs[0] == a; }

bool is_empty_set(const Plan &p) {
  return p->op == Op::Const && p->constant.is_set() && p->constant.elems().empty();
}

bool mentions(const Plan &p, Attr a) {
  for (Attr x : p->attrs) {
    if (x == a) return true;
  }
  for (const auto &k : p->kids) {
    if (mentions(k, a)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// foreach simplification

struct Loop {
  Attr var;
  Plan extent;
  std::vector<Plan> body;  // statement stages, without the trailing π3
};

/// The literal lowering of a foreach:
/// ⟨1: π1, 2: π2, 3: ∅, x: E⟩ ∘ PAIRWITH(x) ∘ MAP(⟨1: EXTEND(x, π_x), 2: π2, 3: π3⟩) ∘ FLATMAP(B ∘ π3)
std::optional<Loop> match_loop(const Plan &p) {
  if (p->op != Op::Compose || p->kids.size() != 4) return std::nullopt;
  const Plan &t = p->kids[0];
  const Plan &pw = p->kids[1];
  const Plan &m = p->kids[2];
  const Plan &fm = p->kids[3];
  if (t->op != Op::Tuple || t->attrs.size() != 4 || t->attrs[0] != A1 || t->attrs[1] != A2 ||
      t->attrs[2] != A3 || !is_proj(t->kids[0], A1) || !is_proj(t->kids[1], A2) || !is_empty_set(t->kids[2])) {
    return std::nullopt;
  }
  const Attr var = t->attrs[3];
  if (pw->op != Op::PairWith || pw->attrs[0] != var) return std::nullopt;
  if (m->op != Op::Map) return std::nullopt;
  const Plan &mt = m->kids[0];
  if (mt->op != Op::Tuple || mt->attrs != std::vector<Attr>{A1, A2, A3}) return std::nullopt;
  const Plan &ext = mt->kids[0];
  if (ext->op != Op::Extend || ext->attrs[0] != var || !is_proj(ext->kids[0], var)) return std::nullopt;
  if (!is_proj(mt->kids[1], A2) || !is_proj(mt->kids[2], A3)) return std::nullopt;
  if (fm->op != Op::FlatMap) return std::nullopt;
  const Plan &b = fm->kids[0];
  Loop loop{var, t->kids[3], {}};
  if (is_proj(b, A3)) return loop;
  if (b->op != Op::Compose || !is_proj(b->kids.back(), A3)) return std::nullopt;
  loop.body.assign(b->kids.begin(), b->kids.end() - 1);
  return loop;
}

/// A statement stage ⟨1: π1, 2: π2, 3: π3 ⊎ L⟩ whose L is a literal loop.
std::optional<Loop> match_loop_statement(const Plan &s) {
  if (s->op != Op::Tuple || s->attrs != std::vector<Attr>{A1, A2, A3}) return std::nullopt;
  if (!is_proj(s->kids[0], A1) || !is_proj(s->kids[1], A2)) return std::nullopt;
  const Plan &u = s->kids[2];
  if (u->op != Op::EffectUnion || !is_proj(u->kids[0], A3)) return std::nullopt;
  return match_loop(u->kids[1]);
}

class Simplifier {
public:
  Plan run(const Plan &p) {
    if (auto loop = match_loop(p)) return rewrite_loop(*loop);
    std::vector<Plan> kids;
    bool changed = false;
    for (const auto &k : p->kids) {
      kids.push_back(run(k));
      changed = changed || kids.back() != k;
    }
    return changed ? with_kids(*p, std::move(kids)) : p;
  }

  int rewrites = 0;

private:
  std::vector<Plan> run_all(const std::vector<Plan> &stages) {
    std::vector<Plan> out;
    for (const auto &s : stages) out.push_back(run(s));
    return out;
  }

  Plan rewrite_loop(const Loop &outer) {
    ++rewrites;
    if (outer.body.size() == 1) {
      if (auto inner = match_loop_statement(outer.body[0])) {
        if (same_plan(inner->extent, outer.extent) && !mentions(outer.extent, outer.var) &&
            inner->var != outer.var) {
          return fused(outer.var, inner->var, outer.extent, run_all(inner->body));
        }
      }
    }
    return simple(outer.var, outer.extent, run_all(outer.body));
  }

  static Plan finish(Plan head, Attr var, Plan rebind_ctx, std::vector<Plan> body) {
    std::vector<Plan> stages{tuple_attrs({{A1, std::move(rebind_ctx)}, {A2, proj("2")},
                                          {A3, constant(Value::empty_set())}})};
    for (auto &b : body) stages.push_back(std::move(b));
    stages.push_back(proj("3"));
    return compose({std::move(head), pairwith(attr_name(var)), flatmap(compose(std::move(stages)))});
  }

  // ⟨1: π1, 2: π2, x: E⟩ ∘ PAIRWITH(x) ∘ FLATMAP(⟨1: EXTEND(x, π_x), 2: π2, 3: ∅⟩ ∘ B ∘ π3)
  static Plan simple(Attr var, const Plan &extent, std::vector<Plan> body) {
    const std::string &x = attr_name(var);
    Plan head = tuple_attrs({{A1, proj("1")}, {A2, proj("2")}, {var, extent}});
    return finish(std::move(head), var, extend(x, proj(x)), std::move(body));
  }

  // Two nested loops over the same extent iterate E × E once.
  static Plan fused(Attr x, Attr y, const Plan &extent, std::vector<Plan> body) {
    Plan head = tuple_attrs({{A1, proj("1")}, {A2, proj("2")}, {APair, product(extent, extent)}});
    Plan ctx = compose({tuple_attrs({{A1, extend(attr_name(x), path({"#pair", "1"}))}, {APair, proj("#pair")}}),
                        extend(attr_name(y), path({"#pair", "2"}))});
    return finish(std::move(head), APair, std::move(ctx), std::move(body));
  }
};

// ---------------------------------------------------------------------------
// dead-tuple elimination

bool trivial(const Plan &p) {
  switch (p->op) {
    case Op::Proj:
    case Op::Const:
    case Op::EffectId:
    case Op::Id:
      return true;
    case Op::Compose:
      for (const auto &k : p->kids) {
        if (k->op != Op::Proj) return false;
      }
      return true;
    default:
      return false;
  }
}

/// True when p never yields NIL on any input it accepts.
bool never_nil(const Plan &p) {
  switch (p->op) {
    case Op::Tuple:
    case Op::Sng:
    case Op::EffectUnion:
    case Op::EffectId:
    case Op::Extend:
    case Op::RangeSelect:
      return true;
    case Op::Const:
      return !p->constant.is_nil();
    case Op::Compose: {
      bool ok = false;
      for (const auto &k : p->kids) {
        switch (k->op) {
          case Op::PairWith:
          case Op::Map:
          case Op::FlatMap:
          case Op::Select:
          case Op::Flatten:
          case Op::Nest:
          case Op::Agg:
          case Op::Id:
            break;
          default:
            ok = never_nil(k);
        }
      }
      return ok;
    }
    default:
      return false;
  }
}

/// g with every read of its input replaced by the matching component of the
/// tuple `t`, or nothing when g consumes its input whole.
std::optional<Plan> substitute(const Plan &g, const PlanNode &t, std::vector<int> &uses) {
  switch (g->op) {
    case Op::Proj:
      for (std::size_t i = 0; i < t.attrs.size(); ++i) {
        if (t.attrs[i] == g->attrs[0]) {
          ++uses[i];
          return t.kids[i];
        }
      }
      return constant(Value::nil());
    case Op::Compose: {
      auto first = substitute(g->kids[0], t, uses);
      if (!first) return std::nullopt;
      std::vector<Plan> kids = g->kids;
      kids[0] = *first;
      return compose(std::move(kids));
    }
    case Op::Tuple:
    case Op::Arith:
    case Op::EffectUnion:
    case Op::Rand: {
      std::vector<Plan> kids;
      for (const auto &k : g->kids) {
        auto s = substitute(k, t, uses);
        if (!s) return std::nullopt;
        kids.push_back(*s);
      }
      return with_kids(*g, std::move(kids));
    }
    case Op::Const:
    case Op::EffectId:
      return g;
    default:
      return std::nullopt;
  }
}

std::optional<Plan> fuse_pair(const Plan &a, const Plan &b) {
  if (a->op == Op::Tuple) {
    std::vector<int> uses(a->kids.size(), 0);
    auto r = substitute(b, *a, uses);
    if (!r) return std::nullopt;
    for (std::size_t i = 0; i < uses.size(); ++i) {
      if (uses[i] > 1 && !trivial(a->kids[i])) return std::nullopt;
    }
    if (node_count(*r) > node_count(a) + node_count(b)) return std::nullopt;
    return r;
  }
  if (a->op == Op::Extend && b->op == Op::Proj) {
    if (b->attrs[0] == a->attrs[0]) return a->kids[0];
    return compose({proj("1"), b});
  }
  return std::nullopt;
}

class Eliminator {
public:
  Plan run(const Plan &p) {
    std::vector<Plan> kids;
    bool changed = false;
    for (const auto &k : p->kids) {
      kids.push_back(run(k));
      changed = changed || kids.back() != k;
    }
    Plan n = changed ? with_kids(*p, std::move(kids)) : p;

    if (n->op == Op::EffectUnion) {
      if (is_empty_set(n->kids[0]) && never_nil(n->kids[1])) return hit(n->kids[1]);
      if (is_empty_set(n->kids[1]) && never_nil(n->kids[0])) return hit(n->kids[0]);
    }
    if (n->op != Op::Compose) return n;

    std::vector<Plan> st = n->kids;
    bool any = false;
    for (std::size_t i = 0; i < st.size();) {
      if (st[i]->op == Op::Id && st.size() > 1) {
        st.erase(st.begin() + static_cast<std::ptrdiff_t>(i));
        any = true;
        ++rewrites;
        continue;
      }
      if (i + 1 < st.size()) {
        if (auto r = fuse_pair(st[i], st[i + 1])) {
          st[i] = *r;
          st.erase(st.begin() + static_cast<std::ptrdiff_t>(i) + 1);
          any = true;
          ++rewrites;
          continue;
        }
      }
      ++i;
    }
    return any ? compose(std::move(st)) : n;
  }

  int rewrites = 0;

private:
  Plan hit(Plan p) {
    ++rewrites;
    return p;
  }
};

}  // namespace

Plan simplify_foreach(const Plan &p, int *rewrites) {
  Simplifier s;
  Plan out = s.run(p);
  if (rewrites) *rewrites += s.rewrites;
  return out;
}

QueryPhasePlan simplify_foreach(const QueryPhasePlan &p, int *rewrites) {
  QueryPhasePlan out = p;
  int n = 0;
  out.q = simplify_foreach(p.q, &n);
  out.q_hat = simplify_foreach(p.q_hat);
  out.effect_gen = simplify_foreach(p.effect_gen);
  if (rewrites) *rewrites += n;
  return out;
}

Plan dead_tuple_elimination(const Plan &p, int *rewrites) {
  Plan cur = p;
  int total = 0;
  while (true) {
    Eliminator e;
    Plan next = e.run(cur);
    if (e.rewrites == 0) break;
    total += e.rewrites;
    cur = next;
  }
  if (rewrites) *rewrites += total;
  return cur;
}

QueryPhasePlan dead_tuple_elimination(const QueryPhasePlan &p, int *rewrites) {
  QueryPhasePlan out = p;
  int n = 0;
  out.q = dead_tuple_elimination(p.q);
  out.q_hat = dead_tuple_elimination(p.q_hat);
  out.effect_gen = dead_tuple_elimination(p.effect_gen, &n);
  out.redistribute = dead_tuple_elimination(p.redistribute, &n);
  out.inline_effects = dead_tuple_elimination(p.inline_effects, &n);
  out.update = dead_tuple_elimination(p.update, &n);
  if (rewrites) *rewrites += n;
  return out;
}

}  // namespace brace::opt
