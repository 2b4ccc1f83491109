#include <algorithm>
#include <bit>
#include <map>

#include "brace/ir.hpp"

namespace brace::ir {

namespace {

Plan make(Op op, std::vector<Plan> kids = {}) {
  auto n = std::make_shared<PlanNode>();
  n->op = op;
  n->kids = std::move(kids);
  return n;
}

Plan make_attr(Op op, std::string_view a, std::vector<Plan> kids = {}) {
  auto n = std::make_shared<PlanNode>();
  n->op = op;
  n->attrs.push_back(attr(a));
  n->kids = std::move(kids);
  return n;
}

}  // namespace

const char *op_label(Op op) {
  switch (op) {
    case Op::Id: return "ID";
    case Op::Compose: return "COMPOSE";
    case Op::Tuple: return "TUPLE";
    case Op::Proj: return "PROJ";
    case Op::Map: return "MAP";
    case Op::FlatMap: return "FLATMAP";
    case Op::PairWith: return "PAIRWITH";
    case Op::Sng: return "SNG";
    case Op::Flatten: return "FLATTEN";
    case Op::Nest: return "NEST";
    case Op::Select: return "SELECT";
    case Op::Get: return "GET";
    case Op::Const: return "CONST";
    case Op::Arith: return "ARITH";
    case Op::Agg: return "AGG";
    case Op::Extend: return "EXTEND";
    case Op::EffectUnion: return "EFFECT_UNION";
    case Op::EffectId: return "EFFECT_ID";
    case Op::Rand: return "RAND";
    case Op::RangeSelect: return "RANGE_SELECT";
  }
  return "?";
}

Plan id() { return make(Op::Id); }

Plan compose(std::vector<Plan> stages) {
  std::vector<Plan> flat;
  for (auto &s : stages) {
    if (s->op == Op::Compose) {
      flat.insert(flat.end(), s->kids.begin(), s->kids.end());
    } else {
      flat.push_back(std::move(s));
    }
  }
  if (flat.empty()) return id();
  if (flat.size() == 1) return flat[0];
  return make(Op::Compose, std::move(flat));
}

Plan tuple(std::vector<std::pair<std::string, Plan>> fields) {
  std::vector<std::pair<Attr, Plan>> f;
  for (auto &[name, p] : fields) f.emplace_back(attr(name), std::move(p));
  return tuple_attrs(std::move(f));
}

Plan tuple_attrs(std::vector<std::pair<Attr, Plan>> fields) {
  auto n = std::make_shared<PlanNode>();
  n->op = Op::Tuple;
  for (auto &[a, p] : fields) {
    n->attrs.push_back(a);
    n->kids.push_back(std::move(p));
  }
  return n;
}

Plan proj(std::string_view a) { return make_attr(Op::Proj, a); }

Plan path(std::initializer_list<std::string_view> attrs) {
  std::vector<Plan> stages;
  for (auto a : attrs) stages.push_back(proj(a));
  return compose(std::move(stages));
}

Plan map(Plan f) { return make(Op::Map, {std::move(f)}); }
Plan flatmap(Plan f) { return make(Op::FlatMap, {std::move(f)}); }
Plan pairwith(std::string_view a) { return make_attr(Op::PairWith, a); }
Plan sng() { return make(Op::Sng); }
Plan flatten() { return make(Op::Flatten); }
Plan nest(std::string_view a) { return make_attr(Op::Nest, a); }
Plan select(Plan pred) { return make(Op::Select, {std::move(pred)}); }
Plan get() { return make(Op::Get); }

Plan constant(Value v) {
  auto n = std::make_shared<PlanNode>();
  n->op = Op::Const;
  n->constant = std::move(v);
  return n;
}

Plan arith(ScalarOp op, std::vector<Plan> args) {
  auto n = std::make_shared<PlanNode>();
  n->op = Op::Arith;
  n->sop = op;
  n->kids = std::move(args);
  return n;
}

Plan agg(AggKind k) {
  auto n = std::make_shared<PlanNode>();
  n->op = Op::Agg;
  n->agg = k;
  return n;
}

Plan extend(std::string_view a, Plan f) { return make_attr(Op::Extend, a, {std::move(f)}); }

Plan effect_union(Plan a, Plan b) { return make(Op::EffectUnion, {std::move(a), std::move(b)}); }

Plan effect_id(int rho) {
  auto n = std::make_shared<PlanNode>();
  n->op = Op::EffectId;
  n->rho = rho;
  return n;
}

Plan rand_draw(RandPhase phase, int stream, std::vector<Plan> keys) {
  auto n = std::make_shared<PlanNode>();
  n->op = Op::Rand;
  n->phase = phase;
  n->stream = stream;
  n->kids = std::move(keys);
  return n;
}

Plan range_select(std::vector<AxisRange> axes, std::vector<Attr> axis_attrs) {
  auto n = std::make_shared<PlanNode>();
  n->op = Op::RangeSelect;
  n->axes = std::move(axes);
  n->axis_attrs = std::move(axis_attrs);
  return n;
}

Plan with_kids(const PlanNode &n, std::vector<Plan> kids) {
  if (n.op == Op::Compose) return compose(std::move(kids));
  auto c = std::make_shared<PlanNode>(n);
  c->kids = std::move(kids);
  return c;
}

Plan product(Plan f, Plan g) {
  return compose({tuple({{"1", std::move(f)}, {"2", std::move(g)}}), pairwith("1"),
                  flatmap(pairwith("2"))});
}

std::size_t node_count(const Plan &p) {
  std::size_t n = 1;
  for (const auto &k : p->kids) n += node_count(k);
  return n;
}

bool same_plan(const Plan &a, const Plan &b) {
  if (a == b) return true;
  if (a->op != b->op || a->kids.size() != b->kids.size() || a->attrs != b->attrs) return false;
  switch (a->op) {
    case Op::Arith:
      if (a->sop != b->sop) return false;
      break;
    case Op::Agg:
      if (a->agg != b->agg) return false;
      break;
    case Op::Const:
      if (!(a->constant == b->constant)) return false;
      break;
    case Op::EffectId:
      if (a->rho != b->rho) return false;
      break;
    case Op::Rand:
      if (a->phase != b->phase || a->stream != b->stream) return false;
      break;
    case Op::RangeSelect:
      if (a->axis_attrs != b->axis_attrs || a->axes.size() != b->axes.size()) return false;
      for (std::size_t i = 0; i < a->axes.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a->axes[i].lo) != std::bit_cast<std::uint64_t>(b->axes[i].lo) ||
            std::bit_cast<std::uint64_t>(a->axes[i].hi) != std::bit_cast<std::uint64_t>(b->axes[i].hi)) {
          return false;
        }
      }
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a->kids.size(); ++i) {
    if (!same_plan(a->kids[i], b->kids[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Printer

namespace {

const char *agg_label(AggKind k) {
  switch (k) {
    case AggKind::Sum: return "sum";
    case AggKind::Count: return "count";
    case AggKind::Min: return "min";
    case AggKind::Max: return "max";
  }
  return "?";
}

const char *phase_label(RandPhase p) {
  switch (p) {
    case RandPhase::Query: return "query";
    case RandPhase::Update: return "update";
    case RandPhase::Spawn: return "spawn";
    case RandPhase::Die: return "die";
  }
  return "?";
}

bool is_proj_chain(const PlanNode &n) {
  if (n.op != Op::Compose) return false;
  for (const auto &k : n.kids) {
    if (k->op != Op::Proj) return false;
  }
  return true;
}

std::string head(const PlanNode &n) {
  std::string s = op_label(n.op);
  switch (n.op) {
    case Op::Proj:
    case Op::PairWith:
    case Op::Nest:
    case Op::Extend:
      s += "(" + attr_name(n.attrs[0]) + ")";
      break;
    case Op::Arith:
      s += "(";
      s += op_name(n.sop);
      s += ")";
      break;
    case Op::Agg:
      s += "(";
      s += agg_label(n.agg);
      s += ")";
      break;
    case Op::Const:
      s += "(" + to_string(n.constant) + ")";
      break;
    case Op::EffectId:
      s += "(" + std::to_string(n.rho) + ")";
      break;
    case Op::Rand:
      s += "(";
      s += phase_label(n.phase);
      s += ", " + std::to_string(n.stream) + ")";
      break;
    case Op::RangeSelect: {
      s += "(";
      for (std::size_t i = 0; i < n.axes.size(); ++i) {
        if (i) s += ", ";
        s += attr_name(n.axis_attrs[i]) + ": " + to_string(Value::num(n.axes[i].lo)) + " .. " +
             to_string(Value::num(n.axes[i].hi));
      }
      s += ")";
      break;
    }
    default:
      break;
  }
  return s;
}

void print(std::string &out, const Plan &p, int depth, const std::string &label) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  out += label;
  if (is_proj_chain(*p)) {
    out += "PROJ(";
    for (std::size_t i = 0; i < p->kids.size(); ++i) {
      if (i) out += '.';
      out += attr_name(p->kids[i]->attrs[0]);
    }
    out += ")\n";
    return;
  }
  out += head(*p);
  out += '\n';
  for (std::size_t i = 0; i < p->kids.size(); ++i) {
    const std::string sub = p->op == Op::Tuple ? attr_name(p->attrs[i]) + ": " : "";
    print(out, p->kids[i], depth + 1, sub);
  }
}

}  // namespace

std::string print_plan(const Plan &p) {
  std::string out;
  print(out, p, 0, "");
  return out;
}

// ---------------------------------------------------------------------------
// Evaluator

namespace {

std::uint64_t scalar_sort_key(const Value &v) {
  return canonical_order_key(v.number());
}

Value eval(const PlanNode &n, const Value &v, const EvalContext &ctx);

Value eval_kid(const PlanNode &n, std::size_t i, const Value &v, const EvalContext &ctx) {
  return eval(*n.kids[i], v, ctx);
}

Value eval(const PlanNode &n, const Value &v, const EvalContext &ctx) {
  switch (n.op) {
    case Op::Id:
      return v;

    case Op::Compose: {
      Value cur = v;
      for (const auto &k : n.kids) cur = eval(*k, cur, ctx);
      return cur;
    }

    case Op::Tuple: {
      Fields f;
      f.reserve(n.kids.size());
      for (std::size_t i = 0; i < n.kids.size(); ++i) f.emplace_back(n.attrs[i], eval_kid(n, i, v, ctx));
      return Value::tuple(std::move(f));
    }

    case Op::Proj: {
      if (v.is_nil()) return v;
      const Value *x = v.find(n.attrs[0]);
      return x ? *x : Value::nil();
    }

    case Op::Map: {
      if (v.is_nil()) return v;
      Elems out;
      out.reserve(v.elems().size());
      for (const auto &e : v.elems()) out.push_back(eval_kid(n, 0, e, ctx));
      return Value::set(std::move(out));
    }

    case Op::FlatMap: {
      if (v.is_nil()) return v;
      Elems out;
      for (const auto &e : v.elems()) {
        Value r = eval_kid(n, 0, e, ctx);
        if (r.is_nil()) continue;
        const auto &xs = r.elems();
        out.insert(out.end(), xs.begin(), xs.end());
      }
      return Value::set(std::move(out));
    }

    case Op::PairWith: {
      if (v.is_nil()) return v;
      const Attr a = n.attrs[0];
      const Value *s = v.find(a);
      if (!s || s->is_nil()) return Value::empty_set();
      Elems out;
      out.reserve(s->elems().size());
      for (const auto &e : s->elems()) {
        Fields f = v.fields();
        for (auto &[name, x] : f) {
          if (name == a) x = e;
        }
        out.push_back(Value::tuple(std::move(f)));
      }
      return Value::set(std::move(out));
    }

    case Op::Sng:
      return Value::set({v});

    case Op::Flatten: {
      if (v.is_nil()) return v;
      Elems out;
      for (const auto &e : v.elems()) {
        if (e.is_nil()) continue;
        const auto &xs = e.elems();
        out.insert(out.end(), xs.begin(), xs.end());
      }
      return Value::set(std::move(out));
    }

    case Op::Nest: {
      if (v.is_nil()) return v;
      static const Attr group_attr = attr("#group");
      const Attr a = n.attrs[0];
      std::map<std::pair<int, std::uint64_t>, std::size_t> index;
      std::vector<std::pair<Value, Elems>> groups;
      for (const auto &e : v.elems()) {
        const Value *kv = e.find(a);
        const Value k = kv ? *kv : Value::nil();
        if (!k.is_scalar()) throw EvalTypeError("NEST key must be a scalar");
        const std::pair<int, std::uint64_t> key{static_cast<int>(k.kind()),
                                                k.is_nil() ? 0 : scalar_sort_key(k)};
        auto [it, fresh] = index.emplace(key, groups.size());
        if (fresh) groups.emplace_back(k, Elems{});
        groups[it->second].second.push_back(e);
      }
      Elems out;
      out.reserve(groups.size());
      for (auto &[k, members] : groups) {
        out.push_back(Value::tuple({{a, k}, {group_attr, Value::set(std::move(members))}}));
      }
      return Value::set(std::move(out));
    }

    case Op::Select: {
      if (v.is_nil()) return v;
      Elems out;
      for (const auto &e : v.elems()) {
        if (truthy(eval_kid(n, 0, e, ctx).as_scalar())) out.push_back(e);
      }
      return Value::set(std::move(out));
    }

    case Op::Get: {
      if (v.is_nil()) return v;
      const auto &xs = v.elems();
      return xs.size() == 1 ? xs[0] : Value::nil();
    }

    case Op::Const:
      return n.constant;

    case Op::Arith: {
      const Value a = eval_kid(n, 0, v, ctx);
      switch (n.sop) {
        case ScalarOp::Defined:
          return Value::num(a.is_nil() ? 0.0 : 1.0);
        case ScalarOp::Truthy:
        case ScalarOp::Falsy: {
          const bool t = a.is_scalar() ? truthy(a.as_scalar()) : true;
          return Value::num((t == (n.sop == ScalarOp::Truthy)) ? 1.0 : 0.0);
        }
        default:
          break;
      }
      if (n.kids.size() == 1) return Value::scalar(apply_op(n.sop, a.as_scalar()));
      const Value b = eval_kid(n, 1, v, ctx);
      if (n.sop == ScalarOp::Coalesce) return a.is_nil() ? b : a;
      return Value::scalar(apply_op(n.sop, a.as_scalar(), b.as_scalar()));
    }

    case Op::Agg: {
      if (v.is_nil()) return v;
      std::vector<double> xs;
      for (const auto &e : v.elems()) {
        const Scalar s = e.as_scalar();
        if (!s.is_nil()) xs.push_back(s.v);
      }
      switch (n.agg) {
        case AggKind::Count: return Value::num(static_cast<double>(xs.size()));
        case AggKind::Sum: return Value::num(fold_canonical(Combinator::Sum, xs));
        case AggKind::Min: return Value::num(fold_canonical(Combinator::Min, xs));
        case AggKind::Max: return Value::num(fold_canonical(Combinator::Max, xs));
      }
      return Value::nil();
    }

    case Op::Extend: {
      static const Attr one = attr("1");
      const Value *base = v.find(one);
      if (!base || !base->is_tuple()) throw EvalTypeError("EXTEND needs a tuple in component 1");
      Value x = eval_kid(n, 0, v, ctx);
      Fields f = base->fields();
      bool replaced = false;
      for (auto &[name, val] : f) {
        if (name == n.attrs[0]) {
          val = x;
          replaced = true;
        }
      }
      if (!replaced) f.emplace_back(n.attrs[0], std::move(x));
      return Value::tuple(std::move(f));
    }

    case Op::EffectUnion: {
      Value a = eval_kid(n, 0, v, ctx);
      Value b = eval_kid(n, 1, v, ctx);
      if (a.is_nil() || a.elems().empty()) return b.is_nil() ? Value::empty_set() : b;
      if (b.is_nil() || b.elems().empty()) return a;
      Elems out = a.elems();
      const auto &ys = b.elems();
      out.insert(out.end(), ys.begin(), ys.end());
      return Value::set(std::move(out));
    }

    case Op::EffectId:
      return Value::num(static_cast<double>(n.rho));

    case Op::Rand: {
      std::vector<std::uint64_t> keys;
      keys.reserve(n.kids.size());
      for (std::size_t i = 0; i < n.kids.size(); ++i) {
        const Scalar s = eval_kid(n, i, v, ctx).as_scalar();
        if (s.kind != Scalar::Kind::Key) return Value::nil();
        keys.push_back(s.oid());
      }
      if (keys.empty()) throw EvalTypeError("RAND needs the acting agent's key");
      const std::span<const std::uint64_t> loops(keys.data() + 1, keys.size() - 1);
      return Value::num(counter_uniform(ctx.seed, keys[0], ctx.tick, n.phase,
                                        static_cast<std::uint64_t>(n.stream), loops));
    }

    case Op::RangeSelect: {
      static const Attr one = attr("1");
      static const Attr two = attr("2");
      static const Attr key = attr(kKeyAttr);
      const Value *self = v.find(one);
      const Value *others = v.find(two);
      if (!self || !others) throw EvalTypeError("RANGE_SELECT needs <1: agent, 2: set>");
      std::vector<double> centre;
      for (const Attr a : n.axis_attrs) {
        const Value *x = self->find(a);
        centre.push_back(x ? x->number() : 0.0);
      }
      const Value *self_key = self->find(key);
      Elems out;
      for (const auto &e : others->elems()) {
        const Value *k = e.find(key);
        if (k && self_key && *k == *self_key) continue;
        bool inside = true;
        for (std::size_t i = 0; i < n.axes.size() && inside; ++i) {
          const Value *x = e.find(n.axis_attrs[i]);
          const double b = x ? x->number() : 0.0;
          inside = b >= centre[i] + n.axes[i].lo && b <= centre[i] + n.axes[i].hi;
        }
        if (inside) out.push_back(e);
      }
      return Value::set(std::move(out));
    }
  }
  throw EvalTypeError("unknown plan operator");
}

}  // namespace

Value eval_plan(const Plan &p, const Value &v, const EvalContext &ctx) { return eval(*p, v, ctx); }

}  // namespace brace::ir
