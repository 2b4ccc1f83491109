#include <algorithm>
#include <cmath>

#include "brace/random.hpp"
#include "brace/runtime.hpp"

namespace brace::runtime {

using namespace dsl;

void AgentView::clear(int state_count) {
  stride = state_count;
  oids.clear();
  states.clear();
  by_oid.clear();
  index = {};
  indexed = false;
}

void AgentView::add(std::uint64_t oid, const std::vector<double> &s) {
  by_oid.emplace(oid, static_cast<std::uint32_t>(oids.size()));
  oids.push_back(oid);
  states.insert(states.end(), s.begin(), s.end());
}

void AgentView::build_index(std::span<const AxisRange> axes) {
  const int dim = static_cast<int>(axes.size());
  std::vector<double> coords;
  coords.reserve(size() * dim);
  std::vector<std::uint32_t> items(size());
  for (std::uint32_t i = 0; i < size(); ++i) {
    items[i] = i;
    for (const auto &ax : axes) coords.push_back(state(i)[ax.field]);
  }
  index = spatial::kd_build(dim, coords, items);
  indexed = dim > 0;
}

namespace {

enum class EK : std::uint8_t {
  Lit, Nil, SelfKey, SelfState, LoopKey, ConstVal, Member, EffectRead,
  Unary, Binary, Cond, Rand, Visible,
  UState, UEffect,
};

struct AgentRef {
  enum class Kind : std::uint8_t { This, Loop, Const } kind = Kind::This;
  int slot = -1;
};

struct ENode {
  EK k = EK::Nil;
  ScalarOp op = ScalarOp::Add;
  RandPhase phase = RandPhase::Query;
  int a = -1, b = -1, c = -1;
  int index = -1;
  double num = 0.0;
  AgentRef ra, rb;
  bool numeric = false;  // update node that never yields NIL or a key
};

enum class SK : std::uint8_t { Const, Effect, If, Foreach };

struct SNode {
  SK k = SK::Const;
  int slot = -1;
  int rho = -1;
  bool trunc = false;
  bool local = true;
  AgentRef target;
  int expr = -1;
  int probe = 0;  // index into the kernel's probe table
  std::vector<SNode> body, else_body;
};

/// `field ± c`, a literal, or a field alone, of the acting agent or the neighbour.
struct Operand {
  enum class Src : std::uint8_t { Own, Other, Lit } src = Src::Lit;
  int field = -1;
  ScalarOp op = ScalarOp::Add;  // Add or Sub with `c`; unused for Lit
  bool offset = false;
  double c = 0.0;

  double value(const double *own, const double *other) const {
    if (src == Src::Lit) return c;
    const double v = (src == Src::Own ? own : other)[field];
    if (!offset) return v;
    return op == ScalarOp::Add ? v + c : v - c;
  }
};

struct Test {
  ScalarOp op = ScalarOp::Lt;
  Operand lhs, rhs;

  bool holds(const double *own, const double *other) const {
    const double x = lhs.value(own, other), y = rhs.value(own, other);
    switch (op) {
      case ScalarOp::Lt: return x < y;
      case ScalarOp::Le: return x <= y;
      case ScalarOp::Gt: return x > y;
      default: return x >= y;
    }
  }
};

// Test with the acting agent's side evaluated, written as
// sign * (other[field] + add) < bound, or <= when not strict.
struct Bound {
  int field = 0;
  double add = 0.0;
  double sign = 1.0;
  bool strict = true;
  double bound = 0.0;

  bool holds(const double *other) const {
    const double x = sign * (other[field] + add);
    return (x < bound) | (!strict & (x == bound));
  }
};

ScalarOp mirrored(ScalarOp op) {
  switch (op) {
    case ScalarOp::Lt: return ScalarOp::Gt;
    case ScalarOp::Le: return ScalarOp::Ge;
    case ScalarOp::Gt: return ScalarOp::Lt;
    default: return ScalarOp::Le;
  }
}

struct Probe {
  bool full = true;  // plain visibility rectangle
  std::vector<dsl::Interval> axes;
  std::vector<Test> tests;  // loop guard evaluated while collecting neighbours

  // `tests` split by which side reads the neighbour.
  std::vector<Bound> bounds;      // one side reads the neighbour; `bound` is filled per acting agent
  std::vector<Operand> sources;   // the acting agent's side of each bound
  std::vector<Test> fixed, mixed; // neither side, both sides

  void split() {
    for (const auto &t : tests) {
      const bool lo_other = t.lhs.src == Operand::Src::Other, hi_other = t.rhs.src == Operand::Src::Other;
      if (lo_other == hi_other) {
        (lo_other ? mixed : fixed).push_back(t);
        continue;
      }
      const Operand &o = lo_other ? t.lhs : t.rhs;
      const double add = !o.offset ? 0.0 : (o.op == ScalarOp::Add ? o.c : -o.c);
      const ScalarOp op = lo_other ? t.op : mirrored(t.op);
      const bool upper = op == ScalarOp::Lt || op == ScalarOp::Le;
      bounds.push_back({o.field, add, upper ? 1.0 : -1.0, op == ScalarOp::Lt || op == ScalarOp::Gt, 0.0});
      sources.push_back(lo_other ? t.rhs : t.lhs);
    }
  }
};

struct Binding {
  Scalar value;
  std::int64_t agent = -1;
};

struct Scratch {
  std::vector<Binding> slots;
  std::vector<std::uint64_t> loop_keys;
  std::vector<std::vector<std::uint32_t>> neighbours;
  std::vector<char> have;
  std::vector<std::uint32_t> candidates;
  std::vector<double> values;
  std::vector<Bound> bounds;
};

thread_local Scratch tl_scratch;

ScalarOp scalar_op(const Expr &e) {
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

}  // namespace

struct Kernel::Impl {
  CheckedScript script;
  KernelOptions opts;
  std::vector<ENode> nodes;
  std::vector<SNode> run;
  std::vector<Probe> probes;
  std::vector<AxisRange> axes;
  std::vector<char> agent_field;
  std::vector<Combinator> combinators;
  std::vector<int> updates;        // per state field, or -1
  std::vector<int> spawn_override;  // per state field, or -1
  std::vector<std::optional<dsl::Interval>> reach;  // update written as min(max(E, f + lo), f + hi)
  int die = -1;
  int spawn = -1;
  int loops = 0;

  Impl(const CheckedScript &s, KernelOptions o) : script(s), opts(std::move(o)) {
    axes = visibility_axes(script);
    for (const auto &st : script.states) agent_field.push_back(st.type == ValueType::Agent);
    for (const auto &ef : script.effects) combinators.push_back(ef.combinator);
    probes.push_back({});
    for (const auto &st : script.ast.run_body) run.push_back(stmt(st));
    updates.assign(script.states.size(), -1);
    reach.assign(script.states.size(), std::nullopt);
    spawn_override.assign(script.states.size(), -1);
    for (std::size_t i = 0; i < script.states.size(); ++i) {
      const auto &decl = script.ast.fields[script.states[i].decl_index];
      if (!decl.update) continue;
      const Expr *u = &*decl.update;
      if (auto inner = reach_clamp(*u, static_cast<int>(i))) {
        reach[i] = *inner;
        u = &u->args[0].args[0];
      }
      updates[i] = uexpr(*u, RandPhase::Update);
    }
    if (script.ast.die) die = uexpr(*script.ast.die, RandPhase::Die);
    if (script.ast.spawn) {
      spawn = uexpr(script.ast.spawn->condition, RandPhase::Spawn);
      for (const auto &[name, e] : script.ast.spawn->overrides) {
        spawn_override[script.state_index(name)] = uexpr(e, RandPhase::Spawn);
      }
    }
  }

  int push(ENode n) {
    nodes.push_back(n);
    return static_cast<int>(nodes.size()) - 1;
  }

  static AgentRef agent_ref(const Expr &e) {
    if (e.kind == ExprKind::This) return {AgentRef::Kind::This, -1};
    if (e.kind == ExprKind::Name && e.ref == RefKind::LoopVar) return {AgentRef::Kind::Loop, e.index};
    if (e.kind == ExprKind::Name && e.ref == RefKind::Const) return {AgentRef::Kind::Const, e.index};
    throw LoweringError("not an agent reference: " + print_expr(e));
  }

  SNode stmt(const Stmt &st) {
    SNode n;
    switch (st.kind) {
      case StmtKind::Const:
        n.k = SK::Const;
        n.slot = st.slot;
        n.trunc = st.decl_type == ValueType::Int;
        n.expr = qexpr(st.value);
        break;
      case StmtKind::LocalEffect:
      case StmtKind::RemoteEffect:
        n.k = SK::Effect;
        n.rho = st.slot;
        n.trunc = script.effects[st.slot].type == ValueType::Int;
        n.local = st.kind == StmtKind::LocalEffect;
        if (!n.local) n.target = agent_ref(st.target);
        n.expr = qexpr(st.value);
        break;
      case StmtKind::If:
        n.k = SK::If;
        n.expr = qexpr(st.value);
        for (const auto &b : st.body) n.body.push_back(stmt(b));
        for (const auto &b : st.else_body) n.else_body.push_back(stmt(b));
        break;
      case StmtKind::Foreach: {
        n.k = SK::Foreach;
        n.slot = st.slot;
        const int loop = loops++;
        for (const auto &h : opts.probes) {
          if (h.loop == loop) {
            probes.push_back({false, h.axes, {}});
            n.probe = static_cast<int>(probes.size()) - 1;
          }
        }
        std::vector<Test> tests;
        if (st.body.size() == 1 && st.body[0].kind == StmtKind::If && st.body[0].else_body.empty() &&
            guard_tests(st.body[0].value, st.slot, tests)) {
          if (n.probe == 0) {
            probes.push_back({true, {}, {}});
            n.probe = static_cast<int>(probes.size()) - 1;
          }
          probes[n.probe].tests = std::move(tests);
          probes[n.probe].split();
          for (const auto &b : st.body[0].body) n.body.push_back(stmt(b));
        } else {
          for (const auto &b : st.body) n.body.push_back(stmt(b));
        }
        break;
      }
      case StmtKind::Assign:
        throw LoweringError("state assignment in the run body");
    }
    return n;
  }

  bool numeric_field(int f) const {
    return f >= 0 && static_cast<std::size_t>(f) < script.states.size() && !agent_field[f];
  }

  bool operand(const Expr &e, int loop_slot, Operand &out) const {
    auto field_of = [&](const Expr &x, Operand &o) {
      if (x.kind == ExprKind::Name && x.ref == RefKind::StateField && numeric_field(x.index)) {
        o.src = Operand::Src::Own;
        o.field = x.index;
        return true;
      }
      if (x.kind == ExprKind::Member && numeric_field(x.field_index)) {
        const Expr &base = x.args[0];
        if (base.kind == ExprKind::This) {
          o.src = Operand::Src::Own;
        } else if (base.kind == ExprKind::Name && base.ref == RefKind::LoopVar && base.index == loop_slot) {
          o.src = Operand::Src::Other;
        } else {
          return false;
        }
        o.field = x.field_index;
        return true;
      }
      return false;
    };
    if (e.kind == ExprKind::Literal) {
      out = {};
      out.c = e.number;
      return true;
    }
    if (field_of(e, out)) return true;
    if (e.kind == ExprKind::Binary && (e.binary == BinaryOp::Add || e.binary == BinaryOp::Sub) &&
        e.args[1].kind == ExprKind::Literal && field_of(e.args[0], out)) {
      out.offset = true;
      out.op = e.binary == BinaryOp::Add ? ScalarOp::Add : ScalarOp::Sub;
      out.c = e.args[1].number;
      return true;
    }
    return false;
  }

  /// A conjunction of comparisons between fields of the acting agent and the
  /// loop variable, each side at most one field plus or minus a literal.
  bool guard_tests(const Expr &e, int loop_slot, std::vector<Test> &out) const {
    if (e.kind != ExprKind::Binary) return false;
    if (e.binary == BinaryOp::And) {
      return guard_tests(e.args[0], loop_slot, out) && guard_tests(e.args[1], loop_slot, out);
    }
    Test t;
    switch (e.binary) {
      case BinaryOp::Lt: t.op = ScalarOp::Lt; break;
      case BinaryOp::Le: t.op = ScalarOp::Le; break;
      case BinaryOp::Gt: t.op = ScalarOp::Gt; break;
      case BinaryOp::Ge: t.op = ScalarOp::Ge; break;
      default: return false;
    }
    if (!operand(e.args[0], loop_slot, t.lhs) || !operand(e.args[1], loop_slot, t.rhs)) return false;
    out.push_back(t);
    return true;
  }

  int qexpr(const Expr &e) {
    ENode n;
    switch (e.kind) {
      case ExprKind::Literal: n.k = EK::Lit; n.num = e.number; break;
      case ExprKind::Nil: n.k = EK::Nil; break;
      case ExprKind::This: n.k = EK::SelfKey; break;
      case ExprKind::Name:
        switch (e.ref) {
          case RefKind::StateField: n.k = EK::SelfState; n.index = e.index; break;
          case RefKind::Const: n.k = EK::ConstVal; n.index = e.index; break;
          case RefKind::LoopVar: n.k = EK::LoopKey; n.index = e.index; break;
          case RefKind::EffectField: n.k = EK::EffectRead; n.index = e.index; break;
          default: throw LoweringError("unresolved name " + e.name);
        }
        break;
      case ExprKind::Member:
        if (e.args[0].kind == ExprKind::This) {
          n.k = EK::SelfState;
          n.index = e.field_index;
        } else {
          n.k = EK::Member;
          n.ra = agent_ref(e.args[0]);
          n.index = e.field_index;
        }
        break;
      case ExprKind::Unary:
        n.k = EK::Unary;
        n.op = e.unary == UnaryOp::Neg ? ScalarOp::Neg : ScalarOp::Not;
        n.a = qexpr(e.args[0]);
        break;
      case ExprKind::Binary:
        n.k = EK::Binary;
        n.op = scalar_op(e);
        n.a = qexpr(e.args[0]);
        n.b = qexpr(e.args[1]);
        break;
      case ExprKind::Ternary:
        n.k = EK::Cond;
        n.a = qexpr(e.args[0]);
        n.b = qexpr(e.args[1]);
        n.c = qexpr(e.args[2]);
        break;
      case ExprKind::Call:
        if (e.name == "rand") {
          n.k = EK::Rand;
          n.index = e.rand_stream;
        } else if (e.name == "visible") {
          n.k = EK::Visible;
          n.ra = agent_ref(e.args[0]);
          n.rb = agent_ref(e.args[1]);
        } else {
          builtin(e, n, [this](const Expr &x) { return qexpr(x); });
        }
        break;
    }
    return push(n);
  }

  template <class F>
  static void builtin(const Expr &e, ENode &n, F &&sub) {
    if (e.name == "abs") n.op = ScalarOp::Abs;
    else if (e.name == "sqrt") n.op = ScalarOp::Sqrt;
    else if (e.name == "min") n.op = ScalarOp::Min;
    else if (e.name == "max") n.op = ScalarOp::Max;
    else throw LoweringError("unknown function " + e.name);
    n.k = e.args.size() == 1 ? EK::Unary : EK::Binary;
    n.a = sub(e.args[0]);
    if (e.args.size() > 1) n.b = sub(e.args[1]);
  }

  int uexpr(const Expr &e, RandPhase phase) {
    ENode n;
    switch (e.kind) {
      case ExprKind::Literal: n.k = EK::Lit; n.num = e.number; break;
      case ExprKind::Nil: n.k = EK::Nil; break;
      case ExprKind::This: n.k = EK::SelfKey; break;
      case ExprKind::Name:
        if (e.ref == RefKind::EffectField) {
          n.k = EK::UEffect;
          n.index = e.index;
        } else {
          n.k = EK::UState;
          n.index = e.index;
        }
        break;
      case ExprKind::Member: n.k = EK::UState; n.index = e.field_index; break;
      case ExprKind::Unary:
        n.k = EK::Unary;
        n.op = e.unary == UnaryOp::Neg ? ScalarOp::Neg : ScalarOp::Not;
        n.a = uexpr(e.args[0], phase);
        break;
      case ExprKind::Binary:
        n.k = EK::Binary;
        n.op = scalar_op(e);
        n.a = uexpr(e.args[0], phase);
        n.b = uexpr(e.args[1], phase);
        break;
      case ExprKind::Ternary:
        n.k = EK::Cond;
        n.a = uexpr(e.args[0], phase);
        n.b = uexpr(e.args[1], phase);
        n.c = uexpr(e.args[2], phase);
        break;
      case ExprKind::Call:
        if (e.name == "rand") {
          n.k = EK::Rand;
          n.phase = phase;
          n.index = e.rand_stream;
        } else {
          builtin(e, n, [&](const Expr &x) { return uexpr(x, phase); });
        }
        break;
    }
    n.numeric = numeric(n);
    return push(n);
  }

  // `f + c`, `f - c` or `f` for the state field being updated.
  std::optional<double> own_offset(const Expr &e, int f) const {
    auto is_field = [&](const Expr &x) {
      return x.kind == ExprKind::Name && x.ref == RefKind::StateField && x.index == f;
    };
    if (is_field(e)) return 0.0;
    if (e.kind != ExprKind::Binary || (e.binary != BinaryOp::Add && e.binary != BinaryOp::Sub)) return std::nullopt;
    if (!is_field(e.args[0]) || e.args[1].kind != ExprKind::Literal) return std::nullopt;
    return e.binary == BinaryOp::Add ? e.args[1].number : -e.args[1].number;
  }

  std::optional<dsl::Interval> reach_clamp(const Expr &e, int f) const {
    if (agent_field[f] || script.states[f].type != ValueType::Float) return std::nullopt;
    if (e.kind != ExprKind::Call || e.name != "min" || e.args.size() != 2) return std::nullopt;
    const Expr &m = e.args[0];
    if (m.kind != ExprKind::Call || m.name != "max" || m.args.size() != 2) return std::nullopt;
    const auto lo = own_offset(m.args[1], f), hi = own_offset(e.args[1], f);
    if (!lo || !hi) return std::nullopt;
    return dsl::Interval{*lo, *hi};
  }

  bool numeric(const ENode &n) const {
    auto num = [&](int i) { return i >= 0 && nodes[i].numeric; };
    switch (n.k) {
      case EK::Lit:
      case EK::UEffect:
      case EK::Rand: return true;
      case EK::UState: return !agent_field[n.index];
      case EK::Unary: return n.op != ScalarOp::Defined && num(n.a);
      case EK::Binary:
        return n.op != ScalarOp::Div && n.op != ScalarOp::IDiv && num(n.a) && num(n.b);
      case EK::Cond: return num(n.a) && num(n.b) && num(n.c);
      default: return false;
    }
  }

  double feval(int i, std::uint64_t oid, const std::vector<double> &s, const std::vector<double> &e,
               std::uint64_t seed, std::uint64_t tick) const {
    const ENode &n = nodes[i];
    switch (n.k) {
      case EK::Lit: return n.num;
      case EK::UState: return s[n.index];
      case EK::UEffect: return e[n.index];
      case EK::Rand: return counter_uniform(seed, oid, tick, n.phase, static_cast<std::uint64_t>(n.index));
      case EK::Cond:
        return feval(n.a, oid, s, e, seed, tick) != 0.0 ? feval(n.b, oid, s, e, seed, tick)
                                                        : feval(n.c, oid, s, e, seed, tick);
      case EK::Unary: {
        const double x = feval(n.a, oid, s, e, seed, tick);
        switch (n.op) {
          case ScalarOp::Neg: return -x;
          case ScalarOp::Not: return x == 0.0 ? 1.0 : 0.0;
          case ScalarOp::Abs: return std::fabs(x);
          case ScalarOp::Sqrt: return std::sqrt(x);
          default: return apply_op(n.op, Scalar::num(x)).v;
        }
      }
      default: break;
    }
    const double x = feval(n.a, oid, s, e, seed, tick);
    const double y = feval(n.b, oid, s, e, seed, tick);
    switch (n.op) {
      case ScalarOp::Add: return x + y;
      case ScalarOp::Sub: return x - y;
      case ScalarOp::Mul: return x * y;
      case ScalarOp::Lt: return x < y ? 1.0 : 0.0;
      case ScalarOp::Le: return x <= y ? 1.0 : 0.0;
      case ScalarOp::Gt: return x > y ? 1.0 : 0.0;
      case ScalarOp::Ge: return x >= y ? 1.0 : 0.0;
      case ScalarOp::Min: return y < x ? y : x;
      case ScalarOp::Max: return x < y ? y : x;
      default: return apply_op(n.op, Scalar::num(x), Scalar::num(y)).v;
    }
  }

  Scalar field_scalar(int f, double v) const {
    if (agent_field[f]) return std::isnan(v) ? Scalar::nil() : Scalar{Scalar::Kind::Key, v};
    return Scalar::num(v);
  }

  double field_value(int f, const Scalar &v) const {
    if (agent_field[f]) return v.kind == Scalar::Kind::Key ? v.v : std::nan("");
    return v.v;
  }

  // -- query ------------------------------------------------------------------

  struct Query {
    const Impl &k;
    const AgentView &view;
    std::uint32_t self;
    std::uint64_t seed, tick;
    std::vector<EffectMessage> &out;
    std::size_t start;
    Scratch &sc;

    std::int64_t resolve(const AgentRef &r) const {
      switch (r.kind) {
        case AgentRef::Kind::This: return self;
        case AgentRef::Kind::Loop: return sc.slots[r.slot].agent;
        case AgentRef::Kind::Const: {
          const Scalar key = sc.slots[r.slot].value;
          if (key.kind != Scalar::Kind::Key) return -1;
          if (key.v == static_cast<double>(view.oids[self])) return self;
          auto it = view.by_oid.find(key.oid());
          if (it == view.by_oid.end() || static_cast<double>(view.oids[it->second]) != key.v) return -1;
          if (k.opts.visibility != VisibilityMode::Off &&
              !visible_box(view.state(self), view.state(it->second), k.axes)) {
            return -1;
          }
          return it->second;
        }
      }
      return -1;
    }

    Scalar eval(int i) const {
      const ENode &n = k.nodes[i];
      switch (n.k) {
        case EK::Lit: return Scalar::num(n.num);
        case EK::Nil: return Scalar::nil();
        case EK::SelfKey: return Scalar::key(view.oids[self]);
        case EK::SelfState: return k.field_scalar(n.index, view.state(self)[n.index]);
        case EK::LoopKey: return Scalar::key(view.oids[sc.slots[n.index].agent]);
        case EK::ConstVal: return sc.slots[n.index].value;
        case EK::Member: {
          const std::int64_t a = resolve(n.ra);
          if (a < 0) return Scalar::nil();
          return k.field_scalar(n.index, view.state(static_cast<std::uint32_t>(a))[n.index]);
        }
        case EK::EffectRead: {
          const std::uint64_t me = view.oids[self];
          std::vector<double> &vals = sc.values;
          vals.clear();
          for (std::size_t j = start; j < out.size(); ++j) {
            if (out[j].k == me && out[j].e == static_cast<std::uint32_t>(n.index)) vals.push_back(out[j].v);
          }
          return Scalar::num(fold_canonical(k.combinators[n.index], vals));
        }
        case EK::Unary: return apply_op(n.op, eval(n.a));
        case EK::Binary: return apply_op(n.op, eval(n.a), eval(n.b));
        case EK::Cond: return truthy(eval(n.a)) ? eval(n.b) : eval(n.c);
        case EK::Rand:
          return Scalar::num(counter_uniform(seed, view.oids[self], tick, RandPhase::Query,
                                             static_cast<std::uint64_t>(n.index), sc.loop_keys));
        case EK::Visible: {
          const std::int64_t a = resolve(n.ra);
          const std::int64_t b = resolve(n.rb);
          if (a < 0 || b < 0) return Scalar::num(0.0);
          return Scalar::num(visible_box(view.state(static_cast<std::uint32_t>(a)),
                                         view.state(static_cast<std::uint32_t>(b)), k.axes)
                                 ? 1.0
                                 : 0.0);
        }
        case EK::UState:
        case EK::UEffect:
          break;
      }
      throw EvalTypeError("update-only node in a query");
    }

    const std::vector<std::uint32_t> &neighbours(int probe) {
      if (sc.have[probe]) return sc.neighbours[probe];
      sc.have[probe] = 1;
      auto &list = sc.neighbours[probe];
      list.clear();
      const double *me = view.state(self);
      const auto &axes = k.axes;
      const Probe &p = k.probes[probe];
      if (k.opts.visibility == VisibilityMode::Off) {
        for (std::uint32_t j = 0; j < view.size(); ++j) {
          if (j == self) continue;
          bool ok = true;
          for (const auto &t : p.tests) ok = ok && t.holds(me, view.state(j));
          if (ok) list.push_back(j);
        }
        return list;
      }
      const std::size_t d = axes.size();
      const bool full = p.full || d > 4;
      double lo[4], hi[4];
      bool covered = !full;  // probe box inside the visibility box, so visible_box always holds
      for (std::size_t a = 0; a < d && a < 4; ++a) {
        const double c = me[axes[a].field];
        if (full) {
          lo[a] = c + axes[a].lo;
          hi[a] = c + axes[a].hi;
        } else {
          const double slack = 1e-6 * (1.0 + std::fabs(c) + std::fabs(p.axes[a].lo) + std::fabs(p.axes[a].hi));
          lo[a] = c + p.axes[a].lo - slack;
          hi[a] = c + p.axes[a].hi + slack;
          covered = covered && p.axes[a].lo - 2 * slack >= axes[a].lo && p.axes[a].hi + 2 * slack <= axes[a].hi;
        }
      }
      auto in_probe = [&](const double *s) {
        for (std::size_t a = 0; a < d; ++a) {
          const double v = s[axes[a].field];
          if (!(v >= lo[a] && v <= hi[a])) return false;
        }
        return true;
      };
      for (const auto &t : p.fixed) {
        if (!t.holds(me, nullptr)) return list;
      }
      sc.bounds = p.bounds;
      for (std::size_t i = 0; i < p.sources.size(); ++i) sc.bounds[i].bound = sc.bounds[i].sign * p.sources[i].value(me, nullptr);
      auto guard = [&](const double *s) {
        for (const auto &b : sc.bounds) {
          if (!b.holds(s)) return false;
        }
        for (const auto &t : p.mixed) {
          if (!t.holds(me, s)) return false;
        }
        return true;
      };
      if (k.opts.use_index && view.indexed && d <= 4) {
        sc.candidates.clear();
        view.index.range(lo, hi, sc.candidates);
        for (std::uint32_t j : sc.candidates) {
          const double *s = view.state(j);
          if (j != self && (covered || visible_box(me, s, axes)) && guard(s)) list.push_back(j);
        }
      } else {
        for (std::uint32_t j = 0; j < view.size(); ++j) {
          const double *s = view.state(j);
          if (j == self) continue;
          if (covered ? in_probe(s) : visible_box(me, s, axes) && (full || in_probe(s))) {
            if (guard(s)) list.push_back(j);
          }
        }
      }
      return list;
    }

    void exec(const std::vector<SNode> &body) {
      for (const auto &st : body) {
        switch (st.k) {
          case SK::Const: {
            Scalar v = eval(st.expr);
            if (st.trunc) v = apply_op(ScalarOp::Trunc, v);
            sc.slots[st.slot].value = v;
            break;
          }
          case SK::Effect: {
            std::uint64_t target;
            if (st.local) {
              target = view.oids[self];
            } else {
              const std::int64_t a = resolve(st.target);
              if (a < 0) break;
              target = view.oids[a];
            }
            Scalar v = eval(st.expr);
            if (st.trunc) v = apply_op(ScalarOp::Trunc, v);
            if (v.is_nil()) break;
            out.push_back({target, static_cast<std::uint32_t>(st.rho), v.v});
            break;
          }
          case SK::If:
            exec(truthy(eval(st.expr)) ? st.body : st.else_body);
            break;
          case SK::Foreach: {
            const auto &list = neighbours(st.probe);
            for (std::size_t j = 0; j < list.size(); ++j) {
              const std::uint32_t p = list[j];
              sc.slots[st.slot].agent = p;
              sc.loop_keys.push_back(view.oids[p]);
              exec(st.body);
              sc.loop_keys.pop_back();
            }
            sc.slots[st.slot].agent = -1;
            break;
          }
        }
      }
    }
  };

  // -- update -----------------------------------------------------------------

  Scalar ueval(int i, std::uint64_t oid, const std::vector<double> &s, const std::vector<double> &e,
               std::uint64_t seed, std::uint64_t tick) const {
    const ENode &n = nodes[i];
    if (n.numeric) return Scalar::num(feval(i, oid, s, e, seed, tick));
    switch (n.k) {
      case EK::Lit: return Scalar::num(n.num);
      case EK::Nil: return Scalar::nil();
      case EK::SelfKey: return Scalar::key(oid);
      case EK::UState: return field_scalar(n.index, s[n.index]);
      case EK::UEffect: return Scalar::num(e[n.index]);
      case EK::Unary: return apply_op(n.op, ueval(n.a, oid, s, e, seed, tick));
      case EK::Binary:
        return apply_op(n.op, ueval(n.a, oid, s, e, seed, tick), ueval(n.b, oid, s, e, seed, tick));
      case EK::Cond:
        return truthy(ueval(n.a, oid, s, e, seed, tick)) ? ueval(n.b, oid, s, e, seed, tick)
                                                          : ueval(n.c, oid, s, e, seed, tick);
      case EK::Rand:
        return Scalar::num(counter_uniform(seed, oid, tick, n.phase, static_cast<std::uint64_t>(n.index)));
      default:
        break;
    }
    throw EvalTypeError("query-only node in an update rule");
  }

  Scalar state_update(int f, std::uint64_t oid, const std::vector<double> &s, const std::vector<double> &e,
                      std::uint64_t seed, std::uint64_t tick) const {
    const Scalar old = field_scalar(f, s[f]);
    if (updates[f] < 0) return old;
    Scalar v = ueval(updates[f], oid, s, e, seed, tick);
    auto clamp = [&](const dsl::Interval &r) {
      if (v.is_nil() || old.is_nil()) {
        v = Scalar::nil();
        return;
      }
      const double lower = old.v + r.lo, upper = old.v + r.hi;
      const double m = v.v < lower ? lower : v.v;
      v = Scalar::num(upper < m ? upper : m);
    };
    if (reach[f]) clamp(*reach[f]);
    const auto &info = script.states[f];
    if (info.type == ValueType::Int) v = apply_op(ScalarOp::Trunc, v);
    if (info.range) clamp(*info.range);
    return v.is_nil() ? old : v;
  }
};

Kernel::Kernel(const CheckedScript &script, KernelOptions opts)
    : impl_(std::make_unique<Impl>(script, std::move(opts))) {}
Kernel::~Kernel() = default;
Kernel::Kernel(Kernel &&) noexcept = default;
Kernel &Kernel::operator=(Kernel &&) noexcept = default;

const CheckedScript &Kernel::script() const { return impl_->script; }
const KernelOptions &Kernel::options() const { return impl_->opts; }

void Kernel::query(const AgentView &view, std::uint32_t self, std::uint64_t seed, std::uint64_t tick,
                   std::vector<EffectMessage> &out) const {
  Scratch &sc = tl_scratch;
  const std::size_t slots = static_cast<std::size_t>(impl_->script.binding_slots);
  if (sc.slots.size() < slots) sc.slots.resize(slots);
  for (std::size_t i = 0; i < slots; ++i) sc.slots[i] = {};
  sc.loop_keys.clear();
  if (sc.neighbours.size() < impl_->probes.size()) sc.neighbours.resize(impl_->probes.size());
  sc.have.assign(impl_->probes.size(), 0);
  Impl::Query q{*impl_, view, self, seed, tick, out, out.size(), sc};
  q.exec(impl_->run);
}

UpdateOutcome Kernel::update(std::uint64_t oid, std::vector<double> &s, const std::vector<double> &e,
                             std::uint64_t seed, std::uint64_t tick) const {
  const Impl &k = *impl_;
  UpdateOutcome r;
  const std::size_t n = s.size();
  std::vector<double> next(n);
  for (std::size_t f = 0; f < n; ++f) {
    next[f] = k.field_value(static_cast<int>(f), k.state_update(static_cast<int>(f), oid, s, e, seed, tick));
  }
  if (k.die >= 0) r.dies = truthy(k.ueval(k.die, oid, s, e, seed, tick));
  if (k.spawn >= 0) {
    r.spawns = truthy(k.ueval(k.spawn, oid, s, e, seed, tick));
    if (r.spawns) {
      for (std::size_t f = 0; f < n; ++f) {
        const int o = k.spawn_override[f];
        if (o < 0) continue;
        Scalar v = k.ueval(o, oid, s, e, seed, tick);
        if (k.script.states[f].type == ValueType::Int) v = apply_op(ScalarOp::Trunc, v);
        const Scalar fallback = k.state_update(static_cast<int>(f), oid, s, e, seed, tick);
        r.overrides.emplace_back(static_cast<int>(f),
                                 k.field_value(static_cast<int>(f), apply_op(ScalarOp::Coalesce, v, fallback)));
      }
    }
  }
  s = std::move(next);
  return r;
}

void fold_effects(const CheckedScript &script, std::vector<EffectMessage> &contributions,
                  const std::unordered_map<std::uint64_t, std::uint32_t> &owner_index,
                  std::vector<std::vector<double>> &effects) {
  std::sort(contributions.begin(), contributions.end(), [](const EffectMessage &a, const EffectMessage &b) {
    if (a.k != b.k) return a.k < b.k;
    if (a.e != b.e) return a.e < b.e;
    return canonical_order_key(a.v) < canonical_order_key(b.v);
  });
  std::vector<double> vals;
  std::size_t i = 0;
  while (i < contributions.size()) {
    std::size_t j = i;
    vals.clear();
    while (j < contributions.size() && contributions[j].k == contributions[i].k &&
           contributions[j].e == contributions[i].e) {
      vals.push_back(contributions[j].v);
      ++j;
    }
    auto it = owner_index.find(contributions[i].k);
    if (it != owner_index.end()) {
      effects[it->second][contributions[i].e] = fold_canonical(script.effects[contributions[i].e].combinator, vals);
    }
    i = j;
  }
}

}  // namespace brace::runtime

namespace brace::runtime {

void fold_local(const CheckedScript &script, std::uint64_t oid, std::vector<EffectMessage> &contributions,
                std::vector<double> &effects) {
  for (const auto &m : contributions) {
    if (m.k != oid) throw ConfigError("non-local effect in the one-reduce pipeline");
  }
  std::sort(contributions.begin(), contributions.end(), [](const EffectMessage &a, const EffectMessage &b) {
    if (a.e != b.e) return a.e < b.e;
    return canonical_order_key(a.v) < canonical_order_key(b.v);
  });
  std::vector<double> &vals = tl_scratch.values;
  std::size_t i = 0;
  while (i < contributions.size()) {
    std::size_t j = i;
    vals.clear();
    while (j < contributions.size() && contributions[j].e == contributions[i].e) vals.push_back(contributions[j++].v);
    effects[contributions[i].e] = fold_canonical(script.effects[contributions[i].e].combinator, vals);
    i = j;
  }
}

}  // namespace brace::runtime
