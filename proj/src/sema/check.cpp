#include <algorithm>
#include <set>

#include "brace/sema.hpp"

namespace brace {

using namespace dsl;

const char *locality_name(Locality l) {
  return l == Locality::LocalOnly ? "local-only" : "has-non-local";
}

const char *rule_name(Rule r) {
  switch (r) {
    case Rule::R1_StateWrite: return "R1";
    case Rule::R2_EffectRead: return "R2";
    case Rule::R3_EffectAssignOp: return "R3";
    case Rule::R4_UpdateReads: return "R4";
    case Rule::R5_RangeConstraint: return "R5";
    case Rule::R6_MemberTarget: return "R6";
    case Rule::Declaration: return "declaration";
    case Rule::Typing: return "typing";
  }
  return "?";
}

namespace {
std::string summarize(const std::vector<SemanticDiagnostic> &d) {
  std::string out = "script rejected:";
  for (const auto &x : d) {
    out += "\n  " + to_string(x.pos) + " [" + rule_name(x.rule) + "] " + x.message;
  }
  return out;
}
}  // namespace

SemanticErrors::SemanticErrors(std::vector<SemanticDiagnostic> d)
    : Error(summarize(d)), diagnostics(std::move(d)) {}

int CheckedScript::state_index(const std::string &name) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int CheckedScript::effect_index(const std::string &name) const {
  for (std::size_t i = 0; i < effects.size(); ++i) {
    if (effects[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

bool numeric(Type t) { return t == Type::Float || t == Type::Int || t == Type::Bool; }

Type promote(Type a, Type b) {
  if (a == Type::Nil) return b == Type::Bool ? Type::Int : b;
  if (b == Type::Nil) return a == Type::Bool ? Type::Int : a;
  if (a == Type::Float || b == Type::Float) return Type::Float;
  return Type::Int;
}

Type from_value_type(ValueType v) {
  switch (v) {
    case ValueType::Float: return Type::Float;
    case ValueType::Int: return Type::Int;
    case ValueType::Agent: return Type::Agent;
  }
  return Type::Unknown;
}

enum class Context { Query, Update };

class Checker {
public:
  explicit Checker(const ScriptAst &ast) { out_.ast = ast; }

  CheckResult run() {
    declare_fields();
    check_update_rules();
    scope_.clear();
    ctx_ = Context::Query;
    rand_counter_ = 0;
    statements(out_.ast.run_body);
    out_.binding_slots = next_slot_;
    out_.query_uses_rand = rand_counter_ > 0;

    CheckResult r;
    r.diagnostics = std::move(diags_);
    if (r.diagnostics.empty()) r.script = std::move(out_);
    return r;
  }

private:
  struct Binding {
    std::string name;
    RefKind kind;
    int slot;
    Type type;
  };

  void diag(Rule rule, SourcePos pos, std::string msg) {
    diags_.push_back({rule, pos, std::move(msg)});
  }

  // -- fields ---------------------------------------------------------------
  void declare_fields() {
    auto &ast = out_.ast;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < ast.fields.size(); ++i) {
      auto &f = ast.fields[i];
      if (!seen.insert(f.name).second) {
        diag(Rule::Declaration, f.pos, "duplicate field '" + f.name + "'");
      }
      if (f.value_type == ValueType::Agent && f.type_name != ast.class_name) {
        diag(Rule::Declaration, f.pos, "unknown agent class '" + f.type_name + "'");
      }
      if (f.kind == FieldKind::State) {
        StateFieldInfo s{f.name, f.value_type, static_cast<int>(i), std::nullopt, -1};
        if (f.range) {
          if (f.value_type != ValueType::Float) {
            diag(Rule::R5_RangeConstraint, f.pos,
                 "range constraint on non-float state field '" + f.name + "'");
          } else if (!(f.range->lo <= f.range->hi)) {
            diag(Rule::R5_RangeConstraint, f.pos, "empty range on '" + f.name + "'");
          } else {
            s.range = f.range;
            s.axis = static_cast<int>(out_.spatial_fields.size());
            out_.spatial_fields.push_back({static_cast<int>(out_.states.size()), *f.range});
          }
        }
        out_.states.push_back(s);
      } else {
        if (f.range) {
          diag(Rule::R5_RangeConstraint, f.pos, "range constraint on effect field '" + f.name + "'");
        }
        if (f.value_type == ValueType::Agent) {
          diag(Rule::Typing, f.pos, "effect field '" + f.name + "' must be numeric");
        }
        const Combinator c = f.combinator.value_or(Combinator::Sum);
        out_.effects.push_back({f.name, f.value_type, static_cast<int>(i),
                                static_cast<int>(out_.effects.size()), c, idempotent_value(c)});
      }
    }
  }

  void check_update_rules() {
    auto &ast = out_.ast;
    ctx_ = Context::Update;
    for (auto &f : ast.fields) {
      if (f.kind != FieldKind::State || !f.update) continue;
      rand_counter_ = 0;
      const Type t = expr(*f.update);
      assignable(from_value_type(f.value_type), t, f.update->pos, f.name);
    }
    if (ast.spawn) {
      rand_counter_ = 0;
      condition(ast.spawn->condition);
      std::set<std::string> seen;
      for (auto &[name, e] : ast.spawn->overrides) {
        const int si = out_.state_index(name);
        const Type t = expr(e);
        if (si < 0) {
          diag(Rule::Declaration, e.pos, "spawn override of unknown state field '" + name + "'");
          continue;
        }
        if (out_.states[si].range) {
          diag(Rule::Declaration, e.pos, "spawn may not override spatial field '" + name + "'");
        }
        if (!seen.insert(name).second) {
          diag(Rule::Declaration, e.pos, "duplicate spawn override '" + name + "'");
        }
        assignable(from_value_type(out_.states[si].type), t, e.pos, name);
      }
    }
    if (ast.die) {
      rand_counter_ = 0;
      condition(*ast.die);
    }
  }

  void condition(Expr &e) {
    const Type t = expr(e);
    if (!numeric(t) && t != Type::Nil && t != Type::Unknown) {
      diag(Rule::Typing, e.pos, "condition must be numeric or boolean");
    }
  }

  void assignable(Type target, Type value, SourcePos pos, const std::string &what) {
    if (value == Type::Unknown || value == Type::Nil) return;
    if (target == Type::Agent) {
      if (value != Type::Agent) diag(Rule::Typing, pos, "'" + what + "' expects an agent reference");
    } else if (!numeric(value)) {
      diag(Rule::Typing, pos, "'" + what + "' expects a number");
    }
  }

  // -- bindings -------------------------------------------------------------
  const Binding *lookup(const std::string &name) const {
    for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
      if (it->name == name) return &*it;
    }
    return nullptr;
  }

  void bind(const std::string &name, RefKind kind, Type type, SourcePos pos, int &slot_out) {
    if (lookup(name) || out_.state_index(name) >= 0 || out_.effect_index(name) >= 0) {
      diag(Rule::Declaration, pos, "'" + name + "' shadows an existing name");
    }
    slot_out = next_slot_++;
    scope_.push_back({name, kind, slot_out, type});
  }

  // -- statements -----------------------------------------------------------
  void statements(std::vector<Stmt> &body) {
    const std::size_t mark = scope_.size();
    for (auto &s : body) statement(s);
    scope_.resize(mark);
  }

  void statement(Stmt &s) {
    switch (s.kind) {
      case StmtKind::Const: {
        const Type t = expr(s.value);
        const Type declared = from_value_type(s.decl_type);
        if (s.decl_type == ValueType::Agent && s.type_name != out_.ast.class_name) {
          diag(Rule::Declaration, s.pos, "unknown agent class '" + s.type_name + "'");
        }
        assignable(declared, t, s.value.pos, s.name);
        bind(s.name, RefKind::Const, declared, s.pos, s.slot);
        return;
      }
      case StmtKind::LocalEffect:
      case StmtKind::RemoteEffect:
        effect_write(s);
        return;
      case StmtKind::Assign:
        assignment(s);
        return;
      case StmtKind::If:
        condition(s.value);
        statements(s.body);
        statements(s.else_body);
        return;
      case StmtKind::Foreach: {
        if (s.extent_class != out_.ast.class_name || s.type_name != out_.ast.class_name) {
          diag(Rule::Declaration, s.pos, "foreach must iterate Extent<" + out_.ast.class_name + ">");
        }
        const std::size_t mark = scope_.size();
        bind(s.name, RefKind::LoopVar, Type::Agent, s.pos, s.slot);
        ++loop_depth_;
        statements(s.body);
        --loop_depth_;
        scope_.resize(mark);
        return;
      }
    }
  }

  void effect_write(Stmt &s) {
    bool target_is_this = false;
    if (s.kind == StmtKind::RemoteEffect) {
      const Type t = expr(s.target);
      if (t != Type::Agent && t != Type::Unknown && t != Type::Nil) {
        diag(Rule::Typing, s.target.pos, "effect target must be an agent reference");
      }
      target_is_this = s.target.kind == ExprKind::This;
      const bool ref_ok = target_is_this ||
                          (s.target.kind == ExprKind::Name &&
                           (s.target.ref == RefKind::LoopVar || s.target.ref == RefKind::Const));
      if (!ref_ok) {
        diag(Rule::R6_MemberTarget, s.target.pos,
             "effect target must be a foreach variable, this, or an agent const");
      }
    }
    const Type v = expr(s.value);
    const int ei = out_.effect_index(s.name);
    if (ei < 0) {
      if (out_.state_index(s.name) >= 0) {
        diag(Rule::R1_StateWrite, s.pos, "run body writes state field '" + s.name + "'");
      } else {
        diag(Rule::Declaration, s.pos, "unknown effect field '" + s.name + "'");
      }
      return;
    }
    if (!numeric(v) && v != Type::Nil && v != Type::Unknown) {
      diag(Rule::Typing, s.value.pos, "effect value must be numeric");
    }
    s.slot = ei;
    s.local_write = s.kind == StmtKind::LocalEffect || target_is_this;
    if (!s.local_write) out_.locality = Locality::HasNonLocal;
  }

  void assignment(Stmt &s) {
    if (s.has_target) expr(s.target);
    expr(s.value);
    if (out_.state_index(s.name) >= 0) {
      diag(Rule::R1_StateWrite, s.pos, "run body assigns state field '" + s.name + "'");
    } else if (out_.effect_index(s.name) >= 0) {
      diag(Rule::R3_EffectAssignOp, s.pos, "effect field '" + s.name + "' must be written with '<-'");
    } else {
      diag(Rule::Declaration, s.pos, "cannot assign to '" + s.name + "'");
    }
  }

  // -- expressions ----------------------------------------------------------
  Type expr(Expr &e) {
    e.type = infer(e);
    return e.type;
  }

  Type infer(Expr &e) {
    switch (e.kind) {
      case ExprKind::Literal: return e.is_int ? Type::Int : Type::Float;
      case ExprKind::Nil: return Type::Nil;
      case ExprKind::This: e.ref = RefKind::This; return Type::Agent;
      case ExprKind::Name: return name(e);
      case ExprKind::Member: return member(e);
      case ExprKind::Unary: {
        const Type t = expr(e.args[0]);
        if (!numeric(t) && t != Type::Nil && t != Type::Unknown) {
          diag(Rule::Typing, e.pos, "operand must be numeric");
        }
        if (e.unary == UnaryOp::Not) return Type::Bool;
        return t == Type::Bool ? Type::Int : t;
      }
      case ExprKind::Binary: return binary(e);
      case ExprKind::Ternary: {
        condition(e.args[0]);
        const Type a = expr(e.args[1]);
        const Type b = expr(e.args[2]);
        if (a == Type::Agent || b == Type::Agent) {
          if ((a != Type::Agent && a != Type::Nil) || (b != Type::Agent && b != Type::Nil)) {
            diag(Rule::Typing, e.pos, "branches mix agents and numbers");
          }
          return Type::Agent;
        }
        if (a == Type::Unknown || b == Type::Unknown) return Type::Unknown;
        if (a == Type::Nil && b == Type::Nil) return Type::Nil;
        return promote(a, b);
      }
      case ExprKind::Call: return call(e);
    }
    return Type::Unknown;
  }

  Type name(Expr &e) {
    if (ctx_ == Context::Query) {
      if (const Binding *b = lookup(e.name)) {
        e.ref = b->kind;
        e.index = b->slot;
        return b->type;
      }
    }
    if (const int si = out_.state_index(e.name); si >= 0) {
      e.ref = RefKind::StateField;
      e.index = si;
      return from_value_type(out_.states[si].type);
    }
    if (const int ei = out_.effect_index(e.name); ei >= 0) {
      e.ref = RefKind::EffectField;
      e.index = ei;
      if (ctx_ == Context::Query) {
        out_.reads_effects_in_query = true;
        if (loop_depth_ > 0) {
          diag(Rule::R2_EffectRead, e.pos, "effect '" + e.name + "' read inside foreach");
        }
      }
      return from_value_type(out_.effects[ei].type);
    }
    diag(Rule::Declaration, e.pos, "unknown name '" + e.name + "'");
    return Type::Unknown;
  }

  Type member(Expr &e) {
    Expr &target = e.args[0];
    const Type tt = expr(target);
    bool ok_target = false;
    if (target.kind == ExprKind::This) {
      ok_target = true;
      e.ref = RefKind::This;
    } else if (target.kind == ExprKind::Name &&
               (target.ref == RefKind::LoopVar || target.ref == RefKind::Const) &&
               tt == Type::Agent) {
      ok_target = true;
      e.ref = target.ref;
      e.index = target.index;
    }
    if (!ok_target) {
      if (ctx_ == Context::Update) {
        diag(Rule::R4_UpdateReads, e.pos, "update rules may only read the agent's own fields");
      } else {
        diag(Rule::R6_MemberTarget, e.pos,
             "member access must go through a foreach variable, this, or an agent const");
      }
    }
    if (const int si = out_.state_index(e.name); si >= 0) {
      e.field_index = si;
      return from_value_type(out_.states[si].type);
    }
    if (out_.effect_index(e.name) >= 0) {
      if (target.kind == ExprKind::This && ctx_ == Context::Update) {
        // this.e in an update rule is an own-field read.
        const int ei = out_.effect_index(e.name);
        e.kind = ExprKind::Name;
        e.args.clear();
        e.ref = RefKind::EffectField;
        e.index = ei;
        return from_value_type(out_.effects[ei].type);
      }
      diag(Rule::R2_EffectRead, e.pos, "effect '" + e.name + "' is not readable through a reference");
      return Type::Unknown;
    }
    diag(Rule::Declaration, e.pos, "unknown field '" + e.name + "'");
    return Type::Unknown;
  }

  Type binary(Expr &e) {
    const Type a = expr(e.args[0]);
    const Type b = expr(e.args[1]);
    if (a == Type::Unknown || b == Type::Unknown) {
      return e.binary >= BinaryOp::Lt ? Type::Bool : Type::Unknown;
    }
    switch (e.binary) {
      case BinaryOp::Eq:
      case BinaryOp::Ne:
        if ((a == Type::Agent) != (b == Type::Agent) && a != Type::Nil && b != Type::Nil) {
          diag(Rule::Typing, e.pos, "comparison mixes agents and numbers");
        }
        return Type::Bool;
      default:
        break;
    }
    if (a == Type::Agent || b == Type::Agent) {
      diag(Rule::Typing, e.pos, std::string("operator '") + binary_op_spelling(e.binary) +
                                    "' does not apply to agent references");
      return Type::Unknown;
    }
    switch (e.binary) {
      case BinaryOp::Add:
      case BinaryOp::Sub:
      case BinaryOp::Mul:
      case BinaryOp::Div:
        return promote(a, b);
      default:
        return Type::Bool;
    }
  }

  Type call(Expr &e) {
    auto arity = [&](std::size_t n) {
      if (e.args.size() != n) {
        diag(Rule::Typing, e.pos, e.name + "() takes " + std::to_string(n) + " argument(s)");
        return false;
      }
      return true;
    };
    std::vector<Type> types;
    for (auto &a : e.args) types.push_back(expr(a));
    auto numeric_args = [&] {
      for (std::size_t i = 0; i < types.size(); ++i) {
        if (types[i] == Type::Agent) diag(Rule::Typing, e.args[i].pos, "numeric argument expected");
      }
    };
    if (e.name == "rand") {
      arity(0);
      e.rand_stream = rand_counter_++;
      return Type::Float;
    }
    if (e.name == "abs") {
      if (!arity(1)) return Type::Unknown;
      numeric_args();
      return types[0] == Type::Bool ? Type::Int : types[0];
    }
    if (e.name == "sqrt") {
      arity(1);
      numeric_args();
      return Type::Float;
    }
    if (e.name == "min" || e.name == "max") {
      if (!arity(2)) return Type::Unknown;
      numeric_args();
      if (types[0] == Type::Unknown || types[1] == Type::Unknown) return Type::Unknown;
      return promote(types[0], types[1]);
    }
    if (e.name == "visible") {
      if (ctx_ == Context::Update) {
        diag(Rule::R4_UpdateReads, e.pos, "visible() is only meaningful in the run body");
      }
      if (!arity(2)) return Type::Bool;
      for (std::size_t i = 0; i < 2; ++i) {
        const auto &a = e.args[i];
        const bool ref_ok = a.kind == ExprKind::This ||
                            (a.kind == ExprKind::Name &&
                             (a.ref == RefKind::LoopVar || a.ref == RefKind::Const) &&
                             types[i] == Type::Agent);
        if (!ref_ok) {
          diag(Rule::R6_MemberTarget, a.pos,
               "visible() takes a foreach variable, this, or an agent const");
        }
      }
      return Type::Bool;
    }
    diag(Rule::Typing, e.pos, "unknown function '" + e.name + "'");
    return Type::Unknown;
  }

  CheckedScript out_;
  std::vector<SemanticDiagnostic> diags_;
  std::vector<Binding> scope_;
  Context ctx_ = Context::Query;
  int loop_depth_ = 0;
  int next_slot_ = 0;
  int rand_counter_ = 0;
};

}  // namespace

CheckResult check(const ScriptAst &ast) { return Checker(ast).run(); }

CheckedScript check_or_throw(const ScriptAst &ast) {
  CheckResult r = check(ast);
  if (!r.ok()) throw SemanticErrors(std::move(r.diagnostics));
  return std::move(*r.script);
}

CheckedScript compile_script(const ScriptSource &src) { return check_or_throw(parse(src)); }

}  // namespace brace
