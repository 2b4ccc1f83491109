#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "brace/optimizer.hpp"

namespace brace::opt {

using namespace dsl;

namespace {

Expr name(const std::string &n) { return Expr::name_ref(n); }
Expr lit(double v) { return Expr::literal(v, false); }
Expr ilit(double v) { return Expr::literal(v, true); }
Expr bin(BinaryOp op, Expr l, Expr r) { return Expr::binary_op(op, std::move(l), std::move(r)); }

Stmt const_stmt(const Stmt &like, std::string n, Expr value) {
  Stmt s;
  s.kind = StmtKind::Const;
  s.decl_type = like.decl_type;
  s.type_name = like.type_name;
  s.name = std::move(n);
  s.value = std::move(value);
  return s;
}

Stmt local_effect(const std::string &effect, Expr value) {
  Stmt s;
  s.kind = StmtKind::LocalEffect;
  s.name = effect;
  s.value = std::move(value);
  return s;
}

Stmt if_stmt(Expr cond, std::vector<Stmt> body) {
  Stmt s;
  s.kind = StmtKind::If;
  s.value = std::move(cond);
  s.body = std::move(body);
  return s;
}

Stmt foreach_stmt(const Stmt &like, std::string var, std::vector<Stmt> body) {
  Stmt s = like;
  s.name = std::move(var);
  s.body = std::move(body);
  s.else_body.clear();
  return s;
}

void collect_names(const std::vector<Stmt> &body, std::set<std::string> &out) {
  for (const auto &s : body) {
    if (s.kind == StmtKind::Const || s.kind == StmtKind::Foreach) out.insert(s.name);
    collect_names(s.body, out);
    collect_names(s.else_body, out);
  }
}

const Stmt *first_loop(const std::vector<Stmt> &body) {
  for (const auto &s : body) {
    if (s.kind == StmtKind::Foreach) return &s;
    if (const Stmt *l = first_loop(s.body)) return l;
    if (const Stmt *l = first_loop(s.else_body)) return l;
  }
  return nullptr;
}

void referenced(const Expr &e, std::set<std::string> &out) {
  if (e.kind == ExprKind::Name) out.insert(e.name);
  for (const auto &a : e.args) referenced(a, out);
}

void referenced(const std::vector<Stmt> &body, std::set<std::string> &out) {
  for (const auto &s : body) {
    referenced(s.value, out);
    if (s.kind == StmtKind::RemoteEffect) referenced(s.target, out);
    referenced(s.body, out);
    referenced(s.else_body, out);
  }
}

/// Drops unused consts and blocks left empty. Binding names are unique.
bool prune(std::vector<Stmt> &body, const std::set<std::string> &used) {
  bool changed = false;
  std::vector<Stmt> out;
  for (auto &s : body) {
    changed = prune(s.body, used) || changed;
    changed = prune(s.else_body, used) || changed;
    const bool dead = (s.kind == StmtKind::Const && !used.count(s.name)) ||
                      (s.kind == StmtKind::If && s.body.empty() && s.else_body.empty()) ||
                      (s.kind == StmtKind::Foreach && s.body.empty());
    if (dead) {
      changed = true;
    } else {
      out.push_back(std::move(s));
    }
  }
  body = std::move(out);
  return changed;
}

class Inverter {
public:
  Inverter(const CheckedScript &s, const InversionOptions &o) : s_(s), guarded_(o.visibility != VisibilityMode::Off) {
    for (const auto &f : s_.ast.fields) used_.insert(f.name);
    collect_names(s_.ast.run_body, used_);
    if (s_.query_uses_rand) throw InversionUnsupported("the query draws random numbers");
    if (s_.reads_effects_in_query) throw InversionUnsupported("the query reads effect fields");
    for (const auto &sf : s_.spatial_fields) {
      if (sf.range.lo != -sf.range.hi) {
        throw InversionUnsupported("range of '" + s_.states[sf.state_index].name + "' is not symmetric");
      }
      axes_.push_back({s_.states[sf.state_index].name, sf.range.hi});
    }
  }

  ScriptAst run() {
    ScriptAst out = s_.ast;
    out.run_body = q1(s_.ast.run_body);

    const Stmt *loop = first_loop(s_.ast.run_body);
    Stmt proto;
    proto.kind = StmtKind::Foreach;
    proto.decl_type = ValueType::Agent;
    proto.type_name = s_.ast.class_name;
    proto.extent_class = s_.ast.class_name;
    other_ = loop ? loop->name : fresh("other");
    used_.insert(other_);

    Env env;
    std::vector<Stmt> q2_body = q2(s_.ast.run_body, env);
    if (!q2_body.empty()) {
      if (guarded_) q2_body = {if_stmt(visible(name(other_), Expr::this_ref()), std::move(q2_body))};
      out.run_body.push_back(foreach_stmt(proto, other_, std::move(q2_body)));
    }

    while (true) {
      std::set<std::string> used;
      referenced(out.run_body, used);
      if (!prune(out.run_body, used)) break;
    }

    if (guarded_) {
      for (auto &f : out.fields) {
        if (!f.range) continue;
        const double r = f.range->hi;
        if (f.update) {
          Expr lower = Expr::call("max", {std::move(*f.update), bin(BinaryOp::Sub, name(f.name), lit(r))});
          f.update = Expr::call("min", {std::move(lower), bin(BinaryOp::Add, name(f.name), lit(r))});
        }
        f.range = Interval{-2.0 * r, 2.0 * r};
      }
    }
    return out;
  }

private:
  struct Axis {
    std::string field;
    double r;
  };

  struct Env {
    std::map<std::string, Expr> names;  // original binding -> replacement
    std::set<std::string> other_loops;  // loop variables that never equal this
  };

  std::string fresh(const std::string &base) {
    std::string n = base + "_i";
    for (int k = 2; used_.count(n); ++k) n = base + "_i" + std::to_string(k);
    used_.insert(n);
    return n;
  }

  static Expr field_of(const Expr &agent, const std::string &f) {
    if (agent.kind == ExprKind::This) return name(f);
    return Expr::member(agent, f);
  }

  /// b inside the original box around a.
  Expr visible(const Expr &a, const Expr &b) const {
    std::optional<Expr> acc;
    for (const auto &ax : axes_) {
      Expr bf = field_of(b, ax.field);
      Expr af = field_of(a, ax.field);
      Expr both = bin(BinaryOp::And, bin(BinaryOp::Ge, bf, bin(BinaryOp::Sub, af, lit(ax.r))),
                      bin(BinaryOp::Le, bf, bin(BinaryOp::Add, af, lit(ax.r))));
      acc = acc ? bin(BinaryOp::And, std::move(*acc), std::move(both)) : std::move(both);
    }
    return acc ? *acc : ilit(1);
  }

  // -- expressions ----------------------------------------------------------

  /// `q2` maps the original this to the other agent.
  Expr rewrite(const Expr &e, const Env *q2) const {
    switch (e.kind) {
      case ExprKind::Literal:
      case ExprKind::Nil:
        return e;
      case ExprKind::This:
        return q2 ? name(other_) : e;
      case ExprKind::Name:
        if (e.ref == RefKind::StateField) return q2 ? Expr::member(name(other_), e.name) : e;
        if (q2) {
          auto it = q2->names.find(e.name);
          if (it != q2->names.end()) return it->second;
        }
        return e;
      case ExprKind::Member: {
        Expr t = rewrite(e.args[0], q2);
        return field_of(t, e.name);
      }
      case ExprKind::Unary:
        return Expr::unary_op(e.unary, rewrite(e.args[0], q2));
      case ExprKind::Binary:
        return bin(e.binary, rewrite(e.args[0], q2), rewrite(e.args[1], q2));
      case ExprKind::Ternary:
        return Expr::ternary(rewrite(e.args[0], q2), rewrite(e.args[1], q2), rewrite(e.args[2], q2));
      case ExprKind::Call: {
        std::vector<Expr> args;
        for (const auto &a : e.args) args.push_back(rewrite(a, q2));
        if (e.name == "visible" && guarded_) {
          return Expr::ternary(visible(args[0], args[1]), ilit(1), ilit(0));
        }
        return Expr::call(e.name, std::move(args));
      }
    }
    return e;
  }

  /// Agent consts resolve only inside the original box of `self`.
  void guarded_const(const Stmt &s, const std::string &n, Expr value, const Expr &self, std::vector<Stmt> &out) {
    if (s.decl_type != ValueType::Agent || !guarded_) {
      out.push_back(const_stmt(s, n, std::move(value)));
      return;
    }
    const std::string raw = fresh(s.name + "_ref");
    out.push_back(const_stmt(s, raw, std::move(value)));
    Expr ok = bin(BinaryOp::Or, bin(BinaryOp::Eq, name(raw), self), visible(self, name(raw)));
    out.push_back(const_stmt(s, n, Expr::ternary(std::move(ok), name(raw), Expr::nil_lit())));
  }

  // -- Q1: this agent's own contributions ----------------------------------

  std::vector<Stmt> q1(const std::vector<Stmt> &body) {
    std::vector<Stmt> out;
    for (const auto &s : body) {
      switch (s.kind) {
        case StmtKind::Const:
          guarded_const(s, s.name, rewrite(s.value, nullptr), Expr::this_ref(), out);
          break;
        case StmtKind::LocalEffect:
          out.push_back(local_effect(s.name, rewrite(s.value, nullptr)));
          break;
        case StmtKind::RemoteEffect:
          if (s.target.kind == ExprKind::This) {
            out.push_back(local_effect(s.name, rewrite(s.value, nullptr)));
          } else if (s.target.ref == RefKind::Const) {
            out.push_back(if_stmt(bin(BinaryOp::Eq, name(s.target.name), Expr::this_ref()),
                                  {local_effect(s.name, rewrite(s.value, nullptr))}));
          }
          break;
        case StmtKind::If: {
          Stmt n = if_stmt(rewrite(s.value, nullptr), q1(s.body));
          n.else_body = q1(s.else_body);
          if (!n.body.empty() || !n.else_body.empty()) out.push_back(std::move(n));
          break;
        }
        case StmtKind::Foreach: {
          std::vector<Stmt> b = q1(s.body);
          if (b.empty()) break;
          if (guarded_) b = {if_stmt(visible(Expr::this_ref(), name(s.name)), std::move(b))};
          out.push_back(foreach_stmt(s, s.name, std::move(b)));
          break;
        }
        case StmtKind::Assign:
          break;
      }
    }
    return out;
  }

  // -- Q2: what the other agent would send to this one ----------------------

  std::vector<Stmt> q2(const std::vector<Stmt> &body, Env env) {
    std::vector<Stmt> out;
    for (const auto &s : body) {
      switch (s.kind) {
        case StmtKind::Const: {
          const std::string n = fresh(s.name);
          guarded_const(s, n, rewrite(s.value, &env), name(other_), out);
          env.names[s.name] = name(n);
          break;
        }
        case StmtKind::LocalEffect:
          break;
        case StmtKind::RemoteEffect: {
          if (s.target.kind == ExprKind::This) break;
          const std::string &t = s.target.name;
          if (env.other_loops.count(t)) break;
          const Expr target = rewrite(s.target, &env);
          Stmt assign = local_effect(s.name, rewrite(s.value, &env));
          if (target.kind == ExprKind::This) {
            out.push_back(std::move(assign));
          } else {
            out.push_back(if_stmt(bin(BinaryOp::Eq, target, Expr::this_ref()), {std::move(assign)}));
          }
          break;
        }
        case StmtKind::If: {
          Stmt n = if_stmt(rewrite(s.value, &env), q2(s.body, env));
          n.else_body = q2(s.else_body, env);
          if (!n.body.empty() || !n.else_body.empty()) out.push_back(std::move(n));
          break;
        }
        case StmtKind::Foreach: {
          // Iterations over agents other than this one...
          const std::string p = fresh(s.name);
          Env others = env;
          others.names[s.name] = name(p);
          others.other_loops.insert(s.name);
          std::vector<Stmt> b = q2(s.body, others);
          if (!b.empty()) {
            Expr cond = bin(BinaryOp::Ne, name(p), name(other_));
            if (guarded_) cond = bin(BinaryOp::And, std::move(cond), visible(name(other_), name(p)));
            out.push_back(foreach_stmt(s, p, {if_stmt(std::move(cond), std::move(b))}));
          }
          // ...and the one iteration where the loop variable is this agent.
          Env self = env;
          self.names[s.name] = Expr::this_ref();
          for (auto &st : q2(s.body, self)) out.push_back(std::move(st));
          break;
        }
        case StmtKind::Assign:
          break;
      }
    }
    return out;
  }

  const CheckedScript &s_;
  bool guarded_;
  std::set<std::string> used_;
  std::vector<Axis> axes_;
  std::string other_;
};

}  // namespace

ScriptAst invert_effects_ast(const CheckedScript &script, const InversionOptions &opts) {
  if (script.locality == Locality::LocalOnly) return script.ast;
  return Inverter(script, opts).run();
}

CheckedScript invert_effects(const CheckedScript &script, const InversionOptions &opts) {
  if (script.locality == Locality::LocalOnly) return script;
  ScriptAst ast = invert_effects_ast(script, opts);
  CheckedScript out = compile_script({pretty_print(ast), script.ast.origin});
  if (out.locality != Locality::LocalOnly) throw InversionUnsupported("inverted script is still non-local");
  return out;
}

// ---------------------------------------------------------------------------
// Probe hints

namespace {

std::optional<double> literal_value(const Expr &e) {
  if (e.kind == ExprKind::Literal) return e.number;
  if (e.kind == ExprKind::Unary && e.unary == UnaryOp::Neg && e.args[0].kind == ExprKind::Literal) {
    return -e.args[0].number;
  }
  return std::nullopt;
}

/// Field f of the acting agent: `f` or `this.f`.
bool own_field(const Expr &e, std::string &f) {
  if (e.kind == ExprKind::Name && e.ref == RefKind::StateField) {
    f = e.name;
    return true;
  }
  if (e.kind == ExprKind::Member && e.args[0].kind == ExprKind::This) {
    f = e.name;
    return true;
  }
  return false;
}

bool loop_field(const Expr &e, const std::string &var, std::string &f) {
  if (e.kind == ExprKind::Member && e.args[0].kind == ExprKind::Name && e.args[0].name == var) {
    f = e.name;
    return true;
  }
  return false;
}

/// `own.f ± c` as (f, ±c).
bool offset_of(const Expr &e, std::string &f, double &c) {
  if (own_field(e, f)) {
    c = 0.0;
    return true;
  }
  if (e.kind != ExprKind::Binary || (e.binary != BinaryOp::Add && e.binary != BinaryOp::Sub)) return false;
  auto v = literal_value(e.args[1]);
  if (!v || !own_field(e.args[0], f)) return false;
  c = e.binary == BinaryOp::Add ? *v : -*v;
  return true;
}

void conjuncts(const Expr &e, std::vector<const Expr *> &out) {
  if (e.kind == ExprKind::Binary && e.binary == BinaryOp::And) {
    conjuncts(e.args[0], out);
    conjuncts(e.args[1], out);
  } else {
    out.push_back(&e);
  }
}

void hints_in(const CheckedScript &script, const std::vector<Stmt> &body, int &loop,
              std::vector<runtime::ProbeHint> &out) {
  for (const auto &s : body) {
    if (s.kind == StmtKind::Foreach) {
      const int me = loop++;
      if (s.body.size() == 1 && s.body[0].kind == StmtKind::If && s.body[0].else_body.empty()) {
        runtime::ProbeHint h{me, {}};
        for (const auto &sf : script.spatial_fields) h.axes.push_back(sf.range);
        bool narrowed = false;
        std::vector<const Expr *> cs;
        conjuncts(s.body[0].value, cs);
        for (const Expr *c : cs) {
          if (c->kind != ExprKind::Binary) continue;
          const bool ge = c->binary == BinaryOp::Ge, le = c->binary == BinaryOp::Le;
          if (!ge && !le) continue;
          std::string lf, of;
          double off = 0.0;
          bool lower;
          if (loop_field(c->args[0], s.name, lf) && offset_of(c->args[1], of, off)) {
            lower = ge;  // p.f >= own + c  or  p.f <= own + c
          } else if (loop_field(c->args[1], s.name, lf) && offset_of(c->args[0], of, off)) {
            lower = le;  // own + c <= p.f  or  own + c >= p.f
          } else if (c->args[1].kind == ExprKind::Binary && offset_of(c->args[0], of, off) &&
                     loop_field(c->args[1].args[0], s.name, lf) && literal_value(c->args[1].args[1]) &&
                     (c->args[1].binary == BinaryOp::Add || c->args[1].binary == BinaryOp::Sub)) {
            // own.f >= p.f - c  means  p.f <= own.f + c
            const double k = *literal_value(c->args[1].args[1]);
            const double pk = c->args[1].binary == BinaryOp::Add ? k : -k;
            off = off - pk;
            lower = le;
          } else {
            continue;
          }
          if (lf != of) continue;
          for (std::size_t a = 0; a < script.spatial_fields.size(); ++a) {
            if (script.states[script.spatial_fields[a].state_index].name != lf) continue;
            if (lower) {
              h.axes[a].lo = std::max(h.axes[a].lo, off);
            } else {
              h.axes[a].hi = std::min(h.axes[a].hi, off);
            }
            narrowed = true;
          }
        }
        if (narrowed) out.push_back(std::move(h));
      }
      hints_in(script, s.body, loop, out);
    } else {
      hints_in(script, s.body, loop, out);
      hints_in(script, s.else_body, loop, out);
    }
  }
}

}  // namespace

std::vector<runtime::ProbeHint> derive_probe_hints(const CheckedScript &script) {
  std::vector<runtime::ProbeHint> out;
  int loop = 0;
  hints_in(script, script.ast.run_body, loop, out);
  return out;
}

}  // namespace brace::opt
