#include <charconv>
#include <cmath>
#include <sstream>

#include "brace/dsl.hpp"

namespace brace::dsl {

const char *binary_op_spelling(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::And: return "&&";
    case BinaryOp::Or: return "||";
  }
  return "?";
}

namespace {

std::string number_text(double v, bool is_int) {
  char buf[64];
  if (is_int) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
    return std::string(buf, end);
  }
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

const char *type_text(ValueType t, const std::string &spelled) {
  switch (t) {
    case ValueType::Float: return "float";
    case ValueType::Int: return "int";
    case ValueType::Agent: return spelled.c_str();
  }
  return "?";
}

void print(std::ostream &os, const Expr &e) {
  switch (e.kind) {
    case ExprKind::Literal:
      // Literals are non-negative by construction; a negative one (built by a
      // rewrite) prints as a negation so it re-parses to the same value.
      if (std::signbit(e.number)) {
        os << "(-" << number_text(-e.number, e.is_int) << ")";
      } else {
        os << number_text(e.number, e.is_int);
      }
      return;
    case ExprKind::Name: os << e.name; return;
    case ExprKind::This: os << "this"; return;
    case ExprKind::Nil: os << "nil"; return;
    case ExprKind::Member:
      print(os, e.args[0]);
      os << "." << e.name;
      return;
    case ExprKind::Unary:
      os << (e.unary == UnaryOp::Neg ? "(-" : "(!");
      print(os, e.args[0]);
      os << ")";
      return;
    case ExprKind::Binary:
      os << "(";
      print(os, e.args[0]);
      os << " " << binary_op_spelling(e.binary) << " ";
      print(os, e.args[1]);
      os << ")";
      return;
    case ExprKind::Ternary:
      os << "(";
      print(os, e.args[0]);
      os << " ? ";
      print(os, e.args[1]);
      os << " : ";
      print(os, e.args[2]);
      os << ")";
      return;
    case ExprKind::Call:
      os << e.name << "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) os << ", ";
        print(os, e.args[i]);
      }
      os << ")";
      return;
  }
}

void indent(std::ostream &os, int depth) {
  for (int i = 0; i < depth; ++i) os << "  ";
}

void print_block(std::ostream &os, const std::vector<Stmt> &body, int depth);

void print(std::ostream &os, const Stmt &s, int depth) {
  indent(os, depth);
  switch (s.kind) {
    case StmtKind::Const:
      os << "const " << type_text(s.decl_type, s.type_name) << " " << s.name << " = ";
      print(os, s.value);
      os << ";\n";
      return;
    case StmtKind::LocalEffect:
      os << s.name << " <- ";
      print(os, s.value);
      os << ";\n";
      return;
    case StmtKind::RemoteEffect:
      print(os, s.target);
      os << "." << s.name << " <- ";
      print(os, s.value);
      os << ";\n";
      return;
    case StmtKind::Assign:
      if (s.has_target) {
        print(os, s.target);
        os << ".";
      }
      os << s.name << " = ";
      print(os, s.value);
      os << ";\n";
      return;
    case StmtKind::If:
      os << "if (";
      print(os, s.value);
      os << ") ";
      print_block(os, s.body, depth);
      if (!s.else_body.empty()) {
        os << " else ";
        print_block(os, s.else_body, depth);
      }
      os << "\n";
      return;
    case StmtKind::Foreach:
      os << "foreach (" << type_text(s.decl_type, s.type_name) << " " << s.name << " : Extent<"
         << s.extent_class << ">) ";
      print_block(os, s.body, depth);
      os << "\n";
      return;
  }
}

void print_block(std::ostream &os, const std::vector<Stmt> &body, int depth) {
  os << "{\n";
  for (const auto &s : body) print(os, s, depth + 1);
  indent(os, depth);
  os << "}";
}

}  // namespace

std::string print_expr(const Expr &e) {
  std::ostringstream os;
  print(os, e);
  return os.str();
}

std::string pretty_print(const ScriptAst &ast) {
  std::ostringstream os;
  os << "class " << ast.class_name << " {\n";
  for (const auto &f : ast.fields) {
    os << "  " << (f.visibility == Visibility::Public ? "public " : "private ")
       << (f.kind == FieldKind::State ? "state " : "effect ") << type_text(f.value_type, f.type_name)
       << " " << f.name;
    if (f.kind == FieldKind::Effect) {
      os << " : " << combinator_name(f.combinator.value_or(Combinator::Sum)) << ";";
    } else {
      if (f.update) {
        os << " : ";
        print(os, *f.update);
      }
      os << ";";
    }
    if (f.range) {
      os << " #range[" << number_text(f.range->lo, false) << ", " << number_text(f.range->hi, false)
         << "];";
    }
    os << "\n";
  }
  if (ast.spawn) {
    os << "\n  spawn when (";
    print(os, ast.spawn->condition);
    os << ") {\n";
    for (const auto &[name, e] : ast.spawn->overrides) {
      os << "    " << name << " : ";
      print(os, e);
      os << ";\n";
    }
    os << "  }\n";
  }
  if (ast.die) {
    os << "\n  die when (";
    print(os, *ast.die);
    os << ");\n";
  }
  os << "\n  public void run() ";
  print_block(os, ast.run_body, 1);
  os << "\n}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Structural equality

namespace {
bool same_bodies(const std::vector<Stmt> &a, const std::vector<Stmt> &b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_tree(a[i], b[i])) return false;
  }
  return true;
}
}  // namespace

bool same_tree(const Expr &a, const Expr &b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case ExprKind::Literal:
      if (a.is_int != b.is_int || a.number != b.number) return false;
      break;
    case ExprKind::Name:
    case ExprKind::Member:
    case ExprKind::Call:
      if (a.name != b.name) return false;
      break;
    case ExprKind::Unary:
      if (a.unary != b.unary) return false;
      break;
    case ExprKind::Binary:
      if (a.binary != b.binary) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!same_tree(a.args[i], b.args[i])) return false;
  }
  return true;
}

bool same_tree(const Stmt &a, const Stmt &b) {
  if (a.kind != b.kind || a.name != b.name) return false;
  switch (a.kind) {
    case StmtKind::Const:
      return a.decl_type == b.decl_type && a.type_name == b.type_name && same_tree(a.value, b.value);
    case StmtKind::LocalEffect:
      return same_tree(a.value, b.value);
    case StmtKind::RemoteEffect:
      return same_tree(a.target, b.target) && same_tree(a.value, b.value);
    case StmtKind::Assign:
      return a.has_target == b.has_target && (!a.has_target || same_tree(a.target, b.target)) &&
             same_tree(a.value, b.value);
    case StmtKind::If:
      return same_tree(a.value, b.value) && same_bodies(a.body, b.body) &&
             same_bodies(a.else_body, b.else_body);
    case StmtKind::Foreach:
      return a.type_name == b.type_name && a.extent_class == b.extent_class &&
             same_bodies(a.body, b.body);
  }
  return false;
}

bool same_tree(const ScriptAst &a, const ScriptAst &b) {
  if (a.class_name != b.class_name || a.fields.size() != b.fields.size()) return false;
  for (std::size_t i = 0; i < a.fields.size(); ++i) {
    const auto &x = a.fields[i];
    const auto &y = b.fields[i];
    if (x.visibility != y.visibility || x.kind != y.kind || x.value_type != y.value_type ||
        x.type_name != y.type_name || x.name != y.name || x.combinator != y.combinator ||
        x.range != y.range || x.update.has_value() != y.update.has_value()) {
      return false;
    }
    if (x.update && !same_tree(*x.update, *y.update)) return false;
  }
  if (a.spawn.has_value() != b.spawn.has_value() || a.die.has_value() != b.die.has_value()) {
    return false;
  }
  if (a.spawn) {
    if (!same_tree(a.spawn->condition, b.spawn->condition) ||
        a.spawn->overrides.size() != b.spawn->overrides.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.spawn->overrides.size(); ++i) {
      if (a.spawn->overrides[i].first != b.spawn->overrides[i].first ||
          !same_tree(a.spawn->overrides[i].second, b.spawn->overrides[i].second)) {
        return false;
      }
    }
  }
  if (a.die && !same_tree(*a.die, *b.die)) return false;
  return same_bodies(a.run_body, b.run_body);
}

}  // namespace brace::dsl
