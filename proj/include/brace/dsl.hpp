#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brace/error.hpp"
#include "brace/scalar.hpp"

namespace brace::dsl {

struct ScriptSource {
  std::string text;
  std::string origin = "<inline>";
};

// ---------------------------------------------------------------------------
// Tokens

enum class TokenKind {
  Identifier, Keyword, IntLiteral, FloatLiteral,
  ArrowLeft,  // <-
  Semi, Colon, Comma, Dot, Hash, Question,
  LParen, RParen, LBrace, RBrace, LBracket, RBracket,
  Less, LessEq, Greater, GreaterEq, EqEq, NotEq, Assign,
  Plus, Minus, Star, Slash, Bang, AndAnd, OrOr,
  End,
};

const char *token_kind_name(TokenKind k);

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;
  SourcePos pos;
};

std::vector<Token> tokenize(const ScriptSource &src);

// ---------------------------------------------------------------------------
// Abstract syntax

enum class ValueType { Float, Int, Agent };
enum class FieldKind { State, Effect };
enum class Visibility { Public, Private };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval &, const Interval &) = default;
};

/// Types assigned by semantic analysis.
enum class Type { Unknown, Float, Int, Bool, Agent, Nil };

/// What a name or member access resolves to, filled in by semantic analysis.
enum class RefKind { Unresolved, StateField, EffectField, Const, LoopVar, This };

enum class ExprKind { Literal, Name, This, Nil, Member, Unary, Binary, Ternary, Call };
enum class UnaryOp { Neg, Not };
enum class BinaryOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or };

struct Expr {
  ExprKind kind = ExprKind::Nil;
  SourcePos pos;
  double number = 0.0;  // Literal
  bool is_int = false;  // Literal
  std::string name;     // Name: identifier; Member: field; Call: function
  UnaryOp unary = UnaryOp::Neg;
  BinaryOp binary = BinaryOp::Add;
  std::vector<Expr> args;  // Member: [target]; Unary: [x]; Binary: [l, r]; Ternary: [c, a, b]

  // Annotations (semantic analysis).
  Type type = Type::Unknown;
  RefKind ref = RefKind::Unresolved;  // Name: the binding; Member: how the target resolves
  int index = -1;        // state/effect field index or const/loop slot
  int field_index = -1;  // Member: state field index of `name`
  int rand_stream = -1;  // Call rand(): stream number within its phase

  static Expr literal(double v, bool is_int, SourcePos pos = {});
  static Expr name_ref(std::string n, SourcePos pos = {});
  static Expr this_ref(SourcePos pos = {});
  static Expr nil_lit(SourcePos pos = {});
  static Expr member(Expr target, std::string field, SourcePos pos = {});
  static Expr unary_op(UnaryOp op, Expr x, SourcePos pos = {});
  static Expr binary_op(BinaryOp op, Expr l, Expr r, SourcePos pos = {});
  static Expr ternary(Expr c, Expr a, Expr b, SourcePos pos = {});
  static Expr call(std::string fn, std::vector<Expr> args, SourcePos pos = {});
};

enum class StmtKind { Const, LocalEffect, RemoteEffect, Assign, If, Foreach };

struct Stmt {
  StmtKind kind = StmtKind::Const;
  SourcePos pos;
  ValueType decl_type = ValueType::Float;  // Const, Foreach
  std::string type_name;                   // spelled type (class name for agent types)
  std::string name;   // const name, effect/assigned field, loop variable
  bool has_target = false;  // Assign through a member target (`p.x = v`)
  Expr target;              // RemoteEffect / targeted Assign
  Expr value;               // rhs, If condition
  std::vector<Stmt> body;
  std::vector<Stmt> else_body;
  std::string extent_class;  // Foreach: the class in Extent<...>

  // Annotations (semantic analysis).
  int slot = -1;            // Const/Foreach: binding slot; effect assigns: effect index
  bool local_write = false; // effect assign classified as local
};

struct FieldDecl {
  SourcePos pos;
  Visibility visibility = Visibility::Public;
  FieldKind kind = FieldKind::State;
  ValueType value_type = ValueType::Float;
  std::string type_name;
  std::string name;
  std::optional<Expr> update;              // state only
  std::optional<Combinator> combinator;    // effect only
  std::optional<Interval> range;           // state only
};

struct SpawnRule {
  SourcePos pos;
  Expr condition;
  std::vector<std::pair<std::string, Expr>> overrides;
};

struct ScriptAst {
  std::string origin = "<inline>";
  std::string class_name;
  std::vector<FieldDecl> fields;
  std::vector<Stmt> run_body;
  std::optional<SpawnRule> spawn;
  std::optional<Expr> die;
};

ScriptAst parse_script(const std::vector<Token> &tokens);
ScriptAst parse(const ScriptSource &src);

/// Canonical text for an AST; parse(pretty_print(a)) is structurally equal to a.
std::string pretty_print(const ScriptAst &ast);
std::string print_expr(const Expr &e);

/// Structural equality ignoring source positions and annotations.
bool same_tree(const Expr &a, const Expr &b);
bool same_tree(const Stmt &a, const Stmt &b);
bool same_tree(const ScriptAst &a, const ScriptAst &b);

const char *binary_op_spelling(BinaryOp op);

}  // namespace brace::dsl
