#include <charconv>
#include <cstdlib>
#include <tuple>

#include "brace/dsl.hpp"

namespace brace::dsl {

Expr Expr::literal(double v, bool is_int, SourcePos pos) {
  Expr e;
  e.kind = ExprKind::Literal;
  e.number = v;
  e.is_int = is_int;
  e.pos = pos;
  return e;
}

Expr Expr::name_ref(std::string n, SourcePos pos) {
  Expr e;
  e.kind = ExprKind::Name;
  e.name = std::move(n);
  e.pos = pos;
  return e;
}

Expr Expr::this_ref(SourcePos pos) {
  Expr e;
  e.kind = ExprKind::This;
  e.pos = pos;
  return e;
}

Expr Expr::nil_lit(SourcePos pos) {
  Expr e;
  e.kind = ExprKind::Nil;
  e.pos = pos;
  return e;
}

Expr Expr::member(Expr target, std::string field, SourcePos pos) {
  Expr e;
  e.kind = ExprKind::Member;
  e.name = std::move(field);
  e.args.push_back(std::move(target));
  e.pos = pos;
  return e;
}

Expr Expr::unary_op(UnaryOp op, Expr x, SourcePos pos) {
  Expr e;
  e.kind = ExprKind::Unary;
  e.unary = op;
  e.args.push_back(std::move(x));
  e.pos = pos;
  return e;
}

Expr Expr::binary_op(BinaryOp op, Expr l, Expr r, SourcePos pos) {
  Expr e;
  e.kind = ExprKind::Binary;
  e.binary = op;
  e.args.push_back(std::move(l));
  e.args.push_back(std::move(r));
  e.pos = pos;
  return e;
}

Expr Expr::ternary(Expr c, Expr a, Expr b, SourcePos pos) {
  Expr e;
  e.kind = ExprKind::Ternary;
  e.args.push_back(std::move(c));
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  e.pos = pos;
  return e;
}

Expr Expr::call(std::string fn, std::vector<Expr> args, SourcePos pos) {
  Expr e;
  e.kind = ExprKind::Call;
  e.name = std::move(fn);
  e.args = std::move(args);
  e.pos = pos;
  return e;
}

namespace {

class Parser {
public:
  explicit Parser(const std::vector<Token> &tokens) : toks_(tokens) {
    if (toks_.empty() || toks_.back().kind != TokenKind::End) {
      throw ParseError({}, {"token stream terminated by end of input"}, "unterminated stream");
    }
  }

  ScriptAst script() {
    ScriptAst ast;
    expect_keyword("class");
    ast.class_name = expect(TokenKind::Identifier).text;
    expect(TokenKind::LBrace);
    bool have_run = false;
    while (!check(TokenKind::RBrace)) {
      if (check_keyword("spawn")) {
        if (ast.spawn) fail({"a single spawn rule"});
        ast.spawn = spawn_rule();
      } else if (check_keyword("die")) {
        if (ast.die) fail({"a single die rule"});
        advance();
        expect_keyword("when");
        expect(TokenKind::LParen);
        ast.die = expression();
        expect(TokenKind::RParen);
        expect(TokenKind::Semi);
      } else {
        const Token &vis = peek();
        if (!(check_keyword("public") || check_keyword("private"))) {
          fail({"'public'", "'private'", "'spawn'", "'die'", "'}'"});
        }
        advance();
        if (check_keyword("void")) {
          if (have_run) fail({"a single run() method"});
          advance();
          const Token &name = expect(TokenKind::Identifier);
          if (name.text != "run") {
            throw ParseError(name.pos, {"'run'"}, "'" + name.text + "'");
          }
          expect(TokenKind::LParen);
          expect(TokenKind::RParen);
          ast.run_body = block();
          have_run = true;
        } else {
          ast.fields.push_back(field(vis));
        }
      }
    }
    if (!have_run) fail({"'public void run()'"});
    expect(TokenKind::RBrace);
    expect(TokenKind::End);
    return ast;
  }

private:
  // -- token helpers --------------------------------------------------------
  const Token &peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool check(TokenKind k) const { return peek().kind == k; }
  bool check_keyword(std::string_view kw) const {
    return peek().kind == TokenKind::Keyword && peek().text == kw;
  }
  const Token &advance() {
    const Token &t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  static std::string describe(const Token &t) {
    if (t.kind == TokenKind::End) return "end of input";
    return "'" + t.text + "'";
  }
  [[noreturn]] void fail(std::vector<std::string> expected) const {
    throw ParseError(peek().pos, std::move(expected), describe(peek()));
  }
  const Token &expect(TokenKind k) {
    if (!check(k)) fail({token_kind_name(k)});
    return advance();
  }
  void expect_keyword(std::string_view kw) {
    if (!check_keyword(kw)) fail({"'" + std::string(kw) + "'"});
    advance();
  }

  // -- declarations ---------------------------------------------------------
  std::pair<ValueType, std::string> type() {
    if (check_keyword("float")) return {ValueType::Float, advance().text};
    if (check_keyword("int")) return {ValueType::Int, advance().text};
    if (check(TokenKind::Identifier)) return {ValueType::Agent, advance().text};
    fail({"'float'", "'int'", "class name"});
  }

  double signed_number() {
    bool negative = false;
    if (check(TokenKind::Minus)) {
      advance();
      negative = true;
    } else if (check(TokenKind::Plus)) {
      advance();
    }
    if (!check(TokenKind::IntLiteral) && !check(TokenKind::FloatLiteral)) fail({"number"});
    const double v = std::strtod(advance().text.c_str(), nullptr);
    return negative ? -v : v;
  }

  FieldDecl field(const Token &vis) {
    FieldDecl f;
    f.pos = vis.pos;
    f.visibility = vis.text == "public" ? Visibility::Public : Visibility::Private;
    if (check_keyword("state")) {
      f.kind = FieldKind::State;
    } else if (check_keyword("effect")) {
      f.kind = FieldKind::Effect;
    } else {
      fail({"'state'", "'effect'", "'void'"});
    }
    advance();
    std::tie(f.value_type, f.type_name) = type();
    f.name = expect(TokenKind::Identifier).text;
    if (f.kind == FieldKind::Effect) {
      expect(TokenKind::Colon);
      const Token &c = peek();
      if (c.kind == TokenKind::Identifier && c.text == "sum") {
        f.combinator = Combinator::Sum;
      } else if (c.kind == TokenKind::Identifier && c.text == "min") {
        f.combinator = Combinator::Min;
      } else if (c.kind == TokenKind::Identifier && c.text == "max") {
        f.combinator = Combinator::Max;
      } else {
        fail({"'sum'", "'min'", "'max'"});
      }
      advance();
      expect(TokenKind::Semi);
    } else {
      if (check(TokenKind::Colon)) {
        advance();
        f.update = expression();
      }
      expect(TokenKind::Semi);
    }
    if (check(TokenKind::Hash)) {
      advance();
      const Token &kw = expect(TokenKind::Identifier);
      if (kw.text != "range") throw ParseError(kw.pos, {"'range'"}, describe(kw));
      expect(TokenKind::LBracket);
      Interval iv;
      iv.lo = signed_number();
      expect(TokenKind::Comma);
      iv.hi = signed_number();
      expect(TokenKind::RBracket);
      expect(TokenKind::Semi);
      f.range = iv;
    }
    return f;
  }

  SpawnRule spawn_rule() {
    SpawnRule r;
    r.pos = advance().pos;
    expect_keyword("when");
    expect(TokenKind::LParen);
    r.condition = expression();
    expect(TokenKind::RParen);
    expect(TokenKind::LBrace);
    while (!check(TokenKind::RBrace)) {
      std::string name = expect(TokenKind::Identifier).text;
      expect(TokenKind::Colon);
      Expr e = expression();
      expect(TokenKind::Semi);
      r.overrides.emplace_back(std::move(name), std::move(e));
    }
    expect(TokenKind::RBrace);
    return r;
  }

  // -- statements -----------------------------------------------------------
  std::vector<Stmt> block() {
    expect(TokenKind::LBrace);
    std::vector<Stmt> out;
    while (!check(TokenKind::RBrace)) {
      if (check(TokenKind::End)) fail({"'}'"});
      out.push_back(statement());
    }
    advance();
    return out;
  }

  Stmt statement() {
    Stmt s;
    s.pos = peek().pos;
    if (check_keyword("const")) {
      advance();
      s.kind = StmtKind::Const;
      std::tie(s.decl_type, s.type_name) = type();
      s.name = expect(TokenKind::Identifier).text;
      expect(TokenKind::Assign);
      s.value = expression();
      expect(TokenKind::Semi);
      return s;
    }
    if (check_keyword("if")) {
      advance();
      s.kind = StmtKind::If;
      expect(TokenKind::LParen);
      s.value = expression();
      expect(TokenKind::RParen);
      s.body = block();
      if (check_keyword("else")) {
        advance();
        if (check_keyword("if")) {
          s.else_body.push_back(statement());
        } else {
          s.else_body = block();
        }
      }
      return s;
    }
    if (check_keyword("foreach")) {
      advance();
      s.kind = StmtKind::Foreach;
      expect(TokenKind::LParen);
      std::tie(s.decl_type, s.type_name) = type();
      s.name = expect(TokenKind::Identifier).text;
      expect(TokenKind::Colon);
      const Token &ext = expect(TokenKind::Identifier);
      if (ext.text != "Extent") throw ParseError(ext.pos, {"'Extent'"}, describe(ext));
      expect(TokenKind::Less);
      s.extent_class = expect(TokenKind::Identifier).text;
      expect(TokenKind::Greater);
      expect(TokenKind::RParen);
      s.body = block();
      return s;
    }

    Expr lhs = expression();
    const bool arrow = check(TokenKind::ArrowLeft);
    if (!arrow && !check(TokenKind::Assign)) fail({"'<-'", "'='"});
    advance();
    if (lhs.kind == ExprKind::Name) {
      s.kind = arrow ? StmtKind::LocalEffect : StmtKind::Assign;
      s.name = lhs.name;
    } else if (lhs.kind == ExprKind::Member) {
      s.kind = arrow ? StmtKind::RemoteEffect : StmtKind::Assign;
      s.has_target = true;
      s.name = lhs.name;
      s.target = std::move(lhs.args[0]);
    } else {
      throw ParseError(lhs.pos, {"assignable field"}, "expression");
    }
    s.value = expression();
    expect(TokenKind::Semi);
    return s;
  }

  // -- expressions ----------------------------------------------------------
  Expr expression() {
    Expr c = logical_or();
    if (check(TokenKind::Question)) {
      const SourcePos p = advance().pos;
      Expr a = expression();
      expect(TokenKind::Colon);
      Expr b = expression();
      return Expr::ternary(std::move(c), std::move(a), std::move(b), p);
    }
    return c;
  }

  template <class Next>
  Expr left_assoc(Next next, std::initializer_list<std::pair<TokenKind, BinaryOp>> ops) {
    Expr lhs = (this->*next)();
    for (;;) {
      bool matched = false;
      for (auto [tk, op] : ops) {
        if (check(tk)) {
          const SourcePos p = advance().pos;
          Expr rhs = (this->*next)();
          lhs = Expr::binary_op(op, std::move(lhs), std::move(rhs), p);
          matched = true;
          break;
        }
      }
      if (!matched) return lhs;
    }
  }

  Expr logical_or() { return left_assoc(&Parser::logical_and, {{TokenKind::OrOr, BinaryOp::Or}}); }
  Expr logical_and() { return left_assoc(&Parser::equality, {{TokenKind::AndAnd, BinaryOp::And}}); }
  Expr equality() {
    return left_assoc(&Parser::relational,
                      {{TokenKind::EqEq, BinaryOp::Eq}, {TokenKind::NotEq, BinaryOp::Ne}});
  }
  Expr relational() {
    return left_assoc(&Parser::additive,
                      {{TokenKind::Less, BinaryOp::Lt},
                       {TokenKind::LessEq, BinaryOp::Le},
                       {TokenKind::Greater, BinaryOp::Gt},
                       {TokenKind::GreaterEq, BinaryOp::Ge}});
  }
  Expr additive() {
    return left_assoc(&Parser::multiplicative,
                      {{TokenKind::Plus, BinaryOp::Add}, {TokenKind::Minus, BinaryOp::Sub}});
  }
  Expr multiplicative() {
    return left_assoc(&Parser::unary,
                      {{TokenKind::Star, BinaryOp::Mul}, {TokenKind::Slash, BinaryOp::Div}});
  }

  Expr unary() {
    if (check(TokenKind::Minus)) {
      const SourcePos p = advance().pos;
      return Expr::unary_op(UnaryOp::Neg, unary(), p);
    }
    if (check(TokenKind::Bang)) {
      const SourcePos p = advance().pos;
      return Expr::unary_op(UnaryOp::Not, unary(), p);
    }
    return postfix();
  }

  Expr postfix() {
    Expr e = primary();
    while (check(TokenKind::Dot)) {
      const SourcePos p = advance().pos;
      std::string field = expect(TokenKind::Identifier).text;
      e = Expr::member(std::move(e), std::move(field), p);
    }
    return e;
  }

  Expr primary() {
    const Token &t = peek();
    switch (t.kind) {
      case TokenKind::IntLiteral:
        advance();
        return Expr::literal(std::strtod(t.text.c_str(), nullptr), true, t.pos);
      case TokenKind::FloatLiteral:
        advance();
        return Expr::literal(std::strtod(t.text.c_str(), nullptr), false, t.pos);
      case TokenKind::LParen: {
        advance();
        Expr e = expression();
        expect(TokenKind::RParen);
        return e;
      }
      case TokenKind::Keyword:
        if (t.text == "this") {
          advance();
          return Expr::this_ref(t.pos);
        }
        if (t.text == "nil") {
          advance();
          return Expr::nil_lit(t.pos);
        }
        break;
      case TokenKind::Identifier: {
        advance();
        if (check(TokenKind::LParen)) {
          advance();
          std::vector<Expr> args;
          if (!check(TokenKind::RParen)) {
            args.push_back(expression());
            while (check(TokenKind::Comma)) {
              advance();
              args.push_back(expression());
            }
          }
          expect(TokenKind::RParen);
          return Expr::call(t.text, std::move(args), t.pos);
        }
        return Expr::name_ref(t.text, t.pos);
      }
      default:
        break;
    }
    fail({"expression"});
  }

  const std::vector<Token> &toks_;
  std::size_t pos_ = 0;
};

}  // namespace

ScriptAst parse_script(const std::vector<Token> &tokens) { return Parser(tokens).script(); }

ScriptAst parse(const ScriptSource &src) {
  ScriptAst ast = parse_script(tokenize(src));
  ast.origin = src.origin;
  return ast;
}

}  // namespace brace::dsl
