#include "doctest.h"
#include "support.hpp"

using namespace brace;
using namespace brace::dsl;

TEST_CASE("smallest assignment tokenizes to four tokens") {
  auto toks = tokenize({"x <- 1;"});
  REQUIRE(toks.size() == 5);
  CHECK(toks[0].kind == TokenKind::Identifier);
  CHECK(toks[0].text == "x");
  CHECK(toks[1].kind == TokenKind::ArrowLeft);
  CHECK(toks[2].kind == TokenKind::IntLiteral);
  CHECK(toks[2].text == "1");
  CHECK(toks[3].kind == TokenKind::Semi);
  CHECK(toks[4].kind == TokenKind::End);
}

TEST_CASE("fish script tokens include keywords and the arrow") {
  auto toks = tokenize(test_support::model_source("simple_fish"));
  bool state = false, effect = false, foreach_kw = false, arrow = false;
  for (const auto &t : toks) {
    if (t.kind == TokenKind::Keyword && t.text == "state") state = true;
    if (t.kind == TokenKind::Keyword && t.text == "effect") effect = true;
    if (t.kind == TokenKind::Keyword && t.text == "foreach") foreach_kw = true;
    if (t.kind == TokenKind::ArrowLeft) arrow = true;
  }
  CHECK(state);
  CHECK(effect);
  CHECK(foreach_kw);
  CHECK(arrow);
}

TEST_CASE("comments are stripped and positions tracked") {
  auto toks = tokenize({"// line\n/** block\n */ a\n  b"});
  REQUIRE(toks.size() == 3);
  CHECK(toks[0].pos.line == 3);
  CHECK(toks[0].pos.column == 5);
  CHECK(toks[1].pos.line == 4);
  CHECK(toks[1].pos.column == 3);
}

TEST_CASE("illegal character raises LexError at its position") {
  try {
    tokenize({"float @ y"});
    FAIL("expected LexError");
  } catch (const LexError &e) {
    CHECK(e.pos.line == 1);
    CHECK(e.pos.column == 7);
    CHECK(e.pos.offset == 6);
  }
}

TEST_CASE("unterminated block comment is rejected") {
  CHECK_THROWS_AS(tokenize({"a /* b"}), LexError);
}

TEST_CASE("numeric literal forms") {
  auto toks = tokenize({"1 2.5 1. 3e2 4.0e-1"});
  CHECK(toks[0].kind == TokenKind::IntLiteral);
  CHECK(toks[1].kind == TokenKind::FloatLiteral);
  CHECK(toks[2].kind == TokenKind::FloatLiteral);
  CHECK(toks[3].kind == TokenKind::FloatLiteral);
  CHECK(toks[4].kind == TokenKind::FloatLiteral);
}

TEST_CASE("simple fish parses into seven fields and one loop") {
  auto ast = parse(test_support::model_source("simple_fish"));
  CHECK(ast.class_name == "Fish");
  REQUIRE(ast.fields.size() == 7);
  const char *names[] = {"x", "y", "vx", "vy", "avoidx", "avoidy", "count"};
  for (int i = 0; i < 7; ++i) {
    CHECK(ast.fields[i].name == names[i]);
    CHECK(ast.fields[i].kind == (i < 4 ? FieldKind::State : FieldKind::Effect));
  }
  for (int i = 4; i < 7; ++i) {
    REQUIRE(ast.fields[i].combinator.has_value());
    CHECK(*ast.fields[i].combinator == Combinator::Sum);
  }
  CHECK(ast.fields[6].value_type == ValueType::Int);
  REQUIRE(ast.fields[0].range.has_value());
  CHECK(ast.fields[0].range->lo == -1.0);
  CHECK(ast.fields[0].range->hi == 1.0);
  CHECK_FALSE(ast.fields[2].range.has_value());

  REQUIRE(ast.run_body.size() == 1);
  const Stmt &loop = ast.run_body[0];
  CHECK(loop.kind == StmtKind::Foreach);
  CHECK(loop.extent_class == "Fish");
  CHECK(loop.name == "p");
  REQUIRE(loop.body.size() == 3);
  for (const auto &s : loop.body) CHECK(s.kind == StmtKind::RemoteEffect);
  CHECK(loop.body[2].name == "count");
}

TEST_CASE("empty class") {
  auto ast = parse({"class A { public void run() {} }"});
  CHECK(ast.class_name == "A");
  CHECK(ast.fields.empty());
  CHECK(ast.run_body.empty());
}

TEST_CASE("missing run method is a parse error") {
  CHECK_THROWS_AS(parse({"class A { }"}), ParseError);
}

TEST_CASE("parse error reports a position inside the source") {
  const std::string text = "class A {\n  public void run() { x <- ; }\n}";
  try {
    parse({text});
    FAIL("expected ParseError");
  } catch (const ParseError &e) {
    CHECK(e.pos.line == 2);
    CHECK(e.pos.offset < text.size());
    CHECK(e.found == "';'");
    CHECK_FALSE(e.expected.empty());
  }
}

TEST_CASE("effect combinator must be named") {
  CHECK_THROWS_AS(parse({"class A { public effect float e : avg; public void run() {} }"}), ParseError);
}

TEST_CASE("operator precedence") {
  auto ast = parse({"class A { public state float x : 1 + 2 * 3 - -x / 4; public void run() {} }"});
  CHECK(print_expr(*ast.fields[0].update) == "((1 + (2 * 3)) - ((-x) / 4))");
  auto b = parse({"class A { public state float x : a < b && c == d || !e; public void run() {} }"});
  CHECK(print_expr(*b.fields[0].update) == "(((a < b) && (c == d)) || (!e))");
}

TEST_CASE("round trip on hand-written scripts") {
  const char *scripts[] = {
      "class A { public void run() {} }",
      "class B { public state float x : x + 1; #range[-2.5, 2.5];\n"
      "  private effect float m : min;\n"
      "  public void run() { const float k = 2; if (x > k) { m <- x; } else if (x < 0) { m <- 0; } "
      "else { m <- nil; } } }",
      "class C { public state C friend; public state int n : n;\n"
      "  private effect int hits : max;\n"
      "  spawn when (rand() < 0.5) { n : 0; }\n"
      "  die when (hits > 3);\n"
      "  public void run() { const C f = friend; foreach (C q : Extent<C>) {\n"
      "    if (visible(this, q)) { q.hits <- 1; } } f.hits <- (n > 0 ? 1 : 2); } }",
  };
  for (const char *s : scripts) {
    auto a = parse({s});
    auto text = pretty_print(a);
    auto b = parse({text});
    CHECK(same_tree(a, b));
    CHECK(pretty_print(b) == text);
  }
}
