#include <cctype>
#include <set>

#include "brace/dsl.hpp"

namespace brace::dsl {

const char *token_kind_name(TokenKind k) {
  switch (k) {
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Keyword: return "keyword";
    case TokenKind::IntLiteral: return "integer";
    case TokenKind::FloatLiteral: return "float";
    case TokenKind::ArrowLeft: return "'<-'";
    case TokenKind::Semi: return "';'";
    case TokenKind::Colon: return "':'";
    case TokenKind::Comma: return "','";
    case TokenKind::Dot: return "'.'";
    case TokenKind::Hash: return "'#'";
    case TokenKind::Question: return "'?'";
    case TokenKind::LParen: return "'('";
    case TokenKind::RParen: return "')'";
    case TokenKind::LBrace: return "'{'";
    case TokenKind::RBrace: return "'}'";
    case TokenKind::LBracket: return "'['";
    case TokenKind::RBracket: return "']'";
    case TokenKind::Less: return "'<'";
    case TokenKind::LessEq: return "'<='";
    case TokenKind::Greater: return "'>'";
    case TokenKind::GreaterEq: return "'>='";
    case TokenKind::EqEq: return "'=='";
    case TokenKind::NotEq: return "'!='";
    case TokenKind::Assign: return "'='";
    case TokenKind::Plus: return "'+'";
    case TokenKind::Minus: return "'-'";
    case TokenKind::Star: return "'*'";
    case TokenKind::Slash: return "'/'";
    case TokenKind::Bang: return "'!'";
    case TokenKind::AndAnd: return "'&&'";
    case TokenKind::OrOr: return "'||'";
    case TokenKind::End: return "end of input";
  }
  return "?";
}

namespace {

const std::set<std::string, std::less<>> kKeywords = {
    "class", "public", "private", "state", "effect", "void", "const", "if",
    "else",  "foreach", "this",   "nil",   "float",  "int",  "spawn", "die", "when",
};

class Lexer {
public:
  explicit Lexer(const std::string &text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space_and_comments();
      if (at_end()) {
        out.push_back({TokenKind::End, "", pos_});
        return out;
      }
      out.push_back(next_token());
    }
  }

private:
  bool at_end() const { return pos_.offset >= text_.size(); }
  char peek(std::size_t ahead = 0) const {
    const std::size_t i = pos_.offset + ahead;
    return i < text_.size() ? text_[i] : '\0';
  }

  void advance() {
    if (text_[pos_.offset] == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else {
      ++pos_.column;
    }
    ++pos_.offset;
  }

  void skip_space_and_comments() {
    while (!at_end()) {
      const char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (!at_end() && peek() != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        const SourcePos start = pos_;
        advance();
        advance();
        while (!at_end() && !(peek() == '*' && peek(1) == '/')) advance();
        if (at_end()) throw LexError(start, "unterminated comment");
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  Token next_token() {
    const SourcePos start = pos_;
    const char c = peek();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string word;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') {
        word += peek();
        advance();
      }
      const auto kind = kKeywords.contains(word) ? TokenKind::Keyword : TokenKind::Identifier;
      return {kind, std::move(word), start};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      return number(start);
    }

    auto single = [&](TokenKind k) {
      std::string t(1, peek());
      advance();
      return Token{k, std::move(t), start};
    };
    auto pair = [&](TokenKind k) {
      std::string t{peek(), peek(1)};
      advance();
      advance();
      return Token{k, std::move(t), start};
    };

    switch (c) {
      case '<':
        if (peek(1) == '-') return pair(TokenKind::ArrowLeft);
        if (peek(1) == '=') return pair(TokenKind::LessEq);
        return single(TokenKind::Less);
      case '>':
        if (peek(1) == '=') return pair(TokenKind::GreaterEq);
        return single(TokenKind::Greater);
      case '=':
        if (peek(1) == '=') return pair(TokenKind::EqEq);
        return single(TokenKind::Assign);
      case '!':
        if (peek(1) == '=') return pair(TokenKind::NotEq);
        return single(TokenKind::Bang);
      case '&':
        if (peek(1) == '&') return pair(TokenKind::AndAnd);
        break;
      case '|':
        if (peek(1) == '|') return pair(TokenKind::OrOr);
        break;
      case ';': return single(TokenKind::Semi);
      case ':': return single(TokenKind::Colon);
      case ',': return single(TokenKind::Comma);
      case '.': return single(TokenKind::Dot);
      case '#': return single(TokenKind::Hash);
      case '?': return single(TokenKind::Question);
      case '(': return single(TokenKind::LParen);
      case ')': return single(TokenKind::RParen);
      case '{': return single(TokenKind::LBrace);
      case '}': return single(TokenKind::RBrace);
      case '[': return single(TokenKind::LBracket);
      case ']': return single(TokenKind::RBracket);
      case '+': return single(TokenKind::Plus);
      case '-': return single(TokenKind::Minus);
      case '*': return single(TokenKind::Star);
      case '/': return single(TokenKind::Slash);
      default: break;
    }
    throw LexError(start, std::string("illegal character '") + c + "'");
  }

  Token number(SourcePos start) {
    std::string digits;
    bool is_float = false;
    auto take_digits = [&] {
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        digits += peek();
        advance();
      }
    };
    take_digits();
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      is_float = true;
      digits += '.';
      advance();
      take_digits();
    } else if (peek() == '.' && !std::isalpha(static_cast<unsigned char>(peek(1)))) {
      // "1." is a float literal; "p.x" never starts with a digit.
      is_float = true;
      digits += '.';
      advance();
    }
    if (peek() == 'e' || peek() == 'E') {
      const char sign = peek(1);
      const bool signed_exp = sign == '+' || sign == '-';
      if (std::isdigit(static_cast<unsigned char>(signed_exp ? peek(2) : sign))) {
        is_float = true;
        digits += peek();
        advance();
        if (signed_exp) {
          digits += peek();
          advance();
        }
        take_digits();
      }
    }
    if (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_') {
      throw LexError(pos_, std::string("illegal character '") + peek() + "' in number");
    }
    return {is_float ? TokenKind::FloatLiteral : TokenKind::IntLiteral, std::move(digits), start};
  }

  const std::string &text_;
  SourcePos pos_;
};

}  // namespace

std::vector<Token> tokenize(const ScriptSource &src) { return Lexer(src.text).run(); }

}  // namespace brace::dsl
