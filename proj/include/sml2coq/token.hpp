#pragma once

#include <array>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "sml2coq/diagnostics.hpp"

namespace sml2coq {

enum class TokKind {
  Ident,         // alphanumeric identifier, possibly qualified (S.x)
  SymbolicId,    // run of symbolic characters (=, ::, +, ==>, ...)
  Keyword,       // reserved alphabetic word
  IntLit,
  RealLit,
  StringLit,
  CharLit,
  ContractOpen,  // (!!
  ContractClose, // !!)
  Punct,         // ( ) [ ] { } , ; ... _
  Eof,
};

struct Token {
  TokKind kind;
  std::string text;  // exact source slice
  Span span;

  bool is(TokKind k) const { return kind == k; }
  bool is(TokKind k, std::string_view t) const { return kind == k && text == t; }
};

namespace detail {

inline const std::unordered_set<std::string>& reservedWords() {
  static const std::unordered_set<std::string> words = {
      "abstype", "and", "andalso", "as", "case", "datatype", "do", "else", "end",
      "eqtype", "exception", "fn", "fun", "functor", "handle", "if", "in", "include",
      "infix", "infixr", "let", "local", "nonfix", "of", "op", "open", "orelse",
      "raise", "rec", "sharing", "sig", "signature", "struct", "structure", "then",
      "type", "val", "where", "while", "withtype",
      // contract annotation keywords
      "REQUIRES", "ENSURES",
  };
  return words;
}

inline bool isSymbolic(char c) {
  static const std::string chars = "!%&$#+-/:<=>?@\\~`^|*";
  return chars.find(c) != std::string::npos;
}

inline bool isIdentStart(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool isIdentChar(char c) {
  return isIdentStart(c) || (c >= '0' && c <= '9') || c == '_' || c == '\'';
}

inline bool isDigit(char c) { return c >= '0' && c <= '9'; }

}  // namespace detail

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skipTrivia();
      if (pos_ >= src_.size()) break;
      out.push_back(next());
    }
    out.push_back(Token{TokKind::Eof, "", Span{uint32_t(src_.size()), uint32_t(src_.size())}});
    return out;
  }

 private:
  std::string_view src_;
  uint32_t pos_ = 0;

  char peek(uint32_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  bool startsWith(std::string_view s) const {
    return src_.substr(pos_, s.size()) == s;
  }

  Token make(TokKind k, uint32_t begin) {
    return Token{k, std::string(src_.substr(begin, pos_ - begin)), Span{begin, pos_}};
  }

  void skipTrivia() {
    for (;;) {
      while (pos_ < src_.size() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r'))
        ++pos_;
      if (startsWith("(*")) {
        uint32_t begin = pos_;
        pos_ += 2;
        int depth = 1;  // SML comments nest
        while (depth > 0) {
          if (pos_ >= src_.size()) fail(Stage::Lex, Span{begin, begin + 2}, "unterminated comment");
          if (startsWith("(*")) { depth++; pos_ += 2; }
          else if (startsWith("*)")) { depth--; pos_ += 2; }
          else ++pos_;
        }
        continue;
      }
      break;
    }
  }

  Token next() {
    uint32_t begin = pos_;
    char c = peek();

    // Contract delimiters are atomic wherever they occur outside strings/comments.
    if (startsWith("(!!")) { pos_ += 3; return make(TokKind::ContractOpen, begin); }
    if (startsWith("!!)")) { pos_ += 3; return make(TokKind::ContractClose, begin); }

    if (c == '(' || c == ')' || c == '[' || c == ']' || c == '{' || c == '}' ||
        c == ',' || c == ';') {
      ++pos_;
      return make(TokKind::Punct, begin);
    }
    if (startsWith("...")) { pos_ += 3; return make(TokKind::Punct, begin); }
    if (c == '.') fail(Stage::Lex, Span{begin, begin + 1}, "stray '.'");

    if (c == '_' && !detail::isIdentChar(peek(1))) {
      ++pos_;
      return make(TokKind::Punct, begin);
    }
    if (c == '_') fail(Stage::Lex, Span{begin, begin + 1}, "identifiers may not start with '_'");

    if (c == '\'') return lexTyVar();
    if (c == '#' && peek(1) == '"') return lexChar();
    if (c == '"') return lexString();
    if (detail::isDigit(c) || (c == '~' && detail::isDigit(peek(1)))) return lexNumber();
    if (detail::isIdentStart(c)) return lexAlpha();
    if (detail::isSymbolic(c)) {
      while (detail::isSymbolic(peek())) {
        // Never swallow the '!' prefix of a closing contract delimiter.
        if (startsWith("!!)")) break;
        ++pos_;
      }
      return make(TokKind::SymbolicId, begin);
    }
    fail(Stage::Lex, Span{begin, begin + 1}, std::string("unexpected character '") + c + "'");
  }

  // Type variables keep their leading quote(s) in the token text; ''a is an
  // equality type variable, outside the supported subset.
  Token lexTyVar() {
    uint32_t begin = pos_;
    ++pos_;
    if (peek() == '\'')
      fail(Stage::Lex, Span{begin, begin + 2}, "equality type variables ('' a) are not supported",
           /*unsupported=*/true);
    if (!detail::isIdentChar(peek()))
      fail(Stage::Lex, Span{begin, pos_}, "malformed type variable");
    while (detail::isIdentChar(peek())) ++pos_;
    return make(TokKind::Ident, begin);  // parser distinguishes by leading quote
  }

  Token lexAlpha() {
    uint32_t begin = pos_;
    while (detail::isIdentChar(peek())) ++pos_;
    // Qualified name: id.id(.id)*, each segment alphanumeric.
    while (peek() == '.' && detail::isIdentStart(peek(1))) {
      ++pos_;
      while (detail::isIdentChar(peek())) ++pos_;
    }
    Token t = make(TokKind::Ident, begin);
    if (t.text.find('.') == std::string::npos && detail::reservedWords().count(t.text))
      t.kind = TokKind::Keyword;
    return t;
  }

  Token lexNumber() {
    uint32_t begin = pos_;
    if (peek() == '~') ++pos_;
    while (detail::isDigit(peek())) ++pos_;
    bool real = false;
    if (peek() == '.' && detail::isDigit(peek(1))) {
      real = true;
      ++pos_;
      while (detail::isDigit(peek())) ++pos_;
    }
    if (peek() == 'e' || peek() == 'E') {
      uint32_t save = pos_;
      ++pos_;
      if (peek() == '~') ++pos_;
      if (detail::isDigit(peek())) {
        real = true;
        while (detail::isDigit(peek())) ++pos_;
      } else {
        pos_ = save;  // 'e' belongs to a following identifier
      }
    }
    return make(real ? TokKind::RealLit : TokKind::IntLit, begin);
  }

  void lexEscape(uint32_t litBegin) {
    ++pos_;  // backslash
    char e = peek();
    switch (e) {
      case 'n': case 't': case 'r': case '\\': case '"':
        ++pos_;
        return;
      default:
        if (detail::isDigit(e)) {
          for (int i = 0; i < 3; ++i) {
            if (!detail::isDigit(peek()))
              fail(Stage::Lex, Span{litBegin, pos_}, "malformed numeric escape (expect \\ddd)");
            ++pos_;
          }
          return;
        }
        fail(Stage::Lex, Span{litBegin, pos_ + 1}, "unsupported escape sequence");
    }
  }

  Token lexString() {
    uint32_t begin = pos_;
    ++pos_;
    for (;;) {
      if (pos_ >= src_.size() || peek() == '\n')
        fail(Stage::Lex, Span{begin, pos_}, "unterminated string literal");
      if (peek() == '"') { ++pos_; break; }
      if (peek() == '\\') lexEscape(begin);
      else ++pos_;
    }
    return make(TokKind::StringLit, begin);
  }

  Token lexChar() {
    uint32_t begin = pos_;
    ++pos_;  // '#'
    Token s = lexString();
    Token t{TokKind::CharLit, std::string(src_.substr(begin, pos_ - begin)), Span{begin, pos_}};
    // Content must be exactly one character after escape decoding.
    if (decodeStringText(t.text.substr(1), t.span).size() != 1)
      fail(Stage::Lex, t.span, "character literal must contain exactly one character");
    return t;
  }

 public:
  // Decodes the contents of a quoted string token (text includes the quotes).
  static std::string decodeStringText(std::string_view quoted, Span span) {
    std::string out;
    for (size_t i = 1; i + 1 < quoted.size();) {
      char c = quoted[i];
      if (c != '\\') { out += c; ++i; continue; }
      char e = quoted[i + 1];
      switch (e) {
        case 'n': out += '\n'; i += 2; break;
        case 't': out += '\t'; i += 2; break;
        case 'r': out += '\r'; i += 2; break;
        case '\\': out += '\\'; i += 2; break;
        case '"': out += '"'; i += 2; break;
        default: {
          int v = (quoted[i + 1] - '0') * 100 + (quoted[i + 2] - '0') * 10 + (quoted[i + 3] - '0');
          if (v > 255) fail(Stage::Lex, span, "escape out of range");
          out += char(v);
          i += 4;
          break;
        }
      }
    }
    return out;
  }
};

inline std::vector<Token> tokenize(std::string_view source) {
  return Lexer(source).run();
}

}  // namespace sml2coq
