#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sml2coq/gallina.hpp"

namespace sml2coq {

// Minimal Gallina-surface reader covering exactly the syntax the emitter
// produces. Re-parsing emitted text and comparing the sentence trees closes
// the loop between the printer and the target AST.

namespace gsurf {

struct Tok {
  enum class Kind { Ident, Number, String, Symbol, Eof };
  Kind kind = Kind::Eof;
  std::string text;
  size_t pos = 0;
};

class GallinaLexer {
 public:
  explicit GallinaLexer(std::string_view src) : src_(src) {}

  std::vector<Tok> run() {
    std::vector<Tok> out;
    for (;;) {
      skipTrivia();
      if (pos_ >= src_.size()) break;
      out.push_back(next());
    }
    out.push_back(Tok{Tok::Kind::Eof, "", pos_});
    return out;
  }

 private:
  std::string_view src_;
  size_t pos_ = 0;

  char peek(size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }
  bool startsWith(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  void skipTrivia() {
    for (;;) {
      while (pos_ < src_.size() && (peek() == ' ' || peek() == '\n' || peek() == '\t' ||
                                    peek() == '\r'))
        ++pos_;
      if (startsWith("(*")) {
        int depth = 1;
        pos_ += 2;
        while (depth > 0 && pos_ < src_.size()) {
          if (startsWith("(*")) { depth++; pos_ += 2; }
          else if (startsWith("*)")) { depth--; pos_ += 2; }
          else ++pos_;
        }
        continue;
      }
      break;
    }
  }

  static bool identStart(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool identChar(char c) {
    return identStart(c) || (c >= '0' && c <= '9') || c == '\'';
  }

  Tok next() {
    size_t start = pos_;
    char c = peek();
    if (c == '"') {
      ++pos_;
      std::string content;
      for (;;) {
        if (pos_ >= src_.size())
          fail(Stage::Emit, Span{uint32_t(start), uint32_t(pos_)}, "unterminated Coq string");
        if (peek() == '"' && peek(1) == '"') {
          content += '"';
          pos_ += 2;
          continue;
        }
        if (peek() == '"') { ++pos_; break; }
        content += peek();
        ++pos_;
      }
      return Tok{Tok::Kind::String, content, start};
    }
    if (c >= '0' && c <= '9') {
      while (pos_ < src_.size() && ((peek() >= '0' && peek() <= '9') || peek() == '.')) {
        if (peek() == '.') {
          // a number-trailing dot is a sentence period unless a digit follows
          if (!(peek(1) >= '0' && peek(1) <= '9')) break;
        }
        ++pos_;
      }
      return Tok{Tok::Kind::Number, std::string(src_.substr(start, pos_ - start)), start};
    }
    if (identStart(c)) {
      while (identChar(peek())) ++pos_;
      // qualified names: segment '.' segment, where a letter follows the dot
      while (peek() == '.' && identStart(peek(1))) {
        ++pos_;
        while (identChar(peek())) ++pos_;
      }
      return Tok{Tok::Kind::Ident, std::string(src_.substr(start, pos_ - start)), start};
    }
    static const char* symbols[] = {
        "{|", "|}", ":=", "=>", "->", "/\\", "\\/", "&&", "||", "<=", ">=", "<>", "<:",
        "++", "::", "(", ")", "{", "}", "[", "]", ",", ";", ".", ":", "|", "=", "<",
        ">", "+", "-", "*", "/", "@", "!", "%", "`", "^",
    };
    for (const char* s : symbols) {
      if (startsWith(s)) {
        pos_ += std::string_view(s).size();
        return Tok{Tok::Kind::Symbol, s, start};
      }
    }
    fail(Stage::Emit, Span{uint32_t(start), uint32_t(start + 1)},
         std::string("re-parse: unexpected character '") + c + "'");
  }
};

struct InfixInfo {
  int level = 0;       // Coq level: lower binds tighter
  bool rightAssoc = false;
};

class GallinaParser {
 public:
  explicit GallinaParser(std::string_view text) : toks_(GallinaLexer(text).run()) {
    // Built-in notation table (Coq levels).
    infixes_["\\/"] = {85, true};
    infixes_["/\\"] = {80, true};
    infixes_["||"] = {50, false};
    infixes_["&&"] = {40, false};
    for (const char* op : {"=", "<>", "<", ">", "<=", ">="}) infixes_[op] = {70, false};
    infixes_["::"] = {60, true};
    infixes_["++"] = {60, true};
    for (const char* op : {"+", "-", "^"}) infixes_[op] = {50, false};
    for (const char* op : {"*", "/", "div", "mod"}) infixes_[op] = {40, false};
  }

  std::vector<GSentencePtr> run() {
    std::vector<GSentencePtr> out;
    while (!at(Tok::Kind::Eof)) out.push_back(parseSentence());
    return out;
  }

 private:
  std::vector<Tok> toks_;
  size_t pos_ = 0;
  std::map<std::string, InfixInfo> infixes_;
  bool propEq_ = false;  // inside theorem/axiom statements and binder types

  const Tok& peek(size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Tok& advance() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool at(Tok::Kind k) const { return peek().kind == k; }
  bool at(Tok::Kind k, std::string_view t) const {
    return peek().kind == k && peek().text == t;
  }
  bool atSym(std::string_view t) const { return at(Tok::Kind::Symbol, t); }
  bool atIdent(std::string_view t) const { return at(Tok::Kind::Ident, t); }
  bool eatSym(std::string_view t) {
    if (atSym(t)) { ++pos_; return true; }
    return false;
  }
  bool eatIdent(std::string_view t) {
    if (atIdent(t)) { ++pos_; return true; }
    return false;
  }

  [[noreturn]] void err(const std::string& msg) {
    fail(Stage::Emit, Span{uint32_t(peek().pos), uint32_t(peek().pos + 1)},
         "re-parse: " + msg + " (found '" + peek().text + "')");
  }

  void expectSym(std::string_view t) {
    if (!eatSym(t)) err("expected '" + std::string(t) + "'");
  }
  void expectIdent(std::string_view t) {
    if (!eatIdent(t)) err("expected '" + std::string(t) + "'");
  }
  std::string expectAnyIdent() {
    if (!at(Tok::Kind::Ident)) err("expected identifier");
    return advance().text;
  }

  // ---- sentences ----

  GSentencePtr parseSentence() {
    if (atIdent("Require")) {
      advance();
      expectIdent("Import");
      auto s = gsentence(GSentence::Kind::RequireImport);
      s->name = expectAnyIdent();
      expectSym(".");
      return s;
    }
    if (atIdent("From")) {
      advance();
      expectIdent("Equations");
      expectIdent("Require");
      expectIdent("Import");
      auto s = gsentence(GSentence::Kind::RequireImport);
      s->name = expectAnyIdent();
      s->fromEquations = true;
      expectSym(".");
      return s;
    }
    if (atIdent("Generalizable")) {
      advance();
      expectIdent("All");
      expectIdent("Variables");
      expectSym(".");
      return gsentence(GSentence::Kind::GeneralizableAll);
    }
    if (atIdent("Definition")) return parseDefinition();
    if (atIdent("Equations")) return parseEquations();
    if (atIdent("Inductive")) return parseInductive();
    if (atIdent("Record")) return parseRecord();
    if (atIdent("Theorem")) return parseTheorem();
    if (atIdent("Axiom") || (atIdent("Local") && peek(1).text == "Axiom")) return parseAxiom();
    if (atIdent("Notation")) return parseNotation();
    if (atIdent("Module")) return parseModule();
    if (atIdent("Parameter")) return parseParameter();
    err("expected a sentence");
  }

  GBinder parseBinder() {
    GBinder b;
    if (eatSym("`")) {
      b.style = GBinder::Style::Generalized;
      expectSym("(");
      b.name = expectAnyIdent();
      expectSym(":");
      b.type = parseTerm();
      expectSym(")");
      return b;
    }
    if (eatSym("(")) {
      b.style = GBinder::Style::Paren;
      b.name = expectAnyIdent();
      expectSym(":");
      b.type = parseTerm();
      expectSym(")");
      return b;
    }
    if (eatSym("{")) {
      b.style = GBinder::Style::Curly;
      b.name = expectAnyIdent();
      if (eatSym(":")) {
        bool saved = propEq_;
        propEq_ = true;  // H binder types carry Prop equality
        b.type = parseTerm();
        propEq_ = saved;
      }
      expectSym("}");
      return b;
    }
    b.style = GBinder::Style::Paren;
    if (atSym("_")) { advance(); b.name = "_"; return b; }
    b.name = expectAnyIdent();
    return b;
  }

  bool atBinderStart() const {
    return atSym("(") || atSym("{") || atSym("`") || at(Tok::Kind::Ident);
  }

  GSentencePtr parseDefinition() {
    advance();
    auto s = gsentence(GSentence::Kind::Definition);
    s->name = expectAnyIdent();
    while (atSym("(") || atSym("{") || atSym("`")) s->binders.push_back(parseBinder());
    if (eatSym(":")) s->returnType = parseTerm();
    expectSym(":=");
    s->body = parseTerm();
    expectSym(".");
    return s;
  }

  GSentencePtr parseEquations() {
    advance();
    auto s = gsentence(GSentence::Kind::Equations);
    for (;;) {
      GEquationsFunc f;
      f.name = expectAnyIdent();
      while (atSym("(") || atSym("{") || atSym("`")) f.binders.push_back(parseBinder());
      expectSym(":");
      f.returnType = parseTerm();
      expectSym(":=");
      for (;;) {
        GClause cl;
        expectIdent(f.name);
        while (!atSym(":=")) cl.pats.push_back(parsePattern(true));
        expectSym(":=");
        cl.body = parseTerm();
        f.clauses.push_back(std::move(cl));
        if (eatSym(";")) continue;
        break;
      }
      s->funcs.push_back(std::move(f));
      if (eatIdent("with")) continue;
      break;
    }
    expectSym(".");
    return s;
  }

  GSentencePtr parseInductive() {
    advance();
    auto s = gsentence(GSentence::Kind::Inductive);
    for (;;) {
      GInductive d;
      d.name = expectAnyIdent();
      while (atSym("{")) d.params.push_back(parseBinder());
      expectSym(":");
      expectIdent("Type");
      expectSym(":=");
      while (eatSym("|")) {
        GConstructor c;
        c.name = expectAnyIdent();
        if (eatSym(":")) c.type = parseTerm();
        d.ctors.push_back(std::move(c));
      }
      s->datatypes.push_back(std::move(d));
      if (eatIdent("with")) continue;
      break;
    }
    expectSym(".");
    return s;
  }

  GSentencePtr parseRecord() {
    advance();
    auto s = gsentence(GSentence::Kind::RecordDecl);
    s->name = expectAnyIdent();
    expectSym(":=");
    expectSym("{");
    for (;;) {
      std::string field = expectAnyIdent();
      expectSym(":");
      s->recordFields.emplace_back(field, parseTerm());
      if (eatSym(";")) continue;
      break;
    }
    expectSym("}");
    expectSym(".");
    return s;
  }

  GSentencePtr parseTheorem() {
    advance();
    auto s = gsentence(GSentence::Kind::Theorem);
    s->name = expectAnyIdent();
    expectSym(":");
    propEq_ = true;
    s->body = parseTerm();
    propEq_ = false;
    expectSym(".");
    if (eatIdent("Admitted")) {
      s->admitted = true;
      expectSym(".");
    }
    return s;
  }

  GSentencePtr parseAxiom() {
    auto s = gsentence(GSentence::Kind::Axiom);
    if (eatIdent("Local")) s->local = true;
    expectIdent("Axiom");
    s->name = expectAnyIdent();
    expectSym(":");
    propEq_ = true;
    s->body = parseTerm();
    propEq_ = false;
    expectSym(".");
    return s;
  }

  GSentencePtr parseNotation() {
    advance();
    auto s = gsentence(GSentence::Kind::Notation);
    if (!at(Tok::Kind::String)) err("expected notation pattern string");
    s->text = advance().text;
    expectSym(":=");
    s->body = parseAtom();  // always a parenthesized application; the following
                            // parenthesis opens the attribute list
    expectSym("(");
    if (eatIdent("left")) s->leftAssoc = true;
    else if (eatIdent("right")) s->leftAssoc = false;
    else err("expected associativity");
    expectIdent("associativity");
    expectSym(",");
    expectIdent("at");
    expectIdent("level");
    if (!at(Tok::Kind::Number)) err("expected level number");
    s->level = std::stoi(advance().text);
    expectSym(")");
    expectSym(".");

    // Register the operator so later uses parse as infix applications.
    std::string op = extractNotationOp(s->text);
    if (!op.empty()) infixes_[op] = {s->level, !s->leftAssoc};
    return s;
  }

  static std::string extractNotationOp(const std::string& pattern) {
    // pattern looks like: x 'F' y
    auto q1 = pattern.find('\'');
    if (q1 == std::string::npos) return "";
    auto q2 = pattern.find('\'', q1 + 1);
    if (q2 == std::string::npos) return "";
    return pattern.substr(q1 + 1, q2 - q1 - 1);
  }

  GSentencePtr parseModule() {
    advance();
    bool isType = eatIdent("Type");
    auto s = gsentence(isType ? GSentence::Kind::ModuleType : GSentence::Kind::Module);
    s->name = expectAnyIdent();
    if (eatSym("(")) {
      std::string p = expectAnyIdent();
      expectSym(":");
      std::string sig = expectAnyIdent();
      expectSym(")");
      s->moduleParam = {p, sig};
    }
    if (eatSym("<:")) s->ascription = expectAnyIdent();
    if (eatSym(":=")) {
      if (eatSym("!")) {
        GModuleApp app;
        app.functorName = expectAnyIdent();
        app.argName = expectAnyIdent();
        s->moduleApp = app;
      } else {
        s->moduleAlias = expectAnyIdent();
      }
      expectSym(".");
      return s;
    }
    expectSym(".");
    while (!atIdent("End")) {
      if (at(Tok::Kind::Eof)) err("unterminated module");
      s->moduleBody.push_back(parseSentence());
    }
    advance();
    expectIdent(s->name);
    expectSym(".");
    return s;
  }

  GSentencePtr parseParameter() {
    advance();
    auto s = gsentence(GSentence::Kind::Parameter);
    s->name = expectAnyIdent();
    expectSym(":");
    s->body = parseTerm();
    expectSym(".");
    return s;
  }

  // ---- terms ----

  GTermPtr parseTerm() { return parseArrow(); }

  GTermPtr parseArrow() {
    GTermPtr l = parseInfix(99);
    if (eatSym("->")) {
      auto t = gterm(GTerm::Kind::Arrow);
      t->items = {l, parseArrow()};
      return t;
    }
    return l;
  }

  bool isInfixHere(InfixInfo& info) const {
    const Tok& t = peek();
    if (t.kind == Tok::Kind::Symbol || t.kind == Tok::Kind::Ident) {
      auto it = infixes_.find(t.text);
      if (it != infixes_.end()) {
        info = it->second;
        return true;
      }
    }
    return false;
  }

  GTermPtr mkInfixNode(const std::string& op, GTermPtr l, GTermPtr r) {
    GTerm::Kind k;
    if (op == "/\\") k = GTerm::Kind::PropAnd;
    else if (op == "\\/") k = GTerm::Kind::PropOr;
    else if (op == "&&") k = GTerm::Kind::BoolAnd;
    else if (op == "||") k = GTerm::Kind::BoolOr;
    else if (op == "=" && propEq_) k = GTerm::Kind::PropEq;
    else k = GTerm::Kind::InfixApp;
    auto t = gterm(k);
    if (k == GTerm::Kind::InfixApp) t->name = op;
    t->items = {std::move(l), std::move(r)};
    return t;
  }

  GTermPtr parseInfix(int maxLevel) {
    GTermPtr lhs = parseApp();
    InfixInfo info;
    while (isInfixHere(info) && info.level <= maxLevel) {
      std::string op = advance().text;
      GTermPtr rhs = parseInfix(info.rightAssoc ? info.level : info.level - 1);
      lhs = mkInfixNode(op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  bool atTermAtomStart() const {
    const Tok& t = peek();
    if (t.kind == Tok::Kind::Number || t.kind == Tok::Kind::String) return true;
    if (t.kind == Tok::Kind::Ident) {
      static const std::set<std::string> stop = {
          "with", "end", "then", "else", "in", "Admitted", "End", "at", "left", "right",
          "associativity",
      };
      // identifier-named notations (div, mod, user operators) are operators
      return !stop.count(t.text) && !infixes_.count(t.text);
    }
    if (t.kind == Tok::Kind::Symbol)
      return t.text == "(" || t.text == "[" || t.text == "{|" || t.text == "@" ||
             t.text == "_";
    return false;
  }

  GTermPtr parseApp() {
    GTermPtr head = parseAtom();
    std::vector<GTermPtr> args;
    while (atTermAtomStart()) args.push_back(parseAtom());
    if (args.empty()) return head;
    if (head->kind == GTerm::Kind::ExplicitApp && head->items.empty()) {
      head->items = std::move(args);
      return head;
    }
    auto t = gterm(GTerm::Kind::App);
    t->items.push_back(std::move(head));
    for (auto& a : args) t->items.push_back(std::move(a));
    return t;
  }

  GTermPtr parseAtom() {
    const Tok& t = peek();
    if (t.kind == Tok::Kind::Number) {
      auto n = gterm(GTerm::Kind::IntLit);
      std::string text = advance().text;
      if (text.find('.') != std::string::npos) {
        n->kind = GTerm::Kind::RealLit;
        n->text = text;
      } else {
        n->intVal = std::stoll(text);
      }
      return n;
    }
    if (t.kind == Tok::Kind::String) {
      std::string content = advance().text;
      if (atSym("%") && peek(1).text == "char") {
        advance();
        advance();
        auto c = gterm(GTerm::Kind::CharLit);
        c->text = content;
        return c;
      }
      auto s = gterm(GTerm::Kind::StringLit);
      s->text = content;
      return s;
    }
    if (atSym("@")) {
      advance();
      auto e = gterm(GTerm::Kind::ExplicitApp);
      e->name = expectAnyIdent();
      return e;  // arguments attach in parseApp
    }
    if (atSym("_")) {
      advance();
      return gident("_");
    }
    if (atSym("[")) {
      advance();
      auto l = gterm(GTerm::Kind::ListLit);
      if (!atSym("]")) {
        for (;;) {
          l->items.push_back(parseTerm());
          if (eatSym(";")) continue;
          break;
        }
      }
      expectSym("]");
      return l;
    }
    if (atSym("{|")) {
      advance();
      auto r = gterm(GTerm::Kind::RecordLit);
      for (;;) {
        std::string f = expectAnyIdent();
        expectSym(":=");
        r->fields.emplace_back(f, parseTerm());
        if (eatSym(";")) continue;
        break;
      }
      expectSym("|}");
      return r;
    }
    if (atSym("(")) return parseParenTerm();
    if (t.kind == Tok::Kind::Ident) {
      if (t.text == "tt") { advance(); return gterm(GTerm::Kind::UnitLit); }
      if (t.text == "Type") { advance(); return gterm(GTerm::Kind::Sort); }
      if (t.text == "fun") return parseFun();
      if (t.text == "let") return parseLet();
      if (t.text == "match") return parseMatch();
      if (t.text == "if") return parseIf();
      if (t.text == "forall" || t.text == "exists") return parseQuantifier();
      return gident(advance().text);
    }
    err("expected a term");
  }

  GTermPtr parseParenTerm() {
    expectSym("(");
    // negative literal: (-3) or (-1.5)
    if (atSym("-") && peek(1).kind == Tok::Kind::Number) {
      advance();
      std::string text = advance().text;
      expectSym(")");
      if (text.find('.') != std::string::npos) {
        auto n = gterm(GTerm::Kind::RealLit);
        n->text = "-" + text;
        return n;
      }
      auto n = gterm(GTerm::Kind::IntLit);
      n->intVal = -std::stoll(text);
      return n;
    }
    GTermPtr first = parseTerm();
    if (atSym(",")) {
      auto tup = gterm(GTerm::Kind::Tuple);
      tup->items.push_back(first);
      while (eatSym(",")) tup->items.push_back(parseTerm());
      expectSym(")");
      return maybeScope(tup);
    }
    if (eatSym(":")) {
      auto an = gterm(GTerm::Kind::Annot);
      an->items = {first, parseTerm()};
      expectSym(")");
      return an;
    }
    expectSym(")");
    if (atSym("%")) return applyScope(first);
    return gparen(first);
  }

  GTermPtr maybeScope(GTermPtr t) {
    if (atSym("%")) return applyScope(std::move(t));
    return t;
  }

  GTermPtr applyScope(GTermPtr inner) {
    expectSym("%");
    std::string key = expectAnyIdent();
    if (key == "type") {
      // flatten the left-associated `*` chain into product members
      auto prod = gterm(GTerm::Kind::ProductType);
      std::vector<GTermPtr> members;
      GTermPtr cur = inner;
      while (cur->kind == GTerm::Kind::InfixApp && cur->name == "*") {
        members.push_back(cur->items[1]);
        cur = cur->items[0];
      }
      members.push_back(cur);
      for (auto it = members.rbegin(); it != members.rend(); ++it) prod->items.push_back(*it);
      return prod;
    }
    auto sc = gterm(GTerm::Kind::ScopeAnnot);
    sc->name = key;
    sc->items = {std::move(inner)};
    return sc;
  }

  GTermPtr parseFun() {
    advance();
    auto f = gterm(GTerm::Kind::Fun);
    while (!atSym("=>")) f->binders.push_back(parseBinder());
    expectSym("=>");
    f->items = {parseTerm()};
    return f;
  }

  GTermPtr parseLet() {
    advance();
    auto l = gterm(GTerm::Kind::Let);
    l->name = expectAnyIdent();
    expectSym(":=");
    GTermPtr bound = parseTerm();
    expectIdent("in");
    GTermPtr body = parseTerm();
    l->items = {bound, body};
    return l;
  }

  GTermPtr parseMatch() {
    advance();
    auto m = gterm(GTerm::Kind::Match);
    m->items.push_back(parseTerm());
    expectIdent("with");
    for (;;) {
      eatSym("|");
      GBranch br;
      br.pat = parsePattern(false);
      expectSym("=>");
      br.body = parseTerm();
      m->branches.push_back(std::move(br));
      if (atSym("|")) continue;
      break;
    }
    expectIdent("end");
    // exhaustiveness is a semantic annotation, not printable syntax
    m->exhaustive = true;
    return m;
  }

  GTermPtr parseIf() {
    advance();
    auto i = gterm(GTerm::Kind::If);
    GTermPtr c = parseTerm();
    expectIdent("then");
    GTermPtr a = parseTerm();
    expectIdent("else");
    GTermPtr b = parseTerm();
    i->items = {c, a, b};
    return i;
  }

  GTermPtr parseQuantifier() {
    bool isForall = peek().text == "forall";
    advance();
    auto q = gterm(isForall ? GTerm::Kind::PropForall : GTerm::Kind::PropExists);
    while (!atSym(",")) q->binders.push_back(parseBinder());
    expectSym(",");
    q->items = {parseTerm()};
    return q;
  }

  // ---- patterns ----

  bool atPatAtomStart() const {
    const Tok& t = peek();
    if (t.kind == Tok::Kind::Number || t.kind == Tok::Kind::String) return true;
    if (t.kind == Tok::Kind::Ident) return t.text != "as" && !infixes_.count(t.text);
    if (t.kind == Tok::Kind::Symbol)
      return t.text == "(" || t.text == "[" || t.text == "{|" || t.text == "_";
    return false;
  }

  // `atom` parses a single atomic pattern (clause-argument position);
  // otherwise a full pattern with infix/constructor application and aliases.
  GPatternPtr parsePattern(bool atom) {
    GPatternPtr p = atom ? parsePatAtom() : parsePatInfix();
    while (!atom && eatIdent("as")) {
      auto a = gpat(GPattern::Kind::Alias);
      a->name = expectAnyIdent();
      a->items = {p};
      p = a;
    }
    return p;
  }

  GPatternPtr parsePatInfix() {
    GPatternPtr lhs = parsePatApp();
    if (peek().kind == Tok::Kind::Symbol || peek().kind == Tok::Kind::Ident) {
      auto it = infixes_.find(peek().text);
      if (it != infixes_.end() && !atSym("=") && !atSym("|")) {
        std::string op = advance().text;
        GPatternPtr rhs = parsePatInfix();
        auto n = gpat(GPattern::Kind::InfixApp);
        n->name = op;
        n->items = {lhs, rhs};
        return n;
      }
    }
    return lhs;
  }

  GPatternPtr parsePatApp() {
    GPatternPtr head = parsePatAtom();
    std::vector<GPatternPtr> args;
    while (atPatAtomStart()) args.push_back(parsePatAtom());
    if (args.empty()) return head;
    if (head->kind != GPattern::Kind::Var) err("pattern application head must be a name");
    auto app = gpat(GPattern::Kind::ConApp);
    app->name = head->name;
    app->items = std::move(args);
    return app;
  }

  GPatternPtr parsePatAtom() {
    const Tok& t = peek();
    if (t.kind == Tok::Kind::Number) {
      auto p = gpat(GPattern::Kind::IntLit);
      p->intVal = std::stoll(advance().text);
      return p;
    }
    if (t.kind == Tok::Kind::String) {
      std::string content = advance().text;
      if (atSym("%") && peek(1).text == "char") {
        advance();
        advance();
        auto p = gpat(GPattern::Kind::CharLit);
        p->text = content;
        return p;
      }
      auto p = gpat(GPattern::Kind::StringLit);
      p->text = content;
      return p;
    }
    if (atSym("_")) {
      advance();
      return gpat(GPattern::Kind::Wildcard);
    }
    if (atSym("(")) {
      advance();
      if (atSym("-") && peek(1).kind == Tok::Kind::Number) {
        advance();
        auto p = gpat(GPattern::Kind::IntLit);
        p->intVal = -std::stoll(advance().text);
        expectSym(")");
        return p;
      }
      GPatternPtr first = parsePattern(false);
      if (atSym(",")) {
        auto tup = gpat(GPattern::Kind::Tuple);
        tup->items.push_back(first);
        while (eatSym(",")) tup->items.push_back(parsePattern(false));
        expectSym(")");
        return tup;
      }
      expectSym(")");
      return first;  // grouping only
    }
    if (atSym("[")) {
      advance();
      auto l = gpat(GPattern::Kind::List);
      if (!atSym("]")) {
        for (;;) {
          l->items.push_back(parsePattern(false));
          if (eatSym(";")) continue;
          break;
        }
      }
      expectSym("]");
      return l;
    }
    if (atSym("{|")) {
      advance();
      auto r = gpat(GPattern::Kind::Record);
      for (;;) {
        std::string f = expectAnyIdent();
        expectSym(":=");
        r->fields.emplace_back(f, parsePattern(false));
        if (eatSym(";")) continue;
        break;
      }
      expectSym("|}");
      return r;
    }
    if (t.kind == Tok::Kind::Ident) {
      if (t.text == "tt") { advance(); return gpat(GPattern::Kind::Unit); }
      if (t.text == "_") { advance(); return gpat(GPattern::Kind::Wildcard); }
      auto p = gpat(GPattern::Kind::Var);
      p->name = advance().text;
      return p;
    }
    err("expected a pattern");
  }
};

}  // namespace gsurf

inline std::vector<GSentencePtr> parseGallina(std::string_view text) {
  return gsurf::GallinaParser(text).run();
}

// ---------------------------------------------------------------------------
// Structural equality (layout-insensitive; the match exhaustiveness flag is a
// semantic annotation and is excluded).

bool equalGTerm(const GTerm& a, const GTerm& b);
bool equalGPattern(const GPattern& a, const GPattern& b);
bool equalGSentence(const GSentence& a, const GSentence& b);

inline bool equalGBinder(const GBinder& a, const GBinder& b) {
  if (a.style != b.style || a.name != b.name) return false;
  if (!a.type != !b.type) return false;
  return !a.type || equalGTerm(*a.type, *b.type);
}

inline bool equalGPattern(const GPattern& a, const GPattern& b) {
  if (a.kind != b.kind || a.name != b.name || a.intVal != b.intVal || a.text != b.text)
    return false;
  if (a.items.size() != b.items.size() || a.fields.size() != b.fields.size()) return false;
  for (size_t i = 0; i < a.items.size(); ++i)
    if (!equalGPattern(*a.items[i], *b.items[i])) return false;
  for (size_t i = 0; i < a.fields.size(); ++i)
    if (a.fields[i].first != b.fields[i].first ||
        !equalGPattern(*a.fields[i].second, *b.fields[i].second))
      return false;
  return true;
}

inline bool equalGTerm(const GTerm& a, const GTerm& b) {
  if (a.kind != b.kind || a.name != b.name || a.intVal != b.intVal || a.text != b.text)
    return false;
  if (a.items.size() != b.items.size() || a.fields.size() != b.fields.size() ||
      a.binders.size() != b.binders.size() || a.branches.size() != b.branches.size())
    return false;
  for (size_t i = 0; i < a.items.size(); ++i)
    if (!equalGTerm(*a.items[i], *b.items[i])) return false;
  for (size_t i = 0; i < a.fields.size(); ++i)
    if (a.fields[i].first != b.fields[i].first ||
        !equalGTerm(*a.fields[i].second, *b.fields[i].second))
      return false;
  for (size_t i = 0; i < a.binders.size(); ++i)
    if (!equalGBinder(a.binders[i], b.binders[i])) return false;
  for (size_t i = 0; i < a.branches.size(); ++i)
    if (!equalGPattern(*a.branches[i].pat, *b.branches[i].pat) ||
        !equalGTerm(*a.branches[i].body, *b.branches[i].body))
      return false;
  return true;
}

inline bool equalGTermOpt(const GTermPtr& a, const GTermPtr& b) {
  if (!a != !b) return false;
  return !a || equalGTerm(*a, *b);
}

inline bool equalGSentence(const GSentence& a, const GSentence& b) {
  if (a.kind != b.kind || a.name != b.name || a.fromEquations != b.fromEquations ||
      a.admitted != b.admitted || a.local != b.local || a.leftAssoc != b.leftAssoc ||
      a.level != b.level || a.text != b.text)
    return false;
  if (a.binders.size() != b.binders.size()) return false;
  for (size_t i = 0; i < a.binders.size(); ++i)
    if (!equalGBinder(a.binders[i], b.binders[i])) return false;
  if (!equalGTermOpt(a.returnType, b.returnType) || !equalGTermOpt(a.body, b.body))
    return false;
  if (a.funcs.size() != b.funcs.size()) return false;
  for (size_t i = 0; i < a.funcs.size(); ++i) {
    const GEquationsFunc &x = a.funcs[i], &y = b.funcs[i];
    if (x.name != y.name || x.binders.size() != y.binders.size() ||
        x.clauses.size() != y.clauses.size())
      return false;
    for (size_t k = 0; k < x.binders.size(); ++k)
      if (!equalGBinder(x.binders[k], y.binders[k])) return false;
    if (!equalGTermOpt(x.returnType, y.returnType)) return false;
    for (size_t k = 0; k < x.clauses.size(); ++k) {
      if (x.clauses[k].pats.size() != y.clauses[k].pats.size()) return false;
      for (size_t j = 0; j < x.clauses[k].pats.size(); ++j)
        if (!equalGPattern(*x.clauses[k].pats[j], *y.clauses[k].pats[j])) return false;
      if (!equalGTerm(*x.clauses[k].body, *y.clauses[k].body)) return false;
    }
  }
  if (a.datatypes.size() != b.datatypes.size()) return false;
  for (size_t i = 0; i < a.datatypes.size(); ++i) {
    const GInductive &x = a.datatypes[i], &y = b.datatypes[i];
    if (x.name != y.name || x.params.size() != y.params.size() ||
        x.ctors.size() != y.ctors.size())
      return false;
    for (size_t k = 0; k < x.params.size(); ++k)
      if (!equalGBinder(x.params[k], y.params[k])) return false;
    for (size_t k = 0; k < x.ctors.size(); ++k) {
      if (x.ctors[k].name != y.ctors[k].name) return false;
      if (!equalGTermOpt(x.ctors[k].type, y.ctors[k].type)) return false;
    }
  }
  if (a.recordFields.size() != b.recordFields.size()) return false;
  for (size_t i = 0; i < a.recordFields.size(); ++i)
    if (a.recordFields[i].first != b.recordFields[i].first ||
        !equalGTerm(*a.recordFields[i].second, *b.recordFields[i].second))
      return false;
  if (a.moduleParam != b.moduleParam || a.ascription != b.ascription ||
      a.moduleAlias != b.moduleAlias)
    return false;
  if (a.moduleApp.has_value() != b.moduleApp.has_value()) return false;
  if (a.moduleApp && (a.moduleApp->functorName != b.moduleApp->functorName ||
                      a.moduleApp->argName != b.moduleApp->argName))
    return false;
  auto filtered = [](const std::vector<GSentencePtr>& body) {
    std::vector<const GSentence*> out;
    for (auto& s : body)
      if (s->kind != GSentence::Kind::Comment) out.push_back(s.get());
    return out;
  };
  auto ba = filtered(a.moduleBody), bb = filtered(b.moduleBody);
  if (ba.size() != bb.size()) return false;
  for (size_t i = 0; i < ba.size(); ++i)
    if (!equalGSentence(*ba[i], *bb[i])) return false;
  return true;
}

// Re-parse closure: parses emitted text and compares against the sentences it
// was produced from (header sentences and comments are not part of the list).
inline std::vector<Diag> checkEmitted(std::string_view emittedText,
                                      const std::vector<GSentencePtr>& original) {
  std::vector<Diag> diags;
  std::vector<GSentencePtr> parsed;
  try {
    parsed = parseGallina(emittedText);
  } catch (const CompileError& e) {
    diags.push_back(e.diag);
    return diags;
  }
  auto relevant = [](const GSentencePtr& s) {
    return s->kind != GSentence::Kind::RequireImport &&
           s->kind != GSentence::Kind::GeneralizableAll &&
           s->kind != GSentence::Kind::Comment;
  };
  std::vector<const GSentence*> lhs, rhs;
  std::function<void(const std::vector<GSentencePtr>&, std::vector<const GSentence*>&)>
      collect = [&](const std::vector<GSentencePtr>& in, std::vector<const GSentence*>& out) {
        for (auto& s : in)
          if (relevant(s)) out.push_back(s.get());
      };
  collect(parsed, lhs);
  collect(original, rhs);
  if (lhs.size() != rhs.size()) {
    diags.push_back(Diag{Stage::Emit, Span{},
                         "re-parse produced " + std::to_string(lhs.size()) +
                             " sentences, expected " + std::to_string(rhs.size())});
    return diags;
  }
  for (size_t i = 0; i < lhs.size(); ++i) {
    // comments inside module bodies are also layout-only
    if (!equalGSentence(*lhs[i], *rhs[i]))
      diags.push_back(Diag{Stage::Emit, Span{},
                           "sentence " + std::to_string(i) + " ('" + rhs[i]->name +
                               "') does not survive re-parsing"});
  }
  return diags;
}

}  // namespace sml2coq
