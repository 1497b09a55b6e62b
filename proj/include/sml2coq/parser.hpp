#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sml2coq/ast.hpp"
#include "sml2coq/token.hpp"

namespace sml2coq {

struct ParseResult {
  std::vector<DeclPtr> program;
  InfixEnvironment infixEnv;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens)
      : toks_(std::move(tokens)), env_(InfixEnvironment::initial()) {}

  ParseResult run() {
    std::vector<DeclPtr> program;
    skipSemis();
    while (!peek().is(TokKind::Eof)) {
      program.push_back(parseDecl());
      skipSemis();
    }
    return ParseResult{std::move(program), env_};
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  InfixEnvironment env_;

  // -- token plumbing --------------------------------------------------------

  const Token& peek(size_t ahead = 0) const {
    size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  const Token& advance() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool at(TokKind k, std::string_view text) const { return peek().is(k, text); }
  bool atKeyword(std::string_view kw) const { return at(TokKind::Keyword, kw); }
  bool atPunct(std::string_view p) const { return at(TokKind::Punct, p); }
  bool atSym(std::string_view s) const { return at(TokKind::SymbolicId, s); }

  bool eat(TokKind k, std::string_view text) {
    if (peek().is(k, text)) { ++pos_; return true; }
    return false;
  }

  Token expect(TokKind k, std::string_view text, std::string_view what) {
    if (!peek().is(k, text))
      fail(Stage::Parse, peek().span,
           "expected " + std::string(what) + ", found '" + describe(peek()) + "'");
    return advance();
  }

  static std::string describe(const Token& t) {
    return t.is(TokKind::Eof) ? "end of input" : t.text;
  }

  void skipSemis() { while (eat(TokKind::Punct, ";")) {} }

  [[noreturn]] void unsupported(Span sp, std::string what) {
    fail(Stage::Parse, sp, what + " is not in the supported subset", /*unsupported=*/true);
  }

  static bool isTyVar(const Token& t) {
    return t.kind == TokKind::Ident && !t.text.empty() && t.text[0] == '\'';
  }

  // -- declarations ----------------------------------------------------------

  DeclPtr parseDecl() {
    const Token& t = peek();
    if (t.is(TokKind::ContractOpen)) return parseContractedFun();
    if (t.kind == TokKind::Keyword) {
      const std::string& kw = t.text;
      if (kw == "val") return parseVal();
      if (kw == "fun") return parseFun(std::nullopt);
      if (kw == "datatype") return parseDatatype();
      if (kw == "type") return parseTypeAbbrev();
      if (kw == "structure") return parseStructure();
      if (kw == "signature") return parseSignature();
      if (kw == "functor") return parseFunctor();
      if (kw == "infix" || kw == "infixr") return parseInfixDirective();
      if (kw == "local") return parseLocal();
      if (kw == "exception" || kw == "open" || kw == "abstype" || kw == "nonfix" ||
          kw == "withtype" || kw == "do" || kw == "while" || kw == "raise" ||
          kw == "handle" || kw == "eqtype")
        unsupported(t.span, "'" + kw + "'");
    }
    fail(Stage::Parse, t.span, "expected a declaration, found '" + describe(t) + "'");
  }

  DeclPtr parseVal() {
    Span start = advance().span;  // val
    if (atKeyword("rec")) {
      advance();
      Token name = expectName("recursive value name");
      expect(TokKind::SymbolicId, "=", "'='");
      ExpPtr body = parseExp();
      if (body->kind != Exp::Kind::Fn)
        fail(Stage::Parse, body->span, "'val rec' requires an fn expression");
      auto d = mkDecl(Decl::Kind::ValRec, join(start, body->span));
      auto pat = mkPat(Pat::Kind::Ident, name.span);
      pat->name = name.text;
      d->valBindings.push_back({pat, body, d->span});
      return d;
    }
    if (isTyVar(peek()) || (atPunct("(") && isTyVar(peek(1))))
      unsupported(peek().span, "explicit type-variable binding on 'val'");
    PatPtr pat = parsePat();
    expect(TokKind::SymbolicId, "=", "'='");
    ExpPtr exp = parseExp();
    if (atKeyword("and")) unsupported(peek().span, "'val ... and ...'");
    auto d = mkDecl(Decl::Kind::Val, join(start, exp->span));
    d->valBindings.push_back({pat, exp, d->span});
    return d;
  }

  Token expectName(std::string_view what) {
    if (peek().kind != TokKind::Ident || isTyVar(peek()) ||
        peek().text.find('.') != std::string::npos)
      fail(Stage::Parse, peek().span, "expected " + std::string(what));
    return advance();
  }

  // A contract block must be immediately followed by the fun declaration it names.
  DeclPtr parseContractedFun() {
    Span open = advance().span;  // (!!
    Contract c;
    c.span = open;
    c.fname = expectName("contracted function name").text;
    while (!atSym("==>")) {
      if (peek().is(TokKind::Eof))
        fail(Stage::Parse, peek().span, "unterminated contract header (missing '==>')");
      c.inputs.push_back(parseContractParam());
    }
    if (c.inputs.empty())
      fail(Stage::Parse, peek().span, "contract needs at least one input binding");
    advance();  // ==>
    c.output = parseContractParam();
    expect(TokKind::Punct, ";", "';' after contract header");
    expect(TokKind::Keyword, "REQUIRES", "'REQUIRES'");
    expect(TokKind::SymbolicId, ":", "':' after REQUIRES");
    c.requires_ = parseExp();
    expect(TokKind::Punct, ";", "';' after the precondition");
    expect(TokKind::Keyword, "ENSURES", "'ENSURES'");
    expect(TokKind::SymbolicId, ":", "':' after ENSURES");
    c.ensures_ = parseExp();
    expect(TokKind::Punct, ";", "';' after the postcondition");
    Token close = expect(TokKind::ContractClose, "!!)", "'!!)'");
    c.span = join(open, close.span);
    validateContractShapes(c);

    if (!atKeyword("fun"))
      fail(Stage::Parse, peek().span,
           "a contract must be placed immediately before the 'fun' declaration it names");
    DeclPtr d = parseFun(c);
    return d;
  }

  // Contract inputs/output: typed or untyped variables and tuples of variables.
  PatPtr parseContractParam() {
    PatPtr p = parseAtomicPat();
    checkContractParam(p);
    return p;
  }

  void checkContractParam(const PatPtr& p) {
    switch (p->kind) {
      case Pat::Kind::Ident:
      case Pat::Kind::Unit:
        return;
      case Pat::Kind::Typed:
        checkContractParam(p->items[0]);
        return;
      case Pat::Kind::Tuple:
        for (auto& el : p->items) checkContractParam(el);
        return;
      default:
        fail(Stage::Parse, p->span,
             "contract bindings must be variables or tuples of variables");
    }
  }

  void collectContractVars(const PatPtr& p, std::vector<std::string>& out) {
    if (p->kind == Pat::Kind::Ident) out.push_back(p->name);
    for (auto& el : p->items) collectContractVars(el, out);
  }

  void validateContractShapes(const Contract& c) {
    std::vector<std::string> vars;
    for (auto& in : c.inputs) collectContractVars(in, vars);
    std::vector<std::string> outVars;
    collectContractVars(c.output, outVars);
    if (outVars.size() != 1)
      fail(Stage::Parse, c.output->span, "contract output must bind exactly one variable");
    vars.push_back(outVars[0]);
    std::set<std::string> seen;
    for (auto& v : vars)
      if (!seen.insert(v).second)
        fail(Stage::Parse, c.span, "contract variable '" + v + "' bound more than once");
  }

  DeclPtr parseFun(std::optional<Contract> contract) {
    Span start = advance().span;  // fun
    auto d = mkDecl(Decl::Kind::Fun, start);
    for (;;) {
      FunBinding fb;
      for (;;) {
        FunClause cl = parseFunClause();
        if (!fb.clauses.empty() && cl.name != fb.clauses.front().name)
          fail(Stage::Parse, cl.span, "clause name '" + cl.name + "' does not match '" +
                                          fb.clauses.front().name + "'");
        if (!fb.clauses.empty() &&
            cl.params.size() != fb.clauses.front().params.size())
          fail(Stage::Parse, cl.span, "clauses of '" + cl.name + "' differ in argument count");
        fb.clauses.push_back(std::move(cl));
        if (!eat(TokKind::SymbolicId, "|")) break;
      }
      fb.name = fb.clauses.front().name;
      d->funBindings.push_back(std::move(fb));
      if (!atKeyword("and")) break;
      advance();
    }
    if (contract) {
      if (contract->fname != d->funBindings.front().name)
        fail(Stage::Parse, contract->span,
             "contract names '" + contract->fname + "' but the declaration defines '" +
                 d->funBindings.front().name + "'");
      d->funBindings.front().contract = std::move(contract);
    }
    d->span = join(start, peek(0).span);
    return d;
  }

  FunClause parseFunClause() {
    FunClause cl;
    Span start = peek().span;
    cl.opMarked = eat(TokKind::Keyword, "op");
    if (peek().kind != TokKind::Ident && peek().kind != TokKind::SymbolicId)
      fail(Stage::Parse, peek().span, "expected function name");
    cl.name = advance().text;
    while (!atSym("=") && !atSym(":")) {
      if (peek().kind == TokKind::Ident && !isTyVar(peek()) && env_.contains(peek().text))
        unsupported(peek().span, "infix-style clause heads (use 'fun op f (x, y) = ...')");
      if (!startsAtomicPat())
        fail(Stage::Parse, peek().span, "expected a parameter pattern");
      cl.params.push_back(parseAtomicPat());
    }
    if (cl.params.empty())
      fail(Stage::Parse, peek().span, "function clause needs at least one parameter");
    if (eat(TokKind::SymbolicId, ":")) cl.retTy = parseTy();
    expect(TokKind::SymbolicId, "=", "'=' in function clause");
    cl.body = parseExp();
    cl.span = join(start, cl.body->span);
    return cl;
  }

  DeclPtr parseDatatype() {
    Span start = advance().span;
    auto d = mkDecl(Decl::Kind::Datatype, start);
    for (;;) {
      DataBinding db;
      db.span = peek().span;
      db.params = parseTyVarSeq();
      db.name = expectName("datatype name").text;
      expect(TokKind::SymbolicId, "=", "'='");
      for (;;) {
        DataConstructor dc;
        Token n = expectName("constructor name");
        dc.name = n.text;
        dc.span = n.span;
        if (eat(TokKind::Keyword, "of")) dc.payload = parseTy();
        db.constructors.push_back(std::move(dc));
        if (!eat(TokKind::SymbolicId, "|")) break;
      }
      d->dataBindings.push_back(std::move(db));
      if (!atKeyword("and")) break;
      advance();
    }
    if (atKeyword("withtype")) unsupported(peek().span, "'withtype'");
    return d;
  }

  DeclPtr parseTypeAbbrev() {
    Span start = advance().span;
    auto d = mkDecl(Decl::Kind::TypeAbbrev, start);
    for (;;) {
      TypeBinding tb;
      tb.span = peek().span;
      tb.params = parseTyVarSeq();
      tb.name = expectName("type name").text;
      expect(TokKind::SymbolicId, "=", "'='");
      tb.body = parseTy();
      d->typeBindings.push_back(std::move(tb));
      if (!atKeyword("and")) break;
      advance();
    }
    return d;
  }

  std::vector<std::string> parseTyVarSeq() {
    std::vector<std::string> params;
    if (isTyVar(peek())) {
      params.push_back(advance().text);
    } else if (atPunct("(") && isTyVar(peek(1))) {
      advance();
      for (;;) {
        if (!isTyVar(peek())) fail(Stage::Parse, peek().span, "expected type variable");
        params.push_back(advance().text);
        if (!eat(TokKind::Punct, ",")) break;
      }
      expect(TokKind::Punct, ")", "')'");
    }
    return params;
  }

  DeclPtr parseStructure() {
    Span start = advance().span;
    auto d = mkDecl(Decl::Kind::Structure, start);
    d->name = expectName("structure name").text;
    if (atSym(":") || atSym(":>")) {
      d->opaque = atSym(":>");
      advance();
      d->ascription = parseSigExp();
    }
    expect(TokKind::SymbolicId, "=", "'='");
    d->strExp = parseStrExp();
    d->span = join(start, d->strExp->span);
    return d;
  }

  StrExpPtr parseStrExp() {
    Span start = peek().span;
    if (atKeyword("struct")) {
      advance();
      auto se = std::make_shared<StrExp>();
      se->kind = StrExp::Kind::Inline;
      se->span = start;
      skipSemis();
      while (!atKeyword("end")) {
        if (peek().is(TokKind::Eof)) fail(Stage::Parse, peek().span, "unterminated 'struct'");
        se->decls.push_back(parseDecl());
        skipSemis();
      }
      se->span = join(start, advance().span);
      return se;
    }
    if (atKeyword("let")) unsupported(peek().span, "'let' structure expressions");
    Token name = expectName("structure or functor name");
    if (atPunct("(")) {
      advance();
      auto se = std::make_shared<StrExp>();
      se->kind = StrExp::Kind::FunctorApp;
      se->name = name.text;
      if (atKeyword("struct") ||
        (peek().kind == TokKind::Ident &&
         (peek(1).is(TokKind::Punct, ")") || peek(1).is(TokKind::Punct, "(")))) {
        se->arg = parseStrExp();
      } else {
        // Derived form: functor argument given as a bare declaration sequence.
        auto inner = std::make_shared<StrExp>();
        inner->kind = StrExp::Kind::Inline;
        inner->span = peek().span;
        skipSemis();
        while (!atPunct(")")) {
          if (peek().is(TokKind::Eof)) fail(Stage::Parse, peek().span, "unterminated functor argument");
          inner->decls.push_back(parseDecl());
          skipSemis();
        }
        se->arg = inner;
      }
      Token close = expect(TokKind::Punct, ")", "')'");
      se->span = join(start, close.span);
      return se;
    }
    auto se = std::make_shared<StrExp>();
    se->kind = StrExp::Kind::Name;
    se->name = name.text;
    se->span = name.span;
    return se;
  }

  DeclPtr parseSignature() {
    Span start = advance().span;
    auto d = mkDecl(Decl::Kind::Signature, start);
    d->name = expectName("signature name").text;
    expect(TokKind::SymbolicId, "=", "'='");
    d->sigExp = parseSigExp();
    d->span = join(start, d->sigExp->span);
    return d;
  }

  SigExpPtr parseSigExp() {
    Span start = peek().span;
    auto se = std::make_shared<SigExp>();
    if (atKeyword("sig")) {
      advance();
      se->kind = SigExp::Kind::Inline;
      skipSemis();
      while (!atKeyword("end")) {
        if (peek().is(TokKind::Eof)) fail(Stage::Parse, peek().span, "unterminated 'sig'");
        se->specs.push_back(parseSigSpec());
        skipSemis();
      }
      se->span = join(start, advance().span);
      return se;
    }
    Token name = expectName("signature name");
    se->kind = SigExp::Kind::Name;
    se->name = name.text;
    se->span = name.span;
    return se;
  }

  SigSpec parseSigSpec() {
    SigSpec spec;
    spec.span = peek().span;
    if (atKeyword("type")) {
      advance();
      spec.params = parseTyVarSeq();
      spec.name = expectName("type name").text;
      if (eat(TokKind::SymbolicId, "=")) {
        spec.kind = SigSpec::Kind::TypeDef;
        spec.ty = parseTy();
      } else {
        spec.kind = SigSpec::Kind::Type;
      }
      return spec;
    }
    if (atKeyword("val")) {
      advance();
      spec.kind = SigSpec::Kind::Val;
      spec.name = expectName("value name").text;
      expect(TokKind::SymbolicId, ":", "':'");
      spec.ty = parseTy();
      return spec;
    }
    if (atKeyword("eqtype") || atKeyword("datatype") || atKeyword("structure") ||
        atKeyword("include") || atKeyword("sharing") || atKeyword("exception"))
      unsupported(peek().span, "'" + peek().text + "' signature specifications");
    fail(Stage::Parse, peek().span, "expected a signature specification");
  }

  DeclPtr parseFunctor() {
    Span start = advance().span;
    auto d = mkDecl(Decl::Kind::Functor, start);
    d->name = expectName("functor name").text;
    expect(TokKind::Punct, "(", "'('");
    if (atKeyword("structure") || atKeyword("type") || atKeyword("val"))
      unsupported(peek().span, "functor parameters given as inline specifications");
    d->paramName = expectName("functor parameter name").text;
    expect(TokKind::SymbolicId, ":", "':'");
    d->paramSig = parseSigExp();
    expect(TokKind::Punct, ")", "')'");
    expect(TokKind::SymbolicId, "=", "'='");
    d->strExp = parseStrExp();
    d->span = join(start, d->strExp->span);
    return d;
  }

  DeclPtr parseInfixDirective() {
    Token kw = advance();
    auto d = mkDecl(Decl::Kind::InfixDirective, kw.span);
    d->infixRight = kw.text == "infixr";
    d->infixPrecedence = 0;  // SML default
    if (peek().kind == TokKind::IntLit) {
      d->infixPrecedence = std::stoi(advance().text);
      if (d->infixPrecedence < 0 || d->infixPrecedence > 9)
        fail(Stage::Parse, kw.span, "infix precedence must be a single digit");
    }
    while (peek().kind == TokKind::Ident || peek().kind == TokKind::SymbolicId) {
      if (isTyVar(peek())) break;
      d->infixIds.push_back(advance().text);
      env_.set(d->infixIds.back(), Fixity{d->infixRight, d->infixPrecedence});
    }
    if (d->infixIds.empty()) fail(Stage::Parse, peek().span, "expected identifiers after infix");
    return d;
  }

  DeclPtr parseLocal() {
    Span start = advance().span;
    auto d = mkDecl(Decl::Kind::Local, start);
    skipSemis();
    while (!atKeyword("in")) {
      if (peek().is(TokKind::Eof)) fail(Stage::Parse, peek().span, "unterminated 'local'");
      d->localDecls.push_back(parseDecl());
      skipSemis();
    }
    advance();  // in
    skipSemis();
    while (!atKeyword("end")) {
      if (peek().is(TokKind::Eof)) fail(Stage::Parse, peek().span, "unterminated 'local'");
      d->bodyDecls.push_back(parseDecl());
      skipSemis();
    }
    d->span = join(start, advance().span);
    return d;
  }

  // -- expressions -----------------------------------------------------------

  ExpPtr parseExp() { return parseOrelse(); }

  ExpPtr parseOrelse() {
    ExpPtr e = parseAndalso();
    while (atKeyword("orelse")) {
      advance();
      ExpPtr rhs = parseAndalso();
      auto n = mkExp(Exp::Kind::Orelse, join(e->span, rhs->span));
      n->items = {e, rhs};
      e = n;
    }
    return e;
  }

  ExpPtr parseAndalso() {
    ExpPtr e = parseTypedLevel();
    while (atKeyword("andalso")) {
      advance();
      ExpPtr rhs = parseTypedLevel();
      auto n = mkExp(Exp::Kind::Andalso, join(e->span, rhs->span));
      n->items = {e, rhs};
      e = n;
    }
    return e;
  }

  ExpPtr parseTypedLevel() {
    if (atKeyword("fn") || atKeyword("case") || atKeyword("if")) return parseClosedExp();
    if (atKeyword("raise") || atKeyword("while")) unsupported(peek().span, "'" + peek().text + "'");
    ExpPtr e = parseInfixExp();
    while (atSym(":")) {
      advance();
      TyExpPtr ty = parseTy();
      auto n = mkExp(Exp::Kind::Typed, join(e->span, ty->span));
      n->items = {e};
      n->ty = ty;
      e = n;
    }
    return e;
  }

  // fn / case / if extend maximally to the right.
  ExpPtr parseClosedExp() {
    Span start = peek().span;
    if (eat(TokKind::Keyword, "fn")) {
      auto e = mkExp(Exp::Kind::Fn, start);
      e->rules = parseMatchRules();
      e->span = join(start, e->rules.back().body->span);
      return e;
    }
    if (eat(TokKind::Keyword, "case")) {
      auto e = mkExp(Exp::Kind::Case, start);
      e->items.push_back(parseExp());
      expect(TokKind::Keyword, "of", "'of'");
      e->rules = parseMatchRules();
      e->span = join(start, e->rules.back().body->span);
      return e;
    }
    advance();  // if
    auto e = mkExp(Exp::Kind::If, start);
    ExpPtr c = parseExp();
    expect(TokKind::Keyword, "then", "'then'");
    ExpPtr t = parseExp();
    expect(TokKind::Keyword, "else", "'else'");
    ExpPtr f = parseExp();
    e->items = {c, t, f};
    e->span = join(start, f->span);
    return e;
  }

  std::vector<MatchRule> parseMatchRules() {
    std::vector<MatchRule> rules;
    for (;;) {
      MatchRule r;
      r.pat = parsePat();
      expect(TokKind::SymbolicId, "=>", "'=>'");
      r.body = parseExp();
      rules.push_back(std::move(r));
      if (!eat(TokKind::SymbolicId, "|")) break;
    }
    return rules;
  }

  struct InfixItem {
    bool isOp = false;
    std::string op;
    Fixity fixity;
    Span opSpan;
    ExpPtr exp;
  };

  bool startsAtomicExp() const {
    const Token& t = peek();
    switch (t.kind) {
      case TokKind::IntLit: case TokKind::RealLit:
      case TokKind::StringLit: case TokKind::CharLit:
        return true;
      case TokKind::Ident:
        return !isTyVar(t);
      case TokKind::Keyword:
        return t.text == "op" || t.text == "let";
      case TokKind::Punct:
        return t.text == "(" || t.text == "[" || t.text == "{";
      case TokKind::SymbolicId:
        return !reservedSymbol(t);  // non-infix symbolic identifiers (e.g. ~)
      default:
        return false;
    }
  }

  ExpPtr parseInfixExp() {
    std::vector<InfixItem> items;
    for (;;) {
      const Token& t = peek();
      // `=` is both reserved and the equality operator; in expression position
      // it acts as an ordinary infix identifier.
      bool infixHere = (t.kind == TokKind::Ident || t.kind == TokKind::SymbolicId) &&
                       !isTyVar(t) && env_.contains(t.text);
      if (infixHere) {
        if (items.empty() || items.back().isOp)
          fail(Stage::Parse, t.span, "infix operator '" + t.text + "' lacks a left operand");
        InfixItem it;
        it.isOp = true;
        it.op = t.text;
        it.fixity = env_.at(t.text);
        it.opSpan = t.span;
        advance();
        items.push_back(std::move(it));
        continue;
      }
      if (t.kind == TokKind::SymbolicId) {
        static const std::set<std::string> reservedSym = {"=", "=>", "->", ":", "|", ":>", "==>"};
        if (reservedSym.count(t.text)) break;
        if (t.text == "#") unsupported(t.span, "record selectors ('#label')");
      }
      if (!startsAtomicExp()) break;
      InfixItem it;
      it.exp = parseAtomicExp();
      items.push_back(std::move(it));
    }
    if (items.empty())
      fail(Stage::Parse, peek().span, "expected an expression, found '" + describe(peek()) + "'");
    if (items.back().isOp)
      fail(Stage::Parse, items.back().opSpan,
           "infix operator '" + items.back().op + "' lacks a right operand");

    // Juxtaposition binds tightest: fold runs of atoms into applications.
    std::vector<InfixItem> folded;
    for (auto& it : items) {
      if (!it.isOp && !folded.empty() && !folded.back().isOp) {
        auto app = mkExp(Exp::Kind::App, join(folded.back().exp->span, it.exp->span));
        app->items = {folded.back().exp, it.exp};
        folded.back().exp = app;
      } else {
        folded.push_back(std::move(it));
      }
    }
    size_t idx = 0;
    ExpPtr e = resolveInfix(folded, idx, 0);
    if (idx != folded.size())
      fail(Stage::Parse, folded[idx].opSpan, "could not resolve infix expression");
    return e;
  }

  // Precedence climbing over the operand/operator alternation.
  ExpPtr resolveInfix(std::vector<InfixItem>& items, size_t& idx, int minPrec) {
    ExpPtr lhs = items[idx++].exp;
    while (idx < items.size() && items[idx].isOp && items[idx].fixity.precedence >= minPrec) {
      InfixItem op = items[idx];
      // Same precedence, mixed associativity is ambiguous in SML.
      if (idx + 2 < items.size() && items[idx + 2].isOp &&
          items[idx + 2].fixity.precedence == op.fixity.precedence &&
          items[idx + 2].fixity.rightAssoc != op.fixity.rightAssoc)
        fail(Stage::Parse, items[idx + 2].opSpan,
             "mixed associativity at equal precedence requires parentheses");
      ++idx;
      int nextMin = op.fixity.precedence + (op.fixity.rightAssoc ? 0 : 1);
      ExpPtr rhs = resolveInfix(items, idx, nextMin);
      auto n = mkExp(Exp::Kind::InfixApp, join(lhs->span, rhs->span));
      n->name = op.op;
      n->items = {lhs, rhs};
      lhs = n;
    }
    return lhs;
  }

  ExpPtr parseAtomicExp() {
    const Token& t = peek();
    Span start = t.span;
    switch (t.kind) {
      case TokKind::IntLit: {
        auto e = mkExp(Exp::Kind::Int, start);
        e->literal = advance().text;
        return e;
      }
      case TokKind::RealLit: {
        auto e = mkExp(Exp::Kind::Real, start);
        e->literal = advance().text;
        return e;
      }
      case TokKind::StringLit: {
        auto e = mkExp(Exp::Kind::String, start);
        e->literal = advance().text;
        return e;
      }
      case TokKind::CharLit: {
        auto e = mkExp(Exp::Kind::Char, start);
        e->literal = advance().text;
        return e;
      }
      default: break;
    }
    if (t.kind == TokKind::Ident ||
        (t.kind == TokKind::SymbolicId && !reservedSymbol(t))) {
      auto e = mkExp(Exp::Kind::Ident, start);
      e->name = advance().text;
      return e;
    }
    if (atKeyword("op")) {
      advance();
      if (peek().kind != TokKind::Ident && peek().kind != TokKind::SymbolicId)
        fail(Stage::Parse, peek().span, "expected identifier after 'op'");
      auto e = mkExp(Exp::Kind::Ident, join(start, peek().span));
      e->name = advance().text;
      e->opMarked = true;
      return e;
    }
    if (atKeyword("let")) return parseLet();
    if (atPunct("(")) return parseParenExp();
    if (atPunct("[")) {
      advance();
      auto e = mkExp(Exp::Kind::List, start);
      if (!atPunct("]")) {
        for (;;) {
          e->items.push_back(parseExp());
          if (!eat(TokKind::Punct, ",")) break;
        }
      }
      Token close = expect(TokKind::Punct, "]", "']'");
      e->span = join(start, close.span);
      return e;
    }
    if (atPunct("{")) {
      advance();
      auto e = mkExp(Exp::Kind::Record, start);
      for (;;) {
        Token lab = expectName("record label");
        expect(TokKind::SymbolicId, "=", "'='");
        e->fields.emplace_back(lab.text, parseExp());
        if (!eat(TokKind::Punct, ",")) break;
      }
      Token close = expect(TokKind::Punct, "}", "'}'");
      e->span = join(start, close.span);
      return e;
    }
    fail(Stage::Parse, t.span, "expected an expression, found '" + describe(t) + "'");
  }

  ExpPtr parseParenExp() {
    Span start = advance().span;  // (
    if (atPunct(")")) {
      Token close = advance();
      return mkExp(Exp::Kind::Unit, join(start, close.span));
    }
    ExpPtr first = parseExp();
    if (atPunct(";")) unsupported(peek().span, "sequence expressions ('(e1; e2)')");
    if (atPunct(",")) {
      auto e = mkExp(Exp::Kind::Tuple, start);
      e->items.push_back(first);
      while (eat(TokKind::Punct, ",")) e->items.push_back(parseExp());
      Token close = expect(TokKind::Punct, ")", "')'");
      e->span = join(start, close.span);
      return e;
    }
    Token close = expect(TokKind::Punct, ")", "')'");
    first->span = join(start, close.span);
    return first;
  }

  ExpPtr parseLet() {
    Span start = advance().span;  // let
    auto e = mkExp(Exp::Kind::Let, start);
    skipSemis();
    while (!atKeyword("in")) {
      if (peek().is(TokKind::Eof)) fail(Stage::Parse, peek().span, "unterminated 'let'");
      e->decls.push_back(parseDecl());
      skipSemis();
    }
    advance();  // in
    ExpPtr body = parseExp();
    if (atPunct(";")) unsupported(peek().span, "sequence expressions in 'let' bodies");
    Token close = expect(TokKind::Keyword, "end", "'end'");
    e->items = {body};
    e->span = join(start, close.span);
    return e;
  }

  // -- patterns ----------------------------------------------------------------

  PatPtr parsePat() {
    PatPtr p = parseInfixPat();
    for (;;) {
      if (atSym(":")) {
        advance();
        TyExpPtr ty = parseTy();
        auto n = mkPat(Pat::Kind::Typed, join(p->span, ty->span));
        n->items = {p};
        n->ty = ty;
        p = n;
        continue;
      }
      if (atKeyword("as")) {
        advance();
        std::string var;
        TyExpPtr ty;
        PatPtr base = p;
        if (base->kind == Pat::Kind::Typed && base->items[0]->kind == Pat::Kind::Ident) {
          var = base->items[0]->name;
          ty = base->ty;
        } else if (base->kind == Pat::Kind::Ident) {
          var = base->name;
        } else {
          fail(Stage::Parse, p->span, "left side of 'as' must be a variable");
        }
        PatPtr inner = parsePat();
        auto n = mkPat(Pat::Kind::Layered, join(p->span, inner->span));
        n->name = var;
        n->ty = ty;
        n->items = {inner};
        p = n;
        continue;
      }
      break;
    }
    return p;
  }

  struct PatItem {
    bool isOp = false;
    std::string op;
    Fixity fixity;
    Span opSpan;
    PatPtr pat;
  };

  bool startsAtomicPat() const {
    const Token& t = peek();
    switch (t.kind) {
      case TokKind::IntLit: case TokKind::StringLit: case TokKind::CharLit:
        return true;
      case TokKind::RealLit:
        return true;  // rejected with a better message in parseAtomicPat
      case TokKind::Ident:
        return !isTyVar(t);
      case TokKind::Keyword:
        return t.text == "op";
      case TokKind::Punct:
        return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "_";
      default:
        return false;
    }
  }

  static bool reservedSymbol(const Token& t) {
    static const std::set<std::string> reserved = {"=", "=>", "->", ":", "|", ":>", "==>", "#"};
    return t.kind == TokKind::SymbolicId && reserved.count(t.text) != 0;
  }

  PatPtr parseInfixPat() {
    std::vector<PatItem> items;
    for (;;) {
      const Token& t = peek();
      bool infixHere = (t.kind == TokKind::Ident || t.kind == TokKind::SymbolicId) &&
                       !isTyVar(t) && !reservedSymbol(t) && env_.contains(t.text);
      if (infixHere) {
        if (items.empty() || items.back().isOp) break;
        PatItem it;
        it.isOp = true;
        it.op = t.text;
        it.fixity = env_.at(t.text);
        it.opSpan = t.span;
        advance();
        items.push_back(std::move(it));
        continue;
      }
      if (!startsAtomicPat()) break;
      PatItem it;
      it.pat = parseAtomicPat();
      items.push_back(std::move(it));
    }
    if (items.empty())
      fail(Stage::Parse, peek().span, "expected a pattern, found '" + describe(peek()) + "'");
    if (items.back().isOp)
      fail(Stage::Parse, items.back().opSpan, "infix pattern lacks a right operand");

    // Constructor application: adjacent atoms, the first being an identifier.
    std::vector<PatItem> folded;
    for (auto& it : items) {
      if (!it.isOp && !folded.empty() && !folded.back().isOp) {
        PatPtr head = folded.back().pat;
        if (head->kind != Pat::Kind::Ident)
          fail(Stage::Parse, it.pat->span, "only constructors can be applied in patterns");
        auto app = mkPat(Pat::Kind::ConApp, join(head->span, it.pat->span));
        app->name = head->name;
        app->opMarked = head->opMarked;
        app->items = {it.pat};
        folded.back().pat = app;
      } else {
        folded.push_back(std::move(it));
      }
    }
    size_t idx = 0;
    PatPtr p = resolveInfixPat(folded, idx, 0);
    if (idx != folded.size())
      fail(Stage::Parse, folded[idx].opSpan, "could not resolve infix pattern");
    return p;
  }

  PatPtr resolveInfixPat(std::vector<PatItem>& items, size_t& idx, int minPrec) {
    PatPtr lhs = items[idx++].pat;
    while (idx < items.size() && items[idx].isOp && items[idx].fixity.precedence >= minPrec) {
      PatItem op = items[idx++];
      int nextMin = op.fixity.precedence + (op.fixity.rightAssoc ? 0 : 1);
      PatPtr rhs = resolveInfixPat(items, idx, nextMin);
      auto n = mkPat(Pat::Kind::InfixApp, join(lhs->span, rhs->span));
      n->name = op.op;
      n->items = {lhs, rhs};
      lhs = n;
    }
    return lhs;
  }

  PatPtr parseAtomicPat() {
    const Token& t = peek();
    Span start = t.span;
    if (t.kind == TokKind::RealLit)
      fail(Stage::Parse, t.span, "real constants are not valid patterns");
    if (t.kind == TokKind::IntLit || t.kind == TokKind::StringLit || t.kind == TokKind::CharLit) {
      auto p = mkPat(t.kind == TokKind::IntLit    ? Pat::Kind::Int
                     : t.kind == TokKind::StringLit ? Pat::Kind::String
                                                    : Pat::Kind::Char,
                     start);
      p->literal = advance().text;
      return p;
    }
    if (atPunct("_")) {
      advance();
      return mkPat(Pat::Kind::Wildcard, start);
    }
    if (t.kind == TokKind::Ident && !isTyVar(t)) {
      auto p = mkPat(Pat::Kind::Ident, start);
      p->name = advance().text;
      return p;
    }
    if (atKeyword("op")) {
      advance();
      if (peek().kind != TokKind::Ident && peek().kind != TokKind::SymbolicId)
        fail(Stage::Parse, peek().span, "expected identifier after 'op'");
      auto p = mkPat(Pat::Kind::Ident, join(start, peek().span));
      p->name = advance().text;
      p->opMarked = true;
      return p;
    }
    if (atPunct("(")) {
      advance();
      if (atPunct(")")) {
        Token close = advance();
        return mkPat(Pat::Kind::Unit, join(start, close.span));
      }
      PatPtr first = parsePat();
      if (atPunct(",")) {
        auto p = mkPat(Pat::Kind::Tuple, start);
        p->items.push_back(first);
        while (eat(TokKind::Punct, ",")) p->items.push_back(parsePat());
        Token close = expect(TokKind::Punct, ")", "')'");
        p->span = join(start, close.span);
        return p;
      }
      Token close = expect(TokKind::Punct, ")", "')'");
      first->span = join(start, close.span);
      return first;
    }
    if (atPunct("[")) {
      advance();
      auto p = mkPat(Pat::Kind::List, start);
      if (!atPunct("]")) {
        for (;;) {
          p->items.push_back(parsePat());
          if (!eat(TokKind::Punct, ",")) break;
        }
      }
      Token close = expect(TokKind::Punct, "]", "']'");
      p->span = join(start, close.span);
      return p;
    }
    if (atPunct("{")) return parseRecordPat();
    fail(Stage::Parse, t.span, "expected a pattern, found '" + describe(t) + "'");
  }

  PatPtr parseRecordPat() {
    Span start = advance().span;  // {
    auto p = mkPat(Pat::Kind::Record, start);
    for (;;) {
      if (atPunct("...")) {
        advance();
        p->ellipsis = true;
        break;  // ellipsis must be the final row
      }
      Token lab = expectName("record label");
      if (eat(TokKind::SymbolicId, "=")) {
        p->fields.emplace_back(lab.text, parsePat());
      } else {
        // Shorthand row: label[:ty][as pat] binds a variable of the same name.
        auto var = mkPat(Pat::Kind::Ident, lab.span);
        var->name = lab.text;
        PatPtr row = var;
        if (eat(TokKind::SymbolicId, ":")) {
          TyExpPtr ty = parseTy();
          auto typed = mkPat(Pat::Kind::Typed, join(lab.span, ty->span));
          typed->items = {row};
          typed->ty = ty;
          row = typed;
        }
        if (atKeyword("as")) {
          advance();
          PatPtr inner = parsePat();
          auto lay = mkPat(Pat::Kind::Layered, join(lab.span, inner->span));
          lay->name = lab.text;
          lay->ty = row->kind == Pat::Kind::Typed ? row->ty : nullptr;
          lay->items = {inner};
          row = lay;
        }
        p->fields.emplace_back(lab.text, row);
      }
      if (!eat(TokKind::Punct, ",")) break;
    }
    Token close = expect(TokKind::Punct, "}", "'}'");
    p->span = join(start, close.span);
    return p;
  }

  // -- types -------------------------------------------------------------------

  TyExpPtr parseTy() {
    TyExpPtr t = parseTupleTy();
    if (atSym("->")) {
      advance();
      TyExpPtr rhs = parseTy();
      auto n = mkTyExp(TyExp::Kind::Arrow, join(t->span, rhs->span));
      n->args = {t, rhs};
      return n;
    }
    return t;
  }

  TyExpPtr parseTupleTy() {
    TyExpPtr first = parseAppTy();
    if (!atSym("*")) return first;
    auto n = mkTyExp(TyExp::Kind::Tuple, first->span);
    n->args.push_back(first);
    while (eat(TokKind::SymbolicId, "*")) n->args.push_back(parseAppTy());
    n->span = join(first->span, n->args.back()->span);
    return n;
  }

  TyExpPtr parseAppTy() {
    TyExpPtr t;
    Span start = peek().span;
    if (atPunct("(")) {
      advance();
      std::vector<TyExpPtr> args;
      args.push_back(parseTy());
      while (eat(TokKind::Punct, ",")) args.push_back(parseTy());
      expect(TokKind::Punct, ")", "')'");
      if (args.size() > 1) {
        Token tycon = expectName("type constructor after argument list");
        t = mkTyExp(TyExp::Kind::Con, join(start, tycon.span));
        t->name = tycon.text;
        t->args = std::move(args);
      } else {
        t = args[0];
      }
    } else if (isTyVar(peek())) {
      t = mkTyExp(TyExp::Kind::Var, start);
      t->name = advance().text;
    } else if (atPunct("{")) {
      advance();
      t = mkTyExp(TyExp::Kind::Record, start);
      for (;;) {
        Token lab = expectName("record label");
        expect(TokKind::SymbolicId, ":", "':'");
        t->fields.emplace_back(lab.text, parseTy());
        if (!eat(TokKind::Punct, ",")) break;
      }
      Token close = expect(TokKind::Punct, "}", "'}'");
      t->span = join(start, close.span);
    } else {
      Token name = expectName("type");
      t = mkTyExp(TyExp::Kind::Con, name.span);
      t->name = name.text;
    }
    // Postfix type application: int list list
    while (peek().kind == TokKind::Ident && !isTyVar(peek()) &&
           peek().kind != TokKind::Keyword) {
      Token tycon = advance();
      auto n = mkTyExp(TyExp::Kind::Con, join(t->span, tycon.span));
      n->name = tycon.text;
      n->args = {t};
      t = n;
    }
    return t;
  }
};

inline ParseResult parse(std::vector<Token> tokens) {
  return Parser(std::move(tokens)).run();
}

inline ParseResult parseText(std::string_view source) {
  return Parser(tokenize(source)).run();
}

}  // namespace sml2coq
