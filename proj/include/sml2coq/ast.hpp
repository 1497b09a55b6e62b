#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sml2coq/diagnostics.hpp"

namespace sml2coq {

struct Exp;
struct Pat;
struct TyExp;
struct Decl;

using ExpPtr = std::shared_ptr<Exp>;
using PatPtr = std::shared_ptr<Pat>;
using TyExpPtr = std::shared_ptr<TyExp>;
using DeclPtr = std::shared_ptr<Decl>;

// ---------------------------------------------------------------------------
// Type expressions (source-level types, pre-elaboration)

struct TyExp {
  enum class Kind { Var, Con, Tuple, Arrow, Record };
  Kind kind;
  Span span;
  std::string name;                 // Var: 'a (with quote); Con: possibly qualified tycon
  std::vector<TyExpPtr> args;       // Con arguments; Tuple members; Arrow [from, to]
  std::vector<std::pair<std::string, TyExpPtr>> fields;  // Record rows, source order
};

// ---------------------------------------------------------------------------
// Patterns

struct Pat {
  enum class Kind {
    Wildcard, Ident,       // Ident covers variables and nullary constructors;
                           // elaboration resolves which.
    Int, String, Char,
    Unit, Tuple, List, Record,
    ConApp,                // constructor applied to an atomic pattern
    InfixApp,              // p1 op p2 (e.g. ::)
    Typed,                 // p : ty
    Layered,               // x [: ty] as p
  };
  Kind kind;
  Span span;
  std::string name;        // Ident / ConApp constructor / InfixApp operator / Layered variable
  bool opMarked = false;
  std::string literal;     // Int/String/Char: source text
  std::vector<PatPtr> items;  // Tuple/List members; ConApp [arg]; InfixApp [lhs, rhs];
                              // Typed [pat]; Layered [pat]
  std::vector<std::pair<std::string, PatPtr>> fields;  // Record rows, source order
  bool ellipsis = false;   // Record only
  TyExpPtr ty;             // Typed / Layered annotation
};

// ---------------------------------------------------------------------------
// Expressions

struct MatchRule {
  PatPtr pat;
  ExpPtr body;
};

struct Exp {
  enum class Kind {
    Ident,                 // variable or constructor; resolved at elaboration
    Int, Real, String, Char,
    Unit, Tuple, List, Record,
    App,                   // [fn, arg]
    InfixApp,              // [lhs, rhs], name = operator
    Fn,                    // rules
    Case,                  // [scrutinee] + rules
    If,                    // [cond, then, else]
    Andalso, Orelse,       // [lhs, rhs]
    Let,                   // decls + [body]
    Typed,                 // [exp], ty
  };
  Kind kind;
  Span span;
  std::string name;        // Ident (possibly qualified) / InfixApp operator
  bool opMarked = false;   // Ident prefixed with `op`
  std::string literal;     // Int/Real/String/Char source text
  std::vector<ExpPtr> items;
  std::vector<std::pair<std::string, ExpPtr>> fields;  // Record rows, source order
  std::vector<MatchRule> rules;                        // Fn / Case
  std::vector<DeclPtr> decls;                          // Let
  TyExpPtr ty;                                         // Typed
};

// ---------------------------------------------------------------------------
// Declarations

struct Contract {
  std::string fname;
  Span span;
  std::vector<PatPtr> inputs;  // one per curried group
  PatPtr output;               // binds exactly one variable
  ExpPtr requires_;
  ExpPtr ensures_;
};

struct FunClause {
  std::string name;
  bool opMarked = false;
  std::vector<PatPtr> params;       // curried atomic patterns
  std::optional<TyExpPtr> retTy;
  ExpPtr body;
  Span span;
};

struct FunBinding {                 // one function of an `and` group
  std::string name;
  std::vector<FunClause> clauses;
  std::optional<Contract> contract;
};

struct ValBinding {
  PatPtr pat;
  ExpPtr exp;
  Span span;
};

struct DataConstructor {
  std::string name;
  TyExpPtr payload;  // null for nullary
  Span span;
};

struct DataBinding {
  std::vector<std::string> params;  // type variables with quotes, e.g. 'a
  std::string name;
  std::vector<DataConstructor> constructors;
  Span span;
};

struct TypeBinding {
  std::vector<std::string> params;
  std::string name;
  TyExpPtr body;
  Span span;
};

// Signature body items.
struct SigSpec {
  enum class Kind { Type, TypeDef, Val };
  Kind kind;
  Span span;
  std::vector<std::string> params;  // Type/TypeDef
  std::string name;
  TyExpPtr ty;                      // TypeDef body / Val type
};

struct SigExp {
  enum class Kind { Name, Inline };
  Kind kind;
  Span span;
  std::string name;            // Name
  std::vector<SigSpec> specs;  // Inline (sig ... end)
};
using SigExpPtr = std::shared_ptr<SigExp>;

struct StrExp {
  enum class Kind { Name, Inline, FunctorApp };
  Kind kind;
  Span span;
  std::string name;                // Name: structure id; FunctorApp: functor id
  std::vector<DeclPtr> decls;      // Inline (struct ... end)
  std::shared_ptr<StrExp> arg;     // FunctorApp argument
};
using StrExpPtr = std::shared_ptr<StrExp>;

struct Decl {
  enum class Kind {
    Val,        // valBindings (single binding per `val`; no `and` support)
    ValRec,     // one binding, exp is Fn
    Fun,        // funBindings (`and` group)
    Datatype,   // dataBindings (`and` group)
    TypeAbbrev, // typeBindings
    Structure,  // name, optional ascription, strExp
    Signature,  // name, sigExp
    Functor,    // name, param name, param sig, body strExp
    InfixDirective,  // text recorded; also applied to the parse-time env
    Local,      // localDecls in bodyDecls
  };
  Kind kind;
  Span span;

  std::vector<ValBinding> valBindings;
  std::vector<FunBinding> funBindings;
  std::vector<DataBinding> dataBindings;
  std::vector<TypeBinding> typeBindings;

  std::string name;                     // Structure/Signature/Functor
  std::optional<std::string> paramName; // Functor
  SigExpPtr paramSig;                   // Functor
  SigExpPtr ascription;                 // Structure: constraint, if any
  bool opaque = false;                  // `:>` vs `:`
  StrExpPtr strExp;                     // Structure / Functor body
  SigExpPtr sigExp;                     // Signature

  // InfixDirective
  bool infixRight = false;
  int infixPrecedence = 0;
  std::vector<std::string> infixIds;

  std::vector<DeclPtr> localDecls, bodyDecls;  // Local
};

// ---------------------------------------------------------------------------

struct Fixity {
  bool rightAssoc = false;
  int precedence = 0;
};

// Identifier -> fixity; later `infix` directives overwrite earlier ones.
struct InfixEnvironment {
  std::map<std::string, Fixity> entries;

  bool contains(const std::string& id) const { return entries.count(id) != 0; }
  Fixity at(const std::string& id) const { return entries.at(id); }
  void set(const std::string& id, Fixity f) { entries[id] = f; }

  static InfixEnvironment initial() {
    InfixEnvironment env;
    for (const char* id : {"*", "/", "div", "mod"}) env.set(id, {false, 7});
    for (const char* id : {"+", "-", "^"}) env.set(id, {false, 6});
    for (const char* id : {"::", "@"}) env.set(id, {true, 5});
    for (const char* id : {"=", "<>", ">", ">=", "<", "<="}) env.set(id, {false, 4});
    env.set("o", {false, 3});
    return env;
  }
};

// Helpers -------------------------------------------------------------------

inline ExpPtr mkExp(Exp::Kind k, Span sp) {
  auto e = std::make_shared<Exp>();
  e->kind = k;
  e->span = sp;
  return e;
}

inline PatPtr mkPat(Pat::Kind k, Span sp) {
  auto p = std::make_shared<Pat>();
  p->kind = k;
  p->span = sp;
  return p;
}

inline TyExpPtr mkTyExp(TyExp::Kind k, Span sp) {
  auto t = std::make_shared<TyExp>();
  t->kind = k;
  t->span = sp;
  return t;
}

inline DeclPtr mkDecl(Decl::Kind k, Span sp) {
  auto d = std::make_shared<Decl>();
  d->kind = k;
  d->span = sp;
  return d;
}

}  // namespace sml2coq
