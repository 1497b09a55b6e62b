#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sml2coq/diagnostics.hpp"

namespace sml2coq {

struct GTerm;
struct GPattern;
struct GSentence;
using GTermPtr = std::shared_ptr<GTerm>;
using GPatternPtr = std::shared_ptr<GPattern>;
using GSentencePtr = std::shared_ptr<GSentence>;

// ---------------------------------------------------------------------------
// Patterns

struct GPattern {
  enum class Kind {
    Wildcard, Var,     // Var covers variables and nullary constructors
    ConApp,            // name + argument patterns
    IntLit, StringLit, CharLit,
    Unit,              // tt
    Tuple, List,
    InfixApp,          // p1 op p2 (::)
    Record,            // {| field := p; ... |}
    Alias,             // p as name
  };
  Kind kind = Kind::Wildcard;
  std::string name;    // Var / ConApp / InfixApp operator / Alias variable
  long long intVal = 0;
  std::string text;    // String/Char literal content (decoded)
  std::vector<GPatternPtr> items;
  std::vector<std::pair<std::string, GPatternPtr>> fields;
};

inline GPatternPtr gpat(GPattern::Kind k) {
  auto p = std::make_shared<GPattern>();
  p->kind = k;
  return p;
}

// ---------------------------------------------------------------------------
// Terms

struct GBinder {
  enum class Style { Paren, Curly, Generalized };  // (x: T) {x: T} `(x: T)
  Style style = Style::Paren;
  std::string name;
  GTermPtr type;  // null: bare binder name (forall x)
};

struct GBranch {
  GPatternPtr pat;
  GTermPtr body;
};

struct GTerm {
  enum class Kind {
    Ident,          // possibly qualified
    Sort,           // Type
    IntLit, RealLit, StringLit, CharLit, UnitLit,
    Tuple, ListLit,
    App,            // items[0] applied to items[1..]
    ExplicitApp,    // @name items...
    Arrow,          // items[0] -> items[1]; also Prop implication
    ProductType,    // (t1 * ... * tn)%type
    Fun,            // fun binders => items[0]
    Let,            // let name := items[0] in items[1]
    Match,          // items[0] scrutinee; branches; exhaustive
    If,             // items[0..2]
    RecordLit,      // {| f := t; ... |}
    Annot,          // (items[0] : items[1])
    PropForall,     // forall binders, items[0]
    PropExists,     // exists binders, items[0]
    PropAnd, PropOr, PropEq,   // items[0], items[1]
    BoolAnd, BoolOr,           // items[0], items[1]
    InfixApp,       // items[0] name items[1]
    ScopeAnnot,     // (items[0])%name
    Paren,          // (items[0])
  };
  Kind kind = Kind::Ident;
  std::string name;      // Ident / ExplicitApp / Let / InfixApp op / ScopeAnnot key
  long long intVal = 0;
  std::string text;      // Real literal text; String/Char content (decoded)
  std::vector<GTermPtr> items;
  std::vector<std::pair<std::string, GTermPtr>> fields;  // RecordLit
  std::vector<GBinder> binders;                          // Fun / PropForall / PropExists
  std::vector<GBranch> branches;                         // Match
  bool exhaustive = true;                                // Match
};

inline GTermPtr gterm(GTerm::Kind k) {
  auto t = std::make_shared<GTerm>();
  t->kind = k;
  return t;
}

inline GTermPtr gident(std::string name) {
  auto t = gterm(GTerm::Kind::Ident);
  t->name = std::move(name);
  return t;
}

inline GTermPtr gparen(GTermPtr inner) {
  auto t = gterm(GTerm::Kind::Paren);
  t->items = {std::move(inner)};
  return t;
}

// ---------------------------------------------------------------------------
// Sentences

struct GClause {
  std::vector<GPatternPtr> pats;
  GTermPtr body;  // an Ident "_" body is an unsolved-obligation hole
};

struct GEquationsFunc {
  std::string name;
  std::vector<GBinder> binders;  // value binders, then the optional {H: ...}
  GTermPtr returnType;
  std::vector<GClause> clauses;
};

struct GConstructor {
  std::string name;
  GTermPtr type;  // null: bare enumeration constructor
};

struct GInductive {
  std::string name;
  std::vector<GBinder> params;  // implicit {_a : Type}
  std::vector<GConstructor> ctors;
};

struct GModuleApp {
  std::string functorName;
  std::string argName;
};

struct GSentence {
  enum class Kind {
    RequireImport,     // name; fromEquations flag
    GeneralizableAll,
    Comment,           // (* text *)
    Definition,        // name, binders, returnType?, body
    Equations,         // funcs joined by `with`
    Inductive,         // datatypes joined by `with`
    RecordDecl,        // name, fields in declaration order
    Theorem,           // name, statement, admitted
    Axiom,             // name, statement, local
    Notation,          // patternText, body, leftAssoc, level
    Module,            // body, or := binding/application
    ModuleType,        // body, or := alias
    Parameter,         // name, type
  };
  Kind kind = Kind::Definition;
  std::string name;
  std::string text;                       // Comment / Notation pattern text
  bool fromEquations = false;             // RequireImport
  std::vector<GBinder> binders;           // Definition
  GTermPtr returnType;                    // Definition
  GTermPtr body;                          // Definition body / Theorem statement /
                                          // Axiom statement / Notation body / Parameter type
  std::vector<GEquationsFunc> funcs;      // Equations
  std::vector<GInductive> datatypes;      // Inductive
  std::vector<std::pair<std::string, GTermPtr>> recordFields;  // RecordDecl
  bool admitted = false;                  // Theorem
  bool local = false;                     // Axiom
  bool leftAssoc = true;                  // Notation
  int level = 0;                          // Notation
  // Module / ModuleType
  std::optional<std::pair<std::string, std::string>> moduleParam;  // (name, sig)
  std::optional<std::string> ascription;                           // <: SIG
  std::vector<GSentencePtr> moduleBody;
  std::optional<GModuleApp> moduleApp;    // Module S := !F A.
  std::optional<std::string> moduleAlias; // Module S := T. / Module Type A := B.
};

inline GSentencePtr gsentence(GSentence::Kind k) {
  auto s = std::make_shared<GSentence>();
  s->kind = k;
  return s;
}

// ---------------------------------------------------------------------------
// Fresh names

class FreshNamer {
 public:
  enum class Kind { RecordType, ModuleLift, TyVar, LambdaArg };

  std::string fresh(Kind k) {
    int n = ++counters_[k];
    switch (k) {
      case Kind::RecordType: return "rid_" + std::to_string(n);
      case Kind::ModuleLift: return "mid_" + std::to_string(n);
      case Kind::TyVar: return "_'" + std::to_string(tyvarBase_ + n);
      case Kind::LambdaArg: return "_x" + std::to_string(n);
    }
    return "?";
  }

  // The tyvar counter continues the elaborator's numbering.
  void seedTyVars(int counter) { tyvarBase_ = counter; }

 private:
  std::map<Kind, int> counters_;
  int tyvarBase_ = 0;
};

inline std::string freshName(FreshNamer& namer, FreshNamer::Kind kind) {
  return namer.fresh(kind);
}

// ---------------------------------------------------------------------------
// Well-formedness

// Field names are prefixed with their record's name; the registry recovers the
// full field set from any one field.
struct RecordRegistry {
  std::map<std::string, std::vector<std::string>> recordFields;   // rid -> fields
  std::map<std::string, std::string> fieldOwner;                  // field -> rid

  void add(const GSentence& rec) {
    std::vector<std::string> fields;
    for (auto& [f, t] : rec.recordFields) {
      fields.push_back(f);
      fieldOwner[f] = rec.name;
    }
    recordFields[rec.name] = std::move(fields);
  }
};

namespace wf_detail {

inline void checkDistinct(const std::vector<GBinder>& binders, const std::string& where,
                          std::vector<Diag>& out) {
  std::set<std::string> seen;
  for (auto& b : binders) {
    if (b.name == "_") continue;
    if (!seen.insert(b.name).second)
      out.push_back(Diag{Stage::Translate, Span{}, "duplicate binder '" + b.name + "' in " + where});
  }
}

inline bool isWildcard(const GPattern& p) { return p.kind == GPattern::Kind::Wildcard; }

inline void checkRecordFields(const std::vector<std::string>& listed, const RecordRegistry* reg,
                              const std::string& where, std::vector<Diag>& out) {
  if (!reg || listed.empty()) return;
  auto owner = reg->fieldOwner.find(listed.front());
  if (owner == reg->fieldOwner.end()) return;  // record declared elsewhere
  auto decl = reg->recordFields.find(owner->second);
  if (decl == reg->recordFields.end()) return;
  std::set<std::string> have(listed.begin(), listed.end());
  for (auto& f : decl->second)
    if (!have.count(f))
      out.push_back(Diag{Stage::Translate, Span{},
                         "incomplete record " + where + ": missing field '" + f + "'"});
}

inline void checkPattern(const GPattern& p, const RecordRegistry* reg, std::vector<Diag>& out) {
  if (p.kind == GPattern::Kind::Record) {
    std::vector<std::string> listed;
    for (auto& [f, sub] : p.fields) listed.push_back(f);
    checkRecordFields(listed, reg, "pattern", out);
  }
  for (auto& sub : p.items) checkPattern(*sub, reg, out);
  for (auto& [f, sub] : p.fields) checkPattern(*sub, reg, out);
}

inline void checkTerm(const GTerm& t, const RecordRegistry* reg, std::vector<Diag>& out) {
  if (t.kind == GTerm::Kind::Match) {
    if (!t.exhaustive) {
      bool wildTail = !t.branches.empty() && isWildcard(*t.branches.back().pat);
      if (!wildTail)
        out.push_back(Diag{Stage::Translate, Span{},
                           "non-exhaustive match lacks a trailing wildcard branch"});
    }
    for (auto& br : t.branches) {
      checkPattern(*br.pat, reg, out);
      checkTerm(*br.body, reg, out);
    }
  }
  if (t.kind == GTerm::Kind::RecordLit) {
    std::vector<std::string> listed;
    for (auto& [f, sub] : t.fields) listed.push_back(f);
    checkRecordFields(listed, reg, "literal", out);
  }
  for (auto& sub : t.items) checkTerm(*sub, reg, out);
  for (auto& [f, sub] : t.fields) checkTerm(*sub, reg, out);
  for (auto& br : t.branches)
    if (t.kind != GTerm::Kind::Match) checkTerm(*br.body, reg, out);
}

}  // namespace wf_detail

// Diagnostics are empty iff binder names are distinct, match flags are
// consistent with branch shapes, and record literals/patterns list every
// declared field. Notation reference checking needs program context and lives
// in wellFormedProgram.
inline std::vector<Diag> wellFormed(const GSentence& s, const RecordRegistry* reg = nullptr) {
  using K = GSentence::Kind;
  std::vector<Diag> out;
  switch (s.kind) {
    case K::Definition:
      wf_detail::checkDistinct(s.binders, "Definition " + s.name, out);
      if (s.body) wf_detail::checkTerm(*s.body, reg, out);
      break;
    case K::Equations:
      for (auto& f : s.funcs) {
        wf_detail::checkDistinct(f.binders, "Equations " + f.name, out);
        if (f.clauses.empty())
          out.push_back(Diag{Stage::Translate, Span{}, "Equations " + f.name + " has no clauses"});
        for (auto& cl : f.clauses) {
          for (auto& p : cl.pats) wf_detail::checkPattern(*p, reg, out);
          wf_detail::checkTerm(*cl.body, reg, out);
        }
      }
      break;
    case K::Theorem:
    case K::Axiom:
      if (s.body) wf_detail::checkTerm(*s.body, reg, out);
      break;
    case K::Inductive:
      for (auto& d : s.datatypes) wf_detail::checkDistinct(d.params, "Inductive " + d.name, out);
      break;
    case K::Module:
    case K::ModuleType:
      for (auto& inner : s.moduleBody)
        for (auto& d : wellFormed(*inner, reg)) out.push_back(d);
      break;
    default:
      break;
  }
  return out;
}

// Program-level pass: builds the record registry as declarations appear and
// verifies notations mention already-defined names.
inline std::vector<Diag> wellFormedProgram(const std::vector<GSentencePtr>& sentences) {
  std::vector<Diag> out;
  RecordRegistry reg;
  std::set<std::string> defined = {"cons", "app", "eq", "Z", "string", "bool", "unit",
                                   "list", "option", "float", "ascii", "true", "false",
                                   "tt", "None", "Some", "NONE", "SOME"};
  std::function<void(const std::vector<GSentencePtr>&)> walk =
      [&](const std::vector<GSentencePtr>& body) {
        for (auto& s : body) {
          if (s->kind == GSentence::Kind::RecordDecl) {
            reg.add(*s);
            defined.insert(s->name);
            for (auto& [f, t] : s->recordFields) defined.insert(f);
          }
          for (auto& d : wellFormed(*s, &reg)) out.push_back(d);
          switch (s->kind) {
            case GSentence::Kind::Definition:
            case GSentence::Kind::Parameter:
            case GSentence::Kind::Axiom:
            case GSentence::Kind::Theorem:
              defined.insert(s->name);
              break;
            case GSentence::Kind::Equations:
              for (auto& f : s->funcs) defined.insert(f.name);
              break;
            case GSentence::Kind::Inductive:
              for (auto& d : s->datatypes) {
                defined.insert(d.name);
                for (auto& c : d.ctors) defined.insert(c.name);
              }
              break;
            case GSentence::Kind::Notation: {
              // The notation body's head identifier must already be defined.
              const GTerm* t = s->body.get();
              while (t && (t->kind == GTerm::Kind::Paren || t->kind == GTerm::Kind::App))
                t = t->items.empty() ? nullptr : t->items[0].get();
              if (t && t->kind == GTerm::Kind::Ident && !defined.count(t->name))
                out.push_back(Diag{Stage::Translate, Span{},
                                   "notation references undefined name '" + t->name + "'"});
              break;
            }
            case GSentence::Kind::Module:
            case GSentence::Kind::ModuleType:
              defined.insert(s->name);
              walk(s->moduleBody);
              break;
            default:
              break;
          }
        }
      };
  walk(sentences);
  return out;
}

}  // namespace sml2coq
