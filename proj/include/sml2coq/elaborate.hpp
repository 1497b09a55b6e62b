#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "sml2coq/ast.hpp"
#include "sml2coq/parser.hpp"
#include "sml2coq/pattern.hpp"
#include "sml2coq/types.hpp"

namespace sml2coq {

// ---------------------------------------------------------------------------
// Environments

struct ValEntry {
  TypeScheme scheme;
  IdInfo info;  // sort + constructor identity
};

struct TyconEntry {
  enum class Kind { Int, Real, String, Char, Bool, Unit, List, Option, Data, Abbrev };
  Kind kind = Kind::Int;
  int arity = 0;
  int uid = 0;
  std::string displayName;
  std::vector<std::string> paramKeys;  // Data/Abbrev
  SemType body;                        // Abbrev
  bool eqAttr = false;                 // Data
};

struct Env;
struct FunctorEntry {
  std::string paramName;
  SigExpPtr paramSig;  // resolved to its inline form (stable AST node)
  StrExpPtr body;
  std::shared_ptr<Env> closure;  // environment at functor declaration
};

struct Env {
  std::map<std::string, ValEntry> vals;
  std::map<std::string, TyconEntry> tycons;
  std::map<std::string, std::shared_ptr<Env>> structs;
  std::map<std::string, SigExpPtr> sigs;
  std::map<std::string, std::shared_ptr<FunctorEntry>> functors;
  const Env* parent = nullptr;

  template <typename MapT>
  static typename MapT::mapped_type* findIn(MapT Env::* field, const Env* e,
                                            const std::string& name) {
    for (; e; e = e->parent) {
      auto& map = const_cast<Env*>(e)->*field;
      auto it = map.find(name);
      if (it != map.end()) return &it->second;
    }
    return nullptr;
  }

  // Qualified lookup: S1.S2.name resolves structures left to right.
  const ValEntry* lookupVal(const std::string& name) const {
    auto dot = name.rfind('.');
    if (dot == std::string::npos) return findIn(&Env::vals, this, name);
    if (const Env* m = lookupModule(name.substr(0, dot))) {
      auto it = m->vals.find(name.substr(dot + 1));
      if (it != m->vals.end()) return &it->second;
    }
    // Basis modules (List.hd, ...) live as dotted keys in the root env.
    return findIn(&Env::vals, this, name);
  }

  const TyconEntry* lookupTycon(const std::string& name) const {
    auto dot = name.rfind('.');
    if (dot == std::string::npos) return findIn(&Env::tycons, this, name);
    if (const Env* m = lookupModule(name.substr(0, dot))) {
      auto it = m->tycons.find(name.substr(dot + 1));
      if (it != m->tycons.end()) return &it->second;
    }
    return nullptr;
  }

  const Env* lookupModule(const std::string& path) const {
    const Env* cur = nullptr;
    size_t start = 0;
    for (;;) {
      size_t dot = path.find('.', start);
      std::string seg = path.substr(start, dot == std::string::npos ? dot : dot - start);
      if (cur == nullptr) {
        auto* found = findIn(&Env::structs, this, seg);
        if (!found) return nullptr;
        cur = found->get();
      } else {
        auto it = cur->structs.find(seg);
        if (it == cur->structs.end()) return nullptr;
        cur = it->second.get();
      }
      if (dot == std::string::npos) return cur;
      start = dot + 1;
    }
  }

  const SigExpPtr* lookupSig(const std::string& name) const {
    return findIn(&Env::sigs, this, name);
  }
  const std::shared_ptr<FunctorEntry>* lookupFunctor(const std::string& name) const {
    return findIn(&Env::functors, this, name);
  }
};

// ---------------------------------------------------------------------------
// Elaboration output

struct BoundVar {
  std::string name;
  std::vector<std::string> quantified;  // subset scoped to this variable
  SemType type;
};

struct BindingInfo {                       // per val declaration
  std::vector<std::string> quantified;     // ordered by first occurrence
  SemType rhsType;                         // generalized body type (tyvars kept)
  bool exhaustive = true;
  std::vector<BoundVar> boundVars;         // pattern variables in binding order
};

struct FunInfo {                           // per fun binding
  std::vector<std::string> quantified;
  std::vector<SemType> paramTypes;
  SemType resultType;
  bool exhaustive = true;
  std::optional<PreconditionFormula> precondition;
};

struct ElabContract {
  std::vector<std::pair<std::string, SemType>> vars;  // inputs then output, binding order
};

struct AbbrevInfo {
  int uid = 0;
  std::vector<std::string> paramKeys;
  SemType body;
};

struct Elaboration {
  std::vector<DeclPtr> program;
  InfixEnvironment infixEnv;
  Subst subst;
  std::shared_ptr<TypeTable> types = std::make_shared<TypeTable>();

  std::unordered_map<const Exp*, SemType> expTypes;
  std::unordered_map<const Pat*, SemType> patTypes;
  std::unordered_map<const Exp*, IdInfo> expIdents;
  std::unordered_map<const Pat*, IdInfo> patIdents;
  std::unordered_map<const void*, bool> exhaustive;  // Decl* / Exp* / FunBinding*

  std::unordered_map<const Decl*, BindingInfo> valInfo;
  std::unordered_map<const FunBinding*, FunInfo> funInfo;
  std::unordered_map<const Contract*, ElabContract> contracts;
  std::unordered_map<const TypeBinding*, AbbrevInfo> abbrevs;
  std::unordered_map<const DataBinding*, int> dataUids;
  std::unordered_map<const SigSpec*, SemType> sigSpecTypes;

  std::vector<Diag> warnings;
  int tyvarCounter = 0;

  SemType typeOf(const Exp* e) const { return subst.apply(expTypes.at(e)); }
  SemType typeOf(const Pat* p) const { return subst.apply(patTypes.at(p)); }
  const IdInfo* identOf(const Exp* e) const {
    auto it = expIdents.find(e);
    return it == expIdents.end() ? nullptr : &it->second;
  }
  const IdInfo* identOf(const Pat* p) const {
    auto it = patIdents.find(p);
    return it == patIdents.end() ? nullptr : &it->second;
  }

  PatternOracle oracle() const {
    PatternOracle o;
    o.types = types.get();
    o.identInfo = [this](const Pat* p) { return identOf(p); };
    o.patType = [this](const Pat* p) { return typeOf(p); };
    return o;
  }

  PatternEngine engine() const { return PatternEngine(oracle()); }
};

// ---------------------------------------------------------------------------

class Elaborator {
 public:
  Elaborator() { buildBasis(); }

  Elaboration run(ParseResult parsed) {
    out_.program = std::move(parsed.program);
    out_.infixEnv = std::move(parsed.infixEnv);
    for (auto& d : out_.program) elabDecl(d, root_);
    out_.subst = subst_;
    out_.tyvarCounter = tyCounter_;
    return std::move(out_);
  }

  // Exposed for focused tests.
  SemType elabExpIn(const ExpPtr& e, Env& env) {
    Scope sc;
    return elabExp(e, env, sc);
  }
  Env& rootEnv() { return root_; }

 private:
  Elaboration out_;
  Env root_;
  Subst subst_;
  int tyCounter_ = 0;
  int uidCounter_ = 0;
  int letDepth_ = 0;
  bool record_ = true;  // functor application re-elaborates quietly

  // Per-declaration state
  struct Scope {
    std::map<std::string, std::string> tyvars;  // source name -> unique key
    int declFirstFresh = 0;
  };

  // ---- helpers ----

  SemType fresh(TvClass cls = TvClass::Free) {
    return SemType::tyvar("_'" + std::to_string(++tyCounter_), cls);
  }

  void unifyAt(const SemType& a, const SemType& b, Span span, const std::string& what) {
    try {
      Unifier u(&tyCounter_, out_.types.get());
      u.unifyInto(a, b, subst_);
    } catch (const UnifyError& e) {
      fail(Stage::Elaborate, span, what + ": " + e.message);
    }
  }

  SemType instantiate(const TypeScheme& s) {
    if (s.quantified.empty()) return s.body;
    std::vector<std::string> keys;
    std::vector<SemType> vals;
    for (auto& [key, cls] : s.quantified) {
      keys.push_back(key);
      vals.push_back(fresh(cls));
    }
    return substituteParams(s.body, keys, vals);
  }

  void recordExp(const Exp* e, const SemType& t) {
    if (record_) out_.expTypes[e] = t;
  }
  void recordPat(const Pat* p, const SemType& t) {
    if (record_) out_.patTypes[p] = t;
  }

  void warn(Span span, std::string msg) {
    out_.warnings.push_back(Diag{Stage::Elaborate, span, std::move(msg), false});
  }

  // ---- basis ----

  std::string basisVar(const char* n) { return std::string("'") + n + "#basis"; }

  void buildBasis() {
    using K = SemType::Kind;
    auto prim = [](K k) { return SemType::prim(k); };
    SemType a = SemType::tyvar(basisVar("a"));
    SemType b = SemType::tyvar(basisVar("b"));
    SemType num = SemType::tyvar(basisVar("n"), TvClass::Num);
    SemType ord = SemType::tyvar(basisVar("o"), TvClass::Ord);
    SemType eq = SemType::tyvar(basisVar("e"), TvClass::Eq);

    auto val = [&](const char* name, std::vector<std::pair<std::string, TvClass>> q,
                   SemType t) {
      root_.vals[name] = ValEntry{TypeScheme{std::move(q), std::move(t)},
                                  IdInfo{IdSort::Value, -1, "", false}};
    };
    auto ctor = [&](const char* name, std::vector<std::pair<std::string, TvClass>> q,
                    SemType t, bool payload) {
      root_.vals[name] =
          ValEntry{TypeScheme{std::move(q), std::move(t)},
                   IdInfo{IdSort::Constructor, -1, name, payload}};
    };
    auto qa = std::pair<std::string, TvClass>{basisVar("a"), TvClass::Free};
    auto qb = std::pair<std::string, TvClass>{basisVar("b"), TvClass::Free};
    auto qn = std::pair<std::string, TvClass>{basisVar("n"), TvClass::Num};
    auto qo = std::pair<std::string, TvClass>{basisVar("o"), TvClass::Ord};
    auto qe = std::pair<std::string, TvClass>{basisVar("e"), TvClass::Eq};

    ctor("true", {}, prim(K::Bool), false);
    ctor("false", {}, prim(K::Bool), false);
    ctor("nil", {qa}, SemType::list(a), false);
    ctor("::", {qa}, SemType::arrow(SemType::tuple({a, SemType::list(a)}), SemType::list(a)),
         true);
    ctor("NONE", {qa}, SemType::option(a), false);
    ctor("SOME", {qa}, SemType::arrow(a, SemType::option(a)), true);

    for (const char* op : {"+", "-", "*"})
      val(op, {qn}, SemType::arrow(SemType::tuple({num, num}), num));
    val("/", {}, SemType::arrow(SemType::tuple({prim(K::Real), prim(K::Real)}), prim(K::Real)));
    for (const char* op : {"div", "mod"})
      val(op, {}, SemType::arrow(SemType::tuple({prim(K::Int), prim(K::Int)}), prim(K::Int)));
    for (const char* op : {"<", "<=", ">", ">="})
      val(op, {qo}, SemType::arrow(SemType::tuple({ord, ord}), prim(K::Bool)));
    for (const char* op : {"=", "<>"})
      val(op, {qe}, SemType::arrow(SemType::tuple({eq, eq}), prim(K::Bool)));
    val("~", {qn}, SemType::arrow(num, num));
    val("abs", {qn}, SemType::arrow(num, num));
    val("^", {}, SemType::arrow(SemType::tuple({prim(K::String), prim(K::String)}),
                                prim(K::String)));
    val("@", {qa}, SemType::arrow(SemType::tuple({SemType::list(a), SemType::list(a)}),
                                  SemType::list(a)));
    val("not", {}, SemType::arrow(prim(K::Bool), prim(K::Bool)));

    val("List.hd", {qa}, SemType::arrow(SemType::list(a), a));
    val("List.tl", {qa}, SemType::arrow(SemType::list(a), SemType::list(a)));
    val("List.length", {qa}, SemType::arrow(SemType::list(a), prim(K::Int)));
    val("List.map", {qa, qb},
        SemType::arrow(SemType::arrow(a, b),
                       SemType::arrow(SemType::list(a), SemType::list(b))));
    val("List.filter", {qa},
        SemType::arrow(SemType::arrow(a, prim(K::Bool)),
                       SemType::arrow(SemType::list(a), SemType::list(a))));
    val("Option.valOf", {qa}, SemType::arrow(SemType::option(a), a));
    val("String.size", {}, SemType::arrow(prim(K::String), prim(K::Int)));
    val("String.sub", {},
        SemType::arrow(SemType::tuple({prim(K::String), prim(K::Int)}), prim(K::Char)));

    auto tycon = [&](const char* name, TyconEntry::Kind k, int arity) {
      TyconEntry e;
      e.kind = k;
      e.arity = arity;
      e.displayName = name;
      root_.tycons[name] = e;
    };
    tycon("int", TyconEntry::Kind::Int, 0);
    tycon("real", TyconEntry::Kind::Real, 0);
    tycon("string", TyconEntry::Kind::String, 0);
    tycon("char", TyconEntry::Kind::Char, 0);
    tycon("bool", TyconEntry::Kind::Bool, 0);
    tycon("unit", TyconEntry::Kind::Unit, 0);
    tycon("list", TyconEntry::Kind::List, 1);
    tycon("option", TyconEntry::Kind::Option, 1);
  }

  // ---- types ----

  SemType applyTycon(const TyconEntry& e, std::vector<SemType> args, Span span) {
    using TK = TyconEntry::Kind;
    if (int(args.size()) != e.arity)
      fail(Stage::Elaborate, span,
           "type constructor '" + e.displayName + "' expects " + std::to_string(e.arity) +
               " argument(s), got " + std::to_string(args.size()));
    switch (e.kind) {
      case TK::Int: return SemType::prim(SemType::Kind::Int);
      case TK::Real: return SemType::prim(SemType::Kind::Real);
      case TK::String: return SemType::prim(SemType::Kind::String);
      case TK::Char: return SemType::prim(SemType::Kind::Char);
      case TK::Bool: return SemType::prim(SemType::Kind::Bool);
      case TK::Unit: return SemType::prim(SemType::Kind::Unit);
      case TK::List: return SemType::list(args[0]);
      case TK::Option: return SemType::option(args[0]);
      case TK::Data: return SemType::data(e.displayName, e.uid, std::move(args), e.eqAttr);
      case TK::Abbrev: {
        SemType expansion = substituteParams(e.body, e.paramKeys, args);
        return SemType::abbrev(e.displayName, e.uid, std::move(args), std::move(expansion));
      }
    }
    fail(Stage::Elaborate, span, "bad type constructor");
  }

  SemType elabTyExp(const TyExpPtr& t, Env& env, Scope& sc) {
    switch (t->kind) {
      case TyExp::Kind::Var: {
        auto it = sc.tyvars.find(t->name);
        if (it == sc.tyvars.end()) {
          std::string key = t->name + "#" + std::to_string(++uidCounter_);
          it = sc.tyvars.emplace(t->name, key).first;
        }
        return SemType::tyvar(it->second);
      }
      case TyExp::Kind::Con: {
        const TyconEntry* e = env.lookupTycon(t->name);
        if (!e) fail(Stage::Elaborate, t->span, "unbound type constructor '" + t->name + "'");
        std::vector<SemType> args;
        for (auto& a : t->args) args.push_back(elabTyExp(a, env, sc));
        return applyTycon(*e, std::move(args), t->span);
      }
      case TyExp::Kind::Tuple: {
        std::vector<SemType> members;
        for (auto& a : t->args) members.push_back(elabTyExp(a, env, sc));
        return SemType::tuple(std::move(members));
      }
      case TyExp::Kind::Arrow:
        return SemType::arrow(elabTyExp(t->args[0], env, sc), elabTyExp(t->args[1], env, sc));
      case TyExp::Kind::Record: {
        std::vector<std::pair<std::string, SemType>> fields;
        std::set<std::string> seen;
        for (auto& [lab, ty] : t->fields) {
          if (!seen.insert(lab).second)
            fail(Stage::Elaborate, t->span, "duplicate record label '" + lab + "'");
          fields.emplace_back(lab, elabTyExp(ty, env, sc));
        }
        return SemType::record(std::move(fields));
      }
    }
    fail(Stage::Elaborate, t->span, "bad type expression");
  }

  // ---- patterns ----

  struct Binding {
    std::string name;
    SemType type;
    Span span;
  };

  SemType elabPat(const PatPtr& p, Env& env, Scope& sc, std::vector<Binding>& binds) {
    SemType t = elabPatInner(p, env, sc, binds);
    recordPat(p.get(), t);
    return t;
  }

  SemType elabPatInner(const PatPtr& p, Env& env, Scope& sc, std::vector<Binding>& binds) {
    using PK = Pat::Kind;
    switch (p->kind) {
      case PK::Wildcard:
        return fresh();
      case PK::Ident: {
        const ValEntry* e = env.lookupVal(p->name);
        if (e && e->info.sort == IdSort::Constructor) {
          if (e->info.hasPayload)
            fail(Stage::Elaborate, p->span,
                 "constructor '" + p->name + "' expects an argument");
          if (record_) out_.patIdents[p.get()] = e->info;
          return instantiate(e->scheme);
        }
        addBinding(p->name, p->span, binds);
        SemType t = fresh();
        binds.back().type = t;
        return t;
      }
      case PK::Int:
        return SemType::prim(SemType::Kind::Int);
      case PK::String:
        return SemType::prim(SemType::Kind::String);
      case PK::Char:
        return SemType::prim(SemType::Kind::Char);
      case PK::Unit:
        return SemType::prim(SemType::Kind::Unit);
      case PK::Tuple: {
        std::vector<SemType> members;
        for (auto& el : p->items) members.push_back(elabPat(el, env, sc, binds));
        return SemType::tuple(std::move(members));
      }
      case PK::List: {
        SemType elem = fresh();
        for (auto& el : p->items)
          unifyAt(elabPat(el, env, sc, binds), elem, el->span, "list pattern element");
        return SemType::list(elem);
      }
      case PK::Record: {
        std::vector<std::pair<std::string, SemType>> fields;
        std::set<std::string> seen;
        for (auto& [lab, sub] : p->fields) {
          if (!seen.insert(lab).second)
            fail(Stage::Elaborate, p->span, "duplicate record label '" + lab + "'");
          fields.emplace_back(lab, elabPat(sub, env, sc, binds));
        }
        if (!p->ellipsis) return SemType::record(std::move(fields));
        // Flexible record: a constrained variable resolved by unification.
        SemType flex = fresh(TvClass::FlexRecord);
        std::sort(fields.begin(), fields.end(),
                  [](auto& a, auto& b) { return a.first < b.first; });
        for (auto& [lab, ty] : fields) {
          flex.labels.push_back(lab);
          flex.args.push_back(ty);
        }
        return flex;
      }
      case PK::ConApp: {
        const ValEntry* e = env.lookupVal(p->name);
        if (!e || e->info.sort != IdSort::Constructor)
          fail(Stage::Elaborate, p->span, "'" + p->name + "' is not a constructor");
        if (!e->info.hasPayload)
          fail(Stage::Elaborate, p->span,
               "constructor '" + p->name + "' takes no argument");
        if (record_) out_.patIdents[p.get()] = e->info;
        SemType ct = instantiate(e->scheme);  // payload -> result
        SemType argT = elabPat(p->items[0], env, sc, binds);
        SemType res = fresh();
        unifyAt(ct, SemType::arrow(argT, res), p->span, "constructor pattern");
        return res;
      }
      case PK::InfixApp: {
        const ValEntry* e = env.lookupVal(p->name);
        if (!e || e->info.sort != IdSort::Constructor)
          fail(Stage::Elaborate, p->span,
               "infix pattern operator '" + p->name + "' is not a constructor");
        if (record_) out_.patIdents[p.get()] = e->info;
        SemType ct = instantiate(e->scheme);
        SemType lhs = elabPat(p->items[0], env, sc, binds);
        SemType rhs = elabPat(p->items[1], env, sc, binds);
        SemType res = fresh();
        unifyAt(ct, SemType::arrow(SemType::tuple({lhs, rhs}), res), p->span, "infix pattern");
        return res;
      }
      case PK::Typed: {
        SemType t = elabPat(p->items[0], env, sc, binds);
        SemType ann = elabTyExp(p->ty, env, sc);
        unifyAt(t, ann, p->span, "pattern annotation");
        return ann;
      }
      case PK::Layered: {
        addBinding(p->name, p->span, binds);
        size_t idx = binds.size() - 1;
        SemType t = elabPat(p->items[0], env, sc, binds);
        if (p->ty) {
          SemType ann = elabTyExp(p->ty, env, sc);
          unifyAt(t, ann, p->span, "pattern annotation");
        }
        binds[idx].type = t;
        return t;
      }
    }
    fail(Stage::Elaborate, p->span, "bad pattern");
  }

  void addBinding(const std::string& name, Span span, std::vector<Binding>& binds) {
    for (auto& b : binds)
      if (b.name == name)
        fail(Stage::Elaborate, span, "variable '" + name + "' bound twice in one pattern");
    binds.push_back(Binding{name, SemType(), span});
  }

  // ---- expressions ----

  SemType elabExp(const ExpPtr& e, Env& env, Scope& sc) {
    SemType t = elabExpInner(e, env, sc);
    recordExp(e.get(), t);
    return t;
  }

  SemType elabExpInner(const ExpPtr& e, Env& env, Scope& sc) {
    using EK = Exp::Kind;
    switch (e->kind) {
      case EK::Ident: {
        const ValEntry* v = env.lookupVal(e->name);
        if (!v) fail(Stage::Elaborate, e->span, "unbound identifier '" + e->name + "'");
        if (record_) out_.expIdents[e.get()] = v->info;
        return instantiate(v->scheme);
      }
      case EK::Int:
        return SemType::prim(SemType::Kind::Int);
      case EK::Real:
        return SemType::prim(SemType::Kind::Real);
      case EK::String:
        return SemType::prim(SemType::Kind::String);
      case EK::Char:
        return SemType::prim(SemType::Kind::Char);
      case EK::Unit:
        return SemType::prim(SemType::Kind::Unit);
      case EK::Tuple: {
        std::vector<SemType> members;
        for (auto& el : e->items) members.push_back(elabExp(el, env, sc));
        return SemType::tuple(std::move(members));
      }
      case EK::List: {
        SemType elem = fresh();
        for (auto& el : e->items)
          unifyAt(elabExp(el, env, sc), elem, el->span, "list element");
        return SemType::list(elem);
      }
      case EK::Record: {
        std::vector<std::pair<std::string, SemType>> fields;
        std::set<std::string> seen;
        for (auto& [lab, sub] : e->fields) {
          if (!seen.insert(lab).second)
            fail(Stage::Elaborate, e->span, "duplicate record label '" + lab + "'");
          fields.emplace_back(lab, elabExp(sub, env, sc));
        }
        return SemType::record(std::move(fields));
      }
      case EK::App: {
        SemType tf = elabExp(e->items[0], env, sc);
        SemType ta = elabExp(e->items[1], env, sc);
        SemType res = fresh();
        unifyAt(tf, SemType::arrow(ta, res), e->span, "application");
        return res;
      }
      case EK::InfixApp: {
        const ValEntry* v = env.lookupVal(e->name);
        if (!v) fail(Stage::Elaborate, e->span, "unbound operator '" + e->name + "'");
        if (record_) out_.expIdents[e.get()] = v->info;
        SemType top = instantiate(v->scheme);
        SemType lhs = elabExp(e->items[0], env, sc);
        SemType rhs = elabExp(e->items[1], env, sc);
        SemType res = fresh();
        unifyAt(top, SemType::arrow(SemType::tuple({lhs, rhs}), res), e->span,
                "operator '" + e->name + "'");
        return res;
      }
      case EK::Fn: {
        SemType arg = fresh();
        SemType res = fresh();
        elabRules(e->rules, arg, res, env, sc);
        matchExhaustiveness(e.get(), e->rules, arg, e->span);
        return SemType::arrow(arg, res);
      }
      case EK::Case: {
        SemType scrut = elabExp(e->items[0], env, sc);
        SemType res = fresh();
        elabRules(e->rules, scrut, res, env, sc);
        matchExhaustiveness(e.get(), e->rules, scrut, e->span);
        return res;
      }
      case EK::If: {
        unifyAt(elabExp(e->items[0], env, sc), SemType::prim(SemType::Kind::Bool),
                e->items[0]->span, "condition");
        SemType t = elabExp(e->items[1], env, sc);
        unifyAt(elabExp(e->items[2], env, sc), t, e->items[2]->span, "else branch");
        return t;
      }
      case EK::Andalso:
      case EK::Orelse: {
        unifyAt(elabExp(e->items[0], env, sc), SemType::prim(SemType::Kind::Bool),
                e->items[0]->span, "boolean operand");
        unifyAt(elabExp(e->items[1], env, sc), SemType::prim(SemType::Kind::Bool),
                e->items[1]->span, "boolean operand");
        return SemType::prim(SemType::Kind::Bool);
      }
      case EK::Let: {
        Env inner;
        inner.parent = &env;
        ++letDepth_;
        for (auto& d : e->decls) elabDecl(d, inner);
        --letDepth_;
        return elabExp(e->items[0], inner, sc);
      }
      case EK::Typed: {
        SemType t = elabExp(e->items[0], env, sc);
        SemType ann = elabTyExp(e->ty, env, sc);
        unifyAt(t, ann, e->span, "type annotation");
        return ann;
      }
    }
    fail(Stage::Elaborate, e->span, "bad expression");
  }

  void elabRules(const std::vector<MatchRule>& rules, const SemType& arg, const SemType& res,
                 Env& env, Scope& sc) {
    for (auto& r : rules) {
      std::vector<Binding> binds;
      SemType pt = elabPat(r.pat, env, sc, binds);
      unifyAt(pt, arg, r.pat->span, "match pattern");
      Env inner;
      inner.parent = &env;
      for (auto& b : binds)
        inner.vals[b.name] = ValEntry{TypeScheme{{}, b.type}, IdInfo{IdSort::Value}};
      unifyAt(elabExp(r.body, inner, sc), res, r.body->span, "match result");
    }
  }

  // Records the pattern-engine verdict for a match expression and warns about
  // redundant rules.
  void matchExhaustiveness(const Exp* node, const std::vector<MatchRule>& rules,
                           const SemType& scrut, Span span) {
    if (!record_) return;
    PatternMatrix m;
    m.columnTypes = {subst_.apply(scrut)};
    for (auto& r : rules) m.rows.push_back({r.pat});
    PatternEngine eng(liveOracle());
    out_.exhaustive[node] = eng.isExhaustive(m);
    for (size_t idx : eng.redundantRows(m))
      warn(rules[idx].pat->span, "redundant match rule");
  }

  // Oracle over in-progress tables (current substitution).
  PatternOracle liveOracle() {
    PatternOracle o;
    o.types = out_.types.get();
    o.identInfo = [this](const Pat* p) -> const IdInfo* {
      auto it = out_.patIdents.find(p);
      return it == out_.patIdents.end() ? nullptr : &it->second;
    };
    o.patType = [this](const Pat* p) { return subst_.apply(out_.patTypes.at(p)); };
    return o;
  }

  // ---- declarations ----

  void elabDecl(const DeclPtr& d, Env& env) {
    switch (d->kind) {
      case Decl::Kind::Val: return elabVal(d, env);
      case Decl::Kind::ValRec: return elabValRec(d, env);
      case Decl::Kind::Fun: return elabFun(d, env);
      case Decl::Kind::Datatype: return elabDatatype(d, env);
      case Decl::Kind::TypeAbbrev: return elabTypeAbbrev(d, env);
      case Decl::Kind::Structure: return elabStructure(d, env);
      case Decl::Kind::Signature: return elabSignature(d, env);
      case Decl::Kind::Functor: return elabFunctor(d, env);
      case Decl::Kind::InfixDirective: return;  // handled at parse time
      case Decl::Kind::Local: return elabLocal(d, env);
    }
  }

  // Defaults remaining constrained variables created since `firstFresh`
  // (overloaded operators go to int; unresolved flexible records are errors).
  void defaultConstrained(int firstFresh, Span span) {
    for (int i = firstFresh + 1; i <= tyCounter_; ++i) {
      SemType v = SemType::tyvar("_'" + std::to_string(i));
      SemType r = subst_.shallow(v);
      if (!r.is(SemType::Kind::TyVar)) continue;
      switch (r.cls) {
        case TvClass::Free:
          break;
        case TvClass::FlexRecord:
        case TvClass::FlexRecordEq:
          fail(Stage::Elaborate, span,
               "record type with ellipsis could not be fully determined");
        default:
          subst_.bind(r.name, SemType::prim(SemType::Kind::Int));
          break;
      }
    }
  }

  std::set<std::string> envFreeTyVars(const Env& env) {
    std::set<std::string> out;
    for (const Env* e = &env; e; e = e->parent) collectEnvFree(*e, out);
    return out;
  }

  void collectEnvFree(const Env& e, std::set<std::string>& out) {
    for (auto& [name, entry] : e.vals) {
      std::set<std::string> quantifiedNames;
      for (auto& [q, cls] : entry.scheme.quantified) quantifiedNames.insert(q);
      for (auto& v : freeTyVars(entry.scheme.body, subst_))
        if (!quantifiedNames.count(v)) out.insert(v);
    }
    for (auto& [name, sub] : e.structs) collectEnvFree(*sub, out);
  }

  // Generalizes t against env; returns quantified keys in first-occurrence order.
  std::vector<std::string> generalize(const SemType& t, const Env& env) {
    std::set<std::string> envFree = envFreeTyVars(env);
    std::vector<std::string> quantified;
    for (auto& v : freeTyVars(t, subst_))
      if (!envFree.count(v)) quantified.push_back(v);
    return quantified;
  }

  static bool isNonExpansive(const Exp& e, const Elaboration& out) {
    using EK = Exp::Kind;
    switch (e.kind) {
      case EK::Int: case EK::Real: case EK::String: case EK::Char: case EK::Unit:
      case EK::Fn:
        return true;
      case EK::Ident:
        return true;
      case EK::Tuple: case EK::List: {
        for (auto& el : e.items)
          if (!isNonExpansive(*el, out)) return false;
        return true;
      }
      case EK::Record: {
        for (auto& [lab, el] : e.fields)
          if (!isNonExpansive(*el, out)) return false;
        return true;
      }
      case EK::Typed:
        return isNonExpansive(*e.items[0], out);
      case EK::App: {
        auto it = out.expIdents.find(e.items[0].get());
        if (it == out.expIdents.end() || it->second.sort != IdSort::Constructor) return false;
        return isNonExpansive(*e.items[1], out);
      }
      case EK::InfixApp: {
        auto it = out.expIdents.find(&e);
        if (it == out.expIdents.end() || it->second.sort != IdSort::Constructor) return false;
        return isNonExpansive(*e.items[0], out) && isNonExpansive(*e.items[1], out);
      }
      default:
        return false;
    }
  }

  // Value restriction leftovers: free variables that could not be generalized
  // are instantiated to int at top level (with a warning), the way SML
  // implementations instantiate them to dummy types.
  void requireAllGeneralized(const SemType& t, const std::vector<std::string>& quantified,
                             Span span) {
    if (letDepth_ > 0) return;  // let-bound monotypes resolve from the body
    for (auto& v : freeTyVars(t, subst_)) {
      if (std::find(quantified.begin(), quantified.end(), v) == quantified.end()) {
        subst_.bind(v, SemType::prim(SemType::Kind::Int));
        warn(span, "type variable not generalized (value restriction); instantiated to int");
      }
    }
  }

  void elabVal(const DeclPtr& d, Env& env) {
    ValBinding& vb = d->valBindings[0];
    Scope sc;
    int firstFresh = tyCounter_;
    Env before = env;  // generalization reference
    std::vector<Binding> binds;
    SemType tp = elabPat(vb.pat, env, sc, binds);
    SemType te = elabExp(vb.exp, env, sc);
    unifyAt(tp, te, d->span, "value binding");
    defaultConstrained(firstFresh, d->span);

    bool value = isNonExpansive(*vb.exp, out_);
    std::vector<std::string> quantified;
    if (value) quantified = generalize(te, before);
    requireAllGeneralized(te, quantified, d->span);

    std::vector<BoundVar> boundVars;
    for (auto& b : binds) {
      std::vector<std::pair<std::string, TvClass>> q;
      std::vector<std::string> qNames;
      for (auto& v : quantified)
        if (occursIn(v, b.type, subst_)) {
          q.emplace_back(v, TvClass::Free);
          qNames.push_back(v);
        }
      env.vals[b.name] =
          ValEntry{TypeScheme{q, subst_.apply(b.type)}, IdInfo{IdSort::Value}};
      boundVars.push_back(BoundVar{b.name, qNames, subst_.apply(b.type)});
    }

    if (record_) {
      BindingInfo info;
      info.quantified = quantified;
      info.boundVars = std::move(boundVars);
      info.rhsType = subst_.apply(te);
      PatternMatrix m;
      m.columnTypes = {subst_.apply(te)};
      m.rows = {{vb.pat}};
      PatternEngine eng(liveOracle());
      info.exhaustive = eng.isExhaustive(m);
      out_.exhaustive[d.get()] = info.exhaustive;
      if (!info.exhaustive) warn(d->span, "binding not exhaustive");
      out_.valInfo[d.get()] = std::move(info);
    }
  }

  void elabValRec(const DeclPtr& d, Env& env) {
    ValBinding& vb = d->valBindings[0];
    Scope sc;
    int firstFresh = tyCounter_;
    Env before = env;
    SemType tf = fresh();
    recordPat(vb.pat.get(), tf);
    Env inner;
    inner.parent = &env;
    inner.vals[vb.pat->name] = ValEntry{TypeScheme{{}, tf}, IdInfo{IdSort::Value}};
    SemType te = elabExp(vb.exp, inner, sc);
    unifyAt(tf, te, d->span, "recursive binding");
    defaultConstrained(firstFresh, d->span);
    std::vector<std::string> quantified = generalize(te, before);
    std::vector<std::pair<std::string, TvClass>> q;
    for (auto& v : quantified) q.emplace_back(v, TvClass::Free);
    env.vals[vb.pat->name] =
        ValEntry{TypeScheme{q, subst_.apply(te)}, IdInfo{IdSort::Value}};
    if (record_) {
      BindingInfo info;
      info.quantified = quantified;
      info.rhsType = subst_.apply(te);
      info.exhaustive = true;
      out_.exhaustive[d.get()] = true;
      out_.valInfo[d.get()] = std::move(info);
    }
  }

  void elabFun(const DeclPtr& d, Env& env) {
    Scope sc;
    int firstFresh = tyCounter_;
    Env before = env;

    // Pre-bind every function of the group monomorphically.
    std::vector<SemType> funVars;
    for (auto& fb : d->funBindings) {
      SemType t = fresh();
      funVars.push_back(t);
      env.vals[fb.name] = ValEntry{TypeScheme{{}, t}, IdInfo{IdSort::Value}};
    }

    for (size_t i = 0; i < d->funBindings.size(); ++i) {
      FunBinding& fb = d->funBindings[i];
      size_t arity = fb.clauses.front().params.size();
      std::vector<SemType> paramTys;
      for (size_t k = 0; k < arity; ++k) paramTys.push_back(fresh());
      SemType resTy = fresh();

      for (auto& cl : fb.clauses) {
        std::vector<Binding> binds;
        for (size_t k = 0; k < arity; ++k) {
          SemType pt = elabPat(cl.params[k], env, sc, binds);
          unifyAt(pt, paramTys[k], cl.params[k]->span, "parameter pattern");
        }
        Env inner;
        inner.parent = &env;
        for (auto& b : binds)
          inner.vals[b.name] = ValEntry{TypeScheme{{}, b.type}, IdInfo{IdSort::Value}};
        SemType bt = elabExp(cl.body, inner, sc);
        unifyAt(bt, resTy, cl.body->span, "clause body");
        if (cl.retTy) {
          SemType ann = elabTyExp(*cl.retTy, env, sc);
          unifyAt(resTy, ann, cl.span, "result annotation");
        }
      }
      SemType whole = resTy;
      for (size_t k = arity; k-- > 0;) whole = SemType::arrow(paramTys[k], whole);
      unifyAt(funVars[i], whole, fb.clauses.front().span, "function binding");
    }

    defaultConstrained(firstFresh, d->span);

    // Generalize and rebind.
    for (size_t i = 0; i < d->funBindings.size(); ++i) {
      FunBinding& fb = d->funBindings[i];
      SemType t = subst_.apply(funVars[i]);
      std::vector<std::string> quantified = generalize(t, before);
      std::vector<std::pair<std::string, TvClass>> q;
      for (auto& v : quantified) q.emplace_back(v, TvClass::Free);
      env.vals[fb.name] = ValEntry{TypeScheme{q, t}, IdInfo{IdSort::Value}};

      if (record_) {
        FunInfo info;
        info.quantified = quantified;
        SemType cur = t;
        for (size_t k = 0; k < fb.clauses.front().params.size(); ++k) {
          info.paramTypes.push_back(cur.args[0]);
          cur = cur.args[1];
        }
        info.resultType = cur;

        PatternMatrix m;
        m.columnTypes = info.paramTypes;
        for (auto& cl : fb.clauses) m.rows.push_back(cl.params);
        PatternEngine eng(liveOracle());
        info.exhaustive = eng.isExhaustive(m);
        out_.exhaustive[&fb] = info.exhaustive;
        if (!info.exhaustive)
          info.precondition = eng.synthesizePrecondition(m);
        for (size_t idx : eng.redundantRows(m))
          warn(fb.clauses[idx].span, "redundant clause in '" + fb.name + "'");
        out_.funInfo[&fb] = std::move(info);
      }
    }

    // Contracts, elaborated against the scheme but without the function itself
    // in scope for the conditions.
    for (auto& fb : d->funBindings) {
      if (!fb.contract) continue;
      elabContract(*fb.contract, env.vals.at(fb.name).scheme,
                   fb.clauses.front().params.size(), before);
    }
  }

  void elabContract(Contract& c, const TypeScheme& scheme, size_t funArity, Env& envBefore) {
    if (c.inputs.size() != funArity)
      fail(Stage::Elaborate, c.span,
           "contract has " + std::to_string(c.inputs.size()) + " input group(s) but '" +
               c.fname + "' takes " + std::to_string(funArity));
    Scope sc;
    int firstFresh = tyCounter_;
    SemType tf = instantiate(scheme);
    Env contractEnv;
    contractEnv.parent = &envBefore;
    std::vector<Binding> allBinds;
    for (auto& in : c.inputs) {
      std::vector<Binding> binds;
      SemType pt = elabPat(in, contractEnv, sc, binds);
      SemType resolved = subst_.apply(tf);
      while (resolved.is(SemType::Kind::Abbrev)) resolved = resolved.abbrevExpansion();
      if (!resolved.is(SemType::Kind::Arrow))
        fail(Stage::Elaborate, in->span, "contract input count exceeds function arity");
      unifyAt(pt, resolved.args[0], in->span, "contract input");
      tf = resolved.args[1];
      for (auto& b : binds) allBinds.push_back(b);
    }
    std::vector<Binding> outBinds;
    SemType outT = elabPat(c.output, contractEnv, sc, outBinds);
    unifyAt(outT, tf, c.output->span, "contract output");
    for (auto& b : outBinds) allBinds.push_back(b);

    for (auto& b : allBinds)
      contractEnv.vals[b.name] = ValEntry{TypeScheme{{}, b.type}, IdInfo{IdSort::Value}};

    unifyAt(elabExp(c.requires_, contractEnv, sc), SemType::prim(SemType::Kind::Bool),
            c.requires_->span, "precondition must be bool");
    unifyAt(elabExp(c.ensures_, contractEnv, sc), SemType::prim(SemType::Kind::Bool),
            c.ensures_->span, "postcondition must be bool");
    defaultConstrained(firstFresh, c.span);

    if (record_) {
      ElabContract ec;
      for (auto& b : allBinds) ec.vars.emplace_back(b.name, subst_.apply(b.type));
      out_.contracts[&c] = std::move(ec);
    }
  }

  void elabDatatype(const DeclPtr& d, Env& env) {
    // Pre-register tycons so constructor payloads can refer to the whole group.
    std::vector<int> uids;
    std::vector<Scope> scopes(d->dataBindings.size());
    for (size_t i = 0; i < d->dataBindings.size(); ++i) {
      DataBinding& db = d->dataBindings[i];
      int uid = ++uidCounter_;
      uids.push_back(uid);
      TyconEntry e;
      e.kind = TyconEntry::Kind::Data;
      e.arity = int(db.params.size());
      e.uid = uid;
      e.displayName = db.name;
      e.eqAttr = true;  // refined below
      for (auto& pv : db.params) {
        std::string key = pv + "#" + std::to_string(++uidCounter_);
        scopes[i].tyvars[pv] = key;
        e.paramKeys.push_back(key);
      }
      env.tycons[db.name] = e;
      if (record_) out_.dataUids[&db] = uid;
    }

    for (size_t i = 0; i < d->dataBindings.size(); ++i) {
      DataBinding& db = d->dataBindings[i];
      TyconEntry& e = env.tycons[db.name];
      DatatypeInfo info;
      info.name = db.name;
      info.paramKeys = e.paramKeys;
      info.eqAttr = true;  // greatest fixpoint, lowered below
      std::vector<SemType> selfArgs;
      std::vector<std::pair<std::string, TvClass>> q;
      for (auto& k : e.paramKeys) {
        selfArgs.push_back(SemType::tyvar(k));
        q.emplace_back(k, TvClass::Free);
      }
      SemType self = SemType::data(db.name, e.uid, selfArgs, true);

      std::set<std::string> seenCtors;
      for (auto& ctor : db.constructors) {
        if (!seenCtors.insert(ctor.name).second)
          fail(Stage::Elaborate, ctor.span, "duplicate constructor '" + ctor.name + "'");
        DatatypeCtor dc;
        dc.name = ctor.name;
        if (ctor.payload) {
          SemType payload = elabTyExp(ctor.payload, env, scopes[i]);
          dc.payload = payload;
          env.vals[ctor.name] =
              ValEntry{TypeScheme{q, SemType::arrow(payload, self)},
                       IdInfo{IdSort::Constructor, e.uid, ctor.name, true}};
        } else {
          env.vals[ctor.name] = ValEntry{TypeScheme{q, self},
                                         IdInfo{IdSort::Constructor, e.uid, ctor.name, false}};
        }
        info.ctors.push_back(std::move(dc));
      }
      out_.types->data[e.uid] = std::move(info);
    }

    // Equality attribute: a fixpoint over payload types.
    bool changed = true;
    while (changed) {
      changed = false;
      for (size_t i = 0; i < d->dataBindings.size(); ++i) {
        DatatypeInfo& info = out_.types->data[uids[i]];
        bool eq = true;
        for (auto& c : info.ctors)
          if (c.payload && !payloadAdmitsEq(*c.payload)) eq = false;
        if (!eq && info.eqAttr) {
          info.eqAttr = false;
          changed = true;
        }
      }
    }
    for (size_t i = 0; i < d->dataBindings.size(); ++i) {
      env.tycons[d->dataBindings[i].name].eqAttr = out_.types->data[uids[i]].eqAttr;
    }
  }

  bool payloadAdmitsEq(const SemType& t) {
    using K = SemType::Kind;
    switch (t.kind) {
      case K::Real: case K::Arrow:
        return false;
      case K::TyVar:
        return true;  // instantiation decides
      case K::Data: {
        const DatatypeInfo* info = out_.types->find(t.uid);
        if (info && !info->eqAttr && !info->abstract) return false;
        if (info && info->abstract) return false;
        for (auto& a : t.args)
          if (!payloadAdmitsEq(a)) return false;
        return true;
      }
      case K::Abbrev:
        return payloadAdmitsEq(t.abbrevExpansion());
      default:
        for (auto& a : t.args)
          if (!payloadAdmitsEq(a)) return false;
        return true;
    }
  }

  void elabTypeAbbrev(const DeclPtr& d, Env& env) {
    for (auto& tb : d->typeBindings) {
      Scope sc;
      TyconEntry e;
      e.kind = TyconEntry::Kind::Abbrev;
      e.arity = int(tb.params.size());
      e.uid = ++uidCounter_;
      e.displayName = tb.name;
      for (auto& pv : tb.params) {
        std::string key = pv + "#" + std::to_string(++uidCounter_);
        sc.tyvars[pv] = key;
        e.paramKeys.push_back(key);
      }
      e.body = elabTyExp(tb.body, env, sc);
      env.tycons[tb.name] = e;
      if (record_) out_.abbrevs[&tb] = AbbrevInfo{e.uid, e.paramKeys, e.body};
    }
  }

  // ---- modules ----

  SigExpPtr resolveSigExp(const SigExpPtr& se, Env& env) {
    if (se->kind == SigExp::Kind::Name) {
      const SigExpPtr* target = env.lookupSig(se->name);
      if (!target) fail(Stage::Elaborate, se->span, "unbound signature '" + se->name + "'");
      return *target;  // stored signatures are already inline
    }
    return se;
  }

  // Environment view of a signature with fresh abstract types (used for
  // functor parameters and opaque ascription).
  std::shared_ptr<Env> sigToAbstractEnv(const std::vector<SigSpec>& specs,
                                        const std::string& qualifier, Env& outer) {
    auto view = std::make_shared<Env>();
    Env scratch;
    scratch.parent = &outer;
    for (auto& spec : specs) {
      Scope sc;
      switch (spec.kind) {
        case SigSpec::Kind::Type: {
          TyconEntry e;
          e.kind = TyconEntry::Kind::Data;
          e.arity = int(spec.params.size());
          e.uid = ++uidCounter_;
          e.displayName = qualifier.empty() ? spec.name : qualifier + "." + spec.name;
          for (auto& pv : spec.params)
            e.paramKeys.push_back(pv + "#" + std::to_string(++uidCounter_));
          e.eqAttr = false;
          view->tycons[spec.name] = e;
          scratch.tycons[spec.name] = e;
          DatatypeInfo info;
          info.name = e.displayName;
          info.paramKeys = e.paramKeys;
          info.abstract = true;
          out_.types->data[e.uid] = std::move(info);
          break;
        }
        case SigSpec::Kind::TypeDef: {
          TyconEntry e;
          e.kind = TyconEntry::Kind::Abbrev;
          e.arity = int(spec.params.size());
          e.uid = ++uidCounter_;
          e.displayName = qualifier.empty() ? spec.name : qualifier + "." + spec.name;
          for (auto& pv : spec.params) {
            std::string key = pv + "#" + std::to_string(++uidCounter_);
            sc.tyvars[pv] = key;
            e.paramKeys.push_back(key);
          }
          e.body = elabTyExp(spec.ty, scratch, sc);
          if (record_) out_.sigSpecTypes.emplace(&spec, e.body);
          view->tycons[spec.name] = e;
          scratch.tycons[spec.name] = e;
          break;
        }
        case SigSpec::Kind::Val: {
          SemType t = elabTyExp(spec.ty, scratch, sc);
          if (record_) out_.sigSpecTypes.emplace(&spec, t);
          std::vector<std::pair<std::string, TvClass>> q;
          for (auto& v : freeTyVars(t, subst_)) q.emplace_back(v, TvClass::Free);
          ValEntry entry{TypeScheme{q, t}, IdInfo{IdSort::Value}};
          view->vals[spec.name] = entry;
          scratch.vals[spec.name] = entry;
          break;
        }
      }
    }
    return view;
  }

  // Checks `members` against the signature; returns the constrained view.
  std::shared_ptr<Env> checkAscription(const std::shared_ptr<Env>& members,
                                       const std::vector<SigSpec>& specs, bool opaque,
                                       Span span, Env& outer) {
    auto view = std::make_shared<Env>();
    Env scratch;  // signature-local names realized against the structure
    scratch.parent = &outer;
    for (auto& spec : specs) {
      Scope sc;
      switch (spec.kind) {
        case SigSpec::Kind::Type: {
          auto it = members->tycons.find(spec.name);
          if (it == members->tycons.end())
            fail(Stage::Elaborate, span, "structure is missing type '" + spec.name + "'");
          if (it->second.arity != int(spec.params.size()))
            fail(Stage::Elaborate, span, "type '" + spec.name + "' has the wrong arity");
          view->tycons[spec.name] = it->second;
          scratch.tycons[spec.name] = it->second;
          break;
        }
        case SigSpec::Kind::TypeDef: {
          auto it = members->tycons.find(spec.name);
          if (it == members->tycons.end())
            fail(Stage::Elaborate, span, "structure is missing type '" + spec.name + "'");
          // Compare at shared fresh parameters.
          std::vector<SemType> args;
          for (auto& pv : spec.params) {
            std::string key = pv + "#" + std::to_string(++uidCounter_);
            sc.tyvars[pv] = key;
            args.push_back(SemType::tyvar(key));
          }
          SemType want = elabTyExp(spec.ty, scratch, sc);
          if (record_) out_.sigSpecTypes.emplace(&spec, want);
          SemType got = applyTycon(it->second, args, span);
          try {
            Unifier u(&tyCounter_, out_.types.get());
            u.unifyInto(got, want, subst_);
          } catch (const UnifyError& e) {
            fail(Stage::Elaborate, span,
                 "type '" + spec.name + "' does not match its specification: " + e.message);
          }
          view->tycons[spec.name] = it->second;
          scratch.tycons[spec.name] = it->second;
          break;
        }
        case SigSpec::Kind::Val: {
          auto it = members->vals.find(spec.name);
          if (it == members->vals.end())
            fail(Stage::Elaborate, span, "structure is missing value '" + spec.name + "'");
          SemType want = elabTyExp(spec.ty, scratch, sc);
          if (record_) out_.sigSpecTypes.emplace(&spec, want);
          // The structure's scheme must be at least as general: instantiate it
          // and unify against the skolemized specification type.
          SemType got = instantiate(it->second.scheme);
          try {
            Unifier u(&tyCounter_, out_.types.get());
            u.unifyInto(got, skolemize(want, sc), subst_);
          } catch (const UnifyError& e) {
            fail(Stage::Elaborate, span,
                 "value '" + spec.name + "' does not match its specification: " + e.message);
          }
          view->vals[spec.name] = it->second;
          scratch.vals[spec.name] = it->second;
          break;
        }
      }
    }
    if (opaque) {
      // Abstract types become opaque: hide their representation.
      // The translator weakens this to transparent with a warning; here the
      // checked view keeps the structure's entries so evaluation still works.
      warn(span, "opaque ascription (:>) treated as transparent in the translation");
    }
    return view;
  }

  SemType skolemize(const SemType& t, Scope& sc) {
    if (t.is(SemType::Kind::TyVar)) {
      int uid = 0;
      auto it = skolems_.find(t.name);
      if (it == skolems_.end()) {
        uid = ++uidCounter_;
        skolems_[t.name] = uid;
        DatatypeInfo info;
        info.name = t.display();
        info.abstract = true;
        out_.types->data[uid] = info;
      } else {
        uid = it->second;
      }
      return SemType::data(t.display(), uid, {}, false);
    }
    SemType out = t;
    for (auto& a : out.args) a = skolemize(a, sc);
    return out;
  }
  std::map<std::string, int> skolems_;

  std::shared_ptr<Env> elabStrExp(const StrExpPtr& se, Env& env) {
    switch (se->kind) {
      case StrExp::Kind::Name: {
        const Env* m = env.lookupModule(se->name);
        if (!m) fail(Stage::Elaborate, se->span, "unbound structure '" + se->name + "'");
        auto copy = std::make_shared<Env>(*m);
        copy->parent = nullptr;
        return copy;
      }
      case StrExp::Kind::Inline: {
        Env collector;
        collector.parent = &env;
        for (auto& d : se->decls) elabDecl(d, collector);
        auto members = std::make_shared<Env>(std::move(collector));
        members->parent = nullptr;
        return members;
      }
      case StrExp::Kind::FunctorApp: {
        const auto* fe = env.lookupFunctor(se->name);
        if (!fe) fail(Stage::Elaborate, se->span, "unbound functor '" + se->name + "'");
        std::shared_ptr<Env> argMembers = elabStrExp(se->arg, env);
        std::shared_ptr<Env> view = checkAscription(argMembers, (*fe)->paramSig->specs,
                                                    /*opaque=*/false, se->span, env);
        // Re-elaborate the body with the actual argument, quietly: the
        // declaration-time annotations drive translation.
        Env apply;
        apply.parent = (*fe)->closure.get();
        apply.structs[(*fe)->paramName] = view;
        bool saved = record_;
        record_ = false;
        Env collector;
        collector.parent = &apply;
        for (auto& d : (*fe)->body->decls) elabDecl(d, collector);
        record_ = saved;
        auto members = std::make_shared<Env>(std::move(collector));
        members->parent = nullptr;
        return members;
      }
    }
    fail(Stage::Elaborate, se->span, "bad structure expression");
  }

  void elabStructure(const DeclPtr& d, Env& env) {
    std::shared_ptr<Env> members = elabStrExp(d->strExp, env);
    if (d->ascription) {
      SigExpPtr target = resolveSigExp(d->ascription, env);
      members = checkAscription(members, target->specs, d->opaque, d->span, env);
    }
    env.structs[d->name] = members;
  }

  void elabSignature(const DeclPtr& d, Env& env) {
    SigExpPtr target = resolveSigExp(d->sigExp, env);
    // Pre-elaborate once so the translator has types for every spec.
    sigToAbstractEnv(target->specs, d->name, env);
    env.sigs[d->name] = target;
  }

  void elabFunctor(const DeclPtr& d, Env& env) {
    SigExpPtr paramSig = resolveSigExp(d->paramSig, env);
    auto entry = std::make_shared<FunctorEntry>();
    entry->paramName = *d->paramName;
    entry->paramSig = paramSig;
    if (d->strExp->kind != StrExp::Kind::Inline)
      fail(Stage::Elaborate, d->strExp->span,
           "functor bodies must be written as 'struct ... end'");
    entry->body = d->strExp;
    entry->closure = std::make_shared<Env>(env);  // snapshot

    // Type-check the body once against the abstract parameter; these
    // annotations drive the functor's own translation.
    std::shared_ptr<Env> paramEnv = sigToAbstractEnv(paramSig->specs, *d->paramName, env);
    Env body;
    body.parent = &env;
    body.structs[*d->paramName] = paramEnv;
    Env collector;
    collector.parent = &body;
    for (auto& dd : d->strExp->decls) elabDecl(dd, collector);

    env.functors[d->name] = entry;
  }

  void elabLocal(const DeclPtr& d, Env& env) {
    Env hidden;
    hidden.parent = &env;
    for (auto& ld : d->localDecls) elabDecl(ld, hidden);
    Env exported;
    exported.parent = &hidden;
    for (auto& bd : d->bodyDecls) elabDecl(bd, exported);
    for (auto& [k, v] : exported.vals) env.vals[k] = v;
    for (auto& [k, v] : exported.tycons) env.tycons[k] = v;
    for (auto& [k, v] : exported.structs) env.structs[k] = v;
    for (auto& [k, v] : exported.sigs) env.sigs[k] = v;
    for (auto& [k, v] : exported.functors) env.functors[k] = v;
  }
};

inline Elaboration elaborate(ParseResult parsed) {
  Elaborator e;
  return e.run(std::move(parsed));
}

inline Elaboration elaborateText(std::string_view source) {
  return elaborate(parseText(source));
}

}  // namespace sml2coq
