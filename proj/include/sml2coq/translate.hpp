#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sml2coq/elaborate.hpp"
#include "sml2coq/emit.hpp"
#include "sml2coq/gallina.hpp"

namespace sml2coq {

struct TranslateResult {
  std::vector<GSentencePtr> sentences;
  std::vector<Diag> warnings;
};

class Translator {
 public:
  explicit Translator(const Elaboration& el) : el_(el), eng_(el.oracle()) {
    namer_.seedTyVars(el.tyvarCounter);
  }

  TranslateResult run() {
    TranslateResult out;
    for (auto& d : el_.program) translateDecl(d, out.sentences);
    out.warnings = std::move(warnings_);
    return out;
  }

 private:
  const Elaboration& el_;
  PatternEngine eng_;
  FreshNamer namer_;
  std::vector<Diag> warnings_;

  // Record context: entries carry the module path where they are visible.
  struct RecEntry {
    std::string name;
    std::vector<std::string> sortedLabels;
    std::vector<SemType> sortedTypes;
    std::vector<std::string> declOrder;  // field order for the Record sentence
    std::vector<std::string> path;
  };
  std::vector<RecEntry> records_;
  std::vector<std::string> modulePath_;

  // Lifted sentences (Records, inline modules, the patternFailure axiom)
  // emitted immediately before the sentence that triggered them.
  std::vector<GSentencePtr> pending_;
  bool patternFailureEmitted_ = false;

  // Type-variable context: reset at each declaration, tracks first occurrence.
  std::vector<std::string> tvcOrder_;
  std::set<std::string> tvcSeen_;

  // Infix context: functions whose notation has been emitted.
  std::set<std::string> notations_;

  int scratchCounter_ = 100000;  // unifier scratch for record-context lookups

  // ---- helpers ----

  [[noreturn]] void unsupported(Span sp, const std::string& what) {
    fail(Stage::Translate, sp, what, /*unsupported=*/true);
  }

  void warnAt(Span sp, std::string msg) {
    warnings_.push_back(Diag{Stage::Translate, sp, std::move(msg), false});
  }

  void tvcReset() {
    tvcOrder_.clear();
    tvcSeen_.clear();
  }

  void tvcAdd(const std::string& coqName) {
    if (tvcSeen_.insert(coqName).second) tvcOrder_.push_back(coqName);
  }

  static std::string tyvarCoqName(const SemType& tv) {
    std::string d = tv.display();
    if (!d.empty() && d[0] == '\'') return "_" + d.substr(1);
    return d;  // fresh _'N names pass through
  }

  std::string scopedName(const std::string& display) const {
    for (auto& m : modulePath_) {
      if (display.rfind(m + ".", 0) == 0) return display.substr(m.size() + 1);
    }
    return display;
  }

  void flushPending(std::vector<GSentencePtr>& out) {
    for (auto& p : pending_) out.push_back(p);
    pending_.clear();
  }

  void emitSentence(std::vector<GSentencePtr>& out, GSentencePtr s) {
    flushPending(out);
    out.push_back(std::move(s));
  }

  void ensurePatternFailure() {
    if (patternFailureEmitted_) return;
    patternFailureEmitted_ = true;
    auto ax = gsentence(GSentence::Kind::Axiom);
    ax->local = true;
    ax->name = "patternFailure";
    auto stmt = gterm(GTerm::Kind::PropForall);
    GBinder b;
    b.style = GBinder::Style::Curly;
    b.name = "a";
    stmt->binders = {b};
    stmt->items = {gident("a")};
    ax->body = stmt;
    pending_.push_back(ax);
  }

  // ---- record context ----

  static bool containsTyVar(const SemType& t) {
    if (t.is(SemType::Kind::TyVar)) return true;
    for (auto& a : t.args)
      if (containsTyVar(a)) return true;
    return false;
  }

  // Candidate is reusable when its field types unify with the query's through
  // a substitution touching the candidate's variables only.
  bool moreGeneral(const std::vector<SemType>& cand, const std::vector<SemType>& query) {
    std::vector<std::string> vars;
    std::set<std::string> seen;
    Subst empty;
    for (auto& c : cand) freeTyVars(c, empty, vars, seen);
    std::vector<std::string> keys(vars.begin(), vars.end());
    std::vector<SemType> fresh;
    for (size_t i = 0; i < keys.size(); ++i)
      fresh.push_back(SemType::tyvar("_cand" + std::to_string(++scratchCounter_)));
    Subst s;
    try {
      Unifier u(&scratchCounter_, el_.types.get());
      for (size_t i = 0; i < cand.size(); ++i)
        u.unifyInto(substituteParams(cand[i], keys, fresh), query[i], s);
    } catch (const UnifyError&) {
      return false;
    }
    for (auto& q : query)
      if (!(s.apply(q) == q)) return false;
    return true;
  }

  bool pathVisible(const std::vector<std::string>& entryPath) const {
    if (entryPath.size() > modulePath_.size()) return false;
    for (size_t i = 0; i < entryPath.size(); ++i)
      if (entryPath[i] != modulePath_[i]) return false;
    return true;
  }

  // Resolves a record type to its Gallina record name, creating and lifting a
  // Record declaration on first encounter.
  std::string recordName(const SemType& rec, const std::vector<std::string>* orderHint) {
    for (auto& e : records_) {
      if (e.sortedLabels != rec.labels || !pathVisible(e.path)) continue;
      if (moreGeneral(e.sortedTypes, rec.args)) return e.name;
    }
    RecEntry e;
    e.name = namer_.fresh(FreshNamer::Kind::RecordType);
    e.sortedLabels = rec.labels;
    e.sortedTypes = rec.args;
    e.path = modulePath_;
    if (orderHint && orderHint->size() == rec.labels.size()) e.declOrder = *orderHint;
    else e.declOrder = rec.labels;

    auto sentence = gsentence(GSentence::Kind::RecordDecl);
    sentence->name = e.name;
    for (auto& lab : e.declOrder) {
      auto it = std::find(rec.labels.begin(), rec.labels.end(), lab);
      size_t idx = size_t(it - rec.labels.begin());
      sentence->recordFields.emplace_back(e.name + "_" + lab,
                                          translateType(rec.args[idx], nullptr));
    }
    pending_.push_back(sentence);
    records_.push_back(e);
    return records_.back().name;
  }

  std::string fieldNameFor(const SemType& rec, const std::string& label,
                           const std::vector<std::string>* orderHint) {
    return recordName(rec, orderHint) + "_" + label;
  }

  // ---- types ----

  GTermPtr translateType(const SemType& t, const std::vector<std::string>* orderHint = nullptr) {
    using K = SemType::Kind;
    switch (t.kind) {
      case K::TyVar: {
        std::string n = tyvarCoqName(t);
        tvcAdd(n);
        return gident(n);
      }
      case K::Int: return gident("Z");
      case K::Real: return gident("float");
      case K::String: return gident("string");
      case K::Char: return gident("ascii");
      case K::Bool: return gident("bool");
      case K::Unit: return gident("unit");
      case K::Tuple: {
        auto p = gterm(GTerm::Kind::ProductType);
        for (auto& m : t.args) p->items.push_back(translateType(m));
        return p;
      }
      case K::Arrow: {
        auto a = gterm(GTerm::Kind::Arrow);
        a->items = {translateType(t.args[0]), translateType(t.args[1])};
        return a;
      }
      case K::List: {
        auto e = gterm(GTerm::Kind::ExplicitApp);
        e->name = "list";
        e->items = {translateType(t.args[0])};
        return e;
      }
      case K::Option: {
        auto e = gterm(GTerm::Kind::ExplicitApp);
        e->name = "option";
        e->items = {translateType(t.args[0])};
        return e;
      }
      case K::Record:
        return gident(recordName(t, orderHint));
      case K::Data: {
        if (t.args.empty()) return gident(scopedName(t.name));
        auto e = gterm(GTerm::Kind::ExplicitApp);
        e->name = scopedName(t.name);
        for (auto& a : t.args) e->items.push_back(translateType(a));
        return e;
      }
      case K::Abbrev: {
        if (t.abbrevArgCount() == 0) return gident(scopedName(t.name));
        auto e = gterm(GTerm::Kind::ExplicitApp);
        e->name = scopedName(t.name);
        for (size_t i = 0; i < t.abbrevArgCount(); ++i)
          e->items.push_back(translateType(t.args[i]));
        return e;
      }
    }
    return gident("?");
  }

  // ---- patterns (types erased) ----

  GPatternPtr translatePattern(const PatPtr& p) {
    using PK = Pat::Kind;
    switch (p->kind) {
      case PK::Wildcard:
        return gpat(GPattern::Kind::Wildcard);
      case PK::Ident: {
        const IdInfo* info = el_.identOf(p.get());
        if (info && info->sort == IdSort::Constructor) {
          if (info->ctorName == "nil") return gpat(GPattern::Kind::List);
          auto v = gpat(GPattern::Kind::Var);
          v->name = info->ctorName;
          return v;
        }
        auto v = gpat(GPattern::Kind::Var);
        v->name = p->name;
        return v;
      }
      case PK::Int: {
        auto n = gpat(GPattern::Kind::IntLit);
        std::string lit = p->literal;
        n->intVal = std::stoll(lit[0] == '~' ? "-" + lit.substr(1) : lit);
        return n;
      }
      case PK::String: {
        auto s = gpat(GPattern::Kind::StringLit);
        s->text = Lexer::decodeStringText(p->literal, p->span);
        return s;
      }
      case PK::Char: {
        auto c = gpat(GPattern::Kind::CharLit);
        c->text = Lexer::decodeStringText(p->literal.substr(1), p->span);
        return c;
      }
      case PK::Unit:
        return gpat(GPattern::Kind::Unit);
      case PK::Tuple: {
        auto t = gpat(GPattern::Kind::Tuple);
        for (auto& el : p->items) t->items.push_back(translatePattern(el));
        return t;
      }
      case PK::List: {
        auto l = gpat(GPattern::Kind::List);
        for (auto& el : p->items) l->items.push_back(translatePattern(el));
        return l;
      }
      case PK::Record: {
        // Ellipsis unfolds through the inferred record type; fields are listed
        // in canonical sorted order with the record-name prefix.
        SemType ty = el_.typeOf(p.get());
        while (ty.is(SemType::Kind::Abbrev)) ty = ty.abbrevExpansion();
        auto r = gpat(GPattern::Kind::Record);
        std::string rid = recordName(ty, nullptr);
        for (size_t i = 0; i < ty.labels.size(); ++i) {
          const PatPtr* sub = nullptr;
          for (auto& [lab, sp] : p->fields)
            if (lab == ty.labels[i]) sub = &sp;
          r->fields.emplace_back(rid + "_" + ty.labels[i],
                                 sub ? translatePattern(*sub)
                                     : gpat(GPattern::Kind::Wildcard));
        }
        return r;
      }
      case PK::ConApp: {
        auto c = gpat(GPattern::Kind::ConApp);
        const IdInfo* info = el_.identOf(p.get());
        c->name = info ? info->ctorName : p->name;
        c->items = {translatePattern(p->items[0])};
        return c;
      }
      case PK::InfixApp: {
        auto c = gpat(GPattern::Kind::InfixApp);
        const IdInfo* info = el_.identOf(p.get());
        c->name = info ? info->ctorName : p->name;
        c->items = {translatePattern(p->items[0]), translatePattern(p->items[1])};
        return c;
      }
      case PK::Typed:
        return translatePattern(p->items[0]);  // types in patterns are dropped
      case PK::Layered: {
        auto a = gpat(GPattern::Kind::Alias);
        a->name = p->name;
        a->items = {translatePattern(p->items[0])};
        return a;
      }
    }
    return gpat(GPattern::Kind::Wildcard);
  }

  // ---- expressions ----

  GTermPtr translateExp(const ExpPtr& e) {
    using EK = Exp::Kind;
    switch (e->kind) {
      case EK::Ident: {
        const IdInfo* info = el_.identOf(e.get());
        if (info && info->sort == IdSort::Constructor) {
          if (info->ctorName == "nil") return gterm(GTerm::Kind::ListLit);
          if (info->ctorName == "::") return gident("cons");
          return gident(info->ctorName);
        }
        if (e->opMarked) {
          if (notations_.count(e->name)) return gident("op" + e->name);
          static const std::set<std::string> basisOps = {
              "+", "-", "*", "/", "div", "mod", "<", "<=", ">", ">=", "=", "<>", "^", "@",
              "~"};
          if (basisOps.count(e->name))
            unsupported(e->span, "'op " + e->name + "' used as a value");
        }
        if (e->name == "~") {
          // negation picks its Coq spelling from the operand type at the
          // application site (handled in the App case)
          return gident("Z.opp");
        }
        return gident(e->name);
      }
      case EK::Int: {
        auto n = gterm(GTerm::Kind::IntLit);
        n->intVal = std::stoll(e->literal[0] == '~' ? "-" + e->literal.substr(1) : e->literal);
        return n;
      }
      case EK::Real: {
        auto n = gterm(GTerm::Kind::RealLit);
        n->text = e->literal;
        for (auto& c : n->text)
          if (c == '~') c = '-';
        return n;
      }
      case EK::String: {
        auto s = gterm(GTerm::Kind::StringLit);
        s->text = Lexer::decodeStringText(e->literal, e->span);
        return s;
      }
      case EK::Char: {
        auto c = gterm(GTerm::Kind::CharLit);
        c->text = Lexer::decodeStringText(e->literal.substr(1), e->span);
        return c;
      }
      case EK::Unit:
        return gterm(GTerm::Kind::UnitLit);
      case EK::Tuple: {
        auto t = gterm(GTerm::Kind::Tuple);
        for (auto& el : e->items) t->items.push_back(translateExp(el));
        return t;
      }
      case EK::List: {
        auto l = gterm(GTerm::Kind::ListLit);
        for (auto& el : e->items) l->items.push_back(translateExp(el));
        return l;
      }
      case EK::Record: {
        SemType ty = el_.typeOf(e.get());
        while (ty.is(SemType::Kind::Abbrev)) ty = ty.abbrevExpansion();
        std::vector<std::string> order;
        for (auto& [lab, sub] : e->fields) order.push_back(lab);
        std::string rid = recordName(ty, &order);
        auto r = gterm(GTerm::Kind::RecordLit);
        for (size_t i = 0; i < ty.labels.size(); ++i) {
          for (auto& [lab, sub] : e->fields)
            if (lab == ty.labels[i])
              r->fields.emplace_back(rid + "_" + lab, translateExp(sub));
        }
        return r;
      }
      case EK::App: {
        // SML negation: `~ x` has no Coq notation; dispatch on the operand type.
        if (e->items[0]->kind == Exp::Kind::Ident && e->items[0]->name == "~" &&
            !e->items[0]->opMarked) {
          const IdInfo* info = el_.identOf(e->items[0].get());
          if (!info || info->sort != IdSort::Constructor) {
            SemType argTy = el_.typeOf(e->items[1].get());
            auto neg = gterm(GTerm::Kind::App);
            neg->items = {gident(argTy.is(SemType::Kind::Real) ? "PrimFloat.opp" : "Z.opp"),
                          translateExp(e->items[1])};
            return gparen(neg);
          }
        }
        auto a = gterm(GTerm::Kind::App);
        GTermPtr fn = translateExp(e->items[0]);
        // collapse curried application chains for f a b rendering
        if (fn->kind == GTerm::Kind::Paren && fn->items[0]->kind == GTerm::Kind::App) {
          a->items = fn->items[0]->items;
        } else {
          a->items.push_back(fn);
        }
        a->items.push_back(translateExp(e->items[1]));
        return gparen(a);
      }
      case EK::InfixApp: {
        const IdInfo* info = el_.identOf(e.get());
        GTermPtr lhs = translateExp(e->items[0]);
        GTermPtr rhs = translateExp(e->items[1]);
        std::string op = e->name;
        bool isCtor = info && info->sort == IdSort::Constructor;
        if (!isCtor && op == "@") op = "++";
        static const std::set<std::string> basisOps = {
            "+", "-", "*", "/", "div", "mod", "<", "<=", ">", ">=", "=", "<>", "^", "++",
            "::"};
        if (isCtor || basisOps.count(op) || notations_.count(op)) {
          auto i = gterm(GTerm::Kind::InfixApp);
          i->name = isCtor ? info->ctorName : op;
          i->items = {lhs, rhs};
          return gparen(i);
        }
        // infix status granted only later in the file: fall back to prefix form
        auto tup = gterm(GTerm::Kind::Tuple);
        tup->items = {lhs, rhs};
        auto a = gterm(GTerm::Kind::App);
        a->items = {gident(e->name), tup};
        return gparen(a);
      }
      case EK::Fn:
        return translateFn(e);
      case EK::Case: {
        auto m = gterm(GTerm::Kind::Match);
        m->items.push_back(translateExp(e->items[0]));
        m->exhaustive = el_.exhaustive.at(e.get());
        for (auto& rule : e->rules)
          m->branches.push_back(GBranch{translatePattern(rule.pat), translateExp(rule.body)});
        if (!m->exhaustive) {
          ensurePatternFailure();
          m->branches.push_back(GBranch{gpat(GPattern::Kind::Wildcard), gident("patternFailure")});
        }
        return m;
      }
      case EK::If: {
        auto i = gterm(GTerm::Kind::If);
        i->items = {translateExp(e->items[0]), translateExp(e->items[1]),
                    translateExp(e->items[2])};
        return gparen(i);
      }
      case EK::Andalso: {
        auto b = gterm(GTerm::Kind::BoolAnd);
        b->items = {translateExp(e->items[0]), translateExp(e->items[1])};
        return gparen(b);
      }
      case EK::Orelse: {
        auto b = gterm(GTerm::Kind::BoolOr);
        b->items = {translateExp(e->items[0]), translateExp(e->items[1])};
        return gparen(b);
      }
      case EK::Let:
        return translateLet(e);
      case EK::Typed: {
        auto a = gterm(GTerm::Kind::Annot);
        a->items = {translateExp(e->items[0]), translateType(el_.typeOf(e.get()))};
        return a;
      }
    }
    return gident("?");
  }

  GTermPtr translateFn(const ExpPtr& e) {
    // Single variable rule: plain fun. Anything else matches on a fresh argument.
    auto stripTyped = [](PatPtr p) {
      while (p->kind == Pat::Kind::Typed) p = p->items[0];
      return p;
    };
    if (e->rules.size() == 1) {
      PatPtr p = stripTyped(e->rules[0].pat);
      if (p->kind == Pat::Kind::Ident && !el_.identOf(p.get())) {
        auto f = gterm(GTerm::Kind::Fun);
        GBinder b;
        b.name = p->name;
        f->binders = {b};
        f->items = {translateExp(e->rules[0].body)};
        return gparen(f);
      }
      if (p->kind == Pat::Kind::Wildcard) {
        auto f = gterm(GTerm::Kind::Fun);
        GBinder b;
        b.name = namer_.fresh(FreshNamer::Kind::LambdaArg);
        f->binders = {b};
        f->items = {translateExp(e->rules[0].body)};
        return gparen(f);
      }
    }
    std::string arg = namer_.fresh(FreshNamer::Kind::LambdaArg);
    auto m = gterm(GTerm::Kind::Match);
    m->items.push_back(gident(arg));
    m->exhaustive = el_.exhaustive.at(e.get());
    for (auto& rule : e->rules)
      m->branches.push_back(GBranch{translatePattern(rule.pat), translateExp(rule.body)});
    if (!m->exhaustive) {
      ensurePatternFailure();
      m->branches.push_back(GBranch{gpat(GPattern::Kind::Wildcard), gident("patternFailure")});
    }
    auto f = gterm(GTerm::Kind::Fun);
    GBinder b;
    b.name = arg;
    f->binders = {b};
    f->items = {m};
    return gparen(f);
  }

  GTermPtr translateLet(const ExpPtr& e) {
    GTermPtr body = translateExp(e->items[0]);
    // fold declarations from last to first into nested lets
    for (auto it = e->decls.rbegin(); it != e->decls.rend(); ++it) {
      const DeclPtr& d = *it;
      if (d->kind == Decl::Kind::Fun || d->kind == Decl::Kind::ValRec)
        unsupported(d->span, "function declarations inside 'let' blocks");
      if (d->kind != Decl::Kind::Val)
        unsupported(d->span, "this declaration form inside 'let' blocks");
      const ValBinding& vb = d->valBindings[0];
      bool exhaustive = el_.exhaustive.at(d.get());
      std::vector<std::string> vars = eng_.collectVars(*vb.pat);
      GTermPtr bound = translateExp(vb.exp);
      PatPtr stripped = vb.pat;
      while (stripped->kind == Pat::Kind::Typed) stripped = stripped->items[0];
      if (vars.size() == 1 && exhaustive && stripped->kind == Pat::Kind::Ident) {
        auto l = gterm(GTerm::Kind::Let);
        l->name = vars[0];
        l->items = {bound, body};
        body = l;
        continue;
      }
      if (!exhaustive) ensurePatternFailure();
      GPatternPtr gp = translatePattern(vb.pat);
      for (auto vit = vars.rbegin(); vit != vars.rend(); ++vit) {
        auto m = gterm(GTerm::Kind::Match);
        m->items.push_back(bound);
        m->exhaustive = exhaustive;
        m->branches.push_back(GBranch{gp, gident(*vit)});
        if (!exhaustive)
          m->branches.push_back(
              GBranch{gpat(GPattern::Kind::Wildcard), gident("patternFailure")});
        auto l = gterm(GTerm::Kind::Let);
        l->name = *vit;
        l->items = {m, body};
        body = l;
      }
    }
    return gparen(body);
  }

  // ---- precondition formulas ----

  GTermPtr skeletonTerm(const PatPtr& p, const SemType& t) {
    using PK = Pat::Kind;
    SemType ty = t;
    while (ty.is(SemType::Kind::Abbrev)) ty = ty.abbrevExpansion();
    switch (p->kind) {
      case PK::Ident: {
        if (p->name == "nil") return gterm(GTerm::Kind::ListLit);
        return gident(p->name);  // existential y_k or nullary constructor
      }
      case PK::Int: {
        auto n = gterm(GTerm::Kind::IntLit);
        n->intVal = std::stoll(p->literal[0] == '~' ? "-" + p->literal.substr(1) : p->literal);
        return n;
      }
      case PK::String: {
        auto s = gterm(GTerm::Kind::StringLit);
        s->text = Lexer::decodeStringText(p->literal, p->span);
        return s;
      }
      case PK::Char: {
        auto c = gterm(GTerm::Kind::CharLit);
        c->text = Lexer::decodeStringText(p->literal.substr(1), p->span);
        return c;
      }
      case PK::Tuple: {
        auto tup = gterm(GTerm::Kind::Tuple);
        for (size_t i = 0; i < p->items.size(); ++i)
          tup->items.push_back(skeletonTerm(p->items[i], ty.args[i]));
        return tup;
      }
      case PK::List: {
        auto l = gterm(GTerm::Kind::ListLit);
        for (auto& el : p->items) l->items.push_back(skeletonTerm(el, ty.args[0]));
        return l;
      }
      case PK::InfixApp: {
        auto i = gterm(GTerm::Kind::InfixApp);
        i->name = p->name;
        SemType lhsT = ty, rhsT = ty;
        if (ty.is(SemType::Kind::List)) {
          lhsT = ty.args[0];
          rhsT = ty;
        }
        i->items = {skeletonTerm(p->items[0], lhsT), skeletonTerm(p->items[1], rhsT)};
        return i;
      }
      case PK::ConApp: {
        auto a = gterm(GTerm::Kind::App);
        a->items = {gident(p->name)};
        PatternEngine::Signature sig = eng_.signatureOf(ty);
        SemType payload = ty;
        for (auto& c : sig.ctors)
          if (c.name == p->name && !c.argTypes.empty()) payload = c.argTypes[0];
        a->items.push_back(skeletonTerm(p->items[0], payload));
        return a;
      }
      case PK::Record: {
        auto r = gterm(GTerm::Kind::RecordLit);
        std::string rid = recordName(ty, nullptr);
        for (auto& [lab, sub] : p->fields) {
          auto it = std::find(ty.labels.begin(), ty.labels.end(), lab);
          size_t idx = size_t(it - ty.labels.begin());
          r->fields.emplace_back(rid + "_" + lab, skeletonTerm(sub, ty.args[idx]));
        }
        return r;
      }
      default:
        return gident("_");
    }
  }

  // Renders the synthesized precondition: one parenthesized disjunct per
  // clause (parens only when there are several); within a disjunct the atoms
  // chain as `exists vars, body /\ <next>`, matching the flat printed form.
  GTermPtr formulaTerm(const PreconditionFormula& f, const std::vector<SemType>& argTypes) {
    size_t totalAtoms = 0;
    for (auto& d : f.disjuncts) totalAtoms += d.size();
    bool eqForm = totalAtoms > 1;

    auto atomBody = [&](const PreconditionAtom& atom) -> GTermPtr {
      std::string argName = "x" + std::to_string(atom.argIndex + 1);
      GTermPtr skel = skeletonTerm(atom.skeleton, argTypes[atom.argIndex]);
      if (eqForm) {
        auto app = gterm(GTerm::Kind::App);
        app->items = {gident("eq"), gparen(gident(argName)), gparen(skel)};
        return app;
      }
      auto eq = gterm(GTerm::Kind::PropEq);
      eq->items = {gident(argName), skel};
      return eq;
    };

    std::function<GTermPtr(const std::vector<PreconditionAtom>&, size_t)> chain =
        [&](const std::vector<PreconditionAtom>& atoms, size_t i) -> GTermPtr {
      GTermPtr body = atomBody(atoms[i]);
      if (i + 1 < atoms.size()) {
        auto conj = gterm(GTerm::Kind::PropAnd);
        conj->items = {body, chain(atoms, i + 1)};
        body = conj;
      }
      if (atoms[i].existentials.empty()) return body;
      auto ex = gterm(GTerm::Kind::PropExists);
      for (auto& v : atoms[i].existentials) {
        GBinder b;
        b.name = v;
        ex->binders.push_back(b);
      }
      ex->items = {body};
      return ex;
    };

    std::vector<GTermPtr> disjuncts;
    for (auto& d : f.disjuncts) disjuncts.push_back(chain(d, 0));
    if (disjuncts.size() == 1) return disjuncts[0];
    GTermPtr out = gparen(disjuncts.back());
    for (size_t i = disjuncts.size() - 1; i-- > 0;) {
      auto orNode = gterm(GTerm::Kind::PropOr);
      orNode->items = {gparen(disjuncts[i]), out};
      out = orNode;
    }
    return out;
  }

  // ---- declarations ----

  void translateDecl(const DeclPtr& d, std::vector<GSentencePtr>& out) {
    switch (d->kind) {
      case Decl::Kind::Val: return translateVal(d, out);
      case Decl::Kind::ValRec: return translateValRec(d, out);
      case Decl::Kind::Fun: return translateFun(d, out);
      case Decl::Kind::Datatype: return translateDatatype(d, out);
      case Decl::Kind::TypeAbbrev: return translateTypeAbbrev(d, out);
      case Decl::Kind::Structure: return translateStructure(d, out);
      case Decl::Kind::Signature: return translateSignature(d, out);
      case Decl::Kind::Functor: return translateFunctor(d, out);
      case Decl::Kind::InfixDirective: return;  // recorded in the infix environment
      case Decl::Kind::Local: {
        warnAt(d->span, "'local' declarations are flattened; hidden names become visible");
        for (auto& ld : d->localDecls) translateDecl(ld, out);
        for (auto& bd : d->bodyDecls) translateDecl(bd, out);
        return;
      }
    }
  }

  std::vector<GBinder> implicitTyVarBinders(const std::vector<std::string>& quantified) {
    std::vector<GBinder> out;
    for (auto& key : quantified) {
      GBinder b;
      b.style = GBinder::Style::Curly;
      b.name = tyvarCoqName(SemType::tyvar(key));
      b.type = gterm(GTerm::Kind::Sort);
      out.push_back(b);
    }
    return out;
  }

  void translateVal(const DeclPtr& d, std::vector<GSentencePtr>& out) {
    const ValBinding& vb = d->valBindings[0];
    const BindingInfo& info = el_.valInfo.at(d.get());
    tvcReset();

    std::vector<std::string> vars = eng_.collectVars(*vb.pat);
    if (vars.empty()) {
      warnAt(d->span, "value binding introduces no names; nothing to emit");
      return;
    }

    PatPtr stripped = vb.pat;
    while (stripped->kind == Pat::Kind::Typed) stripped = stripped->items[0];
    bool singleVar = stripped->kind == Pat::Kind::Ident && vars.size() == 1;

    if (singleVar && info.exhaustive) {
      auto s = gsentence(GSentence::Kind::Definition);
      s->name = vars[0];
      s->binders = implicitTyVarBinders(info.quantified);
      GTermPtr body = translateExp(vb.exp);
      if (!info.quantified.empty()) {
        auto a = gterm(GTerm::Kind::Annot);
        a->items = {body, translateType(info.rhsType)};
        body = a;
      }
      s->body = body;
      emitSentence(out, s);
      return;
    }

    // Split into one Definition per bound variable; the match structure is
    // identical across them apart from the returned variable.
    if (!info.exhaustive) ensurePatternFailure();
    GTermPtr scrut = translateExp(vb.exp);
    GPatternPtr gp = translatePattern(vb.pat);
    for (const BoundVar& v : info.boundVars) {
      auto s = gsentence(GSentence::Kind::Definition);
      s->name = v.name;
      s->binders = implicitTyVarBinders(v.quantified);
      auto m = gterm(GTerm::Kind::Match);
      GTermPtr sc = scrut;
      if (!info.quantified.empty()) {
        auto a = gterm(GTerm::Kind::Annot);
        a->items = {scrut, translateType(info.rhsType)};
        sc = a;
      }
      m->items.push_back(sc);
      m->exhaustive = info.exhaustive;
      m->branches.push_back(GBranch{gp, gident(v.name)});
      if (!info.exhaustive)
        m->branches.push_back(GBranch{gpat(GPattern::Kind::Wildcard), gident("patternFailure")});
      s->body = m;
      emitSentence(out, s);
    }
  }

  struct ClauseView {
    std::vector<PatPtr> params;
    ExpPtr body;
  };

  // Shared by fun declarations and val rec.
  GEquationsFunc buildEquationsFunc(const std::string& name,
                                    const std::vector<ClauseView>& clauses,
                                    const std::vector<SemType>& paramTypes,
                                    const SemType& resultType, bool exhaustive,
                                    const std::optional<PreconditionFormula>& precond) {
    GEquationsFunc f;
    f.name = name;

    // Type variables appearing only in the result type need explicit binders;
    // the generalized parameter binders cannot introduce them.
    std::set<std::string> paramVars;
    Subst empty;
    for (auto& pt : paramTypes)
      for (auto& v : freeTyVars(pt, empty)) paramVars.insert(v);
    for (auto& v : freeTyVars(resultType, empty)) {
      if (!paramVars.count(v)) {
        GBinder b;
        b.style = GBinder::Style::Curly;
        b.name = tyvarCoqName(SemType::tyvar(v));
        b.type = gterm(GTerm::Kind::Sort);
        f.binders.push_back(b);
      }
    }

    for (size_t k = 0; k < paramTypes.size(); ++k) {
      GBinder b;
      b.style = containsTyVar(paramTypes[k]) ? GBinder::Style::Generalized
                                             : GBinder::Style::Paren;
      b.name = "x" + std::to_string(k + 1);
      b.type = translateType(paramTypes[k]);
      f.binders.push_back(b);
    }
    if (!exhaustive && precond) {
      GBinder h;
      h.style = GBinder::Style::Curly;
      h.name = "H";
      h.type = formulaTerm(*precond, paramTypes);
      f.binders.push_back(h);
    }
    f.returnType = translateType(resultType);

    for (auto& cl : clauses) {
      GClause gc;
      for (auto& p : cl.params) gc.pats.push_back(translatePattern(p));
      gc.body = translateExp(cl.body);
      f.clauses.push_back(std::move(gc));
    }
    if (!exhaustive) {
      GClause catchAll;
      for (size_t k = 0; k < paramTypes.size(); ++k)
        catchAll.pats.push_back(gpat(GPattern::Kind::Wildcard));
      catchAll.body = gident("_");
      f.clauses.push_back(std::move(catchAll));
    }
    return f;
  }

  static bool coqIdent(const std::string& name) {
    if (name.empty()) return false;
    if (!std::isalpha((unsigned char)name[0]) && name[0] != '_') return false;
    for (char c : name)
      if (!std::isalnum((unsigned char)c) && c != '_' && c != '\'' && c != '.') return false;
    return true;
  }

  void translateFun(const DeclPtr& d, std::vector<GSentencePtr>& out) {
    tvcReset();
    auto eq = gsentence(GSentence::Kind::Equations);
    for (auto& fb : d->funBindings) {
      if (!coqIdent(fb.name))
        unsupported(fb.clauses.front().span,
                    "symbolic function name '" + fb.name + "' has no Gallina counterpart");
      const FunInfo& info = el_.funInfo.at(&fb);
      std::vector<ClauseView> clauses;
      for (auto& cl : fb.clauses) clauses.push_back(ClauseView{cl.params, cl.body});
      eq->funcs.push_back(buildEquationsFunc(fb.name, clauses, info.paramTypes,
                                             info.resultType, info.exhaustive,
                                             info.precondition));
      checkStructuralRecursion(d, fb);
    }
    emitSentence(out, eq);

    for (auto& fb : d->funBindings) {
      if (fb.contract) emitSentence(out, contractTheorem(*fb.contract));
      if (fb.clauses.front().opMarked && el_.infixEnv.contains(fb.name))
        emitInfixSentences(fb.name, out);
    }
  }

  void translateValRec(const DeclPtr& d, std::vector<GSentencePtr>& out) {
    const ValBinding& vb = d->valBindings[0];
    const BindingInfo& info = el_.valInfo.at(d.get());
    tvcReset();
    SemType fnType = info.rhsType;
    while (fnType.is(SemType::Kind::Abbrev)) fnType = fnType.abbrevExpansion();
    std::vector<SemType> paramTypes = {fnType.args[0]};
    SemType resultType = fnType.args[1];

    std::vector<ClauseView> clauses;
    for (auto& rule : vb.exp->rules) clauses.push_back(ClauseView{{rule.pat}, rule.body});
    bool exhaustive = el_.exhaustive.at(vb.exp.get());
    std::optional<PreconditionFormula> precond;
    if (!exhaustive) {
      PatternMatrix m;
      m.columnTypes = paramTypes;
      for (auto& rule : vb.exp->rules) m.rows.push_back({rule.pat});
      precond = eng_.synthesizePrecondition(m);
    }
    auto eq = gsentence(GSentence::Kind::Equations);
    eq->funcs.push_back(buildEquationsFunc(vb.pat->name, clauses, paramTypes, resultType,
                                           exhaustive, precond));
    emitSentence(out, eq);
  }

  GSentencePtr contractTheorem(const Contract& c) {
    const ElabContract& ec = el_.contracts.at(&c);
    auto s = gsentence(GSentence::Kind::Theorem);
    s->name = c.fname + "_THM";
    s->admitted = true;

    auto forall = gterm(GTerm::Kind::PropForall);
    for (auto& [name, ty] : ec.vars) {
      GBinder b;
      b.name = name;
      forall->binders.push_back(b);
    }

    auto app = gterm(GTerm::Kind::App);
    app->items.push_back(gident(c.fname));
    for (auto& in : c.inputs) app->items.push_back(contractPatTerm(in));
    std::string outVar = ec.vars.back().first;

    auto eqApp = gterm(GTerm::Kind::PropEq);
    eqApp->items = {app, gident(outVar)};
    auto eqReq = gterm(GTerm::Kind::PropEq);
    eqReq->items = {translateExp(c.requires_), gident("true")};
    auto conj = gterm(GTerm::Kind::PropAnd);
    conj->items = {eqApp, eqReq};
    auto eqEns = gterm(GTerm::Kind::PropEq);
    eqEns->items = {translateExp(c.ensures_), gident("true")};
    auto imp = gterm(GTerm::Kind::Arrow);
    imp->items = {conj, eqEns};
    forall->items = {imp};
    s->body = forall;
    return s;
  }

  GTermPtr contractPatTerm(const PatPtr& p) {
    switch (p->kind) {
      case Pat::Kind::Ident:
        return gident(p->name);
      case Pat::Kind::Unit:
        return gterm(GTerm::Kind::UnitLit);
      case Pat::Kind::Typed:
        return contractPatTerm(p->items[0]);
      case Pat::Kind::Tuple: {
        auto t = gterm(GTerm::Kind::Tuple);
        for (auto& el : p->items) t->items.push_back(contractPatTerm(el));
        return t;
      }
      default:
        fail(Stage::Translate, p->span, "contract bindings must be variables or tuples");
    }
  }

  void emitInfixSentences(const std::string& name, std::vector<GSentencePtr>& out) {
    auto alias = gsentence(GSentence::Kind::Definition);
    alias->name = "op" + name;
    alias->body = gident(name);
    emitSentence(out, alias);

    Fixity fx = el_.infixEnv.at(name);
    auto notation = gsentence(GSentence::Kind::Notation);
    notation->text = "x '" + name + "' y";
    auto app = gterm(GTerm::Kind::App);
    auto tup = gterm(GTerm::Kind::Tuple);
    tup->items = {gident("x"), gident("y")};
    app->items = {gident(name), tup};
    notation->body = gparen(app);
    notation->leftAssoc = !fx.rightAssoc;
    notation->level = 29 - fx.precedence;
    emitSentence(out, notation);
    notations_.insert(name);
  }

  // Warn when a recursive call does not pass a strict sub-pattern variable in
  // some argument position (the emitted Equations may need a measure).
  void checkStructuralRecursion(const DeclPtr& d, const FunBinding& fb) {
    std::set<std::string> groupNames;
    for (auto& g : d->funBindings) groupNames.insert(g.name);

    for (auto& cl : fb.clauses) {
      // variables bound strictly inside each parameter pattern
      std::vector<std::set<std::string>> properVars;
      for (auto& p : cl.params) {
        PatPtr stripped = p;
        while (stripped->kind == Pat::Kind::Typed) stripped = stripped->items[0];
        std::set<std::string> vars;
        if (stripped->kind != Pat::Kind::Ident && stripped->kind != Pat::Kind::Wildcard)
          for (auto& v : eng_.collectVars(*stripped)) vars.insert(v);
        properVars.push_back(std::move(vars));
      }
      bool ok = true;
      std::function<void(const ExpPtr&)> scan = [&](const ExpPtr& e) {
        if (e->kind == Exp::Kind::App) {
          // unwind the curried application chain
          std::vector<const Exp*> args;
          const Exp* head = e.get();
          while (head->kind == Exp::Kind::App) {
            args.push_back(head->items[1].get());
            head = head->items[0].get();
          }
          std::reverse(args.begin(), args.end());
          if (head->kind == Exp::Kind::Ident && groupNames.count(head->name)) {
            bool structural = false;
            for (size_t k = 0; k < args.size() && k < properVars.size(); ++k) {
              if (args[k]->kind == Exp::Kind::Ident &&
                  properVars[k].count(args[k]->name))
                structural = true;
            }
            if (!structural) ok = false;
          }
        }
        for (auto& sub : e->items) scan(sub);
        for (auto& [lab, sub] : e->fields) scan(sub);
        for (auto& r : e->rules) scan(r.body);
        for (auto& dd : e->decls)
          for (auto& vbb : dd->valBindings) scan(vbb.exp);
      };
      scan(cl.body);
      if (!ok) {
        warnAt(cl.span, "recursion in '" + fb.name +
                            "' is not structurally decreasing; the emitted Equations may "
                            "need a termination measure to compile");
        return;
      }
    }
  }

  void translateDatatype(const DeclPtr& d, std::vector<GSentencePtr>& out) {
    tvcReset();
    auto ind = gsentence(GSentence::Kind::Inductive);
    for (auto& db : d->dataBindings) {
      int uid = el_.dataUids.at(&db);
      const DatatypeInfo& info = *el_.types->find(uid);
      GInductive g;
      g.name = db.name;
      for (auto& key : info.paramKeys) {
        GBinder b;
        b.style = GBinder::Style::Curly;
        b.name = tyvarCoqName(SemType::tyvar(key));
        b.type = gterm(GTerm::Kind::Sort);
        g.params.push_back(b);
      }
      for (auto& ctor : info.ctors) {
        GConstructor gc;
        gc.name = ctor.name;
        if (ctor.payload) {
          auto arrow = gterm(GTerm::Kind::Arrow);
          arrow->items = {translateType(*ctor.payload), gident(db.name)};
          gc.type = arrow;
        }
        g.ctors.push_back(std::move(gc));
      }
      ind->datatypes.push_back(std::move(g));
    }
    emitSentence(out, ind);
  }

  void translateTypeAbbrev(const DeclPtr& d, std::vector<GSentencePtr>& out) {
    for (auto& tb : d->typeBindings) {
      tvcReset();
      const AbbrevInfo& ai = el_.abbrevs.at(&tb);
      auto s = gsentence(GSentence::Kind::Definition);
      s->name = tb.name;
      for (auto& key : ai.paramKeys) {
        GBinder b;
        b.style = GBinder::Style::Curly;
        b.name = tyvarCoqName(SemType::tyvar(key));
        b.type = gterm(GTerm::Kind::Sort);
        s->binders.push_back(b);
      }
      std::vector<std::string> order;
      const std::vector<std::string>* hint = nullptr;
      if (tb.body->kind == TyExp::Kind::Record) {
        for (auto& [lab, ty] : tb.body->fields) order.push_back(lab);
        hint = &order;
      }
      s->body = translateType(ai.body, hint);
      emitSentence(out, s);
    }
  }

  // ---- modules ----

  std::vector<GSentencePtr> translateDecls(const std::vector<DeclPtr>& decls) {
    std::vector<GSentencePtr> out;
    for (auto& d : decls) translateDecl(d, out);
    return out;
  }

  GSentencePtr signatureBody(const std::string& name, const SigExpPtr& sig) {
    auto mt = gsentence(GSentence::Kind::ModuleType);
    mt->name = name;
    modulePath_.push_back(name);
    for (auto& spec : sig->specs) {
      switch (spec.kind) {
        case SigSpec::Kind::Type: {
          auto p = gsentence(GSentence::Kind::Parameter);
          p->name = spec.name;
          GTermPtr ty = gterm(GTerm::Kind::Sort);
          for (size_t i = 0; i < spec.params.size(); ++i) {
            auto arrow = gterm(GTerm::Kind::Arrow);
            arrow->items = {gterm(GTerm::Kind::Sort), ty};
            ty = arrow;
          }
          p->body = ty;
          appendWithPending(mt->moduleBody, p);
          break;
        }
        case SigSpec::Kind::TypeDef: {
          tvcReset();
          auto def = gsentence(GSentence::Kind::Definition);
          def->name = spec.name;
          std::vector<std::string> order;
          const std::vector<std::string>* hint = nullptr;
          if (spec.ty->kind == TyExp::Kind::Record) {
            for (auto& [lab, ty] : spec.ty->fields) order.push_back(lab);
            hint = &order;
          }
          def->body = translateType(el_.sigSpecTypes.at(&spec), hint);
          appendWithPending(mt->moduleBody, def);
          break;
        }
        case SigSpec::Kind::Val: {
          tvcReset();
          auto p = gsentence(GSentence::Kind::Parameter);
          p->name = spec.name;
          p->body = translateType(el_.sigSpecTypes.at(&spec), nullptr);
          appendWithPending(mt->moduleBody, p);
          break;
        }
      }
    }
    modulePath_.pop_back();
    return mt;
  }

  void appendWithPending(std::vector<GSentencePtr>& body, GSentencePtr s) {
    for (auto& p : pending_) body.push_back(p);
    pending_.clear();
    body.push_back(std::move(s));
  }

  void translateSignature(const DeclPtr& d, std::vector<GSentencePtr>& out) {
    if (d->sigExp->kind == SigExp::Kind::Name) {
      auto mt = gsentence(GSentence::Kind::ModuleType);
      mt->name = d->name;
      mt->moduleAlias = d->sigExp->name;
      emitSentence(out, mt);
      return;
    }
    emitSentence(out, signatureBody(d->name, d->sigExp));
  }

  // Lift an inline signature into the Σ context; returns its fresh name.
  std::string liftSignature(const SigExpPtr& sig) {
    if (sig->kind == SigExp::Kind::Name) return sig->name;
    std::string name = namer_.fresh(FreshNamer::Kind::ModuleLift);
    pending_.push_back(signatureBody(name, sig));
    return name;
  }

  std::string liftStructure(const StrExpPtr& se) {
    if (se->kind == StrExp::Kind::Name) return se->name;
    if (se->kind == StrExp::Kind::FunctorApp) {
      // nested application: lift the argument first, then the application
      std::string argName = liftStructure(se->arg);
      std::string name = namer_.fresh(FreshNamer::Kind::ModuleLift);
      auto m = gsentence(GSentence::Kind::Module);
      m->name = name;
      m->moduleApp = GModuleApp{se->name, argName};
      pending_.push_back(m);
      return name;
    }
    std::string name = namer_.fresh(FreshNamer::Kind::ModuleLift);
    auto m = gsentence(GSentence::Kind::Module);
    m->name = name;
    modulePath_.push_back(name);
    m->moduleBody = translateDecls(se->decls);
    modulePath_.pop_back();
    pending_.push_back(m);
    return name;
  }

  void translateStructure(const DeclPtr& d, std::vector<GSentencePtr>& out) {
    std::optional<std::string> ascription;
    if (d->ascription) {
      ascription = liftSignature(d->ascription);
      if (d->opaque) {
        warnAt(d->span, "opaque ascription (:>) weakened to transparent (<:)");
        auto note = gsentence(GSentence::Kind::Comment);
        note->text = "opaque ascription ':>' weakened to '<:'";
        pending_.push_back(note);
      }
    }
    switch (d->strExp->kind) {
      case StrExp::Kind::Name: {
        auto m = gsentence(GSentence::Kind::Module);
        m->name = d->name;
        m->ascription = ascription;
        m->moduleAlias = d->strExp->name;
        emitSentence(out, m);
        return;
      }
      case StrExp::Kind::Inline: {
        flushPending(out);
        auto m = gsentence(GSentence::Kind::Module);
        m->name = d->name;
        m->ascription = ascription;
        modulePath_.push_back(d->name);
        m->moduleBody = translateDecls(d->strExp->decls);
        modulePath_.pop_back();
        emitSentence(out, m);
        return;
      }
      case StrExp::Kind::FunctorApp: {
        std::string argName = liftStructure(d->strExp->arg);
        auto m = gsentence(GSentence::Kind::Module);
        m->name = d->name;
        m->ascription = ascription;
        m->moduleApp = GModuleApp{d->strExp->name, argName};
        emitSentence(out, m);
        return;
      }
    }
  }

  void translateFunctor(const DeclPtr& d, std::vector<GSentencePtr>& out) {
    std::string sigName = liftSignature(d->paramSig);
    flushPending(out);
    auto m = gsentence(GSentence::Kind::Module);
    m->name = d->name;
    m->moduleParam = {{*d->paramName, sigName}};
    modulePath_.push_back(d->name);
    m->moduleBody = translateDecls(d->strExp->decls);
    modulePath_.pop_back();
    emitSentence(out, m);
  }
};

inline TranslateResult translateProgram(const Elaboration& el) {
  Translator t(el);
  return t.run();
}

}  // namespace sml2coq
