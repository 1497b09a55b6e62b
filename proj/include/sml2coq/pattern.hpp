#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sml2coq/ast.hpp"
#include "sml2coq/types.hpp"

namespace sml2coq {

// Resolution callbacks provided by the elaborator: constructor status of
// identifier patterns and the inferred type of any pattern node.
struct PatternOracle {
  const TypeTable* types = nullptr;
  std::function<const IdInfo*(const Pat*)> identInfo;  // null for plain variables
  std::function<SemType(const Pat*)> patType;          // fully resolved
};

struct PatternMatrix {
  std::vector<std::vector<PatPtr>> rows;  // all rows of width columnTypes.size()
  std::vector<SemType> columnTypes;
};

// One atom of a synthesized precondition: exists <existentials>, arg_i = skeleton.
struct PreconditionAtom {
  size_t argIndex = 0;
  std::vector<std::string> existentials;
  PatPtr skeleton;
};

// Disjunction of conjunctions of atoms, one disjunct per source clause.
struct PreconditionFormula {
  std::vector<std::vector<PreconditionAtom>> disjuncts;
};

class PatternEngine {
 public:
  explicit PatternEngine(PatternOracle oracle) : o_(std::move(oracle)) {}

  // ---- resolved pattern core (usefulness algorithm) ----

  struct RPat {
    bool wild = false;
    int con = -1;               // index into the column signature
    std::string lit;            // literal "constructors" (int/string/char)
    std::vector<RPat> args;
    static RPat wildcard() { RPat r; r.wild = true; return r; }
  };

  struct CtorSig {
    std::string name;
    std::vector<SemType> argTypes;
  };

  struct Signature {
    bool finite = false;        // literals and abstract columns are never complete
    std::vector<CtorSig> ctors;
  };

  Signature signatureOf(const SemType& t) const {
    using K = SemType::Kind;
    switch (t.kind) {
      case K::Bool:
        return {true, {{"false", {}}, {"true", {}}}};
      case K::Unit:
        return {true, {{"()", {}}}};
      case K::Tuple:
        return {true, {{"(,)", t.args}}};
      case K::Record:
        return {true, {{"{}", t.args}}};
      case K::List:
        return {true, {{"nil", {}}, {"::", {t.args[0], t}}}};
      case K::Option:
        return {true, {{"NONE", {}}, {"SOME", {t.args[0]}}}};
      case K::Data: {
        const DatatypeInfo* info = o_.types ? o_.types->find(t.uid) : nullptr;
        if (!info || info->abstract) return {false, {}};
        Signature sig;
        sig.finite = true;
        for (auto& c : info->ctors) {
          CtorSig cs{c.name, {}};
          if (c.payload)
            cs.argTypes.push_back(substituteParams(*c.payload, info->paramKeys, t.args));
          sig.ctors.push_back(std::move(cs));
        }
        return sig;
      }
      case K::Abbrev:
        return signatureOf(t.abbrevExpansion());
      default:
        return {false, {}};  // int/string/char literals; tyvar/real/arrow columns
    }
  }

  // ---- spec-facing operations over source patterns ----

  bool isUseful(const PatternMatrix& m, const std::vector<PatPtr>& row) const {
    std::vector<std::vector<RPat>> rm;
    for (auto& r : m.rows) rm.push_back(resolveRow(r, m.columnTypes));
    return usefulR(rm, resolveRow(row, m.columnTypes), m.columnTypes);
  }

  bool isExhaustive(const PatternMatrix& m) const {
    std::vector<std::vector<RPat>> rm;
    for (auto& r : m.rows) rm.push_back(resolveRow(r, m.columnTypes));
    std::vector<RPat> wilds(m.columnTypes.size(), RPat::wildcard());
    return !usefulR(rm, wilds, m.columnTypes);
  }

  // Indices of clauses no value can reach (reported as warnings upstream).
  std::vector<size_t> redundantRows(const PatternMatrix& m) const {
    std::vector<size_t> out;
    std::vector<std::vector<RPat>> prefix;
    for (size_t i = 0; i < m.rows.size(); ++i) {
      auto r = resolveRow(m.rows[i], m.columnTypes);
      if (i > 0 && !usefulR(prefix, r, m.columnTypes)) out.push_back(i);
      prefix.push_back(std::move(r));
    }
    return out;
  }

  // True iff p matches every value of type t.
  bool isGeneric(const Pat& p, const SemType& t) const {
    using PK = Pat::Kind;
    SemType ty = t;
    while (ty.is(SemType::Kind::Abbrev)) ty = ty.abbrevExpansion();
    switch (p.kind) {
      case PK::Wildcard:
      case PK::Unit:
        return true;
      case PK::Ident: {
        const IdInfo* info = o_.identInfo(&p);
        if (!info || info->sort != IdSort::Constructor) return true;  // variable
        return ctorCount(ty) == 1;  // nullary constructor of a one-constructor type
      }
      case PK::Int: case PK::String: case PK::Char:
        return false;
      case PK::Typed:
        return isGeneric(*p.items[0], ty);
      case PK::Layered:
        return isGeneric(*p.items[0], ty);
      case PK::Tuple: {
        for (size_t i = 0; i < p.items.size(); ++i)
          if (!isGeneric(*p.items[i], ty.args[i])) return false;
        return true;
      }
      case PK::Record: {
        for (auto& [lab, sub] : p.fields) {
          const SemType* ft = fieldType(ty, lab);
          if (!ft || !isGeneric(*sub, *ft)) return false;
        }
        return true;  // ellipsis-covered fields match anything
      }
      case PK::List:
        return false;  // nil or :: — list has two constructors
      case PK::ConApp: {
        if (ctorCount(ty) != 1) return false;
        const SemType payload = conPayloadType(p, ty);
        return isGeneric(*p.items[0], payload);
      }
      case PK::InfixApp: {
        if (ctorCount(ty) != 1) return false;  // excludes ::
        const SemType payload = conPayloadType(p, ty);
        if (!payload.is(SemType::Kind::Tuple) || payload.args.size() != 2) return false;
        return isGeneric(*p.items[0], payload.args[0]) &&
               isGeneric(*p.items[1], payload.args[1]);
      }
    }
    return false;
  }

  struct Generalized {
    std::vector<std::string> vars;  // fresh existential names, left to right
    PatPtr skeleton;
  };

  // Replaces every maximal generic sub-pattern with a fresh existential y_k.
  // Numbering restarts for every call (per atom).
  Generalized generalize(const Pat& p, const SemType& t) const {
    Generalized g;
    int counter = 0;
    g.skeleton = generalizeRec(p, t, g.vars, counter);
    return g;
  }

  std::optional<PreconditionFormula> synthesizePrecondition(const PatternMatrix& m) const {
    if (isExhaustive(m)) return std::nullopt;
    PreconditionFormula f;
    for (auto& row : m.rows) {
      std::vector<PreconditionAtom> atoms;
      for (size_t j = 0; j < row.size(); ++j) {
        if (isGeneric(*row[j], m.columnTypes[j])) continue;
        Generalized g = generalize(*row[j], m.columnTypes[j]);
        atoms.push_back(PreconditionAtom{j, std::move(g.vars), g.skeleton});
      }
      // A clause whose arguments are all generic matches everything: the
      // formula would be trivially true.
      if (atoms.empty()) return std::nullopt;
      f.disjuncts.push_back(std::move(atoms));
    }
    return f;
  }

  // Variables bound by p, in left-to-right depth-first order.
  std::vector<std::string> collectVars(const Pat& p) const {
    std::vector<std::string> out;
    collectVarsRec(p, out);
    return out;
  }

 private:
  PatternOracle o_;

  void collectVarsRec(const Pat& p, std::vector<std::string>& out) const {
    using PK = Pat::Kind;
    switch (p.kind) {
      case PK::Ident: {
        const IdInfo* info = o_.identInfo(&p);
        if (!info || info->sort != IdSort::Constructor) out.push_back(p.name);
        return;
      }
      case PK::Layered:
        out.push_back(p.name);
        collectVarsRec(*p.items[0], out);
        return;
      case PK::Record:
        for (auto& [lab, sub] : p.fields) collectVarsRec(*sub, out);
        return;
      default:
        for (auto& sub : p.items) collectVarsRec(*sub, out);
        return;
    }
  }

  static const SemType* fieldType(const SemType& rec, const std::string& lab) {
    for (size_t i = 0; i < rec.labels.size(); ++i)
      if (rec.labels[i] == lab) return &rec.args[i];
    return nullptr;
  }

  int ctorCount(const SemType& t) const {
    Signature sig = signatureOf(t);
    if (!sig.finite) return -1;
    return int(sig.ctors.size());
  }

  SemType conPayloadType(const Pat& p, const SemType& ty) const {
    Signature sig = signatureOf(ty);
    for (auto& c : sig.ctors)
      if (c.name == headCtorName(p)) return c.argTypes.empty() ? SemType::prim(SemType::Kind::Unit)
                                                               : c.argTypes[0];
    return o_.patType(p.items[0].get());
  }

  std::string headCtorName(const Pat& p) const {
    if (const IdInfo* info = o_.identInfo(&p)) return info->ctorName;
    return p.name;
  }

  PatPtr generalizeRec(const Pat& p, const SemType& t, std::vector<std::string>& vars,
                       int& counter) const {
    using PK = Pat::Kind;
    if (isGeneric(p, t)) {
      std::string name = "y" + std::to_string(++counter);
      vars.push_back(name);
      auto v = mkPat(PK::Ident, p.span);
      v->name = name;
      return v;
    }
    SemType ty = t;
    while (ty.is(SemType::Kind::Abbrev)) ty = ty.abbrevExpansion();
    switch (p.kind) {
      case PK::Typed:
      case PK::Layered:
        return generalizeRec(*p.items[0], ty, vars, counter);
      case PK::Int: case PK::String: case PK::Char: {
        auto c = mkPat(p.kind, p.span);
        c->literal = p.literal;
        return c;
      }
      case PK::Ident: {  // non-generic nullary constructor (nil, NONE, true, ...)
        auto c = mkPat(PK::Ident, p.span);
        c->name = p.name;
        return c;
      }
      case PK::Tuple: {
        auto n = mkPat(PK::Tuple, p.span);
        for (size_t i = 0; i < p.items.size(); ++i)
          n->items.push_back(generalizeRec(*p.items[i], ty.args[i], vars, counter));
        return n;
      }
      case PK::List: {
        auto n = mkPat(PK::List, p.span);
        for (auto& el : p.items)
          n->items.push_back(generalizeRec(*el, ty.args[0], vars, counter));
        return n;
      }
      case PK::Record: {
        auto n = mkPat(PK::Record, p.span);
        // Unfold: explicit fields generalized in place, ellipsis fields fresh.
        for (size_t i = 0; i < ty.labels.size(); ++i) {
          const PatPtr* sub = nullptr;
          for (auto& [lab, sp] : p.fields)
            if (lab == ty.labels[i]) sub = &sp;
          if (sub) {
            n->fields.emplace_back(ty.labels[i],
                                   generalizeRec(**sub, ty.args[i], vars, counter));
          } else {
            std::string name = "y" + std::to_string(++counter);
            vars.push_back(name);
            auto v = mkPat(PK::Ident, p.span);
            v->name = name;
            n->fields.emplace_back(ty.labels[i], v);
          }
        }
        return n;
      }
      case PK::ConApp: {
        auto n = mkPat(PK::ConApp, p.span);
        n->name = p.name;
        n->items.push_back(generalizeRec(*p.items[0], conPayloadType(p, ty), vars, counter));
        return n;
      }
      case PK::InfixApp: {
        auto n = mkPat(PK::InfixApp, p.span);
        n->name = p.name;
        SemType lhsT, rhsT;
        if (ty.is(SemType::Kind::List)) {
          lhsT = ty.args[0];
          rhsT = ty;
        } else {
          SemType payload = conPayloadType(p, ty);
          lhsT = rhsT = payload;
          if (payload.is(SemType::Kind::Tuple) && payload.args.size() == 2) {
            lhsT = payload.args[0];
            rhsT = payload.args[1];
          }
        }
        n->items.push_back(generalizeRec(*p.items[0], lhsT, vars, counter));
        n->items.push_back(generalizeRec(*p.items[1], rhsT, vars, counter));
        return n;
      }
      default: {
        auto w = mkPat(PK::Wildcard, p.span);
        return w;
      }
    }
  }

  // ---- resolved core ----

  std::vector<RPat> resolveRow(const std::vector<PatPtr>& row,
                               const std::vector<SemType>& tys) const {
    std::vector<RPat> out;
    for (size_t i = 0; i < row.size(); ++i) out.push_back(resolve(*row[i], tys[i]));
    return out;
  }

  RPat resolve(const Pat& p, const SemType& t) const {
    using PK = Pat::Kind;
    SemType ty = t;
    while (ty.is(SemType::Kind::Abbrev)) ty = ty.abbrevExpansion();
    Signature sig = signatureOf(ty);
    auto conIndex = [&](const std::string& name) {
      for (size_t i = 0; i < sig.ctors.size(); ++i)
        if (sig.ctors[i].name == name) return int(i);
      return -1;
    };
    switch (p.kind) {
      case PK::Wildcard:
        return RPat::wildcard();
      case PK::Typed:
      case PK::Layered:
        return resolve(*p.items[0], ty);
      case PK::Ident: {
        const IdInfo* info = o_.identInfo(&p);
        if (!info || info->sort != IdSort::Constructor) return RPat::wildcard();
        RPat r;
        r.con = conIndex(info->ctorName);
        return r;
      }
      case PK::Int: {
        RPat r;
        r.con = -2;  // literal
        long long v = std::stoll(p.literal[0] == '~' ? "-" + p.literal.substr(1) : p.literal);
        r.lit = std::to_string(v);
        return r;
      }
      case PK::String: case PK::Char: {
        RPat r;
        r.con = -2;
        r.lit = p.literal;
        return r;
      }
      case PK::Unit: {
        RPat r;
        r.con = 0;
        return r;
      }
      case PK::Tuple: {
        RPat r;
        r.con = 0;
        for (size_t i = 0; i < p.items.size(); ++i)
          r.args.push_back(resolve(*p.items[i], ty.args[i]));
        return r;
      }
      case PK::Record: {
        RPat r;
        r.con = 0;
        for (size_t i = 0; i < ty.labels.size(); ++i) {
          const PatPtr* sub = nullptr;
          for (auto& [lab, sp] : p.fields)
            if (lab == ty.labels[i]) sub = &sp;
          r.args.push_back(sub ? resolve(**sub, ty.args[i]) : RPat::wildcard());
        }
        return r;
      }
      case PK::List: {
        // [p1, ..., pn] is p1 :: ... :: pn :: nil
        RPat nil;
        nil.con = conIndex("nil");
        RPat acc = nil;
        for (auto it = p.items.rbegin(); it != p.items.rend(); ++it) {
          RPat cons;
          cons.con = conIndex("::");
          cons.args = {resolve(**it, ty.args[0]), acc};
          acc = std::move(cons);
        }
        return acc;
      }
      case PK::ConApp: {
        RPat r;
        r.con = conIndex(headCtorName(p));
        if (r.con >= 0 && !sig.ctors[r.con].argTypes.empty())
          r.args.push_back(resolve(*p.items[0], sig.ctors[r.con].argTypes[0]));
        return r;
      }
      case PK::InfixApp: {
        RPat r;
        r.con = conIndex(headCtorName(p));
        SemType payload = r.con >= 0 && !sig.ctors[r.con].argTypes.empty()
                              ? sig.ctors[r.con].argTypes[0]
                              : ty;
        SemType lhsT = payload, rhsT = payload;
        if (ty.is(SemType::Kind::List)) {
          lhsT = ty.args[0];
          rhsT = ty;
          r.args = {resolve(*p.items[0], lhsT), resolve(*p.items[1], rhsT)};
          return r;
        }
        if (payload.is(SemType::Kind::Tuple) && payload.args.size() == 2) {
          lhsT = payload.args[0];
          rhsT = payload.args[1];
        }
        RPat pair;
        pair.con = 0;
        pair.args = {resolve(*p.items[0], lhsT), resolve(*p.items[1], rhsT)};
        r.args = {std::move(pair)};
        return r;
      }
    }
    return RPat::wildcard();
  }

  // Sub-column types after specializing on constructor `con` of `sig`.
  static void splitTypes(const Signature& sig, int con, const std::vector<SemType>& colTypes,
                         const SemType& headType, std::vector<SemType>& out) {
    if (con >= 0) {
      // List cons keeps its two-argument resolved form.
      for (auto& at : sig.ctors[con].argTypes) out.push_back(at);
    }
    out.insert(out.end(), colTypes.begin() + 1, colTypes.end());
  }

  bool usefulR(const std::vector<std::vector<RPat>>& m, const std::vector<RPat>& q,
               const std::vector<SemType>& colTypes) const {
    if (q.empty()) return m.empty();
    SemType headTy = colTypes[0];
    while (headTy.is(SemType::Kind::Abbrev)) headTy = headTy.abbrevExpansion();
    Signature sig = signatureOf(headTy);
    const RPat& head = q[0];

    if (!head.wild && head.con == -2) {  // literal head
      auto [mm, qq] = specializeLit(m, q, head.lit);
      return usefulR(mm, qq, tail(colTypes));
    }
    if (!head.wild) {
      auto [mm, qq] = specializeCon(m, q, head.con, sig);
      std::vector<SemType> sub;
      splitTypes(sig, head.con, colTypes, headTy, sub);
      return usefulR(mm, qq, sub);
    }

    // Wildcard head: check completeness of the constructors used in column 0.
    if (sig.finite) {
      std::vector<bool> present(sig.ctors.size(), false);
      for (auto& row : m)
        if (!row[0].wild && row[0].con >= 0) present[size_t(row[0].con)] = true;
      bool complete = !sig.ctors.empty();
      for (bool b : present) complete = complete && b;
      // An empty signature is impossible for finite kinds here.
      if (complete && !m.empty()) {
        for (size_t c = 0; c < sig.ctors.size(); ++c) {
          std::vector<RPat> qc = q;
          qc[0] = RPat();
          qc[0].con = int(c);
          qc[0].args.assign(sig.ctors[c].argTypes.size(), RPat::wildcard());
          auto [mm, qq] = specializeCon(m, qc, int(c), sig);
          std::vector<SemType> sub;
          splitTypes(sig, int(c), colTypes, headTy, sub);
          if (usefulR(mm, qq, sub)) return true;
        }
        return false;
      }
    }
    // Literal columns and incomplete signatures: default matrix.
    std::vector<std::vector<RPat>> dm;
    for (auto& row : m)
      if (row[0].wild) dm.push_back(std::vector<RPat>(row.begin() + 1, row.end()));
    return usefulR(dm, std::vector<RPat>(q.begin() + 1, q.end()), tail(colTypes));
  }

  static std::vector<SemType> tail(const std::vector<SemType>& v) {
    return std::vector<SemType>(v.begin() + 1, v.end());
  }

  std::pair<std::vector<std::vector<RPat>>, std::vector<RPat>> specializeCon(
      const std::vector<std::vector<RPat>>& m, const std::vector<RPat>& q, int con,
      const Signature& sig) const {
    size_t arity = con >= 0 ? sig.ctors[size_t(con)].argTypes.size() : 0;
    auto specRow = [&](const std::vector<RPat>& row,
                       std::vector<RPat>& out) -> bool {
      if (row[0].wild) {
        out.assign(arity, RPat::wildcard());
      } else if (row[0].con == con) {
        out = row[0].args;
        out.resize(arity, RPat::wildcard());
      } else {
        return false;
      }
      out.insert(out.end(), row.begin() + 1, row.end());
      return true;
    };
    std::vector<std::vector<RPat>> mm;
    for (auto& row : m) {
      std::vector<RPat> r;
      if (specRow(row, r)) mm.push_back(std::move(r));
    }
    std::vector<RPat> qq;
    specRow(q, qq);
    return {std::move(mm), std::move(qq)};
  }

  std::pair<std::vector<std::vector<RPat>>, std::vector<RPat>> specializeLit(
      const std::vector<std::vector<RPat>>& m, const std::vector<RPat>& q,
      const std::string& lit) const {
    std::vector<std::vector<RPat>> mm;
    for (auto& row : m) {
      if (row[0].wild || (row[0].con == -2 && row[0].lit == lit))
        mm.push_back(std::vector<RPat>(row.begin() + 1, row.end()));
    }
    return {std::move(mm), std::vector<RPat>(q.begin() + 1, q.end())};
  }
};

}  // namespace sml2coq
