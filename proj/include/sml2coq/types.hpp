#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sml2coq/diagnostics.hpp"

namespace sml2coq {

// Constraint class of a type variable. Overloaded operators and flexible
// record patterns are resolved through these; anything still constrained at
// generalization time defaults to int (records must be fully determined).
enum class TvClass {
  Free,
  Num,      // int, real
  Ord,      // int, real, string, char
  Eq,       // equality types (no real, no arrow)
  NumEq,    // int
  OrdEq,    // int, string, char
  FlexRecord,    // record with at least the attached fields
  FlexRecordEq,  // same, all fields equality types
};

struct SemType {
  enum class Kind {
    TyVar, Int, Real, String, Char, Bool, Unit,
    Tuple, Arrow, List, Option, Record, Data, Abbrev,
  };

  Kind kind = Kind::Int;
  // TyVar: unique key (display derived); Data/Abbrev: source name.
  std::string name;
  TvClass cls = TvClass::Free;  // TyVar only
  int uid = 0;                  // Data/Abbrev identity (datatypes are generative)
  bool eqAttr = false;          // Data: admits equality
  // Tuple members / Arrow [from,to] / List,Option [elem] / Data args /
  // Record field types (sorted by label) / TyVar: flex-record field types /
  // Abbrev: [args..., expansion]
  std::vector<SemType> args;
  std::vector<std::string> labels;  // Record / flex TyVar field labels, sorted

  bool is(Kind k) const { return kind == k; }

  static SemType prim(Kind k) { SemType t; t.kind = k; return t; }
  static SemType tyvar(std::string n, TvClass c = TvClass::Free) {
    SemType t;
    t.kind = Kind::TyVar;
    t.name = std::move(n);
    t.cls = c;
    return t;
  }
  static SemType tuple(std::vector<SemType> members) {
    SemType t;
    t.kind = Kind::Tuple;
    t.args = std::move(members);
    return t;
  }
  static SemType arrow(SemType from, SemType to) {
    SemType t;
    t.kind = Kind::Arrow;
    t.args = {std::move(from), std::move(to)};
    return t;
  }
  static SemType list(SemType elem) {
    SemType t;
    t.kind = Kind::List;
    t.args = {std::move(elem)};
    return t;
  }
  static SemType option(SemType elem) {
    SemType t;
    t.kind = Kind::Option;
    t.args = {std::move(elem)};
    return t;
  }
  // Fields are sorted into canonical label order on construction.
  static SemType record(std::vector<std::pair<std::string, SemType>> fields) {
    std::sort(fields.begin(), fields.end(),
              [](auto& a, auto& b) { return a.first < b.first; });
    SemType t;
    t.kind = Kind::Record;
    for (auto& [lab, ty] : fields) {
      t.labels.push_back(lab);
      t.args.push_back(std::move(ty));
    }
    return t;
  }
  static SemType data(std::string name, int uid, std::vector<SemType> args, bool eqAttr) {
    SemType t;
    t.kind = Kind::Data;
    t.name = std::move(name);
    t.uid = uid;
    t.args = std::move(args);
    t.eqAttr = eqAttr;
    return t;
  }
  static SemType abbrev(std::string name, int uid, std::vector<SemType> args, SemType expansion) {
    SemType t;
    t.kind = Kind::Abbrev;
    t.name = std::move(name);
    t.uid = uid;
    t.args = std::move(args);
    t.args.push_back(std::move(expansion));
    return t;
  }

  // Returns by value: callers routinely write `t = t.abbrevExpansion()`, which
  // would alias into t's own args vector with a reference return.
  SemType abbrevExpansion() const { return args.back(); }
  size_t abbrevArgCount() const { return args.size() - 1; }

  // Type-variable display name: the unique key minus the "#N" disambiguator.
  std::string display() const {
    auto pos = name.find('#');
    return pos == std::string::npos ? name : name.substr(0, pos);
  }

  bool operator==(const SemType& o) const {
    if (kind != o.kind || name != o.name || uid != o.uid || labels != o.labels) return false;
    return args == o.args;
  }
};

struct UnifyError {
  std::string message;
};

struct TypeScheme {
  // Quantified variables in first-occurrence order, with the class they must
  // be instantiated at (basis operator schemes carry Num/Ord/Eq).
  std::vector<std::pair<std::string, TvClass>> quantified;
  SemType body;
};

// ---------------------------------------------------------------------------

class Subst {
 public:
  bool contains(const std::string& var) const { return map_.count(var) != 0; }
  const SemType& at(const std::string& var) const { return map_.at(var); }
  void bind(const std::string& var, SemType t) { map_[var] = std::move(t); }
  size_t size() const { return map_.size(); }

  // Follows tyvar bindings at the root only.
  const SemType& shallow(const SemType& t) const {
    const SemType* cur = &t;
    while (cur->is(SemType::Kind::TyVar)) {
      auto it = map_.find(cur->name);
      if (it == map_.end()) break;
      cur = &it->second;
    }
    return *cur;
  }

  SemType apply(const SemType& t) const {
    const SemType& r = shallow(t);
    SemType out = r;
    for (auto& a : out.args) a = apply(a);
    return out;
  }

 private:
  std::map<std::string, SemType> map_;
};

inline void freeTyVars(const SemType& t, const Subst& s, std::vector<std::string>& out,
                       std::set<std::string>& seen) {
  const SemType& r = s.shallow(t);
  if (r.is(SemType::Kind::TyVar)) {
    if (seen.insert(r.name).second) out.push_back(r.name);
    for (auto& a : r.args) freeTyVars(a, s, out, seen);  // flex-record fields
    return;
  }
  for (auto& a : r.args) freeTyVars(a, s, out, seen);
}

inline std::vector<std::string> freeTyVars(const SemType& t, const Subst& s) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  freeTyVars(t, s, out, seen);
  return out;
}

inline bool occursIn(const std::string& var, const SemType& t, const Subst& s) {
  const SemType& r = s.shallow(t);
  if (r.is(SemType::Kind::TyVar) && r.name == var) return true;
  for (auto& a : r.args) {
    if (occursIn(var, a, s)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Unification

struct TypeTable;
bool tableAdmitsEq(const TypeTable* table, int uid, bool snapshot);

class Unifier {
 public:
  // Fresh variables created while merging constraints need unique names. The
  // type table, when given, is the authority on datatype equality attributes.
  explicit Unifier(int* freshCounter, const TypeTable* table = nullptr)
      : counter_(freshCounter), table_(table) {}

  Subst unify(const SemType& a, const SemType& b, Subst s) {
    unifyInto(a, b, s);
    return s;
  }

  void unifyInto(const SemType& ta, const SemType& tb, Subst& s) {
    SemType a = s.shallow(ta);
    SemType b = s.shallow(tb);
    using K = SemType::Kind;

    if (a.is(K::TyVar) && b.is(K::TyVar) && a.name == b.name) return;
    if (a.is(K::TyVar)) { bindVar(a, b, s); return; }
    if (b.is(K::TyVar)) { bindVar(b, a, s); return; }
    if (a.is(K::Abbrev)) { unifyInto(a.abbrevExpansion(), b, s); return; }
    if (b.is(K::Abbrev)) { unifyInto(a, b.abbrevExpansion(), s); return; }

    if (a.kind != b.kind) clash(a, b);
    switch (a.kind) {
      case K::Int: case K::Real: case K::String: case K::Char:
      case K::Bool: case K::Unit:
        return;
      case K::Tuple:
        if (a.args.size() != b.args.size()) clash(a, b);
        break;
      case K::Arrow: case K::List: case K::Option:
        break;
      case K::Record:
        if (a.labels != b.labels)
          throw UnifyError{"record label sets differ: " + describe(a) + " vs " + describe(b)};
        break;
      case K::Data:
        if (a.uid != b.uid) clash(a, b);
        break;
      default:
        clash(a, b);
    }
    for (size_t i = 0; i < a.args.size(); ++i) unifyInto(a.args[i], b.args[i], s);
  }

  static std::string describe(const SemType& t) {
    using K = SemType::Kind;
    switch (t.kind) {
      case K::TyVar: return t.display();
      case K::Int: return "int";
      case K::Real: return "real";
      case K::String: return "string";
      case K::Char: return "char";
      case K::Bool: return "bool";
      case K::Unit: return "unit";
      case K::Tuple: {
        std::string out;
        for (size_t i = 0; i < t.args.size(); ++i) {
          if (i) out += " * ";
          out += describe(t.args[i]);
        }
        return "(" + out + ")";
      }
      case K::Arrow: return "(" + describe(t.args[0]) + " -> " + describe(t.args[1]) + ")";
      case K::List: return describe(t.args[0]) + " list";
      case K::Option: return describe(t.args[0]) + " option";
      case K::Record: {
        std::string out = "{";
        for (size_t i = 0; i < t.labels.size(); ++i) {
          if (i) out += ", ";
          out += t.labels[i] + ": " + describe(t.args[i]);
        }
        return out + "}";
      }
      case K::Data: case K::Abbrev: {
        std::string out;
        size_t n = t.kind == K::Abbrev ? t.abbrevArgCount() : t.args.size();
        for (size_t i = 0; i < n; ++i) out += describe(t.args[i]) + " ";
        return out + t.name;
      }
    }
    return "?";
  }

 private:
  int* counter_;
  const TypeTable* table_;

  [[noreturn]] static void clash(const SemType& a, const SemType& b) {
    throw UnifyError{"cannot unify " + describe(a) + " with " + describe(b)};
  }

  std::string freshName() { return "_'" + std::to_string(++*counter_); }

  static bool isFlex(TvClass c) {
    return c == TvClass::FlexRecord || c == TvClass::FlexRecordEq;
  }

  static TvClass mergeClass(TvClass a, TvClass b) {
    if (a == b) return a;
    if (a == TvClass::Free) return b;
    if (b == TvClass::Free) return a;
    auto has = [&](TvClass x) { return a == x || b == x; };
    if (isFlex(a) || isFlex(b)) {
      if ((isFlex(a) && b == TvClass::Eq) || (isFlex(b) && a == TvClass::Eq) ||
          (isFlex(a) && isFlex(b)))
        return TvClass::FlexRecordEq;
      throw UnifyError{"record constraint conflicts with an operator constraint"};
    }
    if (has(TvClass::NumEq)) return TvClass::NumEq;
    if (has(TvClass::Num)) return has(TvClass::Ord) ? TvClass::Num : TvClass::NumEq;
    if (has(TvClass::Ord)) return TvClass::OrdEq;  // Ord with Eq or OrdEq
    return TvClass::OrdEq;                         // Eq with OrdEq
  }

  // User-written type variables ('a#N keys) stay rigid: they may absorb fresh
  // variables but can never themselves be instantiated or strengthened.
  static bool isRigid(const SemType& v) { return v.name.find('#') != std::string::npos; }

  void bindVar(const SemType& var, const SemType& val, Subst& s) {
    if (val.is(SemType::Kind::TyVar)) {
      if (var.name == val.name) return;
      TvClass merged = mergeClass(var.cls, val.cls);
      if (isFlex(merged) && (isFlex(var.cls) && isFlex(val.cls))) {
        bindFlexPair(var, val, merged, s);
        return;
      }
      bool vr = isRigid(var), lr = isRigid(val);
      if (vr && lr)
        throw UnifyError{"cannot unify distinct type variables " + var.display() + " and " +
                         val.display()};
      if (vr || lr) {
        const SemType& rigid = vr ? var : val;
        const SemType& flexv = vr ? val : var;
        if (merged != rigid.cls)
          throw UnifyError{"type variable " + rigid.display() +
                           " does not admit this constraint"};
        s.bind(flexv.name, rigid);
        return;
      }
      if (merged == val.cls) {
        s.bind(var.name, val);
      } else if (merged == var.cls) {
        s.bind(val.name, var);
      } else {
        SemType fresh = SemType::tyvar(freshName(), merged);
        if (isFlex(merged)) {
          const SemType& flexSide = isFlex(var.cls) ? var : val;
          fresh.labels = flexSide.labels;
          fresh.args = flexSide.args;
        }
        s.bind(var.name, fresh);
        s.bind(val.name, fresh);
      }
      return;
    }
    if (isRigid(var))
      throw UnifyError{"type variable " + var.display() + " cannot be instantiated to " +
                       describe(val)};
    if (occursIn(var.name, val, s))
      throw UnifyError{"occurs check: " + var.display() + " in " + describe(val)};
    checkClass(var, val, s);
    s.bind(var.name, val);
  }

  // Union the field constraints of two flexible record variables.
  void bindFlexPair(const SemType& a, const SemType& b, TvClass merged, Subst& s) {
    SemType fresh = SemType::tyvar(freshName(), merged);
    size_t i = 0, j = 0;
    // Bind both names first: field unification may refer back to them.
    s.bind(a.name, fresh);
    s.bind(b.name, fresh);
    std::vector<std::pair<std::string, SemType>> fields;
    while (i < a.labels.size() || j < b.labels.size()) {
      if (j >= b.labels.size() || (i < a.labels.size() && a.labels[i] < b.labels[j])) {
        fields.emplace_back(a.labels[i], a.args[i]);
        ++i;
      } else if (i >= a.labels.size() || b.labels[j] < a.labels[i]) {
        fields.emplace_back(b.labels[j], b.args[j]);
        ++j;
      } else {
        unifyInto(a.args[i], b.args[j], s);
        fields.emplace_back(a.labels[i], a.args[i]);
        ++i;
        ++j;
      }
    }
    SemType updated = fresh;
    for (auto& [lab, ty] : fields) {
      updated.labels.push_back(lab);
      updated.args.push_back(ty);
    }
    // Rebind to carry the merged fields (fresh is unbound, so rebinding is safe).
    s.bind(a.name, updated);
    s.bind(b.name, updated);
  }

  void checkClass(const SemType& var, const SemType& val, Subst& s) {
    using K = SemType::Kind;
    SemType v = s.shallow(val);
    if (v.is(K::Abbrev)) { checkClass(var, v.abbrevExpansion(), s); return; }
    switch (var.cls) {
      case TvClass::Free:
        return;
      case TvClass::Num:
        if (v.is(K::Int) || v.is(K::Real)) return;
        throw UnifyError{"operator requires int or real, got " + describe(v)};
      case TvClass::Ord:
        if (v.is(K::Int) || v.is(K::Real) || v.is(K::String) || v.is(K::Char)) return;
        throw UnifyError{"comparison requires int, real, string, or char, got " + describe(v)};
      case TvClass::Eq:
        requireEq(v, s);
        return;
      case TvClass::NumEq:
        if (v.is(K::Int)) return;
        throw UnifyError{"constraint resolves only to int, got " + describe(v)};
      case TvClass::OrdEq:
        if (v.is(K::Int) || v.is(K::String) || v.is(K::Char)) return;
        throw UnifyError{"constraint requires int, string, or char, got " + describe(v)};
      case TvClass::FlexRecord:
      case TvClass::FlexRecordEq: {
        if (!v.is(K::Record))
          throw UnifyError{"record pattern requires a record type, got " + describe(v)};
        for (size_t i = 0; i < var.labels.size(); ++i) {
          auto it = std::find(v.labels.begin(), v.labels.end(), var.labels[i]);
          if (it == v.labels.end())
            throw UnifyError{"record type " + describe(v) + " has no field '" +
                             var.labels[i] + "'"};
          unifyInto(var.args[i], v.args[size_t(it - v.labels.begin())], s);
        }
        if (var.cls == TvClass::FlexRecordEq) requireEq(v, s);
        return;
      }
    }
  }

  // Constrains a type to admit equality, strengthening inner type variables.
  void requireEq(const SemType& t, Subst& s) {
    using K = SemType::Kind;
    SemType v = s.shallow(t);
    switch (v.kind) {
      case K::Int: case K::String: case K::Char: case K::Bool: case K::Unit:
        return;
      case K::Real:
        throw UnifyError{"real is not an equality type"};
      case K::Arrow:
        throw UnifyError{"function types do not admit equality"};
      case K::TyVar: {
        TvClass merged = mergeClass(v.cls, TvClass::Eq);
        if (merged != v.cls) {
          SemType fresh = SemType::tyvar(freshName(), merged);
          fresh.labels = v.labels;
          fresh.args = v.args;
          s.bind(v.name, fresh);
        }
        return;
      }
      case K::Data:
        if (!tableAdmitsEq(table_, v.uid, v.eqAttr))
          throw UnifyError{"datatype " + v.name + " does not admit equality"};
        for (auto& a : v.args) requireEq(a, s);
        return;
      case K::Abbrev:
        requireEq(v.abbrevExpansion(), s);
        return;
      default:
        for (auto& a : v.args) requireEq(a, s);
        return;
    }
  }
};

// Pure-style entry point matching the operation contract: returns a
// substitution extending `s` with s(a) = s(b), or throws UnifyError.
inline Subst unify(const SemType& a, const SemType& b, Subst s, int* freshCounter) {
  Unifier u(freshCounter);
  return u.unify(a, b, std::move(s));
}

// ---------------------------------------------------------------------------
// Datatype registry and identifier resolution shared by the later phases.

struct DatatypeCtor {
  std::string name;
  std::optional<SemType> payload;  // in terms of paramKeys
};

struct DatatypeInfo {
  std::string name;
  std::vector<std::string> paramKeys;
  std::vector<DatatypeCtor> ctors;
  bool eqAttr = false;
  bool abstract = false;  // signature/functor-parameter types: no constructors known
};

struct TypeTable {
  std::map<int, DatatypeInfo> data;

  const DatatypeInfo* find(int uid) const {
    auto it = data.find(uid);
    return it == data.end() ? nullptr : &it->second;
  }
};

inline bool tableAdmitsEq(const TypeTable* table, int uid, bool snapshot) {
  if (!table) return snapshot;
  const DatatypeInfo* info = table->find(uid);
  return info ? info->eqAttr && !info->abstract : snapshot;
}

inline SemType substituteParams(const SemType& body, const std::vector<std::string>& keys,
                                const std::vector<SemType>& args) {
  if (body.is(SemType::Kind::TyVar)) {
    for (size_t i = 0; i < keys.size(); ++i)
      if (body.name == keys[i]) return args[i];
    return body;
  }
  SemType out = body;
  for (auto& a : out.args) a = substituteParams(a, keys, args);
  return out;
}

enum class IdSort { Value, Constructor };

// Resolution of an identifier occurrence (expression or pattern position).
struct IdInfo {
  IdSort sort = IdSort::Value;
  int ctorUid = -1;          // user datatype uid; -1 for builtin constructors
  std::string ctorName;      // "true", "nil", "::", "SOME", ... or user name
  bool hasPayload = false;
};

}  // namespace sml2coq
