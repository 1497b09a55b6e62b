#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sml2coq/elaborate.hpp"

namespace sml2coq {

struct Value;
using ValuePtr = std::shared_ptr<const Value>;

struct EvalEnv;

struct Value {
  enum class Kind {
    Int, Real, String, Char, Bool, Unit,
    Tuple, List, Record,
    Con,      // constructor value, possibly with payload (items[0])
    CtorFn,   // constructor awaiting its payload
    Closure,  // fn-style rules or fun-style clauses
    Builtin,  // basis function with collected arguments
    Module,   // structure value: ordered bindings
  };
  Kind kind = Kind::Unit;
  long long i = 0;
  double r = 0;
  bool b = false;
  std::string s;                   // String (decoded) / Con name / Builtin name
  int conUid = -1;
  std::vector<ValuePtr> items;     // Tuple/List members, Con payload, Builtin args
  std::vector<std::pair<std::string, ValuePtr>> fields;  // Record (sorted) / Module (decl order)

  // Closure payload
  const std::vector<MatchRule>* rules = nullptr;  // fn / val rec
  const FunBinding* fun = nullptr;                // fun clauses
  EvalEnv* env = nullptr;
  std::vector<ValuePtr> curried;

  static ValuePtr mkInt(long long v) { auto x = std::make_shared<Value>(); x->kind = Kind::Int; x->i = v; return x; }
  static ValuePtr mkReal(double v) { auto x = std::make_shared<Value>(); x->kind = Kind::Real; x->r = v; return x; }
  static ValuePtr mkString(std::string v) { auto x = std::make_shared<Value>(); x->kind = Kind::String; x->s = std::move(v); return x; }
  static ValuePtr mkChar(char c) { auto x = std::make_shared<Value>(); x->kind = Kind::Char; x->i = (unsigned char)c; return x; }
  static ValuePtr mkBool(bool v) { auto x = std::make_shared<Value>(); x->kind = Kind::Bool; x->b = v; return x; }
  static ValuePtr mkUnit() { auto x = std::make_shared<Value>(); x->kind = Kind::Unit; return x; }
};

struct EvalEnv {
  std::map<std::string, ValuePtr> vals;
  std::map<std::string, EvalEnv*> structs;
  struct FunctorDef {
    std::string paramName;
    const std::vector<DeclPtr>* body = nullptr;
    EvalEnv* closure = nullptr;
  };
  std::map<std::string, FunctorDef> functors;
  std::map<std::string, SigExpPtr> sigs;
  EvalEnv* parent = nullptr;

  const ValuePtr* lookup(const std::string& name) const {
    auto dot = name.rfind('.');
    if (dot != std::string::npos) {
      if (const EvalEnv* m = lookupModule(name.substr(0, dot))) {
        auto it = m->vals.find(name.substr(dot + 1));
        if (it != m->vals.end()) return &it->second;
      }
    }
    for (const EvalEnv* e = this; e; e = e->parent) {
      auto it = e->vals.find(name);
      if (it != e->vals.end()) return &it->second;
    }
    return nullptr;
  }

  const EvalEnv* lookupModule(const std::string& path) const {
    const EvalEnv* cur = nullptr;
    size_t start = 0;
    for (;;) {
      size_t dot = path.find('.', start);
      std::string seg = path.substr(start, dot == std::string::npos ? dot : dot - start);
      if (cur == nullptr) {
        for (const EvalEnv* e = this; e; e = e->parent) {
          auto it = e->structs.find(seg);
          if (it != e->structs.end()) {
            cur = it->second;
            break;
          }
        }
        if (!cur) return nullptr;
      } else {
        auto it = cur->structs.find(seg);
        if (it == cur->structs.end()) return nullptr;
        cur = it->second;
      }
      if (dot == std::string::npos) return cur;
      start = dot + 1;
    }
  }
};

struct EvalOutcome {
  enum class Kind { Ok, BindFailure, FuelExhausted, Stuck };
  Kind kind = Kind::Ok;
  Span span;
  std::string detail;
  // Ok: top-level bindings in declaration order (structures flattened).
  std::vector<std::pair<std::string, ValuePtr>> bindings;
};

namespace detail {
struct EvalAbort {
  EvalOutcome::Kind kind;
  Span span;
  std::string detail;
};
}  // namespace detail

class Evaluator {
 public:
  Evaluator(const Elaboration& el, long long fuel) : el_(el), fuel_(fuel) {
    root_ = makeEnv(nullptr);
  }

  EvalOutcome run() {
    EvalOutcome out;
    try {
      for (auto& d : el_.program) evalDecl(d, root_, &out.bindings, "");
    } catch (const detail::EvalAbort& a) {
      out.kind = a.kind;
      out.span = a.span;
      out.detail = a.detail;
      out.bindings.clear();
    }
    return out;
  }

  // Basis dispatch; exception-raising inputs abort with a bind failure.
  ValuePtr applyBasisStub(const std::string& name, const std::vector<ValuePtr>& args) {
    return basis(name, args, Span{});
  }

 private:
  const Elaboration& el_;
  long long fuel_;
  int depth_ = 0;
  EvalEnv* root_;
  std::vector<std::unique_ptr<EvalEnv>> arena_;

  EvalEnv* makeEnv(EvalEnv* parent) {
    arena_.push_back(std::make_unique<EvalEnv>());
    arena_.back()->parent = parent;
    return arena_.back().get();
  }

  [[noreturn]] void abort(EvalOutcome::Kind k, Span span, std::string detail) {
    throw detail::EvalAbort{k, span, std::move(detail)};
  }

  void spendFuel(Span span) {
    if (--fuel_ < 0) abort(EvalOutcome::Kind::FuelExhausted, span, "fuel exhausted");
  }

  static long long parseInt(const std::string& lit) {
    return std::stoll(lit[0] == '~' ? "-" + lit.substr(1) : lit);
  }
  static double parseReal(const std::string& lit) {
    std::string t = lit;
    for (auto& c : t)
      if (c == '~') c = '-';
    return std::stod(t);
  }

  // ---- pattern matching ----

  bool match(const PatPtr& p, const ValuePtr& v, std::vector<std::pair<std::string, ValuePtr>>& binds) {
    using PK = Pat::Kind;
    switch (p->kind) {
      case PK::Wildcard:
        return true;
      case PK::Ident: {
        const IdInfo* info = el_.identOf(p.get());
        if (!info || info->sort != IdSort::Constructor) {
          binds.emplace_back(p->name, v);
          return true;
        }
        if (info->ctorName == "true" || info->ctorName == "false")
          return v->kind == Value::Kind::Bool && v->b == (info->ctorName == "true");
        if (info->ctorName == "nil") return v->kind == Value::Kind::List && v->items.empty();
        return v->kind == Value::Kind::Con && v->s == info->ctorName &&
               v->conUid == info->ctorUid && v->items.empty();
      }
      case PK::Int:
        return v->kind == Value::Kind::Int && v->i == parseInt(p->literal);
      case PK::String:
        return v->kind == Value::Kind::String &&
               v->s == Lexer::decodeStringText(p->literal, p->span);
      case PK::Char:
        return v->kind == Value::Kind::Char &&
               v->i == (unsigned char)Lexer::decodeStringText(p->literal.substr(1), p->span)[0];
      case PK::Unit:
        return v->kind == Value::Kind::Unit;
      case PK::Tuple: {
        if (v->kind != Value::Kind::Tuple || v->items.size() != p->items.size()) return false;
        for (size_t i = 0; i < p->items.size(); ++i)
          if (!match(p->items[i], v->items[i], binds)) return false;
        return true;
      }
      case PK::List: {
        if (v->kind != Value::Kind::List || v->items.size() != p->items.size()) return false;
        for (size_t i = 0; i < p->items.size(); ++i)
          if (!match(p->items[i], v->items[i], binds)) return false;
        return true;
      }
      case PK::Record: {
        if (v->kind != Value::Kind::Record) return false;
        for (auto& [lab, sub] : p->fields) {
          const ValuePtr* fv = nullptr;
          for (auto& [vl, vv] : v->fields)
            if (vl == lab) fv = &vv;
          if (!fv || !match(sub, *fv, binds)) return false;
        }
        return true;
      }
      case PK::ConApp: {
        const IdInfo* info = el_.identOf(p.get());
        if (!info) return false;
        if (info->ctorName == "SOME")
          return v->kind == Value::Kind::Con && v->s == "SOME" && !v->items.empty() &&
                 match(p->items[0], v->items[0], binds);
        return v->kind == Value::Kind::Con && v->s == info->ctorName &&
               v->conUid == info->ctorUid && !v->items.empty() &&
               match(p->items[0], v->items[0], binds);
      }
      case PK::InfixApp: {
        const IdInfo* info = el_.identOf(p.get());
        if (info && info->ctorName == "::") {
          if (v->kind != Value::Kind::List || v->items.empty()) return false;
          auto tail = std::make_shared<Value>();
          tail->kind = Value::Kind::List;
          tail->items.assign(v->items.begin() + 1, v->items.end());
          return match(p->items[0], v->items[0], binds) &&
                 match(p->items[1], ValuePtr(tail), binds);
        }
        // user infix constructor: payload is a pair
        if (v->kind != Value::Kind::Con || !info || v->s != info->ctorName ||
            v->items.empty())
          return false;
        const ValuePtr& payload = v->items[0];
        if (payload->kind != Value::Kind::Tuple || payload->items.size() != 2) return false;
        return match(p->items[0], payload->items[0], binds) &&
               match(p->items[1], payload->items[1], binds);
      }
      case PK::Typed:
        return match(p->items[0], v, binds);
      case PK::Layered:
        binds.emplace_back(p->name, v);
        return match(p->items[0], v, binds);
    }
    return false;
  }

  // ---- application ----

  // Applying a closure either produces a value directly or hands back the
  // clause body to evaluate; tail positions loop on the latter so that tail
  // recursion runs in constant stack.
  struct AppResult {
    ValuePtr value;
    const ExpPtr* body = nullptr;
    EvalEnv* env = nullptr;
  };

  AppResult applyStep(const ValuePtr& f, const ValuePtr& arg, Span span) {
    spendFuel(span);
    switch (f->kind) {
      case Value::Kind::CtorFn: {
        if (f->s == "::") {
          if (arg->kind != Value::Kind::Tuple || arg->items.size() != 2 ||
              arg->items[1]->kind != Value::Kind::List)
            abort(EvalOutcome::Kind::Stuck, span, "ill-formed cons");
          auto out = std::make_shared<Value>();
          out->kind = Value::Kind::List;
          out->items.push_back(arg->items[0]);
          for (auto& v : arg->items[1]->items) out->items.push_back(v);
          return {out};
        }
        auto out = std::make_shared<Value>();
        out->kind = Value::Kind::Con;
        out->s = f->s;
        out->conUid = f->conUid;
        out->items = {arg};
        return {out};
      }
      case Value::Kind::Closure: {
        if (f->rules) {  // fn-style
          EvalEnv* env = makeEnv(f->env);
          for (auto& rule : *f->rules) {
            std::vector<std::pair<std::string, ValuePtr>> binds;
            if (match(rule.pat, arg, binds)) {
              for (auto& [n, v] : binds) env->vals[n] = v;
              return {nullptr, &rule.body, env};
            }
          }
          abort(EvalOutcome::Kind::BindFailure, span, "match failure");
        }
        // fun-style: collect curried arguments
        size_t arity = f->fun->clauses.front().params.size();
        auto partial = std::make_shared<Value>(*f);
        partial->curried.push_back(arg);
        if (partial->curried.size() < arity) return {partial};
        for (auto& cl : f->fun->clauses) {
          std::vector<std::pair<std::string, ValuePtr>> binds;
          bool ok = true;
          for (size_t k = 0; k < arity; ++k)
            if (!match(cl.params[k], partial->curried[k], binds)) {
              ok = false;
              break;
            }
          if (!ok) continue;
          EvalEnv* env = makeEnv(f->env);
          for (auto& [n, v] : binds) env->vals[n] = v;
          return {nullptr, &cl.body, env};
        }
        abort(EvalOutcome::Kind::BindFailure, span, "match failure in '" + f->fun->name + "'");
      }
      case Value::Kind::Builtin: {
        auto partial = std::make_shared<Value>(*f);
        partial->items.push_back(arg);
        if (partial->items.size() < builtinArity(f->s)) return {partial};
        return {basis(f->s, partial->items, span)};
      }
      default:
        abort(EvalOutcome::Kind::Stuck, span, "applied a non-function value");
    }
  }

  ValuePtr apply(const ValuePtr& f, const ValuePtr& arg, Span span) {
    AppResult r = applyStep(f, arg, span);
    if (r.value) return r.value;
    return evalExp(*r.body, r.env);
  }

  static size_t builtinArity(const std::string& name) {
    if (name == "List.map" || name == "List.filter") return 2;
    return 1;
  }

  ValuePtr basis(const std::string& name, const std::vector<ValuePtr>& args, Span span) {
    auto& a0 = args.at(0);
    auto pairArgs = [&](const char* who) -> std::pair<ValuePtr, ValuePtr> {
      if (a0->kind != Value::Kind::Tuple || a0->items.size() != 2)
        abort(EvalOutcome::Kind::Stuck, span, std::string("bad argument to ") + who);
      return {a0->items[0], a0->items[1]};
    };

    if (name == "+" || name == "-" || name == "*") {
      auto [x, y] = pairArgs(name.c_str());
      if (x->kind == Value::Kind::Real)
        return Value::mkReal(name == "+" ? x->r + y->r : name == "-" ? x->r - y->r : x->r * y->r);
      return Value::mkInt(name == "+" ? x->i + y->i : name == "-" ? x->i - y->i : x->i * y->i);
    }
    if (name == "/") {
      auto [x, y] = pairArgs("/");
      return Value::mkReal(x->r / y->r);
    }
    if (name == "div" || name == "mod") {
      auto [x, y] = pairArgs(name.c_str());
      if (y->i == 0) abort(EvalOutcome::Kind::BindFailure, span, "Div");
      // SML div/mod round toward negative infinity.
      long long q = x->i / y->i;
      long long r = x->i % y->i;
      if (r != 0 && ((r < 0) != (y->i < 0))) {
        q -= 1;
        r += y->i;
      }
      return Value::mkInt(name == "div" ? q : r);
    }
    if (name == "<" || name == "<=" || name == ">" || name == ">=") {
      auto [x, y] = pairArgs(name.c_str());
      int c = compareValues(x, y, span);
      if (name == "<") return Value::mkBool(c < 0);
      if (name == "<=") return Value::mkBool(c <= 0);
      if (name == ">") return Value::mkBool(c > 0);
      return Value::mkBool(c >= 0);
    }
    if (name == "=" || name == "<>") {
      auto [x, y] = pairArgs(name.c_str());
      bool eq = valueEquals(x, y);
      return Value::mkBool(name == "=" ? eq : !eq);
    }
    if (name == "~")
      return a0->kind == Value::Kind::Real ? Value::mkReal(-a0->r) : Value::mkInt(-a0->i);
    if (name == "abs")
      return a0->kind == Value::Kind::Real ? Value::mkReal(std::fabs(a0->r))
                                           : Value::mkInt(a0->i < 0 ? -a0->i : a0->i);
    if (name == "^") {
      auto [x, y] = pairArgs("^");
      return Value::mkString(x->s + y->s);
    }
    if (name == "@") {
      auto [x, y] = pairArgs("@");
      auto out = std::make_shared<Value>();
      out->kind = Value::Kind::List;
      out->items = x->items;
      for (auto& v : y->items) out->items.push_back(v);
      return out;
    }
    if (name == "not") return Value::mkBool(!a0->b);

    if (name == "List.hd") {
      if (a0->items.empty()) abort(EvalOutcome::Kind::BindFailure, span, "Empty");
      return a0->items[0];
    }
    if (name == "List.tl") {
      if (a0->items.empty()) abort(EvalOutcome::Kind::BindFailure, span, "Empty");
      auto out = std::make_shared<Value>();
      out->kind = Value::Kind::List;
      out->items.assign(a0->items.begin() + 1, a0->items.end());
      return out;
    }
    if (name == "List.length") return Value::mkInt((long long)a0->items.size());
    if (name == "List.map") {
      auto out = std::make_shared<Value>();
      out->kind = Value::Kind::List;
      for (auto& v : args.at(1)->items) out->items.push_back(apply(a0, v, span));
      return out;
    }
    if (name == "List.filter") {
      auto out = std::make_shared<Value>();
      out->kind = Value::Kind::List;
      for (auto& v : args.at(1)->items) {
        ValuePtr keep = apply(a0, v, span);
        if (keep->b) out->items.push_back(v);
      }
      return out;
    }
    if (name == "Option.valOf") {
      if (a0->kind == Value::Kind::Con && a0->s == "SOME") return a0->items[0];
      abort(EvalOutcome::Kind::BindFailure, span, "Option");
    }
    if (name == "String.size") return Value::mkInt((long long)a0->s.size());
    if (name == "String.sub") {
      auto [str, idx] = pairArgs("String.sub");
      if (idx->i < 0 || idx->i >= (long long)str->s.size())
        abort(EvalOutcome::Kind::BindFailure, span, "Subscript");
      return Value::mkChar(str->s[size_t(idx->i)]);
    }
    fail(Stage::Evaluate, span, "unknown basis function '" + name + "'");
  }

  int compareValues(const ValuePtr& x, const ValuePtr& y, Span span) {
    switch (x->kind) {
      case Value::Kind::Int: return x->i < y->i ? -1 : x->i > y->i ? 1 : 0;
      case Value::Kind::Real: return x->r < y->r ? -1 : x->r > y->r ? 1 : 0;
      case Value::Kind::String: return x->s.compare(y->s) < 0 ? -1 : x->s == y->s ? 0 : 1;
      case Value::Kind::Char: return x->i < y->i ? -1 : x->i > y->i ? 1 : 0;
      default:
        abort(EvalOutcome::Kind::Stuck, span, "uncomparable values");
    }
  }

  static bool valueEquals(const ValuePtr& x, const ValuePtr& y) {
    if (x->kind != y->kind) return false;
    switch (x->kind) {
      case Value::Kind::Int: case Value::Kind::Char: return x->i == y->i;
      case Value::Kind::Bool: return x->b == y->b;
      case Value::Kind::String: return x->s == y->s;
      case Value::Kind::Unit: return true;
      case Value::Kind::Tuple: case Value::Kind::List: {
        if (x->items.size() != y->items.size()) return false;
        for (size_t i = 0; i < x->items.size(); ++i)
          if (!valueEquals(x->items[i], y->items[i])) return false;
        return true;
      }
      case Value::Kind::Record: {
        if (x->fields.size() != y->fields.size()) return false;
        for (size_t i = 0; i < x->fields.size(); ++i)
          if (x->fields[i].first != y->fields[i].first ||
              !valueEquals(x->fields[i].second, y->fields[i].second))
            return false;
        return true;
      }
      case Value::Kind::Con: {
        if (x->s != y->s || x->conUid != y->conUid || x->items.size() != y->items.size())
          return false;
        return x->items.empty() || valueEquals(x->items[0], y->items[0]);
      }
      default:
        return false;
    }
  }

  // ---- expressions ----

  ValuePtr evalIdent(const Exp* e, EvalEnv* env) {
    const IdInfo* info = el_.identOf(e);
    if (info && info->sort == IdSort::Constructor) {
      if (info->ctorName == "true") return Value::mkBool(true);
      if (info->ctorName == "false") return Value::mkBool(false);
      if (info->ctorName == "nil") {
        auto v = std::make_shared<Value>();
        v->kind = Value::Kind::List;
        return v;
      }
      if (!info->hasPayload) {
        auto v = std::make_shared<Value>();
        v->kind = Value::Kind::Con;
        v->s = info->ctorName;
        v->conUid = info->ctorUid;
        return v;
      }
      auto v = std::make_shared<Value>();
      v->kind = Value::Kind::CtorFn;
      v->s = info->ctorName;
      v->conUid = info->ctorUid;
      return v;
    }
    if (const ValuePtr* v = env->lookup(e->name)) return *v;
    // Basis function referenced directly.
    auto v = std::make_shared<Value>();
    v->kind = Value::Kind::Builtin;
    v->s = e->name;
    return v;
  }

  struct DepthGuard {
    int* depth;
    explicit DepthGuard(int* d) : depth(d) { ++*depth; }
    ~DepthGuard() { --*depth; }
  };

  ValuePtr evalExp(const ExpPtr& start, EvalEnv* env) {
    DepthGuard guard(&depth_);
    if (depth_ > 9000)
      abort(EvalOutcome::Kind::FuelExhausted, start->span, "recursion depth limit");
    using EK = Exp::Kind;
    const ExpPtr* cur = &start;
    for (;;) {
      const ExpPtr& e = *cur;
      switch (e->kind) {
        case EK::Ident:
          return evalIdent(e.get(), env);
        case EK::Int:
          return Value::mkInt(parseInt(e->literal));
        case EK::Real:
          return Value::mkReal(parseReal(e->literal));
        case EK::String:
          return Value::mkString(Lexer::decodeStringText(e->literal, e->span));
        case EK::Char:
          return Value::mkChar(Lexer::decodeStringText(e->literal.substr(1), e->span)[0]);
        case EK::Unit:
          return Value::mkUnit();
        case EK::Tuple: {
          auto v = std::make_shared<Value>();
          v->kind = Value::Kind::Tuple;
          for (auto& el : e->items) v->items.push_back(evalExp(el, env));
          return v;
        }
        case EK::List: {
          auto v = std::make_shared<Value>();
          v->kind = Value::Kind::List;
          for (auto& el : e->items) v->items.push_back(evalExp(el, env));
          return v;
        }
        case EK::Record: {
          std::vector<std::pair<std::string, ValuePtr>> fields;
          for (auto& [lab, sub] : e->fields) fields.emplace_back(lab, evalExp(sub, env));
          std::sort(fields.begin(), fields.end(),
                    [](auto& a, auto& b) { return a.first < b.first; });
          auto v = std::make_shared<Value>();
          v->kind = Value::Kind::Record;
          v->fields = std::move(fields);
          return v;
        }
        case EK::App: {
          ValuePtr f = evalExp(e->items[0], env);
          ValuePtr a = evalExp(e->items[1], env);
          AppResult r = applyStep(f, a, e->span);
          if (r.value) return r.value;
          cur = r.body;
          env = r.env;
          continue;  // tail call
        }
        case EK::InfixApp: {
          const IdInfo* info = el_.identOf(e.get());
          ValuePtr lhs = evalExp(e->items[0], env);
          ValuePtr rhs = evalExp(e->items[1], env);
          auto pair = std::make_shared<Value>();
          pair->kind = Value::Kind::Tuple;
          pair->items = {lhs, rhs};
          ValuePtr f;
          if (info && info->sort == IdSort::Constructor) {
            auto cf = std::make_shared<Value>();
            cf->kind = Value::Kind::CtorFn;
            cf->s = info->ctorName;
            cf->conUid = info->ctorUid;
            f = cf;
          } else if (const ValuePtr* fv = env->lookup(e->name)) {
            f = *fv;
          } else {
            auto b = std::make_shared<Value>();
            b->kind = Value::Kind::Builtin;
            b->s = e->name;
            f = b;
          }
          AppResult r = applyStep(f, pair, e->span);
          if (r.value) return r.value;
          cur = r.body;
          env = r.env;
          continue;
        }
        case EK::Fn: {
          auto v = std::make_shared<Value>();
          v->kind = Value::Kind::Closure;
          v->rules = &e->rules;
          v->env = env;
          return v;
        }
        case EK::Case: {
          ValuePtr scrut = evalExp(e->items[0], env);
          bool stepped = false;
          for (auto& rule : e->rules) {
            std::vector<std::pair<std::string, ValuePtr>> binds;
            if (match(rule.pat, scrut, binds)) {
              EvalEnv* inner = makeEnv(env);
              for (auto& [n, v] : binds) inner->vals[n] = v;
              cur = &rule.body;
              env = inner;
              stepped = true;
              break;
            }
          }
          if (!stepped) abort(EvalOutcome::Kind::BindFailure, e->span, "match failure");
          continue;
        }
        case EK::If: {
          ValuePtr c = evalExp(e->items[0], env);
          cur = c->b ? &e->items[1] : &e->items[2];
          continue;
        }
        case EK::Andalso: {
          ValuePtr l = evalExp(e->items[0], env);
          if (!l->b) return Value::mkBool(false);
          cur = &e->items[1];
          continue;
        }
        case EK::Orelse: {
          ValuePtr l = evalExp(e->items[0], env);
          if (l->b) return Value::mkBool(true);
          cur = &e->items[1];
          continue;
        }
        case EK::Let: {
          EvalEnv* inner = makeEnv(env);
          for (auto& d : e->decls) evalDecl(d, inner, nullptr, "");
          cur = &e->items[0];
          env = inner;
          continue;
        }
        case EK::Typed:
          cur = &e->items[0];
          continue;
      }
      abort(EvalOutcome::Kind::Stuck, e->span, "bad expression");
    }
  }

  // ---- declarations ----

  using TopBindings = std::vector<std::pair<std::string, ValuePtr>>;

  void evalDecl(const DeclPtr& d, EvalEnv* env, TopBindings* record, const std::string& prefix) {
    switch (d->kind) {
      case Decl::Kind::Val: {
        const ValBinding& vb = d->valBindings[0];
        ValuePtr v = evalExp(vb.exp, env);
        std::vector<std::pair<std::string, ValuePtr>> binds;
        if (!match(vb.pat, v, binds))
          abort(EvalOutcome::Kind::BindFailure, vb.span, "binding failure");
        for (auto& [n, val] : binds) {
          env->vals[n] = val;
          if (record) record->emplace_back(prefix + n, val);
        }
        return;
      }
      case Decl::Kind::ValRec: {
        const ValBinding& vb = d->valBindings[0];
        EvalEnv* inner = makeEnv(env);
        auto v = std::make_shared<Value>();
        v->kind = Value::Kind::Closure;
        v->rules = &vb.exp->rules;
        v->env = inner;
        inner->vals[vb.pat->name] = v;
        env->vals[vb.pat->name] = v;
        if (record) record->emplace_back(prefix + vb.pat->name, v);
        return;
      }
      case Decl::Kind::Fun: {
        EvalEnv* inner = makeEnv(env);
        for (auto& fb : d->funBindings) {
          auto v = std::make_shared<Value>();
          v->kind = Value::Kind::Closure;
          v->fun = &fb;
          v->env = inner;
          inner->vals[fb.name] = v;
          env->vals[fb.name] = v;
          if (record) record->emplace_back(prefix + fb.name, v);
        }
        return;
      }
      case Decl::Kind::Datatype:
      case Decl::Kind::TypeAbbrev:
      case Decl::Kind::InfixDirective:
        return;
      case Decl::Kind::Structure: {
        EvalEnv* members = evalStrExp(d->strExp, env);
        if (d->ascription) members = restrictToSig(members, d->ascription, env);
        env->structs[d->name] = members;
        if (record)
          for (auto& [n, v] : members->vals) record->emplace_back(prefix + d->name + "." + n, v);
        return;
      }
      case Decl::Kind::Signature:
        env->sigs[d->name] =
            d->sigExp->kind == SigExp::Kind::Name ? resolveSig(d->sigExp, env) : d->sigExp;
        return;
      case Decl::Kind::Functor: {
        EvalEnv::FunctorDef def;
        def.paramName = *d->paramName;
        def.body = &d->strExp->decls;
        def.closure = env;
        env->functors[d->name] = def;
        return;
      }
      case Decl::Kind::Local: {
        EvalEnv* hidden = makeEnv(env);
        for (auto& ld : d->localDecls) evalDecl(ld, hidden, nullptr, "");
        EvalEnv* exported = makeEnv(hidden);
        for (auto& bd : d->bodyDecls) evalDecl(bd, exported, record, prefix);
        for (auto& [n, v] : exported->vals) env->vals[n] = v;
        for (auto& [n, m] : exported->structs) env->structs[n] = m;
        return;
      }
    }
  }

  SigExpPtr resolveSig(const SigExpPtr& se, EvalEnv* env) {
    if (se->kind == SigExp::Kind::Inline) return se;
    for (EvalEnv* e = env; e; e = e->parent) {
      auto it = e->sigs.find(se->name);
      if (it != e->sigs.end()) return it->second;
    }
    abort(EvalOutcome::Kind::Stuck, se->span, "unbound signature");
  }

  EvalEnv* restrictToSig(EvalEnv* members, const SigExpPtr& sig, EvalEnv* env) {
    SigExpPtr resolved = resolveSig(sig, env);
    EvalEnv* view = makeEnv(nullptr);
    for (auto& spec : resolved->specs) {
      if (spec.kind != SigSpec::Kind::Val) continue;
      auto it = members->vals.find(spec.name);
      if (it != members->vals.end()) view->vals[spec.name] = it->second;
    }
    return view;
  }

  EvalEnv* evalStrExp(const StrExpPtr& se, EvalEnv* env) {
    switch (se->kind) {
      case StrExp::Kind::Name: {
        const EvalEnv* m = env->lookupModule(se->name);
        if (!m) abort(EvalOutcome::Kind::Stuck, se->span, "unbound structure");
        return const_cast<EvalEnv*>(m);
      }
      case StrExp::Kind::Inline: {
        EvalEnv* members = makeEnv(env);
        for (auto& d : se->decls) evalDecl(d, members, nullptr, "");
        return members;
      }
      case StrExp::Kind::FunctorApp: {
        EvalEnv::FunctorDef* def = nullptr;
        for (EvalEnv* e = env; e; e = e->parent) {
          auto it = e->functors.find(se->name);
          if (it != e->functors.end()) {
            def = &it->second;
            break;
          }
        }
        if (!def) abort(EvalOutcome::Kind::Stuck, se->span, "unbound functor");
        EvalEnv* argMembers = evalStrExp(se->arg, env);
        EvalEnv* callEnv = makeEnv(def->closure);
        callEnv->structs[def->paramName] = argMembers;
        EvalEnv* members = makeEnv(callEnv);
        for (auto& d : *def->body) evalDecl(d, members, nullptr, "");
        return members;
      }
    }
    abort(EvalOutcome::Kind::Stuck, se->span, "bad structure expression");
  }
};

inline EvalOutcome evaluate(const Elaboration& el, long long fuel = 1000000) {
  Evaluator ev(el, fuel);
  return ev.run();
}

// ---------------------------------------------------------------------------
// Rendering for the agreement corpus.

inline std::string renderValue(const ValuePtr& v) {
  using VK = Value::Kind;
  switch (v->kind) {
    case VK::Int:
      return v->i < 0 ? "~" + std::to_string(-v->i) : std::to_string(v->i);
    case VK::Real: {
      double d = v->r;
      std::string sign = d < 0 || (d == 0 && std::signbit(d)) ? "~" : "";
      d = std::fabs(d);
      std::string s = std::to_string(d);
      // trim trailing zeros but keep one decimal digit
      while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
      return sign + s;
    }
    case VK::String: {
      std::string out = "\"";
      for (char c : v->s) {
        if (c == '\n') out += "\\n";
        else if (c == '\t') out += "\\t";
        else if (c == '"') out += "\\\"";
        else if (c == '\\') out += "\\\\";
        else out += c;
      }
      return out + "\"";
    }
    case VK::Char: {
      std::string inner(1, char(v->i));
      if (inner == "\n") inner = "\\n";
      return "#\"" + inner + "\"";
    }
    case VK::Bool:
      return v->b ? "true" : "false";
    case VK::Unit:
      return "()";
    case VK::Tuple: {
      std::string out = "(";
      for (size_t i = 0; i < v->items.size(); ++i) {
        if (i) out += ",";
        out += renderValue(v->items[i]);
      }
      return out + ")";
    }
    case VK::List: {
      std::string out = "[";
      for (size_t i = 0; i < v->items.size(); ++i) {
        if (i) out += ",";
        out += renderValue(v->items[i]);
      }
      return out + "]";
    }
    case VK::Record: {
      std::string out = "{";
      for (size_t i = 0; i < v->fields.size(); ++i) {
        if (i) out += ",";
        out += v->fields[i].first + "=" + renderValue(v->fields[i].second);
      }
      return out + "}";
    }
    case VK::Con: {
      if (v->items.empty()) return v->s;
      std::string payload = renderValue(v->items[0]);
      if (v->items[0]->kind != VK::Tuple && v->items[0]->kind != VK::List &&
          !(payload[0] == '(' || payload[0] == '['))
        payload = v->items[0]->kind == VK::Con && !v->items[0]->items.empty()
                      ? "(" + payload + ")"
                      : payload;
      return v->s + " " + payload;
    }
    case VK::Closure: case VK::CtorFn: case VK::Builtin:
      return "fn";
    case VK::Module:
      return "<module>";
  }
  return "?";
}

inline std::string renderBindings(const EvalOutcome& out) {
  std::string text;
  for (auto& [name, v] : out.bindings) {
    text += name + " = " + renderValue(v) + "\n";
  }
  return text;
}

}  // namespace sml2coq
