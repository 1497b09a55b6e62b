#pragma once

#include <string>

#include "sml2coq/ast.hpp"

namespace sml2coq {

// Prints parsed SML back to concrete syntax. Used by diagnostics and by the
// parse/print round-trip tests; output is fully parenthesized where grouping
// matters so re-parsing is structure-preserving.
class SmlPrinter {
 public:
  std::string decl(const Decl& d) {
    std::string out;
    printDecl(d, out);
    return out;
  }

  std::string program(const std::vector<DeclPtr>& decls) {
    std::string out;
    for (auto& d : decls) {
      printDecl(*d, out);
      out += "\n";
    }
    return out;
  }

  std::string exp(const Exp& e) {
    std::string out;
    printExp(e, out);
    return out;
  }

  std::string pat(const Pat& p) {
    std::string out;
    printPat(p, out);
    return out;
  }

  std::string ty(const TyExp& t) {
    std::string out;
    printTy(t, out);
    return out;
  }

 private:
  static void name(const std::string& n, bool opMarked, std::string& out) {
    if (opMarked) out += "op ";
    out += n;
  }

  void printExp(const Exp& e, std::string& out) {
    using K = Exp::Kind;
    switch (e.kind) {
      case K::Ident: name(e.name, e.opMarked, out); break;
      case K::Int: case K::Real: case K::String: case K::Char: out += e.literal; break;
      case K::Unit: out += "()"; break;
      case K::Tuple: {
        out += "(";
        for (size_t i = 0; i < e.items.size(); ++i) {
          if (i) out += ", ";
          printExp(*e.items[i], out);
        }
        out += ")";
        break;
      }
      case K::List: {
        out += "[";
        for (size_t i = 0; i < e.items.size(); ++i) {
          if (i) out += ", ";
          printExp(*e.items[i], out);
        }
        out += "]";
        break;
      }
      case K::Record: {
        out += "{";
        for (size_t i = 0; i < e.fields.size(); ++i) {
          if (i) out += ", ";
          out += e.fields[i].first + " = ";
          printExp(*e.fields[i].second, out);
        }
        out += "}";
        break;
      }
      case K::App:
        out += "(";
        printExp(*e.items[0], out);
        out += " ";
        printExp(*e.items[1], out);
        out += ")";
        break;
      case K::InfixApp:
        out += "(";
        printExp(*e.items[0], out);
        out += " " + e.name + " ";
        printExp(*e.items[1], out);
        out += ")";
        break;
      case K::Fn: {
        out += "(fn ";
        printRules(e.rules, out);
        out += ")";
        break;
      }
      case K::Case: {
        out += "(case ";
        printExp(*e.items[0], out);
        out += " of ";
        printRules(e.rules, out);
        out += ")";
        break;
      }
      case K::If:
        out += "(if ";
        printExp(*e.items[0], out);
        out += " then ";
        printExp(*e.items[1], out);
        out += " else ";
        printExp(*e.items[2], out);
        out += ")";
        break;
      case K::Andalso:
        out += "(";
        printExp(*e.items[0], out);
        out += " andalso ";
        printExp(*e.items[1], out);
        out += ")";
        break;
      case K::Orelse:
        out += "(";
        printExp(*e.items[0], out);
        out += " orelse ";
        printExp(*e.items[1], out);
        out += ")";
        break;
      case K::Let: {
        out += "let ";
        for (auto& d : e.decls) {
          printDecl(*d, out);
          out += " ";
        }
        out += "in ";
        printExp(*e.items[0], out);
        out += " end";
        break;
      }
      case K::Typed:
        out += "(";
        printExp(*e.items[0], out);
        out += " : ";
        printTy(*e.ty, out);
        out += ")";
        break;
    }
  }

  void printRules(const std::vector<MatchRule>& rules, std::string& out) {
    for (size_t i = 0; i < rules.size(); ++i) {
      if (i) out += " | ";
      printPat(*rules[i].pat, out);
      out += " => ";
      printExp(*rules[i].body, out);
    }
  }

  void printPat(const Pat& p, std::string& out) {
    using K = Pat::Kind;
    switch (p.kind) {
      case K::Wildcard: out += "_"; break;
      case K::Ident: name(p.name, p.opMarked, out); break;
      case K::Int: case K::String: case K::Char: out += p.literal; break;
      case K::Unit: out += "()"; break;
      case K::Tuple: {
        out += "(";
        for (size_t i = 0; i < p.items.size(); ++i) {
          if (i) out += ", ";
          printPat(*p.items[i], out);
        }
        out += ")";
        break;
      }
      case K::List: {
        out += "[";
        for (size_t i = 0; i < p.items.size(); ++i) {
          if (i) out += ", ";
          printPat(*p.items[i], out);
        }
        out += "]";
        break;
      }
      case K::Record: {
        out += "{";
        for (size_t i = 0; i < p.fields.size(); ++i) {
          if (i) out += ", ";
          out += p.fields[i].first + " = ";
          printPat(*p.fields[i].second, out);
        }
        if (p.ellipsis) {
          if (!p.fields.empty()) out += ", ";
          out += "...";
        }
        out += "}";
        break;
      }
      case K::ConApp:
        out += "(";
        name(p.name, p.opMarked, out);
        out += " ";
        printPat(*p.items[0], out);
        out += ")";
        break;
      case K::InfixApp:
        out += "(";
        printPat(*p.items[0], out);
        out += " " + p.name + " ";
        printPat(*p.items[1], out);
        out += ")";
        break;
      case K::Typed:
        out += "(";
        printPat(*p.items[0], out);
        out += " : ";
        printTy(*p.ty, out);
        out += ")";
        break;
      case K::Layered:
        out += "(" + p.name;
        if (p.ty) {
          out += " : ";
          printTy(*p.ty, out);
        }
        out += " as ";
        printPat(*p.items[0], out);
        out += ")";
        break;
    }
  }

  void printTy(const TyExp& t, std::string& out) {
    using K = TyExp::Kind;
    switch (t.kind) {
      case K::Var: out += t.name; break;
      case K::Con: {
        if (t.args.size() == 1) {
          out += "(";
          printTy(*t.args[0], out);
          out += ") " + t.name;
        } else if (t.args.size() > 1) {
          out += "(";
          for (size_t i = 0; i < t.args.size(); ++i) {
            if (i) out += ", ";
            printTy(*t.args[i], out);
          }
          out += ") " + t.name;
        } else {
          out += t.name;
        }
        break;
      }
      case K::Tuple: {
        out += "(";
        for (size_t i = 0; i < t.args.size(); ++i) {
          if (i) out += " * ";
          printTy(*t.args[i], out);
        }
        out += ")";
        break;
      }
      case K::Arrow:
        out += "(";
        printTy(*t.args[0], out);
        out += " -> ";
        printTy(*t.args[1], out);
        out += ")";
        break;
      case K::Record: {
        out += "{";
        for (size_t i = 0; i < t.fields.size(); ++i) {
          if (i) out += ", ";
          out += t.fields[i].first + " : ";
          printTy(*t.fields[i].second, out);
        }
        out += "}";
        break;
      }
    }
  }

  void printDecl(const Decl& d, std::string& out) {
    using K = Decl::Kind;
    switch (d.kind) {
      case K::Val:
        out += "val ";
        printPat(*d.valBindings[0].pat, out);
        out += " = ";
        printExp(*d.valBindings[0].exp, out);
        break;
      case K::ValRec:
        out += "val rec ";
        printPat(*d.valBindings[0].pat, out);
        out += " = ";
        printExp(*d.valBindings[0].exp, out);
        break;
      case K::Fun: {
        for (size_t b = 0; b < d.funBindings.size(); ++b) {
          const FunBinding& fb = d.funBindings[b];
          if (fb.contract) printContract(*fb.contract, out);
          out += b == 0 ? "fun " : " and ";
          for (size_t c = 0; c < fb.clauses.size(); ++c) {
            const FunClause& cl = fb.clauses[c];
            if (c) out += " | ";
            name(cl.name, cl.opMarked, out);
            for (auto& p : cl.params) {
              out += " ";
              printPat(*p, out);
            }
            if (cl.retTy) {
              out += " : ";
              printTy(**cl.retTy, out);
            }
            out += " = ";
            printExp(*cl.body, out);
          }
        }
        break;
      }
      case K::Datatype: {
        for (size_t b = 0; b < d.dataBindings.size(); ++b) {
          const DataBinding& db = d.dataBindings[b];
          out += b == 0 ? "datatype " : " and ";
          printTyParams(db.params, out);
          out += db.name + " = ";
          for (size_t c = 0; c < db.constructors.size(); ++c) {
            if (c) out += " | ";
            out += db.constructors[c].name;
            if (db.constructors[c].payload) {
              out += " of ";
              printTy(*db.constructors[c].payload, out);
            }
          }
        }
        break;
      }
      case K::TypeAbbrev: {
        for (size_t b = 0; b < d.typeBindings.size(); ++b) {
          const TypeBinding& tb = d.typeBindings[b];
          out += b == 0 ? "type " : " and ";
          printTyParams(tb.params, out);
          out += tb.name + " = ";
          printTy(*tb.body, out);
        }
        break;
      }
      case K::Structure:
        out += "structure " + d.name;
        if (d.ascription) {
          out += d.opaque ? " :> " : " : ";
          printSigExp(*d.ascription, out);
        }
        out += " = ";
        printStrExp(*d.strExp, out);
        break;
      case K::Signature:
        out += "signature " + d.name + " = ";
        printSigExp(*d.sigExp, out);
        break;
      case K::Functor:
        out += "functor " + d.name + " (" + *d.paramName + " : ";
        printSigExp(*d.paramSig, out);
        out += ") = ";
        printStrExp(*d.strExp, out);
        break;
      case K::InfixDirective: {
        out += d.infixRight ? "infixr" : "infix";
        out += " " + std::to_string(d.infixPrecedence);
        for (auto& id : d.infixIds) out += " " + id;
        break;
      }
      case K::Local: {
        out += "local ";
        for (auto& ld : d.localDecls) {
          printDecl(*ld, out);
          out += " ";
        }
        out += "in ";
        for (auto& bd : d.bodyDecls) {
          printDecl(*bd, out);
          out += " ";
        }
        out += "end";
        break;
      }
    }
  }

  void printTyParams(const std::vector<std::string>& params, std::string& out) {
    if (params.size() == 1) {
      out += params[0] + " ";
    } else if (params.size() > 1) {
      out += "(";
      for (size_t i = 0; i < params.size(); ++i) {
        if (i) out += ", ";
        out += params[i];
      }
      out += ") ";
    }
  }

  void printContract(const Contract& c, std::string& out) {
    out += "(!! " + c.fname;
    for (auto& in : c.inputs) {
      out += " ";
      printPat(*in, out);
    }
    out += " ==> ";
    printPat(*c.output, out);
    out += "; REQUIRES: ";
    printExp(*c.requires_, out);
    out += "; ENSURES: ";
    printExp(*c.ensures_, out);
    out += "; !!) ";
  }

  void printSigExp(const SigExp& se, std::string& out) {
    if (se.kind == SigExp::Kind::Name) {
      out += se.name;
      return;
    }
    out += "sig ";
    for (auto& s : se.specs) {
      switch (s.kind) {
        case SigSpec::Kind::Type:
          out += "type ";
          printTyParams(s.params, out);
          out += s.name;
          break;
        case SigSpec::Kind::TypeDef:
          out += "type ";
          printTyParams(s.params, out);
          out += s.name + " = ";
          printTy(*s.ty, out);
          break;
        case SigSpec::Kind::Val:
          out += "val " + s.name + " : ";
          printTy(*s.ty, out);
          break;
      }
      out += " ";
    }
    out += "end";
  }

  void printStrExp(const StrExp& se, std::string& out) {
    switch (se.kind) {
      case StrExp::Kind::Name: out += se.name; break;
      case StrExp::Kind::Inline: {
        out += "struct ";
        for (auto& d : se.decls) {
          printDecl(*d, out);
          out += " ";
        }
        out += "end";
        break;
      }
      case StrExp::Kind::FunctorApp:
        out += se.name + " (";
        printStrExp(*se.arg, out);
        out += ")";
        break;
    }
  }
};

// Structural equality, ignoring spans. Used by the round-trip property.
bool equalExp(const Exp& a, const Exp& b);
bool equalPat(const Pat& a, const Pat& b);
bool equalTy(const TyExp& a, const TyExp& b);
bool equalDecl(const Decl& a, const Decl& b);

inline bool equalTyOpt(const TyExpPtr& a, const TyExpPtr& b) {
  if (!a || !b) return !a && !b;
  return equalTy(*a, *b);
}

inline bool equalTy(const TyExp& a, const TyExp& b) {
  if (a.kind != b.kind || a.name != b.name) return false;
  if (a.args.size() != b.args.size() || a.fields.size() != b.fields.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i)
    if (!equalTy(*a.args[i], *b.args[i])) return false;
  for (size_t i = 0; i < a.fields.size(); ++i)
    if (a.fields[i].first != b.fields[i].first ||
        !equalTy(*a.fields[i].second, *b.fields[i].second))
      return false;
  return true;
}

inline bool equalPat(const Pat& a, const Pat& b) {
  if (a.kind != b.kind || a.name != b.name || a.literal != b.literal ||
      a.ellipsis != b.ellipsis || a.opMarked != b.opMarked)
    return false;
  if (!equalTyOpt(a.ty, b.ty)) return false;
  if (a.items.size() != b.items.size() || a.fields.size() != b.fields.size()) return false;
  for (size_t i = 0; i < a.items.size(); ++i)
    if (!equalPat(*a.items[i], *b.items[i])) return false;
  for (size_t i = 0; i < a.fields.size(); ++i)
    if (a.fields[i].first != b.fields[i].first ||
        !equalPat(*a.fields[i].second, *b.fields[i].second))
      return false;
  return true;
}

inline bool equalExp(const Exp& a, const Exp& b) {
  if (a.kind != b.kind || a.name != b.name || a.literal != b.literal ||
      a.opMarked != b.opMarked)
    return false;
  if (!equalTyOpt(a.ty, b.ty)) return false;
  if (a.items.size() != b.items.size() || a.fields.size() != b.fields.size() ||
      a.rules.size() != b.rules.size() || a.decls.size() != b.decls.size())
    return false;
  for (size_t i = 0; i < a.items.size(); ++i)
    if (!equalExp(*a.items[i], *b.items[i])) return false;
  for (size_t i = 0; i < a.fields.size(); ++i)
    if (a.fields[i].first != b.fields[i].first ||
        !equalExp(*a.fields[i].second, *b.fields[i].second))
      return false;
  for (size_t i = 0; i < a.rules.size(); ++i)
    if (!equalPat(*a.rules[i].pat, *b.rules[i].pat) ||
        !equalExp(*a.rules[i].body, *b.rules[i].body))
      return false;
  for (size_t i = 0; i < a.decls.size(); ++i)
    if (!equalDecl(*a.decls[i], *b.decls[i])) return false;
  return true;
}

inline bool equalSigExp(const SigExp& a, const SigExp& b) {
  if (a.kind != b.kind || a.name != b.name || a.specs.size() != b.specs.size()) return false;
  for (size_t i = 0; i < a.specs.size(); ++i) {
    const SigSpec &x = a.specs[i], &y = b.specs[i];
    if (x.kind != y.kind || x.name != y.name || x.params != y.params) return false;
    if (!equalTyOpt(x.ty, y.ty)) return false;
  }
  return true;
}

inline bool equalStrExp(const StrExp& a, const StrExp& b) {
  if (a.kind != b.kind || a.name != b.name || a.decls.size() != b.decls.size()) return false;
  for (size_t i = 0; i < a.decls.size(); ++i)
    if (!equalDecl(*a.decls[i], *b.decls[i])) return false;
  if (!a.arg != !b.arg) return false;
  return !a.arg || equalStrExp(*a.arg, *b.arg);
}

inline bool equalContract(const Contract& a, const Contract& b) {
  if (a.fname != b.fname || a.inputs.size() != b.inputs.size()) return false;
  for (size_t i = 0; i < a.inputs.size(); ++i)
    if (!equalPat(*a.inputs[i], *b.inputs[i])) return false;
  return equalPat(*a.output, *b.output) && equalExp(*a.requires_, *b.requires_) &&
         equalExp(*a.ensures_, *b.ensures_);
}

inline bool equalDecl(const Decl& a, const Decl& b) {
  if (a.kind != b.kind || a.name != b.name) return false;
  if (a.valBindings.size() != b.valBindings.size() ||
      a.funBindings.size() != b.funBindings.size() ||
      a.dataBindings.size() != b.dataBindings.size() ||
      a.typeBindings.size() != b.typeBindings.size())
    return false;
  for (size_t i = 0; i < a.valBindings.size(); ++i)
    if (!equalPat(*a.valBindings[i].pat, *b.valBindings[i].pat) ||
        !equalExp(*a.valBindings[i].exp, *b.valBindings[i].exp))
      return false;
  for (size_t i = 0; i < a.funBindings.size(); ++i) {
    const FunBinding &x = a.funBindings[i], &y = b.funBindings[i];
    if (x.name != y.name || x.clauses.size() != y.clauses.size()) return false;
    if (x.contract.has_value() != y.contract.has_value()) return false;
    if (x.contract && !equalContract(*x.contract, *y.contract)) return false;
    for (size_t c = 0; c < x.clauses.size(); ++c) {
      const FunClause &p = x.clauses[c], &q = y.clauses[c];
      if (p.name != q.name || p.params.size() != q.params.size()) return false;
      if (p.retTy.has_value() != q.retTy.has_value()) return false;
      if (p.retTy && !equalTy(**p.retTy, **q.retTy)) return false;
      for (size_t k = 0; k < p.params.size(); ++k)
        if (!equalPat(*p.params[k], *q.params[k])) return false;
      if (!equalExp(*p.body, *q.body)) return false;
    }
  }
  for (size_t i = 0; i < a.dataBindings.size(); ++i) {
    const DataBinding &x = a.dataBindings[i], &y = b.dataBindings[i];
    if (x.name != y.name || x.params != y.params ||
        x.constructors.size() != y.constructors.size())
      return false;
    for (size_t c = 0; c < x.constructors.size(); ++c) {
      if (x.constructors[c].name != y.constructors[c].name) return false;
      if (!equalTyOpt(x.constructors[c].payload, y.constructors[c].payload)) return false;
    }
  }
  for (size_t i = 0; i < a.typeBindings.size(); ++i) {
    const TypeBinding &x = a.typeBindings[i], &y = b.typeBindings[i];
    if (x.name != y.name || x.params != y.params || !equalTy(*x.body, *y.body)) return false;
  }
  if (a.kind == Decl::Kind::Structure || a.kind == Decl::Kind::Functor) {
    if (!a.strExp != !b.strExp) return false;
    if (a.strExp && !equalStrExp(*a.strExp, *b.strExp)) return false;
    if (a.ascription || b.ascription) {
      if (!a.ascription || !b.ascription || a.opaque != b.opaque) return false;
      if (!equalSigExp(*a.ascription, *b.ascription)) return false;
    }
    if (a.paramName != b.paramName) return false;
    if (a.paramSig && (!b.paramSig || !equalSigExp(*a.paramSig, *b.paramSig))) return false;
  }
  if (a.kind == Decl::Kind::Signature && !equalSigExp(*a.sigExp, *b.sigExp)) return false;
  if (a.kind == Decl::Kind::InfixDirective &&
      (a.infixRight != b.infixRight || a.infixPrecedence != b.infixPrecedence ||
       a.infixIds != b.infixIds))
    return false;
  if (a.kind == Decl::Kind::Local) {
    if (a.localDecls.size() != b.localDecls.size() || a.bodyDecls.size() != b.bodyDecls.size())
      return false;
    for (size_t i = 0; i < a.localDecls.size(); ++i)
      if (!equalDecl(*a.localDecls[i], *b.localDecls[i])) return false;
    for (size_t i = 0; i < a.bodyDecls.size(); ++i)
      if (!equalDecl(*a.bodyDecls[i], *b.bodyDecls[i])) return false;
  }
  return true;
}

}  // namespace sml2coq
