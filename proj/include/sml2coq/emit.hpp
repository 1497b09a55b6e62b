#pragma once

#include <map>
#include <string>
#include <vector>

#include "sml2coq/gallina.hpp"

namespace sml2coq {

struct EmitConfig {
  bool headerEnabled = true;
  int indentWidth = 2;
  int lineWidth = 100;              // soft limit
  bool normalizeFreshNames = false; // golden-test mode
};

// The nine shim imports, the Equations import, and default generalization.
inline std::string emitHeader(bool enabled = true) {
  if (!enabled) return "";
  std::string out;
  for (const char* lib : {"intSml", "listSml", "realSml", "stringSml", "charSml",
                          "boolSml", "optionSml", "listPairSml", "notationsSml"})
    out += std::string("Require Import ") + lib + ".\n";
  out += "\nFrom Equations Require Import Equations.\n";
  out += "Generalizable All Variables.\n";
  return out;
}

class GallinaPrinter {
 public:
  explicit GallinaPrinter(const EmitConfig& cfg) : cfg_(cfg) {}

  std::string sentence(const GSentence& s) {
    std::string out;
    printSentence(s, 0, out);
    return out;
  }

  std::string term(const GTerm& t) {
    std::string out;
    printTerm(t, out);
    return out;
  }

  std::string pattern(const GPattern& p) {
    std::string out;
    printPat(p, /*atom=*/false, out);
    return out;
  }

 private:
  const EmitConfig& cfg_;

  void indent(int depth, std::string& out) {
    out.append(size_t(depth) * size_t(cfg_.indentWidth), ' ');
  }

  static std::string coqString(const std::string& decoded) {
    std::string out = "\"";
    for (char c : decoded) {
      if (c == '"') out += "\"\"";  // Coq doubles quotes
      else out += c;
    }
    return out + "\"";
  }

  void printBinder(const GBinder& b, std::string& out) {
    switch (b.style) {
      case GBinder::Style::Paren:
        if (!b.type) { out += b.name; return; }
        out += "(" + b.name + ": ";
        printTerm(*b.type, out);
        out += ")";
        return;
      case GBinder::Style::Curly:
        out += "{" + b.name;
        if (b.type) {
          out += b.type->kind == GTerm::Kind::Sort ? " : " : ": ";
          printTerm(*b.type, out);
        }
        out += "}";
        return;
      case GBinder::Style::Generalized:
        out += "`(" + b.name + ": ";
        printTerm(*b.type, out);
        out += ")";
        return;
    }
  }

  void printBinders(const std::vector<GBinder>& binders, std::string& out,
                    const char* sep = " ") {
    for (size_t i = 0; i < binders.size(); ++i) {
      if (i) out += sep;
      printBinder(binders[i], out);
    }
  }

  void printTerm(const GTerm& t, std::string& out) {
    using K = GTerm::Kind;
    switch (t.kind) {
      case K::Ident: out += t.name; return;
      case K::Sort: out += "Type"; return;
      case K::IntLit:
        if (t.intVal < 0) out += "(" + std::to_string(t.intVal) + ")";
        else out += std::to_string(t.intVal);
        return;
      case K::RealLit: out += t.text; return;
      case K::StringLit: out += coqString(t.text); return;
      case K::CharLit: out += coqString(t.text) + "%char"; return;
      case K::UnitLit: out += "tt"; return;
      case K::Tuple: {
        out += "(";
        for (size_t i = 0; i < t.items.size(); ++i) {
          if (i) out += ", ";
          printTerm(*t.items[i], out);
        }
        out += ")";
        return;
      }
      case K::ListLit: {
        out += "[";
        for (size_t i = 0; i < t.items.size(); ++i) {
          if (i) out += "; ";
          printTerm(*t.items[i], out);
        }
        out += "]";
        return;
      }
      case K::App: {
        for (size_t i = 0; i < t.items.size(); ++i) {
          if (i) out += " ";
          printTerm(*t.items[i], out);
        }
        return;
      }
      case K::ExplicitApp: {
        out += "@" + t.name;
        for (auto& a : t.items) {
          out += " ";
          printTerm(*a, out);
        }
        return;
      }
      case K::Arrow:
        printTerm(*t.items[0], out);
        out += " -> ";
        printTerm(*t.items[1], out);
        return;
      case K::ProductType: {
        out += "(";
        for (size_t i = 0; i < t.items.size(); ++i) {
          if (i) out += " * ";
          printTerm(*t.items[i], out);
        }
        out += ")%type";
        return;
      }
      case K::Fun: {
        out += "fun ";
        printBinders(t.binders, out);
        out += " => ";
        printTerm(*t.items[0], out);
        return;
      }
      case K::Let:
        out += "let " + t.name + " := ";
        printTerm(*t.items[0], out);
        out += " in ";
        printTerm(*t.items[1], out);
        return;
      case K::Match: {
        out += "match ";
        printTerm(*t.items[0], out);
        out += " with ";
        for (size_t i = 0; i < t.branches.size(); ++i) {
          if (i) out += " | ";
          printPat(*t.branches[i].pat, true, out);
          out += " => ";
          printTerm(*t.branches[i].body, out);
        }
        out += " end";
        return;
      }
      case K::If:
        out += "if ";
        printTerm(*t.items[0], out);
        out += " then ";
        printTerm(*t.items[1], out);
        out += " else ";
        printTerm(*t.items[2], out);
        return;
      case K::RecordLit: {
        out += "{| ";
        for (size_t i = 0; i < t.fields.size(); ++i) {
          if (i) out += "; ";
          out += t.fields[i].first + " := ";
          printTerm(*t.fields[i].second, out);
        }
        out += " |}";
        return;
      }
      case K::Annot:
        out += "(";
        printTerm(*t.items[0], out);
        out += " : ";
        printTerm(*t.items[1], out);
        out += ")";
        return;
      case K::PropForall:
        out += "forall ";
        printBinders(t.binders, out);
        out += ", ";
        printTerm(*t.items[0], out);
        return;
      case K::PropExists:
        out += "exists ";
        printBinders(t.binders, out);
        out += ", ";
        printTerm(*t.items[0], out);
        return;
      case K::PropAnd:
        printTerm(*t.items[0], out);
        out += " /\\ ";
        printTerm(*t.items[1], out);
        return;
      case K::PropOr:
        printTerm(*t.items[0], out);
        out += " \\/ ";
        printTerm(*t.items[1], out);
        return;
      case K::PropEq:
        printTerm(*t.items[0], out);
        out += " = ";
        printTerm(*t.items[1], out);
        return;
      case K::BoolAnd:
        printTerm(*t.items[0], out);
        out += " && ";
        printTerm(*t.items[1], out);
        return;
      case K::BoolOr:
        printTerm(*t.items[0], out);
        out += " || ";
        printTerm(*t.items[1], out);
        return;
      case K::InfixApp:
        printTerm(*t.items[0], out);
        out += " " + t.name + " ";
        printTerm(*t.items[1], out);
        return;
      case K::ScopeAnnot:
        out += "(";
        printTerm(*t.items[0], out);
        out += ")%" + t.name;
        return;
      case K::Paren:
        out += "(";
        printTerm(*t.items[0], out);
        out += ")";
        return;
    }
  }

  // `atom` requests parentheses around compound pattern forms.
  void printPat(const GPattern& p, bool atom, std::string& out) {
    using K = GPattern::Kind;
    switch (p.kind) {
      case K::Wildcard: out += "_"; return;
      case K::Var: out += p.name; return;
      case K::IntLit:
        if (p.intVal < 0) out += "(" + std::to_string(p.intVal) + ")";
        else out += std::to_string(p.intVal);
        return;
      case K::StringLit: out += coqString(p.text); return;
      case K::CharLit: out += coqString(p.text) + "%char"; return;
      case K::Unit: out += "tt"; return;
      case K::Tuple: {
        out += "(";
        for (size_t i = 0; i < p.items.size(); ++i) {
          if (i) out += ", ";
          printPat(*p.items[i], false, out);
        }
        out += ")";
        return;
      }
      case K::List: {
        out += "[";
        for (size_t i = 0; i < p.items.size(); ++i) {
          if (i) out += "; ";
          printPat(*p.items[i], false, out);
        }
        out += "]";
        return;
      }
      case K::ConApp: {
        if (atom) out += "(";
        out += p.name;
        for (auto& a : p.items) {
          out += " ";
          printPat(*a, true, out);
        }
        if (atom) out += ")";
        return;
      }
      case K::InfixApp: {
        if (atom) out += "(";
        printPat(*p.items[0], true, out);
        out += " " + p.name + " ";
        printPat(*p.items[1], true, out);
        if (atom) out += ")";
        return;
      }
      case K::Record: {
        out += "{| ";
        for (size_t i = 0; i < p.fields.size(); ++i) {
          if (i) out += "; ";
          out += p.fields[i].first + " := ";
          printPat(*p.fields[i].second, false, out);
        }
        out += " |}";
        return;
      }
      case K::Alias: {
        if (atom) out += "(";
        printPat(*p.items[0], true, out);
        out += " as " + p.name;
        if (atom) out += ")";
        return;
      }
    }
  }

  void printEquationsFunc(const GEquationsFunc& f, bool first, int depth, std::string& out) {
    indent(depth, out);
    out += first ? "Equations " : "with ";
    out += f.name;
    if (!f.binders.empty()) {
      out += " ";
      printBinders(f.binders, out);
    }
    out += ": ";
    printTerm(*f.returnType, out);
    out += " :=\n";
    for (size_t i = 0; i < f.clauses.size(); ++i) {
      indent(depth + 1, out);
      out += f.name;
      for (auto& p : f.clauses[i].pats) {
        out += " ";
        printPat(*p, true, out);
      }
      out += " := ";
      printTerm(*f.clauses[i].body, out);
      if (i + 1 < f.clauses.size()) out += ";";
      out += "\n";
    }
  }

  void printSentence(const GSentence& s, int depth, std::string& out) {
    using K = GSentence::Kind;
    switch (s.kind) {
      case K::RequireImport:
        indent(depth, out);
        if (s.fromEquations) out += "From Equations Require Import " + s.name + ".\n";
        else out += "Require Import " + s.name + ".\n";
        return;
      case K::GeneralizableAll:
        indent(depth, out);
        out += "Generalizable All Variables.\n";
        return;
      case K::Comment:
        indent(depth, out);
        out += "(* " + s.text + " *)\n";
        return;
      case K::Definition: {
        indent(depth, out);
        out += "Definition " + s.name;
        if (!s.binders.empty()) {
          out += " ";
          printBinders(s.binders, out);
        }
        if (s.returnType) {
          out += " : ";
          printTerm(*s.returnType, out);
        }
        out += " := ";
        std::string body;
        printTerm(*s.body, body);
        // soft wrap: long match bodies break after `with` branches
        out += body;
        out += ".\n";
        maybeRewrap(out);
        return;
      }
      case K::Equations: {
        for (size_t i = 0; i < s.funcs.size(); ++i) {
          printEquationsFunc(s.funcs[i], i == 0, depth, out);
          // `with` companions continue the same sentence: replace the trailing
          // newline of the previous clause block appropriately.
        }
        // single final period: attach to last clause line
        if (!out.empty() && out.back() == '\n') {
          out.pop_back();
          out += ".\n";
        }
        return;
      }
      case K::Inductive: {
        for (size_t i = 0; i < s.datatypes.size(); ++i) {
          const GInductive& d = s.datatypes[i];
          indent(depth, out);
          out += i == 0 ? "Inductive " : "with ";
          out += d.name;
          if (!d.params.empty()) {
            out += " ";
            printBinders(d.params, out);
          }
          out += " : Type :=\n";
          for (size_t c = 0; c < d.ctors.size(); ++c) {
            indent(depth + 1, out);
            out += "| " + d.ctors[c].name;
            if (d.ctors[c].type) {
              out += " : ";
              printTerm(*d.ctors[c].type, out);
            }
            out += "\n";
          }
        }
        if (!out.empty() && out.back() == '\n') {
          out.pop_back();
          out += ".\n";
        }
        return;
      }
      case K::RecordDecl: {
        indent(depth, out);
        out += "Record " + s.name + " := { ";
        for (size_t i = 0; i < s.recordFields.size(); ++i) {
          if (i) out += "; ";
          out += s.recordFields[i].first + " : ";
          printTerm(*s.recordFields[i].second, out);
        }
        out += " }.\n";
        return;
      }
      case K::Theorem: {
        indent(depth, out);
        out += "Theorem " + s.name + ": ";
        printTerm(*s.body, out);
        out += ".\n";
        maybeRewrap(out);
        if (s.admitted) {
          indent(depth, out);
          out += "Admitted.\n";
        }
        return;
      }
      case K::Axiom:
        indent(depth, out);
        out += s.local ? "Local Axiom " : "Axiom ";
        out += s.name + ": ";
        printTerm(*s.body, out);
        out += ".\n";
        return;
      case K::Notation: {
        indent(depth, out);
        out += "Notation \"" + s.text + "\" := ";
        printTerm(*s.body, out);
        out += " (";
        out += s.leftAssoc ? "left associativity" : "right associativity";
        out += ", at level " + std::to_string(s.level) + ").\n";
        return;
      }
      case K::Module: {
        indent(depth, out);
        out += "Module " + s.name;
        if (s.moduleParam)
          out += " ( " + s.moduleParam->first + " : " + s.moduleParam->second + " )";
        if (s.ascription) out += " <: " + *s.ascription;
        if (s.moduleApp) {
          out += " := !" + s.moduleApp->functorName + " " + s.moduleApp->argName + ".\n";
          return;
        }
        if (s.moduleAlias) {
          out += " := " + *s.moduleAlias + ".\n";
          return;
        }
        out += ".\n";
        for (auto& inner : s.moduleBody) printSentence(*inner, depth + 1, out);
        indent(depth, out);
        out += "End " + s.name + ".\n";
        return;
      }
      case K::ModuleType: {
        indent(depth, out);
        out += "Module Type " + s.name;
        if (s.moduleAlias) {
          out += " := " + *s.moduleAlias + ".\n";
          return;
        }
        out += ".\n";
        for (auto& inner : s.moduleBody) printSentence(*inner, depth + 1, out);
        indent(depth, out);
        out += "End " + s.name + ".\n";
        return;
      }
      case K::Parameter:
        indent(depth, out);
        out += "Parameter " + s.name + " : ";
        printTerm(*s.body, out);
        out += ".\n";
        return;
    }
  }

  // Soft line wrap: if the last emitted line exceeds the limit, break after
  // `:=`, `->`, and match branch separators.
  void maybeRewrap(std::string& out) {
    size_t lineStart = out.rfind('\n', out.size() - 2);
    lineStart = lineStart == std::string::npos ? 0 : lineStart + 1;
    size_t len = out.size() - 1 - lineStart;
    if (int(len) <= cfg_.lineWidth) return;
    std::string line = out.substr(lineStart, len);
    out.erase(lineStart);
    std::string wrapped;
    int col = 0;
    size_t i = 0;
    auto breakHere = [&](size_t advance) {
      wrapped.append(line, i, advance);
      wrapped += "\n  ";
      col = 2;
      i += advance;
      while (i < line.size() && line[i] == ' ') ++i;
    };
    while (i < line.size()) {
      if (col > cfg_.lineWidth) {
        // find the next break opportunity
        size_t bp = std::string::npos;
        for (const char* tok : {" := ", " -> ", " | ", " /\\ ", " \\/ "}) {
          size_t f = line.find(tok, i);
          if (f != std::string::npos && (bp == std::string::npos || f < bp)) bp = f + 3;
        }
        if (bp == std::string::npos || bp <= i) {
          wrapped.append(line, i, std::string::npos);
          break;
        }
        breakHere(bp - i);
        continue;
      }
      wrapped += line[i];
      ++col;
      ++i;
    }
    out += wrapped + "\n";
  }
};

namespace emit_detail {

// Positional renaming of fresh names for golden comparison: rid_N, _'N, mid_N
// (and yN) map to first-occurrence indices. String literals are left alone.
inline std::string normalizeFreshNames(const std::string& text) {
  std::string out;
  std::map<std::string, std::string> mapping;
  std::map<std::string, int> counters;
  auto renamed = [&](const std::string& word, const std::string& kind) {
    auto it = mapping.find(word);
    if (it != mapping.end()) return it->second;
    int n = ++counters[kind];
    std::string fresh = kind + std::to_string(n);
    mapping[word] = fresh;
    return fresh;
  };
  auto isWordChar = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '\'';
  };
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '"') {  // skip string literals ("" is an escaped quote)
      size_t j = i + 1;
      while (j < text.size()) {
        if (text[j] == '"' && (j + 1 >= text.size() || text[j + 1] != '"')) break;
        if (text[j] == '"') ++j;
        ++j;
      }
      out.append(text, i, j - i + 1);
      i = j + 1;
      continue;
    }
    if (isWordChar(c) && (i == 0 || !isWordChar(text[i - 1]))) {
      size_t j = i;
      while (j < text.size() && isWordChar(text[j])) ++j;
      std::string word = text.substr(i, j - i);
      auto allDigits = [](std::string_view s) {
        if (s.empty()) return false;
        for (char d : s)
          if (d < '0' || d > '9') return false;
        return true;
      };
      if (word.rfind("rid_", 0) == 0 && allDigits(word.substr(4))) {
        out += renamed(word, "rid_");
      } else if (word.rfind("mid_", 0) == 0 && allDigits(word.substr(4))) {
        out += renamed(word, "mid_");
      } else if (word.rfind("_'", 0) == 0 && allDigits(word.substr(2))) {
        out += renamed(word, "_'");
      } else {
        out += word;
      }
      i = j;
      continue;
    }
    out += c;
    ++i;
  }
  return out;
}

}  // namespace emit_detail

// Deterministic rendering of a sentence sequence: UTF-8, LF, trailing newline.
inline std::string emit(const std::vector<GSentencePtr>& sentences, const EmitConfig& cfg) {
  std::string out = emitHeader(cfg.headerEnabled);
  if (cfg.headerEnabled && !sentences.empty()) out += "\n";
  GallinaPrinter printer(cfg);
  for (size_t i = 0; i < sentences.size(); ++i) {
    if (i) {
      // Blank line between top-level sentences except tightly coupled pairs.
      bool tight = sentences[i]->kind == GSentence::Kind::Comment ||
                   sentences[i - 1]->kind == GSentence::Kind::Comment;
      if (!tight) out += "\n";
    }
    out += printer.sentence(*sentences[i]);
  }
  if (cfg.normalizeFreshNames) out = emit_detail::normalizeFreshNames(out);
  if (out.empty() || out.back() != '\n') out += "\n";
  return out;
}

}  // namespace sml2coq
