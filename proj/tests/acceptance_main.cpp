// Acceptance suite: runs each acceptance criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit status is the number of
// failing criteria.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "sml2coq/sml2coq.hpp"

using namespace sml2coq;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, double seconds, const std::string& detail = "") {
  std::printf("%s  %-28s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", name.c_str(), seconds,
              detail.empty() ? "" : " ", detail.c_str());
  if (!ok) ++failures;
}

template <typename F>
void criterion(const std::string& name, double limitSeconds, F body) {
  auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const CompileError& e) {
    detail = "error: " + e.diag.message;
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (ok && secs > limitSeconds) {
    ok = false;
    detail = "exceeded the stated runtime limit";
  }
  report(name, ok, secs, detail);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in.good()) throw std::runtime_error("missing file " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::string> coqTokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : gsurf::GallinaLexer(text).run())
    if (t.kind != gsurf::Tok::Kind::Eof) out.push_back(t.text);
  return out;
}

bool goldenMatches(const std::string& stem, std::string& detail) {
  fs::path dir = fs::path(SML2COQ_CORPUS_DIR) / "golden";
  auto t = translateText(slurp(dir / (stem + ".sml")), /*header=*/false, /*normalize=*/true);
  auto got = coqTokens(t.text);
  auto want = coqTokens(slurp(dir / (stem + ".v")));
  for (size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
    if (got[i] != want[i]) {
      detail += stem + ": token " + std::to_string(i) + " '" + got[i] + "' != '" + want[i] + "'; ";
      return false;
    }
  }
  if (got.size() != want.size()) {
    detail += stem + ": token count " + std::to_string(got.size()) + " != " +
              std::to_string(want.size()) + "; ";
    return false;
  }
  return true;
}

std::vector<fs::path> corpusSources() {
  std::vector<fs::path> files;
  for (const char* sub : {"golden", "eval"}) {
    for (auto& entry : fs::directory_iterator(fs::path(SML2COQ_CORPUS_DIR) / sub))
      if (entry.path().extension() == ".sml") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// ---------------------------------------------------------------------------
// Small value domain used by the brute-force oracles.

struct TVal {
  enum Kind { Bool, Int, List, Tuple, Opt } kind = Bool;
  bool b = false;
  long long i = 0;
  bool some = false;
  std::vector<TVal> items;
};

std::vector<TVal> enumerate(const SemType& t, int listLen) {
  std::vector<TVal> out;
  switch (t.kind) {
    case SemType::Kind::Bool:
      for (bool b : {false, true}) {
        TVal v;
        v.kind = TVal::Bool;
        v.b = b;
        out.push_back(v);
      }
      return out;
    case SemType::Kind::Int:
      for (long long i : {0, 1}) {
        TVal v;
        v.kind = TVal::Int;
        v.i = i;
        out.push_back(v);
      }
      return out;
    case SemType::Kind::Option: {
      TVal none;
      none.kind = TVal::Opt;
      out.push_back(none);
      for (auto& inner : enumerate(t.args[0], listLen)) {
        TVal v;
        v.kind = TVal::Opt;
        v.some = true;
        v.items = {inner};
        out.push_back(v);
      }
      return out;
    }
    case SemType::Kind::List: {
      auto elems = enumerate(t.args[0], listLen);
      std::vector<std::vector<TVal>> frontier = {{}};
      TVal emptyList;
      emptyList.kind = TVal::List;
      out.push_back(emptyList);
      for (int n = 0; n < listLen; ++n) {
        std::vector<std::vector<TVal>> next;
        for (auto& l : frontier)
          for (auto& e : elems) {
            auto l2 = l;
            l2.push_back(e);
            TVal v;
            v.kind = TVal::List;
            v.items = l2;
            out.push_back(v);
            next.push_back(std::move(l2));
          }
        frontier = std::move(next);
      }
      return out;
    }
    case SemType::Kind::Tuple: {
      std::vector<std::vector<TVal>> combos = {{}};
      for (auto& mt : t.args) {
        auto elems = enumerate(mt, listLen);
        std::vector<std::vector<TVal>> next;
        for (auto& c : combos)
          for (auto& e : elems) {
            auto c2 = c;
            c2.push_back(e);
            next.push_back(std::move(c2));
          }
        combos = std::move(next);
      }
      for (auto& c : combos) {
        TVal v;
        v.kind = TVal::Tuple;
        v.items = c;
        out.push_back(v);
      }
      return out;
    }
    default:
      throw std::runtime_error("unsupported enumeration type");
  }
}

const IdInfo* oracleIdent(const Pat* p) {
  static const std::map<std::string, IdInfo> known = {
      {"true", {IdSort::Constructor, -1, "true", false}},
      {"false", {IdSort::Constructor, -1, "false", false}},
      {"nil", {IdSort::Constructor, -1, "nil", false}},
      {"NONE", {IdSort::Constructor, -1, "NONE", false}},
      {"SOME", {IdSort::Constructor, -1, "SOME", true}},
      {"::", {IdSort::Constructor, -1, "::", true}},
  };
  if (p->kind != Pat::Kind::Ident && p->kind != Pat::Kind::ConApp &&
      p->kind != Pat::Kind::InfixApp)
    return nullptr;
  auto it = known.find(p->name);
  return it == known.end() ? nullptr : &it->second;
}

bool refMatch(const Pat& p, const TVal& v) {
  using PK = Pat::Kind;
  switch (p.kind) {
    case PK::Wildcard:
      return true;
    case PK::Ident: {
      const IdInfo* info = oracleIdent(&p);
      if (!info) return true;
      if (info->ctorName == "true") return v.kind == TVal::Bool && v.b;
      if (info->ctorName == "false") return v.kind == TVal::Bool && !v.b;
      if (info->ctorName == "nil") return v.kind == TVal::List && v.items.empty();
      if (info->ctorName == "NONE") return v.kind == TVal::Opt && !v.some;
      return false;
    }
    case PK::Int: {
      long long want = std::stoll(p.literal[0] == '~' ? "-" + p.literal.substr(1) : p.literal);
      return v.kind == TVal::Int && v.i == want;
    }
    case PK::Tuple: {
      if (v.kind != TVal::Tuple || v.items.size() != p.items.size()) return false;
      for (size_t i = 0; i < p.items.size(); ++i)
        if (!refMatch(*p.items[i], v.items[i])) return false;
      return true;
    }
    case PK::List: {
      if (v.kind != TVal::List || v.items.size() != p.items.size()) return false;
      for (size_t i = 0; i < p.items.size(); ++i)
        if (!refMatch(*p.items[i], v.items[i])) return false;
      return true;
    }
    case PK::ConApp: {
      const IdInfo* info = oracleIdent(&p);
      if (info && info->ctorName == "SOME")
        return v.kind == TVal::Opt && v.some && refMatch(*p.items[0], v.items[0]);
      return false;
    }
    case PK::InfixApp: {
      if (v.kind != TVal::List || v.items.empty()) return false;
      TVal tail;
      tail.kind = TVal::List;
      tail.items.assign(v.items.begin() + 1, v.items.end());
      return refMatch(*p.items[0], v.items[0]) && refMatch(*p.items[1], tail);
    }
    case PK::Typed:
    case PK::Layered:
      return refMatch(*p.items[0], v);
    default:
      return false;
  }
}

PatPtr pwild() { return mkPat(Pat::Kind::Wildcard, {}); }
PatPtr pvar(const char* n) {
  auto p = mkPat(Pat::Kind::Ident, {});
  p->name = n;
  return p;
}
PatPtr pconApp(const char* n, PatPtr arg) {
  auto p = mkPat(Pat::Kind::ConApp, {});
  p->name = n;
  p->items = {std::move(arg)};
  return p;
}
PatPtr pcons(PatPtr h, PatPtr t) {
  auto p = mkPat(Pat::Kind::InfixApp, {});
  p->name = "::";
  p->items = {std::move(h), std::move(t)};
  return p;
}
PatPtr ptuple(std::vector<PatPtr> items) {
  auto p = mkPat(Pat::Kind::Tuple, {});
  p->items = std::move(items);
  return p;
}

PatternOracle mkOracle(const TypeTable* tbl) {
  PatternOracle o;
  o.types = tbl;
  o.identInfo = oracleIdent;
  o.patType = [](const Pat*) { return SemType(); };
  return o;
}

PatPtr randomPattern(std::mt19937& rng, const SemType& t, int depth) {
  std::uniform_int_distribution<int> d6(0, 5);
  int roll = d6(rng);
  if (depth <= 0 || roll == 0) return pwild();
  if (roll == 1) return pvar("v");
  switch (t.kind) {
    case SemType::Kind::Bool:
      return pvar(d6(rng) % 2 ? "true" : "false");
    case SemType::Kind::Option:
      if (d6(rng) % 2) return pvar("NONE");
      return pconApp("SOME", randomPattern(rng, t.args[0], depth - 1));
    case SemType::Kind::List:
      if (d6(rng) % 2) return pvar("nil");
      return pcons(randomPattern(rng, t.args[0], depth - 1), randomPattern(rng, t, depth - 1));
    case SemType::Kind::Tuple: {
      std::vector<PatPtr> items;
      for (auto& mt : t.args) items.push_back(randomPattern(rng, mt, depth - 1));
      return ptuple(std::move(items));
    }
    default:
      return pwild();
  }
}

// ---------------------------------------------------------------------------
// Criteria

bool criterionGoldenFigures(std::string& detail) {
  bool ok = true;
  for (const char* stem : {"fig1", "fig2", "fig3", "fig4", "fig5"})
    ok = goldenMatches(stem, detail) && ok;
  if (ok) detail = "5 figures token-for-token";
  return ok;
}

bool criterionInlineGoldens(std::string& detail) {
  bool ok = true;
  for (const char* stem : {"L", "split", "length", "hd", "hdsum"})
    ok = goldenMatches(stem, detail) && ok;
  if (ok) detail = "5 inline examples match";
  return ok;
}

struct NaiveAtom {
  size_t argIndex;
  const Pat* pattern;
};

bool criterionPreconditionMinimization(std::string& detail) {
  auto el = elaborateText(slurp(fs::path(SML2COQ_CORPUS_DIR) / "golden" / "hdsum.sml"));
  const FunBinding& fb = el.program[0]->funBindings[0];
  const FunInfo& info = el.funInfo.at(&fb);
  if (!info.precondition) {
    detail = "no precondition synthesized";
    return false;
  }
  const PreconditionFormula& f = *info.precondition;
  if (f.disjuncts.size() != 3 || f.disjuncts[0].size() != 2 || f.disjuncts[1].size() != 1 ||
      f.disjuncts[2].size() != 1) {
    detail = "formula shape is not 3 disjuncts with 2, 1, 1 atoms";
    return false;
  }

  // The naive procedure keeps one atom per argument in every clause.
  PatternMatrix m;
  m.columnTypes = {el.subst.apply(info.paramTypes[0]), el.subst.apply(info.paramTypes[1]),
                   el.subst.apply(info.paramTypes[2])};
  for (auto& cl : fb.clauses) m.rows.push_back(cl.params);
  std::vector<std::vector<NaiveAtom>> naive;
  for (auto& row : m.rows) {
    std::vector<NaiveAtom> atoms;
    for (size_t j = 0; j < row.size(); ++j) atoms.push_back({j, row[j].get()});
    naive.push_back(std::move(atoms));
  }
  for (auto& d : naive)
    if (d.size() != 3) {
      detail = "naive formula does not have 3 argument conjuncts";
      return false;
    }

  // Agreement with row matching over the enumerated domain; init ranges over
  // {0,1} and is irrelevant to every formula (its atoms are generic).
  auto checkDomain = [&](const SemType& listTy, const PatternMatrix& matrix,
                         const PreconditionFormula& formula,
                         const std::vector<std::vector<NaiveAtom>>& naiveFormula) -> bool {
    auto lists = enumerate(listTy, 2);
    for (auto& v1 : lists)
      for (auto& v2 : lists)
        for (long long init : {0, 1}) {
          TVal vi;
          vi.kind = TVal::Int;
          vi.i = init;
          const TVal* args[3] = {&v1, &v2, &vi};
          bool rows = false;
          for (auto& row : matrix.rows) {
            bool all = true;
            for (size_t j = 0; j < 3; ++j)
              if (!refMatch(*row[j], *args[j])) all = false;
            if (all) rows = true;
          }
          bool minimized = false;
          for (auto& disjunct : formula.disjuncts) {
            bool all = true;
            for (auto& atom : disjunct)
              if (!refMatch(*atom.skeleton, *args[atom.argIndex])) all = false;
            if (all) minimized = true;
          }
          bool naiveSat = false;
          for (auto& disjunct : naiveFormula) {
            bool all = true;
            for (auto& atom : disjunct)
              if (!refMatch(*atom.pattern, *args[atom.argIndex])) all = false;
            if (all) naiveSat = true;
          }
          if (minimized != rows || naiveSat != rows) return false;
        }
    return true;
  };

  SemType pairList = SemType::list(
      SemType::tuple({SemType::prim(SemType::Kind::Int), SemType::prim(SemType::Kind::Int)}));
  if (!checkDomain(pairList, m, f, naive)) {
    detail = "formulas disagree with row matching over (int*int) lists";
    return false;
  }

  // The literal spec domain: pairs of int lists (49 argument pairs), via the
  // analogous matrix with variable heads (the pair heads are generic either
  // way, so the rows match the same vectors).
  TypeTable scratch;
  PatternEngine analogEng(mkOracle(&scratch));
  SemType intList = SemType::list(SemType::prim(SemType::Kind::Int));
  PatternMatrix analog;
  analog.columnTypes = {intList, intList, SemType::prim(SemType::Kind::Int)};
  analog.rows = {
      {pcons(pvar("y"), pvar("l")), pcons(pvar("y"), pvar("l2")), pvar("init")},
      {pcons(pvar("y"), pvar("l")), pvar("l2"), pvar("init")},
      {pvar("l1"), pcons(pvar("y"), pvar("l2")), pvar("init")},
  };
  auto analogFormula = analogEng.synthesizePrecondition(analog);
  if (!analogFormula || analogFormula->disjuncts.size() != 3) {
    detail = "analog matrix formula missing";
    return false;
  }
  auto intLists = enumerate(intList, 2);
  if (intLists.size() != 7) {
    detail = "int-list domain is not 49 argument pairs";
    return false;
  }
  std::vector<std::vector<NaiveAtom>> naiveAnalog;
  for (auto& row : analog.rows) {
    std::vector<NaiveAtom> atoms;
    for (size_t j = 0; j < row.size(); ++j) atoms.push_back({j, row[j].get()});
    naiveAnalog.push_back(std::move(atoms));
  }
  if (!checkDomain(intList, analog, *analogFormula, naiveAnalog)) {
    detail = "formulas disagree with row matching over int lists";
    return false;
  }
  detail = "3 disjuncts (2,1,1) vs naive 3x3; agrees on 49 and 441 pair domains";
  return true;
}

bool criterionExhaustivenessOracle(std::string& detail) {
  TypeTable tbl;
  PatternEngine eng(mkOracle(&tbl));
  std::mt19937 rng(987654321);

  SemType boolT = SemType::prim(SemType::Kind::Bool);
  SemType boolOpt = SemType::option(boolT);
  SemType boolList = SemType::list(boolT);
  std::vector<SemType> pool = {boolT, boolOpt, boolList, SemType::tuple({boolT, boolOpt}),
                               SemType::tuple({boolList, boolT}),
                               SemType::tuple({boolOpt, boolList})};

  std::uniform_int_distribution<int> pickCol(0, int(pool.size()) - 1);
  std::uniform_int_distribution<int> pickRows(1, 3);
  std::uniform_int_distribution<int> pickWidth(1, 2);

  long long checked = 0, disagreements = 0;
  while (checked < 10000) {
    PatternMatrix m;
    int width = pickWidth(rng);
    for (int c = 0; c < width; ++c) m.columnTypes.push_back(pool[size_t(pickCol(rng))]);
    int rows = pickRows(rng);
    for (int r = 0; r < rows; ++r) {
      std::vector<PatPtr> row;
      for (int c = 0; c < width; ++c) row.push_back(randomPattern(rng, m.columnTypes[c], 3));
      m.rows.push_back(std::move(row));
    }

    std::vector<std::vector<TVal>> domains;
    size_t total = 1;
    for (auto& ct : m.columnTypes) {
      domains.push_back(enumerate(ct, 3));
      total *= domains.back().size();
    }
    if (total > 4096) continue;  // keep each case inside the time budget

    bool brute = true;
    for (size_t n = 0; n < total && brute; ++n) {
      size_t rest = n;
      bool matched = false;
      std::vector<size_t> idx(static_cast<size_t>(width), 0);
      for (int c = 0; c < width; ++c) {
        idx[size_t(c)] = rest % domains[size_t(c)].size();
        rest /= domains[size_t(c)].size();
      }
      for (auto& row : m.rows) {
        bool rowOk = true;
        for (int c = 0; c < width; ++c)
          if (!refMatch(*row[size_t(c)], domains[size_t(c)][idx[size_t(c)]])) rowOk = false;
        if (rowOk) {
          matched = true;
          break;
        }
      }
      if (!matched) brute = false;
    }
    if (eng.isExhaustive(m) != brute) ++disagreements;
    ++checked;
  }
  detail = std::to_string(checked) + " cases, " + std::to_string(disagreements) +
           " disagreements";
  return disagreements == 0;
}

bool criterionEvaluatorAgreement(std::string& detail) {
  fs::path dir = fs::path(SML2COQ_CORPUS_DIR) / "eval";
  int count = 0;
  std::vector<fs::path> files;
  for (auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".sml") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (auto& src : files) {
    auto el = elaborateText(slurp(src));
    auto out = evaluate(el, 1000000);
    if (out.kind != EvalOutcome::Kind::Ok) {
      detail += src.filename().string() + " did not evaluate; ";
      return false;
    }
    fs::path expected = src;
    expected.replace_extension(".expected");
    if (renderBindings(out) != slurp(expected)) {
      detail += src.filename().string() + " output mismatch; ";
      return false;
    }
    ++count;
  }
  if (count != 20) {
    detail = "expected 20 corpus programs, found " + std::to_string(count);
    return false;
  }

  // The empty-list head and divergent-loop programs exit with status 2.
  fs::path gate = fs::path(SML2COQ_CORPUS_DIR) / "gate";
  fs::path tmp = fs::temp_directory_path() / "sml2coq_acceptance";
  fs::create_directories(tmp);
  std::ostringstream devnull;
  for (const char* name : {"hd_empty.sml", "loop.sml"}) {
    RunConfig cfg;
    cfg.inputPath = (gate / name).string();
    cfg.outputPath = (tmp / "gate.v").string();
    cfg.fuel = 200000;
    int status = run(cfg, devnull);
    if (status != ExitEvalGate) {
      detail += std::string(name) + " exited " + std::to_string(status) + " not 2; ";
      return false;
    }
  }
  detail = "20 programs match; gate programs exit 2";
  return true;
}

bool criterionDeterminism(std::string& detail) {
  for (auto& src : corpusSources()) {
    std::string source = slurp(src);
    auto a = translateText(source, true, false);
    auto b = translateText(source, true, false);
    if (a.text != b.text) {
      detail = src.filename().string() + " differs between runs";
      return false;
    }
  }
  detail = std::to_string(corpusSources().size()) + " files byte-identical";
  return true;
}

bool criterionReparseClosure(std::string& detail) {
  int count = 0;
  for (auto& src : corpusSources()) {
    auto t = translateText(slurp(src), true, false);
    auto diags = checkEmitted(t.text, t.sentences);
    if (!diags.empty()) {
      detail = src.filename().string() + ": " + diags.front().message;
      return false;
    }
    ++count;
  }
  detail = std::to_string(count) + " emitted files re-parse structurally";
  return true;
}

}  // namespace

int main() {
  criterion("golden-figures", 1.0, [](std::string& d) { return criterionGoldenFigures(d); });
  criterion("inline-example-goldens", 1.0,
            [](std::string& d) { return criterionInlineGoldens(d); });
  criterion("precondition-minimization", 1.0,
            [](std::string& d) { return criterionPreconditionMinimization(d); });
  criterion("exhaustiveness-oracle", 30.0,
            [](std::string& d) { return criterionExhaustivenessOracle(d); });
  criterion("evaluator-agreement", 5.0,
            [](std::string& d) { return criterionEvaluatorAgreement(d); });
  criterion("determinism", 30.0, [](std::string& d) { return criterionDeterminism(d); });
  criterion("re-parse-closure", 30.0,
            [](std::string& d) { return criterionReparseClosure(d); });
  std::printf("NOTE  coq-compilation: not reproducible here; substituted by re-parse "
              "closure, well-formedness gating, and golden equivalence\n");
  return failures;
}
