#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <random>

#include "sml2coq/elaborate.hpp"
#include "sml2coq/pattern.hpp"

using namespace sml2coq;
using K = SemType::Kind;

namespace {

// ---------------------------------------------------------------------------
// Test-side values, enumeration, and matcher: the independent oracle.

struct TVal {
  enum Kind { Bool, Int, Str, List, Tuple, Opt, Con } kind;
  bool b = false;
  long long i = 0;
  std::string s;
  std::vector<TVal> items;          // List / Tuple / Con payload (size <= 1)
  bool some = false;                // Opt
  std::string con;                  // Con name
};

// Known constructors for hand-built patterns (independent of elaboration).
const IdInfo* testIdent(const Pat* p) {
  static const std::map<std::string, IdInfo> known = {
      {"true", {IdSort::Constructor, -1, "true", false}},
      {"false", {IdSort::Constructor, -1, "false", false}},
      {"nil", {IdSort::Constructor, -1, "nil", false}},
      {"NONE", {IdSort::Constructor, -1, "NONE", false}},
      {"SOME", {IdSort::Constructor, -1, "SOME", true}},
      {"::", {IdSort::Constructor, -1, "::", true}},
      {"Wrap", {IdSort::Constructor, 900, "Wrap", true}},
  };
  if (p->kind != Pat::Kind::Ident && p->kind != Pat::Kind::ConApp &&
      p->kind != Pat::Kind::InfixApp)
    return nullptr;
  auto it = known.find(p->name);
  return it == known.end() ? nullptr : &it->second;
}

TypeTable testTable() {
  TypeTable t;
  DatatypeInfo wrap;
  wrap.name = "wrap";
  wrap.ctors.push_back(DatatypeCtor{"Wrap", SemType::prim(K::Int)});
  wrap.eqAttr = true;
  t.data[900] = wrap;
  return t;
}

PatternOracle testOracle(const TypeTable* tbl) {
  PatternOracle o;
  o.types = tbl;
  o.identInfo = testIdent;
  o.patType = [](const Pat*) { return SemType(); };
  return o;
}

std::vector<TVal> enumerateValues(const SemType& t, int listLen) {
  std::vector<TVal> out;
  switch (t.kind) {
    case K::Bool:
      for (bool b : {false, true}) {
        TVal v;
        v.kind = TVal::Bool;
        v.b = b;
        out.push_back(v);
      }
      return out;
    case K::Int:
      for (long long i : {0, 1}) {
        TVal v;
        v.kind = TVal::Int;
        v.i = i;
        out.push_back(v);
      }
      return out;
    case K::Option: {
      TVal none;
      none.kind = TVal::Opt;
      none.some = false;
      out.push_back(none);
      for (auto& inner : enumerateValues(t.args[0], listLen)) {
        TVal v;
        v.kind = TVal::Opt;
        v.some = true;
        v.items = {inner};
        out.push_back(v);
      }
      return out;
    }
    case K::List: {
      auto elems = enumerateValues(t.args[0], listLen);
      std::vector<std::vector<TVal>> lists = {{}};
      std::vector<std::vector<TVal>> frontier = {{}};
      for (int n = 0; n < listLen; ++n) {
        std::vector<std::vector<TVal>> next;
        for (auto& l : frontier)
          for (auto& e : elems) {
            auto l2 = l;
            l2.push_back(e);
            next.push_back(l2);
            lists.push_back(l2);
          }
        frontier = std::move(next);
      }
      for (auto& l : lists) {
        TVal v;
        v.kind = TVal::List;
        v.items = l;
        out.push_back(v);
      }
      return out;
    }
    case K::Tuple: {
      std::vector<std::vector<TVal>> combos = {{}};
      for (auto& mt : t.args) {
        auto elems = enumerateValues(mt, listLen);
        std::vector<std::vector<TVal>> next;
        for (auto& c : combos)
          for (auto& e : elems) {
            auto c2 = c;
            c2.push_back(e);
            next.push_back(c2);
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
    case K::Data: {  // the Wrap test datatype
      for (auto& payload : enumerateValues(SemType::prim(K::Int), listLen)) {
        TVal v;
        v.kind = TVal::Con;
        v.con = "Wrap";
        v.items = {payload};
        out.push_back(v);
      }
      return out;
    }
    default:
      FAIL("unsupported enumeration type");
      return out;
  }
}

// Reference matcher over source patterns; deliberately naive.
bool refMatch(const Pat& p, const TVal& v) {
  using PK = Pat::Kind;
  switch (p.kind) {
    case PK::Wildcard:
      return true;
    case PK::Ident: {
      const IdInfo* info = testIdent(&p);
      if (!info || info->sort != IdSort::Constructor) return true;  // variable
      if (info->ctorName == "true") return v.kind == TVal::Bool && v.b;
      if (info->ctorName == "false") return v.kind == TVal::Bool && !v.b;
      if (info->ctorName == "nil") return v.kind == TVal::List && v.items.empty();
      if (info->ctorName == "NONE") return v.kind == TVal::Opt && !v.some;
      return false;
    }
    case PK::Int: {
      long long want =
          std::stoll(p.literal[0] == '~' ? "-" + p.literal.substr(1) : p.literal);
      return v.kind == TVal::Int && v.i == want;
    }
    case PK::String:
      return v.kind == TVal::Str && v.s == p.literal;
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
      const IdInfo* info = testIdent(&p);
      if (info && info->ctorName == "SOME")
        return v.kind == TVal::Opt && v.some && refMatch(*p.items[0], v.items[0]);
      if (info && info->ctorName == "Wrap")
        return v.kind == TVal::Con && v.con == "Wrap" && refMatch(*p.items[0], v.items[0]);
      return false;
    }
    case PK::InfixApp: {  // ::
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

// ---------------------------------------------------------------------------
// Pattern builders

PatPtr pwild() { return mkPat(Pat::Kind::Wildcard, {}); }
PatPtr pvar(const char* n) {
  auto p = mkPat(Pat::Kind::Ident, {});
  p->name = n;
  return p;
}
PatPtr pint(const char* lit) {
  auto p = mkPat(Pat::Kind::Int, {});
  p->literal = lit;
  return p;
}
PatPtr pcon(const char* n) { return pvar(n); }
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
PatPtr plist(std::vector<PatPtr> items) {
  auto p = mkPat(Pat::Kind::List, {});
  p->items = std::move(items);
  return p;
}

SemType intList() { return SemType::list(SemType::prim(K::Int)); }

}  // namespace

TEST_CASE("isUseful on spec examples") {
  TypeTable tbl = testTable();
  PatternEngine eng(testOracle(&tbl));

  SECTION("cons is uncovered by nil") {
    PatternMatrix m;
    m.columnTypes = {intList()};
    m.rows = {{pcon("nil")}};
    CHECK(eng.isUseful(m, {pcons(pvar("x"), pvar("l"))}));
  }

  SECTION("variables subsume literals") {
    PatternMatrix m;
    m.columnTypes = {SemType::prim(K::Int)};
    m.rows = {{pvar("x")}};
    CHECK_FALSE(eng.isUseful(m, {pint("0")}));
  }

  SECTION("wildcard after true/false is useless (brute force agrees)") {
    PatternMatrix m;
    m.columnTypes = {SemType::prim(K::Bool)};
    m.rows = {{pcon("true")}, {pcon("false")}};
    CHECK_FALSE(eng.isUseful(m, {pwild()}));
    // brute force: every bool matches a row already
    for (auto& v : enumerateValues(m.columnTypes[0], 0)) {
      bool covered = refMatch(*m.rows[0][0], v) || refMatch(*m.rows[1][0], v);
      CHECK(covered);
    }
  }
}

TEST_CASE("isExhaustive on spec examples") {
  TypeTable tbl = testTable();
  PatternEngine eng(testOracle(&tbl));

  PatternMatrix lengthM;
  lengthM.columnTypes = {intList()};
  lengthM.rows = {{pcon("nil")}, {pcons(pvar("x"), pvar("l"))}};
  CHECK(eng.isExhaustive(lengthM));

  PatternMatrix hdM;
  hdM.columnTypes = {intList()};
  hdM.rows = {{pcons(pvar("x"), pvar("l"))}};
  CHECK_FALSE(eng.isExhaustive(hdM));

  PatternMatrix pairM;
  pairM.columnTypes = {SemType::tuple({SemType::prim(K::Int), SemType::prim(K::Int)})};
  pairM.rows = {{ptuple({pvar("a"), pvar("b")})}};
  CHECK(eng.isExhaustive(pairM));

  SECTION("integer columns are never complete without a wildcard") {
    PatternMatrix m;
    m.columnTypes = {SemType::prim(K::Int)};
    m.rows = {{pint("0")}, {pint("1")}, {pint("~1")}};
    CHECK_FALSE(eng.isExhaustive(m));
    m.rows.push_back({pvar("n")});
    CHECK(eng.isExhaustive(m));
  }
}

TEST_CASE("isGeneric on spec examples") {
  TypeTable tbl = testTable();
  PatternEngine eng(testOracle(&tbl));
  SemType intPair = SemType::tuple({SemType::prim(K::Int), SemType::prim(K::Int)});

  CHECK(eng.isGeneric(*ptuple({pvar("a"), pvar("b")}), intPair));
  CHECK_FALSE(eng.isGeneric(*pcons(pvar("x"), pvar("l")), intList()));
  CHECK(eng.isGeneric(*pconApp("Wrap", pvar("x")), SemType::data("wrap", 900, {}, true)));
  CHECK_FALSE(eng.isGeneric(*pconApp("Wrap", pint("0")), SemType::data("wrap", 900, {}, true)));
  CHECK_FALSE(eng.isGeneric(*pcon("nil"), intList()));
  CHECK(eng.isGeneric(*pwild(), intList()));

  SECTION("generic implies single-row exhaustive") {
    PatternMatrix m;
    m.columnTypes = {SemType::data("wrap", 900, {}, true)};
    m.rows = {{pconApp("Wrap", pvar("x"))}};
    CHECK(eng.isExhaustive(m));
  }
}

TEST_CASE("generalize on spec examples") {
  TypeTable tbl = testTable();
  PatternEngine eng(testOracle(&tbl));
  SemType pairList = SemType::list(SemType::tuple({SemType::prim(K::Int), SemType::prim(K::Int)}));

  SECTION("(a,b)::l generalizes to y1 :: y2") {
    auto g = eng.generalize(*pcons(ptuple({pvar("a"), pvar("b")}), pvar("l")), pairList);
    REQUIRE(g.vars == std::vector<std::string>{"y1", "y2"});
    REQUIRE(g.skeleton->kind == Pat::Kind::InfixApp);
    CHECK(g.skeleton->items[0]->name == "y1");
    CHECK(g.skeleton->items[1]->name == "y2");
  }

  SECTION("0::l keeps the literal") {
    auto g = eng.generalize(*pcons(pint("0"), pvar("l")), intList());
    REQUIRE(g.vars == std::vector<std::string>{"y1"});
    CHECK(g.skeleton->items[0]->kind == Pat::Kind::Int);
    CHECK(g.skeleton->items[1]->name == "y1");
  }

  SECTION("x::nil keeps the nil constructor") {
    auto g = eng.generalize(*pcons(pvar("x"), pcon("nil")), intList());
    REQUIRE(g.vars == std::vector<std::string>{"y1"});
    CHECK(g.skeleton->items[0]->name == "y1");
    CHECK(g.skeleton->items[1]->name == "nil");
  }

  SECTION("skeleton matches exactly the values the pattern matches (oracle)") {
    std::vector<PatPtr> pats = {
        pcons(ptuple({pvar("a"), pvar("b")}), pvar("l")),
        pcons(pint("0"), pvar("l")),
        pcons(pvar("x"), pcon("nil")),
        plist({pint("1"), pvar("x")}),
        pcons(pint("1"), pcons(pvar("m"), pvar("r"))),
    };
    for (auto& p : pats) {
      SemType t = p == pats[0] ? pairList : intList();
      if (eng.isGeneric(*p, t)) continue;
      auto g = eng.generalize(*p, t);
      for (auto& v : enumerateValues(t, 3))
        CHECK(refMatch(*p, v) == refMatch(*g.skeleton, v));
    }
  }
}

TEST_CASE("collectVars") {
  // collectVars needs constructor resolution: nil in x::nil binds nothing.
  TypeTable tbl = testTable();
  PatternEngine eng(testOracle(&tbl));

  CHECK(eng.collectVars(*pcons(pvar("x"), pvar("l"))) ==
        std::vector<std::string>{"x", "l"});
  CHECK(eng.collectVars(*pwild()).empty());
  CHECK(eng.collectVars(*ptuple({pvar("a"), ptuple({pvar("b"), pvar("c")})})) ==
        std::vector<std::string>{"a", "b", "c"});
  CHECK(eng.collectVars(*pcons(pvar("x"), pcon("nil"))) == std::vector<std::string>{"x"});
}

TEST_CASE("synthesizePrecondition") {
  TypeTable tbl = testTable();
  PatternEngine eng(testOracle(&tbl));
  SemType pairList =
      SemType::list(SemType::tuple({SemType::prim(K::Int), SemType::prim(K::Int)}));

  SECTION("hd: one disjunct, one atom") {
    PatternMatrix m;
    m.columnTypes = {intList()};
    m.rows = {{pcons(pvar("x"), pvar("l"))}};
    auto f = eng.synthesizePrecondition(m);
    REQUIRE(f.has_value());
    REQUIRE(f->disjuncts.size() == 1);
    REQUIRE(f->disjuncts[0].size() == 1);
    const PreconditionAtom& atom = f->disjuncts[0][0];
    CHECK(atom.argIndex == 0);
    CHECK(atom.existentials == std::vector<std::string>{"y1", "y2"});
  }

  SECTION("hd_sum: 3 disjuncts with 2, 1, 1 atoms; init eliminated everywhere") {
    PatternMatrix m;
    m.columnTypes = {pairList, pairList, SemType::prim(K::Int)};
    auto clauseHead = [&] { return pcons(ptuple({pvar("a"), pvar("b")}), pvar("l")); };
    m.rows = {
        {clauseHead(), clauseHead(), pvar("init")},
        {clauseHead(), pvar("l2"), pvar("init")},
        {pvar("l1"), clauseHead(), pvar("init")},
    };
    auto f = eng.synthesizePrecondition(m);
    REQUIRE(f.has_value());
    REQUIRE(f->disjuncts.size() == 3);
    CHECK(f->disjuncts[0].size() == 2);
    CHECK(f->disjuncts[1].size() == 1);
    CHECK(f->disjuncts[2].size() == 1);
    CHECK(f->disjuncts[0][0].argIndex == 0);
    CHECK(f->disjuncts[0][1].argIndex == 1);
    CHECK(f->disjuncts[1][0].argIndex == 0);
    CHECK(f->disjuncts[2][0].argIndex == 1);
  }

  SECTION("exhaustive matrices need no precondition") {
    PatternMatrix m;
    m.columnTypes = {intList()};
    m.rows = {{pcon("nil")}, {pcons(pvar("x"), pvar("l"))}};
    CHECK_FALSE(eng.synthesizePrecondition(m).has_value());
  }

  SECTION("an all-generic clause yields none even before exhaustiveness") {
    PatternMatrix m;
    m.columnTypes = {intList(), SemType::prim(K::Int)};
    m.rows = {{pcons(pvar("x"), pvar("l")), pvar("n")}, {pvar("l"), pvar("n")}};
    CHECK_FALSE(eng.synthesizePrecondition(m).has_value());
  }
}

// ---------------------------------------------------------------------------
// Randomized oracle equivalence (a smaller in-suite twin of the acceptance run)

namespace {

PatPtr randomPattern(std::mt19937& rng, const SemType& t, int depth) {
  std::uniform_int_distribution<int> d6(0, 5);
  int roll = d6(rng);
  if (depth <= 0 || roll == 0) return pwild();
  if (roll == 1) return pvar("v");
  switch (t.kind) {
    case K::Bool:
      return pcon(d6(rng) % 2 ? "true" : "false");
    case K::Int:
      return pint(d6(rng) % 2 ? "0" : "1");
    case K::Option:
      if (d6(rng) % 2) return pcon("NONE");
      return pconApp("SOME", randomPattern(rng, t.args[0], depth - 1));
    case K::List:
      if (d6(rng) % 2) return pcon("nil");
      return pcons(randomPattern(rng, t.args[0], depth - 1),
                   randomPattern(rng, t, depth - 1));
    case K::Tuple: {
      std::vector<PatPtr> items;
      for (auto& mt : t.args) items.push_back(randomPattern(rng, mt, depth - 1));
      return ptuple(std::move(items));
    }
    default:
      return pwild();
  }
}

}  // namespace

TEST_CASE("exhaustiveness agrees with brute-force enumeration (randomized)") {
  TypeTable tbl = testTable();
  PatternEngine eng(testOracle(&tbl));
  std::mt19937 rng(7061988);

  SemType boolT = SemType::prim(K::Bool);
  SemType boolOpt = SemType::option(boolT);
  SemType boolList = SemType::list(boolT);
  std::vector<SemType> columnPool = {boolT, boolOpt, boolList,
                                     SemType::tuple({boolT, boolOpt}),
                                     SemType::tuple({boolList, boolT})};

  std::uniform_int_distribution<int> pickCol(0, int(columnPool.size()) - 1);
  std::uniform_int_distribution<int> pickRows(1, 3);
  std::uniform_int_distribution<int> pickWidth(1, 2);

  int checked = 0;
  for (int iter = 0; iter < 1500; ++iter) {
    PatternMatrix m;
    int width = pickWidth(rng);
    for (int c = 0; c < width; ++c) m.columnTypes.push_back(columnPool[size_t(pickCol(rng))]);
    int rows = pickRows(rng);
    for (int r = 0; r < rows; ++r) {
      std::vector<PatPtr> row;
      for (int c = 0; c < width; ++c) row.push_back(randomPattern(rng, m.columnTypes[c], 3));
      m.rows.push_back(std::move(row));
    }

    // Brute force over the bounded domain.
    std::vector<std::vector<TVal>> domains;
    size_t total = 1;
    for (auto& ct : m.columnTypes) {
      domains.push_back(enumerateValues(ct, 3));
      total *= domains.back().size();
    }
    if (total > 4096) continue;

    bool brute = true;
    std::vector<size_t> idx(size_t(width), 0);
    for (size_t n = 0; n < total; ++n) {
      size_t rest = n;
      for (int c = 0; c < width; ++c) {
        idx[size_t(c)] = rest % domains[size_t(c)].size();
        rest /= domains[size_t(c)].size();
      }
      bool matched = false;
      for (auto& row : m.rows) {
        bool rowOk = true;
        for (int c = 0; c < width; ++c)
          if (!refMatch(*row[size_t(c)], domains[size_t(c)][idx[size_t(c)]])) rowOk = false;
        if (rowOk) {
          matched = true;
          break;
        }
      }
      if (!matched) {
        brute = false;
        break;
      }
    }
    INFO("iteration " << iter);
    REQUIRE(eng.isExhaustive(m) == brute);
    ++checked;
  }
  CHECK(checked > 1000);
}

TEST_CASE("precondition sound and complete at the bound (randomized)") {
  TypeTable tbl = testTable();
  PatternEngine eng(testOracle(&tbl));
  std::mt19937 rng(411);

  SemType boolT = SemType::prim(K::Bool);
  SemType boolList = SemType::list(boolT);
  std::vector<SemType> columnPool = {boolList, SemType::option(boolT), boolT};

  auto satisfiesAtom = [&](const PreconditionAtom& atom, const TVal& v) {
    // exists vars. arg = skeleton holds iff the skeleton (existentials read as
    // wildcards by refMatch) matches the value.
    return refMatch(*atom.skeleton, v);
  };

  std::uniform_int_distribution<int> pickCol(0, int(columnPool.size()) - 1);
  std::uniform_int_distribution<int> pickRows(1, 3);

  for (int iter = 0; iter < 400; ++iter) {
    PatternMatrix m;
    int width = 2;
    for (int c = 0; c < width; ++c) m.columnTypes.push_back(columnPool[size_t(pickCol(rng))]);
    int rows = pickRows(rng);
    for (int r = 0; r < rows; ++r) {
      std::vector<PatPtr> row;
      for (int c = 0; c < width; ++c) row.push_back(randomPattern(rng, m.columnTypes[c], 2));
      m.rows.push_back(std::move(row));
    }
    auto f = eng.synthesizePrecondition(m);
    if (!f) continue;  // exhaustive or trivially-true formula

    std::vector<TVal> d0 = enumerateValues(m.columnTypes[0], 2);
    std::vector<TVal> d1 = enumerateValues(m.columnTypes[1], 2);
    for (auto& v0 : d0)
      for (auto& v1 : d1) {
        bool rowMatch = false;
        for (auto& row : m.rows)
          if (refMatch(*row[0], v0) && refMatch(*row[1], v1)) rowMatch = true;
        bool sat = false;
        for (auto& disjunct : f->disjuncts) {
          bool all = true;
          for (auto& atom : disjunct)
            if (!satisfiesAtom(atom, atom.argIndex == 0 ? v0 : v1)) all = false;
          if (all) sat = true;
        }
        INFO("iteration " << iter);
        REQUIRE(sat == rowMatch);
      }
  }
}

TEST_CASE("pattern engine over elaborated programs") {
  // End-to-end: matrices out of real elaborated declarations.
  auto el = elaborateText(
      "fun hd_sum ((a,b)::l) ((a',b')::l') init = init + a + b + a' + b'\n"
      "  | hd_sum ((a,b)::l) l'            init = init + a + b\n"
      "  | hd_sum l          ((a',b')::l') init = init + a' + b'");
  const FunBinding& fb = el.program[0]->funBindings[0];
  const FunInfo& info = el.funInfo.at(&fb);
  CHECK_FALSE(info.exhaustive);
  REQUIRE(info.precondition.has_value());
  REQUIRE(info.precondition->disjuncts.size() == 3);
  CHECK(info.precondition->disjuncts[0].size() == 2);
  CHECK(info.precondition->disjuncts[1].size() == 1);
  CHECK(info.precondition->disjuncts[2].size() == 1);

  auto el2 = elaborateText("fun length [] = 0 | length (x :: l) = 1 + length l");
  CHECK(el2.funInfo.at(&el2.program[0]->funBindings[0]).exhaustive);
}
