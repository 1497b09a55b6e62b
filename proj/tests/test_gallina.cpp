#include <catch2/catch_amalgamated.hpp>

#include "sml2coq/driver.hpp"
#include "sml2coq/gallina.hpp"

using namespace sml2coq;

TEST_CASE("freshName counters") {
  FreshNamer n;
  CHECK(freshName(n, FreshNamer::Kind::RecordType) == "rid_1");
  CHECK(freshName(n, FreshNamer::Kind::RecordType) == "rid_2");
  CHECK(freshName(n, FreshNamer::Kind::ModuleLift) == "mid_1");
  FreshNamer m;
  m.seedTyVars(14187);
  CHECK(freshName(m, FreshNamer::Kind::TyVar) == "_'14188");

  SECTION("deterministic across runs") {
    auto a = translateText("type r = {a: int} val v = {a = 1} val w = {a = 2}");
    auto b = translateText("type r = {a: int} val v = {a = 1} val w = {a = 2}");
    REQUIRE(a.sentences.size() == b.sentences.size());
    for (size_t i = 0; i < a.sentences.size(); ++i)
      CHECK(a.sentences[i]->name == b.sentences[i]->name);
  }
}

TEST_CASE("wellFormed") {
  SECTION("translated figure sentences pass") {
    auto t = translateText(
        "type r = { name : string, age : int }\n"
        "fun isBob ({name = \"Bob\",...}: r) = true | isBob {...} = false");
    CHECK(wellFormedProgram(t.sentences).empty());
  }

  SECTION("incomplete record pattern is flagged") {
    RecordRegistry reg;
    auto rec = gsentence(GSentence::Kind::RecordDecl);
    rec->name = "rid_1";
    rec->recordFields.emplace_back("rid_1_age", gident("Z"));
    rec->recordFields.emplace_back("rid_1_name", gident("string"));
    reg.add(*rec);

    auto def = gsentence(GSentence::Kind::Definition);
    def->name = "bad";
    auto m = gterm(GTerm::Kind::Match);
    m->items.push_back(gident("r"));
    auto pat = gpat(GPattern::Kind::Record);
    pat->fields.emplace_back("rid_1_age", gpat(GPattern::Kind::Wildcard));
    m->branches.push_back(GBranch{pat, gident("t")});
    def->body = m;
    auto diags = wellFormed(*def, &reg);
    REQUIRE(!diags.empty());
    CHECK(diags[0].message.find("incomplete record") != std::string::npos);
  }

  SECTION("non-exhaustive match needs a trailing wildcard") {
    auto def = gsentence(GSentence::Kind::Definition);
    def->name = "bad";
    auto m = gterm(GTerm::Kind::Match);
    m->items.push_back(gident("l"));
    m->exhaustive = false;
    auto consPat = gpat(GPattern::Kind::InfixApp);
    consPat->name = "::";
    consPat->items = {gpat(GPattern::Kind::Var), gpat(GPattern::Kind::Var)};
    m->branches.push_back(GBranch{consPat, gident("x")});
    def->body = m;
    REQUIRE(!wellFormed(*def).empty());
    // Adding the wildcard branch clears the diagnostic.
    m->branches.push_back(GBranch{gpat(GPattern::Kind::Wildcard), gident("patternFailure")});
    CHECK(wellFormed(*def).empty());
  }

  SECTION("duplicate binders are flagged") {
    auto def = gsentence(GSentence::Kind::Definition);
    def->name = "bad";
    GBinder a;
    a.style = GBinder::Style::Curly;
    a.name = "t";
    def->binders = {a, a};
    def->body = gident("t");
    CHECK(!wellFormed(*def).empty());
  }

  SECTION("notations must reference defined names") {
    auto eq = gsentence(GSentence::Kind::Notation);
    eq->text = "x 'G' y";
    auto app = gterm(GTerm::Kind::App);
    auto tup = gterm(GTerm::Kind::Tuple);
    tup->items = {gident("x"), gident("y")};
    app->items = {gident("G"), tup};
    eq->body = gparen(app);
    std::vector<GSentencePtr> prog = {eq};
    auto diags = wellFormedProgram(prog);
    REQUIRE(!diags.empty());
    CHECK(diags[0].message.find("undefined name 'G'") != std::string::npos);
  }
}
