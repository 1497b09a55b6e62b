#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "sml2coq/driver.hpp"
#include "sml2coq/shims.hpp"

using namespace sml2coq;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
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

}  // namespace

TEST_CASE("emitHeader") {
  std::string h = emitHeader();
  CHECK(h.rfind("Require Import intSml.\n", 0) == 0);
  CHECK(h.find("Require Import listSml.") != std::string::npos);
  CHECK(h.find("Require Import notationsSml.") != std::string::npos);
  CHECK(h.find("From Equations Require Import Equations.") != std::string::npos);
  // final line
  CHECK(h.rfind("Generalizable All Variables.\n") == h.size() - 29);
  CHECK(emitHeader(false).empty());

  SECTION("the nine imports appear in the specified order") {
    const char* order[] = {"intSml", "listSml", "realSml", "stringSml", "charSml",
                           "boolSml", "optionSml", "listPairSml", "notationsSml"};
    size_t pos = 0;
    for (const char* lib : order) {
      size_t found = h.find(std::string("Require Import ") + lib + ".");
      REQUIRE(found != std::string::npos);
      CHECK(found >= pos);
      pos = found;
    }
  }
}

TEST_CASE("emit basics") {
  SECTION("every sentence ends with a period; trailing newline mandatory") {
    auto t = translateText("val x = 1 fun f y = y");
    CHECK(t.text.back() == '\n');
    for (auto lineStart = size_t(0); lineStart < t.text.size();) {
      auto end = t.text.find('\n', lineStart);
      lineStart = end + 1;
    }
    CHECK(t.text.find("Definition x := 1.") != std::string::npos);
  }

  SECTION("the patternFailure axiom renders exactly") {
    auto t = translateText("val x::l = [1,2,3]");
    CHECK(t.text.find("Local Axiom patternFailure: forall {a}, a.") != std::string::npos);
  }

  SECTION("empty sentence list with header on emits the header only") {
    std::string text = emit({}, EmitConfig{});
    CHECK(text == emitHeader());
  }

  SECTION("Equations clauses separated by ';', final clause ends with '.'") {
    auto t = translateText("fun length [] = 0 | length (x :: l) = 1 + length l");
    CHECK(t.text.find("length [] := 0;") != std::string::npos);
    CHECK(t.text.find("length (x :: l) := (1 + (length l)).") != std::string::npos);
  }

  SECTION("record literal syntax uses {| f := t |}") {
    auto t = translateText("val r = {a = 1}");
    CHECK(t.text.find("{| rid_1_a := 1 |}") != std::string::npos);
  }
}

TEST_CASE("determinism: emit is a pure function of sentences and config") {
  for (auto& src : corpusSources()) {
    INFO(src.string());
    std::string source = slurp(src);
    auto a = translateText(source, true, false);
    auto b = translateText(source, true, false);
    REQUIRE(a.text == b.text);
  }
}

TEST_CASE("re-parse closure over the corpus") {
  for (auto& src : corpusSources()) {
    INFO(src.string());
    auto t = translateText(slurp(src), /*header=*/true, /*normalize=*/false);
    auto diags = checkEmitted(t.text, t.sentences);
    for (auto& d : diags) INFO(d.message);
    CHECK(diags.empty());
  }
}

TEST_CASE("normalize-names rewrites fresh names positionally") {
  // `f` consumes fresh variables that all default to int, so L's surviving
  // tyvar has a raw numeral greater than 1; normalization restarts at _'1.
  const char* src = "fun f x = x + 1 val L = []";
  auto raw = translateText(src, false, false);
  CHECK(raw.text.find("{_'1 : Type}") == std::string::npos);
  auto t = translateText(src, false, true);
  CHECK(t.text.find("Definition L {_'1 : Type} := ([] : @list _'1).") != std::string::npos);

  SECTION("string literals are untouched") {
    auto t2 = translateText("val s = \"rid_99 stays\" val r = {a = 1}", false, true);
    CHECK(t2.text.find("rid_99 stays") != std::string::npos);
    CHECK(t2.text.find("Record rid_1") != std::string::npos);
  }
}

TEST_CASE("line wrapping stays within reason and is deterministic") {
  // A long theorem statement must break after connective tokens.
  auto t = translateText(
      "(!! f (averyveryverylongname, anotherlongname) ==> answer;\n"
      " REQUIRES: averyveryverylongname > 0 andalso anotherlongname > 0 andalso "
      "averyveryverylongname < 99999 andalso anotherlongname < 99999;\n"
      " ENSURES: answer >= averyveryverylongname;  !!)\n"
      "fun f (averyveryverylongname, anotherlongname) = averyveryverylongname + anotherlongname");
  size_t maxLine = 0;
  size_t start = 0;
  while (start < t.text.size()) {
    size_t end = t.text.find('\n', start);
    if (end == std::string::npos) end = t.text.size();
    maxLine = std::max(maxLine, end - start);
    start = end + 1;
  }
  CHECK(maxLine < 160);  // soft wrap: long lines broken at designated points
  CHECK(checkEmitted(t.text, t.sentences).empty());
}

TEST_CASE("shims") {
  SECTION("nine files matching the header import targets") {
    auto& files = shimFiles();
    REQUIRE(files.size() == 9);
    const char* order[] = {"intSml", "listSml", "realSml", "stringSml", "charSml",
                           "boolSml", "optionSml", "listPairSml", "notationsSml"};
    for (size_t i = 0; i < 9; ++i) CHECK(files[i].name == order[i]);
  }

  SECTION("notationsSml declares the eqInfixes typeclass with = at level 70") {
    const ShimFile* notations = nullptr;
    for (auto& f : shimFiles())
      if (f.name == "notationsSml") notations = &f;
    REQUIRE(notations);
    CHECK(notations->content.find("Class eqInfixes A : Type := {") != std::string::npos);
    CHECK(notations->content.find("eqb : A -> A -> bool") != std::string::npos);
    CHECK(notations->content.find("neq : A -> A -> bool") != std::string::npos);
    CHECK(notations->content.find("Infix \"=\" := eqb (at level 70).") != std::string::npos);
    for (const char* inst : {"eqInfixes Z", "eqInfixes string", "eqInfixes ascii",
                             "eqInfixes bool", "eqInfixes (list A)"})
      CHECK(notations->content.find(inst) != std::string::npos);
  }

  SECTION("exceptional basis functions return their exception axiom") {
    const ShimFile* list = nullptr;
    for (auto& f : shimFiles())
      if (f.name == "listSml") list = &f;
    REQUIRE(list);
    CHECK(list->content.find("Axiom EmptyException : forall{a}, a.") != std::string::npos);
    CHECK(list->content.find("| nil => EmptyException") != std::string::npos);
  }

  SECTION("validateShims examples") {
    CHECK(validateShims({"Z", "list"}).empty());
    CHECK(validateShims({"List.hd"}).empty());
    auto diags = validateShims({"Foo.bar"});
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].message.find("Foo.bar") != std::string::npos);
  }

  SECTION("corpus emissions reference only provided identifiers") {
    for (auto& src : corpusSources()) {
      INFO(src.string());
      auto t = translateText(slurp(src));
      auto diags = validateShims(collectFreeIdents(t.sentences));
      for (auto& d : diags) INFO(d.message);
      CHECK(diags.empty());
    }
  }
}
