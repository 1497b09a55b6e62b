#include <catch2/catch_amalgamated.hpp>

#include "sml2coq/elaborate.hpp"

using namespace sml2coq;
using K = SemType::Kind;

namespace {

const Exp* rhs(const Elaboration& el, size_t declIdx) {
  return el.program.at(declIdx)->valBindings.at(0).exp.get();
}

}  // namespace

TEST_CASE("elaborate annotates every node") {
  auto el = elaborateText("val x = 1 + 2 val s = \"a\" val t = (x, s)");
  CHECK(el.typeOf(rhs(el, 0)) == SemType::prim(K::Int));
  CHECK(el.typeOf(rhs(el, 1)) == SemType::prim(K::String));
  CHECK(el.typeOf(rhs(el, 2)) ==
        SemType::tuple({SemType::prim(K::Int), SemType::prim(K::String)}));
}

TEST_CASE("polymorphic empty list generalizes (value restriction)") {
  auto el = elaborateText("val L = []");
  const BindingInfo& info = el.valInfo.at(el.program[0].get());
  REQUIRE(info.quantified.size() == 1);
  SemType t = info.rhsType;
  REQUIRE(t.is(K::List));
  CHECK(t.args[0].is(K::TyVar));
  CHECK(t.args[0].name == info.quantified[0]);

  SECTION("usable at an instantiated type afterwards") {
    CHECK_NOTHROW(elaborateText("val L = [] val b = L = [3]"));
  }

  SECTION("applications do not generalize at top level (dummy instantiation + warning)") {
    auto el2 = elaborateText("fun id x = x val y = (fn v => v) id");
    const BindingInfo& yi = el2.valInfo.at(el2.program[1].get());
    CHECK(yi.quantified.empty());
    bool warned = false;
    for (auto& w : el2.warnings)
      if (w.message.find("value restriction") != std::string::npos) warned = true;
    CHECK(warned);
  }
}

TEST_CASE("record ellipsis resolves through annotations") {
  auto el = elaborateText(
      "fun getAge (r: {name: string, age: int}) = case r of {age = x, ...} => x");
  const FunBinding& fb = el.program[0]->funBindings[0];
  const FunInfo& info = el.funInfo.at(&fb);
  REQUIRE(info.paramTypes.size() == 1);
  SemType param = el.subst.apply(info.paramTypes[0]);
  REQUIRE(param.is(K::Record));
  REQUIRE(param.labels == std::vector<std::string>{"age", "name"});
  CHECK(info.resultType == SemType::prim(K::Int));

  // The ellipsis pattern's type covers both fields.
  const Pat* casePat = fb.clauses[0].body->rules[0].pat.get();
  SemType pt = el.typeOf(casePat);
  REQUIRE(pt.is(K::Record));
  CHECK(pt.labels == std::vector<std::string>{"age", "name"});
}

TEST_CASE("undetermined ellipsis record type is an error") {
  CHECK_THROWS_AS(elaborateText("fun getAge r = case r of {age = x, ...} => x"),
                  CompileError);
}

TEST_CASE("non-exhaustive binding flagged") {
  auto el = elaborateText("val x::l = [1,2,3]");
  CHECK(el.exhaustive.at(el.program[0].get()) == false);
  CHECK(el.valInfo.at(el.program[0].get()).rhsType == SemType::list(SemType::prim(K::Int)));
  // A warning is recorded, but elaboration succeeds.
  REQUIRE(!el.warnings.empty());

  auto el2 = elaborateText("val (a, b) = (1, 2)");
  CHECK(el2.exhaustive.at(el2.program[0].get()) == true);
}

TEST_CASE("contract elaboration") {
  const char* posAdd =
      "(!! posAdd(x, y) ==> b;\n"
      "    REQUIRES: x > 0 andalso y > 0;\n"
      "    ENSURES: b > x andalso b > y;   !!)\n"
      "fun posAdd(x, y) = x + y;";

  SECTION("variables typed from the function scheme") {
    auto el = elaborateText(posAdd);
    const Contract& c = *el.program[0]->funBindings[0].contract;
    const ElabContract& ec = el.contracts.at(&c);
    REQUIRE(ec.vars.size() == 3);
    CHECK(ec.vars[0].first == "x");
    CHECK(ec.vars[0].second == SemType::prim(K::Int));
    CHECK(ec.vars[1].first == "y");
    CHECK(ec.vars[2].first == "b");
    CHECK(ec.vars[2].second == SemType::prim(K::Int));
  }

  SECTION("non-bool condition is a type error") {
    CHECK_THROWS_AS(
        elaborateText("(!! f x ==> b; REQUIRES: true; ENSURES: b + 1; !!) fun f x = x + 1"),
        CompileError);
  }

  SECTION("arity mismatch") {
    CHECK_THROWS_AS(
        elaborateText("(!! f x y ==> b; REQUIRES: true; ENSURES: true; !!) fun f x = x"),
        CompileError);
  }

  SECTION("conditions cannot use function-internal variables") {
    CHECK_THROWS_AS(
        elaborateText(
            "(!! f x ==> b; REQUIRES: true; ENSURES: b = internal; !!)\n"
            "fun f internal = internal"),
        CompileError);
  }

  SECTION("conditions can use previously declared names") {
    CHECK_NOTHROW(elaborateText(
        "val limit = 10\n"
        "(!! f x ==> b; REQUIRES: x < limit; ENSURES: b <= limit; !!) fun f x = x"));
  }
}

TEST_CASE("datatypes and mutual recursion") {
  const char* src =
      "datatype 'a evenList = ENil | ECons of 'a * 'a oddList\n"
      "and 'a oddList = OCons of 'a * 'a evenList\n"
      "fun lengthE (ENil: 'a evenList): int = 0\n"
      "  | lengthE (ECons (_, l)) = lengthO l\n"
      "and lengthO (OCons (_, l)) = lengthE l";
  auto el = elaborateText(src);
  const FunBinding& lengthE = el.program[1]->funBindings[0];
  const FunInfo& info = el.funInfo.at(&lengthE);
  REQUIRE(info.quantified.size() == 1);
  SemType param = info.paramTypes[0];
  REQUIRE(param.is(K::Data));
  CHECK(param.name == "evenList");
  CHECK(param.args[0].display() == "'a");
  CHECK(info.resultType == SemType::prim(K::Int));
  CHECK(info.exhaustive);

  SECTION("constructors are resolved in patterns") {
    const Pat* enil = lengthE.clauses[0].params[0]->items[0].get();
    const IdInfo* id = el.identOf(enil);
    REQUIRE(id);
    CHECK(id->sort == IdSort::Constructor);
    CHECK(id->ctorName == "ENil");
  }
}

TEST_CASE("overloading defaults to int") {
  auto el = elaborateText("fun double x = x + x");
  const FunInfo& info = el.funInfo.at(&el.program[0]->funBindings[0]);
  CHECK(info.paramTypes[0] == SemType::prim(K::Int));
  CHECK(info.quantified.empty());

  auto el2 = elaborateText("fun half (x : real) = x / 2.0");
  CHECK(el2.funInfo.at(&el2.program[0]->funBindings[0]).resultType ==
        SemType::prim(K::Real));
}

TEST_CASE("equality on reals is rejected") {
  CHECK_THROWS_AS(elaborateText("val b = 1.0 = 2.0"), CompileError);
}

TEST_CASE("abbreviations are preserved in annotations") {
  auto el = elaborateText(
      "type r = { name : string, age : int }\n"
      "fun isBob ({name = \"Bob\",...}: r) = true | isBob {...} = false");
  const FunBinding& fb = el.program[1]->funBindings[0];
  const FunInfo& info = el.funInfo.at(&fb);
  SemType param = info.paramTypes[0];
  REQUIRE(param.is(K::Abbrev));
  CHECK(param.name == "r");
  CHECK(info.exhaustive);  // {...} row is generic
  CHECK(info.resultType == SemType::prim(K::Bool));
}

TEST_CASE("structures, signatures, functors elaborate") {
  const char* src =
      "signature PAIR =\n"
      "sig type t1 type t2 type t = t1 * t2 val default : unit -> t end\n"
      "structure IntString : PAIR =\n"
      "struct type t1 = int type t2 = string type t = t1 * t2\n"
      "  fun default () = (0, \"\") end\n"
      "functor Example (Pair : PAIR) = struct val (a, b) = Pair.default () end\n"
      "structure S = Example (IntString)\n"
      "val check = S.a + 1";
  auto el = elaborateText(src);
  CHECK(el.typeOf(rhs(el, 4)) == SemType::prim(K::Int));

  SECTION("missing member fails ascription") {
    CHECK_THROWS_AS(elaborateText("signature SIG = sig val x : int end\n"
                                  "structure Bad : SIG = struct val y = 1 end"),
                    CompileError);
  }

  SECTION("too-specific value fails ascription") {
    CHECK_THROWS_AS(elaborateText("signature SIG = sig val id : 'a -> 'a end\n"
                                  "structure Bad : SIG = struct fun id (x:int) = x end"),
                    CompileError);
  }

  SECTION("opaque ascription records a warning") {
    auto el2 = elaborateText("signature SIG = sig val x : int end\n"
                             "structure M :> SIG = struct val x = 1 end");
    bool found = false;
    for (auto& w : el2.warnings)
      if (w.message.find("opaque") != std::string::npos) found = true;
    CHECK(found);
  }
}

TEST_CASE("elaboration is deterministic including tyvar numbering") {
  const char* src =
      "val L = []\n"
      "fun length [] = 0 | length (x :: l) = 1 + length l\n"
      "val n = length [1, 2]";
  auto a = elaborateText(src);
  auto b = elaborateText(src);
  CHECK(a.tyvarCounter == b.tyvarCounter);
  const BindingInfo& ia = a.valInfo.at(a.program[0].get());
  const BindingInfo& ib = b.valInfo.at(b.program[0].get());
  CHECK(ia.quantified == ib.quantified);
  CHECK(ia.rhsType == ib.rhsType);
}

TEST_CASE("principal types: instance annotations accepted") {
  // The inferred type of `id` is 'a -> 'a; instance uses must check.
  CHECK_NOTHROW(elaborateText("fun id x = x val a = id 1 val b = id \"s\""));
  CHECK_NOTHROW(elaborateText("fun id (x : int) = x val a = id 1"));
  CHECK_THROWS_AS(elaborateText("fun id (x : int) = x val b = id \"s\""), CompileError);
}

TEST_CASE("sorted-label canonicalization") {
  CHECK_NOTHROW(elaborateText(
      "fun get {b = x, a = y} = x\n"
      "val r = get {a = 1, b = \"s\"}"));
}

TEST_CASE("unbound and misc errors") {
  CHECK_THROWS_AS(elaborateText("val x = undefined_thing"), CompileError);
  CHECK_THROWS_AS(elaborateText("val x = 1 + \"s\""), CompileError);
  CHECK_THROWS_AS(elaborateText("val x::x = [1]"), CompileError);  // nonlinear
}
