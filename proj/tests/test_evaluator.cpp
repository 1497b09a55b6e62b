#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "sml2coq/evaluate.hpp"

using namespace sml2coq;
namespace fs = std::filesystem;

namespace {

EvalOutcome runText(std::string_view src, long long fuel = 1000000) {
  auto el = elaborateText(src);
  return evaluate(el, fuel);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("evaluate spec examples") {
  SECTION("val x::l = [1,2,3] binds x=1, l=[2,3]") {
    auto out = runText("val x::l = [1,2,3]");
    REQUIRE(out.kind == EvalOutcome::Kind::Ok);
    REQUIRE(out.bindings.size() == 2);
    CHECK(out.bindings[0].first == "x");
    CHECK(renderValue(out.bindings[0].second) == "1");
    CHECK(out.bindings[1].first == "l");
    CHECK(renderValue(out.bindings[1].second) == "[2,3]");
  }

  SECTION("val x::l = [] is a bind failure") {
    auto out = runText("val x::l = []");
    CHECK(out.kind == EvalOutcome::Kind::BindFailure);
  }

  SECTION("divergence exhausts fuel") {
    auto out = runText("fun loop x = loop (x + 1) val y = loop 0", 10000);
    CHECK(out.kind == EvalOutcome::Kind::FuelExhausted);
  }
}

TEST_CASE("applyBasisStub") {
  auto el = elaborateText("val ignore = 0");
  Evaluator ev(el, 1000);

  auto list = [](std::initializer_list<long long> xs) {
    auto v = std::make_shared<Value>();
    v->kind = Value::Kind::List;
    for (long long x : xs) v->items.push_back(Value::mkInt(x));
    return ValuePtr(v);
  };

  SECTION("List.hd [5, 6] = 5") {
    CHECK(renderValue(ev.applyBasisStub("List.hd", {list({5, 6})})) == "5");
  }

  SECTION("List.hd [] raises (bind failure)") {
    CHECK_THROWS(ev.applyBasisStub("List.hd", {list({})}));
  }

  SECTION("Option.valOf NONE raises (SML basis semantics)") {
    auto none = std::make_shared<Value>();
    none->kind = Value::Kind::Con;
    none->s = "NONE";
    CHECK_THROWS(ev.applyBasisStub("Option.valOf", {ValuePtr(none)}));
    auto some = std::make_shared<Value>();
    some->kind = Value::Kind::Con;
    some->s = "SOME";
    some->items = {Value::mkInt(3)};
    CHECK(renderValue(ev.applyBasisStub("Option.valOf", {ValuePtr(some)})) == "3");
  }

  SECTION("unknown basis name is an error") {
    CHECK_THROWS_AS(ev.applyBasisStub("Foo.bar", {Value::mkInt(1)}), CompileError);
  }
}

TEST_CASE("monotone fuel") {
  const char* programs[] = {
      "fun fact n = if n = 0 then 1 else n * fact (n - 1) val r = fact 6",
      "fun isEven 0 = true | isEven n = isOdd (n - 1) and isOdd 0 = false | isOdd n = isEven (n - 1) val e = isEven 9",
      "val m = List.map (fn x => x * 2) [1,2,3,4,5]",
  };
  for (const char* src : programs) {
    INFO(src);
    auto el = elaborateText(src);
    // find the minimal sufficient fuel by scanning upward
    long long minimal = -1;
    for (long long fuel = 0; fuel <= 200; ++fuel) {
      if (evaluate(el, fuel).kind == EvalOutcome::Kind::Ok) {
        minimal = fuel;
        break;
      }
    }
    REQUIRE(minimal >= 0);
    std::string expected = renderBindings(evaluate(el, minimal));
    for (long long fuel : {minimal + 1, minimal + 7, minimal + 100, 1000000LL}) {
      auto out = evaluate(el, fuel);
      REQUIRE(out.kind == EvalOutcome::Kind::Ok);
      CHECK(renderBindings(out) == expected);
    }
    if (minimal > 0) CHECK(evaluate(el, minimal - 1).kind != EvalOutcome::Kind::Ok);
  }
}

TEST_CASE("agreement corpus") {
  fs::path dir = fs::path(SML2COQ_CORPUS_DIR) / "eval";
  REQUIRE(fs::exists(dir));
  int count = 0;
  std::vector<fs::path> files;
  for (auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".sml") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (auto& src : files) {
    INFO(src.string());
    auto el = elaborateText(slurp(src));
    auto out = evaluate(el, 1000000);
    REQUIRE(out.kind == EvalOutcome::Kind::Ok);
    fs::path expected = src;
    expected.replace_extension(".expected");
    CHECK(renderBindings(out) == slurp(expected));
    ++count;
  }
  CHECK(count == 20);
}

TEST_CASE("gate programs fail as intended") {
  fs::path dir = fs::path(SML2COQ_CORPUS_DIR) / "gate";
  auto el1 = elaborateText(slurp(dir / "bind_failure.sml"));
  CHECK(evaluate(el1).kind == EvalOutcome::Kind::BindFailure);
  auto el2 = elaborateText(slurp(dir / "hd_empty.sml"));
  CHECK(evaluate(el2).kind == EvalOutcome::Kind::BindFailure);
  auto el3 = elaborateText(slurp(dir / "loop.sml"));
  CHECK(evaluate(el3, 100000).kind == EvalOutcome::Kind::FuelExhausted);
}

TEST_CASE("functor bodies evaluate at application sites") {
  // The body's binding fails only when the functor is applied.
  const char* src =
      "functor F (P : sig val l : int list end) = struct val x::r = P.l end\n"
      "structure Bad = F (struct val l = [] : int list end)";
  auto out = runText(src);
  CHECK(out.kind == EvalOutcome::Kind::BindFailure);

  const char* ok =
      "functor F (P : sig val l : int list end) = struct val x::r = P.l end\n"
      "val probe = 1";
  CHECK(runText(ok).kind == EvalOutcome::Kind::Ok);
}
