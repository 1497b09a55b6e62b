#include <catch2/catch_amalgamated.hpp>

#include "sml2coq/types.hpp"

using namespace sml2coq;
using K = SemType::Kind;

namespace {
int counter = 1000;
SemType tv(const char* n) { return SemType::tyvar(n); }
SemType prim(K k) { return SemType::prim(k); }
}  // namespace

TEST_CASE("unify basics") {
  SECTION("single binding: 'a list ~ int list") {
    Subst s = unify(SemType::list(tv("'a")), SemType::list(prim(K::Int)), {}, &counter);
    CHECK(s.apply(tv("'a")) == prim(K::Int));
  }

  SECTION("constructor clash: int ~ string") {
    CHECK_THROWS_AS(unify(prim(K::Int), prim(K::String), {}, &counter), UnifyError);
  }

  SECTION("records unify after canonical label sorting") {
    SemType a = SemType::record({{"name", tv("'a")}, {"age", prim(K::Int)}});
    SemType b = SemType::record({{"age", tv("'b")}, {"name", prim(K::String)}});
    Subst s = unify(a, b, {}, &counter);
    // Independent check: apply the result to both sides and compare.
    CHECK(s.apply(a) == s.apply(b));
    CHECK(s.apply(tv("'a")) == prim(K::String));
    CHECK(s.apply(tv("'b")) == prim(K::Int));
  }

  SECTION("label-set mismatch") {
    SemType a = SemType::record({{"x", prim(K::Int)}});
    SemType b = SemType::record({{"y", prim(K::Int)}});
    CHECK_THROWS_AS(unify(a, b, {}, &counter), UnifyError);
  }

  SECTION("occurs check") {
    CHECK_THROWS_AS(unify(tv("'a"), SemType::list(tv("'a")), {}, &counter), UnifyError);
  }

  SECTION("result extends the given substitution and is most general") {
    Subst s0 = unify(tv("'a"), prim(K::Int), {}, &counter);
    Subst s1 = unify(SemType::tuple({tv("'a"), tv("'b")}),
                     SemType::tuple({prim(K::Int), tv("'c")}), s0, &counter);
    CHECK(s1.apply(tv("'a")) == prim(K::Int));
    // 'b ~ 'c stays a variable binding (no over-instantiation).
    CHECK(s1.apply(tv("'b")).is(K::TyVar));
    CHECK(s1.apply(tv("'b")) == s1.apply(tv("'c")));
  }
}

TEST_CASE("constraint classes") {
  SECTION("Num admits int and real, rejects string") {
    SemType n = SemType::tyvar("'n", TvClass::Num);
    CHECK_NOTHROW(unify(n, prim(K::Int), {}, &counter));
    CHECK_NOTHROW(unify(SemType::tyvar("'m", TvClass::Num), prim(K::Real), {}, &counter));
    CHECK_THROWS_AS(unify(SemType::tyvar("'k", TvClass::Num), prim(K::String), {}, &counter),
                    UnifyError);
  }

  SECTION("Eq rejects real and arrow") {
    CHECK_THROWS_AS(unify(SemType::tyvar("'e", TvClass::Eq), prim(K::Real), {}, &counter),
                    UnifyError);
    CHECK_THROWS_AS(unify(SemType::tyvar("'e", TvClass::Eq),
                          SemType::arrow(prim(K::Int), prim(K::Int)), {}, &counter),
                    UnifyError);
    CHECK_NOTHROW(unify(SemType::tyvar("'e", TvClass::Eq), SemType::list(prim(K::Int)), {},
                        &counter));
  }

  SECTION("Num merged with Eq resolves only to int") {
    SemType n = SemType::tyvar("'n1", TvClass::Num);
    SemType e = SemType::tyvar("'e1", TvClass::Eq);
    Subst s = unify(n, e, {}, &counter);
    CHECK_THROWS_AS(unify(n, prim(K::Real), s, &counter), UnifyError);
    CHECK_NOTHROW(unify(n, prim(K::Int), s, &counter));
  }

  SECTION("equality propagates through compounds") {
    SemType e = SemType::tyvar("'e2", TvClass::Eq);
    SemType inner = SemType::tyvar("'x2");
    Subst s = unify(e, SemType::list(inner), {}, &counter);
    // 'x2 must now be an equality variable: real is rejected.
    CHECK_THROWS_AS(unify(inner, prim(K::Real), s, &counter), UnifyError);
  }
}
