#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sml2coq/parser.hpp"
#include "sml2coq/sml_print.hpp"
#include "sml2coq/token.hpp"

using namespace sml2coq;

namespace {

std::vector<Token> lex(std::string_view s) {
  auto toks = tokenize(s);
  REQUIRE(toks.back().kind == TokKind::Eof);
  toks.pop_back();
  return toks;
}

std::vector<DeclPtr> parseProgram(std::string_view s) { return parseText(s).program; }

}  // namespace

TEST_CASE("tokenize basics") {
  SECTION("minimal declaration") {
    auto toks = lex("val x = 1");
    REQUIRE(toks.size() == 4);
    CHECK(toks[0].is(TokKind::Keyword, "val"));
    CHECK(toks[1].is(TokKind::Ident, "x"));
    CHECK(toks[2].is(TokKind::SymbolicId, "="));
    CHECK(toks[3].is(TokKind::IntLit, "1"));
  }

  SECTION("contract delimiters are atomic") {
    auto toks = lex("(!! f x ==> y; REQUIRES: true; ENSURES: true; !!)");
    REQUIRE(!toks.empty());
    CHECK(toks.front().kind == TokKind::ContractOpen);
    CHECK(toks.back().kind == TokKind::ContractClose);
    CHECK(toks[3].is(TokKind::SymbolicId, "==>"));
    CHECK(toks[6].is(TokKind::Keyword, "REQUIRES"));
  }

  SECTION("comments are skipped, including nested ones") {
    auto toks = lex("val (* c (* nested *) *) x");
    REQUIRE(toks.size() == 2);
    CHECK(toks[0].is(TokKind::Keyword, "val"));
    CHECK(toks[1].is(TokKind::Ident, "x"));
  }

  SECTION("token texts plus trivia reconstruct the input") {
    std::string src = "fun f (x : int) = (* c *) ~2 + x * 10\nval s = \"a\\nb\"";
    std::string rebuilt(src.size(), ' ');
    for (auto& t : lex(src))
      for (uint32_t i = t.span.begin; i < t.span.end; ++i) rebuilt[i] = src[i];
    // Non-space positions all came from tokens; spans are ordered and disjoint.
    auto toks = lex(src);
    for (size_t i = 0; i < toks.size(); ++i) {
      CHECK(toks[i].span.begin < toks[i].span.end);
      if (i) CHECK(toks[i - 1].span.end <= toks[i].span.begin);
      CHECK(src.substr(toks[i].span.begin, toks[i].span.end - toks[i].span.begin) ==
            toks[i].text);
    }
    CHECK(rebuilt.find('~') != std::string::npos);
  }

  SECTION("literals") {
    CHECK(lex("~42")[0].kind == TokKind::IntLit);
    CHECK(lex("3.14")[0].kind == TokKind::RealLit);
    CHECK(lex("1e~3")[0].kind == TokKind::RealLit);
    CHECK(lex("#\"a\"")[0].kind == TokKind::CharLit);
    CHECK(lex("\"hi\\t\"")[0].kind == TokKind::StringLit);
  }

  SECTION("lexical errors carry offsets") {
    CHECK_THROWS_AS(tokenize("val s = \"oops"), CompileError);
    CHECK_THROWS_AS(tokenize("(* never closed"), CompileError);
    try {
      tokenize("val s = \"oops");
    } catch (const CompileError& e) {
      CHECK(e.diag.span.begin == 8);
    }
  }

  SECTION("equality tyvars are rejected as unsupported") {
    try {
      tokenize("fun f (x : ''a) = x");
      FAIL("expected rejection");
    } catch (const CompileError& e) {
      CHECK(e.diag.unsupported);
    }
  }
}

TEST_CASE("parse keeps derived forms as first-class nodes") {
  SECTION("if-then-else is not desugared") {
    auto prog = parseProgram("val a = if b then 1 else 2");
    REQUIRE(prog.size() == 1);
    CHECK(prog[0]->valBindings[0].exp->kind == Exp::Kind::If);
  }

  SECTION("each derived form keeps its own variant") {
    auto kindOf = [](std::string_view src) {
      auto prog = parseProgram(src);
      return prog[0]->valBindings[0].exp->kind;
    };
    CHECK(kindOf("val a = ()") == Exp::Kind::Unit);
    CHECK(kindOf("val a = (1, 2)") == Exp::Kind::Tuple);
    CHECK(kindOf("val a = [1, 2]") == Exp::Kind::List);
    CHECK(kindOf("val a = case x of _ => 1") == Exp::Kind::Case);
    CHECK(kindOf("val a = x andalso y") == Exp::Kind::Andalso);
    CHECK(kindOf("val a = x orelse y") == Exp::Kind::Orelse);
    CHECK(kindOf("val a = 1 + 2") == Exp::Kind::InfixApp);
    CHECK(kindOf("val a = {x = 1}") == Exp::Kind::Record);
    CHECK(kindOf("val a = fn x => x") == Exp::Kind::Fn);
  }

  SECTION("derived pattern forms") {
    auto prog = parseProgram("val (a, b) = p val [x] = l val h :: t = l val () = u");
    CHECK(prog[0]->valBindings[0].pat->kind == Pat::Kind::Tuple);
    CHECK(prog[1]->valBindings[0].pat->kind == Pat::Kind::List);
    CHECK(prog[2]->valBindings[0].pat->kind == Pat::Kind::InfixApp);
    CHECK(prog[3]->valBindings[0].pat->kind == Pat::Kind::Unit);
  }
}

TEST_CASE("infix environment") {
  SECTION("declared infix function parses infix uses") {
    auto res = parseText("infix F  fun op F (x, y) = x*x + y  val z = 1 F 2");
    REQUIRE(res.infixEnv.contains("F"));
    CHECK(res.infixEnv.at("F").precedence == 0);
    CHECK_FALSE(res.infixEnv.at("F").rightAssoc);
    auto& z = res.program[2]->valBindings[0];
    REQUIRE(z.exp->kind == Exp::Kind::InfixApp);
    CHECK(z.exp->name == "F");
  }

  SECTION("precedence and associativity resolve correctly") {
    auto prog = parseProgram("val a = 1 + 2 * 3");
    auto& e = prog[0]->valBindings[0].exp;
    REQUIRE(e->name == "+");
    CHECK(e->items[1]->name == "*");

    auto prog2 = parseProgram("val a = 1 :: 2 :: nil");
    auto& c = prog2[0]->valBindings[0].exp;
    REQUIRE(c->name == "::");
    CHECK(c->items[1]->name == "::");  // right-assoc

    auto prog3 = parseProgram("val a = 1 - 2 - 3");
    CHECK(prog3[0]->valBindings[0].exp->items[0]->name == "-");  // left-assoc
  }

  SECTION("later directives overwrite earlier ones") {
    auto res = parseText("infix 3 F infixr 8 F val x = 1");
    CHECK(res.infixEnv.at("F").precedence == 8);
    CHECK(res.infixEnv.at("F").rightAssoc);
  }

  SECTION("op disables infix status") {
    auto prog = parseProgram("val a = op + (1, 2)");
    auto& e = prog[0]->valBindings[0].exp;
    REQUIRE(e->kind == Exp::Kind::App);
    CHECK(e->items[0]->name == "+");
    CHECK(e->items[0]->opMarked);
  }
}

TEST_CASE("contracts attach to the following fun declaration") {
  const char* src =
      "(!! posAdd(x, y) ==> b;\n"
      "    REQUIRES: x > 0 andalso y > 0;\n"
      "    ENSURES: b > x andalso b > y;   !!)\n"
      "fun posAdd(x, y) = x + y;";

  SECTION("well-formed contract") {
    auto prog = parseProgram(src);
    REQUIRE(prog.size() == 1);
    REQUIRE(prog[0]->kind == Decl::Kind::Fun);
    auto& c = prog[0]->funBindings[0].contract;
    REQUIRE(c.has_value());
    CHECK(c->fname == "posAdd");
    REQUIRE(c->inputs.size() == 1);
    CHECK(c->inputs[0]->kind == Pat::Kind::Tuple);
    CHECK(c->output->name == "b");
    CHECK(c->requires_->kind == Exp::Kind::Andalso);
  }

  SECTION("attachment is positional") {
    CHECK_THROWS_AS(
        parseProgram("(!! f x ==> y; REQUIRES: true; ENSURES: true; !!)\n"
                     "val z = 1\n"
                     "fun f x = x"),
        CompileError);
  }

  SECTION("name mismatch is an error") {
    CHECK_THROWS_AS(parseProgram("(!! g x ==> y; REQUIRES: true; ENSURES: true; !!)\n"
                                 "fun f x = x"),
                    CompileError);
  }

  SECTION("output must bind exactly one variable") {
    CHECK_THROWS_AS(parseProgram("(!! f x ==> (y, z); REQUIRES: true; ENSURES: true; !!)\n"
                                 "fun f x = x"),
                    CompileError);
    CHECK_THROWS_AS(parseProgram("(!! f x ==> x; REQUIRES: true; ENSURES: true; !!)\n"
                                 "fun f x = x"),
                    CompileError);
  }

  SECTION("non-variable contract inputs are flagged") {
    CHECK_THROWS_AS(parseProgram("(!! f (x :: l) ==> y; REQUIRES: true; ENSURES: true; !!)\n"
                                 "fun f (x :: l) = x"),
                    CompileError);
  }
}

TEST_CASE("unsupported constructs are rejected with the unsupported flag") {
  auto checkUnsupported = [](std::string_view src) {
    try {
      parseProgram(src);
      FAIL("expected rejection for: " << src);
    } catch (const CompileError& e) {
      INFO(src);
      CHECK(e.diag.unsupported);
    }
  };
  checkUnsupported("val x = raise Fail");
  checkUnsupported("exception Foo");
  checkUnsupported("val x = while true do ()");
  checkUnsupported("open List");
  checkUnsupported("val x = (1; 2)");
  checkUnsupported("val x = #name r");
}

TEST_CASE("structures, signatures, functors parse") {
  const char* src =
      "signature PAIR =\n"
      "sig\n"
      "  type t1\n"
      "  type t2\n"
      "  type t = t1 * t2\n"
      "  val default : unit -> t\n"
      "end\n"
      "structure IntString : PAIR =\n"
      "struct\n"
      "  type t1 = int\n"
      "  type t2 = string\n"
      "  type t = t1 * t2\n"
      "  fun default () = (0, \"\")\n"
      "end\n"
      "functor Example (Pair : PAIR) =\n"
      "struct\n"
      "  val (a, b) = Pair.default ()\n"
      "end\n"
      "structure S = Example (IntString)";
  auto prog = parseProgram(src);
  REQUIRE(prog.size() == 4);
  CHECK(prog[0]->kind == Decl::Kind::Signature);
  REQUIRE(prog[0]->sigExp->specs.size() == 4);
  CHECK(prog[0]->sigExp->specs[2].kind == SigSpec::Kind::TypeDef);
  CHECK(prog[1]->kind == Decl::Kind::Structure);
  REQUIRE(prog[1]->ascription);
  CHECK_FALSE(prog[1]->opaque);
  CHECK(prog[2]->kind == Decl::Kind::Functor);
  CHECK(prog[3]->strExp->kind == StrExp::Kind::FunctorApp);
  CHECK(prog[3]->strExp->arg->kind == StrExp::Kind::Name);

  SECTION("inline functor argument via declaration list") {
    auto p2 = parseProgram("structure T = Example (type t1 = int type t2 = int)");
    REQUIRE(p2[0]->strExp->kind == StrExp::Kind::FunctorApp);
    CHECK(p2[0]->strExp->arg->kind == StrExp::Kind::Inline);
    CHECK(p2[0]->strExp->arg->decls.size() == 2);
  }
}

TEST_CASE("parse/print round trip is structure preserving") {
  const char* programs[] = {
      "val x = 1",
      "val x :: l = [1, 2, 3]",
      "fun length [] = 0 | length (x :: l) = 1 + length l",
      "fun isBob ({name = \"Bob\",...}: r) = true | isBob {...} = false",
      "datatype 'a evenList = ENil | ECons of 'a * 'a oddList and 'a oddList = OCons of 'a * 'a evenList",
      "fun lengthE (ENil: 'a evenList): int = 0 | lengthE (ECons (_, l)) = lengthO l and lengthO (OCons (_, l)) = lengthE l",
      "infix F fun op F (x, y) = x*x + y val f = op F val x = 5 F 2 val y = op F (2, 3)",
      "(!! posAdd(x, y) ==> b; REQUIRES: x > 0 andalso y > 0; ENSURES: b > x andalso b > y; !!) fun posAdd(x, y) = x + y",
      "val a = let val t = (1, \"x\") in case t of (i, s) => i end",
      "structure M = struct val v = {age = 42, name = \"Bob\"} fun get ({age, ...}) = age end",
      "local val h = 1 in val k = h + 1 end",
      "fun f (x : int) (y as (a, b)) = if x > a then [x] else [a, b]",
      "type r = { name : string, age : int } fun isBob ({name = \"Bob\",...}: r) = true | isBob {...} = false",
      "val g = fn 0 => \"z\" | n => \"p\"",
  };
  SmlPrinter printer;
  for (const char* src : programs) {
    INFO(src);
    auto first = parseText(src);
    std::string printed = printer.program(first.program);
    INFO(printed);
    auto second = parseText(printed);
    REQUIRE(first.program.size() == second.program.size());
    for (size_t i = 0; i < first.program.size(); ++i)
      CHECK(equalDecl(*first.program[i], *second.program[i]));
  }
}

TEST_CASE("randomized expression round trips") {
  // Small generator over the expression grammar; checks print/parse closure.
  std::mt19937 rng(20240817);
  std::uniform_int_distribution<int> pick(0, 9);
  std::function<std::string(int)> gen = [&](int depth) -> std::string {
    if (depth <= 0) {
      switch (pick(rng) % 5) {
        case 0: return "x";
        case 1: return "1";
        case 2: return "\"s\"";
        case 3: return "true";
        default: return "()";
      }
    }
    switch (pick(rng)) {
      case 0: return "(" + gen(depth - 1) + " + " + gen(depth - 1) + ")";
      case 1: return "(" + gen(depth - 1) + ", " + gen(depth - 1) + ")";
      case 2: return "[" + gen(depth - 1) + ", " + gen(depth - 1) + "]";
      case 3: return "(if " + gen(depth - 1) + " then " + gen(depth - 1) + " else " +
                     gen(depth - 1) + ")";
      case 4: return "(fn v => " + gen(depth - 1) + ")";
      case 5: return "(case " + gen(depth - 1) + " of _ => " + gen(depth - 1) + ")";
      case 6: return "(" + gen(depth - 1) + " andalso " + gen(depth - 1) + ")";
      case 7: return "{a = " + gen(depth - 1) + "}";
      case 8: return "(f " + gen(depth - 1) + ")";
      default: return "(" + gen(depth - 1) + " :: " + gen(depth - 1) + ")";
    }
  };
  SmlPrinter printer;
  for (int i = 0; i < 200; ++i) {
    std::string src = "val probe = " + gen(3);
    INFO(src);
    auto first = parseText(src);
    auto second = parseText(printer.program(first.program));
    REQUIRE(second.program.size() == 1);
    CHECK(equalDecl(*first.program[0], *second.program[0]));
  }
}
