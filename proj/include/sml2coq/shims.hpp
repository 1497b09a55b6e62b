#pragma once

#include <set>
#include <string>
#include <vector>

#include "sml2coq/gallina.hpp"

namespace sml2coq {

// The static Coq assets imported by every emitted file. They are shipped with
// the tool (written out via --shim-dir) rather than generated: emitted code
// calls into them "as is".
struct ShimFile {
  std::string name;  // import target; file name is <name>.v
  std::string content;
  std::vector<std::string> provides;  // identifiers and notations made available
};

inline const std::vector<ShimFile>& shimFiles() {
  static const std::vector<ShimFile> files = {
      {"intSml",
       R"((* SML int is Coq's Z. *)
Require Export ZArith.
Open Scope Z_scope.

Definition abs := Z.abs.

Notation "x 'div' y" := (Z.div x y) (at level 40, left associativity).
Notation "x 'mod' y" := (Z.modulo x y) (at level 40, left associativity).
)",
       {"Z", "Z.opp", "div", "mod", "abs"}},

      {"listSml",
       R"((* List basis subset; exceptional inputs return an axiom. *)
Require Export List.
Export ListNotations.
Open Scope list_scope.
Require Import ZArith.

Axiom EmptyException : forall{a}, a.

Module List.
  Definition hd {A : Type} (l : list A) : A :=
    match l with
    | x :: _ => x
    | nil => EmptyException
    end.

  Definition tl {A : Type} (l : list A) : list A :=
    match l with
    | _ :: t => t
    | nil => EmptyException
    end.

  Definition length {A : Type} (l : list A) : Z :=
    Z.of_nat (Datatypes.length l).

  Fixpoint map {A B : Type} (f : A -> B) (l : list A) : list B :=
    match l with
    | nil => nil
    | x :: t => f x :: map f t
    end.

  Fixpoint filter {A : Type} (f : A -> bool) (l : list A) : list A :=
    match l with
    | nil => nil
    | x :: t => if f x then x :: filter f t else filter f t
    end.
End List.
)",
       {"list", "nil", "cons", "app", "++", "EmptyException", "List.hd", "List.tl",
        "List.length", "List.map", "List.filter"}},

      {"realSml",
       R"((* SML real is Coq's primitive float. *)
Require Export Floats.
Open Scope float_scope.
)",
       {"float", "PrimFloat.opp"}},

      {"stringSml",
       R"((* String basis subset. *)
Require Export String.
Require Import Ascii ZArith.
Open Scope string_scope.

Axiom SubscriptException : forall{a}, a.

Notation "x '^' y" := (String.append x y) (at level 50, left associativity).

Module String.
  Definition size (s : string) : Z :=
    Z.of_nat (Coq.Strings.String.length s).

  Definition sub (p : string * Z) : ascii :=
    match p with
    | (s, i) =>
        match Coq.Strings.String.get (Z.to_nat i) s with
        | Some c => c
        | None => SubscriptException
        end
    end.
End String.
)",
       {"string", "^", "String.size", "String.sub", "SubscriptException"}},

      {"charSml",
       R"((* SML char is Coq's ascii. *)
Require Export Ascii.
Open Scope char_scope.
)",
       {"ascii"}},

      {"boolSml",
       R"((* Bool basis subset: SML's not is boolean negation. *)
Require Export Bool.

Definition not := negb.
)",
       {"bool", "true", "false", "not"}},

      {"optionSml",
       R"((* Option basis subset; constructors keep their SML names and remain
   usable in patterns via notations. *)
Axiom OptionException : forall{a}, a.

Notation NONE := None.
Notation SOME := Some.

Module Option.
  Definition valOf {A : Type} (x : option A) : A :=
    match x with
    | SOME v => v
    | NONE => OptionException
    end.
End Option.
)",
       {"option", "NONE", "SOME", "Option.valOf", "OptionException"}},

      {"listPairSml",
       R"((* ListPair basis subset. *)
Require Export List.
Import ListNotations.

Module ListPair.
  Fixpoint zipl {A B : Type} (l1 : list A) (l2 : list B) : list (A * B) :=
    match l1, l2 with
    | x :: t1, y :: t2 => (x, y) :: zipl t1 t2
    | _, _ => nil
    end.

  Definition zip {A B : Type} (p : list A * list B) : list (A * B) :=
    match p with (l1, l2) => zipl l1 l2 end.

  Fixpoint unzip {A B : Type} (l : list (A * B)) : list A * list B :=
    match l with
    | nil => (nil, nil)
    | (x, y) :: t => match unzip t with (xs, ys) => (x :: xs, y :: ys) end
    end.
End ListPair.
)",
       {"ListPair.zip", "ListPair.unzip"}},

      {"notationsSml",
       R"((* Operator overloading via typeclasses; bool results coerce to Prop in
   contract theorems. *)
Require Import ZArith String Ascii Bool Floats List.

Class eqInfixes A : Type := {
  eqb : A -> A -> bool;
  neq : A -> A -> bool
}.
Infix "=" := eqb (at level 70).
Infix "<>" := neq (at level 70).

#[export] Instance eqInfixesZ : eqInfixes Z :=
  { eqb := Z.eqb; neq := fun a b => negb (Z.eqb a b) }.
#[export] Instance eqInfixesString : eqInfixes string :=
  { eqb := String.eqb; neq := fun a b => negb (String.eqb a b) }.
#[export] Instance eqInfixesAscii : eqInfixes ascii :=
  { eqb := Ascii.eqb; neq := fun a b => negb (Ascii.eqb a b) }.
#[export] Instance eqInfixesBool : eqInfixes bool :=
  { eqb := Bool.eqb; neq := fun a b => negb (Bool.eqb a b) }.

Fixpoint eqbList {A : Type} `{eqInfixes A} (l1 l2 : list A) : bool :=
  match l1, l2 with
  | nil, nil => true
  | x :: t1, y :: t2 => andb (eqb x y) (eqbList t1 t2)
  | _, _ => false
  end.
#[export] Instance eqInfixesList {A : Type} `{eqInfixes A} : eqInfixes (list A) :=
  { eqb := eqbList; neq := fun a b => negb (eqbList a b) }.

Class ordInfixes A : Type := {
  ltb : A -> A -> bool;
  leb : A -> A -> bool;
  gtb : A -> A -> bool;
  geb : A -> A -> bool
}.
Infix "<" := ltb (at level 70).
Infix "<=" := leb (at level 70).
Infix ">" := gtb (at level 70).
Infix ">=" := geb (at level 70).

#[export] Instance ordInfixesZ : ordInfixes Z :=
  { ltb := Z.ltb; leb := Z.leb; gtb := fun a b => Z.ltb b a; geb := fun a b => Z.leb b a }.
#[export] Instance ordInfixesFloat : ordInfixes float :=
  { ltb := PrimFloat.ltb; leb := PrimFloat.leb;
    gtb := fun a b => PrimFloat.ltb b a; geb := fun a b => PrimFloat.leb b a }.

Class arithInfixes A : Type := {
  add : A -> A -> A;
  sub : A -> A -> A;
  mul : A -> A -> A
}.
Infix "+" := add (at level 50, left associativity).
Infix "-" := sub (at level 50, left associativity).
Infix "*" := mul (at level 40, left associativity).

#[export] Instance arithInfixesZ : arithInfixes Z :=
  { add := Z.add; sub := Z.sub; mul := Z.mul }.
#[export] Instance arithInfixesFloat : arithInfixes float :=
  { add := PrimFloat.add; sub := PrimFloat.sub; mul := PrimFloat.mul }.

Definition rdiv (a b : float) : float := PrimFloat.div a b.
Infix "/" := rdiv (at level 40, left associativity).

Coercion is_true : bool >-> Sortclass.
)",
       {"=", "<>", "<", "<=", ">", ">=", "+", "-", "*", "/", "eqb", "neq", "eqInfixes"}},
  };
  return files;
}

// ---------------------------------------------------------------------------
// Free-identifier collection over emitted sentences, for shim validation.

namespace shim_detail {

struct IdentCollector {
  std::set<std::string> defined;
  std::set<std::string> modules;  // module names and functor parameters
  std::set<std::string> freeIdents;

  void collectPatternVars(const GPattern& p, std::set<std::string>& bound) {
    using K = GPattern::Kind;
    if (p.kind == K::Var || p.kind == K::Alias) bound.insert(p.name);
    if (p.kind == K::ConApp) bound.insert(p.name);  // constructor names are defined names
    for (auto& sub : p.items) collectPatternVars(*sub, bound);
    for (auto& [f, sub] : p.fields) collectPatternVars(*sub, bound);
  }

  void term(const GTerm& t, std::set<std::string> bound) {
    using K = GTerm::Kind;
    switch (t.kind) {
      case K::Ident:
        if (t.name != "_" && !bound.count(t.name)) reference(t.name);
        break;
      case K::ExplicitApp:
        if (!bound.count(t.name)) reference(t.name);
        break;
      case K::InfixApp:
        reference(t.name);
        break;
      case K::Fun:
      case K::PropForall:
      case K::PropExists:
        for (auto& b : t.binders) {
          bound.insert(b.name);
          if (b.type) term(*b.type, bound);
        }
        break;
      case K::Let:
        term(*t.items[0], bound);
        bound.insert(t.name);
        term(*t.items[1], bound);
        return;
      case K::Match: {
        term(*t.items[0], bound);
        for (auto& br : t.branches) {
          std::set<std::string> inner = bound;
          collectPatternVars(*br.pat, inner);
          term(*br.body, inner);
        }
        return;
      }
      default:
        break;
    }
    for (auto& sub : t.items) term(*sub, bound);
    for (auto& [f, sub] : t.fields) {
      reference(f);
      term(*sub, bound);
    }
  }

  void reference(const std::string& name) {
    if (!name.empty() && name[0] == '_') return;  // generated type variables and holes
    if (defined.count(name)) return;
    auto dot = name.find('.');
    if (dot != std::string::npos && modules.count(name.substr(0, dot))) return;
    freeIdents.insert(name);
  }

  void sentence(const GSentence& s) {
    using K = GSentence::Kind;
    std::set<std::string> bound;
    switch (s.kind) {
      case K::Definition: {
        for (auto& b : s.binders) {
          bound.insert(b.name);
          if (b.type) term(*b.type, bound);
        }
        if (s.returnType) term(*s.returnType, bound);
        if (s.body) term(*s.body, bound);
        defined.insert(s.name);
        return;
      }
      case K::Equations: {
        for (auto& f : s.funcs) defined.insert(f.name);
        for (auto& f : s.funcs) {
          std::set<std::string> fb;
          for (auto& b : f.binders) {
            fb.insert(b.name);
            if (b.type) term(*b.type, fb);
          }
          term(*f.returnType, fb);
          for (auto& cl : f.clauses) {
            std::set<std::string> cb = fb;
            for (auto& p : cl.pats) collectPatternVars(*p, cb);
            term(*cl.body, cb);
          }
        }
        return;
      }
      case K::Inductive: {
        for (auto& d : s.datatypes) defined.insert(d.name);
        for (auto& d : s.datatypes) {
          std::set<std::string> db;
          for (auto& b : d.params) db.insert(b.name);
          for (auto& c : d.ctors) {
            defined.insert(c.name);
            if (c.type) term(*c.type, db);
          }
        }
        return;
      }
      case K::RecordDecl: {
        defined.insert(s.name);
        for (auto& [f, ty] : s.recordFields) {
          defined.insert(f);
          term(*ty, bound);
        }
        return;
      }
      case K::Theorem:
      case K::Axiom:
        if (s.body) term(*s.body, bound);
        defined.insert(s.name);
        return;
      case K::Parameter:
        if (s.body) term(*s.body, bound);
        defined.insert(s.name);
        return;
      case K::Notation: {
        // pattern placeholders (x, y) are binders in the body
        bound.insert("x");
        bound.insert("y");
        if (s.body) term(*s.body, bound);
        return;
      }
      case K::Module:
      case K::ModuleType: {
        defined.insert(s.name);
        modules.insert(s.name);
        if (s.moduleParam) modules.insert(s.moduleParam->first);
        for (auto& inner : s.moduleBody) sentence(*inner);
        if (s.moduleParam) modules.erase(s.moduleParam->first);
        return;
      }
      default:
        return;
    }
  }
};

}  // namespace shim_detail

// Identifiers referenced by the sentences and not defined by them.
inline std::set<std::string> collectFreeIdents(const std::vector<GSentencePtr>& sentences) {
  shim_detail::IdentCollector c;
  for (auto& s : sentences) c.sentence(*s);
  return c.freeIdents;
}

// Empty iff every referenced, non-locally-defined identifier is provided by a
// shim or by Coq's prelude.
inline std::vector<Diag> validateShims(const std::set<std::string>& emittedIdents) {
  // patternFailure is deliberately absent: it is emitted inline as a Local
  // Axiom before its first use, so it always counts as locally defined.
  static const std::set<std::string> coqBuiltins = {
      "Type", "Prop", "eq", "tt", "unit", "bool", "true", "false", "list", "nil",
      "cons", "app", "option", "None", "Some", "::",
  };
  std::set<std::string> provided = coqBuiltins;
  for (auto& f : shimFiles())
    for (auto& p : f.provides) provided.insert(p);

  std::vector<Diag> out;
  for (auto& id : emittedIdents) {
    if (provided.count(id)) continue;
    out.push_back(Diag{Stage::Emit, Span{},
                       "identifier '" + id + "' is not provided by any shim", false});
  }
  return out;
}

}  // namespace sml2coq
