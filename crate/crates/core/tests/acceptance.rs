//! One line per acceptance criterion, then a single assertion over all of
//! them. Run with `cargo test --test acceptance -- --nocapture` to see the
//! report.

use std::time::{Duration, Instant};

use contsem::engine::{derive, parse_bracketed, EngineError, Reading, SearchOptions};
use contsem::lexicon::default_lexicon;
use contsem::rules::{function_application, lift, lift_rule, lower, tower};
use contsem::term::{alpha_equal, canonicalize, parse_term, Term};
use contsem::types::{equal_up_to_renaming, parse_type, unify, Arrow, Type};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

/// Per-case time budget for symbolic derivations.
const CASE_BUDGET: Duration = Duration::from_secs(1);
/// Random instances per algebraic law.
const LAW_CASES: u32 = 10_000;

const BAKER: &str = "(who (you (think (_ (remembers (what (we ((bought _) (for whom)))))))))";
const CLAUSE: &str = "(what (we ((bought _) (for whom))))";
const BAKER_WIDE: &str =
    r"\z. [Animate(z)] \y. [Animate(y)] Think(Remember(\x. [Not(Animate(x))] For(y)(Buy(x))(We))(z))(You)";
const BAKER_NARROW: &str =
    r"\z. [Animate(z)] Think(Remember(\x. [Not(Animate(x))] \y. [Animate(y)] For(y)(Buy(x))(We))(z))(You)";

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn run(src: &str, order: usize, goal: Option<&str>) -> Result<Vec<Reading>, EngineError> {
    let tree = parse_bracketed(src).expect("bracketed input");
    let mut opts = SearchOptions::with_order(order);
    opts.goal = goal.map(|g| parse_type(g).expect("goal type"));
    let grammar = tower(order).expect("tower");
    let start = Instant::now();
    let out = derive(&tree, &grammar, &default_lexicon(), &opts);
    let elapsed = start.elapsed();
    assert!(elapsed < CASE_BUDGET, "{src} at order {order} took {elapsed:?}");
    out
}

fn readings(src: &str, order: usize, goal: Option<&str>) -> Result<Vec<Reading>, String> {
    run(src, order, goal).map_err(|e| format!("{src} at order {order}: {e}"))
}

fn term(src: &str) -> Term {
    parse_term(src).expect("term literal")
}

fn ty(src: &str) -> Type {
    parse_type(src).expect("type literal")
}

/// Exactly one reading, alpha-equal to `expected` and of type `expected_ty`.
fn single(rs: &[Reading], expected: &str, expected_ty: &str) -> Check {
    match rs {
        [r] if alpha_equal(&r.canonical_term, &term(expected)) && equal_up_to_renaming(&r.ty, &ty(expected_ty)) => {
            Ok(())
        }
        _ => Err(format!("expected only `{expected} : {expected_ty}`, got {}", show(rs))),
    }
}

fn show(rs: &[Reading]) -> String {
    let lines: Vec<String> = rs.iter().map(ToString::to_string).collect();
    format!("[{}]", lines.join("; "))
}

fn criterion_1() -> Check {
    let rs = readings("(Alice (loves Bob))", 0, None)?;
    match rs.as_slice() {
        [r] if r.canonical_term == term("Love(Bob)(Alice)") && r.ty == Type::T => Ok(()),
        _ => Err(show(&rs)),
    }
}

fn criterion_2() -> Check {
    single(&readings("(Alice (loves everyone))", 1, Some("t"))?, r"forall x. Love(x)(Alice)", "t")?;
    let rs = readings("(someone (loves everyone))", 1, Some("t"))?;
    let expected = [r"exists x. forall y. Love(y)(x)", r"forall y. exists x. Love(y)(x)"];
    let found = |e: &str| rs.iter().filter(|r| alpha_equal(&r.canonical_term, &term(e)) && r.ty == Type::T).count();
    if rs.len() == 2 && expected.iter().all(|e| found(e) == 1) {
        Ok(())
    } else {
        Err(show(&rs))
    }
}

fn criterion_3() -> Check {
    for order in 1..=2 {
        single(&readings("(we (bought _))", order, None)?, r"\x. Buy(x)(We)", "e #> t")?;
    }
    Ok(())
}

fn criterion_4() -> Check {
    for order in 1..=2 {
        single(
            &readings("(Alice (remembers (what (we (bought _)))))", order, None)?,
            r"Remember(\x. [Not(Animate(x))] Buy(x)(We))(Alice)",
            "t",
        )?;
    }
    Ok(())
}

const CLAUSE_NARROW: &str = r"\x. [Not(Animate(x))] \y. [Animate(y)] For(y)(Buy(x))(We)";

fn criterion_5() -> Check {
    single(&readings(CLAUSE, 1, None)?, CLAUSE_NARROW, "e ?> e ?> t")
}

fn criterion_6() -> Check {
    single(&readings(CLAUSE, 2, None)?, CLAUSE_NARROW, "e ?> e ?> t")?;
    single(
        &readings(CLAUSE, 2, Some("(e ?> t){d|e ?> d}"))?,
        r"\d. \y. [Animate(y)] d(\x. [Not(Animate(x))] For(y)(Buy(x))(We))",
        "(e ?> t){d|e ?> d}",
    )
}

fn criterion_7() -> Check {
    let rs = readings(BAKER, 2, None)?;
    let wide = rs.iter().filter(|r| alpha_equal(&r.canonical_term, &term(BAKER_WIDE))).count();
    let narrow = rs.iter().filter(|r| alpha_equal(&r.canonical_term, &term(BAKER_NARROW))).count();
    let types_ok = rs.iter().all(|r| r.ty == ty("e ?> e ?> t") || r.ty == ty("e ?> t"));
    if rs.len() == 2 && wide == 1 && narrow == 1 && types_ok {
        Ok(())
    } else {
        Err(show(&rs))
    }
}

fn criterion_8() -> Check {
    let counts = |k| {
        let g = tower(k).expect("tower");
        (g.unary().count(), g.binary().count())
    };
    let expected = [(0, 0, 1), (1, 2, 3), (2, 4, 7)];
    for (k, u, b) in expected {
        if counts(k) != (u, b) {
            return Err(format!("tower({k}) has {:?}, expected ({u}, {b})", counts(k)));
        }
    }
    let (g0, g1, g2) = (tower(0).unwrap(), tower(1).unwrap(), tower(2).unwrap());
    if g0.is_subset_of(&g1) && g1.is_subset_of(&g2) {
        Ok(())
    } else {
        Err("towers are not nested".into())
    }
}

fn criterion_9() -> Check {
    let cases = [
        ("(Alice (remembers (Alice (bought Bob))))", None),
        ("(what (what (we (bought _))))", None),
        ("(we (bought _))", Some("t")),
    ];
    for (src, goal) in cases {
        for order in 0..=2 {
            match run(src, order, goal) {
                Err(EngineError::NoDerivation(_)) => {}
                other => return Err(format!("{src} at order {order}: {other:?}")),
            }
        }
    }
    Ok(())
}

/// Guards `[Not(Animate(x))]` (contributed by `what`) outside the question
/// argument of `Remember`.
fn raised_guards_outside_remember(t: &Term, inside: bool) -> usize {
    match t {
        Term::App(f, subject) => match f.as_ref() {
            Term::App(head, question) if **head == Term::constant("Remember") => {
                raised_guards_outside_remember(question, true) + raised_guards_outside_remember(subject, inside)
            }
            _ => raised_guards_outside_remember(f, inside) + raised_guards_outside_remember(subject, inside),
        },
        Term::Guard(cond, body) => {
            let raised = matches!(cond.as_ref(), Term::App(h, _) if **h == Term::constant("Not"));
            usize::from(raised && !inside) + raised_guards_outside_remember(body, inside)
        }
        Term::Lam(_, b) | Term::Forall(_, b) | Term::Exists(_, b) => raised_guards_outside_remember(b, inside),
        Term::Var(_) | Term::Const(_) => 0,
    }
}

fn criterion_10() -> Check {
    let allowed = [term(BAKER_WIDE), term(BAKER_NARROW)];
    for order in 0..=2 {
        let evaluated = match run(BAKER, order, None) {
            Ok(rs) => rs,
            Err(EngineError::NoDerivation(_)) => Vec::new(),
            Err(e) => return Err(e.to_string()),
        };
        for r in &evaluated {
            if !allowed.iter().any(|a| alpha_equal(a, &r.canonical_term)) {
                return Err(format!("order {order}: unexpected reading {r}"));
            }
        }
        // Every root item, lifted or not: `what` never scopes out of its clause.
        let all = match run(BAKER, order, Some("a")) {
            Ok(rs) => rs,
            Err(EngineError::NoDerivation(_)) => Vec::new(),
            Err(e) => return Err(e.to_string()),
        };
        for r in &all {
            let mut terms = vec![&r.canonical_term];
            terms.extend(&r.equivalents);
            if terms.iter().any(|t| raised_guards_outside_remember(t, false) > 0) {
                return Err(format!("order {order}: raised wh-phrase scopes out in {r}"));
            }
        }
    }
    Ok(())
}

fn arb_entity() -> impl Strategy<Value = Term> {
    prop::sample::select(vec!["Alice", "Bob", "Carol", "We", "You"]).prop_map(Term::constant)
}

/// Closed propositions built from the signature, with quantifiers.
fn arb_prop() -> impl Strategy<Value = Term> {
    let ent = arb_entity().boxed();
    let leaf = prop_oneof![
        ent.clone().prop_map(|x| Term::app(Term::constant("Smoke"), x)),
        (ent.clone(), ent.clone()).prop_map(|(x, y)| Term::apps(Term::constant("Love"), [x, y])),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|p| Term::app(Term::constant("Not"), p)),
            (inner.clone(), arb_entity()).prop_map(|(p, x)| Term::apps(Term::constant("Think"), [p, x])),
            inner.clone().prop_map(|p| Term::forall("q", Term::guard(Term::app(Term::constant("Animate"), Term::var("q")), p))),
            inner.prop_map(|p| Term::exists("q", Term::guard(Term::apps(Term::constant("Love"), [Term::var("q"), Term::constant("Alice")]), p))),
        ]
    })
}

fn arb_type() -> impl Strategy<Value = Type> {
    let leaf = prop_oneof![
        Just(Type::E),
        Just(Type::T),
        prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(Type::var),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        (arb_arrow(), inner.clone(), inner).prop_map(|(k, a, b)| Type::Arrow(k, Box::new(a), Box::new(b)))
    })
}

fn arb_arrow() -> impl Strategy<Value = Arrow> {
    prop::sample::select(vec![Arrow::Fun, Arrow::Cont, Arrow::Ques])
}

fn law<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Check {
    let mut runner = TestRunner::new(Config { cases: LAW_CASES, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn criterion_11() -> Check {
    // lower(lift(x)) = x
    law(arb_prop(), |x| {
        let lifted = lift().instantiate_term(&[&x]);
        let lowered = lower().instantiate_term(&[&lifted]);
        prop_assert_eq!(canonicalize(&lowered).unwrap(), canonicalize(&x).unwrap());
        Ok(())
    })?;
    // Lifted FA over lifted atoms equals the lift of FA, in both evaluation
    // orders and at two lifting levels.
    let fa = function_application();
    let mut lifted_fa = Vec::new();
    for sigma in [[1, 2], [2, 1]] {
        let once = lift_rule(&fa, &sigma).unwrap();
        for tau in [[1, 2], [2, 1]] {
            lifted_fa.push((2, lift_rule(&once, &tau).unwrap()));
        }
        lifted_fa.push((1, once));
    }
    let atoms = (
        prop::sample::select(vec!["Smoke", "Animate", "Love"]).prop_map(Term::constant),
        arb_entity(),
        0..lifted_fa.len(),
    );
    law(atoms, |(f, x, which)| {
        let (levels, rule) = &lifted_fa[which];
        let lift_n = |t: &Term| (0..*levels).fold(t.clone(), |acc, _| lift().instantiate_term(&[&acc]));
        let combined = rule.instantiate_term(&[&lift_n(&f), &lift_n(&x)]);
        let expected = lift_n(&fa.instantiate_term(&[&f, &x]));
        prop_assert_eq!(canonicalize(&combined).unwrap(), canonicalize(&expected).unwrap(), "rule {}", rule.name);
        Ok(())
    })?;
    // MGU symmetry: both directions agree on success, and the unifiers
    // identify the two types.
    law((arb_type(), arb_type()), |(a, b)| {
        match (unify(&a, &b), unify(&b, &a)) {
            (Ok(s1), Ok(s2)) => {
                prop_assert_eq!(s1.apply(&a), s1.apply(&b));
                prop_assert_eq!(s2.apply(&a), s2.apply(&b));
                prop_assert!(equal_up_to_renaming(&s1.apply(&a), &s2.apply(&a)));
            }
            (Err(_), Err(_)) => {}
            (l, r) => prop_assert!(false, "asymmetric: {:?} vs {:?}", l.is_ok(), r.is_ok()),
        }
        Ok(())
    })?;
    // Distinct arrow kinds never unify, whatever their components.
    let kinds = [Arrow::Fun, Arrow::Cont, Arrow::Ques];
    law((0..3usize, 1..3usize, arb_type(), arb_type(), arb_type(), arb_type()), |(i, shift, a, b, c, d)| {
        let (k1, k2) = (kinds[i], kinds[(i + shift) % 3]);
        let l = Type::Arrow(k1, Box::new(a), Box::new(b));
        let r = Type::Arrow(k2, Box::new(c), Box::new(d));
        prop_assert!(unify(&l, &r).is_err());
        Ok(())
    })
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("Alice loves Bob", criterion_1),
        ("quantifier readings", criterion_2),
        ("gapped clause", criterion_3),
        ("embedded question", criterion_4),
        ("in-situ whom, order 1", criterion_5),
        ("wide whom, order 2", criterion_6),
        ("Baker's sentence", criterion_7),
        ("rule counts", criterion_8),
        ("negative suite", criterion_9),
        ("no wide raised wh", criterion_10),
        ("algebraic laws", criterion_11),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(*check).unwrap_or_else(|p| {
            let message = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(message.unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("criterion {:>2} PASS  {name} ({elapsed:.2}s)", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name} ({elapsed:.2}s): {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
