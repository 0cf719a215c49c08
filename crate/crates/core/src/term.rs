//! Symbolic lambda terms: the carrier of every denotation.
//!
//! Terms use named binders. Substitution is capture-avoiding, reduction is
//! leftmost-outermost, and [`canonicalize`] produces the representative used
//! to decide whether two derivations denote the same reading.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Reduction bound used by [`canonicalize`].
pub const DEFAULT_FUEL: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
    Lam(String, Box<Term>),
    App(Box<Term>, Box<Term>),
    Forall(String, Box<Term>),
    Exists(String, Box<Term>),
    /// Presupposition guard `[cond] body`. Never reduced away.
    Guard(Box<Term>, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Binder {
    Lam,
    Forall,
    Exists,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("normalization did not finish within {0} steps")]
    FuelExhausted(usize),
    #[error("term syntax error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Term {
        Term::Const(name.into())
    }

    pub fn lam(bound: impl Into<String>, body: Term) -> Term {
        Term::Lam(bound.into(), Box::new(body))
    }

    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App(Box::new(fun), Box::new(arg))
    }

    /// Left-nested application `fun(a1)(a2)...`.
    pub fn apps(fun: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(fun, Term::app)
    }

    pub fn forall(bound: impl Into<String>, body: Term) -> Term {
        Term::Forall(bound.into(), Box::new(body))
    }

    pub fn exists(bound: impl Into<String>, body: Term) -> Term {
        Term::Exists(bound.into(), Box::new(body))
    }

    pub fn guard(cond: Term, body: Term) -> Term {
        Term::Guard(Box::new(cond), Box::new(body))
    }

    fn as_binder(&self) -> Option<(Binder, &str, &Term)> {
        match self {
            Term::Lam(x, b) => Some((Binder::Lam, x, b)),
            Term::Forall(x, b) => Some((Binder::Forall, x, b)),
            Term::Exists(x, b) => Some((Binder::Exists, x, b)),
            _ => None,
        }
    }

    fn rebuild(kind: Binder, bound: String, body: Term) -> Term {
        match kind {
            Binder::Lam => Term::Lam(bound, Box::new(body)),
            Binder::Forall => Term::Forall(bound, Box::new(body)),
            Binder::Exists => Term::Exists(bound, Box::new(body)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(&x.as_str()) {
                    out.insert(x.clone());
                }
            }
            Term::Const(_) => {}
            Term::App(f, a) | Term::Guard(f, a) => {
                f.collect_free(bound, out);
                a.collect_free(bound, out);
            }
            Term::Lam(x, b) | Term::Forall(x, b) | Term::Exists(x, b) => {
                bound.push(x);
                b.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn has_free(&self, v: &str) -> bool {
        match self {
            Term::Var(x) => x == v,
            Term::Const(_) => false,
            Term::App(f, a) | Term::Guard(f, a) => f.has_free(v) || a.has_free(v),
            Term::Lam(x, b) | Term::Forall(x, b) | Term::Exists(x, b) => x != v && b.has_free(v),
        }
    }

    /// Every variable name appearing anywhere, bound or free.
    pub fn all_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::Const(_) => {}
            Term::App(f, a) | Term::Guard(f, a) => {
                f.collect_names(out);
                a.collect_names(out);
            }
            Term::Lam(x, b) | Term::Forall(x, b) | Term::Exists(x, b) => {
                out.insert(x.clone());
                b.collect_names(out);
            }
        }
    }

    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_constants(&mut out);
        out
    }

    fn collect_constants(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(_) => {}
            Term::Const(c) => {
                out.insert(c.clone());
            }
            Term::App(f, a) | Term::Guard(f, a) => {
                f.collect_constants(out);
                a.collect_constants(out);
            }
            Term::Lam(_, b) | Term::Forall(_, b) | Term::Exists(_, b) => b.collect_constants(out),
        }
    }

    pub fn guard_count(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) => 0,
            Term::App(f, a) => f.guard_count() + a.guard_count(),
            Term::Guard(c, b) => 1 + c.guard_count() + b.guard_count(),
            Term::Lam(_, b) | Term::Forall(_, b) | Term::Exists(_, b) => b.guard_count(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) => 1,
            Term::App(f, a) | Term::Guard(f, a) => 1 + f.size() + a.size(),
            Term::Lam(_, b) | Term::Forall(_, b) | Term::Exists(_, b) => 1 + b.size(),
        }
    }
}

/// First of `base`, `base'`, `base''`, ... not contained in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut name = base.to_string();
    while avoid.contains(&name) {
        name.push('\'');
    }
    name
}

/// Capture-avoiding substitution of `s` for the free occurrences of `v` in `t`.
pub fn substitute(t: &Term, v: &str, s: &Term) -> Term {
    let fv = s.free_vars();
    subst_with(t, v, s, &fv)
}

fn subst_with(t: &Term, v: &str, s: &Term, s_free: &BTreeSet<String>) -> Term {
    match t {
        Term::Var(x) if x == v => s.clone(),
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::App(f, a) => Term::app(subst_with(f, v, s, s_free), subst_with(a, v, s, s_free)),
        Term::Guard(c, b) => Term::guard(subst_with(c, v, s, s_free), subst_with(b, v, s, s_free)),
        _ => {
            let (kind, x, body) = t.as_binder().expect("binder");
            if x == v || !body.has_free(v) {
                return t.clone();
            }
            if s_free.contains(x) {
                let mut avoid = s_free.clone();
                avoid.extend(body.free_vars());
                avoid.insert(v.to_string());
                let renamed = fresh_name(x, &avoid);
                let body = subst_with(body, x, &Term::Var(renamed.clone()), &BTreeSet::from([renamed.clone()]));
                Term::rebuild(kind, renamed, subst_with(&body, v, s, s_free))
            } else {
                Term::rebuild(kind, x.to_string(), subst_with(body, v, s, s_free))
            }
        }
    }
}

/// One leftmost-outermost β-step, or `None` when `t` is normal.
fn beta_step(t: &Term) -> Option<Term> {
    match t {
        Term::App(f, a) => {
            if let Term::Lam(x, body) = f.as_ref() {
                return Some(substitute(body, x, a));
            }
            if let Some(f2) = beta_step(f) {
                return Some(Term::App(Box::new(f2), a.clone()));
            }
            beta_step(a).map(|a2| Term::App(f.clone(), Box::new(a2)))
        }
        Term::Guard(c, b) => {
            if let Some(c2) = beta_step(c) {
                return Some(Term::Guard(Box::new(c2), b.clone()));
            }
            beta_step(b).map(|b2| Term::Guard(c.clone(), Box::new(b2)))
        }
        Term::Lam(_, _) | Term::Forall(_, _) | Term::Exists(_, _) => {
            let (kind, x, body) = t.as_binder().expect("binder");
            beta_step(body).map(|b2| Term::rebuild(kind, x.to_string(), b2))
        }
        Term::Var(_) | Term::Const(_) => None,
    }
}

pub fn beta_normalize(t: &Term, fuel: usize) -> Result<Term, TermError> {
    assert!(fuel >= 1, "fuel must be positive");
    let mut current = t.clone();
    let mut steps = 0;
    while let Some(next) = beta_step(&current) {
        steps += 1;
        if steps > fuel {
            return Err(TermError::FuelExhausted(fuel));
        }
        current = next;
    }
    Ok(current)
}

/// Contracts every `\x. f(x)` with `x` not free in `f`, innermost first.
pub fn eta_normalize(t: &Term) -> Term {
    match t {
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::App(f, a) => Term::app(eta_normalize(f), eta_normalize(a)),
        Term::Guard(c, b) => Term::guard(eta_normalize(c), eta_normalize(b)),
        Term::Lam(x, b) => {
            let body = eta_normalize(b);
            if let Term::App(f, a) = &body {
                if matches!(a.as_ref(), Term::Var(y) if y == x) && !f.has_free(x) {
                    return (**f).clone();
                }
            }
            Term::lam(x.clone(), body)
        }
        Term::Forall(x, b) => Term::forall(x.clone(), eta_normalize(b)),
        Term::Exists(x, b) => Term::exists(x.clone(), eta_normalize(b)),
    }
}

pub fn alpha_equal(a: &Term, b: &Term) -> bool {
    fn go<'a>(a: &'a Term, b: &'a Term, env: &mut Vec<(&'a str, &'a str)>) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                let lx = env.iter().rposition(|(l, _)| *l == x);
                let ry = env.iter().rposition(|(_, r)| *r == y);
                match (lx, ry) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (Term::Const(x), Term::Const(y)) => x == y,
            (Term::App(f1, a1), Term::App(f2, a2)) | (Term::Guard(f1, a1), Term::Guard(f2, a2)) => {
                go(f1, f2, env) && go(a1, a2, env)
            }
            _ => match (a.as_binder(), b.as_binder()) {
                (Some((k1, x, b1)), Some((k2, y, b2))) if k1 == k2 => {
                    env.push((x, y));
                    let eq = go(b1, b2, env);
                    env.pop();
                    eq
                }
                _ => false,
            },
        }
    }
    go(a, b, &mut Vec::new())
}

/// Renames every binder to `v0`, `v1`, ... in preorder, skipping names
/// that occur free in `t`.
pub fn rename_binders(t: &Term) -> Term {
    struct Renamer {
        free: BTreeSet<String>,
        next: usize,
    }
    impl Renamer {
        fn fresh(&mut self) -> String {
            loop {
                let name = format!("v{}", self.next);
                self.next += 1;
                if !self.free.contains(&name) {
                    return name;
                }
            }
        }
        fn go(&mut self, t: &Term, env: &mut Vec<(String, String)>) -> Term {
            match t {
                Term::Var(x) => match env.iter().rev().find(|(old, _)| old == x) {
                    Some((_, new)) => Term::Var(new.clone()),
                    None => t.clone(),
                },
                Term::Const(_) => t.clone(),
                Term::App(f, a) => {
                    let f = self.go(f, env);
                    Term::app(f, self.go(a, env))
                }
                Term::Guard(c, b) => {
                    let c = self.go(c, env);
                    Term::guard(c, self.go(b, env))
                }
                _ => {
                    let (kind, x, body) = t.as_binder().expect("binder");
                    let new = self.fresh();
                    env.push((x.to_string(), new.clone()));
                    let body = self.go(body, env);
                    env.pop();
                    Term::rebuild(kind, new, body)
                }
            }
        }
    }
    Renamer { free: t.free_vars(), next: 0 }.go(t, &mut Vec::new())
}

/// βη-normal form with deterministic binder names; structural equality of
/// the results is reading identity.
pub fn canonicalize(t: &Term) -> Result<Term, TermError> {
    let beta = beta_normalize(t, DEFAULT_FUEL)?;
    Ok(rename_binders(&eta_normalize(&beta)))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) | Term::Const(x) => write!(f, "{x}"),
            Term::Lam(x, b) => write!(f, "\\{x}. {b}"),
            Term::Forall(x, b) => write!(f, "forall {x}. {b}"),
            Term::Exists(x, b) => write!(f, "exists {x}. {b}"),
            Term::Guard(c, b) => write!(f, "[{c}] {b}"),
            Term::App(_, _) => {
                let mut args = Vec::new();
                let mut head = self;
                while let Term::App(fun, arg) = head {
                    args.push(arg.as_ref());
                    head = fun;
                }
                match head {
                    Term::Var(_) | Term::Const(_) => write!(f, "{head}")?,
                    _ => write!(f, "({head})")?,
                }
                for arg in args.iter().rev() {
                    write!(f, "({arg})")?;
                }
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Surface syntax parser

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Lambda,
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Ident(String),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, TermError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '\\' | 'λ' => Tok::Lambda,
            '.' => Tok::Dot,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            c if c.is_alphanumeric() || c == '_' => {
                let mut name = String::new();
                while i < chars.len() {
                    let c = chars[i].1;
                    if c.is_alphanumeric() || c == '_' || c == '\'' {
                        name.push(c);
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push((pos, Tok::Ident(name)));
                continue;
            }
            other => {
                return Err(TermError::Parse { offset: pos, message: format!("unexpected character `{other}`") })
            }
        };
        out.push((pos, tok));
        i += 1;
    }
    Ok(out)
}

struct TermParser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl TermParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, TermError> {
        Err(TermError::Parse { offset: self.offset(), message: message.into() })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), TermError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {tok:?}"))
        }
    }

    fn ident(&mut self) -> Result<String, TermError> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn starts_binder(&self) -> bool {
        match self.peek() {
            Some(Tok::Lambda) | Some(Tok::LBracket) => true,
            Some(Tok::Ident(k)) => k == "forall" || k == "exists",
            _ => false,
        }
    }

    fn term(&mut self) -> Result<Term, TermError> {
        if self.starts_binder() {
            return self.binder();
        }
        let mut t = self.atom()?;
        loop {
            match self.peek() {
                Some(Tok::Ident(_)) | Some(Tok::LParen) if !self.starts_binder() => {
                    let arg = self.atom()?;
                    t = Term::app(t, arg);
                }
                _ if self.starts_binder() => {
                    let arg = self.binder()?;
                    return Ok(Term::app(t, arg));
                }
                _ => return Ok(t),
            }
        }
    }

    fn binder(&mut self) -> Result<Term, TermError> {
        match self.peek().cloned() {
            Some(Tok::Lambda) => {
                self.pos += 1;
                let mut names = vec![self.var_name()?];
                while let Some(Tok::Ident(_)) = self.peek() {
                    names.push(self.var_name()?);
                }
                self.expect(Tok::Dot)?;
                let body = self.term()?;
                Ok(names.into_iter().rev().fold(body, |b, x| Term::lam(x, b)))
            }
            Some(Tok::LBracket) => {
                self.pos += 1;
                let cond = self.term()?;
                self.expect(Tok::RBracket)?;
                let body = self.term()?;
                Ok(Term::guard(cond, body))
            }
            Some(Tok::Ident(k)) if k == "forall" || k == "exists" => {
                self.pos += 1;
                let x = self.var_name()?;
                self.expect(Tok::Dot)?;
                let body = self.term()?;
                Ok(if k == "forall" { Term::forall(x, body) } else { Term::exists(x, body) })
            }
            _ => self.err("expected binder"),
        }
    }

    fn var_name(&mut self) -> Result<String, TermError> {
        let name = self.ident()?;
        if is_constant_name(&name) {
            return Err(TermError::Parse {
                offset: self.toks[self.pos - 1].0,
                message: format!("cannot bind constant `{name}`"),
            });
        }
        Ok(name)
    }

    fn atom(&mut self) -> Result<Term, TermError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::Ident(name)) if name != "forall" && name != "exists" => {
                self.pos += 1;
                Ok(if is_constant_name(&name) { Term::Const(name) } else { Term::Var(name) })
            }
            _ => self.err("expected a term"),
        }
    }
}

fn is_constant_name(name: &str) -> bool {
    name.chars().next().is_some_and(char::is_uppercase)
}

/// Parses the surface syntax: `\x. body`, `forall x. body`, `exists x. body`,
/// `[cond] body`, left-associative juxtaposition, capitalized constants.
pub fn parse_term(src: &str) -> Result<Term, TermError> {
    let toks = tokenize(src)?;
    let mut p = TermParser { toks, pos: 0, end: src.len() };
    let t = p.term()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(t)
}

impl std::str::FromStr for Term {
    type Err = TermError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_term(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    #[test]
    fn substitute_direct() {
        let t = Term::app(Term::var("c"), Term::constant("Alice"));
        let got = substitute(&t, "c", &p("\\x. x"));
        assert_eq!(got, Term::app(p("\\x. x"), Term::constant("Alice")));
    }

    #[test]
    fn substitute_renames_binder() {
        let got = substitute(&p("\\x. c"), "c", &Term::var("x"));
        assert_eq!(got, Term::lam("x'", Term::var("x")));
    }

    #[test]
    fn substitute_skips_bound() {
        let t = p("\\x. x");
        assert_eq!(substitute(&t, "x", &Term::constant("Bob")), t);
    }

    #[test]
    fn beta_examples() {
        let t = p("(\\c. forall x. c(Love(x)(Alice)))(\\y. y)");
        assert_eq!(beta_normalize(&t, 100).unwrap(), p("forall x. Love(x)(Alice)"));
        let t = p("(\\c. c(Bob))(\\x. x)");
        assert_eq!(beta_normalize(&t, 100).unwrap(), Term::constant("Bob"));
        let t = p("(\\c. \\x. c(Buy(x)))(\\z. z)(Bob)");
        assert_eq!(beta_normalize(&t, 100).unwrap(), p("Buy(Bob)"));
    }

    #[test]
    fn beta_fuel_exhausted() {
        let omega = p("(\\x. x x)(\\x. x x)");
        assert_eq!(beta_normalize(&omega, 50), Err(TermError::FuelExhausted(50)));
    }

    #[test]
    fn beta_keeps_guards() {
        let t = p("(\\c. \\x. [Not(Animate(x))] c(x))(\\y. Buy(y)(We))");
        let n = beta_normalize(&t, 100).unwrap();
        assert_eq!(n, p("\\x. [Not(Animate(x))] Buy(x)(We)"));
        assert_eq!(n.guard_count(), 1);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_normalize(&p("\\c. f(c)")), Term::var("f"));
        let blocked = p("\\c. c(c)");
        assert_eq!(eta_normalize(&blocked), blocked);
        let inner = p("\\c. \\x. c(x)(x)");
        assert_eq!(eta_normalize(&inner), inner);
    }

    #[test]
    fn alpha_examples() {
        assert!(alpha_equal(&p("\\x. x"), &p("\\y. y")));
        assert!(alpha_equal(&p("\\x. \\y. x(y)"), &p("\\y. \\x. y(x)")));
        assert!(!alpha_equal(&p("\\x. [Animate(x)] x"), &p("\\x. [Not(Animate(x))] x")));
        assert!(!alpha_equal(&p("\\x. y"), &p("\\y. y")));
        assert!(!alpha_equal(&p("\\x. x"), &p("forall x. x")));
    }

    #[test]
    fn canonicalize_examples() {
        let t = p("(\\c. c(Alice))(\\x. x)");
        assert_eq!(canonicalize(&t).unwrap(), Term::constant("Alice"));
        let t = p("\\a. \\b. a(b)");
        // η-contracts all the way to the identity
        assert_eq!(canonicalize(&t).unwrap(), p("\\v0. v0"));
        let t = p("\\a. \\b. b(a)");
        assert_eq!(canonicalize(&t).unwrap(), p("\\v0. \\v1. v1(v0)"));
    }

    #[test]
    fn renaming_avoids_free_names() {
        let t = p("\\a. a(v0)");
        assert_eq!(rename_binders(&t), p("\\v1. v1(v0)"));
    }

    #[test]
    fn print_parse_roundtrip() {
        for src in [
            "\\v0. [Animate(v0)] \\v1. [Not(Animate(v1))] For(v0)(Buy(v1))(We)",
            "forall x. exists y. Love(y)(x)",
            "(\\c. c)(\\x. x)",
            "f(\\x. x)(y)",
        ] {
            let t = p(src);
            assert_eq!(t.to_string(), src);
            assert_eq!(p(&t.to_string()), t);
        }
    }

    #[test]
    fn juxtaposition_and_call_syntax_agree() {
        assert_eq!(p("Love Bob Alice"), p("Love(Bob)(Alice)"));
        assert_eq!(p("\\c. \\x. [Not (Animate x)] c x"), p("\\c. \\x. [Not(Animate(x))] c(x)"));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_term("\\X. X"), Err(TermError::Parse { .. })));
        assert!(matches!(parse_term("(x"), Err(TermError::Parse { .. })));
        assert!(matches!(parse_term("x )"), Err(TermError::Parse { .. })));
    }
}
