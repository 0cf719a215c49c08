//! Checks a term against a declared type.
//!
//! λ is shared by all three arrow kinds, so the kind of an abstraction can
//! only come from the type it is checked against. Variables of the declared
//! type are rigid; constants may have several declared types and each one
//! is tried.

use std::collections::HashMap;

use thiserror::Error;

use crate::lexicon::Signature;
use crate::term::{beta_normalize, Term, TermError, DEFAULT_FUEL};
use crate::types::{Type, TypeScheme};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckError {
    #[error("`{term}` is ill-typed: {reason}")]
    IllTyped { term: String, reason: String },
    #[error(transparent)]
    Term(#[from] TermError),
}

const META: char = '?';

/// Substitution over checker metavariables only.
#[derive(Clone, Default)]
struct Metas {
    map: HashMap<String, Type>,
    next: usize,
}

impl Metas {
    fn fresh(&mut self) -> Type {
        self.next += 1;
        Type::Var(format!("{META}{}", self.next))
    }

    fn resolve(&self, t: &Type) -> Type {
        match t {
            Type::Var(v) if v.starts_with(META) => match self.map.get(v) {
                Some(bound) => self.resolve(bound),
                None => t.clone(),
            },
            Type::Arrow(k, a, b) => Type::Arrow(*k, Box::new(self.resolve(a)), Box::new(self.resolve(b))),
            _ => t.clone(),
        }
    }

    fn unify(&mut self, a: &Type, b: &Type) -> bool {
        let a = self.resolve(a);
        let b = self.resolve(b);
        match (&a, &b) {
            (Type::Var(x), Type::Var(y)) if x == y => true,
            (Type::Var(x), _) if x.starts_with(META) => {
                if b.occurs(x) {
                    return false;
                }
                self.map.insert(x.clone(), b.clone());
                true
            }
            (_, Type::Var(y)) if y.starts_with(META) => {
                if a.occurs(y) {
                    return false;
                }
                self.map.insert(y.clone(), a.clone());
                true
            }
            (Type::Base(x), Type::Base(y)) => x == y,
            (Type::Arrow(k1, a1, b1), Type::Arrow(k2, a2, b2)) => k1 == k2 && self.unify(a1, a2) && self.unify(b1, b2),
            _ => false,
        }
    }
}

struct Checker<'a> {
    signature: &'a Signature,
    reason: Option<String>,
}

type Env<'t> = Vec<(&'t str, Type)>;

impl<'a> Checker<'a> {
    fn fail(&mut self, reason: impl FnOnce() -> String) {
        if self.reason.is_none() {
            self.reason = Some(reason());
        }
    }

    fn check<'t>(&mut self, env: &mut Env<'t>, term: &'t Term, expected: &Type, metas: Metas) -> Vec<Metas> {
        match term {
            Term::Lam(x, body) => match metas.resolve(expected) {
                Type::Arrow(_, dom, cod) => {
                    env.push((x, *dom));
                    let out = self.check(env, body, &cod, metas);
                    env.pop();
                    out
                }
                other => {
                    self.fail(|| format!("abstraction `{term}` checked against non-arrow type `{other}`"));
                    vec![]
                }
            },
            Term::Forall(x, body) | Term::Exists(x, body) => {
                let mut metas = metas;
                if !metas.unify(expected, &Type::T) {
                    self.fail(|| format!("quantified formula `{term}` has type t, not `{expected}`"));
                    return vec![];
                }
                env.push((x, Type::E));
                let out = self.check(env, body, &Type::T, metas);
                env.pop();
                out
            }
            Term::Guard(cond, body) => {
                let mut out = Vec::new();
                for m in self.check(env, cond, &Type::T, metas) {
                    out.extend(self.check(env, body, expected, m));
                }
                out
            }
            _ => {
                let mut out = Vec::new();
                for (ty, mut m) in self.infer(env, term, metas) {
                    if m.unify(&ty, expected) {
                        out.push(m);
                    } else {
                        let (got, want) = (m.resolve(&ty), m.resolve(expected));
                        self.fail(|| format!("`{term}` has type `{got}` where `{want}` is required"));
                    }
                }
                out
            }
        }
    }

    fn infer<'t>(&mut self, env: &mut Env<'t>, term: &'t Term, metas: Metas) -> Vec<(Type, Metas)> {
        match term {
            Term::Var(x) => match env.iter().rev().find(|(name, _)| *name == x) {
                Some((_, ty)) => vec![(ty.clone(), metas)],
                None => {
                    self.fail(|| format!("free variable `{x}`"));
                    vec![]
                }
            },
            Term::Const(c) => match self.signature.get(c) {
                Some(schemes) if !schemes.is_empty() => schemes
                    .iter()
                    .map(|s| {
                        let mut m = metas.clone();
                        let map: HashMap<String, String> = s
                            .quantified
                            .iter()
                            .map(|v| match m.fresh() {
                                Type::Var(name) => (v.clone(), name),
                                _ => unreachable!(),
                            })
                            .collect();
                        (s.body.rename(&map), m)
                    })
                    .collect(),
                Some(_) => {
                    let mut m = metas;
                    let t = m.fresh();
                    vec![(t, m)]
                }
                None => {
                    self.fail(|| format!("undeclared constant `{c}`"));
                    vec![]
                }
            },
            Term::App(f, a) => {
                let mut out = Vec::new();
                for (ft, m) in self.infer(env, f, metas) {
                    match m.resolve(&ft) {
                        Type::Arrow(_, dom, cod) => {
                            for m2 in self.check(env, a, &dom, m) {
                                out.push((*cod.clone(), m2));
                            }
                        }
                        other => self.fail(|| format!("`{f}` of type `{other}` is applied but is not a function")),
                    }
                }
                out
            }
            Term::Forall(..) | Term::Exists(..) => {
                self.check(env, term, &Type::T, metas).into_iter().map(|m| (Type::T, m)).collect()
            }
            Term::Guard(cond, body) => {
                let mut out = Vec::new();
                for m in self.check(env, cond, &Type::T, metas) {
                    out.extend(self.infer(env, body, m));
                }
                out
            }
            Term::Lam(..) => {
                self.fail(|| format!("cannot infer the arrow kind of `{term}`"));
                vec![]
            }
        }
    }
}

/// Verifies that closed `term` has type `declared` (whose variables are
/// treated as universally quantified) and returns the checked scheme.
pub fn check_term(term: &Term, declared: &Type, signature: &Signature) -> Result<TypeScheme, CheckError> {
    let normal = beta_normalize(term, DEFAULT_FUEL)?;
    if let Some(v) = normal.free_vars().into_iter().next() {
        return Err(CheckError::IllTyped { term: term.to_string(), reason: format!("free variable `{v}`") });
    }
    let mut checker = Checker { signature, reason: None };
    let ok = !checker.check(&mut Vec::new(), &normal, declared, Metas::default()).is_empty();
    if ok {
        Ok(TypeScheme::generalize(declared.clone()))
    } else {
        Err(CheckError::IllTyped {
            term: term.to_string(),
            reason: checker.reason.unwrap_or_else(|| format!("does not have type `{declared}`")),
        })
    }
}

/// Best-effort type of a closed term without a declared type: succeeds when
/// the term contains no λ in an inference position.
pub fn infer_term(term: &Term, signature: &Signature) -> Option<Type> {
    let normal = beta_normalize(term, DEFAULT_FUEL).ok()?;
    let mut checker = Checker { signature, reason: None };
    let results = checker.infer(&mut Vec::new(), &normal, Metas::default());
    results.first().map(|(t, m)| m.resolve(t))
}
