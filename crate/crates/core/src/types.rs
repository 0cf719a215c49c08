//! Types over `e` and `t` with three distinct arrows: functions (`->`),
//! continuations (`#>`) and questions (`?>`).
//!
//! `a{g|g'}` is printing shorthand for `(a #> g) -> g'`, the type of a value
//! that acts locally like an `a` while turning answer type `g` into `g'`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    E,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arrow {
    /// `->`
    Fun,
    /// `#>`
    Cont,
    /// `?>`
    Ques,
}

impl Arrow {
    pub fn symbol(self) -> &'static str {
        match self {
            Arrow::Fun => "->",
            Arrow::Cont => "#>",
            Arrow::Ques => "?>",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Base(Base),
    Var(String),
    Arrow(Arrow, Box<Type>, Box<Type>),
}

impl Type {
    pub const E: Type = Type::Base(Base::E);
    pub const T: Type = Type::Base(Base::T);

    pub fn var(name: impl Into<String>) -> Type {
        Type::Var(name.into())
    }

    pub fn fun(dom: Type, cod: Type) -> Type {
        Type::Arrow(Arrow::Fun, Box::new(dom), Box::new(cod))
    }

    pub fn cont(value: Type, answer: Type) -> Type {
        Type::Arrow(Arrow::Cont, Box::new(value), Box::new(answer))
    }

    pub fn ques(asked: Type, body: Type) -> Type {
        Type::Arrow(Arrow::Ques, Box::new(asked), Box::new(body))
    }

    /// `value{incoming|outgoing}`, i.e. `(value #> incoming) -> outgoing`.
    pub fn lifted(value: Type, incoming: Type, outgoing: Type) -> Type {
        Type::fun(Type::cont(value, incoming), outgoing)
    }

    /// Splits `(a #> g) -> g'` into `(a, g, g')`.
    pub fn as_lifted(&self) -> Option<(&Type, &Type, &Type)> {
        match self {
            Type::Arrow(Arrow::Fun, dom, out) => match dom.as_ref() {
                Type::Arrow(Arrow::Cont, value, inc) => Some((value, inc, out)),
                _ => None,
            },
            _ => None,
        }
    }

    /// `t`, a variable, or `α ⇀ ρ` / `α ⇝ ρ` with `ρ` again a result type.
    pub fn is_result_type(&self) -> bool {
        match self {
            Type::Base(Base::T) | Type::Var(_) => true,
            Type::Arrow(Arrow::Cont | Arrow::Ques, _, r) => r.is_result_type(),
            _ => false,
        }
    }

    /// Every answer type inside `self` is a result type.
    pub fn answers_are_results(&self) -> bool {
        if let Some((value, inc, out)) = self.as_lifted() {
            return inc.is_result_type()
                && out.is_result_type()
                && value.answers_are_results()
                && inc.answers_are_results()
                && out.answers_are_results();
        }
        match self {
            Type::Arrow(_, a, b) => a.answers_are_results() && b.answers_are_results(),
            _ => true,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Type::Base(_) | Type::Var(_) => 1,
            Type::Arrow(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Type::Base(_) => {}
            Type::Var(v) => {
                out.insert(v.clone());
            }
            Type::Arrow(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Variables in order of first occurrence, left to right.
    pub fn vars_in_order(&self, out: &mut Vec<String>) {
        match self {
            Type::Base(_) => {}
            Type::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Type::Arrow(_, a, b) => {
                a.vars_in_order(out);
                b.vars_in_order(out);
            }
        }
    }

    pub fn occurs(&self, v: &str) -> bool {
        match self {
            Type::Base(_) => false,
            Type::Var(x) => x == v,
            Type::Arrow(_, a, b) => a.occurs(v) || b.occurs(v),
        }
    }

    pub fn rename(&self, map: &HashMap<String, String>) -> Type {
        match self {
            Type::Base(_) => self.clone(),
            Type::Var(v) => Type::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
            Type::Arrow(k, a, b) => Type::Arrow(*k, Box::new(a.rename(map)), Box::new(b.rename(map))),
        }
    }

    pub fn shorthand(&self) -> ShorthandType<'_> {
        ShorthandType(self)
    }
}

/// Name of the `i`-th canonical type variable: `a b c d f g ...`, skipping
/// the base type names `e` and `t`.
pub fn canonical_var_name(i: usize) -> String {
    const LETTERS: &[u8] = b"abcdfghijklmnopqrsuvwxyz";
    let letter = LETTERS[i % LETTERS.len()] as char;
    match i / LETTERS.len() {
        0 => letter.to_string(),
        n => format!("{letter}{n}"),
    }
}

/// Renames the variables of all `types` jointly, in order of first
/// occurrence, to the canonical names.
pub fn canonical_renaming<'a>(types: impl IntoIterator<Item = &'a Type>) -> HashMap<String, String> {
    let mut order = Vec::new();
    for t in types {
        t.vars_in_order(&mut order);
    }
    order.into_iter().enumerate().map(|(i, v)| (v, canonical_var_name(i))).collect()
}

pub fn canonical_type(t: &Type) -> Type {
    t.rename(&canonical_renaming([t]))
}

/// Renames every variable of `t` by appending `suffix`.
pub fn rename_apart(t: &Type, suffix: &str) -> Type {
    match t {
        Type::Base(_) => t.clone(),
        Type::Var(v) => Type::Var(format!("{v}{suffix}")),
        Type::Arrow(k, a, b) => Type::Arrow(*k, Box::new(rename_apart(a, suffix)), Box::new(rename_apart(b, suffix))),
    }
}

fn fmt_type(t: &Type, shorthand: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if shorthand {
        if let Some((value, inc, out)) = t.as_lifted() {
            fmt_operand(value, shorthand, f)?;
            f.write_str("{")?;
            fmt_type(inc, shorthand, f)?;
            f.write_str("|")?;
            fmt_type(out, shorthand, f)?;
            return f.write_str("}");
        }
    }
    match t {
        Type::Base(Base::E) => f.write_str("e"),
        Type::Base(Base::T) => f.write_str("t"),
        Type::Var(v) => f.write_str(v),
        Type::Arrow(k, a, b) => {
            fmt_operand(a, shorthand, f)?;
            write!(f, " {} ", k.symbol())?;
            fmt_type(b, shorthand, f)
        }
    }
}

fn fmt_operand(t: &Type, shorthand: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let atomic = match t {
        Type::Arrow(..) => shorthand && t.as_lifted().is_some(),
        _ => true,
    };
    if atomic {
        fmt_type(t, shorthand, f)
    } else {
        f.write_str("(")?;
        fmt_type(t, shorthand, f)?;
        f.write_str(")")
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_type(self, false, f)
    }
}

pub struct ShorthandType<'a>(&'a Type);

impl fmt::Display for ShorthandType<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_type(self.0, true, f)
    }
}

pub fn print_type(t: &Type, shorthand: bool) -> String {
    if shorthand {
        t.shorthand().to_string()
    } else {
        t.to_string()
    }
}

// ---------------------------------------------------------------------------
// Schemes and substitutions

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TypeScheme {
    pub quantified: BTreeSet<String>,
    pub body: Type,
}

impl TypeScheme {
    /// Quantifies every free variable of `body`.
    pub fn generalize(body: Type) -> TypeScheme {
        TypeScheme { quantified: body.free_vars(), body }
    }

    pub fn mono(body: Type) -> TypeScheme {
        TypeScheme { quantified: BTreeSet::new(), body }
    }

    pub fn instantiate(&self, supply: &mut NameSupply) -> Type {
        let map: HashMap<String, String> =
            self.quantified.iter().map(|v| (v.clone(), supply.fresh(v))).collect();
        self.body.rename(&map)
    }
}

impl fmt::Display for TypeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.quantified.is_empty() {
            let vars: Vec<&str> = self.quantified.iter().map(String::as_str).collect();
            write!(f, "forall {}. ", vars.join(" "))?;
        }
        write!(f, "{}", self.body)
    }
}

/// Source of fresh type-variable names `<base>_<n>`.
#[derive(Clone, Debug, Default)]
pub struct NameSupply {
    next: usize,
}

impl NameSupply {
    pub fn new() -> NameSupply {
        NameSupply::default()
    }

    /// Starts numbering at `start`, so disjoint ranges can be handed out.
    pub fn starting_at(start: usize) -> NameSupply {
        NameSupply { next: start }
    }

    pub fn fresh(&mut self, base: &str) -> String {
        let stem = match base.rsplit_once('_') {
            Some((stem, n)) if n.chars().all(|c| c.is_ascii_digit()) && !n.is_empty() => stem,
            _ => base,
        };
        let name = format!("{stem}_{}", self.next);
        self.next += 1;
        name
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("cannot unify `{0}` with `{1}`")]
    Mismatch(Type, Type),
    #[error("type variable `{0}` occurs in `{1}`")]
    OccursCheck(String, Type),
    #[error("type syntax error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
}

/// Idempotent map from type variables to types.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<String, Type>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn get(&self, v: &str) -> Option<&Type> {
        self.map.get(v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Type)> {
        self.map.iter()
    }

    pub fn apply(&self, t: &Type) -> Type {
        if self.map.is_empty() {
            return t.clone();
        }
        match t {
            Type::Base(_) => t.clone(),
            Type::Var(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Type::Arrow(k, a, b) => Type::Arrow(*k, Box::new(self.apply(a)), Box::new(self.apply(b))),
        }
    }

    fn bind(&mut self, v: &str, t: Type) -> Result<(), TypeError> {
        if let Type::Var(w) = &t {
            if w == v {
                return Ok(());
            }
        }
        if t.occurs(v) {
            return Err(TypeError::OccursCheck(v.to_string(), t));
        }
        let single = Substitution { map: BTreeMap::from([(v.to_string(), t.clone())]) };
        for value in self.map.values_mut() {
            *value = single.apply(value);
        }
        self.map.insert(v.to_string(), t);
        Ok(())
    }

    /// Extends `self` to a most general unifier of `a` and `b` as well.
    pub fn unify(&mut self, a: &Type, b: &Type) -> Result<(), TypeError> {
        let a = self.apply(a);
        let b = self.apply(b);
        self.unify_resolved(&a, &b)
    }

    fn unify_resolved(&mut self, a: &Type, b: &Type) -> Result<(), TypeError> {
        match (a, b) {
            (Type::Var(x), _) => self.bind(x, b.clone()),
            (_, Type::Var(y)) => self.bind(y, a.clone()),
            (Type::Base(x), Type::Base(y)) if x == y => Ok(()),
            (Type::Arrow(k1, a1, b1), Type::Arrow(k2, a2, b2)) if k1 == k2 => {
                self.unify_resolved(a1, a2)?;
                let b1 = self.apply(b1);
                let b2 = self.apply(b2);
                self.unify_resolved(&b1, &b2)
            }
            _ => Err(TypeError::Mismatch(a.clone(), b.clone())),
        }
    }
}

pub fn unify(a: &Type, b: &Type) -> Result<Substitution, TypeError> {
    let mut s = Substitution::new();
    s.unify(a, b)?;
    Ok(s)
}

/// One-way matching: binds variables of `pattern` only; variables of
/// `target` are rigid.
pub fn matches(pattern: &Type, target: &Type) -> bool {
    fn go(p: &Type, t: &Type, env: &mut HashMap<String, Type>) -> bool {
        match (p, t) {
            (Type::Var(v), _) => match env.get(v) {
                Some(bound) => bound == t,
                None => {
                    env.insert(v.clone(), t.clone());
                    true
                }
            },
            (Type::Base(x), Type::Base(y)) => x == y,
            (Type::Arrow(k1, a1, b1), Type::Arrow(k2, a2, b2)) => k1 == k2 && go(a1, a2, env) && go(b1, b2, env),
            _ => false,
        }
    }
    go(pattern, target, &mut HashMap::new())
}

/// Equal up to a bijective renaming of variables.
pub fn equal_up_to_renaming(a: &Type, b: &Type) -> bool {
    canonical_type(a) == canonical_type(b)
}

// ---------------------------------------------------------------------------
// Surface syntax parser

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Arrow(Arrow),
    LParen,
    RParen,
    LBrace,
    Bar,
    RBrace,
    Ident(String),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, TypeError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some((pos, c)) = it.next() {
        let tok = match c {
            c if c.is_whitespace() => continue,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '|' => Tok::Bar,
            '}' => Tok::RBrace,
            '→' => Tok::Arrow(Arrow::Fun),
            '⇀' => Tok::Arrow(Arrow::Cont),
            '⇝' => Tok::Arrow(Arrow::Ques),
            '-' | '#' | '?' => {
                if it.next_if(|&(_, c)| c == '>').is_none() {
                    return Err(TypeError::Parse { offset: pos, message: format!("expected `>` after `{c}`") });
                }
                Tok::Arrow(match c {
                    '-' => Arrow::Fun,
                    '#' => Arrow::Cont,
                    _ => Arrow::Ques,
                })
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut name = c.to_string();
                while let Some((_, c)) = it.next_if(|&(_, c)| c.is_alphanumeric() || c == '_' || c == '\'') {
                    name.push(c);
                }
                Tok::Ident(name)
            }
            other => {
                return Err(TypeError::Parse { offset: pos, message: format!("unexpected character `{other}`") })
            }
        };
        out.push((pos, tok));
    }
    Ok(out)
}

struct TypeParser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl TypeParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn err<T>(&self, message: &str) -> Result<T, TypeError> {
        let offset = self.toks.get(self.pos).map_or(self.end, |(o, _)| *o);
        Err(TypeError::Parse { offset, message: message.to_string() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), TypeError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(what)
        }
    }

    fn arrow_type(&mut self) -> Result<Type, TypeError> {
        let lhs = self.postfix()?;
        if let Some(Tok::Arrow(k)) = self.peek() {
            let k = *k;
            self.pos += 1;
            let rhs = self.arrow_type()?;
            return Ok(Type::Arrow(k, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<Type, TypeError> {
        let mut t = self.atom()?;
        while self.peek() == Some(&Tok::LBrace) {
            self.pos += 1;
            let inc = self.arrow_type()?;
            self.expect(Tok::Bar, "expected `|`")?;
            let out = self.arrow_type()?;
            self.expect(Tok::RBrace, "expected `}`")?;
            t = Type::lifted(t, inc, out);
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Type, TypeError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.arrow_type()?;
                self.expect(Tok::RParen, "expected `)`")?;
                Ok(t)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(match name.as_str() {
                    "e" => Type::E,
                    "t" => Type::T,
                    _ => Type::Var(name),
                })
            }
            _ => self.err("expected a type"),
        }
    }
}

/// Parses `T ::= e | t | ident | T -> T | T #> T | T ?> T | (T)`, all arrows
/// right-associative at equal precedence. Also accepts the postfix
/// shorthand `T{T|T}`.
pub fn parse_type(src: &str) -> Result<Type, TypeError> {
    let toks = tokenize(src)?;
    let mut p = TypeParser { toks, pos: 0, end: src.len() };
    let t = p.arrow_type()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(t)
}

impl std::str::FromStr for Type {
    type Err = TypeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_type(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ty(s: &str) -> Type {
        parse_type(s).unwrap()
    }

    #[test]
    fn unify_binds_answer_type() {
        let s = unify(&ty("e #> g"), &ty("e #> t")).unwrap();
        assert_eq!(s.get("g"), Some(&Type::T));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn arrows_never_unify() {
        assert!(matches!(unify(&ty("e #> t"), &ty("e -> t")), Err(TypeError::Mismatch(..))));
        assert!(matches!(unify(&ty("e ?> t"), &ty("e -> t")), Err(TypeError::Mismatch(..))));
        assert!(matches!(unify(&ty("e ?> t"), &ty("e #> t")), Err(TypeError::Mismatch(..))));
        assert!(matches!(unify(&Type::E, &Type::T), Err(TypeError::Mismatch(..))));
    }

    #[test]
    fn unify_what_at_question_answer() {
        let a = ty("(e #> g) -> e ?> g");
        let b = ty("(e #> e ?> t) -> d");
        let s = unify(&a, &b).unwrap();
        assert_eq!(s.get("g"), Some(&ty("e ?> t")));
        assert_eq!(s.get("d"), Some(&ty("e ?> e ?> t")));
        assert_eq!(s.apply(&a), s.apply(&b));
    }

    #[test]
    fn occurs_check() {
        assert!(matches!(unify(&ty("a"), &ty("a -> e")), Err(TypeError::OccursCheck(..))));
    }

    #[test]
    fn substitution_is_idempotent() {
        let s = unify(&ty("a -> b -> c"), &ty("b -> c -> e")).unwrap();
        let t = ty("a -> b -> c");
        assert_eq!(s.apply(&s.apply(&t)), s.apply(&t));
    }

    #[test]
    fn instantiate_freshens() {
        let scheme = TypeScheme::generalize(ty("(e #> g) -> e ?> g"));
        let mut supply = NameSupply::starting_at(17);
        assert_eq!(scheme.instantiate(&mut supply), ty("(e #> g_17) -> e ?> g_17"));
        let again = scheme.instantiate(&mut supply);
        assert!(again.free_vars().is_disjoint(&BTreeSet::from(["g_17".to_string()])));
        let mono = TypeScheme::mono(Type::T);
        assert_eq!(mono.instantiate(&mut supply), Type::T);
    }

    #[test]
    fn printing() {
        assert_eq!(print_type(&ty("(e #> t) -> t"), true), "e{t|t}");
        assert_eq!(
            print_type(&ty("(e #> e ?> t) -> e ?> e ?> t"), false),
            "(e #> e ?> t) -> e ?> e ?> t"
        );
        assert_eq!(print_type(&Type::E, false), "e");
        assert_eq!(print_type(&ty("(e ?> t){d|e ?> d}"), true), "(e ?> t){d|e ?> d}");
        assert_eq!(print_type(&ty("e{t|t}{d|d}"), true), "e{t|t}{d|d}");
        assert_eq!(print_type(&ty("e{t|t} -> t"), true), "e{t|t} -> t");
    }

    #[test]
    fn shorthand_parses_to_arrows() {
        assert_eq!(ty("(e?>t){d|e?>d}"), ty("((e ?> t) #> d) -> e ?> d"));
        assert_eq!(ty("e → e ⇀ t ⇝ t"), ty("e -> e #> t ?> t"));
    }

    #[test]
    fn matching_is_one_way() {
        assert!(matches(&ty("e ?> a"), &ty("e ?> e ?> t")));
        assert!(matches(&ty("a -> a"), &ty("t -> t")));
        assert!(!matches(&ty("a -> a"), &ty("t -> e")));
        assert!(!matches(&ty("e #> t"), &ty("e #> g")));
    }

    #[test]
    fn canonical_names_skip_base_types() {
        let names: Vec<String> = (0..6).map(canonical_var_name).collect();
        assert_eq!(names, ["a", "b", "c", "d", "f", "g"]);
        assert_eq!(canonical_type(&ty("x_3 -> y -> x_3")), ty("a -> b -> a"));
    }
}
