//! Exhaustive derivation search over a bracketed token tree.
//!
//! Every chart cell holds items: a β-normal term with a canonically named
//! principal type. Leaf cells start from the lexicon, internal cells from
//! every binary rule applied in both daughter orders to every pair of
//! daughter items, and each cell is then closed under the unary rules up to
//! [`SearchOptions::max_unary`] steps. Items with the same canonical term
//! and type are merged, keeping every way they were built.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::lexicon::Lexicon;
use crate::rules::{BaseRule, GrammarTower, Rule, RuleError};
use crate::term::{beta_normalize, canonicalize, Term, TermError, DEFAULT_FUEL};
use crate::types::{
    canonical_renaming, canonical_type, matches, rename_apart, NameSupply, Substitution, Type,
};

pub const DEFAULT_MAX_UNARY: usize = 3;
pub const DEFAULT_MAX_TYPE_DEPTH: usize = 12;
pub const DEFAULT_MAX_TOKENS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ParseTree {
    Leaf(String),
    Node(Box<ParseTree>, Box<ParseTree>),
}

impl ParseTree {
    pub fn node(left: ParseTree, right: ParseTree) -> ParseTree {
        ParseTree::Node(Box::new(left), Box::new(right))
    }

    pub fn tokens(&self) -> Vec<&str> {
        match self {
            ParseTree::Leaf(t) => vec![t],
            ParseTree::Node(l, r) => {
                let mut out = l.tokens();
                out.extend(r.tokens());
                out
            }
        }
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseTree::Leaf(t) => f.write_str(t),
            ParseTree::Node(l, r) => write!(f, "({l} {r})"),
        }
    }
}

/// A fixed constituent structure, or a token string whose bracketings are
/// all tried.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseInput {
    Tree(ParseTree),
    Tokens(Vec<String>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InputError {
    #[error("unbalanced parentheses at offset {0}")]
    Unbalanced(usize),
    #[error("empty input")]
    Empty,
    #[error("constituent `{0}` has more than two daughters; bracket it or use --all-bracketings")]
    NotBinary(String),
}

/// Parses an S-expression over tokens. A parenthesized single constituent
/// is the constituent itself.
pub fn parse_bracketed(src: &str) -> Result<ParseTree, InputError> {
    enum Sexp {
        Atom(String),
        List(Vec<Sexp>),
    }
    fn to_tree(s: Sexp) -> Result<ParseTree, InputError> {
        match s {
            Sexp::Atom(t) => Ok(ParseTree::Leaf(t)),
            Sexp::List(items) => {
                let mut items = items.into_iter().map(to_tree).collect::<Result<Vec<_>, _>>()?;
                match items.len() {
                    0 => Err(InputError::Empty),
                    1 => Ok(items.pop().expect("one item")),
                    2 => {
                        let r = items.pop().expect("two items");
                        let l = items.pop().expect("two items");
                        Ok(ParseTree::node(l, r))
                    }
                    _ => Err(InputError::NotBinary(
                        items.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "),
                    )),
                }
            }
        }
    }
    let mut stack: Vec<Vec<Sexp>> = vec![vec![]];
    let mut atom = String::new();
    let flush = |atom: &mut String, stack: &mut Vec<Vec<Sexp>>| {
        if !atom.is_empty() {
            stack.last_mut().expect("open list").push(Sexp::Atom(std::mem::take(atom)));
        }
    };
    for (i, c) in src.char_indices() {
        match c {
            '(' => {
                flush(&mut atom, &mut stack);
                stack.push(vec![]);
            }
            ')' => {
                flush(&mut atom, &mut stack);
                if stack.len() < 2 {
                    return Err(InputError::Unbalanced(i));
                }
                let list = stack.pop().expect("open list");
                stack.last_mut().expect("outer list").push(Sexp::List(list));
            }
            c if c.is_whitespace() => flush(&mut atom, &mut stack),
            c => atom.push(c),
        }
    }
    flush(&mut atom, &mut stack);
    if stack.len() != 1 {
        return Err(InputError::Unbalanced(src.len()));
    }
    to_tree(Sexp::List(stack.pop().expect("top list")))
}

/// Every binary bracketing of `tokens`, in a fixed order.
pub fn bracketings(tokens: &[String]) -> Vec<ParseTree> {
    if tokens.len() == 1 {
        return vec![ParseTree::Leaf(tokens[0].clone())];
    }
    let mut out = Vec::new();
    for split in 1..tokens.len() {
        let lefts = bracketings(&tokens[..split]);
        let rights = bracketings(&tokens[split..]);
        for l in &lefts {
            for r in &rights {
                out.push(ParseTree::node(l.clone(), r.clone()));
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub order: usize,
    /// Unary rules applicable in a chain at one node.
    pub max_unary: usize,
    pub max_type_depth: usize,
    /// Root items must be instances of this pattern.
    pub goal: Option<Type>,
    pub enumerate_bracketings: bool,
    pub prefer_ltr: bool,
    /// Token limit for bracketing enumeration.
    pub max_tokens: usize,
    /// Build sibling subtrees on the rayon pool.
    pub parallel: bool,
    /// Try binary rules in reverse order (the result must not change).
    pub reverse_rule_order: bool,
    /// Lift the restriction of answer types to clause results.
    pub free_answers: bool,
    /// Let application use a pure answer-propagating value as its function.
    pub apply_propagators: bool,
    /// Treat readings that differ only in the order of their leading
    /// question abstractions as one reading.
    pub merge_question_orders: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            order: 2,
            max_unary: DEFAULT_MAX_UNARY,
            max_type_depth: DEFAULT_MAX_TYPE_DEPTH,
            goal: None,
            enumerate_bracketings: false,
            prefer_ltr: false,
            max_tokens: DEFAULT_MAX_TOKENS,
            parallel: true,
            reverse_rule_order: false,
            free_answers: false,
            apply_propagators: false,
            merge_question_orders: true,
        }
    }
}

impl SearchOptions {
    pub fn with_order(order: usize) -> SearchOptions {
        SearchOptions { order, ..SearchOptions::default() }
    }

    pub fn goal(mut self, goal: Type) -> SearchOptions {
        self.goal = Some(goal);
        self
    }
}

/// Items produced at one node of a failed search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeDiagnostic {
    pub constituent: String,
    pub items: usize,
    pub types: Vec<String>,
    pub pruned: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown word `{0}`")]
    UnknownWord(String),
    #[error("no derivation")]
    NoDerivation(Vec<NodeDiagnostic>),
    #[error("{tokens} tokens exceed the bracketing limit of {limit}")]
    TooManyBracketings { tokens: usize, limit: usize },
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Term(#[from] TermError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationNode {
    pub term: Term,
    pub ty: Type,
    /// Rule name, or `lex` at leaves.
    pub rule: String,
    /// Decoration as placed in the tree (`>` evaluates the left daughter
    /// first); the word at leaves.
    pub decoration: String,
    pub children: Vec<DerivationNode>,
    pub unary_chain_length: usize,
}

impl DerivationNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn preorder(&self) -> Vec<&DerivationNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.preorder());
        }
        out
    }

    /// Binary steps that evaluate a right daughter before its left one,
    /// counted per continuation level.
    pub fn right_to_left_count(&self) -> usize {
        let here = if self.children.len() == 2 { self.decoration.matches('<').count() } else { 0 };
        here + self.children.iter().map(DerivationNode::right_to_left_count).sum::<usize>()
    }

    pub fn bracketing(&self) -> String {
        match self.children.as_slice() {
            [] => self.decoration.clone(),
            [only] => only.bracketing(),
            [l, r] => format!("({} {})", l.bracketing(), r.bracketing()),
            _ => unreachable!("rules are unary or binary"),
        }
    }

    pub fn max_unary_chain(&self) -> usize {
        self.children.iter().map(DerivationNode::max_unary_chain).fold(self.unary_chain_length, usize::max)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reading {
    pub canonical_term: Term,
    pub ty: Type,
    pub derivations: Vec<DerivationNode>,
    /// Bracketings that produce this reading.
    pub bracketings: Vec<String>,
    /// Other terms that differ from `canonical_term` only in the order of
    /// their leading question abstractions.
    pub equivalents: Vec<Term>,
}

impl Reading {
    pub fn min_right_to_left(&self) -> usize {
        self.derivations.iter().map(DerivationNode::right_to_left_count).min().unwrap_or(0)
    }
}

impl fmt::Display for Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {}", self.canonical_term, self.ty.shorthand())
    }
}

// ---------------------------------------------------------------------------
// Chart

#[derive(Clone, Debug)]
enum Origin {
    Lexical { word: String },
    Unary { rule: usize, child: usize },
    Binary { rule: usize, mirrored: bool, left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct Item {
    term: Term,
    key: Term,
    ty: Type,
    level: usize,
    cost: Cost,
    origins: Vec<(Origin, Cost)>,
}

/// Right-to-left evaluation steps, then rule applications, of the cheapest
/// derivation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
struct Cost {
    ltr: usize,
    steps: usize,
}

#[derive(Debug, Default)]
struct Cell {
    constituent: String,
    items: Vec<Item>,
    index: HashMap<(Term, Type), usize>,
    daughters: Option<(Arc<Cell>, Arc<Cell>)>,
    pruned: usize,
}

impl Cell {
    /// Inserts or merges; returns the index when the item is new.
    fn insert(&mut self, term: Term, key: Term, ty: Type, level: usize, origin: Origin, cost: Cost) -> Option<usize> {
        match self.index.get(&(key.clone(), ty.clone())) {
            Some(&i) => {
                let item = &mut self.items[i];
                if item.level == level {
                    item.cost = item.cost.min(cost);
                    item.origins.push((origin, cost));
                }
                None
            }
            None => {
                let i = self.items.len();
                self.index.insert((key.clone(), ty.clone()), i);
                self.items.push(Item { term, key, ty, level, cost, origins: vec![(origin, cost)] });
                Some(i)
            }
        }
    }

    fn diagnostics(&self, out: &mut Vec<NodeDiagnostic>) {
        if let Some((l, r)) = &self.daughters {
            l.diagnostics(out);
            r.diagnostics(out);
        }
        let mut types: Vec<String> = self.items.iter().map(|i| i.ty.shorthand().to_string()).collect();
        types.sort();
        types.dedup();
        out.push(NodeDiagnostic {
            constituent: self.constituent.clone(),
            items: self.items.len(),
            types,
            pruned: self.pruned,
        });
    }
}

/// Cheap necessary condition for unification.
fn compatible(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::Var(_), _) | (_, Type::Var(_)) => true,
        (Type::Base(x), Type::Base(y)) => x == y,
        (Type::Arrow(k1, a1, b1), Type::Arrow(k2, a2, b2)) => k1 == k2 && compatible(a1, a2) && compatible(b1, b2),
        _ => false,
    }
}

/// `(α ⇀ γ) → γ`: a value that only passes its answer type through.
fn is_propagator_function(t: &Type) -> bool {
    matches!(t.as_lifted(), Some((_, inc, out)) if inc == out)
}

struct Deriver<'a> {
    grammar: &'a GrammarTower,
    lex: &'a Lexicon,
    opts: &'a SearchOptions,
    unary: Vec<usize>,
    binary: Vec<usize>,
}

impl<'a> Deriver<'a> {
    fn new(grammar: &'a GrammarTower, lex: &'a Lexicon, opts: &'a SearchOptions) -> Self {
        let unary = (0..grammar.rules.len()).filter(|&i| grammar.rules[i].arity() == 1).collect();
        let mut binary: Vec<usize> = (0..grammar.rules.len()).filter(|&i| grammar.rules[i].arity() == 2).collect();
        if opts.reverse_rule_order {
            binary.reverse();
        }
        Deriver { grammar, lex, opts, unary, binary }
    }

    /// Applies a rule to items; `None` if the types do not unify.
    fn apply(&self, rule: &Rule, args: &[&Item]) -> Result<Option<(Term, Term, Type)>, TermError> {
        if !rule.premises.iter().zip(args).all(|(p, a)| compatible(p, &a.ty)) {
            return Ok(None);
        }
        let mut s = Substitution::new();
        let premises: Vec<Type> = rule.premises.iter().map(|p| rename_apart(p, "_r")).collect();
        for (k, (p, a)) in premises.iter().zip(args).enumerate() {
            let t = rename_apart(&a.ty, &format!("_{k}"));
            if s.unify(p, &t).is_err() {
                return Ok(None);
            }
        }
        let conclusion = s.apply(&rename_apart(&rule.conclusion, "_r"));
        if !self.opts.free_answers
            && !(conclusion.answers_are_results() && premises.iter().all(|p| s.apply(p).answers_are_results()))
        {
            return Ok(None);
        }
        if !self.opts.apply_propagators && rule.base == BaseRule::Apply {
            let mut fun = s.apply(&premises[0]);
            for _ in &rule.lifts {
                fun = fun.as_lifted().map(|(v, _, _)| v.clone()).expect("lifted premise");
            }
            if is_propagator_function(&fun) {
                return Ok(None);
            }
        }
        let ty = canonical_type(&conclusion);
        if ty.depth() > self.opts.max_type_depth {
            return Ok(Some((Term::Var(String::new()), Term::Var(String::new()), ty)));
        }
        let terms: Vec<&Term> = args.iter().map(|a| &a.term).collect();
        let term = beta_normalize(&rule.instantiate_term(&terms), DEFAULT_FUEL)?;
        let key = canonicalize(&term)?;
        Ok(Some((term, key, ty)))
    }

    fn leaf(&self, token: &str) -> Result<Cell, EngineError> {
        let entries = self.lex.lookup(token);
        if entries.is_empty() {
            return Err(EngineError::UnknownWord(token.to_string()));
        }
        let mut cell = Cell { constituent: token.to_string(), ..Cell::default() };
        let mut supply = NameSupply::new();
        for entry in entries {
            let ty = canonical_type(&entry.scheme.instantiate(&mut supply));
            let key = canonicalize(&entry.term)?;
            cell.insert(entry.term.clone(), key, ty, 0, Origin::Lexical { word: token.to_string() }, Cost::default());
        }
        self.close(&mut cell)?;
        Ok(cell)
    }

    fn node(&self, left: Arc<Cell>, right: Arc<Cell>) -> Result<Cell, EngineError> {
        let mut cell = Cell {
            constituent: format!("({} {})", left.constituent, right.constituent),
            ..Cell::default()
        };
        for &ri in &self.binary {
            let rule = &self.grammar.rules[ri];
            for (li, l) in left.items.iter().enumerate() {
                for (rj, r) in right.items.iter().enumerate() {
                    for mirrored in [false, true] {
                        let args = if mirrored { [r, l] } else { [l, r] };
                        match self.apply(rule, &args)? {
                            None => {}
                            Some((_, _, ty)) if ty.depth() > self.opts.max_type_depth => cell.pruned += 1,
                            Some((term, key, ty)) => {
                                let cost = Cost {
                                    ltr: l.cost.ltr + r.cost.ltr + rule.right_to_left_count(mirrored),
                                    steps: l.cost.steps + r.cost.steps + 1,
                                };
                                let origin = Origin::Binary { rule: ri, mirrored, left: li, right: rj };
                                cell.insert(term, key, ty, 0, origin, cost);
                            }
                        }
                    }
                }
            }
        }
        cell.daughters = Some((left, right));
        self.close(&mut cell)?;
        Ok(cell)
    }

    /// Closes a cell under unary rules, breadth first.
    fn close(&self, cell: &mut Cell) -> Result<(), EngineError> {
        let mut frontier: Vec<usize> = (0..cell.items.len()).collect();
        for level in 1..=self.opts.max_unary {
            let mut next = Vec::new();
            for &i in &frontier {
                for &ri in &self.unary {
                    let rule = &self.grammar.rules[ri];
                    let child = cell.items[i].clone();
                    match self.apply(rule, &[&child])? {
                        None => {}
                        Some((_, _, ty)) if ty.depth() > self.opts.max_type_depth => cell.pruned += 1,
                        Some((term, key, ty)) => {
                            let origin = Origin::Unary { rule: ri, child: i };
                            if let Some(new) = cell.insert(term, key, ty, level, origin, Cost { steps: child.cost.steps + 1, ..child.cost }) {
                                next.push(new);
                            }
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(())
    }

    fn build(&self, tree: &ParseTree) -> Result<Arc<Cell>, EngineError> {
        match tree {
            ParseTree::Leaf(token) => Ok(Arc::new(self.leaf(token)?)),
            ParseTree::Node(l, r) => {
                let (lc, rc) = if self.opts.parallel {
                    rayon::join(|| self.build(l), || self.build(r))
                } else {
                    (self.build(l), self.build(r))
                };
                Ok(Arc::new(self.node(lc?, rc?)?))
            }
        }
    }

    fn build_memo(&self, tree: &ParseTree, memo: &mut HashMap<String, Arc<Cell>>) -> Result<Arc<Cell>, EngineError> {
        let key = tree.to_string();
        if let Some(cell) = memo.get(&key) {
            return Ok(cell.clone());
        }
        let cell = match tree {
            ParseTree::Leaf(token) => Arc::new(self.leaf(token)?),
            ParseTree::Node(l, r) => {
                let lc = self.build_memo(l, memo)?;
                let rc = self.build_memo(r, memo)?;
                Arc::new(self.node(lc, rc)?)
            }
        };
        memo.insert(key, cell.clone());
        Ok(cell)
    }

    /// Root items admitted as readings: those matching the goal, or every
    /// evaluated (non-lifted) item when there is none.
    fn candidates(&self, root: &Cell) -> Vec<Candidate> {
        root.items
            .iter()
            .enumerate()
            .filter(|(_, item)| match &self.opts.goal {
                Some(g) => matches(g, &item.ty),
                None => item.ty.as_lifted().is_none(),
            })
            .map(|(i, item)| {
                let derivation = self.derivation(root, i);
                Candidate {
                    group: if self.opts.merge_question_orders {
                        question_order_key(&item.key)
                    } else {
                        item.key.to_string()
                    },
                    cost: item.cost,
                    reading: Reading {
                        canonical_term: item.key.clone(),
                        ty: item.ty.clone(),
                        bracketings: vec![derivation.bracketing()],
                        derivations: vec![derivation],
                        equivalents: vec![],
                    },
                }
            })
            .collect()
    }

    /// The cheapest derivation of an item, with node types instantiated in
    /// context.
    fn derivation(&self, cell: &Cell, index: usize) -> DerivationNode {
        let mut s = Substitution::new();
        let mut counter = 0usize;
        let root_ty = rename_apart(&cell.items[index].ty, "_0");
        let pending = self.expand(cell, index, root_ty.clone(), &mut s, &mut counter);
        let mut types = vec![s.apply(&root_ty)];
        pending.collect_types(&s, &mut types);
        let renaming = canonical_renaming(types.iter());
        pending.finish(&s, &renaming)
    }

    fn expand(&self, cell: &Cell, index: usize, ty: Type, s: &mut Substitution, counter: &mut usize) -> Pending {
        let item = &cell.items[index];
        let (origin, _) = item
            .origins
            .iter()
            .min_by_key(|(_, cost)| *cost)
            .expect("items have at least one origin");
        let mut fresh = |t: &Type| {
            *counter += 1;
            rename_apart(t, &format!("_{counter}"))
        };
        let unify = |s: &mut Substitution, a: &Type, b: &Type| {
            s.unify(a, b).expect("derivation types re-unify along a recorded derivation");
        };
        match origin {
            Origin::Lexical { word } => Pending {
                term: item.term.clone(),
                ty,
                rule: "lex".into(),
                decoration: word.clone(),
                level: item.level,
                children: vec![],
            },
            Origin::Unary { rule, child } => {
                let r = &self.grammar.rules[*rule];
                let suffix = fresh(&Type::Var(String::new()));
                let Type::Var(suffix) = suffix else { unreachable!() };
                let concl = rename_apart(&r.conclusion, &suffix);
                let prem = rename_apart(&r.premises[0], &suffix);
                let child_ty = fresh(&cell.items[*child].ty);
                unify(s, &concl, &ty);
                unify(s, &prem, &child_ty);
                let sub = self.expand(cell, *child, child_ty, s, counter);
                Pending {
                    term: item.term.clone(),
                    ty,
                    rule: r.name.clone(),
                    decoration: r.decoration(),
                    level: item.level,
                    children: vec![sub],
                }
            }
            Origin::Binary { rule, mirrored, left, right } => {
                let r = &self.grammar.rules[*rule];
                let (lcell, rcell) = cell.daughters.as_ref().expect("binary items have daughters");
                let Type::Var(suffix) = fresh(&Type::Var(String::new())) else { unreachable!() };
                let concl = rename_apart(&r.conclusion, &suffix);
                let p0 = rename_apart(&r.premises[0], &suffix);
                let p1 = rename_apart(&r.premises[1], &suffix);
                let lty = fresh(&lcell.items[*left].ty);
                let rty = fresh(&rcell.items[*right].ty);
                unify(s, &concl, &ty);
                let (fun_ty, arg_ty) = if *mirrored { (&rty, &lty) } else { (&lty, &rty) };
                unify(s, &p0, fun_ty);
                unify(s, &p1, arg_ty);
                let lsub = self.expand(lcell, *left, lty, s, counter);
                let rsub = self.expand(rcell, *right, rty, s, counter);
                Pending {
                    term: item.term.clone(),
                    ty,
                    rule: r.name.clone(),
                    decoration: r.decoration_oriented(*mirrored),
                    level: item.level,
                    children: vec![lsub, rsub],
                }
            }
        }
    }
}

struct Pending {
    term: Term,
    ty: Type,
    rule: String,
    decoration: String,
    level: usize,
    children: Vec<Pending>,
}

impl Pending {
    fn collect_types(&self, s: &Substitution, out: &mut Vec<Type>) {
        out.push(s.apply(&self.ty));
        for c in &self.children {
            c.collect_types(s, out);
        }
    }

    fn finish(self, s: &Substitution, renaming: &HashMap<String, String>) -> DerivationNode {
        DerivationNode {
            term: self.term,
            ty: s.apply(&self.ty).rename(renaming),
            rule: self.rule,
            decoration: self.decoration,
            unary_chain_length: self.level,
            children: self.children.into_iter().map(|c| c.finish(s, renaming)).collect(),
        }
    }
}

struct Candidate {
    group: String,
    cost: Cost,
    reading: Reading,
}

/// Key shared by terms that differ only in the order of adjacent guarded
/// abstractions `\x. [φ(x)] \y. [ψ(y)] ...`, the shape wh-phrases build.
fn question_order_key(term: &Term) -> String {
    question_order_variants(term)
        .iter()
        .filter_map(|t| canonicalize(t).ok())
        .map(|t| t.to_string())
        .min()
        .unwrap_or_else(|| term.to_string())
}

const MAX_VARIANTS: usize = 720;

fn question_order_variants(term: &Term) -> Vec<Term> {
    let mut binders: Vec<(&str, &Term)> = Vec::new();
    let mut body = term;
    while let Term::Lam(x, inner) = body {
        let Term::Guard(cond, rest) = inner.as_ref() else { break };
        binders.push((x, cond));
        body = rest;
    }
    if !binders.is_empty() {
        let own_guards = binders
            .iter()
            .all(|(x, c)| c.free_vars().iter().all(|v| v == x || !binders.iter().any(|(y, _)| y == v)));
        let orders = if own_guards && binders.len() <= 5 { permutations(binders.len()) } else { vec![(0..binders.len()).collect()] };
        let mut out = Vec::new();
        for inner in question_order_variants(body) {
            for order in &orders {
                out.push(order.iter().rev().fold(inner.clone(), |acc, &i| {
                    let (x, c) = binders[i];
                    Term::lam(x, Term::guard(c.clone(), acc))
                }));
                if out.len() >= MAX_VARIANTS {
                    return out;
                }
            }
        }
        return out;
    }
    let combine = |parts: Vec<Vec<Term>>, build: &dyn Fn(&[Term]) -> Term| -> Vec<Term> {
        let mut out: Vec<Vec<Term>> = vec![vec![]];
        for options in parts {
            let mut next = Vec::new();
            for prefix in &out {
                for o in &options {
                    if next.len() >= MAX_VARIANTS {
                        break;
                    }
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    next.push(p);
                }
            }
            out = next;
        }
        out.iter().map(|p| build(p)).collect()
    };
    match term {
        Term::Var(_) | Term::Const(_) => vec![term.clone()],
        Term::Lam(x, b) => question_order_variants(b).into_iter().map(|b| Term::lam(x.clone(), b)).collect(),
        Term::Forall(x, b) => question_order_variants(b).into_iter().map(|b| Term::forall(x.clone(), b)).collect(),
        Term::Exists(x, b) => question_order_variants(b).into_iter().map(|b| Term::exists(x.clone(), b)).collect(),
        Term::App(f, a) => combine(vec![question_order_variants(f), question_order_variants(a)], &|p| {
            Term::app(p[0].clone(), p[1].clone())
        }),
        Term::Guard(c, b) => combine(vec![question_order_variants(c), question_order_variants(b)], &|p| {
            Term::guard(p[0].clone(), p[1].clone())
        }),
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Merges candidates by type and group; the cheapest derivation supplies
/// the representative term.
fn group_readings(candidates: Vec<Candidate>, opts: &SearchOptions) -> Vec<Reading> {
    let mut groups: BTreeMap<(String, String), (Cost, Reading)> = BTreeMap::new();
    for c in candidates {
        let key = (c.reading.ty.shorthand().to_string(), c.group);
        match groups.get_mut(&key) {
            None => {
                groups.insert(key, (c.cost, c.reading));
            }
            Some((cost, existing)) => {
                let mut incoming = c.reading;
                if incoming.canonical_term == existing.canonical_term {
                    existing.derivations.append(&mut incoming.derivations);
                    existing.bracketings.append(&mut incoming.bracketings);
                    *cost = (*cost).min(c.cost);
                    continue;
                }
                if c.cost < *cost || (c.cost == *cost && incoming.canonical_term.to_string() < existing.canonical_term.to_string()) {
                    std::mem::swap(existing, &mut incoming);
                    *cost = c.cost;
                }
                existing.bracketings.append(&mut incoming.bracketings);
                existing.equivalents.push(incoming.canonical_term);
                existing.equivalents.append(&mut incoming.equivalents);
            }
        }
    }
    let mut readings: Vec<Reading> = groups
        .into_values()
        .map(|(_, mut r)| {
            r.bracketings.sort();
            r.bracketings.dedup();
            r.equivalents.sort_by_cached_key(ToString::to_string);
            r.equivalents.dedup();
            r
        })
        .collect();
    readings.sort_by_cached_key(|r| (r.ty.shorthand().to_string(), r.canonical_term.to_string()));
    if opts.prefer_ltr {
        readings = rank_ltr(readings);
    }
    readings
}

fn check_words(tokens: &[&str], lex: &Lexicon) -> Result<(), EngineError> {
    match tokens.iter().find(|t| !lex.contains(t)) {
        Some(t) => Err(EngineError::UnknownWord(t.to_string())),
        None => Ok(()),
    }
}

/// Enumerates the readings of a fixed constituent structure.
pub fn derive(
    tree: &ParseTree,
    grammar: &GrammarTower,
    lex: &Lexicon,
    opts: &SearchOptions,
) -> Result<Vec<Reading>, EngineError> {
    check_words(&tree.tokens(), lex)?;
    let deriver = Deriver::new(grammar, lex, opts);
    let root = deriver.build(tree)?;
    let candidates = deriver.candidates(&root);
    if candidates.is_empty() {
        let mut diags = Vec::new();
        root.diagnostics(&mut diags);
        return Err(EngineError::NoDerivation(diags));
    }
    Ok(group_readings(candidates, opts))
}

/// Enumerates readings over every bracketing of a token string.
pub fn derive_sentence(
    tokens: &[String],
    grammar: &GrammarTower,
    lex: &Lexicon,
    opts: &SearchOptions,
) -> Result<Vec<Reading>, EngineError> {
    if tokens.is_empty() {
        return Err(InputError::Empty.into());
    }
    if tokens.len() > opts.max_tokens {
        return Err(EngineError::TooManyBracketings { tokens: tokens.len(), limit: opts.max_tokens });
    }
    let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
    check_words(&refs, lex)?;
    let deriver = Deriver::new(grammar, lex, opts);
    let mut memo = HashMap::new();
    let mut candidates = Vec::new();
    let mut diags = Vec::new();
    for tree in bracketings(tokens) {
        let root = deriver.build_memo(&tree, &mut memo)?;
        let found = deriver.candidates(&root);
        if found.is_empty() && diags.is_empty() {
            root.diagnostics(&mut diags);
        }
        candidates.extend(found);
    }
    if candidates.is_empty() {
        return Err(EngineError::NoDerivation(diags));
    }
    Ok(group_readings(candidates, opts))
}

pub fn derive_input(
    input: &ParseInput,
    grammar: &GrammarTower,
    lex: &Lexicon,
    opts: &SearchOptions,
) -> Result<Vec<Reading>, EngineError> {
    match input {
        ParseInput::Tree(tree) if !opts.enumerate_bracketings => derive(tree, grammar, lex, opts),
        ParseInput::Tree(tree) => {
            let tokens: Vec<String> = tree.tokens().into_iter().map(str::to_string).collect();
            derive_sentence(&tokens, grammar, lex, opts)
        }
        ParseInput::Tokens(tokens) => derive_sentence(tokens, grammar, lex, opts),
    }
}

/// Stable reorder: readings reachable with fewer right-to-left evaluation
/// steps come first.
pub fn rank_ltr(mut readings: Vec<Reading>) -> Vec<Reading> {
    readings.sort_by_key(Reading::min_right_to_left);
    readings
}
