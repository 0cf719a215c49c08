//! Semantic composition rules as typed combinators, the permutation lifting
//! of a rule, and the grammar tower built by repeatedly lifting function
//! application.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::term::{alpha_equal, beta_normalize, eta_normalize, fresh_name, substitute, Term, DEFAULT_FUEL};
use crate::types::{canonical_renaming, Type};

/// Highest tower order [`tower`] builds unless asked otherwise.
pub const DEFAULT_MAX_ORDER: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("{0:?} is not a permutation of 1..{1}")]
    InvalidPermutation(Vec<usize>, usize),
    #[error("tower order {0} exceeds the maximum of {1}")]
    OrderTooLarge(usize, usize),
}

/// The unlifted rule a lifted rule descends from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseRule {
    Apply,
    Lift,
    Lower,
}

/// Which premise a binary lifting evaluates first. Premise 1 of every
/// function-application rule is the function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EvalOrder {
    FunctionFirst,
    ArgumentFirst,
}

#[derive(Clone, Debug)]
pub struct Rule {
    pub name: String,
    pub base: BaseRule,
    /// Evaluation orders chosen at each lifting, innermost first. Unary
    /// liftings have no order and are recorded as `FunctionFirst`.
    pub lifts: Vec<EvalOrder>,
    /// Premise types share their variables with `conclusion`.
    pub premises: Vec<Type>,
    pub conclusion: Type,
    /// Open term over the premise variables `x1`..`xn`.
    pub combinator: Term,
}

pub fn premise_var(i: usize) -> String {
    format!("x{}", i + 1)
}

impl Rule {
    pub fn arity(&self) -> usize {
        self.premises.len()
    }

    pub fn order(&self) -> usize {
        self.lifts.len()
    }

    /// Decoration in the orientation where the function daughter is on the
    /// left: `FA`, `>`, `<`, `>^<`, `∧`, `∨*`, ...
    pub fn decoration(&self) -> String {
        self.decoration_oriented(false)
    }

    /// Decoration as seen in a tree. `mirrored` means premise 1 is the right
    /// daughter, which turns every `>` into `<` and back.
    pub fn decoration_oriented(&self, mirrored: bool) -> String {
        match self.base {
            BaseRule::Lift => format!("∧{}", "*".repeat(self.lifts.len())),
            BaseRule::Lower => format!("∨{}", "*".repeat(self.lifts.len())),
            BaseRule::Apply if self.lifts.is_empty() => "FA".to_string(),
            BaseRule::Apply => {
                let tags: Vec<&str> = self
                    .lifts
                    .iter()
                    .map(|o| match (o, mirrored) {
                        (EvalOrder::FunctionFirst, false) | (EvalOrder::ArgumentFirst, true) => ">",
                        _ => "<",
                    })
                    .collect();
                tags.join("^")
            }
        }
    }

    /// Number of levels at which this rule, placed with the given
    /// orientation, evaluates its right daughter before its left one.
    pub fn right_to_left_count(&self, mirrored: bool) -> usize {
        if self.base != BaseRule::Apply {
            return 0;
        }
        self.decoration_oriented(mirrored).matches('<').count()
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut vars = self.conclusion.free_vars();
        for p in &self.premises {
            vars.extend(p.free_vars());
        }
        vars
    }

    /// Premise and conclusion types with their shared variables renamed
    /// canonically.
    pub fn canonical_types(&self) -> (Vec<Type>, Type) {
        let all: Vec<&Type> = self.premises.iter().chain(std::iter::once(&self.conclusion)).collect();
        let map = canonical_renaming(all);
        (self.premises.iter().map(|p| p.rename(&map)).collect(), self.conclusion.rename(&map))
    }

    /// Applies the combinator to closed argument terms (no normalization).
    pub fn instantiate_term(&self, args: &[&Term]) -> Term {
        assert_eq!(args.len(), self.arity(), "wrong number of rule arguments");
        args.iter()
            .enumerate()
            .fold(self.combinator.clone(), |t, (i, a)| substitute(&t, &premise_var(i), a))
    }

    /// Rule identity: same arity, same types up to renaming, and
    /// βη-equivalent combinators.
    pub fn same_rule(&self, other: &Rule) -> bool {
        if self.arity() != other.arity() || self.canonical_types() != other.canonical_types() {
            return false;
        }
        let norm = |r: &Rule| {
            beta_normalize(&r.combinator, DEFAULT_FUEL).map(|t| eta_normalize(&t)).expect("combinators normalize")
        };
        alpha_equal(&norm(self), &norm(other))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (premises, conclusion) = self.canonical_types();
        let premises: Vec<String> = premises.iter().map(|p| p.shorthand().to_string()).collect();
        write!(
            f,
            "{} [{}] {} => {} = {}",
            self.name,
            self.decoration(),
            premises.join(", "),
            conclusion.shorthand(),
            self.combinator
        )
    }
}

/// Function application: `x1 : a -> b`, `x2 : a` gives `x1(x2) : b`.
pub fn function_application() -> Rule {
    Rule {
        name: "FA".into(),
        base: BaseRule::Apply,
        lifts: vec![],
        premises: vec![Type::fun(Type::var("a"), Type::var("b")), Type::var("a")],
        conclusion: Type::var("b"),
        combinator: Term::app(Term::var("x1"), Term::var("x2")),
    }
}

/// Value lifting: `x1 : a` gives `\c. c(x1) : a{g|g}`.
pub fn lift() -> Rule {
    Rule {
        name: "lift".into(),
        base: BaseRule::Lift,
        lifts: vec![],
        premises: vec![Type::var("a")],
        conclusion: Type::lifted(Type::var("a"), Type::var("g"), Type::var("g")),
        combinator: Term::lam("c", Term::app(Term::var("c"), Term::var("x1"))),
    }
}

/// Value lowering: `x1 : a{a|g}` gives `x1(\x. x) : g`.
pub fn lower() -> Rule {
    Rule {
        name: "lower".into(),
        base: BaseRule::Lower,
        lifts: vec![],
        premises: vec![Type::lifted(Type::var("a"), Type::var("a"), Type::var("g"))],
        conclusion: Type::var("g"),
        combinator: Term::app(Term::var("x1"), Term::lam("x", Term::var("x"))),
    }
}

pub fn base_rules() -> Vec<Rule> {
    vec![function_application(), lift(), lower()]
}

fn validate_permutation(sigma: &[usize], n: usize) -> Result<(), RuleError> {
    let mut seen = vec![false; n];
    if sigma.len() != n {
        return Err(RuleError::InvalidPermutation(sigma.to_vec(), n));
    }
    for &s in sigma {
        if s == 0 || s > n || seen[s - 1] {
            return Err(RuleError::InvalidPermutation(sigma.to_vec(), n));
        }
        seen[s - 1] = true;
    }
    Ok(())
}

/// Lifts an n-ary rule along the permutation `sigma` (1-based, `sigma[i]`
/// is the position at which premise `i+1` is evaluated).
///
/// Premise `i` gets type `a_i{g_sigma(i)|g_(sigma(i)-1)}`, the conclusion
/// `b{g_n|g_0}`, and the combinator evaluates the premises in the order
/// `sigma^-1(1), ..., sigma^-1(n)` before passing the old result to `c`.
pub fn lift_rule(rule: &Rule, sigma: &[usize]) -> Result<Rule, RuleError> {
    let n = rule.arity();
    validate_permutation(sigma, n)?;

    let used = rule.variables();
    let mut answer_types = Vec::with_capacity(n + 1);
    let mut taken = used.clone();
    for j in 0..=n {
        let name = fresh_type_var(&format!("g{j}"), &taken);
        taken.insert(name.clone());
        answer_types.push(Type::var(name));
    }

    let premises = rule
        .premises
        .iter()
        .zip(sigma)
        .map(|(p, &s)| Type::lifted(p.clone(), answer_types[s].clone(), answer_types[s - 1].clone()))
        .collect();
    let conclusion = Type::lifted(rule.conclusion.clone(), answer_types[n].clone(), answer_types[0].clone());

    // Old premise variables become bound value names.
    let mut avoid = rule.combinator.all_names();
    avoid.extend((0..n).map(premise_var));
    let mut body = rule.combinator.clone();
    let mut value_names = Vec::with_capacity(n);
    for i in 0..n {
        let name = fresh_name(&format!("y{}", i + 1), &avoid);
        avoid.insert(name.clone());
        body = substitute(&body, &premise_var(i), &Term::var(name.clone()));
        value_names.push(name);
    }
    let k = fresh_name("c", &avoid);
    let mut inner = Term::app(Term::var(k.clone()), body);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| sigma[i]);
    for &i in order.iter().rev() {
        inner = Term::app(Term::var(premise_var(i)), Term::lam(value_names[i].clone(), inner));
    }
    let combinator = Term::lam(k, inner);

    let eval = match sigma {
        [1, 2] => EvalOrder::FunctionFirst,
        [2, 1] => EvalOrder::ArgumentFirst,
        _ => EvalOrder::FunctionFirst,
    };
    let mut lifts = rule.lifts.clone();
    lifts.push(eval);
    let mut lifted = Rule {
        name: String::new(),
        base: rule.base,
        lifts,
        premises,
        conclusion,
        combinator,
    };
    lifted.name = rule_name(&lifted);
    Ok(lifted)
}

fn rule_name(rule: &Rule) -> String {
    match rule.base {
        BaseRule::Apply if rule.lifts.is_empty() => "FA".into(),
        BaseRule::Apply => format!("FA{}", rule.decoration()),
        BaseRule::Lift => format!("lift{}", "*".repeat(rule.lifts.len())),
        BaseRule::Lower => format!("lower{}", "*".repeat(rule.lifts.len())),
    }
}

fn fresh_type_var(base: &str, taken: &BTreeSet<String>) -> String {
    let mut name = base.to_string();
    while taken.contains(&name) {
        name.push('\'');
    }
    name
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for pos in 0..=perm.len() {
            let mut p = perm.clone();
            p.insert(pos, n);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// Every lifting of `rule`, one per permutation of its premises.
pub fn all_lifts(rule: &Rule) -> Vec<Rule> {
    permutations(rule.arity())
        .iter()
        .map(|sigma| lift_rule(rule, sigma).expect("generated permutations are valid"))
        .collect()
}

/// The deduplicated rule set of `G_k`.
#[derive(Clone, Debug)]
pub struct GrammarTower {
    pub order: usize,
    pub rules: Vec<Rule>,
}

impl GrammarTower {
    pub fn unary(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.arity() == 1)
    }

    pub fn binary(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.arity() == 2)
    }

    pub fn contains(&self, rule: &Rule) -> bool {
        self.rules.iter().any(|r| r.same_rule(rule))
    }

    pub fn is_subset_of(&self, other: &GrammarTower) -> bool {
        self.rules.iter().all(|r| other.contains(r))
    }

    pub fn by_name(&self) -> HashMap<&str, &Rule> {
        self.rules.iter().map(|r| (r.name.as_str(), r)).collect()
    }
}

fn push_unique(rules: &mut Vec<Rule>, rule: Rule) {
    if !rules.iter().any(|r| r.same_rule(&rule)) {
        rules.push(rule);
    }
}

/// One round of grammar lifting: lift and lower, every old rule, and every
/// lifting of every old rule.
pub fn lift_grammar(rules: &[Rule]) -> Vec<Rule> {
    let mut out = Vec::new();
    push_unique(&mut out, lift());
    push_unique(&mut out, lower());
    for r in rules {
        push_unique(&mut out, r.clone());
    }
    for r in rules {
        for lifted in all_lifts(r) {
            push_unique(&mut out, lifted);
        }
    }
    out
}

pub fn tower(k: usize) -> Result<GrammarTower, RuleError> {
    tower_with_max(k, DEFAULT_MAX_ORDER)
}

pub fn tower_with_max(k: usize, max: usize) -> Result<GrammarTower, RuleError> {
    if k > max {
        return Err(RuleError::OrderTooLarge(k, max));
    }
    let mut rules = vec![function_application()];
    for _ in 0..k {
        rules = lift_grammar(&rules);
    }
    Ok(GrammarTower { order: k, rules })
}
