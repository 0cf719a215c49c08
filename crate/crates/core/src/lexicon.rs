//! Word denotations: the built-in fragment and a loader for lexicon files.
//!
//! File format, one item per line (`#` starts a comment):
//!
//! ```text
//! const Frob : e -> t        # declare a constant, optionally typed
//! carol : e = Carol          # word : TYPE = TERM
//! alias carols = carol       # extra surface form for a word
//! ```

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use thiserror::Error;

use crate::check::{check_term, infer_term};
use crate::term::{parse_term, Term};
use crate::types::{parse_type, Type, TypeScheme};

/// Declared constants and their (possibly several) types. A constant
/// declared without a type has an empty list until an entry assigns one.
pub type Signature = IndexMap<String, Vec<TypeScheme>>;

/// The gap token.
pub const GAP: &str = "_";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexEntry {
    pub word: String,
    pub scheme: TypeScheme,
    pub term: Term,
}

impl fmt::Display for LexEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {} = {}", self.word, self.scheme.body, self.term)
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("entry for `{word}`: term has type {inferred}, declared `{declared}`")]
    TypeMismatch { word: String, inferred: String, declared: Type },
    #[error("line {line}: unknown constant `{name}`")]
    UnknownConstant { line: usize, name: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: IndexMap<String, Vec<LexEntry>>,
    aliases: IndexMap<String, String>,
    signature: Signature,
}

impl Lexicon {
    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    /// Entries for a surface token, case-insensitively, following aliases.
    pub fn lookup(&self, token: &str) -> &[LexEntry] {
        let key = token.to_lowercase();
        let key = self.aliases.get(&key).unwrap_or(&key);
        self.entries.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        !self.lookup(token).is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = (&String, &Vec<LexEntry>)> {
        self.entries.iter()
    }

    pub fn aliases(&self) -> impl Iterator<Item = (&String, &String)> {
        self.aliases.iter()
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexEntry> {
        self.entries.values().flatten()
    }

    pub fn declare(&mut self, name: &str, ty: Option<Type>) {
        let types = self.signature.entry(name.to_string()).or_default();
        if let Some(ty) = ty {
            let scheme = TypeScheme::generalize(ty);
            if !types.contains(&scheme) {
                types.push(scheme);
            }
        }
    }

    /// Adds an entry after checking its term against its type.
    pub fn add(&mut self, word: &str, ty: Type, term: Term) -> Result<(), LexiconError> {
        if let Term::Const(c) = &term {
            if self.signature.get(c).is_some_and(Vec::is_empty) {
                self.declare(c, Some(ty.clone()));
            }
        }
        if let Err(_err) = check_term(&term, &ty, &self.signature) {
            let inferred = match infer_term(&term, &self.signature) {
                Some(t) => format!("`{t}`"),
                None if matches!(term, Term::Lam(..)) => "of an abstraction".to_string(),
                None => "that could not be determined".to_string(),
            };
            return Err(LexiconError::TypeMismatch { word: word.to_string(), inferred, declared: ty });
        }
        let key = word.to_lowercase();
        self.entries.entry(key.clone()).or_default().push(LexEntry {
            word: key,
            scheme: TypeScheme::generalize(ty),
            term,
        });
        Ok(())
    }

    pub fn add_alias(&mut self, form: &str, word: &str) {
        self.aliases.insert(form.to_lowercase(), word.to_lowercase());
    }

    /// Renders the lexicon in the file format accepted by [`parse_lexicon`].
    pub fn to_file_format(&self) -> String {
        let mut out = String::new();
        for (name, types) in &self.signature {
            if types.is_empty() {
                out.push_str(&format!("const {name}\n"));
            }
            for s in types {
                out.push_str(&format!("const {name} : {}\n", s.body));
            }
        }
        for entry in self.entries() {
            out.push_str(&format!("{entry}\n"));
        }
        for (form, word) in &self.aliases {
            out.push_str(&format!("alias {form} = {word}\n"));
        }
        out
    }
}

fn ty(s: &str) -> Type {
    parse_type(s).expect("built-in type")
}

/// Constants of the built-in fragment with their types.
pub fn builtin_signature() -> Signature {
    let mut sig = Signature::new();
    let decls = [
        ("Alice", "e"),
        ("Bob", "e"),
        ("Carol", "e"),
        ("We", "e"),
        ("You", "e"),
        ("Smoke", "e -> t"),
        ("Love", "e -> e -> t"),
        ("Buy", "e -> e -> t"),
        ("For", "e -> (e -> t) -> e -> t"),
        ("Remember", "(e ?> t) -> e -> t"),
        ("Remember", "(e ?> e ?> t) -> e -> t"),
        ("Think", "t -> e -> t"),
        ("Animate", "e -> t"),
        ("Not", "t -> t"),
    ];
    for (name, t) in decls {
        sig.entry(name.to_string()).or_default().push(TypeScheme::mono(ty(t)));
    }
    sig
}

pub fn default_lexicon() -> Lexicon {
    let mut lex = Lexicon { signature: builtin_signature(), ..Lexicon::default() };
    let entries = [
        ("alice", "e", "Alice"),
        ("bob", "e", "Bob"),
        ("carol", "e", "Carol"),
        ("everyone", "(e #> t) -> t", "\\c. forall x. c(x)"),
        ("someone", "(e #> t) -> t", "\\c. exists x. c(x)"),
        ("smoke", "e -> t", "Smoke"),
        ("love", "e -> e -> t", "Love"),
        ("we", "e", "We"),
        ("buy", "e -> e -> t", "Buy"),
        (GAP, "(e #> g) -> e #> g", "\\c. c"),
        ("what", "(e #> g) -> e ?> g", "\\c. \\x. [Not(Animate(x))] c(x)"),
        ("who", "(e #> g) -> e ?> g", "\\c. \\x. [Animate(x)] c(x)"),
        ("for", "e -> (e -> t) -> e -> t", "For"),
        ("remember", "(e ?> t) -> e -> t", "Remember"),
        ("remember", "(e ?> e ?> t) -> e -> t", "Remember"),
        ("you", "e", "You"),
        ("think", "t -> e -> t", "Think"),
    ];
    for (word, t, term) in entries {
        lex.add(word, ty(t), parse_term(term).expect("built-in term")).expect("built-in entry checks");
    }
    for (form, word) in [
        ("whom", "who"),
        ("smokes", "smoke"),
        ("loves", "love"),
        ("bought", "buy"),
        ("buys", "buy"),
        ("remembers", "remember"),
        ("thinks", "think"),
    ] {
        lex.add_alias(form, word);
    }
    lex
}

fn parse_error<T>(line: usize, message: impl Into<String>) -> Result<T, LexiconError> {
    Err(LexiconError::Parse { line, message: message.into() })
}

/// `#` opens a comment unless it is part of the `#>` arrow.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    let end = (0..bytes.len())
        .find(|&i| bytes[i] == b'#' && bytes.get(i + 1) != Some(&b'>'))
        .unwrap_or(bytes.len());
    &line[..end]
}

/// Parses lexicon text. With `base`, entries are merged over it: a word
/// defined in the text replaces that word's entries in `base`.
pub fn parse_lexicon(text: &str, base: Option<&Lexicon>) -> Result<Lexicon, LexiconError> {
    let mut lex = match base {
        Some(b) => b.clone(),
        None => Lexicon { signature: builtin_signature(), ..Lexicon::default() },
    };
    let mut replaced = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("const ") {
            let (name, t) = match rest.split_once(':') {
                Some((n, t)) => (n.trim(), Some(t.trim())),
                None => (rest.trim(), None),
            };
            if !name.chars().next().is_some_and(char::is_uppercase) {
                return parse_error(line, format!("constant `{name}` must be capitalized"));
            }
            let t = t.map(parse_type).transpose().or_else(|e| parse_error(line, e.to_string()))?;
            lex.declare(name, t);
            continue;
        }
        if let Some(rest) = content.strip_prefix("alias ") {
            let Some((form, word)) = rest.split_once('=') else {
                return parse_error(line, "expected `alias FORM = WORD`");
            };
            lex.add_alias(form.trim(), word.trim());
            continue;
        }
        let Some((word, rest)) = content.split_once(':') else {
            return parse_error(line, "expected `word : TYPE = TERM`");
        };
        let Some((t, term)) = rest.split_once('=') else {
            return parse_error(line, "expected `=` before the term");
        };
        let word = word.trim();
        if word.is_empty() || word.contains(char::is_whitespace) {
            return parse_error(line, format!("bad word `{word}`"));
        }
        let t = parse_type(t.trim()).or_else(|e| parse_error(line, e.to_string()))?;
        let term = parse_term(term.trim()).or_else(|e| parse_error(line, e.to_string()))?;
        if let Some(name) = term.constants().into_iter().find(|c| !lex.signature.contains_key(c)) {
            return Err(LexiconError::UnknownConstant { line, name });
        }
        let key = word.to_lowercase();
        if base.is_some() && replaced.insert(key.clone()) {
            lex.entries.shift_remove(&key);
        }
        lex.add(word, t, term)?;
    }
    Ok(lex)
}

/// Loads a lexicon file; with `extend` its entries are merged over the
/// built-in lexicon, otherwise it stands alone (over the built-in
/// constants).
pub fn load_lexicon(path: &Path, extend: bool) -> Result<Lexicon, LexiconError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
    let base = extend.then(default_lexicon);
    parse_lexicon(&text, base.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_typecheck_and_lookup() {
        let lex = default_lexicon();
        let everyone = &lex.lookup("everyone")[0];
        assert_eq!(everyone.term, parse_term("\\c. forall x. c(x)").unwrap());
        assert!(everyone.scheme.quantified.is_empty());
        let gap = &lex.lookup("_")[0];
        assert_eq!(gap.scheme.body, ty("(e #> g) -> (e #> g)"));
        assert!(gap.scheme.quantified.contains("g"));
        assert_eq!(lex.lookup("Whom"), lex.lookup("who"));
        assert_eq!(lex.lookup("remembers").len(), 2);
        assert!(lex.lookup("did").is_empty());
    }

    #[test]
    fn who_and_what_differ_only_in_guard() {
        let lex = default_lexicon();
        let (what, who) = (&lex.lookup("what")[0], &lex.lookup("who")[0]);
        assert_eq!(what.scheme, who.scheme);
        let strip = |t: &Term| match t {
            Term::Lam(c, b) => match b.as_ref() {
                Term::Lam(x, g) => match g.as_ref() {
                    Term::Guard(cond, body) => (c.clone(), x.clone(), (**cond).clone(), (**body).clone()),
                    _ => panic!("no guard"),
                },
                _ => panic!(),
            },
            _ => panic!(),
        };
        let (a, b) = (strip(&what.term), strip(&who.term));
        assert_eq!((&a.0, &a.1, &a.3), (&b.0, &b.1, &b.3));
        assert_eq!(a.2, Term::app(Term::constant("Not"), b.2));
    }

    #[test]
    fn remember_entries_differ_in_question_type() {
        let lex = default_lexicon();
        let r = lex.lookup("remember");
        let asked = |e: &LexEntry| match &e.scheme.body {
            Type::Arrow(_, q, rest) => ((**q).clone(), (**rest).clone()),
            _ => panic!(),
        };
        let (q1, rest1) = asked(&r[0]);
        let (q2, rest2) = asked(&r[1]);
        assert_eq!(rest1, rest2);
        assert_eq!(q1, ty("e ?> t"));
        assert_eq!(q2, ty("e ?> e ?> t"));
    }

    #[test]
    fn file_entries() {
        let lex = parse_lexicon("carol : e = Carol\n", None).unwrap();
        assert_eq!(lex.lookup("carol")[0].term, Term::constant("Carol"));
        let lex = parse_lexicon("what : (e #> g) -> (e ?> g) = \\c.\\x.[Not (Animate x)] c x\n", None).unwrap();
        assert_eq!(lex.lookup("what"), default_lexicon().lookup("what"));
    }

    #[test]
    fn file_errors() {
        assert!(matches!(
            parse_lexicon("bad : e = \\x.x\n", None),
            Err(LexiconError::TypeMismatch { .. })
        ));
        assert!(matches!(
            parse_lexicon("# c\n\nfrob : e = Frob\n", None),
            Err(LexiconError::UnknownConstant { line: 3, .. })
        ));
        assert!(matches!(parse_lexicon("carol e = Carol\n", None), Err(LexiconError::Parse { line: 1, .. })));
        assert!(matches!(parse_lexicon("x : e -> = Carol\n", None), Err(LexiconError::Parse { .. })));
    }

    #[test]
    fn const_declarations() {
        let lex = parse_lexicon("const Frob\nfrob : e -> t = Frob\nfrobs : t = Frob(Alice)\n", None).unwrap();
        assert_eq!(lex.lookup("frobs").len(), 1);
        let lex = parse_lexicon("const Glee : e -> t\nglee : e -> t = Glee\n", None).unwrap();
        assert!(lex.contains("glee"));
    }

    #[test]
    fn extend_replaces_words() {
        let base = default_lexicon();
        let lex = parse_lexicon("alice : e = Bob\n", Some(&base)).unwrap();
        assert_eq!(lex.lookup("alice").len(), 1);
        assert_eq!(lex.lookup("alice")[0].term, Term::constant("Bob"));
        assert!(lex.contains("everyone"));
    }

    #[test]
    fn file_format_roundtrip() {
        let lex = default_lexicon();
        let again = parse_lexicon(&lex.to_file_format(), None).unwrap();
        assert_eq!(again.entries().cloned().collect::<Vec<_>>(), lex.entries().cloned().collect::<Vec<_>>());
        assert_eq!(again.lookup("bought"), lex.lookup("buy"));
    }
}
