//! Golden test cases: an input, search options, and the expected readings.
//!
//! ```text
//! input: (Alice (loves Bob))
//! order: 0
//! goal: t
//! --- readings
//! Love(Bob)(Alice) : t
//! ```
//!
//! A case that must fail lists the single line `no derivation`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{derive_input, parse_bracketed, EngineError, ParseInput, SearchOptions};
use crate::lexicon::Lexicon;
use crate::rules::tower;
use crate::types::parse_type;

pub const NO_DERIVATION: &str = "no derivation";
pub const CASE_EXTENSION: &str = "case";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Case {
    pub name: String,
    pub input: String,
    pub order: usize,
    pub goal: Option<String>,
    pub all_bracketings: bool,
    pub expected: Vec<String>,
}

impl Case {
    pub fn options(&self) -> Result<SearchOptions, String> {
        let mut opts = SearchOptions::with_order(self.order);
        opts.goal = self.goal.as_deref().map(parse_type).transpose().map_err(|e| e.to_string())?;
        opts.enumerate_bracketings = self.all_bracketings;
        Ok(opts)
    }

    pub fn parse_input(&self) -> Result<ParseInput, String> {
        if self.all_bracketings {
            let tokens = self.input.replace(['(', ')'], " ").split_whitespace().map(str::to_string).collect();
            Ok(ParseInput::Tokens(tokens))
        } else {
            parse_bracketed(&self.input).map(ParseInput::Tree).map_err(|e| e.to_string())
        }
    }

    /// Renders the case in file form with `expected` as its readings.
    pub fn to_file_format(&self, expected: &[String]) -> String {
        let mut out = format!("input: {}\norder: {}\n", self.input, self.order);
        if let Some(g) = &self.goal {
            out.push_str(&format!("goal: {g}\n"));
        }
        if self.all_bracketings {
            out.push_str("all-bracketings: yes\n");
        }
        out.push_str("--- readings\n");
        for line in expected {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

pub fn parse_case(name: &str, text: &str) -> Result<Case, CorpusError> {
    let err = |line: usize, message: String| CorpusError::Parse { file: name.to_string(), line, message };
    let mut case = Case {
        name: name.to_string(),
        input: String::new(),
        order: 2,
        goal: None,
        all_bracketings: false,
        expected: Vec::new(),
    };
    let mut in_readings = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if in_readings {
            if !raw.trim().is_empty() {
                case.expected.push(raw.trim_end().to_string());
            }
            continue;
        }
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        if content == "--- readings" {
            in_readings = true;
            continue;
        }
        let Some((key, value)) = content.split_once(':') else {
            return Err(err(line, format!("expected `key: value`, found `{content}`")));
        };
        let value = value.trim();
        match key.trim() {
            "input" => case.input = value.to_string(),
            "order" => case.order = value.parse().map_err(|_| err(line, format!("bad order `{value}`")))?,
            "goal" => case.goal = Some(value.to_string()),
            "all-bracketings" => case.all_bracketings = matches!(value, "yes" | "true"),
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
    }
    if case.input.is_empty() {
        return Err(err(1, "missing `input:` line".into()));
    }
    if !in_readings {
        return Err(err(text.lines().count(), "missing `--- readings` section".into()));
    }
    Ok(case)
}

/// Replaces the readings section of a case file, keeping its header and comments.
pub fn rebless(text: &str, actual: &[String]) -> String {
    let mut out = String::new();
    for line in text.lines() {
        out.push_str(line);
        out.push('\n');
        if line.trim() == "--- readings" {
            break;
        }
    }
    for line in actual {
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// The lines the canonical printer produces for a case.
pub fn render_case(case: &Case, lex: &Lexicon) -> Result<Vec<String>, String> {
    let opts = case.options()?;
    let input = case.parse_input()?;
    let grammar = tower(case.order).map_err(|e| e.to_string())?;
    match derive_input(&input, &grammar, lex, &opts) {
        Ok(readings) => Ok(readings.iter().map(ToString::to_string).collect()),
        Err(EngineError::NoDerivation(_)) => Ok(vec![NO_DERIVATION.to_string()]),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail { actual: Vec<String> },
    Error(String),
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub case: Case,
    pub path: PathBuf,
    pub outcome: Outcome,
}

pub fn case_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |source| CorpusError::Io { path: dir.display().to_string(), source };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == CASE_EXTENSION))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_case(path: &Path) -> Result<Case, CorpusError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_case(&name, &text)
}

/// Runs every case in `dir`, in parallel, reporting in file-name order.
pub fn run_corpus(dir: &Path, lex: &Lexicon) -> Result<Vec<CaseResult>, CorpusError> {
    let cases = case_files(dir)?
        .into_iter()
        .map(|p| load_case(&p).map(|c| (p, c)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(cases
        .into_par_iter()
        .map(|(path, case)| {
            let outcome = match render_case(&case, lex) {
                Ok(actual) if actual == case.expected => Outcome::Pass,
                Ok(actual) => Outcome::Fail { actual },
                Err(e) => Outcome::Error(e),
            };
            CaseResult { case, path, outcome }
        })
        .collect())
}
