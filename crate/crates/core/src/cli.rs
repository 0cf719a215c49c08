//! Command-line front end. Exit status: 0 when readings were found (or all
//! corpus cases passed), 1 when there is no derivation (or a case failed),
//! 2 on usage, input or lexicon errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{self, Outcome};
use crate::engine::{derive_input, parse_bracketed, DerivationNode, EngineError, ParseInput, SearchOptions};
use crate::lexicon::{default_lexicon, load_lexicon, Lexicon};
use crate::rules::{tower, RuleError};
use crate::types::parse_type;

pub const CORPUS_ENV: &str = "CONTSEM_CORPUS";
pub const DEFAULT_CORPUS: &str = "corpus";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_DERIVATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Diagnostics list at most this many types per node.
const DIAGNOSTIC_TYPES: usize = 8;

#[derive(Parser, Debug)]
#[command(name = "contsem", version, about = "Derive the readings of bracketed sentences with a lifted continuation grammar")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derive the readings of a bracketed sentence.
    Derive(DeriveArgs),
    /// List the rules of a grammar tower.
    Rules {
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Print a lexicon in file format.
    Lexicon(LexiconArgs),
    /// Run golden case files.
    Corpus(CorpusArgs),
}

#[derive(Args, Debug, Clone)]
pub struct LexiconArgs {
    /// Lexicon file replacing the built-in entries.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Merge the lexicon file over the built-in entries.
    #[arg(long, requires = "lexicon")]
    pub extend: bool,
}

impl LexiconArgs {
    fn load(&self) -> Result<Lexicon, String> {
        match &self.lexicon {
            Some(path) => load_lexicon(path, self.extend).map_err(|e| e.to_string()),
            None => Ok(default_lexicon()),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Terms,
    Types,
    Trees,
    All,
}

#[derive(Args, Debug, Clone)]
pub struct DeriveArgs {
    /// Bracketed sentence, e.g. `(Alice (loves Bob))`.
    pub input: String,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Only report root items of this type pattern.
    #[arg(long)]
    pub goal: Option<String>,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    #[arg(long, default_value_t = crate::engine::DEFAULT_MAX_UNARY)]
    pub max_unary: usize,
    #[arg(long, default_value_t = crate::engine::DEFAULT_MAX_TYPE_DEPTH as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_type_depth: u64,
    /// Ignore the brackets and try every bracketing of the tokens.
    #[arg(long)]
    pub all_bracketings: bool,
    /// Order readings by right-to-left evaluation steps.
    #[arg(long)]
    pub prefer_ltr: bool,
    /// Print a derivation tree under each reading.
    #[arg(long)]
    pub trees: bool,
    #[arg(long, value_enum, default_value_t = Format::All)]
    pub format: Format,
    /// Drop the answer-type and propagator restrictions.
    #[arg(long)]
    pub literal: bool,
    /// Keep readings that differ only in the order of question abstractions apart.
    #[arg(long)]
    pub distinguish_orders: bool,
}

impl DeriveArgs {
    pub fn search_options(&self) -> Result<SearchOptions, String> {
        let goal = self.goal.as_deref().map(parse_type).transpose().map_err(|e| format!("--goal: {e}"))?;
        Ok(SearchOptions {
            order: self.order,
            max_unary: self.max_unary,
            max_type_depth: self.max_type_depth as usize,
            goal,
            enumerate_bracketings: self.all_bracketings,
            prefer_ltr: self.prefer_ltr,
            free_answers: self.literal,
            apply_propagators: self.literal,
            merge_question_orders: !self.distinguish_orders,
            ..SearchOptions::default()
        })
    }

    pub fn parse_input(&self) -> Result<ParseInput, String> {
        if self.all_bracketings {
            let tokens: Vec<String> =
                self.input.replace(['(', ')'], " ").split_whitespace().map(str::to_string).collect();
            if tokens.is_empty() {
                return Err("empty input".into());
            }
            Ok(ParseInput::Tokens(tokens))
        } else {
            parse_bracketed(&self.input).map(ParseInput::Tree).map_err(|e| format!("input: {e}"))
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Directory of `.case` files; defaults to $CONTSEM_CORPUS or `corpus`.
    pub dir: Option<PathBuf>,
    /// Rewrite each case's expected readings with the current output.
    #[arg(long)]
    pub bless: bool,
}

/// Runs the command line `args` (program name first).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Derive(args) => run_derive(args, out),
        Command::Rules { order } => run_rules(*order, out),
        Command::Lexicon(args) => args.load().map(|lex| {
            let _ = out.write_all(lex.to_file_format().as_bytes());
            EXIT_OK
        }),
        Command::Corpus(args) => run_corpus(args, out),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_USAGE
        }
    }
}

fn run_rules(order: usize, out: &mut dyn Write) -> Result<i32, String> {
    let grammar = tower(order).map_err(|e: RuleError| e.to_string())?;
    for rule in &grammar.rules {
        let _ = writeln!(out, "{rule}");
    }
    let _ = writeln!(
        out,
        "{} rules ({} unary, {} binary)",
        grammar.rules.len(),
        grammar.unary().count(),
        grammar.binary().count()
    );
    Ok(EXIT_OK)
}

fn run_derive(args: &DeriveArgs, out: &mut dyn Write) -> Result<i32, String> {
    let lex = args.lexicon.load()?;
    let opts = args.search_options()?;
    let input = args.parse_input()?;
    let grammar = tower(args.order).map_err(|e| e.to_string())?;
    match derive_input(&input, &grammar, &lex, &opts) {
        Ok(readings) => {
            for reading in &readings {
                match args.format {
                    Format::Terms => {
                        let _ = writeln!(out, "{}", reading.canonical_term);
                    }
                    Format::Types => {
                        let _ = writeln!(out, "{}", reading.ty.shorthand());
                    }
                    Format::Trees | Format::All => {
                        if args.format == Format::All {
                            let _ = writeln!(out, "{reading}");
                        }
                        if args.trees || args.format == Format::Trees {
                            let _ = out.write_all(render_tree(&reading.derivations[0]).as_bytes());
                        }
                    }
                }
            }
            let n = readings.len();
            let _ = writeln!(out, "{n} reading{}", if n == 1 { "" } else { "s" });
            Ok(EXIT_OK)
        }
        Err(EngineError::NoDerivation(diags)) => {
            let _ = writeln!(out, "no derivation");
            for d in diags {
                let shown: Vec<&str> = d.types.iter().take(DIAGNOSTIC_TYPES).map(String::as_str).collect();
                let more = d.types.len().saturating_sub(DIAGNOSTIC_TYPES);
                let _ = write!(out, "  {}: {} items", d.constituent, d.items);
                if !shown.is_empty() {
                    let _ = write!(out, "; {}", shown.join(", "));
                }
                if more > 0 {
                    let _ = write!(out, " (+{more} more)");
                }
                if d.pruned > 0 {
                    let _ = write!(out, "; {} pruned by depth", d.pruned);
                }
                let _ = writeln!(out);
            }
            Ok(EXIT_NO_DERIVATION)
        }
        Err(e) => Err(e.to_string()),
    }
}

/// One line per node, children indented under their parent. Leaves show
/// their word; other nodes the rule decoration as placed in the tree.
pub fn render_tree(node: &DerivationNode) -> String {
    fn go(node: &DerivationNode, depth: usize, out: &mut String) {
        let indent = "  ".repeat(depth + 1);
        let note = if node.is_leaf() {
            format!("  \"{}\"", node.decoration)
        } else if node.decoration == "FA" {
            String::new()
        } else {
            format!("  [{}]", node.decoration)
        };
        out.push_str(&format!("{indent}{} : {}{note}\n", node.term, node.ty.shorthand()));
        for child in &node.children {
            go(child, depth + 1, out);
        }
    }
    let mut out = String::new();
    go(node, 0, &mut out);
    out
}

fn run_corpus(args: &CorpusArgs, out: &mut dyn Write) -> Result<i32, String> {
    let dir = args
        .dir
        .clone()
        .or_else(|| std::env::var_os(CORPUS_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CORPUS));
    let lex = default_lexicon();
    let results = corpus::run_corpus(&dir, &lex).map_err(|e| e.to_string())?;
    let (mut passed, mut failed) = (0, 0);
    for r in &results {
        match &r.outcome {
            Outcome::Pass => {
                passed += 1;
                let _ = writeln!(out, "PASS {}", r.case.name);
            }
            Outcome::Fail { actual } if args.bless => {
                let text = std::fs::read_to_string(&r.path).map_err(|e| e.to_string())?;
                std::fs::write(&r.path, corpus::rebless(&text, actual)).map_err(|e| e.to_string())?;
                passed += 1;
                let _ = writeln!(out, "BLESS {}", r.case.name);
            }
            Outcome::Fail { actual } => {
                failed += 1;
                let _ = writeln!(out, "FAIL {}", r.case.name);
                for line in &r.case.expected {
                    let _ = writeln!(out, "  - {line}");
                }
                for line in actual {
                    let _ = writeln!(out, "  + {line}");
                }
            }
            Outcome::Error(e) => {
                failed += 1;
                let _ = writeln!(out, "ERROR {}: {e}", r.case.name);
            }
        }
    }
    let _ = writeln!(out, "{passed} passed, {failed} failed");
    Ok(if failed == 0 { EXIT_OK } else { EXIT_NO_DERIVATION })
}
