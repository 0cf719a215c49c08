use std::path::PathBuf;

use contsem::cli::{run, EXIT_NO_DERIVATION, EXIT_OK, EXIT_USAGE};
use contsem::lexicon::{default_lexicon, parse_lexicon};

fn contsem(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("contsem").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("contsem-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn derive_prints_readings_and_count() {
    let (code, out, _) = contsem(&["derive", "(Alice (loves Bob))", "--order", "0"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "Love(Bob)(Alice) : t\n1 reading\n");
}

#[test]
fn derive_formats() {
    let (_, terms, _) = contsem(&["derive", "(we (bought _))", "--order", "1", "--format", "terms"]);
    assert_eq!(terms, "\\v0. Buy(v0)(We)\n1 reading\n");
    let (_, types, _) = contsem(&["derive", "(we (bought _))", "--order", "1", "--format", "types"]);
    assert_eq!(types, "e #> t\n1 reading\n");
}

#[test]
fn derive_with_goal_and_ltr_ranking() {
    let (code, out, _) =
        contsem(&["derive", "(someone (loves everyone))", "--order", "1", "--goal", "t", "--prefer-ltr"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        out,
        "exists v0. forall v1. Love(v1)(v0) : t\nforall v0. exists v1. Love(v0)(v1) : t\n2 readings\n"
    );
}

#[test]
fn trees_show_words_and_decorations() {
    let (code, out, _) = contsem(&["derive", "(Alice (remembers (what (we (bought _)))))", "--order", "1", "--trees"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("Remember(\\v0. [Not(Animate(v0))] Buy(v0)(We))(Alice) : t\n"));
    for fragment in ["\"remembers\"", "\"what\"", "\"_\"", "[∨]", "[>]", "e{e #> t|e #> t}"] {
        assert!(out.contains(fragment), "missing {fragment} in\n{out}");
    }
    assert!(out.ends_with("1 reading\n"));
}

#[test]
fn no_derivation_reports_nodes() {
    let (code, out, _) = contsem(&["derive", "(what (what (we (bought _))))"]);
    assert_eq!(code, EXIT_NO_DERIVATION);
    assert!(out.starts_with("no derivation\n"));
    assert!(out.contains("(what (we (bought _))): "));
}

#[test]
fn usage_and_input_errors() {
    assert_eq!(contsem(&["derive", "(Alice (loves Bob)"]).0, EXIT_USAGE);
    assert_eq!(contsem(&["derive", "Alice loves Bob"]).0, EXIT_USAGE);
    let (code, _, err) = contsem(&["derive", "(Alice (hates Bob))"]);
    assert_eq!(code, EXIT_USAGE);
    assert_eq!(err, "error: unknown word `hates`\n");
    assert_eq!(contsem(&["derive", "(Alice Bob)", "--goal", "e ->"]).0, EXIT_USAGE);
    assert_eq!(contsem(&["derive", "(Alice Bob)", "--max-type-depth", "0"]).0, EXIT_USAGE);
    assert_eq!(contsem(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(contsem(&["--help"]).0, EXIT_OK);
}

#[test]
fn all_bracketings_accepts_plain_tokens() {
    let (code, out, _) = contsem(&["derive", "Alice loves Bob", "--all-bracketings", "--order", "0"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "Love(Alice)(Bob) : t\nLove(Bob)(Alice) : t\n2 readings\n");
}

#[test]
fn rules_listing() {
    let (code, out, _) = contsem(&["rules", "--order", "2"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 12);
    assert!(out.ends_with("11 rules (4 unary, 7 binary)\n"));
    let (_, out, _) = contsem(&["rules", "--order", "0"]);
    assert!(out.ends_with("1 rules (0 unary, 1 binary)\n"));
}

#[test]
fn lexicon_listing_round_trips() {
    let (code, out, _) = contsem(&["lexicon"]);
    assert_eq!(code, EXIT_OK);
    let reparsed = parse_lexicon(&out, None).unwrap();
    assert_eq!(reparsed.to_file_format(), default_lexicon().to_file_format());
}

#[test]
fn extended_lexicon() {
    let dir = scratch_dir("lexicon");
    let file = dir.join("extra.lex");
    std::fs::write(&file, "# a new verb\nadores : e -> e -> t = Love\n").unwrap();
    let path = file.to_str().unwrap();
    let (code, out, _) = contsem(&["derive", "(Alice (adores Bob))", "--order", "0", "--lexicon", path, "--extend"]);
    assert_eq!((code, out.as_str()), (EXIT_OK, "Love(Bob)(Alice) : t\n1 reading\n"));
    // Without --extend the file replaces the built-in words.
    assert_eq!(contsem(&["derive", "(Alice (adores Bob))", "--lexicon", path]).0, EXIT_USAGE);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn repository_corpus_passes() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus");
    let (code, out, _) = contsem(&["corpus", dir]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.lines().last().unwrap().ends_with(" passed, 0 failed"));
}

#[test]
fn bless_rewrites_readings_and_keeps_comments() {
    let dir = scratch_dir("bless");
    let case = dir.join("simple.case");
    std::fs::write(&case, "# keep me\ninput: (Alice (loves Bob))\norder: 0\n--- readings\nwrong\n").unwrap();
    let d = dir.to_str().unwrap();
    let (code, out, _) = contsem(&["corpus", d]);
    assert_eq!(code, EXIT_NO_DERIVATION);
    assert!(out.contains("FAIL simple\n  - wrong\n  + Love(Bob)(Alice) : t\n"));
    assert_eq!(contsem(&["corpus", d, "--bless"]).0, EXIT_OK);
    assert_eq!(
        std::fs::read_to_string(&case).unwrap(),
        "# keep me\ninput: (Alice (loves Bob))\norder: 0\n--- readings\nLove(Bob)(Alice) : t\n"
    );
    assert_eq!(contsem(&["corpus", d]).0, EXIT_OK);
    std::fs::remove_dir_all(dir).unwrap();
}
