//! Continuation semantics for interrogatives: a typed λ-calculus, a tower
//! of lifted grammar rules, and an exhaustive derivation engine.

pub mod check;
pub mod cli;
pub mod corpus;
pub mod engine;
pub mod lexicon;
pub mod rules;
pub mod term;
pub mod types;
