//! Corpus encoding, indexed storage, a query language over per-token
//! conditions, result handling and concordance display.

pub mod binfmt;
pub mod encoder;
mod error;
pub mod eval;
pub mod kwic;
pub mod physical;
pub mod query;
pub mod registry;
pub mod remote;
pub mod results;

pub use error::{Error, Result};
pub use eval::{compile, eval_condition, eval_query, LabelEnv, Program};
pub use physical::{
    AlignmentMap, BigramTable, Corpus, DynamicAttributeDecl, PositionalAttribute,
    StructuralRegions, Value, ValueType,
};
pub use query::{parse_query, ParseError, Query};
pub use registry::{RegistryDecl, ResolveOptions};
pub use results::{MatchSet, NamedResult, SetOp};

/// Parses, compiles and evaluates `text` against `corpus`.
pub fn run_query(text: &str, corpus: &Corpus, subcorpus: Option<&MatchSet>) -> Result<MatchSet> {
    let query = parse_query(text)?;
    let program = compile(&query, corpus)?;
    eval_query(&program, corpus, subcorpus)
}
