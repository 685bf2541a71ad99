//! The query language: a regular expression over per-position conditions.

mod ast;
mod lexer;
mod parser;
mod print;

use std::fmt;

pub use ast::{BoolExpr, CmpOp, Node, Query, ValueExpr, Within};
pub use parser::parse_query;

/// A syntax error with its location in the query text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    /// Byte offset.
    pub offset: usize,
    pub expected: Vec<String>,
}

impl ParseError {
    pub(crate) fn new(message: impl Into<String>, span: lexer::Span, expected: Vec<String>) -> Self {
        ParseError {
            message: message.into(),
            line: span.line,
            column: span.column,
            offset: span.offset,
            expected,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at line {}, column {}: {}",
            self.line, self.column, self.message
        )?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}
