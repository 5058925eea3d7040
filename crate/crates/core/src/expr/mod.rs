//! Expression language for dispatch heuristics.

mod polish;
mod token;
mod tree;

#[cfg(test)]
pub(crate) mod tests;

pub use polish::{check_arity, parse_expr, parse_tokens, read_heuristics, validate_prefix, write_heuristics};
pub use token::{Op, Token, CONSTANT_POOL};
pub use tree::{ExprTree, Node, MAX_DEPTH};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unknown symbol `{symbol}` at token {index}")]
    UnknownSymbol { index: usize, symbol: String },
    #[error("expression complete before token {index}")]
    TrailingTokens { index: usize },
    #[error("expression incomplete: {missing} operand(s) missing")]
    Incomplete { missing: usize },
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<ParseError> },
}
