//! Index assignment for policy tokens.

use crate::expr::Token;

/// Tokens a policy can emit: operators, features, constants.
pub const EMIT: usize = 30;
/// Begin-of-sequence marker; input only, never emitted.
pub const BOS: usize = EMIT;
/// Vocabulary size including BOS.
pub const VOCAB_SIZE: usize = EMIT + 1;
/// Extra context index meaning "no sibling yet".
pub const EMPTY: usize = VOCAB_SIZE;
/// Rows of the parent/sibling context table.
pub const CONTEXT_SIZE: usize = VOCAB_SIZE + 1;

/// Emittable tokens in index order.
pub fn tokens() -> impl Iterator<Item = Token> {
    Token::all()
}

pub fn token_index(t: Token) -> usize {
    use crate::expr::Op;
    use crate::sim::Feature;
    match t {
        Token::Op(op) => Op::ALL.iter().position(|&o| o == op).expect("known operator"),
        Token::Feature(f) => Op::ALL.len() + f.index(),
        Token::Const(i) => Op::ALL.len() + Feature::COUNT + i as usize,
    }
}

pub fn index_token(i: usize) -> Option<Token> {
    tokens().nth(i)
}

/// Symbols in index order, BOS last; stored in checkpoints.
pub fn symbols() -> Vec<String> {
    let mut v: Vec<String> = tokens().map(|t| t.symbol().into_owned()).collect();
    v.push("<bos>".into());
    v
}
