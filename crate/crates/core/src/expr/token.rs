use std::borrow::Cow;
use std::fmt;

use crate::sim::Feature;

/// Constants shared by GP ephemeral constants and the policy vocabulary.
pub const CONSTANT_POOL: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Add,
    Sub,
    Mul,
    /// Protected division: a zero denominator yields 1.
    Div,
    Ge,
    Le,
    IfElse,
    And,
    Or,
    Max,
    Min,
}

impl Op {
    pub const ALL: [Op; 11] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Ge,
        Op::Le,
        Op::IfElse,
        Op::And,
        Op::Or,
        Op::Max,
        Op::Min,
    ];

    pub fn arity(self) -> usize {
        match self {
            Op::IfElse => 3,
            _ => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Ge => ">=",
            Op::Le => "<=",
            Op::IfElse => "if_else",
            Op::And => "and",
            Op::Or => "or",
            Op::Max => "max",
            Op::Min => "min",
        }
    }

    pub fn parse(s: &str) -> Option<Op> {
        let op = match s {
            "+" => Op::Add,
            "-" | "\u{2212}" => Op::Sub,
            "*" | "\u{d7}" => Op::Mul,
            "/" | "\u{f7}" => Op::Div,
            ">=" | "\u{2265}" => Op::Ge,
            "<=" | "\u{2264}" => Op::Le,
            "if_else" => Op::IfElse,
            "and" => Op::And,
            "or" => Op::Or,
            "max" => Op::Max,
            "min" => Op::Min,
            _ => return None,
        };
        Some(op)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Op(Op),
    Feature(Feature),
    /// Index into [`CONSTANT_POOL`].
    Const(u8),
}

impl Token {
    pub fn arity(self) -> usize {
        match self {
            Token::Op(op) => op.arity(),
            _ => 0,
        }
    }

    pub fn is_terminal(self) -> bool {
        self.arity() == 0
    }

    pub fn constant(value: f64) -> Option<Token> {
        CONSTANT_POOL.iter().position(|&c| c == value).map(|i| Token::Const(i as u8))
    }

    pub fn symbol(self) -> Cow<'static, str> {
        match self {
            Token::Op(op) => Cow::Borrowed(op.symbol()),
            Token::Feature(f) => Cow::Borrowed(f.name()),
            Token::Const(i) => Cow::Owned(CONSTANT_POOL[i as usize].to_string()),
        }
    }

    pub fn parse(s: &str) -> Option<Token> {
        if let Some(op) = Op::parse(s) {
            return Some(Token::Op(op));
        }
        if let Some(f) = Feature::parse(s) {
            return Some(Token::Feature(f));
        }
        s.parse::<f64>().ok().and_then(Token::constant)
    }

    /// Every token of the language: operators, features, constants.
    pub fn all() -> impl Iterator<Item = Token> {
        Op::ALL
            .into_iter()
            .map(Token::Op)
            .chain(Feature::ALL.into_iter().map(Token::Feature))
            .chain((0..CONSTANT_POOL.len() as u8).map(Token::Const))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol())
    }
}
