use super::token::Token;
use super::tree::ExprTree;
use super::ParseError;

/// Checks that `tokens` is exactly one complete prefix expression.
pub fn check_arity(tokens: &[Token]) -> Result<(), ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut open = 1usize;
    for (i, t) in tokens.iter().enumerate() {
        if open == 0 {
            return Err(ParseError::TrailingTokens { index: i });
        }
        open = open - 1 + t.arity();
    }
    if open > 0 {
        return Err(ParseError::Incomplete { missing: open });
    }
    Ok(())
}

/// True iff the sequence satisfies the arity constraint.
pub fn validate_prefix(tokens: &[Token]) -> bool {
    check_arity(tokens).is_ok()
}

/// Parses a whitespace-separated prefix expression.
pub fn parse_tokens(text: &str) -> Result<Vec<Token>, ParseError> {
    text.split_whitespace()
        .enumerate()
        .map(|(index, s)| {
            Token::parse(s).ok_or_else(|| ParseError::UnknownSymbol { index, symbol: s.to_string() })
        })
        .collect()
}

pub fn parse_expr(text: &str) -> Result<ExprTree, ParseError> {
    ExprTree::from_polish(&parse_tokens(text)?)
}

/// Reads a heuristic file: one prefix expression per line, blank lines and
/// lines starting with `#` ignored.
pub fn read_heuristics(text: &str) -> Result<Vec<ExprTree>, ParseError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tree = parse_expr(line).map_err(|e| ParseError::Line { line: n + 1, source: Box::new(e) })?;
        out.push(tree);
    }
    Ok(out)
}

pub fn write_heuristics<'a>(trees: impl IntoIterator<Item = &'a ExprTree>) -> String {
    let mut s = String::new();
    for t in trees {
        s.push_str(&t.to_string());
        s.push('\n');
    }
    s
}
