use std::fmt;

use super::token::{Op, Token, CONSTANT_POOL};
use super::ParseError;
use crate::sim::FeatureVector;

/// Deepest tree allowed anywhere (root-only tree has depth 0).
pub const MAX_DEPTH: usize = 17;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub token: Token,
    pub children: Vec<Node>,
}

impl Node {
    pub fn leaf(token: Token) -> Self {
        debug_assert!(token.is_terminal());
        Node { token, children: Vec::new() }
    }

    pub fn new(token: Token, children: Vec<Node>) -> Self {
        assert_eq!(token.arity(), children.len(), "arity mismatch for {token}");
        Node { token, children }
    }

    pub fn depth(&self) -> usize {
        self.children.iter().map(|c| c.depth() + 1).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Node::size).sum::<usize>()
    }

    fn eval(&self, fv: &FeatureVector) -> f64 {
        let c = &self.children;
        match self.token {
            Token::Feature(f) => fv.get(f),
            Token::Const(i) => CONSTANT_POOL[i as usize],
            Token::Op(op) => {
                let v = match op {
                    Op::Add => c[0].eval(fv) + c[1].eval(fv),
                    Op::Sub => c[0].eval(fv) - c[1].eval(fv),
                    Op::Mul => c[0].eval(fv) * c[1].eval(fv),
                    Op::Div => {
                        let den = c[1].eval(fv);
                        if den == 0.0 {
                            1.0
                        } else {
                            c[0].eval(fv) / den
                        }
                    }
                    Op::Ge => bool01(c[0].eval(fv) >= c[1].eval(fv)),
                    Op::Le => bool01(c[0].eval(fv) <= c[1].eval(fv)),
                    Op::IfElse => {
                        if c[0].eval(fv) != 0.0 {
                            c[1].eval(fv)
                        } else {
                            c[2].eval(fv)
                        }
                    }
                    Op::And => bool01(c[0].eval(fv) != 0.0 && c[1].eval(fv) != 0.0),
                    Op::Or => bool01(c[0].eval(fv) != 0.0 || c[1].eval(fv) != 0.0),
                    Op::Max => c[0].eval(fv).max(c[1].eval(fv)),
                    Op::Min => c[0].eval(fv).min(c[1].eval(fv)),
                };
                // Saturate so products and quotients of large values stay finite.
                v.clamp(-f64::MAX, f64::MAX)
            }
        }
    }

    fn write_prefix(&self, out: &mut Vec<Token>) {
        out.push(self.token);
        for c in &self.children {
            c.write_prefix(out);
        }
    }
}

#[inline]
fn bool01(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// A dispatch heuristic as an operator tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExprTree {
    root: Node,
}

impl ExprTree {
    pub fn new(root: Node) -> Self {
        ExprTree { root }
    }

    pub fn leaf(token: Token) -> Self {
        ExprTree { root: Node::leaf(token) }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Number of tokens (nodes).
    pub fn token_count(&self) -> usize {
        self.root.size()
    }

    /// Evaluates with totalized semantics: division by zero gives 1,
    /// comparisons and logic give 0 or 1, `if_else(c, x, y)` is `x` when
    /// `c != 0`. Finite inputs always give a finite result.
    pub fn eval(&self, fv: &FeatureVector) -> f64 {
        self.root.eval(fv)
    }

    /// Prefix (Polish) serialization.
    pub fn to_polish(&self) -> Vec<Token> {
        let mut out = Vec::with_capacity(self.token_count());
        self.root.write_prefix(&mut out);
        out
    }

    pub fn from_polish(tokens: &[Token]) -> Result<Self, ParseError> {
        super::polish::check_arity(tokens)?;
        let mut it = tokens.iter().copied();
        let root = build(&mut it);
        Ok(ExprTree { root })
    }

    /// The subtree rooted at pre-order index `index`.
    pub fn subtree(&self, index: usize) -> &Node {
        fn find<'a>(node: &'a Node, index: &mut usize) -> Option<&'a Node> {
            if *index == 0 {
                return Some(node);
            }
            *index -= 1;
            node.children.iter().find_map(|c| find(c, index))
        }
        let mut i = index;
        find(&self.root, &mut i).expect("subtree index in range")
    }

    /// Depth of the node at pre-order index `index` (root is 0).
    pub fn node_depth(&self, index: usize) -> usize {
        fn find(node: &Node, index: &mut usize, depth: usize) -> Option<usize> {
            if *index == 0 {
                return Some(depth);
            }
            *index -= 1;
            node.children.iter().find_map(|c| find(c, index, depth + 1))
        }
        let mut i = index;
        find(&self.root, &mut i, 0).expect("subtree index in range")
    }

    /// Copy of this tree with the subtree at `index` replaced.
    pub fn replace_subtree(&self, index: usize, replacement: Node) -> ExprTree {
        fn rebuild(node: &Node, index: &mut usize, replacement: &mut Option<Node>) -> Node {
            if *index == 0 {
                *index = usize::MAX;
                return replacement.take().expect("replaced once");
            }
            if *index != usize::MAX {
                *index -= 1;
            }
            Node {
                token: node.token,
                children: node.children.iter().map(|c| rebuild(c, index, replacement)).collect(),
            }
        }
        assert!(index < self.token_count(), "subtree index out of range");
        let mut i = index;
        let mut r = Some(replacement);
        ExprTree { root: rebuild(&self.root, &mut i, &mut r) }
    }
}

fn build(it: &mut impl Iterator<Item = Token>) -> Node {
    let token = it.next().expect("arity already checked");
    let children = (0..token.arity()).map(|_| build(it)).collect();
    Node { token, children }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.to_polish().iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}
