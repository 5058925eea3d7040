//! Grammar-constrained decoding.

use rand::Rng;

use super::linalg::masked_log_softmax;
use super::vocab::{index_token, token_index, BOS, EMIT, EMPTY};
use super::{Net, NnError, StepInput};
use crate::expr::{ExprTree, Token};

#[derive(Clone, Copy, Debug)]
struct Frame {
    token: usize,
    depth: usize,
    remaining: usize,
    last_child: Option<usize>,
}

/// Tracks the partial prefix expression during decoding and decides
/// which tokens may come next.
#[derive(Clone, Debug)]
pub struct Grammar {
    stack: Vec<Frame>,
    emitted: usize,
    /// Operand slots still to fill, including the current one.
    open: usize,
    max_len: usize,
    max_depth: usize,
}

impl Grammar {
    pub fn new(max_len: usize, max_depth: usize) -> Self {
        assert!(max_len >= 1, "max_len must be at least 1");
        Self { stack: Vec::new(), emitted: 0, open: 1, max_len, max_depth }
    }

    pub fn is_complete(&self) -> bool {
        self.open == 0
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// (parent, sibling, depth) of the slot being filled.
    pub fn context(&self) -> (usize, usize, usize) {
        match self.stack.last() {
            Some(f) => (f.token, f.last_child.unwrap_or(EMPTY), f.depth + 1),
            None => (BOS, EMPTY, 0),
        }
    }

    /// A token of arity `a` fits if the sequence can still close within
    /// `max_len`; operators are barred at the depth limit.
    pub fn allowed(&self) -> [bool; EMIT] {
        let depth = self.context().2;
        let mut mask = [false; EMIT];
        if self.is_complete() {
            return mask;
        }
        for (i, m) in mask.iter_mut().enumerate() {
            let a = index_token(i).expect("emittable").arity();
            *m = self.emitted + self.open + a <= self.max_len && (a == 0 || depth < self.max_depth);
        }
        mask
    }

    pub fn push(&mut self, token: usize) {
        let a = index_token(token).expect("emittable").arity();
        let depth = self.context().2;
        if let Some(top) = self.stack.last_mut() {
            top.remaining -= 1;
            top.last_child = Some(token);
        }
        self.emitted += 1;
        self.open = self.open - 1 + a;
        if a > 0 {
            self.stack.push(Frame { token, depth, remaining: a, last_child: None });
        } else {
            while self.stack.last().is_some_and(|f| f.remaining == 0) {
                self.stack.pop();
            }
        }
    }
}

/// A sampled expression and its log-probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub tokens: Vec<Token>,
    pub log_prob: f64,
}

impl Sample {
    pub fn tree(&self) -> ExprTree {
        ExprTree::from_polish(&self.tokens).expect("sampler emits valid prefix sequences")
    }
}

struct Rollout<T> {
    tokens: Vec<usize>,
    log_prob: f64,
    trace: T,
    /// Masked log-probabilities per step.
    steps: Vec<Vec<f64>>,
}

fn rollout<N: Net>(
    net: &N,
    max_len: usize,
    max_depth: usize,
    mut choose: impl FnMut(usize, &[f64]) -> Result<usize, NnError>,
) -> Result<Rollout<N::Trace>, NnError> {
    let mut g = Grammar::new(max_len, max_depth);
    let mut trace = net.begin();
    let mut tokens = Vec::new();
    let mut steps = Vec::new();
    let mut log_prob = 0.0;
    while !g.is_complete() {
        let (parent, sibling, _) = g.context();
        let prev = tokens.last().copied().unwrap_or(BOS);
        let logits = net.step(&mut trace, StepInput { prev, parent, sibling, position: tokens.len() });
        let lp = masked_log_softmax(&logits, &g.allowed());
        let t = choose(tokens.len(), &lp)?;
        log_prob += lp[t];
        g.push(t);
        tokens.push(t);
        steps.push(lp);
    }
    Ok(Rollout { tokens, log_prob, trace, steps })
}

fn draw<R: Rng + ?Sized>(rng: &mut R, lp: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &l) in lp.iter().enumerate() {
        if l == f64::NEG_INFINITY {
            continue;
        }
        acc += l.exp();
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn replay<N: Net>(net: &N, seq: &[Token], max_len: usize, max_depth: usize) -> Result<Rollout<N::Trace>, NnError> {
    let idx: Vec<usize> = seq.iter().map(|&t| token_index(t)).collect();
    let r = rollout(net, max_len, max_depth, |i, lp| match idx.get(i) {
        None => Err(NnError::Incomplete(i)),
        Some(&t) if lp[t] == f64::NEG_INFINITY => Err(NnError::Disallowed { index: i, token: seq[i].to_string() }),
        Some(&t) => Ok(t),
    })?;
    if r.tokens.len() != idx.len() {
        return Err(NnError::Disallowed { index: r.tokens.len(), token: seq[r.tokens.len()].to_string() });
    }
    Ok(r)
}

pub(crate) fn sample<N: Net, R: Rng + ?Sized>(net: &N, rng: &mut R, max_len: usize, max_depth: usize) -> Sample {
    let r = rollout(net, max_len, max_depth, |_, lp| Ok(draw(rng, lp))).expect("sampling cannot fail");
    Sample { tokens: r.tokens.iter().map(|&i| index_token(i).expect("emittable")).collect(), log_prob: r.log_prob }
}

pub(crate) fn log_prob<N: Net>(net: &N, seq: &[Token], max_len: usize, max_depth: usize) -> Result<f64, NnError> {
    Ok(replay(net, seq, max_len, max_depth)?.log_prob)
}

pub(crate) fn distributions<N: Net>(
    net: &N,
    seq: &[Token],
    max_len: usize,
    max_depth: usize,
) -> Result<Vec<Vec<f64>>, NnError> {
    let r = replay(net, seq, max_len, max_depth)?;
    Ok(r.steps.iter().map(|lp| lp.iter().map(|l| l.exp()).collect()).collect())
}

pub(crate) fn accumulate_grad<N: Net>(
    net: &N,
    seq: &[Token],
    weight: f64,
    grad: &mut [f64],
    max_len: usize,
    max_depth: usize,
) -> Result<f64, NnError> {
    let r = replay(net, seq, max_len, max_depth)?;
    if weight != 0.0 {
        let dlogits: Vec<Vec<f64>> = r
            .steps
            .iter()
            .zip(&r.tokens)
            .map(|(lp, &t)| {
                lp.iter()
                    .enumerate()
                    .map(|(j, &l)| {
                        let p = if l == f64::NEG_INFINITY { 0.0 } else { l.exp() };
                        weight * (if j == t { 1.0 } else { 0.0 } - p)
                    })
                    .collect()
            })
            .collect();
        net.backward(&r.trace, &dlogits, grad);
    }
    Ok(r.log_prob)
}
