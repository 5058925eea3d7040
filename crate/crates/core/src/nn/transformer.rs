//! Decoder-only Transformer with post-norm residual blocks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::attention_row;
use super::linalg::{add_acc, affine, gelu, gelu_grad, layer_norm, layer_norm_backward, matvec_t_acc, outer_acc};
use super::vocab::{EMIT, VOCAB_SIZE};
use super::{uniform_init, Net, StepInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformerShape {
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn: usize,
    pub max_positions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct LayerLayout {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    g1: usize,
    n1: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    g2: usize,
    n2: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Layout {
    tok: usize,
    pos: usize,
    layers: Vec<LayerLayout>,
    wout: usize,
    bout: usize,
    len: usize,
}

impl Layout {
    fn new(s: TransformerShape) -> Self {
        let (d, f) = (s.d_model, s.ffn);
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let tok = take(VOCAB_SIZE * d);
        let pos = take(s.max_positions * d);
        let layers = (0..s.layers)
            .map(|_| LayerLayout {
                wq: take(d * d),
                bq: take(d),
                wk: take(d * d),
                bk: take(d),
                wv: take(d * d),
                bv: take(d),
                wo: take(d * d),
                bo: take(d),
                g1: take(d),
                n1: take(d),
                w1: take(f * d),
                b1: take(f),
                w2: take(d * f),
                b2: take(d),
                g2: take(d),
                n2: take(d),
            })
            .collect();
        let wout = take(EMIT * d);
        let bout = take(EMIT);
        Layout { tok, pos, layers, wout, bout, len: at }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transformer {
    shape: TransformerShape,
    layout: Layout,
    pub(crate) params: Vec<f64>,
}

/// Activations of one layer at one position.
struct LayerStep {
    input: Vec<f64>,
    q: Vec<f64>,
    /// Attention weights per head over positions `0..=t`.
    weights: Vec<Vec<f64>>,
    ctx: Vec<f64>,
    xhat1: Vec<f64>,
    rstd1: f64,
    a: Vec<f64>,
    f1: Vec<f64>,
    g: Vec<f64>,
    xhat2: Vec<f64>,
    rstd2: f64,
}

#[derive(Default)]
pub(crate) struct TransformerTrace {
    tokens: Vec<usize>,
    /// Keys and values per layer, positions stacked row-major.
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    steps: Vec<Vec<LayerStep>>,
    outputs: Vec<Vec<f64>>,
}

impl Transformer {
    pub fn new<R: Rng + ?Sized>(shape: TransformerShape, rng: &mut R) -> Self {
        assert!(shape.heads > 0 && shape.d_model % shape.heads == 0, "d_model must split evenly into heads");
        let layout = Layout::new(shape);
        let (d, f) = (shape.d_model, shape.ffn);
        let mut params = vec![0.0; layout.len];
        // unit-variance embeddings
        let unit = 3f64.sqrt();
        uniform_init(rng, &mut params[layout.tok..layout.pos], unit);
        uniform_init(rng, &mut params[layout.pos..layout.pos + shape.max_positions * d], unit);
        let sq = (6.0 / (2 * d) as f64).sqrt();
        let sf = (6.0 / (d + f) as f64).sqrt();
        for ll in &layout.layers {
            for w in [ll.wq, ll.wk, ll.wv, ll.wo] {
                uniform_init(rng, &mut params[w..w + d * d], sq);
            }
            uniform_init(rng, &mut params[ll.w1..ll.w1 + f * d], sf);
            uniform_init(rng, &mut params[ll.w2..ll.w2 + d * f], sf);
            params[ll.g1..ll.g1 + d].fill(1.0);
            params[ll.g2..ll.g2 + d].fill(1.0);
        }
        uniform_init(rng, &mut params[layout.wout..layout.bout], (6.0 / (d + EMIT) as f64).sqrt());
        Self { shape, layout, params }
    }

    pub fn from_params(shape: TransformerShape, params: Vec<f64>) -> Option<Self> {
        let layout = Layout::new(shape);
        (params.len() == layout.len && shape.heads > 0 && shape.d_model % shape.heads == 0)
            .then_some(Self { shape, layout, params })
    }

    pub fn shape(&self) -> TransformerShape {
        self.shape
    }

    /// Final-layer hidden states for a whole input sequence.
    pub fn hidden_states(&self, inputs: &[usize]) -> Vec<Vec<f64>> {
        let mut tr = self.begin();
        for (t, &x) in inputs.iter().enumerate() {
            self.step(&mut tr, StepInput { prev: x, parent: 0, sibling: 0, position: t });
        }
        tr.outputs
    }
}

impl Net for Transformer {
    type Trace = TransformerTrace;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn begin(&self) -> TransformerTrace {
        TransformerTrace {
            keys: vec![Vec::new(); self.shape.layers],
            values: vec![Vec::new(); self.shape.layers],
            ..Default::default()
        }
    }

    fn step(&self, tr: &mut TransformerTrace, input: StepInput) -> Vec<f64> {
        let s = self.shape;
        let (d, f, nh) = (s.d_model, s.ffn, s.heads);
        let dk = d / nh;
        let t = tr.tokens.len();
        assert!(t < s.max_positions, "sequence longer than the position table");
        let p = &self.params;
        let l = &self.layout;
        let mut h: Vec<f64> = (0..d).map(|i| p[l.tok + input.prev * d + i] + p[l.pos + t * d + i]).collect();
        let mut layer_steps = Vec::with_capacity(s.layers);
        for (li, ll) in l.layers.iter().enumerate() {
            let q = affine(&p[ll.wq..ll.bq], &p[ll.bq..ll.bq + d], &h);
            let k = affine(&p[ll.wk..ll.bk], &p[ll.bk..ll.bk + d], &h);
            let v = affine(&p[ll.wv..ll.bv], &p[ll.bv..ll.bv + d], &h);
            tr.keys[li].extend_from_slice(&k);
            tr.values[li].extend_from_slice(&v);
            let mut ctx = vec![0.0; d];
            let mut weights = Vec::with_capacity(nh);
            for hh in 0..nh {
                let kh: Vec<f64> = tr.keys[li].chunks_exact(d).flat_map(|r| &r[hh * dk..(hh + 1) * dk]).copied().collect();
                let vh: Vec<f64> = tr.values[li].chunks_exact(d).flat_map(|r| &r[hh * dk..(hh + 1) * dk]).copied().collect();
                let (w, out) = attention_row(&q[hh * dk..(hh + 1) * dk], &kh, &vh, dk, dk);
                ctx[hh * dk..(hh + 1) * dk].copy_from_slice(&out);
                weights.push(w);
            }
            let mha = affine(&p[ll.wo..ll.bo], &p[ll.bo..ll.bo + d], &ctx);
            let r1: Vec<f64> = h.iter().zip(&mha).map(|(a, b)| a + b).collect();
            let (a, xhat1, rstd1) = layer_norm(&r1, &p[ll.g1..ll.g1 + d], &p[ll.n1..ll.n1 + d]);
            let f1 = affine(&p[ll.w1..ll.b1], &p[ll.b1..ll.b1 + f], &a);
            let g: Vec<f64> = f1.iter().map(|&x| gelu(x)).collect();
            let f2 = affine(&p[ll.w2..ll.b2], &p[ll.b2..ll.b2 + d], &g);
            let r2: Vec<f64> = a.iter().zip(&f2).map(|(x, y)| x + y).collect();
            let (out, xhat2, rstd2) = layer_norm(&r2, &p[ll.g2..ll.g2 + d], &p[ll.n2..ll.n2 + d]);
            layer_steps.push(LayerStep { input: h, q, weights, ctx, xhat1, rstd1, a, f1, g, xhat2, rstd2 });
            h = out;
        }
        let logits = affine(&p[l.wout..l.bout], &p[l.bout..l.len], &h);
        tr.tokens.push(input.prev);
        tr.steps.push(layer_steps);
        tr.outputs.push(h);
        logits
    }

    fn backward(&self, tr: &TransformerTrace, dlogits: &[Vec<f64>], grad: &mut [f64]) {
        let s = self.shape;
        let (d, f, nh) = (s.d_model, s.ffn, s.heads);
        let dk = d / nh;
        let scale = 1.0 / (dk as f64).sqrt();
        let p = &self.params;
        let l = &self.layout;
        let n = tr.tokens.len();

        let mut dh: Vec<Vec<f64>> = Vec::with_capacity(n);
        for t in 0..n {
            outer_acc(&mut grad[l.wout..l.bout], &dlogits[t], &tr.outputs[t]);
            add_acc(&mut grad[l.bout..l.len], &dlogits[t]);
            let mut g = vec![0.0; d];
            matvec_t_acc(&p[l.wout..l.bout], &dlogits[t], &mut g);
            dh.push(g);
        }

        for (li, ll) in l.layers.iter().enumerate().rev() {
            let keys = &tr.keys[li];
            let values = &tr.values[li];
            let mut dq_all = vec![vec![0.0; d]; n];
            let mut dk_all = vec![vec![0.0; d]; n];
            let mut dv_all = vec![vec![0.0; d]; n];
            let mut din = vec![vec![0.0; d]; n];
            for t in 0..n {
                let st = &tr.steps[t][li];
                // second norm
                let mut dgamma2 = vec![0.0; d];
                let mut dbeta2 = vec![0.0; d];
                let dr2 = layer_norm_backward(&dh[t], &st.xhat2, st.rstd2, &p[ll.g2..ll.g2 + d], &mut dgamma2, &mut dbeta2);
                add_acc(&mut grad[ll.g2..ll.g2 + d], &dgamma2);
                add_acc(&mut grad[ll.n2..ll.n2 + d], &dbeta2);

                // feed-forward
                outer_acc(&mut grad[ll.w2..ll.b2], &dr2, &st.g);
                add_acc(&mut grad[ll.b2..ll.b2 + d], &dr2);
                let mut dg = vec![0.0; f];
                matvec_t_acc(&p[ll.w2..ll.b2], &dr2, &mut dg);
                let df1: Vec<f64> = dg.iter().zip(&st.f1).map(|(g, &x)| g * gelu_grad(x)).collect();
                outer_acc(&mut grad[ll.w1..ll.b1], &df1, &st.a);
                add_acc(&mut grad[ll.b1..ll.b1 + f], &df1);
                let mut da = dr2.clone();
                matvec_t_acc(&p[ll.w1..ll.b1], &df1, &mut da);

                // first norm
                let mut dgamma1 = vec![0.0; d];
                let mut dbeta1 = vec![0.0; d];
                let dr1 = layer_norm_backward(&da, &st.xhat1, st.rstd1, &p[ll.g1..ll.g1 + d], &mut dgamma1, &mut dbeta1);
                add_acc(&mut grad[ll.g1..ll.g1 + d], &dgamma1);
                add_acc(&mut grad[ll.n1..ll.n1 + d], &dbeta1);

                // residual and output projection
                add_acc(&mut din[t], &dr1);
                outer_acc(&mut grad[ll.wo..ll.bo], &dr1, &st.ctx);
                add_acc(&mut grad[ll.bo..ll.bo + d], &dr1);
                let mut dctx = vec![0.0; d];
                matvec_t_acc(&p[ll.wo..ll.bo], &dr1, &mut dctx);

                // attention heads
                for hh in 0..nh {
                    let r = hh * dk..(hh + 1) * dk;
                    let w = &st.weights[hh];
                    let dout = &dctx[r.clone()];
                    let dw: Vec<f64> =
                        (0..=t).map(|j| super::linalg::dot(dout, &values[j * d + r.start..j * d + r.end])).collect();
                    let wdw: f64 = w.iter().zip(&dw).map(|(a, b)| a * b).sum();
                    for j in 0..=t {
                        let ds = w[j] * (dw[j] - wdw) * scale;
                        let kj = &keys[j * d + r.start..j * d + r.end];
                        for (i, c) in r.clone().enumerate() {
                            dq_all[t][c] += ds * kj[i];
                            dk_all[j][c] += ds * st.q[c];
                            dv_all[j][c] += w[j] * dout[i];
                        }
                    }
                }
            }
            for t in 0..n {
                let st = &tr.steps[t][li];
                for (wi, bi, dy) in [(ll.wq, ll.bq, &dq_all[t]), (ll.wk, ll.bk, &dk_all[t]), (ll.wv, ll.bv, &dv_all[t])] {
                    outer_acc(&mut grad[wi..bi], dy, &st.input);
                    add_acc(&mut grad[bi..bi + d], dy);
                    matvec_t_acc(&p[wi..bi], dy, &mut din[t]);
                }
            }
            dh = din;
        }

        for (t, g) in dh.iter().enumerate() {
            let x = tr.tokens[t];
            add_acc(&mut grad[l.tok + x * d..l.tok + (x + 1) * d], g);
            add_acc(&mut grad[l.pos + t * d..l.pos + (t + 1) * d], g);
        }
    }
}
