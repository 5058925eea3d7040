//! Single-layer LSTM over (parent, sibling) token context.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{add_acc, affine, matvec_t_acc, outer_acc, sigmoid};
use super::vocab::{CONTEXT_SIZE, EMIT};
use super::{uniform_init, Net, StepInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmShape {
    pub embed: usize,
    pub hidden: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layout {
    emb: usize,
    w: usize,
    u: usize,
    b: usize,
    wo: usize,
    bo: usize,
    len: usize,
}

impl Layout {
    fn new(s: LstmShape) -> Self {
        let (e, h) = (s.embed, s.hidden);
        let emb = 0;
        let w = emb + CONTEXT_SIZE * e;
        let u = w + 4 * h * 2 * e;
        let b = u + 4 * h * h;
        let wo = b + 4 * h;
        let bo = wo + EMIT * h;
        Layout { emb, w, u, b, wo, bo, len: bo + EMIT }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    shape: LstmShape,
    layout: Layout,
    pub(crate) params: Vec<f64>,
}

pub(crate) struct LstmStep {
    parent: usize,
    sibling: usize,
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Default)]
pub(crate) struct LstmTrace {
    steps: Vec<LstmStep>,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(shape: LstmShape, rng: &mut R) -> Self {
        let layout = Layout::new(shape);
        let (e, h) = (shape.embed, shape.hidden);
        let mut params = vec![0.0; layout.len];
        uniform_init(rng, &mut params[layout.emb..layout.w], 0.1);
        uniform_init(rng, &mut params[layout.w..layout.u], (6.0 / (2 * e + h) as f64).sqrt());
        uniform_init(rng, &mut params[layout.u..layout.b], (6.0 / (2 * h) as f64).sqrt());
        // forget-gate bias starts at 1
        params[layout.b + h..layout.b + 2 * h].fill(1.0);
        uniform_init(rng, &mut params[layout.wo..layout.bo], (6.0 / (h + EMIT) as f64).sqrt());
        Self { shape, layout, params }
    }

    pub fn from_params(shape: LstmShape, params: Vec<f64>) -> Option<Self> {
        let layout = Layout::new(shape);
        (params.len() == layout.len).then_some(Self { shape, layout, params })
    }

    pub fn shape(&self) -> LstmShape {
        self.shape
    }
}

impl Net for Lstm {
    type Trace = LstmTrace;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn begin(&self) -> LstmTrace {
        LstmTrace::default()
    }

    fn step(&self, trace: &mut LstmTrace, input: StepInput) -> Vec<f64> {
        let (e, hd) = (self.shape.embed, self.shape.hidden);
        let l = &self.layout;
        let p = &self.params;
        let (h_prev, c_prev) = match trace.steps.last() {
            Some(s) => (s.h.clone(), s.c.clone()),
            None => (vec![0.0; hd], vec![0.0; hd]),
        };
        let emb = |i: usize| &p[l.emb + i * e..l.emb + (i + 1) * e];
        let mut x = emb(input.parent).to_vec();
        x.extend_from_slice(emb(input.sibling));
        let mut z = affine(&p[l.w..l.u], &p[l.b..l.wo], &x);
        let zu = affine(&p[l.u..l.b], &vec![0.0; 4 * hd], &h_prev);
        add_acc(&mut z, &zu);
        let mut gates = vec![0.0; 4 * hd];
        for j in 0..hd {
            gates[j] = sigmoid(z[j]);
            gates[hd + j] = sigmoid(z[hd + j]);
            gates[2 * hd + j] = z[2 * hd + j].tanh();
            gates[3 * hd + j] = sigmoid(z[3 * hd + j]);
        }
        let mut c = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        for j in 0..hd {
            c[j] = gates[hd + j] * c_prev[j] + gates[j] * gates[2 * hd + j];
            tanh_c[j] = c[j].tanh();
            h[j] = gates[3 * hd + j] * tanh_c[j];
        }
        let logits = affine(&p[l.wo..l.bo], &p[l.bo..l.len], &h);
        trace.steps.push(LstmStep { parent: input.parent, sibling: input.sibling, x, h_prev, c_prev, gates, c, tanh_c, h });
        logits
    }

    fn backward(&self, trace: &LstmTrace, dlogits: &[Vec<f64>], grad: &mut [f64]) {
        let (e, hd) = (self.shape.embed, self.shape.hidden);
        let l = self.layout;
        let p = &self.params;
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        for (s, dl) in trace.steps.iter().zip(dlogits).rev() {
            outer_acc(&mut grad[l.wo..l.bo], dl, &s.h);
            add_acc(&mut grad[l.bo..l.len], dl);
            let mut dh = dh_next.clone();
            matvec_t_acc(&p[l.wo..l.bo], dl, &mut dh);
            let mut dz = vec![0.0; 4 * hd];
            for j in 0..hd {
                let (i, f, g, o) = (s.gates[j], s.gates[hd + j], s.gates[2 * hd + j], s.gates[3 * hd + j]);
                let dc = dh[j] * o * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_next[j];
                dz[j] = dc * g * i * (1.0 - i);
                dz[hd + j] = dc * s.c_prev[j] * f * (1.0 - f);
                dz[2 * hd + j] = dc * i * (1.0 - g * g);
                dz[3 * hd + j] = dh[j] * s.tanh_c[j] * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            outer_acc(&mut grad[l.w..l.u], &dz, &s.x);
            outer_acc(&mut grad[l.u..l.b], &dz, &s.h_prev);
            add_acc(&mut grad[l.b..l.wo], &dz);
            let mut dx = vec![0.0; 2 * e];
            matvec_t_acc(&p[l.w..l.u], &dz, &mut dx);
            add_acc(&mut grad[l.emb + s.parent * e..l.emb + (s.parent + 1) * e], &dx[..e]);
            add_acc(&mut grad[l.emb + s.sibling * e..l.emb + (s.sibling + 1) * e], &dx[e..]);
            dh_next = vec![0.0; hd];
            matvec_t_acc(&p[l.u..l.b], &dz, &mut dh_next);
        }
    }
}
