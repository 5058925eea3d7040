//! Dense helpers over row-major slices.

/// `b + W x` for `W` of shape `rows x x.len()`.
pub fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    debug_assert_eq!(w.len(), b.len() * cols);
    b.iter()
        .zip(w.chunks_exact(cols))
        .map(|(&bi, row)| bi + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// `dx += W^T dy`.
pub fn matvec_t_acc(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    for (row, &g) in w.chunks_exact(cols).zip(dy) {
        for (d, &wij) in dx.iter_mut().zip(row) {
            *d += g * wij;
        }
    }
}

/// `G += dy x^T`.
pub fn outer_acc(g: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (row, &d) in g.chunks_exact_mut(cols).zip(dy) {
        for (gij, &xj) in row.iter_mut().zip(x) {
            *gij += d * xj;
        }
    }
}

pub fn add_acc(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

/// Tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub const LN_EPS: f64 = 1e-5;

/// Layer normalization; returns output, normalized input and `1/std`.
pub fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let rstd = 1.0 / (var + LN_EPS).sqrt();
    let xhat: Vec<f64> = x.iter().map(|v| (v - mean) * rstd).collect();
    let y = xhat.iter().zip(gamma).zip(beta).map(|((h, g), b)| h * g + b).collect();
    (y, xhat, rstd)
}

/// Backward of [`layer_norm`]: accumulates parameter gradients and
/// returns the input gradient.
pub fn layer_norm_backward(
    dy: &[f64],
    xhat: &[f64],
    rstd: f64,
    gamma: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Vec<f64> {
    let n = dy.len() as f64;
    let dxhat: Vec<f64> = dy.iter().zip(gamma).map(|(d, g)| d * g).collect();
    for i in 0..dy.len() {
        dgamma[i] += dy[i] * xhat[i];
        dbeta[i] += dy[i];
    }
    let m1 = dxhat.iter().sum::<f64>() / n;
    let m2 = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / n;
    dxhat.iter().zip(xhat).map(|(d, h)| rstd * (d - m1 - h * m2)).collect()
}

/// Log-softmax restricted to `allowed`; disallowed entries get `-inf`.
pub fn masked_log_softmax(logits: &[f64], allowed: &[bool]) -> Vec<f64> {
    let m = logits
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().zip(allowed).filter(|(_, &a)| a).map(|(&l, _)| (l - m).exp()).sum();
    let lz = m + z.ln();
    logits.iter().zip(allowed).map(|(&l, &a)| if a { l - lz } else { f64::NEG_INFINITY }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_and_transpose() {
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(affine(&w, &[1.0, -1.0], &[1.0, 0.0, 2.0]), vec![8.0, 15.0]);
        let mut dx = [0.0; 3];
        matvec_t_acc(&w, &[1.0, 1.0], &mut dx);
        assert_eq!(dx, [5.0, 7.0, 9.0]);
        let mut g = [0.0; 6];
        outer_acc(&mut g, &[1.0, 2.0], &[1.0, 0.0, -1.0]);
        assert_eq!(g, [1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
    }

    #[test]
    fn gelu_derivative() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
            let fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
        assert_eq!(gelu(0.0), 0.0);
    }

    #[test]
    fn layer_norm_moments_and_gradient() {
        let x = [0.3, -1.2, 2.0, 0.5];
        let g = [1.0, 0.5, 2.0, -1.0];
        let b = [0.1, 0.0, 0.0, 0.2];
        let (_, xhat, _) = layer_norm(&x, &[1.0; 4], &[0.0; 4]);
        assert!(xhat.iter().sum::<f64>().abs() < 1e-12);
        let w = [0.7, -0.3, 1.1, 0.4];
        let f = |x: &[f64]| dot(&layer_norm(x, &g, &b).0, &w);
        let (_, xhat, rstd) = layer_norm(&x, &g, &b);
        let (mut dg, mut db) = ([0.0; 4], [0.0; 4]);
        let dx = layer_norm_backward(&w, &xhat, rstd, &g, &mut dg, &mut db);
        for i in 0..4 {
            let (mut p, mut m) = (x, x);
            p[i] += 1e-6;
            m[i] -= 1e-6;
            assert!(((f(&p) - f(&m)) / 2e-6 - dx[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn masked_softmax_renormalizes() {
        let lp = masked_log_softmax(&[1.0, 2.0, 3.0], &[true, false, true]);
        assert_eq!(lp[1], f64::NEG_INFINITY);
        let s: f64 = lp.iter().map(|l| l.exp()).sum();
        assert!((s - 1.0).abs() < 1e-15);
        let u = masked_log_softmax(&[0.0; 30], &[true; 30]);
        assert!((u[0] + 30f64.ln()).abs() < 1e-15);
    }
}
