//! Scaled dot-product attention.

use super::NnError;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// One query against `n` keys/values stored row-major with widths `dk` and
/// `dv`. Returns the softmax weights and the weighted value sum.
pub fn attention_row(q: &[f64], keys: &[f64], values: &[f64], dk: usize, dv: usize) -> (Vec<f64>, Vec<f64>) {
    let n = keys.len() / dk;
    let scale = 1.0 / (dk as f64).sqrt();
    let scores: Vec<f64> = keys.chunks_exact(dk).map(|k| super::linalg::dot(q, k) * scale).collect();
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    let w: Vec<f64> = e.iter().map(|x| x / z).collect();
    let mut out = vec![0.0; dv];
    for (wj, v) in w.iter().zip(values.chunks_exact(dv).take(n)) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += wj * x;
        }
    }
    (w, out)
}

/// `softmax(Q K^T / sqrt(d_k)) V`; with `causal`, row `t` sees keys `0..=t`.
pub fn attention(q: &Matrix, k: &Matrix, v: &Matrix, causal: bool) -> Result<Matrix, NnError> {
    check_shapes(q, k, v.rows, causal)?;
    let mut out = Matrix::zeros(q.rows, v.cols);
    for t in 0..q.rows {
        let n = if causal { t + 1 } else { k.rows };
        let (_, row) = attention_row(q.row(t), &k.data[..n * k.cols], &v.data[..n * v.cols], k.cols, v.cols);
        out.data[t * v.cols..(t + 1) * v.cols].copy_from_slice(&row);
    }
    Ok(out)
}

fn check_shapes(q: &Matrix, k: &Matrix, v_rows: usize, causal: bool) -> Result<(), NnError> {
    if q.cols != k.cols || q.cols == 0 {
        return Err(NnError::Shape(format!("query width {} vs key width {}", q.cols, k.cols)));
    }
    if k.rows != v_rows || k.rows == 0 {
        return Err(NnError::Shape(format!("{} keys vs {v_rows} values", k.rows)));
    }
    if causal && q.rows > k.rows {
        return Err(NnError::Shape("causal attention needs a key for every query".into()));
    }
    Ok(())
}

/// The attention weight matrix itself, for inspection.
pub fn attention_weights(q: &Matrix, k: &Matrix, causal: bool) -> Result<Matrix, NnError> {
    check_shapes(q, k, k.rows, causal)?;
    let ones = Matrix::zeros(k.rows, 1);
    let mut w = Matrix::zeros(q.rows, k.rows);
    for t in 0..q.rows {
        let n = if causal { t + 1 } else { k.rows };
        let (row, _) = attention_row(q.row(t), &k.data[..n * k.cols], &ones.data[..n], k.cols, 1);
        w.data[t * k.rows..t * k.rows + n].copy_from_slice(&row);
    }
    Ok(w)
}
