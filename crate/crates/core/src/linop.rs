//! Linear operators used as the penalized or data-fitting maps of the ADMM
//! splits.

use crate::error::{Error, Result};

pub trait LinearOp: Send + Sync {
    fn rows(&self) -> usize;

    fn cols(&self) -> usize;

    /// `out = A x`; `out.len() == rows()`.
    fn apply(&self, x: &[f64], out: &mut [f64]);

    /// `out = A^T w`; `out.len() == cols()`.
    fn apply_adjoint(&self, w: &[f64], out: &mut [f64]);

    /// Half-bandwidth of `A^T A`, or `None` when it is dense.
    fn band_width(&self) -> Option<usize>;

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.apply(x, &mut out);
        out
    }

    fn apply_adjoint_vec(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.apply_adjoint(w, &mut out);
        out
    }
}

/// The r-th order difference matrix `D^(r)`, `(n - r) x n`, applied with the
/// signed binomial stencil.
#[derive(Clone, Debug)]
pub struct DiffOp {
    n: usize,
    stencil: Vec<f64>,
}

impl DiffOp {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidOrder);
        }
        if n <= r {
            return Err(Error::TooShort { len: n, order: r });
        }
        // (D^r x)_i = sum_k (-1)^(r-k) C(r,k) x_{i+k}
        let mut stencil = vec![0.0; r + 1];
        let mut binom = 1.0;
        for (k, c) in stencil.iter_mut().enumerate() {
            let sign = if (r - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            *c = sign * binom;
            binom = binom * (r - k) as f64 / (k + 1) as f64;
        }
        Ok(DiffOp { n, stencil })
    }

    pub fn order(&self) -> usize {
        self.stencil.len() - 1
    }
}

impl LinearOp for DiffOp {
    fn rows(&self) -> usize {
        self.n - self.order()
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let c = &self.stencil;
        match c.len() {
            2 => {
                for (o, w) in out.iter_mut().zip(x.windows(2)) {
                    *o = w[1] - w[0];
                }
            }
            3 => {
                for (o, w) in out.iter_mut().zip(x.windows(3)) {
                    *o = w[0] - 2.0 * w[1] + w[2];
                }
            }
            _ => {
                for (o, w) in out.iter_mut().zip(x.windows(c.len())) {
                    *o = w.iter().zip(c).fold(0.0, |acc, (a, b)| acc + a * b);
                }
            }
        }
    }

    fn apply_adjoint(&self, w: &[f64], out: &mut [f64]) {
        let c = &self.stencil;
        let m = w.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &wi) in w.iter().enumerate().take(m) {
            for (k, ck) in c.iter().enumerate() {
                out[i + k] += ck * wi;
            }
        }
    }

    fn band_width(&self) -> Option<usize> {
        Some(self.order())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IdentityOp(pub usize);

impl LinearOp for IdentityOp {
    fn rows(&self) -> usize {
        self.0
    }

    fn cols(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn apply_adjoint(&self, w: &[f64], out: &mut [f64]) {
        out.copy_from_slice(w);
    }

    fn band_width(&self) -> Option<usize> {
        Some(0)
    }
}

/// The `rows x cols` zero map.
#[derive(Clone, Copy, Debug)]
pub struct ZeroOp {
    pub rows: usize,
    pub cols: usize,
}

impl LinearOp for ZeroOp {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn apply_adjoint(&self, _w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn band_width(&self) -> Option<usize> {
        Some(0)
    }
}

/// `diag(scale) * A`. Shares the sparsity of `A`, so `band_width` is
/// inherited.
pub struct RowScaled<'a> {
    pub op: &'a dyn LinearOp,
    pub scale: &'a [f64],
}

impl LinearOp for RowScaled<'_> {
    fn rows(&self) -> usize {
        self.op.rows()
    }

    fn cols(&self) -> usize {
        self.op.cols()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply(x, out);
        for (o, s) in out.iter_mut().zip(self.scale) {
            *o *= s;
        }
    }

    fn apply_adjoint(&self, w: &[f64], out: &mut [f64]) {
        let scaled: Vec<f64> = w.iter().zip(self.scale).map(|(a, s)| a * s).collect();
        self.op.apply_adjoint(&scaled, out);
    }

    fn band_width(&self) -> Option<usize> {
        self.op.band_width()
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `X^T X`, row-major `cols x cols`.
    pub fn gram(&self) -> Vec<f64> {
        let p = self.cols;
        let mut g = vec![0.0; p * p];
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..p {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..p {
                    g[a * p + b] += ra * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[a * p + b] = g[b * p + a];
            }
        }
        g
    }
}

impl LinearOp for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .row(i)
                .iter()
                .zip(x)
                .fold(0.0, |acc, (a, b)| acc + a * b);
        }
    }

    fn apply_adjoint(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &wi) in w.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * wi;
            }
        }
    }

    fn band_width(&self) -> Option<usize> {
        None
    }
}

/// Dense materialization of any operator, mostly for tests and small oracles.
pub fn to_dense(op: &dyn LinearOp) -> DenseMatrix {
    let (m, n) = (op.rows(), op.cols());
    let mut data = vec![0.0; m * n];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        for i in 0..m {
            data[i * n + j] = col[i];
        }
        e[j] = 0.0;
    }
    DenseMatrix {
        rows: m,
        cols: n,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{diff_apply, DiffOrder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn adjoint_gap(op: &dyn LinearOp, rng: &mut ChaCha8Rng) -> f64 {
        let x: Vec<f64> = (0..op.cols())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let w: Vec<f64> = (0..op.rows())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let lhs = dot(&op.apply_vec(&x), &w);
        let rhs = dot(&x, &op.apply_adjoint_vec(&w));
        (lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs()))
    }

    #[test]
    fn diff_op_matches_recursive_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in 1..=5 {
            let x: Vec<f64> = (0..17).map(|_| rng.random_range(-5.0..5.0)).collect();
            let op = DiffOp::new(17, r).unwrap();
            let fast = op.apply_vec(&x);
            let slow = diff_apply(&x, DiffOrder::new(r).unwrap()).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "r={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn adjoints_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dense = DenseMatrix::from_row_major(
            4,
            3,
            (0..12).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let ops: Vec<Box<dyn LinearOp>> = vec![
            Box::new(DiffOp::new(20, 1).unwrap()),
            Box::new(DiffOp::new(20, 2).unwrap()),
            Box::new(DiffOp::new(20, 4).unwrap()),
            Box::new(IdentityOp(5)),
            Box::new(ZeroOp { rows: 3, cols: 4 }),
            Box::new(dense),
        ];
        for op in &ops {
            for _ in 0..20 {
                assert!(adjoint_gap(op.as_ref(), &mut rng) < 1e-10);
            }
        }
    }

    #[test]
    fn gram_matches_dense_product() {
        let x = DenseMatrix::from_row_major(3, 2, vec![1.0, 2.0, 0.0, 1.0, -1.0, 3.0]).unwrap();
        assert_eq!(x.gram(), vec![2.0, -1.0, -1.0, 14.0]);
    }

    #[test]
    fn diff_op_rejects_short_signals() {
        assert!(DiffOp::new(2, 2).is_err());
        assert!(DiffOp::new(5, 0).is_err());
    }
}
