//! Symmetric positive definite solves for systems of the form
//! `shift * I + sum_k weight_k * A_k^T A_k`, which is what every ADMM
//! coupling step in this crate reduces to.

use crate::error::{Error, Result};
use crate::linop::LinearOp;
use crate::signal::{l2_norm, Signal};

/// Largest half-bandwidth factored with the banded Cholesky path.
pub const MAX_BANDED_WIDTH: usize = 128;
/// Largest dimension factored densely when no band structure is known.
pub const MAX_DENSE_DIM: usize = 4096;

const CG_REL_TOL: f64 = 1e-9;

#[derive(Clone, Copy)]
pub struct GramTerm<'a> {
    pub weight: f64,
    pub op: &'a dyn LinearOp,
}

/// The matrix `shift * I + sum_k weight_k * A_k^T A_k`, never materialized.
#[derive(Clone)]
pub struct SpdSystem<'a> {
    dim: usize,
    shift: f64,
    terms: Vec<GramTerm<'a>>,
}

impl<'a> SpdSystem<'a> {
    pub fn new(dim: usize, shift: f64, terms: Vec<GramTerm<'a>>) -> Result<Self> {
        if !(shift >= 0.0) {
            return Err(Error::invalid("diagonal shift must be nonnegative"));
        }
        for t in &terms {
            if t.op.cols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: t.op.cols(),
                });
            }
            if !(t.weight >= 0.0) {
                return Err(Error::invalid("gram weights must be nonnegative"));
            }
        }
        Ok(SpdSystem { dim, shift, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn band_width(&self) -> Option<usize> {
        self.terms
            .iter()
            .try_fold(0usize, |acc, t| t.op.band_width().map(|b| acc.max(b)))
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.shift * xi;
        }
        let mut tmp = vec![0.0; self.dim];
        for t in &self.terms {
            let ax = t.op.apply_vec(x);
            t.op.apply_adjoint(&ax, &mut tmp);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o += t.weight * v;
            }
        }
    }

    /// Lower band `(i, i - k)` for `k <= b`, recovered with `2b + 1` probes.
    fn probe_band(&self, b: usize) -> Vec<f64> {
        let n = self.dim;
        let period = (2 * b + 1).min(n);
        let mut band = vec![0.0; n * (b + 1)];
        let mut v = vec![0.0; n];
        let mut mv = vec![0.0; n];
        for class in 0..period {
            v.iter_mut()
                .enumerate()
                .for_each(|(j, e)| *e = if j % period == class { 1.0 } else { 0.0 });
            self.apply(&v, &mut mv);
            for i in 0..n {
                // the unique column j <= i of this class with i - j <= b
                let back = (i + period - class % period) % period;
                if back <= b && back <= i {
                    band[i * (b + 1) + back] = mv[i];
                }
            }
        }
        band
    }

    fn probe_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut m = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..n {
                m[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }

    fn diagonal(&self) -> Vec<f64> {
        match self.band_width() {
            Some(b) => {
                let band = self.probe_band(b);
                (0..self.dim).map(|i| band[i * (b + 1)]).collect()
            }
            None => vec![1.0; self.dim],
        }
    }
}

/// Cholesky factor stored by lower band rows.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    b: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factors a symmetric banded matrix given as lower band rows
    /// (`band[i * (b + 1) + k]` is entry `(i, i - k)`).
    pub fn factor(n: usize, b: usize, mut band: Vec<f64>) -> Result<Self> {
        let w = b + 1;
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut s = band[i * w + (i - j)];
                let klo = lo.max(j.saturating_sub(b));
                for k in klo..j {
                    s -= band[i * w + (i - k)] * band[j * w + (j - k)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    band[i * w] = s.sqrt();
                } else {
                    band[i * w + (i - j)] = s / band[j * w];
                }
            }
        }
        Ok(BandedCholesky { n, b, l: band })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..(i + 1 + b).min(n) {
                s -= self.l[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
    }
}

#[derive(Clone, Debug)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factors a row-major symmetric matrix.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / d;
            }
        }
        Ok(DenseCholesky { n, l: a })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
    }
}

/// Entries allowed in an explicitly stored band before giving up.
const MAX_BAND_ENTRIES: usize = 50_000_000;

/// An owned direct factorization, for callers that rebuild the system often.
#[derive(Clone, Debug)]
pub enum CholeskyFactor {
    Banded(BandedCholesky),
    Dense(DenseCholesky),
}

impl CholeskyFactor {
    /// Banded when the operators report a band, dense otherwise.
    pub fn of(system: &SpdSystem<'_>) -> Result<Self> {
        let n = system.dim();
        match system.band_width() {
            Some(b) if b < n && n.saturating_mul(b + 1) <= MAX_BAND_ENTRIES => Ok(
                CholeskyFactor::Banded(BandedCholesky::factor(n, b, system.probe_band(b))?),
            ),
            _ if n <= MAX_DENSE_DIM => Ok(CholeskyFactor::Dense(DenseCholesky::factor(
                n,
                system.probe_dense(),
            )?)),
            _ => Err(Error::SizeCap(format!(
                "no direct factorization for dimension {n}; use the ADMM solver"
            ))),
        }
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        match self {
            CholeskyFactor::Banded(f) => f.solve_in_place(x),
            CholeskyFactor::Dense(f) => f.solve_in_place(x),
        }
    }
}

/// Which factorization an [`SpdSolver`] chose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Banded,
    Dense,
    ConjugateGradient,
}

enum Backend {
    Banded(BandedCholesky),
    Dense(DenseCholesky),
    Cg { inv_diag: Vec<f64> },
}

/// Reusable solver for one [`SpdSystem`]. Factorizes once; the
/// conjugate-gradient backend starts from the value already in `x`.
pub struct SpdSolver<'a> {
    system: SpdSystem<'a>,
    backend: Backend,
}

impl<'a> SpdSolver<'a> {
    pub fn new(system: SpdSystem<'a>) -> Result<Self> {
        let n = system.dim();
        let backend = match system.band_width() {
            Some(b) if b <= MAX_BANDED_WIDTH => {
                Backend::Banded(BandedCholesky::factor(n, b, system.probe_band(b))?)
            }
            None if n <= MAX_DENSE_DIM => {
                Backend::Dense(DenseCholesky::factor(n, system.probe_dense())?)
            }
            _ => {
                let diag = system.diagonal();
                if let Some((pivot, &value)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
                    return Err(Error::NotPositiveDefinite { pivot, value });
                }
                Backend::Cg {
                    inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
                }
            }
        };
        Ok(SpdSolver { system, backend })
    }

    pub fn kind(&self) -> SolverKind {
        match self.backend {
            Backend::Banded(_) => SolverKind::Banded,
            Backend::Dense(_) => SolverKind::Dense,
            Backend::Cg { .. } => SolverKind::ConjugateGradient,
        }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Solves `M x = rhs`.
    pub fn solve(&self, rhs: &[f64], x: &mut [f64]) {
        match &self.backend {
            Backend::Banded(f) => {
                x.copy_from_slice(rhs);
                f.solve_in_place(x);
            }
            Backend::Dense(f) => {
                x.copy_from_slice(rhs);
                f.solve_in_place(x);
            }
            Backend::Cg { inv_diag } => self.pcg(inv_diag, rhs, x),
        }
    }

    fn pcg(&self, inv_diag: &[f64], rhs: &[f64], x: &mut [f64]) {
        let n = rhs.len();
        let target = CG_REL_TOL * l2_norm(rhs).max(f64::MIN_POSITIVE);
        let mut r = vec![0.0; n];
        self.system.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for _ in 0..(10 * n).max(100) {
            if l2_norm(&r) <= target {
                break;
            }
            self.system.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

/// Solves `(rho1 I + rho2 A^T A) theta = rhs`.
pub fn banded_spd_solve(op: &dyn LinearOp, rhs: &Signal, rho1: f64, rho2: f64) -> Result<Signal> {
    if !(rho1 > 0.0) || !(rho2 > 0.0) {
        return Err(Error::invalid("rho1 and rho2 must be positive"));
    }
    if rhs.len() != op.cols() {
        return Err(Error::DimensionMismatch {
            expected: op.cols(),
            actual: rhs.len(),
        });
    }
    let system = SpdSystem::new(op.cols(), rho1, vec![GramTerm { weight: rho2, op }])?;
    let solver = SpdSolver::new(system)?;
    let mut x = vec![0.0; rhs.len()];
    solver.solve(rhs, &mut x);
    Signal::new(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{to_dense, DenseMatrix, DiffOp, ZeroOp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gaussian elimination with partial pivoting, kept independent of the
    /// Cholesky paths it checks.
    fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in (col + 1)..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn residual(op: &dyn LinearOp, rho1: f64, rho2: f64, x: &[f64], rhs: &[f64]) -> f64 {
        let sys = SpdSystem::new(op.cols(), rho1, vec![GramTerm { weight: rho2, op }]).unwrap();
        let mut mx = vec![0.0; x.len()];
        sys.apply(x, &mut mx);
        let r: Vec<f64> = mx.iter().zip(rhs).map(|(a, b)| a - b).collect();
        l2_norm(&r)
    }

    #[test]
    fn zero_operator_is_diagonal() {
        let op = ZeroOp { rows: 1, cols: 2 };
        let x = banded_spd_solve(&op, &Signal::new(vec![4.0, 6.0]).unwrap(), 2.0, 1.0).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn first_difference_n3_matches_elimination() {
        let op = DiffOp::new(3, 1).unwrap();
        let rhs = Signal::new(vec![1.0, 1.0, 1.0]).unwrap();
        let x = banded_spd_solve(&op, &rhs, 1.0, 1.0).unwrap();
        let a = vec![
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 3.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ];
        let expect = gauss_solve(a, vec![1.0; 3]);
        for (u, v) in x.iter().zip(&expect) {
            assert!((u - v).abs() < 1e-12);
        }
        // frozen: (1, 1, 1) by symmetry
        for v in x.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_banded_systems_solve_to_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for r in 1..=4 {
            for &n in &[r + 1, r + 2, 9, 40, 257] {
                let op = DiffOp::new(n, r).unwrap();
                let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
                let (rho1, rho2) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
                let x =
                    banded_spd_solve(&op, &Signal::new(rhs.clone()).unwrap(), rho1, rho2).unwrap();
                let res = residual(&op, rho1, rho2, &x, &rhs);
                assert!(res <= 1e-8 * (1.0 + l2_norm(&rhs)), "r={r} n={n} res={res}");
            }
        }
    }

    #[test]
    fn banded_factor_agrees_with_dense_elimination() {
        let op = DiffOp::new(12, 2).unwrap();
        let d = to_dense(&op);
        let n = 12;
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] += 0.5;
            for j in 0..n {
                for k in 0..d.rows() {
                    a[i][j] += 2.0 * d.get(k, i) * d.get(k, j);
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let expect = gauss_solve(a, rhs.clone());
        let got = banded_spd_solve(&op, &Signal::new(rhs).unwrap(), 0.5, 2.0).unwrap();
        for (u, v) in got.iter().zip(&expect) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_and_cg_backends() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DenseMatrix::from_row_major(
            30,
            6,
            (0..180).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let sys = SpdSystem::new(
            6,
            1.0,
            vec![GramTerm {
                weight: 1.0,
                op: &x,
            }],
        )
        .unwrap();
        let solver = SpdSolver::new(sys).unwrap();
        assert_eq!(solver.kind(), SolverKind::Dense);
        let rhs: Vec<f64> = (0..6).map(|i| i as f64 - 2.0).collect();
        let mut sol = vec![0.0; 6];
        solver.solve(&rhs, &mut sol);
        assert!(residual(&x, 1.0, 1.0, &sol, &rhs) < 1e-10);

        let wide = DiffOp::new(400, 1).unwrap();
        let wide_band = WideBand(&wide);
        let sys = SpdSystem::new(
            400,
            1.0,
            vec![GramTerm {
                weight: 1.0,
                op: &wide_band,
            }],
        )
        .unwrap();
        let solver = SpdSolver::new(sys).unwrap();
        assert_eq!(solver.kind(), SolverKind::ConjugateGradient);
        let rhs: Vec<f64> = (0..400).map(|i| ((i * 7) % 13) as f64).collect();
        let mut sol = vec![0.0; 400];
        solver.solve(&rhs, &mut sol);
        assert!(residual(&wide, 1.0, 1.0, &sol, &rhs) <= 1e-8 * (1.0 + l2_norm(&rhs)));
    }

    /// Reports an artificially large band to force the CG path.
    struct WideBand<'a>(&'a DiffOp);

    impl LinearOp for WideBand<'_> {
        fn rows(&self) -> usize {
            self.0.rows()
        }
        fn cols(&self) -> usize {
            self.0.cols()
        }
        fn apply(&self, x: &[f64], out: &mut [f64]) {
            self.0.apply(x, out)
        }
        fn apply_adjoint(&self, w: &[f64], out: &mut [f64]) {
            self.0.apply_adjoint(w, out)
        }
        fn band_width(&self) -> Option<usize> {
            Some(MAX_BANDED_WIDTH + 1)
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let err = DenseCholesky::factor(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 1, .. }));
    }
}
