//! Sequence vocabulary: signals, quantile levels, difference operators,
//! the check loss, r-th order total variation and the Huber-type risk.
//!
//! All reductions run left to right over the index so results are
//! reproducible bit-for-bit.

use std::io::BufRead;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite real sequence of fixed length `n >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySignal);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Signal(values))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Parses the plain signal format: one decimal per line, blank lines and
    /// `#` comments ignored. A single-column CSV whose header is `value` is
    /// accepted as well.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut values = Vec::new();
        let mut seen_data = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if !seen_data && trimmed.eq_ignore_ascii_case("value") {
                seen_data = true;
                continue;
            }
            seen_data = true;
            let cell = trimmed.trim_end_matches(',').trim().trim_matches('"');
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("expected a number, found {trimmed:?}"),
            })?;
            values.push(v);
        }
        Signal::new(values)
    }

    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for v in &self.0 {
            writeln!(out, "{}", crate::report::fmt_f64(*v))?;
        }
        Ok(())
    }
}

impl Deref for Signal {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Signal {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Signal::new(values)
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        Signal::new(values).map_err(serde::de::Error::custom)
    }
}

/// Quantile level `tau` in the open unit interval.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub const MEDIAN: QuantileLevel = QuantileLevel(0.5);

    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau < 1.0 {
            Ok(QuantileLevel(tau))
        } else {
            Err(Error::InvalidQuantile(tau))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The mirrored level `1 - tau`.
    pub fn mirrored(self) -> Self {
        QuantileLevel(1.0 - self.0)
    }
}

impl<'de> Deserialize<'de> for QuantileLevel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        QuantileLevel::new(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Order `r >= 1` of the discrete difference operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct DiffOrder(usize);

impl DiffOrder {
    pub fn new(r: usize) -> Result<Self> {
        if r >= 1 {
            Ok(DiffOrder(r))
        } else {
            Err(Error::InvalidOrder)
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Fails unless a length-`n` signal has at least one r-th difference.
    pub fn check_len(self, n: usize) -> Result<()> {
        if n > self.0 {
            Ok(())
        } else {
            Err(Error::TooShort {
                len: n,
                order: self.0,
            })
        }
    }

    /// The normalizing factor `n^(r-1)` in front of the r-th order TV.
    pub fn tv_scale(self, n: usize) -> f64 {
        (n as f64).powi(self.0 as i32 - 1)
    }
}

impl<'de> Deserialize<'de> for DiffOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        DiffOrder::new(usize::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Huber-type and squared risks of one error vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub delta_n_sq: f64,
    pub mse: f64,
}

impl RiskValue {
    /// Risks of `estimate - truth`.
    pub fn between(estimate: &[f64], truth: &[f64]) -> Result<Self> {
        check_same_len(estimate.len(), truth.len())?;
        let n = estimate.len() as f64;
        let mut huber = 0.0;
        let mut sq = 0.0;
        for (e, t) in estimate.iter().zip(truth) {
            let v = e - t;
            huber += huber_term(v);
            sq += v * v;
        }
        Ok(RiskValue {
            delta_n_sq: huber / n,
            mse: sq / n,
        })
    }
}

/// `rho_tau(x) = max(tau x, (tau - 1) x)`.
#[inline]
pub fn check_loss(x: f64, tau: QuantileLevel) -> f64 {
    let t = tau.value();
    (t * x).max((t - 1.0) * x)
}

/// Sum of check losses of the residuals `y - theta`.
pub fn check_objective(y: &[f64], theta: &[f64], tau: QuantileLevel) -> Result<f64> {
    check_same_len(y.len(), theta.len())?;
    Ok(check_sum(y, theta, tau))
}

pub(crate) fn check_sum(y: &[f64], theta: &[f64], tau: QuantileLevel) -> f64 {
    y.iter()
        .zip(theta)
        .fold(0.0, |acc, (yi, ti)| acc + check_loss(yi - ti, tau))
}

/// r-th order differences by repeated first differencing; length `n - r`.
pub fn diff_apply(theta: &[f64], r: DiffOrder) -> Result<Vec<f64>> {
    r.check_len(theta.len())?;
    let mut out = theta.to_vec();
    for _ in 0..r.get() {
        first_difference_in_place(&mut out);
    }
    Ok(out)
}

fn first_difference_in_place(v: &mut Vec<f64>) {
    for i in 0..v.len() - 1 {
        v[i] = v[i + 1] - v[i];
    }
    v.pop();
}

/// `n^(r-1) * ||D^(r) theta||_1`.
pub fn tv_r(theta: &[f64], r: DiffOrder) -> Result<f64> {
    let d = diff_apply(theta, r)?;
    Ok(r.tv_scale(theta.len()) * l1_norm(&d))
}

#[inline]
fn huber_term(v: f64) -> f64 {
    let a = v.abs();
    a.min(v * v)
}

/// `(1/n) sum_i min(|v_i|, v_i^2)`.
pub fn delta_n_sq(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    delta_sq(v) / v.len() as f64
}

/// Unnormalized form `n * delta_n_sq(v)`.
pub fn delta_sq(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, &x| acc + huber_term(x))
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x.abs())
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

pub(crate) fn check_same_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// Smallest minimizer of `sum_i rho_tau(y_i - c)` over constants `c`:
/// the order statistic `y_(ceil(n tau))`. Nondecreasing in `tau`.
pub fn empirical_quantile(y: &[f64], tau: QuantileLevel) -> f64 {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((n as f64 * tau.value()).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tau(t: f64) -> QuantileLevel {
        QuantileLevel::new(t).unwrap()
    }

    #[test]
    fn check_loss_examples() {
        assert_eq!(check_loss(2.0, tau(0.5)), 1.0);
        assert!((check_loss(1.0, tau(0.9)) - 0.9).abs() < 1e-15);
        assert!((check_loss(-1.0, tau(0.9)) - 0.1).abs() < 1e-15);
        assert!((check_loss(-10.0, tau(0.3)) - 7.0).abs() < 1e-12);
        assert_eq!(check_loss(0.0, tau(0.2)), 0.0);
    }

    #[test]
    fn diff_examples() {
        assert_eq!(
            diff_apply(&[1.0, 3.0, 6.0], DiffOrder(1)).unwrap(),
            vec![2.0, 3.0]
        );
        assert_eq!(
            diff_apply(&[1.0, 2.0, 4.0, 7.0], DiffOrder(2)).unwrap(),
            vec![1.0, 1.0]
        );
        let lin: Vec<f64> = (1..=6).map(|i| 2.0 * i as f64).collect();
        assert_eq!(diff_apply(&lin, DiffOrder(2)).unwrap(), vec![0.0; 4]);
        assert!(matches!(
            diff_apply(&[1.0, 2.0], DiffOrder(2)),
            Err(Error::TooShort { len: 2, order: 2 })
        ));
    }

    #[test]
    fn tv_examples() {
        let r1 = DiffOrder(1);
        assert_eq!(tv_r(&[1.0, 1.0, 0.0, 0.0, 1.0, 1.0], r1).unwrap(), 2.0);
        assert_eq!(tv_r(&[0.0, 0.0, 1.0], DiffOrder(2)).unwrap(), 3.0);
        let quad: Vec<f64> = (0..9).map(|i| (i * i) as f64 - 3.0 * i as f64).collect();
        assert_eq!(tv_r(&quad, DiffOrder(3)).unwrap(), 0.0);
    }

    #[test]
    fn delta_examples() {
        assert!((delta_n_sq(&[0.5, -2.0, 3.0]) - 1.75).abs() < 1e-15);
        assert_eq!(delta_n_sq(&[0.0, 0.0]), 0.0);
        assert_eq!(delta_n_sq(&[1.0, 1.0]), 1.0);
        assert!((delta_sq(&[0.5, -2.0, 3.0]) - 5.25).abs() < 1e-15);
    }

    #[test]
    fn check_objective_examples() {
        let t = tau(0.5);
        assert_eq!(check_objective(&[1.0, 4.0], &[1.0, 4.0], t).unwrap(), 0.0);
        assert_eq!(check_objective(&[0.0, 2.0], &[0.0, 0.0], t).unwrap(), 1.0);
        let v = check_objective(&[1.0, -1.0], &[0.0, 0.0], tau(0.9)).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(check_objective(&[1.0], &[1.0, 2.0], t).is_err());
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(Signal::new(vec![]), Err(Error::EmptySignal)));
        assert!(matches!(
            Signal::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(Signal::new(vec![f64::INFINITY]).is_err());
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(QuantileLevel::new(bad).is_err());
        }
        assert!(DiffOrder::new(0).is_err());
    }

    #[test]
    fn risk_between() {
        let r = RiskValue::between(&[1.5, 0.0, 3.0], &[1.0, 2.0, 0.0]).unwrap();
        assert!((r.delta_n_sq - 1.75).abs() < 1e-15);
        assert!((r.mse - (0.25 + 4.0 + 9.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn text_format_roundtrip() {
        let src = "# header comment\n1.5\n\n-2\n3e-1\n";
        let s = Signal::read_text(src.as_bytes()).unwrap();
        assert_eq!(s.as_slice(), &[1.5, -2.0, 0.3]);
        let csv = "value\n1\n2\n";
        assert_eq!(
            Signal::read_text(csv.as_bytes()).unwrap().as_slice(),
            &[1.0, 2.0]
        );
        let mut buf = Vec::new();
        s.write_text(&mut buf).unwrap();
        let back = Signal::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        let err = Signal::read_text("1\nabc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(Signal::read_text("nan\n".as_bytes()).is_err());
    }

    #[test]
    fn empirical_quantile_minimizes_check_loss() {
        let y = [3.0, -1.0, 7.0, 2.0, 2.5];
        for t in [0.1, 0.3, 0.5, 0.8, 0.95] {
            let q = empirical_quantile(&y, tau(t));
            let best = check_sum(&y, &[q; 5], tau(t));
            for &c in &y {
                assert!(best <= check_sum(&y, &[c; 5], tau(t)) + 1e-12);
            }
        }
    }
}
