//! Closed-form proximal maps and Euclidean projections.

use crate::signal::QuantileLevel;

/// `argmin_u rho_tau(u) + (u - v)^2 / (2 gamma)`: an asymmetric soft
/// threshold with dead zone `[-gamma (1 - tau), gamma tau]`.
#[inline]
pub fn prox_check(v: f64, tau: QuantileLevel, gamma: f64) -> f64 {
    let t = tau.value();
    if v > gamma * t {
        v - gamma * t
    } else if v < -gamma * (1.0 - t) {
        v + gamma * (1.0 - t)
    } else {
        0.0
    }
}

/// `sign(v) * max(|v| - kappa, 0)`.
#[inline]
pub fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// Euclidean projection onto `{x : ||x||_1 <= radius}` by sorting the
/// magnitudes and locating the soft threshold.
pub fn l1_ball_project(beta: &[f64], radius: f64) -> Vec<f64> {
    let mut out = beta.to_vec();
    l1_ball_project_in_place(&mut out, radius);
    out
}

pub fn l1_ball_project_in_place(x: &mut [f64], radius: f64) {
    let radius = radius.max(0.0);
    let norm: f64 = x.iter().fold(0.0, |acc, v| acc + v.abs());
    if norm <= radius {
        return;
    }
    if radius == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let theta = l1_threshold(x, radius);
    for v in x.iter_mut() {
        *v = soft_threshold(*v, theta);
    }
    // rounding can leave the result a hair outside the ball
    let after: f64 = x.iter().fold(0.0, |acc, v| acc + v.abs());
    if after > radius {
        let s = radius / after;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// Threshold `t >= 0` with `sum_i max(|x_i| - t, 0) = radius`, assuming
/// `||x||_1 > radius > 0`.
fn l1_threshold(x: &[f64], radius: f64) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (k + 1) as f64;
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

/// Least-squares projection onto nondecreasing sequences (pool adjacent
/// violators, unit weights).
pub fn isotonic_nondecreasing(values: &mut [f64]) {
    // blocks as (sum, count); the running mean of each block is sum / count
    let mut sums: Vec<f64> = Vec::with_capacity(values.len());
    let mut counts: Vec<usize> = Vec::with_capacity(values.len());
    for &v in values.iter() {
        sums.push(v);
        counts.push(1);
        while sums.len() > 1 {
            let k = sums.len() - 1;
            if sums[k - 1] / counts[k - 1] as f64 > sums[k] / counts[k] as f64 {
                let (s, c) = (sums.pop().unwrap(), counts.pop().unwrap());
                sums[k - 1] += s;
                counts[k - 1] += c;
            } else {
                break;
            }
        }
    }
    let mut i = 0;
    for (s, c) in sums.iter().zip(&counts) {
        let mean = s / *c as f64;
        for v in &mut values[i..i + c] {
            *v = mean;
        }
        i += c;
    }
}
