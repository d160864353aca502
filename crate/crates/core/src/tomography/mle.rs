//! Maximum-likelihood state reconstruction.
//!
//! Each projector is an independent binomial experiment, so the likelihood is
//! concave in the Bloch vector and its unconstrained maximum is the linear
//! inversion estimate. When that estimate is physical it is returned as is;
//! otherwise the likelihood is maximized over `ρ = A†A / tr(A†A)` with
//! `A = [[a0, 0], [a2 + i·a3, a1]]` by damped Newton steps.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::counts::{stokes_from_counts, CountRecord};
use crate::evolution::{rho_from_stokes, stokes_of};
use crate::linalg::Matrix2c;

pub const MLE_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub rho: Matrix2c,
    pub stokes: [f64; 3],
    /// Log-likelihood per herald.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn probabilities(s: [f64; 3]) -> [f64; 4] {
    [(1.0 + s[2]) / 2.0, (1.0 - s[2]) / 2.0, (1.0 + s[0]) / 2.0, (1.0 - s[1]) / 2.0]
}

/// `f ln p` with `0 · ln 0 = 0`.
fn xlogy(f: f64, p: f64) -> f64 {
    if f == 0.0 {
        0.0
    } else {
        f * p.max(f64::MIN_POSITIVE).ln()
    }
}

fn log_likelihood_stokes(freq: &[f64; 4], s: [f64; 3]) -> f64 {
    probabilities(s)
        .iter()
        .zip(freq)
        .map(|(&p, &f)| xlogy(f, p) + xlogy(1.0 - f, 1.0 - p))
        .sum()
}

/// Binomial log-likelihood of `rho` per herald.
pub fn log_likelihood(record: &CountRecord, rho: &Matrix2c) -> f64 {
    log_likelihood_stokes(&record.frequencies(), stokes_of(rho))
}

fn stokes_of_factor(a: &Vector4<f64>) -> [f64; 3] {
    let t = a.norm_squared();
    [
        2.0 * a[1] * a[2] / t,
        2.0 * a[1] * a[3] / t,
        (a[0] * a[0] + a[2] * a[2] + a[3] * a[3] - a[1] * a[1]) / t,
    ]
}

fn factor_of_stokes(s: [f64; 3]) -> Vector4<f64> {
    let rho = rho_from_stokes(s);
    let a1 = rho[(1, 1)].re.max(0.0).sqrt();
    let z = rho[(0, 1)].conj() / a1;
    let a0 = (rho[(0, 0)].re - z.norm_sqr()).max(0.0).sqrt();
    Vector4::new(a0, a1, z.re, z.im)
}

fn gradient(freq: &[f64; 4], a: &Vector4<f64>) -> Vector4<f64> {
    let s = stokes_of_factor(a);
    let p = probabilities(s);
    let dl_dp: Vec<f64> = p
        .iter()
        .zip(freq)
        .map(|(&p, &f)| {
            let pos = if f == 0.0 { 0.0 } else { f / p.max(f64::MIN_POSITIVE) };
            let neg = if f == 1.0 { 0.0 } else { (1.0 - f) / (1.0 - p).max(f64::MIN_POSITIVE) };
            pos - neg
        })
        .collect();
    let dl_ds = [0.5 * dl_dp[2], -0.5 * dl_dp[3], 0.5 * (dl_dp[0] - dl_dp[1])];

    let t = a.norm_squared();
    let num = [2.0 * a[1] * a[2], 2.0 * a[1] * a[3], a[0] * a[0] + a[2] * a[2] + a[3] * a[3] - a[1] * a[1]];
    let dnum = [
        Vector4::new(0.0, 2.0 * a[2], 2.0 * a[1], 0.0),
        Vector4::new(0.0, 2.0 * a[3], 0.0, 2.0 * a[1]),
        Vector4::new(2.0 * a[0], -2.0 * a[1], 2.0 * a[2], 2.0 * a[3]),
    ];
    let mut g = Vector4::zeros();
    for k in 0..3 {
        let ds = dnum[k] / t - a * (2.0 * num[k] / (t * t));
        g += ds * dl_ds[k];
    }
    g
}

pub fn mle_reconstruct(record: &CountRecord) -> MleResult {
    mle_reconstruct_with(record, MLE_MAX_ITER)
}

pub fn mle_reconstruct_with(record: &CountRecord, max_iter: usize) -> MleResult {
    let freq = record.frequencies();
    let s_lin = stokes_from_counts(record);
    let r = s_lin.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r <= 1.0 {
        return finish(&freq, s_lin, 0, true);
    }

    // Warm start just inside the ball.
    let shrink = (1.0 - 1e-6) / r;
    let mut a = factor_of_stokes(s_lin.map(|x| x * shrink)).normalize();
    let mut value = log_likelihood_stokes(&freq, stokes_of_factor(&a));
    let mut lambda = 1e-6;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let g = gradient(&freq, &a);
        // Finite-difference Hessian of the analytic gradient.
        let mut h = Matrix4::zeros();
        let eps = 1e-7;
        for j in 0..4 {
            let mut ap = a;
            let mut am = a;
            ap[j] += eps;
            am[j] -= eps;
            h.set_column(j, &((gradient(&freq, &ap) - gradient(&freq, &am)) / (2.0 * eps)));
        }
        let h = (h + h.transpose()) * 0.5;
        if g.norm() < 1e-12 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let m = Matrix4::identity() * lambda * (1.0 + h.abs().max()) - h;
            if let Some(step) = m.lu().solve(&g) {
                let trial = (a + step).normalize();
                let v = log_likelihood_stokes(&freq, stokes_of_factor(&trial));
                // Near the optimum the likelihood is flat to rounding; the
                // gradient norm still resolves progress there.
                let flat = v >= value - 4.0 * f64::EPSILON * value.abs()
                    && gradient(&freq, &trial).norm() < g.norm();
                if v > value || flat {
                    let ds = stokes_of_factor(&trial)
                        .iter()
                        .zip(stokes_of_factor(&a))
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max);
                    a = trial;
                    value = v;
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = true;
                    if ds < 1e-14 {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No ascent direction left at working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    finish(&freq, stokes_of_factor(&a), iterations, converged)
}

fn finish(freq: &[f64; 4], s: [f64; 3], iterations: usize, converged: bool) -> MleResult {
    let rho = rho_from_stokes(s);
    MleResult {
        rho,
        stokes: s,
        log_likelihood: log_likelihood_stokes(freq, s),
        iterations,
        converged,
    }
}
