//! Least-squares recovery of `(Δ, Ω)` from an observed Stokes time series.
//!
//! Global stage: Nelder–Mead from a fixed grid of 20 starts (plus the caller's
//! guess). Local stage: Levenberg–Marquardt on the best simplex vertex.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{horizontal, stokes_series, StokesSeries};
use crate::linalg::Ket;
use crate::nh::{EigenSystem, HamiltonianParams, NhError, DEFECT_TOLERANCE};

/// Below this `|Ω̂|/κ` the fitted eigenvectors are not trusted.
pub const ILL_CONDITIONED_OMEGA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub kappa: f64,
    pub initial_guess: Option<(f64, Complex64)>,
    /// Treat κ as a fourth free parameter, started from `kappa`.
    pub fit_kappa: bool,
    /// Iteration cap per simplex run.
    pub simplex_iterations: usize,
    pub lm_iterations: usize,
    /// Also start from the fixed grid. Turning this off with an
    /// `initial_guess` set gives a single local fit, useful for warm starts.
    pub grid_restarts: bool,
    pub psi0: Ket,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            kappa: 1.0,
            initial_guess: None,
            fit_kappa: false,
            simplex_iterations: 400,
            lm_iterations: 200,
            grid_restarts: true,
            psi0: horizontal(),
        }
    }
}

impl FitOptions {
    pub fn with_kappa(kappa: f64) -> Self {
        FitOptions { kappa, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub delta_hat: f64,
    pub omega_hat: Complex64,
    pub kappa_hat: f64,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `σ̂² (JᵀJ)⁻¹` over `(Δ, Re Ω, Im Ω[, κ])`, `None` when `JᵀJ` is singular.
    pub covariance_proxy: Option<Vec<Vec<f64>>>,
}

impl FitResult {
    pub fn params(&self) -> HamiltonianParams {
        HamiltonianParams::new(self.delta_hat, self.omega_hat, self.kappa_hat)
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least 4 time points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("|Ω̂| = {:.3e} is too small to extract eigenvectors", .0.omega_hat.norm())]
    IllConditioned(Box<FitResult>),
    #[error("fit did not converge (chi2 = {:.3e})", .0.chi2)]
    NonConvergence(Box<FitResult>),
    #[error("fit has not converged; refusing to extract eigenvectors")]
    NotConverged,
    #[error(transparent)]
    Defective(#[from] NhError),
}

struct Problem<'a> {
    series: &'a StokesSeries,
    psi0: Ket,
    kappa: f64,
    fit_kappa: bool,
    /// `π / max Δt`. Frequencies beyond it alias onto the sampled data.
    nyquist: f64,
}

impl Problem<'_> {
    fn params(&self, x: &[f64]) -> HamiltonianParams {
        let kappa = if self.fit_kappa { x[3].abs() } else { self.kappa };
        HamiltonianParams::new(x[0], Complex64::new(x[1], x[2]), kappa)
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let th = stokes_series(&self.params(x), &self.psi0, &self.series.times);
        th.iter()
            .zip(&self.series.stokes)
            .flat_map(|(t, o)| [t[0] - o[0], t[1] - o[1], t[2] - o[2]])
            .collect()
    }

    /// Keeps `|Δ| + 2|Ω|`, which bounds the coherent splitting, below the
    /// sampling band so aliased copies of the solution are excluded.
    fn resolvable(&self, x: &[f64]) -> bool {
        x[0].abs() + 2.0 * x[1].hypot(x[2]) < self.nyquist
    }

    fn cost(&self, x: &[f64]) -> f64 {
        if !self.resolvable(x) {
            return f64::INFINITY;
        }
        let c: f64 = self.residuals(x).iter().map(|r| r * r).sum();
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }
}

/// `Σ_t Σ_i (S_i^obs − S_i^th)²`.
pub fn chi2(series: &StokesSeries, params: &HamiltonianParams, psi0: &Ket) -> f64 {
    let th = stokes_series(params, psi0, &series.times);
    th.iter()
        .zip(&series.stokes)
        .map(|(t, o)| (0..3).map(|i| (t[i] - o[i]).powi(2)).sum::<f64>())
        .sum()
}

/// Stops when the value spread is relatively small or the simplex has shrunk
/// below `xtol` in every coordinate.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, xtol: f64, max_iter: usize) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= 1e-8 * (best.abs() + 1e-12) || size < xtol {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = x_best.iter().zip(&v.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, iter)
}

fn jacobian(problem: &Problem, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let m = problem.series.times.len() * 3;
    let mut j = DMatrix::zeros(m, n);
    for k in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let rp = problem.residuals(&xp);
        let rm = problem.residuals(&xm);
        for i in 0..m {
            j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    j
}

/// Returns the polished point, its cost, iterations and whether a stopping
/// criterion other than the iteration cap was met.
fn levenberg_marquardt(problem: &Problem, x0: Vec<f64>, h: f64, max_iter: usize) -> (Vec<f64>, f64, usize, bool) {
    let mut x = x0;
    let mut r = DVector::from_vec(problem.residuals(&x));
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        if cost < 1e-30 {
            return (x, cost, iter, true);
        }
        let j = jacobian(problem, &x, h);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if !problem.resolvable(&xn) {
                lambda *= 10.0;
                continue;
            }
            let rn = DVector::from_vec(problem.residuals(&xn));
            let cn = rn.norm_squared();
            if cn.is_finite() && cn <= cost {
                let rel_step = step.norm() / (1e-12 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
                let rel_drop = (cost - cn) / cost.max(1e-300);
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel_step < 1e-12 || rel_drop < 1e-14 {
                    return (x, cost, iter, true);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // Damping saturated: the current point is a minimum to working precision.
            return (x, cost, iter, true);
        }
    }
    (x, cost, iter, false)
}

fn covariance(problem: &Problem, x: &[f64], cost: f64, h: f64) -> Option<Vec<Vec<f64>>> {
    let j = jacobian(problem, x, h);
    let dof = j.nrows().saturating_sub(j.ncols()).max(1) as f64;
    let inv = (j.transpose() * &j).try_inverse()?;
    let sigma2 = cost / dof;
    Some((0..inv.nrows()).map(|r| (0..inv.ncols()).map(|c| sigma2 * inv[(r, c)]).collect()).collect())
}

/// Start points: Δ ∈ {±κ/2}, |Ω| ∈ {0.2κ, 0.6κ}, five equally spaced phases.
fn grid_starts(kappa: f64) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(20);
    for delta in [-0.5, 0.5] {
        for amp in [0.2, 0.6] {
            for k in 0..5 {
                let phi = std::f64::consts::TAU * k as f64 / 5.0;
                out.push([delta * kappa, amp * kappa * phi.cos(), amp * kappa * phi.sin()]);
            }
        }
    }
    out
}

pub fn fit_parameters(series: &StokesSeries, options: &FitOptions) -> Result<FitResult, FitError> {
    let n = series.times.len();
    if n < 4 {
        return Err(FitError::TooFewPoints(n));
    }
    if series.stokes.len() != n {
        return Err(FitError::InvalidInput("times and Stokes rows differ in length".into()));
    }
    if !(options.kappa > 0.0) || !options.kappa.is_finite() {
        return Err(FitError::InvalidInput(format!("kappa must be positive, got {}", options.kappa)));
    }
    if series.times.iter().any(|t| !t.is_finite() || *t < 0.0)
        || series.stokes.iter().flatten().any(|s| !s.is_finite())
    {
        return Err(FitError::InvalidInput("non-finite or negative entries".into()));
    }
    let kappa = options.kappa;
    let max_step = series.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let nyquist = if max_step > 0.0 { std::f64::consts::PI / max_step } else { f64::INFINITY };
    let problem = Problem { series, psi0: options.psi0, kappa, fit_kappa: options.fit_kappa, nyquist };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some((d, w)) = options.initial_guess {
        starts.push(vec![d, w.re, w.im]);
    }
    if options.grid_restarts || starts.is_empty() {
        starts.extend(grid_starts(kappa).iter().map(|s| s.to_vec()));
    }
    if options.fit_kappa {
        for s in &mut starts {
            s.push(kappa);
        }
    }

    let cost = |x: &[f64]| problem.cost(x);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut iterations = 0;
    for s in &starts {
        let (x, fx, it) = nelder_mead(&cost, s, 0.1 * kappa, 1e-4 * kappa, options.simplex_iterations);
        iterations += it;
        if best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x, fx));
        }
    }
    let (x0, _) = best.expect("at least one start");
    let h = 1e-7 * kappa;
    let (x, _, it, converged) = levenberg_marquardt(&problem, x0, h, options.lm_iterations);
    iterations += it;

    let params = problem.params(&x);
    let chi2_value = chi2(series, &params, &options.psi0);
    let result = FitResult {
        delta_hat: params.delta,
        omega_hat: params.omega,
        kappa_hat: params.kappa,
        chi2: chi2_value,
        iterations,
        converged,
        covariance_proxy: covariance(&problem, &x, chi2_value, h),
    };
    if !converged {
        return Err(FitError::NonConvergence(Box::new(result)));
    }
    if result.omega_hat.norm() < ILL_CONDITIONED_OMEGA * kappa {
        return Err(FitError::IllConditioned(Box::new(result)));
    }
    Ok(result)
}

pub fn extract_eigenvectors(fit: &FitResult, kappa: f64) -> Result<EigenSystem, FitError> {
    extract_eigenvectors_with_tol(fit, kappa, DEFECT_TOLERANCE)
}

/// As [`extract_eigenvectors`] with the defect tolerance given in units of κ.
pub fn extract_eigenvectors_with_tol(fit: &FitResult, kappa: f64, tol: f64) -> Result<EigenSystem, FitError> {
    if !fit.converged {
        return Err(FitError::NotConverged);
    }
    let params = HamiltonianParams::new(fit.delta_hat, fit.omega_hat, kappa);
    params.validate()?;
    let es = params.eigensystem();
    Ok(es.check(tol * params.tolerance_scale())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{default_times, evolve};
    use std::f64::consts::PI;

    fn noiseless(params: &HamiltonianParams) -> StokesSeries {
        let traj = evolve(params, &horizontal(), &default_times(params.kappa)).unwrap();
        StokesSeries::from(&traj)
    }

    #[test]
    fn chi2_vanishes_at_truth() {
        let p = HamiltonianParams::from_polar(0.1, 0.25, PI / 3.0, 1.0);
        assert!(chi2(&noiseless(&p), &p, &horizontal()) < 1e-26);
    }

    #[test]
    fn nelder_mead_on_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, fx, _) = nelder_mead(&f, &[-1.2, 1.0], 0.1, 1e-9, 5000);
        assert!(fx < 1e-12, "{fx}");
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn recovers_reference_parameters() {
        let p = HamiltonianParams::from_polar(0.1, 0.25, PI / 3.0, 1.0);
        let fit = fit_parameters(&noiseless(&p), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.delta_hat - 0.1).abs() < 1e-6);
        assert!((fit.omega_hat - p.omega).norm() < 1e-6);
        let recomputed = chi2(&noiseless(&p), &fit.params(), &horizontal());
        assert!((fit.chi2 - recomputed).abs() < 1e-12);
    }

    #[test]
    fn kappa_free_fit() {
        let p = HamiltonianParams::from_polar(-0.2, 0.4, 1.0, 1.0);
        let opts = FitOptions { fit_kappa: true, kappa: 0.8, ..FitOptions::default() };
        let fit = fit_parameters(&noiseless(&p), &opts).unwrap();
        assert!((fit.kappa_hat - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.omega_hat - p.omega).norm() < 1e-6);
        assert_eq!(fit.covariance_proxy.as_ref().map(|c| c.len()), Some(4));
    }

    #[test]
    fn no_coupling_is_ill_conditioned() {
        let p = HamiltonianParams::new(0.1, Complex64::new(0.0, 0.0), 1.0);
        match fit_parameters(&noiseless(&p), &FitOptions::default()) {
            Err(FitError::IllConditioned(fit)) => assert!(fit.omega_hat.norm() < 1e-3),
            other => panic!("expected IllConditioned, got {other:?}"),
        }
    }

    #[test]
    fn phase_sensitivity() {
        let a = HamiltonianParams::from_polar(0.1, 0.25, PI / 3.0, 1.0);
        let b = HamiltonianParams::from_polar(0.1, 0.25, 2.0 * PI / 3.0, 1.0);
        let fa = fit_parameters(&noiseless(&a), &FitOptions::default()).unwrap();
        let fb = fit_parameters(&noiseless(&b), &FitOptions::default()).unwrap();
        let diff = crate::linalg::wrap_angle(fb.omega_hat.arg() - fa.omega_hat.arg());
        assert!((diff - PI / 3.0).abs() < 1e-4);
    }

    #[test]
    fn extraction_contract() {
        let p = HamiltonianParams::from_polar(0.1, 0.25, PI / 3.0, 1.0);
        let fit = fit_parameters(&noiseless(&p), &FitOptions::default()).unwrap();
        let es = extract_eigenvectors(&fit, 1.0).unwrap();
        let truth = p.eigensystem();
        for n in 0..2 {
            assert!((es.e[n] - truth.e[n]).norm() < 1e-6);
            assert!(es.r[n].max_abs_diff(&truth.r[n]) < 1e-6);
        }

        let at_ep = FitResult {
            delta_hat: 0.0,
            omega_hat: Complex64::new(0.25, 0.0),
            kappa_hat: 1.0,
            chi2: 0.0,
            iterations: 0,
            converged: true,
            covariance_proxy: None,
        };
        assert!(matches!(extract_eigenvectors(&at_ep, 1.0), Err(FitError::Defective(NhError::NearDefective { .. }))));
        let unconverged = FitResult { converged: false, ..fit };
        assert!(matches!(extract_eigenvectors(&unconverged, 1.0), Err(FitError::NotConverged)));
    }

    #[test]
    fn rejects_short_series() {
        let s = StokesSeries { times: vec![0.0, 1.0], stokes: vec![[0.0, 0.0, 1.0]; 2] };
        assert!(matches!(fit_parameters(&s, &FitOptions::default()), Err(FitError::TooFewPoints(2))));
    }
}
