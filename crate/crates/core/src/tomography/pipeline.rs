//! Eigensystems recovered from simulated tomography instead of direct
//! diagonalization.
//!
//! Each point runs the whole chain: no-jump evolution, four-projector counts,
//! MLE states, a parameter fit, then diagonalization of the fitted
//! Hamiltonian. Fits warm-start from the previous point and fall back to the
//! full grid when the local fit does not reach `accept_chi2`.

use super::counts::{noiseless_counts, simulate_counts};
use super::fit::{extract_eigenvectors, fit_parameters, FitError, FitOptions, FitResult};
use super::mle::mle_reconstruct;
use super::ProjectionSet;
use crate::evolution::{default_times, evolve, StokesSeries};
use crate::linalg::Ket;
use crate::nh::{EigenSystem, HamiltonianParams};
use crate::topology::{EigenSource, TopologyError};

#[derive(Debug, Clone)]
pub struct TomographySource {
    pub kappa: f64,
    pub times: Vec<f64>,
    /// Prepared state. `|G+⟩` keeps `Δ` identifiable when `Ω = 0`, where
    /// `|H⟩` is stationary.
    pub psi0: Ket,
    /// `None` for noiseless records, otherwise `(N per projector, seed)`.
    pub noise: Option<(u64, u64)>,
    /// A warm-started fit is kept only below this `χ²`.
    pub accept_chi2: f64,
    pub fits: usize,
    pub grid_fits: usize,
    pub max_chi2: f64,
    previous: Option<FitResult>,
}

impl TomographySource {
    pub fn noiseless(kappa: f64) -> Self {
        TomographySource {
            kappa,
            times: default_times(kappa),
            psi0: ProjectionSet::G_PLUS,
            noise: None,
            accept_chi2: 1e-16,
            fits: 0,
            grid_fits: 0,
            max_chi2: 0.0,
            previous: None,
        }
    }

    /// Stokes series a tomography run on `params` would report.
    pub fn measure(&self, params: &HamiltonianParams) -> Result<StokesSeries, TopologyError> {
        let traj = evolve(params, &self.psi0, &self.times).map_err(|e| TopologyError::Source(e.to_string()))?;
        let stokes = traj
            .rho
            .iter()
            .enumerate()
            .map(|(i, rho)| {
                let record = match self.noise {
                    None => noiseless_counts(rho),
                    Some((total, seed)) => simulate_counts(rho, total, seed.wrapping_add(i as u64)),
                };
                mle_reconstruct(&record).stokes
            })
            .collect();
        Ok(StokesSeries { times: self.times.clone(), stokes })
    }

    fn fit(&mut self, series: &StokesSeries) -> Result<FitResult, TopologyError> {
        let base = FitOptions { psi0: self.psi0, ..FitOptions::with_kappa(self.kappa) };
        if let Some(prev) = &self.previous {
            let warm = FitOptions {
                initial_guess: Some((prev.delta_hat, prev.omega_hat)),
                grid_restarts: false,
                ..base.clone()
            };
            self.fits += 1;
            if let Some(fit) = usable(fit_parameters(series, &warm)) {
                if fit.chi2 <= self.accept_chi2 {
                    return Ok(fit);
                }
            }
        }
        self.fits += 1;
        self.grid_fits += 1;
        match fit_parameters(series, &base) {
            Ok(fit) => Ok(fit),
            Err(FitError::IllConditioned(fit)) => Ok(*fit),
            Err(e) => Err(TopologyError::Source(e.to_string())),
        }
    }
}

/// Ill-conditioned fits still carry valid parameters; eigenvectors are
/// extracted from them directly.
fn usable(r: Result<FitResult, FitError>) -> Option<FitResult> {
    match r {
        Ok(fit) => Some(fit),
        Err(FitError::IllConditioned(fit)) => Some(*fit),
        Err(_) => None,
    }
}

impl EigenSource for TomographySource {
    fn eigensystem(&mut self, params: &HamiltonianParams) -> Result<EigenSystem, TopologyError> {
        params.validate()?;
        let series = self.measure(params)?;
        let fit = self.fit(&series)?;
        self.max_chi2 = self.max_chi2.max(fit.chi2);
        let es = extract_eigenvectors(&fit, self.kappa).map_err(|e| TopologyError::Source(e.to_string()))?;
        self.previous = Some(fit);
        Ok(es)
    }
}
