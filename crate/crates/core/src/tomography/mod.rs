//! Simulated polarization tomography and parameter recovery.
//!
//! Four analysis projectors are measured, each with its own `N` heralded
//! events: `|H⟩`, `|V⟩`, `|G+⟩ = (|H⟩+|V⟩)/√2` and `|G−⟩ = (|H⟩−i|V⟩)/√2`.
//! The Stokes convention is the one documented in [`crate::evolution`]:
//! `S3 = p_H − p_V`, `S1 = 2p_{G+} − 1`, `S2 = 1 − 2p_{G−}`.

mod counts;
mod fit;
mod mle;
mod pipeline;

pub use counts::{
    noiseless_counts, projection_probabilities, simulate_counts, simulate_series, stokes_from_counts,
    CountRecord, NOISELESS_TOTAL,
};
pub use fit::{
    extract_eigenvectors, extract_eigenvectors_with_tol, fit_parameters, chi2, FitError, FitOptions,
    FitResult,
};
pub use pipeline::TomographySource;
pub use mle::{log_likelihood, mle_reconstruct, mle_reconstruct_with, MleResult, MLE_MAX_ITER};

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::linalg::Ket;

/// Names and states of the four analysis projectors, in record order.
pub struct ProjectionSet;

impl ProjectionSet {
    pub const NAMES: [&'static str; 4] = ["H", "V", "G+", "G-"];
    pub const H: Ket = Ket::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    pub const V: Ket = Ket::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    pub const G_PLUS: Ket =
        Ket::new(Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(FRAC_1_SQRT_2, 0.0));
    pub const G_MINUS: Ket =
        Ket::new(Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, -FRAC_1_SQRT_2));

    pub const fn states() -> [Ket; 4] {
        [Self::H, Self::V, Self::G_PLUS, Self::G_MINUS]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projectors_are_unit_norm() {
        for k in ProjectionSet::states() {
            assert!((k.norm() - 1.0).abs() < 1e-15);
        }
    }
}
