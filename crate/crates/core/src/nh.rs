//! Effective non-Hermitian two-level Hamiltonian and its biorthogonal
//! eigensystem.
//!
//! Reciprocal-space convention used throughout the crate:
//!
//! ```text
//! k_x = Re Ω,   k_y = Im Ω,   k_z = Δ/2
//! ```
//!
//! so that `H − (tr H/2)·I = k_x σ_x + k_y σ_y + (k_z + iκ/4) σ_z` for the
//! default dissipation `κ₀ = 0, κ₁ = κ`. The exceptional points then form the
//! ring `k_z = 0, |Ω| = κ/4`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Bra, Ket, Matrix2c, ZERO};

/// Default coalescence tolerance on `|e₁ − e₂|`, in units of κ.
pub const DEFECT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NhError {
    #[error("invalid Hamiltonian parameters: {0}")]
    InvalidParams(String),
    #[error("eigensystem is near-defective: |e1 - e2| = {gap:e} below tolerance {tol:e}")]
    NearDefective { gap: f64, tol: f64 },
}

/// Physical control point `(Δ, Ω, κ)` with per-basis decay rates.
///
/// Energies are in the same unit as κ; with the defaults κ = 1 every quantity
/// is expressed in units of κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    pub delta: f64,
    pub omega: Complex64,
    pub kappa: f64,
    pub kappa0: f64,
    pub kappa1: f64,
}

impl HamiltonianParams {
    /// Dissipation only on `|1⟩`: κ₀ = 0, κ₁ = κ.
    pub fn new(delta: f64, omega: Complex64, kappa: f64) -> Self {
        HamiltonianParams { delta, omega, kappa, kappa0: 0.0, kappa1: kappa }
    }

    pub fn from_polar(delta: f64, omega_abs: f64, phi: f64, kappa: f64) -> Self {
        Self::new(delta, Complex64::from_polar(omega_abs, phi), kappa)
    }

    /// Point of reciprocal space: `Ω = k_x + i k_y`, `Δ = 2 k_z`.
    pub fn from_k(kx: f64, ky: f64, kz: f64, kappa: f64) -> Self {
        Self::new(2.0 * kz, Complex64::new(kx, ky), kappa)
    }

    /// `(k_x, k_y, k_z)`.
    pub fn k(&self) -> [f64; 3] {
        [self.omega.re, self.omega.im, self.delta / 2.0]
    }

    /// Coupling phase φ = arg Ω.
    pub fn phi(&self) -> f64 {
        self.omega.arg()
    }

    /// Radius of the exceptional ring set by the dissipation contrast.
    pub fn wer_radius(&self) -> f64 {
        (self.kappa1 - self.kappa0).abs() / 4.0
    }

    /// Scale used for relative tolerances. Falls back to 1 in the Hermitian
    /// limit κ = 0.
    pub fn tolerance_scale(&self) -> f64 {
        if self.kappa > 0.0 {
            self.kappa
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<(), NhError> {
        let finite = [self.delta, self.omega.re, self.omega.im, self.kappa, self.kappa0, self.kappa1]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(NhError::InvalidParams("non-finite parameter".into()));
        }
        if self.kappa < 0.0 {
            return Err(NhError::InvalidParams(format!("kappa = {} < 0", self.kappa)));
        }
        if self.kappa0 < 0.0 || self.kappa1 < 0.0 {
            return Err(NhError::InvalidParams("per-basis decay rates must be >= 0".into()));
        }
        Ok(())
    }

    pub fn hamiltonian(&self) -> Matrix2c {
        build_hamiltonian(self)
    }

    pub fn eigensystem(&self) -> EigenSystem {
        eigensystem_with_tol(&self.hamiltonian(), DEFECT_TOLERANCE * self.tolerance_scale())
    }
}

/// `[[Δ − iκ₀/2, Ω*], [Ω, −iκ₁/2]]`.
pub fn build_hamiltonian(p: &HamiltonianParams) -> Matrix2c {
    Matrix2c::new(
        Complex64::new(p.delta, -p.kappa0 / 2.0),
        p.omega.conj(),
        p.omega,
        Complex64::new(0.0, -p.kappa1 / 2.0),
    )
}

/// `k_x σ_x + k_y σ_y + k_z σ_z`.
pub fn dirac_hamiltonian(kx: f64, ky: f64, kz: f64) -> Matrix2c {
    Matrix2c::new(kz.into(), Complex64::new(kx, -ky), Complex64::new(kx, ky), (-kz).into())
}

/// Which root of the characteristic polynomial was labelled `e1`.
///
/// `e1 = tr/2 + s`, `e2 = tr/2 − s` where `s` is the principal square root of
/// the discriminant. The tag records the half-plane the principal root landed
/// in; it flips when a path crosses the branch cut (negative real
/// discriminant), which is where fixed labels swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchTag {
    /// `Im s ≥ 0`.
    Upper,
    /// `Im s < 0`.
    Lower,
}

/// Eigenvalues with biorthogonally normalized right/left eigenvectors.
///
/// Gauge: each right eigenvector has unit Euclidean norm and its first
/// non-negligible component is real positive. Left covectors carry the
/// biorthogonal scale so that `⟨l_n|r_m⟩ = δ_nm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub e: [Complex64; 2],
    pub r: [Ket; 2],
    pub l: [Bra; 2],
    /// Principal square root of the discriminant, `(e1 − e2)/2`.
    pub sqrt_disc: Complex64,
    pub branch_tag: BranchTag,
    /// Set when `|e1 − e2|` is below the tolerance the system was built with.
    pub near_defective: bool,
}

impl EigenSystem {
    pub fn gap(&self) -> f64 {
        (self.e[0] - self.e[1]).norm()
    }

    /// Fails if the eigenvectors are flagged unreliable.
    pub fn check(self, tol: f64) -> Result<Self, NhError> {
        if self.near_defective {
            Err(NhError::NearDefective { gap: self.gap(), tol })
        } else {
            Ok(self)
        }
    }

    /// Biorthogonal overlap `⟨l_n|r_m⟩`.
    pub fn overlap(&self, n: usize, m: usize) -> Complex64 {
        self.l[n].dot(&self.r[m])
    }

    /// Returns a copy whose band `n` pair is regauged `r → c·r`, `l → l/c`.
    pub fn regauged(&self, n: usize, c: Complex64) -> Self {
        let mut out = *self;
        out.r[n] = self.r[n].scale(c);
        out.l[n] = self.l[n].scale(c.inv());
        out
    }
}

/// Eigensystem of an arbitrary 2×2 matrix with the default tolerance.
pub fn eigensystem(h: &Matrix2c) -> EigenSystem {
    eigensystem_with_tol(h, DEFECT_TOLERANCE)
}

pub fn eigensystem_with_tol(h: &Matrix2c, tol: f64) -> EigenSystem {
    let (a, b, c, d) = (h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
    let mean = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let s = (half_diff * half_diff + b * c).sqrt();
    let e = [mean + s, mean - s];
    let branch_tag = if s.im >= 0.0 { BranchTag::Upper } else { BranchTag::Lower };

    let r = [right_vector(h, e[0], 0), right_vector(h, e[1], 1)];

    // Rows of R⁻¹ with R = [r1 r2] are the left eigenvectors.
    let det = r[0][0] * r[1][1] - r[1][0] * r[0][1];
    let l = if det != ZERO {
        [
            Bra([r[1][1] / det, -r[1][0] / det]),
            Bra([-r[0][1] / det, r[0][0] / det]),
        ]
    } else {
        // Exactly defective: R is singular, fall back to r†.
        [r[0].dagger(), r[1].dagger()]
    };

    EigenSystem {
        e,
        r,
        l,
        sqrt_disc: s,
        branch_tag,
        near_defective: (e[0] - e[1]).norm() < tol,
    }
}

/// Kernel vector of `H − eI` in the documented gauge.
fn right_vector(h: &Matrix2c, e: Complex64, slot: usize) -> Ket {
    let (a, b, c, d) = (h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
    let from_row0 = Ket::new(b, e - a);
    let from_row1 = Ket::new(e - d, c);
    let v = if from_row0.norm_sqr() >= from_row1.norm_sqr() { from_row0 } else { from_row1 };
    let v = if v.norm_sqr() > 0.0 {
        v.normalized()
    } else if slot == 0 {
        // H = eI: every vector is an eigenvector.
        Ket::from_real(1.0, 0.0)
    } else {
        Ket::from_real(0.0, 1.0)
    };
    let pivot = if v[0].norm() > 1e-14 { v[0] } else { v[1] };
    v.scale(Complex64::from_polar(1.0, -pivot.arg()))
}

/// Proximity of a control point to the exceptional ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpReport {
    pub distance_to_wer: f64,
    pub eigenvalue_gap: f64,
    pub is_near_ep: bool,
}

pub fn ep_report(p: &HamiltonianParams) -> EpReport {
    ep_report_with_tol(p, DEFECT_TOLERANCE * p.tolerance_scale())
}

pub fn ep_report_with_tol(p: &HamiltonianParams, tol: f64) -> EpReport {
    let [kx, ky, kz] = p.k();
    let radial = kx.hypot(ky) - p.wer_radius();
    let gap = p.eigensystem().gap();
    EpReport { distance_to_wer: radial.hypot(kz), eigenvalue_gap: gap, is_near_ep: gap < tol }
}

/// Closed-form eigenvalues `E± = (2Δ − iκ)/4 ± sqrt(|Ω|² + (2Δ + iκ)²/16)` for
/// the default dissipation (κ₀ = 0, κ₁ = κ).
pub fn closed_form_eigenvalues(p: &HamiltonianParams) -> [Complex64; 2] {
    let centre = Complex64::new(2.0 * p.delta, -p.kappa) / 4.0;
    let shift = Complex64::new(2.0 * p.delta, p.kappa);
    let root = (Complex64::from(p.omega.norm_sqr()) + shift * shift / 16.0).sqrt();
    [centre + root, centre - root]
}

/// Closed-form right eigenvector `Ω*|0⟩ + (E − Δ)|1⟩`, normalized.
pub fn closed_form_right_vector(p: &HamiltonianParams, e: Complex64) -> Ket {
    Ket::new(p.omega.conj(), e - p.delta).normalized()
}
