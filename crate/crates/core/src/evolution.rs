//! No-jump dynamics under `U(t) = exp(−iHt)` and the observables recorded
//! from it.
//!
//! Stokes convention (shared with [`crate::tomography`]):
//!
//! | parameter | operator | from projections        |
//! |-----------|----------|-------------------------|
//! | S1        | σ_x      | `p(G+) − p(G+⊥)`        |
//! | S2        | σ_y      | `1 − 2·p(G−)`           |
//! | S3        | σ_z      | `p(H) − p(V)`           |
//!
//! with `|G+⟩ = (|H⟩+|V⟩)/√2` and `|G−⟩ = (|H⟩−i|V⟩)/√2`, the `−1` eigenstate
//! of σ_y.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Ket, Matrix2c, I, ONE};
use crate::nh::HamiltonianParams;

/// Below this eigenvalue gap (units of κ) the defect-safe formula is used.
pub const SPECTRAL_GAP_THRESHOLD: f64 = 1e-6;

/// Default trajectory grid: 81 points over κt ∈ [0, 10].
pub const DEFAULT_POINTS: usize = 81;
pub const DEFAULT_T_MAX: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("initial state has zero norm")]
    DegenerateState,
    #[error("time grid must be non-negative and ascending")]
    BadTimeGrid,
    #[error(transparent)]
    Params(#[from] crate::nh::NhError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trajectory csv: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Propagator {
    pub u: Matrix2c,
    pub t: f64,
    pub params: HamiltonianParams,
}

/// `sin(z)/z`, analytic at the origin.
fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        ONE - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Matrix exponential `exp(−iHt)` of an arbitrary 2×2 matrix.
///
/// Spectral sum over biorthogonal projectors when the eigenvalues are split by
/// more than `gap_threshold`; otherwise
/// `e^{−iēt}[cos(gt) I − i t·sinc(gt) (H − ēI)]` with `ē = tr/2` and `g` the
/// half-gap, which stays exact at a defective point.
pub fn exp_minus_i_ht(h: &Matrix2c, t: f64, gap_threshold: f64) -> Matrix2c {
    let es = crate::nh::eigensystem(h);
    if es.gap() > gap_threshold {
        let mut u = Matrix2c::zero();
        for n in 0..2 {
            let phase = (-I * es.e[n] * t).exp();
            u = u + Matrix2c::outer(&es.r[n], &es.l[n]).scale(phase);
        }
        u
    } else {
        let mean = h.trace() * 0.5;
        let g = es.sqrt_disc;
        let traceless = *h - Matrix2c::identity().scale(mean);
        let gt = g * t;
        let body = Matrix2c::identity().scale(gt.cos()) - traceless.scale(I * t * sinc(gt));
        body.scale((-I * mean * t).exp())
    }
}

pub fn propagator(params: &HamiltonianParams, t: f64) -> Propagator {
    let u = exp_minus_i_ht(
        &params.hamiltonian(),
        t,
        SPECTRAL_GAP_THRESHOLD * params.tolerance_scale(),
    );
    Propagator { u, t, params: *params }
}

/// `(S1, S2, S3)` of a density matrix.
pub fn stokes_of(rho: &Matrix2c) -> [f64; 3] {
    let s1 = 2.0 * rho[(0, 1)].re;
    let s2 = 2.0 * rho[(1, 0)].im;
    let s3 = (rho[(0, 0)] - rho[(1, 1)]).re;
    [s1, s2, s3]
}

/// Density matrix with the given Bloch vector.
pub fn rho_from_stokes(s: [f64; 3]) -> Matrix2c {
    Matrix2c::new(
        Complex64::new((1.0 + s[2]) / 2.0, 0.0),
        Complex64::new(s[0] / 2.0, -s[1] / 2.0),
        Complex64::new(s[0] / 2.0, s[1] / 2.0),
        Complex64::new((1.0 - s[2]) / 2.0, 0.0),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub rho: Vec<Matrix2c>,
    /// Raw `‖ψ(t)‖² / ‖ψ(0)‖²`.
    pub survival: Vec<f64>,
    pub stokes: Vec<[f64; 3]>,
    pub p0: Vec<f64>,
}

/// `n` uniform points over `[0, t_max]`.
pub fn uniform_times(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Default grid in units of 1/κ.
pub fn default_times(kappa: f64) -> Vec<f64> {
    let scale = if kappa > 0.0 { 1.0 / kappa } else { 1.0 };
    uniform_times(DEFAULT_T_MAX * scale, DEFAULT_POINTS)
}

/// The prepared state `|H⟩ = (1, 0)ᵀ`.
pub fn horizontal() -> Ket {
    Ket::from_real(1.0, 0.0)
}

pub fn evolve(
    params: &HamiltonianParams,
    psi0: &Ket,
    times: &[f64],
) -> Result<StateTrajectory, EvolutionError> {
    params.validate()?;
    let norm0 = psi0.norm_sqr();
    if !(norm0 > 0.0) || !norm0.is_finite() {
        return Err(EvolutionError::DegenerateState);
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite())
        || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(EvolutionError::BadTimeGrid);
    }

    let mut traj = StateTrajectory {
        times: times.to_vec(),
        rho: Vec::with_capacity(times.len()),
        survival: Vec::with_capacity(times.len()),
        stokes: Vec::with_capacity(times.len()),
        p0: Vec::with_capacity(times.len()),
    };
    for &t in times {
        let psi = propagator(params, t).u.apply(psi0);
        let norm = psi.norm_sqr();
        let rho = psi.normalized().projector();
        traj.survival.push(norm / norm0);
        traj.stokes.push(stokes_of(&rho));
        traj.p0.push(rho[(0, 0)].re);
        traj.rho.push(rho);
    }
    Ok(traj)
}

/// Stokes vectors of `U(t)|ψ0⟩` without building the full trajectory record.
/// Diagonalizes once and reuses the spectral form for every time point.
pub fn stokes_series(params: &HamiltonianParams, psi0: &Ket, times: &[f64]) -> Vec<[f64; 3]> {
    let h = params.hamiltonian();
    let es = crate::nh::eigensystem(&h);
    let threshold = SPECTRAL_GAP_THRESHOLD * params.tolerance_scale();
    let spectral = es.gap() > threshold;
    let coeff = [es.l[0].dot(psi0), es.l[1].dot(psi0)];
    times
        .iter()
        .map(|&t| {
            let psi = if spectral {
                let c0 = (-I * es.e[0] * t).exp() * coeff[0];
                let c1 = (-I * es.e[1] * t).exp() * coeff[1];
                Ket::new(es.r[0][0] * c0 + es.r[1][0] * c1, es.r[0][1] * c0 + es.r[1][1] * c1)
            } else {
                exp_minus_i_ht(&h, t, threshold).apply(psi0)
            };
            stokes_of(&psi.normalized().projector())
        })
        .collect()
}

/// Header of the trajectory CSV.
pub const TRAJECTORY_COLUMNS: [&str; 8] =
    ["t", "p0", "ReRho01", "ImRho01", "S1", "S2", "S3", "survival"];

/// Full-precision real formatting used by every CSV writer (17 significant
/// digits).
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

impl StateTrajectory {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EvolutionError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRAJECTORY_COLUMNS)?;
        for i in 0..self.times.len() {
            let rho01 = self.rho[i][(0, 1)];
            let s = self.stokes[i];
            out.write_record(
                [self.times[i], self.p0[i], rho01.re, rho01.im, s[0], s[1], s[2], self.survival[i]]
                    .map(fmt_real),
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Observed Stokes time series, the input of parameter fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesSeries {
    pub times: Vec<f64>,
    pub stokes: Vec<[f64; 3]>,
}

impl From<&StateTrajectory> for StokesSeries {
    fn from(t: &StateTrajectory) -> Self {
        StokesSeries { times: t.times.clone(), stokes: t.stokes.clone() }
    }
}

impl StokesSeries {
    /// Reads the `t`, `S1`, `S2`, `S3` columns of a trajectory CSV.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, EvolutionError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| EvolutionError::Format(format!("missing column {name}")))
        };
        let idx = [col("t")?, col("S1")?, col("S2")?, col("S3")?];
        let mut series = StokesSeries { times: Vec::new(), stokes: Vec::new() };
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut vals = [0.0; 4];
            for (v, &i) in vals.iter_mut().zip(&idx) {
                let field = rec.get(i).unwrap_or("");
                *v = field.trim().parse().map_err(|_| {
                    EvolutionError::Format(format!("row {}: cannot parse {field:?}", line + 1))
                })?;
            }
            series.times.push(vals[0]);
            series.stokes.push([vals[1], vals[2], vals[3]]);
        }
        Ok(series)
    }
}
