//! Geometric phases and Chern numbers around the exceptional ring.
//!
//! Coordinates are `(k_x, k_y, k_z) = (Re Ω, Im Ω, Δ/2)`; the ring sits at
//! `k_z = 0`, `k_x² + k_y² = (κ/4)²`. Berry phases use the biorthogonal
//! Wilson loop `β_n = −arg Π_p ⟨l_{n,p}|r_{n,p+1}⟩`, Chern numbers the winding
//! of the azimuthal Wilson-loop phase along a meridian of a closed cylinder.

mod berry;
mod chern;
mod paths;
mod source;
mod spectrum;
mod track;

pub use berry::{
    berry_phase, berry_phase_linearized, berry_phase_with, berry_phase_of_track, berry_sweep, loop_encloses_single_ep,
    PRESET_LOOP_WIDTHS,
};
pub use chern::{chern_number, chern_number_with, chern_sweep, ChernMode, PRESET_RADII};
pub use paths::{
    default_phi_samples, rectangular_loop, CylinderManifold, KPath, DEFAULT_DELTA0,
    DEFAULT_MERIDIAN_STEPS, LOOP_HEIGHT, LOOP_LEFT_EDGE,
};
pub use source::{EigenSource, ExactSource};
pub use spectrum::{population_profile, spectrum_along_path, PopulationProfile, SpectrumTrace};
pub use track::{track_branches, BranchTrack};

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::fmt_real;
use crate::nh::NhError;

/// Half-width of the excluded shell around the critical radius, units of κ.
pub const CRITICAL_RADIUS_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("bad geometry: {0}")]
    BadGeometry(String),
    #[error("path point {index} is at an exceptional point (gap {gap:.3e})")]
    PathThroughEP { index: usize, gap: f64 },
    #[error("radius {k_r} is within tolerance of the critical radius {critical}")]
    OnCriticalRadius { k_r: f64, critical: f64 },
    #[error("band must be 1 or 2, got {0}")]
    InvalidBand(usize),
    #[error(transparent)]
    Params(#[from] NhError),
    #[error("eigensystem source failed: {0}")]
    Source(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    BerryPhase,
    ChernNumber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Topological,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyResult {
    pub invariant: Invariant,
    /// 1 or 2.
    pub band: usize,
    /// β in radians, wrapped to `(−π, π]`, or C.
    pub value: f64,
    pub classification: Classification,
    /// Distance from the nearest quantized value.
    pub residual: f64,
    /// Loop traversals used (Berry phase only).
    pub cycles: Option<usize>,
    /// Per-step contributions: `−arg` of each link for β, per-meridian-step
    /// increments of C.
    pub contributions: Vec<f64>,
}

impl TopologyResult {
    pub fn berry(band: usize, value: f64, cycles: Option<usize>, contributions: Vec<f64>) -> Self {
        let residual = value.abs().min(PI - value.abs());
        TopologyResult {
            invariant: Invariant::BerryPhase,
            band,
            value,
            classification: classify(value, PI / 2.0),
            residual,
            cycles,
            contributions,
        }
    }

    pub fn chern(band: usize, value: f64, contributions: Vec<f64>) -> Self {
        TopologyResult {
            invariant: Invariant::ChernNumber,
            band,
            value,
            classification: classify(value, 0.5),
            residual: (value - value.round()).abs(),
            cycles: None,
            contributions,
        }
    }

    /// The quantized value nearest to `value` (β: 0 or ±π; C: an integer).
    pub fn quantized(&self) -> f64 {
        match self.invariant {
            Invariant::BerryPhase if self.value.abs() > PI / 2.0 => PI.copysign(self.value),
            Invariant::BerryPhase => 0.0,
            Invariant::ChernNumber => self.value.round(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

fn classify(value: f64, half_quantum: f64) -> Classification {
    if value.abs() > half_quantum {
        Classification::Topological
    } else {
        Classification::Trivial
    }
}

pub(crate) fn band_index(band: usize) -> Result<usize, TopologyError> {
    match band {
        1 | 2 => Ok(band - 1),
        _ => Err(TopologyError::InvalidBand(band)),
    }
}

/// One sweep point: both bands, or the reason the point failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub parameter: f64,
    pub bands: Vec<TopologyResult>,
    pub error: Option<String>,
}

impl SweepEntry {
    pub(crate) fn from_result(parameter: f64, r: Result<Vec<TopologyResult>, TopologyError>) -> Self {
        match r {
            Ok(bands) => SweepEntry { parameter, bands, error: None },
            Err(e) => SweepEntry { parameter, bands: Vec::new(), error: Some(e.to_string()) },
        }
    }
}

/// Writes `parameter, value1, value2, residual1, residual2, error` rows.
/// Failed points carry `NaN` values and the error text.
pub fn write_sweep_csv<W: Write>(entries: &[SweepEntry], parameter_name: &str, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([parameter_name, "value1", "value2", "residual1", "residual2", "error"])?;
    for e in entries {
        let get = |n: usize, f: fn(&TopologyResult) -> f64| {
            e.bands.get(n).map(f).map(fmt_real).unwrap_or_else(|| "NaN".into())
        };
        out.write_record([
            fmt_real(e.parameter),
            get(0, |r| r.value),
            get(1, |r| r.value),
            get(0, |r| r.residual),
            get(1, |r| r.residual),
            e.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
