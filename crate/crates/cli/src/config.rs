//! Experiment configuration. Every physical quantity is in units of κ.

use std::f64::consts::PI;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use wer_lab_core::linalg::Ket;
use wer_lab_core::tomography::ProjectionSet;
use wer_lab_core::topology::{DEFAULT_DELTA0, DEFAULT_MERIDIAN_STEPS};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Eig,
    Evolve,
    Compile,
    TomoFit,
    Berry,
    Chern,
    Spectrum,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::Evolve => "evolve",
            Command::Compile => "compile",
            Command::TomoFit => "tomo-fit",
            Command::Berry => "berry",
            Command::Chern => "chern",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
        }
    }

    /// Format used when the config does not name one.
    pub fn default_format(self) -> Format {
        match self {
            Command::Evolve | Command::Spectrum | Command::Sweep => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Few-azimuth sampling with a meridian winding.
    #[serde(rename = "paper")]
    #[value(name = "paper")]
    Sampled,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Berry,
    Chern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialState {
    H,
    V,
    #[serde(rename = "G+")]
    GPlus,
    #[serde(rename = "G-")]
    GMinus,
}

impl InitialState {
    pub fn ket(self) -> Ket {
        match self {
            InitialState::H => ProjectionSet::H,
            InitialState::V => ProjectionSet::V,
            InitialState::GPlus => ProjectionSet::G_PLUS,
            InitialState::GMinus => ProjectionSet::G_MINUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub delta: f64,
    pub omega_abs: f64,
    pub omega_phase: f64,
    pub kappa: f64,
    pub psi0: InitialState,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig { delta: 0.1, omega_abs: 0.25, omega_phase: PI / 3.0, kappa: 1.0, psi0: InitialState::H }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub d: f64,
    pub m: usize,
    #[serde(rename = "k_R")]
    pub k_r: f64,
    pub delta0: f64,
    pub phi_samples: Vec<f64>,
    /// Forced number of loop traversals; automatic when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    pub meridian_steps: usize,
    /// Azimuthal samples of the oracle Chern grid.
    pub azimuths: usize,
    /// Single band (1 or 2); both when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<usize>,
    pub sweep: SweepKind,
    /// Sweep values; the preset grid when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            d: 0.5,
            m: 200,
            k_r: 0.35,
            delta0: DEFAULT_DELTA0,
            phi_samples: vec![0.0, PI / 3.0, 2.0 * PI / 3.0],
            cycles: None,
            meridian_steps: DEFAULT_MERIDIAN_STEPS,
            azimuths: 128,
            band: None,
            sweep: SweepKind::Berry,
            values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_max: f64,
    pub points: usize,
    /// Evolution time compiled by `compile`.
    pub t: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { t_max: 10.0, points: 81, t: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyConfig {
    /// Heralded events per projector.
    pub counts: u64,
    pub noiseless: bool,
    pub fit_kappa: bool,
    /// Trajectory CSV to fit instead of simulated counts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        TomographyConfig { counts: 10_000, noiseless: false, fit_kappa: false, trajectory: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// File name inside the output directory; `<command>.<format>` if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub tomography: TomographyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
}

/// Parses and validates a JSON config, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::schema(path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::unit(path, format!("must be positive, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::unit(path, format!("must be non-negative, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::unit(path, format!("must be finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        finite("params.delta", p.delta)?;
        non_negative("params.omega_abs", p.omega_abs)?;
        finite("params.omega_phase", p.omega_phase)?;
        positive("params.kappa", p.kappa)?;

        let g = &self.geometry;
        positive("geometry.d", g.d)?;
        if g.m == 0 {
            return Err(CliError::unit("geometry.m", "must be positive"));
        }
        non_negative("geometry.k_R", g.k_r)?;
        positive("geometry.delta0", g.delta0)?;
        for (i, phi) in g.phi_samples.iter().enumerate() {
            finite(&format!("geometry.phi_samples[{i}]"), *phi)?;
        }
        if g.cycles == Some(0) {
            return Err(CliError::unit("geometry.cycles", "must be positive"));
        }
        if let Some(b) = g.band {
            if b != 1 && b != 2 {
                return Err(CliError::schema("geometry.band", format!("band must be 1 or 2, got {b}")));
            }
        }
        if let Some(values) = &g.values {
            for (i, v) in values.iter().enumerate() {
                let path = format!("geometry.values[{i}]");
                match g.sweep {
                    SweepKind::Berry => positive(&path, *v)?,
                    SweepKind::Chern => non_negative(&path, *v)?,
                }
            }
        }

        positive("time.t_max", self.time.t_max)?;
        non_negative("time.t", self.time.t)?;
        if self.time.points < 2 {
            return Err(CliError::unit("time.points", "need at least 2 points"));
        }
        if self.tomography.counts == 0 {
            return Err(CliError::unit("tomography.counts", "must be positive"));
        }
        Ok(())
    }
}
