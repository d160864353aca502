//! Command dispatch. Each command produces a JSON payload, optionally a CSV
//! body, and a one-line summary; [`run`] renders and writes them.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use wer_lab_core::evolution::{evolve, fmt_real, propagator, uniform_times, StokesSeries};
use wer_lab_core::nh::{ep_report, HamiltonianParams};
use wer_lab_core::optics::{compile_evolution, reconstruct, WavePlateProgram};
use wer_lab_core::tomography::{
    fit_parameters, mle_reconstruct, noiseless_counts, simulate_series, CountRecord, FitOptions,
};
use wer_lab_core::topology::{
    berry_phase, berry_phase_of_track, berry_sweep, chern_number, chern_sweep, rectangular_loop,
    spectrum_along_path, track_branches, write_sweep_csv, ChernMode, CylinderManifold, KPath,
    TopologyResult, PRESET_LOOP_WIDTHS, PRESET_RADII,
};

use crate::config::{Command, ExperimentConfig, Format, Mode, SweepKind};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub kappa: Option<f64>,
}

/// What a command computed, before rendering.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub payload: Value,
    pub csv: Option<Vec<u8>>,
    pub summary: String,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub flags: Vec<String>,
}

/// Written as the JSON output. `wall_time` is reported on the summary line
/// only, so the file depends on nothing but config, seed and version.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub diagnostics: Diagnostics,
    pub result: Value,
    #[serde(skip)]
    pub summary: String,
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(skip)]
    pub output: PathBuf,
}

/// Merges overrides, fixes the command and drops settings the command does
/// not read, so the echoed config only changes when the result can.
pub fn resolve(mut config: ExperimentConfig, command: Command, o: &Overrides) -> Result<ExperimentConfig, CliError> {
    if let Some(c) = config.command {
        if c != command {
            return Err(CliError::schema("command", format!("config is for `{}`, not `{}`", c.name(), command.name())));
        }
    }
    config.command = Some(command);
    if let Some(k) = o.kappa {
        config.params.kappa = k;
    }
    let uses_seed = command == Command::TomoFit && config.tomography.trajectory.is_none() && !config.tomography.noiseless;
    config.seed = if uses_seed { Some(o.seed.or(config.seed).unwrap_or(0)) } else { None };
    let uses_mode = command == Command::Chern || (command == Command::Sweep && config.geometry.sweep == SweepKind::Chern);
    config.mode = if uses_mode { Some(o.mode.or(config.mode).unwrap_or(Mode::Sampled)) } else { None };
    config.validate()?;
    Ok(config)
}

fn kappa(c: &ExperimentConfig) -> f64 {
    c.params.kappa
}

pub(crate) fn hamiltonian_params(c: &ExperimentConfig) -> HamiltonianParams {
    let k = kappa(c);
    HamiltonianParams::from_polar(c.params.delta * k, c.params.omega_abs * k, c.params.omega_phase, k)
}

fn params_json(p: &HamiltonianParams) -> Value {
    json!({ "delta": p.delta, "omega": p.omega, "kappa": p.kappa, "k": p.k() })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn csv_bytes<E>(f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Vec<u8>
where
    E: std::fmt::Debug,
{
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

fn bands(c: &ExperimentConfig) -> Vec<usize> {
    c.geometry.band.map_or(vec![1, 2], |b| vec![b])
}

fn label(r: &TopologyResult) -> &'static str {
    match r.classification {
        wer_lab_core::topology::Classification::Topological => "topological",
        wer_lab_core::topology::Classification::Trivial => "trivial",
    }
}

fn eig(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = hamiltonian_params(c);
    p.validate()?;
    let es = p.eigensystem();
    let ep = ep_report(&p);
    let mut flags = Vec::new();
    if es.near_defective {
        flags.push("near_defective".to_string());
    }
    let summary = format!(
        "eig Δ={:.3}κ |Ω|={:.3}κ E1={:.6}{:+.6}i E2={:.6}{:+.6}i gap={:.3e}",
        c.params.delta, c.params.omega_abs, es.e[0].re, es.e[0].im, es.e[1].re, es.e[1].im, es.gap()
    );
    Ok(Outcome {
        payload: json!({ "params": params_json(&p), "eigensystem": to_value(&es), "ep": to_value(&ep) }),
        csv: None,
        summary,
        flags,
    })
}

fn times(c: &ExperimentConfig) -> Vec<f64> {
    uniform_times(c.time.t_max / kappa(c), c.time.points)
}

fn evolve_cmd(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = hamiltonian_params(c);
    let traj = evolve(&p, &c.params.psi0.ket(), &times(c))?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    let last = traj.times.len() - 1;
    let summary = format!(
        "evolve Δ={:.3}κ |Ω|={:.3}κ points={} p0(end)={:.6} survival(end)={:.6e}",
        c.params.delta, c.params.omega_abs, traj.times.len(), traj.p0[last], traj.survival[last]
    );
    Ok(Outcome { payload: to_value(&traj), csv: Some(buf), summary, flags: Vec::new() })
}

/// The exported program together with its reconstruction error against the
/// exact propagator.
pub(crate) fn compiled(p: &HamiltonianParams, t: f64) -> Result<(WavePlateProgram, f64), CliError> {
    let prog = compile_evolution(p, t)?;
    let target = propagator(p, t).u;
    let err = reconstruct(&prog).max_abs_diff(&target);
    Ok((prog, err))
}

fn program_json(prog: &WavePlateProgram) -> Value {
    serde_json::from_str(&prog.to_json()).expect("program JSON is valid")
}

fn compile_cmd(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = hamiltonian_params(c);
    let t = c.time.t / kappa(c);
    let (prog, err) = compiled(&p, t)?;
    let summary = format!(
        "compile κt={:.3} scale={:.6} reconstruction error={:.2e}",
        c.time.t, prog.scale, err
    );
    Ok(Outcome {
        payload: json!({ "t": t, "program": program_json(&prog), "reconstruction_error": err }),
        csv: None,
        summary,
        flags: Vec::new(),
    })
}

fn stokes_csv(series: &StokesSeries) -> Vec<u8> {
    csv_bytes(|buf| -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(buf);
        out.write_record(["t", "S1", "S2", "S3"])?;
        for (t, s) in series.times.iter().zip(&series.stokes) {
            out.write_record([*t, s[0], s[1], s[2]].map(fmt_real))?;
        }
        out.flush()?;
        Ok(())
    })
}

fn tomo_fit(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let k = kappa(c);
    let psi0 = c.params.psi0.ket();
    let (series, records, truth): (StokesSeries, Option<Vec<CountRecord>>, Option<HamiltonianParams>) =
        match &c.tomography.trajectory {
            Some(path) => {
                let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
                (StokesSeries::read_csv(file)?, None, None)
            }
            None => {
                let p = hamiltonian_params(c);
                let traj = evolve(&p, &psi0, &times(c))?;
                let records = if c.tomography.noiseless {
                    traj.rho.iter().map(noiseless_counts).collect()
                } else {
                    simulate_series(&traj.rho, c.tomography.counts, c.seed.unwrap_or(0))
                };
                let stokes = records.iter().map(|r| mle_reconstruct(r).stokes).collect();
                (StokesSeries { times: traj.times.clone(), stokes }, Some(records), Some(p))
            }
        };
    let options = FitOptions { psi0, fit_kappa: c.tomography.fit_kappa, ..FitOptions::with_kappa(k) };
    let fit = fit_parameters(&series, &options)?;
    let mut flags = Vec::new();
    if !fit.converged {
        flags.push("not_converged".to_string());
    }
    let summary = format!(
        "tomo-fit Δ̂={:.6}κ Ω̂=({:.6}{:+.6}i)κ χ²={:.3e}",
        fit.delta_hat / k,
        fit.omega_hat.re / k,
        fit.omega_hat.im / k,
        fit.chi2
    );
    Ok(Outcome {
        payload: json!({
            "truth": truth.as_ref().map(params_json),
            "records": records,
            "stokes": to_value(&series),
            "fit": to_value(&fit),
        }),
        csv: Some(stokes_csv(&series)),
        summary,
        flags,
    })
}

fn loop_path(c: &ExperimentConfig) -> Result<KPath, CliError> {
    Ok(rectangular_loop(c.geometry.d * kappa(c), c.geometry.m, kappa(c))?)
}

fn berry_cmd(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let path = loop_path(c)?;
    let results = match c.geometry.cycles {
        None => bands(c).into_iter().map(|b| berry_phase(&path, b)).collect::<Result<Vec<_>, _>>()?,
        Some(n) => {
            let track = track_branches(&path.clone().with_cycles(n))?;
            bands(c)
                .into_iter()
                .map(|b| {
                    let mut r = berry_phase_of_track(&track, b)?;
                    r.cycles = Some(n);
                    Ok(r)
                })
                .collect::<Result<Vec<_>, CliError>>()?
        }
    };
    let parts: Vec<String> = results
        .iter()
        .map(|r| format!("band={} β={:.3}π [{}]", r.band, r.value / std::f64::consts::PI, label(r)))
        .collect();
    Ok(Outcome {
        payload: to_value(&results),
        csv: None,
        summary: format!("berry d={:.2}κ {}", c.geometry.d, parts.join(" ")),
        flags: Vec::new(),
    })
}

pub(crate) fn manifold(c: &ExperimentConfig, k_r: f64) -> CylinderManifold {
    let k = kappa(c);
    let mut m = CylinderManifold::new(k_r * k, k);
    m.delta0 = c.geometry.delta0 * k;
    m.phi_samples = c.geometry.phi_samples.clone();
    m.steps = c.geometry.meridian_steps;
    m
}

fn chern_mode(c: &ExperimentConfig) -> ChernMode {
    match c.mode.unwrap_or(Mode::Sampled) {
        Mode::Sampled => ChernMode::Sampled,
        Mode::Oracle => ChernMode::Oracle { azimuths: c.geometry.azimuths },
    }
}

fn chern_cmd(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = manifold(c, c.geometry.k_r);
    let mode = chern_mode(c);
    let results = bands(c).into_iter().map(|b| chern_number(&m, b, mode)).collect::<Result<Vec<_>, _>>()?;
    let parts: Vec<String> =
        results.iter().map(|r| format!("band={} C={:.4} [{}]", r.band, r.value, label(r))).collect();
    let mode_name = if matches!(mode, ChernMode::Sampled) { "paper" } else { "oracle" };
    Ok(Outcome {
        payload: to_value(&results),
        csv: None,
        summary: format!("chern k_R={:.3}κ mode={mode_name} {}", c.geometry.k_r, parts.join(" ")),
        flags: Vec::new(),
    })
}

fn spectrum_cmd(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let trace = spectrum_along_path(&loop_path(c)?)?;
    let csv = csv_bytes(|buf| trace.write_csv(buf));
    let summary = format!("spectrum d={:.2}κ points={} cycles={}", c.geometry.d, trace.k.len(), trace.cycles);
    Ok(Outcome { payload: to_value(&trace), csv: Some(csv), summary, flags: Vec::new() })
}

/// Sweep points run in the global work pool; `collect` keeps input order.
fn sweep_cmd(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let k = kappa(c);
    let (name, entries) = match c.geometry.sweep {
        SweepKind::Berry => {
            let values = c.geometry.values.clone().unwrap_or_else(|| PRESET_LOOP_WIDTHS.to_vec());
            let m = c.geometry.m;
            let entries: Vec<_> =
                values.par_iter().map(|d| berry_sweep(&[d * k], m, k).remove(0)).collect();
            ("d", entries)
        }
        SweepKind::Chern => {
            let values = c.geometry.values.clone().unwrap_or_else(|| PRESET_RADII.to_vec());
            let template = manifold(c, values.first().copied().unwrap_or(0.0));
            let mode = chern_mode(c);
            let entries: Vec<_> =
                values.par_iter().map(|r| chern_sweep(&[r * k], &template, mode).remove(0)).collect();
            ("k_R", entries)
        }
    };
    let failed = entries.iter().filter(|e| e.error.is_some()).count();
    let flags = if failed > 0 { vec![format!("{failed} sweep points failed")] } else { Vec::new() };
    let csv = csv_bytes(|buf| write_sweep_csv(&entries, name, buf));
    let curve: Vec<String> = entries
        .iter()
        .map(|e| match e.bands.first() {
            Some(r) if r.invariant == wer_lab_core::topology::Invariant::BerryPhase => {
                format!("{:.3}:{:.2}π", e.parameter / k, r.value / std::f64::consts::PI)
            }
            Some(r) => format!("{:.3}:{:.2}", e.parameter / k, r.value),
            None => format!("{:.3}:error", e.parameter / k),
        })
        .collect();
    Ok(Outcome {
        payload: to_value(&entries),
        csv: Some(csv),
        summary: format!("sweep {name} [{}]", curve.join(" ")),
        flags,
    })
}

/// Runs the command named in a resolved config.
pub fn execute(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    match c.command.ok_or_else(|| CliError::schema("command", "missing"))? {
        Command::Eig => eig(c),
        Command::Evolve => evolve_cmd(c),
        Command::Compile => compile_cmd(c),
        Command::TomoFit => tomo_fit(c),
        Command::Berry => berry_cmd(c),
        Command::Chern => chern_cmd(c),
        Command::Spectrum => spectrum_cmd(c),
        Command::Sweep => sweep_cmd(c),
    }
}

pub fn format_of(c: &ExperimentConfig) -> Format {
    let command = c.command.expect("resolved config names its command");
    c.output.format.unwrap_or(command.default_format())
}

/// Output bytes for `outcome` in the config's format.
pub fn render(c: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<u8>, CliError> {
    let command = c.command.expect("resolved config names its command");
    match format_of(c) {
        Format::Csv => outcome
            .csv
            .clone()
            .ok_or_else(|| CliError::schema("output.format", format!("`{}` has no CSV output", command.name()))),
        Format::Json => {
            let report = report_of(c, outcome);
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            Ok(text.into_bytes())
        }
    }
}

fn report_of(c: &ExperimentConfig, outcome: &Outcome) -> RunReport {
    RunReport {
        version: VERSION,
        command: c.command.expect("resolved").name(),
        config: to_value(c),
        diagnostics: Diagnostics { flags: outcome.flags.clone() },
        result: outcome.payload.clone(),
        summary: outcome.summary.clone(),
        wall_time: Duration::ZERO,
        output: PathBuf::new(),
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display().to_string(), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path.display().to_string(), e))
}

/// Resolves, executes, writes the output file under `out_dir`.
pub fn run(config: ExperimentConfig, command: Command, overrides: &Overrides, out_dir: &Path) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let c = resolve(config, command, overrides)?;
    let outcome = execute(&c)?;
    let bytes = render(&c, &outcome)?;
    let ext = match format_of(&c) {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let name = c.output.path.clone().unwrap_or_else(|| format!("{}.{ext}", command.name()));
    let output = out_dir.join(name);
    write_file(&output, &bytes)?;
    let mut report = report_of(&c, &outcome);
    report.output = output;
    report.wall_time = start.elapsed();
    Ok(report)
}
