//! Every preset figure dataset in one deterministic output tree.

use std::path::Path;

use serde_json::{json, Value};

use wer_lab_core::topology::{population_profile, PRESET_LOOP_WIDTHS, PRESET_RADII};

use crate::config::{Command, ExperimentConfig, Format, Mode, SweepKind};
use crate::error::CliError;
use crate::run::{compiled, execute, hamiltonian_params, manifold, render, resolve, write_file, Overrides, VERSION};

pub struct ReproduceSummary {
    pub written: Vec<String>,
    pub failed: Vec<(String, String)>,
}

type Custom = Box<dyn Fn(&Overrides) -> Result<Vec<u8>, CliError>>;

enum Job {
    /// A driver command rendered into one or more files.
    Command { config: ExperimentConfig, command: Command, files: Vec<(&'static str, Format)> },
    Custom { file: &'static str, build: Custom },
}

fn config(f: impl FnOnce(&mut ExperimentConfig)) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    f(&mut c);
    c
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s.into_bytes()
}

/// Wave-plate programs along the reference trajectory, one per unit of κt.
fn programs(o: &Overrides) -> Result<Vec<u8>, CliError> {
    let c = resolve(ExperimentConfig::default(), Command::Compile, o)?;
    let p = hamiltonian_params(&c);
    let mut rows = Vec::new();
    for step in 0..=10 {
        let t = step as f64 / p.kappa;
        let (prog, err) = compiled(&p, t)?;
        let program: Value = serde_json::from_str(&prog.to_json()).expect("program JSON");
        rows.push(json!({ "t": t, "program": program, "reconstruction_error": err }));
    }
    Ok(pretty(&json!({ "version": VERSION, "config": c, "programs": rows })))
}

fn population(k_r: f64) -> Custom {
    Box::new(move |o: &Overrides| {
        let c = resolve(config(|c| c.geometry.k_r = k_r), Command::Chern, o)?;
        let profile = population_profile(&manifold(&c, k_r), 0.0, 1)?;
        let mut buf = Vec::new();
        profile.write_csv(&mut buf).expect("writing to memory");
        Ok(buf)
    })
}

fn presets(o: &Overrides) -> Result<Vec<u8>, CliError> {
    let c = resolve(ExperimentConfig::default(), Command::Berry, o)?;
    Ok(pretty(&json!({
        "kappa": c.params.kappa,
        "loop_widths": PRESET_LOOP_WIDTHS,
        "cylinder_radii": PRESET_RADII,
        "loop_left_edge": wer_lab_core::topology::LOOP_LEFT_EDGE,
        "loop_height": wer_lab_core::topology::LOOP_HEIGHT,
        "delta0": c.geometry.delta0,
        "phi_samples": c.geometry.phi_samples,
        "default_m": c.geometry.m,
    })))
}

fn jobs() -> Vec<Job> {
    use Format::{Csv, Json};
    let cmd = |command, config, files| Job::Command { config, command, files };
    vec![
        cmd(Command::Eig, config(|_| {}), vec![("eig_reference.json", Json)]),
        cmd(Command::Evolve, config(|_| {}), vec![("trajectory_reference.csv", Csv)]),
        Job::Custom { file: "programs_reference.json", build: Box::new(programs) },
        cmd(
            Command::TomoFit,
            config(|_| {}),
            vec![("tomography_reference.json", Json), ("tomography_reference.csv", Csv)],
        ),
        cmd(Command::Berry, config(|c| c.geometry.d = 0.5), vec![("berry_d0.5.json", Json)]),
        cmd(Command::Berry, config(|c| c.geometry.d = 0.29), vec![("berry_d0.29.json", Json)]),
        cmd(Command::Sweep, config(|c| c.geometry.sweep = SweepKind::Berry), vec![("berry_sweep.csv", Csv)]),
        cmd(Command::Spectrum, config(|c| c.geometry.d = 0.375), vec![("spectrum_d0.375.csv", Csv)]),
        cmd(Command::Spectrum, config(|c| c.geometry.d = 0.29), vec![("spectrum_d0.29.csv", Csv)]),
        cmd(Command::Chern, config(|c| c.geometry.k_r = 0.35), vec![("chern_kR0.35.json", Json)]),
        cmd(Command::Chern, config(|c| c.geometry.k_r = 0.225), vec![("chern_kR0.225.json", Json)]),
        cmd(Command::Sweep, config(|c| c.geometry.sweep = SweepKind::Chern), vec![("chern_sweep.csv", Csv)]),
        Job::Custom { file: "population_kR0.35.csv", build: population(0.35) },
        Job::Custom { file: "population_kR0.225.csv", build: population(0.225) },
        Job::Custom { file: "presets.json", build: Box::new(presets) },
    ]
}

/// Runs every job, keeps going past failures, then writes `manifest.json`.
pub fn reproduce_all(out_dir: &Path, overrides: &Overrides) -> Result<ReproduceSummary, CliError> {
    let mut summary = ReproduceSummary { written: Vec::new(), failed: Vec::new() };
    let mut artifacts = Vec::new();
    let mut record = |file: &str, r: Result<Vec<u8>, CliError>, s: &mut ReproduceSummary| {
        let status = match r.and_then(|bytes| write_file(&out_dir.join(file), &bytes)) {
            Ok(()) => {
                s.written.push(file.to_string());
                "ok".to_string()
            }
            Err(e) => {
                s.failed.push((file.to_string(), e.to_string()));
                format!("error: {e}")
            }
        };
        artifacts.push(json!({ "file": file, "status": status }));
    };
    for job in jobs() {
        match job {
            Job::Command { config, command, files } => {
                let outcome = resolve(config, command, overrides).and_then(|c| Ok((execute(&c)?, c)));
                for (file, format) in files {
                    let r = match &outcome {
                        Ok((o, c)) => {
                            let mut c = c.clone();
                            c.output.format = Some(format);
                            render(&c, o)
                        }
                        Err(e) => Err(CliError::schema("", e.to_string())),
                    };
                    record(file, r, &mut summary);
                }
            }
            Job::Custom { file, build } => record(file, build(overrides), &mut summary),
        }
    }
    let manifest = json!({
        "version": VERSION,
        "kappa": overrides.kappa.unwrap_or(1.0),
        "seed": overrides.seed.unwrap_or(0),
        "mode": overrides.mode.unwrap_or(Mode::Sampled),
        "artifacts": artifacts,
    });
    write_file(&out_dir.join("manifest.json"), &pretty(&manifest))?;
    summary.written.push("manifest.json".into());
    Ok(summary)
}

impl ReproduceSummary {
    /// `Partial` when any artifact failed.
    pub fn status(&self) -> Result<(), CliError> {
        if self.failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Partial { failed: self.failed.len(), total: self.failed.len() + self.written.len() })
        }
    }
}
