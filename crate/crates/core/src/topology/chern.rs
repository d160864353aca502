use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::source::{eigensystems, EigenSource, ExactSource};
use super::{
    band_index, BranchTrack, CylinderManifold, SweepEntry, TopologyError, TopologyResult,
    CRITICAL_RADIUS_TOLERANCE,
};
use crate::linalg::wrap_angle;
use crate::nh::EigenSystem;

/// Cylinder radii `k_R / κ` of the default sweep.
pub const PRESET_RADII: [f64; 8] = [0.1, 0.15, 0.225, 0.31, 0.35, 0.4, 0.55, 0.6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ChernMode {
    /// Azimuthal phase from finite differences between the manifold's
    /// `phi_samples`, averaged, then wound along the meridian. Named
    /// `paper` on the wire.
    #[serde(rename = "paper")]
    Sampled,
    /// Plaquette sum over a uniform `azimuths × meridian` grid with
    /// biorthogonal link variables.
    Oracle { azimuths: usize },
}

struct Prepared {
    meridian: Vec<(f64, f64)>,
    track: BranchTrack,
}

fn prepare(manifold: &CylinderManifold, source: &mut dyn EigenSource) -> Result<Prepared, TopologyError> {
    manifold.validate()?;
    let scale = if manifold.kappa > 0.0 { manifold.kappa } else { 1.0 };
    let critical = manifold.kappa / 4.0;
    if (manifold.k_r - critical).abs() < CRITICAL_RADIUS_TOLERANCE * scale {
        return Err(TopologyError::OnCriticalRadius { k_r: manifold.k_r, critical });
    }
    let meridian = manifold.meridian();
    let points: Vec<_> = meridian.iter().map(|&(kr, kz)| manifold.point(kr, kz, 0.0)).collect();
    let track = BranchTrack::from_systems(eigensystems(&points, source)?, false)?;
    Ok(Prepared { meridian, track })
}

fn link(a: &EigenSystem, b: &EigenSystem, slot_a: usize, slot_b: usize) -> Complex64 {
    a.l[slot_a].dot(&b.r[slot_b])
}

/// Winding of the azimuthal phase `Φ` along the meridian, with `Φ = 0` at the
/// poles. Returns `(C, per-step increments / 2π)`.
fn winding(phases: &[f64]) -> (f64, Vec<f64>) {
    let steps: Vec<f64> = phases.windows(2).map(|w| wrap_angle(w[1] - w[0]) / TAU).collect();
    (steps.iter().sum(), steps)
}

fn sampled_mode(
    m: &CylinderManifold,
    prep: &Prepared,
    n: usize,
    source: &mut dyn EigenSource,
) -> Result<(f64, Vec<f64>), TopologyError> {
    let phis = &m.phi_samples;
    if phis.len() < 2 || phis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(TopologyError::BadGeometry("need at least two ascending azimuth samples".into()));
    }
    let mut phases = Vec::with_capacity(prep.meridian.len());
    for (i, &(kr, kz)) in prep.meridian.iter().enumerate() {
        if kr == 0.0 {
            phases.push(0.0);
            continue;
        }
        let slot = prep.track.slots[i][n];
        let points: Vec<_> = phis.iter().map(|&phi| m.point(kr, kz, phi)).collect();
        let systems = eigensystems(&points, source)?;
        let density: f64 = (0..phis.len() - 1)
            .map(|j| link(&systems[j], &systems[j + 1], slot, slot).arg() / (phis[j + 1] - phis[j]))
            .sum::<f64>()
            / (phis.len() - 1) as f64;
        phases.push(TAU * density);
    }
    Ok(winding(&phases))
}

fn oracle_mode(
    m: &CylinderManifold,
    prep: &Prepared,
    n: usize,
    azimuths: usize,
    source: &mut dyn EigenSource,
) -> Result<(f64, Vec<f64>), TopologyError> {
    if azimuths < 3 {
        return Err(TopologyError::BadGeometry(format!("{azimuths} azimuths is too coarse")));
    }
    let rows: Vec<Vec<EigenSystem>> = prep
        .meridian
        .iter()
        .map(|&(kr, kz)| {
            let points: Vec<_> =
                (0..azimuths).map(|j| m.point(kr, kz, TAU * j as f64 / azimuths as f64)).collect();
            eigensystems(&points, source)
        })
        .collect::<Result<_, _>>()?;
    let slots: Vec<usize> = prep.track.slots.iter().map(|s| s[n]).collect();
    let mut per_step = Vec::with_capacity(rows.len() - 1);
    for i in 0..rows.len() - 1 {
        let (s, t) = (slots[i], slots[i + 1]);
        let mut flux = 0.0;
        for j in 0..azimuths {
            let k = (j + 1) % azimuths;
            let (a, b, c, d) = (&rows[i][j], &rows[i][k], &rows[i + 1][k], &rows[i + 1][j]);
            // Plaquette a → d (down the meridian) → c (azimuth) → b → a, the
            // orientation whose flux matches the azimuthal winding.
            let u = link(a, d, s, t) * link(d, c, t, t) * link(c, b, t, s) * link(b, a, s, s);
            flux += u.arg();
        }
        per_step.push(flux / TAU);
    }
    Ok((per_step.iter().sum(), per_step))
}

/// Chern number of tracked band `band` (1 or 2) on the closed cylinder.
/// Bands are labelled at the top pole by the eigensolver's ordering.
pub fn chern_number(manifold: &CylinderManifold, band: usize, mode: ChernMode) -> Result<TopologyResult, TopologyError> {
    chern_number_with(manifold, band, mode, &mut ExactSource)
}

/// [`chern_number`] with eigensystems taken from `source`.
pub fn chern_number_with(
    manifold: &CylinderManifold,
    band: usize,
    mode: ChernMode,
    source: &mut dyn EigenSource,
) -> Result<TopologyResult, TopologyError> {
    let n = band_index(band)?;
    let prep = prepare(manifold, source)?;
    let (value, contributions) = match mode {
        ChernMode::Sampled => sampled_mode(manifold, &prep, n, source)?,
        ChernMode::Oracle { azimuths } => oracle_mode(manifold, &prep, n, azimuths, source)?,
    };
    Ok(TopologyResult::chern(band, value, contributions))
}

/// Both bands per radius; `template` supplies everything but `k_r`.
pub fn chern_sweep(radii: &[f64], template: &CylinderManifold, mode: ChernMode) -> Vec<SweepEntry> {
    radii
        .iter()
        .map(|&k_r| {
            let m = CylinderManifold { k_r, ..template.clone() };
            let r = chern_number(&m, 1, mode).and_then(|c1| Ok(vec![c1, chern_number(&m, 2, mode)?]));
            SweepEntry::from_result(k_r, r)
        })
        .collect()
}
