use num_complex::Complex64;

use super::source::{eigensystems, EigenSource, ExactSource};
use super::{band_index, BranchTrack, KPath, SweepEntry, TopologyError, TopologyResult};
use crate::linalg::wrap_angle;

/// Loop widths `d / κ` of the default sweep.
pub const PRESET_LOOP_WIDTHS: [f64; 7] = [0.05, 0.2, 0.25, 0.29, 0.375, 0.45, 0.5];

/// Tracks one cycle; if the bands exchanged, tracks two so every eigenvector
/// returns to itself.
fn closed_track(path: &KPath, source: &mut dyn EigenSource) -> Result<BranchTrack, TopologyError> {
    if !path.closed {
        return Err(TopologyError::BadGeometry("Berry phase needs a closed path".into()));
    }
    let cycle = eigensystems(&path.points, source)?;
    let traversal = |cycles: usize| {
        let mut v = Vec::with_capacity(cycles * cycle.len() + 1);
        for _ in 0..cycles {
            v.extend_from_slice(&cycle);
        }
        v.push(cycle[0]);
        v
    };
    let one = BranchTrack::from_systems(traversal(1), true)?;
    if one.exchanged {
        BranchTrack::from_systems(traversal(2), true)
    } else {
        Ok(one)
    }
}

/// Wilson-loop phase of tracked band `n` on a closed, non-exchanging track.
/// The last link closes onto the first point's eigenvector.
fn wilson_links(track: &BranchTrack, n: usize) -> Vec<Complex64> {
    let last = track.len() - 1;
    (0..last)
        .map(|p| {
            let next = if p + 1 == last { 0 } else { p + 1 };
            track.left[p][n].dot(&track.right[next][n])
        })
        .collect()
}

/// `β_n` from an existing closed track. `band` is 1 or 2.
pub fn berry_phase_of_track(track: &BranchTrack, band: usize) -> Result<TopologyResult, TopologyError> {
    let n = band_index(band)?;
    if !track.closed || track.len() < 2 {
        return Err(TopologyError::BadGeometry("Berry phase needs a closed track".into()));
    }
    if track.exchanged {
        return Err(TopologyError::BadGeometry("track ends on the other band; traverse again".into()));
    }
    let links = wilson_links(track, n);
    let product = links.iter().fold(Complex64::new(1.0, 0.0), |acc, z| acc * z);
    let contributions = links.iter().map(|z| -z.arg()).collect();
    Ok(TopologyResult::berry(band, wrap_angle(-product.arg()), None, contributions))
}

pub fn berry_phase(path: &KPath, band: usize) -> Result<TopologyResult, TopologyError> {
    berry_phase_with(path, band, &mut ExactSource)
}

/// [`berry_phase`] with eigensystems taken from `source`.
pub fn berry_phase_with(path: &KPath, band: usize, source: &mut dyn EigenSource) -> Result<TopologyResult, TopologyError> {
    band_index(band)?;
    let track = closed_track(path, source)?;
    let mut result = berry_phase_of_track(&track, band)?;
    result.cycles = Some((track.len() - 1) / path.m());
    Ok(result)
}

/// First-order form `Re[i Σ_p (⟨l_p|r_{p+1}⟩ − 1)]`, evaluated on the
/// solver-gauge eigenvectors. Agrees with [`berry_phase`] to `O(1/m)` on
/// paths where that gauge is smooth.
pub fn berry_phase_linearized(path: &KPath, band: usize) -> Result<f64, TopologyError> {
    let n = band_index(band)?;
    let track = closed_track(path, &mut ExactSource)?;
    let last = track.len() - 1;
    let sum: Complex64 = (0..last)
        .map(|p| {
            let next = if p + 1 == last { 0 } else { p + 1 };
            track.raw_left(p, n).dot(&track.raw_right(next, n)) - 1.0
        })
        .sum();
    Ok(wrap_angle((Complex64::i() * sum).re))
}

/// Both bands for each loop width (in absolute units).
pub fn berry_sweep(d_values: &[f64], m: usize, kappa: f64) -> Vec<SweepEntry> {
    d_values
        .iter()
        .map(|&d| {
            let r = KPath::rectangular_loop(d, m, kappa)
                .and_then(|path| Ok(vec![berry_phase(&path, 1)?, berry_phase(&path, 2)?]));
            SweepEntry::from_result(d, r)
        })
        .collect()
}

/// Whether the rectangle `[x0, x1] × [z0, z1]` in the `k_y = 0` plane
/// encloses exactly one of the two ring crossings `(±κ/4, 0)`.
pub fn loop_encloses_single_ep(x0: f64, x1: f64, z0: f64, z1: f64, kappa: f64) -> bool {
    let inside = |x: f64| x0 < x && x < x1 && z0 < 0.0 && 0.0 < z1;
    inside(-kappa / 4.0) ^ inside(kappa / 4.0)
}
