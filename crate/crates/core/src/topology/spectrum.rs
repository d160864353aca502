use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::source::{eigensystems, ExactSource};
use super::{band_index, track_branches, BranchTrack, CylinderManifold, KPath, TopologyError};
use crate::evolution::fmt_real;

/// Branch-tracked eigenvalues along a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub cycles: usize,
    /// `(k_x, k_y, k_z)` of every traversed point.
    pub k: Vec<[f64; 3]>,
    pub energies: [Vec<Complex64>; 2],
}

impl SpectrumTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "kx", "ky", "kz", "ReE1", "ImE1", "ReE2", "ImE2"])?;
        for (p, k) in self.k.iter().enumerate() {
            let (e1, e2) = (self.energies[0][p], self.energies[1][p]);
            let mut row = vec![p.to_string()];
            row.extend([k[0], k[1], k[2], e1.re, e1.im, e2.re, e2.im].map(fmt_real));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// For closed paths, traverses twice when one cycle exchanges the bands.
pub fn spectrum_along_path(path: &KPath) -> Result<SpectrumTrace, TopologyError> {
    let mut p = path.clone().with_cycles(1);
    let mut track = track_branches(&p)?;
    if path.closed && track.exchanged {
        p = p.with_cycles(2);
        track = track_branches(&p)?;
    }
    let k = p.traversal().iter().map(|q| q.k()).collect();
    let energies = [0, 1].map(|n| (0..track.len()).map(|i| track.eigenvalue(i, n)).collect());
    Ok(SpectrumTrace { cycles: p.cycles, k, energies })
}

/// `P₀ = |⟨0|r⟩|²` along one meridian of the cylinder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationProfile {
    pub phi: f64,
    pub k_r: Vec<f64>,
    pub k_z: Vec<f64>,
    /// Meridian segment of each point: 0 top cap, 1 side, 2 bottom cap.
    pub segment: Vec<u8>,
    /// Population for the eigensolver's fixed label `band`.
    pub p0: Vec<f64>,
    /// Population for the band continued from the top pole by overlap.
    pub p0_tracked: Vec<f64>,
    /// Indices where the fixed label stops matching the continued band: the
    /// eigenvector inversions.
    pub inversions: Vec<usize>,
}

impl PopulationProfile {
    /// One row per meridian point; `inverted` is 1 where the fixed label
    /// switches band relative to the previous point.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "segment", "kr", "kz", "p0", "p0_tracked", "inverted"])?;
        for i in 0..self.k_r.len() {
            let inverted = if self.inversions.contains(&i) { "1" } else { "0" };
            let mut row = vec![i.to_string(), self.segment[i].to_string()];
            row.extend([self.k_r[i], self.k_z[i], self.p0[i], self.p0_tracked[i]].map(fmt_real));
            row.push(inverted.into());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn population_profile(manifold: &CylinderManifold, phi: f64, band: usize) -> Result<PopulationProfile, TopologyError> {
    let n = band_index(band)?;
    manifold.validate()?;
    let meridian = manifold.meridian();
    let points: Vec<_> = meridian.iter().map(|&(kr, kz)| manifold.point(kr, kz, phi)).collect();
    let track = BranchTrack::from_systems(eigensystems(&points, &mut ExactSource)?, false)?;
    let steps = manifold.steps;
    let segment = (0..meridian.len()).map(|i| (i / steps).min(2) as u8).collect();
    let p0 = track.systems.iter().map(|es| es.r[n][0].norm_sqr()).collect();
    let p0_tracked = (0..track.len()).map(|i| track.raw_right(i, n)[0].norm_sqr()).collect();
    let inversions = (1..track.len()).filter(|&i| track.swapped[i]).collect();
    Ok(PopulationProfile {
        phi,
        k_r: meridian.iter().map(|m| m.0).collect(),
        k_z: meridian.iter().map(|m| m.1).collect(),
        segment,
        p0,
        p0_tracked,
        inversions,
    })
}
