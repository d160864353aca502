//! Overlap-continuous band labelling along a path, with the sequential phase
//! correction that removes the per-point gauge freedom of the eigenvectors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::source::{eigensystems, ExactSource};
use super::{KPath, TopologyError};
use crate::linalg::{cis, Bra, Ket};
use crate::nh::EigenSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTrack {
    /// Eigensystem at every traversed point, as returned by the solver.
    pub systems: Vec<EigenSystem>,
    /// `slots[p][n]`: index within `systems[p]` of tracked band `n`.
    pub slots: Vec<[usize; 2]>,
    /// True where the solver's ordering flipped relative to the previous point.
    pub swapped: Vec<bool>,
    /// Gauge-corrected right and left eigenvectors per tracked band.
    pub right: Vec<[Ket; 2]>,
    pub left: Vec<[Bra; 2]>,
    /// Correction angle applied at each point, per band (0 at the start).
    pub phase_ledger: [Vec<f64>; 2],
    /// Net band exchange between the first and last traversed point.
    pub exchanged: bool,
    pub closed: bool,
}

impl BranchTrack {
    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    /// Solver label (0 for `tr/2 + s`, 1 for `tr/2 − s`) carried by tracked
    /// band `n` at point `p`. Changes exactly where the principal root crosses
    /// its branch cut.
    pub fn label(&self, p: usize, n: usize) -> usize {
        self.slots[p][n]
    }

    pub fn eigenvalue(&self, p: usize, n: usize) -> Complex64 {
        self.systems[p].e[self.slots[p][n]]
    }

    /// Uncorrected right eigenvector of tracked band `n` at point `p`.
    pub fn raw_right(&self, p: usize, n: usize) -> Ket {
        self.systems[p].r[self.slots[p][n]]
    }

    pub fn raw_left(&self, p: usize, n: usize) -> Bra {
        self.systems[p].l[self.slots[p][n]]
    }

    /// Tracks bands through precomputed eigensystems. Band `n` starts in slot
    /// `n` of the first system.
    pub fn from_systems(systems: Vec<EigenSystem>, closed: bool) -> Result<Self, TopologyError> {
        if systems.is_empty() {
            return Err(TopologyError::BadGeometry("empty path".into()));
        }
        if let Some((index, es)) = systems.iter().enumerate().find(|(_, es)| es.near_defective) {
            return Err(TopologyError::PathThroughEP { index, gap: es.gap() });
        }
        let n_pts = systems.len();
        let mut slots = Vec::with_capacity(n_pts);
        let mut swapped = Vec::with_capacity(n_pts);
        slots.push([0, 1]);
        swapped.push(false);
        for p in 1..n_pts {
            let prev = &systems[p - 1];
            let cur = &systems[p];
            let [s0, s1] = slots[p - 1];
            let o = |from: usize, to: usize| prev.l[from].dot(&cur.r[to]).norm();
            let keep = o(s0, 0) * o(s1, 1);
            let flip = o(s0, 1) * o(s1, 0);
            let next = if flip > keep { [1, 0] } else { [0, 1] };
            swapped.push(next != [s0, s1]);
            slots.push(next);
        }

        let mut right = Vec::with_capacity(n_pts);
        let mut left = Vec::with_capacity(n_pts);
        let mut ledger = [Vec::with_capacity(n_pts), Vec::with_capacity(n_pts)];
        right.push([0, 1].map(|n| systems[0].r[slots[0][n]]));
        left.push([0, 1].map(|n| systems[0].l[slots[0][n]]));
        ledger[0].push(0.0);
        ledger[1].push(0.0);
        for p in 1..n_pts {
            let mut r = [Ket::from_real(0.0, 0.0); 2];
            let mut l = [Bra([Complex64::new(0.0, 0.0); 2]); 2];
            for n in 0..2 {
                let r_raw = systems[p].r[slots[p][n]];
                let l_raw = systems[p].l[slots[p][n]];
                // Makes ⟨l̄_{p+1}|r̄_p⟩ real and positive.
                let phi = l_raw.dot(&right[p - 1][n]).arg();
                r[n] = r_raw.scale(cis(phi));
                l[n] = l_raw.scale(cis(-phi));
                ledger[n].push(phi);
            }
            right.push(r);
            left.push(l);
        }
        let exchanged = slots[n_pts - 1][0] != slots[0][0];
        Ok(BranchTrack { systems, slots, swapped, right, left, phase_ledger: ledger, exchanged, closed })
    }
}

pub fn track_branches(path: &KPath) -> Result<BranchTrack, TopologyError> {
    BranchTrack::from_systems(eigensystems(&path.traversal(), &mut ExactSource)?, path.closed)
}
