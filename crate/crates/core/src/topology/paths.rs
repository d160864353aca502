use std::f64::consts::{FRAC_PI_3, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::TopologyError;
use crate::nh::HamiltonianParams;

/// Left edge of the rectangular loops, in units of κ.
pub const LOOP_LEFT_EDGE: f64 = -0.6;
/// Full height of the rectangular loops, in units of κ.
pub const LOOP_HEIGHT: f64 = 0.25;

/// A sampled path in parameter space.
///
/// For a closed path `points` holds the `m` distinct points of one cycle; the
/// traversal repeats them `cycles` times and returns to the first point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPath {
    pub points: Vec<HamiltonianParams>,
    pub cycles: usize,
    pub closed: bool,
}

impl KPath {
    pub fn from_points(points: Vec<HamiltonianParams>, closed: bool) -> Result<Self, TopologyError> {
        if points.is_empty() {
            return Err(TopologyError::BadGeometry("path has no points".into()));
        }
        Ok(KPath { points, cycles: 1, closed })
    }

    pub fn with_cycles(mut self, cycles: usize) -> Self {
        self.cycles = cycles.max(1);
        self
    }

    /// Points per cycle.
    pub fn m(&self) -> usize {
        self.points.len()
    }

    /// The traversed sequence: `cycles·m + 1` points for a closed path (the
    /// last repeats the first), the stored points for an open one.
    pub fn traversal(&self) -> Vec<HamiltonianParams> {
        if !self.closed {
            return self.points.clone();
        }
        let mut out = Vec::with_capacity(self.cycles * self.m() + 1);
        for _ in 0..self.cycles {
            out.extend_from_slice(&self.points);
        }
        out.push(self.points[0]);
        out
    }

    /// Counterclockwise rectangle `[x0, x1] × [z0, z1]` in the `k_y = 0`
    /// plane, starting at `(x0, z0)`, `m/4` points per edge.
    pub fn rectangle(x0: f64, x1: f64, z0: f64, z1: f64, m: usize, kappa: f64) -> Result<Self, TopologyError> {
        if m < 8 || m % 4 != 0 {
            return Err(TopologyError::BadGeometry(format!("m = {m} must be ≥ 8 and divisible by 4")));
        }
        if !(x1 > x0) || !(z1 > z0) || ![x0, x1, z0, z1].iter().all(|v| v.is_finite()) {
            return Err(TopologyError::BadGeometry(format!(
                "rectangle [{x0}, {x1}] × [{z0}, {z1}] is empty"
            )));
        }
        let q = m / 4;
        let corners = [(x0, z0), (x1, z0), (x1, z1), (x0, z1)];
        let mut points = Vec::with_capacity(m);
        for e in 0..4 {
            let (ax, az) = corners[e];
            let (bx, bz) = corners[(e + 1) % 4];
            for i in 0..q {
                let s = i as f64 / q as f64;
                points.push(HamiltonianParams::from_k(ax + s * (bx - ax), 0.0, az + s * (bz - az), kappa));
            }
        }
        KPath::from_points(points, true)
    }

    /// Loop with left edge at `k_x = −0.6κ`, width `d`, `k_z ∈ [−κ/8, κ/8]`.
    pub fn rectangular_loop(d: f64, m: usize, kappa: f64) -> Result<Self, TopologyError> {
        if !(d > 0.0) {
            return Err(TopologyError::BadGeometry(format!("loop width d = {d} must be positive")));
        }
        let x0 = LOOP_LEFT_EDGE * kappa;
        let h = LOOP_HEIGHT * kappa / 2.0;
        KPath::rectangle(x0, x0 + d, -h, h, m, kappa)
    }

    /// Circle of radius `rho` in the plane `k_z = kz`, centred on the `k_z`
    /// axis, counterclockwise in `(k_x, k_y)`.
    pub fn horizontal_circle(rho: f64, kz: f64, m: usize, kappa: f64) -> Result<Self, TopologyError> {
        if !(rho > 0.0) || m < 3 {
            return Err(TopologyError::BadGeometry(format!("circle radius {rho}, {m} points")));
        }
        let points = (0..m)
            .map(|j| {
                let phi = TAU * j as f64 / m as f64;
                HamiltonianParams::from_k(rho * phi.cos(), rho * phi.sin(), kz, kappa)
            })
            .collect();
        KPath::from_points(points, true)
    }
}

pub fn rectangular_loop(d: f64, m: usize, kappa: f64) -> Result<KPath, TopologyError> {
    KPath::rectangular_loop(d, m, kappa)
}

/// Closed cylinder around the `k_z` axis: radius `k_r`, caps at
/// `k_z = ±Δ₀/2`. Sampled by meridians (top pole → rim → bottom rim →
/// bottom pole) at a set of azimuths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderManifold {
    pub k_r: f64,
    pub delta0: f64,
    pub kappa: f64,
    pub phi_samples: Vec<f64>,
    /// Points per meridian segment.
    pub steps: usize,
}

pub const DEFAULT_DELTA0: f64 = 0.5;
pub const DEFAULT_MERIDIAN_STEPS: usize = 64;

pub fn default_phi_samples() -> Vec<f64> {
    vec![0.0, FRAC_PI_3, 2.0 * FRAC_PI_3]
}

impl CylinderManifold {
    pub fn new(k_r: f64, kappa: f64) -> Self {
        CylinderManifold {
            k_r,
            delta0: DEFAULT_DELTA0 * kappa,
            kappa,
            phi_samples: default_phi_samples(),
            steps: DEFAULT_MERIDIAN_STEPS,
        }
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        if !(self.k_r > 0.0) || !(self.delta0 > 0.0) || !self.k_r.is_finite() || !self.delta0.is_finite() {
            return Err(TopologyError::BadGeometry(format!(
                "cylinder needs k_r > 0 and delta0 > 0, got {} and {}",
                self.k_r, self.delta0
            )));
        }
        if self.steps == 0 {
            return Err(TopologyError::BadGeometry("meridian needs at least one step".into()));
        }
        Ok(())
    }

    /// `(k_r, k_z)` along the meridian, `3·steps + 1` points, both poles included.
    pub fn meridian(&self) -> Vec<(f64, f64)> {
        let n = self.steps;
        let top = self.delta0 / 2.0;
        let mut out = Vec::with_capacity(3 * n + 1);
        for i in 0..n {
            out.push((self.k_r * i as f64 / n as f64, top));
        }
        for i in 0..n {
            out.push((self.k_r, top - self.delta0 * i as f64 / n as f64));
        }
        for i in 0..=n {
            out.push((self.k_r * (1.0 - i as f64 / n as f64), -top));
        }
        out
    }

    pub fn point(&self, k_r: f64, k_z: f64, phi: f64) -> HamiltonianParams {
        HamiltonianParams::new(2.0 * k_z, Complex64::from_polar(k_r, phi), self.kappa)
    }
}
