//! Numerical laboratory for a driven, lossy two-level system whose
//! exceptional points form a ring in the three-parameter space
//! `(Re Ω, Im Ω, Δ/2)`.

pub mod evolution;
pub mod linalg;
pub mod nh;
pub mod optics;
pub mod tomography;
pub mod topology;

pub use linalg::{Bra, Ket, Matrix2c};
pub use nh::{EigenSystem, HamiltonianParams};
