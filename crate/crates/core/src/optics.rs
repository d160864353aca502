//! Compilation of a 2×2 operator into a wave-plate program.
//!
//! The target is factored as `T = R₂ · L · R₁`, where each `Rᵢ` is a
//! QWP–HWP–QWP block (a general unitary up to phase) and
//! `L = [[0, sin2θ_V], [sin2θ_H, 0]]` is the polarization-dependent loss
//! element built from two beam displacers and two HWPs.
//!
//! Jones conventions, with `Rot(θ) = [[cosθ, −sinθ], [sinθ, cosθ]]`:
//!
//! * `QWP(θ) = Rot(θ) · diag(1, i) · Rot(−θ)`
//! * `HWP(θ) = Rot(θ) · diag(1, −1) · Rot(−θ) = [[cos2θ, sin2θ], [sin2θ, −cos2θ]]`
//! * `S(θ) = [[cosθ, sinθ], [−sinθ, cosθ]] = Rot(−θ)`
//! * `P₊(θ) = diag(e^{iθ}, 1)`, `P₋(θ) = diag(1, e^{iθ})`
//!
//! A block `R(φa, θ, φb) = QWP(φb) · HWP(θ) · QWP(φa)`: light meets `φa` first.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cis, Matrix2c, I, ONE, ZERO};
use crate::nh::HamiltonianParams;

/// Threshold below which the first column of the target counts as zero.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Rounding slack on `σ_max > 1` so that unitary targets keep `scale = 1`.
pub const SCALE_SLACK: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("target operator is zero")]
    SingularInput,
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("negative evolution time {0}")]
    NegativeTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Qwp,
    Hwp,
    /// `S(θ)`.
    Rotation,
    /// `P₊(θ)`.
    PhasePlus,
    /// `P₋(θ)`.
    PhaseMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalElement {
    pub kind: ElementKind,
    pub angle: f64,
}

impl OpticalElement {
    pub fn new(kind: ElementKind, angle: f64) -> Self {
        OpticalElement { kind, angle }
    }
}

fn rot(theta: f64) -> Matrix2c {
    let (s, c) = theta.sin_cos();
    Matrix2c::from_real(c, -s, s, c)
}

pub fn s_rotation(theta: f64) -> Matrix2c {
    rot(-theta)
}

pub fn phase_plus(theta: f64) -> Matrix2c {
    Matrix2c::diag(cis(theta), ONE)
}

pub fn phase_minus(theta: f64) -> Matrix2c {
    Matrix2c::diag(ONE, cis(theta))
}

pub fn qwp(theta: f64) -> Matrix2c {
    rot(theta) * Matrix2c::diag(ONE, I) * rot(-theta)
}

pub fn hwp(theta: f64) -> Matrix2c {
    let (s, c) = (2.0 * theta).sin_cos();
    Matrix2c::from_real(c, s, s, -c)
}

pub fn jones(element: &OpticalElement) -> Matrix2c {
    let a = element.angle;
    match element.kind {
        ElementKind::Qwp => qwp(a),
        ElementKind::Hwp => hwp(a),
        ElementKind::Rotation => s_rotation(a),
        ElementKind::PhasePlus => phase_plus(a),
        ElementKind::PhaseMinus => phase_minus(a),
    }
}

/// `QWP(second) · HWP(hwp_angle) · QWP(first)`. Determinant 1.
pub fn rotation_block(first: f64, hwp_angle: f64, second: f64) -> Matrix2c {
    qwp(second) * hwp(hwp_angle) * qwp(first)
}

/// Anti-diagonal loss element `[[0, sin2θ_V], [sin2θ_H, 0]]`.
pub fn loss_operator(theta_h: f64, theta_v: f64) -> Matrix2c {
    Matrix2c::new(ZERO, (2.0 * theta_v).sin().into(), (2.0 * theta_h).sin().into(), ZERO)
}

/// Reduces a wave-plate angle into `[−π/2, π/2)`. Both plate types are
/// π-periodic.
pub fn canonical_angle(x: f64) -> f64 {
    x - PI * ((x + FRAC_PI_2) / PI).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavePlateProgram {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub phi4: f64,
    pub theta1: f64,
    pub theta2: f64,
    #[serde(rename = "thetaH")]
    pub theta_h: f64,
    #[serde(rename = "thetaV")]
    pub theta_v: f64,
    pub scale: f64,
    /// Overall phase `χ` with `reconstruct = e^{iχ} R₂ L R₁`. Wave plates only
    /// realize determinant-one blocks while `det(R₂ L R₁) = −μ₁μ₂`, so the
    /// phase must be carried separately.
    pub global_phase: f64,
}

impl WavePlateProgram {
    pub fn angles(&self) -> [f64; 8] {
        [
            self.phi1, self.theta1, self.phi2, self.theta_h, self.theta_v, self.phi3, self.theta2,
            self.phi4,
        ]
    }

    /// JSON with every real rounded to 15 significant digits.
    pub fn to_json(&self) -> String {
        let r = |x: f64| round_sig(x, 15);
        let rounded = WavePlateProgram {
            phi1: r(self.phi1),
            phi2: r(self.phi2),
            phi3: r(self.phi3),
            phi4: r(self.phi4),
            theta1: r(self.theta1),
            theta2: r(self.theta2),
            theta_h: r(self.theta_h),
            theta_v: r(self.theta_v),
            scale: r(self.scale),
            global_phase: r(self.global_phase),
        };
        serde_json::to_string_pretty(&rounded).expect("plain struct serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Every intermediate of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionWorkspace {
    pub scale: f64,
    /// True when the first column vanished and the target was right-multiplied
    /// by `S(π/2)` before factoring.
    pub pivot_swapped: bool,
    /// `|t_ij|` of the (scaled, possibly swapped) target.
    pub t_abs: [[f64; 2]; 2],
    /// `φ_ij = arg t_ij`.
    pub t_phase: [[f64; 2]; 2],
    /// Pivot rotation `arctan|t21/t11|`.
    pub pivot_angle: f64,
    pub t_prime_11: f64,
    pub t_prime_12: Complex64,
    pub t_prime_22: Complex64,
    /// Real upper-triangular residual `[[t̃11, t̃12], [0, t̃22]]`.
    pub t_tilde_11: f64,
    pub t_tilde_12: f64,
    pub t_tilde_22: f64,
    /// Singular values of the residual, `μ₁ ≥ μ₂ ≥ 0`.
    pub mu: [f64; 2],
    /// Closed-form `p_j`, `q_j` and the `μ_j` they give.
    pub p: [f64; 2],
    pub q: [f64; 2],
    pub mu_closed_form: [f64; 2],
    pub gamma1: f64,
    pub gamma2: f64,
    /// The unitary outer factors before wave-plate angle extraction.
    pub r1: Matrix2c,
    pub r2: Matrix2c,
}

/// Real SVD `m = Rot(φ) · diag(σ₁, σ₂) · Rot(θ)` with `σ₁ ≥ |σ₂|`.
/// Returns `(φ, σ₁, σ₂, θ)`.
fn real_svd(m: [[f64; 2]; 2]) -> (f64, f64, f64, f64) {
    let e = (m[0][0] + m[1][1]) / 2.0;
    let f = (m[0][0] - m[1][1]) / 2.0;
    let g = (m[1][0] + m[0][1]) / 2.0;
    let h = (m[1][0] - m[0][1]) / 2.0;
    let q = e.hypot(h);
    let r = f.hypot(g);
    let a1 = g.atan2(f);
    let a2 = h.atan2(e);
    ((a2 + a1) / 2.0, q + r, q - r, (a2 - a1) / 2.0)
}

/// Wave-plate angles `(first, hwp, second)` and phase `χ` with
/// `u = e^{iχ} · rotation_block(first, hwp, second)`. `u` must be unitary.
pub fn unitary_to_wave_plates(u: &Matrix2c) -> (f64, f64, f64, f64) {
    // Normalize to SU(2), then conjugate by W (σx→σy→σz→σx) so that QWP and
    // HWP become rotations about a fixed pair of axes and a ZYZ Euler
    // decomposition applies.
    let v = u.scale(ONE / u.det().sqrt());
    let half = Complex64::new(0.5, 0.0);
    let w = Matrix2c::new(
        half * Complex64::new(1.0, -1.0),
        half * Complex64::new(-1.0, -1.0),
        half * Complex64::new(1.0, -1.0),
        half * Complex64::new(1.0, 1.0),
    );
    let vp = w * v * w.dagger();
    let (alpha, beta) = (vp[(0, 0)], vp[(1, 0)]);
    let b = 2.0 * beta.norm().atan2(alpha.norm());
    let sum = -alpha.arg();
    let diff = beta.arg();
    let (a_euler, c_euler) = (sum + diff, sum - diff);
    let second = a_euler / 2.0;
    let first = -c_euler / 2.0;
    let h = (a_euler - c_euler - b) / 4.0;
    let (first, h, second) = (canonical_angle(first), canonical_angle(h), canonical_angle(second));
    let block = rotation_block(first, h, second);
    // u = e^{iχ} block exactly; read χ off the overlap for robustness.
    let chi = (block.dagger() * *u).trace().arg();
    (first, h, second, chi)
}

pub fn decompose(t: &Matrix2c) -> Result<(WavePlateProgram, DecompositionWorkspace), OpticsError> {
    if !t.is_finite() {
        return Err(OpticsError::NumericalBreakdown("non-finite entry in target".into()));
    }
    if t.norm_max() == 0.0 {
        return Err(OpticsError::SingularInput);
    }
    let (sigma_max, _) = t.singular_values();
    let scale = if sigma_max > 1.0 + SCALE_SLACK { 1.0 / sigma_max } else { 1.0 };
    let mut target = t.scale_re(scale);

    let pivot_swapped = target[(0, 0)].norm() < PIVOT_FLOOR && target[(1, 0)].norm() < PIVOT_FLOOR;
    if pivot_swapped {
        target = target * s_rotation(FRAC_PI_2);
    }

    let mut t_abs = [[0.0; 2]; 2];
    let mut t_phase = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            t_abs[i][j] = target[(i, j)].norm();
            t_phase[i][j] = target[(i, j)].arg();
        }
    }

    // Column-phase removal and pivot rotation zero the (1,0) entry.
    let alpha = t_abs[1][0].atan2(t_abs[0][0]);
    let (s, c) = alpha.sin_cos();
    let a = Matrix2c::diag(cis(t_phase[0][0]), cis(t_phase[1][0]));
    let u12 = cis(t_phase[0][1] - t_phase[0][0]) * t_abs[0][1];
    let u22 = cis(t_phase[1][1] - t_phase[1][0]) * t_abs[1][1];
    let t_prime_11 = c * t_abs[0][0] + s * t_abs[1][0];
    let t_prime_12 = u12 * c + u22 * s;
    let t_prime_22 = -u12 * s + u22 * c;

    let psi12 = t_prime_12.arg();
    let psi22 = t_prime_22.arg();
    let b = Matrix2c::diag(cis(psi12), cis(psi22));
    let tilde = [[t_prime_11, t_prime_12.norm()], [0.0, t_prime_22.norm()]];

    let (phi_l, mu1, mu2, theta_r) = real_svd(tilde);
    let gamma1 = -phi_l;
    let gamma2 = -theta_r;

    let (a11, a12, a22) = (tilde[0][0], tilde[0][1], tilde[1][1]);
    let p = [a12 * a22, a11 * a12];
    let q = [a11 * a11 - a22 * a22 + a12 * a12, a11 * a11 - a22 * a22 - a12 * a12];
    let total = a11 * a11 + a12 * a12 + a22 * a22;
    let mu_closed_form = [
        ((total + (q[0] * q[0] + 4.0 * p[0] * p[0]).sqrt()) / 2.0).sqrt(),
        ((total - (q[1] * q[1] + 4.0 * p[1] * p[1]).sqrt()).max(0.0) / 2.0).sqrt(),
    ];

    let swap = hwp(FRAC_PI_4);
    let r2 = a * s_rotation(-alpha) * b * s_rotation(gamma1) * swap;
    let mut r1 = s_rotation(gamma2) * phase_plus(-psi12);
    if pivot_swapped {
        r1 = r1 * s_rotation(-FRAC_PI_2);
    }

    let theta_h = mu1.clamp(0.0, 1.0).asin() / 2.0;
    let theta_v = mu2.clamp(0.0, 1.0).asin() / 2.0;
    let (phi1, theta1, phi2, chi1) = unitary_to_wave_plates(&r1);
    let (phi3, theta2, phi4, chi2) = unitary_to_wave_plates(&r2);

    let program = WavePlateProgram {
        phi1,
        phi2,
        phi3,
        phi4,
        theta1,
        theta2,
        theta_h,
        theta_v,
        scale,
        global_phase: crate::linalg::wrap_angle(chi1 + chi2),
    };
    let angles_ok = program.angles().iter().all(|x| x.is_finite());
    if !angles_ok || !program.global_phase.is_finite() {
        return Err(OpticsError::NumericalBreakdown("non-finite wave-plate angle".into()));
    }
    let workspace = DecompositionWorkspace {
        scale,
        pivot_swapped,
        t_abs,
        t_phase,
        pivot_angle: alpha,
        t_prime_11,
        t_prime_12,
        t_prime_22,
        t_tilde_11: a11,
        t_tilde_12: a12,
        t_tilde_22: a22,
        mu: [mu1, mu2],
        p,
        q,
        mu_closed_form,
        gamma1,
        gamma2,
        r1,
        r2,
    };
    Ok((program, workspace))
}

pub fn reconstruct(program: &WavePlateProgram) -> Matrix2c {
    let r1 = rotation_block(program.phi1, program.theta1, program.phi2);
    let r2 = rotation_block(program.phi3, program.theta2, program.phi4);
    (r2 * loss_operator(program.theta_h, program.theta_v) * r1).scale(cis(program.global_phase))
}

pub fn compile_evolution(params: &HamiltonianParams, t: f64) -> Result<WavePlateProgram, OpticsError> {
    if t < 0.0 {
        return Err(OpticsError::NegativeTime(t));
    }
    decompose(&crate::evolution::propagator(params, t).u).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_unitary(angles: [f64; 4]) -> Matrix2c {
        let [a, b, c, d] = angles;
        let v = Matrix2c::new(
            cis(b) * a.cos(),
            -cis(-c) * a.sin(),
            cis(c) * a.sin(),
            cis(-b) * a.cos(),
        );
        v.scale(cis(d))
    }

    fn assert_round_trip(t: &Matrix2c, tol: f64) -> (WavePlateProgram, DecompositionWorkspace) {
        let (prog, ws) = decompose(t).unwrap();
        let back = reconstruct(&prog);
        let err = back.max_abs_diff(&t.scale_re(prog.scale));
        assert!(err < tol, "round trip error {err:e} for {t:?}");
        (prog, ws)
    }

    #[test]
    fn jones_examples() {
        assert!(s_rotation(0.0).max_abs_diff(&Matrix2c::identity()) < 1e-15);
        assert!(phase_plus(PI).max_abs_diff(&Matrix2c::from_real(-1.0, 0.0, 0.0, 1.0)) < 1e-15);
        assert!(s_rotation(FRAC_PI_2).max_abs_diff(&Matrix2c::from_real(0.0, 1.0, -1.0, 0.0)) < 1e-15);
        assert!(hwp(FRAC_PI_4).max_abs_diff(&Matrix2c::pauli_x()) < 1e-15);
        assert!((qwp(0.0)).max_abs_diff(&Matrix2c::diag(ONE, I)) < 1e-15);
        for x in [-1.2, 0.3, 2.0] {
            for m in [qwp(x), hwp(x)] {
                assert!((m.dagger() * m).max_abs_diff(&Matrix2c::identity()) < 1e-15);
            }
            assert!((rotation_block(x, 0.4 * x, -x).det() - ONE).norm() < 1e-14);
        }
        let e = OpticalElement::new(ElementKind::PhaseMinus, 0.5);
        assert!(jones(&e).max_abs_diff(&Matrix2c::diag(ONE, cis(0.5))) < 1e-15);
    }

    #[test]
    fn canonical_angle_range() {
        for x in [-10.0, -FRAC_PI_2, 0.0, 1.0, FRAC_PI_2, 7.3] {
            let y = canonical_angle(x);
            assert!((-FRAC_PI_2..FRAC_PI_2).contains(&y));
            assert!(((x - y) / PI - ((x - y) / PI).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_target() {
        let (prog, ws) = assert_round_trip(&Matrix2c::identity(), 1e-14);
        assert!((ws.mu[0] - 1.0).abs() < 1e-14 && (ws.mu[1] - 1.0).abs() < 1e-14);
        assert_eq!(prog.scale, 1.0);
    }

    #[test]
    fn swap_target_uses_pivot_fallback() {
        let (_, ws) = assert_round_trip(&Matrix2c::pauli_x(), 1e-14);
        assert!((ws.mu[0] - 1.0).abs() < 1e-14 && (ws.mu[1] - 1.0).abs() < 1e-14);
        let upper = Matrix2c::new(ZERO, Complex64::new(0.3, -0.2), ZERO, Complex64::new(0.1, 0.5));
        let (_, ws) = assert_round_trip(&upper, 1e-14);
        assert!(ws.pivot_swapped);
    }

    #[test]
    fn zero_target_is_rejected() {
        assert_eq!(decompose(&Matrix2c::zero()).unwrap_err(), OpticsError::SingularInput);
        let bad = Matrix2c::from_real(f64::NAN, 0.0, 0.0, 1.0);
        assert!(matches!(decompose(&bad), Err(OpticsError::NumericalBreakdown(_))));
    }

    #[test]
    fn rank_deficient_targets() {
        let rank_one = Matrix2c::outer(
            &crate::linalg::Ket::new(Complex64::new(0.6, 0.1), Complex64::new(0.2, -0.3)),
            &crate::linalg::Bra([Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.7)]),
        );
        let (_, ws) = assert_round_trip(&rank_one, 1e-14);
        assert!(ws.mu[1] < 1e-14);
        assert_round_trip(&Matrix2c::from_real(0.0, 0.0, 0.4, 0.0), 1e-14);
        assert_round_trip(&Matrix2c::from_real(0.0, 0.0, 0.0, 0.4), 1e-14);
    }

    #[test]
    fn evolution_targets() {
        let reference = HamiltonianParams::from_polar(0.1, 0.25, PI / 3.0, 1.0);
        for t in [0.0, 1.0, 2.0, 10.0] {
            let u = crate::evolution::propagator(&reference, t).u;
            let prog = compile_evolution(&reference, t).unwrap();
            assert!(reconstruct(&prog).max_abs_diff(&u.scale_re(prog.scale)) < 1e-10);
        }
        let prog0 = compile_evolution(&reference, 0.0).unwrap();
        assert!(reconstruct(&prog0).max_abs_diff(&Matrix2c::identity()) < 1e-14);
        let ep = HamiltonianParams::new(0.0, Complex64::new(0.25, 0.0), 1.0);
        let u = crate::evolution::propagator(&ep, 5.0).u;
        let prog = compile_evolution(&ep, 5.0).unwrap();
        assert!(reconstruct(&prog).max_abs_diff(&u.scale_re(prog.scale)) < 1e-10);
        assert!(compile_evolution(&ep, -1.0).is_err());
    }

    #[test]
    fn json_keys_and_precision() {
        let reference = HamiltonianParams::from_polar(0.1, 0.25, PI / 3.0, 1.0);
        let prog = compile_evolution(&reference, 2.0).unwrap();
        let json = prog.to_json();
        for key in ["phi1", "phi4", "theta1", "theta2", "thetaH", "thetaV", "scale"] {
            assert!(json.contains(&format!("\"{key}\"")), "{key} missing from {json}");
        }
        let back = WavePlateProgram::from_json(&json).unwrap();
        assert!(reconstruct(&back).max_abs_diff(&reconstruct(&prog)) < 1e-13);
        assert_eq!(round_sig(0.123456789012345678, 15), 0.123456789012346);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn unitary_round_trip(a in 0.0..FRAC_PI_2, b in -PI..PI, c in -PI..PI, d in -PI..PI) {
            let u = random_unitary([a, b, c, d]);
            let (prog, ws) = decompose(&u).unwrap();
            prop_assert!(reconstruct(&prog).max_abs_diff(&u.scale_re(prog.scale)) < 1e-10);
            prop_assert!((ws.mu[0] - 1.0).abs() < 1e-10 && (ws.mu[1] - 1.0).abs() < 1e-10);
        }

        #[test]
        fn contractive_round_trip(
            u1 in prop::array::uniform4(-PI..PI),
            u2 in prop::array::uniform4(-PI..PI),
            s1 in 0.0..=1.0f64,
            ratio in 0.0..=1.0f64,
        ) {
            let t = random_unitary(u1) * Matrix2c::diag(s1.into(), (s1 * ratio).into()) * random_unitary(u2);
            let (prog, ws) = decompose(&t).unwrap();
            prop_assert!(reconstruct(&prog).max_abs_diff(&t) < 1e-10);
            prop_assert_eq!(prog.scale, 1.0);
            prop_assert!(ws.mu[0] >= ws.mu[1] && ws.mu[1] >= 0.0);
            prop_assert!(((2.0 * prog.theta_h).sin() - ws.mu[0]).abs() < 1e-10);
            prop_assert!(((2.0 * prog.theta_v).sin() - ws.mu[1]).abs() < 1e-10);
            prop_assert!((ws.mu[0] - ws.mu_closed_form[0]).abs() < 1e-10);
            prop_assert!((ws.mu[1] - ws.mu_closed_form[1]).abs() < 1e-7);
            for x in prog.angles() {
                prop_assert!((-FRAC_PI_2..FRAC_PI_2).contains(&x) || (0.0..=FRAC_PI_4).contains(&x));
            }
        }

        #[test]
        fn oversized_targets_are_scaled(
            u1 in prop::array::uniform4(-PI..PI),
            u2 in prop::array::uniform4(-PI..PI),
            s1 in 1.01..50.0f64,
            ratio in 0.0..=1.0f64,
        ) {
            let t = random_unitary(u1) * Matrix2c::diag(s1.into(), (s1 * ratio).into()) * random_unitary(u2);
            let (prog, _) = decompose(&t).unwrap();
            prop_assert!((prog.scale - 1.0 / s1).abs() < 1e-12);
            prop_assert!(reconstruct(&prog).max_abs_diff(&t.scale_re(1.0 / s1)) < 1e-10);
        }
    }
}
