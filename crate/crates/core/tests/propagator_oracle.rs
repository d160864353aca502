//! Closed-form propagator against an independent RK4 integration of
//! `i dψ/dt = Hψ`, plus structural properties of the no-jump evolution.

use num_complex::Complex64;
use proptest::prelude::*;
use wer_lab_core::evolution::propagator;
use wer_lab_core::linalg::{Ket, Matrix2c, I};
use wer_lab_core::nh::HamiltonianParams;

/// Integrates the matrix equation `dU/dt = −iHU` from `U(0) = 1` with
/// `n` classical RK4 steps.
fn rk4_propagator(h: &Matrix2c, t: f64, n: usize) -> Matrix2c {
    let dt = t / n as f64;
    let f = |u: &Matrix2c| (*h * *u).scale(-I);
    let mut u = Matrix2c::identity();
    for _ in 0..n {
        let k1 = f(&u);
        let k2 = f(&(u + k1.scale_re(dt / 2.0)));
        let k3 = f(&(u + k2.scale_re(dt / 2.0)));
        let k4 = f(&(u + k3.scale_re(dt)));
        u = u + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(dt / 6.0);
    }
    u
}

fn check_against_rk4(p: &HamiltonianParams, kappa_t: f64) -> f64 {
    let t = kappa_t / p.kappa;
    let steps = (kappa_t / 1e-4).ceil().max(1.0) as usize;
    let exact = propagator(p, t).u;
    exact.max_abs_diff(&rk4_propagator(&p.hamiltonian(), t, steps))
}

fn params_strategy() -> impl Strategy<Value = HamiltonianParams> {
    (0.2f64..2.0, -1.0f64..1.0, 0.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(kappa, d, w, phi)| {
        HamiltonianParams::from_polar(d * kappa, w * kappa, phi, kappa)
    })
}

/// Points exactly on the ring: `Δ = 0`, `|Ω| = κ/4`.
fn ep_strategy() -> impl Strategy<Value = HamiltonianParams> {
    (0.2f64..2.0, 0.0f64..std::f64::consts::TAU)
        .prop_map(|(kappa, phi)| HamiltonianParams::from_polar(0.0, kappa / 4.0, phi, kappa))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(90))]

    #[test]
    fn matches_rk4_on_random_draws(p in params_strategy(), kt in 0.0f64..10.0) {
        let err = check_against_rk4(&p, kt);
        prop_assert!(err < 1e-8, "{p:?} κt={kt}: {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn matches_rk4_exactly_on_the_ring(p in ep_strategy(), kt in 0.0f64..10.0) {
        prop_assert!(p.eigensystem().near_defective);
        let err = check_against_rk4(&p, kt);
        prop_assert!(err < 1e-8, "{p:?} κt={kt}: {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn semigroup(p in params_strategy(), s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let lhs = propagator(&p, s + t).u;
        let rhs = propagator(&p, s).u * propagator(&p, t).u;
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn semigroup_on_the_ring(p in ep_strategy(), s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let lhs = propagator(&p, s + t).u;
        let rhs = propagator(&p, s).u * propagator(&p, t).u;
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    /// Loss only removes amplitude: the norm never grows.
    #[test]
    fn norm_is_non_increasing(
        p in params_strategy(),
        a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0,
        t in 0.0f64..10.0, dt in 0.0f64..1.0,
    ) {
        let psi = Ket::new(Complex64::new(a, b), Complex64::new(c, 0.3));
        let n1 = propagator(&p, t).u.apply(&psi).norm_sqr();
        let n2 = propagator(&p, t + dt).u.apply(&psi).norm_sqr();
        prop_assert!(n2 <= n1 * (1.0 + 1e-12) + 1e-15);
        prop_assert!(n1 <= psi.norm_sqr() * (1.0 + 1e-12));
    }

    #[test]
    fn eigenstates_only_acquire_a_phase(p in params_strategy(), t in 0.0f64..10.0) {
        let es = p.eigensystem();
        prop_assume!(!es.near_defective && es.gap() > 1e-3 * p.kappa);
        let u = propagator(&p, t).u;
        for n in 0..2 {
            let want = es.r[n].scale((-I * es.e[n] * t).exp());
            prop_assert!(u.apply(&es.r[n]).max_abs_diff(&want) < 1e-9);
        }
    }
}
