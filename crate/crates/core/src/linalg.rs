//! Fixed-size 2×2 complex algebra.
//!
//! Right eigenvectors are [`Ket`]s, left eigenvectors are [`Bra`]s. A bra is a
//! row covector in its own right: `Bra::dot` is the plain bilinear pairing with
//! no conjugation, which is what the biorthogonal inner product needs.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Unit-modulus phase factor `e^{iθ}`.
#[inline]
pub fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2c(pub [[Complex64; 2]; 2]);

impl Matrix2c {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Matrix2c([[a, b], [c, d]])
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        Self::new(a, ZERO, ZERO, d)
    }

    pub fn pauli_x() -> Self {
        Self::from_real(0.0, 1.0, 1.0, 0.0)
    }

    pub fn pauli_y() -> Self {
        Self::new(ZERO, -I, I, ZERO)
    }

    pub fn pauli_z() -> Self {
        Self::from_real(1.0, 0.0, 0.0, -1.0)
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0], m[1][0], m[0][1], m[1][1])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Self::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn column(&self, j: usize) -> Ket {
        Ket([self.0[0][j], self.0[1][j]])
    }

    pub fn row(&self, i: usize) -> Bra {
        Bra(self.0[i])
    }

    pub fn apply(&self, v: &Ket) -> Ket {
        let m = &self.0;
        Ket([
            m[0][0] * v.0[0] + m[0][1] * v.0[1],
            m[1][0] * v.0[0] + m[1][1] * v.0[1],
        ])
    }

    /// Largest entry modulus.
    pub fn norm_max(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Singular values `(σ_max, σ_min)` from the Hermitian square `M†M`.
    pub fn singular_values(&self) -> (f64, f64) {
        let m = &self.0;
        let p = m[0][0].norm_sqr() + m[1][0].norm_sqr();
        let q = m[0][1].norm_sqr() + m[1][1].norm_sqr();
        let r = m[0][0].conj() * m[0][1] + m[1][0].conj() * m[1][1];
        let s1 = ((p + q) / 2.0 + ((p - q) / 2.0).hypot(r.norm())).sqrt();
        // σ₁σ₂ = |det M| avoids the cancellation in the smaller root.
        let s2 = if s1 > 0.0 { self.det().norm() / s1 } else { 0.0 };
        (s1, s2)
    }

    /// `|a⟩⟨b|` with `b` a covector.
    pub fn outer(a: &Ket, b: &Bra) -> Self {
        Self::new(a.0[0] * b.0[0], a.0[0] * b.0[1], a.0[1] * b.0[0], a.0[1] * b.0[1])
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).norm_max()
    }
}

impl Index<(usize, usize)> for Matrix2c {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Matrix2c {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.0[i][j]
    }
}

impl Mul for Matrix2c {
    type Output = Matrix2c;
    fn mul(self, rhs: Matrix2c) -> Matrix2c {
        let a = &self.0;
        let b = &rhs.0;
        Matrix2c::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Add for Matrix2c {
    type Output = Matrix2c;
    fn add(self, rhs: Matrix2c) -> Matrix2c {
        let (a, b) = (&self.0, &rhs.0);
        Matrix2c::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl Sub for Matrix2c {
    type Output = Matrix2c;
    fn sub(self, rhs: Matrix2c) -> Matrix2c {
        let (a, b) = (&self.0, &rhs.0);
        Matrix2c::new(a[0][0] - b[0][0], a[0][1] - b[0][1], a[1][0] - b[1][0], a[1][1] - b[1][1])
    }
}

impl Neg for Matrix2c {
    type Output = Matrix2c;
    fn neg(self) -> Matrix2c {
        self.scale_re(-1.0)
    }
}

/// Column vector in ℂ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ket(pub [Complex64; 2]);

impl Ket {
    pub const fn new(a: Complex64, b: Complex64) -> Self {
        Ket([a, b])
    }

    pub fn from_real(a: f64, b: f64) -> Self {
        Ket([a.into(), b.into()])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Ket {
        Ket([self.0[0] * s, self.0[1] * s])
    }

    pub fn normalized(&self) -> Ket {
        self.scale(Complex64::new(1.0 / self.norm(), 0.0))
    }

    /// Hermitian conjugate as a covector.
    pub fn dagger(&self) -> Bra {
        Bra([self.0[0].conj(), self.0[1].conj()])
    }

    /// Conjugate-linear inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Complex64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> Matrix2c {
        Matrix2c::outer(self, &self.dagger())
    }

    pub fn max_abs_diff(&self, other: &Ket) -> f64 {
        (self.0[0] - other.0[0]).norm().max((self.0[1] - other.0[1]).norm())
    }
}

impl Index<usize> for Ket {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Row covector in ℂ². Pairs with a [`Ket`] without conjugation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bra(pub [Complex64; 2]);

impl Bra {
    pub fn dot(&self, k: &Ket) -> Complex64 {
        self.0[0] * k.0[0] + self.0[1] * k.0[1]
    }

    pub fn scale(&self, s: Complex64) -> Bra {
        Bra([self.0[0] * s, self.0[1] * s])
    }

    /// `⟨self| M`.
    pub fn apply(&self, m: &Matrix2c) -> Bra {
        Bra([
            self.0[0] * m.0[0][0] + self.0[1] * m.0[1][0],
            self.0[0] * m.0[0][1] + self.0[1] * m.0[1][1],
        ])
    }

    pub fn norm(&self) -> f64 {
        (self.0[0].norm_sqr() + self.0[1].norm_sqr()).sqrt()
    }
}

impl Index<usize> for Bra {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}
