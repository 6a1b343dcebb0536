//! Fixed-size dense matrices for the two-capacitor state space.
//!
//! Everything here is stack allocated. The only transcendental routine is the
//! matrix exponential, computed by scaling and squaring a truncated Taylor
//! series; for the 3×3 augmented matrices used in zero-order-hold
//! discretization that is both exact to rounding and cheap.

use core::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat2(pub [[f64; 2]; 2]);

/// Column 2-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vec2(pub [f64; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        let m = &self.0;
        Vec2([m[0][0] * v.0[0] + m[0][1] * v.0[1], m[1][0] * v.0[0] + m[1][1] * v.0[1]])
    }

    /// Solves `self · x = rhs` by Cramer's rule. `None` when singular.
    pub fn solve(&self, rhs: Vec2) -> Option<Vec2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Vec2([(rhs.0[0] * m[1][1] - m[0][1] * rhs.0[1]) / det, (m[0][0] * rhs.0[1] - rhs.0[0] * m[1][0]) / det]))
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        let tr = self.trace();
        let det = self.det();
        let disc = tr * tr / 4.0 - det;
        if disc >= 0.0 {
            let s = libm::sqrt(disc);
            libm::fabs(tr / 2.0 + s).max(libm::fabs(tr / 2.0 - s))
        } else {
            // complex pair: |λ|² = det
            libm::sqrt(det)
        }
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max(libm::fabs(self.0[i][j] - other.0[i][j]));
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut out = self.0;
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell -= rhs.0[i][j];
            }
        }
        Mat2(out)
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2([0.0, 0.0]);

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2([self.0[0] * k, self.0[1] * k])
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.0[0], self.0[1])
    }

    pub fn is_finite(self) -> bool {
        self.0[0].is_finite() && self.0[1].is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1]])
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1]])
    }
}

/// 3×3 matrix, row-major. Only used for augmented exponentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Induced 1-norm (max column sum).
    pub fn norm1(&self) -> f64 {
        (0..3).map(|j| (0..3).map(|i| libm::fabs(self.0[i][j])).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn scale(&self, k: f64) -> Mat3 {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|x| *x *= k);
        Mat3(out)
    }

    pub fn add(&self, rhs: &Mat3) -> Mat3 {
        let mut out = self.0;
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell += rhs.0[i][j];
            }
        }
        Mat3(out)
    }

    pub fn matmul(&self, rhs: &Mat3) -> Mat3 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Mat3(out)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

const TAYLOR_MAX_TERMS: usize = 30;
/// After scaling, the series argument has 1-norm at most this.
const SCALED_NORM_BOUND: f64 = 0.5;

/// Matrix exponential by scaling and squaring.
///
/// The argument is halved until its 1-norm is at most 1/2, the exponential of
/// the scaled matrix is summed as a Taylor series until terms fall below
/// machine precision (at most 30 terms; the truncation error bound at norm 1/2
/// is below 1e-30), and the result is squared back.
pub fn expm3(x: &Mat3) -> Mat3 {
    let mut squarings = 0u32;
    let mut norm = x.norm1();
    while norm > SCALED_NORM_BOUND && squarings < 1024 {
        norm *= 0.5;
        squarings += 1;
    }
    let scaled = x.scale(libm::ldexp(1.0, -(squarings as i32)));

    let mut sum = Mat3::IDENTITY;
    let mut term = Mat3::IDENTITY;
    for n in 1..=TAYLOR_MAX_TERMS {
        term = term.matmul(&scaled).scale(1.0 / n as f64);
        sum = sum.add(&term);
        if term.norm1() <= f64::EPSILON * 1e-3 * sum.norm1() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}
