//! Minimal fixed-size linear algebra. The whole pipeline lives in the plane,
//! so a pair of hand-rolled 2-D types beats pulling in a matrix library.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// A point or displacement in the projected plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Vec2 {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Outer product `self * other^T`.
    pub fn outer(self, other: Vec2) -> Mat2 {
        Mat2([
            [self.x * other.x, self.x * other.y],
            [self.y * other.x, self.y * other.y],
        ])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Vec2 {
        Vec2 { x: a[0], y: a[1] }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> [f64; 2] {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// A 2x2 matrix in row-major order. Most matrices in this crate are
/// symmetric positive definite (covariances, precisions, Wishart scales);
/// the helpers below assume symmetry where noted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);

    pub fn diag(a: f64, d: f64) -> Mat2 {
        Mat2([[a, 0.0], [0.0, d]])
    }

    pub fn scaled_identity(s: f64) -> Mat2 {
        Mat2::diag(s, s)
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    /// `None` when the determinant is zero or not finite.
    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Mat2([
            [self.0[1][1] * inv, -self.0[0][1] * inv],
            [-self.0[1][0] * inv, self.0[0][0] * inv],
        ]))
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2([
            [self.0[0][0] + o.0[0][0], self.0[0][1] + o.0[0][1]],
            [self.0[1][0] + o.0[1][0], self.0[1][1] + o.0[1][1]],
        ])
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2([
            [self.0[0][0] * s, self.0[0][1] * s],
            [self.0[1][0] * s, self.0[1][1] * s],
        ])
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.0[0][0] * v.x + self.0[0][1] * v.y,
            self.0[1][0] * v.x + self.0[1][1] * v.y,
        )
    }

    pub fn mul_mat(&self, o: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j];
            }
        }
        Mat2(out)
    }

    /// `v^T M v`.
    pub fn quad_form(&self, v: Vec2) -> f64 {
        v.dot(self.mul_vec(v))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    /// Off-diagonal entries agree within `tol` (absolute).
    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.0[0][1] - self.0[1][0]).abs() <= tol
    }

    /// Sylvester's criterion for a symmetric matrix: both leading principal
    /// minors strictly positive. Only meaningful when `is_symmetric` holds.
    pub fn is_positive_definite(&self) -> bool {
        self.is_finite() && self.0[0][0] > 0.0 && self.det() > 0.0
    }

    /// Lower-triangular Cholesky factor `L` with `L L^T = self`, for a
    /// symmetric positive definite input. `None` when the decomposition
    /// breaks down.
    pub fn cholesky(&self) -> Option<Mat2> {
        let a = self.0[0][0];
        if a.is_nan() || a <= 0.0 {
            return None;
        }
        let l11 = a.sqrt();
        let l21 = self.0[1][0] / l11;
        let rest = self.0[1][1] - l21 * l21;
        if rest.is_nan() || rest <= 0.0 {
            return None;
        }
        Some(Mat2([[l11, 0.0], [l21, rest.sqrt()]]))
    }
}

impl From<[[f64; 2]; 2]> for Mat2 {
    fn from(a: [[f64; 2]; 2]) -> Mat2 {
        Mat2(a)
    }
}

impl From<Mat2> for [[f64; 2]; 2] {
    fn from(m: Mat2) -> [[f64; 2]; 2] {
        m.0
    }
}
