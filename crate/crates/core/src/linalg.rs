//! Minimal fixed-size linear algebra over a generic [`Scalar`].
//!
//! Only what the pipeline needs: 2/3-vectors, 3x3 matrices, and a 2x2 solve
//! for barycentric coordinates. Row-major throughout.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// 2D point/vector, `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2<S>(pub [S; 2]);

/// 3D point/vector, `[x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec3<S>(pub [S; 3]);

/// 3x3 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3<S>(pub [[S; 3]; 3]);

impl<S: Scalar> Vec2<S> {
    pub fn new(x: S, y: S) -> Self {
        Vec2([x, y])
    }

    pub fn x(self) -> S {
        self.0[0]
    }

    pub fn y(self) -> S {
        self.0[1]
    }

    pub fn sub(self, o: Self) -> Self {
        Vec2([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }

    pub fn norm_sq(self) -> S {
        self.0[0] * self.0[0] + self.0[1] * self.0[1]
    }
}

impl<S: Scalar> Vec3<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Vec3([x, y, z])
    }

    pub fn zero() -> Self {
        Vec3([S::zero(); 3])
    }

    pub fn x(self) -> S {
        self.0[0]
    }

    pub fn y(self) -> S {
        self.0[1]
    }

    pub fn z(self) -> S {
        self.0[2]
    }

    pub fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }

    pub fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }

    pub fn scale(self, s: S) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn dot(self, o: Self) -> S {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Self) -> Self {
        Vec3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }

    pub fn norm_sq(self) -> S {
        self.dot(self)
    }

    pub fn norm(self) -> S {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        self.scale(S::one() / self.norm())
    }

    /// Convert the scalar type componentwise.
    pub fn cast<T: Scalar>(self) -> Vec3<T> {
        Vec3([T::c(self.0[0].widen()), T::c(self.0[1].widen()), T::c(self.0[2].widen())])
    }
}

impl<S: Scalar> Mat3<S> {
    pub fn identity() -> Self {
        let o = S::one();
        let z = S::zero();
        Mat3([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn from_rows(r0: Vec3<S>, r1: Vec3<S>, r2: Vec3<S>) -> Self {
        Mat3([r0.0, r1.0, r2.0])
    }

    pub fn row(self, i: usize) -> Vec3<S> {
        Vec3(self.0[i])
    }

    pub fn mul_vec(self, v: Vec3<S>) -> Vec3<S> {
        Vec3([self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v)])
    }

    pub fn transpose(self) -> Self {
        let m = self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_mat(self, o: Self) -> Self {
        let mut out = [[S::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        Mat3(out)
    }

    pub fn det(self) -> S {
        let m = self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max absolute entry of `self^T self - I`; zero for an orthonormal matrix.
    pub fn orthonormality_error(self) -> S {
        let gram = self.transpose().mul_mat(self);
        let mut worst = S::zero();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { S::one() } else { S::zero() };
                worst = worst.max((gram.0[i][j] - target).abs());
            }
        }
        worst
    }

    pub fn cast<T: Scalar>(self) -> Mat3<T> {
        let mut out = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = T::c(self.0[i][j].widen());
            }
        }
        Mat3(out)
    }
}

/// Rotation by `angle_rad` about the +Y axis.
pub fn rotation_y<S: Scalar>(angle_rad: S) -> Mat3<S> {
    let (s, c) = (angle_rad.sin(), angle_rad.cos());
    let z = S::zero();
    let o = S::one();
    Mat3([[c, z, s], [z, o, z], [-s, z, c]])
}

/// Rotation by `angle_rad` about the +X axis.
pub fn rotation_x<S: Scalar>(angle_rad: S) -> Mat3<S> {
    let (s, c) = (angle_rad.sin(), angle_rad.cos());
    let z = S::zero();
    let o = S::one();
    Mat3([[o, z, z], [z, c, -s], [z, s, c]])
}

/// Solve the 2x2 system `a x = b`. Returns `None` when `a` is singular
/// (|det| <= `det_eps`).
pub fn solve2<S: Scalar>(a: [[S; 2]; 2], b: [S; 2], det_eps: S) -> Option<[S; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() <= det_eps {
        return None;
    }
    let x = (b[0] * a[1][1] - b[1] * a[0][1]) / det;
    let y = (a[0][0] * b[1] - a[1][0] * b[0]) / det;
    Some([x, y])
}
