//! Small fixed-size linear algebra and rotation-group helpers.
//!
//! Everything here is a `Copy` value type. `Mat3` is row-major: `m.0[row][col]`.

use core::fmt;
use core::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Largest symmetric-part Frobenius norm `vee` accepts.
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Orthonormality tolerance enforced by [`RotationMatrix::new`].
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum So3Error {
    NotSkewSymmetric,
    Degenerate,
    NotARotation,
}

impl fmt::Display for So3Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            So3Error::NotSkewSymmetric => f.write_str("matrix is not skew-symmetric"),
            So3Error::Degenerate => f.write_str("matrix is rank deficient or reflects"),
            So3Error::NotARotation => f.write_str("matrix is not a proper rotation"),
        }
    }
}

impl core::error::Error for So3Error {}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub const fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    /// Componentwise product, used for diagonal gains.
    #[inline]
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    /// Clamps each component to `[-limit, limit]` componentwise.
    #[inline]
    pub fn clamp_abs(self, limit: Vec3) -> Vec3 {
        Vec3::new(
            self.x.clamp(-limit.x, limit.x),
            self.y.clamp(-limit.y, limit.y),
            self.z.clamp(-limit.z, limit.z),
        )
    }

    pub fn lerp(self, o: Vec3, s: f64) -> Vec3 {
        self + (o - self) * s
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Mat3(pub [[f64; 3]; 3]);

impl From<[[f64; 3]; 3]> for Mat3 {
    fn from(a: [[f64; 3]; 3]) -> Self {
        Mat3(a)
    }
}

impl From<Mat3> for [[f64; 3]; 3] {
    fn from(m: Mat3) -> Self {
        m.0
    }
}

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub const fn diag(d: Vec3) -> Mat3 {
        Mat3([[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]])
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    #[inline]
    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    #[inline]
    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from(self.0[i])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Adjugate-based inverse; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Mat3> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        let inv = 1.0 / d;
        Some(Mat3([
            [
                (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv,
                (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
                (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
            ],
            [
                (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv,
                (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
                (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
            ],
            [
                (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv,
                (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
                (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
            ],
        ]))
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.0.iter().flatten().map(|v| v * v).sum::<f64>())
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Row-major flattening.
    pub fn to_flat(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }

    pub fn from_flat(a: [f64; 9]) -> Mat3 {
        Mat3([[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]])
    }

    /// `‖MᵀM − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.transpose() * *self - Mat3::IDENTITY).frobenius_norm()
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += o.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] -= o.0[i][j];
            }
        }
        out
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] =
                    self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        out
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
}

/// Skew-symmetric matrix of `v`, so that `hat(v) * y == v.cross(y)`.
#[inline]
pub fn hat(v: Vec3) -> Mat3 {
    Mat3([[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]])
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds [`SKEW_TOLERANCE`].
pub fn vee(m: Mat3) -> Result<Vec3, So3Error> {
    let sym = (m + m.transpose()).scale(0.5);
    if !(sym.frobenius_norm() <= SKEW_TOLERANCE) {
        return Err(So3Error::NotSkewSymmetric);
    }
    Ok(vee_unchecked(m))
}

/// Reads the skew part of `m` without validating symmetry.
#[inline]
fn vee_unchecked(m: Mat3) -> Vec3 {
    Vec3::new(m.0[2][1], m.0[0][2], m.0[1][0])
}

/// Proper rotation (body to inertial), `RᵀR = I`, `det R = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat3", into = "Mat3")]
pub struct RotationMatrix(Mat3);

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TryFrom<Mat3> for RotationMatrix {
    type Error = So3Error;
    fn try_from(m: Mat3) -> Result<Self, So3Error> {
        RotationMatrix::new(m)
    }
}

impl From<RotationMatrix> for Mat3 {
    fn from(r: RotationMatrix) -> Mat3 {
        r.0
    }
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix(Mat3::IDENTITY);

    /// Validates `m` against [`ROTATION_TOLERANCE`].
    pub fn new(m: Mat3) -> Result<Self, So3Error> {
        if !m.is_finite() || !(m.orthonormality_error() < ROTATION_TOLERANCE) || m.det() <= 0.0 {
            return Err(So3Error::NotARotation);
        }
        Ok(RotationMatrix(m))
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        RotationMatrix(Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]))
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        RotationMatrix(Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]))
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        RotationMatrix(Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))
    }

    /// `Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn from_euler_zyx(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self::rot_z(yaw) * Self::rot_y(pitch) * Self::rot_x(roll)
    }

    #[inline]
    pub fn as_mat(&self) -> &Mat3 {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> RotationMatrix {
        RotationMatrix(self.0.transpose())
    }

    /// Body axis `i` expressed in the inertial frame.
    #[inline]
    pub fn axis(&self, i: usize) -> Vec3 {
        self.0.col(i)
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, o: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * o.0)
    }
}

impl Mul<Vec3> for RotationMatrix {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        self.0 * v
    }
}

/// Nearest rotation in the Frobenius sense (orthogonal polar factor).
///
/// Uses the scaled-free Newton iteration `X ← (X + X⁻ᵀ)/2`, which converges
/// quadratically for any nonsingular input with positive determinant.
pub fn orthonormalize(m: Mat3) -> Result<RotationMatrix, So3Error> {
    if !m.is_finite() {
        return Err(So3Error::Degenerate);
    }
    let scale = m.frobenius_norm();
    let det = m.det();
    if !(det > 1e-12 * scale * scale * scale) {
        return Err(So3Error::Degenerate);
    }
    let mut x = m;
    for _ in 0..64 {
        let inv_t = x.inverse().ok_or(So3Error::Degenerate)?.transpose();
        let next = (x + inv_t).scale(0.5);
        let delta = (next - x).frobenius_norm();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    // A final cheap polish keeps ‖XᵀX − I‖ at rounding level.
    let xtx = x.transpose() * x;
    let polish = (Mat3::IDENTITY.scale(3.0) - xtx).scale(0.5);
    x = x * polish;
    if x.orthonormality_error() >= 1e-12 {
        return Err(So3Error::Degenerate);
    }
    Ok(RotationMatrix(x))
}

/// Attitude error `−½ (RcᵀRf − RfᵀRc)^∨` between commanded `rc` and measured `rf`.
///
/// Its norm is `|sin φ|` for a relative rotation of angle `φ`.
pub fn rotation_error(rc: &RotationMatrix, rf: &RotationMatrix) -> Vec3 {
    let q = rc.0.transpose() * rf.0;
    vee_unchecked(q - q.transpose()) * -0.5
}

/// Geodesic angle in `[0, π]` between two attitudes.
pub fn rotation_angle(rc: &RotationMatrix, rf: &RotationMatrix) -> f64 {
    let cos = 0.5 * ((rc.0.transpose() * rf.0).trace() - 1.0);
    libm::atan2(rotation_error(rc, rf).norm(), cos)
}

/// Pitch under the Z-Y-X (yaw-pitch-roll) convention, `θ = −asin(R₃₁)`.
pub fn pitch_of(r: &RotationMatrix) -> f64 {
    -libm::asin(r.0 .0[2][0].clamp(-1.0, 1.0))
}

/// Yaw under the Z-Y-X convention, `ψ = atan2(R₂₁, R₁₁)`.
pub fn yaw_of(r: &RotationMatrix) -> f64 {
    libm::atan2(r.0 .0[1][0], r.0 .0[0][0])
}

/// Roll under the Z-Y-X convention, `φ = atan2(R₃₂, R₃₃)`.
pub fn roll_of(r: &RotationMatrix) -> f64 {
    libm::atan2(r.0 .0[2][1], r.0 .0[2][2])
}
