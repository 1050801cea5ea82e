//! Quaternion scalars, pure-quaternion pixels, and the scaled gray-axis
//! rotation matrices that the quaternion layers are built from.
//!
//! A color pixel is a pure quaternion (zero scalar part) whose imaginary
//! coefficients carry the three color channels. A convolution tap is a pair
//! `(s, theta)`: a scaling factor and a rotation angle about the gray axis
//! `(i + j + k)/sqrt(3)`. Applying a tap to a pixel is the conjugation
//! `(1/s) * w * q * w!`, which on 3-vectors is exactly `s * R(theta)` with a
//! circulant 3x3 rotation matrix — that matrix form is what the layers use,
//! and [`sandwich`] keeps the direct quaternion product around as an
//! independent cross-check.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Full quaternion `w + x i + y j + z k`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    /// Conjugate: negates the imaginary parts.
    pub fn conjugate(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sq(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    /// Modulus `sqrt(q q*)`.
    pub fn modulus(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Multiplicative inverse `conj(q) / |q|^2`; fails for the zero quaternion.
    pub fn inverse(self) -> Result<Self> {
        let n = self.norm_sq();
        if n == 0.0 {
            return Err(Error::domain("inverse of the zero quaternion"));
        }
        Ok(self.conjugate() * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, k: f64) -> Quaternion {
        Quaternion::new(self.w * k, self.x * k, self.y * k, self.z * k)
    }
}

/// Hamilton product; non-commutative.
impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

/// Hamilton product of two quaternions.
pub fn qmul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

/// Quaternion with structurally absent scalar part. Pixels are stored in this
/// form, so purity is guaranteed by the representation, not by a check.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PureQuaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PureQuaternion {
    pub const ZERO: PureQuaternion = PureQuaternion::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        PureQuaternion { x, y, z }
    }

    /// 3-vector view; exact round-trip with [`PureQuaternion::from_vec`].
    pub fn to_vec(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_vec(v: [f64; 3]) -> Self {
        PureQuaternion::new(v[0], v[1], v[2])
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(self, o: PureQuaternion) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn scaled(self, k: f64) -> Self {
        PureQuaternion::new(self.x * k, self.y * k, self.z * k)
    }
}

impl From<PureQuaternion> for Quaternion {
    fn from(p: PureQuaternion) -> Quaternion {
        Quaternion::new(0.0, p.x, p.y, p.z)
    }
}

impl Add for PureQuaternion {
    type Output = PureQuaternion;
    fn add(self, o: PureQuaternion) -> PureQuaternion {
        PureQuaternion::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for PureQuaternion {
    fn add_assign(&mut self, o: PureQuaternion) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for PureQuaternion {
    type Output = PureQuaternion;
    fn sub(self, o: PureQuaternion) -> PureQuaternion {
        PureQuaternion::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for PureQuaternion {
    fn sub_assign(&mut self, o: PureQuaternion) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl Neg for PureQuaternion {
    type Output = PureQuaternion;
    fn neg(self) -> PureQuaternion {
        PureQuaternion::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for PureQuaternion {
    type Output = PureQuaternion;
    fn mul(self, k: f64) -> PureQuaternion {
        self.scaled(k)
    }
}

/// Unit gray axis `(i + j + k)/sqrt(3)`, the fixed rotation axis of every tap.
pub fn gray_axis() -> PureQuaternion {
    let c = 1.0 / 3f64.sqrt();
    PureQuaternion::new(c, c, c)
}

/// Componentwise mean and real scalar variance `(1/n) sum ||q_l - E[q]||^2`
/// of a non-empty batch.
pub fn mean_var(batch: &[Quaternion]) -> Result<(Quaternion, f64)> {
    if batch.is_empty() {
        return Err(Error::domain("mean/variance of an empty batch"));
    }
    let n = batch.len() as f64;
    let mut mean = Quaternion::ZERO;
    for q in batch {
        mean = mean + *q;
    }
    mean = mean * (1.0 / n);
    let mut var = 0.0;
    for q in batch {
        var += (*q - mean).norm_sq();
    }
    Ok((mean, var / n))
}

/// Dense matrix of quaternions; only the entrywise l1 norm is needed here.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Quaternion>,
}

impl QMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Quaternion>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::config("quaternion matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::config(format!(
                "quaternion matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(QMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        QMatrix::new(rows, cols, vec![Quaternion::ZERO; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Quaternion {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, q: Quaternion) {
        self.data[i * self.cols + j] = q;
    }

    /// Entrywise l1 norm: the sum of quaternion moduli.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|q| q.modulus()).sum()
    }
}

/// Scaling factor and rotation angle of one convolution tap.
///
/// `new` wraps the angle into `[-pi, pi)`; optimizers mutate the fields
/// directly so gradient steps never see a wrap discontinuity, and
/// [`RotationParams::canonical`] re-wraps for reporting.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RotationParams {
    pub s: f64,
    pub theta: f64,
}

impl RotationParams {
    pub fn new(s: f64, theta: f64) -> Self {
        RotationParams {
            s,
            theta: wrap_angle(theta),
        }
    }

    /// Identity tap: unit scale, zero rotation.
    pub fn identity() -> Self {
        RotationParams { s: 1.0, theta: 0.0 }
    }

    /// Same parameters with the angle wrapped back into `[-pi, pi)`.
    pub fn canonical(self) -> Self {
        RotationParams {
            s: self.s,
            theta: wrap_angle(self.theta),
        }
    }
}

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// Plain 3x3 real matrix, stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Matrix-vector product on the 3-vector view of a pure quaternion.
    #[inline]
    pub fn apply(&self, v: PureQuaternion) -> PureQuaternion {
        let m = &self.0;
        PureQuaternion::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// `transpose(self) * v` without materializing the transpose.
    #[inline]
    pub fn apply_transposed(&self, v: PureQuaternion) -> PureQuaternion {
        let m = &self.0;
        PureQuaternion::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn matmul(&self, o: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn scaled(&self, k: f64) -> Mat3 {
        let mut r = self.0;
        for row in &mut r {
            for cell in row {
                *cell *= k;
            }
        }
        Mat3(r)
    }

    /// Largest absolute entry of `self - o`.
    pub fn max_abs_diff(&self, o: &Mat3) -> f64 {
        let mut m = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((self.0[i][j] - o.0[i][j]).abs());
            }
        }
        m
    }
}

fn circulant(g1: f64, g2: f64, g3: f64) -> Mat3 {
    Mat3([[g1, g2, g3], [g3, g1, g2], [g2, g3, g1]])
}

/// Scaled rotation matrix `s * R(theta)` for a rotation by `theta` about the
/// gray axis. The unscaled `R` is circulant with first row
/// `(1/3 + 2/3 cos t, 1/3 - 2/3 cos(t - pi/3), 1/3 - 2/3 cos(t + pi/3))`;
/// the entries are evaluated in the angle-sum-expanded form
/// `(1 - cos t)/3 -/+ sin t / sqrt(3)` so that `theta = 0` yields the exact
/// identity matrix.
pub fn rotation_matrix(p: RotationParams) -> Mat3 {
    let (sin, cos) = p.theta.sin_cos();
    let k = 1.0 / 3f64.sqrt();
    let g1 = cos + (1.0 - cos) / 3.0;
    let g2 = (1.0 - cos) / 3.0 - sin * k;
    let g3 = (1.0 - cos) / 3.0 + sin * k;
    circulant(g1, g2, g3).scaled(p.s)
}

/// Entrywise derivative of [`rotation_matrix`] with respect to the angle,
/// keeping the `s` scaling: `s * R'(theta)`. First row
/// `(-2/3 sin t, 2/3 sin(t - pi/3), 2/3 sin(t + pi/3))` in the same
/// expanded form.
pub fn rotation_matrix_dtheta(p: RotationParams) -> Mat3 {
    let (sin, cos) = p.theta.sin_cos();
    let k = 1.0 / 3f64.sqrt();
    let g1 = sin / 3.0 - sin;
    let g2 = sin / 3.0 - cos * k;
    let g3 = sin / 3.0 + cos * k;
    circulant(g1, g2, g3).scaled(p.s)
}

/// Direct sandwich product `(1/s) * w * q * w!` with
/// `w = s (cos(theta/2) + sin(theta/2) mu)`.
///
/// Equals `s * R(theta)` acting on the vector view of `q`; kept as the
/// independent oracle for [`rotation_matrix`].
pub fn sandwich(p: RotationParams, q: PureQuaternion) -> Result<PureQuaternion> {
    if p.s == 0.0 {
        return Err(Error::domain("sandwich product requires a nonzero scaling factor"));
    }
    let half = 0.5 * p.theta;
    let axis = gray_axis();
    let w = Quaternion::new(
        p.s * half.cos(),
        p.s * half.sin() * axis.x,
        p.s * half.sin() * axis.y,
        p.s * half.sin() * axis.z,
    );
    let r = (w * Quaternion::from(q) * w.conjugate()) * (1.0 / p.s);
    // Scalar part cancels analytically; only rounding dust remains.
    Ok(PureQuaternion::new(r.x, r.y, r.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn quat_close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
        (a - b).modulus() <= tol
    }

    #[test]
    fn multiplication_table() {
        let (i, j, k) = (Quaternion::I, Quaternion::J, Quaternion::K);
        assert_eq!(i * j, k);
        assert_eq!(j * k, i);
        assert_eq!(k * i, j);
        assert_eq!(j * i, -k);
        assert_eq!(i * i, -Quaternion::ONE);
        assert_eq!(j * j, -Quaternion::ONE);
        assert_eq!(k * k, -Quaternion::ONE);
        assert_eq!(i * j * k, -Quaternion::ONE);
    }

    #[test]
    fn conjugate_pair_product() {
        let a = Quaternion::new(1.0, 1.0, 0.0, 0.0);
        let b = Quaternion::new(1.0, -1.0, 0.0, 0.0);
        assert_eq!(qmul(a, b), Quaternion::new(2.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn product_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rand_q = || {
            Quaternion::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            )
        };
        for _ in 0..200 {
            let (a, b, c) = (rand_q(), rand_q(), rand_q());
            let lhs = (a * b) * c;
            let rhs = a * (b * c);
            let scale = lhs.modulus().max(1.0);
            assert!(
                quat_close(lhs, rhs, 1e-12 * scale),
                "associativity violated: {lhs:?} vs {rhs:?}"
            );
        }
    }

    #[test]
    fn conjugate_modulus_inverse() {
        assert_eq!(
            Quaternion::new(2.0, 3.0, 0.0, 0.0).conjugate(),
            Quaternion::new(2.0, -3.0, 0.0, 0.0)
        );
        assert_eq!(Quaternion::new(1.0, 1.0, 1.0, 1.0).modulus(), 2.0);

        let inv_i = Quaternion::I.inverse().unwrap();
        assert_eq!(inv_i, -Quaternion::I);
        assert_eq!(Quaternion::I * inv_i, Quaternion::ONE);

        assert!(matches!(Quaternion::ZERO.inverse(), Err(Error::Domain(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let q = Quaternion::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            if q.norm_sq() < 1e-6 {
                continue;
            }
            let prod = q * q.inverse().unwrap();
            assert!(quat_close(prod, Quaternion::ONE, 1e-12));
        }
    }

    #[test]
    fn mean_var_examples() {
        // {i, 3i}: mean 2i, variance ((1)+(1))/2 = 1.
        let (m, v) = mean_var(&[Quaternion::I, Quaternion::I * 3.0]).unwrap();
        assert_eq!(m, Quaternion::new(0.0, 2.0, 0.0, 0.0));
        assert_eq!(v, 1.0);

        // Singleton batch: mean is the element, variance 0.
        let q = Quaternion::new(0.5, -1.0, 2.0, 0.25);
        let (m, v) = mean_var(&[q]).unwrap();
        assert_eq!(m, q);
        assert_eq!(v, 0.0);

        // {1, i, j, k}: mean (1+i+j+k)/4, variance 3/4 by direct summation.
        let batch = [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K];
        let (m, v) = mean_var(&batch).unwrap();
        assert_eq!(m, Quaternion::new(0.25, 0.25, 0.25, 0.25));
        let oracle: f64 =
            batch.iter().map(|q| (*q - m).norm_sq()).sum::<f64>() / batch.len() as f64;
        assert!(approx(v, 0.75, 1e-15));
        assert_eq!(v, oracle);

        assert!(matches!(mean_var(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn l1_norm_examples() {
        let a = QMatrix::new(
            2,
            1,
            vec![Quaternion::I, Quaternion::new(1.0, 0.0, 1.0, 0.0)],
        )
        .unwrap();
        assert!(approx(a.l1_norm(), 1.0 + 2f64.sqrt(), 1e-15));

        assert_eq!(QMatrix::zeros(3, 4).unwrap().l1_norm(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<Quaternion> = (0..16)
            .map(|_| {
                Quaternion::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let m = QMatrix::new(4, 4, data.clone()).unwrap();
        let elementwise: f64 = data.iter().map(|q| q.modulus()).sum();
        assert_eq!(m.l1_norm(), elementwise);
    }

    #[test]
    fn rotation_matrix_identity_and_third_turn() {
        let r = rotation_matrix(RotationParams::new(1.0, 0.0));
        assert!(r.max_abs_diff(&Mat3::IDENTITY) < 1e-15);

        // A third turn about the gray axis cyclically permutes the channels.
        let r = rotation_matrix(RotationParams::new(1.0, 2.0 * PI / 3.0));
        let perm = Mat3([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(r.max_abs_diff(&perm) < 1e-15, "got {r:?}");
    }

    #[test]
    fn rotation_matrix_scaled_is_orthogonal_after_unscaling() {
        let p = RotationParams::new(2.0, PI / 2.0);
        let r = rotation_matrix(p).scaled(1.0 / p.s);
        let rtr = r.transpose().matmul(&r);
        assert!(rtr.max_abs_diff(&Mat3::IDENTITY) < 1e-12);
        assert!(approx(r.det(), 1.0, 1e-12));
    }

    #[test]
    fn rotation_matrix_gray_axis_fixpoint() {
        for &theta in &[0.0, 0.3, -2.9, PI / 2.0, 2.0 * PI / 3.0] {
            for &(s, c) in &[(1.0, 1.0), (0.7, -2.0), (3.0, 0.25)] {
                let r = rotation_matrix(RotationParams::new(s, theta));
                let out = r.apply(PureQuaternion::new(c, c, c));
                let want = s * c;
                let tol = 1e-14 * want.abs().max(1.0);
                assert!(approx(out.x, want, tol));
                assert!(approx(out.y, want, tol));
                assert!(approx(out.z, want, tol));
            }
        }
    }

    #[test]
    fn dtheta_matches_finite_differences() {
        let h = 1e-5;
        for &theta in &[0.0, 0.4, -1.3, 2.8] {
            for &s in &[1.0, 0.5, 2.0] {
                let d = rotation_matrix_dtheta(RotationParams::new(s, theta));
                let plus = rotation_matrix(RotationParams::new(s, theta + h));
                let minus = rotation_matrix(RotationParams::new(s, theta - h));
                for i in 0..3 {
                    for j in 0..3 {
                        let fd = (plus.0[i][j] - minus.0[i][j]) / (2.0 * h);
                        assert!(
                            approx(d.0[i][j], fd, 1e-8),
                            "entry ({i},{j}) at theta={theta}: {} vs fd {}",
                            d.0[i][j],
                            fd
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn dtheta_row_sums_vanish_and_zero_scale_is_zero() {
        let d = rotation_matrix_dtheta(RotationParams::new(1.5, 0.8));
        for row in &d.0 {
            assert!(approx(row.iter().sum::<f64>(), 0.0, 1e-15));
        }
        let z = rotation_matrix_dtheta(RotationParams::new(0.0, 0.8));
        assert!(z.max_abs_diff(&Mat3::ZERO) == 0.0);
    }

    #[test]
    fn sandwich_identity_and_axis_fixpoint() {
        let q = Quaternion::I;
        let out = sandwich(
            RotationParams::new(1.0, 0.0),
            PureQuaternion::new(q.x, q.y, q.z),
        )
        .unwrap();
        assert!(approx(out.x, 1.0, 1e-15) && approx(out.y, 0.0, 1e-15));

        let axis = gray_axis();
        for &theta in &[0.9, -2.2, PI - 0.01] {
            let out = sandwich(RotationParams::new(1.0, theta), axis).unwrap();
            assert!((out - axis).norm() < 1e-12);
        }

        assert!(matches!(
            sandwich(RotationParams::new(0.0, 1.0), axis),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sandwich_agrees_with_rotation_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let p = RotationParams::new(rng.gen_range(0.2..3.0), rng.gen_range(-PI..PI));
            let q = PureQuaternion::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let direct = sandwich(p, q).unwrap();
            let via_matrix = rotation_matrix(p).apply(q);
            assert!(
                (direct - via_matrix).norm() < 1e-12,
                "sandwich {direct:?} vs matrix {via_matrix:?}"
            );
        }
    }

    #[test]
    fn angle_wrapping() {
        let p = RotationParams::new(1.0, 3.0 * PI);
        assert!(approx(p.theta, -PI, 1e-12) || approx(p.theta, PI, 1e-12));
        assert!(p.theta >= -PI && p.theta < PI);

        // Raw construction keeps the angle untouched; canonical re-wraps.
        let raw = RotationParams { s: 1.0, theta: 7.0 };
        assert_eq!(raw.theta, 7.0);
        let c = raw.canonical();
        assert!(c.theta >= -PI && c.theta < PI);
        assert!(approx((c.theta - 7.0).rem_euclid(2.0 * PI), 0.0, 1e-12));
    }

    proptest! {
        #[test]
        fn prop_unit_rotation_is_orthogonal(theta in -PI..PI) {
            let r = rotation_matrix(RotationParams::new(1.0, theta));
            let rtr = r.transpose().matmul(&r);
            prop_assert!(rtr.max_abs_diff(&Mat3::IDENTITY) < 1e-12);
            prop_assert!((r.det() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn prop_variance_shift_invariant(
            ws in proptest::collection::vec(-5.0f64..5.0, 2..12),
            shift in -5.0f64..5.0,
        ) {
            let batch: Vec<Quaternion> =
                ws.iter().map(|&w| Quaternion::new(w, -w, 2.0 * w, 0.5)).collect();
            let shifted: Vec<Quaternion> = batch
                .iter()
                .map(|q| *q + Quaternion::new(shift, shift, -shift, shift))
                .collect();
            let (_, v0) = mean_var(&batch).unwrap();
            let (_, v1) = mean_var(&shifted).unwrap();
            prop_assert!((v0 - v1).abs() < 1e-9 * v0.abs().max(1.0));
        }
    }
}
