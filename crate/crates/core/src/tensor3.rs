//! Dense 3×3 tensor algebra for kinematics and stresses.
//!
//! Symmetric tensors (C, T) are stored with their six independent
//! components in the order `(11, 22, 33, 12, 13, 23)`; general tensors
//! (F, P) are stored row-major.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index pairs of the six independent components, in storage order.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// Symmetric second-order tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymTensor3 {
    pub c11: f64,
    pub c22: f64,
    pub c33: f64,
    pub c12: f64,
    pub c13: f64,
    pub c23: f64,
}

impl Default for SymTensor3 {
    fn default() -> Self {
        Self::zero()
    }
}

impl SymTensor3 {
    pub const fn new(c11: f64, c22: f64, c33: f64, c12: f64, c13: f64, c23: f64) -> Self {
        Self {
            c11,
            c22,
            c33,
            c12,
            c13,
            c23,
        }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0)
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Self::new(a, b, c, 0.0, 0.0, 0.0)
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.c11, self.c22, self.c33, self.c12, self.c13, self.c23]
    }

    /// Component `(i, j)` of the materialized 3×3 form.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.c11,
            (1, 1) => self.c22,
            (2, 2) => self.c33,
            (0, 1) => self.c12,
            (0, 2) => self.c13,
            (1, 2) => self.c23,
            _ => panic!("index ({i}, {j}) out of range"),
        }
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.c11, self.c12, self.c13],
            [self.c12, self.c22, self.c23],
            [self.c13, self.c23, self.c33],
        ]
    }

    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3(self.to_matrix())
    }

    pub fn trace(&self) -> f64 {
        self.c11 + self.c22 + self.c33
    }

    pub fn det(&self) -> f64 {
        self.c11 * (self.c22 * self.c33 - self.c23 * self.c23)
            - self.c12 * (self.c12 * self.c33 - self.c23 * self.c13)
            + self.c13 * (self.c12 * self.c23 - self.c22 * self.c13)
    }

    /// Cofactor `det(t) t⁻ᵀ`, computed from 2×2 minors.
    pub fn cof(&self) -> Self {
        Self::new(
            self.c22 * self.c33 - self.c23 * self.c23,
            self.c11 * self.c33 - self.c13 * self.c13,
            self.c11 * self.c22 - self.c12 * self.c12,
            self.c13 * self.c23 - self.c12 * self.c33,
            self.c12 * self.c23 - self.c13 * self.c22,
            self.c12 * self.c13 - self.c11 * self.c23,
        )
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !(det.abs() > 1e-300) {
            return Err(Error::SingularTensor { det });
        }
        Ok(self.cof() * (1.0 / det))
    }

    /// Full double contraction `a : b`, off-diagonal pairs counted twice.
    pub fn ddot(&self, other: &Self) -> f64 {
        self.c11 * other.c11
            + self.c22 * other.c22
            + self.c33 * other.c33
            + 2.0 * (self.c12 * other.c12 + self.c13 * other.c13 + self.c23 * other.c23)
    }

    /// Frobenius norm of the materialized 3×3 form.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Self) -> Tensor3 {
        self.to_tensor() * other.to_tensor()
    }

    /// `R · self · Rᵀ`.
    pub fn rotate(&self, r: &Rotation3) -> Self {
        let m = r.0 * self.to_tensor() * r.0.transpose();
        m.sym_part()
    }

    /// Unique symmetric positive-definite square root (Denman–Beavers iteration).
    pub fn sqrt_spd(&self) -> Result<Self> {
        let det = self.det();
        if !(det > 0.0) {
            return Err(Error::NonPositiveDeterminant { det });
        }
        let mut y = *self;
        let mut z = Self::identity();
        for _ in 0..100 {
            let y_inv = y.inverse()?;
            let z_inv = z.inverse()?;
            let y_next = (y + z_inv) * 0.5;
            let z_next = (z + y_inv) * 0.5;
            let delta = (y_next - y).max_abs();
            y = y_next;
            z = z_next;
            if delta <= 1e-15 * y.max_abs() {
                break;
            }
        }
        Ok(y)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl Add for SymTensor3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.c11 + o.c11,
            self.c22 + o.c22,
            self.c33 + o.c33,
            self.c12 + o.c12,
            self.c13 + o.c13,
            self.c23 + o.c23,
        )
    }
}

impl AddAssign for SymTensor3 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for SymTensor3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.c11 - o.c11,
            self.c22 - o.c22,
            self.c33 - o.c33,
            self.c12 - o.c12,
            self.c13 - o.c13,
            self.c23 - o.c23,
        )
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(
            self.c11 * s,
            self.c22 * s,
            self.c33 * s,
            self.c12 * s,
            self.c13 * s,
            self.c23 * s,
        )
    }
}

impl Neg for SymTensor3 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

/// General second-order tensor, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensor3(pub [[f64; 3]; 3]);

impl Tensor3 {
    pub const fn identity() -> Self {
        Tensor3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub const fn zero() -> Self {
        Tensor3([[0.0; 3]; 3])
    }

    pub fn from_row_major(v: [f64; 9]) -> Self {
        Tensor3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[j][i];
            }
        }
        Tensor3(t)
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Cofactor `det(t) t⁻ᵀ`.
    pub fn cof(&self) -> Self {
        let m = &self.0;
        let mut c = [[0.0; 3]; 3];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                *v = m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1];
            }
        }
        Tensor3(c)
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !(det.abs() > 1e-300) {
            return Err(Error::SingularTensor { det });
        }
        Ok(self.cof().transpose().scale(1.0 / det))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut t = self.0;
        t.iter_mut().flatten().for_each(|v| *v *= s);
        Tensor3(t)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `(t + tᵀ) / 2`.
    pub fn sym_part(&self) -> SymTensor3 {
        let m = &self.0;
        SymTensor3::new(
            m[0][0],
            m[1][1],
            m[2][2],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            0.5 * (m[1][2] + m[2][1]),
        )
    }

    /// Right Cauchy–Green tensor `Fᵀ · F`.
    pub fn right_cauchy_green(&self) -> SymTensor3 {
        (self.transpose() * *self).sym_part()
    }
}

impl Mul for Tensor3 {
    type Output = Tensor3;
    fn mul(self, o: Tensor3) -> Tensor3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Tensor3(r)
    }
}

impl Add for Tensor3 {
    type Output = Tensor3;
    fn add(self, o: Tensor3) -> Tensor3 {
        let mut r = self.0;
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += o.0[i][j];
            }
        }
        Tensor3(r)
    }
}

impl Sub for Tensor3 {
    type Output = Tensor3;
    fn sub(self, o: Tensor3) -> Tensor3 {
        self + o.scale(-1.0)
    }
}

/// Proper orthogonal tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Tensor3);

impl Rotation3 {
    pub const fn identity() -> Self {
        Rotation3(Tensor3::identity())
    }

    /// Rotation about the X1 axis (rotates e2 toward e3).
    pub fn about_x1(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Rotation3(Tensor3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]))
    }

    /// Rotation about the X2 axis (rotates e3 toward e1).
    pub fn about_x2(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Rotation3(Tensor3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]))
    }

    /// Rotation about the X3 axis (rotates e1 toward e2).
    pub fn about_x3(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Rotation3(Tensor3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))
    }

    /// `R_x2(φ2) · R_x3(φ3)`.
    pub fn about_axes(phi2: f64, phi3: f64) -> Self {
        Self::about_x2(phi2).compose(&Self::about_x3(phi3))
    }

    /// Rotation from a (not necessarily normalized) quaternion `(w, x, y, z)`.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        Rotation3(Tensor3([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]))
    }

    pub fn compose(&self, other: &Rotation3) -> Rotation3 {
        Rotation3(self.0 * other.0)
    }

    pub fn transpose(&self) -> Rotation3 {
        Rotation3(self.0.transpose())
    }

    pub fn as_tensor(&self) -> &Tensor3 {
        &self.0
    }

    pub fn det(&self) -> f64 {
        self.0.det()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn assert_sym_close(a: &SymTensor3, b: &SymTensor3, tol: f64) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn det_examples() {
        assert_eq!(SymTensor3::identity().det(), 1.0);
        assert_eq!(SymTensor3::diag(4.0, 1.0, 1.0).det(), 4.0);
        assert_eq!(SymTensor3::diag(1.0, 2.0, 3.0).det(), 6.0);
    }

    #[test]
    fn cof_examples() {
        assert_eq!(SymTensor3::identity().cof(), SymTensor3::identity());
        assert_eq!(
            SymTensor3::diag(4.0, 1.0, 1.0).cof(),
            SymTensor3::diag(1.0, 4.0, 4.0)
        );
        assert_eq!(
            SymTensor3::diag(1.0, 2.0, 3.0).cof(),
            SymTensor3::diag(6.0, 3.0, 2.0)
        );
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(
            SymTensor3::identity().inverse().unwrap(),
            SymTensor3::identity()
        );
        assert_eq!(
            SymTensor3::diag(4.0, 1.0, 1.0).inverse().unwrap(),
            SymTensor3::diag(0.25, 1.0, 1.0)
        );
        assert_eq!(
            (SymTensor3::identity() * 2.0).inverse().unwrap(),
            SymTensor3::identity() * 0.5
        );
    }

    #[test]
    fn inverse_of_singular_fails() {
        let t = SymTensor3::diag(1.0, 0.0, 2.0);
        assert!(matches!(t.inverse(), Err(Error::SingularTensor { .. })));
    }

    #[test]
    fn symmetric_cofactor_matches_general_cofactor() {
        let t = SymTensor3::new(2.0, 3.0, 1.5, 0.3, -0.4, 0.7);
        let general = t.to_tensor().cof();
        assert_sym_close(&t.cof(), &general.sym_part(), 1e-14);
        assert_eq!(general, general.transpose());
    }

    #[test]
    fn rotation_examples() {
        let r = Rotation3::about_axes(0.0, 0.0);
        assert_eq!(*r.as_tensor(), Tensor3::identity());

        // Quarter turn about X2 maps e1 to -e3 and e3 to e1.
        let r = Rotation3::about_axes(FRAC_PI_2, 0.0);
        let m = r.as_tensor().0;
        let e1 = [m[0][0], m[1][0], m[2][0]];
        let e3 = [m[0][2], m[1][2], m[2][2]];
        for (got, want) in e1.iter().zip([0.0, 0.0, -1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        for (got, want) in e3.iter().zip([1.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rotations_are_orthonormal() {
        for &(a, b) in &[(0.3, 1.1), (FRAC_PI_2, FRAC_PI_2), (-2.0, 0.7)] {
            let r = Rotation3::about_axes(a, b);
            assert!((r.det() - 1.0).abs() < 1e-12);
            let rtr = r.as_tensor().transpose() * *r.as_tensor();
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((rtr.0[i][j] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spd_sqrt_of_shear_state() {
        let g = 0.8;
        let c = SymTensor3::new(1.0, 1.0 + g * g, 1.0, g, 0.0, 0.0);
        let u = c.sqrt_spd().unwrap();
        let uu = u.dot(&u).sym_part();
        assert_sym_close(&uu, &c, 1e-13);
        assert!(u.det() > 0.0);
    }

    #[test]
    fn right_cauchy_green_of_shear() {
        let g = 1.5;
        let f = Tensor3([[1.0, g, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let c = f.right_cauchy_green();
        assert_eq!(c, SymTensor3::new(1.0, 1.0 + g * g, 1.0, g, 0.0, 0.0));
    }
}
