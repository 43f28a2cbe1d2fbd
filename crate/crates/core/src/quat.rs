//! Quaternion arithmetic, the left (`J`) and right (`I`) complex structures on
//! `H`, and the three symplectic forms `omega_1, omega_2, omega_3`.

use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{FueterError, Result};

/// `x0 + i x1 + j x2 + k x3`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion {
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

/// One of the three imaginary axes `i, j, k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    I,
    J,
    K,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::I, Axis::J, Axis::K];

    /// Zero-based position (0, 1, 2).
    pub fn index(self) -> usize {
        match self {
            Axis::I => 0,
            Axis::J => 1,
            Axis::K => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i % 3]
    }

    /// The remaining two axes `(j, k)` such that `(self, j, k)` is cyclic.
    pub fn cyclic_rest(self) -> (Axis, Axis) {
        let i = self.index();
        (Axis::from_index(i + 1), Axis::from_index(i + 2))
    }

    pub fn unit(self) -> Quaternion {
        match self {
            Axis::I => Quaternion::I,
            Axis::J => Quaternion::J,
            Axis::K => Quaternion::K,
        }
    }
}

impl TryFrom<usize> for Axis {
    type Error = FueterError;

    /// Accepts the one-based labels 1, 2, 3.
    fn try_from(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Axis::I),
            2 => Ok(Axis::J),
            3 => Ok(Axis::K),
            _ => Err(FueterError::InvalidAxis(i)),
        }
    }
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(x0: f64, x1: f64, x2: f64, x3: f64) -> Self {
        Self { x0, x1, x2, x3 }
    }

    pub const fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Purely imaginary quaternion `v1 i + v2 j + v3 k`.
    pub const fn imaginary(v: [f64; 3]) -> Self {
        Self::new(0.0, v[0], v[1], v[2])
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.x0, self.x1, self.x2, self.x3]
    }

    pub fn component(self, c: usize) -> f64 {
        self.to_array()[c]
    }

    pub fn conj(self) -> Self {
        Self::new(self.x0, -self.x1, -self.x2, -self.x3)
    }

    pub fn norm_sqr(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Euclidean inner product on `R^4`.
    pub fn dot(self, other: Self) -> f64 {
        self.x0 * other.x0 + self.x1 * other.x1 + self.x2 * other.x2 + self.x3 * other.x3
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(s * self.x0, s * self.x1, s * self.x2, s * self.x3)
    }

    pub fn max_abs(self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// `J_a x = e_a x`.
    pub fn left_unit(self, axis: Axis) -> Self {
        axis.unit() * self
    }

    /// `I_a x = -x e_a`.
    pub fn right_unit(self, axis: Axis) -> Self {
        -(self * axis.unit())
    }

    /// Matrix of `x -> q x` on `R^4`.
    pub fn left_matrix(self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for c in 0..4 {
            let mut e = [0.0; 4];
            e[c] = 1.0;
            let col = (self * Quaternion::from_array(e)).to_array();
            for r in 0..4 {
                m[r][c] = col[r];
            }
        }
        m
    }

    /// Matrix of `x -> x q` on `R^4`.
    pub fn right_matrix(self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for c in 0..4 {
            let mut e = [0.0; 4];
            e[c] = 1.0;
            let col = (Quaternion::from_array(e) * self).to_array();
            for r in 0..4 {
                m[r][c] = col[r];
            }
        }
        m
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x0 + o.x0, self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x0 - o.x0, self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3)
    }
}

impl SubAssign for Quaternion {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x0, -self.x1, -self.x2, -self.x3)
    }
}

impl Mul for Quaternion {
    type Output = Self;

    /// Hamilton product.
    fn mul(self, b: Self) -> Self {
        let a = self;
        Self::new(
            a.x0 * b.x0 - a.x1 * b.x1 - a.x2 * b.x2 - a.x3 * b.x3,
            a.x0 * b.x1 + a.x1 * b.x0 + a.x2 * b.x3 - a.x3 * b.x2,
            a.x0 * b.x2 - a.x1 * b.x3 + a.x2 * b.x0 + a.x3 * b.x1,
            a.x0 * b.x3 + a.x1 * b.x2 - a.x2 * b.x1 + a.x3 * b.x0,
        )
    }
}

impl MulAssign for Quaternion {
    fn mul_assign(&mut self, b: Self) {
        *self = *self * b;
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

impl std::iter::Sum for Quaternion {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Quaternion::ZERO, |a, b| a + b)
    }
}

pub fn qmul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

/// Left multiplication by the `i`-th imaginary unit (`i` is one-based).
pub fn apply_j(i: usize, x: Quaternion) -> Result<Quaternion> {
    Ok(x.left_unit(Axis::try_from(i)?))
}

/// Negated right multiplication by the `i`-th imaginary unit (`i` is one-based).
pub fn apply_i(i: usize, x: Quaternion) -> Result<Quaternion> {
    Ok(x.right_unit(Axis::try_from(i)?))
}

/// `omega_i(u, v) = <J_i u, v>`.
pub fn omega(i: usize, u: Quaternion, v: Quaternion) -> Result<f64> {
    Ok(omega_axis(Axis::try_from(i)?, u, v))
}

pub fn omega_axis(axis: Axis, u: Quaternion, v: Quaternion) -> f64 {
    u.left_unit(axis).dot(v)
}

/// `omega_i = dx0 ^ dx_i + dx_j ^ dx_k` evaluated from components.
pub fn omega_from_components(axis: Axis, u: Quaternion, v: Quaternion) -> f64 {
    let (j, k) = axis.cyclic_rest();
    let (i, j, k) = (axis.index() + 1, j.index() + 1, k.index() + 1);
    let (u, v) = (u.to_array(), v.to_array());
    (u[0] * v[i] - u[i] * v[0]) + (u[j] * v[k] - u[k] * v[j])
}

/// `omega_y = y1 omega_1 + y2 omega_2 + y3 omega_3`, equal to `<(y1 i + y2 j + y3 k) u, v>`.
pub fn omega_direction(y: [f64; 3], u: Quaternion, v: Quaternion) -> f64 {
    (Quaternion::imaginary(y) * u).dot(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(rng: &mut ChaCha8Rng) -> Quaternion {
        Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
        (a - b).max_abs() < tol
    }

    #[test]
    fn defining_relations() {
        assert_eq!(qmul(Quaternion::I, Quaternion::J), Quaternion::K);
        assert_eq!(qmul(Quaternion::J, Quaternion::K), Quaternion::I);
        assert_eq!(qmul(Quaternion::K, Quaternion::I), Quaternion::J);
        assert_eq!(qmul(Quaternion::I, Quaternion::I), -Quaternion::ONE);
        let q = Quaternion::new(0.3, -1.2, 2.0, 0.7);
        assert_eq!(qmul(Quaternion::ONE, q), q);
    }

    #[test]
    fn complex_structure_examples() {
        assert_eq!(apply_j(1, Quaternion::ONE).unwrap(), Quaternion::I);
        assert_eq!(apply_j(2, Quaternion::J).unwrap(), -Quaternion::ONE);
        assert_eq!(apply_j(3, Quaternion::I).unwrap(), Quaternion::J);
        assert_eq!(apply_i(1, Quaternion::ONE).unwrap(), -Quaternion::I);
        assert_eq!(apply_i(1, Quaternion::I).unwrap(), Quaternion::ONE);
        assert_eq!(omega(1, Quaternion::ONE, Quaternion::I).unwrap(), 1.0);
    }

    #[test]
    fn invalid_axis_is_rejected() {
        assert_eq!(apply_j(0, Quaternion::ONE), Err(FueterError::InvalidAxis(0)));
        assert_eq!(apply_i(4, Quaternion::ONE), Err(FueterError::InvalidAxis(4)));
        assert!(omega(7, Quaternion::ONE, Quaternion::ONE).is_err());
    }

    #[test]
    fn structure_relations_on_random_quaternions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K];
        let mut samples: Vec<Quaternion> = basis.to_vec();
        samples.extend((0..100).map(|_| random_q(&mut rng)));
        for x in samples {
            for a in Axis::ALL {
                let (b, c) = a.cyclic_rest();
                // J_a J_b = J_c
                assert!(close(x.left_unit(b).left_unit(a), x.left_unit(c), 1e-14));
                assert!(close(x.left_unit(a).left_unit(a), -x, 1e-14));
                assert!(close(x.right_unit(a).right_unit(a), -x, 1e-14));
                for b in Axis::ALL {
                    assert!(close(
                        x.left_unit(a).right_unit(b),
                        x.right_unit(b).left_unit(a),
                        1e-14
                    ));
                }
            }
        }
    }

    #[test]
    fn omega_matches_component_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let (u, v) = (random_q(&mut rng), random_q(&mut rng));
            for a in Axis::ALL {
                let lhs = omega_axis(a, u, v);
                assert!((lhs - omega_from_components(a, u, v)).abs() < 1e-14);
                assert!(omega_axis(a, u, u).abs() < 1e-14);
                assert!((lhs + omega_axis(a, v, u)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn left_and_right_matrices_act_correctly() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (q, x) = (random_q(&mut rng), random_q(&mut rng));
        let (l, r) = (q.left_matrix(), q.right_matrix());
        let xa = x.to_array();
        let apply = |m: [[f64; 4]; 4]| {
            let mut out = [0.0; 4];
            for i in 0..4 {
                out[i] = (0..4).map(|j| m[i][j] * xa[j]).sum();
            }
            Quaternion::from_array(out)
        };
        assert!(close(apply(l), q * x, 1e-14));
        assert!(close(apply(r), x * q, 1e-14));
    }

    proptest::proptest! {
        #[test]
        fn product_is_norm_multiplicative_and_associative(
            a in proptest::array::uniform4(-10.0f64..10.0),
            b in proptest::array::uniform4(-10.0f64..10.0),
            c in proptest::array::uniform4(-10.0f64..10.0),
        ) {
            let (a, b, c) = (Quaternion::from_array(a), Quaternion::from_array(b), Quaternion::from_array(c));
            let scale = 1.0 + a.norm() * b.norm() * (1.0 + c.norm());
            proptest::prop_assert!(((a * b).norm() - a.norm() * b.norm()).abs() <= 1e-14 * scale);
            proptest::prop_assert!(((a * b) * c - a * (b * c)).max_abs() <= 1e-14 * scale);
        }
    }
}
