//! Holomorphic model of the spin-`n/2` representation of `SU(2) = S^3`.
//!
//! A point `y ∈ S^3 ⊂ H` is written `y = z1 + j z2` with `z1 = y0 + i y1`,
//! `z2 = y2 - i y3`. Right multiplication by `i` is the complex structure, so
//! left multiplication by a quaternion is a complex 2x2 matrix acting on
//! `(z1, z2)`. Degree-`n` holomorphic polynomials restricted to `S^3` form one
//! copy of the irreducible representation `V_n`; the derivative along the
//! right-invariant field `v(y) = u y` acts on them as `p ↦ ∇p · (A_u z)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::linalg::realify;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const IM: Complex64 = Complex64::new(0.0, 1.0);

/// `(z1, z2)` with `y = z1 + j z2`.
pub fn hopf_coords(y: [f64; 4]) -> (Complex64, Complex64) {
    (Complex64::new(y[0], y[1]), Complex64::new(y[2], -y[3]))
}

/// Left multiplication by `i`, `j`, `k` in the `(z1, z2)` coordinates.
pub fn unit_generators() -> [Matrix2<Complex64>; 3] {
    [
        Matrix2::new(IM, ZERO, ZERO, -IM),
        Matrix2::new(ZERO, -ONE, ONE, ZERO),
        Matrix2::new(ZERO, -IM, -IM, ZERO),
    ]
}

/// Left multiplication by the imaginary quaternion `u1 i + u2 j + u3 k`.
pub fn generator(u: [f64; 3]) -> Matrix2<Complex64> {
    let g = unit_generators();
    g[0] * Complex64::from(u[0]) + g[1] * Complex64::from(u[1]) + g[2] * Complex64::from(u[2])
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Normalisation making `Re e_m`, `Im e_m` orthonormal in `L^2(S^3)` for `n ≥ 1`.
fn norm_const(n: usize, m: usize) -> f64 {
    (factorial(n + 1) / (factorial(n - m) * factorial(m))).sqrt() / PI
}

/// Values of `e_m = c_m z1^{n-m} z2^m`, `m = 0..=n`.
pub fn basis_values(n: usize, z1: Complex64, z2: Complex64) -> Vec<Complex64> {
    (0..=n)
        .map(|m| z1.powu((n - m) as u32) * z2.powu(m as u32) * norm_const(n, m))
        .collect()
}

/// Matrix of `p ↦ ∇p · (A z)` on the basis `e_0..e_n` (column = input).
pub fn rho(n: usize, a: &Matrix2<Complex64>) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(n + 1, n + 1, ZERO);
    for m in 0..=n {
        let (p, q) = ((n - m) as f64, m as f64);
        out[(m, m)] = a[(0, 0)] * p + a[(1, 1)] * q;
        if m < n {
            out[(m + 1, m)] = a[(0, 1)] * p * norm_const(n, m) / norm_const(n, m + 1);
        }
        if m > 0 {
            out[(m - 1, m)] = a[(1, 0)] * q * norm_const(n, m) / norm_const(n, m - 1);
        }
    }
    out
}

/// Derivative along `v(y) = u y` acting on real coefficient vectors `x` of
/// `Σ x_b b` with `b` running over `[Re e_0.. Re e_n, Im e_0.. Im e_n]`.
pub fn rho_real(n: usize, u: [f64; 3]) -> DMatrix<f64> {
    // d Re e_m = Σ_l (Re ρ_lm Re e_l - Im ρ_lm Im e_l), which is the real form
    // of the conjugate matrix
    realify(&rho(n, &generator(u)).map(|z| z.conj()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureRule;
    use crate::quat::Quaternion;
    use crate::frame::ManifoldPoint;

    fn cmax(m: &DMatrix<Complex64>) -> f64 {
        m.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    #[test]
    fn generators_match_quaternion_products() {
        let y = [0.3, -0.5, 0.7, 0.1];
        let (z1, z2) = hopf_coords(y);
        for (a, g) in unit_generators().iter().enumerate() {
            let mut u = [0.0; 3];
            u[a] = 1.0;
            let prod = Quaternion::imaginary(u) * Quaternion::from_array(y);
            let (w1, w2) = hopf_coords(prod.to_array());
            let mapped = g * nalgebra::Vector2::new(z1, z2);
            assert!((mapped[0] - w1).norm() < 1e-15 && (mapped[1] - w2).norm() < 1e-15);
        }
    }

    #[test]
    fn representation_is_unitary_with_casimir() {
        for n in 1..6 {
            let gens = unit_generators();
            let mut cas = DMatrix::from_element(n + 1, n + 1, ZERO);
            for g in &gens {
                let r = rho(n, g);
                assert!(cmax(&(&r + r.adjoint())) < 1e-13);
                cas -= &r * &r;
            }
            let expected = DMatrix::identity(n + 1, n + 1) * Complex64::from((n * (n + 2)) as f64);
            assert!(cmax(&(cas - expected)) < 1e-12);
        }
    }

    #[test]
    fn commutator_follows_quaternion_product() {
        // [d_a, d_b] is the derivative along the field (ba - ab) y.
        let (a, b) = (generator([0.3, -1.2, 0.5]), generator([0.9, 0.4, -0.7]));
        let n = 4;
        let lhs = rho(n, &a) * rho(n, &b) - rho(n, &b) * rho(n, &a);
        let rhs = rho(n, &(b * a - a * b));
        assert!(cmax(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn rho_matches_finite_difference_derivative() {
        let n = 3;
        let u = [0.4, -0.3, 0.8];
        let r = rho(n, &generator(u));
        let y = [0.5, 0.5, -0.5, 0.5];
        let h = 1e-6;
        let yq = Quaternion::from_array(y);
        let step = |t: f64| {
            let p = yq + Quaternion::imaginary(u) * yq * t;
            let (z1, z2) = hopf_coords(p.to_array());
            basis_values(n, z1, z2)
        };
        let (z1, z2) = hopf_coords(y);
        let vals = basis_values(n, z1, z2);
        let (plus, minus) = (step(h), step(-h));
        for m in 0..=n {
            let fd = (plus[m] - minus[m]) / (2.0 * h);
            let exact: Complex64 = (0..=n).map(|k| r[(k, m)] * vals[k]).sum();
            assert!((fd - exact).norm() < 1e-8, "m={m}");
        }
    }

    #[test]
    fn real_parts_are_orthonormal() {
        let n = 3;
        let rule = QuadratureRule::sphere3(2 * n + 2);
        let funcs = |p: &ManifoldPoint| {
            let ManifoldPoint::Sphere3(y) = *p else { unreachable!() };
            let (z1, z2) = hopf_coords(y);
            let v = basis_values(n, z1, z2);
            v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect::<Vec<f64>>()
        };
        let d = 2 * (n + 1);
        for a in 0..d {
            for b in 0..d {
                let g = rule.integrate(|p| {
                    let f = funcs(p);
                    f[a] * f[b]
                });
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-12, "({a},{b}) {g}");
            }
        }
    }
}
