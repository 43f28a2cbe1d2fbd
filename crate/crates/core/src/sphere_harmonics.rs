//! Real orthonormal spherical harmonics on `S^2` and the matrices of the
//! rotation fields `R_i = (e_i x y)·∇` and the coordinate multipliers `y_i`.

use nalgebra::DMatrix;

use crate::quadrature::sphere2_rule;

/// Position of `Y_{l,mu}` in the flat basis, `mu ∈ [-l, l]`.
pub fn sh_index(l: usize, mu: i64) -> usize {
    ((l * l + l) as i64 + mu) as usize
}

pub fn sh_count(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

/// `(l, mu)` of each flat index.
pub fn sh_labels(lmax: usize) -> Vec<(usize, i64)> {
    (0..=lmax).flat_map(|l| (-(l as i64)..=l as i64).map(move |mu| (l, mu))).collect()
}

/// All `Y_{l,mu}(y)` for `l ≤ lmax`. Positive `mu` carry `cos(mu phi)`,
/// negative `mu` carry `sin(|mu| phi)`; no Condon-Shortley phase.
pub fn real_sh(lmax: usize, y: [f64; 3]) -> Vec<f64> {
    let mut out = vec![0.0; sh_count(lmax)];
    let x = y[2];
    let w = num_complex::Complex64::new(y[0], y[1]);
    let mut diag = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    let mut wpow = num_complex::Complex64::new(1.0, 0.0);
    for mu in 0..=lmax {
        if mu > 0 {
            diag *= ((2 * mu + 1) as f64 / (2 * mu) as f64).sqrt();
            wpow *= w;
        }
        let (c, s) = if mu == 0 { (1.0, 0.0) } else { (std::f64::consts::SQRT_2 * wpow.re, std::f64::consts::SQRT_2 * wpow.im) };
        // q holds the normalised associated Legendre function divided by sin^mu
        let mut q_prev = 0.0;
        let mut q = diag;
        for l in mu..=lmax {
            if l == mu + 1 {
                q_prev = q;
                q = ((2 * mu + 3) as f64).sqrt() * x * q_prev;
            } else if l > mu + 1 {
                let (lf, mf) = (l as f64, mu as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                let next = a * (x * q - b * q_prev);
                q_prev = q;
                q = next;
            }
            out[sh_index(l, mu as i64)] = q * c;
            if mu > 0 {
                out[sh_index(l, -(mu as i64))] = q * s;
            }
        }
    }
    out
}

/// Matrices `<Y_a, R_i Y_b>` of the rotation generators about the three
/// coordinate axes. Each is antisymmetric and block-diagonal in `l`.
///
/// `R_3 = d/dphi` is exact on the basis; `R_1`, `R_2` are obtained by
/// conjugating with the cyclic coordinate permutation, whose matrix is
/// integrated exactly.
pub fn rotation_generators(lmax: usize) -> [DMatrix<f64>; 3] {
    let n = sh_count(lmax);
    let mut r3 = DMatrix::zeros(n, n);
    for l in 1..=lmax {
        for mu in 1..=l as i64 {
            let (c, s) = (sh_index(l, mu), sh_index(l, -mu));
            r3[(s, c)] = -(mu as f64);
            r3[(c, s)] = mu as f64;
        }
    }
    // (C g)(y) = g(P y) with P e1 = e2, P e2 = e3, P e3 = e1.
    let (nodes, weights) = sphere2_rule(2 * lmax + 2);
    let mut c = DMatrix::zeros(n, n);
    for (y, w) in nodes.iter().zip(&weights) {
        let a = real_sh(lmax, *y);
        let b = real_sh(lmax, [y[2], y[0], y[1]]);
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                c[(i, j)] += w * a[i] * b[j];
            }
        }
    }
    let r1 = c.transpose() * &r3 * &c;
    let r2 = c.transpose() * &r1 * &c;
    [r1, r2, r3].map(|m| (&m - m.transpose()) * 0.5)
}

/// Galerkin matrices `<Y_a, y_i Y_b>` on `l ≤ lmax` (exact quadrature).
pub fn multiplication_matrices(lmax: usize) -> [DMatrix<f64>; 3] {
    let n = sh_count(lmax);
    let (nodes, weights) = sphere2_rule(2 * lmax + 2);
    let mut out = [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for (y, w) in nodes.iter().zip(&weights) {
        let v = real_sh(lmax, *y);
        for (i, m) in out.iter_mut().enumerate() {
            let wy = w * y[i];
            for a in 0..n {
                let s = wy * v[a];
                for b in 0..n {
                    m[(a, b)] += s * v[b];
                }
            }
        }
    }
    out.map(|m| (&m + m.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn rot(i: usize, t: f64, y: [f64; 3]) -> [f64; 3] {
        let (c, s) = (t.cos(), t.sin());
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let mut out = y;
        out[j] = c * y[j] - s * y[k];
        out[k] = s * y[j] + c * y[k];
        out
    }

    #[test]
    fn basis_is_orthonormal() {
        let lmax = 7;
        let (nodes, w) = sphere2_rule(2 * lmax);
        let n = sh_count(lmax);
        let mut g = DMatrix::<f64>::zeros(n, n);
        for (y, w) in nodes.iter().zip(&w) {
            let v = real_sh(lmax, *y);
            for a in 0..n {
                for b in 0..n {
                    g[(a, b)] += w * v[a] * v[b];
                }
            }
        }
        assert!(max_abs(&(g - DMatrix::identity(n, n))) < 1e-12);
    }

    #[test]
    fn low_degree_closed_forms() {
        let y = [0.48, -0.6, 0.64];
        let v = real_sh(1, y);
        let c0 = 0.5 / std::f64::consts::PI.sqrt();
        let c1 = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
        assert!((v[0] - c0).abs() < 1e-15);
        assert!((v[sh_index(1, 0)] - c1 * y[2]).abs() < 1e-15);
        assert!((v[sh_index(1, 1)] - c1 * y[0]).abs() < 1e-15);
        assert!((v[sh_index(1, -1)] - c1 * y[1]).abs() < 1e-15);
    }

    #[test]
    fn rotation_generators_match_finite_differences() {
        let lmax = 5;
        let r = rotation_generators(lmax);
        let y = [0.36, 0.48, 0.8];
        let v = real_sh(lmax, y);
        let h = 1e-5;
        for i in 0..3 {
            let plus = real_sh(lmax, rot(i, h, y));
            let minus = real_sh(lmax, rot(i, -h, y));
            for b in 0..sh_count(lmax) {
                let fd = (plus[b] - minus[b]) / (2.0 * h);
                let exact: f64 = (0..sh_count(lmax)).map(|a| r[i][(a, b)] * v[a]).sum();
                assert!((fd - exact).abs() < 1e-8, "i={i} b={b}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn rotation_casimir_is_minus_l_l_plus_one() {
        let lmax = 6;
        let r = rotation_generators(lmax);
        let cas = &r[0] * &r[0] + &r[1] * &r[1] + &r[2] * &r[2];
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            sh_count(lmax),
            sh_labels(lmax).iter().map(|(l, _)| -((l * (l + 1)) as f64)),
        ));
        assert!(max_abs(&(cas - diag)) < 1e-11);
    }

    #[test]
    fn multiplication_couples_neighbouring_degrees() {
        let lmax = 4;
        let y = multiplication_matrices(lmax);
        let labels = sh_labels(lmax);
        for m in &y {
            for (a, (la, _)) in labels.iter().enumerate() {
                for (b, (lb, _)) in labels.iter().enumerate() {
                    if la.abs_diff(*lb) != 1 {
                        assert!(m[(a, b)].abs() < 1e-13);
                    }
                }
            }
        }
        // y3 Y_00 = Y_10 / sqrt(3)
        assert!((y[2][(sh_index(1, 0), 0)] - 1.0 / 3f64.sqrt()).abs() < 1e-14);
    }
}
