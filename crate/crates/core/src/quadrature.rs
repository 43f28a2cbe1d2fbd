//! Product quadrature rules on `T^3`, `S^2`, `S^3` and `S^1 x S^2`, exact for
//! band-limited integrands up to a declared degree.

use std::f64::consts::PI;

use crate::error::{FueterError, Result};
use crate::frame::{Manifold, ManifoldPoint};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact for polynomials of
/// degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Quadrature on `S^2`: Gauss-Legendre in `cos(phi)` times a uniform azimuth
/// grid, exact for polynomials in `(y1, y2, y3)` of total degree `degree`.
pub fn sphere2_rule(degree: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    let n_z = degree / 2 + 1;
    let n_az = degree + 1;
    let (zs, wz) = gauss_legendre(n_z);
    let mut nodes = Vec::with_capacity(n_z * n_az);
    let mut weights = Vec::with_capacity(n_z * n_az);
    for (z, wz) in zs.iter().zip(&wz) {
        let r = (1.0 - z * z).sqrt();
        for a in 0..n_az {
            let psi = 2.0 * PI * a as f64 / n_az as f64;
            nodes.push([r * psi.cos(), r * psi.sin(), *z]);
            weights.push(wz * 2.0 * PI / n_az as f64);
        }
    }
    (nodes, weights)
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub manifold: Manifold,
    pub nodes: Vec<ManifoldPoint>,
    pub weights: Vec<f64>,
    /// Torus: largest per-axis Fourier degree integrated exactly. Spheres:
    /// polynomial degree. Product: Fourier degree in theta.
    pub degree: usize,
    /// Product only: polynomial degree on the `S^2` factor.
    pub sphere_degree: usize,
}

impl QuadratureRule {
    /// Tensor trapezoid rule with `n` points per axis; exact for trigonometric
    /// polynomials with per-axis degree below `n`.
    pub fn torus(n: usize) -> Self {
        let n = n.max(1);
        let h = 1.0 / n as f64;
        let mut nodes = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    nodes.push(ManifoldPoint::Torus3([a as f64 * h, b as f64 * h, c as f64 * h]));
                }
            }
        }
        let weights = vec![h * h * h; nodes.len()];
        Self { manifold: Manifold::Torus3, nodes, weights, degree: n - 1, sphere_degree: 0 }
    }

    /// Hopf-coordinate product rule on the unit sphere `S^3`, exact for
    /// polynomials in `(y0, .., y3)` up to `degree`.
    ///
    /// `y0 + i y1 = cos(eta) e^{i a}`, `y2 + i y3 = sin(eta) e^{i b}`, with
    /// `t = sin^2(eta)` integrated by Gauss-Legendre.
    pub fn sphere3(degree: usize) -> Self {
        let n_t = degree / 4 + 1;
        let n_xi = degree + 1;
        let (ts, wt) = gauss_legendre(n_t);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let dxi = 2.0 * PI / n_xi as f64;
        for (t, wt) in ts.iter().zip(&wt) {
            let t = 0.5 * (t + 1.0);
            let (c, s) = ((1.0 - t).sqrt(), t.sqrt());
            for a in 0..n_xi {
                let xa = a as f64 * dxi;
                for b in 0..n_xi {
                    let xb = b as f64 * dxi;
                    nodes.push(ManifoldPoint::Sphere3([c * xa.cos(), c * xa.sin(), s * xb.cos(), s * xb.sin()]));
                    // (1/2) dt dxi_a dxi_b with t in [0,1]
                    weights.push(0.5 * 0.5 * wt * dxi * dxi);
                }
            }
        }
        Self { manifold: Manifold::Sphere3, nodes, weights, degree, sphere_degree: 0 }
    }

    /// Uniform theta grid times the `S^2` rule; exact for Fourier degree
    /// `fourier_degree` in theta and polynomial degree `sphere_degree` on `S^2`.
    pub fn product(fourier_degree: usize, sphere_degree: usize) -> Self {
        let n_theta = fourier_degree + 1;
        let (s2, w2) = sphere2_rule(sphere_degree);
        let dtheta = 2.0 * PI / n_theta as f64;
        let mut nodes = Vec::with_capacity(n_theta * s2.len());
        let mut weights = Vec::with_capacity(n_theta * s2.len());
        for t in 0..n_theta {
            let theta = t as f64 * dtheta;
            for (y, w) in s2.iter().zip(&w2) {
                nodes.push(ManifoldPoint::ProductS1S2 { theta, y: *y });
                weights.push(w * dtheta);
            }
        }
        Self { manifold: Manifold::ProductS1S2, nodes, weights, degree: fourier_degree, sphere_degree }
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: Fn(&ManifoldPoint) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    /// Fails if the rule is not exact for the requested degree(s).
    pub fn require(&self, needed: usize, needed_sphere: usize) -> Result<()> {
        if self.degree < needed {
            return Err(FueterError::QuadratureDegree { declared: self.degree, needed });
        }
        if self.manifold == Manifold::ProductS1S2 && self.sphere_degree < needed_sphere {
            return Err(FueterError::QuadratureDegree { declared: self.sphere_degree, needed: needed_sphere });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        let (x, w) = gauss_legendre(6);
        for k in 0..=11u32 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-14, "k={k}: {q} vs {exact}");
        }
    }

    #[test]
    fn volumes() {
        assert!((QuadratureRule::torus(5).volume() - 1.0).abs() < 1e-14);
        assert!((QuadratureRule::sphere3(6).volume() - 2.0 * PI * PI).abs() < 1e-12);
        assert!((QuadratureRule::product(4, 6).volume() - 8.0 * PI * PI).abs() < 1e-12);
    }

    // Moments of the uniform measure on S^{n-1}: prod Gamma((a_i+1)/2) / Gamma((|a|+n)/2) * 2.
    fn sphere_moment(a: &[u32]) -> f64 {
        if a.iter().any(|k| k % 2 == 1) {
            return 0.0;
        }
        // all even: use Gamma(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)
        let half = |m: u32| factorial(2 * m) * PI.sqrt() / (4f64.powi(m as i32) * factorial(m));
        let num: f64 = a.iter().map(|k| half(k / 2)).product();
        let total: u32 = a.iter().sum::<u32>() + a.len() as u32;
        let den = if total % 2 == 0 { factorial(total / 2 - 1) } else { half((total - 1) / 2) };
        2.0 * num / den
    }

    #[test]
    fn sphere3_rule_is_exact_for_monomials() {
        let deg = 8;
        let rule = QuadratureRule::sphere3(deg);
        for a0 in 0..=4u32 {
            for a1 in 0..=(4 - a0) {
                for a2 in 0..=2u32 {
                    for a3 in 0..=2u32 {
                        let a = [a0, a1, a2, a3];
                        if a.iter().sum::<u32>() as usize > deg {
                            continue;
                        }
                        let q = rule.integrate(|p| match p {
                            ManifoldPoint::Sphere3(y) => (0..4).map(|i| y[i].powi(a[i] as i32)).product(),
                            _ => unreachable!(),
                        });
                        assert!((q - sphere_moment(&a)).abs() < 1e-12, "{a:?}: {q} vs {}", sphere_moment(&a));
                    }
                }
            }
        }
    }

    #[test]
    fn sphere2_rule_is_exact_for_monomials() {
        let (nodes, w) = sphere2_rule(7);
        for a in 0..=4u32 {
            for b in 0..=3u32 {
                for c in 0..=(7 - a - b.min(7 - a)) {
                    if a + b + c > 7 {
                        continue;
                    }
                    let q: f64 = nodes
                        .iter()
                        .zip(&w)
                        .map(|(y, w)| w * y[0].powi(a as i32) * y[1].powi(b as i32) * y[2].powi(c as i32))
                        .sum();
                    assert!((q - sphere_moment(&[a, b, c])).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn insufficient_degree_is_reported() {
        let rule = QuadratureRule::sphere3(4);
        assert_eq!(rule.require(6, 0), Err(FueterError::QuadratureDegree { declared: 4, needed: 6 }));
        assert!(rule.require(4, 0).is_ok());
    }
}
