//! Catalog of divergence-free frames on `T^3`, `S^3` and `S^1 x S^2`.
//!
//! Tangent vectors and covectors are stored in ambient coordinates as
//! [`Ambient`] 4-vectors: `(y1, y2, y3, 0)` on the torus, `(y0, .., y3)` on
//! `S^3 ⊂ H`, and `(theta, y1, y2, y3)` on `S^1 x S^2`.
//!
//! Brackets follow the convention `L_[u,v] = -[L_u, L_v]`, so on the standard
//! `S^3` frame `[v_j, v_k] = 2 v_i`.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FueterError, Result};
use crate::quadrature::QuadratureRule;
use crate::quat::{Axis, Quaternion};

pub type Ambient = Vector4<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    Torus3,
    Sphere3,
    ProductS1S2,
}

impl Manifold {
    pub fn volume(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            Manifold::Torus3 => 1.0,
            Manifold::Sphere3 => 2.0 * PI * PI,
            Manifold::ProductS1S2 => 8.0 * PI * PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldPoint {
    Torus3([f64; 3]),
    Sphere3([f64; 4]),
    ProductS1S2 { theta: f64, y: [f64; 3] },
}

const UNIT_TOL: f64 = 1e-12;

impl ManifoldPoint {
    pub fn manifold(&self) -> Manifold {
        match self {
            ManifoldPoint::Torus3(_) => Manifold::Torus3,
            ManifoldPoint::Sphere3(_) => Manifold::Sphere3,
            ManifoldPoint::ProductS1S2 { .. } => Manifold::ProductS1S2,
        }
    }

    pub fn ambient(&self) -> Ambient {
        match *self {
            ManifoldPoint::Torus3(y) => Vector4::new(y[0], y[1], y[2], 0.0),
            ManifoldPoint::Sphere3(y) => Vector4::from(y),
            ManifoldPoint::ProductS1S2 { theta, y } => Vector4::new(theta, y[0], y[1], y[2]),
        }
    }

    /// Checks the unit-norm constraint of the sphere factors.
    pub fn is_valid(&self) -> bool {
        match self {
            ManifoldPoint::Torus3(y) => y.iter().all(|v| v.is_finite()),
            ManifoldPoint::Sphere3(y) => (y.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < UNIT_TOL,
            ManifoldPoint::ProductS1S2 { theta, y } => {
                theta.is_finite() && (y.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < UNIT_TOL
            }
        }
    }

    pub fn random<R: Rng>(manifold: Manifold, rng: &mut R) -> Self {
        let gauss = |rng: &mut R| -> f64 {
            // Box-Muller
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            let v: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        };
        match manifold {
            Manifold::Torus3 => ManifoldPoint::Torus3([rng.random(), rng.random(), rng.random()]),
            Manifold::Sphere3 => {
                let y: [f64; 4] = std::array::from_fn(|_| gauss(rng));
                let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                ManifoldPoint::Sphere3(y.map(|v| v / n))
            }
            Manifold::ProductS1S2 => {
                let y: [f64; 3] = std::array::from_fn(|_| gauss(rng));
                let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                ManifoldPoint::ProductS1S2 {
                    theta: rng.random_range(0.0..2.0 * std::f64::consts::PI),
                    y: y.map(|v| v / n),
                }
            }
        }
    }

    /// Positively oriented tangent basis with `dvol(t1, t2, t3) = 1`, built
    /// without reference to any frame.
    pub fn oriented_tangent_basis(&self) -> [Ambient; 3] {
        match *self {
            ManifoldPoint::Torus3(_) => [Vector4::x(), Vector4::y(), Vector4::z()],
            ManifoldPoint::Sphere3(y) => {
                let q = Quaternion::from_array(y);
                Axis::ALL.map(|a| Vector4::from((a.unit() * q).to_array()))
            }
            ManifoldPoint::ProductS1S2 { y, .. } => {
                let yv = Vector3::from(y);
                let seed = if y[0].abs() < 0.6 { Vector3::x() } else { Vector3::y() };
                let a = seed.cross(&yv).normalize();
                let b = yv.cross(&a);
                [Vector4::x(), Vector4::new(0.0, a.x, a.y, a.z), Vector4::new(0.0, b.x, b.y, b.z)]
            }
        }
    }

    /// The volume form of the manifold evaluated on three tangent vectors.
    pub fn dvol(&self, a: &Ambient, b: &Ambient, c: &Ambient) -> f64 {
        match *self {
            ManifoldPoint::Torus3(_) => Matrix3::from_columns(&[a.xyz(), b.xyz(), c.xyz()]).determinant(),
            ManifoldPoint::Sphere3(_) => Matrix4::from_columns(&[self.ambient(), *a, *b, *c]).determinant(),
            ManifoldPoint::ProductS1S2 { y, .. } => {
                let n = Vector4::new(0.0, y[0], y[1], y[2]);
                Matrix4::from_columns(&[*a, *b, *c, n]).determinant()
            }
        }
    }
}

/// A positive divergence-free frame from the catalog.
///
/// * `Torus3`: the columns of `u` are constant vector fields.
/// * `Sphere3`: the columns `u_i ∈ Im H` give `v_i(y) = u_i y`.
/// * `ProductS1S2`: `u` is the identity; `v_i = y_i d/dtheta + e_i x y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    manifold: Manifold,
    u: Matrix3<f64>,
}

/// JSON form `{ "manifold": ..., "U": [9 reals, row-major] }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FrameJson {
    pub manifold: Manifold,
    #[serde(rename = "U")]
    pub u: Vec<f64>,
}

impl FrameSpec {
    pub fn new(manifold: Manifold, u: Matrix3<f64>) -> Result<Self> {
        if !u.iter().all(|x| x.is_finite()) {
            return Err(FueterError::InvalidFrame("non-finite entries".into()));
        }
        let det = u.determinant();
        if det <= 0.0 {
            return Err(FueterError::InvalidFrame(format!("det U = {det:.6e} is not positive")));
        }
        if manifold == Manifold::ProductS1S2 && (u - Matrix3::identity()).abs().max() > 1e-14 {
            return Err(FueterError::InvalidFrame("the S1xS2 catalog frame requires U = I".into()));
        }
        Ok(Self { manifold, u })
    }

    pub fn torus(u: Matrix3<f64>) -> Result<Self> {
        Self::new(Manifold::Torus3, u)
    }

    pub fn sphere3(u: Matrix3<f64>) -> Result<Self> {
        Self::new(Manifold::Sphere3, u)
    }

    pub fn standard_torus() -> Self {
        Self { manifold: Manifold::Torus3, u: Matrix3::identity() }
    }

    /// `v_i(y) = e_i y`.
    pub fn standard_sphere() -> Self {
        Self { manifold: Manifold::Sphere3, u: Matrix3::identity() }
    }

    /// `U = diag(2^{2/3}, -2^{-1/3}, -2^{-1/3})`, whose kernel contains `f(y) = y`.
    pub fn singular_sphere() -> Self {
        let a = 2f64.powf(2.0 / 3.0);
        let b = -(2f64.powf(-1.0 / 3.0));
        Self { manifold: Manifold::Sphere3, u: Matrix3::from_diagonal(&Vector3::new(a, b, b)) }
    }

    pub fn product_s1s2() -> Self {
        Self { manifold: Manifold::ProductS1S2, u: Matrix3::identity() }
    }

    pub fn from_json(json: &FrameJson) -> Result<Self> {
        if json.u.len() != 9 {
            return Err(FueterError::InvalidFrame(format!("U must have 9 entries, got {}", json.u.len())));
        }
        Self::new(json.manifold, Matrix3::from_row_slice(&json.u))
    }

    pub fn to_json(&self) -> FrameJson {
        FrameJson { manifold: self.manifold, u: self.u.transpose().iter().copied().collect() }
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.u
    }

    fn u_inv(&self) -> Matrix3<f64> {
        self.u.try_inverse().expect("det U > 0 is checked at construction")
    }

    /// Cofactor matrix `det(U) U^{-T}`; column `i` is `u_j x u_k`.
    pub fn cofactor(&self) -> Matrix3<f64> {
        cofactor(&self.u)
    }

    fn check(&self, p: &ManifoldPoint) -> Result<()> {
        if p.manifold() != self.manifold || !p.is_valid() {
            return Err(FueterError::PointMismatch { expected: self.manifold });
        }
        Ok(())
    }

    /// `v_i` evaluated at an ambient point, using the natural extension of the
    /// defining formula off the manifold.
    pub fn ambient_field(&self, i: usize, x: &Ambient) -> Ambient {
        match self.manifold {
            Manifold::Torus3 => {
                let c = self.u.column(i);
                Vector4::new(c[0], c[1], c[2], 0.0)
            }
            Manifold::Sphere3 => {
                let c = self.u.column(i);
                let q = Quaternion::imaginary([c[0], c[1], c[2]]) * Quaternion::new(x[0], x[1], x[2], x[3]);
                Vector4::from(q.to_array())
            }
            Manifold::ProductS1S2 => {
                let y = Vector3::new(x[1], x[2], x[3]);
                let r = unit3(i).cross(&y);
                Vector4::new(y[i], r.x, r.y, r.z)
            }
        }
    }

    /// Analytic bracket field `w_i = [v_j, v_k]` at an ambient point.
    pub fn ambient_bracket(&self, i: usize, x: &Ambient) -> Ambient {
        match self.manifold {
            Manifold::Torus3 => Vector4::zeros(),
            Manifold::Sphere3 => {
                let c = self.cofactor().column(i) * 2.0;
                let q = Quaternion::imaginary([c[0], c[1], c[2]]) * Quaternion::new(x[0], x[1], x[2], x[3]);
                Vector4::from(q.to_array())
            }
            Manifold::ProductS1S2 => {
                let y = Vector3::new(x[1], x[2], x[3]);
                let r = unit3(i).cross(&y);
                Vector4::new(2.0 * y[i], r.x, r.y, r.z)
            }
        }
    }

    pub fn frame_vectors(&self, p: &ManifoldPoint) -> Result<[Ambient; 3]> {
        self.check(p)?;
        let x = p.ambient();
        Ok(std::array::from_fn(|i| self.ambient_field(i, &x)))
    }

    /// Covectors `alpha_i` with `alpha_i(v_j) = delta_ij`, acting by the
    /// ambient dot product on tangent vectors.
    pub fn dual_coframe(&self, p: &ManifoldPoint) -> Result<[Ambient; 3]> {
        self.check(p)?;
        Ok(self.coframe_unchecked(p))
    }

    fn coframe_unchecked(&self, p: &ManifoldPoint) -> [Ambient; 3] {
        let inv = self.u_inv();
        match *p {
            ManifoldPoint::Torus3(_) => std::array::from_fn(|i| {
                let r = inv.row(i);
                Vector4::new(r[0], r[1], r[2], 0.0)
            }),
            ManifoldPoint::Sphere3(y) => {
                let q = Quaternion::from_array(y);
                let theta: [Ambient; 3] = Axis::ALL.map(|a| Vector4::from((a.unit() * q).to_array()));
                std::array::from_fn(|i| (0..3).map(|a| theta[a] * inv[(i, a)]).sum())
            }
            ManifoldPoint::ProductS1S2 { y, .. } => std::array::from_fn(|i| {
                let r = unit3(i).cross(&Vector3::from(y));
                Vector4::new(y[i], r.x, r.y, r.z)
            }),
        }
    }

    /// `lambda = dvol(v_1, v_2, v_3)` at `p`.
    pub fn volume_density(&self, p: &ManifoldPoint) -> Result<f64> {
        let v = self.frame_vectors(p)?;
        Ok(p.dvol(&v[0], &v[1], &v[2]))
    }

    /// Normal means `lambda ≡ 1`, checked on a quadrature grid to 1e-10.
    pub fn is_normal(&self) -> bool {
        self.test_grid().nodes.iter().all(|p| (self.volume_density(p).unwrap_or(f64::NAN) - 1.0).abs() < 1e-10)
    }

    fn test_grid(&self) -> QuadratureRule {
        match self.manifold {
            Manifold::Torus3 => QuadratureRule::torus(4),
            Manifold::Sphere3 => QuadratureRule::sphere3(6),
            Manifold::ProductS1S2 => QuadratureRule::product(4, 6),
        }
    }

    pub fn bracket_fields(&self, p: &ManifoldPoint) -> Result<[Ambient; 3]> {
        self.check(p)?;
        let x = p.ambient();
        Ok(std::array::from_fn(|i| self.ambient_bracket(i, &x)))
    }

    /// Finite-difference estimate of `w_i = [v_j, v_k]` from a symmetrised
    /// commutator of flows: the composite flow
    /// `phi^v_{-t} phi^u_{-t} phi^v_t phi^u_t (p) = p - t^2 [u, v] + O(t^3)`
    /// (in the bracket convention above); averaging `t = ±h` cancels the cubic
    /// term, so the estimate is second-order accurate in `h`.
    pub fn bracket_oracle(&self, p: &ManifoldPoint, h: f64) -> Result<[Ambient; 3]> {
        self.check(p)?;
        if !(h > 0.0 && h <= 0.25) {
            return Err(FueterError::InvalidInput(format!("bracket step h = {h} must lie in (0, 0.25]")));
        }
        let x = p.ambient();
        Ok(std::array::from_fn(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let est = |t: f64| {
                let mut z = self.flow(j, &x, t);
                z = self.flow(k, &z, t);
                z = self.flow(j, &z, -t);
                z = self.flow(k, &z, -t);
                (z - x) / (t * t)
            };
            -(est(h) + est(-h)) * 0.5
        }))
    }

    /// Richardson extrapolation of [`Self::bracket_oracle`] over `h` and `h/2`.
    pub fn bracket_oracle_richardson(&self, p: &ManifoldPoint, h: f64) -> Result<[Ambient; 3]> {
        let coarse = self.bracket_oracle(p, h)?;
        let fine = self.bracket_oracle(p, h / 2.0)?;
        Ok(std::array::from_fn(|i| (fine[i] * 4.0 - coarse[i]) / 3.0))
    }

    /// Time-`t` flow of `v_i` from an ambient point (classical RK4).
    pub fn flow(&self, i: usize, x: &Ambient, t: f64) -> Ambient {
        const STEPS: usize = 64;
        let dt = t / STEPS as f64;
        let mut z = *x;
        for _ in 0..STEPS {
            let k1 = self.ambient_field(i, &z);
            let k2 = self.ambient_field(i, &(z + k1 * (dt / 2.0)));
            let k3 = self.ambient_field(i, &(z + k2 * (dt / 2.0)));
            let k4 = self.ambient_field(i, &(z + k3 * dt));
            z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        z
    }

    /// Intrinsic divergence of `v_i` at `p`, from a central-difference
    /// Jacobian of the ambient extension projected onto the tangent space.
    pub fn divergence_at(&self, i: usize, p: &ManifoldPoint) -> f64 {
        const H: f64 = 1e-5;
        let x = p.ambient();
        let mut jac = Matrix4::zeros();
        for c in 0..4 {
            let mut e = Vector4::zeros();
            e[c] = H;
            let d = (self.ambient_field(i, &(x + e)) - self.ambient_field(i, &(x - e))) / (2.0 * H);
            jac.set_column(c, &d);
        }
        let normal = match *p {
            ManifoldPoint::Torus3(_) => return jac.fixed_view::<3, 3>(0, 0).trace(),
            ManifoldPoint::Sphere3(y) => Vector4::from(y),
            ManifoldPoint::ProductS1S2 { y, .. } => Vector4::new(0.0, y[0], y[1], y[2]),
        };
        jac.trace() - normal.dot(&(jac * normal))
    }

    /// Root-mean-square over a quadrature grid of `max_i |div v_i|`.
    pub fn divergence_residual(&self) -> f64 {
        let rule = self.test_grid();
        let ms = rule.integrate(|p| (0..3).map(|i| self.divergence_at(i, p).powi(2)).fold(0.0, f64::max));
        (ms / rule.volume()).sqrt()
    }

    /// Frame metric `<a, b> = sum_i alpha_i(a) alpha_i(b)`.
    pub fn metric_eval(&self, p: &ManifoldPoint, a: &Ambient, b: &Ambient) -> Result<f64> {
        let alpha = self.dual_coframe(p)?;
        Ok(alpha.iter().map(|al| al.dot(a) * al.dot(b)).sum())
    }

    /// `lambda_spinc = (1/4) sum_i alpha_i(w_i)`, the scalar shift between the
    /// spin Dirac operator of the frame and the Fueter operator.
    pub fn spinc_lambda(&self, p: &ManifoldPoint) -> Result<f64> {
        let alpha = self.dual_coframe(p)?;
        let w = self.bracket_fields(p)?;
        Ok(0.25 * (0..3).map(|i| alpha[i].dot(&w[i])).sum::<f64>())
    }

    /// Closed form of [`Self::spinc_lambda`] for the catalog; constant on `M`.
    pub fn spinc_lambda_constant(&self) -> f64 {
        match self.manifold {
            Manifold::Torus3 => 0.0,
            Manifold::Sphere3 => 0.5 * self.u.determinant() * self.u_inv().norm_squared(),
            Manifold::ProductS1S2 => 1.0,
        }
    }

    /// Smallest singular value of `U`.
    pub fn sigma_min(&self) -> f64 {
        self.u.singular_values().min()
    }
}

pub fn unit3(i: usize) -> Vector3<f64> {
    let mut e = Vector3::zeros();
    e[i] = 1.0;
    e
}

pub fn cofactor(u: &Matrix3<f64>) -> Matrix3<f64> {
    let c: [Vector3<f64>; 3] = std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        u.column(j).cross(&u.column(k))
    });
    Matrix3::from_columns(&c)
}
