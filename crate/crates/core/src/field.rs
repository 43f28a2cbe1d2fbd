//! Band-limited maps `M → H` as quaternion coefficients over an orthonormal
//! basis of real functions.
//!
//! * `T^3`: `1`, `√2 cos(2π k·y)`, `√2 sin(2π k·y)` over a half lattice of `k`.
//! * `S^3`: terms `y ↦ Σ x_b b(y s)` where `b` runs over `Re e_m`, `Im e_m` of
//!   the degree-`n` holomorphic basis and `s` is a unit quaternion. Right
//!   translation by `s` commutes with the frame derivatives.
//! * `S^1 x S^2`: Fourier modes in `theta` times real spherical harmonics.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{FueterError, Result};
use crate::frame::{FrameSpec, Manifold, ManifoldPoint};
use crate::quadrature::QuadratureRule;
use crate::quat::{Axis, Quaternion};
use crate::sphere_harmonics::{multiplication_matrices, real_sh, rotation_generators, sh_count};
use crate::su2::{basis_values, hopf_coords, rho_real};

/// Largest spherical-harmonic degree the product engine will assemble.
pub const MAX_SH_DEGREE: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Trig {
    Const,
    Cos,
    Sin,
}

/// `k` is nonzero with its first nonzero entry positive, or zero for the
/// constant mode.
pub fn is_half_lattice(k: [i64; 3]) -> bool {
    match k.iter().find(|&&c| c != 0) {
        Some(&c) => c > 0,
        None => true,
    }
}

/// Nonzero half-lattice modes with `|k|_inf ≤ kmax`, in lexicographic order.
pub fn half_lattice(kmax: usize) -> Vec<[i64; 3]> {
    let r = kmax as i64;
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                let k = [a, b, c];
                if k != [0, 0, 0] && is_half_lattice(k) {
                    out.push(k);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusTerm {
    pub k: [i64; 3],
    pub trig: Trig,
    pub coeff: Quaternion,
}

/// One `S^3` term of degree `n`. `coeffs` has `2(n+1)` entries ordered
/// `[Re e_0.. Re e_n, Im e_0.. Im e_n]`, or one entry for `n = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereTerm {
    pub n: usize,
    pub shift: Quaternion,
    pub coeffs: Vec<Quaternion>,
}

/// Fourier slot `0` is the constant, `2m - 1` is `cos(m theta)`, `2m` is
/// `sin(m theta)`. Coefficient index is `slot * (lmax+1)^2 + sh_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductField {
    pub lmax: usize,
    pub mmax: usize,
    pub coeffs: Vec<Quaternion>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldExpansion {
    Torus3(Vec<TorusTerm>),
    Sphere3(Vec<SphereTerm>),
    ProductS1S2(ProductField),
}

pub fn fourier_slot_count(mmax: usize) -> usize {
    2 * mmax + 1
}

/// `(m, trig)` of a Fourier slot.
pub fn fourier_slot(slot: usize) -> (usize, Trig) {
    if slot == 0 {
        (0, Trig::Const)
    } else if slot % 2 == 1 {
        (slot.div_ceil(2), Trig::Cos)
    } else {
        (slot / 2, Trig::Sin)
    }
}

fn fourier_values(mmax: usize, theta: f64) -> Vec<f64> {
    let mut v = vec![0.0; fourier_slot_count(mmax)];
    v[0] = 1.0 / (2.0 * PI).sqrt();
    let s = 1.0 / PI.sqrt();
    for m in 1..=mmax {
        v[2 * m - 1] = s * (m as f64 * theta).cos();
        v[2 * m] = s * (m as f64 * theta).sin();
    }
    v
}

fn torus_basis(k: [i64; 3], trig: Trig, y: [f64; 3]) -> f64 {
    let phase = 2.0 * PI * (k[0] as f64 * y[0] + k[1] as f64 * y[1] + k[2] as f64 * y[2]);
    match trig {
        Trig::Const => 1.0,
        Trig::Cos => SQRT_2 * phase.cos(),
        Trig::Sin => SQRT_2 * phase.sin(),
    }
}

/// Real basis values `[Re e_m.., Im e_m..]` at `y s`, or the normalised
/// constant for `n = 0`.
fn sphere_basis(n: usize, shift: Quaternion, y: [f64; 4]) -> Vec<f64> {
    if n == 0 {
        return vec![1.0 / (SQRT_2 * PI)];
    }
    let ys = Quaternion::from_array(y) * shift;
    let (z1, z2) = hopf_coords(ys.to_array());
    let v = basis_values(n, z1, z2);
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

fn combine(coeffs: &[Quaternion], basis: &[f64]) -> Quaternion {
    coeffs.iter().zip(basis).fold(Quaternion::ZERO, |acc, (c, b)| acc + *c * *b)
}

/// `out_l = Σ_k m[l,k] x_k`, applied to quaternion coefficient vectors.
fn mat_apply(m: &DMatrix<f64>, x: &[Quaternion]) -> Vec<Quaternion> {
    (0..m.nrows())
        .map(|l| (0..m.ncols()).fold(Quaternion::ZERO, |acc, k| acc + x[k] * m[(l, k)]))
        .collect()
}

impl FieldExpansion {
    pub fn manifold(&self) -> Manifold {
        match self {
            FieldExpansion::Torus3(_) => Manifold::Torus3,
            FieldExpansion::Sphere3(_) => Manifold::Sphere3,
            FieldExpansion::ProductS1S2(_) => Manifold::ProductS1S2,
        }
    }

    pub fn constant(manifold: Manifold, q: Quaternion) -> Self {
        match manifold {
            Manifold::Torus3 => FieldExpansion::Torus3(vec![TorusTerm { k: [0; 3], trig: Trig::Const, coeff: q }]),
            Manifold::Sphere3 => {
                FieldExpansion::Sphere3(vec![SphereTerm { n: 0, shift: Quaternion::ONE, coeffs: vec![q * (SQRT_2 * PI)] }])
            }
            Manifold::ProductS1S2 => {
                let mut coeffs = vec![Quaternion::ZERO; sh_count(2) * fourier_slot_count(1)];
                // constant Fourier slot times Y_00 = 1/sqrt(4 pi)
                coeffs[0] = q * ((2.0 * PI).sqrt() * (4.0 * PI).sqrt());
                FieldExpansion::ProductS1S2(ProductField { lmax: 2, mmax: 1, coeffs })
            }
        }
    }

    /// The inclusion `S^3 → H`, `g(y) = y`.
    pub fn sphere_inclusion() -> Self {
        let c = PI / SQRT_2;
        let coeffs = vec![Quaternion::ONE * c, Quaternion::J * c, Quaternion::I * c, Quaternion::K * (-c)];
        FieldExpansion::Sphere3(vec![SphereTerm { n: 1, shift: Quaternion::ONE, coeffs }])
    }

    /// Random field with mode amplitudes decaying like `(1 + |mode|)^-2`.
    pub fn random<R: Rng>(manifold: Manifold, degree: usize, rng: &mut R) -> Self {
        let rq = |rng: &mut R, scale: f64| {
            Quaternion::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ) * scale
        };
        match manifold {
            Manifold::Torus3 => {
                let mut terms = vec![TorusTerm { k: [0; 3], trig: Trig::Const, coeff: rq(rng, 1.0) }];
                for k in half_lattice(degree) {
                    let size = k.iter().map(|c| c.abs()).max().unwrap_or(0) as f64;
                    let s = 1.0 / (1.0 + size).powi(2);
                    terms.push(TorusTerm { k, trig: Trig::Cos, coeff: rq(rng, s) });
                    terms.push(TorusTerm { k, trig: Trig::Sin, coeff: rq(rng, s) });
                }
                FieldExpansion::Torus3(terms)
            }
            Manifold::Sphere3 => {
                let mut terms = vec![SphereTerm { n: 0, shift: Quaternion::ONE, coeffs: vec![rq(rng, 1.0)] }];
                for n in 1..=degree {
                    let s = 1.0 / (1.0 + n as f64).powi(2);
                    for _ in 0..2 {
                        let shift = loop {
                            let q = rq(rng, 1.0);
                            if q.norm() > 0.1 {
                                break q * (1.0 / q.norm());
                            }
                        };
                        let coeffs = (0..2 * (n + 1)).map(|_| rq(rng, s)).collect();
                        terms.push(SphereTerm { n, shift, coeffs });
                    }
                }
                FieldExpansion::Sphere3(terms)
            }
            Manifold::ProductS1S2 => {
                let (lmax, mmax) = (degree, degree);
                let n = sh_count(lmax);
                let labels = crate::sphere_harmonics::sh_labels(lmax);
                let coeffs = (0..n * fourier_slot_count(mmax))
                    .map(|idx| {
                        let (m, _) = fourier_slot(idx / n);
                        let (l, _) = labels[idx % n];
                        rq(rng, 1.0 / (1.0 + (m + l) as f64).powi(2))
                    })
                    .collect();
                FieldExpansion::ProductS1S2(ProductField { lmax, mmax, coeffs })
            }
        }
    }

    /// Largest Fourier / polynomial degree present: `(theta or torus degree,
    /// sphere degree)`.
    pub fn degree(&self) -> (usize, usize) {
        match self {
            FieldExpansion::Torus3(t) => {
                (t.iter().map(|t| t.k.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0)).max().unwrap_or(0), 0)
            }
            FieldExpansion::Sphere3(t) => (t.iter().map(|t| t.n).max().unwrap_or(0), 0),
            FieldExpansion::ProductS1S2(p) => (p.mmax, p.lmax),
        }
    }

    /// Quadrature able to integrate products of two such fields (and one
    /// extra coordinate factor on the product) exactly.
    pub fn product_rule(&self) -> QuadratureRule {
        let (a, b) = self.degree();
        match self.manifold() {
            Manifold::Torus3 => QuadratureRule::torus(2 * a + 1),
            Manifold::Sphere3 => QuadratureRule::sphere3(2 * a),
            Manifold::ProductS1S2 => QuadratureRule::product(2 * a, 2 * b + 2),
        }
    }

    pub fn value(&self, p: &ManifoldPoint) -> Result<Quaternion> {
        match (self, p) {
            (FieldExpansion::Torus3(terms), ManifoldPoint::Torus3(y)) => {
                Ok(terms.iter().map(|t| t.coeff * torus_basis(t.k, t.trig, *y)).sum())
            }
            (FieldExpansion::Sphere3(terms), ManifoldPoint::Sphere3(y)) => {
                Ok(terms.iter().map(|t| combine(&t.coeffs, &sphere_basis(t.n, t.shift, *y))).sum())
            }
            (FieldExpansion::ProductS1S2(f), ManifoldPoint::ProductS1S2 { theta, y }) => {
                let fv = fourier_values(f.mmax, *theta);
                let sv = real_sh(f.lmax, *y);
                let n = sv.len();
                Ok(fv
                    .iter()
                    .enumerate()
                    .map(|(s, a)| combine(&f.coeffs[s * n..(s + 1) * n], &sv) * *a)
                    .sum())
            }
            _ => Err(FueterError::PointMismatch { expected: self.manifold() }),
        }
    }

    fn map_coeffs(&self, mut op: impl FnMut(Quaternion) -> Quaternion) -> Self {
        match self {
            FieldExpansion::Torus3(t) => {
                FieldExpansion::Torus3(t.iter().map(|t| TorusTerm { coeff: op(t.coeff), ..*t }).collect())
            }
            FieldExpansion::Sphere3(t) => FieldExpansion::Sphere3(
                t.iter()
                    .map(|t| SphereTerm { coeffs: t.coeffs.iter().map(|c| op(*c)).collect(), ..t.clone() })
                    .collect(),
            ),
            FieldExpansion::ProductS1S2(f) => FieldExpansion::ProductS1S2(ProductField {
                coeffs: f.coeffs.iter().map(|c| op(*c)).collect(),
                ..f.clone()
            }),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_coeffs(|c| c * s)
    }

    /// Pointwise left multiplication by `J_a`.
    pub fn apply_j(&self, axis: Axis) -> Self {
        self.map_coeffs(|c| axis.unit() * c)
    }

    /// Concatenation of terms (torus, sphere) or coefficient sum (product, same truncation).
    pub fn add(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (FieldExpansion::Torus3(a), FieldExpansion::Torus3(b)) => {
                Ok(FieldExpansion::Torus3(a.iter().chain(b).copied().collect()))
            }
            (FieldExpansion::Sphere3(a), FieldExpansion::Sphere3(b)) => {
                Ok(FieldExpansion::Sphere3(a.iter().chain(b).cloned().collect()))
            }
            (FieldExpansion::ProductS1S2(a), FieldExpansion::ProductS1S2(b)) if a.lmax == b.lmax && a.mmax == b.mmax => {
                Ok(FieldExpansion::ProductS1S2(ProductField {
                    coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| *x + *y).collect(),
                    ..a.clone()
                }))
            }
            _ => Err(FueterError::InvalidInput("fields live on different bases".into())),
        }
    }

    /// Frame derivatives `∂_{v_i} g`, prepared for pointwise evaluation.
    pub fn frame_derivatives(&self, frame: &FrameSpec) -> Result<FrameDerivatives> {
        if frame.manifold() != self.manifold() {
            return Err(FueterError::PointMismatch { expected: frame.manifold() });
        }
        let u = frame.matrix();
        let parts = match self {
            FieldExpansion::Torus3(terms) => DerivativeParts::Direct(std::array::from_fn(|i| {
                let mut out = Vec::with_capacity(terms.len());
                for t in terms {
                    let kappa: f64 = (0..3).map(|a| u[(a, i)] * t.k[a] as f64).sum::<f64>() * 2.0 * PI;
                    match t.trig {
                        Trig::Const => {}
                        Trig::Cos => out.push(TorusTerm { k: t.k, trig: Trig::Sin, coeff: t.coeff * (-kappa) }),
                        Trig::Sin => out.push(TorusTerm { k: t.k, trig: Trig::Cos, coeff: t.coeff * kappa }),
                    }
                }
                FieldExpansion::Torus3(out)
            })),
            FieldExpansion::Sphere3(terms) => DerivativeParts::Direct(std::array::from_fn(|i| {
                let col = [u[(0, i)], u[(1, i)], u[(2, i)]];
                FieldExpansion::Sphere3(
                    terms
                        .iter()
                        .filter(|t| t.n > 0)
                        .map(|t| SphereTerm {
                            n: t.n,
                            shift: t.shift,
                            coeffs: mat_apply(&rho_real(t.n, col), &t.coeffs),
                        })
                        .collect(),
                )
            })),
            FieldExpansion::ProductS1S2(f) => {
                let tables = ProductTables::get(f.lmax);
                DerivativeParts::Product {
                    dtheta: FieldExpansion::ProductS1S2(f.dtheta()),
                    rot: std::array::from_fn(|i| FieldExpansion::ProductS1S2(f.rotate(&tables.rot[i]))),
                }
            }
        };
        Ok(FrameDerivatives { parts })
    }

    /// Fueter operator `Σ J_i ∂_{v_i} g`. Exact on `T^3` and `S^3`; on
    /// `S^1 x S^2` the result is expanded up to degree `lmax + 1`, which holds
    /// it exactly.
    pub fn apply_fueter(&self, frame: &FrameSpec) -> Result<Self> {
        match self {
            FieldExpansion::ProductS1S2(f) => {
                if f.lmax + 1 > MAX_SH_DEGREE {
                    return Err(FueterError::TruncationOverflow { degree: f.lmax + 1, limit: MAX_SH_DEGREE });
                }
                let tables = ProductTables::get(f.lmax);
                let big = f.lifted(f.lmax + 1);
                let big_tables = ProductTables::get(f.lmax + 1);
                let dtheta = big.dtheta();
                let mut out = vec![Quaternion::ZERO; big.coeffs.len()];
                let n = sh_count(big.lmax);
                for i in 0..3 {
                    let ax = Axis::from_index(i);
                    let rot = f.rotate(&tables.rot[i]).lifted(big.lmax);
                    for s in 0..fourier_slot_count(f.mmax) {
                        let yd = mat_apply(&big_tables.mult[i], &dtheta.coeffs[s * n..(s + 1) * n]);
                        for a in 0..n {
                            out[s * n + a] += ax.unit() * (yd[a] + rot.coeffs[s * n + a]);
                        }
                    }
                }
                Ok(FieldExpansion::ProductS1S2(ProductField { coeffs: out, ..big }))
            }
            _ => {
                let d = self.frame_derivatives(frame)?;
                let DerivativeParts::Direct(parts) = d.parts else { unreachable!() };
                let mut acc = parts[0].apply_j(Axis::I);
                acc = acc.add(&parts[1].apply_j(Axis::J))?;
                acc.add(&parts[2].apply_j(Axis::K))
            }
        }
    }

    /// Projection of a sampled map onto the basis of `template`, using a
    /// quadrature exact for products of basis functions. For `S^3` every
    /// term of `template` must carry the identity shift.
    pub fn project<F: Fn(&ManifoldPoint) -> Quaternion>(template: &Self, f: F) -> Result<Self> {
        let rule = template.product_rule();
        match template {
            FieldExpansion::Torus3(terms) => Ok(FieldExpansion::Torus3(
                terms
                    .iter()
                    .map(|t| {
                        let coeff = rule
                            .nodes
                            .iter()
                            .zip(&rule.weights)
                            .map(|(p, w)| {
                                let ManifoldPoint::Torus3(y) = p else { unreachable!() };
                                f(p) * (w * torus_basis(t.k, t.trig, *y))
                            })
                            .sum();
                        TorusTerm { coeff, ..*t }
                    })
                    .collect(),
            )),
            FieldExpansion::Sphere3(terms) => {
                if terms.iter().any(|t| t.shift != Quaternion::ONE) {
                    return Err(FueterError::InvalidInput("projection needs identity shifts".into()));
                }
                let samples: Vec<(Quaternion, [f64; 4], f64)> = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| {
                        let ManifoldPoint::Sphere3(y) = p else { unreachable!() };
                        (f(p), *y, *w)
                    })
                    .collect();
                Ok(FieldExpansion::Sphere3(
                    terms
                        .iter()
                        .map(|t| {
                            let mut coeffs = vec![Quaternion::ZERO; t.coeffs.len()];
                            for (v, y, w) in &samples {
                                let b = sphere_basis(t.n, t.shift, *y);
                                for (c, bv) in coeffs.iter_mut().zip(&b) {
                                    *c += *v * (w * bv);
                                }
                            }
                            SphereTerm { coeffs, ..t.clone() }
                        })
                        .collect(),
                ))
            }
            FieldExpansion::ProductS1S2(pf) => {
                let n = sh_count(pf.lmax);
                let mut coeffs = vec![Quaternion::ZERO; pf.coeffs.len()];
                for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                    let ManifoldPoint::ProductS1S2 { theta, y } = p else { unreachable!() };
                    let v = f(p);
                    let fv = fourier_values(pf.mmax, *theta);
                    let sv = real_sh(pf.lmax, *y);
                    for (s, a) in fv.iter().enumerate() {
                        for (b, bv) in sv.iter().enumerate() {
                            coeffs[s * n + b] += v * (w * a * bv);
                        }
                    }
                }
                Ok(FieldExpansion::ProductS1S2(ProductField { coeffs, ..pf.clone() }))
            }
        }
    }

    /// Coefficients flattened as reals (four per quaternion, in basis order).
    pub fn flat_coeffs(&self) -> Vec<f64> {
        let qs: Vec<Quaternion> = match self {
            FieldExpansion::Torus3(t) => t.iter().map(|t| t.coeff).collect(),
            FieldExpansion::Sphere3(t) => t.iter().flat_map(|t| t.coeffs.iter().copied()).collect(),
            FieldExpansion::ProductS1S2(f) => f.coeffs.clone(),
        };
        qs.iter().flat_map(|q| q.to_array()).collect()
    }
}

impl ProductField {
    /// `∂_θ` of the field.
    pub fn dtheta(&self) -> ProductField {
        let n = sh_count(self.lmax);
        let mut out = vec![Quaternion::ZERO; self.coeffs.len()];
        for m in 1..=self.mmax {
            let (c, s) = (2 * m - 1, 2 * m);
            for a in 0..n {
                // d/dtheta cos = -m sin, d/dtheta sin = m cos
                out[s * n + a] = self.coeffs[c * n + a] * -(m as f64);
                out[c * n + a] = self.coeffs[s * n + a] * m as f64;
            }
        }
        ProductField { coeffs: out, ..self.clone() }
    }

    fn rotate(&self, r: &DMatrix<f64>) -> ProductField {
        let n = sh_count(self.lmax);
        let mut out = Vec::with_capacity(self.coeffs.len());
        for s in 0..fourier_slot_count(self.mmax) {
            out.extend(mat_apply(r, &self.coeffs[s * n..(s + 1) * n]));
        }
        ProductField { coeffs: out, ..self.clone() }
    }

    /// Same field with the spherical truncation raised to `lmax`.
    pub fn lifted(&self, lmax: usize) -> ProductField {
        let (n0, n1) = (sh_count(self.lmax), sh_count(lmax));
        let mut out = vec![Quaternion::ZERO; n1 * fourier_slot_count(self.mmax)];
        for s in 0..fourier_slot_count(self.mmax) {
            out[s * n1..s * n1 + n0].copy_from_slice(&self.coeffs[s * n0..(s + 1) * n0]);
        }
        ProductField { lmax, mmax: self.mmax, coeffs: out }
    }
}

/// Cached spherical matrices for one truncation degree.
#[derive(Debug)]
pub struct ProductTables {
    pub lmax: usize,
    pub rot: [DMatrix<f64>; 3],
    pub mult: [DMatrix<f64>; 3],
}

impl ProductTables {
    pub fn get(lmax: usize) -> Arc<ProductTables> {
        use std::collections::HashMap;
        use std::sync::{Mutex, OnceLock};
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ProductTables>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().expect("cache lock").get(&lmax) {
            return t.clone();
        }
        let t = Arc::new(ProductTables { lmax, rot: rotation_generators(lmax), mult: multiplication_matrices(lmax) });
        cache.lock().expect("cache lock").insert(lmax, t.clone());
        t
    }
}

#[derive(Debug, Clone)]
enum DerivativeParts {
    Direct([FieldExpansion; 3]),
    /// `∂_{v_i} = y_i ∂_theta + R_i`.
    Product { dtheta: FieldExpansion, rot: [FieldExpansion; 3] },
}

/// The three frame derivatives of a field, ready for pointwise evaluation.
#[derive(Debug, Clone)]
pub struct FrameDerivatives {
    parts: DerivativeParts,
}

impl FrameDerivatives {
    pub fn at(&self, p: &ManifoldPoint) -> Result<[Quaternion; 3]> {
        match &self.parts {
            DerivativeParts::Direct(d) => Ok([d[0].value(p)?, d[1].value(p)?, d[2].value(p)?]),
            DerivativeParts::Product { dtheta, rot } => {
                let ManifoldPoint::ProductS1S2 { y, .. } = p else {
                    return Err(FueterError::PointMismatch { expected: Manifold::ProductS1S2 });
                };
                let dt = dtheta.value(p)?;
                Ok([0, 1, 2].map(|i| dt * y[i] + rot[i].value(p).expect("same manifold")))
            }
        }
    }

    /// `∂_v g = Σ J_i ∂_{v_i} g` at `p`.
    pub fn fueter_at(&self, p: &ManifoldPoint) -> Result<Quaternion> {
        let d = self.at(p)?;
        Ok(Quaternion::I * d[0] + Quaternion::J * d[1] + Quaternion::K * d[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_derivative(frame: &FrameSpec, g: &FieldExpansion, i: usize, p: &ManifoldPoint) -> Quaternion {
        // flow along v_i and difference the values
        let h = 1e-5;
        let x = p.ambient();
        let at = |t: f64| {
            let z = frame.flow(i, &x, t);
            let q = match p {
                ManifoldPoint::Torus3(_) => ManifoldPoint::Torus3([z[0], z[1], z[2]]),
                ManifoldPoint::Sphere3(_) => {
                    let n = z.norm();
                    ManifoldPoint::Sphere3([z[0] / n, z[1] / n, z[2] / n, z[3] / n])
                }
                ManifoldPoint::ProductS1S2 { .. } => {
                    let n = (z[1] * z[1] + z[2] * z[2] + z[3] * z[3]).sqrt();
                    ManifoldPoint::ProductS1S2 { theta: z[0], y: [z[1] / n, z[2] / n, z[3] / n] }
                }
            };
            g.value(&q).unwrap()
        };
        (at(h) - at(-h)) * (0.5 / h)
    }

    #[test]
    fn half_lattice_counts() {
        assert_eq!(half_lattice(1).len(), 13);
        assert_eq!(half_lattice(2).len(), (125 - 1) / 2);
    }

    #[test]
    fn inclusion_field_is_the_identity_map() {
        let g = FieldExpansion::sphere_inclusion();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = ManifoldPoint::random(Manifold::Sphere3, &mut rng);
            let ManifoldPoint::Sphere3(y) = p else { unreachable!() };
            assert!((g.value(&p).unwrap() - Quaternion::from_array(y)).max_abs() < 1e-14);
        }
    }

    #[test]
    fn constants_evaluate_to_themselves() {
        let q = Quaternion::new(0.3, -1.0, 2.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in [Manifold::Torus3, Manifold::Sphere3, Manifold::ProductS1S2] {
            let g = FieldExpansion::constant(m, q);
            let p = ManifoldPoint::random(m, &mut rng);
            assert!((g.value(&p).unwrap() - q).max_abs() < 1e-13);
        }
    }

    #[test]
    fn frame_derivatives_match_flow_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = nalgebra::Matrix3::new(1.0, 0.3, -0.2, 0.1, 0.8, 0.4, -0.3, 0.2, 1.1);
        let frames = [FrameSpec::torus(u).unwrap(), FrameSpec::sphere3(u).unwrap(), FrameSpec::product_s1s2()];
        for f in frames {
            let g = FieldExpansion::random(f.manifold(), 3, &mut rng);
            let d = g.frame_derivatives(&f).unwrap();
            for _ in 0..5 {
                let p = ManifoldPoint::random(f.manifold(), &mut rng);
                let exact = d.at(&p).unwrap();
                for i in 0..3 {
                    let fd = fd_derivative(&f, &g, i, &p);
                    assert!((fd - exact[i]).max_abs() < 1e-6, "{:?} {i}", f.manifold());
                }
            }
        }
    }

    #[test]
    fn fueter_of_inclusion_is_minus_three() {
        let f = FrameSpec::standard_sphere();
        let g = FieldExpansion::sphere_inclusion();
        let dg = g.apply_fueter(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let p = ManifoldPoint::random(Manifold::Sphere3, &mut rng);
            assert!((dg.value(&p).unwrap() + g.value(&p).unwrap() * 3.0).max_abs() < 1e-13);
        }
        let singular = g.apply_fueter(&FrameSpec::singular_sphere()).unwrap();
        let p = ManifoldPoint::random(Manifold::Sphere3, &mut rng);
        assert!(singular.value(&p).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn torus_single_mode_by_hand() {
        // g = cos(2π y1) → ∂_v g = -2π sin(2π y1) i
        let g = FieldExpansion::Torus3(vec![TorusTerm { k: [1, 0, 0], trig: Trig::Cos, coeff: Quaternion::ONE * (1.0 / SQRT_2) }]);
        let dg = g.apply_fueter(&FrameSpec::standard_torus()).unwrap();
        let p = ManifoldPoint::Torus3([0.1, 0.7, 0.3]);
        let expected = Quaternion::I * (-2.0 * PI * (2.0 * PI * 0.1).sin());
        assert!((dg.value(&p).unwrap() - expected).max_abs() < 1e-13);
    }

    #[test]
    fn product_fueter_matches_pointwise_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = FrameSpec::product_s1s2();
        let g = FieldExpansion::random(Manifold::ProductS1S2, 3, &mut rng);
        let dg = g.apply_fueter(&f).unwrap();
        let d = g.frame_derivatives(&f).unwrap();
        for _ in 0..10 {
            let p = ManifoldPoint::random(Manifold::ProductS1S2, &mut rng);
            assert!((dg.value(&p).unwrap() - d.fueter_at(&p).unwrap()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn projection_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = FieldExpansion::random(Manifold::Torus3, 2, &mut rng);
        let p = FieldExpansion::random(Manifold::ProductS1S2, 3, &mut rng);
        let mut s = FieldExpansion::random(Manifold::Sphere3, 3, &mut rng);
        if let FieldExpansion::Sphere3(terms) = &mut s {
            terms.retain(|t| t.n != 2);
            for t in terms.iter_mut() {
                t.shift = Quaternion::ONE;
            }
            terms.dedup_by_key(|t| t.n);
        }
        for g in [t, p, s] {
            let back = FieldExpansion::project(&g, |q| g.value(q).unwrap()).unwrap();
            let err = g.flat_coeffs().iter().zip(back.flat_coeffs()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(err < 1e-10, "{:?}: {err:e}", g.manifold());
        }
    }
}
