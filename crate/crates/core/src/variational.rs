//! Quadrature checks of the energy identity, the two forms of the action,
//! the loop isoperimetric inequality on `S^1 x S^2` and the elliptic
//! estimate constant.
//!
//! Integrals of 3-forms are evaluated on an oriented tangent basis
//! `(e_1, e_2, e_3)` and divided by `dvol(e_1, e_2, e_3)`, so they never pass
//! through the frame itself.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::error::{FueterError, Result};
use crate::field::FieldExpansion;
use crate::frame::{Ambient, FrameSpec, Manifold, ManifoldPoint};
use crate::quadrature::QuadratureRule;
use crate::quat::{omega_direction, omega_from_components, Axis, Quaternion};
use crate::spectral::{rayleigh_constant, Cutoff};

/// Polynomial degrees a rule must integrate for quadratic expressions in
/// `g` and its frame derivatives.
fn needed_degrees(g: &FieldExpansion) -> (usize, usize) {
    let (a, b) = g.degree();
    match g.manifold() {
        Manifold::ProductS1S2 => (2 * a, 2 * b + 2),
        _ => (2 * a, 0),
    }
}

fn check_rule(g: &FieldExpansion, rule: &QuadratureRule) -> Result<()> {
    if rule.manifold != g.manifold() {
        return Err(FueterError::PointMismatch { expected: g.manifold() });
    }
    let (a, b) = needed_degrees(g);
    rule.require(a, b)
}

/// `Σ_i (c_i ∧ g*ω_i)(e_1, e_2, e_3) / dvol(e_1, e_2, e_3)` for covectors `c_i`,
/// with `dg(e) = Σ_j α_j(e) ∂_{v_j} g`.
fn wedge_density(p: &ManifoldPoint, c: &[Ambient; 3], alpha: &[Ambient; 3], d: &[Quaternion; 3]) -> f64 {
    let e = p.oriented_tangent_basis();
    let dg: [Quaternion; 3] = e.map(|v| (0..3).map(|j| d[j] * alpha[j].dot(&v)).sum());
    let vol = p.dvol(&e[0], &e[1], &e[2]);
    let mut total = 0.0;
    for a in Axis::ALL {
        let i = a.index();
        let w = |x: usize, y: usize| omega_from_components(a, dg[x], dg[y]);
        total += c[i].dot(&e[0]) * w(1, 2) - c[i].dot(&e[1]) * w(0, 2) + c[i].dot(&e[2]) * w(0, 1);
    }
    total / vol
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyTerms {
    /// `½ ∫ Σ_i |∂_{v_i} g|^2`.
    pub dirichlet: f64,
    /// `½ ∫ |∂_v g|^2`.
    pub fueter: f64,
    /// `Σ_i ∫ α_i ∧ g*ω_i`.
    pub pullback: f64,
    pub residual: f64,
}

pub fn energy_terms_with_rule(frame: &FrameSpec, g: &FieldExpansion, rule: &QuadratureRule) -> Result<EnergyTerms> {
    check_rule(g, rule)?;
    let d = g.frame_derivatives(frame)?;
    let (mut dir, mut fue, mut pull) = (0.0, 0.0, 0.0);
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        let dv = d.at(p)?;
        let alpha = frame.dual_coframe(p)?;
        dir += w * dv.iter().map(|q| q.norm_sqr()).sum::<f64>();
        fue += w * (Quaternion::I * dv[0] + Quaternion::J * dv[1] + Quaternion::K * dv[2]).norm_sqr();
        pull += w * wedge_density(p, &alpha, &alpha, &dv);
    }
    let (dirichlet, fueter) = (0.5 * dir, 0.5 * fue);
    Ok(EnergyTerms { dirichlet, fueter, pullback: pull, residual: (dirichlet - (fueter - pull)).abs() })
}

/// Both sides of `½∫|dg|^2 = ½∫|∂_v g|^2 - Σ∫α_i ∧ g*ω_i`, which holds
/// exactly for normal frames.
pub fn energy_terms(frame: &FrameSpec, g: &FieldExpansion) -> Result<EnergyTerms> {
    energy_terms_with_rule(frame, g, &g.product_rule())
}

pub fn energy_identity_residual(frame: &FrameSpec, g: &FieldExpansion) -> Result<f64> {
    Ok(energy_terms(frame, g)?.residual)
}

/// Primitives `β_i` with `dβ_i = ι(v_i) dvol`, where they exist.
///
/// On `S^3` the standard coframe `θ_a(x) = <e_a y, x>` has `dθ_a = 2 ι(e_a y) dvol`,
/// so `β_i = ½ Σ_a U_{a i} θ_a`. On `S^1 x S^2`, `β_i = y_i dθ + ½ (e_i x y)·dy`.
/// On `T^3` the forms `ι(v_i) dvol` are not exact.
pub fn action_primitives(frame: &FrameSpec, p: &ManifoldPoint) -> Result<Option<[Ambient; 3]>> {
    if p.manifold() != frame.manifold() {
        return Err(FueterError::PointMismatch { expected: frame.manifold() });
    }
    Ok(match *p {
        ManifoldPoint::Torus3(_) => None,
        ManifoldPoint::Sphere3(y) => {
            let q = Quaternion::from_array(y);
            let theta = Axis::ALL.map(|a| Ambient::from((a.unit() * q).to_array()));
            let u = frame.matrix();
            Some(std::array::from_fn(|i| (0..3).map(|a| theta[a] * (0.5 * u[(a, i)])).sum()))
        }
        ManifoldPoint::ProductS1S2 { y, .. } => Some(std::array::from_fn(|i| {
            let r = crate::frame::unit3(i).cross(&nalgebra::Vector3::from(y)) * 0.5;
            Ambient::new(y[i], r.x, r.y, r.z)
        })),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ActionValue {
    /// `½ ∫ <g, ∂_v g>`.
    pub pairing: f64,
    /// `-Σ ∫ β_i ∧ g*ω_i`, where the primitives exist.
    pub primitive: Option<f64>,
}

pub fn action_value(frame: &FrameSpec, g: &FieldExpansion) -> Result<ActionValue> {
    let rule = g.product_rule();
    check_rule(g, &rule)?;
    let d = g.frame_derivatives(frame)?;
    let (mut pairing, mut prim, mut has_prim) = (0.0, 0.0, true);
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        let dv = d.at(p)?;
        let fv = Quaternion::I * dv[0] + Quaternion::J * dv[1] + Quaternion::K * dv[2];
        pairing += w * g.value(p)?.dot(fv);
        match action_primitives(frame, p)? {
            Some(beta) => prim -= w * wedge_density(p, &beta, &frame.dual_coframe(p)?, &dv),
            None => has_prim = false,
        }
    }
    Ok(ActionValue { pairing: 0.5 * pairing, primitive: has_prim.then_some(prim) })
}

/// Loop `θ ↦ c_0 + Σ_m (a_m cos mθ + b_m sin mθ)` in `H`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierLoop {
    pub constant: Quaternion,
    /// `(a_m, b_m)` for `m = 1, 2, ..`.
    pub modes: Vec<(Quaternion, Quaternion)>,
}

impl FourierLoop {
    pub fn constant(c: Quaternion) -> Self {
        Self { constant: c, modes: Vec::new() }
    }

    /// `θ ↦ exp(-θ Y) = cos θ - Y sin θ` with `Y = y1 i + y2 j + y3 k`; turns
    /// against `ω_y` at unit speed.
    pub fn extremal(y: [f64; 3]) -> Self {
        Self { constant: Quaternion::ZERO, modes: vec![(Quaternion::ONE, -Quaternion::imaginary(y))] }
    }

    pub fn random<R: Rng>(degree: usize, rng: &mut R) -> Self {
        let mut rq = || {
            Quaternion::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        };
        let constant = rq();
        let modes = (1..=degree).map(|_| (rq(), rq())).collect();
        Self { constant, modes }
    }

    pub fn value(&self, theta: f64) -> Quaternion {
        self.modes.iter().enumerate().fold(self.constant, |acc, (m, (a, b))| {
            let t = (m + 1) as f64 * theta;
            acc + *a * t.cos() + *b * t.sin()
        })
    }

    pub fn derivative(&self, theta: f64) -> Quaternion {
        self.modes.iter().enumerate().fold(Quaternion::ZERO, |acc, (m, (a, b))| {
            let mf = (m + 1) as f64;
            let t = mf * theta;
            acc + *b * (mf * t.cos()) - *a * (mf * t.sin())
        })
    }
}

/// `(½ ∫ ω_y(∂_θ f, f) dθ, ½ ∫ |∂_θ f|^2 dθ)`, integrated exactly.
pub fn isoperimetric_check(y: [f64; 3], f: &FourierLoop) -> Result<(f64, f64)> {
    let norm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(FueterError::PointMismatch { expected: Manifold::ProductS1S2 });
    }
    let n = 2 * f.modes.len() + 2;
    let h = 2.0 * PI / n as f64;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for t in 0..n {
        let theta = t as f64 * h;
        let (v, dv) = (f.value(theta), f.derivative(theta));
        lhs += h * omega_direction(y, dv, v);
        rhs += h * dv.norm_sqr();
    }
    Ok((0.5 * lhs, 0.5 * rhs))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProductIdentity {
    /// `½ ∫ |dg|^2`.
    pub dirichlet: f64,
    /// `½ ∫ |∂_v g|^2`.
    pub fueter: f64,
    /// `½ ∫ <g, ∂_v g>`.
    pub pairing: f64,
    /// `½ ∫_{S^2} ∫ ω_y(∂_θ g, g) dθ dvol`.
    pub loop_action: f64,
    /// `½ ∫ |∂_θ g|^2`.
    pub theta_energy: f64,
    pub residual: f64,
}

/// Terms of `½∫|dg|^2 = ½∫|∂_v g|^2 + ½∫<g, ∂_v g> + Â(g)` on `S^1 x S^2`,
/// with `Â` as the averaged loop action.
pub fn s1s2_identity(g: &FieldExpansion) -> Result<ProductIdentity> {
    let FieldExpansion::ProductS1S2(pf) = g else {
        return Err(FueterError::PointMismatch { expected: Manifold::ProductS1S2 });
    };
    let frame = FrameSpec::product_s1s2();
    let rule = g.product_rule();
    check_rule(g, &rule)?;
    let d = g.frame_derivatives(&frame)?;
    let dtheta = FieldExpansion::ProductS1S2(pf.dtheta());
    let mut acc = [0.0; 5];
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        let ManifoldPoint::ProductS1S2 { y, .. } = *p else { unreachable!() };
        let dv = d.at(p)?;
        let fv = Quaternion::I * dv[0] + Quaternion::J * dv[1] + Quaternion::K * dv[2];
        let (gv, gt) = (g.value(p)?, dtheta.value(p)?);
        acc[0] += w * dv.iter().map(|q| q.norm_sqr()).sum::<f64>();
        acc[1] += w * fv.norm_sqr();
        acc[2] += w * gv.dot(fv);
        acc[3] += w * omega_direction(y, gt, gv);
        acc[4] += w * gt.norm_sqr();
    }
    let [dirichlet, fueter, pairing, loop_action, theta_energy] = acc.map(|x| 0.5 * x);
    let residual = (dirichlet - (fueter + pairing + loop_action)).abs();
    Ok(ProductIdentity { dirichlet, fueter, pairing, loop_action, theta_energy, residual })
}

pub fn s1s2_identity_residual(g: &FieldExpansion) -> Result<f64> {
    Ok(s1s2_identity(g)?.residual)
}

/// `g` minus its mean value.
pub fn mean_zero(g: &FieldExpansion) -> Result<FieldExpansion> {
    let rule = g.product_rule();
    let vol = rule.volume();
    let mut mean = [0.0; 4];
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        let v = g.value(p)?.to_array();
        for c in 0..4 {
            mean[c] += w * v[c] / vol;
        }
    }
    let mean = Quaternion::from_array(mean);
    match g {
        FieldExpansion::ProductS1S2(pf) => {
            // constant Fourier slot times Y_00
            let mut out = pf.clone();
            out.coeffs[0] -= mean * ((2.0 * PI).sqrt() * (4.0 * PI).sqrt());
            Ok(FieldExpansion::ProductS1S2(out))
        }
        _ => g.add(&FieldExpansion::constant(g.manifold(), -mean)),
    }
}

/// `∫|dg|^2 / ∫|∂_v g|^2`.
pub fn rayleigh_ratio(frame: &FrameSpec, g: &FieldExpansion) -> Result<f64> {
    let t = energy_terms(frame, g)?;
    Ok(t.dirichlet / t.fueter)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimateReport {
    /// Largest ratio over the sampled mean-zero fields.
    pub empirical: f64,
    /// Largest block Rayleigh quotient under the cutoff.
    pub sharp: f64,
}

/// Constant `c` in `∫|dg|^2 ≤ c ∫|∂_v g|^2`, sampled and sharp. Fails with a
/// kernel witness when the frame is singular.
pub fn regular_estimate_constant<R: Rng>(
    frame: &FrameSpec,
    sample_size: usize,
    degree: usize,
    cutoff: &Cutoff,
    rng: &mut R,
) -> Result<EstimateReport> {
    let sharp = rayleigh_constant(frame, cutoff)?;
    let mut empirical = 0.0f64;
    for _ in 0..sample_size {
        let g = mean_zero(&FieldExpansion::random(frame.manifold(), degree, rng))?;
        empirical = empirical.max(rayleigh_ratio(frame, &g)?);
    }
    Ok(EstimateReport { empirical, sharp })
}
