//! Eigenvalue curves, crossing forms and spectral flow along paths of frames.
//!
//! Each block matrix is linear in the frame matrix `U`, so `dD/ds` is the
//! block assembled from `dU/ds`. Crossings are bracketed by a change in the
//! number of negative eigenvalues and localised by bisection.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FueterError, Result};
use crate::frame::{cofactor, FrameSpec, Manifold};
use crate::linalg::{max_abs, sym_eigen, sym_eigenvalues, SymEigen};
use crate::spectral::{s3_matrix, t3_matrix, BlockLabel, DEFAULT_TOL};

/// Bisection stops once the bracket is this narrow.
pub const LOCATE_TOL: f64 = 1e-10;
/// Eigenvalues below this at a localised crossing span the kernel.
pub const KERNEL_TOL: f64 = 1e-6;
/// Step for finite-difference slopes through a crossing.
pub const SLOPE_STEP: f64 = 1e-4;
/// Step for numerical `dU/ds` on paths without an analytic derivative.
pub const DERIVATIVE_STEP: f64 = 1e-5;
const OVERLAP_MIN: f64 = 0.5;

type MatrixFn = Arc<dyn Fn(f64) -> Matrix3<f64> + Send + Sync>;

#[derive(Clone)]
enum PathKind {
    /// `U(s) = u0 + (s - a)/(b - a) (u1 - u0)`.
    Linear { u0: Matrix3<f64>, u1: Matrix3<f64> },
    /// `diag(2^{2s/3}, 2^{-s/3}, 2^{-s/3}) R_1(pi s)`; reaches the singular
    /// sphere frame at `s = 1`.
    SingularApproach,
    /// `U(s) = u0 + 2 s cof(u0)`: the frame fields plus `s` times their brackets.
    Bracket { u0: Matrix3<f64> },
    Custom(MatrixFn),
    Chain(Vec<FramePath>),
}

/// A path `s ↦ U(s)` of constant-coefficient frames on one manifold.
#[derive(Clone)]
pub struct FramePath {
    manifold: Manifold,
    range: (f64, f64),
    kind: PathKind,
    reversed: bool,
}

impl std::fmt::Debug for FramePath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            PathKind::Linear { .. } => "linear",
            PathKind::SingularApproach => "singular-approach",
            PathKind::Bracket { .. } => "bracket",
            PathKind::Custom(_) => "custom",
            PathKind::Chain(_) => "chain",
        };
        f.debug_struct("FramePath")
            .field("manifold", &self.manifold)
            .field("range", &self.range)
            .field("kind", &kind)
            .field("reversed", &self.reversed)
            .finish()
    }
}

fn rot1(phi: f64) -> Matrix3<f64> {
    let (c, s) = (phi.cos(), phi.sin());
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn check_manifold(manifold: Manifold) -> Result<()> {
    if manifold == Manifold::ProductS1S2 {
        return Err(FueterError::InvalidFrame("the S1xS2 frame has no deformation parameters".into()));
    }
    Ok(())
}

impl FramePath {
    fn build(manifold: Manifold, range: (f64, f64), kind: PathKind) -> Result<Self> {
        check_manifold(manifold)?;
        if !(range.0 < range.1) || !range.0.is_finite() || !range.1.is_finite() {
            return Err(FueterError::InvalidInput(format!("bad parameter interval {range:?}")));
        }
        Ok(Self { manifold, range, kind, reversed: false })
    }

    /// Straight line from `u0` at `s = 0` to `u1` at `s = 1`.
    pub fn linear(manifold: Manifold, u0: Matrix3<f64>, u1: Matrix3<f64>) -> Result<Self> {
        Self::build(manifold, (0.0, 1.0), PathKind::Linear { u0, u1 })
    }

    pub fn constant(frame: &FrameSpec, range: (f64, f64)) -> Result<Self> {
        let u = *frame.matrix();
        Self::build(frame.manifold(), range, PathKind::Linear { u0: u, u1: u })
    }

    /// The sphere path through the singular frame at `s = 1`.
    pub fn singular_approach(range: (f64, f64)) -> Result<Self> {
        Self::build(Manifold::Sphere3, range, PathKind::SingularApproach)
    }

    /// Deformation of `u0` by its own bracket fields on `S^3`.
    pub fn bracket_perturbation(u0: Matrix3<f64>, range: (f64, f64)) -> Result<Self> {
        Self::build(Manifold::Sphere3, range, PathKind::Bracket { u0 })
    }

    /// Arbitrary smooth path; `dU/ds` is taken by Richardson-extrapolated
    /// central differences.
    pub fn from_fn<F>(manifold: Manifold, range: (f64, f64), f: F) -> Result<Self>
    where
        F: Fn(f64) -> Matrix3<f64> + Send + Sync + 'static,
    {
        Self::build(manifold, range, PathKind::Custom(Arc::new(f)))
    }

    /// `self` followed by `next`, reparametrised to start where `self` starts.
    pub fn then(&self, next: &FramePath) -> Result<Self> {
        if self.manifold != next.manifold {
            return Err(FueterError::InvalidInput("catenated paths live on different manifolds".into()));
        }
        let gap = (self.matrix_at(self.range.1) - next.matrix_at(next.range.0)).amax();
        if gap > 1e-10 {
            return Err(FueterError::InvalidInput(format!("paths do not join: endpoint mismatch {gap:.3e}")));
        }
        let mut pieces = Vec::new();
        for p in [self, next] {
            match (&p.kind, p.reversed) {
                (PathKind::Chain(inner), false) => pieces.extend(inner.iter().cloned()),
                _ => pieces.push(p.clone()),
            }
        }
        let len: f64 = pieces.iter().map(|p| p.range.1 - p.range.0).sum();
        Self::build(self.manifold, (self.range.0, self.range.0 + len), PathKind::Chain(pieces))
    }

    /// The same path traversed backwards over the same interval.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.reversed = !out.reversed;
        out
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    fn inner_s(&self, s: f64) -> f64 {
        if self.reversed {
            self.range.0 + self.range.1 - s
        } else {
            s
        }
    }

    fn chain_piece<'a>(&self, pieces: &'a [FramePath], s: f64) -> (&'a FramePath, f64) {
        let mut start = self.range.0;
        for (i, p) in pieces.iter().enumerate() {
            let len = p.range.1 - p.range.0;
            if s <= start + len || i + 1 == pieces.len() {
                return (p, p.range.0 + (s - start));
            }
            start += len;
        }
        unreachable!("chains are never empty")
    }

    fn forward_matrix(&self, s: f64) -> Matrix3<f64> {
        let (a, b) = self.range;
        match &self.kind {
            PathKind::Linear { u0, u1 } => u0 + (u1 - u0) * ((s - a) / (b - a)),
            PathKind::SingularApproach => {
                let d = Vector3::new(2f64.powf(2.0 * s / 3.0), 2f64.powf(-s / 3.0), 2f64.powf(-s / 3.0));
                Matrix3::from_diagonal(&d) * rot1(PI * s)
            }
            PathKind::Bracket { u0 } => u0 + cofactor(u0) * (2.0 * s),
            PathKind::Custom(f) => f(s),
            PathKind::Chain(pieces) => {
                let (p, t) = self.chain_piece(pieces, s);
                p.matrix_at(t)
            }
        }
    }

    fn forward_derivative(&self, s: f64) -> Matrix3<f64> {
        let (a, b) = self.range;
        match &self.kind {
            PathKind::Linear { u0, u1 } => (u1 - u0) / (b - a),
            PathKind::SingularApproach => {
                let d = Vector3::new(2f64.powf(2.0 * s / 3.0), 2f64.powf(-s / 3.0), 2f64.powf(-s / 3.0));
                let dd = Vector3::new(2.0 / 3.0 * LN_2 * d[0], -LN_2 / 3.0 * d[1], -LN_2 / 3.0 * d[2]);
                let (c, sn) = ((PI * s).cos(), (PI * s).sin());
                let dr = Matrix3::new(0.0, 0.0, 0.0, 0.0, -sn, -c, 0.0, c, -sn) * PI;
                Matrix3::from_diagonal(&dd) * rot1(PI * s) + Matrix3::from_diagonal(&d) * dr
            }
            PathKind::Bracket { u0 } => cofactor(u0) * 2.0,
            PathKind::Custom(f) => {
                let h = DERIVATIVE_STEP;
                let c = |h: f64| (f(s + h) - f(s - h)) / (2.0 * h);
                (c(h / 2.0) * 4.0 - c(h)) / 3.0
            }
            PathKind::Chain(pieces) => {
                let (p, t) = self.chain_piece(pieces, s);
                p.derivative_at(t)
            }
        }
    }

    pub fn matrix_at(&self, s: f64) -> Matrix3<f64> {
        self.forward_matrix(self.inner_s(s))
    }

    pub fn derivative_at(&self, s: f64) -> Matrix3<f64> {
        let d = self.forward_derivative(self.inner_s(s));
        if self.reversed {
            -d
        } else {
            d
        }
    }

    /// The frame at `s`; fails when `det U(s) ≤ 0`.
    pub fn frame_at(&self, s: f64) -> Result<FrameSpec> {
        FrameSpec::new(self.manifold, self.matrix_at(s))
    }

    /// `n + 1` equally spaced parameters covering the interval.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let (a, b) = self.range;
        let n = n.max(1);
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }
}

/// A differentiable path of real symmetric matrices.
pub trait MatrixFamily: Sync {
    fn range(&self) -> (f64, f64);
    fn matrix(&self, s: f64) -> Result<DMatrix<f64>>;
    fn derivative(&self, s: f64) -> Result<DMatrix<f64>>;
    /// Copies of this block in the full operator.
    fn weight(&self) -> f64 {
        1.0
    }
    fn label(&self) -> Option<BlockLabel> {
        None
    }
}

/// One invariant block of `∂_{v(s)}` along a frame path.
pub struct BlockFamily<'a> {
    pub path: &'a FramePath,
    pub label: BlockLabel,
}

impl<'a> BlockFamily<'a> {
    pub fn new(path: &'a FramePath, label: BlockLabel) -> Result<Self> {
        match (path.manifold, label) {
            (Manifold::Torus3, BlockLabel::Torus(_)) | (Manifold::Sphere3, BlockLabel::Spin(_)) => {
                Ok(Self { path, label })
            }
            (m, l) => Err(FueterError::InvalidInput(format!("block {l} does not belong to {m:?}"))),
        }
    }

    fn assemble(&self, u: &Matrix3<f64>) -> DMatrix<f64> {
        match self.label {
            BlockLabel::Torus(k) => t3_matrix(u, k),
            BlockLabel::Spin(n) => s3_matrix(u, n),
            BlockLabel::Fourier { .. } => unreachable!("rejected in BlockFamily::new"),
        }
    }
}

impl MatrixFamily for BlockFamily<'_> {
    fn range(&self) -> (f64, f64) {
        self.path.range
    }

    fn matrix(&self, s: f64) -> Result<DMatrix<f64>> {
        let frame = self.path.frame_at(s)?;
        Ok(self.assemble(frame.matrix()))
    }

    fn derivative(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok(self.assemble(&self.path.derivative_at(s)))
    }

    fn weight(&self) -> f64 {
        match self.label {
            BlockLabel::Spin(n) if n > 0 => (n + 1) as f64 / 2.0,
            _ => 1.0,
        }
    }

    fn label(&self) -> Option<BlockLabel> {
        Some(self.label)
    }
}

/// A family given by closures, for model problems.
pub struct FnFamily<F, G> {
    pub range: (f64, f64),
    pub matrix: F,
    pub derivative: G,
}

impl<F, G> MatrixFamily for FnFamily<F, G>
where
    F: Fn(f64) -> DMatrix<f64> + Sync,
    G: Fn(f64) -> DMatrix<f64> + Sync,
{
    fn range(&self) -> (f64, f64) {
        self.range
    }
    fn matrix(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok((self.matrix)(s))
    }
    fn derivative(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok((self.derivative)(s))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenCurves {
    pub label: Option<BlockLabel>,
    pub weight: f64,
    pub s: Vec<f64>,
    /// `values[c][i]` is curve `c` at `s[i]`.
    pub values: Vec<Vec<f64>>,
    /// Largest jump of any curve between neighbouring samples.
    pub continuity_residual: f64,
}

impl EigenCurves {
    /// Weighted signed number of curves passing from negative to positive.
    pub fn signed_crossings(&self) -> f64 {
        let scale = self.values.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
        let floor = 1e-12 * scale;
        let mut count = 0i64;
        for curve in &self.values {
            let mut last = 0i8;
            for &v in curve {
                let sign = if v > floor {
                    1
                } else if v < -floor {
                    -1
                } else {
                    0
                };
                if sign != 0 {
                    if last != 0 && sign != last {
                        count += sign as i64;
                    }
                    last = sign;
                }
            }
        }
        count as f64 * self.weight
    }
}

fn clusters(values: &[f64]) -> Vec<std::ops::Range<usize>> {
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > 1e-9 * scale {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Map each eigen-index of `prev` to one of `cur`. Clusters of equal
/// eigenvalues on both sides are matched through the squared overlaps of
/// their eigenspaces, which must round consistently to integer counts;
/// otherwise the smallest overlap mass is returned as the error.
fn match_eigenspaces(prev: &SymEigen, cur: &SymEigen) -> std::result::Result<Vec<usize>, f64> {
    let dim = prev.values.len();
    let (gp, gc) = (clusters(prev.values.as_slice()), clusters(cur.values.as_slice()));
    let overlap = prev.vectors.transpose() * &cur.vectors;
    let mut counts = vec![vec![0usize; gc.len()]; gp.len()];
    let mut worst = f64::INFINITY;
    for (g, rg) in gp.iter().enumerate() {
        for (h, rh) in gc.iter().enumerate() {
            let w: f64 = rg.clone().flat_map(|a| rh.clone().map(move |b| (a, b))).map(|(a, b)| overlap[(a, b)].powi(2)).sum();
            let n = w.round();
            if (w - n).abs() >= OVERLAP_MIN {
                return Err(w);
            }
            if n > 0.0 {
                worst = worst.min(w / n);
            }
            counts[g][h] = n as usize;
        }
    }
    let rows_ok = gp.iter().enumerate().all(|(g, r)| counts[g].iter().sum::<usize>() == r.len());
    let cols_ok = gc.iter().enumerate().all(|(h, r)| counts.iter().map(|c| c[h]).sum::<usize>() == r.len());
    if !rows_ok || !cols_ok || worst < OVERLAP_MIN {
        return Err(worst.min(OVERLAP_MIN - f64::EPSILON));
    }
    let mut fill: Vec<usize> = gc.iter().map(|r| r.start).collect();
    let mut next = vec![0; dim];
    for (g, rg) in gp.iter().enumerate() {
        let mut members = rg.clone();
        for (h, &n) in counts[g].iter().enumerate() {
            for a in members.by_ref().take(n) {
                next[a] = fill[h];
                fill[h] += 1;
            }
        }
    }
    Ok(next)
}

/// Track eigenvalues along `grid`, matching each new eigenvector to the
/// previous eigenspace it overlaps most. Degenerate eigenvalues are matched
/// as whole eigenspaces.
pub fn eigencurves<F: MatrixFamily + ?Sized>(family: &F, grid: &[f64]) -> Result<EigenCurves> {
    if grid.is_empty() {
        return Err(FueterError::InvalidInput("empty parameter grid".into()));
    }
    let decomps: Vec<_> = grid
        .par_iter()
        .map(|&s| family.matrix(s).map(|m| sym_eigen(&m)))
        .collect::<Result<_>>()?;
    let dim = decomps[0].values.len();
    let mut values = vec![Vec::with_capacity(grid.len()); dim];
    // slot[c] = eigen-index currently carried by curve c
    let mut slot: Vec<usize> = (0..dim).collect();
    for (c, v) in values.iter_mut().enumerate() {
        v.push(decomps[0].values[c]);
    }
    let mut residual = 0.0f64;
    for i in 1..grid.len() {
        let (prev, cur) = (&decomps[i - 1], &decomps[i]);
        let next = match_eigenspaces(prev, cur).map_err(|overlap| FueterError::MatchingAmbiguity {
            s0: grid[i - 1],
            s1: grid[i],
            overlap,
        })?;
        for c in 0..dim {
            slot[c] = next[slot[c]];
            let v = cur.values[slot[c]];
            residual = residual.max((v - values[c][i - 1]).abs());
            values[c].push(v);
        }
    }
    Ok(EigenCurves {
        label: family.label(),
        weight: family.weight(),
        s: grid.to_vec(),
        values,
        continuity_residual: residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingReport {
    pub s_star: f64,
    pub label: Option<BlockLabel>,
    pub weight: f64,
    #[serde(skip)]
    pub kernel_basis: DMatrix<f64>,
    #[serde(skip)]
    pub gamma: DMatrix<f64>,
    /// Ascending eigenvalues of `gamma`.
    pub gamma_eigenvalues: Vec<f64>,
    pub signature: i64,
    /// Ascending finite-difference slopes of the branches through zero.
    pub slopes: Vec<f64>,
}

/// Slopes of the `k` eigenvalue branches through zero at `s`, from the
/// spectra at `s ± h`, in ascending order.
fn branch_slopes<F: MatrixFamily + ?Sized>(family: &F, s: f64, k: usize, h: f64) -> Result<Vec<f64>> {
    let near = |t: f64| -> Result<Vec<f64>> {
        let mut v = sym_eigenvalues(&family.matrix(t)?);
        v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        v.truncate(k);
        v.sort_by(f64::total_cmp);
        Ok(v)
    };
    let (plus, minus) = (near(s + h)?, near(s - h)?);
    // increasing branches are the largest at s + h and the smallest at s - h
    Ok((0..k).map(|i| (plus[i] - minus[k - 1 - i]) / (2.0 * h)).collect())
}

/// Crossing form `Γ = Kᵀ Ḋ K` on the numerical kernel at `s_star`.
pub fn crossing_form<F: MatrixFamily + ?Sized>(family: &F, s_star: f64) -> Result<CrossingReport> {
    let eig = sym_eigen(&family.matrix(s_star)?);
    let cols: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i].abs() < KERNEL_TOL).collect();
    if cols.is_empty() {
        return Err(FueterError::EmptyKernel(s_star));
    }
    let k = eig.vectors.select_columns(&cols);
    let ddot = family.derivative(s_star)?;
    let gamma = k.transpose() * &ddot * &k;
    let gamma = (&gamma + gamma.transpose()) * 0.5;
    let gvals = sym_eigenvalues(&gamma);
    let min_abs = gvals.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min_abs < DEFAULT_TOL * max_abs(&ddot).max(1.0) {
        return Err(FueterError::DegenerateCrossing { s: s_star, min_abs });
    }
    let signature = gvals.iter().map(|v| v.signum() as i64).sum();
    let slopes = branch_slopes(family, s_star, cols.len(), SLOPE_STEP)?;
    Ok(CrossingReport {
        s_star,
        label: family.label(),
        weight: family.weight(),
        kernel_basis: k,
        gamma,
        gamma_eigenvalues: gvals,
        signature,
        slopes,
    })
}

/// Largest `|slope - γ| / max(1, |γ|)` over the crossing branches, with the
/// slopes recomputed at step `h`.
pub fn slope_vs_gamma<F: MatrixFamily + ?Sized>(family: &F, report: &CrossingReport, h: f64) -> Result<f64> {
    let slopes = branch_slopes(family, report.s_star, report.gamma_eigenvalues.len(), h)?;
    Ok(slopes
        .iter()
        .zip(&report.gamma_eigenvalues)
        .map(|(s, g)| (s - g).abs() / g.abs().max(1.0))
        .fold(0.0, f64::max))
}

fn negative_count<F: MatrixFamily + ?Sized>(family: &F, s: f64) -> Result<usize> {
    Ok(sym_eigenvalues(&family.matrix(s)?).iter().filter(|v| **v < 0.0).count())
}

struct Isolated {
    report: CrossingReport,
    left: (f64, usize),
    right: (f64, usize),
}

/// Bisect `[a, b]` (negative counts `na` at `a`, different at `b`) down to
/// `LOCATE_TOL`, form the crossing there and step off it on both sides, never
/// leaving the family's parameter range.
fn isolate<F: MatrixFamily + ?Sized>(family: &F, (mut a, mut b): (f64, f64), na: usize) -> Result<Isolated> {
    while b - a > LOCATE_TOL {
        let m = 0.5 * (a + b);
        if negative_count(family, m)? != na {
            b = m;
        } else {
            a = m;
        }
    }
    let s_star = 0.5 * (a + b);
    let report = crossing_form(family, s_star)?;
    // far enough that the kernel branches have separated from zero
    let gmin = report.gamma_eigenvalues.iter().fold(f64::INFINITY, |m, g| m.min(g.abs()));
    let delta = (1e3 * LOCATE_TOL / gmin.min(1.0)).min(1e-6);
    let (lo, hi) = family.range();
    let (left, right) = ((s_star - delta).max(lo), (s_star + delta).min(hi));
    let (nl, nr) = (negative_count(family, left)?, negative_count(family, right)?);
    if nl as i64 - nr as i64 != report.signature {
        return Err(FueterError::DegenerateCrossing { s: s_star, min_abs: gmin });
    }
    Ok(Isolated { report, left: (left, nl), right: (right, nr) })
}

/// Every crossing in `[a, b]`, given the negative counts at the ends.
fn locate<F: MatrixFamily + ?Sized>(
    family: &F,
    (a, b): (f64, f64),
    (na, nb): (usize, usize),
    out: &mut Vec<CrossingReport>,
) -> Result<()> {
    if na == nb || b <= a {
        return Ok(());
    }
    let iso = isolate(family, (a, b), na)?;
    out.push(iso.report);
    if iso.left.0 > a {
        locate(family, (a, iso.left.0), (na, iso.left.1), out)?;
    }
    if iso.right.0 < b {
        locate(family, (iso.right.0, b), (iso.right.1, nb), out)?;
    }
    Ok(())
}

/// All crossings of a family on a grid, each localised to `LOCATE_TOL`.
/// A crossing sitting on a grid point is stepped over rather than split.
pub fn crossings<F: MatrixFamily + ?Sized>(family: &F, grid: &[f64]) -> Result<Vec<CrossingReport>> {
    let mut out = Vec::new();
    let Some(&first) = grid.first() else {
        return Ok(out);
    };
    let (mut x, mut nx) = (first, negative_count(family, first)?);
    for &g in &grid[1..] {
        while g > x {
            let ng = negative_count(family, g)?;
            if ng == nx {
                x = g;
                break;
            }
            let iso = isolate(family, (x, g), nx)?;
            if iso.left.0 > x {
                locate(family, (x, iso.left.0), (nx, iso.left.1), &mut out)?;
            }
            out.push(iso.report);
            (x, nx) = iso.right;
        }
    }
    out.sort_by(|p, q| p.s_star.total_cmp(&q.s_star));
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Number of grid intervals on the path.
    pub intervals: usize,
    /// Keep the constant block, whose zero eigenvalues make every endpoint singular.
    pub include_constants: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { intervals: 240, include_constants: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    /// Weighted sum of crossing-form signatures.
    pub flow: i64,
    /// Weighted signed zero-crossing count of the matched eigencurves.
    pub curve_count: i64,
    pub crossings: Vec<CrossingReport>,
    pub curves: Vec<EigenCurves>,
}

fn is_constant_block(label: BlockLabel) -> bool {
    matches!(label, BlockLabel::Torus([0, 0, 0]) | BlockLabel::Spin(0))
}

fn to_integer(x: f64, what: &str) -> Result<i64> {
    let r = x.round();
    if (x - r).abs() > 1e-9 {
        return Err(FueterError::InvalidInput(format!("{what} {x} is not an integer")));
    }
    Ok(r as i64)
}

/// Spectral flow of `∂_{v(s)}` restricted to the given blocks, computed both
/// from crossing forms and by counting matched eigencurves.
pub fn spectral_flow(path: &FramePath, labels: &[BlockLabel], options: &FlowOptions) -> Result<FlowReport> {
    let grid = path.grid(options.intervals);
    let (a, b) = path.range;
    let mut per_block: Vec<(Vec<CrossingReport>, EigenCurves)> = labels
        .par_iter()
        .filter(|l| options.include_constants || !is_constant_block(**l))
        .map(|&label| {
            let family = BlockFamily::new(path, label)?;
            for s in [a, b] {
                let min = sym_eigenvalues(&family.matrix(s)?).iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                if min < DEFAULT_TOL {
                    return Err(FueterError::InvalidInput(format!(
                        "block {label} is not invertible at the endpoint s = {s} (|eigenvalue| {min:.3e})"
                    )));
                }
            }
            let found = crossings(&family, &grid)?;
            let curves = eigencurves(&family, &grid)?;
            Ok((found, curves))
        })
        .collect::<Result<_>>()?;
    per_block.sort_by(|x, y| x.1.label.cmp(&y.1.label));
    let mut all = Vec::new();
    let mut curves = Vec::new();
    let (mut sig, mut count) = (0.0, 0.0);
    for (found, c) in per_block {
        sig += found.iter().map(|r| r.signature as f64 * r.weight).sum::<f64>();
        count += c.signed_crossings();
        all.extend(found);
        curves.push(c);
    }
    all.sort_by(|x, y| x.label.cmp(&y.label).then(x.s_star.total_cmp(&y.s_star)));
    Ok(FlowReport {
        flow: to_integer(sig, "signature sum")?,
        curve_count: to_integer(count, "curve count")?,
        crossings: all,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spin_half(path: &FramePath) -> BlockFamily<'_> {
        BlockFamily::new(path, BlockLabel::Spin(1)).unwrap()
    }

    #[test]
    fn singular_approach_hits_the_singular_frame() {
        let p = FramePath::singular_approach((0.0, 1.2)).unwrap();
        let diff = p.matrix_at(1.0) - FrameSpec::singular_sphere().matrix();
        assert!(diff.amax() < 1e-15);
        assert!((p.matrix_at(0.0) - Matrix3::identity()).amax() < 1e-15);
        for s in p.grid(24) {
            assert!((p.matrix_at(s).determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let paths = [
            FramePath::singular_approach((0.0, 1.2)).unwrap(),
            FramePath::bracket_perturbation(*FrameSpec::singular_sphere().matrix(), (-0.1, 0.1)).unwrap(),
            FramePath::linear(Manifold::Torus3, Matrix3::identity(), Matrix3::new(2.0, 0.1, 0.0, 0.0, 1.0, 0.3, 0.0, 0.0, 1.5))
                .unwrap()
                .reversed(),
        ];
        for p in &paths {
            let (a, b) = p.range();
            for s in [a + 0.03, 0.5 * (a + b), b - 0.03] {
                let h = 1e-5;
                let fd = (p.matrix_at(s + h) - p.matrix_at(s - h)) / (2.0 * h);
                assert!((fd - p.derivative_at(s)).amax() < 1e-8, "{p:?} at {s}");
            }
        }
    }

    #[test]
    fn custom_path_derivative_is_accurate() {
        let f = |s: f64| Matrix3::new(1.0 + s * s, s.sin(), 0.0, 0.0, 1.0, 0.0, 0.0, s.exp() - 1.0, 1.0);
        let p = FramePath::from_fn(Manifold::Torus3, (0.0, 1.0), f).unwrap();
        let s: f64 = 0.4;
        let exact = Matrix3::new(2.0 * s, s.cos(), 0.0, 0.0, 0.0, 0.0, 0.0, s.exp(), 0.0);
        assert!((p.derivative_at(s) - exact).amax() < 1e-10);
    }

    #[test]
    fn torus_curves_follow_closed_form() {
        let u1 = Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 1.0));
        let p = FramePath::linear(Manifold::Torus3, Matrix3::identity(), u1).unwrap();
        let fam = BlockFamily::new(&p, BlockLabel::Torus([1, 0, 0])).unwrap();
        let curves = eigencurves(&fam, &p.grid(20)).unwrap();
        for c in &curves.values {
            for (v, s) in c.iter().zip(&curves.s) {
                assert!((v.abs() - 2.0 * PI * (1.0 + s)).abs() < 1e-10);
            }
        }
        assert_eq!(curves.signed_crossings(), 0.0);
        assert!(crossings(&fam, &p.grid(20)).unwrap().is_empty());
    }

    #[test]
    fn constant_path_has_constant_curves_and_no_flow() {
        let frame = FrameSpec::standard_sphere();
        let p = FramePath::constant(&frame, (0.0, 1.0)).unwrap();
        let fam = spin_half(&p);
        let curves = eigencurves(&fam, &p.grid(8)).unwrap();
        assert!(curves.continuity_residual < 1e-12);
        let labels: Vec<_> = (0..4).map(BlockLabel::Spin).collect();
        let r = spectral_flow(&p, &labels, &FlowOptions { intervals: 8, ..Default::default() }).unwrap();
        assert_eq!((r.flow, r.curve_count), (0, 0));
        assert!(r.crossings.is_empty());
    }

    #[test]
    fn singular_approach_crosses_at_one() {
        let p = FramePath::singular_approach((0.0, 1.2)).unwrap();
        let fam = spin_half(&p);
        let found = crossings(&fam, &p.grid(120)).unwrap();
        assert_eq!(found.len(), 1);
        let r = &found[0];
        assert!((r.s_star - 1.0).abs() < 1e-6);
        assert_eq!(r.kernel_basis.ncols(), 4);
        assert_eq!(r.signature.abs(), 4);
        assert!(r.slopes.iter().all(|s| s.signum() == r.signature.signum() as f64));
        assert!(slope_vs_gamma(&fam, r, SLOPE_STEP).unwrap() < 1e-6);
        assert!(crate::linalg::asymmetry(&r.gamma) < 1e-14);
    }

    #[test]
    fn flow_agrees_with_curve_count_and_reverses() {
        let p = FramePath::singular_approach((0.0, 1.2)).unwrap();
        let labels: Vec<_> = (0..=4).map(BlockLabel::Spin).collect();
        let fwd = spectral_flow(&p, &labels, &FlowOptions::default()).unwrap();
        assert_eq!(fwd.flow, fwd.curve_count);
        assert_eq!(fwd.flow.abs(), 4);
        let back = spectral_flow(&p.reversed(), &labels, &FlowOptions::default()).unwrap();
        assert_eq!(back.flow, -fwd.flow);
        assert_eq!(back.curve_count, -fwd.curve_count);
        let fine = spectral_flow(&p, &labels, &FlowOptions { intervals: 480, ..Default::default() }).unwrap();
        assert_eq!(fine.flow, fwd.flow);
        assert!((fine.crossings[0].s_star - fwd.crossings[0].s_star).abs() < 1e-6);
    }

    #[test]
    fn including_constants_makes_endpoints_singular() {
        let p = FramePath::singular_approach((0.0, 1.2)).unwrap();
        let opts = FlowOptions { include_constants: true, ..Default::default() };
        assert!(spectral_flow(&p, &[BlockLabel::Spin(0)], &opts).is_err());
    }

    #[test]
    fn bracket_perturbation_crosses_positively() {
        let u0 = *FrameSpec::singular_sphere().matrix();
        let p = FramePath::bracket_perturbation(u0, (-0.1, 0.1)).unwrap();
        let r = crossing_form(&spin_half(&p), 0.0).unwrap();
        assert!(r.gamma_eigenvalues.iter().all(|g| *g > 0.0));
        assert_eq!(r.signature, 4);
    }

    #[test]
    fn empty_kernel_is_reported() {
        let p = FramePath::constant(&FrameSpec::standard_sphere(), (0.0, 1.0)).unwrap();
        assert!(matches!(crossing_form(&spin_half(&p), 0.5), Err(FueterError::EmptyKernel(_))));
    }

    #[test]
    fn model_family_slopes_equal_gamma() {
        let fam = FnFamily {
            range: (-1.0, 1.0),
            matrix: |s: f64| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s, -s])),
            derivative: |_s: f64| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0])),
        };
        let r = crossing_form(&fam, 0.0).unwrap();
        assert_eq!(r.gamma_eigenvalues, vec![-1.0, 1.0]);
        assert_eq!(r.signature, 0);
        assert!(slope_vs_gamma(&fam, &r, 1e-3).unwrap() < 1e-12);
    }

    #[test]
    fn degenerate_crossing_is_rejected() {
        let fam = FnFamily {
            range: (-1.0, 1.0),
            matrix: |s: f64| DMatrix::from_element(1, 1, s * s),
            derivative: |s: f64| DMatrix::from_element(1, 1, 2.0 * s),
        };
        assert!(matches!(crossing_form(&fam, 0.0), Err(FueterError::DegenerateCrossing { .. })));
    }

    #[test]
    fn close_crossings_in_one_interval_are_separated() {
        // eigenvalues s - 0.3 and s - 0.31 cross in the same grid cell
        let fam = FnFamily {
            range: (0.0, 1.0),
            matrix: |s: f64| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s - 0.3, s - 0.31, 1.0])),
            derivative: |_s: f64| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0])),
        };
        let found = crossings(&fam, &[0.0, 1.0]).unwrap();
        assert_eq!(found.len(), 2);
        assert!((found[0].s_star - 0.3).abs() < 1e-9 && (found[1].s_star - 0.31).abs() < 1e-9);
    }

    #[test]
    fn catenation_rejects_gaps() {
        let a = FramePath::linear(Manifold::Torus3, Matrix3::identity(), Matrix3::identity() * 2.0).unwrap();
        let b = FramePath::linear(Manifold::Torus3, Matrix3::identity() * 3.0, Matrix3::identity()).unwrap();
        assert!(a.then(&b).is_err());
    }

    fn gl_plus() -> impl Strategy<Value = Matrix3<f64>> {
        proptest::collection::vec(-1.0f64..1.0, 9).prop_map(|v| {
            let m = Matrix3::from_row_slice(&v) * 0.3 + Matrix3::identity();
            if m.determinant() > 0.0 {
                m
            } else {
                Matrix3::identity()
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn flow_is_additive_on_torus_paths(u0 in gl_plus(), u1 in gl_plus(), u2 in gl_plus()) {
            let p1 = FramePath::linear(Manifold::Torus3, u0, u1).unwrap();
            let p2 = FramePath::linear(Manifold::Torus3, u1, u2).unwrap();
            let labels: Vec<_> = crate::field::half_lattice(1).into_iter().map(BlockLabel::Torus).collect();
            let opts = FlowOptions { intervals: 16, ..Default::default() };
            // paths may leave GL+; those samples are rejected, not counted
            let run = |p: &FramePath| spectral_flow(p, &labels, &opts).map(|r| r.flow);
            if let (Ok(a), Ok(b), Ok(c)) = (run(&p1), run(&p2), run(&p1.then(&p2).unwrap())) {
                prop_assert_eq!(a + b, c);
                prop_assert_eq!(c, 0);
            }
        }

        #[test]
        fn reversal_negates_sphere_flow(s0 in 0.0f64..0.9, s1 in 1.05f64..1.4) {
            let p = FramePath::singular_approach((s0, s1)).unwrap();
            let labels: Vec<_> = (1..=3).map(BlockLabel::Spin).collect();
            let opts = FlowOptions { intervals: 40, ..Default::default() };
            let f = spectral_flow(&p, &labels, &opts).unwrap();
            let r = spectral_flow(&p.reversed(), &labels, &opts).unwrap();
            prop_assert_eq!(f.flow, -r.flow);
            prop_assert_eq!(f.flow, f.curve_count);
        }
    }
}
