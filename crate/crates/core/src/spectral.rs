//! Invariant blocks of the Fueter operator `∂_v = Σ J_i ∂_{v_i}`, kernel
//! counting with certified truncation, and the regular/singular verdict.
//!
//! Block layouts (slowest index first):
//! * torus mode `k`: `[cos, sin] x H`, side 8 (the constant mode is a zero 4x4);
//! * `S^3` degree `n = 2j`: `H x [Re e_m, Im e_m]`, side `8(n+1)`; each block
//!   eigenvalue occurs `(n+1)/2` times in the full operator;
//! * `S^1 x S^2` Fourier mode `m`: `H x [cos, sin] x Y_{l,mu}` (no trig factor for `m = 0`).

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FueterError, Result};
use crate::field::{half_lattice, FieldExpansion, ProductTables, SphereTerm, Trig, MAX_SH_DEGREE};
use crate::frame::{cofactor, FrameSpec, Manifold};
use crate::linalg::{block_diag, j_matrix, kron, sym_eigenvalues};
use crate::quat::{Axis, Quaternion};
use crate::sphere_harmonics::{sh_count, sh_labels};
use crate::su2::rho_real;

/// Default kernel tolerance and the gap factor demanded around it.
pub const DEFAULT_TOL: f64 = 1e-8;
pub const GAP_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BlockLabel {
    /// Torus mode from the half lattice, or zero.
    Torus([i64; 3]),
    /// `S^3` block of degree `n = 2j`.
    Spin(usize),
    /// `S^1 x S^2` Fourier mode `m` at spherical truncation `lmax`.
    Fourier { m: usize, lmax: usize },
}

impl fmt::Display for BlockLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockLabel::Torus(k) => write!(f, "k=({};{};{})", k[0], k[1], k[2]),
            BlockLabel::Spin(n) if n % 2 == 0 => write!(f, "j={}", n / 2),
            BlockLabel::Spin(n) => write!(f, "j={}/2", n),
            BlockLabel::Fourier { m, lmax } => write!(f, "m={m};L={lmax}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Part {
    Re,
    Im,
}

/// Identifier of one real basis function of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasisFunction {
    Torus { component: usize, k: [i64; 3], trig: Trig },
    Sphere { component: usize, n: usize, part: Part, m: usize },
    Product { component: usize, m: usize, trig: Trig, l: usize, mu: i64 },
}

#[derive(Debug, Clone)]
pub struct SpectralBlock {
    pub label: BlockLabel,
    pub matrix: DMatrix<f64>,
    pub basis: Vec<BasisFunction>,
    /// Number of copies of this block in the full operator.
    pub weight: f64,
}

impl SpectralBlock {
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigenvalues(&self.matrix)
    }
}

fn torus_kernel_matrix(u: &Matrix3<f64>, k: [i64; 3]) -> DMatrix<f64> {
    let kappa = u.transpose() * nalgebra::Vector3::new(k[0] as f64, k[1] as f64, k[2] as f64);
    let mut kq = DMatrix::zeros(4, 4);
    for a in Axis::ALL {
        kq += j_matrix(a) * kappa[a.index()];
    }
    kq * (2.0 * PI)
}

/// Matrix of `∂_v` on the torus mode `k` for the frame with columns of `u`
/// (linear in `u`, so it also yields `dD/ds` from `dU/ds`).
pub fn t3_matrix(u: &Matrix3<f64>, k: [i64; 3]) -> DMatrix<f64> {
    if k == [0, 0, 0] {
        return DMatrix::zeros(4, 4);
    }
    let e = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    kron(&e, &torus_kernel_matrix(u, k))
}

fn torus_basis(k: [i64; 3]) -> Vec<BasisFunction> {
    if k == [0, 0, 0] {
        return (0..4).map(|c| BasisFunction::Torus { component: c, k, trig: Trig::Const }).collect();
    }
    [Trig::Cos, Trig::Sin]
        .iter()
        .flat_map(|&trig| (0..4).map(move |c| BasisFunction::Torus { component: c, k, trig }))
        .collect()
}

pub fn t3_block(u: &Matrix3<f64>, k: [i64; 3]) -> Result<SpectralBlock> {
    if !crate::field::is_half_lattice(k) {
        return Err(FueterError::InvalidInput(format!("mode {k:?} is not in the half lattice; use -k")));
    }
    Ok(SpectralBlock { label: BlockLabel::Torus(k), matrix: t3_matrix(u, k), basis: torus_basis(k), weight: 1.0 })
}

fn col(u: &Matrix3<f64>, i: usize) -> [f64; 3] {
    [u[(0, i)], u[(1, i)], u[(2, i)]]
}

/// Matrix of `∂_v` on the degree-`n` block of `S^3` for `v_i(y) = u_i y`
/// (linear in `u`).
pub fn s3_matrix(u: &Matrix3<f64>, n: usize) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(4, 4);
    }
    let d = 8 * (n + 1);
    let mut m = DMatrix::zeros(d, d);
    for a in Axis::ALL {
        m += kron(&j_matrix(a), &rho_real(n, col(u, a.index())));
    }
    m
}

fn sphere_basis_ids(n: usize) -> Vec<BasisFunction> {
    if n == 0 {
        return (0..4).map(|c| BasisFunction::Sphere { component: c, n, part: Part::Re, m: 0 }).collect();
    }
    let mut out = Vec::with_capacity(8 * (n + 1));
    for c in 0..4 {
        for part in [Part::Re, Part::Im] {
            for m in 0..=n {
                out.push(BasisFunction::Sphere { component: c, n, part, m });
            }
        }
    }
    out
}

/// Block of degree `n = 2j`.
pub fn s3_block(u: &Matrix3<f64>, n: usize) -> SpectralBlock {
    let weight = if n == 0 { 1.0 } else { (n + 1) as f64 / 2.0 };
    SpectralBlock { label: BlockLabel::Spin(n), matrix: s3_matrix(u, n), basis: sphere_basis_ids(n), weight }
}

/// Block vector of an `S^3` term with identity shift.
pub fn sphere_term_vector(term: &SphereTerm) -> Result<nalgebra::DVector<f64>> {
    if term.shift != Quaternion::ONE {
        return Err(FueterError::InvalidInput("block vectors need identity shifts".into()));
    }
    let b = term.coeffs.len();
    Ok(nalgebra::DVector::from_fn(4 * b, |r, _| term.coeffs[r % b].component(r / b)))
}

/// Inverse of [`sphere_term_vector`].
pub fn sphere_term_from_vector(n: usize, v: &nalgebra::DVector<f64>) -> SphereTerm {
    let b = v.len() / 4;
    let coeffs = (0..b).map(|k| Quaternion::new(v[k], v[b + k], v[2 * b + k], v[3 * b + k])).collect();
    SphereTerm { n, shift: Quaternion::ONE, coeffs }
}

/// Fourier-mode `m` block of `S^1 x S^2` at spherical truncation `lmax`.
pub fn s1s2_block(lmax: usize, m: usize) -> Result<SpectralBlock> {
    if lmax < 2 {
        return Err(FueterError::InvalidInput(format!("lmax = {lmax} is below the minimum 2")));
    }
    if lmax > MAX_SH_DEGREE {
        return Err(FueterError::TruncationOverflow { degree: lmax, limit: MAX_SH_DEGREE });
    }
    let t = ProductTables::get(lmax);
    let n = sh_count(lmax);
    let labels = sh_labels(lmax);
    let mut mat;
    let mut basis = Vec::new();
    if m == 0 {
        mat = DMatrix::zeros(4 * n, 4 * n);
        for a in Axis::ALL {
            mat += kron(&j_matrix(a), &t.rot[a.index()]);
        }
        for c in 0..4 {
            for &(l, mu) in &labels {
                basis.push(BasisFunction::Product { component: c, m, trig: Trig::Const, l, mu });
            }
        }
    } else {
        let tm = DMatrix::from_row_slice(2, 2, &[0.0, m as f64, -(m as f64), 0.0]);
        let id2 = DMatrix::identity(2, 2);
        mat = DMatrix::zeros(8 * n, 8 * n);
        for a in Axis::ALL {
            let i = a.index();
            let inner = kron(&tm, &t.mult[i]) + kron(&id2, &t.rot[i]);
            mat += kron(&j_matrix(a), &inner);
        }
        for c in 0..4 {
            for trig in [Trig::Cos, Trig::Sin] {
                for &(l, mu) in &labels {
                    basis.push(BasisFunction::Product { component: c, m, trig, l, mu });
                }
            }
        }
    }
    Ok(SpectralBlock { label: BlockLabel::Fourier { m, lmax }, matrix: mat, basis, weight: 1.0 })
}

/// All Fourier modes `0..=mmax` assembled into one block-diagonal matrix.
pub fn s1s2_operator(lmax: usize, mmax: usize) -> Result<SpectralBlock> {
    if mmax < 1 {
        return Err(FueterError::InvalidInput("mmax must be at least 1".into()));
    }
    let blocks = (0..=mmax).map(|m| s1s2_block(lmax, m)).collect::<Result<Vec<_>>>()?;
    let matrix = block_diag(&blocks.iter().map(|b| b.matrix.clone()).collect::<Vec<_>>());
    let basis = blocks.iter().flat_map(|b| b.basis.iter().copied()).collect();
    Ok(SpectralBlock { label: BlockLabel::Fourier { m: mmax, lmax }, matrix, basis, weight: 1.0 })
}

/// Block truncation used for kernel counting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    /// Torus modes with `|k|_inf ≤ kmax`.
    pub kmax: usize,
    /// `S^3` degrees `n ≤ nmax` (that is `j ≤ nmax/2`).
    pub nmax: usize,
    pub lmax: usize,
    pub mmax: usize,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { kmax: 8, nmax: 12, lmax: 8, mmax: 4 }
    }
}

/// Block labels covered by a cutoff for a manifold, in canonical order.
pub fn block_labels(manifold: Manifold, cutoff: &Cutoff) -> Vec<BlockLabel> {
    match manifold {
        Manifold::Torus3 => std::iter::once(BlockLabel::Torus([0; 3]))
            .chain(half_lattice(cutoff.kmax).into_iter().map(BlockLabel::Torus))
            .collect(),
        Manifold::Sphere3 => (0..=cutoff.nmax).map(BlockLabel::Spin).collect(),
        Manifold::ProductS1S2 => (0..=cutoff.mmax).map(|m| BlockLabel::Fourier { m, lmax: cutoff.lmax }).collect(),
    }
}

/// Assemble one block of a frame.
pub fn block(frame: &FrameSpec, label: BlockLabel) -> Result<SpectralBlock> {
    match (frame.manifold(), label) {
        (Manifold::Torus3, BlockLabel::Torus(k)) => t3_block(frame.matrix(), k),
        (Manifold::Sphere3, BlockLabel::Spin(n)) => Ok(s3_block(frame.matrix(), n)),
        (Manifold::ProductS1S2, BlockLabel::Fourier { m, lmax }) => s1s2_block(lmax, m),
        (m, l) => Err(FueterError::InvalidInput(format!("block {l} does not belong to {m:?}"))),
    }
}

/// Lower bound on `|eigenvalue|` over every block outside the cutoff, or
/// `None` where no a-priori bound is available (`S^1 x S^2`).
pub fn truncation_bound(frame: &FrameSpec, cutoff: &Cutoff) -> Option<f64> {
    let sigma = frame.sigma_min();
    match frame.manifold() {
        // |U^T k| ≥ sigma |k| ≥ sigma (kmax + 1) when |k|_inf > kmax
        Manifold::Torus3 => Some(2.0 * PI * sigma * (cutoff.kmax + 1) as f64),
        // D^2 = -L - W with -L ≥ sigma^2 n(n+2) and |W| ≤ n Σ|w_i|
        Manifold::Sphere3 => {
            let c: f64 = (0..3).map(|i| 2.0 * frame.cofactor().column(i).norm()).sum();
            let g = |n: f64| sigma * sigma * n * (n + 2.0) - c * n;
            let mut n = (cutoff.nmax + 1) as f64;
            while g(n + 1.0) < g(n) {
                n += 1.0;
            }
            Some(g(n).max(0.0).sqrt())
        }
        Manifold::ProductS1S2 => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSpectrum {
    pub label: BlockLabel,
    pub weight: f64,
    pub eigenvalues: Vec<f64>,
}

/// Spectra of all blocks under a cutoff, computed in parallel and returned in
/// label order.
pub fn spectra(frame: &FrameSpec, cutoff: &Cutoff) -> Result<Vec<BlockSpectrum>> {
    block_labels(frame.manifold(), cutoff)
        .into_par_iter()
        .map(|label| {
            let b = block(frame, label)?;
            Ok(BlockSpectrum { label, weight: b.weight, eigenvalues: b.eigenvalues() })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub dimension: usize,
    pub tol: f64,
    /// Largest `|eigenvalue|` accepted as zero.
    pub cluster_max: f64,
    /// Smallest `|eigenvalue|` not accepted as zero.
    pub next: f64,
    pub truncation_bound: Option<f64>,
    /// `(block, kernel count in the full operator)` for blocks with kernel.
    pub blocks: Vec<(BlockLabel, usize)>,
}

/// Kernel dimension from a list of block spectra, enforcing the gap rule:
/// no eigenvalue may lie in `[tol / GAP_FACTOR, tol * GAP_FACTOR]`.
pub fn count_kernel(spectra: &[BlockSpectrum], tol: f64) -> Result<KernelReport> {
    let (mut cluster_max, mut next) = (0.0f64, f64::INFINITY);
    let mut dimension = 0.0;
    let mut blocks = Vec::new();
    for s in spectra {
        let mut count = 0usize;
        for &e in &s.eigenvalues {
            let a = e.abs();
            if a < tol {
                count += 1;
                cluster_max = cluster_max.max(a);
            } else {
                next = next.min(a);
            }
        }
        if count > 0 {
            let full = count as f64 * s.weight;
            dimension += full;
            blocks.push((s.label, full.round() as usize));
        }
    }
    if cluster_max > tol / GAP_FACTOR || next < tol * GAP_FACTOR {
        return Err(FueterError::AmbiguousKernel { tol, cluster_max, next });
    }
    Ok(KernelReport { dimension: dimension.round() as usize, tol, cluster_max, next, truncation_bound: None, blocks })
}

/// Dimension of `ker ∂_v`, with multiplicities.
pub fn kernel_dimension(frame: &FrameSpec, cutoff: &Cutoff, tol: f64) -> Result<KernelReport> {
    let bound = truncation_bound(frame, cutoff);
    if let Some(b) = bound {
        if b <= tol * GAP_FACTOR {
            return Err(FueterError::UncertifiedTruncation { bound: b, tol });
        }
    }
    let mut report = count_kernel(&spectra(frame, cutoff)?, tol)?;
    report.truncation_bound = bound;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Regular,
    Singular,
}

pub fn classify(frame: &FrameSpec, cutoff: &Cutoff, tol: f64) -> Result<Verdict> {
    let r = kernel_dimension(frame, cutoff, tol)?;
    Ok(if r.dimension == 4 { Verdict::Regular } else { Verdict::Singular })
}

/// Matrices `(D, L, W)` of `∂_v`, `L_v = Σ ∂_{v_i}^2` and `∂_w` on one block.
pub fn operator_triple(frame: &FrameSpec, label: BlockLabel) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let u = frame.matrix();
    match (frame.manifold(), label) {
        (Manifold::Torus3, BlockLabel::Torus(k)) => {
            let d = t3_block(u, k)?.matrix;
            let kappa = u.transpose() * nalgebra::Vector3::new(k[0] as f64, k[1] as f64, k[2] as f64);
            let n = d.nrows();
            let l = DMatrix::identity(n, n) * (-4.0 * PI * PI * kappa.norm_squared());
            Ok((d, l, DMatrix::zeros(n, n)))
        }
        (Manifold::Sphere3, BlockLabel::Spin(n)) => {
            let d = s3_matrix(u, n);
            if n == 0 {
                return Ok((d.clone(), d.clone(), d));
            }
            let cof = cofactor(u) * 2.0;
            let side = d.nrows();
            let (mut l, mut w) = (DMatrix::zeros(side, side), DMatrix::zeros(side, side));
            let id4 = DMatrix::identity(4, 4);
            for a in Axis::ALL {
                let r = rho_real(n, col(u, a.index()));
                l += kron(&id4, &(&r * &r));
                w += kron(&j_matrix(a), &rho_real(n, col(&cof, a.index())));
            }
            Ok((d, l, w))
        }
        (m, l) => Err(FueterError::InvalidInput(format!("no exact operator triple for block {l} on {m:?}"))),
    }
}

/// `max |D^2 + L + W|` on one block.
pub fn verify_dd2(frame: &FrameSpec, label: BlockLabel) -> Result<f64> {
    let (d, l, w) = operator_triple(frame, label)?;
    Ok(crate::linalg::max_abs(&(&d * &d + l + w)))
}

/// `∂_v g` (see [`FieldExpansion::apply_fueter`]).
pub fn apply_fueter(frame: &FrameSpec, g: &FieldExpansion) -> Result<FieldExpansion> {
    g.apply_fueter(frame)
}

/// Spectrum of `∂_v + λ_spinc` on one block.
pub fn dirac_spectrum_shift(frame: &FrameSpec, label: BlockLabel) -> Result<Vec<f64>> {
    let shift = frame.spinc_lambda_constant();
    Ok(block(frame, label)?.eigenvalues().into_iter().map(|e| e + shift).collect())
}

/// Sharp constant `c` in `∫|dg|^2 ≤ c ∫|∂_v g|^2` over mean-zero fields in
/// the blocks of a cutoff, as the largest block Rayleigh quotient
/// `max (-L) / D^2`. Fails with the witness when `∂_v` has non-constant kernel.
pub fn rayleigh_constant(frame: &FrameSpec, cutoff: &Cutoff) -> Result<f64> {
    let labels: Vec<BlockLabel> = block_labels(frame.manifold(), cutoff)
        .into_iter()
        .filter(|l| !matches!(l, BlockLabel::Torus([0, 0, 0]) | BlockLabel::Spin(0)))
        .collect();
    let ratios = labels
        .into_par_iter()
        .map(|label| {
            let (d, l, _) = operator_triple(frame, label)?;
            let d2 = &d * &d;
            // generalised problem (-L) x = c D^2 x with D^2 > 0
            let chol = nalgebra::Cholesky::new(d2.clone()).ok_or_else(|| {
                let e = crate::linalg::sym_eigen(&d);
                let i = (0..e.values.len()).min_by(|&a, &b| e.values[a].abs().total_cmp(&e.values[b].abs())).unwrap_or(0);
                FueterError::SingularFrame { witness_norm: e.values[i].abs() }
            })?;
            let linv = chol.l().try_inverse().expect("triangular factor of a positive matrix");
            let m = &linv * (-l) * linv.transpose();
            let ev = sym_eigenvalues(&m);
            let smallest_d = sym_eigenvalues(&d).iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
            if smallest_d < DEFAULT_TOL {
                return Err(FueterError::SingularFrame { witness_norm: smallest_d });
            }
            Ok(ev.last().copied().unwrap_or(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}
