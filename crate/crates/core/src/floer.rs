//! Perturbed Fueter equation `∂_v f = ∇H(f)` for maps `T^3 -> R^{4n} / Z^{4n}`
//! and its gradient-flow lines `∂_s u + ∂_v u = ∇H(u)`.
//!
//! Fields are expanded in the real Fourier basis `1, √2 cos 2πk·y, √2 sin 2πk·y`
//! with `|k|_inf ≤ (N-1)/2`, which is orthonormal for the discrete mean over the
//! `N^3` collocation grid. Nonlinear terms are evaluated on the grid and
//! projected back, so the discrete residual is the gradient of the discrete
//! action and Newton's Jacobian is symmetric.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FueterError, Result};
use crate::field::{half_lattice, FieldExpansion, TorusTerm, Trig};
use crate::frame::{FrameSpec, Manifold};
use crate::linalg::{gmres, sym_eigen, BandedLu};
use crate::quat::Quaternion;
use crate::spectral::t3_matrix;

const LINE_SEARCH_STEPS: usize = 30;
const EIGEN_FLOOR: f64 = 1e-10;

/// `amp cos(2π(k·y + m·x) + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerm {
    pub amp: f64,
    #[serde(default)]
    pub k: [i64; 3],
    pub m: Vec<i64>,
    #[serde(default)]
    pub phase: f64,
}

/// Finite trigonometric sum `H: T^3 x R^{4n} -> R`, periodic under `Z^{4n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub copies: usize,
    pub terms: Vec<HamiltonianTerm>,
}

impl HamiltonianSpec {
    pub fn new(copies: usize, terms: Vec<HamiltonianTerm>) -> Result<Self> {
        let h = Self { copies, terms };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.copies == 0 {
            return Err(FueterError::InvalidInput("target needs at least one copy of H".into()));
        }
        for t in &self.terms {
            if t.m.len() != self.dim() {
                return Err(FueterError::InvalidInput(format!(
                    "term has {} target frequencies, expected {}",
                    t.m.len(),
                    self.dim()
                )));
            }
            if !t.amp.is_finite() || !t.phase.is_finite() {
                return Err(FueterError::InvalidInput("non-finite Hamiltonian coefficient".into()));
            }
        }
        Ok(())
    }

    pub fn zero(copies: usize) -> Self {
        Self { copies, terms: Vec::new() }
    }

    /// `ε Σ_a cos(2π x_a)`.
    pub fn separable_cosine(copies: usize, eps: f64) -> Self {
        let dim = 4 * copies;
        let terms = (0..dim)
            .map(|a| {
                let mut m = vec![0; dim];
                m[a] = 1;
                HamiltonianTerm { amp: eps, k: [0, 0, 0], m, phase: 0.0 }
            })
            .collect();
        Self { copies, terms }
    }

    /// Random terms with frequencies in `{-1, 0, 1}` and amplitudes in
    /// `[-amplitude, amplitude]`.
    pub fn random<R: Rng>(copies: usize, count: usize, amplitude: f64, rng: &mut R) -> Self {
        let dim = 4 * copies;
        let terms = (0..count)
            .map(|_| {
                let mut m: Vec<i64> = (0..dim).map(|_| rng.random_range(-1..=1)).collect();
                if m.iter().all(|&c| c == 0) {
                    m[rng.random_range(0..dim)] = 1;
                }
                HamiltonianTerm {
                    amp: rng.random_range(-amplitude..=amplitude),
                    k: [rng.random_range(-1..=1), rng.random_range(-1..=1), rng.random_range(-1..=1)],
                    m,
                    phase: rng.random_range(0.0..2.0 * PI),
                }
            })
            .collect();
        Self { copies, terms }
    }

    pub fn dim(&self) -> usize {
        4 * self.copies
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    fn angle(t: &HamiltonianTerm, y: [f64; 3], x: &[f64]) -> f64 {
        let ky: f64 = t.k.iter().zip(y).map(|(&k, y)| k as f64 * y).sum();
        let mx: f64 = t.m.iter().zip(x).map(|(&m, x)| m as f64 * x).sum();
        2.0 * PI * (ky + mx) + t.phase
    }

    pub fn value(&self, y: [f64; 3], x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.amp * Self::angle(t, y, x).cos()).sum()
    }

    /// Gradient in the target variable.
    pub fn gradient(&self, y: [f64; 3], x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for t in &self.terms {
            let c = -t.amp * Self::angle(t, y, x).sin() * 2.0 * PI;
            for (gi, &m) in g.iter_mut().zip(&t.m) {
                *gi += c * m as f64;
            }
        }
        g
    }

    /// Hessian in the target variable.
    pub fn hessian(&self, y: [f64; 3], x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        for t in &self.terms {
            let c = -t.amp * Self::angle(t, y, x).cos() * 4.0 * PI * PI;
            for a in 0..d {
                if t.m[a] == 0 {
                    continue;
                }
                for b in 0..d {
                    h[(a, b)] += c * (t.m[a] * t.m[b]) as f64;
                }
            }
        }
        h
    }

    /// Largest deviation of the gradient from central differences of `H`
    /// over `samples` random points.
    pub fn gradient_check<R: Rng>(&self, samples: usize, rng: &mut R) -> f64 {
        let step = 1e-5;
        let mut worst = 0.0_f64;
        for _ in 0..samples {
            let y = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let x: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
            let g = self.gradient(y, &x);
            for a in 0..self.dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[a] += step;
                xm[a] -= step;
                let fd = (self.value(y, &xp) - self.value(y, &xm)) / (2.0 * step);
                worst = worst.max((fd - g[a]).abs());
            }
        }
        worst
    }
}

/// Collocation grid `N^3` on `T^3` and the Fourier modes it resolves exactly.
#[derive(Debug, Clone)]
pub struct TorusGrid {
    n: usize,
    modes: Vec<[i64; 3]>,
    points: Vec<[f64; 3]>,
    basis: DMatrix<f64>,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 32 {
            return Err(FueterError::InvalidInput(format!("grid size {n} is not in 1..=32")));
        }
        let modes = half_lattice((n - 1) / 2);
        let mut points = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    points.push([a as f64 / n as f64, b as f64 / n as f64, c as f64 / n as f64]);
                }
            }
        }
        let count = 1 + 2 * modes.len();
        let basis = DMatrix::from_fn(points.len(), count, |p, f| {
            if f == 0 {
                return 1.0;
            }
            let k = modes[(f - 1) / 2];
            let y = points[p];
            let phase = 2.0 * PI * (k[0] as f64 * y[0] + k[1] as f64 * y[1] + k[2] as f64 * y[2]);
            if f % 2 == 1 {
                2f64.sqrt() * phase.cos()
            } else {
                2f64.sqrt() * phase.sin()
            }
        });
        Ok(Self { n, modes, points, basis })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> &[[i64; 3]] {
        &self.modes
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn function_count(&self) -> usize {
        self.basis.ncols()
    }

    /// Values of the basis functions at the grid points, one column each.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

/// Coefficients of a map `T^3 -> R^dim`; entry `b * dim + q` multiplies basis
/// function `b` (`0` constant, `2t+1` cosine and `2t+2` sine of mode `t`) in
/// component `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinField {
    pub dim: usize,
    pub coeffs: DVector<f64>,
}

impl GalerkinField {
    pub fn zeros(grid: &TorusGrid, dim: usize) -> Self {
        Self { dim, coeffs: DVector::zeros(grid.function_count() * dim) }
    }

    pub fn constant(grid: &TorusGrid, x: &[f64]) -> Self {
        let mut f = Self::zeros(grid, x.len());
        f.coeffs.rows_mut(0, x.len()).copy_from_slice(x);
        f
    }

    /// Constant field plus Gaussian coefficients of size `amplitude` in every
    /// nonconstant mode.
    pub fn random<R: Rng>(grid: &TorusGrid, dim: usize, amplitude: f64, rng: &mut R) -> Self {
        let mut f = Self::zeros(grid, dim);
        for (i, c) in f.coeffs.iter_mut().enumerate() {
            *c = if i < dim {
                rng.random::<f64>()
            } else {
                amplitude * standard_normal(rng)
            };
        }
        f
    }

    /// Mean over `T^3`.
    pub fn mean(&self) -> Vec<f64> {
        self.coeffs.rows(0, self.dim).iter().copied().collect()
    }

    /// Values at the grid points, one row per point.
    pub fn values(&self, grid: &TorusGrid) -> DMatrix<f64> {
        let rows = self.coeffs.len() / self.dim;
        grid.basis() * DMatrix::from_row_slice(rows, self.dim, self.coeffs.as_slice())
    }

    /// Mean reduced into `[0, 1)^dim`.
    pub fn reduced(&self) -> Self {
        let mut f = self.clone();
        for c in f.coeffs.rows_mut(0, self.dim).iter_mut() {
            let mut r = c.rem_euclid(1.0);
            if r > 1.0 - 1e-12 {
                r = 0.0;
            }
            *c = r;
        }
        f
    }

    /// Distance in the quotient by `Z^dim` acting on the mean.
    pub fn lattice_distance(&self, other: &Self) -> f64 {
        let mut diff = &self.coeffs - &other.coeffs;
        for c in diff.rows_mut(0, self.dim).iter_mut() {
            *c -= c.round();
        }
        diff.norm()
    }

    /// Quaternion-valued expansion, for a single copy of `H`.
    pub fn to_expansion(&self, grid: &TorusGrid) -> Result<FieldExpansion> {
        if self.dim != 4 {
            return Err(FueterError::InvalidInput("only 4-component fields are quaternion valued".into()));
        }
        let q = |b: usize| Quaternion::from_array([0, 1, 2, 3].map(|i| self.coeffs[b * 4 + i]));
        let mut terms = vec![TorusTerm { k: [0, 0, 0], trig: Trig::Const, coeff: q(0) }];
        for (t, &k) in grid.modes().iter().enumerate() {
            terms.push(TorusTerm { k, trig: Trig::Cos, coeff: q(2 * t + 1) });
            terms.push(TorusTerm { k, trig: Trig::Sin, coeff: q(2 * t + 2) });
        }
        Ok(FieldExpansion::Torus3(terms))
    }
}

/// Box-Muller.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let (a, b): (f64, f64) = (rng.random(), rng.random());
    (-2.0 * (1.0 - a).ln()).sqrt() * (2.0 * PI * b).cos()
}

/// The equation `∂_v f = ∇H(f)` discretised on a collocation grid.
#[derive(Debug, Clone)]
pub struct GalerkinProblem {
    grid: TorusGrid,
    hamiltonian: HamiltonianSpec,
    fueter: DMatrix<f64>,
    dim: usize,
}

impl GalerkinProblem {
    pub fn new(frame: &FrameSpec, hamiltonian: &HamiltonianSpec, n: usize) -> Result<Self> {
        if frame.manifold() != Manifold::Torus3 {
            return Err(FueterError::InvalidInput("the nonlinear solver works on T^3 only".into()));
        }
        hamiltonian.validate()?;
        let grid = TorusGrid::new(n)?;
        let dim = hamiltonian.dim();
        let size = grid.function_count() * dim;
        let mut fueter = DMatrix::zeros(size, size);
        for (t, &k) in grid.modes().iter().enumerate() {
            let block = t3_matrix(frame.matrix(), k);
            for copy in 0..hamiltonian.copies {
                for r in 0..8 {
                    for c in 0..8 {
                        let row = (2 * t + 1 + r / 4) * dim + 4 * copy + r % 4;
                        let col = (2 * t + 1 + c / 4) * dim + 4 * copy + c % 4;
                        fueter[(row, col)] = block[(r, c)];
                    }
                }
            }
        }
        Ok(Self { grid, hamiltonian: hamiltonian.clone(), fueter, dim })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn unknowns(&self) -> usize {
        self.fueter.nrows()
    }

    /// Matrix of `∂_v` on the coefficient vector.
    pub fn fueter(&self) -> &DMatrix<f64> {
        &self.fueter
    }

    fn field(&self, c: &DVector<f64>) -> GalerkinField {
        GalerkinField { dim: self.dim, coeffs: c.clone() }
    }

    fn values(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let rows = c.len() / self.dim;
        self.grid.basis() * DMatrix::from_row_slice(rows, self.dim, c.as_slice())
    }

    /// Discrete `L^2` projection of grid values (one row per point).
    fn project(&self, g: &DMatrix<f64>) -> DVector<f64> {
        let p = self.grid.basis().tr_mul(g) / self.grid.points().len() as f64;
        DVector::from_iterator(p.len(), (0..p.nrows()).flat_map(|b| (0..p.ncols()).map(move |q| (b, q))).map(|(b, q)| p[(b, q)]))
    }

    fn projected_gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        let v = self.values(c);
        let mut g = DMatrix::zeros(v.nrows(), self.dim);
        for (p, y) in self.grid.points().iter().enumerate() {
            let x: Vec<f64> = v.row(p).iter().copied().collect();
            for (q, gq) in self.hamiltonian.gradient(*y, &x).into_iter().enumerate() {
                g[(p, q)] = gq;
            }
        }
        self.project(&g)
    }

    /// `∂_v f - P ∇H(f)` on coefficients.
    pub fn residual(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.fueter * c - self.projected_gradient(c)
    }

    /// Largest grid value of the residual.
    pub fn residual_sup(&self, c: &DVector<f64>) -> f64 {
        let r = self.residual(c);
        self.values(&r).amax()
    }

    fn hessians(&self, c: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let v = self.values(c);
        self.grid
            .points()
            .iter()
            .enumerate()
            .map(|(p, y)| {
                let x: Vec<f64> = v.row(p).iter().copied().collect();
                self.hamiltonian.hessian(*y, &x)
            })
            .collect()
    }

    fn apply_linearization(&self, hess: &[DMatrix<f64>], v: &DVector<f64>) -> DVector<f64> {
        let vals = self.values(v);
        let mut g = DMatrix::zeros(vals.nrows(), self.dim);
        for (p, h) in hess.iter().enumerate() {
            let row = h * vals.row(p).transpose();
            g.row_mut(p).copy_from(&row.transpose());
        }
        &self.fueter * v - self.project(&g)
    }

    /// Jacobian of [`Self::residual`].
    pub fn jacobian(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let hess = self.hessians(c);
        let b = self.grid.basis();
        let (np, nf, d) = (b.nrows(), b.ncols(), self.dim);
        let mut j = self.fueter.clone();
        let w = 1.0 / np as f64;
        for (p, h) in hess.iter().enumerate() {
            for fa in 0..nf {
                let ba = b[(p, fa)] * w;
                if ba == 0.0 {
                    continue;
                }
                for fb in 0..nf {
                    let s = ba * b[(p, fb)];
                    for qa in 0..d {
                        for qb in 0..d {
                            j[(fa * d + qa, fb * d + qb)] -= s * h[(qa, qb)];
                        }
                    }
                }
            }
        }
        j
    }

    /// Discrete action `½ <f, ∂_v f> - mean H(y, f(y))`, whose gradient is
    /// the residual.
    pub fn action(&self, c: &DVector<f64>) -> f64 {
        let v = self.values(c);
        let mut h = 0.0;
        for (p, y) in self.grid.points().iter().enumerate() {
            let x: Vec<f64> = v.row(p).iter().copied().collect();
            h += self.hamiltonian.value(*y, &x);
        }
        0.5 * c.dot(&(&self.fueter * c)) - h / self.grid.points().len() as f64
    }

    /// Coefficient indices belonging to mode `t` (`0` is the constant).
    fn mode_indices(&self, t: usize) -> Vec<usize> {
        let d = self.dim;
        if t == 0 {
            (0..d).collect()
        } else {
            (0..2 * d).map(|l| (2 * t - 1 + l / d) * d + l % d).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60 }
    }
}

#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub field: GalerkinField,
    /// Largest grid value of `∂_v f - ∇H(f)` after projection.
    pub residual: f64,
    /// Smallest singular value of the linearization.
    pub sigma_min: f64,
    pub action: f64,
    pub iterations: usize,
}

impl CriticalPoint {
    pub fn is_nondegenerate(&self, tol: f64) -> bool {
        self.sigma_min > tol
    }
}

fn newton_step(j: DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    let rhs = -r;
    if let Some(x) = j.clone().lu().solve(&rhs) {
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    j.svd(true, true).solve(&rhs, 1e-12).unwrap_or_else(|_| DVector::zeros(r.len()))
}

/// Damped Newton on the Fourier coefficients from `seed`.
pub fn solve_critical(problem: &GalerkinProblem, seed: &GalerkinField, options: NewtonOptions) -> Result<CriticalPoint> {
    if seed.dim != problem.dim() || seed.coeffs.len() != problem.unknowns() {
        return Err(FueterError::InvalidInput("seed does not match the discretisation".into()));
    }
    let mut c = seed.coeffs.clone();
    let mut r = problem.residual(&c);
    let mut merit = r.norm();
    let mut best = problem.residual_sup(&c);
    let mut iterations = 0;
    while best >= options.tol {
        if iterations == options.max_iter || !merit.is_finite() {
            return Err(FueterError::NoConvergence { residual: best, iterations });
        }
        let step = newton_step(problem.jacobian(&c), &r);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..LINE_SEARCH_STEPS {
            let trial = &c + &step * lambda;
            let rt = problem.residual(&trial);
            let mt = rt.norm();
            if mt.is_finite() && mt < (1.0 - 1e-4 * lambda) * merit {
                c = trial;
                r = rt;
                merit = mt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        iterations += 1;
        if !accepted {
            return Err(FueterError::NoConvergence { residual: best, iterations });
        }
        best = problem.residual_sup(&c);
    }
    let sv = problem.jacobian(&c).singular_values();
    let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CriticalPoint { action: problem.action(&c), field: problem.field(&c), residual: best, sigma_min, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultistartOptions {
    pub random_starts: usize,
    pub seed: u64,
    /// Size of the nonconstant coefficients of random starts.
    pub random_amplitude: f64,
    pub sigma_tol: f64,
    pub dedupe_tol: f64,
    pub newton: NewtonOptions,
}

impl Default for MultistartOptions {
    fn default() -> Self {
        Self {
            random_starts: 32,
            seed: 0,
            random_amplitude: 0.05,
            sigma_tol: 1e-8,
            dedupe_tol: 1e-6,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultistartReport {
    /// Distinct nondegenerate solutions, means reduced into `[0, 1)`.
    pub solutions: Vec<CriticalPoint>,
    /// Distinct degenerate solutions.
    pub degenerate: Vec<CriticalPoint>,
    pub starts: usize,
    pub failures: usize,
}

impl MultistartReport {
    /// Number of solutions, or `None` when a degenerate one was met.
    pub fn count(&self) -> Option<usize> {
        self.degenerate.is_empty().then_some(self.solutions.len())
    }
}

fn lattice_starts(grid: &TorusGrid, dim: usize) -> Vec<GalerkinField> {
    let total = 3usize.pow(dim as u32);
    (0..total)
        .map(|mut code| {
            let x: Vec<f64> = (0..dim)
                .map(|_| {
                    let v = (code % 3) as f64 / 3.0;
                    code /= 3;
                    v
                })
                .collect();
            GalerkinField::constant(grid, &x)
        })
        .collect()
}

/// Newton from the `3^dim` lattice constants and `random_starts` random
/// fields, deduplicated modulo `Z^dim`.
pub fn multistart(problem: &GalerkinProblem, options: &MultistartOptions) -> MultistartReport {
    let grid = problem.grid();
    let dim = problem.dim();
    let mut starts = lattice_starts(grid, dim);
    for i in 0..options.random_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(i as u64));
        starts.push(GalerkinField::random(grid, dim, options.random_amplitude, &mut rng));
    }
    let results: Vec<Result<CriticalPoint>> =
        starts.par_iter().map(|s| solve_critical(problem, s, options.newton)).collect();
    let mut report =
        MultistartReport { solutions: Vec::new(), degenerate: Vec::new(), starts: starts.len(), failures: 0 };
    for res in results {
        let Ok(mut cp) = res else {
            report.failures += 1;
            continue;
        };
        cp.field = cp.field.reduced();
        let list = if cp.is_nondegenerate(options.sigma_tol) { &mut report.solutions } else { &mut report.degenerate };
        if list.iter().all(|o| o.field.lattice_distance(&cp.field) > options.dedupe_tol) {
            list.push(cp);
        }
    }
    report
}

/// Count of distinct solutions, failing if a degenerate one is met.
pub fn arnold_count(problem: &GalerkinProblem, options: &MultistartOptions) -> Result<usize> {
    let report = multistart(problem, options);
    match report.degenerate.first() {
        Some(cp) => Err(FueterError::DegenerateSolution { sigma_min: cp.sigma_min }),
        None => Ok(report.solutions.len()),
    }
}

/// Trajectory problem on `[-S, S]` with `nodes` equally spaced slices.
#[derive(Debug, Clone)]
pub struct FloerProblem {
    pub galerkin: GalerkinProblem,
    pub minus: GalerkinField,
    pub plus: GalerkinField,
    pub half_length: f64,
    pub nodes: usize,
    /// Endpoint residual bound.
    pub tol_crit: f64,
    /// Bound on the discrete `L^2` residual of the space-time system.
    pub tol: f64,
    pub max_newton: usize,
}

impl FloerProblem {
    pub fn new(galerkin: GalerkinProblem, minus: GalerkinField, plus: GalerkinField, half_length: f64, nodes: usize) -> Self {
        Self { galerkin, minus, plus, half_length, nodes, tol_crit: 1e-8, tol: 1e-9, max_newton: 30 }
    }

    fn step(&self) -> f64 {
        2.0 * self.half_length / (self.nodes - 1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub s: Vec<f64>,
    /// Coefficients of `u(s_j, ·)`.
    pub slices: Vec<DVector<f64>>,
    pub action: Vec<f64>,
    /// `|∂_s u|^2` integrated over `T^3` at each slice.
    pub energy_density: Vec<f64>,
    pub action_minus: f64,
    pub action_plus: f64,
    /// Discrete `L^2` norm of the space-time residual.
    pub residual: f64,
    pub newton_iterations: usize,
    pub krylov_iterations: usize,
}

impl Trajectory {
    /// `∫∫ |∂_s u|^2` from slice differences.
    pub fn energy(&self) -> f64 {
        self.slices
            .windows(2)
            .zip(self.s.windows(2))
            .map(|(u, s)| (&u[1] - &u[0]).norm_squared() / (s[1] - s[0]))
            .sum()
    }

    /// Largest increase of the action between consecutive slices.
    pub fn max_action_increase(&self) -> f64 {
        self.action.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `|E(u) - (A(f-) - A(f+))| / max(1, E(u))`.
pub fn floer_energy_residual(t: &Trajectory) -> f64 {
    let e = t.energy();
    (e - (t.action_minus - t.action_plus)).abs() / e.max(1.0)
}

/// Per-mode pieces of the boundary conditions.
struct ModeData {
    indices: Vec<usize>,
    /// Rows annihilating the unstable directions at `f-`.
    bc_minus: DMatrix<f64>,
    /// Rows annihilating the stable directions at `f+`.
    bc_plus: DMatrix<f64>,
}

struct SpaceTime<'a> {
    p: &'a FloerProblem,
    modes: Vec<ModeData>,
    /// Phase normal on the constant mode.
    phase: DVector<f64>,
    phase_value: f64,
    n: usize,
    size: usize,
    mid: usize,
    h: f64,
}

impl<'a> SpaceTime<'a> {
    fn new(p: &'a FloerProblem) -> Result<Self> {
        let g = &p.galerkin;
        let a_minus = g.jacobian(&p.minus.coeffs);
        let a_plus = g.jacobian(&p.plus.coeffs);
        let mut modes = Vec::new();
        for t in 0..=g.grid().modes().len() {
            let indices = g.mode_indices(t);
            let block = |a: &DMatrix<f64>| DMatrix::from_fn(indices.len(), indices.len(), |r, c| a[(indices[r], indices[c])]);
            let em = sym_eigen(&block(&a_minus));
            let ep = sym_eigen(&block(&a_plus));
            if em.values.iter().chain(ep.values.iter()).any(|v| v.abs() < EIGEN_FLOOR) {
                return Err(FueterError::InvalidInput("an endpoint linearization has a kernel".into()));
            }
            let pick = |e: &crate::linalg::SymEigen, positive: bool| {
                let cols: Vec<usize> = (0..e.values.len()).filter(|&i| (e.values[i] > 0.0) == positive).collect();
                DMatrix::from_fn(cols.len(), indices.len(), |r, c| e.vectors[(c, cols[r])])
            };
            let bc_minus = pick(&em, true);
            let bc_plus = pick(&ep, false);
            let need = indices.len() - usize::from(t == 0);
            if bc_minus.nrows() + bc_plus.nrows() != need {
                return Err(FueterError::InvalidInput(format!(
                    "endpoints are not an index-one pair in mode {t}: {} unstable at f-, {} stable at f+, {} unknowns",
                    bc_minus.nrows(),
                    bc_plus.nrows(),
                    indices.len()
                )));
            }
            modes.push(ModeData { indices, bc_minus, bc_plus });
        }
        let fm = DVector::from_vec(p.minus.mean());
        let fp = DVector::from_vec(p.plus.mean());
        let phase = &fm - &fp;
        if phase.norm() < 1e-8 {
            return Err(FueterError::InvalidInput("endpoints have the same mean; no phase condition".into()));
        }
        let phase_value = phase.dot(&((&fm + &fp) * 0.5));
        let n = p.nodes;
        let size = g.unknowns();
        Ok(Self { p, modes, phase, phase_value, n, size, mid: n / 2, h: p.step() })
    }

    fn total(&self) -> usize {
        self.n * self.size
    }

    fn slice<'b>(&self, u: &'b DVector<f64>, j: usize) -> nalgebra::DVectorView<'b, f64> {
        u.rows(j * self.size, self.size)
    }

    fn bc_offsets(&self) -> (Vec<usize>, Vec<usize>, usize) {
        let mut off = (self.n - 1) * self.size;
        let mut minus = Vec::new();
        for m in &self.modes {
            minus.push(off);
            off += m.bc_minus.nrows();
        }
        let mut plus = Vec::new();
        for m in &self.modes {
            plus.push(off);
            off += m.bc_plus.nrows();
        }
        (minus, plus, off)
    }

    fn gather(m: &ModeData, v: &nalgebra::DVectorView<f64>) -> DVector<f64> {
        DVector::from_iterator(m.indices.len(), m.indices.iter().map(|&i| v[i]))
    }

    /// Interval rows from per-slice values `w_j` of the operator part.
    fn assemble(&self, u: &DVector<f64>, w: &[DVector<f64>], affine: bool) -> DVector<f64> {
        let mut r = DVector::zeros(self.total());
        for j in 0..self.n - 1 {
            let row = (self.slice(u, j + 1) - self.slice(u, j)) / self.h + (&w[j] + &w[j + 1]) * 0.5;
            r.rows_mut(j * self.size, self.size).copy_from(&row);
        }
        let (om, op, ophase) = self.bc_offsets();
        let first = self.slice(u, 0);
        let last = self.slice(u, self.n - 1);
        for (t, m) in self.modes.iter().enumerate() {
            let mut a = Self::gather(m, &first);
            let mut b = Self::gather(m, &last);
            if affine {
                a -= Self::gather(m, &self.p.minus.coeffs.rows(0, self.size));
                b -= Self::gather(m, &self.p.plus.coeffs.rows(0, self.size));
            }
            r.rows_mut(om[t], m.bc_minus.nrows()).copy_from(&(&m.bc_minus * a));
            r.rows_mut(op[t], m.bc_plus.nrows()).copy_from(&(&m.bc_plus * b));
        }
        let d = self.p.galerkin.dim();
        let centre = self.slice(u, self.mid).rows(0, d).dot(&self.phase);
        r[ophase] = if affine { centre - self.phase_value } else { centre };
        r
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let g = &self.p.galerkin;
        let w: Vec<DVector<f64>> =
            (0..self.n).into_par_iter().map(|j| g.residual(&self.slice(u, j).into_owned())).collect();
        self.assemble(u, &w, true)
    }

    /// Discrete `L^2` norm: interval rows weighted by the step.
    fn norm(&self, r: &DVector<f64>) -> f64 {
        let split = (self.n - 1) * self.size;
        (self.h * r.rows(0, split).norm_squared() + r.rows(split, r.len() - split).norm_squared()).sqrt()
    }

    fn apply(&self, hess: &[Vec<DMatrix<f64>>], v: &DVector<f64>) -> DVector<f64> {
        let g = &self.p.galerkin;
        let w: Vec<DVector<f64>> = (0..self.n)
            .into_par_iter()
            .map(|j| g.apply_linearization(&hess[j], &self.slice(v, j).into_owned()))
            .collect();
        self.assemble(v, &w, false)
    }

    /// Banded factorisations of the mode-decoupled system with the
    /// `y`-averaged Hessian of each slice.
    fn preconditioner(&self, hess: &[Vec<DMatrix<f64>>]) -> Result<Vec<BandedLu>> {
        let g = &self.p.galerkin;
        let d = g.dim();
        let np = g.grid().points().len() as f64;
        let mean: Vec<DMatrix<f64>> =
            hess.iter().map(|hs| hs.iter().fold(DMatrix::zeros(d, d), |a, h| a + h) / np).collect();
        self.modes
            .par_iter()
            .enumerate()
            .map(|(t, m)| {
                let k = m.indices.len();
                let dt = DMatrix::from_fn(k, k, |r, c| g.fueter()[(m.indices[r], m.indices[c])]);
                let ops: Vec<DMatrix<f64>> = mean
                    .iter()
                    .map(|hb| {
                        let mut a = dt.clone();
                        for r in 0..k {
                            for c in 0..k {
                                if r / d == c / d {
                                    a[(r, c)] -= hb[(r % d, c % d)];
                                }
                            }
                        }
                        a
                    })
                    .collect();
                let band = 2 * k + 1;
                let mut lu = BandedLu::zeros(self.n * k, band, band);
                let layout = ModeLayout::new(self, t);
                for (i, row) in m.bc_minus.row_iter().enumerate() {
                    for c in 0..k {
                        lu.add(i, c, row[c]);
                    }
                }
                for j in 0..self.n - 1 {
                    for r in 0..k {
                        let row = layout.interval_row(j, r);
                        for c in 0..k {
                            let id = if r == c { 1.0 / self.h } else { 0.0 };
                            lu.add(row, j * k + c, -id + 0.5 * ops[j][(r, c)]);
                            lu.add(row, (j + 1) * k + c, id + 0.5 * ops[j + 1][(r, c)]);
                        }
                    }
                }
                if t == 0 {
                    for c in 0..k {
                        lu.add(layout.phase_row(), self.mid * k + c, self.phase[c]);
                    }
                }
                for (i, row) in m.bc_plus.row_iter().enumerate() {
                    for c in 0..k {
                        lu.add(layout.plus_row(i), (self.n - 1) * k + c, row[c]);
                    }
                }
                lu.factor().ok_or(FueterError::InvalidInput("singular preconditioner".into()))
            })
            .collect()
    }

    fn precondition(&self, lus: &[BandedLu], r: &DVector<f64>) -> DVector<f64> {
        let (om, op, ophase) = self.bc_offsets();
        let parts: Vec<Vec<f64>> = self
            .modes
            .par_iter()
            .enumerate()
            .map(|(t, m)| {
                let k = m.indices.len();
                let layout = ModeLayout::new(self, t);
                let mut b = vec![0.0; self.n * k];
                for i in 0..m.bc_minus.nrows() {
                    b[i] = r[om[t] + i];
                }
                for j in 0..self.n - 1 {
                    for (l, &gi) in m.indices.iter().enumerate() {
                        b[layout.interval_row(j, l)] = r[j * self.size + gi];
                    }
                }
                if t == 0 {
                    b[layout.phase_row()] = r[ophase];
                }
                for i in 0..m.bc_plus.nrows() {
                    b[layout.plus_row(i)] = r[op[t] + i];
                }
                lus[t].solve_in_place(&mut b);
                b
            })
            .collect();
        let mut z = DVector::zeros(self.total());
        for (m, x) in self.modes.iter().zip(parts) {
            let k = m.indices.len();
            for j in 0..self.n {
                for (l, &gi) in m.indices.iter().enumerate() {
                    z[j * self.size + gi] = x[j * k + l];
                }
            }
        }
        z
    }
}

/// Row numbering of one mode's banded system: unstable conditions at `f-`,
/// interval rows in order with the phase row after the interval ending at
/// the middle slice, then stable conditions at `f+`.
struct ModeLayout {
    k: usize,
    p: usize,
    mid: usize,
    with_phase: bool,
    n: usize,
}

impl ModeLayout {
    fn new(st: &SpaceTime, t: usize) -> Self {
        let m = &st.modes[t];
        Self { k: m.indices.len(), p: m.bc_minus.nrows(), mid: st.mid, with_phase: t == 0, n: st.n }
    }

    fn interval_row(&self, j: usize, l: usize) -> usize {
        self.p + j * self.k + l + usize::from(self.with_phase && j >= self.mid)
    }

    fn phase_row(&self) -> usize {
        self.p + self.mid * self.k
    }

    fn plus_row(&self, i: usize) -> usize {
        self.p + (self.n - 1) * self.k + usize::from(self.with_phase) + i
    }
}

/// Connecting trajectory from `f-` to `f+` as a boundary value problem in `s`:
/// trapezoidal differences on `[-S, S]`, projection conditions onto the
/// stable and unstable spaces of the endpoint linearizations, a phase
/// condition at `s = 0`, and Newton-GMRES with a mode-decoupled banded
/// preconditioner.
pub fn floer_trajectory(p: &FloerProblem) -> Result<Trajectory> {
    let g = &p.galerkin;
    let size = g.unknowns();
    if p.minus.coeffs.len() != size || p.plus.coeffs.len() != size {
        return Err(FueterError::InvalidInput("endpoint fields do not match the discretisation".into()));
    }
    if p.nodes < 3 || p.nodes % 2 == 0 || !(p.half_length > 0.0) {
        return Err(FueterError::InvalidInput("need an odd node count ≥ 3 and S > 0".into()));
    }
    for (name, f) in [("f-", &p.minus), ("f+", &p.plus)] {
        let r = g.residual_sup(&f.coeffs);
        if !(r < p.tol_crit) {
            return Err(FueterError::InvalidInput(format!("{name} has residual {r:.3e}, above {:.1e}", p.tol_crit)));
        }
    }
    let a_minus = g.action(&p.minus.coeffs);
    let a_plus = g.action(&p.plus.coeffs);
    let s: Vec<f64> = (0..p.nodes).map(|j| -p.half_length + j as f64 * p.step()).collect();
    if (&p.minus.coeffs - &p.plus.coeffs).amax() == 0.0 {
        let density = vec![0.0; p.nodes];
        return Ok(Trajectory {
            slices: vec![p.minus.coeffs.clone(); p.nodes],
            action: vec![a_minus; p.nodes],
            s,
            energy_density: density,
            action_minus: a_minus,
            action_plus: a_plus,
            residual: 0.0,
            newton_iterations: 0,
            krylov_iterations: 0,
        });
    }
    if !(a_minus > a_plus) {
        return Err(FueterError::InvalidInput(format!(
            "action must decrease along the flow: A(f-) = {a_minus:.6e}, A(f+) = {a_plus:.6e}"
        )));
    }
    let st = SpaceTime::new(p)?;
    let mut u = DVector::zeros(st.total());
    for (j, &sj) in s.iter().enumerate() {
        let w = 0.5 * (1.0 - sj.tanh());
        let slice = &p.plus.coeffs + (&p.minus.coeffs - &p.plus.coeffs) * w;
        u.rows_mut(j * size, size).copy_from(&slice);
    }
    let mut r = st.residual(&u);
    let mut norm = st.norm(&r);
    let mut newton = 0;
    let mut krylov = 0;
    while norm >= p.tol {
        if newton == p.max_newton {
            return Err(FueterError::NoConvergence { residual: norm, iterations: newton });
        }
        let hess: Vec<Vec<DMatrix<f64>>> =
            (0..st.n).into_par_iter().map(|j| g.hessians(&st.slice(&u, j).into_owned())).collect();
        let lus = st.preconditioner(&hess)?;
        let rhs = -&r;
        let solve = gmres(|v| st.apply(&hess, v), |v| st.precondition(&lus, v), &rhs, 1e-8 * rhs.norm(), 40, 400);
        krylov += solve.iterations;
        let merit = r.norm();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..LINE_SEARCH_STEPS {
            let trial = &u + &solve.x * lambda;
            let rt = st.residual(&trial);
            if rt.norm() < (1.0 - 1e-4 * lambda) * merit {
                u = trial;
                r = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        newton += 1;
        if !accepted {
            return Err(FueterError::NoConvergence { residual: norm, iterations: newton });
        }
        norm = st.norm(&r);
    }
    let slices: Vec<DVector<f64>> = (0..st.n).map(|j| st.slice(&u, j).into_owned()).collect();
    let action = slices.iter().map(|c| g.action(c)).collect();
    let energy_density = slices.iter().map(|c| g.residual(c).norm_squared()).collect();
    Ok(Trajectory {
        s,
        slices,
        action,
        energy_density,
        action_minus: a_minus,
        action_plus: a_plus,
        residual: norm,
        newton_iterations: newton,
        krylov_iterations: krylov,
    })
}
