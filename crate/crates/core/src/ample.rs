//! Nondegenerate linear data `(S, L)` and the convex decomposition of the
//! affine slice `{L : L|_E = λ}` with `E = {x_1 = 0}`.
//!
//! `S` is a skew bilinear map `R^3 x R^3 -> R^3` stored by `S_23, S_31, S_12`,
//! and `L(u)v = Σ u_i v_j L_ij`. The pair is nondegenerate when the vectors
//! `τ(u, v) = S(u, v) + L(u)v - L(v)u` span `R^3`.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FueterError, Result};

/// Relative size below which a determinant counts as zero.
const DET_TOL: f64 = 1e-12;
/// Relative singular-value floor of the span test.
const SPAN_TOL: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpleData {
    /// `[S_23, S_31, S_12]`.
    pub s: [Vector3<f64>; 3],
    /// `l[i][j] = L_{i+1, j+1}`.
    pub l: [[Vector3<f64>; 3]; 3],
}

impl AmpleData {
    pub fn new(s: [Vector3<f64>; 3], l: [[Vector3<f64>; 3]; 3]) -> Self {
        Self { s, l }
    }

    pub fn canonical() -> Self {
        Self { s: [Vector3::x(), Vector3::y(), Vector3::z()], l: [[Vector3::zeros(); 3]; 3] }
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut v = || Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let s = [v(), v(), v()];
        let l = [[v(), v(), v()], [v(), v(), v()], [v(), v(), v()]];
        Self { s, l }
    }

    /// `S(e_i, e_j)` for `i, j` in `0..3`.
    pub fn s_entry(&self, i: usize, j: usize) -> Vector3<f64> {
        match (i, j) {
            (1, 2) => self.s[0],
            (2, 0) => self.s[1],
            (0, 1) => self.s[2],
            (2, 1) => -self.s[0],
            (0, 2) => -self.s[1],
            (1, 0) => -self.s[2],
            _ => Vector3::zeros(),
        }
    }

    /// `S(u, v)`.
    pub fn s_apply(&self, u: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        let mut out = Vector3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out += self.s_entry(i, j) * (u[i] * v[j]);
            }
        }
        out
    }

    /// `L(u) v`.
    pub fn l_apply(&self, u: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        let mut out = Vector3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out += self.l[i][j] * (u[i] * v[j]);
            }
        }
        out
    }

    /// `τ(u, v) = S(u, v) + L(u)v - L(v)u`.
    pub fn torsion(&self, u: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        self.s_apply(u, v) + self.l_apply(u, v) - self.l_apply(v, u)
    }

    /// `[τ_23, τ_31, τ_12]` with `τ_jk = S_jk + L_jk - L_kj`.
    pub fn tau(&self) -> [Vector3<f64>; 3] {
        let t = |j: usize, k: usize| self.s_entry(j, k) + self.l[j][k] - self.l[k][j];
        [t(1, 2), t(2, 0), t(0, 1)]
    }

    pub fn determinant(&self) -> f64 {
        let [a, b, c] = self.tau();
        Matrix3::from_columns(&[a, b, c]).determinant()
    }

    /// Rows `L_2j, L_3j`, fixed by the restriction to `E`.
    pub fn restriction(&self) -> [[Vector3<f64>; 3]; 2] {
        [self.l[1], self.l[2]]
    }

    /// Change of basis `u = Q u'` with `Q` orthogonal and `det Q = 1`.
    pub fn rotated(&self, q: &Matrix3<f64>) -> Self {
        let qt = q.transpose();
        let ei = |i: usize| q.column(i).into_owned();
        let mut s = [Vector3::zeros(); 3];
        for (slot, (i, j)) in [(1, 2), (2, 0), (0, 1)].into_iter().enumerate() {
            s[slot] = qt * self.s_apply(&ei(i), &ei(j));
        }
        let mut l = [[Vector3::zeros(); 3]; 3];
        for (i, row) in l.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = qt * self.l_apply(&ei(i), &ei(j));
            }
        }
        Self { s, l }
    }
}

/// Sign of the determinant of `(τ_23, τ_31, τ_12)`: `0` when the data is
/// degenerate, `±1` for the two components.
pub fn is_nondegenerate(d: &AmpleData) -> i8 {
    let t = d.tau();
    let scale = t.iter().map(|v| v.norm()).product::<f64>();
    let det = d.determinant();
    if det.abs() <= DET_TOL * scale || det == 0.0 {
        0
    } else if det > 0.0 {
        1
    } else {
        -1
    }
}

/// Brute-force span test on `τ(u, v)` over basis pairs and `samples` random
/// pairs.
pub fn nondegenerate_oracle<R: Rng>(d: &AmpleData, samples: usize, rng: &mut R) -> bool {
    let basis = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut vecs = Vec::new();
    for u in &basis {
        for v in &basis {
            vecs.push(d.torsion(u, v));
        }
    }
    for _ in 0..samples {
        let mut r = || Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (u, v) = (r(), r());
        vecs.push(d.torsion(&u, &v));
    }
    let m = nalgebra::DMatrix::from_fn(vecs.len(), 3, |r, c| vecs[r][c]);
    let sv = m.singular_values();
    let top = sv.max();
    top > 0.0 && sv.min() > SPAN_TOL * top
}

/// Rotation `Q` with first column the unit normal of `E`, so that
/// `AmpleData::rotated(Q)` puts `E` at `{x_1 = 0}`.
pub fn plane_basis(normal: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let n = normal.try_normalize(1e-14).ok_or(FueterError::InvalidInput("plane normal vanishes".into()))?;
    let (x, y) = complete(&n);
    Ok(Matrix3::from_columns(&[n, x, y]))
}

/// Orthonormal `x, y` with `(a/|a|, x, y)` positively oriented.
fn complete(a: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = a.normalize();
    let k = (0..3).min_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap_or(0);
    let e = Vector3::ith(k, 1.0);
    let x = (e - a * a.dot(&e)).normalize();
    (x, a.cross(&x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub first: AmpleData,
    pub second: AmpleData,
    pub t: f64,
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub det_first: f64,
    pub det_second: f64,
}

impl Decomposition {
    /// Largest entry of `(L' + L'')/2 - L`.
    pub fn midpoint_error(&self, d: &AmpleData) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                let m = (self.first.l[i][j] + self.second.l[i][j]) * 0.5 - d.l[i][j];
                worst = worst.max(m.amax());
            }
        }
        worst
    }
}

fn shifted(d: &AmpleData, x: &Vector3<f64>, y: &Vector3<f64>, t: f64) -> AmpleData {
    let mut out = *d;
    out.l[0][1] = d.l[0][1] + y * t;
    out.l[0][2] = d.l[0][2] - x * t;
    out
}

/// `L', L''` in the slice through `d` with the requested determinant sign and
/// `L = (L' + L'')/2`. They differ from `L` only in `L_12, L_13`, by `±t y`
/// and `∓t x`; `t` doubles from 1 until both signed determinants are at
/// least 1 and nondecreasing in `t`.
pub fn convex_decompose(d: &AmpleData, sign: i8) -> Result<Decomposition> {
    if sign != 1 && sign != -1 {
        return Err(FueterError::InvalidInput(format!("target sign must be ±1, got {sign}")));
    }
    let a = d.tau()[0];
    if a.norm() == 0.0 {
        return Err(FueterError::EmptyIntersection);
    }
    let (mut x, mut y) = complete(&a);
    if sign < 0 {
        std::mem::swap(&mut x, &mut y);
    }
    let sg = f64::from(sign);
    let [_, b, c] = d.tau();
    let det3 = |p: Vector3<f64>, q: Vector3<f64>, r: Vector3<f64>| Matrix3::from_columns(&[p, q, r]).determinant();
    // det(a, b ± t x, c ± t y) = det(a,b,c) ± t (det(a,x,c) + det(a,b,y)) + t^2 det(a,x,y)
    let lin = det3(a, x, c) + det3(a, b, y);
    let quad = det3(a, x, y);
    let mut t = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        let first = shifted(d, &x, &y, t);
        let second = shifted(d, &x, &y, -t);
        let (d1, d2) = (first.determinant(), second.determinant());
        let slope1 = lin + 2.0 * t * quad;
        let slope2 = -lin + 2.0 * t * quad;
        if sg * d1 >= 1.0 && sg * d2 >= 1.0 && sg * slope1 >= 0.0 && sg * slope2 >= 0.0 {
            return Ok(Decomposition { first, second, t, x, y, det_first: d1, det_second: d2 });
        }
        t *= 2.0;
    }
    Err(FueterError::NoConvergence { residual: f64::NAN, iterations: MAX_DOUBLINGS })
}
