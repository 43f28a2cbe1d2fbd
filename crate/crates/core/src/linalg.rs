//! Dense linear-algebra helpers shared by the spectral and flow modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::quat::Axis;

/// Eigen-decomposition of a real symmetric matrix with eigenvalues in
/// ascending order and orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    if n == 0 {
        return SymEigen { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0) };
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SymEigen { values, vectors }
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Kronecker product `a (x) b`, with `a` indexing the slow coordinate.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Left multiplication by the unit of `axis`, as a 4x4 real matrix.
pub fn j_matrix(axis: Axis) -> DMatrix<f64> {
    let m = axis.unit().left_matrix();
    DMatrix::from_fn(4, 4, |r, c| m[r][c])
}

/// Real form `[[Re, -Im], [Im, Re]]` of a complex matrix.
pub fn realify(c: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, k) = c.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * k);
    for i in 0..r {
        for j in 0..k {
            let z = c[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + k)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + k)] = z.re;
        }
    }
    out
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// `max |A - A^T|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m - m.transpose()))
}

/// Block-diagonal assembly of square matrices.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}


/// LU factorisation with partial pivoting of a band matrix with `kl` sub- and
/// `ku` super-diagonals. Storage is column-wise: `A[i, j]` lives at
/// `ab[j * ld + kl + ku + i - j]`, leaving `kl` extra rows for pivot fill.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ab: vec![0.0; ld * n], pivots: Vec::new() }
    }

    fn ld(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        j * self.ld() + self.kl + self.ku + i - j
    }

    /// Adds `v` to `A[i, j]`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i <= j + self.kl && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    /// Factorises in place. Returns `None` on an exactly zero pivot.
    pub fn factor(mut self) -> Option<Self> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut pivots = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = 0.0;
            for r in 0..=km {
                let v = self.ab[self.slot(j + r, j)].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            pivots[j] = j + jp;
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let (a, b) = (self.slot(j, c), self.slot(j + jp, c));
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[self.slot(j, j)];
            for r in 1..=km {
                let s = self.slot(j + r, j);
                self.ab[s] /= piv;
            }
            for c in j + 1..=ju {
                let top = self.ab[self.slot(j, c)];
                if top == 0.0 {
                    continue;
                }
                for r in 1..=km {
                    let l = self.ab[self.slot(j + r, j)];
                    let s = self.slot(j + r, c);
                    self.ab[s] -= l * top;
                }
            }
        }
        self.pivots = pivots;
        Some(self)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for j in 0..n {
            b.swap(j, self.pivots[j]);
            let km = kl.min(n - 1 - j);
            for r in 1..=km {
                b[j + r] -= self.ab[self.slot(j + r, j)] * b[j];
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.slot(j, j)];
            let lo = j.saturating_sub(kl + ku);
            for i in lo..j {
                b[i] -= self.ab[self.slot(i, j)] * b[j];
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub x: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Restarted GMRES with right preconditioning for `A x = b`, started at zero.
/// Stops when `|b - A x| <= tol` or after `max_iter` inner steps.
pub fn gmres<A, M>(apply: A, precondition: M, b: &DVector<f64>, tol: f64, restart: usize, max_iter: usize) -> KrylovResult
where
    A: Fn(&DVector<f64>) -> DVector<f64>,
    M: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = b.len();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut beta = r.norm();
    let mut iterations = 0;
    let restart = restart.max(1);
    while beta > tol && iterations < max_iter {
        let mut v: Vec<DVector<f64>> = vec![&r / beta];
        let mut z: Vec<DVector<f64>> = Vec::new();
        let mut h = DMatrix::<f64>::zeros(restart + 1, restart);
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart && iterations < max_iter {
            let zk = precondition(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            for i in 0..=k {
                let hik = w.dot(&v[i]);
                h[(i, k)] = hik;
                w.axpy(-hik, &v[i], 1.0);
            }
            let wn = w.norm();
            h[(k + 1, k)] = wn;
            for i in 0..k {
                let t = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let den = h[(k, k)].hypot(h[(k + 1, k)]);
            (cs[k], sn[k]) = if den == 0.0 { (1.0, 0.0) } else { (h[(k, k)] / den, h[(k + 1, k)] / den) };
            h[(k, k)] = den;
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            if g[k].abs() <= tol || wn == 0.0 {
                break;
            }
            v.push(w / wn);
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[(i, j)] * y[j];
            }
            y[i] = s / h[(i, i)];
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.axpy(*yi, zi, 1.0);
        }
        r = b - apply(&x);
        beta = r.norm();
        if k == 0 {
            break;
        }
    }
    KrylovResult { x, residual: beta, iterations }
}
