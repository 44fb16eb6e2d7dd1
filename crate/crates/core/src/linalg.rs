//! Thin wrappers over nalgebra used by the tensor-train kernels.
//!
//! All SVDs returned here have singular values sorted in descending order and
//! a fixed sign convention: the largest-magnitude entry of every left singular
//! vector is positive (first such entry on ties).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Thin SVD `a = u * diag(s) * vt`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
}

impl Svd {
    /// Keep the leading `rank` triplets.
    pub fn truncate(mut self, rank: usize) -> Self {
        let rank = rank.min(self.s.len());
        self.u = self.u.columns(0, rank).into_owned();
        self.vt = self.vt.rows(0, rank).into_owned();
        self.s.truncate(rank);
        self
    }
}

pub fn svd(a: &DMatrix<f64>) -> Result<Svd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(m, 0),
            s: Vec::new(),
            vt: DMatrix::zeros(0, n),
        });
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in SVD input".into()));
    }
    raw_svd(a).map(normalize)
}

fn raw_svd(a: &DMatrix<f64>) -> Result<Svd> {
    let (m, n) = a.shape();
    let fm = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let dec = fm
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD of a {m}x{n} matrix did not converge: {e:?}")))?;
    let (u, v, s) = (dec.U(), dec.V(), dec.S().column_vector());
    let k = m.min(n);
    let uu = DMatrix::from_fn(m, k, |i, j| u[(i, j)]);
    let vt = DMatrix::from_fn(k, n, |i, j| v[(j, i)]);
    let ss = (0..k).map(|i| s[i]).collect();
    Ok(sorted(uu, ss, vt))
}

fn sorted(u: DMatrix<f64>, s: Vec<f64>, vt: DMatrix<f64>) -> Svd {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let k = order.len();
    let mut us = DMatrix::zeros(u.nrows(), k);
    let mut vs = DMatrix::zeros(k, vt.ncols());
    let mut ss = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_row(dst, &vt.row(src));
        ss.push(s[src]);
    }
    Svd { u: us, s: ss, vt: vs }
}

fn normalize(mut d: Svd) -> Svd {
    for j in 0..d.s.len() {
        let col = d.u.column(j);
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs + 1e-14 * best_abs.max(0.0) {
                best = i;
                best_abs = v.abs();
            }
        }
        if col[best] < 0.0 {
            d.u.column_mut(j).neg_mut();
            d.vt.row_mut(j).neg_mut();
        }
    }
    d
}

/// Smallest rank whose discarded Frobenius tail is at most `delta`.
/// Never returns zero for a non-empty spectrum.
pub fn truncation_rank(s: &[f64], delta: f64) -> usize {
    if s.is_empty() {
        return 0;
    }
    let mut tail_sq = 0.0;
    let mut rank = s.len();
    for (i, v) in s.iter().enumerate().rev() {
        tail_sq += v * v;
        if tail_sq.sqrt() <= delta {
            rank = i;
        } else {
            break;
        }
    }
    rank.max(1)
}

/// Thin QR with non-negative diagonal of R. Returns `(q, r)` with `q` of shape
/// m x k and `r` of shape k x n, k = min(m, n).
pub fn qr_positive(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return (DMatrix::zeros(m, 0), DMatrix::zeros(0, n));
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    (q, r)
}

/// Row-major flattening of a matrix.
pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Solve `x * a = b` for square `a` (i.e. `x = b * a^{-1}`).
pub fn right_solve(b: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.transpose().lu();
    let xt = lu
        .solve(&b.transpose())
        .ok_or_else(|| Error::DegeneratePivot("singular pivot submatrix".into()))?;
    Ok(xt.transpose())
}
