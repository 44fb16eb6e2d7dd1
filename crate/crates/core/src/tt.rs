//! Tensor-train format: cores, compression, rounding and arithmetic.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, qr_positive, to_row_major, truncation_rank};
use crate::tensor::{checked_numel, DenseTensor};

/// Relative Frobenius truncation target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationTol {
    pub epsilon: f64,
}

impl TruncationTol {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!("truncation tolerance must be >= 0, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub const fn exact() -> Self {
        Self { epsilon: 0.0 }
    }
}

/// One 3-way core of shape `(left, size, right)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    left: usize,
    size: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(left: usize, size: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || size == 0 || right == 0 {
            return Err(Error::InvalidInput(format!("core shape ({left},{size},{right}) has a zero extent")));
        }
        if data.len() != left * size * right {
            return Err(Error::Shape(format!(
                "core ({left},{size},{right}) needs {} values, got {}",
                left * size * right,
                data.len()
            )));
        }
        Ok(Self { left, size, right, data })
    }

    pub fn zeros(left: usize, size: usize, right: usize) -> Self {
        Self { left, size, right, data: vec![0.0; left * size * right] }
    }

    /// A `1 x n x 1` core holding a vector.
    pub fn from_vector(v: &[f64]) -> Self {
        Self { left: 1, size: v.len(), right: 1, data: v.to_vec() }
    }

    pub fn left(&self) -> usize {
        self.left
    }
    pub fn size(&self) -> usize {
        self.size
    }
    pub fn right(&self) -> usize {
        self.right
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.size, self.right)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.size + i) * self.right + b]
    }

    #[inline]
    pub fn at_mut(&mut self, a: usize, i: usize, b: usize) -> &mut f64 {
        &mut self.data[(a * self.size + i) * self.right + b]
    }

    /// The `left x right` matrix slice at mode index `i`.
    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.left, self.right, |a, b| self.at(a, i, b))
    }

    /// `(left*size) x right` unfolding.
    pub fn left_unfold(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.left * self.size, self.right, &self.data)
    }

    /// `left x (size*right)` unfolding.
    pub fn right_unfold(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.left, self.size * self.right, &self.data)
    }

    pub fn from_left_unfold(m: &DMatrix<f64>, left: usize, size: usize) -> Self {
        debug_assert_eq!(m.nrows(), left * size);
        Self { left, size, right: m.ncols(), data: to_row_major(m) }
    }

    pub fn from_right_unfold(m: &DMatrix<f64>, size: usize, right: usize) -> Self {
        debug_assert_eq!(m.ncols(), size * right);
        Self { left: m.nrows(), size, right, data: to_row_major(m) }
    }

    /// `mat * core` over the left rank index.
    pub fn mul_left(&self, mat: &DMatrix<f64>) -> Self {
        Self::from_right_unfold(&(mat * self.right_unfold()), self.size, self.right)
    }

    /// `core * mat` over the right rank index.
    pub fn mul_right(&self, mat: &DMatrix<f64>) -> Self {
        Self::from_left_unfold(&(self.left_unfold() * mat), self.left, self.size)
    }

    /// Swap the rank indices: `(a, i, b) -> (b, i, a)`.
    pub fn transposed(&self) -> Self {
        let mut out = Core::zeros(self.right, self.size, self.left);
        for a in 0..self.left {
            for i in 0..self.size {
                for b in 0..self.right {
                    *out.at_mut(b, i, a) = self.at(a, i, b);
                }
            }
        }
        out
    }

    /// Keep only the mode indices in `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut out = Core::zeros(self.left, idx.len(), self.right);
        for a in 0..self.left {
            for (p, &i) in idx.iter().enumerate() {
                for b in 0..self.right {
                    *out.at_mut(a, p, b) = self.at(a, i, b);
                }
            }
        }
        out
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.data.iter_mut().for_each(|v| *v *= c);
        self
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Tensor train: an ordered chain of cores with boundary ranks 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TtTensor {
    cores: Vec<Core>,
}

impl TtTensor {
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        check_chain(&cores)?;
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::Shape("boundary ranks must be 1".into()));
        }
        Ok(Self { cores })
    }

    /// Rank-one tensor from a list of vectors.
    pub fn rank_one(vectors: &[Vec<f64>]) -> Result<Self> {
        Self::from_cores(vectors.iter().map(|v| Core::from_vector(v)).collect())
    }

    /// All-ones tensor of rank 1.
    pub fn ones(mode_sizes: &[usize]) -> Result<Self> {
        Self::rank_one(&mode_sizes.iter().map(|&n| vec![1.0; n]).collect::<Vec<_>>())
    }

    /// Zero tensor of rank 1.
    pub fn zeros(mode_sizes: &[usize]) -> Result<Self> {
        Self::rank_one(&mode_sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>())
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<Core> {
        self.cores
    }

    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }

    pub fn ndim(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.size).collect()
    }

    /// `[r_0, r_1, ..., r_d]`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![self.cores[0].left];
        r.extend(self.cores.iter().map(|c| c.right));
        r
    }

    /// `[r_1, ..., r_{d-1}]`.
    pub fn internal_ranks(&self) -> Vec<usize> {
        let r = self.ranks();
        r[1..r.len() - 1].to_vec()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Number of stored parameters.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Dense TT-SVD with the tail truncation rule at `ε‖x‖/√(d−1)`.
    pub fn tt_svd(x: &DenseTensor, tol: TruncationTol) -> Result<Self> {
        let shape = x.shape().to_vec();
        if shape.is_empty() || x.is_empty() {
            return Err(Error::InvalidInput("TT-SVD of an empty tensor".into()));
        }
        let d = shape.len();
        if d == 1 {
            return Self::from_cores(vec![Core::from_vector(x.values())]);
        }
        let delta = tol.epsilon * x.norm() / ((d - 1) as f64).sqrt();
        let mut cores = Vec::with_capacity(d);
        let mut rest: usize = x.len();
        let mut r = 1usize;
        let mut c = DMatrix::from_row_slice(shape[0], rest / shape[0], x.values());
        for (k, &n) in shape.iter().enumerate().take(d - 1) {
            rest /= n;
            if k > 0 {
                c = DMatrix::from_row_slice(r * n, rest, &to_row_major(&c));
            }
            let s = linalg::svd(&c)?;
            let rank = truncation_rank(&s.s, delta);
            let s = s.truncate(rank);
            cores.push(Core::from_left_unfold(&s.u, r, n));
            let mut vt = s.vt;
            for (j, sv) in s.s.iter().enumerate() {
                vt.row_mut(j).scale_mut(*sv);
            }
            c = vt;
            r = rank;
        }
        cores.push(Core::new(r, shape[d - 1], 1, to_row_major(&c))?);
        Self::from_cores(cores)
    }

    /// Dense reconstruction.
    pub fn full(&self) -> Result<DenseTensor> {
        let shape = self.mode_sizes();
        checked_numel(&shape)?;
        let mut acc = self.cores[0].left_unfold();
        for core in &self.cores[1..] {
            // (prefix, r) x (r, n*r') -> (prefix, n*r'), then refold.
            let prod = &acc * core.right_unfold();
            let rows = prod.nrows() * core.size;
            acc = DMatrix::from_row_slice(rows, core.right, &to_row_major(&prod));
        }
        DenseTensor::new(shape, to_row_major(&acc))
    }

    /// Single entry.
    pub fn eval(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.cores.len());
        let mut v = vec![1.0];
        for (core, &i) in self.cores.iter().zip(idx) {
            let mut w = vec![0.0; core.right];
            for (a, va) in v.iter().enumerate() {
                if *va == 0.0 {
                    continue;
                }
                let base = (a * core.size + i) * core.right;
                for (b, wb) in w.iter_mut().enumerate() {
                    *wb += va * core.data[base + b];
                }
            }
            v = w;
        }
        v[0]
    }

    /// TT rounding: right-to-left QR sweep, then left-to-right truncated SVD.
    pub fn round(&self, tol: TruncationTol) -> Result<Self> {
        let d = self.cores.len();
        if d == 1 {
            return Ok(self.clone());
        }
        let (mut cores, r) = orthogonalize_right(&self.cores);
        // The chain is r * cores with r of shape 1 x 1.
        cores[0] = cores[0].mul_left(&r);
        let nrm = cores[0].norm();
        let delta = tol.epsilon * nrm / ((d - 1) as f64).sqrt();
        for k in 0..d - 1 {
            let m = cores[k].left_unfold();
            let s = linalg::svd(&m)?;
            let rank = truncation_rank(&s.s, delta);
            let s = s.truncate(rank);
            let (left, size) = (cores[k].left, cores[k].size);
            cores[k] = Core::from_left_unfold(&s.u, left, size);
            let mut svt = s.vt;
            for (j, sv) in s.s.iter().enumerate() {
                svt.row_mut(j).scale_mut(*sv);
            }
            cores[k + 1] = cores[k + 1].mul_left(&svt);
        }
        Self::from_cores(cores)
    }

    /// Elementwise sum; ranks add.
    pub fn add(&self, other: &TtTensor) -> Result<Self> {
        self.check_same_modes(other)?;
        let d = self.cores.len();
        if d == 1 {
            let data = self.cores[0].data.iter().zip(&other.cores[0].data).map(|(a, b)| a + b).collect();
            return Self::from_cores(vec![Core::new(1, self.cores[0].size, 1, data)?]);
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (a, b) = (&self.cores[k], &other.cores[k]);
            let n = a.size;
            let left = if k == 0 { 1 } else { a.left + b.left };
            let right = if k == d - 1 { 1 } else { a.right + b.right };
            let mut c = Core::zeros(left, n, right);
            let (ao, bo_l) = (0, if k == 0 { 0 } else { a.left });
            let bo_r = if k == d - 1 { 0 } else { a.right };
            for i in 0..n {
                for p in 0..a.left {
                    for q in 0..a.right {
                        *c.at_mut(ao + p, i, q) = a.at(p, i, q);
                    }
                }
                for p in 0..b.left {
                    for q in 0..b.right {
                        *c.at_mut(bo_l + p, i, bo_r + q) += b.at(p, i, q);
                    }
                }
            }
            cores.push(c);
        }
        Self::from_cores(cores)
    }

    /// `self + c * other`, no rounding.
    pub fn axpy(&self, c: f64, other: &TtTensor) -> Result<Self> {
        self.add(&other.scale(c))
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut cores = self.cores.clone();
        cores[0] = cores[0].clone().scaled(c);
        Self { cores }
    }

    /// Elementwise product; ranks multiply.
    pub fn hadamard(&self, other: &TtTensor) -> Result<Self> {
        self.check_same_modes(other)?;
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .map(|(a, b)| {
                let mut c = Core::zeros(a.left * b.left, a.size, a.right * b.right);
                for p in 0..a.left {
                    for q in 0..b.left {
                        for i in 0..a.size {
                            for s in 0..a.right {
                                let av = a.at(p, i, s);
                                for t in 0..b.right {
                                    *c.at_mut(p * b.left + q, i, s * b.right + t) = av * b.at(q, i, t);
                                }
                            }
                        }
                    }
                }
                c
            })
            .collect();
        Self::from_cores(cores)
    }

    /// Inner product without materialisation.
    pub fn dot(&self, other: &TtTensor) -> Result<f64> {
        self.check_same_modes(other)?;
        let mut w = DMatrix::from_element(1, 1, 1.0);
        for (a, b) in self.cores.iter().zip(&other.cores) {
            // w' = sum_i A_i^T w B_i
            let mut next = DMatrix::zeros(a.right, b.right);
            for i in 0..a.size {
                next += a.slice(i).transpose() * &w * b.slice(i);
            }
            w = next;
        }
        Ok(w[(0, 0)])
    }

    /// Frobenius norm via left orthogonalisation.
    pub fn norm(&self) -> f64 {
        let (_, r) = orthogonalize_left(&self.cores);
        r.norm()
    }

    /// Contract the trailing `in_modes` modes of `self` with all modes of `x`.
    /// The result carries the leading `out_modes` modes with the op's ranks.
    pub fn contract(&self, x: &TtTensor, out_modes: usize, in_modes: usize) -> Result<Self> {
        if out_modes + in_modes != self.cores.len() || out_modes == 0 {
            return Err(Error::Shape(format!(
                "operator has {} modes, cannot split as {out_modes} out + {in_modes} in",
                self.cores.len()
            )));
        }
        if x.cores.len() != in_modes || x.mode_sizes()[..] != self.mode_sizes()[out_modes..] {
            return Err(Error::Shape(format!(
                "operator input modes {:?} do not match state modes {:?}",
                &self.mode_sizes()[out_modes..],
                x.mode_sizes()
            )));
        }
        // w has shape (op rank, x rank), swept right to left.
        let mut w = DMatrix::from_element(1, 1, 1.0);
        for k in (0..in_modes).rev() {
            let a = &self.cores[out_modes + k];
            let b = &x.cores[k];
            // t = B * w^T over x's right rank: (b.left*n) x a.right
            let bw = b.left_unfold() * w.transpose();
            let mut next = DMatrix::zeros(a.left, b.left);
            for i in 0..a.size {
                let bi = DMatrix::from_fn(b.left, a.right, |c, e| bw[(c * b.size + i, e)]);
                next += a.slice(i) * bi.transpose();
            }
            w = next;
        }
        let mut cores = self.cores[..out_modes].to_vec();
        let last = cores.len() - 1;
        cores[last] = cores[last].mul_right(&w);
        Self::from_cores(cores)
    }

    /// Reverse the mode order.
    pub fn reverse(&self) -> Self {
        Self { cores: self.cores.iter().rev().map(Core::transposed).collect() }
    }

    /// Concatenate the modes of two trains (outer product).
    pub fn outer(&self, other: &TtTensor) -> Self {
        let mut cores = self.cores.clone();
        cores.extend(other.cores.iter().cloned());
        Self { cores }
    }

    /// Replace a mode by the listed indices (e.g. for slicing).
    pub fn select_mode(&self, k: usize, idx: &[usize]) -> Result<Self> {
        let mut cores = self.cores.clone();
        cores[k] = cores[k].select(idx);
        Self::from_cores(cores)
    }

    /// Reshape one mode of size `prod(factors)` into several modes, keeping
    /// row-major element order. Exact (rank growth absorbed by SVD at ε=0).
    pub fn split_mode(&self, k: usize, factors: &[usize]) -> Result<Self> {
        let c = &self.cores[k];
        if factors.iter().product::<usize>() != c.size {
            return Err(Error::Shape(format!("factors {factors:?} do not multiply to {}", c.size)));
        }
        let mut pieces = Vec::new();
        let mut r = c.left;
        // matrix rows (r, f1), cols (f2..fm, right)
        let mut m = DMatrix::from_row_slice(c.left * factors[0], c.data.len() / (c.left * factors[0]), &c.data);
        for (j, &f) in factors.iter().enumerate().take(factors.len().saturating_sub(1)) {
            if j > 0 {
                let rows = r * f;
                m = DMatrix::from_row_slice(rows, m.len() / rows, &to_row_major(&m));
            }
            let s = linalg::svd(&m)?;
            let rank = truncation_rank(&s.s, 0.0);
            let s = s.truncate(rank);
            pieces.push(Core::from_left_unfold(&s.u, r, f));
            let mut vt = s.vt;
            for (i, sv) in s.s.iter().enumerate() {
                vt.row_mut(i).scale_mut(*sv);
            }
            m = vt;
            r = rank;
        }
        let flast = factors[factors.len() - 1];
        pieces.push(Core::new(r, flast, c.right, to_row_major(&m))?);
        let mut cores = self.cores[..k].to_vec();
        cores.extend(pieces);
        cores.extend(self.cores[k + 1..].iter().cloned());
        Self::from_cores(cores)
    }

    /// Merge consecutive modes `[k, k+count)` into one.
    pub fn merge_modes(&self, k: usize, count: usize) -> Result<Self> {
        if count == 0 || k + count > self.cores.len() {
            return Err(Error::InvalidInput("bad mode range to merge".into()));
        }
        let mut acc = self.cores[k].clone();
        for c in &self.cores[k + 1..k + count] {
            let prod = acc.left_unfold() * c.right_unfold();
            acc = Core::new(acc.left, acc.size * c.size, c.right, to_row_major(&prod))?;
        }
        let mut cores = self.cores[..k].to_vec();
        cores.push(acc);
        cores.extend(self.cores[k + count..].iter().cloned());
        Self::from_cores(cores)
    }

    pub fn is_finite(&self) -> bool {
        self.cores.iter().all(|c| c.data.iter().all(|v| v.is_finite()))
    }

    fn check_same_modes(&self, other: &TtTensor) -> Result<()> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::Shape(format!(
                "mode sizes {:?} and {:?} differ",
                self.mode_sizes(),
                other.mode_sizes()
            )));
        }
        Ok(())
    }
}

fn check_chain(cores: &[Core]) -> Result<()> {
    if cores.is_empty() {
        return Err(Error::InvalidInput("a tensor train needs at least one core".into()));
    }
    for (k, w) in cores.windows(2).enumerate() {
        if w[0].right != w[1].left {
            return Err(Error::Shape(format!(
                "rank mismatch between cores {k} and {}: {} vs {}",
                k + 1,
                w[0].right,
                w[1].left
            )));
        }
    }
    Ok(())
}

/// Left-orthogonalise a chain. Returns cores with orthonormal left unfoldings
/// and the residual `R` such that the original chain equals `cores * R`.
pub fn orthogonalize_left(cores: &[Core]) -> (Vec<Core>, DMatrix<f64>) {
    let mut out = Vec::with_capacity(cores.len());
    let mut r: DMatrix<f64> = DMatrix::identity(cores[0].left, cores[0].left);
    for c in cores {
        let m = &r * c.right_unfold();
        let m = DMatrix::from_row_slice(m.nrows() * c.size, c.right, &to_row_major(&m));
        let (q, rr) = qr_positive(&m);
        out.push(Core::from_left_unfold(&q, r.nrows(), c.size));
        r = rr;
    }
    (out, r)
}

/// Right-orthogonalise a chain. Returns cores with orthonormal right unfoldings
/// and the residual `R` such that the original chain equals `R * cores`.
pub fn orthogonalize_right(cores: &[Core]) -> (Vec<Core>, DMatrix<f64>) {
    let mut out: Vec<Core> = Vec::with_capacity(cores.len());
    let last = &cores[cores.len() - 1];
    let mut r: DMatrix<f64> = DMatrix::identity(last.right, last.right);
    for c in cores.iter().rev() {
        let m = c.left_unfold() * &r;
        let m = DMatrix::from_row_slice(c.left, c.size * r.ncols(), &to_row_major(&m));
        let (q, rr) = qr_positive(&m.transpose());
        out.push(Core::from_right_unfold(&q.transpose(), c.size, r.ncols()));
        r = rr.transpose();
    }
    out.reverse();
    (out, r)
}

/// Prime factors of `n` in ascending order.
pub fn prime_factors(mut n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot factor 0".into()));
    }
    let mut f = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            f.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 || f.is_empty() {
        f.push(n);
    }
    Ok(f)
}

/// How a flat mode is split into quantized modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorPolicy {
    Ascending,
    /// Greedily merge neighbouring ascending factors while the product stays within the cap.
    AscendingMerged(usize),
}

impl FactorPolicy {
    pub fn factors(&self, n: usize) -> Result<Vec<usize>> {
        let f = prime_factors(n)?;
        match *self {
            FactorPolicy::Ascending => Ok(f),
            FactorPolicy::AscendingMerged(cap) => {
                let mut out: Vec<usize> = Vec::new();
                for p in f {
                    match out.last_mut() {
                        Some(last) if *last * p <= cap => *last *= p,
                        _ => out.push(p),
                    }
                }
                Ok(out)
            }
        }
    }
}

impl std::str::FromStr for FactorPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "ascending" {
            return Ok(FactorPolicy::Ascending);
        }
        if let Some(cap) = s.strip_prefix("merged:").or_else(|| s.strip_prefix("ascending-merged:")) {
            let cap = cap
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad merge cap in factor policy '{s}'")))?;
            return Ok(FactorPolicy::AscendingMerged(cap));
        }
        Err(Error::InvalidInput(format!(
            "unknown factor policy '{s}' (expected 'ascending' or 'merged:<cap>')"
        )))
    }
}

impl std::fmt::Display for FactorPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FactorPolicy::Ascending => write!(f, "ascending"),
            FactorPolicy::AscendingMerged(c) => write!(f, "merged:{c}"),
        }
    }
}

/// Reshape a tensor whose leading mode has size `state_size` so that mode is
/// split into its factors. Element order is unchanged.
pub fn quantize(x: DenseTensor, state_size: usize, policy: FactorPolicy) -> Result<DenseTensor> {
    if x.ndim() == 0 || x.shape()[0] != state_size {
        return Err(Error::Shape(format!(
            "leading mode of {:?} is not the state size {state_size}",
            x.shape()
        )));
    }
    let mut shape = policy.factors(state_size)?;
    shape.extend_from_slice(&x.shape()[1..]);
    x.reshape(shape)
}
