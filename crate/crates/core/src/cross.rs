//! TT cross interpolation: builds a tensor train from entry queries.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, right_solve, truncation_rank};
use crate::tensor::DenseTensor;
use crate::tt::{Core, TruncationTol, TtTensor};

/// Source of tensor entries. Implementations count every entry they are asked for.
pub trait EntryOracle {
    fn shape(&self) -> &[usize];

    /// Evaluate a batch of multi-indices.
    fn eval_batch(&mut self, indices: &[Vec<usize>]) -> Result<Vec<f64>>;

    /// Total number of entries requested so far.
    fn call_count(&self) -> usize;
}

/// Oracle backed by a closure.
pub struct FnOracle<F> {
    shape: Vec<usize>,
    f: F,
    calls: usize,
}

impl<F: FnMut(&[usize]) -> f64> FnOracle<F> {
    pub fn new(shape: Vec<usize>, f: F) -> Self {
        Self { shape, f, calls: 0 }
    }
}

impl<F: FnMut(&[usize]) -> f64> EntryOracle for FnOracle<F> {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn eval_batch(&mut self, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
        self.calls += indices.len();
        Ok(indices.iter().map(|i| (self.f)(i)).collect())
    }

    fn call_count(&self) -> usize {
        self.calls
    }
}

/// Oracle over an in-memory dense tensor.
pub struct DenseOracle<'a> {
    x: &'a DenseTensor,
    calls: usize,
}

impl<'a> DenseOracle<'a> {
    pub fn new(x: &'a DenseTensor) -> Self {
        Self { x, calls: 0 }
    }
}

impl EntryOracle for DenseOracle<'_> {
    fn shape(&self) -> &[usize] {
        self.x.shape()
    }

    fn eval_batch(&mut self, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
        self.calls += indices.len();
        Ok(indices.iter().map(|i| self.x.get(i)).collect())
    }

    fn call_count(&self) -> usize {
        self.calls
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossConfig {
    pub tol: TruncationTol,
    pub max_sweeps: usize,
    pub initial_rank: usize,
    pub rank_increment: usize,
    pub maxvol_tol: f64,
    pub validation_sample_size: usize,
    pub max_rank: usize,
    pub seed: u64,
}

impl Default for CrossConfig {
    fn default() -> Self {
        Self {
            tol: TruncationTol { epsilon: 1e-10 },
            max_sweeps: 12,
            initial_rank: 2,
            rank_increment: 2,
            maxvol_tol: 1.05,
            validation_sample_size: 200,
            max_rank: 200,
            seed: 0,
        }
    }
}

impl CrossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0
            || self.initial_rank == 0
            || self.rank_increment == 0
            || self.validation_sample_size == 0
            || self.max_rank == 0
        {
            return Err(Error::InvalidInput("cross configuration bounds must be positive".into()));
        }
        if !(self.maxvol_tol >= 1.0) {
            return Err(Error::InvalidInput("maxvol tolerance must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossStatus {
    pub converged: bool,
    /// Half-sweeps performed (one direction each).
    pub sweeps: usize,
    /// Relative RMS error on the validation sample.
    pub validation_error: f64,
    /// Distinct entries requested from the oracle, validation included.
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub struct CrossResult {
    pub tt: TtTensor,
    pub status: CrossStatus,
}

/// Row subset of a tall `p x r` matrix whose square block has near-maximal
/// volume: every entry of `m * m[rows]^{-1}` is bounded by `tol` in magnitude
/// (or 100 swaps were made).
pub fn maxvol(m: &DMatrix<f64>, tol: f64) -> Result<Vec<usize>> {
    let (p, r) = m.shape();
    if r == 0 {
        return Ok(Vec::new());
    }
    if p < r {
        return Err(Error::InvalidInput(format!("maxvol needs a tall matrix, got {p}x{r}")));
    }
    if !(tol >= 1.0) {
        return Err(Error::InvalidInput("maxvol tolerance must be >= 1".into()));
    }
    let mut piv = initial_pivots(m)?;
    let sub = rows_of(m, &piv);
    let mut b = right_solve(m, &sub)?;
    if !b.iter().all(|v| v.is_finite()) {
        return Err(Error::DegeneratePivot("rank-deficient matrix in maxvol".into()));
    }
    for _ in 0..100 {
        let (mut bi, mut bj, mut bv) = (0, 0, 0.0f64);
        for j in 0..r {
            for i in 0..p {
                let v = b[(i, j)].abs();
                if v > bv {
                    (bi, bj, bv) = (i, j, v);
                }
            }
        }
        if bv <= tol {
            break;
        }
        // Swap row bi into position bj and update B by a rank-one correction.
        let col = b.column(bj).into_owned();
        let mut row = b.row(bi).into_owned();
        row[bj] -= 1.0;
        let piv_val = b[(bi, bj)];
        b -= (col * row) / piv_val;
        piv[bj] = bi;
    }
    Ok(piv)
}

/// Rows chosen by Gaussian elimination with partial pivoting.
fn initial_pivots(m: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (p, r) = m.shape();
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..p).collect();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for k in 0..r {
        let (mut best, mut bv) = (k, 0.0f64);
        for i in k..p {
            if a[(i, k)].abs() > bv {
                best = i;
                bv = a[(i, k)].abs();
            }
        }
        if bv <= 1e-14 * scale {
            return Err(Error::DegeneratePivot(format!("matrix has numerical rank {k} < {r}")));
        }
        a.swap_rows(k, best);
        perm.swap(k, best);
        for i in k + 1..p {
            let f = a[(i, k)] / a[(k, k)];
            if f != 0.0 {
                for j in k..r {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
    }
    perm.truncate(r);
    Ok(perm)
}

fn rows_of(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Memoising front end so repeated indices are never re-requested.
struct Cached<'a, O: EntryOracle + ?Sized> {
    oracle: &'a mut O,
    cache: HashMap<Vec<usize>, f64>,
}

impl<O: EntryOracle + ?Sized> Cached<'_, O> {
    fn get(&mut self, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
        let mut missing: Vec<Vec<usize>> = Vec::new();
        for idx in indices {
            if !self.cache.contains_key(idx) {
                missing.push(idx.clone());
            }
        }
        missing.sort();
        missing.dedup();
        if !missing.is_empty() {
            let vals = self.oracle.eval_batch(&missing)?;
            if vals.len() != missing.len() {
                return Err(Error::Internal("oracle returned the wrong number of values".into()));
            }
            for (k, v) in missing.into_iter().zip(vals) {
                self.cache.insert(k, v);
            }
        }
        Ok(indices.iter().map(|i| self.cache[i]).collect())
    }
}

/// DMRG-style two-site cross interpolation with maxvol pivoting.
pub fn tt_cross<O: EntryOracle + ?Sized>(oracle: &mut O, cfg: &CrossConfig) -> Result<CrossResult> {
    cfg.validate()?;
    let shape = oracle.shape().to_vec();
    let d = shape.len();
    if d == 0 || shape.iter().any(|&n| n == 0) {
        return Err(Error::InvalidInput(format!("cross interpolation of shape {shape:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut src = Cached { oracle, cache: HashMap::new() };

    // Validation sample, drawn once.
    let sample: Vec<Vec<usize>> = (0..cfg.validation_sample_size)
        .map(|_| shape.iter().map(|&n| rng.gen_range(0..n)).collect())
        .collect();
    let sample_vals = src.get(&sample)?;
    let sample_rms = rms(&sample_vals);

    if d == 1 {
        let idx: Vec<Vec<usize>> = (0..shape[0]).map(|i| vec![i]).collect();
        let vals = src.get(&idx)?;
        let tt = TtTensor::from_cores(vec![Core::from_vector(&vals)])?;
        let err = validation_error(&tt, &sample, &sample_vals, sample_rms);
        let evaluations = src.cache.len();
        return Ok(CrossResult {
            tt,
            status: CrossStatus { converged: true, sweeps: 0, validation_error: err, evaluations },
        });
    }

    // left[k]: multi-indices over modes 0..k; right[k]: over modes k..d.
    let mut left: Vec<Vec<Vec<usize>>> = vec![Vec::new(); d + 1];
    let mut right: Vec<Vec<Vec<usize>>> = vec![Vec::new(); d + 1];
    left[0] = vec![Vec::new()];
    right[d] = vec![Vec::new()];
    for k in (1..d).rev() {
        let space: usize = shape[k..].iter().fold(1usize, |a, &n| a.saturating_mul(n));
        let r = cfg.initial_rank.min(space).min(cfg.max_rank);
        right[k] = random_distinct(&mut rng, &shape[k..], r);
    }

    let delta_scale = cfg.tol.epsilon / ((d - 1) as f64).sqrt();
    let mut cores: Vec<Core> = shape.iter().map(|&n| Core::zeros(1, n, 1)).collect();
    let mut best: Option<(TtTensor, f64)> = None;
    let mut prev_err = f64::INFINITY;
    let mut kick = 0usize;
    let mut converged = false;
    let mut sweeps = 0;

    let mut enrich = false;
    for sweep in 0..2 * cfg.max_sweeps {
        let forward = sweep % 2 == 0;
        if enrich {
            // The coming sweep reads the sets it does not rebuild; widen them
            // so local ranks are not capped by the previous index sets.
            for k in 1..d {
                let (sets, modes) = if forward { (&mut right[k], &shape[k..]) } else { (&mut left[k], &shape[..k]) };
                let space: usize = modes.iter().fold(1usize, |a, &n| a.saturating_mul(n));
                let target = (sets.len() + cfg.rank_increment).min(space).min(cfg.max_rank);
                let mut attempts = 0;
                while sets.len() < target && attempts < 100 * target {
                    attempts += 1;
                    let m: Vec<usize> = modes.iter().map(|&n| rng.gen_range(0..n)).collect();
                    if !sets.contains(&m) {
                        sets.push(m);
                    }
                }
            }
            enrich = false;
        }
        let order: Vec<usize> = if forward { (0..d - 1).collect() } else { (0..d - 1).rev().collect() };
        for k in order {
            let (rl, rr) = (left[k].len(), right[k + 2].len());
            let (n1, n2) = (shape[k], shape[k + 1]);
            let mut idx = Vec::with_capacity(rl * n1 * n2 * rr);
            for a in &left[k] {
                for i in 0..n1 {
                    for j in 0..n2 {
                        for b in &right[k + 2] {
                            let mut m = a.clone();
                            m.push(i);
                            m.push(j);
                            m.extend_from_slice(b);
                            idx.push(m);
                        }
                    }
                }
            }
            let vals = src.get(&idx)?;
            let bmat = DMatrix::from_row_slice(rl * n1, n2 * rr, &vals);
            let svd = linalg::svd(&bmat)?;
            let full_rank = svd.s.iter().filter(|&&s| s > 1e-15 * svd.s[0].max(f64::MIN_POSITIVE)).count().max(1);
            let mut rank = truncation_rank(&svd.s, delta_scale * bmat.norm());
            rank = (rank + kick).min(full_rank).min(cfg.max_rank).max(1);
            let svd = svd.truncate(rank);
            if forward {
                let piv = maxvol(&svd.u, cfg.maxvol_tol)?;
                let sub = rows_of(&svd.u, &piv);
                let interp = right_solve(&svd.u, &sub)?;
                cores[k] = Core::from_left_unfold(&interp, rl, n1);
                left[k + 1] = piv
                    .iter()
                    .map(|&p| {
                        let mut m = left[k][p / n1].clone();
                        m.push(p % n1);
                        m
                    })
                    .collect();
                let mut us = sub;
                for (j, s) in svd.s.iter().enumerate() {
                    us.column_mut(j).scale_mut(*s);
                }
                cores[k + 1] = Core::from_right_unfold(&(us * &svd.vt), n2, rr);
            } else {
                let v = svd.vt.transpose();
                let piv = maxvol(&v, cfg.maxvol_tol)?;
                let sub = rows_of(&v, &piv);
                let interp = right_solve(&v, &sub)?;
                cores[k + 1] = Core::from_right_unfold(&interp.transpose(), n2, rr);
                right[k + 1] = piv
                    .iter()
                    .map(|&p| {
                        let mut m = vec![p / rr];
                        m.extend_from_slice(&right[k + 2][p % rr]);
                        m
                    })
                    .collect();
                let mut us = svd.u;
                for (j, s) in svd.s.iter().enumerate() {
                    us.column_mut(j).scale_mut(*s);
                }
                cores[k] = Core::from_left_unfold(&(us * sub.transpose()), rl, n1);
            }
        }
        sweeps = sweep + 1;
        let tt = TtTensor::from_cores(cores.clone())?;
        let err = validation_error(&tt, &sample, &sample_vals, sample_rms);
        if best.as_ref().is_none_or(|(_, e)| err < *e) {
            best = Some((tt, err));
        }
        let eps = cfg.tol.epsilon;
        let settled = err <= 0.1 * eps || (err - prev_err).abs() < 0.1 * eps;
        if err <= eps && settled {
            converged = true;
            break;
        }
        if err > eps && err > 0.5 * prev_err {
            kick += cfg.rank_increment;
            enrich = true;
        }
        prev_err = err;
    }

    let (tt, err) = best.ok_or_else(|| Error::Internal("cross produced no iterate".into()))?;
    Ok(CrossResult {
        tt,
        status: CrossStatus { converged, sweeps, validation_error: err, evaluations: src.cache.len() },
    })
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

fn validation_error(tt: &TtTensor, sample: &[Vec<usize>], vals: &[f64], scale: f64) -> f64 {
    let diffs: Vec<f64> = sample.iter().zip(vals).map(|(i, v)| tt.eval(i) - v).collect();
    let e = rms(&diffs);
    if scale > 0.0 {
        e / scale
    } else {
        e
    }
}

fn random_distinct(rng: &mut ChaCha8Rng, modes: &[usize], r: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(r);
    let mut attempts = 0;
    while out.len() < r && attempts < 100 * r {
        attempts += 1;
        let m: Vec<usize> = modes.iter().map(|&n| rng.gen_range(0..n)).collect();
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

/// Oracle for `x(I, n) * x(I', n)` given a train whose last mode is time.
pub struct QuadraticOracle<'a> {
    x: &'a TtTensor,
    shape: Vec<usize>,
    state_modes: usize,
    calls: usize,
}

impl<'a> QuadraticOracle<'a> {
    pub fn new(x: &'a TtTensor) -> Result<Self> {
        let modes = x.mode_sizes();
        if modes.len() < 2 {
            return Err(Error::InvalidInput("quadratic tensor needs state and time modes".into()));
        }
        let s = modes.len() - 1;
        let mut shape = modes[..s].to_vec();
        shape.extend_from_slice(&modes[..s]);
        shape.push(modes[s]);
        Ok(Self { x, shape, state_modes: s, calls: 0 })
    }
}

impl EntryOracle for QuadraticOracle<'_> {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn eval_batch(&mut self, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
        self.calls += indices.len();
        let s = self.state_modes;
        Ok(indices
            .iter()
            .map(|idx| {
                let n = idx[2 * s];
                let mut a = idx[..s].to_vec();
                a.push(n);
                let mut b = idx[s..2 * s].to_vec();
                b.push(n);
                self.x.eval(&a) * self.x.eval(&b)
            })
            .collect())
    }

    fn call_count(&self) -> usize {
        self.calls
    }
}

/// Quadratic snapshot tensor with modes `[state, state, time]` by cross interpolation.
pub fn cross_quadratic(x: &TtTensor, cfg: &CrossConfig) -> Result<CrossResult> {
    let mut oracle = QuadraticOracle::new(x)?;
    tt_cross(&mut oracle, cfg)
}

/// Exact quadratic snapshot tensor: the state cores appear twice (the second
/// copy as `I ⊗ G_k`) and the time core pairs rank indices entrywise.
pub fn quadratic_exact(x: &TtTensor) -> Result<TtTensor> {
    let d = x.ndim();
    if d < 2 {
        return Err(Error::InvalidInput("quadratic tensor needs state and time modes".into()));
    }
    let state = &x.cores()[..d - 1];
    let time = x.core(d - 1);
    let rho = time.left();
    let mut cores: Vec<Core> = state.to_vec();
    for g in state {
        let (l, n, r) = g.shape();
        let mut c = Core::zeros(rho * l, n, rho * r);
        for a in 0..rho {
            for p in 0..l {
                for i in 0..n {
                    for q in 0..r {
                        *c.at_mut(a * l + p, i, a * r + q) = g.at(p, i, q);
                    }
                }
            }
        }
        cores.push(c);
    }
    let k = time.size();
    let mut t = Core::zeros(rho * rho, k, 1);
    for a in 0..rho {
        for b in 0..rho {
            for n in 0..k {
                *t.at_mut(a * rho + b, n, 0) = time.at(a, n, 0) * time.at(b, n, 0);
            }
        }
    }
    cores.push(t);
    TtTensor::from_cores(cores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxvol_identity_rows() {
        let mut m = DMatrix::zeros(6, 3);
        m[(2, 0)] = 1.0;
        m[(4, 1)] = 1.0;
        m[(5, 2)] = 1.0;
        let mut p = maxvol(&m, 1.05).unwrap();
        p.sort();
        assert_eq!(p, vec![2, 4, 5]);
    }

    #[test]
    fn maxvol_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = DMatrix::from_fn(100, 5, |_, _| rng.gen_range(-1.0..1.0));
        let p = maxvol(&m, 1.01).unwrap();
        let b = right_solve(&m, &rows_of(&m, &p)).unwrap();
        assert!(b.amax() <= 1.01 + 1e-12);
        let mut q = p.clone();
        q.sort();
        q.dedup();
        assert_eq!(q.len(), 5);
    }

    #[test]
    fn maxvol_vandermonde_endpoints() {
        let nodes: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let m = DMatrix::from_fn(20, 3, |i, j| nodes[i].powi(j as i32));
        let p = maxvol(&m, 1.0).unwrap();
        // Brute-force largest |det| over all triples.
        let mut best = (0.0, vec![]);
        for a in 0..20 {
            for b in a + 1..20 {
                for c in b + 1..20 {
                    let det = rows_of(&m, &[a, b, c]).determinant().abs();
                    if det > best.0 {
                        best = (det, vec![a, b, c]);
                    }
                }
            }
        }
        assert!(p.contains(&0) && p.contains(&19), "{p:?}");
        assert!(best.1.contains(&0) && best.1.contains(&19));
    }

    #[test]
    fn maxvol_rank_deficient() {
        let m = DMatrix::from_fn(5, 2, |i, _| i as f64);
        assert!(matches!(maxvol(&m, 1.05), Err(Error::DegeneratePivot(_))));
    }

    #[test]
    fn separable_is_cheap() {
        let n = 50;
        let f = |i: &[usize]| (1.0 + i[0] as f64).sqrt() * (0.3 * i[1] as f64).cos() * (2.0 + (i[2] as f64 / 7.0).sin());
        let mut o = FnOracle::new(vec![n, n, n], f);
        let cfg = CrossConfig { tol: TruncationTol { epsilon: 1e-12 }, initial_rank: 1, ..Default::default() };
        let res = tt_cross(&mut o, &cfg).unwrap();
        assert!(res.status.converged);
        assert_eq!(res.tt.ranks(), vec![1, 1, 1, 1]);
        assert!(res.status.validation_error <= 1e-12);
        assert!((o.call_count() as f64) < 0.05 * (n * n * n) as f64, "{}", o.call_count());
    }

    #[test]
    fn constant_oracle() {
        let mut o = FnOracle::new(vec![4, 5, 3, 2], |_| 2.5);
        let res = tt_cross(&mut o, &CrossConfig { initial_rank: 1, ..Default::default() }).unwrap();
        assert!(res.tt.ranks().iter().all(|&r| r == 1));
        let f = res.tt.full().unwrap();
        assert!(f.values().iter().all(|v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn matches_tt_svd_on_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cores: Vec<Core> = [(1, 6, 3), (3, 7, 2), (2, 5, 2), (2, 4, 1)]
            .iter()
            .map(|&(l, n, r)| Core::new(l, n, r, (0..l * n * r).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let x = TtTensor::from_cores(cores).unwrap().full().unwrap();
        let eps = 1e-9;
        let mut o = DenseOracle::new(&x);
        let cfg = CrossConfig { tol: TruncationTol { epsilon: eps }, seed: 3, ..Default::default() };
        let res = tt_cross(&mut o, &cfg).unwrap();
        assert!(res.status.converged, "{:?}", res.status);
        let svd = TtTensor::tt_svd(&x, cfg.tol).unwrap();
        assert_eq!(res.tt.ranks(), svd.ranks());
        let e = res.tt.full().unwrap().rel_diff(&svd.full().unwrap()).unwrap();
        assert!(e <= 10.0 * eps, "{e}");

        // Determinism.
        let mut o2 = DenseOracle::new(&x);
        let res2 = tt_cross(&mut o2, &cfg).unwrap();
        assert_eq!(res2.tt.ranks(), res.tt.ranks());
        assert_eq!(res2.status.validation_error, res.status.validation_error);
    }

    #[test]
    fn quadratic_exact_and_cross_agree_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = DenseTensor::from_fn(vec![4, 4, 3], |_| rng.gen_range(-1.0..1.0)).unwrap();
        let xt = TtTensor::tt_svd(&x, TruncationTol::exact()).unwrap();
        let want = DenseTensor::from_fn(vec![4, 4, 4, 4, 3], |i| x.get(&[i[0], i[1], i[4]]) * x.get(&[i[2], i[3], i[4]])).unwrap();
        let q = quadratic_exact(&xt).unwrap();
        assert!(q.full().unwrap().rel_diff(&want).unwrap() < 1e-13);
        let cfg = CrossConfig { tol: TruncationTol { epsilon: 1e-10 }, ..Default::default() };
        let c = cross_quadratic(&xt, &cfg).unwrap();
        assert!(c.tt.full().unwrap().rel_diff(&want).unwrap() < 1e-8);
    }

    #[test]
    fn quadratic_of_separable_is_rank_one() {
        let a = vec![1.0, -2.0, 0.5];
        let s = vec![1.0, 0.9, 0.7, 0.4];
        let xt = TtTensor::rank_one(&[a.clone(), s.clone()]).unwrap();
        let c = cross_quadratic(&xt, &CrossConfig { initial_rank: 1, tol: TruncationTol { epsilon: 1e-12 }, ..Default::default() }).unwrap();
        assert!(c.tt.ranks().iter().all(|&r| r == 1));
        let f = c.tt.full().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for n in 0..4 {
                    assert!((f.get(&[i, j, n]) - a[i] * a[j] * s[n] * s[n]).abs() < 1e-13);
                }
            }
        }
        let q = quadratic_exact(&TtTensor::ones(&[3, 2]).unwrap().scale(3.0)).unwrap();
        assert!(q.full().unwrap().values().iter().all(|v| (v - 9.0).abs() < 1e-13));
    }
}
