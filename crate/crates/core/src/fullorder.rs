//! Full-order tensorised operator inference in dense (FT), TT and QTT form.
//!
//! The data tensor `D` has modes `[state, augmented, time]`, where augmented
//! mode `k` has size `n_k + 1`. Augmented index all-zero holds `X`; all-nonzero
//! holds `X ⊗ X` shifted by one; mixed indices are zero. The operator tensor
//! `O` has modes `[state-out, state-in, augmented-in]`.

use nalgebra::{DMatrix, DVector};

use crate::cross::{cross_quadratic, quadratic_exact, CrossConfig, CrossStatus};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lstsq::{filter, tt_ls_solve, SINGULAR_FLOOR};
use crate::rom::{derivative_matrix, Stencil};
use crate::snapshot::SnapshotSet;
use crate::tensor::{checked_numel, DenseTensor, MAX_DENSE_ENTRIES};
use crate::tt::{quantize, Core, FactorPolicy, TruncationTol, TtTensor};

/// Largest flat state size accepted by the dense solver.
pub const FT_MAX_STATE: usize = 4096;

/// A tensor in either representation.
#[derive(Clone, Debug)]
pub enum Tensor {
    Dense(DenseTensor),
    Tt(TtTensor),
}

impl Tensor {
    pub fn mode_sizes(&self) -> Vec<usize> {
        match self {
            Tensor::Dense(d) => d.shape().to_vec(),
            Tensor::Tt(t) => t.mode_sizes(),
        }
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        match self {
            Tensor::Dense(d) => Ok(d.clone()),
            Tensor::Tt(t) => t.full(),
        }
    }
}

/// Operator tensor with modes `[state-out, state-in, augmented-in]`.
#[derive(Clone, Debug)]
pub struct OperatorTensor12 {
    pub state_dims: Vec<usize>,
    pub o: Tensor,
}

/// Learned full-order operators.
#[derive(Clone, Debug)]
pub enum FullOperators {
    /// `a` is `N × N`, `f` is `N × N²` with column `i'·N + i''`.
    Dense { a: DMatrix<f64>, f: DMatrix<f64>, state_dims: Vec<usize> },
    /// `a` has modes `[out, in]`, `f` has modes `[out, in, in]`.
    Tt { a: TtTensor, f: TtTensor, state_dims: Vec<usize>, tol: TruncationTol },
}

/// How the quadratic snapshot tensor is built in TT form.
#[derive(Clone, Debug, Default)]
pub enum QuadraticMethod {
    #[default]
    Exact,
    Cross(CrossConfig),
}

pub fn augmented_dims(state_dims: &[usize]) -> Vec<usize> {
    state_dims.iter().map(|n| n + 1).collect()
}

fn state_dims_of(x: &SnapshotSet) -> Vec<usize> {
    x.layout().state_dims()
}

/// Dense `D` by the case definition.
pub fn assemble_data_tensor_dense(x: &SnapshotSet) -> Result<DenseTensor> {
    let dims = state_dims_of(x);
    let aug = augmented_dims(&dims);
    let (n, k) = (x.n_state(), x.n_snapshots());
    let naug: usize = aug.iter().product();
    let mut shape = dims.clone();
    shape.extend_from_slice(&aug);
    shape.push(k);
    checked_numel(&shape).map_err(|_| {
        Error::Capacity(format!("dense data tensor {shape:?} is too large; use the TT representation"))
    })?;
    let mut out = DenseTensor::zeros(shape)?;
    let v = out.values_mut();
    // Flat augmented index -> Some(flat state index) when all digits are >= 1.
    let mut shifted = vec![None; naug];
    for (f, slot) in shifted.iter_mut().enumerate() {
        let mut rem = f;
        let mut flat = 0;
        let mut stride = 1;
        let mut ok = true;
        for (d, &m) in dims.iter().enumerate().rev() {
            let digit = rem % (m + 1);
            rem /= m + 1;
            if digit == 0 {
                ok = false;
                break;
            }
            flat += (digit - 1) * stride;
            stride *= dims[d];
        }
        if ok {
            *slot = Some(flat);
        }
    }
    for i in 0..n {
        for (f, s) in shifted.iter().enumerate() {
            let base = (i * naug + f) * k;
            match (f, s) {
                (0, _) => {
                    for t in 0..k {
                        v[base + t] = x.snapshot(t)[i];
                    }
                }
                (_, Some(j)) => {
                    for t in 0..k {
                        let s = x.snapshot(t);
                        v[base + t] = s[i] * s[*j];
                    }
                }
                _ => {}
            }
        }
    }
    Ok(out)
}

/// TT `D` as the rounded sum of zero-padded `X` and `X²` trains.
/// `x` has modes `[state, time]`.
pub fn assemble_data_tensor_tt(x: &TtTensor, tol: TruncationTol, quad: &QuadraticMethod) -> Result<(TtTensor, Option<CrossStatus>)> {
    let d = x.ndim();
    if d < 2 {
        return Err(Error::InvalidInput("snapshot train needs state and time modes".into()));
    }
    let s = d - 1;
    let dims = x.mode_sizes();
    let rho = x.core(s).left();

    let mut lin: Vec<Core> = x.cores()[..s].to_vec();
    for &m in &dims[..s] {
        let mut c = Core::zeros(rho, m + 1, rho);
        for a in 0..rho {
            *c.at_mut(a, 0, a) = 1.0;
        }
        lin.push(c);
    }
    lin.push(x.core(s).clone());
    let lin = TtTensor::from_cores(lin)?;

    let (sq, status) = match quad {
        QuadraticMethod::Exact => (quadratic_exact(x)?, None),
        QuadraticMethod::Cross(cfg) => {
            let res = cross_quadratic(x, &CrossConfig { tol, ..cfg.clone() })?;
            (res.tt, Some(res.status))
        }
    };
    let mut cores = sq.into_cores();
    for c in &mut cores[s..2 * s] {
        *c = pad_front(c);
    }
    let sq = TtTensor::from_cores(cores)?;
    Ok((lin.add(&sq)?.round(tol)?, status))
}

/// Prepend a zero slice to the mode of a core.
fn pad_front(c: &Core) -> Core {
    let (l, n, r) = c.shape();
    let mut out = Core::zeros(l, n + 1, r);
    for a in 0..l {
        for i in 0..n {
            for b in 0..r {
                *out.at_mut(a, i + 1, b) = c.at(a, i, b);
            }
        }
    }
    out
}

/// Dense `R` with modes `[state, time]`.
pub fn assemble_derivative_tensor(x: &SnapshotSet, stencil: Stencil) -> Result<DenseTensor> {
    let rdot = derivative_matrix(x.n_snapshots(), x.dt(), stencil)? * x.matrix();
    let mut shape = state_dims_of(x);
    shape.push(x.n_snapshots());
    // rdot is K × N; its column-major storage is the row-major [N, K] tensor.
    DenseTensor::new(shape, rdot.as_slice().to_vec())
}

/// Time derivative of a TT whose last mode is time; only the last core changes.
pub fn derivative_tt(x: &TtTensor, dt: f64, stencil: Stencil) -> Result<TtTensor> {
    let d = x.ndim();
    let last = x.core(d - 1);
    let (rho, k, _) = last.shape();
    let dm = derivative_matrix(k, dt, stencil)?;
    let g = DMatrix::from_row_slice(rho, k, last.data());
    let h = g * dm.transpose();
    let mut cores = x.cores().to_vec();
    cores[d - 1] = Core::new(rho, k, 1, linalg::to_row_major(&h))?;
    TtTensor::from_cores(cores)
}

fn check_ft_size(n: usize) -> Result<()> {
    if n > FT_MAX_STATE {
        return Err(Error::Capacity(format!(
            "dense solve limited to {FT_MAX_STATE} states, got {n}; use the TT representation"
        )));
    }
    checked_numel(&[n, n, n]).map_err(|_| {
        Error::Capacity(format!("dense quadratic operator for {n} states exceeds {MAX_DENSE_ENTRIES} entries"))
    })?;
    Ok(())
}

/// Dense regularised solve over the compact columns `[X | X ⊗ X]`.
pub fn ft_learn(x: &SnapshotSet, gamma: f64, stencil: Stencil) -> Result<FullOperators> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput("gamma must be finite and >= 0".into()));
    }
    let (n, k) = (x.n_state(), x.n_snapshots());
    check_ft_size(n)?;
    let c = n + n * n;
    let mut dt = DMatrix::zeros(c, k);
    for t in 0..k {
        let s = x.snapshot(t);
        let mut col = dt.column_mut(t);
        for i in 0..n {
            col[i] = s[i];
            for j in 0..n {
                col[n + i * n + j] = s[i] * s[j];
            }
        }
    }
    if !dt.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite snapshot data".into()));
    }
    let rt = derivative_matrix(k, x.dt(), stencil)? * x.matrix(); // K × N
    let qr = dt.qr();
    let (q, r) = qr.unpack();
    let svd = linalg::svd(&r)?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let keep = svd.s.iter().take_while(|&&s| s > SINGULAR_FLOOR * smax && s > 0.0).count();
    let svd = svd.truncate(keep);
    let mut w = svd.vt * rt;
    for (i, s) in svd.s.iter().enumerate() {
        w.row_mut(i).scale_mut(filter(*s, gamma));
    }
    let w = svd.u * w; // K × N
    let a = (q.rows(0, n) * &w).transpose();
    let f = w.transpose() * q.rows(n, n * n).transpose();
    Ok(FullOperators::Dense { a, f, state_dims: state_dims_of(x) })
}

/// Snapshot train with modes `[state, time]`.
pub fn compress_snapshots(x: &SnapshotSet, tol: TruncationTol) -> Result<TtTensor> {
    TtTensor::tt_svd(&x.tensor()?, tol)
}

/// Quantised snapshot train: the flat state mode is split into its factors.
pub fn compress_quantized(x: &SnapshotSet, tol: TruncationTol, policy: FactorPolicy) -> Result<TtTensor> {
    let flat = x.flattened();
    let n = flat.n_state() / flat.layout().state_dims()[1];
    let q = quantize(flat.tensor()?, n, policy)?;
    TtTensor::tt_svd(&q, tol)
}

/// Solve for the operator tensor from a compressed snapshot train.
pub fn tt_learn_operator(
    x: &TtTensor,
    dt: f64,
    tol: TruncationTol,
    gamma: f64,
    stencil: Stencil,
    quad: &QuadraticMethod,
) -> Result<OperatorTensor12> {
    let s = x.ndim() - 1;
    let state_dims = x.mode_sizes()[..s].to_vec();
    let (d, _) = assemble_data_tensor_tt(x, tol, quad)?;
    let r = derivative_tt(x, dt, stencil)?;
    let o = tt_ls_solve(&d, &r, gamma, tol, 2 * s)?;
    Ok(OperatorTensor12 { state_dims, o: Tensor::Tt(o) })
}

pub fn tt_learn(x: &SnapshotSet, tol: TruncationTol, gamma: f64, stencil: Stencil) -> Result<FullOperators> {
    let xt = compress_snapshots(x, tol)?;
    let o = tt_learn_operator(&xt, x.dt(), tol, gamma, stencil, &QuadraticMethod::Exact)?;
    extract_operators(&o, tol)
}

pub fn qtt_learn(x: &SnapshotSet, tol: TruncationTol, gamma: f64, stencil: Stencil, policy: FactorPolicy) -> Result<FullOperators> {
    let xt = compress_quantized(x, tol, policy)?;
    let o = tt_learn_operator(&xt, x.dt(), tol, gamma, stencil, &QuadraticMethod::Exact)?;
    extract_operators(&o, tol)
}

/// Slice `A` (augmented all zero) and `F` (augmented all nonzero, shifted).
/// `tol` is kept on TT operators for rounding in [`FullOperators::rhs_tt`].
pub fn extract_operators(o: &OperatorTensor12, tol: TruncationTol) -> Result<FullOperators> {
    let dims = &o.state_dims;
    let s = dims.len();
    let mut expect = dims.clone();
    expect.extend_from_slice(dims);
    expect.extend(augmented_dims(dims));
    if o.o.mode_sizes() != expect {
        return Err(Error::Shape(format!("operator modes {:?}, expected {expect:?}", o.o.mode_sizes())));
    }
    match &o.o {
        Tensor::Dense(t) => {
            let n: usize = dims.iter().product();
            check_ft_size(n)?;
            let naug: usize = augmented_dims(dims).iter().product();
            let v = t.values();
            let a = DMatrix::from_fn(n, n, |i, j| v[(i * n + j) * naug]);
            // Augmented flat index for each shifted state index.
            let aug_index: Vec<usize> = (0..n)
                .map(|flat| {
                    let mut rem = flat;
                    let mut idx = 0;
                    let mut stride = 1;
                    for &m in dims.iter().rev() {
                        idx += (rem % m + 1) * stride;
                        rem /= m;
                        stride *= m + 1;
                    }
                    idx
                })
                .collect();
            let mut f = DMatrix::zeros(n, n * n);
            for i in 0..n {
                for j in 0..n {
                    for (l, ai) in aug_index.iter().enumerate() {
                        f[(i, j * n + l)] = v[(i * n + j) * naug + ai];
                    }
                }
            }
            Ok(FullOperators::Dense { a, f, state_dims: dims.clone() })
        }
        Tensor::Tt(t) => {
            let mut a = t.clone();
            let mut f = t.clone();
            for k in 0..s {
                a = a.select_mode(2 * s + k, &[0])?;
                f = f.select_mode(2 * s + k, &(1..=dims[k]).collect::<Vec<_>>())?;
            }
            let a = squeeze_trailing(&a, s)?.round(TruncationTol::exact())?;
            Ok(FullOperators::Tt { a, f, state_dims: dims.clone(), tol })
        }
    }
}

/// Fold `count` trailing singleton modes into the preceding core.
fn squeeze_trailing(t: &TtTensor, count: usize) -> Result<TtTensor> {
    let d = t.ndim();
    let mut m = DMatrix::from_element(1, 1, 1.0);
    for c in t.cores()[d - count..].iter().rev() {
        if c.size() != 1 {
            return Err(Error::Internal("squeezed mode is not a singleton".into()));
        }
        m = c.slice(0) * m;
    }
    let mut cores = t.cores()[..d - count].to_vec();
    let last = cores.len() - 1;
    cores[last] = cores[last].mul_right(&m);
    TtTensor::from_cores(cores)
}

/// Place dense `(A, F)` into the operator-tensor layout.
pub fn embed_operators(a: &DMatrix<f64>, f: &DMatrix<f64>, state_dims: &[usize]) -> Result<OperatorTensor12> {
    let n: usize = state_dims.iter().product();
    if a.shape() != (n, n) || f.shape() != (n, n * n) {
        return Err(Error::Shape(format!("operators {:?}, {:?} for {n} states", a.shape(), f.shape())));
    }
    let aug = augmented_dims(state_dims);
    let naug: usize = aug.iter().product();
    let mut shape = state_dims.to_vec();
    shape.extend_from_slice(state_dims);
    shape.extend(aug);
    let mut o = DenseTensor::zeros(shape)?;
    let v = o.values_mut();
    for i in 0..n {
        for j in 0..n {
            v[(i * n + j) * naug] = a[(i, j)];
            for l in 0..n {
                let mut rem = l;
                let mut idx = 0;
                let mut stride = 1;
                for &m in state_dims.iter().rev() {
                    idx += (rem % m + 1) * stride;
                    rem /= m;
                    stride *= m + 1;
                }
                v[(i * n + j) * naug + idx] = f[(i, j * n + l)];
            }
        }
    }
    Ok(OperatorTensor12 { state_dims: state_dims.to_vec(), o: Tensor::Dense(o) })
}

impl FullOperators {
    pub fn state_dims(&self) -> &[usize] {
        match self {
            FullOperators::Dense { state_dims, .. } | FullOperators::Tt { state_dims, .. } => state_dims,
        }
    }

    pub fn is_tt(&self) -> bool {
        matches!(self, FullOperators::Tt { .. })
    }

    /// `A x + F (x ⊗ x)` on a flat state.
    pub fn rhs_dense(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let FullOperators::Dense { a, f, .. } = self else {
            return Err(Error::InvalidInput("dense state passed to TT operators".into()));
        };
        let n = a.nrows();
        if x.len() != n {
            return Err(Error::Shape(format!("state of length {} for {n} states", x.len())));
        }
        let mut out = a * x;
        // F (x ⊗ x) = Σ_j x_j F_j x, with F_j the j-th N × N column block.
        for j in 0..n {
            if x[j] != 0.0 {
                out.gemv(x[j], &f.columns(j * n, n), x, 1.0);
            }
        }
        Ok(out)
    }

    /// TT right-hand side, rounded at the operator tolerance.
    pub fn rhs_tt(&self, x: &TtTensor) -> Result<TtTensor> {
        let FullOperators::Tt { a, f, state_dims, tol } = self else {
            return Err(Error::InvalidInput("TT state passed to dense operators".into()));
        };
        let s = state_dims.len();
        let ax = a.contract(x, s, s)?;
        let fx = f.contract(x, 2 * s, s)?.contract(x, s, s)?;
        ax.add(&fx)?.round(*tol)
    }

    /// Dense `(A, F)` matrices (small problems).
    pub fn to_dense(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match self {
            FullOperators::Dense { a, f, .. } => Ok((a.clone(), f.clone())),
            FullOperators::Tt { a, f, state_dims, .. } => {
                let n: usize = state_dims.iter().product();
                check_ft_size(n)?;
                let a = a.full()?;
                let f = f.full()?;
                Ok((DMatrix::from_row_slice(n, n, a.values()), DMatrix::from_row_slice(n, n * n, f.values())))
            }
        }
    }
}
