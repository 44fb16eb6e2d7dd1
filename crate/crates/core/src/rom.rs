//! Reduced-order operator inference: POD or TT-derived coordinates, quadratic
//! design matrix and Tikhonov-regularised least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cross::{tt_cross, CrossConfig, CrossStatus, DenseOracle};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lstsq::{filter, SINGULAR_FLOOR};
use crate::snapshot::SnapshotSet;
use crate::tt::{orthogonalize_left, Core, TruncationTol, TtTensor};

/// Time-derivative finite-difference scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stencil {
    /// Second-order central interior, first-order one-sided ends.
    Gradient,
    /// Second order everywhere.
    Second,
    /// Fourth order everywhere.
    Fourth,
}

impl Stencil {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Stencil::Gradient),
            2 => Ok(Stencil::Second),
            4 => Ok(Stencil::Fourth),
            o => Err(Error::InvalidInput(format!("unsupported stencil order {o} (expected 1, 2 or 4)"))),
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            Stencil::Gradient => 1,
            Stencil::Second => 2,
            Stencil::Fourth => 4,
        }
    }

    pub fn min_points(&self) -> usize {
        match self {
            Stencil::Gradient => 2,
            Stencil::Second => 3,
            Stencil::Fourth => 5,
        }
    }
}

/// `K × K` differentiation matrix for uniformly spaced samples.
pub fn derivative_matrix(k: usize, dt: f64, stencil: Stencil) -> Result<DMatrix<f64>> {
    if k < stencil.min_points() {
        return Err(Error::InvalidInput(format!(
            "{k} samples are too few for a stencil of order {}",
            stencil.order()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("time step must be positive".into()));
    }
    let mut m = DMatrix::zeros(k, k);
    let mut put = |row: usize, start: usize, w: &[f64], denom: f64| {
        for (o, c) in w.iter().enumerate() {
            m[(row, start + o)] = c / denom;
        }
    };
    match stencil {
        Stencil::Gradient => {
            put(0, 0, &[-1.0, 1.0], dt);
            put(k - 1, k - 2, &[-1.0, 1.0], dt);
            for r in 1..k - 1 {
                put(r, r - 1, &[-1.0, 0.0, 1.0], 2.0 * dt);
            }
        }
        Stencil::Second => {
            put(0, 0, &[-3.0, 4.0, -1.0], 2.0 * dt);
            put(k - 1, k - 3, &[1.0, -4.0, 3.0], 2.0 * dt);
            for r in 1..k - 1 {
                put(r, r - 1, &[-1.0, 0.0, 1.0], 2.0 * dt);
            }
        }
        Stencil::Fourth => {
            let d = 12.0 * dt;
            put(0, 0, &[-25.0, 48.0, -36.0, 16.0, -3.0], d);
            put(1, 0, &[-3.0, -10.0, 18.0, -6.0, 1.0], d);
            put(k - 2, k - 5, &[-1.0, 6.0, -18.0, 10.0, 3.0], d);
            put(k - 1, k - 5, &[3.0, -16.0, 36.0, -48.0, 25.0], d);
            for r in 2..k - 2 {
                put(r, r - 2, &[1.0, -8.0, 0.0, 8.0, -1.0], d);
            }
        }
    }
    Ok(m)
}

/// Snapshots as rows of a `K × N` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    pub values: DMatrix<f64>,
    pub times: Vec<f64>,
}

impl SnapshotMatrix {
    pub fn new(values: DMatrix<f64>, times: Vec<f64>) -> Result<Self> {
        if values.nrows() != times.len() || times.len() < 2 {
            return Err(Error::Shape("need at least two snapshots, one per time".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("snapshot times must increase strictly".into()));
        }
        Ok(Self { values, times })
    }

    pub fn from_set(s: &SnapshotSet) -> Self {
        Self { values: s.matrix(), times: s.times() }
    }

    /// Uniform step, or an error for non-uniform grids.
    pub fn dt(&self) -> Result<f64> {
        let dt = self.times[1] - self.times[0];
        if self.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1e-300)) {
            return Err(Error::InvalidInput("non-uniform time grid".into()));
        }
        Ok(dt)
    }
}

/// Time derivatives of each column (rows are time samples).
pub fn derivative_targets(x: &SnapshotMatrix, stencil: Stencil) -> Result<DMatrix<f64>> {
    Ok(derivative_matrix(x.values.nrows(), x.dt()?, stencil)? * &x.values)
}

/// How many POD modes to keep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeSelection {
    Count(usize),
    /// Smallest `n` whose captured energy reaches this fraction.
    Energy(f64),
}

#[derive(Clone, Debug)]
pub struct PodBasis {
    /// `N × n`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub energy_captured: f64,
}

pub fn pod(x: &SnapshotMatrix, sel: ModeSelection) -> Result<PodBasis> {
    let svd = linalg::svd(&x.values)?;
    let total: f64 = svd.s.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::Numerical("zero snapshot matrix has no POD basis".into()));
    }
    let n = match sel {
        ModeSelection::Count(n) => {
            if n == 0 || n > svd.s.len() {
                return Err(Error::InvalidInput(format!("cannot keep {n} of {} modes", svd.s.len())));
            }
            n
        }
        ModeSelection::Energy(e) => {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::InvalidInput("energy fraction must lie in (0, 1]".into()));
            }
            let mut acc = 0.0;
            let mut n = svd.s.len();
            for (i, s) in svd.s.iter().enumerate() {
                acc += s * s;
                if acc >= e * total * (1.0 - 1e-15) {
                    n = i + 1;
                    break;
                }
            }
            n
        }
    };
    let kept: f64 = svd.s[..n].iter().map(|s| s * s).sum();
    Ok(PodBasis {
        basis: svd.vt.rows(0, n).transpose(),
        singular_values: svd.s[..n].to_vec(),
        energy_captured: kept / total,
    })
}

/// Row-wise Kronecker square `x̂_k ⊗ x̂_k`.
pub fn kron_rows(xhat: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, n) = xhat.shape();
    DMatrix::from_fn(k, n * n, |r, c| xhat[(r, c / n)] * xhat[(r, c % n)])
}

/// `[X̂ | U | X̂ ⊗ X̂]`.
pub fn build_design(xhat: &DMatrix<f64>, u: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    let (k, n) = xhat.shape();
    let p = match u {
        Some(u) if u.nrows() != k => {
            return Err(Error::Shape(format!("{} input rows for {k} snapshots", u.nrows())));
        }
        Some(u) => u.ncols(),
        None => 0,
    };
    let q = kron_rows(xhat);
    let mut d = DMatrix::zeros(k, n + p + n * n);
    d.columns_mut(0, n).copy_from(xhat);
    if let Some(u) = u {
        d.columns_mut(n, p).copy_from(u);
    }
    d.columns_mut(n + p, n * n).copy_from(&q);
    Ok(d)
}

/// Per-block Tikhonov weights, each the coefficient of the squared norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub a: f64,
    pub b: f64,
    pub f: f64,
}

impl Regularization {
    pub fn uniform(g: f64) -> Self {
        Self { a: g, b: g, f: g }
    }
    pub fn is_uniform(&self) -> bool {
        self.a == self.b && self.b == self.f
    }
    fn validate(&self) -> Result<()> {
        if [self.a, self.b, self.f].iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("regularisation weights must be finite and >= 0".into()))
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReducedOperators {
    pub a_hat: DMatrix<f64>,
    pub f_hat: DMatrix<f64>,
    pub b_hat: Option<DMatrix<f64>>,
    pub regularization: Regularization,
    /// Ratio of extreme nonzero singular values of the design.
    pub condition: f64,
    pub warnings: Vec<String>,
}

impl ReducedOperators {
    pub fn n(&self) -> usize {
        self.a_hat.nrows()
    }
}

/// Filtered SVD solve `Oᵀ = V diag(σ/(σ²+γ)) Uᵀ R`. Returns `(Oᵀ, cond)`.
pub fn tikhonov_solve(d: &DMatrix<f64>, r: &DMatrix<f64>, gamma: f64) -> Result<(DMatrix<f64>, f64)> {
    let svd = linalg::svd(d)?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let keep = svd.s.iter().take_while(|&&s| s > SINGULAR_FLOOR * smax && s > 0.0).count();
    let cond = if keep == 0 { f64::INFINITY } else { smax / svd.s[keep - 1] };
    let svd = svd.truncate(keep);
    let mut utr = svd.u.transpose() * r;
    for (i, s) in svd.s.iter().enumerate() {
        utr.row_mut(i).scale_mut(filter(*s, gamma));
    }
    Ok((svd.vt.transpose() * utr, cond))
}

/// Least-squares operator fit `min ‖D Oᵀ − R‖² + Σ γ_block ‖O_block‖²`.
pub fn solve_opinf(d: &DMatrix<f64>, r: &DMatrix<f64>, reg: Regularization) -> Result<ReducedOperators> {
    reg.validate()?;
    let n = r.ncols();
    let cols = d.ncols();
    if d.nrows() != r.nrows() {
        return Err(Error::Shape(format!("design has {} rows, targets {}", d.nrows(), r.nrows())));
    }
    if cols < n + n * n {
        return Err(Error::Shape(format!("design with {cols} columns cannot hold {n} states")));
    }
    if !d.iter().chain(r.iter()).all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite design or targets".into()));
    }
    let p = cols - n - n * n;
    let (ot, cond) = if reg.is_uniform() {
        tikhonov_solve(d, r, reg.a)?
    } else {
        let mut weights = vec![reg.a.sqrt(); n];
        weights.extend(std::iter::repeat_n(reg.b.sqrt(), p));
        weights.extend(std::iter::repeat_n(reg.f.sqrt(), n * n));
        let k = d.nrows();
        let mut aug = DMatrix::zeros(k + cols, cols);
        aug.rows_mut(0, k).copy_from(d);
        for (j, w) in weights.iter().enumerate() {
            aug[(k + j, j)] = *w;
        }
        let mut raug = DMatrix::zeros(k + cols, n);
        raug.rows_mut(0, k).copy_from(r);
        tikhonov_solve(&aug, &raug, 0.0)?
    };
    let o = ot.transpose();
    let mut warnings = Vec::new();
    if cond > 1e12 && reg.a == 0.0 && reg.f == 0.0 {
        warnings.push(format!("design condition number {cond:.3e} exceeds 1e12 without regularisation"));
    }
    Ok(ReducedOperators {
        a_hat: o.columns(0, n).into_owned(),
        b_hat: (p > 0).then(|| o.columns(n, p).into_owned()),
        f_hat: o.columns(n + p, n * n).into_owned(),
        regularization: reg,
        condition: cond,
        warnings,
    })
}

/// `Â x̂ + F̂ (x̂ ⊗ x̂) + B̂ u`.
pub fn reduced_rhs(ops: &ReducedOperators, xhat: &DVector<f64>, u: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let n = ops.n();
    if xhat.len() != n {
        return Err(Error::Shape(format!("state of length {} for {n} modes", xhat.len())));
    }
    let kron = DVector::from_fn(n * n, |c, _| xhat[c / n] * xhat[c % n]);
    let mut out = &ops.a_hat * xhat + &ops.f_hat * kron;
    match (&ops.b_hat, u) {
        (Some(b), Some(u)) => {
            if u.len() != b.ncols() {
                return Err(Error::Shape("input length mismatch".into()));
            }
            out += b * u;
        }
        (Some(_), None) => return Err(Error::InvalidInput("model expects an input signal".into())),
        (None, Some(_)) => return Err(Error::InvalidInput("model has no input operator".into())),
        (None, None) => {}
    }
    Ok(out)
}

/// Spatial basis and reduced coordinates taken from a snapshot TT.
#[derive(Clone, Debug)]
pub struct TtRomBasis {
    /// Left-orthogonal state cores; the last has right rank `n`.
    pub spatial_cores: Vec<Core>,
    /// `K × n`.
    pub reduced_snapshots: DMatrix<f64>,
    pub cross_status: Option<CrossStatus>,
}

impl TtRomBasis {
    pub fn n(&self) -> usize {
        self.reduced_snapshots.ncols()
    }

    /// Matricised spatial basis `N × n` (small problems only).
    pub fn basis_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut cores = self.spatial_cores.clone();
        cores.push(Core::new(n, n, 1, DMatrix::<f64>::identity(n, n).as_slice().to_vec())?);
        let full = TtTensor::from_cores(cores)?.full()?;
        let rows = full.len() / n;
        Ok(DMatrix::from_row_slice(rows, n, full.values()))
    }
}

#[derive(Clone, Debug)]
pub struct TtRomModel {
    pub basis: TtRomBasis,
    pub operators: ReducedOperators,
}

/// Compress snapshots (time last) to TT and read reduced coordinates off the last core.
pub fn ttrom_basis(x: &SnapshotSet, tol: TruncationTol, cross: Option<&CrossConfig>) -> Result<TtRomBasis> {
    let dense = x.tensor()?;
    let (tt, status) = match cross {
        None => (TtTensor::tt_svd(&dense, tol)?, None),
        Some(cfg) => {
            let mut o = DenseOracle::new(&dense);
            let res = tt_cross(&mut o, &CrossConfig { tol, ..cfg.clone() })?;
            (res.tt, Some(res.status))
        }
    };
    let d = tt.ndim();
    let (spatial, r) = orthogonalize_left(&tt.cores()[..d - 1]);
    let last = tt.core(d - 1).mul_left(&r);
    let (n, k, _) = last.shape();
    let xhat = DMatrix::from_row_slice(n, k, last.data()).transpose();
    Ok(TtRomBasis { spatial_cores: spatial, reduced_snapshots: xhat, cross_status: status })
}

pub fn ttrom_learn(basis: TtRomBasis, dt: f64, stencil: Stencil, reg: Regularization) -> Result<TtRomModel> {
    let k = basis.reduced_snapshots.nrows();
    let rdot = derivative_matrix(k, dt, stencil)? * &basis.reduced_snapshots;
    let d = build_design(&basis.reduced_snapshots, None)?;
    let operators = solve_opinf(&d, &rdot, reg)?;
    Ok(TtRomModel { basis, operators })
}

pub fn ttrom_fit(x: &SnapshotSet, tol: TruncationTol, cross: Option<&CrossConfig>, stencil: Stencil, reg: Regularization) -> Result<TtRomModel> {
    ttrom_learn(ttrom_basis(x, tol, cross)?, x.dt(), stencil, reg)
}

/// Full-state TT with the reduced trajectory (`K' × n`) as its last core.
pub fn ttrom_reconstruct(basis: &TtRomBasis, xhat: &DMatrix<f64>) -> Result<TtTensor> {
    let n = basis.n();
    if xhat.ncols() != n {
        return Err(Error::Shape(format!("trajectory has {} columns for {n} modes", xhat.ncols())));
    }
    let mut cores = basis.spatial_cores.clone();
    cores.push(Core::new(n, xhat.nrows(), 1, xhat.as_slice().to_vec())?);
    TtTensor::from_cores(cores)
}
