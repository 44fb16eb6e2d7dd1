//! Benchmark runs: train on a time window, predict forward, score the result.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cross::CrossConfig;
use crate::error::{Error, Result};
use crate::fullorder::{self, QuadraticMethod};
use crate::integrate::{rk45, IntegratorConfig};
use crate::rom::{self, ModeSelection, Regularization, SnapshotMatrix, Stencil};
use crate::snapshot::SnapshotSet;
use crate::tt::{Core, FactorPolicy, TruncationTol, TtTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rom,
    TtRom,
    Ft,
    Tt,
    Qtt,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Rom, Method::TtRom, Method::Ft, Method::Tt, Method::Qtt];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Rom => "rom",
            Method::TtRom => "tt-rom",
            Method::Ft => "ft",
            Method::Tt => "tt",
            Method::Qtt => "qtt",
        }
    }

    pub fn is_reduced(&self) -> bool {
        matches!(self, Method::Rom | Method::TtRom)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown method '{s}' (rom, tt-rom, ft, tt, qtt)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Heat,
    Burgers,
    /// Snapshot file from an external solver.
    External,
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Heat => "heat",
            Problem::Burgers => "burgers",
            Problem::External => "external",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "heat" => Ok(Problem::Heat),
            "burgers" => Ok(Problem::Burgers),
            "external" | "external-file" | "file" => Ok(Problem::External),
            o => Err(Error::InvalidInput(format!("unknown problem '{o}' (heat, burgers, external)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Relative L2 error at the evaluation time.
    L2,
    /// Relative max-norm error at the evaluation time.
    Linf,
    /// Largest relative L2 error over snapshot times after training.
    L2MaxOverTimes,
}

impl Metric {
    pub fn tag(&self) -> &'static str {
        match self {
            Metric::L2 => "l2",
            Metric::Linf => "linf",
            Metric::L2MaxOverTimes => "l2-max-over-times",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "l2" => Ok(Metric::L2),
            "linf" => Ok(Metric::Linf),
            "l2-max-over-times" | "max-over-times" => Ok(Metric::L2MaxOverTimes),
            o => Err(Error::InvalidInput(format!("unknown metric '{o}' (l2, linf, l2-max-over-times)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: Problem,
    pub method: Method,
    pub epsilon_tt: f64,
    /// Tikhonov weight for the full-order methods and the default for both ROM blocks.
    pub gamma: f64,
    pub lambda_a: Option<f64>,
    pub lambda_f: Option<f64>,
    pub n_modes: Option<usize>,
    pub train_cut: f64,
    pub eval_time: f64,
    pub stencil: Stencil,
    pub metric: Metric,
    pub seed: u64,
    pub factor_policy: FactorPolicy,
    /// Build TT-ROM snapshots and TT quadratic data by cross interpolation.
    pub use_cross: bool,
    pub integrator: IntegratorConfig,
}

impl RunConfig {
    /// Benchmark defaults for a problem and method.
    pub fn benchmark(problem: Problem, method: Method) -> Self {
        let (eps, train, eval) = match problem {
            Problem::Heat => (1e-12, 0.25, 0.9),
            Problem::Burgers => (1e-5, 0.05, 0.09),
            Problem::External => (1e-4, f64::NAN, f64::NAN),
        };
        let gamma = match method {
            Method::Rom | Method::TtRom | Method::Ft => 1e-6,
            Method::Tt | Method::Qtt => 0.0,
        };
        // Benchmarks use the gradient stencil; see the README.
        let stencil = match problem {
            Problem::Heat | Problem::Burgers => Stencil::Gradient,
            Problem::External => Stencil::Fourth,
        };
        Self {
            problem,
            method,
            epsilon_tt: eps,
            gamma,
            lambda_a: None,
            lambda_f: None,
            n_modes: None,
            train_cut: train,
            eval_time: eval,
            stencil,
            metric: Metric::L2,
            seed: 0,
            factor_policy: FactorPolicy::Ascending,
            use_cross: false,
            integrator: IntegratorConfig::default(),
        }
    }

    /// Set one `key = value` pair. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidInput(format!("bad value '{value}' for {what}"));
        let f = |what: &str| value.trim().parse::<f64>().map_err(|_| bad(what));
        let opt = |what: &str| -> Result<Option<f64>> {
            match value.trim() {
                "" | "none" | "null" => Ok(None),
                v => v.parse::<f64>().map(Some).map_err(|_| bad(what)),
            }
        };
        match key.trim().replace('-', "_").as_str() {
            "problem" => self.problem = value.parse()?,
            "method" => self.method = value.parse()?,
            "epsilon_tt" | "eps_tt" | "eps" => self.epsilon_tt = f("epsilon_tt")?,
            "gamma" => self.gamma = f("gamma")?,
            "lambda_a" => self.lambda_a = opt("lambda_a")?,
            "lambda_f" => self.lambda_f = opt("lambda_f")?,
            "n_modes" => {
                self.n_modes = match value.trim() {
                    "" | "none" | "null" => None,
                    v => Some(v.parse().map_err(|_| bad("n_modes"))?),
                }
            }
            "train_cut" | "train_cut_time" => self.train_cut = f("train_cut")?,
            "eval_time" => self.eval_time = f("eval_time")?,
            "stencil_order" | "stencil" => {
                let o = value.trim().parse::<u32>().map_err(|_| bad("stencil_order"))?;
                self.stencil = Stencil::from_order(o)?;
            }
            "metric" => self.metric = value.parse()?,
            "seed" => self.seed = value.trim().parse().map_err(|_| bad("seed"))?,
            "factor_policy" => self.factor_policy = value.parse()?,
            "use_cross" => self.use_cross = value.trim().parse().map_err(|_| bad("use_cross"))?,
            "rtol" => self.integrator.rtol = f("rtol")?,
            "atol" => self.integrator.atol = f("atol")?,
            "max_steps" => self.integrator.max_steps = value.trim().parse().map_err(|_| bad("max_steps"))?,
            other => return Err(Error::InvalidInput(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Apply a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("line {}: expected key = value", no + 1)))?;
            self.set(k, v).map_err(|e| Error::InvalidInput(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_tt >= 0.0) {
            return Err(Error::InvalidInput("epsilon_tt must be >= 0".into()));
        }
        if !(self.eval_time >= self.train_cut) {
            return Err(Error::InvalidInput("eval_time must not precede train_cut".into()));
        }
        for g in [Some(self.gamma), self.lambda_a, self.lambda_f].into_iter().flatten() {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidInput("regularisation weights must be finite and >= 0".into()));
            }
        }
        if self.problem == Problem::External && matches!(self.method, Method::Ft | Method::Tt) {
            return Err(Error::InvalidInput(format!("method {} is not available for external data", self.method)));
        }
        self.integrator.validate()
    }

    pub fn regularization(&self) -> Regularization {
        Regularization { a: self.lambda_a.unwrap_or(self.gamma), b: self.gamma, f: self.lambda_f.unwrap_or(self.gamma) }
    }

    pub fn tol(&self) -> TruncationTol {
        TruncationTol { epsilon: self.epsilon_tt }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// One benchmark row. Every field is always serialised; absent values are null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: Problem,
    pub method: Method,
    pub status: String,
    pub error: Option<String>,
    pub t_pod: f64,
    pub t_learn: f64,
    pub t_predict: f64,
    pub rel_error: Option<f64>,
    pub metric: String,
    pub n_modes: Option<usize>,
    pub ranks: Option<Vec<usize>>,
    pub epsilon_tt: f64,
    pub gamma: f64,
    pub lambda_a: Option<f64>,
    pub lambda_f: Option<f64>,
    pub train_cut: f64,
    pub eval_time: f64,
    pub stencil_order: u32,
    pub cross_converged: Option<bool>,
    pub integrator_converged: Option<bool>,
    pub accepted_steps: Option<usize>,
    pub rejected_steps: Option<usize>,
    pub max_state_rank: Option<usize>,
    pub warnings: Vec<String>,
    pub config_hash: String,
    pub snapshot_hash: Option<String>,
}

impl RunReport {
    fn new(cfg: &RunConfig, snapshot_hash: Option<String>) -> Self {
        Self {
            problem: cfg.problem,
            method: cfg.method,
            status: "ok".into(),
            error: None,
            t_pod: 0.0,
            t_learn: 0.0,
            t_predict: 0.0,
            rel_error: None,
            metric: cfg.metric.tag().into(),
            n_modes: None,
            ranks: None,
            epsilon_tt: cfg.epsilon_tt,
            gamma: cfg.gamma,
            lambda_a: cfg.lambda_a,
            lambda_f: cfg.lambda_f,
            train_cut: cfg.train_cut,
            eval_time: cfg.eval_time,
            stencil_order: cfg.stencil.order(),
            cross_converged: None,
            integrator_converged: None,
            accepted_steps: None,
            rejected_steps: None,
            max_state_rank: None,
            warnings: Vec::new(),
            config_hash: cfg.hash(),
            snapshot_hash,
        }
    }

    /// A row recording a failed run.
    pub fn failed(cfg: &RunConfig, snapshot_hash: Option<String>, err: &Error) -> Self {
        let mut r = Self::new(cfg, snapshot_hash);
        r.status = "failed".into();
        r.error = Some(err.to_string());
        if matches!(err, Error::Stiffness { .. } | Error::StepBudget { .. } | Error::Divergence { .. }) {
            r.integrator_converged = Some(false);
        }
        r
    }

    /// `n` for reduced methods, internal state ranks otherwise.
    pub fn modes_or_ranks(&self) -> String {
        match (&self.n_modes, &self.ranks) {
            (Some(n), _) => format!("n={n}"),
            (None, Some(r)) => format!("r=({})", r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
            _ => String::new(),
        }
    }
}

/// A finished run with the predicted state at the evaluation time.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    /// Flat state, snapshot index order.
    pub prediction: Vec<f64>,
}

/// `‖pred − ref‖ / ‖ref‖` in the metric's norm (per-time metrics only).
pub fn compute_rel_error(pred: &[f64], reference: &[f64], metric: Metric) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::Shape(format!("prediction has {} entries, reference {}", pred.len(), reference.len())));
    }
    let (num, den) = match metric {
        Metric::L2 | Metric::L2MaxOverTimes => (
            pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum::<f64>().sqrt(),
            reference.iter().map(|r| r * r).sum::<f64>().sqrt(),
        ),
        Metric::Linf => (
            pred.iter().zip(reference).map(|(p, r)| (p - r).abs()).fold(0.0, f64::max),
            reference.iter().map(|r| r.abs()).fold(0.0, f64::max),
        ),
    };
    if den == 0.0 {
        return Err(Error::InvalidInput("relative error is undefined for a zero reference".into()));
    }
    Ok(num / den)
}

struct Timer(Instant);

impl Timer {
    fn start() -> Self {
        Timer(Instant::now())
    }
    fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Execute one configuration on a snapshot set.
pub fn run(cfg: &RunConfig, data: &SnapshotSet, snapshot_hash: Option<String>) -> Result<RunOutcome> {
    cfg.validate()?;
    let structured = data.layout().is_structured();
    if matches!(cfg.method, Method::Ft | Method::Tt) && !structured {
        return Err(Error::InvalidInput(format!("method {} needs a structured layout", cfg.method)));
    }
    let train = data.up_to(cfg.train_cut)?;
    let t_last = train.time(train.n_snapshots() - 1);
    let k_eval = data
        .index_of_time(cfg.eval_time)
        .ok_or_else(|| Error::InvalidInput(format!("no snapshot at eval time {}", cfg.eval_time)))?;
    // Observation times: eval only, or every snapshot after training.
    let observe: Vec<f64> = match cfg.metric {
        Metric::L2MaxOverTimes => (0..=k_eval).map(|k| data.time(k)).filter(|&t| t > t_last).collect(),
        _ => vec![data.time(k_eval)],
    };
    let t_end = data.time(k_eval);
    let mut report = RunReport::new(cfg, snapshot_hash);
    let x_last = train.snapshot(train.n_snapshots() - 1).to_vec();

    let predictions: Vec<Vec<f64>> = if t_end <= t_last {
        // Evaluation inside the training window: no integration.
        report.integrator_converged = Some(true);
        vec![reconstruct_training(cfg, &train, &mut report)?]
    } else {
        match cfg.method {
            Method::Rom | Method::TtRom => run_reduced(cfg, &train, &x_last, (t_last, t_end), &observe, &mut report)?,
            Method::Ft => run_ft(cfg, &train, &x_last, (t_last, t_end), &observe, &mut report)?,
            Method::Tt | Method::Qtt => run_tt(cfg, &train, (t_last, t_end), &observe, &mut report)?,
        }
    };

    let mut worst: f64 = 0.0;
    for (t, p) in observe.iter().zip(&predictions) {
        let k = data.index_of_time(*t).ok_or_else(|| Error::Internal("observation off the snapshot grid".into()))?;
        worst = worst.max(compute_rel_error(p, data.snapshot(k), cfg.metric)?);
    }
    report.rel_error = Some(worst);
    let prediction = predictions.into_iter().last().unwrap_or_default();
    Ok(RunOutcome { report, prediction })
}

/// Run, turning any error into a failed row.
pub fn run_or_fail(cfg: &RunConfig, data: &SnapshotSet, snapshot_hash: Option<String>) -> RunReport {
    match run(cfg, data, snapshot_hash.clone()) {
        Ok(o) => o.report,
        Err(e) => RunReport::failed(cfg, snapshot_hash, &e),
    }
}

fn integrator_for(cfg: &RunConfig, span: (f64, f64)) -> IntegratorConfig {
    let mut ic = cfg.integrator.clone();
    ic.tt_round_tol = cfg.tol();
    ic.dt_max = ic.dt_max.min(span.1 - span.0);
    ic.dt_init = ic.dt_init.min(ic.dt_max);
    ic.dt_min = ic.dt_min.min(ic.dt_init);
    ic
}

fn record_steps<S>(report: &mut RunReport, tr: &crate::integrate::Trajectory<S>) {
    report.integrator_converged = Some(true);
    report.accepted_steps = Some(tr.accepted_steps);
    report.rejected_steps = Some(tr.rejected_steps);
}

fn mode_count(cfg: &RunConfig, train: &SnapshotSet) -> Result<usize> {
    if let Some(n) = cfg.n_modes {
        return Ok(n);
    }
    Ok(rom::ttrom_basis(train, cfg.tol(), None)?.n())
}

fn cross_cfg(cfg: &RunConfig) -> CrossConfig {
    CrossConfig { tol: cfg.tol(), seed: cfg.seed, ..CrossConfig::default() }
}

fn run_reduced(
    cfg: &RunConfig,
    train: &SnapshotSet,
    x_last: &[f64],
    span: (f64, f64),
    observe: &[f64],
    report: &mut RunReport,
) -> Result<Vec<Vec<f64>>> {
    let reg = cfg.regularization();
    match cfg.method {
        Method::Rom => {
            let n = mode_count(cfg, train)?;
            let timer = Timer::start();
            let sm = SnapshotMatrix::from_set(train);
            let basis = rom::pod(&sm, ModeSelection::Count(n))?;
            report.t_pod = timer.secs();
            let timer = Timer::start();
            let xhat = &sm.values * &basis.basis;
            let rdot = rom::derivative_matrix(xhat.nrows(), train.dt(), cfg.stencil)? * &xhat;
            let ops = rom::solve_opinf(&rom::build_design(&xhat, None)?, &rdot, reg)?;
            report.t_learn = timer.secs();
            report.n_modes = Some(n);
            report.warnings.extend(ops.warnings.iter().cloned());
            let timer = Timer::start();
            let x0 = basis.basis.transpose() * DVector::from_column_slice(x_last);
            let tr = rk45(|_, x: &DVector<f64>| rom::reduced_rhs(&ops, x, None), &x0, span, &integrator_for(cfg, span), observe)?;
            let out = tr.states.iter().map(|z| (&basis.basis * z).as_slice().to_vec()).collect();
            report.t_predict = timer.secs();
            record_steps(report, &tr);
            Ok(out)
        }
        _ => {
            let timer = Timer::start();
            let cc = cross_cfg(cfg);
            let basis = rom::ttrom_basis(train, cfg.tol(), cfg.use_cross.then_some(&cc))?;
            report.t_pod = timer.secs();
            report.cross_converged = basis.cross_status.as_ref().map(|s| s.converged);
            let n = basis.n();
            let timer = Timer::start();
            let model = rom::ttrom_learn(basis, train.dt(), cfg.stencil, reg)?;
            report.t_learn = timer.secs();
            report.n_modes = Some(n);
            report.warnings.extend(model.operators.warnings.iter().cloned());
            let timer = Timer::start();
            let x0 = model.basis.reduced_snapshots.row(model.basis.reduced_snapshots.nrows() - 1).transpose();
            let ops = &model.operators;
            let tr = rk45(|_, x: &DVector<f64>| rom::reduced_rhs(ops, x, None), &x0, span, &integrator_for(cfg, span), observe)?;
            let mut out = Vec::new();
            for z in &tr.states {
                let t = rom::ttrom_reconstruct(&model.basis, &DMatrix::from_row_slice(1, n, z.as_slice()))?;
                out.push(t.full()?.into_values());
            }
            report.t_predict = timer.secs();
            record_steps(report, &tr);
            Ok(out)
        }
    }
}

fn run_ft(
    cfg: &RunConfig,
    train: &SnapshotSet,
    x_last: &[f64],
    span: (f64, f64),
    observe: &[f64],
    report: &mut RunReport,
) -> Result<Vec<Vec<f64>>> {
    let timer = Timer::start();
    let ops = fullorder::ft_learn(train, cfg.gamma, cfg.stencil)?;
    report.t_learn = timer.secs();
    let timer = Timer::start();
    let x0 = DVector::from_column_slice(x_last);
    let tr = rk45(|_, x: &DVector<f64>| ops.rhs_dense(x), &x0, span, &integrator_for(cfg, span), observe)?;
    report.t_predict = timer.secs();
    record_steps(report, &tr);
    Ok(tr.states.iter().map(|x| x.as_slice().to_vec()).collect())
}

/// State train at time index `k` of a snapshot train (time last).
pub fn state_at(x: &TtTensor, k: usize) -> Result<TtTensor> {
    let d = x.ndim();
    let time = x.core(d - 1);
    if k >= time.size() {
        return Err(Error::InvalidInput(format!("time index {k} out of range")));
    }
    let v = DMatrix::from_fn(time.left(), 1, |a, _| time.at(a, k, 0));
    let mut cores: Vec<Core> = x.cores()[..d - 1].to_vec();
    let last = cores.len() - 1;
    cores[last] = cores[last].mul_right(&v);
    TtTensor::from_cores(cores)
}

fn run_tt(cfg: &RunConfig, train: &SnapshotSet, span: (f64, f64), observe: &[f64], report: &mut RunReport) -> Result<Vec<Vec<f64>>> {
    let tol = cfg.tol();
    let timer = Timer::start();
    let xt = match cfg.method {
        Method::Qtt => fullorder::compress_quantized(train, tol, cfg.factor_policy)?,
        _ => fullorder::compress_snapshots(train, tol)?,
    };
    report.t_pod = timer.secs();
    let s = xt.ndim() - 1;

    let timer = Timer::start();
    let quad = if cfg.use_cross { QuadraticMethod::Cross(cross_cfg(cfg)) } else { QuadraticMethod::Exact };
    let o = fullorder::tt_learn_operator(&xt, train.dt(), tol, cfg.gamma, cfg.stencil, &quad)?;
    let ops = fullorder::extract_operators(&o, tol)?;
    report.t_learn = timer.secs();

    let timer = Timer::start();
    let x0 = state_at(&xt, xt.mode_sizes()[s] - 1)?.round(tol)?;
    let tr = rk45(|_, x: &TtTensor| ops.rhs_tt(x), &x0, span, &integrator_for(cfg, span), observe)?;
    let mut out = Vec::new();
    for x in &tr.states {
        out.push(x.full()?.into_values());
    }
    report.t_predict = timer.secs();
    record_steps(report, &tr);
    report.max_state_rank = Some(tr.max_rank);
    report.ranks = tr.states.last().map(|x| x.internal_ranks());
    Ok(out)
}

/// Evaluation inside the training window: reproduce the snapshot from the
/// compressed or projected representation.
fn reconstruct_training(cfg: &RunConfig, train: &SnapshotSet, report: &mut RunReport) -> Result<Vec<f64>> {
    let k = train
        .index_of_time(cfg.eval_time)
        .ok_or_else(|| Error::InvalidInput(format!("no training snapshot at {}", cfg.eval_time)))?;
    let tol = cfg.tol();
    match cfg.method {
        Method::Rom => {
            let n = mode_count(cfg, train)?;
            let basis = rom::pod(&SnapshotMatrix::from_set(train), ModeSelection::Count(n))?;
            report.n_modes = Some(n);
            let x = DVector::from_column_slice(train.snapshot(k));
            Ok((&basis.basis * (basis.basis.transpose() * x)).as_slice().to_vec())
        }
        Method::TtRom => {
            let b = rom::ttrom_basis(train, tol, None)?;
            report.n_modes = Some(b.n());
            let n = b.n();
            let row = DMatrix::from_row_slice(1, n, &b.reduced_snapshots.row(k).iter().copied().collect::<Vec<_>>());
            Ok(rom::ttrom_reconstruct(&b, &row)?.full()?.into_values())
        }
        Method::Ft => Ok(train.snapshot(k).to_vec()),
        Method::Tt | Method::Qtt => {
            let xt = match cfg.method {
                Method::Qtt => fullorder::compress_quantized(train, tol, cfg.factor_policy)?,
                _ => fullorder::compress_snapshots(train, tol)?,
            };
            let x = state_at(&xt, k)?.round(tol)?;
            report.ranks = Some(x.internal_ranks());
            Ok(x.full()?.into_values())
        }
    }
}

pub const CSV_HEADER: &str = "problem,method,status,t_pod,t_learn,t_predict,rel_error,modes_or_ranks,metric,config_hash,snapshot_hash";

/// CSV table, one row per report.
pub fn table_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let rel = r.rel_error.map(|e| format!("{e:.6e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{},\"{}\",{},{},{}\n",
            r.problem,
            r.method,
            r.status,
            r.t_pod,
            r.t_learn,
            r.t_predict,
            rel,
            r.modes_or_ranks(),
            r.metric,
            r.config_hash,
            r.snapshot_hash.as_deref().unwrap_or("")
        ));
    }
    out
}

/// JSON-lines, one record per report.
pub fn table_jsonl(reports: &[RunReport]) -> Result<String> {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Internal(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}
