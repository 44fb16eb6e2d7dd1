//! Adaptive Dormand–Prince 5(4) integration for dense and TT states.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tt::{TruncationTol, TtTensor};

/// Where the TT path rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundingMode {
    /// After every stage combination and after acceptance.
    PerStage,
    /// Only the accepted state.
    PerStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub tt_round_tol: TruncationTol,
    pub rounding: RoundingMode,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            dt_init: 1e-4,
            dt_min: 1e-14,
            dt_max: 1.0,
            tt_round_tol: TruncationTol { epsilon: 1e-12 },
            rounding: RoundingMode::PerStage,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidInput("rtol and atol must be positive".into()));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::InvalidInput("need 0 < dt_min <= dt_init <= dt_max".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// State types the integrator can advance.
pub trait OdeState: Clone {
    /// `self + Σ c_i x_i`, rounded to `round` when given (TT states only).
    fn lincomb(&self, terms: &[(f64, &Self)], round: Option<TruncationTol>) -> Result<Self>;
    fn scaled(&self, c: f64) -> Self;
    fn norm(&self) -> f64;
    fn is_finite(&self) -> bool;
    /// Largest internal rank for TT states, 1 otherwise.
    fn rank(&self) -> usize {
        1
    }
}

impl OdeState for DVector<f64> {
    fn lincomb(&self, terms: &[(f64, &Self)], _round: Option<TruncationTol>) -> Result<Self> {
        let mut out = self.clone();
        for (c, x) in terms {
            if x.len() != out.len() {
                return Err(Error::Shape(format!("state length {} vs {}", out.len(), x.len())));
            }
            out.axpy(*c, x, 1.0);
        }
        Ok(out)
    }
    fn scaled(&self, c: f64) -> Self {
        self * c
    }
    fn norm(&self) -> f64 {
        self.norm()
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl OdeState for TtTensor {
    fn lincomb(&self, terms: &[(f64, &Self)], round: Option<TruncationTol>) -> Result<Self> {
        let mut out = self.clone();
        for (c, x) in terms {
            if *c != 0.0 {
                out = out.add(&x.scale(*c))?;
            }
        }
        match round {
            Some(tol) => out.round(tol),
            None => Ok(out),
        }
    }
    fn scaled(&self, c: f64) -> Self {
        self.scale(c)
    }
    fn norm(&self) -> f64 {
        TtTensor::norm(self)
    }
    fn is_finite(&self) -> bool {
        TtTensor::is_finite(self)
    }
    fn rank(&self) -> usize {
        self.max_rank()
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_rank: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `dx/dt = rhs(t, x)` from `t_span.0` to `t_span.1`, returning the
/// states at `observe_at` (sorted, inside the span). Steps are clipped to land
/// on every observation time.
pub fn rk45<S, F>(mut rhs: F, x0: &S, t_span: (f64, f64), cfg: &IntegratorConfig, observe_at: &[f64]) -> Result<Trajectory<S>>
where
    S: OdeState,
    F: FnMut(f64, &S) -> Result<S>,
{
    cfg.validate()?;
    let (t0, t1) = t_span;
    if !(t1 >= t0) {
        return Err(Error::InvalidInput(format!("empty time span [{t0}, {t1}]")));
    }
    if observe_at.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("observation times must be sorted".into()));
    }
    let span_eps = 1e-12 * (t1.abs().max(t0.abs()).max(1.0));
    if observe_at.iter().any(|&t| t < t0 - span_eps || t > t1 + span_eps) {
        return Err(Error::InvalidInput("observation time outside the integration span".into()));
    }
    if !x0.is_finite() {
        return Err(Error::Divergence { t: t0 });
    }
    let stage_round = match cfg.rounding {
        RoundingMode::PerStage => Some(cfg.tt_round_tol),
        RoundingMode::PerStep => None,
    };
    let err_round = Some(TruncationTol { epsilon: 0.1 * cfg.tt_round_tol.epsilon });

    let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), accepted_steps: 0, rejected_steps: 0, max_rank: x0.rank() };
    let mut obs = observe_at.iter().copied().peekable();
    while let Some(&t) = obs.peek() {
        if (t - t0).abs() > span_eps {
            break;
        }
        traj.times.push(t);
        traj.states.push(x0.clone());
        obs.next();
    }

    let mut t = t0;
    let mut x = x0.clone();
    let mut h = cfg.dt_init.min(cfg.dt_max);
    let mut k1 = rhs(t, &x)?;
    while obs.peek().is_some() {
        if traj.accepted_steps + traj.rejected_steps >= cfg.max_steps {
            return Err(Error::StepBudget { t, max_steps: cfg.max_steps });
        }
        let target = *obs.peek().unwrap_or(&t1);
        let remaining = target - t;
        let landing = h >= remaining;
        let step = if landing { remaining } else { h };

        let mut ks: Vec<S> = Vec::with_capacity(7);
        ks.push(k1.clone());
        let mut y_new = x.clone();
        for s in 1..7 {
            let terms: Vec<(f64, &S)> = A[s].iter().zip(&ks).map(|(a, k)| (step * a, k)).collect();
            let y = x.lincomb(&terms, stage_round)?;
            if !y.is_finite() {
                return Err(Error::Divergence { t });
            }
            let k = rhs(t + C[s] * step, &y)?;
            if s == 6 {
                y_new = y;
            }
            ks.push(k);
        }
        let err_terms: Vec<(f64, &S)> = E.iter().zip(&ks).skip(1).map(|(e, k)| (step * e, k)).collect();
        let err_vec = ks[0].scaled(step * E[0]).lincomb(&err_terms, err_round)?;
        let err = err_vec.norm();
        if !err.is_finite() {
            return Err(Error::Divergence { t });
        }
        let scale = cfg.atol + cfg.rtol * x.norm().max(y_new.norm());
        let ratio = err / scale;
        if ratio <= 1.0 {
            t = if landing { target } else { t + step };
            x = match cfg.rounding {
                RoundingMode::PerStage => y_new,
                RoundingMode::PerStep => y_new.lincomb(&[], Some(cfg.tt_round_tol))?,
            };
            k1 = match cfg.rounding {
                RoundingMode::PerStage => ks.pop().expect("seven stages"),
                RoundingMode::PerStep => rhs(t, &x)?,
            };
            traj.accepted_steps += 1;
            traj.max_rank = traj.max_rank.max(x.rank());
            while let Some(&to) = obs.peek() {
                if (to - t).abs() > span_eps {
                    break;
                }
                traj.times.push(to);
                traj.states.push(x.clone());
                obs.next();
            }
        } else {
            traj.rejected_steps += 1;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        // A landing step shorter than h says nothing about h itself.
        let proposed = if landing && ratio <= 1.0 { h.max(step * factor) } else { step * factor };
        h = proposed.min(cfg.dt_max);
        if h < cfg.dt_min {
            return Err(Error::Stiffness { t, dt: h });
        }
    }
    Ok(traj)
}
