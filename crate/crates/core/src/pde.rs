//! Periodic finite-difference generators for the 2D heat and viscous Burgers equations.
//!
//! Fields are stored with index `i * ny + j`, `i` along x.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{rk45, IntegratorConfig};
use crate::snapshot::{Layout, SnapshotSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        let g = Self { nx, ny, x0: x.0, x1: x.1, y0: y.0, y1: y.1 };
        g.validate()?;
        Ok(g)
    }

    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(n, n, (lo, hi), (lo, hi))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 || self.ny < 8 {
            return Err(Error::InvalidInput(format!("grid {}x{} is below the 8-cell stencil minimum", self.nx, self.ny)));
        }
        if !(self.x1 > self.x0 && self.y1 > self.y0) {
            return Err(Error::InvalidInput("grid extents must be increasing".into()));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates `(x_i, y_j)`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + i as f64 * self.hx(), self.y0 + j as f64 * self.hy())
    }

    /// Sample a function at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            for j in 0..self.ny {
                let (x, y) = self.point(i, j);
                u.push(f(x, y));
            }
        }
        u
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PdeKind {
    Heat { mu: f64 },
    /// Unit viscosity.
    Burgers,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// `cos 2π(x + y)`
    CosineDiagonal,
    /// `π sin(π(x+y)/2) / (2 + cos(π(x+y)/2))`
    BurgersQuotient,
}

impl InitialCondition {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            InitialCondition::CosineDiagonal => (2.0 * PI * (x + y)).cos(),
            InitialCondition::BurgersQuotient => {
                let s = PI * (x + y) / 2.0;
                PI * s.sin() / (2.0 + s.cos())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeProblem {
    pub kind: PdeKind,
    pub t_final: f64,
    pub dt_snapshot: f64,
    pub initial_condition: InitialCondition,
}

impl PdeProblem {
    /// Heat equation with μ = 0.01 on [0,1]², snapshots every 0.01 up to t = 1.
    pub fn heat_benchmark() -> (Self, GridSpec) {
        (
            Self { kind: PdeKind::Heat { mu: 0.01 }, t_final: 1.0, dt_snapshot: 0.01, initial_condition: InitialCondition::CosineDiagonal },
            GridSpec { nx: 20, ny: 20, x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 },
        )
    }

    /// Viscous Burgers on [0,4]², snapshots every 5e-4 up to t = 0.1.
    pub fn burgers_benchmark() -> (Self, GridSpec) {
        (
            Self { kind: PdeKind::Burgers, t_final: 0.1, dt_snapshot: 5e-4, initial_condition: InitialCondition::BurgersQuotient },
            GridSpec { nx: 20, ny: 20, x0: 0.0, x1: 4.0, y0: 0.0, y1: 4.0 },
        )
    }

    /// Number of snapshots including t = 0.
    pub fn snapshot_count(&self) -> Result<usize> {
        if !(self.t_final > 0.0) || !(self.dt_snapshot > 0.0) {
            return Err(Error::InvalidInput("t_final and dt_snapshot must be positive".into()));
        }
        let steps = self.t_final / self.dt_snapshot;
        let k = steps.round();
        if (steps - k).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "dt_snapshot {} does not divide t_final {}",
                self.dt_snapshot, self.t_final
            )));
        }
        Ok(k as usize + 1)
    }

    pub fn rhs(&self, u: &[f64], g: &GridSpec) -> Vec<f64> {
        match self.kind {
            PdeKind::Heat { mu } => heat_rhs(u, g, mu),
            PdeKind::Burgers => burgers_rhs(u, g),
        }
    }
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Apply a face-flux difference along one axis: `out += c * (F_{i+1/2} − F_{i−1/2}) / h`.
fn flux_difference(u: &[f64], g: &GridSpec, axis: usize, c: f64, out: &mut [f64], flux: impl Fn(&dyn Fn(isize) -> f64) -> f64) {
    let (nx, ny) = (g.nx, g.ny);
    let (n, h) = if axis == 0 { (nx, g.hx()) } else { (ny, g.hy()) };
    let mut faces = vec![0.0; n];
    for line in 0..if axis == 0 { ny } else { nx } {
        let at = |k: usize| if axis == 0 { k * ny + line } else { line * ny + k };
        for (p, face) in faces.iter_mut().enumerate() {
            // face p sits between p and p+1
            let get = |o: isize| u[at(wrap(p as isize + o, n))];
            *face = flux(&get);
        }
        for p in 0..n {
            out[at(p)] += c * (faces[p] - faces[wrap(p as isize - 1, n)]) / h;
        }
    }
}

/// Fourth-order conservative Laplacian `∇²u`.
pub fn laplacian4(u: &[f64], g: &GridSpec) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for axis in 0..2 {
        let h = if axis == 0 { g.hx() } else { g.hy() };
        flux_difference(u, g, axis, 1.0, &mut out, |v| (-v(2) + 15.0 * v(1) - 15.0 * v(0) + v(-1)) / (12.0 * h));
    }
    out
}

/// `μ∇²u` with the fourth-order flux form.
pub fn heat_rhs(u: &[f64], g: &GridSpec, mu: f64) -> Vec<f64> {
    let mut out = laplacian4(u, g);
    out.iter_mut().for_each(|v| *v *= mu);
    out
}

/// Fifth-order upwind face value of `f = u²/2`, side chosen by the face-average of `u`.
fn upwind5(v: &dyn Fn(isize) -> f64) -> f64 {
    let f = |o: isize| 0.5 * v(o) * v(o);
    if 0.5 * (v(0) + v(1)) >= 0.0 {
        (2.0 * f(-2) - 13.0 * f(-1) + 47.0 * f(0) + 27.0 * f(1) - 3.0 * f(2)) / 60.0
    } else {
        (2.0 * f(3) - 13.0 * f(2) + 47.0 * f(1) + 27.0 * f(0) - 3.0 * f(-1)) / 60.0
    }
}

/// Convective part `−(∂x + ∂y)(u²/2)`.
pub fn burgers_convection(u: &[f64], g: &GridSpec) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for axis in 0..2 {
        flux_difference(u, g, axis, -1.0, &mut out, upwind5);
    }
    out
}

/// `−u u_x − u u_y + ∇²u`.
pub fn burgers_rhs(u: &[f64], g: &GridSpec) -> Vec<f64> {
    let mut out = burgers_convection(u, g);
    for (o, l) in out.iter_mut().zip(laplacian4(u, g)) {
        *o += l;
    }
    out
}

/// Integrate the problem and record uniformly spaced snapshots.
pub fn generate_snapshots(p: &PdeProblem, g: &GridSpec, cfg: &IntegratorConfig) -> Result<SnapshotSet> {
    g.validate()?;
    let k = p.snapshot_count()?;
    let times: Vec<f64> = (0..k).map(|n| n as f64 * p.dt_snapshot).collect();
    let u0 = DVector::from_vec(g.sample(|x, y| p.initial_condition.eval(x, y)));
    let cfg = IntegratorConfig { dt_max: cfg.dt_max.min(p.dt_snapshot), dt_init: cfg.dt_init.min(p.dt_snapshot), ..cfg.clone() };
    let traj = rk45(|_, u: &DVector<f64>| Ok(DVector::from_vec(p.rhs(u.as_slice(), g))), &u0, (0.0, p.t_final), &cfg, &times)?;
    let mut data = Vec::with_capacity(k * g.len());
    for s in &traj.states {
        data.extend_from_slice(s.as_slice());
    }
    SnapshotSet::new(Layout::Structured { nx: g.nx, ny: g.ny, nz: 1, nq: 1 }, data, 0.0, p.dt_snapshot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slope(hs: &[f64], errs: &[f64]) -> f64 {
        let n = hs.len() as f64;
        let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        num / den
    }

    #[test]
    fn constants_are_steady() {
        let g = GridSpec::square(12, 0.0, 1.0).unwrap();
        let u = vec![3.5; g.len()];
        assert!(heat_rhs(&u, &g, 0.7).iter().all(|v| v.abs() < 1e-10));
        assert!(burgers_rhs(&u, &g).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn heat_is_fourth_order_and_conservative() {
        let mu = 0.01;
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for n in [20, 40, 80] {
            let g = GridSpec::square(n, 0.0, 1.0).unwrap();
            let u = g.sample(|x, y| (2.0 * PI * (x + y)).cos());
            let r = heat_rhs(&u, &g, mu);
            let e = r.iter().zip(&u).map(|(a, b)| (a + 8.0 * PI * PI * mu * b).abs()).fold(0.0, f64::max);
            assert!(r.iter().sum::<f64>().abs() <= 1e-12 * u.iter().map(|v| v * v).sum::<f64>().sqrt());
            hs.push(g.hx());
            errs.push(e);
        }
        let s = slope(&hs, &errs);
        assert!((3.7..=4.3).contains(&s), "{s}");
    }

    #[test]
    fn convection_is_fifth_order() {
        let u = |x: f64, y: f64| (PI * x / 2.0).sin() * (PI * y / 2.0).cos();
        let ux = |x: f64, y: f64| PI / 2.0 * (PI * x / 2.0).cos() * (PI * y / 2.0).cos();
        let uy = |x: f64, y: f64| -PI / 2.0 * (PI * x / 2.0).sin() * (PI * y / 2.0).sin();
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for n in [40, 80, 160] {
            let g = GridSpec::square(n, 0.0, 4.0).unwrap();
            let exact = g.sample(|x, y| -u(x, y) * (ux(x, y) + uy(x, y)));
            let c = burgers_convection(&g.sample(u), &g);
            hs.push(g.hx());
            errs.push(c.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        let s = slope(&hs, &errs);
        assert!((4.5..=5.5).contains(&s), "{s}");
    }

    #[test]
    fn upwinding_flips_with_sign() {
        // If u solves Burgers, so does -u(-x, -y); the discrete operator must
        // respect this, which requires the upwind side to flip with the sign.
        let n = 16;
        let g = GridSpec::square(n, 0.0, 4.0).unwrap();
        let u = g.sample(|x, y| (PI * x / 2.0).sin() + 0.3 * (PI * y).sin() + 0.2 * (PI * (x - y) / 4.0).cos() + 0.1);
        let reflect = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for i in 0..n {
                for j in 0..n {
                    out[((n - i) % n) * n + (n - j) % n] = -v[i * n + j];
                }
            }
            out
        };
        let a = reflect(&burgers_rhs(&u, &g));
        let b = burgers_rhs(&reflect(&u), &g);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-11, "{x} {y}");
        }
        let c = burgers_convection(&u, &g);
        assert!(c.iter().sum::<f64>().abs() <= 1e-12 * u.iter().map(|v| v * v).sum::<f64>().sqrt());
    }

    #[test]
    fn snapshot_count_rules() {
        let (p, _) = PdeProblem::heat_benchmark();
        assert_eq!(p.snapshot_count().unwrap(), 101);
        let bad = PdeProblem { dt_snapshot: 0.03, ..p };
        assert!(bad.snapshot_count().is_err());
        let zero = PdeProblem { dt_snapshot: 0.0, ..p };
        assert!(zero.snapshot_count().is_err());
        assert!(GridSpec::square(4, 0.0, 1.0).is_err());
    }

    #[test]
    fn heat_decays_and_zero_diffusion_is_static() {
        let g = GridSpec::square(10, 0.0, 1.0).unwrap();
        let p = PdeProblem { kind: PdeKind::Heat { mu: 0.01 }, t_final: 0.2, dt_snapshot: 0.05, initial_condition: InitialCondition::CosineDiagonal };
        let s = generate_snapshots(&p, &g, &IntegratorConfig::default()).unwrap();
        let norms: Vec<f64> = (0..s.n_snapshots()).map(|k| s.snapshot(k).iter().map(|v| v * v).sum::<f64>()).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]));
        let still = PdeProblem { kind: PdeKind::Heat { mu: 0.0 }, ..p };
        let s = generate_snapshots(&still, &g, &IntegratorConfig::default()).unwrap();
        for (a, b) in s.snapshot(0).iter().zip(s.snapshot(s.n_snapshots() - 1)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
