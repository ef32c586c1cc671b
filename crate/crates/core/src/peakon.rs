//! Peakon ODEs: `u = Σ p_i G(x - q_i)` with `G` the Green function of
//! `1 - α² ∂_xx` on the line or on a circle of circumference `L`.

use serde::Serialize;

use crate::dynamics::{ChState, VelocityField};
use crate::error::{Error, Result};
use crate::ode::{hermite, rk4_step};
use crate::spectral::{Grid1D, PeriodicField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelDomain {
    Line,
    Circle { length: f64 },
}

/// `Operator` is the true Green function (`(1 - α²∂xx) G = δ`); `Literal`
/// rescales it by `2α`, which gives `e^{-|x|}` on the line at `α = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    Operator,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenKernel {
    pub domain: KernelDomain,
    pub alpha: f64,
    pub normalization: Normalization,
}

impl GreenKernel {
    pub fn line(alpha: f64) -> Result<Self> {
        Self::new(KernelDomain::Line, alpha)
    }

    pub fn circle(alpha: f64, length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter(format!("circumference must be > 0, got {length}")));
        }
        Self::new(KernelDomain::Circle { length }, alpha)
    }

    fn new(domain: KernelDomain, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("kernel alpha must be > 0, got {alpha}")));
        }
        Ok(Self { domain, alpha, normalization: Normalization::Operator })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    fn factor(&self) -> f64 {
        match self.normalization {
            Normalization::Operator => 1.0,
            Normalization::Literal => 2.0 * self.alpha,
        }
    }

    /// Signed representative of `x` closest to zero (identity on the line).
    pub fn reduce(&self, x: f64) -> f64 {
        match self.domain {
            KernelDomain::Line => x,
            KernelDomain::Circle { length } => x - length * (x / length).round(),
        }
    }

    /// `(G(x), G'(x))`, with `G'(0) = 0` at the kink.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let a = self.alpha;
        let (g, dg) = match self.domain {
            KernelDomain::Line => {
                let e = (-x.abs() / a).exp();
                (e / (2.0 * a), -x.signum() * e / (2.0 * a * a))
            }
            KernelDomain::Circle { length } => {
                // cosh(z)/sinh(h) and sinh(z)/sinh(h) with z = (s - L/2)/α,
                // h = L/(2α), written with decaying exponentials only.
                let h = length / (2.0 * a);
                let s = x.rem_euclid(length);
                let z = (s - 0.5 * length) / a;
                let denom = 1.0 - (-2.0 * h).exp();
                let (near, far) = ((z.abs() - h).exp(), (-z.abs() - h).exp());
                let cosh_ratio = (near + far) / denom;
                let sinh_ratio = z.signum() * (near - far) / denom;
                (cosh_ratio / (2.0 * a), sinh_ratio / (2.0 * a * a))
            }
        };
        let dg = if x == 0.0 || self.reduce(x) == 0.0 { 0.0 } else { dg };
        (self.factor() * g, self.factor() * dg)
    }

    /// Jump `G'(0+) - G'(0-)` of the derivative at the kink.
    pub fn derivative_jump(&self) -> f64 {
        -self.factor() / (self.alpha * self.alpha)
    }
}

/// `(G(x), G'(x))` for `k`.
pub fn green_eval(k: &GreenKernel, x: f64) -> (f64, f64) {
    k.eval(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakonEnsemble {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub kernel: GreenKernel,
    pub t: f64,
}

impl PeakonEnsemble {
    pub fn new(q: Vec<f64>, p: Vec<f64>, kernel: GreenKernel) -> Result<Self> {
        if q.is_empty() || q.len() != p.len() {
            return Err(Error::InvalidParameter("need equally many positions and momenta (>= 1)".into()));
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("peakon ensemble"));
        }
        let q = q.into_iter().map(|x| kernel.reduce(x)).collect();
        Ok(Self { q, p, kernel, t: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `u(x)` and `u_x(x)`.
    pub fn field_with_derivative(&self, x: f64) -> (f64, f64) {
        field_at(&self.kernel, &self.q, &self.p, x)
    }

    pub fn field(&self, x: f64) -> f64 {
        self.field_with_derivative(x).0
    }

    pub fn hamiltonian(&self) -> f64 {
        hamiltonian(&self.kernel, &self.q, &self.p)
    }

    pub fn total_momentum(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Velocity sampled on `grid`.
    pub fn sample(&self, grid: Grid1D) -> PeriodicField {
        PeriodicField::from_fn(grid, |x| self.field(x))
    }

    /// Grid CH state whose velocity is the sampled peakon field.
    pub fn to_ch_state(&self, grid: Grid1D) -> Result<ChState> {
        if let KernelDomain::Circle { length } = self.kernel.domain {
            if (length - grid.length()).abs() > 1e-12 * length {
                return Err(Error::GridMismatch);
            }
        }
        ChState::from_velocity(&self.sample(grid), self.kernel.alpha)
    }

    /// Smallest distance between two peakons (infinite for one peakon).
    pub fn min_gap(&self) -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = self.kernel.reduce(self.q[i] - self.q[j]).abs();
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        best
    }
}

pub fn peakon_field(e: &PeakonEnsemble, x: f64) -> f64 {
    e.field(x)
}

fn field_at(k: &GreenKernel, q: &[f64], p: &[f64], x: f64) -> (f64, f64) {
    q.iter().zip(p).fold((0.0, 0.0), |(u, ux), (qi, pi)| {
        let (g, dg) = k.eval(x - qi);
        (u + pi * g, ux + pi * dg)
    })
}

fn hamiltonian(k: &GreenKernel, q: &[f64], p: &[f64]) -> f64 {
    let mut h = 0.0;
    for (qi, pi) in q.iter().zip(p) {
        for (qj, pj) in q.iter().zip(p) {
            h += pi * pj * k.eval(qi - qj).0;
        }
    }
    0.5 * h
}

fn tendency(k: &GreenKernel, q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut dq = vec![0.0; q.len()];
    let mut dp = vec![0.0; q.len()];
    for i in 0..q.len() {
        for j in 0..q.len() {
            let (g, dg) = k.eval(q[i] - q[j]);
            dq[i] += p[j] * g;
            dp[i] -= p[i] * p[j] * dg;
        }
    }
    (dq, dp)
}

fn check_collisions(k: &GreenKernel, q: &[f64], p: &[f64]) -> Result<()> {
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            let gap = k.reduce(q[i] - q[j]).abs();
            if gap == 0.0 && (p[i] + p[j]).abs() > 0.0 {
                return Err(Error::Collision { i, j });
            }
        }
    }
    Ok(())
}

/// `(q̇, ṗ)`.
pub fn peakon_rhs(e: &PeakonEnsemble) -> Result<(Vec<f64>, Vec<f64>)> {
    check_collisions(&e.kernel, &e.q, &e.p)?;
    Ok(tendency(&e.kernel, &e.q, &e.p))
}

fn packed_tendency(k: &GreenKernel, y: &[f64]) -> Vec<f64> {
    let n = y.len() / 2;
    let (mut dq, dp) = tendency(k, &y[..n], &y[n..]);
    dq.extend(dp);
    dq
}

fn rk4_unwrapped(k: &GreenKernel, q: &[f64], p: &[f64], t: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let y: Vec<f64> = q.iter().chain(p).copied().collect();
    let y = rk4_step(t, &y, dt, |_, y| packed_tendency(k, y));
    let n = q.len();
    (y[..n].to_vec(), y[n..].to_vec())
}

/// One RK4 step; positions are reduced afterwards.
pub fn peakon_step(e: &PeakonEnsemble, dt: f64) -> Result<PeakonEnsemble> {
    check_collisions(&e.kernel, &e.q, &e.p)?;
    let (q, p) = rk4_unwrapped(&e.kernel, &e.q, &e.p, e.t, dt);
    if q.iter().chain(&p).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("peakon ensemble"));
    }
    Ok(PeakonEnsemble {
        q: q.into_iter().map(|x| e.kernel.reduce(x)).collect(),
        p,
        kernel: e.kernel,
        t: e.t + dt,
    })
}

/// Antisymmetric pair `{(-q0, p0), (q0, -p0)}` approaching the fixed midpoint 0.
pub fn collision_scenario(p0: f64, q0: f64, kernel: GreenKernel) -> Result<PeakonEnsemble> {
    if !(p0 > 0.0) {
        return Err(Error::InvalidParameter(format!("p0 must be > 0, got {p0}")));
    }
    let upper = match kernel.domain {
        KernelDomain::Line => f64::INFINITY,
        KernelDomain::Circle { length } => 0.5 * length,
    };
    if !(q0 > 0.0 && q0 < upper) {
        return Err(Error::InvalidParameter(format!("q0 must lie in (0, L/2), got {q0}")));
    }
    PeakonEnsemble::new(vec![-q0, q0], vec![p0, -p0], kernel)
}

/// Stopping rule for collisions: gap below `epsilon` or `|p|` above `1/epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionRule {
    pub epsilon: f64,
}

impl Default for CollisionRule {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PeakonTermination {
    Completed,
    Collision { t: f64, i: usize, j: usize, gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakonRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub hamiltonian: f64,
}

/// Time-stepped peakon run; `q` is kept continuous in time (not reduced) so
/// the trajectory can be interpolated.
#[derive(Debug, Clone)]
pub struct PeakonTrajectory {
    pub kernel: GreenKernel,
    times: Vec<f64>,
    q: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    dq: Vec<Vec<f64>>,
    dp: Vec<Vec<f64>>,
    pub termination: PeakonTermination,
}

impl PeakonTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one state")
    }

    pub fn ensemble_at_index(&self, i: usize) -> PeakonEnsemble {
        PeakonEnsemble {
            q: self.q[i].iter().map(|&x| self.kernel.reduce(x)).collect(),
            p: self.p[i].clone(),
            kernel: self.kernel,
            t: self.times[i],
        }
    }

    /// `(q, p)` at `t` by cubic Hermite interpolation between steps.
    pub fn state_at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (t0, t1) = (self.times[0], self.final_time());
        let slack = 1e-12 * (1.0 + t1.abs());
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::OutOfHistory(t));
        }
        if self.times.len() == 1 {
            return Ok((self.q[0].clone(), self.p[0].clone()));
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (a, b) = (i - 1, i);
        let interp = |y: &[Vec<f64>], d: &[Vec<f64>]| -> Vec<f64> {
            (0..y[a].len())
                .map(|k| hermite(self.times[a], self.times[b], y[a][k], y[b][k], d[a][k], d[b][k], t))
                .collect()
        };
        Ok((interp(&self.q, &self.dq), interp(&self.p, &self.dp)))
    }

    pub fn records(&self) -> Vec<PeakonRecord> {
        (0..self.times.len())
            .map(|i| PeakonRecord {
                t: self.times[i],
                q: self.q[i].iter().map(|&x| self.kernel.reduce(x)).collect(),
                p: self.p[i].clone(),
                hamiltonian: hamiltonian(&self.kernel, &self.q[i], &self.p[i]),
            })
            .collect()
    }
}

impl VelocityField for PeakonTrajectory {
    fn sample(&self, t: f64, points: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (q, p) = self.state_at(t)?;
        Ok(points.iter().map(|&x| field_at(&self.kernel, &q, &p, x)).unzip())
    }
}

/// Integrate with RK4 from `e.t` to `t_end`, stopping early at a collision.
pub fn peakon_run(e: &PeakonEnsemble, dt: f64, t_end: f64, rule: CollisionRule) -> Result<PeakonTrajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    check_collisions(&e.kernel, &e.q, &e.p)?;
    let k = e.kernel;
    let steps = ((t_end - e.t) / dt).round().max(0.0) as usize;
    let (dq0, dp0) = tendency(&k, &e.q, &e.p);
    let mut traj = PeakonTrajectory {
        kernel: k,
        times: vec![e.t],
        q: vec![e.q.clone()],
        p: vec![e.p.clone()],
        dq: vec![dq0],
        dp: vec![dp0],
        termination: PeakonTermination::Completed,
    };
    for s in 0..steps {
        let (q, p) = (traj.q.last().unwrap().clone(), traj.p.last().unwrap().clone());
        let t = e.t + s as f64 * dt;
        let (q, p) = rk4_unwrapped(&k, &q, &p, t, dt);
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("peakon ensemble"));
        }
        let (dq, dp) = tendency(&k, &q, &p);
        let current = PeakonEnsemble { q: q.clone(), p: p.clone(), kernel: k, t: t + dt };
        traj.times.push(t + dt);
        traj.q.push(q);
        traj.p.push(p);
        traj.dq.push(dq);
        traj.dp.push(dp);
        let (gap, i, j) = current.min_gap();
        let pmax = current.p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if gap < rule.epsilon || pmax > 1.0 / rule.epsilon {
            traj.termination = PeakonTermination::Collision { t: t + dt, i, j, gap };
            break;
        }
    }
    Ok(traj)
}
