//! Camassa–Holm (general α) and CH2 dynamics in momentum form, RK4 stepping,
//! Lagrangian flow maps and blow-up monitoring.
//!
//! CH:  `m_t + u m_x + 2 m u_x = 0`, `m = u - α² u_xx`.
//! CH2: the same with `- g ρ ρ_x` on the right and `ρ_t + (ρ u)_x = 0`.
//!
//! `α = 1/2` is the convention whose geodesics lift to Euler on the unit cone;
//! `α = 1` gives the standard form of the equation.

use std::fmt;

use rustfft::num_complex::Complex64;
use serde::Serialize;
use thiserror::Error as ThisError;

use crate::error::{Error, Result};
use crate::ode::{hermite_weights, rk4_step};
use crate::spectral::{Grid1D, PeriodicField, TrigInterpolant};

/// Helmholtz parameter of the equation that embeds in Euler on the unit cone.
pub const ALPHA_CONE: f64 = 0.5;
/// Helmholtz parameter of the standard form.
pub const ALPHA_STANDARD: f64 = 1.0;

/// CFL safety factor: `dt <= CFL_FACTOR * dx / max|u|`.
pub const CFL_FACTOR: f64 = 0.5;
/// Runs stop when the flow Jacobian drops below this value.
pub const JACOBIAN_FLOOR: f64 = 1e-3;
/// Runs stop when any state component exceeds this magnitude.
pub const FIELD_LIMIT: f64 = 1e8;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")))
    }
}

/// `P(u m_x) + 2 P(m u_x)`, the CH transport term with 2/3-rule products.
pub(crate) fn momentum_flux(u: &PeriodicField, m: &PeriodicField) -> PeriodicField {
    let mx = m.diff(1);
    let ux = u.diff(1);
    &u.mul_dealiased(&mx) + &m.mul_dealiased(&ux).scale(2.0)
}

/// Momentum-form CH state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChState {
    pub m: PeriodicField,
    pub alpha: f64,
    pub t: f64,
}

impl ChState {
    /// Build from a momentum field; unresolved modes are removed so the state
    /// lives in the 2/3-rule band from the start.
    pub fn new(m: PeriodicField, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !m.is_finite() {
            return Err(Error::NonFinite("CH momentum"));
        }
        Ok(Self { m: m.dealias(), alpha, t: 0.0 })
    }

    pub fn from_velocity(u: &PeriodicField, alpha: f64) -> Result<Self> {
        Self::new(u.helmholtz(alpha), alpha)
    }

    pub fn velocity(&self) -> PeriodicField {
        self.m.helmholtz_inv(self.alpha)
    }

    pub fn energy(&self) -> f64 {
        hdiv_energy(&self.velocity(), self.alpha)
    }
}

/// Momentum-form CH2 state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ch2State {
    pub m: PeriodicField,
    pub rho: PeriodicField,
    pub alpha: f64,
    pub gravity: f64,
    pub t: f64,
}

impl Ch2State {
    pub fn new(m: PeriodicField, rho: PeriodicField, alpha: f64, gravity: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(Error::InvalidParameter(format!("gravity must be > 0, got {gravity}")));
        }
        if m.grid() != rho.grid() {
            return Err(Error::GridMismatch);
        }
        if !m.is_finite() || !rho.is_finite() {
            return Err(Error::NonFinite("CH2 state"));
        }
        if rho.min() <= 0.0 {
            return Err(Error::InvalidParameter("initial density must be positive".into()));
        }
        Ok(Self { m: m.dealias(), rho: rho.dealias(), alpha, gravity, t: 0.0 })
    }

    pub fn from_velocity(
        u: &PeriodicField,
        rho: PeriodicField,
        alpha: f64,
        gravity: f64,
    ) -> Result<Self> {
        Self::new(u.helmholtz(alpha), rho, alpha, gravity)
    }

    pub fn velocity(&self) -> PeriodicField {
        self.m.helmholtz_inv(self.alpha)
    }

    pub fn energy(&self) -> f64 {
        let rho2 = self.rho.zip_map(&self.rho, |a, b| a * b).integrate();
        hdiv_energy(&self.velocity(), self.alpha) + 0.5 * self.gravity * rho2
    }
}

/// `½ ∫ u² + α² u_x² dx`.
pub fn hdiv_energy(u: &PeriodicField, alpha: f64) -> f64 {
    let ux = u.diff(1);
    let density = u.zip_map(&ux, |a, b| a * a + alpha * alpha * b * b);
    0.5 * density.integrate()
}

/// `∂_t m` for CH.
pub fn ch_rhs(s: &ChState) -> Result<PeriodicField> {
    if !s.m.is_finite() {
        return Err(Error::NonFinite("CH momentum"));
    }
    Ok(-momentum_flux(&s.m.helmholtz_inv(s.alpha), &s.m))
}

fn ch2_tendency(
    m: &PeriodicField,
    rho: &PeriodicField,
    alpha: f64,
    gravity: f64,
) -> (PeriodicField, PeriodicField) {
    let u = m.helmholtz_inv(alpha);
    let pressure = rho.mul_dealiased(&rho.diff(1)).scale(gravity);
    let dm = -(&momentum_flux(&u, m) + &pressure);
    let drho = -rho.mul_dealiased(&u).diff(1);
    (dm, drho)
}

/// `(∂_t m, ∂_t ρ)` for CH2.
pub fn ch2_rhs(s: &Ch2State) -> Result<(PeriodicField, PeriodicField)> {
    if !s.m.is_finite() || !s.rho.is_finite() {
        return Err(Error::NonFinite("CH2 state"));
    }
    Ok(ch2_tendency(&s.m, &s.rho, s.alpha, s.gravity))
}

/// Common interface of the grid solvers for RK4 stepping and diagnostics.
pub trait Evolve: Clone + fmt::Debug {
    fn time(&self) -> f64;
    fn grid(&self) -> &Grid1D;
    fn to_vector(&self) -> Vec<f64>;
    /// A copy of `self` (same parameters) holding `y` at time `t`.
    fn with_vector(&self, y: &[f64], t: f64) -> Self;
    /// Tendency of the packed state `y` under the parameters of `self`.
    fn tendency_vector(&self, y: &[f64]) -> Vec<f64>;
    fn velocity(&self) -> PeriodicField;
    /// `∂_t u`, obtained by inverting the Helmholtz operator on `∂_t m`.
    fn velocity_tendency(&self) -> PeriodicField;
    fn energy(&self) -> f64;
    /// `∫ m dx`.
    fn momentum_integral(&self) -> f64;
    fn momentum_scale(&self) -> f64;
    fn density_integral(&self) -> Option<f64> {
        None
    }
}

impl Evolve for ChState {
    fn time(&self) -> f64 {
        self.t
    }

    fn grid(&self) -> &Grid1D {
        self.m.grid()
    }

    fn to_vector(&self) -> Vec<f64> {
        self.m.values().to_vec()
    }

    fn with_vector(&self, y: &[f64], t: f64) -> Self {
        Self { m: PeriodicField::from_raw(*self.grid(), y.to_vec()), alpha: self.alpha, t }
    }

    fn tendency_vector(&self, y: &[f64]) -> Vec<f64> {
        let m = PeriodicField::from_raw(*self.grid(), y.to_vec());
        (-momentum_flux(&m.helmholtz_inv(self.alpha), &m)).into_values()
    }

    fn velocity(&self) -> PeriodicField {
        ChState::velocity(self)
    }

    fn velocity_tendency(&self) -> PeriodicField {
        let dm = PeriodicField::from_raw(*self.grid(), self.tendency_vector(self.m.values()));
        dm.helmholtz_inv(self.alpha)
    }

    fn energy(&self) -> f64 {
        ChState::energy(self)
    }

    fn momentum_integral(&self) -> f64 {
        self.m.integrate()
    }

    fn momentum_scale(&self) -> f64 {
        self.m.integrate_abs()
    }
}

impl Evolve for Ch2State {
    fn time(&self) -> f64 {
        self.t
    }

    fn grid(&self) -> &Grid1D {
        self.m.grid()
    }

    fn to_vector(&self) -> Vec<f64> {
        let mut y = self.m.values().to_vec();
        y.extend_from_slice(self.rho.values());
        y
    }

    fn with_vector(&self, y: &[f64], t: f64) -> Self {
        let n = self.grid().n();
        Self {
            m: PeriodicField::from_raw(*self.grid(), y[..n].to_vec()),
            rho: PeriodicField::from_raw(*self.grid(), y[n..].to_vec()),
            alpha: self.alpha,
            gravity: self.gravity,
            t,
        }
    }

    fn tendency_vector(&self, y: &[f64]) -> Vec<f64> {
        let n = self.grid().n();
        let m = PeriodicField::from_raw(*self.grid(), y[..n].to_vec());
        let rho = PeriodicField::from_raw(*self.grid(), y[n..].to_vec());
        let (dm, drho) = ch2_tendency(&m, &rho, self.alpha, self.gravity);
        let mut out = dm.into_values();
        out.extend(drho.into_values());
        out
    }

    fn velocity(&self) -> PeriodicField {
        Ch2State::velocity(self)
    }

    fn velocity_tendency(&self) -> PeriodicField {
        let (dm, _) = ch2_tendency(&self.m, &self.rho, self.alpha, self.gravity);
        dm.helmholtz_inv(self.alpha)
    }

    fn energy(&self) -> f64 {
        Ch2State::energy(self)
    }

    fn momentum_integral(&self) -> f64 {
        self.m.integrate()
    }

    fn momentum_scale(&self) -> f64 {
        self.m.integrate_abs()
    }

    fn density_integral(&self) -> Option<f64> {
        Some(self.rho.integrate())
    }
}

#[derive(Debug, ThisError)]
pub enum StepError<S: fmt::Debug> {
    #[error(transparent)]
    Invalid(#[from] Error),
    /// The step produced NaN/Inf; the state before the step is kept.
    #[error("non-finite state after step from t = {t}")]
    Diverged { t: f64, last_valid: Box<S> },
}

/// Largest step allowed by the CFL guard.
pub fn cfl_bound<S: Evolve>(s: &S) -> f64 {
    let speed = s.velocity().max_abs();
    if speed > 0.0 {
        CFL_FACTOR * s.grid().dx() / speed
    } else {
        f64::INFINITY
    }
}

/// Advance by one RK4 step of size `dt`.
pub fn step<S: Evolve>(s: &S, dt: f64) -> std::result::Result<S, StepError<S>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")).into());
    }
    let bound = cfl_bound(s);
    if dt > bound {
        return Err(Error::Cfl { dt, bound }.into());
    }
    let y = rk4_step(s.time(), &s.to_vector(), dt, |_, y| s.tendency_vector(y));
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StepError::Diverged { t: s.time(), last_valid: Box::new(s.clone()) });
    }
    Ok(s.with_vector(&y, s.time() + dt))
}

/// Lagrangian flow on the circle, stored as displacement `φ - id` and
/// Jacobian `∂_θ φ` at the grid labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub displacement: PeriodicField,
    pub jacobian: PeriodicField,
}

impl FlowMap {
    pub fn identity(grid: Grid1D) -> Self {
        Self {
            displacement: PeriodicField::zeros(grid),
            jacobian: PeriodicField::constant(grid, 1.0),
        }
    }

    pub fn new(displacement: PeriodicField, jacobian: PeriodicField) -> Result<Self> {
        if displacement.grid() != jacobian.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { displacement, jacobian })
    }

    pub fn grid(&self) -> &Grid1D {
        self.displacement.grid()
    }

    /// Images `φ(θ_j)` of the labels (not reduced mod L).
    pub fn positions(&self) -> Vec<f64> {
        let grid = *self.grid();
        self.displacement
            .values()
            .iter()
            .enumerate()
            .map(|(j, d)| grid.point(j) + d)
            .collect()
    }
}

/// `min_θ ∂_θ φ`.
pub fn blowup_monitor(f: &FlowMap) -> f64 {
    f.jacobian.min()
}

/// A time-dependent velocity field on the circle: `(u, u_x)` at points.
pub trait VelocityField {
    fn sample(&self, t: f64, points: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Closure-backed velocity field `(t, x) -> (u, u_x)`.
pub struct FnVelocity<F>(pub F);

impl<F: Fn(f64, f64) -> (f64, f64)> VelocityField for FnVelocity<F> {
    fn sample(&self, t: f64, points: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(points.iter().map(|&x| (self.0)(t, x)).unzip())
    }
}

#[derive(Debug, Clone)]
struct VelocitySnapshot {
    t: f64,
    u: Vec<Complex64>,
    ut: Vec<Complex64>,
}

/// Velocity snapshots with their tendencies; evaluated by cubic Hermite
/// interpolation in time and trigonometric interpolation in space.
#[derive(Debug, Clone)]
pub struct GridVelocityHistory {
    grid: Grid1D,
    snapshots: Vec<VelocitySnapshot>,
}

fn half_spectrum(f: &PeriodicField) -> Vec<Complex64> {
    let n = f.grid().n();
    let scale = 1.0 / n as f64;
    f.spectrum()[..=n / 2].iter().map(|c| c * scale).collect()
}

impl GridVelocityHistory {
    pub fn new(grid: Grid1D) -> Self {
        Self { grid, snapshots: Vec::new() }
    }

    pub fn push(&mut self, t: f64, u: &PeriodicField, ut: &PeriodicField) -> Result<()> {
        if u.grid() != &self.grid || ut.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if let Some(last) = self.snapshots.last() {
            if t <= last.t {
                return Err(Error::InvalidParameter("snapshots must increase in time".into()));
            }
        }
        self.snapshots.push(VelocitySnapshot { t, u: half_spectrum(u), ut: half_spectrum(ut) });
        Ok(())
    }

    pub fn push_state<S: Evolve>(&mut self, s: &S) -> Result<()> {
        self.push(s.time(), &s.velocity(), &s.velocity_tendency())
    }

    /// Drop all snapshots but the most recent `keep`.
    pub fn retain_last(&mut self, keep: usize) {
        let len = self.snapshots.len();
        if len > keep {
            self.snapshots.drain(..len - keep);
        }
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.snapshots.first()?.t, self.snapshots.last()?.t))
    }

    fn interpolant_at(&self, t: f64) -> Result<TrigInterpolant> {
        let (t0, t1) = self.span().ok_or(Error::OutOfHistory(t))?;
        let slack = 1e-12 * (1.0 + t1.abs());
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::OutOfHistory(t));
        }
        let kappa = self.grid.kappa();
        if self.snapshots.len() == 1 {
            return Ok(TrigInterpolant::from_half_spectrum(kappa, self.snapshots[0].u.clone()));
        }
        let i = self
            .snapshots
            .partition_point(|s| s.t <= t)
            .clamp(1, self.snapshots.len() - 1);
        let (a, b) = (&self.snapshots[i - 1], &self.snapshots[i]);
        let (w0, w1, v0, v1) = hermite_weights(a.t, b.t, t);
        let coeffs = (0..a.u.len())
            .map(|k| a.u[k] * w0 + b.u[k] * w1 + a.ut[k] * v0 + b.ut[k] * v1)
            .collect();
        Ok(TrigInterpolant::from_half_spectrum(kappa, coeffs))
    }
}

impl VelocityField for GridVelocityHistory {
    fn sample(&self, t: f64, points: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let it = self.interpolant_at(t)?;
        Ok(points.iter().map(|&x| it.eval_with_derivative(x)).unzip())
    }
}

/// Result of [`flow_advance`].
#[derive(Debug, Clone)]
pub struct FlowAdvance {
    pub flow: FlowMap,
    pub t: f64,
    /// Set when `min ∂_θ φ` fell to the floor and integration stopped early.
    pub blowup: bool,
}

/// Integrate `∂_t φ = u(t, φ)` and `∂_t ∂_θφ = u_x(t, φ) ∂_θφ` from `t0` to
/// `t1` with RK4 steps no larger than `dt`.
pub fn flow_advance(
    f: &FlowMap,
    velocity: &dyn VelocityField,
    t0: f64,
    t1: f64,
    dt: f64,
    jacobian_floor: f64,
) -> Result<FlowAdvance> {
    if !(dt > 0.0) || t1 < t0 {
        return Err(Error::InvalidParameter("flow_advance needs dt > 0 and t1 >= t0".into()));
    }
    let grid = *f.grid();
    let n = grid.n();
    let labels = grid.points();
    let steps = ((t1 - t0) / dt).ceil().max(0.0) as usize;
    let mut y: Vec<f64> = f.displacement.values().iter().chain(f.jacobian.values()).copied().collect();
    let mut t = t0;
    let mut failure = None;
    let mut blowup = false;
    for i in 0..steps {
        let t_next = if i + 1 == steps { t1 } else { t0 + (i + 1) as f64 * (t1 - t0) / steps as f64 };
        let h = t_next - t;
        y = rk4_step(t, &y, h, |s, v| {
            let positions: Vec<f64> = labels.iter().zip(&v[..n]).map(|(x, d)| x + d).collect();
            match velocity.sample(s, &positions) {
                Ok((u, ux)) => {
                    let mut out = u;
                    out.extend(ux.iter().zip(&v[n..]).map(|(a, j)| a * j));
                    out
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![0.0; 2 * n]
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        t = t_next;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow map"));
        }
        if y[n..].iter().copied().fold(f64::INFINITY, f64::min) <= jacobian_floor {
            blowup = true;
            break;
        }
    }
    let flow = FlowMap {
        displacement: PeriodicField::from_raw(grid, y[..n].to_vec()),
        jacobian: PeriodicField::from_raw(grid, y[n..].to_vec()),
    };
    Ok(FlowAdvance { flow, t, blowup })
}

/// One row of the emitted time series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRecord {
    pub t: f64,
    pub energy: f64,
    pub momentum: f64,
    pub density: Option<f64>,
    pub min_jacobian: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    JacobianFloor { t: f64, min_jacobian: f64 },
    FieldLimit { t: f64 },
    Diverged { t: f64 },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub dt: f64,
    pub t_end: f64,
    pub track_flow: bool,
    pub jacobian_floor: f64,
    pub field_limit: f64,
    /// Number of most recent states returned in [`RunOutcome::recent`].
    pub keep_recent: usize,
    /// Times at which flow-map snapshots are recorded (nearest step).
    pub flow_snapshot_times: Vec<f64>,
}

impl RunOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            track_flow: false,
            jacobian_floor: JACOBIAN_FLOOR,
            field_limit: FIELD_LIMIT,
            keep_recent: 1,
            flow_snapshot_times: Vec::new(),
        }
    }

    pub fn with_flow(mut self) -> Self {
        self.track_flow = true;
        self
    }

    pub fn keep_recent(mut self, k: usize) -> Self {
        self.keep_recent = k.max(1);
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome<S> {
    pub state: S,
    pub series: Vec<SeriesRecord>,
    pub flow: Option<FlowMap>,
    pub flow_snapshots: Vec<(f64, FlowMap)>,
    /// Oldest first; the last entry is `state`.
    pub recent: Vec<S>,
    pub termination: Termination,
}

fn record<S: Evolve>(s: &S, flow: Option<&FlowMap>) -> SeriesRecord {
    SeriesRecord {
        t: s.time(),
        energy: s.energy(),
        momentum: s.momentum_integral(),
        density: s.density_integral(),
        min_jacobian: flow.map(blowup_monitor),
    }
}

/// Fixed-step RK4 run from `initial` to `t_end`, with optional flow tracking.
pub fn integrate<S: Evolve>(initial: S, opts: &RunOptions) -> Result<RunOutcome<S>> {
    let steps = ((opts.t_end - initial.time()) / opts.dt).round().max(0.0) as usize;
    let mut state = initial;
    let mut flow = opts.track_flow.then(|| FlowMap::identity(*state.grid()));
    let mut history = GridVelocityHistory::new(*state.grid());
    if flow.is_some() {
        history.push_state(&state)?;
    }
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = opts.flow_snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    let mut take_snapshots = |t: f64, f: &FlowMap, pending: &mut Vec<f64>| {
        while let Some(&want) = pending.first() {
            if want <= t + 0.5 * opts.dt {
                snapshots.push((want, f.clone()));
                pending.remove(0);
            } else {
                break;
            }
        }
    };
    if let Some(f) = &flow {
        take_snapshots(state.time(), f, &mut pending);
    }
    let mut series = vec![record(&state, flow.as_ref())];
    let mut recent = vec![state.clone()];
    let mut termination = Termination::Completed;

    for _ in 0..steps {
        let next = match step(&state, opts.dt) {
            Ok(s) => s,
            Err(StepError::Diverged { t, .. }) => {
                termination = Termination::Diverged { t };
                break;
            }
            Err(StepError::Invalid(e)) => return Err(e),
        };
        if next.to_vector().iter().any(|v| v.abs() > opts.field_limit) {
            termination = Termination::FieldLimit { t: next.time() };
            state = next;
            break;
        }
        if let Some(f) = flow.as_mut() {
            history.push_state(&next)?;
            history.retain_last(2);
            let adv = flow_advance(f, &history, state.time(), next.time(), opts.dt, opts.jacobian_floor)?;
            *f = adv.flow;
            take_snapshots(next.time(), f, &mut pending);
            if adv.blowup {
                termination = Termination::JacobianFloor {
                    t: next.time(),
                    min_jacobian: blowup_monitor(f),
                };
            }
        }
        state = next;
        series.push(record(&state, flow.as_ref()));
        recent.push(state.clone());
        if recent.len() > opts.keep_recent {
            recent.remove(0);
        }
        if termination != Termination::Completed {
            break;
        }
    }
    if recent.last().map(|s| s.time()) != Some(state.time()) {
        recent.push(state.clone());
        if recent.len() > opts.keep_recent {
            recent.remove(0);
        }
    }
    Ok(RunOutcome { state, series, flow, flow_snapshots: snapshots, recent, termination })
}

/// Relative drift `|I(T) - I(0)| / max(|I(0)|, scale)` of a conserved quantity.
pub fn relative_drift(initial: f64, current: f64, scale: f64) -> f64 {
    let denom = initial.abs().max(scale.abs());
    if denom > 0.0 {
        (current - initial).abs() / denom
    } else {
        (current - initial).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::observed_order;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid1D {
        Grid1D::periodic(n).unwrap()
    }

    fn smooth_ch(n: usize, alpha: f64) -> ChState {
        let u = PeriodicField::from_fn(grid(n), |x| 0.5 * x.sin() + 0.2 * (2.0 * x).cos());
        ChState::from_velocity(&u, alpha).unwrap()
    }

    fn stratified(n: usize) -> Ch2State {
        let g = grid(n);
        let u = PeriodicField::from_fn(g, f64::sin);
        let rho = PeriodicField::from_fn(g, |x| 1.0 + 0.5 * x.cos());
        Ch2State::from_velocity(&u, rho, 0.5, 1.0).unwrap()
    }

    #[test]
    fn constants_are_steady() {
        let s = ChState::new(PeriodicField::constant(grid(64), 0.7), 0.5).unwrap();
        assert!(ch_rhs(&s).unwrap().max_abs() < 1e-14);
        let mut cur = s.clone();
        for _ in 0..100 {
            cur = step(&cur, 0.01).unwrap();
        }
        assert!((&cur.m - &s.m).max_abs() < 1e-13);
        assert!((cur.t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn momentum_form_matches_velocity_form() {
        // u-form of the α = 1/2 equation:
        // (1 - ¼∂xx) u_t = -(3 u u_x - ½ u_x u_xx - ¼ u u_xxx)
        let g = grid(64);
        let s = ChState::new(PeriodicField::from_fn(g, f64::sin), 0.5).unwrap();
        let u = s.velocity();
        let (ux, uxx, uxxx) = (u.diff(1), u.diff(2), u.diff(3));
        let direct = u
            .zip_map(&ux, |a, b| 3.0 * a * b)
            .zip_map(&ux.zip_map(&uxx, |a, b| a * b), |acc, v| acc - 0.5 * v)
            .zip_map(&u.zip_map(&uxxx, |a, b| a * b), |acc, v| acc - 0.25 * v)
            .scale(-1.0);
        let rhs = ch_rhs(&s).unwrap();
        assert!((&rhs - &direct).max_abs() < 1e-10);
    }

    #[test]
    fn single_peakon_travels() {
        // Compare ∂_t u with -c ∂_x u for a sampled circle peakon; the kink
        // limits accuracy so the error must shrink as n grows.
        use crate::peakon::GreenKernel;
        let alpha = 0.5;
        let kernel = GreenKernel::circle(alpha, 2.0 * PI).unwrap();
        let speed = kernel.eval(0.0).0;
        let errs: Vec<f64> = [64, 128, 256, 512]
            .iter()
            .map(|&n| {
                let g = grid(n);
                let u = PeriodicField::from_fn(g, |x| kernel.eval(x - PI).0);
                let s = ChState::from_velocity(&u, alpha).unwrap();
                let ut = s.velocity_tendency();
                let expected = s.velocity().diff(1).scale(-speed);
                (&ut - &expected).l2_norm() / expected.l2_norm()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "errors {errs:?}");
        }
    }

    #[test]
    fn ch2_trivial_states() {
        let g = grid(32);
        let s = Ch2State::new(PeriodicField::zeros(g), PeriodicField::constant(g, 2.0), 0.5, 1.0).unwrap();
        let (dm, drho) = ch2_rhs(&s).unwrap();
        assert!(dm.max_abs() < 1e-14 && drho.max_abs() < 1e-14);
    }

    #[test]
    fn ch2_vanishing_gravity_reduces_to_ch() {
        let mut s = stratified(64);
        s.gravity = 1e-300;
        let (dm, _) = ch2_rhs(&s).unwrap();
        let ch = ch_rhs(&ChState { m: s.m.clone(), alpha: s.alpha, t: 0.0 }).unwrap();
        assert!((&dm - &ch).max_abs() < 1e-14);
    }

    #[test]
    fn ch2_rejects_invalid_parameters() {
        let g = grid(16);
        let u = PeriodicField::zeros(g);
        assert!(Ch2State::new(u.clone(), PeriodicField::constant(g, -1.0), 0.5, 1.0).is_err());
        assert!(Ch2State::new(u.clone(), PeriodicField::constant(g, 1.0), 0.5, 0.0).is_err());
        assert!(ChState::new(u, -0.5).is_err());
    }

    #[test]
    fn continuity_tendency_matches_flow_transport() {
        // Mass is carried by the flow, ρ(h, φ) ∂φ = ρ0, and the Eulerian
        // difference quotient approaches ∂_t ρ.
        let s = stratified(128);
        let (_, drho) = ch2_rhs(&s).unwrap();
        let h = 1e-3;
        let mut hist = GridVelocityHistory::new(*s.m.grid());
        hist.push_state(&s).unwrap();
        let fwd = step(&s, h).unwrap();
        hist.push_state(&fwd).unwrap();
        let flow = flow_advance(&FlowMap::identity(*s.m.grid()), &hist, 0.0, h, h, 0.0).unwrap().flow;
        let rho_at = fwd.rho.interp(&flow.positions());
        for j in (0..128).step_by(16) {
            let lag = rho_at[j] * flow.jacobian.values()[j];
            assert!((lag - s.rho.values()[j]).abs() < 1e-9, "mass along flow");
        }
        let fd = (&fwd.rho - &s.rho).scale(1.0 / h);
        assert!((&fd - &drho).max_abs() < 5e-3);
    }

    #[test]
    fn rk4_convergence_is_fourth_order() {
        let s0 = smooth_ch(64, 0.5);
        let run = |dt: f64| integrate(s0.clone(), &RunOptions::new(dt, 0.5)).unwrap().state;
        let reference = run(0.0025);
        let e1 = (&run(0.02).m - &reference.m).l2_norm();
        let e2 = (&run(0.01).m - &reference.m).l2_norm();
        let order = observed_order(e1, e2, 2.0);
        assert!((order - 4.0).abs() < 1.0, "order {order}");
    }

    #[test]
    fn energy_of_sine() {
        let u = PeriodicField::from_fn(grid(32), f64::sin);
        assert!((hdiv_energy(&u, 0.5) - 5.0 * PI / 8.0).abs() < 1e-13);
        assert_eq!(hdiv_energy(&PeriodicField::zeros(grid(32)), 0.5), 0.0);
    }

    #[test]
    fn smooth_runs_conserve_invariants() {
        let out = integrate(smooth_ch(256, 0.5), &RunOptions::new(1e-3, 1.0)).unwrap();
        let (a, b) = (&out.series[0], out.series.last().unwrap());
        assert!(relative_drift(a.energy, b.energy, 0.0) < 1e-8);
        assert!(relative_drift(a.momentum, b.momentum, out.state.momentum_scale()) < 1e-10);

        let out = integrate(stratified(128), &RunOptions::new(1e-3, 1.0)).unwrap();
        let (a, b) = (&out.series[0], out.series.last().unwrap());
        assert!(relative_drift(a.energy, b.energy, 0.0) < 1e-8);
        assert!(relative_drift(a.density.unwrap(), b.density.unwrap(), 0.0) < 1e-10);
    }

    #[test]
    fn cfl_guard() {
        let s = smooth_ch(64, 0.5);
        assert!(matches!(step(&s, 1.0), Err(StepError::Invalid(Error::Cfl { .. }))));
        assert!(matches!(step(&s, -1.0), Err(StepError::Invalid(_))));
    }

    #[test]
    fn flow_of_zero_and_constant_velocity() {
        let g = grid(32);
        let id = FlowMap::identity(g);
        let still = FnVelocity(|_, _| (0.0, 0.0));
        let out = flow_advance(&id, &still, 0.0, 1.0, 0.1, 0.0).unwrap();
        assert_eq!(out.flow, id);
        let drift = FnVelocity(|_, _| (0.3, 0.0));
        let out = flow_advance(&id, &drift, 0.0, 2.0, 0.1, 0.0).unwrap();
        assert!(out.flow.displacement.values().iter().all(|d| (d - 0.6).abs() < 1e-13));
        assert!(out.flow.jacobian.values().iter().all(|j| (j - 1.0).abs() < 1e-15));
    }

    #[test]
    fn flow_velocity_consistency() {
        // ∂_t φ must equal u(t, φ) along a smooth CH run.
        let s0 = smooth_ch(64, 0.5);
        let dt = 1e-3;
        let out = integrate(s0, &RunOptions::new(dt, 0.2).with_flow().keep_recent(5)).unwrap();
        let flows: Vec<FlowMap> = {
            // rerun with snapshots at the last three steps
            let mut opts = RunOptions::new(dt, 0.2).with_flow();
            opts.flow_snapshot_times = vec![0.2 - 2.0 * dt, 0.2 - dt, 0.2];
            let o = integrate(smooth_ch(64, 0.5), &opts).unwrap();
            o.flow_snapshots.into_iter().map(|(_, f)| f).collect()
        };
        assert_eq!(flows.len(), 3);
        let dphi = (&flows[2].displacement - &flows[0].displacement).scale(0.5 / dt);
        let u_mid = out.recent[3].velocity().interp(&flows[1].positions());
        let err = dphi
            .values()
            .iter()
            .zip(&u_mid)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn blowup_monitor_closed_forms() {
        let g = grid(64);
        assert_eq!(blowup_monitor(&FlowMap::identity(g)), 1.0);
        let f = FlowMap::new(
            PeriodicField::from_fn(g, |x| 0.5 * x.sin()),
            PeriodicField::from_fn(g, |x| 1.0 + 0.5 * x.cos()),
        )
        .unwrap();
        assert!((blowup_monitor(&f) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn history_rejects_out_of_range_queries() {
        let g = grid(16);
        let mut h = GridVelocityHistory::new(g);
        assert!(h.sample(0.0, &[0.0]).is_err());
        let u = PeriodicField::from_fn(g, f64::sin);
        h.push(0.0, &u, &u).unwrap();
        h.push(0.1, &u, &u).unwrap();
        assert!(h.push(0.05, &u, &u).is_err());
        assert!(h.sample(0.2, &[0.0]).is_err());
        assert!(h.sample(0.05, &[0.0]).is_ok());
    }
}
