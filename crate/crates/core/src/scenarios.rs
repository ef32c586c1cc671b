//! Composed experiments: each returns plain data that the acceptance tests and
//! the command-line runner compare against [`crate::thresholds`].

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{figure1_emit, Figure1Frame, CHECK_RADII};
use crate::dynamics::{blowup_monitor, flow_advance, integrate, ChState, Evolve, FlowMap, RunOptions, Termination};
use crate::error::{Error, Result};
use crate::euler::{
    backward_difference, divergence_report, euler_consistency_residual, random_band_limited, ResidualReport,
    TimeDerivative,
};
use crate::ode::observed_order;
use crate::peakon::{collision_scenario, peakon_run, CollisionRule, GreenKernel, PeakonEnsemble, PeakonTermination};
use crate::presets;
use crate::spectral::{Grid1D, PeriodicField};
use crate::warped::{eisenhart_verify, Quadratic, SharedField};

/// Largest weighted-divergence residual over `count` random band-limited
/// velocities at the standard radii.
pub fn random_divergence(n: usize, count: usize, seed: u64) -> Result<f64> {
    let grid = Grid1D::periodic(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let u = random_band_limited(grid, n / 4, &mut rng);
        worst = worst.max(divergence_report(&u, &CHECK_RADII)?.linf);
    }
    Ok(worst)
}

/// Consistency residual of the CH tendency of a preset.
pub fn tendency_consistency(preset: &str, n: usize, alpha: f64) -> Result<ResidualReport> {
    let s = presets::ch_state(preset, Grid1D::periodic(n)?, alpha)?;
    euler_consistency_residual(&s.velocity(), &s.velocity_tendency())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdConsistency {
    pub preset: String,
    pub n: usize,
    pub alpha: f64,
    pub t_end: f64,
    pub scheme: TimeDerivative,
    pub reports: Vec<ResidualReport>,
    /// Observed orders between consecutive `dt`.
    pub orders: Vec<f64>,
    pub terminations: Vec<Termination>,
}

/// Integrate a preset to `t_end` for each `dt`, difference the last velocities
/// in time and evaluate the consistency residual with that time derivative.
pub fn fd_consistency(
    preset: &str,
    n: usize,
    alpha: f64,
    t_end: f64,
    dts: &[f64],
    scheme: TimeDerivative,
) -> Result<FdConsistency> {
    let grid = Grid1D::periodic(n)?;
    let s0 = presets::ch_state(preset, grid, alpha)?;
    let runs = dts
        .par_iter()
        .map(|&dt| {
            let out = integrate(s0.clone(), &RunOptions::new(dt, t_end).keep_recent(scheme.samples()))?;
            let us: Vec<PeriodicField> = out.recent.iter().map(ChState::velocity).collect();
            let ut = backward_difference(&us, dt, scheme)?;
            let rep = euler_consistency_residual(&out.state.velocity(), &ut)?.with_dt(dt);
            Ok((rep, out.termination))
        })
        .collect::<Result<Vec<_>>>()?;
    let (reports, terminations): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let orders = reports
        .windows(2)
        .map(|w| observed_order(w[0].l2_abs, w[1].l2_abs, w[0].dt.unwrap() / w[1].dt.unwrap()))
        .collect();
    Ok(FdConsistency { preset: preset.into(), n, alpha, t_end, scheme, reports, orders, terminations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conservation {
    pub label: String,
    pub energy: f64,
    pub momentum: f64,
    pub density: Option<f64>,
    pub termination: Termination,
}

/// Relative drifts of energy, `∫m` and `∫ρ` over a run.
pub fn conservation<S: Evolve>(label: &str, s: S, dt: f64, t_end: f64) -> Result<Conservation> {
    let scale_m = s.momentum_scale();
    let out = integrate(s, &RunOptions::new(dt, t_end))?;
    let (a, b) = (&out.series[0], out.series.last().expect("series is never empty"));
    let drift = |x: f64, y: f64, scale: f64| (y - x).abs() / x.abs().max(scale);
    Ok(Conservation {
        label: label.into(),
        energy: drift(a.energy, b.energy, 0.0),
        momentum: drift(a.momentum, b.momentum, scale_m.max(out.state.momentum_scale())),
        density: a.density.zip(b.density).map(|(x, y)| drift(x, y, 0.0)),
        termination: out.termination,
    })
}

/// Largest relative Hamiltonian drift of a peakon run.
pub fn peakon_hamiltonian_drift(e: &PeakonEnsemble, dt: f64, t_end: f64) -> Result<f64> {
    let traj = peakon_run(e, dt, t_end, CollisionRule::default())?;
    let rec = traj.records();
    let h0 = rec[0].hamiltonian;
    Ok(rec.iter().map(|r| (r.hamiltonian - h0).abs() / h0.abs()).fold(0.0, f64::max))
}

/// Location of the maximum of `u` within `half_width` of `guess`, refined on
/// the trigonometric interpolant by golden-section search.
pub fn locate_peak(u: &PeriodicField, guess: f64, half_width: f64) -> f64 {
    let grid = *u.grid();
    let it = u.interpolant();
    let mut best = (f64::NEG_INFINITY, guess);
    for (j, &v) in u.values().iter().enumerate() {
        let x = grid.point(j);
        let d = {
            let l = grid.length();
            let raw = (x - guess).rem_euclid(l);
            raw.min(l - raw)
        };
        if d <= half_width && v > best.0 {
            best = (v, x);
        }
    }
    let (mut a, mut b) = (best.1 - grid.dx(), best.1 + grid.dx());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (it.eval(c), it.eval(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = it.eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = it.eval(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingRow {
    pub n: usize,
    /// Max over time and peakons of the distance between grid maxima and ODE positions.
    pub max_deviation: f64,
}

/// Track the two-peakon preset on grids of size `ns` against the peakon ODE.
pub fn peakon_grid_tracking(ns: &[usize], alpha: f64, dt: f64, t_end: f64, samples: usize) -> Result<Vec<TrackingRow>> {
    ns.par_iter()
        .map(|&n| {
            let grid = Grid1D::periodic(n)?;
            let e = presets::peakons("two-peakon", &presets::PresetParams::default(), grid, alpha)?;
            let traj = peakon_run(&e, dt, t_end, CollisionRule::default())?;
            let s0 = e.to_ch_state(grid)?;
            let every = ((t_end / dt).round() as usize / samples.max(1)).max(1);
            let mut state = s0;
            let mut worst = 0.0_f64;
            let steps = (t_end / dt).round() as usize;
            for k in 0..=steps {
                if k % every == 0 || k == steps {
                    let ens = traj.ensemble_at_index(k);
                    let u = state.velocity();
                    for &q in &ens.q {
                        let x = locate_peak(&u, q, 0.5);
                        let err = e.kernel.reduce(x - q).abs();
                        worst = worst.max(err);
                    }
                }
                if k < steps {
                    state = crate::dynamics::step(&state, dt).map_err(|e| match e {
                        crate::dynamics::StepError::Invalid(e) => e,
                        crate::dynamics::StepError::Diverged { .. } => Error::NonFinite("grid peakon run"),
                    })?;
                }
            }
            Ok(TrackingRow { n, max_deviation: worst })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionConfig {
    pub p0: f64,
    pub q0: f64,
    pub alpha: f64,
    pub n: usize,
    pub dt: f64,
    pub t_max: f64,
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub jacobian_floor: f64,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        Self {
            p0: 1.0,
            q0: 1.0,
            alpha: 0.5,
            n: 256,
            dt: 1e-4,
            t_max: 5.0,
            times: vec![0.0, 0.4, 0.8, 0.95],
            radii: vec![1.0, 2.0],
            jacobian_floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionSample {
    pub t: f64,
    pub min_jacobian: f64,
    /// `u(0)` from the peakon field.
    pub midpoint_velocity: f64,
    /// `φ(0)`: the midpoint label stays at the midpoint.
    pub midpoint_position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionOutcome {
    pub config: CollisionConfig,
    /// Peakon ODE collision detection time, if reached.
    pub collision_time: Option<f64>,
    /// Time at which `min ∂θφ` reached the floor, if it did.
    pub blowup_time: Option<f64>,
    pub series: Vec<CollisionSample>,
    pub frames: Vec<Figure1Frame>,
    /// `max |curve(r_k) - (r_k / r_0) curve(r_0)|` over frames.
    pub scaling_error: f64,
    /// `|Ψ(0, r)| / r = √(∂θφ(0))` per frame.
    pub pinch: Vec<(f64, f64)>,
}

/// Peakon–antipeakon collision: flow map driven by the exact peakon velocity,
/// Jacobian monitoring and lifted curves at the requested times.
pub fn collision_run(cfg: &CollisionConfig) -> Result<CollisionOutcome> {
    let grid = Grid1D::periodic(cfg.n)?;
    let kernel = GreenKernel::circle(cfg.alpha, grid.length())?;
    let e = collision_scenario(cfg.p0, cfg.q0, kernel)?;
    let traj = peakon_run(&e, cfg.dt, cfg.t_max, CollisionRule::default())?;
    let collision_time = match traj.termination {
        PeakonTermination::Collision { t, .. } => Some(t),
        PeakonTermination::Completed => None,
    };
    let t_stop = traj.final_time();
    let mut pending: Vec<f64> = cfg.times.clone();
    pending.sort_by(f64::total_cmp);
    let mut snapshots: Vec<(f64, FlowMap)> = Vec::new();
    let mut flow = FlowMap::identity(grid);
    let mut series = Vec::new();
    let mut blowup_time = None;
    let steps = (t_stop / cfg.dt).floor() as usize;
    let midpoint = |flow: &FlowMap, t: f64, ens: &PeakonEnsemble| CollisionSample {
        t,
        min_jacobian: blowup_monitor(flow),
        midpoint_velocity: ens.field(0.0),
        midpoint_position: flow.displacement.values()[0],
    };
    series.push(midpoint(&flow, 0.0, &traj.ensemble_at_index(0)));
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        while let Some(&want) = pending.first() {
            if want <= t + 0.5 * cfg.dt {
                snapshots.push((want, flow.clone()));
                pending.remove(0);
            } else {
                break;
            }
        }
        if k == steps || blowup_time.is_some() {
            break;
        }
        let adv = flow_advance(&flow, &traj, t, t + cfg.dt, cfg.dt, cfg.jacobian_floor)?;
        flow = adv.flow;
        series.push(midpoint(&flow, adv.t, &traj.ensemble_at_index(k + 1)));
        if adv.blowup {
            blowup_time = Some(adv.t);
        }
    }
    // Requested times past the end of the run see the last flow; it is
    // flagged through its Jacobian.
    for want in pending {
        snapshots.push((want, flow.clone()));
    }
    let frames = figure1_emit(&snapshots, &cfg.radii)?;
    let mut scaling_error = 0.0_f64;
    for f in frames.iter().filter(|f| !f.truncated) {
        let base = &f.curves[0];
        for c in &f.curves[1..] {
            let s = c.radius / base.radius;
            for (p, q) in base.points.iter().zip(&c.points) {
                scaling_error = scaling_error.max((q.0 - s * p.0).abs()).max((q.1 - s * p.1).abs());
            }
        }
    }
    let pinch = snapshots.iter().map(|(t, f)| (*t, f.jacobian.values()[0].max(0.0).sqrt())).collect();
    Ok(CollisionOutcome { config: cfg.clone(), collision_time, blowup_time, series, frames, scaling_error, pinch })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EisenhartConvergence {
    pub dts: Vec<f64>,
    /// Max error of the lifted projection against `cos t`.
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    pub c_drift: Vec<f64>,
    pub max_deviation: Vec<f64>,
}

/// `V = 1 + ½x²` from `x0 = 1`, `v0 = 0`, so the direct solution is `cos t`.
pub fn eisenhart_harmonic(dts: &[f64], t_end: f64) -> Result<EisenhartConvergence> {
    let v: SharedField = Arc::new(Quadratic { offset: 1.0, stiffness: vec![1.0] });
    let outs = dts
        .par_iter()
        .map(|&dt| eisenhart_verify(v.clone(), &[1.0], &[0.0], t_end, dt, None))
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = outs
        .iter()
        .map(|o| o.lifted.iter().map(|r| (r.x[0] - r.t.cos()).abs()).fold(0.0, f64::max))
        .collect();
    let orders = errors
        .windows(2)
        .zip(dts.windows(2))
        .map(|(e, d)| observed_order(e[0], e[1], d[0] / d[1]))
        .collect();
    Ok(EisenhartConvergence {
        dts: dts.to_vec(),
        errors,
        orders,
        c_drift: outs.iter().map(|o| o.c_drift).collect(),
        max_deviation: outs.iter().map(|o| o.max_deviation).collect(),
    })
}
