//! Potential dynamics `ẍ = -∇V + F` as projections of geodesics of
//! `g + (1/V) dz²`: the fiber constant `c = |ż|² / V²` is set to 2.

use std::sync::Arc;

use serde::Serialize;

use super::{conserved_c, integrate_geodesic, kinetic_energy, Force, GeodesicState, Reciprocal, SharedField, WarpedConfig};
use crate::error::{Error, Result};
use crate::ode::rk4_step;

/// Fiber constant that turns `½ ∇(c / w)` into `∇V` for `w = 1/V`.
pub const FIBER_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub y: Vec<f64>,
    pub ydot: Vec<f64>,
    pub c: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EisenhartOutcome {
    pub dt: f64,
    pub t_end: f64,
    /// `max_t |x_direct(t) - x_lift(t)|`.
    pub max_deviation: f64,
    /// `max_t |c(t) - c(0)| / c(0)`.
    pub c_drift: f64,
    /// Direct trajectory `(t, x)`.
    pub direct: Vec<(f64, Vec<f64>)>,
    /// Warped geodesic, every step.
    pub lifted: Vec<TrajectoryRow>,
}

fn check_potential(v: &SharedField, x: &[f64]) -> Result<f64> {
    let value = v.value(x);
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain(format!("V = {value} at x = {x:?}")))
    }
}

/// Integrate the direct and the lifted system with the same RK4 step and
/// compare the base trajectories.
pub fn eisenhart_verify(
    potential: SharedField,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    dt: f64,
    force: Option<Force>,
) -> Result<EisenhartOutcome> {
    let d = potential.dim();
    if x0.len() != d || v0.len() != d {
        return Err(Error::InvalidParameter("x0 and v0 must match the dimension of V".into()));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParameter("need dt > 0 and T >= 0".into()));
    }
    let v_start = check_potential(&potential, x0)?;

    let steps = (t_end / dt).round() as usize;
    let mut direct = Vec::with_capacity(steps + 1);
    let mut y: Vec<f64> = x0.iter().chain(v0).copied().collect();
    direct.push((0.0, x0.to_vec()));
    let mut failure = None;
    for k in 0..steps {
        let t = k as f64 * dt;
        y = rk4_step(t, &y, dt, |tt, s| {
            let (x, xd) = s.split_at(d);
            if let Err(e) = check_potential(&potential, x) {
                failure.get_or_insert(e);
            }
            let mut acc: Vec<f64> = potential.gradient(x).iter().map(|g| -g).collect();
            if let Some(f) = &force {
                for (a, fi) in acc.iter_mut().zip(f(tt, x)) {
                    *a += fi;
                }
            }
            xd.iter().copied().chain(acc).collect()
        });
        if let Some(e) = failure {
            return Err(e);
        }
        direct.push(((k + 1) as f64 * dt, y[..d].to_vec()));
    }

    let mut config = WarpedConfig::flat(d, 1, Arc::new(Reciprocal(potential.clone())))?;
    config.potential = Some(potential);
    if let Some(f) = force {
        config = config.with_force(f);
    }
    let start = GeodesicState {
        x: x0.to_vec(),
        xdot: v0.to_vec(),
        y: vec![0.0],
        ydot: vec![FIBER_CONSTANT.sqrt() * v_start],
        t: 0.0,
    };
    let geodesic = integrate_geodesic(&start, &config, dt, t_end)?;
    let c0 = conserved_c(&start, &config);
    let lifted: Vec<TrajectoryRow> = geodesic
        .iter()
        .map(|s| TrajectoryRow {
            t: s.t,
            x: s.x.clone(),
            xdot: s.xdot.clone(),
            y: s.y.clone(),
            ydot: s.ydot.clone(),
            c: conserved_c(s, &config),
            energy: kinetic_energy(s, &config),
        })
        .collect();
    let max_deviation = direct
        .iter()
        .zip(&lifted)
        .map(|((_, xa), row)| xa.iter().zip(&row.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let c_drift = lifted.iter().map(|r| (r.c - c0).abs() / c0).fold(0.0, f64::max);
    Ok(EisenhartOutcome { dt, t_end, max_deviation, c_drift, direct, lifted })
}
