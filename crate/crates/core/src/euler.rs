//! Residuals of the polar incompressible-Euler system for lifted CH solutions
//! and of the lifted H^div equation for CH2 solutions.
//!
//! For `w = (u, r u_θ / 2)` on the unit cone with density `r⁻⁴`, the Euler
//! equations reduce to
//!
//! ```text
//! ½ ∂_t u_θ + ¼ u_θ² + ½ u u_θθ - u² = -2 p,        P(θ, r) = r² p(θ)
//! ∂_θ p = -(∂_t u + 2 u u_θ)
//! ```
//!
//! so a pressure exists iff the consistency residual below vanishes. On the
//! cone `r² dθ² + a² dr²` the same substitution gives
//! `p = -(a²/2) [½ ∂_t u_θ + ¼ u_θ² + ½ u u_θθ - u²/a²]`, which is the CH
//! equation with `α = a/2`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{check_radii, curl_report, CHECK_RADII};
use crate::dynamics::{integrate, momentum_flux, ChState, Evolve, RunOptions, Termination};
use crate::error::{Error, Result};
use crate::ode::observed_order;
use crate::presets;
use crate::spectral::{Field2D, Grid1D, PeriodicField};

/// `‖d‖ / scale`, or `‖d‖` itself when the scale vanishes.
pub(crate) fn relative(diff: &PeriodicField, scale: f64) -> f64 {
    let abs = diff.l2_norm();
    if scale > 0.0 {
        abs / scale
    } else {
        abs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub label: String,
    /// `‖A - B‖ / (‖A‖ + ‖B‖)` for the two sides of the identity.
    pub l2: f64,
    pub l2_abs: f64,
    pub linf: f64,
    pub resolution: usize,
    pub dt: Option<f64>,
}

impl ResidualReport {
    fn from_sides(label: &str, lhs: &PeriodicField, rhs: &PeriodicField) -> Self {
        let diff = lhs - rhs;
        Self {
            label: label.to_string(),
            l2: relative(&diff, lhs.l2_norm() + rhs.l2_norm()),
            l2_abs: diff.l2_norm(),
            linf: diff.max_abs(),
            resolution: lhs.grid().n(),
            dt: None,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }
}

/// `(1/r) ∂_r(r ρ v_r) + (1/r) ∂_θ(ρ v_θ)` with `ρ = r⁻⁴`, one field per
/// radius. `r ρ v_r = r⁻² u_θ / 2` is a monomial in `r`, so its radial
/// derivative `-2/r` times itself is exact.
pub fn weighted_divergence(u: &PeriodicField, radii: &[f64]) -> Result<Vec<PeriodicField>> {
    check_radii(radii)?;
    let ux = u.diff(1);
    Ok(radii
        .iter()
        .map(|&r| {
            let rho = r.powi(-4);
            let flux_r = ux.scale(0.5 * r * r * rho);
            let radial = flux_r.scale(-2.0 / r).scale(1.0 / r);
            let angular = u.scale(r * rho).diff(1).scale(1.0 / r);
            &radial + &angular
        })
        .collect())
}

pub fn divergence_report(u: &PeriodicField, radii: &[f64]) -> Result<ResidualReport> {
    let fields = weighted_divergence(u, radii)?;
    let linf = fields.iter().map(PeriodicField::max_abs).fold(0.0, f64::max);
    let l2_abs = fields.iter().map(PeriodicField::l2_norm).fold(0.0, f64::max);
    // Each term alone is ±r⁻⁴ u_θ; normalize by that.
    let scale = radii.iter().map(|r| r.powi(-4)).fold(0.0, f64::max) * u.diff(1).l2_norm();
    Ok(ResidualReport {
        label: "divergence".into(),
        l2: if scale > 0.0 { l2_abs / scale } else { l2_abs },
        l2_abs,
        linf,
        resolution: u.grid().n(),
        dt: None,
    })
}

/// `P(θ, r) = r² p(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureProfile {
    pub p: PeriodicField,
    pub aperture: f64,
}

fn bracket(u: &PeriodicField, ut: &PeriodicField, aperture: f64) -> PeriodicField {
    let ux = u.diff(1);
    let uxx = u.diff(2);
    let a2 = aperture * aperture;
    let mut b = ut.diff(1).scale(0.5);
    b = &b + &ux.mul_dealiased(&ux).scale(0.25);
    b = &b + &u.mul_dealiased(&uxx).scale(0.5);
    &b - &u.mul_dealiased(u).scale(1.0 / a2)
}

/// Pressure profile on the cone of aperture `a` (`a = 1` is the unit cone).
pub fn pressure_recover_on(u: &PeriodicField, ut: &PeriodicField, aperture: f64) -> Result<PressureProfile> {
    if u.grid() != ut.grid() {
        return Err(Error::GridMismatch);
    }
    if !(aperture > 0.0) {
        return Err(Error::InvalidParameter(format!("aperture must be > 0, got {aperture}")));
    }
    let p = bracket(u, ut, aperture).scale(-0.5 * aperture * aperture);
    Ok(PressureProfile { p, aperture })
}

pub fn pressure_recover(u: &PeriodicField, ut: &PeriodicField) -> Result<PressureProfile> {
    pressure_recover_on(u, ut, 1.0)
}

/// Residual of `∂_θ p = -(∂_t u + 2 u u_θ)` with `p` from the first equation.
pub fn euler_consistency_residual_on(u: &PeriodicField, ut: &PeriodicField, aperture: f64) -> Result<ResidualReport> {
    let pressure = pressure_recover_on(u, ut, aperture)?;
    let lhs = pressure.p.diff(1).scale(-1.0);
    let rhs = ut + &u.mul_dealiased(&u.diff(1)).scale(2.0);
    let label = if aperture == 1.0 { "consistency".to_string() } else { format!("consistency(a={aperture})") };
    Ok(ResidualReport::from_sides(&label, &lhs, &rhs))
}

pub fn euler_consistency_residual(u: &PeriodicField, ut: &PeriodicField) -> Result<ResidualReport> {
    euler_consistency_residual_on(u, ut, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ch2LiftReport {
    /// `ṅ + u n_x + 2 n u_x + g ρ ρ_x` (dx component).
    pub dx: ResidualReport,
    /// `ρ̇ + u ρ_x + ρ u_x` (dy component, divided by `√g`).
    pub dy: ResidualReport,
    /// Max deviation of the genuine two-dimensional evaluation from the 1D
    /// reduction, when requested.
    pub grid2d_deviation: Option<f64>,
}

fn check_same_grid(fields: &[&PeriodicField]) -> Result<()> {
    let g = fields[0].grid();
    if fields.iter().any(|f| f.grid() != g) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// One-dimensional reduction of the lifted equation
/// `∂_t ñ + L_w ñ + (div w) ñ = 0` on `S¹ × S¹` for `w = (u, √g ρ)`,
/// `ñ = w♭ - α² d div w`, with data independent of `y`.
fn ch2_lift_1d(
    u: &PeriodicField,
    rho: &PeriodicField,
    ut: &PeriodicField,
    rhot: &PeriodicField,
    alpha: f64,
    gravity: f64,
) -> (PeriodicField, PeriodicField, PeriodicField, PeriodicField) {
    let n = u.helmholtz(alpha);
    let n_dot = ut.helmholtz(alpha);
    let flux_x = &momentum_flux(u, &n) + &rho.mul_dealiased(&rho.diff(1)).scale(gravity);
    let flux_y = rho.mul_dealiased(u).diff(1);
    (n_dot, flux_x, rhot.clone(), flux_y)
}

/// The same residual evaluated with generic two-dimensional operators on an
/// `(x, y)` grid with `ny` rows; returns `(dx, dy)` residual fields.
fn ch2_lift_2d(
    u: &PeriodicField,
    rho: &PeriodicField,
    ut: &PeriodicField,
    rhot: &PeriodicField,
    alpha: f64,
    gravity: f64,
    ny: usize,
) -> Result<(Field2D, Field2D)> {
    let y = Grid1D::periodic(ny)?;
    let sg = gravity.sqrt();
    let wx = Field2D::extend_in_y(u, y);
    let wy = Field2D::extend_in_y(&rho.scale(sg), y);
    let wx_t = Field2D::extend_in_y(ut, y);
    let wy_t = Field2D::extend_in_y(&rhot.scale(sg), y);
    let a2 = alpha * alpha;
    let div = |fx: &Field2D, fy: &Field2D| -> Result<Field2D> { Ok(fx.deriv_x(1)?.add(&fy.deriv_y(1)?)) };
    let flat = |fx: &Field2D, fy: &Field2D| -> Result<(Field2D, Field2D)> {
        let d = div(fx, fy)?;
        Ok((fx.sub(&d.deriv_x(1)?.scale(a2)), fy.sub(&d.deriv_y(1)?.scale(a2))))
    };
    let (nx, ny_) = flat(&wx, &wy)?;
    let (nx_t, ny_t) = flat(&wx_t, &wy_t)?;
    let div_w = div(&wx, &wy)?;
    // (L_w ñ)_i = w^j ∂_j ñ_i + ñ_j ∂_i w^j
    let lie = |ni: &Field2D, dx_w: [&Field2D; 2], dni: [&Field2D; 2]| -> Field2D {
        wx.mul_dealiased(dni[0])
            .add(&wy.mul_dealiased(dni[1]))
            .add(&nx.mul_dealiased(dx_w[0]))
            .add(&ny_.mul_dealiased(dx_w[1]))
            .add(&div_w.mul_dealiased(ni))
    };
    let (wx_x, wy_x, wx_y, wy_y) = (wx.deriv_x(1)?, wy.deriv_x(1)?, wx.deriv_y(1)?, wy.deriv_y(1)?);
    let res_x = nx_t.add(&lie(&nx, [&wx_x, &wy_x], [&nx.deriv_x(1)?, &nx.deriv_y(1)?]));
    let res_y = ny_t.add(&lie(&ny_, [&wx_y, &wy_y], [&ny_.deriv_x(1)?, &ny_.deriv_y(1)?]));
    Ok((res_x, res_y.scale(1.0 / sg)))
}

/// Lifted H^div residual for a CH2 snapshot `(u, ρ)` with tendencies `(ut, ρt)`.
/// With `grid2d_rows = Some(ny)` the residual is also evaluated on a genuine
/// two-dimensional grid and compared against the reduction.
pub fn ch2_lift_residual(
    u: &PeriodicField,
    rho: &PeriodicField,
    ut: &PeriodicField,
    rhot: &PeriodicField,
    alpha: f64,
    gravity: f64,
    grid2d_rows: Option<usize>,
) -> Result<Ch2LiftReport> {
    check_same_grid(&[u, rho, ut, rhot])?;
    if !(gravity > 0.0) {
        return Err(Error::InvalidParameter(format!("gravity must be > 0, got {gravity}")));
    }
    let (n_dot, flux_x, rho_dot, flux_y) = ch2_lift_1d(u, rho, ut, rhot, alpha, gravity);
    let dx = ResidualReport::from_sides("ch2-lift-dx", &n_dot, &-flux_x.clone());
    let dy = ResidualReport::from_sides("ch2-lift-dy", &rho_dot, &-flux_y.clone());
    let grid2d_deviation = match grid2d_rows {
        None => None,
        Some(ny) => {
            let (rx, ry) = ch2_lift_2d(u, rho, ut, rhot, alpha, gravity, ny)?;
            let res_x = &n_dot + &flux_x;
            let res_y = &rho_dot + &flux_y;
            let mut dev = 0.0_f64;
            for iy in 0..ny {
                dev = dev.max((&rx.row(iy) - &res_x).max_abs());
                dev = dev.max((&ry.row(iy) - &res_y).max_abs());
            }
            Some(dev)
        }
    };
    Ok(Ch2LiftReport { dx, dy, grid2d_deviation })
}

/// Backward differences in time on equally spaced samples (oldest first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeDerivative {
    /// Exact tendencies from the right-hand side.
    Tendency,
    /// First-order backward difference (two samples).
    Backward1,
    /// Fourth-order backward difference (five samples).
    Backward4,
}

impl TimeDerivative {
    pub fn samples(self) -> usize {
        match self {
            TimeDerivative::Tendency => 1,
            TimeDerivative::Backward1 => 2,
            TimeDerivative::Backward4 => 5,
        }
    }

    /// Weights applied to samples (oldest first), already divided by `dt`.
    fn weights(self, dt: f64) -> Vec<f64> {
        match self {
            TimeDerivative::Tendency => vec![],
            TimeDerivative::Backward1 => vec![-1.0 / dt, 1.0 / dt],
            TimeDerivative::Backward4 => [3.0, -16.0, 36.0, -48.0, 25.0].iter().map(|w| w / (12.0 * dt)).collect(),
        }
    }
}

/// Finite-difference time derivative of the last sample in `history`.
pub fn backward_difference(history: &[PeriodicField], dt: f64, scheme: TimeDerivative) -> Result<PeriodicField> {
    let weights = scheme.weights(dt);
    if weights.is_empty() || history.len() < weights.len() {
        return Err(Error::InvalidParameter(format!(
            "{scheme:?} needs {} samples, got {}",
            scheme.samples(),
            history.len()
        )));
    }
    let tail = &history[history.len() - weights.len()..];
    let mut out = PeriodicField::zeros(*tail[0].grid());
    for (f, w) in tail.iter().zip(weights) {
        out = &out + &f.scale(w);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    Divergence,
    Consistency,
    Ch2Lift,
    Curl,
    VorticityAdvect,
}

impl Identity {
    pub const ALL: [Identity; 5] = [
        Identity::Divergence,
        Identity::Consistency,
        Identity::Ch2Lift,
        Identity::Curl,
        Identity::VorticityAdvect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::Divergence => "divergence",
            Identity::Consistency => "consistency",
            Identity::Ch2Lift => "ch2-lift",
            Identity::Curl => "curl",
            Identity::VorticityAdvect => "vorticity-advect",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|i| i.name() == name || i.name().replace('-', "_") == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown identity `{name}`")))
    }
}

/// Random real trigonometric polynomial with modes `1..=kmax` and unit-scale
/// coefficients.
pub fn random_band_limited(grid: Grid1D, kmax: usize, rng: &mut impl Rng) -> PeriodicField {
    let coeffs: Vec<(f64, f64)> = (0..=kmax).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    PeriodicField::from_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| a * (k as f64 * x).cos() + b * (k as f64 * x).sin())
            .sum()
    })
}

/// Time window of the end-to-end (finite-difference) sweep.
pub const SWEEP_T_END: f64 = 0.1;

/// One `(n, dt)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub n: usize,
    pub dt: Option<f64>,
    pub report: ResidualReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub identity: Identity,
    pub scheme: TimeDerivative,
    pub cells: Vec<SweepCell>,
    /// Observed orders between consecutive `dt` values at each `n`.
    pub dt_orders: Vec<(usize, Vec<f64>)>,
}

fn ch_history(n: usize, dt: f64, t_end: f64, scheme: TimeDerivative) -> Result<(PeriodicField, PeriodicField)> {
    let grid = Grid1D::periodic(n)?;
    let s = presets::ch_state("gaussian-bump", grid, 0.5)?;
    let out = integrate(s, &RunOptions::new(dt, t_end).keep_recent(scheme.samples()))?;
    if out.termination != Termination::Completed {
        return Err(Error::InvalidParameter(format!("sweep run stopped early: {:?}", out.termination)));
    }
    let us: Vec<PeriodicField> = out.recent.iter().map(ChState::velocity).collect();
    let ut = backward_difference(&us, dt, scheme)?;
    Ok((out.state.velocity(), ut))
}

fn ch2_history(n: usize, dt: f64, t_end: f64, scheme: TimeDerivative) -> Result<Ch2LiftReport> {
    let grid = Grid1D::periodic(n)?;
    let s = presets::ch2_state("ch2-stratified", grid, 0.5, 1.0)?;
    let out = integrate(s, &RunOptions::new(dt, t_end).keep_recent(scheme.samples()))?;
    let ms: Vec<PeriodicField> = out.recent.iter().map(|s| s.m.clone()).collect();
    let rhos: Vec<PeriodicField> = out.recent.iter().map(|s| s.rho.clone()).collect();
    let mt = backward_difference(&ms, dt, scheme)?;
    let rhot = backward_difference(&rhos, dt, scheme)?;
    let st = &out.state;
    ch2_lift_residual(&st.velocity(), &st.rho, &mt.helmholtz_inv(st.alpha), &rhot, st.alpha, st.gravity, None)
}

fn sweep_cell(identity: Identity, n: usize, dt: Option<f64>, scheme: TimeDerivative, seed: u64) -> Result<SweepCell> {
    let grid = Grid1D::periodic(n)?;
    let report = match (identity, dt) {
        (Identity::Divergence, _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_band_limited(grid, n / 4, &mut rng);
            divergence_report(&u, &CHECK_RADII)?
        }
        (Identity::Curl, _) => {
            let u = presets::velocity("sin3", grid)?;
            let rep = curl_report(&u, 0.5, &CHECK_RADII)?;
            ResidualReport {
                label: "curl".into(),
                l2: rep.residual,
                l2_abs: rep.residual,
                linf: rep.radial_spread,
                resolution: n,
                dt: None,
            }
        }
        (Identity::Consistency, None) => {
            // Sampled (not band-limited) data against a tendency from a
            // four-times finer grid: the residual measures the spatial error.
            let u = presets::velocity("gaussian-bump", grid)?;
            let fine = Grid1D::periodic(4 * n)?;
            let s = ChState::from_velocity(&presets::velocity("gaussian-bump", fine)?, 0.5)?;
            let ut = PeriodicField::new(grid, s.velocity_tendency().interp(&grid.points()))?;
            euler_consistency_residual(&u, &ut)?
        }
        (Identity::VorticityAdvect, None) => {
            let s = presets::ch_state("gaussian-bump", grid, 0.5)?;
            let rep = crate::cone::advected_vorticity_report(&s.velocity(), &s.velocity_tendency(), 0.5)?;
            ResidualReport {
                label: "vorticity-advect".into(),
                l2: rep.relative,
                l2_abs: rep.absolute,
                linf: rep.absolute,
                resolution: n,
                dt: None,
            }
        }
        (Identity::Ch2Lift, None) => {
            let s = presets::ch2_state("ch2-stratified", grid, 0.5, 1.0)?;
            let (mt, rhot) = crate::dynamics::ch2_rhs(&s)?;
            let rep = ch2_lift_residual(&s.velocity(), &s.rho, &mt.helmholtz_inv(0.5), &rhot, 0.5, 1.0, None)?;
            worst(rep)
        }
        (Identity::Consistency, Some(dt)) => {
            let (u, ut) = ch_history(n, dt, SWEEP_T_END, scheme)?;
            euler_consistency_residual(&u, &ut)?.with_dt(dt)
        }
        (Identity::VorticityAdvect, Some(dt)) => {
            let (u, ut) = ch_history(n, dt, SWEEP_T_END, scheme)?;
            let rep = crate::cone::advected_vorticity_report(&u, &ut, 0.5)?;
            ResidualReport {
                label: "vorticity-advect".into(),
                l2: rep.relative,
                l2_abs: rep.absolute,
                linf: rep.absolute,
                resolution: n,
                dt: Some(dt),
            }
        }
        (Identity::Ch2Lift, Some(dt)) => worst(ch2_history(n, dt, SWEEP_T_END, scheme)?).with_dt(dt),
    };
    Ok(SweepCell { n, dt, report })
}

fn worst(rep: Ch2LiftReport) -> ResidualReport {
    let mut out = if rep.dx.l2 >= rep.dy.l2 { rep.dx } else { rep.dy };
    out.label = "ch2-lift".into();
    out
}

/// Residuals over `resolutions × dts` (just `resolutions` when `dts` is
/// empty or the identity has no time dependence), evaluated in parallel.
pub fn convergence_sweep(
    identity: Identity,
    resolutions: &[usize],
    dts: &[f64],
    scheme: TimeDerivative,
    seed: u64,
) -> Result<SweepTable> {
    let timed = !dts.is_empty()
        && scheme != TimeDerivative::Tendency
        && !matches!(identity, Identity::Divergence | Identity::Curl);
    let jobs: Vec<(usize, Option<f64>)> = resolutions
        .iter()
        .flat_map(|&n| {
            if timed {
                dts.iter().map(|&dt| (n, Some(dt))).collect::<Vec<_>>()
            } else {
                vec![(n, None)]
            }
        })
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(n, dt)| sweep_cell(identity, n, dt, scheme, seed))
        .collect::<Result<Vec<_>>>()?;
    let dt_orders = if timed {
        resolutions
            .iter()
            .map(|&n| {
                let row: Vec<&SweepCell> = cells.iter().filter(|c| c.n == n).collect();
                let orders = row
                    .windows(2)
                    .map(|w| {
                        let ratio = w[0].dt.unwrap() / w[1].dt.unwrap();
                        observed_order(w[0].report.l2_abs, w[1].report.l2_abs, ratio)
                    })
                    .collect();
                (n, orders)
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SweepTable { identity, scheme, cells, dt_orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ch2_rhs, Ch2State};

    fn grid(n: usize) -> Grid1D {
        Grid1D::periodic(n).unwrap()
    }

    fn snapshot(n: usize, alpha: f64) -> (PeriodicField, PeriodicField) {
        let u0 = PeriodicField::from_fn(grid(n), |x| (3.0 * x).sin());
        let s = ChState::from_velocity(&u0, alpha).unwrap();
        (s.velocity(), s.velocity_tendency())
    }

    #[test]
    fn divergence_vanishes() {
        let g = grid(64);
        let zero = weighted_divergence(&PeriodicField::zeros(g), &[1.0]).unwrap();
        assert_eq!(zero[0].max_abs(), 0.0);
        let u = PeriodicField::from_fn(g, |x| (5.0 * x).sin());
        let rep = divergence_report(&u, &[0.5, 1.0, 2.0, 7.0]).unwrap();
        assert!(rep.linf < 1e-11, "{rep:?}");
        assert!(weighted_divergence(&u, &[-1.0]).is_err());
    }

    #[test]
    fn pressure_closed_forms() {
        let g = grid(32);
        let zero = PeriodicField::zeros(g);
        assert_eq!(pressure_recover(&zero, &zero).unwrap().p.max_abs(), 0.0);
        let c = PeriodicField::constant(g, 0.8);
        let p = pressure_recover(&c, &zero).unwrap().p;
        assert!(p.values().iter().all(|v| (v - 0.32).abs() < 1e-15));
        assert_eq!(euler_consistency_residual(&c, &zero).unwrap().l2_abs, 0.0);
    }

    #[test]
    fn consistency_holds_only_for_matching_alpha() {
        let (u, ut) = snapshot(256, 0.5);
        let r = euler_consistency_residual(&u, &ut).unwrap();
        assert!(r.l2 < 1e-10, "{r:?}");
        let (u1, ut1) = snapshot(256, 1.0);
        assert!(euler_consistency_residual(&u1, &ut1).unwrap().l2 > 1e-2);
        // The aperture-2 cone carries the standard equation.
        assert!(euler_consistency_residual_on(&u1, &ut1, 2.0).unwrap().l2 < 1e-10);
    }

    fn stratified(n: usize) -> Ch2State {
        let g = grid(n);
        Ch2State::from_velocity(
            &PeriodicField::from_fn(g, f64::sin),
            PeriodicField::from_fn(g, |x| 1.0 + 0.5 * x.cos()),
            0.5,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn ch2_lift_vanishes_on_tendencies() {
        for gravity in [1.0, 2.5] {
            let mut s = stratified(128);
            s.gravity = gravity;
            let (mt, rhot) = ch2_rhs(&s).unwrap();
            let u = s.velocity();
            let rep = ch2_lift_residual(&u, &s.rho, &mt.helmholtz_inv(0.5), &rhot, 0.5, gravity, Some(8)).unwrap();
            assert!(rep.dx.l2 < 1e-12 && rep.dy.l2 < 1e-12, "{rep:?}");
            assert!(rep.grid2d_deviation.unwrap() < 1e-11);
        }
    }

    #[test]
    fn ch2_lift_detects_perturbed_density() {
        let s = stratified(128);
        let (mt, rhot) = ch2_rhs(&s).unwrap();
        let u = s.velocity();
        let bumped = s.rho.map(|r| r + 0.1);
        let rep = ch2_lift_residual(&u, &bumped, &mt.helmholtz_inv(0.5), &rhot, 0.5, 1.0, None).unwrap();
        let expected = 0.1 * u.diff(1).l2_norm();
        assert!((rep.dy.l2_abs - expected).abs() < 1e-10 * expected);
        let g = grid(16);
        let still = ch2_lift_residual(
            &PeriodicField::zeros(g),
            &PeriodicField::constant(g, 2.0),
            &PeriodicField::zeros(g),
            &PeriodicField::zeros(g),
            0.5,
            1.0,
            Some(8),
        )
        .unwrap();
        assert_eq!((still.dx.l2_abs, still.dy.l2_abs), (0.0, 0.0));
    }

    #[test]
    fn backward_differences_are_exact_on_polynomials() {
        let g = grid(8);
        let dt = 0.1;
        let hist: Vec<PeriodicField> = (0..5)
            .map(|k| {
                let t = k as f64 * dt;
                PeriodicField::constant(g, t.powi(4) - 2.0 * t)
            })
            .collect();
        let d = backward_difference(&hist, dt, TimeDerivative::Backward4).unwrap();
        let t = 0.4_f64;
        assert!((d.values()[0] - (4.0 * t.powi(3) - 2.0)).abs() < 1e-12);
        assert!(backward_difference(&hist[..1], dt, TimeDerivative::Backward1).is_err());
    }

    #[test]
    fn sweeps() {
        let div = convergence_sweep(Identity::Divergence, &[32, 64, 128], &[], TimeDerivative::Tendency, 7).unwrap();
        assert!(div.cells.iter().all(|c| c.report.linf < 1e-10));
        let cons = convergence_sweep(Identity::Consistency, &[16, 32, 64], &[], TimeDerivative::Tendency, 0).unwrap();
        let l2: Vec<f64> = cons.cells.iter().map(|c| c.report.l2).collect();
        assert!(l2[1] < 0.1 * l2[0] && l2[2] < 0.1 * l2[1], "{l2:?}");
        let lag = convergence_sweep(Identity::Consistency, &[64], &[0.01, 0.005], TimeDerivative::Backward1, 0).unwrap();
        let order = lag.dt_orders[0].1[0];
        assert!((order - 1.0).abs() < 0.2, "order {order}");
        assert_eq!(Identity::parse("ch2_lift").unwrap(), Identity::Ch2Lift);
    }
}
