//! Warped products `M ×_w N` with metric `g_M + w(x) g_N`: geodesics, the
//! Eisenhart lift of potential dynamics, explicit lifted metrics and
//! sectional curvature.

pub mod curvature;
pub mod eisenhart;
pub mod metric;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::rk4_step;

pub use curvature::{
    cone_sectional_numerator, curvature_samples, curvature_sign_scan, sectional_numerator, CurvatureReading, ScanReport,
};
pub use eisenhart::{eisenhart_verify, EisenhartOutcome};
pub use metric::{build_lift_metric, riemann_fd_oracle, LiftMetric, MetricDescriptor};

/// A smooth scalar function on `R^d` with exact first and second derivatives.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>>;
}

pub type SharedField = Arc<dyn ScalarField>;

/// Constant function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl ScalarField for Constant {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _: &[f64]) -> f64 {
        self.value
    }

    fn gradient(&self, _: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn hessian(&self, _: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.dim]; self.dim]
    }
}

/// `offset + ½ Σ k_i x_i²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub offset: f64,
    pub stiffness: Vec<f64>,
}

impl ScalarField for Quadratic {
    fn dim(&self) -> usize {
        self.stiffness.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.offset + 0.5 * self.stiffness.iter().zip(x).map(|(k, v)| k * v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.stiffness.iter().zip(x).map(|(k, v)| k * v).collect()
    }

    fn hessian(&self, _: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| if i == j { self.stiffness[i] } else { 0.0 }).collect()).collect()
    }
}

/// `coeff · |x|^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPower {
    pub dim: usize,
    pub coeff: f64,
    pub power: f64,
}

impl ScalarField for RadialPower {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.coeff * r2.powf(0.5 * self.power)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let s = self.coeff * self.power * r2.powf(0.5 * self.power - 1.0);
        x.iter().map(|v| s * v).collect()
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let p = self.power;
        let a = self.coeff * p * r2.powf(0.5 * p - 1.0);
        let b = self.coeff * p * (p - 2.0) * r2.powf(0.5 * p - 2.0);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| b * x[i] * x[j] + if i == j { a } else { 0.0 }).collect())
            .collect()
    }
}

/// `1 / f`.
#[derive(Clone)]
pub struct Reciprocal(pub SharedField);

impl ScalarField for Reciprocal {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        1.0 / self.0.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let v = self.0.value(x);
        self.0.gradient(x).iter().map(|g| -g / (v * v)).collect()
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let v = self.0.value(x);
        let g = self.0.gradient(x);
        let h = self.0.hessian(x);
        (0..g.len())
            .map(|i| (0..g.len()).map(|j| -h[i][j] / (v * v) + 2.0 * g[i] * g[j] / (v * v * v)).collect())
            .collect()
    }
}

pub type Force = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// `M = R^dim_m`, `N = R^dim_n` unless curvatures are set; curvatures only
/// enter the curvature formula, geodesic integration requires flat factors.
#[derive(Clone)]
pub struct WarpedConfig {
    pub dim_m: usize,
    pub dim_n: usize,
    pub warp: SharedField,
    pub potential: Option<SharedField>,
    pub force: Option<Force>,
    pub base_curvature: f64,
    pub fiber_curvature: f64,
}

impl fmt::Debug for WarpedConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpedConfig")
            .field("dim_m", &self.dim_m)
            .field("dim_n", &self.dim_n)
            .field("potential", &self.potential.is_some())
            .field("force", &self.force.is_some())
            .field("base_curvature", &self.base_curvature)
            .field("fiber_curvature", &self.fiber_curvature)
            .finish()
    }
}

impl WarpedConfig {
    pub fn flat(dim_m: usize, dim_n: usize, warp: SharedField) -> Result<Self> {
        if dim_m == 0 || dim_n == 0 || warp.dim() != dim_m {
            return Err(Error::InvalidParameter("warp must be a function on the base".into()));
        }
        Ok(Self { dim_m, dim_n, warp, potential: None, force: None, base_curvature: 0.0, fiber_curvature: 0.0 })
    }

    pub fn with_force(mut self, force: Force) -> Self {
        self.force = Some(force);
        self
    }

    fn warp_at(&self, x: &[f64]) -> Result<f64> {
        let w = self.warp.value(x);
        if w.is_finite() && w > 0.0 {
            Ok(w)
        } else {
            Err(Error::Domain(format!("w = {w} at x = {x:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicState {
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub y: Vec<f64>,
    pub ydot: Vec<f64>,
    pub t: f64,
}

impl GeodesicState {
    fn pack(&self) -> Vec<f64> {
        [&self.x, &self.xdot, &self.y, &self.ydot].iter().flat_map(|v| v.iter().copied()).collect()
    }

    fn unpack(v: &[f64], dm: usize, dn: usize, t: f64) -> Self {
        Self {
            x: v[..dm].to_vec(),
            xdot: v[dm..2 * dm].to_vec(),
            y: v[2 * dm..2 * dm + dn].to_vec(),
            ydot: v[2 * dm + dn..].to_vec(),
            t,
        }
    }
}

/// `(ẋ, ẍ, ẏ, ÿ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicTendency {
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub y: Vec<f64>,
    pub ydot: Vec<f64>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ẍ = ½ |ẏ|² ∇w + F`, `ÿ = -ẏ (∇w · ẋ) / w`.
pub fn warped_rhs(s: &GeodesicState, c: &WarpedConfig) -> Result<GeodesicTendency> {
    if c.base_curvature != 0.0 || c.fiber_curvature != 0.0 {
        return Err(Error::Unsupported("geodesics are integrated on flat factors only".into()));
    }
    let w = c.warp_at(&s.x)?;
    let grad = c.warp.gradient(&s.x);
    let speed2 = norm2(&s.ydot);
    let mut acc: Vec<f64> = grad.iter().map(|g| 0.5 * speed2 * g).collect();
    if let Some(f) = &c.force {
        for (a, fi) in acc.iter_mut().zip(f(s.t, &s.x)) {
            *a += fi;
        }
    }
    let log_rate = dot(&grad, &s.xdot) / w;
    Ok(GeodesicTendency {
        x: s.xdot.clone(),
        xdot: acc,
        y: s.ydot.clone(),
        ydot: s.ydot.iter().map(|v| -v * log_rate).collect(),
    })
}

/// `g_N(ẏ, ẏ) w(x)²`.
pub fn conserved_c(s: &GeodesicState, c: &WarpedConfig) -> f64 {
    let w = c.warp.value(&s.x);
    norm2(&s.ydot) * w * w
}

/// `g_M(ẋ, ẋ) + w(x) g_N(ẏ, ẏ)`.
pub fn kinetic_energy(s: &GeodesicState, c: &WarpedConfig) -> f64 {
    norm2(&s.xdot) + c.warp.value(&s.x) * norm2(&s.ydot)
}

/// Fixed-step RK4 geodesic from `s` over `[s.t, t_end]`; every state is kept.
pub fn integrate_geodesic(s: &GeodesicState, c: &WarpedConfig, dt: f64, t_end: f64) -> Result<Vec<GeodesicState>> {
    if s.x.len() != c.dim_m || s.xdot.len() != c.dim_m || s.y.len() != c.dim_n || s.ydot.len() != c.dim_n {
        return Err(Error::InvalidParameter("state dimensions do not match the configuration".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    warped_rhs(s, c)?;
    let (dm, dn) = (c.dim_m, c.dim_n);
    let steps = ((t_end - s.t) / dt).round().max(0.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s.clone());
    let mut failure = None;
    for k in 0..steps {
        let cur = out.last().unwrap();
        let t = s.t + k as f64 * dt;
        let y = rk4_step(t, &cur.pack(), dt, |tt, v| {
            let st = GeodesicState::unpack(v, dm, dn, tt);
            match warped_rhs(&st, c) {
                Ok(d) => [d.x, d.xdot, d.y, d.ydot].concat(),
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![0.0; v.len()]
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        out.push(GeodesicState::unpack(&y, dm, dn, s.t + (k + 1) as f64 * dt));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: &dyn ScalarField, x: &[f64]) {
        let h = 1e-5;
        let g = f.gradient(x);
        let hess = f.hessian(x);
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()));
            let (gp, gm) = (f.gradient(&xp), f.gradient(&xm));
            for j in 0..x.len() {
                let fd = (gp[j] - gm[j]) / (2.0 * h);
                assert!((fd - hess[j][i]).abs() < 1e-5 * (1.0 + hess[j][i].abs()));
            }
        }
    }

    #[test]
    fn scalar_field_derivatives() {
        fd_check(&RadialPower { dim: 2, coeff: 1.0, power: -8.0 }, &[0.9, -0.4]);
        fd_check(&Quadratic { offset: 1.0, stiffness: vec![1.0, 3.0] }, &[0.3, 0.7]);
        let v: SharedField = Arc::new(Quadratic { offset: 1.0, stiffness: vec![2.0] });
        fd_check(&Reciprocal(v), &[0.6]);
    }

    fn flat_config(w: SharedField) -> WarpedConfig {
        WarpedConfig::flat(w.dim(), 1, w).unwrap()
    }

    fn state(x: f64, xdot: f64, ydot: f64) -> GeodesicState {
        GeodesicState { x: vec![x], xdot: vec![xdot], y: vec![0.0], ydot: vec![ydot], t: 0.0 }
    }

    #[test]
    fn fiberless_motion_is_straight() {
        let c = flat_config(Arc::new(Reciprocal(Arc::new(Quadratic { offset: 1.0, stiffness: vec![1.0] }))));
        let traj = integrate_geodesic(&state(0.5, 0.3, 0.0), &c, 1e-2, 2.0).unwrap();
        let last = traj.last().unwrap();
        assert!((last.x[0] - 1.1).abs() < 1e-12 && last.ydot[0] == 0.0);
        assert_eq!(conserved_c(last, &c), 0.0);
    }

    #[test]
    fn constant_warp_is_a_product() {
        let c = flat_config(Arc::new(Constant { dim: 1, value: 3.0 }));
        let d = warped_rhs(&state(0.1, 0.2, 0.7), &c).unwrap();
        assert_eq!((d.xdot[0], d.ydot[0]), (0.0, 0.0));
        assert!((conserved_c(&state(0.0, 0.0, 0.7), &c) - 9.0 * 0.49).abs() < 1e-15);
    }

    #[test]
    fn invariants_along_geodesics() {
        let c = flat_config(Arc::new(Reciprocal(Arc::new(Quadratic { offset: 1.0, stiffness: vec![1.0] }))));
        let s = state(1.0, 0.2, 1.3);
        let traj = integrate_geodesic(&s, &c, 1e-3, 10.0).unwrap();
        let (c0, e0) = (conserved_c(&s, &c), kinetic_energy(&s, &c));
        for st in &traj {
            assert!((conserved_c(st, &c) - c0).abs() < 1e-9 * c0);
            assert!((kinetic_energy(st, &c) - e0).abs() < 1e-9 * e0);
        }
    }

    #[test]
    fn nonpositive_warp_is_a_domain_error() {
        let c = flat_config(Arc::new(Quadratic { offset: -1.0, stiffness: vec![1.0] }));
        assert!(matches!(warped_rhs(&state(0.0, 0.0, 1.0), &c), Err(Error::Domain(_))));
        let mut curved = flat_config(Arc::new(Constant { dim: 1, value: 1.0 }));
        curved.base_curvature = 1.0;
        assert!(matches!(warped_rhs(&state(0.0, 0.0, 1.0), &curved), Err(Error::Unsupported(_))));
    }
}
