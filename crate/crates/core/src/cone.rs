//! Lifts from the circle to the cone `S¹ × R>0`: velocity `w = (u, r u_θ / 2)`,
//! flow `Ψ(θ, r) = r √(∂θφ) e^{iφ}`, momentum 1-form, curl and vorticity checks.
//!
//! Components are taken in the orthonormal polar frame `(e_r, e_θ = ∂θ / r)`.
//! For the cone `r² dθ² + a² dr²` the radial unit vector is `∂_r / a` and the
//! matching Helmholtz parameter is `α = a / 2`; `α = 1/2` is the unit cone.

use serde::Serialize;

use crate::dynamics::{momentum_flux, FlowMap};
use crate::error::{Error, Result};
use crate::euler::relative;
use crate::spectral::PeriodicField;

/// Radii used by the two-dimensional checks.
pub const CHECK_RADII: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeSample {
    pub theta: f64,
    pub r: f64,
    pub v_r: f64,
    pub v_theta: f64,
}

pub(crate) fn check_radii(radii: &[f64]) -> Result<()> {
    match radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        Some(&r) => Err(Error::NonPositiveRadius(r)),
        None => Ok(()),
    }
}

/// `v_r = r u_θ / 2`, `v_θ = r u`, radius-major.
pub fn lift_velocity(u: &PeriodicField, radii: &[f64]) -> Result<Vec<ConeSample>> {
    check_radii(radii)?;
    let ux = u.diff(1);
    let ux = &ux;
    let thetas = u.grid().points();
    let thetas = &thetas;
    Ok(radii
        .iter()
        .flat_map(|&r| {
            thetas.iter().enumerate().map(move |(j, &theta)| ConeSample {
                theta,
                r,
                v_r: 0.5 * r * ux.values()[j],
                v_theta: r * u.values()[j],
            })
        })
        .collect())
}

/// Image of the circle of radius `r` under `Ψ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedCurve {
    pub radius: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn lift_flow(f: &FlowMap, radii: &[f64]) -> Result<Vec<LiftedCurve>> {
    check_radii(radii)?;
    let min_jacobian = f.jacobian.min();
    if !(min_jacobian > 0.0) {
        return Err(Error::NonPositiveJacobian { min_jacobian });
    }
    let phi = f.positions();
    Ok(radii
        .iter()
        .map(|&radius| LiftedCurve {
            radius,
            points: phi
                .iter()
                .zip(f.jacobian.values())
                .map(|(&angle, &j)| {
                    let rho = radius * j.sqrt();
                    (rho * angle.cos(), rho * angle.sin())
                })
                .collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Momentum1Form {
    pub n: PeriodicField,
}

/// `n = u - α² u_xx`.
pub fn momentum_oneform(u: &PeriodicField, alpha: f64) -> Momentum1Form {
    Momentum1Form { n: u.helmholtz(alpha) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurlReport {
    pub alpha: f64,
    /// Relative L2 deviation of the discrete curl from `m / α`.
    pub residual: f64,
    /// Largest relative deviation between the curls at different radii.
    pub radial_spread: f64,
    /// Set when `α != 1/2`: the target `m / α` comes from repeating the
    /// computation on the cone of aperture `2α`, not from the unit-cone identity.
    pub derived_identity: bool,
}

/// Discrete scalar curl of the lifted field on the cone of aperture `2α`,
/// one field per radius.
///
/// `curl = (1/(a r)) [∂_r(r v_θ) - a ∂_θ v_r]` with orthonormal components
/// `v_θ = r u`, `v_r = a r u_θ / 2`. Both components are linear in `r`, so
/// `∂_r(r v_θ) = 2 v_θ` is applied exactly while `∂_θ` is spectral.
pub fn lifted_curl(u: &PeriodicField, alpha: f64, radii: &[f64]) -> Result<Vec<PeriodicField>> {
    check_radii(radii)?;
    let a = 2.0 * alpha;
    Ok(radii
        .iter()
        .map(|&r| {
            let v_theta = u.scale(r);
            let v_r = u.diff(1).scale(0.5 * a * r);
            let radial = v_theta.scale(2.0);
            let angular = v_r.diff(1).scale(a);
            (&radial - &angular).scale(1.0 / (a * r))
        })
        .collect())
}

pub fn curl_report(u: &PeriodicField, alpha: f64, radii: &[f64]) -> Result<CurlReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("curl check needs alpha > 0, got {alpha}")));
    }
    let curls = lifted_curl(u, alpha, radii)?;
    let target = u.helmholtz(alpha).scale(1.0 / alpha);
    let residual = curls
        .iter()
        .map(|c| relative(&(c - &target), c.l2_norm() + target.l2_norm()))
        .fold(0.0, f64::max);
    let mut radial_spread = 0.0_f64;
    for (i, a) in curls.iter().enumerate() {
        for b in &curls[i + 1..] {
            radial_spread = radial_spread.max(relative(&(a - b), a.l2_norm() + b.l2_norm()));
        }
    }
    Ok(CurlReport { alpha, residual, radial_spread, derived_identity: alpha != 0.5 })
}

/// Relative deviation of the lifted curl from `2u - ½ u_xx` at the default radii.
pub fn curl_identity_residual(u: &PeriodicField) -> f64 {
    curl_report(u, 0.5, &CHECK_RADII)
        .expect("fixed radii are positive")
        .residual
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VorticityReport {
    pub alpha: f64,
    pub relative: f64,
    pub absolute: f64,
    pub derived_identity: bool,
}

/// Residual of `ṅ + u n_x + 2 n u_x = 0`, `n = u - α² u_xx`, the reduction of
/// the advection of `r² n` by the lifted field.
pub fn advected_vorticity_report(u: &PeriodicField, ut: &PeriodicField, alpha: f64) -> Result<VorticityReport> {
    if u.grid() != ut.grid() {
        return Err(Error::GridMismatch);
    }
    let n = u.helmholtz(alpha);
    let n_dot = ut.helmholtz(alpha);
    let flux = momentum_flux(u, &n);
    let res = &n_dot + &flux;
    Ok(VorticityReport {
        alpha,
        relative: relative(&res, n_dot.l2_norm() + flux.l2_norm()),
        absolute: res.l2_norm(),
        derived_identity: alpha != 0.5,
    })
}

pub fn advected_vorticity_check(u: &PeriodicField, ut: &PeriodicField) -> Result<f64> {
    Ok(advected_vorticity_report(u, ut, 0.5)?.relative)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Frame {
    pub t: f64,
    pub min_jacobian: f64,
    /// No curves are emitted once the Jacobian is nonpositive.
    pub truncated: bool,
    pub curves: Vec<LiftedCurve>,
}

/// Lifted curves of every radius at each snapshot time.
pub fn figure1_emit(snapshots: &[(f64, FlowMap)], radii: &[f64]) -> Result<Vec<Figure1Frame>> {
    check_radii(radii)?;
    snapshots
        .iter()
        .map(|(t, f)| {
            let min_jacobian = f.jacobian.min();
            match lift_flow(f, radii) {
                Ok(curves) => Ok(Figure1Frame { t: *t, min_jacobian, truncated: false, curves }),
                Err(Error::NonPositiveJacobian { .. }) => {
                    Ok(Figure1Frame { t: *t, min_jacobian, truncated: true, curves: Vec::new() })
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}
