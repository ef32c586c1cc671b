//! Sectional curvature of warped products `M ×_w N`.
//!
//! The closed-form pairing below is the one for a metric `g_M + f² g_N`:
//!
//! ```text
//! K_M (|u1|²|u2|² - ⟨u1,u2⟩²)
//!   - f [ |v1|² ∇²f(u2,u2) + |v2|² ∇²f(u1,u1) - 2 ⟨v1,v2⟩ ∇²f(u1,u2) ]
//!   + f² [ K_N - |∇f|² ] (|v1|²|v2|² - ⟨v1,v2⟩²)
//! ```
//!
//! With the warp written as `g_M + w g_N` one can either substitute `w` for
//! `f` as printed ([`CurvatureReading::Literal`]) or use `f = √w`
//! ([`CurvatureReading::WarpingFunction`]). Only the latter agrees with the
//! finite-difference Riemann tensor of the same metric.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use super::metric::{area_squared, build_lift_metric, riemann_fd_oracle, LiftMetric, MetricDescriptor};
use super::{dot, norm2, RadialPower, WarpedConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureReading {
    /// Plug `w` into the formula verbatim.
    Literal,
    /// Plug `f = √w`, the warping function of `g_M + f² g_N`.
    WarpingFunction,
}

fn quad(h: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
    a.iter().enumerate().map(|(i, ai)| ai * dot(&h[i], b)).sum()
}

/// Unnormalized pairing `⟨R(X,Y)Y,X⟩` for `X = (u1, v1)`, `Y = (u2, v2)`
/// given in orthonormal coordinates of the factors at `x`.
pub fn sectional_numerator(
    c: &WarpedConfig,
    x: &[f64],
    (u1, v1): (&[f64], &[f64]),
    (u2, v2): (&[f64], &[f64]),
    reading: CurvatureReading,
) -> Result<f64> {
    if x.len() != c.dim_m || u1.len() != c.dim_m || u2.len() != c.dim_m || v1.len() != c.dim_n || v2.len() != c.dim_n {
        return Err(Error::InvalidParameter("vectors must match the factor dimensions".into()));
    }
    let w = c.warp_at(x)?;
    let gw = c.warp.gradient(x);
    let hw = c.warp.hessian(x);
    let (f, grad, hess) = match reading {
        CurvatureReading::Literal => (w, gw, hw),
        CurvatureReading::WarpingFunction => {
            let s = w.sqrt();
            let grad: Vec<f64> = gw.iter().map(|g| g / (2.0 * s)).collect();
            let hess = (0..gw.len())
                .map(|i| (0..gw.len()).map(|j| hw[i][j] / (2.0 * s) - gw[i] * gw[j] / (4.0 * w * s)).collect())
                .collect();
            (s, grad, hess)
        }
    };
    let area_m = norm2(u1) * norm2(u2) - dot(u1, u2).powi(2);
    let area_n = norm2(v1) * norm2(v2) - dot(v1, v2).powi(2);
    let mixed = norm2(v1) * quad(&hess, u2, u2) + norm2(v2) * quad(&hess, u1, u1) - 2.0 * dot(v1, v2) * quad(&hess, u1, u2);
    Ok(c.base_curvature * area_m - f * mixed + f * f * (c.fiber_curvature - norm2(&grad)) * area_n)
}

/// `(x, y)² + (x² + y²)^{-4} dz²` as a warped product over the flat plane.
pub fn cone_warped_config() -> WarpedConfig {
    WarpedConfig::flat(2, 1, Arc::new(RadialPower { dim: 2, coeff: 1.0, power: -8.0 }))
        .expect("static configuration is valid")
}

/// The closed-form pairing on the cone metric `r² dθ² + dr² + r⁻⁸ dy²`, for a
/// point `(θ, r, y)` and coordinate vectors, via the Cartesian chart of the base.
pub fn cone_sectional_numerator(point: &[f64], xv: &[f64], yv: &[f64], reading: CurvatureReading) -> Result<f64> {
    if point.len() != 3 || xv.len() != 3 || yv.len() != 3 {
        return Err(Error::InvalidParameter("cone points and vectors have three components".into()));
    }
    let (theta, r) = (point[0], point[1]);
    if !(r > 0.0) {
        return Err(Error::NonPositiveRadius(r));
    }
    let (s, c) = theta.sin_cos();
    let base = [r * c, r * s];
    // dx1 = cosθ dr - r sinθ dθ, dx2 = sinθ dr + r cosθ dθ
    let push = |v: &[f64]| [c * v[1] - r * s * v[0], s * v[1] + r * c * v[0]];
    let (u1, u2) = (push(xv), push(yv));
    sectional_numerator(&cone_warped_config(), &base, (&u1, &xv[2..]), (&u2, &yv[2..]), reading)
}

fn sample_point(m: &MetricDescriptor, rng: &mut ChaCha8Rng) -> Vec<f64> {
    m.domain.iter().map(|&(lo, hi)| Uniform::new(lo, hi).expect("valid interval").sample(rng)).collect()
}

/// Random plane orthonormal in the metric at `x`; nearly degenerate Gaussian
/// pairs are redrawn.
fn sample_plane(m: &MetricDescriptor, x: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = m.dim();
    loop {
        let a: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let (na, nb) = (m.inner(x, &a, &a).sqrt(), m.inner(x, &b, &b).sqrt());
        let a: Vec<f64> = a.iter().map(|v| v / na).collect();
        let b: Vec<f64> = b.iter().map(|v| v / nb).collect();
        if area_squared(m, x, &a, &b) < 1e-12 {
            continue;
        }
        let proj = m.inner(x, &a, &b);
        let b: Vec<f64> = b.iter().zip(&a).map(|(bi, ai)| bi - proj * ai).collect();
        let nb = m.inner(x, &b, &b).sqrt();
        return (a, b.iter().map(|v| v / nb).collect());
    }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub metric: String,
    pub samples: usize,
    pub tolerance: f64,
    pub max_curvature: f64,
    pub min_curvature: f64,
    /// Samples with curvature above `tolerance`.
    pub positive_samples: usize,
    pub worst: CurvatureSample,
}

/// Normalized sectional curvature (finite-difference oracle) at
/// `n_points × n_planes` random point/plane pairs.
pub fn curvature_samples(m: &MetricDescriptor, n_points: usize, n_planes: usize, seed: u64) -> Result<Vec<CurvatureSample>> {
    if n_points == 0 || n_planes == 0 {
        return Err(Error::InvalidParameter("scan needs at least one point and one plane".into()));
    }
    Ok((0..n_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let point = sample_point(m, &mut rng);
            (0..n_planes)
                .map(|_| {
                    let (x, y) = sample_plane(m, &point, &mut rng);
                    let curvature = riemann_fd_oracle(m, &point, &x, &y)?;
                    Ok(CurvatureSample { point: point.clone(), x, y, curvature })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect())
}

impl ScanReport {
    pub fn from_samples(metric: &str, samples: &[CurvatureSample], tolerance: f64) -> Result<Self> {
        let worst = samples
            .iter()
            .max_by(|a, b| a.curvature.total_cmp(&b.curvature))
            .ok_or_else(|| Error::InvalidParameter("no curvature samples".into()))?
            .clone();
        Ok(ScanReport {
            metric: metric.to_string(),
            samples: samples.len(),
            tolerance,
            max_curvature: worst.curvature,
            min_curvature: samples.iter().map(|s| s.curvature).fold(f64::INFINITY, f64::min),
            positive_samples: samples.iter().filter(|s| s.curvature > tolerance).count(),
            worst,
        })
    }
}

pub fn curvature_sign_scan(
    m: &MetricDescriptor,
    n_points: usize,
    n_planes: usize,
    seed: u64,
    tolerance: f64,
) -> Result<ScanReport> {
    ScanReport::from_samples(&m.name, &curvature_samples(m, n_points, n_planes, seed)?, tolerance)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub reading: CurvatureReading,
    pub samples: usize,
    /// `max |K_formula - K_fd| / max(|K_formula|, |K_fd|, κ)` where `κ` is the
    /// largest `|K|` over coordinate planes at the sample point.
    pub max_relative: f64,
    pub worst: CurvatureSample,
    pub worst_formula: f64,
}

/// Largest `|K|` over the coordinate planes at `(θ, r, y)`.
fn cone_curvature_scale(point: &[f64], reading: CurvatureReading) -> Result<f64> {
    let r = point[1];
    let units = [[1.0 / r, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, r.powi(4)]];
    let mut scale = 0.0_f64;
    for i in 0..3 {
        for j in i + 1..3 {
            scale = scale.max(cone_sectional_numerator(point, &units[i], &units[j], reading)?.abs());
        }
    }
    Ok(scale)
}

/// Compare the closed-form pairing with the finite-difference oracle on random
/// point/plane samples of the cone metric `r² dθ² + dr² + r⁻⁸ dy²`.
pub fn cone_formula_agreement(samples: usize, seed: u64, reading: CurvatureReading) -> Result<AgreementReport> {
    let m = build_lift_metric(&LiftMetric::ChCone { d: 1 })?;
    let rows = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let point = sample_point(&m, &mut rng);
            let (x, y) = sample_plane(&m, &point, &mut rng);
            let fd = riemann_fd_oracle(&m, &point, &x, &y)?;
            let formula = cone_sectional_numerator(&point, &x, &y, reading)?;
            let rel = (formula - fd).abs() / formula.abs().max(fd.abs()).max(cone_curvature_scale(&point, reading)?);
            Ok((rel, formula, CurvatureSample { point, x, y, curvature: fd }))
        })
        .collect::<Result<Vec<_>>>()?;
    let (max_relative, worst_formula, worst) = rows
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::InvalidParameter("need at least one sample".into()))?;
    Ok(AgreementReport { reading, samples, max_relative, worst, worst_formula })
}
