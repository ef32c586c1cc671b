//! Diagonal metrics of the lifted manifolds and a finite-difference Riemann
//! tensor used as an independent curvature oracle.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::SharedField;
use crate::error::{Error, Result};

pub type Coefficient = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `Σ_i g_i(x) (dx^i)²` with a sampling box for scans.
#[derive(Clone)]
pub struct MetricDescriptor {
    pub name: String,
    pub coords: Vec<String>,
    pub coeffs: Vec<Coefficient>,
    /// Per-coordinate sampling interval.
    pub domain: Vec<(f64, f64)>,
}

impl fmt::Debug for MetricDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricDescriptor")
            .field("name", &self.name)
            .field("coords", &self.coords)
            .field("domain", &self.domain)
            .finish()
    }
}

impl MetricDescriptor {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn diagonal(&self, x: &[f64]) -> Vec<f64> {
        self.coeffs.iter().map(|g| g(x)).collect()
    }

    pub fn inner(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        self.diagonal(x).iter().zip(a).zip(b).map(|((g, u), v)| g * u * v).sum()
    }
}

#[derive(Clone)]
pub enum LiftMetric {
    /// `r² dθ_1² + … + r² dθ_d² + dr² + r^{-2(3+d)} dy²` over a flat `d`-torus.
    ChCone { d: usize },
    /// `g + (1/V) dz² + V dy²` over flat `R^d`.
    Tao(SharedField),
    /// `r² dθ² + dr² + r² dy² + r^{-10} dz²`.
    Ch2Corollary,
    /// `dx² + dy² + (x² + y²)^{-4} dz²`.
    ConeCartesian,
    /// `dθ² + sin²θ dφ²`.
    Sphere2,
    Euclidean(usize),
}

impl fmt::Debug for LiftMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiftMetric::ChCone { d } => write!(f, "ChCone {{ d: {d} }}"),
            LiftMetric::Tao(v) => write!(f, "Tao(dim {})", v.dim()),
            LiftMetric::Ch2Corollary => write!(f, "Ch2Corollary"),
            LiftMetric::ConeCartesian => write!(f, "ConeCartesian"),
            LiftMetric::Sphere2 => write!(f, "Sphere2"),
            LiftMetric::Euclidean(n) => write!(f, "Euclidean({n})"),
        }
    }
}

/// Exponent of `r` in the extra fiber coefficient over a `d`-dimensional base.
pub fn fiber_exponent(d: usize) -> i32 {
    -2 * (3 + d as i32)
}

/// Radial range sampled on cones (the vertex is excluded).
pub const CONE_RADII: (f64, f64) = (0.2, 5.0);

fn coeff(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Coefficient {
    Arc::new(f)
}

pub fn build_lift_metric(kind: &LiftMetric) -> Result<MetricDescriptor> {
    let angle = (0.0, 2.0 * PI);
    Ok(match kind {
        LiftMetric::ChCone { d } => {
            let d = *d;
            if d == 0 {
                return Err(Error::InvalidParameter("cone base dimension must be >= 1".into()));
            }
            let e = fiber_exponent(d);
            let mut coords: Vec<String> = (1..=d).map(|i| format!("theta{i}")).collect();
            coords.extend(["r".to_string(), "y".to_string()]);
            let mut coeffs: Vec<Coefficient> = (0..d).map(|_| coeff(move |x: &[f64]| x[d] * x[d])).collect();
            coeffs.push(coeff(|_| 1.0));
            coeffs.push(coeff(move |x: &[f64]| x[d].powi(e)));
            let mut domain = vec![angle; d];
            domain.extend([CONE_RADII, angle]);
            MetricDescriptor { name: format!("ch-cone(d={d})"), coords, coeffs, domain }
        }
        LiftMetric::Tao(v) => {
            let d = v.dim();
            let mut coords: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
            coords.extend(["z".to_string(), "y".to_string()]);
            let mut coeffs: Vec<Coefficient> = (0..d).map(|_| coeff(|_| 1.0)).collect();
            let (v1, v2) = (v.clone(), v.clone());
            coeffs.push(coeff(move |x: &[f64]| 1.0 / v1.value(&x[..d])));
            coeffs.push(coeff(move |x: &[f64]| v2.value(&x[..d])));
            let mut domain = vec![(-1.0, 1.0); d];
            domain.extend([angle, angle]);
            MetricDescriptor { name: "tao".into(), coords, coeffs, domain }
        }
        LiftMetric::Ch2Corollary => {
            // Base M × S¹ has dimension d = 2 under the cone.
            let e = fiber_exponent(2);
            MetricDescriptor {
                name: "ch2-corollary".into(),
                coords: ["theta", "r", "y", "z"].map(String::from).to_vec(),
                coeffs: vec![
                    coeff(|x: &[f64]| x[1] * x[1]),
                    coeff(|_| 1.0),
                    coeff(|x: &[f64]| x[1] * x[1]),
                    coeff(move |x: &[f64]| x[1].powi(e)),
                ],
                domain: vec![angle, CONE_RADII, angle, angle],
            }
        }
        LiftMetric::ConeCartesian => MetricDescriptor {
            name: "cone-cartesian".into(),
            coords: ["x", "y", "z"].map(String::from).to_vec(),
            coeffs: vec![
                coeff(|_| 1.0),
                coeff(|_| 1.0),
                coeff(|x: &[f64]| (x[0] * x[0] + x[1] * x[1]).powi(-4)),
            ],
            domain: vec![(-3.0, 3.0), (-3.0, 3.0), angle],
        },
        LiftMetric::Sphere2 => MetricDescriptor {
            name: "sphere2".into(),
            coords: ["theta", "phi"].map(String::from).to_vec(),
            coeffs: vec![coeff(|_| 1.0), coeff(|x: &[f64]| x[0].sin().powi(2))],
            domain: vec![(0.3, PI - 0.3), angle],
        },
        LiftMetric::Euclidean(n) => MetricDescriptor {
            name: format!("euclidean({n})"),
            coords: (1..=*n).map(|i| format!("x{i}")).collect(),
            coeffs: (0..*n).map(|_| coeff(|_| 1.0)).collect(),
            domain: vec![(-1.0, 1.0); *n],
        },
    })
}

fn fd_step(x: f64, refine: f64) -> f64 {
    1e-4 * refine * (1.0 + x.abs())
}

fn checked_diagonal(m: &MetricDescriptor, x: &[f64]) -> Result<Vec<f64>> {
    let g = m.diagonal(x);
    if g.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(g)
    } else {
        Err(Error::SingularMetric)
    }
}

/// `Γ^a_{bc}` at `x` from centered differences of the diagonal coefficients.
fn christoffel(m: &MetricDescriptor, x: &[f64], refine: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = m.dim();
    let g = checked_diagonal(m, x)?;
    // dg[k][a] = ∂_k g_aa
    let mut dg = vec![vec![0.0; n]; n];
    for k in 0..n {
        let h = fd_step(x[k], refine);
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[k] += h;
        xm[k] -= h;
        let (gp, gm) = (checked_diagonal(m, &xp)?, checked_diagonal(m, &xm)?);
        for a in 0..n {
            dg[k][a] = (gp[a] - gm[a]) / (2.0 * h);
        }
    }
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                // ½ g^{aa} (∂_b g_ac + ∂_c g_ab - ∂_a g_bc) for a diagonal metric
                let mut s = 0.0;
                if a == c {
                    s += dg[b][a];
                }
                if a == b {
                    s += dg[c][a];
                }
                if b == c {
                    s -= dg[a][b];
                }
                gamma[a][b][c] = 0.5 * s / g[a];
            }
        }
    }
    Ok(gamma)
}

/// `⟨R(X, Y) Y, X⟩` with `R^a_{bcd} = ∂_c Γ^a_{db} - ∂_d Γ^a_{cb} + Γ^a_{ce} Γ^e_{db} - Γ^a_{de} Γ^e_{cb}`,
/// all derivatives by centered differences with step `1e-4 (1 + |x_k|)`, plus
/// one Richardson step against the half step.
pub fn riemann_fd_oracle(m: &MetricDescriptor, x: &[f64], xv: &[f64], yv: &[f64]) -> Result<f64> {
    let n = m.dim();
    if x.len() != n || xv.len() != n || yv.len() != n {
        return Err(Error::InvalidParameter("point and vectors must match the metric dimension".into()));
    }
    let coarse = riemann_pairing(m, x, xv, yv, 1.0)?;
    let fine = riemann_pairing(m, x, xv, yv, 0.5)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn riemann_pairing(m: &MetricDescriptor, x: &[f64], xv: &[f64], yv: &[f64], refine: f64) -> Result<f64> {
    let n = m.dim();
    let g = checked_diagonal(m, x)?;
    let gamma = christoffel(m, x, refine)?;
    // dgamma[k][a][b][c] = ∂_k Γ^a_{bc}
    let mut dgamma = Vec::with_capacity(n);
    for k in 0..n {
        let h = fd_step(x[k], refine);
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[k] += h;
        xm[k] -= h;
        let (gp, gm) = (christoffel(m, &xp, refine)?, christoffel(m, &xm, refine)?);
        let mut d = vec![vec![vec![0.0; n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    d[a][b][c] = (gp[a][b][c] - gm[a][b][c]) / (2.0 * h);
                }
            }
        }
        dgamma.push(d);
    }
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let weight = g[a] * xv[a] * yv[b] * xv[c] * yv[d];
                    if weight == 0.0 {
                        continue;
                    }
                    let mut r = dgamma[c][a][d][b] - dgamma[d][a][c][b];
                    for e in 0..n {
                        r += gamma[a][c][e] * gamma[e][d][b] - gamma[a][d][e] * gamma[e][c][b];
                    }
                    total += weight * r;
                }
            }
        }
    }
    Ok(total)
}

/// `⟨X,X⟩⟨Y,Y⟩ - ⟨X,Y⟩²` in the metric at `x`.
pub fn area_squared(m: &MetricDescriptor, x: &[f64], xv: &[f64], yv: &[f64]) -> f64 {
    let (xx, yy, xy) = (m.inner(x, xv, xv), m.inner(x, yv, yv), m.inner(x, xv, yv));
    xx * yy - xy * xy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warped::Constant;

    #[test]
    fn exponents() {
        assert_eq!(fiber_exponent(1), -8);
        assert_eq!(fiber_exponent(2), -10);
        let m = build_lift_metric(&LiftMetric::ChCone { d: 1 }).unwrap();
        let x = [0.4, 1.7, 2.0];
        let g = m.diagonal(&x);
        let want = [1.7 * 1.7, 1.0, 1.7_f64.powi(-8)];
        assert!(g.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15 * b));
        let c = build_lift_metric(&LiftMetric::Ch2Corollary).unwrap();
        let g = c.diagonal(&[0.1, 1.3, 0.2, 0.3]);
        let want = [1.3 * 1.3, 1.0, 1.3 * 1.3, 1.3_f64.powi(-10)];
        assert!(g.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15 * b));
        // The corollary metric is the cone over the two-dimensional base.
        let cone2 = build_lift_metric(&LiftMetric::ChCone { d: 2 }).unwrap();
        assert_eq!(cone2.diagonal(&[0.1, 0.2, 1.3, 0.3])[3], g[3]);
        assert!(build_lift_metric(&LiftMetric::ChCone { d: 0 }).is_err());
    }

    #[test]
    fn tao_with_unit_potential_is_a_product() {
        let m = build_lift_metric(&LiftMetric::Tao(Arc::new(Constant { dim: 2, value: 1.0 }))).unwrap();
        assert_eq!(m.diagonal(&[0.3, -0.2, 1.0, 2.0]), vec![1.0; 4]);
        let x = [0.3, -0.2, 1.0, 2.0];
        let v = [1.0, 0.5, 0.0, 0.2];
        let w = [0.0, 1.0, 0.3, -1.0];
        assert_eq!(riemann_fd_oracle(&m, &x, &v, &w).unwrap(), 0.0);
    }

    #[test]
    fn euclidean_and_sphere() {
        let e = build_lift_metric(&LiftMetric::Euclidean(3)).unwrap();
        let k = riemann_fd_oracle(&e, &[0.1, 0.2, 0.3], &[1.0, 0.0, 0.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!(k.abs() < 1e-8);
        let s = build_lift_metric(&LiftMetric::Sphere2).unwrap();
        let x = [1.1, 0.4];
        let (xv, yv) = ([1.0, 0.0], [0.3, 2.0]);
        let k = riemann_fd_oracle(&s, &x, &xv, &yv).unwrap() / area_squared(&s, &x, &xv, &yv);
        assert!((k - 1.0).abs() < 1e-6, "{k}");
    }

    #[test]
    fn singular_metric_is_reported() {
        let s = build_lift_metric(&LiftMetric::Sphere2).unwrap();
        assert_eq!(riemann_fd_oracle(&s, &[0.0, 0.3], &[1.0, 0.0], &[0.0, 1.0]), Err(Error::SingularMetric));
    }
}
