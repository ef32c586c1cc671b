//! Pass/fail tolerances shared by the acceptance tests and the CLI.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub divergence_linf: f64,
    pub consistency_rel: f64,
    /// The α = 1 negative control must stay above this.
    pub consistency_negative_min: f64,
    /// Lower bound on observed orders under dt halving.
    pub fd_order_min: f64,
    pub curl_rel: f64,
    pub curl_spread: f64,
    pub vorticity_rel: f64,
    pub ch2_lift_rel: f64,
    pub ch2_grid2d: f64,
    pub conservation_rel: f64,
    pub peakon_hamiltonian: f64,
    /// `min ∂θφ` must drop below this in the collision run.
    pub blowup_jacobian: f64,
    pub midpoint_velocity: f64,
    pub eisenhart_deviation: f64,
    pub eisenhart_c_drift: f64,
    pub eisenhart_order_min: f64,
    pub curvature_agreement: f64,
    pub curvature_sign: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            divergence_linf: 1e-10,
            consistency_rel: 1e-9,
            consistency_negative_min: 1e-2,
            fd_order_min: 3.5,
            curl_rel: 1e-10,
            curl_spread: 1e-10,
            vorticity_rel: 1e-9,
            ch2_lift_rel: 1e-9,
            ch2_grid2d: 1e-11,
            conservation_rel: 1e-8,
            peakon_hamiltonian: 1e-9,
            blowup_jacobian: 1e-2,
            midpoint_velocity: 1e-10,
            eisenhart_deviation: 1e-8,
            eisenhart_c_drift: 1e-9,
            eisenhart_order_min: 3.5,
            curvature_agreement: 1e-5,
            curvature_sign: 1e-8,
        }
    }
}

impl Thresholds {
    /// Multiply every upper-bound tolerance by `factor`; lower bounds
    /// (orders, negative-control floor) are left alone.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            divergence_linf: self.divergence_linf * factor,
            consistency_rel: self.consistency_rel * factor,
            curl_rel: self.curl_rel * factor,
            curl_spread: self.curl_spread * factor,
            vorticity_rel: self.vorticity_rel * factor,
            ch2_lift_rel: self.ch2_lift_rel * factor,
            ch2_grid2d: self.ch2_grid2d * factor,
            conservation_rel: self.conservation_rel * factor,
            peakon_hamiltonian: self.peakon_hamiltonian * factor,
            blowup_jacobian: self.blowup_jacobian * factor,
            midpoint_velocity: self.midpoint_velocity * factor,
            eisenhart_deviation: self.eisenhart_deviation * factor,
            eisenhart_c_drift: self.eisenhart_c_drift * factor,
            curvature_agreement: self.curvature_agreement * factor,
            curvature_sign: self.curvature_sign * factor,
            ..*self
        }
    }
}

/// One named comparison against a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `true` when `value <= threshold` is required, `false` for `>=`.
    pub upper_bound: bool,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, upper_bound: true, passed: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, upper_bound: false, passed: value >= threshold }
    }

    /// A boolean property, recorded as 1 (holds) or 0.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: f64::from(u8::from(ok)), threshold: 1.0, upper_bound: false, passed: ok }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_leaves_lower_bounds() {
        let t = Thresholds::default().scaled(10.0);
        assert_eq!(t.consistency_rel, 1e-8);
        assert_eq!(t.fd_order_min, 3.5);
        assert_eq!(t.consistency_negative_min, 1e-2);
        assert!(Check::at_most("x", 1.0, 1.0).passed);
        assert!(!Check::at_least("x", 0.5, 1.0).passed);
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
    }
}
