//! Classical fourth-order Runge–Kutta on flat state vectors.

/// One RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F>(t: f64, y: &[f64], dt: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let stage = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, k)| b + h * k).collect()
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, &stage(y, &k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, &stage(y, &k2, 0.5 * dt));
    let k4 = f(t + dt, &stage(y, &k3, dt));
    y.iter()
        .enumerate()
        .map(|(i, yi)| yi + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Fallible variant: the first stage error aborts the step.
pub fn try_rk4_step<F, E>(t: f64, y: &[f64], dt: f64, mut f: F) -> Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
{
    let mut err = None;
    let out = rk4_step(t, y, dt, |s, v| {
        if err.is_some() {
            return vec![0.0; v.len()];
        }
        match f(s, v) {
            Ok(d) => d,
            Err(e) => {
                err = Some(e);
                vec![0.0; v.len()]
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Cubic Hermite interpolation on `[t0, t1]` from values and slopes.
pub fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let (w0, w1, v0, v1) = hermite_weights(t0, t1, t);
    w0 * y0 + w1 * y1 + v0 * d0 + v1 * d1
}

/// Weights `(h00, h01, h h10, h h11)` of the cubic Hermite basis.
pub fn hermite_weights(t0: f64, t1: f64, t: f64) -> (f64, f64, f64, f64) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        -2.0 * s3 + 3.0 * s2,
        h * (s3 - 2.0 * s2 + s),
        h * (s3 - s2),
    )
}

/// Observed convergence order between two errors at step ratio `ratio`.
pub fn observed_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let solve = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let mut y = vec![1.0];
            for i in 0..steps {
                y = rk4_step(i as f64 * dt, &y, dt, |_, y| vec![-y[0]]);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let order = observed_order(solve(0.1), solve(0.05), 2.0);
        assert!((order - 4.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t + 0.3 * t * t * t;
        let df = |t: f64| -2.0 + t + 0.9 * t * t;
        let (a, b) = (0.3, 0.8);
        for t in [0.3, 0.45, 0.61, 0.8] {
            let v = hermite(a, b, f(a), f(b), df(a), df(b), t);
            assert!((v - f(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn fallible_step_propagates_errors() {
        let r: Result<Vec<f64>, &str> = try_rk4_step(0.0, &[1.0], 0.1, |t, _| {
            if t > 0.0 {
                Err("boom")
            } else {
                Ok(vec![1.0])
            }
        });
        assert_eq!(r, Err("boom"));
    }
}
