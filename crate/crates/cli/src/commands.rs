use std::sync::Arc;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::{json, Value};

use conelab_core::cone::{advected_vorticity_report, curl_report};
use conelab_core::dynamics::{ch2_rhs, integrate, relative_drift, Evolve, RunOptions, RunOutcome, Termination};
use conelab_core::euler::{
    ch2_lift_residual, convergence_sweep, divergence_report, euler_consistency_residual_on, Identity, ResidualReport,
    TimeDerivative,
};
use conelab_core::peakon::{peakon_run, CollisionRule};
use conelab_core::presets::{self, InitialState, PresetParams};
use conelab_core::scenarios::{collision_run, fd_consistency, CollisionConfig};
use conelab_core::thresholds::{Check, Thresholds};
use conelab_core::warped::curvature::{cone_formula_agreement, ScanReport};
use conelab_core::warped::{
    build_lift_metric, curvature_samples, eisenhart_verify, CurvatureReading, LiftMetric, Quadratic, SharedField,
};
use conelab_core::Grid1D;

use crate::output::{figure1_svg, num, opt, tag, OutputDir};
use crate::settings::RunConfig;
use crate::Command;

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub thresholds: Thresholds,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub details: Value,
    pub files: Vec<String>,
}

struct Outcome {
    checks: Vec<Check>,
    details: Value,
}

/// Runs one suite into `cfg.out`, writing `report.json` last. Returns whether
/// every check passed.
pub fn run(command: Command, cfg: &RunConfig) -> Result<(bool, Vec<Check>)> {
    let tol = Thresholds::default().scaled(cfg.tol_scale);
    let mut out = OutputDir::create(&cfg.out)?;
    let outcome = match command {
        Command::ChRun => ch_run(cfg, &tol, &mut out)?,
        Command::Ch2Run => ch2_run(cfg, &tol, &mut out)?,
        Command::PeakonRun => peakon(cfg, &tol, &mut out)?,
        Command::VerifyEmbedding => verify_embedding(cfg, &tol, &mut out)?,
        Command::VerifyCh2Lift => verify_ch2_lift(cfg, &tol, &mut out)?,
        Command::VerifyVorticity => verify_vorticity(cfg, &tol, &mut out)?,
        Command::Eisenhart => eisenhart(cfg, &tol, &mut out)?,
        Command::CurvatureScan => curvature_scan(cfg, &tol, &mut out)?,
        Command::Figure1 => figure1(cfg, &tol, &mut out)?,
        Command::Sweep => sweep(cfg, &tol, &mut out)?,
        Command::All => bail!("`all` is dispatched by the caller"),
    };
    let passed = outcome.checks.iter().all(|c| c.passed);
    let mut files = out.files().to_vec();
    files.push("report.json".into());
    let report = Report {
        command: command.name(),
        config: cfg,
        thresholds: tol,
        passed,
        checks: outcome.checks.clone(),
        details: outcome.details,
        files,
    };
    out.json("report.json", &report)?;
    Ok((passed, outcome.checks))
}

fn grid(cfg: &RunConfig) -> Result<Grid1D> {
    Ok(Grid1D::periodic(cfg.n)?)
}

fn params(cfg: &RunConfig) -> PresetParams {
    PresetParams { p0: cfg.p0, q0: cfg.q0, ..PresetParams::default() }
}

fn series_csv<S>(out: &mut OutputDir, run: &RunOutcome<S>) -> Result<()> {
    let rows = run.series.iter().map(|r| {
        vec![num(r.t), num(r.energy), num(r.momentum), opt(r.density), opt(r.min_jacobian)]
    });
    out.csv("series.csv", &["t", "energy", "momentum", "density", "min_jacobian"], rows)
}

fn conservation_checks<S: Evolve>(run: &RunOutcome<S>, scale_m: f64, tol: &Thresholds) -> Vec<Check> {
    let (a, b) = (&run.series[0], run.series.last().expect("series is never empty"));
    let mut checks = vec![
        Check::holds("completed", run.termination == Termination::Completed),
        Check::at_most("energy_drift", relative_drift(a.energy, b.energy, 0.0), tol.conservation_rel),
        Check::at_most(
            "momentum_drift",
            relative_drift(a.momentum, b.momentum, scale_m.max(run.state.momentum_scale())),
            tol.conservation_rel,
        ),
    ];
    if let (Some(x), Some(y)) = (a.density, b.density) {
        checks.push(Check::at_most("density_drift", relative_drift(x, y, 0.0), tol.conservation_rel));
    }
    checks
}

fn evolve_and_report<S: Evolve>(s: S, cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let scale_m = s.momentum_scale();
    let run = integrate(s, &RunOptions::new(cfg.dt, cfg.t_end).with_flow())?;
    series_csv(out, &run)?;
    let checks = conservation_checks(&run, scale_m, tol);
    Ok(Outcome {
        checks,
        details: json!({
            "termination": run.termination,
            "final_time": run.state.time(),
            "min_jacobian": run.flow.as_ref().map(|f| f.jacobian.min()),
        }),
    })
}

fn ch_run(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let g = grid(cfg)?;
    let s = match presets::preset_ic(&cfg.ic, &params(cfg), g, cfg.alpha, cfg.g)? {
        InitialState::Ch(s) => s,
        InitialState::Peakons(e) => e.to_ch_state(g)?,
        InitialState::Ch2(_) => bail!("`{}` is a two-component preset; use ch2-run", cfg.ic),
    };
    evolve_and_report(s, cfg, tol, out)
}

fn ch2_run(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let s = presets::ch2_state(&cfg.ic, grid(cfg)?, cfg.alpha, cfg.g)?;
    evolve_and_report(s, cfg, tol, out)
}

fn peakon(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let e = presets::peakons(&cfg.ic, &params(cfg), grid(cfg)?, cfg.alpha)?;
    let traj = peakon_run(&e, cfg.dt, cfg.t_end, CollisionRule::default())?;
    let rec = traj.records();
    let h0 = rec[0].hamiltonian;
    let drift = rec.iter().map(|r| (r.hamiltonian - h0).abs() / h0.abs()).fold(0.0, f64::max);
    let mut header: Vec<String> = vec!["t".into(), "hamiltonian".into()];
    header.extend((0..e.len()).map(|i| format!("q{i}")));
    header.extend((0..e.len()).map(|i| format!("p{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = rec.iter().map(|r| {
        let mut row = vec![num(r.t), num(r.hamiltonian)];
        row.extend(r.q.iter().chain(&r.p).map(|v| num(*v)));
        row
    });
    out.csv("series.csv", &header, rows)?;
    Ok(Outcome {
        checks: vec![Check::at_most("hamiltonian_drift", drift, tol.peakon_hamiltonian)],
        details: json!({ "termination": traj.termination, "final_time": traj.final_time() }),
    })
}

fn residual_rows<'a>(reports: &'a [&'a ResidualReport]) -> impl Iterator<Item = Vec<String>> + 'a {
    reports.iter().map(|r| {
        vec![r.label.clone(), r.resolution.to_string(), opt(r.dt), num(r.l2), num(r.l2_abs), num(r.linf)]
    })
}

const RESIDUAL_HEADER: [&str; 6] = ["label", "n", "dt", "l2_rel", "l2_abs", "linf"];

fn verify_embedding(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let g = grid(cfg)?;
    let s = presets::ch_state(&cfg.ic, g, cfg.alpha)?;
    let (u, ut) = (s.velocity(), s.velocity_tendency());
    let div = divergence_report(&u, &cfg.radii)?;
    let unit = euler_consistency_residual_on(&u, &ut, 1.0)?;
    let matched = euler_consistency_residual_on(&u, &ut, 2.0 * cfg.alpha)?;
    let dts = [cfg.dt, cfg.dt / 2.0, cfg.dt / 4.0];
    let fd = fd_consistency(&cfg.ic, cfg.n, cfg.alpha, cfg.t_end, &dts, TimeDerivative::Backward4)?;
    let min_order = fd.orders.iter().copied().fold(f64::INFINITY, f64::min);
    let mut reports = vec![&div, &unit, &matched];
    reports.extend(fd.reports.iter());
    out.csv("series.csv", &RESIDUAL_HEADER, residual_rows(&reports))?;
    Ok(Outcome {
        checks: vec![
            Check::at_most("divergence_linf", div.linf, tol.divergence_linf),
            Check::at_most("consistency_unit_cone", unit.l2, tol.consistency_rel),
            Check::at_most("consistency_matched_aperture", matched.l2, tol.consistency_rel),
            Check::at_least("fd_consistency_order", min_order, tol.fd_order_min),
        ],
        details: json!({
            "divergence": div,
            "consistency_unit_cone": unit,
            "consistency_matched_aperture": matched,
            "aperture": 2.0 * cfg.alpha,
            "fd_consistency": fd,
        }),
    })
}

fn verify_ch2_lift(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let s = presets::ch2_state(&cfg.ic, grid(cfg)?, cfg.alpha, cfg.g)?;
    let (mt, rhot) = ch2_rhs(&s)?;
    let ut = mt.helmholtz_inv(cfg.alpha);
    let rep = ch2_lift_residual(&s.velocity(), &s.rho, &ut, &rhot, cfg.alpha, cfg.g, Some(16))?;
    out.csv("series.csv", &RESIDUAL_HEADER, residual_rows(&[&rep.dx, &rep.dy]))?;
    let dev = rep.grid2d_deviation.unwrap_or(f64::NAN);
    Ok(Outcome {
        checks: vec![
            Check::at_most("lift_dx", rep.dx.l2, tol.ch2_lift_rel),
            Check::at_most("lift_dy", rep.dy.l2, tol.ch2_lift_rel),
            Check::at_most("grid2d_vs_1d", dev, tol.ch2_grid2d),
        ],
        details: json!({ "lift": rep }),
    })
}

fn verify_vorticity(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let s = presets::ch_state(&cfg.ic, grid(cfg)?, cfg.alpha)?;
    let (u, ut) = (s.velocity(), s.velocity_tendency());
    let curl = curl_report(&u, cfg.alpha, &cfg.radii)?;
    let vort = advected_vorticity_report(&u, &ut, cfg.alpha)?;
    out.csv(
        "series.csv",
        &["quantity", "relative", "secondary"],
        [
            vec!["curl".to_string(), num(curl.residual), num(curl.radial_spread)],
            vec!["vorticity_advection".to_string(), num(vort.relative), num(vort.absolute)],
        ],
    )?;
    Ok(Outcome {
        checks: vec![
            Check::at_most("curl_identity", curl.residual, tol.curl_rel),
            Check::at_most("curl_radial_spread", curl.radial_spread, tol.curl_spread),
            Check::at_most("vorticity_advection", vort.relative, tol.vorticity_rel),
        ],
        details: json!({ "curl": curl, "vorticity": vort }),
    })
}

fn eisenhart(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let v: SharedField = Arc::new(Quadratic { offset: 1.0, stiffness: vec![1.0] });
    let (x0, v0) = ([cfg.q0], [cfg.p0]);
    let main = eisenhart_verify(v.clone(), &x0, &v0, cfg.t_end, cfg.dt, None)?;
    let coarse = [0.04, 0.02, 0.01, 0.005];
    let deviations = coarse
        .iter()
        .map(|&dt| Ok(eisenhart_verify(v.clone(), &x0, &v0, cfg.t_end, dt, None)?.max_deviation))
        .collect::<Result<Vec<f64>>>()?;
    let orders: Vec<f64> = deviations.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let every = (main.lifted.len() / 2000).max(1);
    let rows = main
        .lifted
        .iter()
        .enumerate()
        .filter(|(k, _)| k % every == 0 || *k + 1 == main.lifted.len())
        .map(|(_, r)| vec![num(r.t), num(r.x[0]), num(r.xdot[0]), num(r.y[0]), num(r.ydot[0]), num(r.c), num(r.energy)]);
    out.csv("series.csv", &["t", "x", "xdot", "y", "ydot", "c", "energy"], rows)?;
    Ok(Outcome {
        checks: vec![
            Check::at_most("projection_deviation", main.max_deviation, tol.eisenhart_deviation),
            Check::at_most("c_drift", main.c_drift, tol.eisenhart_c_drift),
            Check::at_least("order", min_order, tol.eisenhart_order_min),
        ],
        details: json!({
            "potential": "1 + x^2/2",
            "x0": cfg.q0,
            "v0": cfg.p0,
            "max_deviation": main.max_deviation,
            "c_drift": main.c_drift,
            "order_dts": coarse,
            "order_deviations": deviations,
            "orders": orders,
        }),
    })
}

fn lift_metric(cfg: &RunConfig) -> Result<LiftMetric> {
    Ok(match cfg.metric.as_str() {
        "ch-cone" => LiftMetric::ChCone { d: cfg.d },
        "ch2-corollary" => LiftMetric::Ch2Corollary,
        "cone-cartesian" => LiftMetric::ConeCartesian,
        "tao" => LiftMetric::Tao(Arc::new(Quadratic { offset: 1.0, stiffness: vec![1.0; cfg.d] })),
        "sphere" => LiftMetric::Sphere2,
        "euclidean" => LiftMetric::Euclidean(cfg.d),
        other => bail!("unknown metric `{other}`"),
    })
}

fn curvature_scan(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let m = build_lift_metric(&lift_metric(cfg)?)?;
    let samples = curvature_samples(&m, cfg.samples, 1, cfg.seed)?;
    let scan = ScanReport::from_samples(&m.name, &samples, tol.curvature_sign)?;
    let mut checks = vec![Check::at_most("max_sectional_curvature", scan.max_curvature, tol.curvature_sign)];
    let mut details = json!({ "scan": scan });
    if cfg.metric == "ch-cone" && cfg.d == 1 {
        let agree = cone_formula_agreement(cfg.samples.min(100), cfg.seed, CurvatureReading::WarpingFunction)?;
        let literal = cone_formula_agreement(cfg.samples.min(100), cfg.seed, CurvatureReading::Literal)?;
        checks.push(Check::at_most("formula_vs_fd_oracle", agree.max_relative, tol.curvature_agreement));
        details["agreement"] = json!(agree);
        details["agreement_literal_reading"] = json!(literal);
    }
    let mut header: Vec<String> = m.coords.clone();
    header.push("curvature".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = samples.iter().map(|s| {
        let mut row: Vec<String> = s.point.iter().map(|v| num(*v)).collect();
        row.push(num(s.curvature));
        row
    });
    out.csv("series.csv", &header, rows)?;
    Ok(Outcome { checks, details })
}

fn figure1(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    if cfg.ic != "antisymmetric-collision" {
        bail!("figure1 runs the `antisymmetric-collision` preset, got `{}`", cfg.ic);
    }
    let run = collision_run(&CollisionConfig {
        p0: cfg.p0,
        q0: cfg.q0,
        alpha: cfg.alpha,
        n: cfg.n,
        dt: cfg.dt,
        t_max: cfg.t_end,
        times: cfg.times.clone(),
        radii: cfg.radii.clone(),
        ..CollisionConfig::default()
    })?;
    for f in &run.frames {
        for c in &f.curves {
            let rows = c.points.iter().map(|p| vec![num(p.0), num(p.1)]);
            out.csv(&format!("curve_{}_{}.csv", tag(f.t), tag(c.radius)), &["x", "y"], rows)?;
        }
    }
    out.text("figure1.svg", &figure1_svg(&run.frames))?;
    let every = (run.series.len() / 2000).max(1);
    let rows = run
        .series
        .iter()
        .enumerate()
        .filter(|(k, _)| k % every == 0 || *k + 1 == run.series.len())
        .map(|(_, s)| vec![num(s.t), num(s.min_jacobian), num(s.midpoint_velocity), num(s.midpoint_position)]);
    out.csv("series.csv", &["t", "min_jacobian", "midpoint_velocity", "midpoint_position"], rows)?;
    let min_j = run.series.iter().map(|s| s.min_jacobian).fold(f64::INFINITY, f64::min);
    let mid = run.series.iter().map(|s| s.midpoint_velocity.abs()).fold(0.0, f64::max);
    let pinching = run.pinch.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(Outcome {
        checks: vec![
            Check::at_most("min_jacobian", min_j, tol.blowup_jacobian),
            Check::at_most("midpoint_velocity", mid, tol.midpoint_velocity),
            Check::at_most("radial_scaling", run.scaling_error, 1e-12 * cfg.tol_scale),
            Check::holds("pinch_toward_midpoint", pinching),
        ],
        details: json!({
            "collision_time": run.collision_time,
            "blowup_time": run.blowup_time,
            "pinch": run.pinch,
            "frames": run.frames.iter().map(|f| json!({
                "t": f.t, "min_jacobian": f.min_jacobian, "truncated": f.truncated
            })).collect::<Vec<_>>(),
        }),
    })
}

fn sweep(cfg: &RunConfig, tol: &Thresholds, out: &mut OutputDir) -> Result<Outcome> {
    let resolutions: Vec<usize> = [cfg.n / 8, cfg.n / 4, cfg.n / 2, cfg.n].into_iter().filter(|&n| n >= 8).collect();
    // A fourth halving reaches the roundoff floor of the backward difference.
    let dts = [cfg.dt, cfg.dt / 2.0, cfg.dt / 4.0];
    let mut tables = Vec::new();
    for id in Identity::ALL {
        tables.push(convergence_sweep(id, &resolutions, &[], TimeDerivative::Tendency, cfg.seed)?);
    }
    for id in [Identity::Consistency, Identity::VorticityAdvect, Identity::Ch2Lift] {
        tables.push(convergence_sweep(id, &[cfg.n.min(64)], &dts, TimeDerivative::Backward4, cfg.seed)?);
    }
    let rows = tables.iter().flat_map(|t| {
        t.cells.iter().map(move |c| {
            vec![
                t.identity.name().to_string(),
                format!("{:?}", t.scheme).to_lowercase(),
                c.n.to_string(),
                opt(c.dt),
                num(c.report.l2),
                num(c.report.l2_abs),
                num(c.report.linf),
            ]
        })
    });
    out.csv("series.csv", &["identity", "scheme", "n", "dt", "l2_rel", "l2_abs", "linf"], rows)?;
    let mut checks = Vec::new();
    for t in &tables {
        let name = t.identity.name();
        if t.dt_orders.is_empty() {
            let last = t.cells.last().expect("nonempty sweep").report.l2;
            let limit = match t.identity {
                Identity::Divergence => tol.divergence_linf,
                Identity::Curl => tol.curl_rel,
                Identity::Consistency => tol.consistency_rel,
                Identity::VorticityAdvect => tol.vorticity_rel,
                Identity::Ch2Lift => tol.ch2_lift_rel,
            };
            let value = if t.identity == Identity::Divergence {
                t.cells.iter().map(|c| c.report.linf).fold(0.0, f64::max)
            } else {
                last
            };
            checks.push(Check::at_most(&format!("{name}_finest"), value, limit));
        } else {
            let min_order = t.dt_orders.iter().flat_map(|(_, o)| o.iter().copied()).fold(f64::INFINITY, f64::min);
            checks.push(Check::at_least(&format!("{name}_dt_order"), min_order, tol.fd_order_min));
        }
    }
    Ok(Outcome { checks, details: json!({ "tables": tables }) })
}
