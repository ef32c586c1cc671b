use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::Command;

/// Run parameters. Every field is optional so a JSON config file and the
/// command line can be layered; flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Grid points (power of two, >= 8)
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Time step
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Final time
    #[arg(long = "T", global = true)]
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    /// Helmholtz parameter
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Gravity of the two-component system
    #[arg(long, global = true)]
    pub g: Option<f64>,
    /// Initial condition preset
    #[arg(long, global = true)]
    pub ic: Option<String>,
    /// Comma-separated radii
    #[arg(long, global = true, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Output directory (default: $CONELAB_OUT, then ./conelab-out)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of the random samples
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Multiplies every upper-bound tolerance
    #[arg(long = "tol-scale", global = true)]
    #[serde(rename = "tol-scale")]
    pub tol_scale: Option<f64>,
    /// Peakon amplitude (eisenhart: initial velocity)
    #[arg(long, global = true)]
    pub p0: Option<f64>,
    /// Peakon offset from the midpoint (eisenhart: initial position)
    #[arg(long, global = true)]
    pub q0: Option<f64>,
    /// Comma-separated snapshot times
    #[arg(long, global = true, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// ch-cone | ch2-corollary | cone-cartesian | tao | sphere | euclidean
    #[arg(long, global = true)]
    pub metric: Option<String>,
    /// Base dimension of the cone metric
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Sample count of the curvature scan
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `self` over `base`, field by field.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            n: self.n.or(base.n),
            dt: self.dt.or(base.dt),
            t_end: self.t_end.or(base.t_end),
            alpha: self.alpha.or(base.alpha),
            g: self.g.or(base.g),
            ic: self.ic.or(base.ic),
            radii: self.radii.or(base.radii),
            out: self.out.or(base.out),
            seed: self.seed.or(base.seed),
            tol_scale: self.tol_scale.or(base.tol_scale),
            p0: self.p0.or(base.p0),
            q0: self.q0.or(base.q0),
            times: self.times.or(base.times),
            metric: self.metric.or(base.metric),
            d: self.d.or(base.d),
            samples: self.samples.or(base.samples),
        }
    }
}

/// Fully resolved parameters of one subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub n: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub alpha: f64,
    pub g: f64,
    pub ic: String,
    pub radii: Vec<f64>,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
    pub tol_scale: f64,
    pub p0: f64,
    pub q0: f64,
    pub times: Vec<f64>,
    pub metric: String,
    pub d: usize,
    pub samples: usize,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        bail!("--{name} must be a positive number, got {v}")
    }
}

impl RunConfig {
    pub fn resolve(command: Command, s: &Settings) -> Result<Self> {
        use Command::*;
        let (ic, n, dt, t_end) = match command {
            ChRun => ("gaussian-bump", 256, 1e-3, 1.0),
            Ch2Run | VerifyCh2Lift => ("ch2-stratified", 256, 1e-3, 1.0),
            PeakonRun => ("two-peakon", 256, 1e-4, 1.0),
            VerifyEmbedding | VerifyVorticity => ("sin3", 256, 1e-3, 1.0),
            Eisenhart => ("harmonic", 256, 1e-4, 10.0),
            CurvatureScan => ("none", 256, 1e-3, 1.0),
            Figure1 => ("antisymmetric-collision", 256, 1e-4, 5.0),
            Sweep => ("gaussian-bump", 128, 4e-3, 0.1),
            All => ("none", 256, 1e-3, 1.0),
        };
        let radii_default = match command {
            Figure1 => vec![1.0, 2.0],
            _ => vec![0.5, 1.0, 2.0],
        };
        let (p0, q0) = match command {
            Eisenhart => (0.0, 1.0),
            _ => (1.0, 1.0),
        };
        let out = s
            .out
            .clone()
            .or_else(|| std::env::var_os("CONELAB_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("conelab-out"));
        let cfg = RunConfig {
            command: command.name().to_string(),
            n: s.n.unwrap_or(n),
            dt: positive("dt", s.dt.unwrap_or(dt))?,
            t_end: positive("T", s.t_end.unwrap_or(t_end))?,
            alpha: positive("alpha", s.alpha.unwrap_or(0.5))?,
            g: positive("g", s.g.unwrap_or(1.0))?,
            ic: s.ic.clone().unwrap_or_else(|| ic.to_string()),
            radii: s.radii.clone().unwrap_or(radii_default),
            out,
            seed: s.seed.unwrap_or(17),
            tol_scale: positive("tol-scale", s.tol_scale.unwrap_or(1.0))?,
            p0: s.p0.unwrap_or(p0),
            q0: s.q0.unwrap_or(q0),
            times: s.times.clone().unwrap_or_else(|| vec![0.0, 0.4, 0.8, 0.95]),
            metric: s.metric.clone().unwrap_or_else(|| "ch-cone".into()),
            d: s.d.unwrap_or(1),
            samples: s.samples.unwrap_or(1000),
        };
        for &r in &cfg.radii {
            positive("radii", r)?;
        }
        if cfg.radii.is_empty() {
            bail!("--radii needs at least one value");
        }
        if cfg.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            bail!("--times must be nonnegative");
        }
        if !cfg.p0.is_finite() || !cfg.q0.is_finite() {
            bail!("--p0 and --q0 must be finite");
        }
        if cfg.d == 0 || cfg.samples == 0 {
            bail!("--d and --samples must be positive");
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file_values() {
        let file = Settings { n: Some(64), dt: Some(1e-2), ..Settings::default() };
        let flags = Settings { n: Some(128), ..Settings::default() };
        let s = flags.over(file);
        assert_eq!((s.n, s.dt), (Some(128), Some(1e-2)));
    }

    #[test]
    fn defaults_depend_on_the_command() {
        let s = Settings { out: Some("x".into()), ..Settings::default() };
        let fig = RunConfig::resolve(Command::Figure1, &s).unwrap();
        assert_eq!((fig.dt, fig.radii.clone(), fig.ic.as_str()), (1e-4, vec![1.0, 2.0], "antisymmetric-collision"));
        let eis = RunConfig::resolve(Command::Eisenhart, &s).unwrap();
        assert_eq!((eis.t_end, eis.q0, eis.p0), (10.0, 1.0, 0.0));
        let bad = Settings { alpha: Some(0.0), ..s };
        assert!(RunConfig::resolve(Command::ChRun, &bad).is_err());
    }
}
