//! Named initial conditions.
//!
//! | name | state |
//! |------|-------|
//! | `sin{k}` | `u = sin(k θ)` |
//! | `gaussian-bump` | periodized Gaussian of width `width` centred at `L/2` |
//! | `two-peakon` | peakons `(2, 1)` and `(4.5, 0.5)` |
//! | `antisymmetric-collision` | `{(-q0, p0), (q0, -p0)}` |
//! | `ch2-stratified` | `u = sin θ`, `ρ = 1 + ½ cos θ` |

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Ch2State, ChState};
use crate::error::{Error, Result};
use crate::peakon::{collision_scenario, GreenKernel, PeakonEnsemble};
use crate::spectral::{Grid1D, PeriodicField};

pub const NAMES: [&str; 5] = ["sin{k}", "gaussian-bump", "two-peakon", "antisymmetric-collision", "ch2-stratified"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PresetParams {
    pub p0: f64,
    pub q0: f64,
    pub width: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self { p0: 1.0, q0: 1.0, width: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Sine(u32),
    GaussianBump,
    TwoPeakon,
    AntisymmetricCollision,
    Ch2Stratified,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gaussian-bump" => Ok(Preset::GaussianBump),
            "two-peakon" => Ok(Preset::TwoPeakon),
            "antisymmetric-collision" => Ok(Preset::AntisymmetricCollision),
            "ch2-stratified" => Ok(Preset::Ch2Stratified),
            _ => name
                .strip_prefix("sin")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|&k| k > 0)
                .map(Preset::Sine)
                .ok_or_else(|| Error::UnknownPreset(name.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Ch(ChState),
    Ch2(Ch2State),
    Peakons(PeakonEnsemble),
}

fn gaussian_bump(grid: Grid1D, width: f64) -> PeriodicField {
    let l = grid.length();
    let sigma = width * l / (2.0 * PI);
    PeriodicField::from_fn(grid, |x| {
        (-2..=2)
            .map(|k| {
                let d = x - 0.5 * l - k as f64 * l;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .sum()
    })
}

fn circle_kernel(grid: Grid1D, alpha: f64) -> Result<GreenKernel> {
    GreenKernel::circle(alpha, grid.length())
}

/// Peakon ensemble of a peakon preset on the circle of `grid`.
pub fn peakons(name: &str, params: &PresetParams, grid: Grid1D, alpha: f64) -> Result<PeakonEnsemble> {
    let k = circle_kernel(grid, alpha)?;
    match Preset::parse(name)? {
        Preset::TwoPeakon => PeakonEnsemble::new(vec![2.0, 4.5], vec![1.0, 0.5], k),
        Preset::AntisymmetricCollision => collision_scenario(params.p0, params.q0, k),
        _ => Err(Error::Unsupported(format!("`{name}` is not a peakon preset"))),
    }
}

/// Velocity of a single-field preset (peakon presets are sampled).
pub fn velocity_with(name: &str, params: &PresetParams, grid: Grid1D, alpha: f64) -> Result<PeriodicField> {
    match Preset::parse(name)? {
        Preset::Sine(k) => Ok(PeriodicField::from_fn(grid, |x| (k as f64 * grid.kappa() * x).sin())),
        Preset::GaussianBump => {
            if !(params.width > 0.0) {
                return Err(Error::InvalidParameter("width must be > 0".into()));
            }
            Ok(gaussian_bump(grid, params.width))
        }
        Preset::TwoPeakon | Preset::AntisymmetricCollision => Ok(peakons(name, params, grid, alpha)?.sample(grid)),
        Preset::Ch2Stratified => Ok(PeriodicField::from_fn(grid, |x| (grid.kappa() * x).sin())),
    }
}

pub fn velocity(name: &str, grid: Grid1D) -> Result<PeriodicField> {
    velocity_with(name, &PresetParams::default(), grid, 0.5)
}

pub fn ch_state(name: &str, grid: Grid1D, alpha: f64) -> Result<ChState> {
    ChState::from_velocity(&velocity_with(name, &PresetParams::default(), grid, alpha)?, alpha)
}

pub fn ch2_state(name: &str, grid: Grid1D, alpha: f64, gravity: f64) -> Result<Ch2State> {
    match Preset::parse(name)? {
        Preset::Ch2Stratified => {
            let u = PeriodicField::from_fn(grid, |x| (grid.kappa() * x).sin());
            let rho = PeriodicField::from_fn(grid, |x| 1.0 + 0.5 * (grid.kappa() * x).cos());
            Ch2State::from_velocity(&u, rho, alpha, gravity)
        }
        _ => Err(Error::Unsupported(format!("`{name}` is not a CH2 preset"))),
    }
}

pub fn preset_ic(name: &str, params: &PresetParams, grid: Grid1D, alpha: f64, gravity: f64) -> Result<InitialState> {
    Ok(match Preset::parse(name)? {
        Preset::Sine(_) | Preset::GaussianBump => {
            InitialState::Ch(ChState::from_velocity(&velocity_with(name, params, grid, alpha)?, alpha)?)
        }
        Preset::TwoPeakon | Preset::AntisymmetricCollision => {
            InitialState::Peakons(peakons(name, params, grid, alpha)?)
        }
        Preset::Ch2Stratified => InitialState::Ch2(ch2_state(name, grid, alpha, gravity)?),
    })
}
