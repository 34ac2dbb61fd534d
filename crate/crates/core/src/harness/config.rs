//! Run configuration: TOML schema, built-in presets and validation.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nls::{default_dt, Boundary, Grid, IntegratorConfig, Scheme};
use crate::reduction::ScalingParams;
use crate::spectrum::{BackgroundState, CouplingModel, Normalization};

const PAPER_SEC5: &str = include_str!("../../presets/paper-sec5.toml");
const DESK: &str = include_str!("../../presets/desk.toml");

pub const PRESET_NAMES: [&str; 2] = ["paper-sec5", "desk"];

pub fn preset_source(name: &str) -> Option<&'static str> {
    match name {
        "paper-sec5" => Some(PAPER_SEC5),
        "desk" => Some(DESK),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSection {
    pub rho0: Vec<f64>,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub hbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub epsilon: f64,
    pub soliton_speed: f64,
}

impl Default for ScalingSection {
    fn default() -> Self {
        ScalingSection {
            epsilon: 0.2,
            soliton_speed: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub length: f64,
    pub n_points: usize,
    /// Left edge; defaults to `−length/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            length: 300.0,
            n_points: 4096,
            x_min: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    Leapfrog,
    SplitStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryName {
    #[default]
    Periodic,
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationName {
    #[default]
    LastComponent,
    LargestEntry,
}

fn default_seam_band() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    /// Defaults to `dx²·m/(8ħ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default)]
    pub boundary: BoundaryName,
    /// Width of each seam-compensation band as a fraction of the domain.
    #[serde(default = "default_seam_band")]
    pub seam_band: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            dt: None,
            scheme: SchemeName::default(),
            boundary: BoundaryName::default(),
            seam_band: default_seam_band(),
        }
    }
}

fn default_snapshots() -> Vec<f64> {
    vec![0.0, 10.0, 20.0, 30.0]
}

fn default_interval() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Signed branch, `+j` right mover, `−j` left mover, `j` in ascending
    /// order of speed. Defaults to the fastest right mover `+N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<i32>,
    #[serde(default = "default_snapshots")]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_interval")]
    pub diagnostic_interval: f64,
    #[serde(default)]
    pub normalization: NormalizationName,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            branch: None,
            snapshot_times: default_snapshots(),
            diagnostic_interval: default_interval(),
            normalization: NormalizationName::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub h_min: f64,
    pub h_max: f64,
    pub samples: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            h_min: 0.0,
            h_max: 0.5,
            samples: 51,
        }
    }
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub coupling: CouplingSection,
    pub background: BackgroundSection,
    #[serde(default)]
    pub scaling: ScalingSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub coupling: CouplingModel,
    pub bg: BackgroundState,
    pub scaling: ScalingParams,
    pub grid: Grid,
    pub integrator: IntegratorConfig,
    pub seam_band: f64,
    pub branch: i32,
    pub snapshot_times: Vec<f64>,
    pub diagnostic_interval: f64,
    pub normalization: Normalization,
    pub sweep: SweepSection,
    resolved: ConfigFile,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let src = preset_source(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown preset `{name}` (available: {})",
                PRESET_NAMES.join(", ")
            ))
        })?;
        Self::from_toml(src)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_file(ConfigFile::parse(text)?)
    }

    pub fn from_file(file: ConfigFile) -> Result<Self> {
        Self::resolve(file).map_err(config_err)
    }

    fn resolve(mut file: ConfigFile) -> Result<Self> {
        let coupling = match (&file.coupling.g, file.coupling.h, &file.coupling.alpha) {
            (Some(g), Some(h), None) => CouplingModel::structured(g.clone(), h)?,
            (None, None, Some(rows)) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("coupling.alpha must be a square matrix".into()));
                }
                CouplingModel::general(DMatrix::from_fn(n, n, |i, j| rows[i][j]))?
            }
            _ => {
                return Err(Error::Config(
                    "coupling needs either both `g` and `h`, or `alpha` alone".into(),
                ))
            }
        };
        let bg = BackgroundState::with_units(
            file.background.rho0.clone(),
            file.background.mass,
            file.background.hbar,
        )?;
        if bg.n() != coupling.n() {
            return Err(Error::Config(format!(
                "background.rho0 has {} entries but the coupling has {} components",
                bg.n(),
                coupling.n()
            )));
        }
        let scaling = ScalingParams::new(file.scaling.epsilon, file.scaling.soliton_speed)?;
        let x_min = file.grid.x_min.unwrap_or(-0.5 * file.grid.length);
        let grid = Grid::new(x_min, file.grid.length, file.grid.n_points)?;
        let dt = file.integrator.dt.unwrap_or_else(|| default_dt(&grid, &bg));
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("integrator.dt must be positive, got {dt}")));
        }
        let seam_band = file.integrator.seam_band;
        if !(seam_band > 0.0 && seam_band < 0.5) {
            return Err(Error::Config(format!(
                "integrator.seam_band must lie in (0, 0.5), got {seam_band}"
            )));
        }
        let integrator = IntegratorConfig {
            dt,
            scheme: match file.integrator.scheme {
                SchemeName::Leapfrog => Scheme::ExplicitLeapfrog,
                SchemeName::SplitStep => Scheme::SplitStepVerification,
            },
            boundary: match file.integrator.boundary {
                BoundaryName::Periodic => Boundary::Periodic,
                BoundaryName::Clamped => Boundary::ClampedBackground,
            },
        };
        if integrator.scheme == Scheme::SplitStepVerification && integrator.boundary != Boundary::Periodic {
            return Err(Error::Config("the split-step scheme requires a periodic boundary".into()));
        }
        let n = coupling.n() as i32;
        let branch = file.run.branch.unwrap_or(n);
        if branch == 0 || branch.abs() > n {
            return Err(Error::Config(format!("run.branch must be in ±1..±{n}, got {branch}")));
        }
        let mut snapshot_times = file.run.snapshot_times.clone();
        if snapshot_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("run.snapshot_times must be non-negative".into()));
        }
        snapshot_times.sort_by(f64::total_cmp);
        snapshot_times.dedup();
        if snapshot_times.is_empty() {
            return Err(Error::Config("run.snapshot_times must not be empty".into()));
        }
        let interval = file.run.diagnostic_interval;
        if !(interval.is_finite() && interval > 0.0) {
            return Err(Error::Config(format!(
                "run.diagnostic_interval must be positive, got {interval}"
            )));
        }
        validate_sweep(&file.sweep)?;

        file.grid.x_min = Some(x_min);
        file.integrator.dt = Some(dt);
        file.run.branch = Some(branch);
        file.run.snapshot_times = snapshot_times.clone();
        Ok(RunConfig {
            coupling,
            bg,
            scaling,
            grid,
            integrator,
            seam_band,
            branch,
            snapshot_times,
            diagnostic_interval: interval,
            normalization: match file.run.normalization {
                NormalizationName::LastComponent => Normalization::LastComponent,
                NormalizationName::LargestEntry => Normalization::LargestEntry,
            },
            sweep: file.sweep.clone(),
            resolved: file,
        })
    }

    /// Replace the sweep range (command-line overrides).
    pub fn with_sweep(mut self, h_min: Option<f64>, h_max: Option<f64>, samples: Option<usize>) -> Result<Self> {
        if let Some(v) = h_min {
            self.sweep.h_min = v;
        }
        if let Some(v) = h_max {
            self.sweep.h_max = v;
        }
        if let Some(v) = samples {
            self.sweep.samples = v;
        }
        validate_sweep(&self.sweep)?;
        self.resolved.sweep = self.sweep.clone();
        Ok(self)
    }

    pub fn with_branch(mut self, branch: i32) -> Result<Self> {
        let n = self.coupling.n() as i32;
        if branch == 0 || branch.abs() > n {
            return Err(Error::Config(format!("branch must be in ±1..±{n}, got {branch}")));
        }
        self.branch = branch;
        self.resolved.run.branch = Some(branch);
        Ok(self)
    }

    /// The resolved configuration as TOML, for echoing into outputs.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.resolved).expect("config serializes")
    }

    pub fn file(&self) -> &ConfigFile {
        &self.resolved
    }

    /// Whether the physical parameters are the two-component reference set
    /// `g = (1, 1)`, `h = 0.5`, `ρ0 = (1, 0.1)`, `ε = 0.2`, `𝒱 = 2.5`, `ħ = m = 1`.
    pub fn is_reference_set(&self) -> bool {
        let Some(s) = self.coupling.as_structured() else {
            return false;
        };
        s.g == [1.0, 1.0]
            && s.h == 0.5
            && self.bg.rho0 == [1.0, 0.1]
            && self.bg.mass == 1.0
            && self.bg.hbar == 1.0
            && self.scaling.epsilon == 0.2
            && self.scaling.soliton_speed == 2.5
    }
}

fn validate_sweep(s: &SweepSection) -> Result<()> {
    if !(s.h_min.is_finite() && s.h_max.is_finite() && s.h_min >= 0.0 && s.h_max >= s.h_min) {
        return Err(Error::Config(format!(
            "sweep range must satisfy 0 <= h_min <= h_max, got [{}, {}]",
            s.h_min, s.h_max
        )));
    }
    if s.samples < 2 {
        return Err(Error::Config(format!("sweep needs at least 2 samples, got {}", s.samples)));
    }
    Ok(())
}

/// Coefficients quoted alongside the reference parameter set, fastest
/// branch first: `(λ, A, B, Λ)`.
pub const REFERENCE_QUOTED: [(f64, f64, f64, f64); 2] =
    [(1.013, -0.123, 1.372, 1.001), (0.270, -0.462, 0.728, 0.224)];
