//! Run configuration: TOML schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qbm_core::asymptotics::RCritFormula;
use qbm_core::exact::{CouplingType, RenormalizationMode};

use crate::error::CliError;

pub const DEFAULT_MODES: usize = 1000;
pub const DEFAULT_DT: f64 = 0.005;
pub const DEFAULT_T_MAX: f64 = 100.0;
pub const DEFAULT_COEFF_DT: f64 = 0.01;
/// Largest accepted `dt·Λ`.
pub const MAX_DT_CUTOFF: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub bath: BathConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `Ω_R` for position coupling, `ω₀` for symmetric coupling.
    pub omega: f64,
    #[serde(default = "one")]
    pub mass: f64,
    /// `C₁₂` in renormalized mode, the bare `c₁₂` otherwise.
    #[serde(default)]
    pub c12: f64,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingType,
    #[serde(default = "default_renorm")]
    pub renormalization: RenormalizationMode,
    #[serde(default)]
    pub r_crit_formula: RCritFormula,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub gamma0: f64,
    pub cutoff: f64,
    #[serde(default)]
    pub temperature: f64,
    /// Number of bath modes at the configured cutoff. Sweeps over the
    /// cutoff scale it proportionally so the mode spacing stays fixed.
    #[serde(default = "default_modes")]
    pub modes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    TwoModeSqueezed,
    CoherentProduct,
    SqueezedProduct,
    ExplicitCovariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default = "default_kind")]
    pub kind: InitialKind,
    #[serde(default)]
    pub r: f64,
    /// Symplectic area `δx₋δp₋` of the relative mode (1/2 when pure).
    #[serde(default = "half")]
    pub minus_area: f64,
    /// `(⟨x₁⟩, ⟨p₁⟩, ⟨x₂⟩, ⟨p₂⟩)`.
    #[serde(default)]
    pub mean: Option<[f64; 4]>,
    /// Row-major 4×4 covariance for `explicit-covariance`.
    #[serde(default)]
    pub covariance: Option<[[f64; 4]; 4]>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            r: 0.0,
            minus_area: 0.5,
            mean: None,
            covariance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Output spacing of coefficient traces.
    #[serde(default = "default_coeff_dt")]
    pub coeff_dt: f64,
    /// Write every `stride`-th trajectory row.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub override_horizon: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            dt: DEFAULT_DT,
            coeff_dt: DEFAULT_COEFF_DT,
            stride: 1,
            override_horizon: false,
        }
    }
}

/// Explicit list or `count` evenly spaced values from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::List(v) => v.clone(),
            Axis::Range { start, stop, count } => match count {
                0 => vec![],
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub temperature: Option<Axis>,
    pub r: Option<Axis>,
    pub c12: Option<Axis>,
    pub minus_area: Option<Axis>,
    pub cutoff: Option<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub plots: bool,
    #[serde(default = "yes")]
    pub boundaries: bool,
    #[serde(default = "yes")]
    pub cache: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            plots: true,
            boundaries: true,
            cache: true,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn default_coupling() -> CouplingType {
    CouplingType::Position
}
fn default_renorm() -> RenormalizationMode {
    RenormalizationMode::Renormalized
}
fn default_modes() -> usize {
    DEFAULT_MODES
}
fn default_kind() -> InitialKind {
    InitialKind::TwoModeSqueezed
}
fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_coeff_dt() -> f64 {
    DEFAULT_COEFF_DT
}
fn default_stride() -> usize {
    1
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One value per swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub temperature: f64,
    pub r: f64,
    pub c12: f64,
    pub minus_area: f64,
    pub cutoff: f64,
}

impl RunConfig {
    /// Parses without validating.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::load_with(path, false)
    }

    /// Loads `path`, optionally forcing `time.override_horizon` before validation.
    pub fn load_with(path: &Path, override_horizon: bool) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let with_path = |e: CliError| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        };
        let mut cfg = Self::parse(&text).map_err(with_path)?;
        cfg.time.override_horizon |= override_horizon;
        cfg.validate().map_err(with_path)?;
        Ok(cfg)
    }

    /// Mode spacing `Δw = Λ/N`, kept fixed across cutoff sweeps.
    pub fn mode_spacing(&self) -> f64 {
        self.bath.cutoff / self.bath.modes as f64
    }

    /// Number of modes used at cutoff `cutoff`.
    pub fn modes_at(&self, cutoff: f64) -> usize {
        ((cutoff / self.mode_spacing()).round() as usize).max(1)
    }

    /// Validity horizon `π/Δw`.
    pub fn horizon(&self) -> f64 {
        std::f64::consts::PI / self.mode_spacing()
    }

    fn axis(&self, a: &Option<Axis>, default: f64) -> Vec<f64> {
        a.as_ref().map(Axis::values).unwrap_or_else(|| vec![default])
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.axis(&self.sweep.temperature, self.bath.temperature)
    }
    pub fn squeezings(&self) -> Vec<f64> {
        self.axis(&self.sweep.r, self.initial.r)
    }
    pub fn couplings(&self) -> Vec<f64> {
        self.axis(&self.sweep.c12, self.model.c12)
    }
    pub fn minus_areas(&self) -> Vec<f64> {
        self.axis(&self.sweep.minus_area, self.initial.minus_area)
    }
    pub fn cutoffs(&self) -> Vec<f64> {
        self.axis(&self.sweep.cutoff, self.bath.cutoff)
    }

    /// Cartesian product in canonical row-major order
    /// (cutoff, C₁₂, area, T, r with r fastest).
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for &cutoff in &self.cutoffs() {
            for &c12 in &self.couplings() {
                for &minus_area in &self.minus_areas() {
                    for &temperature in &self.temperatures() {
                        for &r in &self.squeezings() {
                            out.push(Point {
                                temperature,
                                r,
                                c12,
                                minus_area,
                                cutoff,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Checks every invariant and reports all violations together.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs: Vec<String> = Vec::new();
        let mut pos = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{name} must be positive (got {v})"));
            }
        };
        pos("model.omega", self.model.omega);
        pos("model.mass", self.model.mass);
        pos("bath.cutoff", self.bath.cutoff);
        pos("time.t_max", self.time.t_max);
        pos("time.dt", self.time.dt);
        pos("time.coeff_dt", self.time.coeff_dt);
        if !self.model.c12.is_finite() {
            errs.push("model.c12 must be finite".into());
        }
        if !(self.bath.gamma0.is_finite() && self.bath.gamma0 >= 0.0) {
            errs.push(format!("bath.gamma0 must be non-negative (got {})", self.bath.gamma0));
        }
        if !(self.bath.temperature.is_finite() && self.bath.temperature >= 0.0) {
            errs.push(format!("bath.temperature must be non-negative (got {})", self.bath.temperature));
        }
        if self.bath.modes == 0 {
            errs.push("bath.modes must be at least 1".into());
        }
        if self.time.stride == 0 {
            errs.push("time.stride must be at least 1".into());
        }
        if !(self.initial.minus_area.is_finite() && self.initial.minus_area >= 0.5) {
            errs.push(format!("initial.minus_area must be at least 1/2 (got {})", self.initial.minus_area));
        }
        if !self.initial.r.is_finite() {
            errs.push("initial.r must be finite".into());
        }
        match self.initial.kind {
            InitialKind::ExplicitCovariance if self.initial.covariance.is_none() => {
                errs.push("initial.covariance is required for kind = \"explicit-covariance\"".into())
            }
            InitialKind::CoherentProduct if self.initial.mean.is_none() => {
                errs.push("initial.mean is required for kind = \"coherent-product\"".into())
            }
            _ => {}
        }

        for (name, axis) in [
            ("sweep.temperature", &self.sweep.temperature),
            ("sweep.r", &self.sweep.r),
            ("sweep.c12", &self.sweep.c12),
            ("sweep.minus_area", &self.sweep.minus_area),
            ("sweep.cutoff", &self.sweep.cutoff),
        ] {
            if let Some(a) = axis {
                let v = a.values();
                if v.is_empty() {
                    errs.push(format!("{name} is empty"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    errs.push(format!("{name} contains non-finite values"));
                }
            }
        }
        if self.temperatures().iter().any(|t| *t < 0.0) {
            errs.push("temperatures must be non-negative".into());
        }
        if self.minus_areas().iter().any(|a| *a < 0.5) {
            errs.push("minus_area values must be at least 1/2".into());
        }
        if self.cutoffs().iter().any(|c| *c <= 0.0) {
            errs.push("cutoff values must be positive".into());
        }

        if self.bath.modes > 0 && self.bath.cutoff > 0.0 {
            let lmax = self.cutoffs().into_iter().fold(self.bath.cutoff, f64::max);
            if self.time.dt * lmax > MAX_DT_CUTOFF + 1e-12 {
                errs.push(format!(
                    "time.dt · cutoff = {:.4} exceeds {MAX_DT_CUTOFF}; reduce time.dt",
                    self.time.dt * lmax
                ));
            }
            let horizon = self.horizon();
            if self.time.t_max > horizon * (1.0 + 1e-12) && !self.time.override_horizon {
                errs.push(format!(
                    "time.t_max = {} exceeds the validity horizon {horizon:.4} (half the bath recurrence time); \
                     increase bath.modes or set time.override_horizon",
                    self.time.t_max
                ));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!("invalid configuration:\n  - {}", errs.join("\n  - "))))
        }
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("serializable");
        crate::cache::sha256_hex(json.as_bytes())
    }
}
