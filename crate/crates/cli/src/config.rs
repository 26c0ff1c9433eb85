//! Run configuration: a TOML document with one table per concern.
//!
//! ```toml
//! seed = 7
//!
//! [grid]
//! dim = 1
//! half_length = 512.0
//! points = 4096
//!
//! [data]
//! shape = "gaussian"
//! epsilon = 0.3
//!
//! [run]
//! forcing = "invlog:p=2"
//! dt = 0.05
//! t_max = 500.0
//! ```
//!
//! Every table and key is optional; unknown keys are rejected. A manifest
//! written by a previous run is also accepted, in which case its `config`
//! table is used.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dwlab_core::data::{Component, DataSpec, Shape};
use dwlab_core::modulus::ModulusSpec;
use dwlab_core::semilinear::{EvolveConfig, Forcing};
use dwlab_core::{Dim, GridSpec, Nonlinearity};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub linear: LinearSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub certificate: CertificateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    pub half_length: f64,
    /// Points per axis; 4096 in 1D and 1024 in 2D when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dim: 1,
            half_length: 512.0,
            points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub shape: String,
    pub epsilon: f64,
    pub center: [f64; 2],
    pub width: f64,
    pub component: String,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            shape: "gaussian".into(),
            epsilon: 0.3,
            center: [0.0, 0.0],
            width: 1.0,
            component: "velocity".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// `zero`, `pow:q=<q>`, or a modulus spec such as `invlog:p=2`.
    pub forcing: String,
    pub dt: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    pub blowup_threshold: f64,
    pub dt_min: f64,
    pub growth_floor: f64,
    /// Window of `t` for the `‖u‖_∞` decay fit of completed runs.
    pub fit_window: [f64; 2],
    /// Write every recorded state under `states/`.
    pub save_states: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            forcing: "invlog:p=2".into(),
            dt: 0.05,
            t_max: 500.0,
            sample_interval: 1.0,
            blowup_threshold: 1e6,
            dt_min: 1e-10,
            growth_floor: 1.0,
            fit_window: [40.0, 500.0],
            save_states: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearSection {
    pub t_max: f64,
    pub samples: usize,
    pub window: [f64; 2],
    /// Largest accepted distance between fitted and predicted exponents.
    pub tolerance: f64,
}

impl Default for LinearSection {
    fn default() -> Self {
        Self {
            t_max: 500.0,
            samples: 120,
            window: [40.0, 500.0],
            tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub forcings: Vec<String>,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateSection {
    pub r0: f64,
    /// Scales at which `I_R`, `y` and `Y` are measured.
    pub r_grid: Vec<f64>,
    /// Further scales at which only the closed-form left side is evaluated.
    pub extend: Vec<f64>,
    /// Alternative `R0` values for the sensitivity table.
    pub r0_sweep: Vec<f64>,
    /// Directory of saved states to load instead of running.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<String>,
}

impl Default for CertificateSection {
    fn default() -> Self {
        Self {
            r0: dwlab_core::testfunction::DEFAULT_R0,
            r_grid: vec![16.0, 32.0, 64.0, 128.0, 256.0],
            extend: vec![1e4, 1e8, 1e16, 1e64],
            r0_sweep: vec![16.0, 32.0, 64.0, 128.0],
            states: None,
        }
    }
}

/// Right-hand side selector.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    Power(f64),
    Critical(ModulusSpec),
}

impl FromStr for ForcingSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("zero") || t.eq_ignore_ascii_case("linear") {
            return Ok(ForcingSpec::Zero);
        }
        if let Some(rest) = t.strip_prefix("pow:") {
            let q = rest
                .trim()
                .strip_prefix("q=")
                .ok_or_else(|| CliError::Usage(format!("expected `pow:q=<exponent>`, got `{t}`")))?;
            let q: f64 = q
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("`{q}` is not a number")))?;
            if !(q.is_finite() && q > 1.0) {
                return Err(CliError::Usage(format!("power exponent must exceed 1, got {q}")));
            }
            return Ok(ForcingSpec::Power(q));
        }
        Ok(ForcingSpec::Critical(t.parse()?))
    }
}

impl fmt::Display for ForcingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForcingSpec::Zero => f.write_str("zero"),
            ForcingSpec::Power(q) => write!(f, "pow:q={q}"),
            ForcingSpec::Critical(m) => write!(f, "{m}"),
        }
    }
}

impl ForcingSpec {
    pub fn build(&self, dim: Dim, base_dir: Option<&Path>) -> Result<Forcing, CliError> {
        Ok(match self {
            ForcingSpec::Zero => Forcing::Zero,
            ForcingSpec::Power(q) => Forcing::Power { exponent: *q },
            ForcingSpec::Critical(m) => {
                let modulus = m
                    .build_in(base_dir)
                    .map_err(|e| CliError::Usage(format!("modulus `{m}`: {e}")))?;
                Forcing::Critical(Nonlinearity::new(modulus, dim))
            }
        })
    }
}

/// Which horizon the wrap-around rule is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Linear,
    Run,
}

impl RunConfig {
    /// Parses a config document or a manifest.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("config: {e}")))?;
        if table.contains_key("command") && table.contains_key("config") {
            let inner = table.remove("config").expect("checked");
            return inner
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Usage(format!("manifest config: {e}")));
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn dim(&self) -> Result<Dim, CliError> {
        Ok(Dim::from_usize(self.grid.dim)?)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let dim = self.dim()?;
        let points = self.grid.points.unwrap_or(match dim {
            Dim::One => 4096,
            Dim::Two => 1024,
        });
        Ok(GridSpec::new(dim, self.grid.half_length, points)?)
    }

    pub fn data_spec(&self) -> Result<DataSpec, CliError> {
        let d = &self.data;
        let spec = DataSpec {
            shape: d.shape.parse::<Shape>()?,
            epsilon: d.epsilon,
            center: d.center,
            width: d.width,
            component: d.component.parse::<Component>()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn forcing_spec(&self) -> Result<ForcingSpec, CliError> {
        self.run.forcing.parse()
    }

    pub fn evolve_config(&self, forcing: Forcing, keep_states: bool) -> Result<EvolveConfig, CliError> {
        let r = &self.run;
        let cfg = EvolveConfig {
            forcing,
            dt: r.dt,
            t_max: r.t_max,
            blowup_threshold: r.blowup_threshold,
            dt_min: r.dt_min,
            sample_interval: r.sample_interval,
            growth_floor: r.growth_floor,
            keep_states,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need a computation, including
    /// `L >= R_data + t_max + 2` so the solution never wraps around the torus.
    pub fn validate(&self, horizon: Horizon, base_dir: Option<&Path>) -> Result<(), CliError> {
        let spec = self.grid_spec()?;
        let data = self.data_spec()?;
        if self.grid.dim == 1 && self.data.center[1] != 0.0 {
            return Err(CliError::Usage("data.center[1] must be 0 in one dimension".into()));
        }
        let t_max = match horizon {
            Horizon::Linear => self.linear.t_max,
            Horizon::Run => self.run.t_max,
        };
        let need = data.radius() + t_max + 2.0;
        if spec.half_length() < need {
            return Err(CliError::Usage(format!(
                "half_length {} is below R_data + t_max + 2 = {need}; the solution would wrap around",
                spec.half_length()
            )));
        }
        match horizon {
            Horizon::Linear => {
                let l = &self.linear;
                if !(l.t_max.is_finite() && l.t_max > 0.0) {
                    return Err(CliError::Usage(format!("linear.t_max must be > 0, got {}", l.t_max)));
                }
                if l.samples < 2 {
                    return Err(CliError::Usage("linear.samples must be at least 2".into()));
                }
                let [lo, hi] = l.window;
                if !(lo >= 0.0 && hi > lo && hi <= l.t_max) {
                    return Err(CliError::Usage(format!(
                        "linear.window must satisfy 0 <= lo < hi <= t_max, got [{lo}, {hi}]"
                    )));
                }
                if !(l.tolerance > 0.0) {
                    return Err(CliError::Usage("linear.tolerance must be > 0".into()));
                }
            }
            Horizon::Run => {
                // catches unreadable custom tables before any work is done
                self.forcing_spec()?.build(self.dim()?, base_dir)?;
                self.evolve_config(Forcing::Zero, false)?;
                let [lo, hi] = self.run.fit_window;
                if !(lo >= 0.0 && hi > lo) {
                    return Err(CliError::Usage(format!("run.fit_window must be increasing, got [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }
}

/// A config together with the directory it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: Option<PathBuf>,
}

impl LoadedConfig {
    pub fn from_path(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self {
                config: RunConfig::default(),
                base_dir: None,
            }),
            Some(p) => Ok(Self {
                config: RunConfig::load(p)?,
                base_dir: p.parent().map(Path::to_path_buf),
            }),
        }
    }

    pub fn validate(&self, horizon: Horizon) -> Result<(), CliError> {
        self.config.validate(horizon, self.base_dir.as_deref())
    }

    pub fn forcing(&self, spec: &ForcingSpec) -> Result<Forcing, CliError> {
        spec.build(self.config.dim()?, self.base_dir.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate(Horizon::Run, None).unwrap();
        c.validate(Horizon::Linear, None).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[grid]\ndims = 2\n").is_err());
        assert!(RunConfig::parse("colour = 1\n").is_err());
    }

    #[test]
    fn wrap_around_rule() {
        let c = RunConfig::parse("[grid]\nhalf_length = 100.0\n").unwrap();
        let e = c.validate(Horizon::Run, None).unwrap_err();
        assert!(e.to_string().contains("wrap"));
    }

    #[test]
    fn hash_is_stable_under_reserialisation() {
        let c = RunConfig::parse("seed = 3\n[run]\nforcing = \"pow:q=1.5\"\n").unwrap();
        let back = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        assert_ne!(c.hash(), RunConfig::default().hash());
    }

    #[test]
    fn forcing_specs() {
        assert_eq!("zero".parse::<ForcingSpec>().unwrap(), ForcingSpec::Zero);
        assert_eq!("pow:q=1.5".parse::<ForcingSpec>().unwrap(), ForcingSpec::Power(1.5));
        assert!("pow:q=1".parse::<ForcingSpec>().is_err());
        assert!("pow:1.5".parse::<ForcingSpec>().is_err());
        let f: ForcingSpec = "invlog:p=2".parse().unwrap();
        assert_eq!(f.to_string(), "invlog:p=2");
        assert!("bogus:p=1".parse::<ForcingSpec>().is_err());
    }
}
