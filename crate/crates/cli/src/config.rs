//! Run configuration: a flat file of `section.key = value` lines.
//!
//! Values use TOML syntax (quoted strings, numbers, bracketed lists), so a config is
//! also a valid TOML document with dotted keys. [`RunConfig::emit`] writes the
//! canonical form, one key per line in a fixed order, and the config hash is the
//! SHA-256 of that canonical text.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use gwde_core::dynamics::EnvironmentMap;
use gwde_core::reproduction::ReproductionFamily;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "EnvironmentMap::doubling")]
    pub map: EnvironmentMap<f64>,
    pub family: ReproductionFamily<f64>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub extinction: ExtinctionSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub dimension: DimensionSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub lyapunov: LyapunovSection,
    #[serde(default)]
    pub holder: HolderSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    #[serde(serialize_with = "emit_seed", deserialize_with = "parse_seed")]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtinctionSection {
    pub grid: usize,
    pub tol: f64,
    pub max_blocks: usize,
    /// Previously written `q.json` to reuse instead of solving again.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_path: Option<String>,
}

impl Default for ExtinctionSection {
    fn default() -> Self {
        ExtinctionSection {
            grid: 4096,
            tol: 1e-10,
            max_blocks: 100_000,
            q_path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    pub max_period: usize,
    pub probe_len: usize,
    /// Family parameters for the regime-line table; empty for a single report.
    pub lambdas: Vec<f64>,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection {
            max_period: 12,
            probe_len: 200,
            lambdas: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionSection {
    pub depth: usize,
    pub tol: f64,
    pub memory: usize,
    /// Parameter grid; when absent, the family's own parameter is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
}

impl Default for DimensionSection {
    fn default() -> Self {
        DimensionSection {
            depth: 12,
            tol: 1e-10,
            memory: 5,
            lambdas: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub x: f64,
    pub generations: usize,
    pub trials: usize,
    pub cap: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            x: 0.0,
            generations: 60,
            trials: 100_000,
            cap: gwde_core::simulate::DEFAULT_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovSection {
    pub max_period: usize,
    pub probe_len: usize,
    pub a: f64,
    pub n_max: usize,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        LyapunovSection {
            max_period: 12,
            probe_len: 200,
            a: 0.5,
            n_max: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderSection {
    /// Exponent for the seminorm of `q`; defaults to `alpha_star`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Exponent for the convergence profile; defaults to `alpha_star / 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub n_max: usize,
}

impl Default for HolderSection {
    fn default() -> Self {
        HolderSection {
            alpha: None,
            beta: None,
            n_max: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub format: TableFormat,
    pub path: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            format: TableFormat::Csv,
            path: "out".into(),
        }
    }
}

// TOML integers are signed, so seeds above i64::MAX travel as decimal strings.
fn emit_seed<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
    match i64::try_from(*seed) {
        Ok(v) => s.serialize_i64(v),
        Err(_) => s.serialize_str(&seed.to_string()),
    }
}

fn parse_seed<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Int(v) => u64::try_from(v).map_err(serde::de::Error::custom),
        Repr::Text(t) => t.trim().parse().map_err(serde::de::Error::custom),
    }
}

impl RunConfig {
    pub fn new(family: ReproductionFamily<f64>) -> Self {
        RunConfig {
            map: EnvironmentMap::doubling(),
            family,
            run: RunSection::default(),
            extinction: ExtinctionSection::default(),
            classify: ClassifySection::default(),
            dimension: DimensionSection::default(),
            simulate: SimulateSection::default(),
            lyapunov: LyapunovSection::default(),
            holder: HolderSection::default(),
            output: OutputSection::default(),
        }
    }

    /// Parses and validates config text.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.starts_with('[') {
                return Err(CliError::Config(format!(
                    "line {}: tables are not allowed, use dotted keys",
                    i + 1
                )));
            }
            if let Some((key, _)) = line.split_once('=') {
                if key.trim().split('.').count() > 2 {
                    return Err(CliError::Config(format!(
                        "line {}: key `{}` nests deeper than one section",
                        i + 1,
                        key.trim()
                    )));
                }
            }
        }
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text: one `section.key = value` per line, sections in declaration order.
    pub fn emit(&self) -> String {
        let value = toml::Value::try_from(self).expect("config is representable as TOML");
        let mut out = String::new();
        let toml::Value::Table(sections) = value else {
            unreachable!("a struct serializes to a table")
        };
        for (section, body) in sections {
            match body {
                toml::Value::Table(entries) => {
                    for (key, v) in entries {
                        let _ = writeln!(out, "{section}.{key} = {v}");
                    }
                }
                other => {
                    let _ = writeln!(out, "{section} = {other}");
                }
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical text, ignoring the output location and the
    /// thread cap since neither changes any computed value.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.path = OutputSection::default().path;
        c.run.threads = None;
        hex::encode(Sha256::digest(c.emit().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        match &self.map {
            EnvironmentMap::Doubling => {}
            EnvironmentMap::Affine { degree } => {
                EnvironmentMap::<f64>::affine(*degree).map_err(|e| CliError::Config(e.to_string()))?;
            }
            EnvironmentMap::SmoothExpanding { degree, amplitude } => {
                EnvironmentMap::smooth_expanding(*degree, *amplitude)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        self.family
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for (name, tol) in [
            ("extinction.tol", self.extinction.tol),
            ("dimension.tol", self.dimension.tol),
        ] {
            if !(tol > 0.0 && tol.is_finite()) {
                return bad(format!("{name} must be positive, got {tol}"));
            }
        }
        if !self.extinction.grid.is_power_of_two() || self.extinction.grid < 2 {
            return bad(format!(
                "extinction.grid must be a power of two, got {}",
                self.extinction.grid
            ));
        }
        if !(1..=16).contains(&self.dimension.depth) {
            return bad(format!("dimension.depth must be in 1..=16, got {}", self.dimension.depth));
        }
        if !(1..=gwde_core::dimension::MAX_MEMORY).contains(&self.dimension.memory) {
            return bad(format!("dimension.memory out of range: {}", self.dimension.memory));
        }
        if !(0.0..1.0).contains(&self.simulate.x) {
            return bad(format!("simulate.x must lie in [0, 1), got {}", self.simulate.x));
        }
        if !(self.lyapunov.a > 0.0 && self.lyapunov.a <= 1.0) {
            return bad(format!("lyapunov.a must lie in (0, 1], got {}", self.lyapunov.a));
        }
        for (name, v) in [("holder.alpha", self.holder.alpha), ("holder.beta", self.holder.beta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v <= 1.0) {
                    return bad(format!("{name} must lie in (0, 1], got {v}"));
                }
            }
        }
        if self.run.threads == Some(0) {
            return bad("run.threads must be at least 1".into());
        }
        Ok(())
    }

    /// The map, rebuilt through its validating constructor.
    pub fn environment(&self) -> EnvironmentMap<f64> {
        match &self.map {
            EnvironmentMap::Affine { degree } => {
                EnvironmentMap::affine(*degree).expect("validated")
            }
            other => other.clone(),
        }
    }
}
