//! Run configuration: JSON file, sidecar re-runs and `--set` overrides.

use std::path::Path;

use levy_solow::analysis::LyapunovOptions;
use levy_solow::models::{ModelParams, StateVec, Variant};
use levy_solow::sde::{Driver, IntegratorConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Figure1,
    Figure5,
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Base parameter set; fields under `params` override it.
    pub preset: Preset,
    pub variant: Variant,
    pub params: ModelParams,
    pub integrator: IntegratorConfig,
    pub seed: u64,
    pub path_index: u64,
    /// Initial state in the variant's component order.
    pub init: Option<Vec<f64>>,
    /// Significant digits of floats in CSV output.
    pub precision: usize,
    /// Worker threads for parallel commands; 0 picks the core count.
    pub workers: usize,
    pub bifurcate: BifurcateConfig,
    pub phase: PhaseConfig,
    pub lyapunov: LyapunovConfig,
    pub slowfast: SlowFastConfig,
    pub ensemble: EnsembleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::with_preset(Preset::Figure5)
    }
}

impl RunConfig {
    pub fn with_preset(preset: Preset) -> Self {
        let params = match preset {
            Preset::Figure1 => ModelParams::figure1(),
            Preset::Figure5 => ModelParams::figure5(),
            Preset::Balanced => ModelParams::balanced(1.0),
        };
        RunConfig {
            schema_version: SCHEMA_VERSION,
            preset,
            variant: Variant::Reduced,
            params,
            integrator: IntegratorConfig::default(),
            seed: 0,
            path_index: 0,
            init: None,
            precision: 17,
            workers: 0,
            bifurcate: BifurcateConfig::default(),
            phase: PhaseConfig::default(),
            lyapunov: LyapunovConfig::default(),
            slowfast: SlowFastConfig::default(),
            ensemble: EnsembleConfig::default(),
        }
    }

    pub fn init_state(&self) -> Result<StateVec, CliError> {
        match &self.init {
            None => Ok(StateVec::default_init(self.variant, &self.params)),
            Some(v) => Ok(StateVec::from_slice(self.variant, v)?),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(1..=17).contains(&self.precision) {
            return Err(CliError::Validation(format!(
                "precision must be between 1 and 17, got {}",
                self.precision
            )));
        }
        self.params.validate()?;
        self.integrator.validate()?;
        self.init_state()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BifurcateConfig {
    pub gamma_grid: Vec<f64>,
    pub k_max: f64,
}

impl Default for BifurcateConfig {
    fn default() -> Self {
        BifurcateConfig {
            gamma_grid: (0..=100).map(|i| i as f64 / 20.0).collect(),
            k_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    pub gammas: Vec<f64>,
    /// Explicit k grid; when empty, `n_points` evenly spaced values on
    /// `[k_min, k_max]` are used.
    pub k_values: Vec<f64>,
    pub k_min: f64,
    pub k_max: f64,
    pub n_points: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            gammas: vec![1.0, 7.0 / 3.0, 4.0],
            k_values: Vec::new(),
            k_min: 0.05,
            k_max: 3.0,
            n_points: 300,
        }
    }
}

impl PhaseConfig {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        if !self.k_values.is_empty() {
            return Ok(self.k_values.clone());
        }
        if self.n_points < 2 || !(self.k_min > 0.0 && self.k_max > self.k_min) {
            return Err(CliError::Validation(
                "phase needs n_points >= 2 and 0 < k_min < k_max".into(),
            ));
        }
        let step = (self.k_max - self.k_min) / (self.n_points - 1) as f64;
        Ok((0..self.n_points)
            .map(|i| self.k_min + step * i as f64)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovConfig {
    pub sigmas: Vec<f64>,
    pub seeds: usize,
    pub options: LyapunovOptions,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            sigmas: vec![0.05, 0.1, 0.2],
            seeds: 50,
            options: LyapunovOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlowFastConfig {
    pub eps_list: Vec<f64>,
    pub horizon: f64,
    pub dt_max: f64,
    pub k0: f64,
    pub driver: Driver,
}

impl Default for SlowFastConfig {
    fn default() -> Self {
        let o = levy_solow::analysis::SlowFastOptions::default();
        SlowFastConfig {
            eps_list: vec![0.2, 0.1, 0.05],
            horizon: o.horizon,
            dt_max: o.dt_max,
            k0: o.k0,
            driver: o.driver,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub quantiles: Vec<f64>,
    pub record_every: usize,
    /// Also run the Gaussian-only twin and write the comparison.
    pub compare: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_paths: 1000,
            quantiles: vec![0.05, 0.5, 0.95],
            record_every: 10,
            compare: false,
        }
    }
}

fn to_value(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn from_value(v: Value) -> Result<RunConfig, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Validation(format!("config: {e}")))
}

/// Merge `src` into `dst`, failing on keys that `dst` does not have. Arrays,
/// nulls and tagged enums whose tag changes are replaced wholesale.
fn merge(dst: &mut Value, src: Value, path: &str) -> Result<(), CliError> {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            let retag = matches!((d.get("family"), s.get("family")), (Some(a), Some(b)) if a != b);
            if retag {
                *d = s;
                return Ok(());
            }
            for (k, v) in s {
                let key = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match d.get_mut(&k) {
                    Some(slot) => merge(slot, v, &key)?,
                    None => {
                        return Err(CliError::Validation(format!("unknown config key `{key}`")))
                    }
                }
            }
            Ok(())
        }
        (d, s) => {
            *d = s;
            Ok(())
        }
    }
}

/// Extract the run configuration from a parsed file: either a bare config or
/// a sidecar written by a previous run.
fn config_part(v: Value) -> Result<Value, CliError> {
    match v {
        Value::Object(mut m) if m.contains_key("sidecar_version") => m
            .remove("config")
            .ok_or_else(|| CliError::Validation("sidecar has no `config` entry".into())),
        Value::Object(m) => Ok(Value::Object(m)),
        _ => Err(CliError::Validation("config must be a JSON object".into())),
    }
}

fn preset_of(v: &Value) -> Result<Preset, CliError> {
    match v.get("preset") {
        None => Ok(Preset::Figure5),
        Some(p) => serde_json::from_value(p.clone())
            .map_err(|e| CliError::Validation(format!("config: preset: {e}"))),
    }
}

/// Parse `key=value`; the value is read as JSON when it parses, otherwise
/// as a string.
fn parse_set(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set expects key=value, got `{s}`")))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(CliError::Validation(format!(
            "--set has an empty key in `{s}`"
        )));
    }
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((key.to_string(), value))
}

fn nest(key: &str, value: Value) -> Value {
    key.rsplit('.').fold(value, |acc, part| {
        let mut m = serde_json::Map::new();
        m.insert(part.to_string(), acc);
        Value::Object(m)
    })
}

pub struct Overrides<'a> {
    pub seed: Option<u64>,
    pub sets: &'a [String],
}

/// Build the effective configuration from defaults, an optional file and the
/// command-line overrides, in that order.
pub fn load(file: Option<&Path>, ov: &Overrides) -> Result<RunConfig, CliError> {
    let user = match file {
        None => Value::Object(Default::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            config_part(v)?
        }
    };
    let mut sets = Vec::with_capacity(ov.sets.len());
    for s in ov.sets {
        sets.push(parse_set(s)?);
    }
    let preset = match sets.iter().rev().find(|(k, _)| k == "preset") {
        Some((_, v)) => preset_of(&nest("preset", v.clone()))?,
        None => preset_of(&user)?,
    };

    let mut value = to_value(&RunConfig::with_preset(preset));
    merge(&mut value, user, "")?;
    for (k, v) in sets {
        merge(&mut value, nest(&k, v), "")?;
    }
    if let Some(seed) = ov.seed {
        value["seed"] = Value::from(seed);
    }
    let cfg = from_value(value)?;
    cfg.validate()?;
    Ok(cfg)
}
