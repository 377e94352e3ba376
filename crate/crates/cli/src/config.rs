//! Run configuration: a TOML file with flat dotted keys such as
//! `schedule.lambda_min = 0.2`, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ddsc_core::bench::{BenchmarkConfig, Strategy};
use thiserror::Error;
use toml::Value;

#[derive(Debug, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

pub const REQUIRED_KEYS: [&str; 3] = ["run.strategies", "run.seeds", "run.epochs"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bench: BenchmarkConfig,
    pub out_dir: Option<PathBuf>,
}

/// Values given on the command line; `None` leaves the file value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub strategies: Option<String>,
    pub seeds: Option<String>,
    pub epochs: Option<usize>,
    pub label_fraction: Option<f64>,
    pub shift_strength: Option<f64>,
    pub checkpoints: Option<bool>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

pub fn parse_flat(text: &str) -> Result<BTreeMap<String, Value>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("config", e.to_string()))?;
    let mut flat = BTreeMap::new();
    flatten("", &table, &mut flat);
    Ok(flat)
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::new(key, "expected a number")),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(ConfigError::new(key, "expected a non-negative integer")),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Boolean(b) => Ok(*b),
        Value::String(s) => parse_on_off(s).map_err(|m| ConfigError::new(key, m)),
        _ => Err(ConfigError::new(key, "expected true/false")),
    }
}

pub fn parse_on_off(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        other => Err(format!("expected on|off, got '{other}'")),
    }
}

pub fn parse_strategies(s: &str) -> std::result::Result<Vec<Strategy>, String> {
    let list: Vec<Strategy> =
        s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect::<std::result::Result<_, _>>()?;
    if list.is_empty() {
        return Err("need at least one strategy".into());
    }
    Ok(list)
}

/// `N` means seeds `0..N`; a comma list is taken literally.
pub fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    let s = s.trim();
    if s.contains(',') {
        s.split(',').map(|p| p.trim().parse::<u64>().map_err(|e| format!("bad seed '{p}': {e}"))).collect()
    } else {
        let n: u64 = s.parse().map_err(|e| format!("bad seed count '{s}': {e}"))?;
        if n == 0 {
            return Err("need at least one seed".into());
        }
        Ok((0..n).collect())
    }
}

impl RunConfig {
    /// Builds the effective configuration from file contents (possibly empty)
    /// and flag overrides, then validates it.
    pub fn resolve(file_text: Option<&str>, overrides: &Overrides) -> Result<Self> {
        let flat = match file_text {
            Some(text) => parse_flat(text)?,
            None => BTreeMap::new(),
        };
        let mut cfg = BenchmarkConfig::default();
        let mut out_dir = None;
        let mut given: Vec<&str> = Vec::new();

        for (key, value) in &flat {
            let k = key.as_str();
            match k {
                "dataset.classes" => cfg.dataset.classes = as_usize(k, value)?,
                "dataset.train_devices" => cfg.dataset.train_devices = as_usize(k, value)?,
                "dataset.unseen_devices" => cfg.dataset.unseen_devices = as_usize(k, value)?,
                "dataset.raw_dim" => cfg.dataset.raw_dim = as_usize(k, value)?,
                "dataset.samples_per_cell" => cfg.dataset.samples_per_cell = as_usize(k, value)?,
                "dataset.shift_strength" => cfg.dataset.shift_strength = as_f64(k, value)?,
                "dataset.noise_sigma" => cfg.dataset.noise_sigma = as_f64(k, value)?,
                "dataset.label_fraction" => cfg.dataset.label_fraction = as_f64(k, value)?,
                "dataset.seed" => cfg.dataset.seed = as_usize(k, value)? as u64,
                "schedule.lambda_min" => cfg.schedule.lambda_min = as_f64(k, value)?,
                "schedule.tau" => cfg.schedule.tau = as_f64(k, value)?,
                "schedule.beta" => cfg.schedule.beta = as_f64(k, value)?,
                "schedule.gamma" => cfg.schedule.gamma = as_f64(k, value)?,
                "schedule.eta_h" => cfg.schedule.eta_h = as_f64(k, value)?,
                "schedule.epsilon" => cfg.schedule.epsilon = as_f64(k, value)?,
                "schedule.fixed_lambda" => cfg.schedule.fixed_lambda = Some(as_f64(k, value)?),
                "model.embedding_dim" => cfg.model.embedding_dim = as_usize(k, value)?,
                "model.learning_rate" => cfg.model.learning_rate = as_f64(k, value)?,
                "model.batch_size" => cfg.model.batch_size = as_usize(k, value)?,
                "exposure.start" => cfg.exposure.start = as_f64(k, value)?,
                "exposure.end" => cfg.exposure.end = as_f64(k, value)?,
                "run.strategies" => {
                    let text = match value {
                        Value::String(s) => s.clone(),
                        Value::Array(items) => items
                            .iter()
                            .map(|v| {
                                v.as_str().map(str::to_owned).ok_or_else(|| ConfigError::new(k, "expected strings"))
                            })
                            .collect::<Result<Vec<_>>>()?
                            .join(","),
                        _ => return Err(ConfigError::new(k, "expected a list of strategy names")),
                    };
                    cfg.strategies = parse_strategies(&text).map_err(|m| ConfigError::new(k, m))?;
                    given.push("run.strategies");
                }
                "run.seeds" => {
                    cfg.seeds = match value {
                        Value::Integer(_) => parse_seeds(&as_usize(k, value)?.to_string()),
                        Value::String(s) => parse_seeds(s),
                        Value::Array(items) => items
                            .iter()
                            .map(|v| match v {
                                Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                                _ => Err("expected non-negative integers".to_string()),
                            })
                            .collect(),
                        _ => Err("expected a count or a list".to_string()),
                    }
                    .map_err(|m| ConfigError::new(k, m))?;
                    given.push("run.seeds");
                }
                "run.epochs" => {
                    cfg.schedule.epochs = as_usize(k, value)?;
                    given.push("run.epochs");
                }
                "run.checkpoints" => cfg.checkpoints = as_bool(k, value)?,
                "run.out_dir" => {
                    out_dir = Some(PathBuf::from(
                        value.as_str().ok_or_else(|| ConfigError::new(k, "expected a path string"))?,
                    ))
                }
                unknown => return Err(ConfigError::new(unknown, "unknown key")),
            }
        }

        if let Some(s) = &overrides.strategies {
            cfg.strategies = parse_strategies(s).map_err(|m| ConfigError::new("--strategies", m))?;
            given.push("run.strategies");
        }
        if let Some(s) = &overrides.seeds {
            cfg.seeds = parse_seeds(s).map_err(|m| ConfigError::new("--seeds", m))?;
            given.push("run.seeds");
        }
        if let Some(e) = overrides.epochs {
            cfg.schedule.epochs = e;
            given.push("run.epochs");
        }
        if let Some(f) = overrides.label_fraction {
            cfg.dataset.label_fraction = f;
        }
        if let Some(s) = overrides.shift_strength {
            cfg.dataset.shift_strength = s;
        }
        if let Some(c) = overrides.checkpoints {
            cfg.checkpoints = c;
        }
        if let Some(out) = &overrides.out {
            out_dir = Some(out.clone());
        }

        for key in REQUIRED_KEYS {
            if !given.contains(&key) {
                return Err(ConfigError::new(key, "missing required field"));
            }
        }
        cfg.validate().map_err(|e| match e {
            ddsc_core::DdscError::InvalidConfig { field, reason } => ConfigError::new(qualify(field), reason),
            other => ConfigError::new("config", other.to_string()),
        })?;
        if !(0.0..=1.0).contains(&cfg.exposure.start) || !(0.0..=1.0).contains(&cfg.exposure.end) {
            return Err(ConfigError::new("exposure", "fractions must lie in [0,1]"));
        }
        Ok(RunConfig { bench: cfg, out_dir })
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let text = match path {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::new("--config", format!("{}: {e}", p.display())))?,
            ),
            None => None,
        };
        Self::resolve(text.as_deref(), overrides)
    }

    /// Effective configuration as flat `key = value` lines, readable by `resolve`.
    pub fn to_text(&self) -> String {
        let c = &self.bench;
        // shortest round-trip form; always a valid TOML float
        let f = |x: f64| format!("{x:?}");
        let mut lines = vec![
            format!("dataset.classes = {}", c.dataset.classes),
            format!("dataset.train_devices = {}", c.dataset.train_devices),
            format!("dataset.unseen_devices = {}", c.dataset.unseen_devices),
            format!("dataset.raw_dim = {}", c.dataset.raw_dim),
            format!("dataset.samples_per_cell = {}", c.dataset.samples_per_cell),
            format!("dataset.shift_strength = {}", f(c.dataset.shift_strength)),
            format!("dataset.noise_sigma = {}", f(c.dataset.noise_sigma)),
            format!("dataset.label_fraction = {}", f(c.dataset.label_fraction)),
            format!("dataset.seed = {}", c.dataset.seed),
            format!("schedule.lambda_min = {}", f(c.schedule.lambda_min)),
            format!("schedule.tau = {}", f(c.schedule.tau)),
            format!("schedule.beta = {}", f(c.schedule.beta)),
            format!("schedule.gamma = {}", f(c.schedule.gamma)),
            format!("schedule.eta_h = {}", f(c.schedule.eta_h)),
            format!("schedule.epsilon = {}", f(c.schedule.epsilon)),
        ];
        if let Some(l) = c.schedule.fixed_lambda {
            lines.push(format!("schedule.fixed_lambda = {}", f(l)));
        }
        lines.extend([
            format!("model.embedding_dim = {}", c.model.embedding_dim),
            format!("model.learning_rate = {}", f(c.model.learning_rate)),
            format!("model.batch_size = {}", c.model.batch_size),
            format!("exposure.start = {}", f(c.exposure.start)),
            format!("exposure.end = {}", f(c.exposure.end)),
            format!(
                "run.strategies = [{}]",
                c.strategies.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ")
            ),
            format!("run.seeds = [{}]", c.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")),
            format!("run.epochs = {}", c.schedule.epochs),
            format!("run.checkpoints = {}", c.checkpoints),
        ]);
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }
}

fn qualify(field: &str) -> String {
    match field {
        "epochs" => "run.epochs".into(),
        "strategies" | "seeds" => format!("run.{field}"),
        "lambda_min" | "tau" | "beta" | "gamma" | "eta_h" | "epsilon" | "fixed_lambda" => format!("schedule.{field}"),
        "embedding_dim" | "learning_rate" | "batch_size" => format!("model.{field}"),
        other => format!("dataset.{other}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "run.strategies = [\"uniform\"]\nrun.seeds = 2\nrun.epochs = 3\n";

    #[test]
    fn minimal_config_resolves_defaults() {
        let cfg = RunConfig::resolve(Some(MINIMAL), &Overrides::default()).unwrap();
        assert_eq!(cfg.bench.schedule.lambda_min, 0.2);
        assert_eq!(cfg.bench.seeds, vec![0, 1]);
        assert!(cfg.to_text().contains("schedule.lambda_min = 0.2\n"));
    }

    #[test]
    fn resolved_text_round_trips() {
        let cfg = RunConfig::resolve(
            Some("run.strategies = \"ddsc,uniform\"\nrun.seeds = [3, 7]\nrun.epochs = 5\n[schedule]\ntau = 0.25\n"),
            &Overrides::default(),
        )
        .unwrap();
        let again = RunConfig::resolve(Some(&cfg.to_text()), &Overrides::default()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejections_name_the_field() {
        let err = RunConfig::resolve(Some("run.seeds = 2\nrun.epochs = 3\n"), &Overrides::default()).unwrap_err();
        assert_eq!(err.field, "run.strategies");

        let err = RunConfig::resolve(Some(&format!("{MINIMAL}schedule.lambda_min = 1.5\n")), &Overrides::default())
            .unwrap_err();
        assert_eq!(err.field, "schedule.lambda_min");
        assert!(err.message.contains("out of [0,1)"));

        let err = RunConfig::resolve(Some(&format!("{MINIMAL}schedule.lambda_mni = 0.1\n")), &Overrides::default())
            .unwrap_err();
        assert_eq!(err.field, "schedule.lambda_mni");
        assert_eq!(err.message, "unknown key");
    }

    #[test]
    fn flags_override_file() {
        let overrides = Overrides {
            strategies: Some("uniform,ddsc".into()),
            seeds: Some("3".into()),
            epochs: Some(40),
            shift_strength: Some(0.0),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(Some(MINIMAL), &overrides).unwrap();
        assert_eq!(cfg.bench.strategies, vec![Strategy::Uniform, Strategy::Ddsc]);
        assert_eq!(cfg.bench.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.bench.schedule.epochs, 40);
        assert_eq!(cfg.bench.dataset.shift_strength, 0.0);
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("4").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("1,5,9").unwrap(), vec![1, 5, 9]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
