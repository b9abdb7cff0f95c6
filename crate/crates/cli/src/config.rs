//! Run configuration: registry defaults, then the config file, then `--set`.
//!
//! The config file is TOML with optional top-level `seed` and `threads` and one table per
//! experiment:
//!
//! ```toml
//! seed = 7
//!
//! [exp_stationary]
//! delta = 0.001
//! m = 20
//! ```

use crate::CliError;
use gdsde::experiments::{find, registry, ExperimentSpec};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Threads::Fixed(n)),
            _ => Err(format!("threads must be a positive integer or 'auto', got '{s}'")),
        }
    }
}

/// Contents of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<Threads>,
    pub sections: BTreeMap<String, BTreeMap<String, f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        FileConfig::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<FileConfig, String> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
        let mut cfg = FileConfig::default();
        for (key, value) in doc {
            match (key.as_str(), value) {
                ("seed", toml::Value::Integer(i)) if i >= 0 => cfg.seed = Some(i as u64),
                ("seed", v) => return Err(format!("seed: expected a non-negative integer, got {v}")),
                ("threads", toml::Value::Integer(i)) => cfg.threads = Some(i.to_string().parse()?),
                ("threads", toml::Value::String(s)) => cfg.threads = Some(s.parse()?),
                ("threads", v) => return Err(format!("threads: expected an integer or \"auto\", got {v}")),
                (name, toml::Value::Table(t)) => {
                    find(name).map_err(|e| e.to_string())?;
                    let mut section = BTreeMap::new();
                    for (k, v) in t {
                        let x = match v {
                            toml::Value::Integer(i) => i as f64,
                            toml::Value::Float(f) => f,
                            other => return Err(format!("[{name}] {k}: expected a number, got {other}")),
                        };
                        section.insert(k, x);
                    }
                    cfg.sections.insert(name.to_string(), section);
                }
                (other, _) => return Err(format!("unknown top-level key '{other}'")),
            }
        }
        Ok(cfg)
    }
}

/// One `--set` override, optionally qualified as `experiment.key=value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub experiment: Option<String>,
    pub key: String,
    pub value: String,
}

impl std::str::FromStr for Override {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lhs, value) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
        let lhs = lhs.trim();
        if lhs.is_empty() {
            return Err(format!("empty key in '{s}'"));
        }
        let (experiment, key) = match lhs.split_once('.') {
            Some((e, k)) => (Some(e.to_string()), k.to_string()),
            None => (None, lhs.to_string()),
        };
        Ok(Override { experiment, key, value: value.trim().to_string() })
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub threads: Threads,
}

/// Command-line values shared by `run` and `all`.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<Threads>,
    pub overrides: Vec<Override>,
    pub config: Option<FileConfig>,
}

impl Flags {
    pub fn master_seed(&self) -> u64 {
        self.seed.or(self.config.as_ref().and_then(|c| c.seed)).unwrap_or(DEFAULT_SEED)
    }

    pub fn threads(&self) -> Threads {
        self.threads.or(self.config.as_ref().and_then(|c| c.threads)).unwrap_or(Threads::Auto)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Checks that every qualified override names a registered experiment and that unqualified
    /// overrides are only used when `single` names the experiment being run.
    pub fn check_overrides(&self, single: Option<&str>) -> Result<(), CliError> {
        for o in &self.overrides {
            match (&o.experiment, single) {
                (Some(e), _) => {
                    find(e)?;
                }
                (None, Some(_)) => {}
                (None, None) => {
                    return Err(CliError::Usage(format!(
                        "--set {}={}: qualify the key as <experiment>.{} when running all experiments",
                        o.key, o.value, o.key
                    )))
                }
            }
        }
        Ok(())
    }

    /// Registry defaults, then the config section, then matching `--set` overrides.
    pub fn resolve(&self, experiment: &str, single: bool) -> Result<RunConfig, CliError> {
        let mut spec = ExperimentSpec::defaults(experiment)?;
        if let Some(section) = self.config.as_ref().and_then(|c| c.sections.get(experiment)) {
            for (k, v) in section {
                spec.set(k, *v).map_err(|e| CliError::Usage(format!("config [{experiment}] {k}: {e}")))?;
            }
        }
        for o in &self.overrides {
            let applies = match &o.experiment {
                Some(e) => e == experiment,
                None => single,
            };
            if applies {
                spec.set_str(&o.key, &o.value).map_err(|e| CliError::Usage(format!("--set {}: {e}", o.key)))?;
            }
        }
        Ok(RunConfig { spec, master_seed: self.master_seed(), out_dir: self.out_dir(), threads: self.threads() })
    }
}

/// Experiment names in registry order.
pub fn experiment_names() -> Vec<&'static str> {
    registry().iter().map(|d| d.name).collect()
}
