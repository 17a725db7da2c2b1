//! Flat dotted-key configuration files, unit-suffix parsing, and run
//! manifests.
//!
//! Config format: one `section.key = value` per line, `#` comments, blank
//! lines ignored. Values accept unit suffixes that are converted at parse
//! time: `GHz`/`MHz`/`kHz`/`Hz` to hertz, `dBm` to watts, `dB` to linear
//! ratio. Lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::channel::ScenarioConfig;
use crate::harness::{Algorithm, ExperimentSpec, PowerModel, SweepVar};

/// Parse error carrying the offending line and field for the diagnostic the
/// CLI prints before exiting.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "config error at line {} (field `{}`): {}",
            self.line, self.field, self.message
        )
    }
}

impl std::error::Error for ConfigError {}

/// Raw parsed file: dotted key → (line number, value string). BTreeMap keeps
/// key order canonical for digesting.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError {
                    line: lineno,
                    field: line.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let key = key.trim().to_string();
            if !key.contains('.') {
                return Err(ConfigError {
                    line: lineno,
                    field: key,
                    message: "keys must be dotted, e.g. `scenario.nt`".into(),
                });
            }
            entries.insert(key, (lineno, value.trim().to_string()));
        }
        Ok(RawConfig { entries })
    }

    fn get(&self, key: &str) -> Option<&(usize, String)> {
        self.entries.get(key)
    }
}

/// Parses a scalar with an optional unit suffix, converting to the base unit
/// (hertz, watts, or linear ratio).
pub fn parse_scalar(value: &str) -> Result<f64, String> {
    let v = value.trim();
    let suffixes: [(&str, fn(f64) -> f64); 6] = [
        ("GHz", |x| x * 1e9),
        ("MHz", |x| x * 1e6),
        ("kHz", |x| x * 1e3),
        ("dBm", |x| 10f64.powf(x / 10.0) / 1000.0),
        ("dB", |x| 10f64.powf(x / 10.0)),
        ("Hz", |x| x),
    ];
    for (suffix, conv) in suffixes {
        if let Some(num) = v.strip_suffix(suffix) {
            let x: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("`{v}` is not a number with unit {suffix}"))?;
            return Ok(conv(x));
        }
    }
    v.parse().map_err(|_| format!("`{v}` is not a number"))
}

fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(parse_scalar).collect()
}

/// Typed view over a raw config, with override support for CLI flags.
pub struct ConfigReader<'a> {
    raw: &'a RawConfig,
    overrides: BTreeMap<String, String>,
}

impl<'a> ConfigReader<'a> {
    pub fn new(raw: &'a RawConfig) -> Self {
        Self { raw, overrides: BTreeMap::new() }
    }

    /// CLI flags and environment variables override file values. Keys use
    /// the dotted form.
    pub fn set_override(&mut self, key: &str, value: String) {
        self.overrides.insert(key.to_string(), value);
    }

    /// Applies `PREFIX_SECTION_KEY=value` environment variables, e.g.
    /// `IRSOPT_SCENARIO_NT=8` for `scenario.nt`.
    pub fn apply_env(&mut self, prefix: &str) {
        for (k, v) in std::env::vars() {
            if let Some(rest) = k.strip_prefix(&format!("{prefix}_")) {
                let dotted = rest.to_lowercase().replacen('_', ".", 1);
                self.overrides.insert(dotted, v);
            }
        }
    }

    fn lookup(&self, key: &str) -> Option<(usize, String)> {
        if let Some(v) = self.overrides.get(key) {
            return Some((0, v.clone()));
        }
        self.raw.get(key).cloned()
    }

    fn scalar(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.lookup(key) {
            None => Ok(default),
            Some((line, v)) => parse_scalar(&v).map_err(|message| ConfigError {
                line,
                field: key.to_string(),
                message,
            }),
        }
    }

    fn usize_field(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        let v = self.scalar(key, default as f64)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(ConfigError {
                line: self.lookup(key).map(|(l, _)| l).unwrap_or(0),
                field: key.to_string(),
                message: format!("expected a nonnegative integer, got {v}"),
            });
        }
        Ok(v as usize)
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.lookup(key) {
            None => Ok(default.to_vec()),
            Some((line, v)) => parse_list(&v).map_err(|message| ConfigError {
                line,
                field: key.to_string(),
                message,
            }),
        }
    }

    fn string(&self, key: &str) -> Option<String> {
        self.lookup(key).map(|(_, v)| v)
    }

    /// Builds the physical scenario from `scenario.*` and `algo.*` keys.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let d = ScenarioConfig::default();
        let nt = self.usize_field("scenario.nt", d.nt)?;
        let k = self.usize_field("scenario.k", d.k)?;
        let m_l: Vec<usize> = self
            .list(
                "scenario.m",
                &d.m_l.iter().map(|&m| m as f64).collect::<Vec<_>>(),
            )?
            .into_iter()
            .map(|m| m as usize)
            .collect();
        let sigma2_scalar = self.scalar("scenario.sigma2", d.sigma2[0])?;
        let gamma_scalar = self.scalar("scenario.gamma", d.gamma[0])?;
        Ok(ScenarioConfig {
            nt,
            m_l,
            k,
            r: self.scalar("scenario.r", d.r)?,
            fc: self.scalar("scenario.fc", d.fc)?,
            alpha_l: self.scalar("scenario.alpha_l", d.alpha_l)?,
            alpha_n: self.scalar("scenario.alpha_n", d.alpha_n)?,
            beta: self.scalar("scenario.beta", d.beta)?,
            sigma2: vec![sigma2_scalar; k],
            gamma: vec![gamma_scalar; k],
            kappa: self.scalar("scenario.kappa", d.kappa)?,
            user_center: match self.lookup("scenario.user_center") {
                None => None,
                Some((line, v)) => {
                    let xy = parse_list(&v).map_err(|message| ConfigError {
                        line,
                        field: "scenario.user_center".into(),
                        message,
                    })?;
                    if xy.len() != 2 {
                        return Err(ConfigError {
                            line,
                            field: "scenario.user_center".into(),
                            message: "expected `x,y`".into(),
                        });
                    }
                    Some((xy[0], xy[1]))
                }
            },
            user_radius: match self.lookup("scenario.user_radius") {
                None => None,
                Some(_) => Some(self.scalar("scenario.user_radius", 0.0)?),
            },
            eps: self.scalar("algo.eps", d.eps)?,
            mu: self.scalar("algo.mu", d.mu)?,
            seed: self.usize_field("scenario.seed", d.seed as usize)? as u64,
            ..d
        })
    }

    /// Builds the sweep description from `sweep.*` and `power.*` keys.
    pub fn experiment(&self, scenario: ScenarioConfig) -> Result<ExperimentSpec, ConfigError> {
        let err = |key: &str, message: String| {
            let line = self.lookup(key).map(|(l, _)| l).unwrap_or(0);
            ConfigError { line, field: key.to_string(), message }
        };
        let sweep_name = self.string("sweep.var").unwrap_or_else(|| "gamma_db".into());
        let sweep = SweepVar::parse(&sweep_name)
            .ok_or_else(|| err("sweep.var", format!("unknown sweep variable `{sweep_name}`")))?;
        let values = self.list("sweep.values", &[2.0])?;
        let algorithms: Vec<Algorithm> = match self.string("sweep.algorithms") {
            None => vec![Algorithm::PenaltyAltmin],
            Some(s) if s.trim().is_empty() => Vec::new(),
            Some(s) => s
                .split(',')
                .map(|name| {
                    let name = name.trim();
                    Algorithm::parse(name).ok_or_else(|| {
                        err("sweep.algorithms", format!("unknown algorithm `{name}`"))
                    })
                })
                .collect::<Result<_, _>>()?,
        };
        let pm = PowerModel::default();
        Ok(ExperimentSpec {
            seed: scenario.seed,
            base: scenario,
            sweep,
            values,
            algorithms,
            drops: self.usize_field("sweep.drops", 20)?,
            thresholds_db: self.list("sweep.thresholds", &[0.0, 2.0, 4.0, 6.0])?,
            power_model: PowerModel {
                eta: self.scalar("power.eta", pm.eta)?,
                ps: self.scalar("power.ps", pm.ps)?,
                prf: self.scalar("power.prf", pm.prf)?,
                pirs: self.scalar("power.pirs", pm.pirs)?,
            },
        })
    }

    /// Canonical rendering of every numeric-affecting field: file entries
    /// with overrides applied, in sorted key order, values resolved to base
    /// units at full precision.
    pub fn canonical(&self) -> String {
        let mut keys: Vec<String> = self.raw.entries.keys().cloned().collect();
        for k in self.overrides.keys() {
            if !self.raw.entries.contains_key(k) {
                keys.push(k.clone());
            }
        }
        keys.sort();
        keys.dedup();
        let mut out = String::new();
        for key in keys {
            let (_, v) = self.lookup(&key).unwrap();
            // resolve numeric values so `2 GHz` and `2e9` digest identically
            let rendered = match parse_list(&v) {
                Ok(nums) => nums
                    .iter()
                    .map(|n| format!("{n:.17e}"))
                    .collect::<Vec<_>>()
                    .join(","),
                Err(_) => v.clone(),
            };
            let _ = writeln!(out, "{key}={rendered}");
        }
        out
    }
}

/// Audit record written next to experiment outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// SHA-256 over the canonical config rendering (overrides applied).
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: &'static str,
    pub started_unix_secs: u64,
    pub finished_unix_secs: u64,
    pub outputs: Vec<String>,
    /// Non-fatal per-run failures observed during the sweep.
    pub failures: Vec<String>,
}

impl RunManifest {
    pub fn new(reader: &ConfigReader, seed: u64) -> Self {
        RunManifest {
            config_digest: digest_hex(&reader.canonical()),
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            started_unix_secs: unix_now(),
            finished_unix_secs: 0,
            outputs: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix_secs = unix_now();
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn digest_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// The default parameter file shipped with the tool.
pub const DEFAULT_CONFIG: &str = "\
# Default scenario parameters.
scenario.nt = 4
scenario.m = 8
scenario.k = 3
scenario.r = 50
scenario.fc = 2.4 GHz
scenario.alpha_l = 2.1
scenario.alpha_n = 4
scenario.beta = 1
scenario.sigma2 = -90 dBm
scenario.gamma = 2 dB
scenario.kappa = 0
scenario.seed = 1
algo.eps = 1e-5
algo.mu = 0.5
sweep.var = gamma_db
sweep.values = 0,2,4,6
sweep.algorithms = penalty-altmin
sweep.drops = 20
sweep.thresholds = 0,2,4,6
power.eta = 1
power.ps = 0.034
power.prf = 0.08
power.pirs = 0.005
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_suffixes_convert_at_parse() {
        assert_eq!(parse_scalar("2.4 GHz").unwrap(), 2.4e9);
        assert!((parse_scalar("-90 dBm").unwrap() - 1e-12).abs() < 1e-27);
        assert!((parse_scalar("2 dB").unwrap() - 10f64.powf(0.2)).abs() < 1e-12);
        assert_eq!(parse_scalar("100 Hz").unwrap(), 100.0);
        assert_eq!(parse_scalar("3.5").unwrap(), 3.5);
        assert!(parse_scalar("banana").is_err());
    }

    #[test]
    fn default_config_matches_builtin_scenario() {
        let raw = RawConfig::parse(DEFAULT_CONFIG).unwrap();
        let reader = ConfigReader::new(&raw);
        let cfg = reader.scenario().unwrap();
        let d = ScenarioConfig::default();
        assert_eq!(cfg.nt, d.nt);
        assert_eq!(cfg.m_l, d.m_l);
        assert_eq!(cfg.fc, 2.4e9);
        assert!((cfg.sigma2[0] - 1e-12).abs() < 1e-27);
        assert!((cfg.gamma[0] - 10f64.powf(0.2)).abs() < 1e-12);
        assert_eq!(cfg.eps, 1e-5);
        let spec = reader.experiment(cfg).unwrap();
        assert_eq!(spec.values, vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(spec.drops, 20);
    }

    #[test]
    fn malformed_lines_report_line_and_field() {
        let err = RawConfig::parse("scenario.nt 4").unwrap_err();
        assert_eq!(err.line, 1);
        let raw = RawConfig::parse("\n\nscenario.nt = pear").unwrap();
        let err = ConfigReader::new(&raw).scenario().unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.field, "scenario.nt");
    }

    #[test]
    fn overrides_take_precedence_and_change_digest() {
        let raw = RawConfig::parse(DEFAULT_CONFIG).unwrap();
        let mut reader = ConfigReader::new(&raw);
        let base_digest = digest_hex(&reader.canonical());
        reader.set_override("scenario.kappa", "0.1".into());
        let cfg = reader.scenario().unwrap();
        assert_eq!(cfg.kappa, 0.1);
        assert_ne!(digest_hex(&reader.canonical()), base_digest);
    }

    #[test]
    fn digest_insensitive_to_unit_spelling() {
        let a = RawConfig::parse("scenario.fc = 2.4 GHz").unwrap();
        let b = RawConfig::parse("scenario.fc = 2.4e9").unwrap();
        assert_eq!(
            digest_hex(&ConfigReader::new(&a).canonical()),
            digest_hex(&ConfigReader::new(&b).canonical())
        );
    }

    #[test]
    fn unknown_algorithm_is_a_field_error() {
        let raw = RawConfig::parse("sweep.algorithms = penalty-altmin, magic").unwrap();
        let reader = ConfigReader::new(&raw);
        let cfg = reader.scenario().unwrap();
        let err = reader.experiment(cfg).unwrap_err();
        assert_eq!(err.field, "sweep.algorithms");
    }
}
