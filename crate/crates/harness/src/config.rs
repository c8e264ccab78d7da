//! `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. `model` selects the
//! defaults; every other key overrides one of them. Keys that belong to a
//! different model are rejected like unknown keys.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use otd_core::dmd::DmdRanking;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default(), key.as_ref().map(|k| format!("{k}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            key: key.map(str::to_string),
            message: message.into(),
        }
    }

    fn key(key: &str, message: impl Into<String>) -> Self {
        Self {
            line: None,
            key: Some(key.to_string()),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Prototype,
    Kolmogorov,
    Mnls,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Prototype => "prototype",
            ModelKind::Kolmogorov => "kolmogorov",
            ModelKind::Mnls => "mnls",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Prototype => 1,
            ModelKind::Kolmogorov => 2,
            ModelKind::Mnls => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        [ModelKind::Prototype, ModelKind::Kolmogorov, ModelKind::Mnls]
            .into_iter()
            .find(|m| m.tag() == tag)
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "prototype" => Ok(ModelKind::Prototype),
            "kolmogorov" => Ok(ModelKind::Kolmogorov),
            "mnls" => Ok(ModelKind::Mnls),
            other => Err(format!("unknown model {other:?} (prototype | kolmogorov | mnls)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSettings {
    pub alpha: f64,
    pub omega: f64,
    pub lambda: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KolmogorovSettings {
    pub n: usize,
    pub re: f64,
    pub resolution: usize,
    pub energy_scale: f64,
    pub dmd_indicator: bool,
    pub dmd_count: usize,
    pub dmd_snapshots: usize,
    pub dmd_spacing: f64,
    pub dmd_ranking: DmdRanking,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnlsSettings {
    pub length: f64,
    pub modes: usize,
    pub epsilon: f64,
    pub sigma: f64,
    pub etd_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSettings {
    Prototype(PrototypeSettings),
    Kolmogorov(KolmogorovSettings),
    Mnls(MnlsSettings),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSettings,
    /// Number of OTD modes.
    pub r: usize,
    pub seed: u64,
    pub t_end: f64,
    pub emit_dt: f64,
    pub reorth_dt: f64,
    /// State-only integration before the modes are attached.
    pub spinup: f64,
    /// Records before this time are not written.
    pub record_start: f64,
    /// Spacing of binary field snapshots; 0 disables them.
    pub snapshot_dt: f64,
    pub rtol: f64,
    pub atol: f64,
    pub dt_max: f64,
    pub out: PathBuf,
}

/// Every recognized key, in serialization order, with the models it applies to.
const COMMON_KEYS: &[&str] = &[
    "model",
    "r",
    "seed",
    "t_end",
    "emit_dt",
    "reorth_dt",
    "spinup",
    "record_start",
    "snapshot_dt",
    "rtol",
    "atol",
    "dt_max",
    "out",
];
const PROTOTYPE_KEYS: &[&str] = &["alpha", "omega", "lambda", "beta"];
const KOLMOGOROV_KEYS: &[&str] = &[
    "n",
    "Re",
    "resolution",
    "energy_scale",
    "dmd_indicator",
    "dmd_count",
    "dmd_snapshots",
    "dmd_spacing",
    "dmd_ranking",
];
const MNLS_KEYS: &[&str] = &["L", "modes", "epsilon", "sigma", "etd_dt"];

fn model_keys(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Prototype => PROTOTYPE_KEYS,
        ModelKind::Kolmogorov => KOLMOGOROV_KEYS,
        ModelKind::Mnls => MNLS_KEYS,
    }
}

impl RunConfig {
    pub fn defaults(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Prototype => Self {
                model: ModelSettings::Prototype(PrototypeSettings {
                    alpha: 0.01,
                    omega: std::f64::consts::TAU,
                    lambda: 0.1,
                    beta: 0.1,
                }),
                r: 1,
                seed: 1,
                t_end: 1200.0,
                emit_dt: 0.1,
                reorth_dt: 1.0,
                spinup: 0.0,
                record_start: 0.0,
                snapshot_dt: 0.0,
                rtol: 1e-9,
                atol: 1e-9,
                dt_max: 0.1,
                out: PathBuf::from("runs/prototype"),
            },
            ModelKind::Kolmogorov => Self {
                model: ModelSettings::Kolmogorov(KolmogorovSettings {
                    n: 4,
                    re: 40.0,
                    resolution: 128,
                    energy_scale: 0.3,
                    dmd_indicator: false,
                    dmd_count: 8,
                    dmd_snapshots: 500,
                    dmd_spacing: 0.2,
                    dmd_ranking: DmdRanking::Amplitude,
                }),
                r: 8,
                seed: 1,
                t_end: 5500.0,
                emit_dt: 0.2,
                reorth_dt: 0.2,
                spinup: 450.0,
                record_start: 500.0,
                snapshot_dt: 0.0,
                rtol: 1e-7,
                atol: 1e-7,
                dt_max: 0.1,
                out: PathBuf::from("runs/kolmogorov"),
            },
            ModelKind::Mnls => Self {
                model: ModelSettings::Mnls(MnlsSettings {
                    length: 256.0 * std::f64::consts::PI,
                    modes: 2048,
                    epsilon: 0.05,
                    sigma: 0.2,
                    etd_dt: 0.025,
                }),
                r: 1,
                seed: 1,
                t_end: 1000.0,
                emit_dt: 0.5,
                reorth_dt: 0.5,
                spinup: 0.0,
                record_start: 0.0,
                snapshot_dt: 0.0,
                rtol: 1e-7,
                atol: 1e-7,
                dt_max: 0.1,
                out: PathBuf::from("runs/mnls"),
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.model {
            ModelSettings::Prototype(_) => ModelKind::Prototype,
            ModelSettings::Kolmogorov(_) => ModelKind::Kolmogorov,
            ModelSettings::Mnls(_) => ModelKind::Mnls,
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value
                .parse()
                .map_err(|_| ConfigError::key(key, format!("cannot parse {value:?}")))
        }
        match key {
            "r" => self.r = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "t_end" => self.t_end = num(key, value)?,
            "emit_dt" => self.emit_dt = num(key, value)?,
            "reorth_dt" => self.reorth_dt = num(key, value)?,
            "spinup" => self.spinup = num(key, value)?,
            "record_start" => self.record_start = num(key, value)?,
            "snapshot_dt" => self.snapshot_dt = num(key, value)?,
            "rtol" => self.rtol = num(key, value)?,
            "atol" => self.atol = num(key, value)?,
            "dt_max" => self.dt_max = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => match &mut self.model {
                ModelSettings::Prototype(p) => match key {
                    "alpha" => p.alpha = num(key, value)?,
                    "omega" => p.omega = num(key, value)?,
                    "lambda" => p.lambda = num(key, value)?,
                    "beta" => p.beta = num(key, value)?,
                    _ => unreachable!("key list checked by caller"),
                },
                ModelSettings::Kolmogorov(k) => match key {
                    "n" => k.n = num(key, value)?,
                    "Re" => k.re = num(key, value)?,
                    "resolution" => k.resolution = num(key, value)?,
                    "energy_scale" => k.energy_scale = num(key, value)?,
                    "dmd_indicator" => k.dmd_indicator = num(key, value)?,
                    "dmd_count" => k.dmd_count = num(key, value)?,
                    "dmd_snapshots" => k.dmd_snapshots = num(key, value)?,
                    "dmd_spacing" => k.dmd_spacing = num(key, value)?,
                    "dmd_ranking" => {
                        k.dmd_ranking = match value {
                            "amplitude" => DmdRanking::Amplitude,
                            "ritz" => DmdRanking::RitzModulus,
                            _ => return Err(ConfigError::key(key, "expected amplitude | ritz")),
                        }
                    }
                    _ => unreachable!("key list checked by caller"),
                },
                ModelSettings::Mnls(m) => match key {
                    "L" => m.length = num(key, value)?,
                    "modes" => m.modes = num(key, value)?,
                    "epsilon" => m.epsilon = num(key, value)?,
                    "sigma" => m.sigma = num(key, value)?,
                    "etd_dt" => m.etd_dt = num(key, value)?,
                    _ => unreachable!("key list checked by caller"),
                },
            },
        }
        Ok(())
    }

    /// Checks ranges and cross-field constraints.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::key(key, format!("must be positive, got {v}")))
            }
        };
        let multiple = |key: &str, v: f64, of: f64, of_name: &str| {
            let ratio = v / of;
            if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) && ratio.round() >= 1.0 {
                Ok(())
            } else {
                Err(ConfigError::key(key, format!("must be a positive multiple of {of_name} = {of}")))
            }
        };
        positive("t_end", self.t_end)?;
        positive("emit_dt", self.emit_dt)?;
        positive("reorth_dt", self.reorth_dt)?;
        positive("rtol", self.rtol)?;
        positive("atol", self.atol)?;
        positive("dt_max", self.dt_max)?;
        if self.r == 0 {
            return Err(ConfigError::key("r", "at least one OTD mode is required"));
        }
        if !(self.spinup >= 0.0) {
            return Err(ConfigError::key("spinup", "must be non-negative"));
        }
        if !(self.record_start >= self.spinup) {
            return Err(ConfigError::key("record_start", "must not precede spinup"));
        }
        if !(self.t_end > self.record_start) {
            return Err(ConfigError::key("t_end", "must exceed record_start"));
        }
        if !(self.snapshot_dt >= 0.0) {
            return Err(ConfigError::key("snapshot_dt", "must be non-negative"));
        }
        if self.snapshot_dt > 0.0 {
            multiple("snapshot_dt", self.snapshot_dt, self.emit_dt, "emit_dt")?;
        }
        match &self.model {
            ModelSettings::Prototype(p) => {
                positive("alpha", p.alpha)?;
                positive("omega", p.omega)?;
                positive("lambda", p.lambda)?;
                positive("beta", p.beta)?;
                if self.r > 3 {
                    return Err(ConfigError::key("r", "the prototype has dimension 3"));
                }
            }
            ModelSettings::Kolmogorov(k) => {
                positive("Re", k.re)?;
                positive("energy_scale", k.energy_scale)?;
                if k.resolution < 8 || k.resolution % 2 != 0 {
                    return Err(ConfigError::key("resolution", "must be even and >= 8"));
                }
                let cut = k.resolution / 3;
                if k.n == 0 || k.n > cut {
                    return Err(ConfigError::key("n", format!("must lie in 1..={cut} at this resolution")));
                }
                if self.r > cut {
                    return Err(ConfigError::key("r", format!("at most {cut} modes at this resolution")));
                }
                if k.dmd_indicator {
                    multiple("dmd_spacing", k.dmd_spacing, self.emit_dt, "emit_dt")?;
                    if k.dmd_snapshots < 2 {
                        return Err(ConfigError::key("dmd_snapshots", "need at least 2"));
                    }
                    if k.dmd_count == 0 {
                        return Err(ConfigError::key("dmd_count", "must be positive"));
                    }
                }
            }
            ModelSettings::Mnls(m) => {
                positive("L", m.length)?;
                positive("epsilon", m.epsilon)?;
                positive("sigma", m.sigma)?;
                positive("etd_dt", m.etd_dt)?;
                if m.modes < 8 || m.modes % 2 != 0 {
                    return Err(ConfigError::key("modes", "must be even and >= 8"));
                }
                if self.r > m.modes / 3 {
                    return Err(ConfigError::key("r", "too many modes for the grid"));
                }
                multiple("emit_dt", self.emit_dt, m.etd_dt, "etd_dt")?;
                multiple("reorth_dt", self.reorth_dt, m.etd_dt, "etd_dt")?;
                if self.spinup > 0.0 {
                    multiple("spinup", self.spinup, m.etd_dt, "etd_dt")?;
                }
                if self.t_end > 0.0 {
                    multiple("t_end", self.t_end, m.etd_dt, "etd_dt")?;
                }
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("model", self.kind().name().to_string());
        kv("r", self.r.to_string());
        kv("seed", self.seed.to_string());
        kv("t_end", self.t_end.to_string());
        kv("emit_dt", self.emit_dt.to_string());
        kv("reorth_dt", self.reorth_dt.to_string());
        kv("spinup", self.spinup.to_string());
        kv("record_start", self.record_start.to_string());
        kv("snapshot_dt", self.snapshot_dt.to_string());
        kv("rtol", self.rtol.to_string());
        kv("atol", self.atol.to_string());
        kv("dt_max", self.dt_max.to_string());
        kv("out", self.out.display().to_string());
        match &self.model {
            ModelSettings::Prototype(p) => {
                kv("alpha", p.alpha.to_string());
                kv("omega", p.omega.to_string());
                kv("lambda", p.lambda.to_string());
                kv("beta", p.beta.to_string());
            }
            ModelSettings::Kolmogorov(k) => {
                kv("n", k.n.to_string());
                kv("Re", k.re.to_string());
                kv("resolution", k.resolution.to_string());
                kv("energy_scale", k.energy_scale.to_string());
                kv("dmd_indicator", k.dmd_indicator.to_string());
                kv("dmd_count", k.dmd_count.to_string());
                kv("dmd_snapshots", k.dmd_snapshots.to_string());
                kv("dmd_spacing", k.dmd_spacing.to_string());
                let ranking = match k.dmd_ranking {
                    DmdRanking::Amplitude => "amplitude",
                    DmdRanking::RitzModulus => "ritz",
                };
                kv("dmd_ranking", ranking.to_string());
            }
            ModelSettings::Mnls(m) => {
                kv("L", m.length.to_string());
                kv("modes", m.modes.to_string());
                kv("epsilon", m.epsilon.to_string());
                kv("sigma", m.sigma.to_string());
                kv("etd_dt", m.etd_dt.to_string());
            }
        }
        s
    }
}

/// Parses a configuration. `model` is required; everything else defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, None, format!("expected `key = value`, got {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::at(line, Some(key), "empty key or value"));
        }
        if entries.iter().any(|(_, k, _)| k == key) {
            return Err(ConfigError::at(line, Some(key), "duplicate key"));
        }
        entries.push((line, key.to_string(), value.to_string()));
    }
    let (_, _, model) = entries
        .iter()
        .find(|(_, k, _)| k == "model")
        .ok_or_else(|| ConfigError::key("model", "missing (prototype | kolmogorov | mnls)"))?;
    let line_of_model = entries.iter().find(|(_, k, _)| k == "model").map(|e| e.0).unwrap_or(0);
    let kind: ModelKind = model
        .parse()
        .map_err(|e: String| ConfigError::at(line_of_model, Some("model"), e))?;
    let mut cfg = RunConfig::defaults(kind);
    for (line, key, value) in &entries {
        if key == "model" {
            continue;
        }
        let known_here = COMMON_KEYS.contains(&key.as_str()) || model_keys(kind).contains(&key.as_str());
        if !known_here {
            let elsewhere = [ModelKind::Prototype, ModelKind::Kolmogorov, ModelKind::Mnls]
                .into_iter()
                .find(|m| model_keys(*m).contains(&key.as_str()));
            let msg = match elsewhere {
                Some(m) => format!("key applies to model {} only", m.name()),
                None => "unknown key".to_string(),
            };
            return Err(ConfigError::at(*line, Some(key), msg));
        }
        cfg.set(key, value).map_err(|e| ConfigError { line: Some(*line), ..e })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Documented defaults for `--help`.
pub fn defaults_help() -> String {
    let mut s = String::from("Configuration defaults per model:\n");
    for kind in [ModelKind::Prototype, ModelKind::Kolmogorov, ModelKind::Mnls] {
        let _ = writeln!(s, "\n[{}]", kind.name());
        for line in RunConfig::defaults(kind).serialize().lines().skip(1) {
            let _ = writeln!(s, "  {line}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_alone_gives_defaults() {
        for kind in ["prototype", "kolmogorov", "mnls"] {
            let cfg = parse_config(&format!("model = {kind}\n")).unwrap();
            assert_eq!(cfg, RunConfig::defaults(kind.parse().unwrap()));
        }
    }

    #[test]
    fn negative_reynolds_names_key() {
        let err = parse_config("model = kolmogorov\nRe = -1\n").unwrap_err();
        assert_eq!(err.key.as_deref(), Some("Re"));
        assert!(err.to_string().contains("Re"));
    }

    #[test]
    fn unknown_and_foreign_keys_report_line() {
        let err = parse_config("# c\nmodel = mnls\n\nfoo = 1\n").unwrap_err();
        assert_eq!(err.line, Some(4));
        let err = parse_config("model = prototype\nRe = 10\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("kolmogorov"));
        let err = parse_config("model = prototype\nr = two\n").unwrap_err();
        assert_eq!((err.line, err.key.as_deref()), (Some(2), Some("r")));
        assert!(parse_config("r = 1\n").is_err());
        assert!(parse_config("model = prototype\nr = 1\nr = 1\n").is_err());
    }

    #[test]
    fn round_trip() {
        let text = "model = kolmogorov # chaotic\nRe = 55.5\nr = 4\nseed = 17\ndmd_indicator = true\ndmd_ranking = ritz\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(parse_config(&cfg.serialize()).unwrap(), cfg);
        let cfg = parse_config("model = mnls\nsigma = 0.25\nt_end = 10\n").unwrap();
        assert_eq!(parse_config(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn cross_field_checks() {
        assert!(parse_config("model = mnls\nemit_dt = 0.03\n").is_err());
        assert!(parse_config("model = kolmogorov\nresolution = 32\nn = 11\n").is_err());
        assert!(parse_config("model = prototype\nr = 4\n").is_err());
        assert!(parse_config("model = kolmogorov\nrecord_start = 100\nspinup = 200\n").is_err());
    }
}
