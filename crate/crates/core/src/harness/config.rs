//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default, so an empty file is a valid config. `auto` selects the derived
//! default for `sigma`, `adversary_param` and `step0`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::learner::{HingeParams, PipelineConfig};
use crate::synth::{AdversaryStrategy, Family, FlipPolicy, MixtureOptions};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{field}`: {value:?} ({reason})")]
    Invalid { field: String, value: String, reason: String },
    #[error("duplicate config key `{0}`")]
    Duplicate(String),
}

impl ConfigError {
    fn invalid(field: &str, value: impl ToString, reason: impl ToString) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        }
    }

    /// Name of the offending field, when the error is about one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(k) | ConfigError::Duplicate(k) => Some(k),
            ConfigError::Invalid { field, .. } => Some(field),
            ConfigError::Syntax { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Malicious oracle, full filter + removal + hinge pipeline.
    Malicious,
    /// Clean draws with adversarially flipped labels, filter + hinge.
    LabelFlip,
}

impl NoiseModel {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Malicious => "malicious",
            NoiseModel::LabelFlip => "label-flip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub s: usize,
    pub k: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub gamma: f64,
    pub r: f64,
    pub eta: f64,
    pub eta0: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_prime: f64,
    /// Component scale; `None` means `1/sqrt(d)`.
    pub sigma: Option<f64>,
    pub families: Vec<Family>,
    pub noise: NoiseModel,
    pub adversary: String,
    pub adversary_param: Option<f64>,
    pub flip_policy: FlipPolicy,
    pub seed: u64,
    pub max_iters: usize,
    pub step0: Option<f64>,
    pub decay: f64,
    pub stationarity_tol: f64,
    pub smooth_levels: usize,
    pub smooth_iters: usize,
    pub removal_tol: f64,
    pub ascent_max_iter: usize,
    pub use_filter: bool,
    pub use_removal: bool,
    /// When false, `wall_ms` is written as 0 so result rows are
    /// byte-reproducible.
    pub record_wall_time: bool,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let hinge = HingeParams::new(0.3);
        Self {
            d: 200,
            s: 5,
            k: 2,
            n_train: 2000,
            n_test: 10_000,
            gamma: 0.3,
            r: 0.6,
            eta: 0.1,
            eta0: 0.1,
            epsilon: 0.05,
            delta: 0.05,
            delta_prime: 0.05,
            sigma: None,
            families: MixtureOptions::default().families,
            noise: NoiseModel::Malicious,
            adversary: "sparse-spike".into(),
            adversary_param: None,
            flip_policy: FlipPolicy::SmallestMarginFirst,
            seed: 0,
            max_iters: hinge.max_iters,
            step0: None,
            decay: hinge.decay,
            stationarity_tol: hinge.stationarity_tol,
            smooth_levels: hinge.smooth_levels,
            smooth_iters: hinge.smooth_iters,
            removal_tol: 1e-3,
            ascent_max_iter: 500,
            use_filter: true,
            use_removal: true,
            record_wall_time: true,
            out: PathBuf::from("out"),
        }
    }
}

/// Every accepted key, in canonical order.
pub const KEYS: &[&str] = &[
    "d",
    "s",
    "k",
    "n_train",
    "n_test",
    "gamma",
    "r",
    "eta",
    "eta0",
    "epsilon",
    "delta",
    "delta_prime",
    "sigma",
    "families",
    "noise",
    "adversary",
    "adversary_param",
    "flip_policy",
    "seed",
    "max_iters",
    "step0",
    "decay",
    "stationarity_tol",
    "smooth_levels",
    "smooth_iters",
    "removal_tol",
    "ascent_max_iter",
    "use_filter",
    "use_removal",
    "record_wall_time",
    "out",
];

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        };
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::Duplicate(key));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(field: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::invalid(field, v, "not a number"))
}

fn real(field: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = num(field, v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::invalid(field, v, "not finite"))
    }
}

fn auto_real(field: &str, v: &str) -> Result<Option<f64>, ConfigError> {
    if v == "auto" {
        Ok(None)
    } else {
        real(field, v).map(Some)
    }
}

fn boolean(field: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::invalid(field, v, "expected true or false")),
    }
}

fn fmt_auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::invalid("config", path.display(), e))?;
        Self::parse(&text)
    }

    /// Sets one field from its text form. Does not re-validate.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "d" => self.d = num(key, v)?,
            "s" => self.s = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "n_train" => self.n_train = num(key, v)?,
            "n_test" => self.n_test = num(key, v)?,
            "gamma" => self.gamma = real(key, v)?,
            "r" => self.r = real(key, v)?,
            "eta" => self.eta = real(key, v)?,
            "eta0" => self.eta0 = real(key, v)?,
            "epsilon" => self.epsilon = real(key, v)?,
            "delta" => self.delta = real(key, v)?,
            "delta_prime" => self.delta_prime = real(key, v)?,
            "sigma" => self.sigma = auto_real(key, v)?,
            "families" => {
                self.families = v
                    .split('+')
                    .map(|f| {
                        Family::parse(f.trim())
                            .ok_or_else(|| ConfigError::invalid(key, f, "unknown family"))
                    })
                    .collect::<Result<_, _>>()?
            }
            "noise" => {
                self.noise = match v {
                    "malicious" => NoiseModel::Malicious,
                    "label-flip" => NoiseModel::LabelFlip,
                    _ => return Err(ConfigError::invalid(key, v, "expected malicious or label-flip")),
                }
            }
            "adversary" => {
                if AdversaryStrategy::from_kind(v, None, 1.0).is_none() {
                    return Err(ConfigError::invalid(key, v, "unknown strategy"));
                }
                self.adversary = v.to_string();
            }
            "adversary_param" => self.adversary_param = auto_real(key, v)?,
            "flip_policy" => {
                self.flip_policy = match v {
                    "smallest-margin-first" => FlipPolicy::SmallestMarginFirst,
                    "random" => FlipPolicy::Random,
                    _ => {
                        return Err(ConfigError::invalid(
                            key,
                            v,
                            "expected smallest-margin-first or random",
                        ))
                    }
                }
            }
            "seed" => self.seed = num(key, v)?,
            "max_iters" => self.max_iters = num(key, v)?,
            "step0" => self.step0 = auto_real(key, v)?,
            "decay" => self.decay = real(key, v)?,
            "stationarity_tol" => self.stationarity_tol = real(key, v)?,
            "smooth_levels" => self.smooth_levels = num(key, v)?,
            "smooth_iters" => self.smooth_iters = num(key, v)?,
            "removal_tol" => self.removal_tol = real(key, v)?,
            "ascent_max_iter" => self.ascent_max_iter = num(key, v)?,
            "use_filter" => self.use_filter = boolean(key, v)?,
            "use_removal" => self.use_removal = boolean(key, v)?,
            "record_wall_time" => self.record_wall_time = boolean(key, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Text form of one field, in the syntax accepted by [`Self::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "d" => self.d.to_string(),
            "s" => self.s.to_string(),
            "k" => self.k.to_string(),
            "n_train" => self.n_train.to_string(),
            "n_test" => self.n_test.to_string(),
            "gamma" => self.gamma.to_string(),
            "r" => self.r.to_string(),
            "eta" => self.eta.to_string(),
            "eta0" => self.eta0.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "delta" => self.delta.to_string(),
            "delta_prime" => self.delta_prime.to_string(),
            "sigma" => fmt_auto(self.sigma),
            "families" => self.families.iter().map(|f| f.name()).collect::<Vec<_>>().join("+"),
            "noise" => self.noise.name().to_string(),
            "adversary" => self.adversary.clone(),
            "adversary_param" => fmt_auto(self.adversary_param),
            "flip_policy" => match self.flip_policy {
                FlipPolicy::SmallestMarginFirst => "smallest-margin-first".into(),
                FlipPolicy::Random => "random".into(),
            },
            "seed" => self.seed.to_string(),
            "max_iters" => self.max_iters.to_string(),
            "step0" => fmt_auto(self.step0),
            "decay" => self.decay.to_string(),
            "stationarity_tol" => self.stationarity_tol.to_string(),
            "smooth_levels" => self.smooth_levels.to_string(),
            "smooth_iters" => self.smooth_iters.to_string(),
            "removal_tol" => self.removal_tol.to_string(),
            "ascent_max_iter" => self.ascent_max_iter.to_string(),
            "use_filter" => self.use_filter.to_string(),
            "use_removal" => self.use_removal.to_string(),
            "record_wall_time" => self.record_wall_time.to_string(),
            "out" => self.out.display().to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |f: &str, v: String, why: &str| Err(ConfigError::invalid(f, v, why));
        if self.d == 0 {
            return fail("d", self.d.to_string(), "must be at least 1");
        }
        if self.s == 0 || self.s > self.d {
            return fail("s", self.s.to_string(), "must satisfy 1 <= s <= d");
        }
        if self.k == 0 {
            return fail("k", self.k.to_string(), "must be at least 1");
        }
        if self.n_train == 0 {
            return fail("n_train", "0".into(), "must be at least 1");
        }
        if self.n_test == 0 {
            return fail("n_test", "0".into(), "must be at least 1");
        }
        if !(self.gamma > 0.0) {
            return fail("gamma", self.gamma.to_string(), "must be positive");
        }
        if !(self.r >= 0.0) {
            return fail("r", self.r.to_string(), "must be nonnegative");
        }
        if !(0.0..=0.5).contains(&self.eta) {
            return fail("eta", self.eta.to_string(), "must lie in [0, 0.5]");
        }
        if !(0.0..=0.5).contains(&self.eta0) {
            return fail("eta0", self.eta0.to_string(), "must lie in [0, 0.5]");
        }
        if self.eta > self.eta0 {
            return fail("eta", self.eta.to_string(), "must not exceed eta0");
        }
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta), ("delta_prime", self.delta_prime)] {
            if !(v > 0.0 && v < 1.0) {
                return fail(name, v.to_string(), "must lie in (0, 1)");
            }
        }
        if let Some(sig) = self.sigma {
            if !(sig > 0.0) {
                return fail("sigma", sig.to_string(), "must be positive");
            }
        }
        if self.families.is_empty() {
            return fail("families", String::new(), "must name at least one family");
        }
        if let Some(st) = self.step0 {
            if !(st > 0.0) {
                return fail("step0", st.to_string(), "must be positive");
            }
        }
        if !(self.decay >= 0.0) {
            return fail("decay", self.decay.to_string(), "must be nonnegative");
        }
        if !(self.stationarity_tol > 0.0) {
            return fail("stationarity_tol", self.stationarity_tol.to_string(), "must be positive");
        }
        if !(self.removal_tol > 0.0) {
            return fail("removal_tol", self.removal_tol.to_string(), "must be positive");
        }
        Ok(())
    }

    /// Non-fatal findings about the parameter regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.r > 2.0 * self.gamma {
            w.push(format!("r = {} exceeds 2 gamma = {}", self.r, 2.0 * self.gamma));
        }
        w
    }

    pub fn sigma_value(&self) -> f64 {
        self.sigma.unwrap_or(1.0 / (self.d as f64).sqrt())
    }

    pub fn strategy(&self) -> AdversaryStrategy {
        AdversaryStrategy::from_kind(&self.adversary, self.adversary_param, self.gamma)
            .expect("adversary validated on parse")
    }

    pub fn mixture_options(&self) -> MixtureOptions {
        MixtureOptions { sigma: Some(self.sigma_value()), families: self.families.clone() }
    }

    pub fn hinge_params(&self) -> HingeParams {
        HingeParams {
            step0: self.step0,
            decay: self.decay,
            max_iters: self.max_iters,
            stationarity_tol: self.stationarity_tol,
            smooth_levels: self.smooth_levels,
            smooth_iters: self.smooth_iters,
            ..HingeParams::new(self.gamma)
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            delta_prime: self.delta_prime,
            hinge: self.hinge_params(),
            removal_tol: self.removal_tol,
            ascent_max_iter: self.ascent_max_iter,
            use_filter: self.use_filter,
            use_removal: self.use_removal,
            ..PipelineConfig::new(self.s, self.gamma, self.r, self.sigma_value(), self.eta0)
        }
    }

    /// Canonical `key = value` text covering every field.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("every key has a value")))
            .collect()
    }

    /// SHA-256 of the canonical text without the output directory, so runs
    /// that differ only in where they write share a hash.
    pub fn hash(&self) -> String {
        let text: String = KEYS
            .iter()
            .filter(|&&k| k != "out")
            .map(|k| format!("{k} = {}\n", self.get(k).expect("every key has a value")))
            .collect();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn text_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("families", "gaussian+uniform-ball").unwrap();
        cfg.set("sigma", "0.07").unwrap();
        cfg.set("noise", "label-flip").unwrap();
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::parse("gamma = -1").unwrap_err();
        assert_eq!(e.field(), Some("gamma"));
        let e = ExperimentConfig::parse("eta = 0.2\neta0 = 0.1").unwrap_err();
        assert_eq!(e.field(), Some("eta"));
        let e = ExperimentConfig::parse("nope = 1").unwrap_err();
        assert_eq!(e.field(), Some("nope"));
        let e = ExperimentConfig::parse("d = ten").unwrap_err();
        assert_eq!(e.field(), Some("d"));
        assert!(matches!(ExperimentConfig::parse("d 10"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("d=1\nd=2"), Err(ConfigError::Duplicate(_))));
    }

    #[test]
    fn hash_ignores_out_dir() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn wide_radius_is_flagged() {
        let cfg = ExperimentConfig { r: 1.0, gamma: 0.3, ..Default::default() };
        assert_eq!(cfg.warnings().len(), 1);
        assert!(cfg.validate().is_ok());
    }
}
