use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::strategies::{Prior, StrategyConfig, StrategyKind};
use crate::stream::TiePolicy;
use crate::types::Alpha;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Passive,
    Aggressive,
    Binomial,
    MixtureUniform,
    MixtureBeta,
    MimickedLogopt,
    BesagClifford,
    Permutation,
}

/// One method evaluated in an experiment: a betting strategy, the
/// Besag–Clifford test, or the fixed permutation test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Prior>,
    /// Besag–Clifford loss budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<u64>,
    /// Per-method permutation budget; defaults to the experiment's.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// Stochastic rounding of the stopped e-value.
    #[serde(default)]
    pub rounding: bool,
    /// Futility stopping at wealth below alpha.
    #[serde(default = "yes")]
    pub futility: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn yes() -> bool {
    true
}

impl MethodConfig {
    pub const KEYS: &'static [&'static str] = &["kind", "p", "c", "a", "b", "prior", "h", "T", "rounding", "futility", "label"];

    pub fn new(kind: MethodKind) -> Self {
        Self {
            kind,
            p: None,
            c: None,
            a: None,
            b: None,
            prior: None,
            h: None,
            horizon: None,
            rounding: false,
            futility: true,
            label: None,
        }
    }

    pub fn from_strategy(cfg: &StrategyConfig) -> Self {
        let kind = match cfg.kind {
            StrategyKind::Passive => MethodKind::Passive,
            StrategyKind::Aggressive => MethodKind::Aggressive,
            StrategyKind::Binomial => MethodKind::Binomial,
            StrategyKind::MixtureUniform => MethodKind::MixtureUniform,
            StrategyKind::MixtureBeta => MethodKind::MixtureBeta,
            StrategyKind::MimickedLogopt => MethodKind::MimickedLogopt,
        };
        Self {
            p: cfg.p,
            c: cfg.c,
            a: cfg.a,
            b: cfg.b,
            prior: cfg.prior,
            ..Self::new(kind)
        }
    }

    pub fn besag_clifford(h: u64) -> Self {
        Self {
            h: Some(h),
            ..Self::new(MethodKind::BesagClifford)
        }
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_rounding(mut self, rounding: bool) -> Self {
        self.rounding = rounding;
        self
    }

    pub fn with_futility(mut self, futility: bool) -> Self {
        self.futility = futility;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Strategy part of a betting method; `None` for the classical ones.
    pub fn strategy_config(&self) -> Option<StrategyConfig> {
        let kind = match self.kind {
            MethodKind::Passive => StrategyKind::Passive,
            MethodKind::Aggressive => StrategyKind::Aggressive,
            MethodKind::Binomial => StrategyKind::Binomial,
            MethodKind::MixtureUniform => StrategyKind::MixtureUniform,
            MethodKind::MixtureBeta => StrategyKind::MixtureBeta,
            MethodKind::MimickedLogopt => StrategyKind::MimickedLogopt,
            MethodKind::BesagClifford | MethodKind::Permutation => return None,
        };
        Some(StrategyConfig {
            kind,
            p: self.p,
            c: self.c,
            a: self.a,
            b: self.b,
            alpha: None,
            prior: self.prior,
        })
    }

    /// Label used in output tables.
    pub fn display_label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let kind = serde_json::to_value(self.kind).unwrap();
        let mut s = kind.as_str().unwrap().to_string();
        for (name, v) in [("p", self.p), ("c", self.c), ("a", self.a), ("b", self.b)] {
            if let Some(v) = v {
                s.push_str(&format!("_{name}{v}"));
            }
        }
        if let Some(h) = self.h {
            s.push_str(&format!("_h{h}"));
        }
        if let Some(t) = self.horizon {
            s.push_str(&format!("_T{t}"));
        }
        if self.rounding {
            s.push_str("+rounding");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    #[default]
    Normal,
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    TwoSample,
    CountTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

fn default_m() -> u64 {
    500
}

fn default_treatment_prob() -> f64 {
    0.5
}

/// Two-sample simulation: `m` trials of `n` units for each effect `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default = "default_m")]
    pub m: u64,
    pub n: u64,
    #[serde(deserialize_with = "one_or_many")]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub response: Response,
    /// Maximum number of permutations per trial.
    #[serde(rename = "T")]
    pub horizon: u64,
    pub alpha: Alpha,
    pub strategies: Vec<MethodConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_treatment_prob")]
    pub treatment_prob: f64,
    #[serde(default)]
    pub tie_policy: TiePolicy,
}

impl SimulateConfig {
    pub const KEYS: &'static [&'static str] = &[
        "experiment",
        "m",
        "n",
        "mu",
        "response",
        "T",
        "alpha",
        "strategies",
        "seed",
        "treatment_prob",
        "tie_policy",
    ];

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n < 2 || self.horizon == 0 {
            return Err(Error::InvalidParameter("m, T must be >= 1 and n >= 2".into()));
        }
        if !(self.treatment_prob > 0.0 && self.treatment_prob < 1.0) {
            return Err(Error::InvalidParameter("treatment_prob must lie in (0, 1)".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidParameter("no strategies configured".into()));
        }
        Ok(())
    }
}

fn collect_unknown(value: &Value, allowed: &[&str], path: &str, out: &mut Vec<String>) {
    if let Some(obj) = value.as_object() {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                out.push(format!("{path}{key}"));
            }
        }
    }
}

fn collect_methods(value: Option<&Value>, out: &mut Vec<String>) {
    for (i, m) in value.and_then(Value::as_array).into_iter().flatten().enumerate() {
        let path = format!("strategies[{i}].");
        collect_unknown(m, MethodConfig::KEYS, &path, out);
        if let Some(prior) = m.get("prior") {
            let keys: &[&str] = match prior.get("type").and_then(Value::as_str) {
                Some("uniform") => &["type", "lo", "hi"],
                Some("beta") => &["type", "a", "b"],
                Some("point") => &["type", "p"],
                _ => &["type", "lo", "hi", "a", "b", "p"],
            };
            collect_unknown(prior, keys, &format!("{path}prior."), out);
        }
    }
}

/// Lists every key of a config document that no field accepts.
pub fn check_keys(value: &Value) -> Result<()> {
    let mut out = Vec::new();
    let top = match value.get("experiment").and_then(Value::as_str) {
        Some("count_table") => crate::harness::CountTableConfig::KEYS,
        _ => SimulateConfig::KEYS,
    };
    collect_unknown(value, top, "", &mut out);
    collect_methods(value.get("strategies"), &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfigKeys(out))
    }
}

/// Parses a JSON config after checking it for unknown keys.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<(T, Value)> {
    let value: Value = serde_json::from_str(text)?;
    check_keys(&value)?;
    Ok((serde_json::from_value(value.clone())?, value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_listed() {
        let text = r#"{"n": 10, "mu": 0, "T": 10, "alpha": 0.05, "bogus": 1,
            "strategies": [{"kind": "binomial", "q": 2}, {"kind": "mimicked_logopt", "prior": {"type": "beta", "a": 1, "b": 2, "z": 0}}]}"#;
        match parse_config::<SimulateConfig>(text) {
            Err(Error::InvalidConfigKeys(keys)) => {
                assert_eq!(keys, ["bogus", "strategies[0].q", "strategies[1].prior.z"])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defaults_and_scalar_mu() {
        let text = r#"{"n": 10, "mu": 0.5, "T": 10, "alpha": 0.05, "strategies": [{"kind": "besag_clifford", "h": 5}]}"#;
        let (cfg, _) = parse_config::<SimulateConfig>(text).unwrap();
        assert_eq!(cfg.m, 500);
        assert_eq!(cfg.mu, vec![0.5]);
        assert!(cfg.strategies[0].futility);
        assert_eq!(cfg.strategies[0].display_label(), "besag_clifford_h5");
    }
}
