//! Run configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgoConfig, Algorithm};
use crate::cmdp::{Cmdp, EnvFile};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_OSCILLATION_WINDOW;
use crate::resilience::CostSpec;
use crate::tolerances::DEFAULT_LAMBDA_CAP;

/// Where the environment of a run comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSource {
    /// Path to an environment JSON file, relative to the working directory.
    Path(String),
    Spec(EnvSpec),
    Inline(EnvFile),
}

impl EnvSource {
    pub fn load(&self) -> Result<Cmdp> {
        match self {
            EnvSource::Path(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read env file {p}: {e}")))?;
                Cmdp::from_json(&text)
            }
            EnvSource::Spec(spec) => spec.build(),
            EnvSource::Inline(file) => Cmdp::try_from(file.clone()),
        }
    }
}

fn default_cap() -> f64 {
    DEFAULT_LAMBDA_CAP
}

fn default_trace_every() -> usize {
    1
}

fn default_window() -> usize {
    DEFAULT_OSCILLATION_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default = "default_cap")]
    pub lambda_cap: f64,
    pub cost: CostSpec,
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
    pub env: EnvSource,
    /// Known regularized optimum; enables regrets and the final gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_h_star: Option<f64>,
    /// Compute `V_h*` with the oracle when not given.
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_window")]
    pub oscillation_window: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("malformed run config: {e}")))?;
        cfg.algo_config().validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn algo_config(&self) -> AlgoConfig {
        AlgoConfig {
            algorithm: self.algorithm,
            eta: self.eta,
            horizon: self.horizon,
            lambda_cap: self.lambda_cap,
            cost: self.cost,
            trace_every: self.trace_every,
            seed: 0,
        }
    }

    /// Applies a seed override to random environment specs.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let EnvSource::Spec(spec) = self.env {
            self.env = EnvSource::Spec(spec.with_seed(seed));
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inline_spec_with_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"algorithm": "resopgpd", "eta": 0.2, "T": 10,
                "cost": {"kind": "quadratic", "alpha": 0.2},
                "env": {"kind": "random", "num_states": 4, "num_actions": 2}}"#,
        )
        .unwrap();
        assert_eq!(cfg.lambda_cap, 100.0);
        assert_eq!(cfg.trace_every, 1);
        let model = cfg.env.load().unwrap();
        assert_eq!((model.num_states(), model.num_actions()), (4, 2));
    }

    #[test]
    fn parses_inline_env_file() {
        let model = crate::envs::gen_random_cmdp(3, 3, 2, 1, 0.9).unwrap();
        let env: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
        let text = serde_json::json!({
            "algorithm": "respgpd", "eta": 0.1, "T": 0,
            "cost": {"kind": "quadratic", "alpha": 1.0}, "env": env
        })
        .to_string();
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.env.load().unwrap(), model);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            r#"{"algorithm": "sgd", "eta": 0.2, "T": 1, "cost": {"kind": "quadratic", "alpha": 1}, "env": "x"}"#,
            r#"{"algorithm": "respgpd", "eta": -1, "T": 1, "cost": {"kind": "quadratic", "alpha": 1}, "env": "x"}"#,
            r#"{"algorithm": "respgpd", "eta": 0.1, "T": 1, "cost": {"kind": "quadratic", "alpha": -1}, "env": "x"}"#,
            r#"{"algorithm": "respgpd", "eta": 0.1, "T": 1, "cost": {"kind": "quadratic", "alpha": 1}, "env": "x", "bogus": 1}"#,
        ];
        for text in bad {
            assert!(
                matches!(RunConfig::from_json(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn missing_env_file_is_config_error() {
        let src = EnvSource::Path("/nonexistent/env.json".into());
        assert!(matches!(src.load(), Err(Error::Config(_))));
    }
}
