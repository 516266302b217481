//! The single JSON configuration document shared by every subcommand.
//! Every field is optional; missing fields take the defaults below.

use serde::{Deserialize, Serialize};
use signpipe_core::{CutoffPolicy, DebounceConfig, Grammar, PipelineConfig, TrainConfig};

pub const CONFIG_ENV: &str = "SIGNPIPE_CONFIG";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Training hyperparameters, including `train.augment`.
    pub train: TrainConfig,
    pub debounce: DebounceConfig,
    /// Runtime confidence gate; `null` keeps the threshold stored in the model.
    pub threshold: Option<f64>,
    pub cutoff: CutoffPolicy,
    /// Verb arity table and instruction templates.
    pub grammar: Grammar,
    pub require_confirm: bool,
    pub synth: SynthConfig,
    pub serve: ServeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub copies: usize,
    pub jitter_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { copies: 50, jitter_sigma: 0.02, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: String,
    /// Optional WebSocket listener carrying the same line protocol.
    pub ws_bind: Option<String>,
    pub max_line_bytes: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { bind: "127.0.0.1:7878".into(), ws_bind: None, max_line_bytes: 64 * 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |e: &dyn std::fmt::Display| ConfigError(e.to_string());
        self.train.validate().map_err(|e| err(&e))?;
        self.debounce.validate().map_err(|e| err(&e))?;
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(ConfigError(format!("threshold {t} outside [0, 1]")));
            }
        }
        if !(self.synth.jitter_sigma >= 0.0 && self.synth.jitter_sigma.is_finite()) {
            return Err(ConfigError("synth.jitter_sigma must be finite and >= 0".into()));
        }
        if self.serve.max_line_bytes == 0 {
            return Err(ConfigError("serve.max_line_bytes must be positive".into()));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            debounce: self.debounce,
            cutoff: self.cutoff,
            grammar: self.grammar.clone(),
            threshold: self.threshold,
            require_confirm: self.require_confirm,
        }
    }
}
