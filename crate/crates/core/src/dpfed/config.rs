use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DpError;
use crate::accountant::Strategy;
use crate::model::Task;

/// Training regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// User and entity sampling with the `f_E+` estimator (detected plus
    /// extended entities).
    UedpFePlus,
    /// User and entity sampling over detected entities only.
    UedpFe,
    /// User sampling only; each sampled user trains on all of its data.
    UserLevel,
    /// Federated averaging on the masked corpus, no noise.
    Deid,
    /// Federated averaging over every user, no clipping or noise.
    Noiseless,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::UedpFePlus,
        Mode::UedpFe,
        Mode::UserLevel,
        Mode::Deid,
        Mode::Noiseless,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::UedpFePlus => "uedp_fe_plus",
            Mode::UedpFe => "uedp_fe",
            Mode::UserLevel => "user_level",
            Mode::Deid => "deid",
            Mode::Noiseless => "noiseless",
        }
    }

    /// Whether the mode clips, adds noise and is tracked by the accountant.
    pub fn is_private(self) -> bool {
        matches!(self, Mode::UedpFePlus | Mode::UedpFe | Mode::UserLevel)
    }

    pub fn default_strategy(self) -> Strategy {
        match self {
            Mode::UedpFePlus | Mode::UedpFe => Strategy::JointMixture,
            _ => Strategy::UserOnly,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = DpError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DpError::Config {
                field: "mode",
                message: format!("unknown mode `{s}`"),
            })
    }
}

/// Every knob of a training run. Serialized as a flat TOML table; keys not
/// listed here are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub q_u: f64,
    pub q_e: f64,
    pub q_s: f64,
    /// Noise multiplier.
    pub z: f64,
    /// Clipping bound on each user's update.
    pub beta: f64,
    /// Local learning rate.
    pub eta: f64,
    /// Local batch size in sentences.
    #[serde(rename = "B")]
    pub batch_size: usize,
    /// Number of rounds.
    #[serde(rename = "T")]
    pub rounds: u64,
    pub delta: f64,
    /// Per-user sentence cap; the median sentence count when absent.
    pub cap_u: Option<f64>,
    /// Per-entity sentence cap; the median when absent.
    pub cap_e: Option<f64>,
    /// Extended-entity cap; the median when absent.
    pub cap_s: Option<f64>,
    pub mode: Mode,
    pub seed: u64,
    /// Accounting strategy; chosen from the mode when absent.
    pub strategy: Option<Strategy>,
    /// Step from the current local parameters instead of restarting every
    /// batch from the round's starting point.
    pub cumulative_local_steps: bool,
    /// Count a sentence once, at its largest entity weight, even when several
    /// sampled entities select it.
    pub dedup: bool,
    /// Compute the training metric every this many rounds (and always on the
    /// last one).
    pub eval_every: u64,
    pub task: Task,
    pub embed: usize,
    pub context: usize,
    pub hidden: usize,
    /// Label count for the classifier; inferred from the corpus when absent.
    pub classes: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            q_u: 0.05,
            q_e: 0.5,
            q_s: 1.0,
            z: 2.0,
            beta: 1.0,
            eta: 0.1,
            batch_size: 16,
            rounds: 100,
            delta: 1e-5,
            cap_u: None,
            cap_e: None,
            cap_s: None,
            mode: Mode::UedpFePlus,
            seed: 0,
            strategy: None,
            cumulative_local_steps: false,
            dedup: false,
            eval_every: 1,
            task: Task::LanguageModel,
            embed: 32,
            context: 3,
            hidden: 64,
            classes: None,
        }
    }
}

fn invalid(field: &'static str, message: impl Into<String>) -> DpError {
    DpError::Config {
        field,
        message: message.into(),
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, DpError> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| DpError::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy.unwrap_or_else(|| self.mode.default_strategy())
    }

    pub fn validate(&self) -> Result<(), DpError> {
        for (field, q) in [("q_u", self.q_u), ("q_e", self.q_e), ("q_s", self.q_s)] {
            if !(0.0..=1.0).contains(&q) {
                return Err(invalid(field, format!("must lie in [0, 1], got {q}")));
            }
        }
        if !(self.z >= 0.0 && self.z.is_finite()) {
            return Err(invalid("z", format!("must be finite and >= 0, got {}", self.z)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", format!("must be finite and > 0, got {}", self.beta)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid("eta", format!("must be finite and > 0, got {}", self.eta)));
        }
        if self.batch_size == 0 {
            return Err(invalid("B", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        for (field, cap) in [("cap_u", self.cap_u), ("cap_e", self.cap_e), ("cap_s", self.cap_s)] {
            if let Some(c) = cap {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(invalid(field, format!("must be finite and > 0, got {c}")));
                }
            }
        }
        if self.eval_every == 0 {
            return Err(invalid("eval_every", "must be at least 1"));
        }
        for (field, v) in [("embed", self.embed), ("hidden", self.hidden)] {
            if v == 0 {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        if self.task == Task::LanguageModel && self.context == 0 {
            return Err(invalid("context", "must be at least 1"));
        }
        if self.classes == Some(0) {
            return Err(invalid("classes", "must be at least 1"));
        }
        Ok(())
    }
}
