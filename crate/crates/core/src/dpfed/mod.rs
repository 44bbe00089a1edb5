//! Federated training with user and sensitive-entity level privacy.
//!
//! Each round samples users, detected entities and extended entities
//! independently, lets every sampled user run local steps on the sentences
//! its sampled entities select, clips the resulting update, and combines the
//! updates with a weighted estimator before adding Gaussian noise calibrated
//! to the estimator's sensitivity.
//!
//! The non-private baselines (`noiseless` and `deid`) run plain federated
//! averaging over every user, weighted by sentence count.

mod config;
mod estimator;
mod sampling;
mod train;
mod update;
mod weights;

use crate::accountant::AccountantError;

pub use config::{Mode, TrainConfig};
pub use estimator::{
    add_noise, aggregate_fe, aggregate_fe_plus, denominator, federated_average, noise_scale, sensitivity_bound,
    weighted_sum, UserDelta,
};
pub use sampling::{sample_round, select_user_sentences, Rates, RoundSample};
pub use train::{
    metrics_csv, model_dims, train, EvalSet, RoundMetrics, RoundUpdate, TrainOutcome, Trainer, METRICS_HEADER,
};
pub use update::{clip_fn, l2_norm, local_steps, local_update, sentence_coefficients, LocalSteps, TrainData};
pub use weights::{median, Weights};

#[derive(Debug, thiserror::Error)]
pub enum DpError {
    #[error("config field `{field}`: {message}")]
    Config { field: &'static str, message: String },
    #[error("config: {0}")]
    ConfigParse(String),
    #[error("{mode}: estimator denominator is zero, no sentences can be trained on ({detail})")]
    ZeroDenominator { mode: Mode, detail: String },
    #[error("round {round}: non-finite value ({detail})")]
    NonFinite { round: u64, detail: String },
    #[error("accountant: {0}")]
    Accountant(#[from] AccountantError),
}
