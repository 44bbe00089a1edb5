use rayon::prelude::*;
use serde::Serialize;

use super::estimator::{add_noise, denominator, federated_average, noise_scale, weighted_sum, UserDelta};
use super::sampling::{sample_round, select_user_sentences, Rates, RoundSample};
use super::update::{clip_fn, local_steps, local_update, LocalSteps, TrainData};
use super::{DpError, Mode, TrainConfig, Weights};
use crate::accountant::{effective_rate, PrivacyLedger, Strategy};
use crate::corpus::{deidentify, Corpus, EntitySets, UserEntities};
use crate::model::{init_params, perplexity, test_error_rate, Dims, ModelParams, Task};

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundUpdate {
    pub round: u64,
    pub sample: RoundSample,
    /// Per-user updates, ascending by user; clipped in the private modes.
    pub deltas: Vec<UserDelta>,
    pub aggregate: Vec<f64>,
    pub sigma: f64,
    pub noise: Vec<f64>,
}

/// One row of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub sigma: f64,
    pub metric_name: &'static str,
    pub metric_value: f64,
    pub users_sampled: usize,
    pub entities_sampled: usize,
}

pub const METRICS_HEADER: &str =
    "round,epsilon,delta,sigma,metric_name,metric_value,users_sampled,entities_sampled";

impl RoundMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.round,
            self.epsilon,
            self.delta,
            self.sigma,
            self.metric_name,
            self.metric_value,
            self.users_sampled,
            self.entities_sampled
        )
    }
}

pub fn metrics_csv(log: &[RoundMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in log {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

/// Evaluation split matching the task.
#[derive(Debug, Clone)]
pub enum EvalSet {
    Perplexity(Vec<Vec<u32>>),
    ErrorRate(Vec<(Vec<u32>, u32)>),
}

impl EvalSet {
    pub fn from_corpus(corpus: &Corpus, task: Task) -> Self {
        let vocab = corpus.vocab();
        match task {
            Task::LanguageModel => EvalSet::Perplexity(
                corpus
                    .sentences()
                    .iter()
                    .map(|s| vocab.encode(&s.tokens))
                    .filter(|ids| !ids.is_empty())
                    .collect(),
            ),
            Task::Classifier => EvalSet::ErrorRate(
                corpus
                    .sentences()
                    .iter()
                    .filter_map(|s| Some((vocab.encode(&s.tokens), s.label?)))
                    .filter(|(ids, _)| !ids.is_empty())
                    .collect(),
            ),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EvalSet::Perplexity(_) => "perplexity",
            EvalSet::ErrorRate(_) => "error_rate",
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            EvalSet::Perplexity(v) => v.is_empty(),
            EvalSet::ErrorRate(v) => v.is_empty(),
        }
    }

    pub fn evaluate(&self, params: &ModelParams) -> f64 {
        match self {
            EvalSet::Perplexity(v) => perplexity(params, v),
            EvalSet::ErrorRate(v) => test_error_rate(params, v),
        }
    }
}

/// Model dimensions for `corpus` under `cfg`.
pub fn model_dims(corpus: &Corpus, cfg: &TrainConfig) -> Result<Dims, DpError> {
    let vocab = corpus.vocab().len();
    Ok(match cfg.task {
        Task::LanguageModel => Dims::language_model(vocab, cfg.embed, cfg.context, cfg.hidden),
        Task::Classifier => {
            let max_label = corpus.sentences().iter().filter_map(|s| s.label).max();
            let classes = match (cfg.classes, max_label) {
                (Some(k), Some(m)) if (m as usize) >= k => {
                    return Err(DpError::Config {
                        field: "classes",
                        message: format!("label {m} does not fit {k} classes"),
                    })
                }
                (Some(k), _) => k,
                (None, Some(m)) => m as usize + 1,
                (None, None) => {
                    return Err(DpError::Config {
                        field: "task",
                        message: "classifier training needs labelled sentences".to_string(),
                    })
                }
            };
            Dims::classifier(vocab, cfg.embed, cfg.hidden, classes)
        }
    })
}

/// Round-by-round driver. [`train`] wraps it for whole runs.
pub struct Trainer<'a> {
    corpus: &'a Corpus,
    sets: &'a EntitySets,
    cfg: TrainConfig,
    weights: Weights,
    data: TrainData,
    eval: EvalSet,
    params: ModelParams,
    ledger: Option<PrivacyLedger>,
    sigma: f64,
    denom: f64,
    round: u64,
    user_sentences: Vec<&'a [usize]>,
    user_entities: Vec<UserEntities>,
}

impl<'a> Trainer<'a> {
    pub fn new(corpus: &'a Corpus, sets: &'a EntitySets, cfg: &TrainConfig) -> Result<Self, DpError> {
        cfg.validate()?;
        let mode = cfg.mode;
        let weights = Weights::compute(corpus, sets, cfg);
        let (sigma, denom, ledger) = if mode.is_private() {
            let num_users = corpus.num_users();
            let sigma = noise_scale(&weights, cfg, num_users, mode)?;
            let denom = denominator(&weights, cfg, mode)?;
            let strategy = cfg.strategy();
            if mode == Mode::UserLevel && strategy != Strategy::UserOnly {
                return Err(DpError::Config {
                    field: "strategy",
                    message: "user_level samples no entities; use user_only".to_string(),
                });
            }
            // f_E never samples extended entities, so they carry no weight in
            // its effective rate.
            let w_s = if mode == Mode::UedpFe { 0.0 } else { weights.total_s };
            let q_eff = effective_rate(strategy, cfg.q_u, cfg.q_e, cfg.q_s, weights.total_e, w_s)?;
            (sigma, denom, Some(PrivacyLedger::new(q_eff, cfg.z, strategy)?))
        } else {
            (0.0, 1.0, None)
        };

        let dims = model_dims(corpus, cfg)?;
        let data = if mode == Mode::Deid {
            TrainData::from_corpus(&deidentify(corpus))
        } else {
            TrainData::from_corpus(corpus)
        };
        let eval = EvalSet::from_corpus(corpus, cfg.task);
        if eval.is_empty() {
            return Err(DpError::Config {
                field: "task",
                message: "corpus has nothing to evaluate on".to_string(),
            });
        }
        let user_sentences = corpus.users().values().map(Vec::as_slice).collect();
        let user_entities = corpus
            .users()
            .keys()
            .map(|u| sets.user(u).cloned().unwrap_or_default())
            .collect();
        Ok(Self {
            corpus,
            sets,
            cfg: cfg.clone(),
            weights,
            data,
            eval,
            params: init_params(dims, cfg.seed),
            ledger,
            sigma,
            denom,
            round: 0,
            user_sentences,
            user_entities,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn ledger(&self) -> Option<&PrivacyLedger> {
        self.ledger.as_ref()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn metric_name(&self) -> &'static str {
        self.eval.name()
    }

    pub fn metric(&self) -> f64 {
        self.eval.evaluate(&self.params)
    }

    /// ε spent so far at the configured δ; infinite for the non-private
    /// modes once any round has run.
    pub fn epsilon(&self) -> Result<f64, DpError> {
        match &self.ledger {
            Some(l) => Ok(l.get_priv_spent(self.cfg.delta)?.epsilon),
            None if self.round == 0 => Ok(0.0),
            None => Ok(f64::INFINITY),
        }
    }

    fn steps(&self) -> LocalSteps {
        LocalSteps {
            eta: self.cfg.eta,
            batch_size: self.cfg.batch_size,
            cumulative: self.cfg.cumulative_local_steps,
        }
    }

    fn all_sentences(&self, user: usize) -> Vec<(usize, f64)> {
        self.user_sentences[user].iter().map(|&s| (s, 1.0)).collect()
    }

    fn user_delta(&self, user: usize, sample: &RoundSample) -> Result<Vec<f64>, crate::model::ModelError> {
        let theta0 = &self.params;
        let steps = self.steps();
        match self.cfg.mode {
            Mode::UedpFePlus | Mode::UedpFe => {
                let selection = select_user_sentences(
                    self.user_sentences[user],
                    &self.user_entities[user],
                    sample,
                    self.sets,
                    self.cfg.mode == Mode::UedpFePlus,
                );
                local_update(theta0, &selection, &self.weights, &self.data, steps, self.cfg.beta, self.cfg.dedup)
            }
            Mode::UserLevel => {
                let delta = local_steps(theta0, &self.all_sentences(user), &self.data, steps)?;
                Ok(clip_fn(&delta, self.cfg.beta))
            }
            Mode::Deid | Mode::Noiseless => local_steps(theta0, &self.all_sentences(user), &self.data, steps),
        }
    }

    /// Runs one round and returns its record.
    pub fn step(&mut self) -> Result<RoundUpdate, DpError> {
        let t = self.round + 1;
        let cfg = &self.cfg;
        let num_users = self.corpus.num_users();
        let sample = if cfg.mode.is_private() {
            let mut s = sample_round(
                num_users,
                self.sets.num_detected(),
                self.sets.num_extended(),
                Rates {
                    q_u: cfg.q_u,
                    q_e: cfg.q_e,
                    q_s: cfg.q_s,
                },
                cfg.seed,
                t,
            );
            match cfg.mode {
                Mode::UedpFe => s.extended.clear(),
                Mode::UserLevel => {
                    s.detected.clear();
                    s.extended.clear();
                }
                _ => {}
            }
            s
        } else {
            RoundSample {
                users: (0..num_users).collect(),
                ..RoundSample::default()
            }
        };

        let results: Vec<_> = sample.users.par_iter().map(|&u| (u, self.user_delta(u, &sample))).collect();
        let mut deltas = Vec::with_capacity(results.len());
        for (user, r) in results {
            match r {
                Ok(delta) => deltas.push(UserDelta { user, delta }),
                Err(e) => {
                    return Err(DpError::NonFinite {
                        round: t,
                        detail: format!("user {}: {e}", self.weights.users[user]),
                    })
                }
            }
        }

        let dim = self.params.theta.len();
        let aggregate = if cfg.mode.is_private() {
            weighted_sum(&deltas, &self.weights, self.denom, dim)
        } else {
            federated_average(&deltas, &self.weights.n_u, dim)
        };
        for (t, a) in self.params.theta.iter_mut().zip(&aggregate) {
            *t += a;
        }
        let frozen = self.params.frozen();
        let noise = add_noise(&mut self.params.theta, frozen, self.sigma, cfg.seed, t);
        if let Some(i) = self.params.theta.iter().position(|v| !v.is_finite()) {
            return Err(DpError::NonFinite {
                round: t,
                detail: format!("parameter {i} became non-finite after aggregation"),
            });
        }
        if let Some(l) = &mut self.ledger {
            l.accum_priv_spending(1);
        }
        self.round = t;
        Ok(RoundUpdate {
            round: t,
            sample,
            deltas,
            aggregate,
            sigma: self.sigma,
            noise,
        })
    }
}

/// Result of a whole run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub ledger: Option<PrivacyLedger>,
    pub log: Vec<RoundMetrics>,
    pub config: TrainConfig,
    pub weights: Weights,
    pub sigma: f64,
    pub initial_metric: f64,
    pub final_epsilon: f64,
    pub warnings: Vec<String>,
}

/// Runs `cfg.rounds` rounds and logs ε and the training metric after every
/// `cfg.eval_every`-th round and after the last one.
pub fn train(corpus: &Corpus, sets: &EntitySets, cfg: &TrainConfig) -> Result<TrainOutcome, DpError> {
    let mut trainer = Trainer::new(corpus, sets, cfg)?;
    let initial_metric = trainer.metric();
    let mut log = Vec::new();
    let mut warnings = Vec::new();
    for t in 1..=cfg.rounds {
        let update = trainer.step()?;
        if t % cfg.eval_every != 0 && t != cfg.rounds {
            continue;
        }
        let epsilon = trainer.epsilon()?;
        if cfg.mode.is_private() && epsilon.is_infinite() && warnings.is_empty() {
            warnings.push(format!("epsilon is infinite at every order from round {t}"));
        }
        let metric_value = trainer.metric();
        if !metric_value.is_finite() && cfg.task == Task::LanguageModel {
            return Err(DpError::NonFinite {
                round: t,
                detail: format!("training perplexity is {metric_value}"),
            });
        }
        log.push(RoundMetrics {
            round: t,
            epsilon,
            delta: cfg.delta,
            sigma: update.sigma,
            metric_name: trainer.metric_name(),
            metric_value,
            users_sampled: update.sample.users.len(),
            entities_sampled: update.sample.detected.len() + update.sample.extended.len(),
        });
    }
    let final_epsilon = trainer.epsilon()?;
    Ok(TrainOutcome {
        params: trainer.params.clone(),
        ledger: trainer.ledger.clone(),
        log,
        config: cfg.clone(),
        weights: trainer.weights.clone(),
        sigma: trainer.sigma,
        initial_metric,
        final_epsilon,
        warnings,
    })
}
