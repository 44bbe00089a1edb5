use std::collections::BTreeMap;

use crate::corpus::{Corpus, EntityId};
use crate::model::{ModelError, ModelParams};

use super::Weights;

/// Rescales `delta` to l2 norm at most `beta`.
pub fn clip_fn(delta: &[f64], beta: f64) -> Vec<f64> {
    assert!(beta > 0.0, "clipping bound must be positive");
    let norm = l2_norm(delta);
    if norm <= beta {
        return delta.to_vec();
    }
    let scale = beta / norm;
    delta.iter().map(|v| v * scale).collect()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Encoded sentences and labels, indexed like the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub encoded: Vec<Vec<u32>>,
    pub labels: Vec<Option<u32>>,
}

impl TrainData {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let vocab = corpus.vocab();
        Self {
            encoded: corpus.sentences().iter().map(|s| vocab.encode(&s.tokens)).collect(),
            labels: corpus.sentences().iter().map(|s| s.label).collect(),
        }
    }
}

/// Local optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSteps {
    pub eta: f64,
    pub batch_size: usize,
    /// `θ ← θ − ηΔ` per batch instead of `θ ← θ⁰ − ηΔ`.
    pub cumulative: bool,
}

/// Per-sentence gradient coefficients for a selection: the sum of the weights
/// of every sampled entity selecting the sentence, or their maximum when
/// `dedup` is set. Sentences come out ascending.
pub fn sentence_coefficients(
    selection: &BTreeMap<EntityId, Vec<usize>>,
    weights: &Weights,
    dedup: bool,
) -> Vec<(usize, f64)> {
    let mut coef: BTreeMap<usize, f64> = BTreeMap::new();
    for (id, sentences) in selection {
        let w = match *id {
            EntityId::Detected(e) => weights.w_e[e],
            EntityId::Extended(s) => weights.w_s[s],
        };
        for &s in sentences {
            let c = coef.entry(s).or_insert(0.0);
            *c = if dedup { c.max(w) } else { *c + w };
        }
    }
    coef.into_iter().collect()
}

/// Runs the local optimizer from `theta0` over `items` (sentence, gradient
/// coefficient) in batches and returns the unclipped `θ − θ⁰`.
///
/// Each batch forms `Δ = Σ c_s ∇l(θ, s)` at the current local parameters.
pub fn local_steps(
    theta0: &ModelParams,
    items: &[(usize, f64)],
    data: &TrainData,
    steps: LocalSteps,
) -> Result<Vec<f64>, ModelError> {
    let mut local = theta0.clone();
    let mut grad = vec![0.0; theta0.theta.len()];
    for batch in items.chunks(steps.batch_size.max(1)) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &(s, c) in batch {
            if c == 0.0 {
                continue;
            }
            let examples = local.examples(&data.encoded[s], data.labels[s]);
            local.accumulate(&examples, &mut grad, c)?;
        }
        let base = if steps.cumulative { &local.theta } else { &theta0.theta };
        let next: Vec<f64> = base.iter().zip(&grad).map(|(t, g)| t - steps.eta * g).collect();
        local.theta = next;
    }
    let delta: Vec<f64> = local.theta.iter().zip(&theta0.theta).map(|(a, b)| a - b).collect();
    if let Some(i) = delta.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite { example: i });
    }
    Ok(delta)
}

/// One sampled user's clipped update `Δ_{u,E}`.
pub fn local_update(
    theta0: &ModelParams,
    selection: &BTreeMap<EntityId, Vec<usize>>,
    weights: &Weights,
    data: &TrainData,
    steps: LocalSteps,
    beta: f64,
    dedup: bool,
) -> Result<Vec<f64>, ModelError> {
    let items = sentence_coefficients(selection, weights, dedup);
    let delta = local_steps(theta0, &items, data, steps)?;
    Ok(clip_fn(&delta, beta))
}
