//! Small language models with exact analytic gradients.
//!
//! Two tasks share one parameter layout:
//!
//! - [`Task::LanguageModel`]: a feedforward n-gram model. The embeddings of
//!   the previous `context` tokens are concatenated, passed through a `tanh`
//!   hidden layer and a softmax over the vocabulary.
//! - [`Task::Classifier`]: the mean embedding of all tokens feeds the same
//!   hidden layer and a softmax over `classes` labels.
//!
//! `theta` is one flat `f64` vector laid out block by block:
//!
//! | block            | shape                    |
//! |------------------|--------------------------|
//! | embedding        | `vocab × embed`          |
//! | hidden weights   | `hidden × input_width`   |
//! | hidden bias      | `hidden`                 |
//! | output weights   | `outputs × hidden`       |
//! | output bias      | `outputs`                |
//!
//! Matrices are row-major. The `<pad>` embedding row is frozen: it never
//! receives gradient.

pub mod checkpoint;
mod metrics;
mod network;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::rng::{substream, Purpose};

pub use metrics::{perplexity, test_error_rate};
pub use network::Scratch;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("non-finite loss at example {example}")]
    NonFinite { example: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    LanguageModel,
    Classifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub task: Task,
    pub vocab: usize,
    pub embed: usize,
    /// Tokens of left context (language model only).
    pub context: usize,
    pub hidden: usize,
    /// Label count (classifier only).
    pub classes: usize,
}

impl Dims {
    pub fn language_model(vocab: usize, embed: usize, context: usize, hidden: usize) -> Self {
        Self {
            task: Task::LanguageModel,
            vocab,
            embed,
            context,
            hidden,
            classes: 0,
        }
    }

    pub fn classifier(vocab: usize, embed: usize, hidden: usize, classes: usize) -> Self {
        Self {
            task: Task::Classifier,
            vocab,
            embed,
            context: 0,
            hidden,
            classes,
        }
    }

    pub fn input_width(&self) -> usize {
        match self.task {
            Task::LanguageModel => self.context * self.embed,
            Task::Classifier => self.embed,
        }
    }

    pub fn outputs(&self) -> usize {
        match self.task {
            Task::LanguageModel => self.vocab,
            Task::Classifier => self.classes,
        }
    }

    pub fn layout(&self) -> Layout {
        let embedding = 0..self.vocab * self.embed;
        let hidden_w = embedding.end..embedding.end + self.hidden * self.input_width();
        let hidden_b = hidden_w.end..hidden_w.end + self.hidden;
        let output_w = hidden_b.end..hidden_b.end + self.outputs() * self.hidden;
        let output_b = output_w.end..output_w.end + self.outputs();
        Layout {
            embedding,
            hidden_w,
            hidden_b,
            output_w,
            output_b,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layout().output_b.end
    }

    fn is_valid(&self) -> bool {
        let base = self.vocab > 0 && self.embed > 0 && self.hidden > 0;
        base && match self.task {
            Task::LanguageModel => self.context > 0,
            Task::Classifier => self.classes > 0,
        }
    }
}

/// Offsets of each block inside `theta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub embedding: std::ops::Range<usize>,
    pub hidden_w: std::ops::Range<usize>,
    pub hidden_b: std::ops::Range<usize>,
    pub output_w: std::ops::Range<usize>,
    pub output_b: std::ops::Range<usize>,
}

impl Layout {
    pub fn blocks(&self) -> [(&'static str, std::ops::Range<usize>); 5] {
        [
            ("embedding", self.embedding.clone()),
            ("hidden_w", self.hidden_w.clone()),
            ("hidden_b", self.hidden_b.clone()),
            ("output_w", self.output_w.clone()),
            ("output_b", self.output_b.clone()),
        ]
    }
}

/// One prediction: context token ids and the target token id or label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub context: Vec<u32>,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    pub theta: Vec<f64>,
}

/// Embeddings uniform in `[-0.1, 0.1]`, weight matrices uniform in
/// `[-1/√H, 1/√H]`, biases zero.
pub fn init_params(dims: Dims, seed: u64) -> ModelParams {
    assert!(dims.is_valid(), "all model dimensions must be positive: {dims:?}");
    let layout = dims.layout();
    let mut theta = vec![0.0; dims.num_params()];
    let mut rng = substream(seed, 0, Purpose::Init);
    for v in &mut theta[layout.embedding.clone()] {
        *v = rng.random_range(-0.1..=0.1);
    }
    let bound = 1.0 / (dims.hidden as f64).sqrt();
    for range in [layout.hidden_w.clone(), layout.output_w.clone()] {
        for v in &mut theta[range] {
            *v = rng.random_range(-bound..=bound);
        }
    }
    ModelParams { dims, theta }
}

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            theta: vec![0.0; dims.num_params()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// Indexes of `theta` that are never trained (the `<pad>` embedding row).
    pub fn frozen(&self) -> std::ops::Range<usize> {
        let d = self.dims.embed;
        let start = Vocab::PAD as usize * d;
        start..start + d
    }

    /// Prediction examples for one encoded sentence.
    ///
    /// Language model: position `j` predicts token `j` from the `context`
    /// tokens before it, for `j >= context`. A sentence shorter than
    /// `context + 1` is left-padded with `<pad>` to that length, so it yields
    /// exactly one example. Classifier: one example carrying all tokens and
    /// the label.
    pub fn examples(&self, ids: &[u32], label: Option<u32>) -> Vec<Example> {
        match self.dims.task {
            Task::LanguageModel => {
                if ids.is_empty() {
                    return Vec::new();
                }
                let c = self.dims.context;
                let mut padded = Vec::with_capacity(ids.len().max(c + 1));
                padded.resize((c + 1).saturating_sub(ids.len()), Vocab::PAD);
                padded.extend_from_slice(ids);
                (c..padded.len())
                    .map(|j| Example {
                        context: padded[j - c..j].to_vec(),
                        target: padded[j],
                    })
                    .collect()
            }
            Task::Classifier => match label {
                Some(y) if !ids.is_empty() => vec![Example {
                    context: ids.to_vec(),
                    target: y,
                }],
                _ => Vec::new(),
            },
        }
    }

    /// Mean cross-entropy over `batch` and its exact gradient.
    pub fn loss_and_grad(&self, batch: &[Example]) -> Result<(f64, Vec<f64>), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let mut grad = vec![0.0; self.theta.len()];
        let total = self.accumulate(batch, &mut grad, 1.0)?;
        let n = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((total / n, grad))
    }

    /// Adds `scale × Σ ∇ loss(example)` into `grad`; returns the summed loss.
    pub fn accumulate(&self, batch: &[Example], grad: &mut [f64], scale: f64) -> Result<f64, ModelError> {
        let mut scratch = Scratch::new(&self.dims);
        let mut total = 0.0;
        for (i, ex) in batch.iter().enumerate() {
            let loss = network::forward(self, ex, &mut scratch);
            if !loss.is_finite() {
                return Err(ModelError::NonFinite { example: i });
            }
            network::backward(self, ex, &mut scratch, grad, scale);
            total += loss;
        }
        Ok(total)
    }

    /// Summed gradient over every prediction position of one sentence.
    pub fn sentence_grad(&self, ids: &[u32], label: Option<u32>) -> Result<Vec<f64>, ModelError> {
        let mut grad = vec![0.0; self.theta.len()];
        self.accumulate(&self.examples(ids, label), &mut grad, 1.0)?;
        Ok(grad)
    }

    /// Output distribution for one example's context.
    pub fn predict(&self, context: &[u32]) -> Vec<f64> {
        let mut scratch = Scratch::new(&self.dims);
        let ex = Example {
            context: context.to_vec(),
            target: 0,
        };
        network::forward(self, &ex, &mut scratch);
        scratch.probs().to_vec()
    }

    /// `-ln p(target | context)` for one example.
    pub fn example_loss(&self, ex: &Example, scratch: &mut Scratch) -> f64 {
        network::forward(self, ex, scratch)
    }
}
