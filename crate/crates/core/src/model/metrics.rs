use rayon::prelude::*;

use super::{ModelParams, Scratch, Task};

/// `exp` of the mean negative log-likelihood over every prediction position
/// in `split`.
///
/// Panics if `split` has no prediction positions.
pub fn perplexity(params: &ModelParams, split: &[Vec<u32>]) -> f64 {
    assert_eq!(params.dims.task, Task::LanguageModel, "perplexity needs a language model");
    let per_sentence: Vec<(f64, usize)> = split
        .par_iter()
        .map_init(
            || Scratch::new(&params.dims),
            |scratch, ids| {
                let examples = params.examples(ids, None);
                let nll: f64 = examples.iter().map(|ex| params.example_loss(ex, scratch)).sum();
                (nll, examples.len())
            },
        )
        .collect();
    // Sequential reduction keeps the result independent of thread count.
    let (nll, count) = per_sentence
        .iter()
        .fold((0.0, 0usize), |(a, n), &(b, m)| (a + b, n + m));
    assert!(count > 0, "perplexity of an empty split");
    (nll / count as f64).exp()
}

/// Fraction of examples whose arg-max class differs from the label. Ties go
/// to the lowest class index.
///
/// Panics if `split` is empty.
pub fn test_error_rate(params: &ModelParams, split: &[(Vec<u32>, u32)]) -> f64 {
    assert_eq!(params.dims.task, Task::Classifier, "error rate needs a classifier");
    assert!(!split.is_empty(), "error rate of an empty split");
    let wrong: usize = split
        .par_iter()
        .map(|(ids, label)| {
            let probs = params.predict(ids);
            let best = probs
                .iter()
                .enumerate()
                .fold(0, |best, (i, &p)| if p > probs[best] { i } else { best });
            usize::from(best != *label as usize)
        })
        .sum();
    wrong as f64 / split.len() as f64
}
