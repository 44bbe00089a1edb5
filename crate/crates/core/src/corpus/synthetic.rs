//! Seeded, entity-heavy template corpus for desk-scale experiments.
//!
//! Sentences come from four topics (labels 0..4) with fixed word patterns
//! and slots filled from small entity pools, so a small next-word model can
//! learn them and entity tokens carry most of the remaining uncertainty.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{Category, Corpus, EntitySpan, Sentence, UserId};
use crate::rng::{substream, Purpose};

const PERSONS: &[&str] = &[
    "david johnson",
    "mary smith",
    "alice brown",
    "robert lee",
    "linda garcia",
    "james wilson",
];
const ORGS: &[&str] = &["acme corp", "globex", "initech", "main hospital", "umbrella bank"];
const PLACES: &[&str] = &["maine", "paris", "berlin", "tokyo", "ohio", "lagos"];

/// `{p}` person, `{o}` organisation, `{g}` place.
const TEMPLATES: [&[&str]; 4] = [
    &[
        "{p} flew to {g} on monday for the summit",
        "the prime minister met {p} in {g} yesterday",
        "voters in {g} elected {p} as the new mayor",
        "the weather was cold and the roads were closed",
    ],
    &[
        "{p} scored twice as the team won the final",
        "the coach said {p} will miss the next game",
        "fans in {g} cheered as the team won the final",
        "the match was delayed because of the rain",
    ],
    &[
        "shares of {o} rose after the quarterly report",
        "{p} was named chief executive of {o} on friday",
        "{o} will open a new office in {g} next year",
        "prices rose again and the market closed higher",
    ],
    &[
        "researchers at {o} released a new battery design",
        "{p} said the new chip is twice as fast",
        "the new phone from {o} sold out in {g}",
        "the new model runs faster and uses less power",
    ],
];

/// Builds `num_sentences` templated sentences spread uniformly at random
/// over `num_users` users.
pub fn synthetic_corpus(num_sentences: usize, num_users: usize, seed: u64, min_count: usize) -> Corpus {
    let mut rng = substream(seed, 0, Purpose::Synthetic);
    let width = num_users.max(1).to_string().len().max(3);
    let sentences = (0..num_sentences)
        .map(|i| {
            let label = rng.random_range(0..TEMPLATES.len());
            let template = *TEMPLATES[label].choose(&mut rng).expect("non-empty");
            let owner = UserId(format!("user-{:0width$}", rng.random_range(0..num_users.max(1))));
            fill(template, i as u64, owner, label as u32, &mut rng)
        })
        .collect();
    Corpus::new(sentences, min_count)
}

fn fill(template: &str, id: u64, owner: UserId, label: u32, rng: &mut impl Rng) -> Sentence {
    let mut tokens: Vec<String> = Vec::new();
    let mut slots = Vec::new();
    for word in template.split_whitespace() {
        let (pool, cat) = match word {
            "{p}" => (PERSONS, Category::Person),
            "{o}" => (ORGS, Category::Org),
            "{g}" => (PLACES, Category::Gpe),
            w => {
                tokens.push(w.to_string());
                continue;
            }
        };
        let start = tokens.len();
        let value = pool.choose(rng).expect("non-empty pool");
        tokens.extend(value.split_whitespace().map(str::to_string));
        slots.push((cat, start, tokens.len()));
    }
    let spans = slots
        .into_iter()
        .map(|(c, a, b)| EntitySpan::new(c, a, b, &tokens).expect("slot in range"))
        .collect();
    Sentence {
        id,
        owner,
        tokens,
        spans,
        label: Some(label),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = synthetic_corpus(500, 30, 9, 2);
        assert_eq!(a.num_sentences(), 500);
        assert!(a.num_users() <= 30 && a.num_users() >= 25);
        assert_eq!(a.to_jsonl(), synthetic_corpus(500, 30, 9, 2).to_jsonl());
        let sensitive = a.sensitive_count();
        assert!(sensitive > 300 && sensitive < 500, "{sensitive}");
        assert!(a.sentences().iter().all(|s| s.label.unwrap() < 4));
    }
}
