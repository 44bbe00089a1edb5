use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{EntityId, EntitySets, UserEntities};
use crate::rng::{IndexedUniform, Purpose};

/// Indexes drawn in one round, each list ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RoundSample {
    pub users: Vec<usize>,
    pub detected: Vec<usize>,
    pub extended: Vec<usize>,
}

/// Inclusion rates for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub q_u: f64,
    pub q_e: f64,
    pub q_s: f64,
}

fn bernoulli_subset(n: usize, p: f64, seed: u64, round: u64, purpose: Purpose) -> Vec<usize> {
    let mut draws = IndexedUniform::new(seed, round, purpose);
    (0..n).filter(|&i| draws.bernoulli(i as u64, p)).collect()
}

/// Independent Bernoulli inclusion of every user, detected entity and
/// extended entity. Each family draws from its own substream, and the draw
/// for item `i` depends only on `(seed, round, i)`.
pub fn sample_round(
    num_users: usize,
    num_detected: usize,
    num_extended: usize,
    rates: Rates,
    seed: u64,
    round: u64,
) -> RoundSample {
    RoundSample {
        users: bernoulli_subset(num_users, rates.q_u, seed, round, Purpose::UserSampling),
        detected: bernoulli_subset(num_detected, rates.q_e, seed, round, Purpose::DetectedSampling),
        extended: bernoulli_subset(num_extended, rates.q_s, seed, round, Purpose::ExtendedSampling),
    }
}

/// The sentences of one sampled user selected by each sampled entity it
/// touches.
///
/// A detected entity selects every sentence of the user that mentions it; a
/// sentence mentioning two sampled entities is listed under both. An extended
/// entity selects its own sentence. `user_sentences` must be ascending.
pub fn select_user_sentences(
    user_sentences: &[usize],
    user_entities: &UserEntities,
    sample: &RoundSample,
    sets: &EntitySets,
    include_extended: bool,
) -> BTreeMap<EntityId, Vec<usize>> {
    let mut out = BTreeMap::new();
    for &e in &user_entities.detected {
        if sample.detected.binary_search(&e).is_err() {
            continue;
        }
        let mine: Vec<usize> = sets.detected[e]
            .sentences
            .iter()
            .copied()
            .filter(|s| user_sentences.binary_search(s).is_ok())
            .collect();
        if !mine.is_empty() {
            out.insert(EntityId::Detected(e), mine);
        }
    }
    if include_extended {
        for &s in &user_entities.extended {
            if sample.extended.binary_search(&s).is_ok() {
                out.insert(EntityId::Extended(s), vec![sets.extended[s]]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::sentence;
    use crate::corpus::{build_entity_sets, Category, Corpus, UserId};

    const ALL: Rates = Rates {
        q_u: 1.0,
        q_e: 1.0,
        q_s: 1.0,
    };

    #[test]
    fn full_and_empty_rates() {
        let s = sample_round(4, 3, 2, ALL, 1, 1);
        assert_eq!(s.users, vec![0, 1, 2, 3]);
        assert_eq!(s.detected, vec![0, 1, 2]);
        assert_eq!(s.extended, vec![0, 1]);
        let none = sample_round(4, 3, 2, Rates { q_u: 0.0, ..ALL }, 1, 1);
        assert!(none.users.is_empty());
    }

    #[test]
    fn deterministic_per_round_and_stable_under_growth() {
        let r = Rates {
            q_u: 0.3,
            q_e: 0.5,
            q_s: 0.5,
        };
        assert_eq!(sample_round(50, 20, 20, r, 9, 4), sample_round(50, 20, 20, r, 9, 4));
        assert_ne!(sample_round(50, 20, 20, r, 9, 4), sample_round(50, 20, 20, r, 9, 5));
        // Adding users does not change the decisions for existing ones.
        let small = sample_round(50, 0, 0, r, 9, 4).users;
        let big: Vec<usize> = sample_round(80, 0, 0, r, 9, 4).users.into_iter().filter(|&u| u < 50).collect();
        assert_eq!(small, big);
    }

    #[test]
    fn mean_sample_size() {
        let r = Rates { q_u: 0.05, ..ALL };
        let rounds = 10_000u64;
        let total: usize = (1..=rounds).map(|t| sample_round(1000, 0, 0, r, 3, t).users.len()).sum();
        let mean = total as f64 / rounds as f64;
        // Standard error of the mean is sqrt(1000 · 0.05 · 0.95 / 10⁴) ≈ 0.069.
        assert!((mean - 50.0).abs() < 1.5, "mean {mean}");
    }

    fn fixture() -> (Corpus, EntitySets) {
        let corpus = Corpus::new(
            vec![
                sentence(0, "u", "paris and tokyo", &[(Category::Gpe, 0, 1), (Category::Gpe, 2, 3)]),
                sentence(1, "u", "paris again", &[(Category::Gpe, 0, 1)]),
                sentence(2, "u", "plain words", &[]),
                sentence(3, "v", "paris for v", &[(Category::Gpe, 0, 1)]),
            ],
            1,
        );
        let sets = build_entity_sets(&corpus);
        (corpus, sets)
    }

    #[test]
    fn selection_lists_shared_sentences_twice() {
        let (corpus, sets) = fixture();
        let u = UserId("u".into());
        let sample = sample_round(2, 2, 2, ALL, 0, 1);
        let sel = select_user_sentences(&corpus.users()[&u], sets.user(&u).unwrap(), &sample, &sets, true);
        // paris → {0, 1} (not v's sentence 3), tokyo → {0}, extended → {2}.
        assert_eq!(sel[&EntityId::Detected(0)], vec![0, 1]);
        assert_eq!(sel[&EntityId::Detected(1)], vec![0]);
        assert_eq!(sel[&EntityId::Extended(0)], vec![2]);
        assert_eq!(sel.len(), 3);
        let distinct: std::collections::BTreeSet<usize> = sel.values().flatten().copied().collect();
        assert_eq!(distinct.len(), 3);

        let without = select_user_sentences(&corpus.users()[&u], sets.user(&u).unwrap(), &sample, &sets, false);
        assert_eq!(without.len(), 2);
    }

    #[test]
    fn nothing_sampled_selects_nothing() {
        let (corpus, sets) = fixture();
        let u = UserId("u".into());
        let sample = RoundSample {
            users: vec![0],
            ..RoundSample::default()
        };
        assert!(select_user_sentences(&corpus.users()[&u], sets.user(&u).unwrap(), &sample, &sets, true).is_empty());
    }
}
