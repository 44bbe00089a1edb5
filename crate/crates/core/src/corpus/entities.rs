//! Detected (`E`) and extended (`S`) sensitive-entity sets.
//!
//! A detected entity is a `(lowercased surface, category)` pair together with
//! every sentence that mentions it. Each sentence with no active span becomes
//! an extended entity of its own, so that sentences whose entities a tagger
//! missed are still sampled and protected like any other entity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Category, Corpus, UserId};

/// Identifier in one of the two disjoint entity-id spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityId {
    Detected(usize),
    Extended(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedEntity {
    pub surface: String,
    pub category: Category,
    /// Sentence indexes, ascending, without repeats.
    pub sentences: Vec<usize>,
}

/// The entities touching one user's sentences.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserEntities {
    pub detected: Vec<usize>,
    pub extended: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySets {
    pub detected: Vec<DetectedEntity>,
    /// Extended entity id → the single sentence it stands for.
    pub extended: Vec<usize>,
    pub per_user: BTreeMap<UserId, UserEntities>,
    /// Sentence index → detected entity ids it contains.
    pub sentence_detected: Vec<Vec<usize>>,
    /// Sentence index → its extended entity id, if non-sensitive.
    pub sentence_extended: Vec<Option<usize>>,
}

impl EntitySets {
    pub fn num_detected(&self) -> usize {
        self.detected.len()
    }

    pub fn num_extended(&self) -> usize {
        self.extended.len()
    }

    pub fn user(&self, u: &UserId) -> Option<&UserEntities> {
        self.per_user.get(u)
    }
}

pub fn build_entity_sets(corpus: &Corpus) -> EntitySets {
    let active = corpus.active_categories();
    let n = corpus.num_sentences();

    let mut keyed: BTreeMap<(String, Category), Vec<usize>> = BTreeMap::new();
    let mut extended = Vec::new();
    let mut sentence_extended = vec![None; n];
    for (idx, s) in corpus.sentences().iter().enumerate() {
        let mut any = false;
        for span in s.active_spans(active) {
            any = true;
            let list = keyed.entry(span.key()).or_default();
            if list.last() != Some(&idx) {
                list.push(idx);
            }
        }
        if !any {
            sentence_extended[idx] = Some(extended.len());
            extended.push(idx);
        }
    }

    let mut sentence_detected = vec![Vec::new(); n];
    let detected: Vec<DetectedEntity> = keyed
        .into_iter()
        .enumerate()
        .map(|(id, ((surface, category), sentences))| {
            for &s in &sentences {
                sentence_detected[s].push(id);
            }
            DetectedEntity {
                surface,
                category,
                sentences,
            }
        })
        .collect();

    let mut per_user = BTreeMap::new();
    for (user, idxs) in corpus.users() {
        let mut entry = UserEntities::default();
        for &s in idxs {
            entry.detected.extend_from_slice(&sentence_detected[s]);
            entry.extended.extend(sentence_extended[s]);
        }
        entry.detected.sort_unstable();
        entry.detected.dedup();
        entry.extended.sort_unstable();
        per_user.insert(user.clone(), entry);
    }

    EntitySets {
        detected,
        extended,
        per_user,
        sentence_detected,
        sentence_extended,
    }
}
