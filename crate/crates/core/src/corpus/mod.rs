//! Annotated text corpora: users, sentences, entity spans and the derived
//! detected/extended entity sets.
//!
//! A [`Corpus`] stores sentences in a flat vector in ingestion order. The
//! per-user grouping and the vocabulary are derived indexes rebuilt whenever
//! the sentence list changes.

mod category;
pub mod conll;
pub mod entities;
pub mod jsonl;
pub mod partition;
pub mod synthetic;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use category::{Category, UnknownCategory};
pub use conll::parse_conll;
pub use entities::{build_entity_sets, DetectedEntity, EntityId, EntitySets, UserEntities};
pub use jsonl::parse_jsonl;
pub use partition::partition_users_gaussian;
pub use vocab::{Vocab, ENT_TOKEN, PAD_TOKEN, UNK_TOKEN};

/// Default minimum frequency for a token to get its own vocabulary slot.
pub const DEFAULT_MIN_COUNT: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: invalid record: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: span {start}..{end} out of range for {len} tokens")]
    SpanOutOfRange {
        line: usize,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("line {line}: duplicate sentence id {id}")]
    DuplicateSentenceId { line: usize, id: u64 },
    #[error("line {line}: {source}")]
    Category {
        line: usize,
        source: UnknownCategory,
    },
    #[error("invalid partition parameters: {0}")]
    Partition(String),
}

/// A non-fatal problem found while ingesting.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// A parsed corpus together with the warnings produced on the way.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl UserId {
    /// Owner given to JSONL records without a `user_id`, pending partitioning.
    pub fn unassigned() -> Self {
        UserId("unassigned".to_string())
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId(s.to_string())
    }
}

/// A run of tokens `start..end` tagged with one category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub category: Category,
    pub start: usize,
    pub end: usize,
    /// Covered tokens joined by single spaces, captured at ingestion. Kept
    /// intact by [`deidentify`] for auditing.
    pub surface: String,
}

impl EntitySpan {
    /// Returns `None` unless `start < end <= tokens.len()`.
    pub fn new(category: Category, start: usize, end: usize, tokens: &[String]) -> Option<Self> {
        if start >= end || end > tokens.len() {
            return None;
        }
        Some(Self {
            category,
            start,
            end,
            surface: tokens[start..end].join(" "),
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Entity identity: lowercased surface plus category.
    pub fn key(&self) -> (String, Category) {
        (self.surface.to_lowercase(), self.category)
    }

    fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub id: u64,
    pub owner: UserId,
    pub tokens: Vec<String>,
    pub spans: Vec<EntitySpan>,
    /// Class label, present only for text-classification corpora.
    pub label: Option<u32>,
}

impl Sentence {
    pub fn active_spans<'a>(
        &'a self,
        active: &'a BTreeSet<Category>,
    ) -> impl Iterator<Item = &'a EntitySpan> + 'a {
        self.spans.iter().filter(move |s| active.contains(&s.category))
    }

    pub fn is_sensitive(&self, active: &BTreeSet<Category>) -> bool {
        self.active_spans(active).next().is_some()
    }
}

/// Sorts spans by start (longer first on ties) and drops any span that
/// overlaps one already kept. Returns the number dropped.
pub(crate) fn resolve_overlaps(spans: &mut Vec<EntitySpan>) -> usize {
    spans.sort_by(|a, b| a.start.cmp(&b.start).then(b.len().cmp(&a.len())));
    let before = spans.len();
    let mut kept: Vec<EntitySpan> = Vec::with_capacity(before);
    for span in spans.drain(..) {
        if !kept.iter().any(|k| k.overlaps(&span)) {
            kept.push(span);
        }
    }
    *spans = kept;
    before - spans.len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    users: BTreeMap<UserId, Vec<usize>>,
    vocab: Vocab,
    active: BTreeSet<Category>,
    min_count: usize,
}

impl Corpus {
    /// Builds the user index and vocabulary. Every registered category is
    /// active until [`Corpus::with_active_categories`] narrows it.
    pub fn new(sentences: Vec<Sentence>, min_count: usize) -> Self {
        let vocab = Vocab::build(sentences.iter().map(|s| s.tokens.as_slice()), min_count);
        let mut corpus = Self {
            sentences,
            users: BTreeMap::new(),
            vocab,
            active: Category::ALL.into_iter().collect(),
            min_count,
        };
        corpus.reindex_users();
        corpus
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), DEFAULT_MIN_COUNT)
    }

    fn reindex_users(&mut self) {
        self.users.clear();
        for (idx, s) in self.sentences.iter().enumerate() {
            self.users.entry(s.owner.clone()).or_default().push(idx);
        }
    }

    pub fn with_active_categories(mut self, active: impl IntoIterator<Item = Category>) -> Self {
        self.active = active.into_iter().collect();
        self
    }

    /// Replaces the vocabulary, e.g. to evaluate on a split with the
    /// training vocabulary.
    pub fn with_vocab(mut self, vocab: Vocab) -> Self {
        self.vocab = vocab;
        self
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence(&self, idx: usize) -> &Sentence {
        &self.sentences[idx]
    }

    pub fn users(&self) -> &BTreeMap<UserId, Vec<usize>> {
        &self.users
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn active_categories(&self) -> &BTreeSet<Category> {
        &self.active
    }

    pub fn is_sensitive(&self, idx: usize) -> bool {
        self.sentences[idx].is_sensitive(&self.active)
    }

    pub fn sensitive_count(&self) -> usize {
        (0..self.sentences.len())
            .filter(|&i| self.is_sensitive(i))
            .count()
    }

    /// Number of sentences holding at least one span of each category, over
    /// the active categories.
    pub fn sensitive_count_by_category(&self) -> BTreeMap<Category, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.sentences {
            let cats: BTreeSet<Category> = s.active_spans(&self.active).map(|sp| sp.category).collect();
            for c in cats {
                *counts.entry(c).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Rebuilds the corpus with new owners, keeping sentence order.
    pub(crate) fn reassign_owners(&self, owners: Vec<UserId>) -> Corpus {
        debug_assert_eq!(owners.len(), self.sentences.len());
        let mut out = self.clone();
        for (s, o) in out.sentences.iter_mut().zip(owners) {
            s.owner = o;
        }
        out.reindex_users();
        out
    }

    /// Canonical JSONL form: one record per sentence in storage order, every
    /// field present except an absent `label`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            let record = jsonl::Record::from_sentence(s);
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical JSONL, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

/// Replaces every token covered by an active-category span with `<ent>`.
/// Spans, including their original surfaces, are kept.
pub fn deidentify(corpus: &Corpus) -> Corpus {
    let mut out = corpus.clone();
    for s in &mut out.sentences {
        let ranges: Vec<(usize, usize)> = s
            .active_spans(&corpus.active)
            .map(|sp| (sp.start, sp.end))
            .collect();
        for (start, end) in ranges {
            for tok in &mut s.tokens[start..end] {
                *tok = ENT_TOKEN.to_string();
            }
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    fn maine() -> Corpus {
        Corpus::new(
            vec![
                sentence(
                    0,
                    "u1",
                    "david johnson went to maine",
                    &[(Category::Person, 0, 2), (Category::Gpe, 4, 5)],
                ),
                sentence(1, "u1", "the weather was nice", &[]),
            ],
            1,
        )
    }

    #[test]
    fn deidentify_masks_active_spans() {
        let masked = deidentify(&maine());
        assert_eq!(masked.sentence(0).tokens, toks("<ent> <ent> went to <ent>"));
        assert_eq!(masked.sentence(0).spans[0].surface, "david johnson");
        assert_eq!(masked.sentence(1), maine().sentence(1));
    }

    #[test]
    fn deidentify_respects_active_categories() {
        let c = maine().with_active_categories([Category::Gpe]);
        let masked = deidentify(&c);
        assert_eq!(masked.sentence(0).tokens, toks("david johnson went to <ent>"));
    }

    #[test]
    fn sensitivity_follows_active_set() {
        let c = maine();
        assert!(c.is_sensitive(0));
        assert!(!c.is_sensitive(1));
        let c = c.with_active_categories([Category::Org]);
        assert!(!c.is_sensitive(0));
        assert_eq!(c.sensitive_count(), 0);
    }

    #[test]
    fn user_counts_sum_to_sentences() {
        let c = maine();
        let total: usize = c.users().values().map(Vec::len).sum();
        assert_eq!(total, c.num_sentences());
        assert_eq!(c.num_users(), 1);
    }

    #[test]
    fn overlaps_keep_earliest_longest() {
        let tokens = toks("a b c d e");
        let mut spans = vec![
            EntitySpan::new(Category::Org, 1, 3, &tokens).unwrap(),
            EntitySpan::new(Category::Person, 0, 2, &tokens).unwrap(),
            EntitySpan::new(Category::Loc, 0, 1, &tokens).unwrap(),
            EntitySpan::new(Category::Gpe, 3, 5, &tokens).unwrap(),
        ];
        let dropped = resolve_overlaps(&mut spans);
        assert_eq!(dropped, 2);
        let kept: Vec<_> = spans.iter().map(|s| (s.category, s.start, s.end)).collect();
        assert_eq!(kept, vec![(Category::Person, 0, 2), (Category::Gpe, 3, 5)]);
    }

    #[test]
    fn span_constructor_validates_range() {
        let tokens = toks("a b");
        assert!(EntitySpan::new(Category::Org, 1, 1, &tokens).is_none());
        assert!(EntitySpan::new(Category::Org, 0, 3, &tokens).is_none());
    }
}
