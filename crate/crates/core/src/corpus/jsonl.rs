//! JSONL corpus records.
//!
//! ```text
//! {"id": 0, "user_id": "u1", "tokens": ["a", "b"], "entities": [{"category": "Org", "start": 0, "end": 1}]}
//! ```
//!
//! `id`, `user_id` and `label` are optional on input. Missing ids default to
//! the 0-based record index; missing owners become [`UserId::unassigned`].
//! Tokens and spans are taken verbatim.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    resolve_overlaps, Category, Corpus, CorpusError, EntitySpan, Ingested, ParseWarning,
    Sentence, UserId, DEFAULT_MIN_COUNT,
};

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct SpanRecord {
    pub category: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Record {
    #[serde(default)]
    pub id: Option<u64>,
    #[serde(default)]
    pub user_id: Option<String>,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub entities: Vec<SpanRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
}

impl Record {
    pub fn from_sentence(s: &Sentence) -> Self {
        Self {
            id: Some(s.id),
            user_id: Some(s.owner.0.clone()),
            tokens: s.tokens.clone(),
            entities: s
                .spans
                .iter()
                .map(|sp| SpanRecord {
                    category: sp.category.name().to_string(),
                    start: sp.start,
                    end: sp.end,
                })
                .collect(),
            label: s.label,
        }
    }
}

pub fn parse_jsonl(path: impl AsRef<Path>) -> Result<Ingested, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl_str(&text, DEFAULT_MIN_COUNT)
}

pub fn parse_jsonl_str(text: &str, min_count: usize) -> Result<Ingested, CorpusError> {
    let mut sentences = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(raw).map_err(|e| CorpusError::Record {
            line,
            message: e.to_string(),
        })?;
        let id = rec.id.unwrap_or(sentences.len() as u64);
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateSentenceId { line, id });
        }
        let mut spans = Vec::with_capacity(rec.entities.len());
        for e in &rec.entities {
            let category = e
                .category
                .parse::<Category>()
                .map_err(|source| CorpusError::Category { line, source })?;
            let span = EntitySpan::new(category, e.start, e.end, &rec.tokens).ok_or(
                CorpusError::SpanOutOfRange {
                    line,
                    start: e.start,
                    end: e.end,
                    len: rec.tokens.len(),
                },
            )?;
            spans.push(span);
        }
        let overlapping = spans
            .iter()
            .enumerate()
            .any(|(i, a)| spans[i + 1..].iter().any(|b| a.overlaps(b)));
        if overlapping {
            let dropped = resolve_overlaps(&mut spans);
            warnings.push(ParseWarning {
                line,
                message: format!("{dropped} overlapping span(s) dropped"),
            });
        }
        sentences.push(Sentence {
            id,
            owner: rec.user_id.map(UserId).unwrap_or_else(UserId::unassigned),
            tokens: rec.tokens,
            spans,
            label: rec.label,
        });
    }

    Ok(Ingested {
        corpus: Corpus::new(sentences, min_count),
        warnings,
    })
}
