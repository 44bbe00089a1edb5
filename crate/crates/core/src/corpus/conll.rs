//! CoNLL-style BIO token files.
//!
//! One token per line with the entity tag in the last column, a blank line
//! between sentences and `-DOCSTART-` opening each document. Each document
//! becomes one user. Tokens are lowercased and stripped of punctuation;
//! tokens left empty are dropped before spans are rebuilt.

use std::path::Path;

use super::{
    Category, Corpus, CorpusError, EntitySpan, Ingested, ParseWarning, Sentence, UserId,
    DEFAULT_MIN_COUNT,
};

pub fn parse_conll(path: impl AsRef<Path>) -> Result<Ingested, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_conll_str(&text, DEFAULT_MIN_COUNT)
}

/// Normalizes a raw token: lowercase, punctuation removed.
pub fn normalize_token(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

enum Tag {
    Outside,
    Begin(Category),
    Inside(Category),
}

fn parse_tag(tag: &str, line: usize) -> Result<Tag, CorpusError> {
    if tag == "O" {
        return Ok(Tag::Outside);
    }
    let (prefix, label) = tag.split_once('-').ok_or_else(|| CorpusError::Record {
        line,
        message: format!("malformed tag `{tag}`"),
    })?;
    let cat = label
        .parse::<Category>()
        .map_err(|source| CorpusError::Category { line, source })?;
    match prefix {
        "B" => Ok(Tag::Begin(cat)),
        "I" => Ok(Tag::Inside(cat)),
        _ => Err(CorpusError::Record {
            line,
            message: format!("malformed tag `{tag}`"),
        }),
    }
}

struct Pending {
    tokens: Vec<String>,
    tags: Vec<(Tag, usize)>,
}

impl Pending {
    fn new() -> Self {
        Self {
            tokens: Vec::new(),
            tags: Vec::new(),
        }
    }
}

fn finish(
    pending: &mut Pending,
    doc: usize,
    out: &mut Vec<Sentence>,
    warnings: &mut Vec<ParseWarning>,
) {
    let Pending { tokens, tags } = std::mem::replace(pending, Pending::new());
    if tokens.is_empty() {
        return;
    }
    let mut spans = Vec::new();
    let mut open: Option<(Category, usize)> = None;
    let close = |open: &mut Option<(Category, usize)>, end: usize, spans: &mut Vec<EntitySpan>| {
        if let Some((cat, start)) = open.take() {
            spans.extend(EntitySpan::new(cat, start, end, &tokens));
        }
    };
    for (i, (tag, line)) in tags.iter().enumerate() {
        match *tag {
            Tag::Outside => close(&mut open, i, &mut spans),
            Tag::Begin(cat) => {
                close(&mut open, i, &mut spans);
                open = Some((cat, i));
            }
            Tag::Inside(cat) => match open {
                Some((c, _)) if c == cat => {}
                _ => {
                    close(&mut open, i, &mut spans);
                    warnings.push(ParseWarning {
                        line: *line,
                        message: format!("I-{cat} without preceding B-{cat}; span starts here"),
                    });
                    open = Some((cat, i));
                }
            },
        }
    }
    close(&mut open, tokens.len(), &mut spans);
    let id = out.len() as u64;
    out.push(Sentence {
        id,
        owner: UserId(format!("doc-{doc:05}")),
        tokens,
        spans,
        label: None,
    });
}

/// Parses CoNLL text held in memory.
pub fn parse_conll_str(text: &str, min_count: usize) -> Result<Ingested, CorpusError> {
    let mut sentences = Vec::new();
    let mut warnings = Vec::new();
    let mut pending = Pending::new();
    let mut doc = 0usize;
    let mut seen_docstart = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.is_empty() {
            finish(&mut pending, doc, &mut sentences, &mut warnings);
            continue;
        }
        if cols[0] == "-DOCSTART-" {
            finish(&mut pending, doc, &mut sentences, &mut warnings);
            // Sentences before the first marker form document 0.
            if seen_docstart || !sentences.is_empty() {
                doc += 1;
            }
            seen_docstart = true;
            continue;
        }
        if cols.len() < 2 {
            return Err(CorpusError::Record {
                line,
                message: "expected a token and a tag".to_string(),
            });
        }
        let tag = parse_tag(cols[cols.len() - 1], line)?;
        let token = normalize_token(cols[0]);
        if token.is_empty() {
            continue;
        }
        pending.tokens.push(token);
        pending.tags.push((tag, line));
    }
    finish(&mut pending, doc, &mut sentences, &mut warnings);

    Ok(Ingested {
        corpus: Corpus::new(sentences, min_count),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bio_reconstruction() {
        let parsed = parse_conll_str("David NNP B-PER\nJohnson NNP I-PER\nran VBD O\n", 1).unwrap();
        let c = parsed.corpus;
        assert_eq!(c.num_sentences(), 1);
        let s = c.sentence(0);
        assert_eq!(s.tokens, vec!["david", "johnson", "ran"]);
        assert_eq!(s.spans.len(), 1);
        assert_eq!((s.spans[0].category, s.spans[0].start, s.spans[0].end), (Category::Person, 0, 2));
        assert_eq!(s.spans[0].surface, "david johnson");
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn empty_input() {
        let c = parse_conll_str("", 2).unwrap().corpus;
        assert_eq!(c.num_users(), 0);
        assert_eq!(c.num_sentences(), 0);
    }

    #[test]
    fn stray_inside_tag_warns_and_opens_span() {
        let parsed = parse_conll_str("in O\nnew I-LOC\nyork I-LOC\n", 1).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].line, 2);
        let s = parsed.corpus.sentence(0).clone();
        assert_eq!((s.spans[0].start, s.spans[0].end), (1, 3));
    }

    #[test]
    fn category_switch_inside_closes_previous() {
        let parsed = parse_conll_str("a B-ORG\nb I-LOC\n", 1).unwrap();
        let s = parsed.corpus.sentence(0).clone();
        assert_eq!(s.spans.len(), 2);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn docstart_splits_users_and_punctuation_is_dropped() {
        let text = "-DOCSTART- -X- O\n\nEU B-ORG\nrejects O\n. O\n\nPeter B-PER\n\n-DOCSTART- -X- O\n\nU.S. B-LOC\nwins O\n";
        let c = parse_conll_str(text, 1).unwrap().corpus;
        assert_eq!(c.num_users(), 2);
        assert_eq!(c.num_sentences(), 3);
        assert_eq!(c.sentence(0).tokens, vec!["eu", "rejects"]);
        assert_eq!(c.sentence(2).tokens, vec!["us", "wins"]);
        assert_eq!(c.sentence(2).owner.0, "doc-00001");
    }

    #[test]
    fn malformed_tag_is_fatal() {
        assert!(parse_conll_str("a X-ORG\n", 1).is_err());
        assert!(parse_conll_str("a B-COLOUR\n", 1).is_err());
    }

    #[test]
    fn unreadable_file_is_error() {
        assert!(matches!(
            parse_conll("/nonexistent/file.conll"),
            Err(CorpusError::Io { .. })
        ));
    }
}
