use std::collections::{BTreeMap, HashMap};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const ENT_TOKEN: &str = "<ent>";

/// Token vocabulary. Ids 0, 1 and 2 are `<pad>`, `<unk>` and `<ent>`; the
/// remaining tokens follow in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub const PAD: u32 = 0;
    pub const UNK: u32 = 1;
    pub const ENT: u32 = 2;

    /// Keeps tokens seen at least `min_count` times; the rest map to `<unk>`.
    pub fn build<'a>(sentences: impl Iterator<Item = &'a [String]>, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for tokens in sentences {
            for t in tokens {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let reserved = [PAD_TOKEN, UNK_TOKEN, ENT_TOKEN];
        let mut tokens: Vec<String> = reserved.iter().map(|s| s.to_string()).collect();
        tokens.extend(
            counts
                .into_iter()
                .filter(|(t, n)| *n >= min_count.max(1) && !reserved.contains(t))
                .map(|(t, _)| t.to_string()),
        );
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// One token per line, in id order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    /// Inverse of [`Vocab::to_text`].
    pub fn from_text(text: &str) -> Result<Self, String> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        let reserved = [PAD_TOKEN, UNK_TOKEN, ENT_TOKEN];
        if tokens.len() < 3 || tokens[..3] != reserved {
            return Err("vocabulary must start with <pad>, <unk> and <ent>".to_string());
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(format!("empty token on line {}", i + 1));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(format!("duplicate token `{t}` on line {}", i + 1));
            }
        }
        Ok(Self { tokens, index })
    }
}
