use serde::Serialize;

use super::TrainConfig;
use crate::corpus::{Corpus, EntitySets, UserId};

/// Capped contribution weights for users, detected entities and extended
/// entities, with their totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Weights {
    /// Users in ascending id order; `w_u[i]` belongs to `users[i]`.
    pub users: Vec<UserId>,
    pub w_u: Vec<f64>,
    pub w_e: Vec<f64>,
    pub w_s: Vec<f64>,
    pub total_u: f64,
    pub total_e: f64,
    pub total_s: f64,
    /// Sentences per user.
    pub n_u: Vec<usize>,
    /// Sentences per detected entity.
    pub n_e: Vec<usize>,
    /// Size of each extended entity, always one sentence.
    pub n_s: Vec<usize>,
    /// Caps `(ŵ_u, ŵ_e, ŵ_s)` actually applied.
    pub caps: (f64, f64, f64),
}

/// Median of `counts`; the mean of the two middle values for an even count,
/// 1 for an empty list.
pub fn median(counts: &[usize]) -> f64 {
    if counts.is_empty() {
        return 1.0;
    }
    let mut v = counts.to_vec();
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    }
}

fn capped(counts: &[usize], cap: f64) -> Vec<f64> {
    counts.iter().map(|&n| (n as f64 / cap).min(1.0)).collect()
}

impl Weights {
    pub fn compute(corpus: &Corpus, sets: &EntitySets, cfg: &TrainConfig) -> Self {
        let users: Vec<UserId> = corpus.users().keys().cloned().collect();
        let n_u: Vec<usize> = corpus.users().values().map(Vec::len).collect();
        let n_e: Vec<usize> = sets.detected.iter().map(|e| e.sentences.len()).collect();
        let n_s = vec![1; sets.num_extended()];
        let caps = (
            cfg.cap_u.unwrap_or_else(|| median(&n_u)).max(f64::MIN_POSITIVE),
            cfg.cap_e.unwrap_or_else(|| median(&n_e)).max(f64::MIN_POSITIVE),
            cfg.cap_s.unwrap_or_else(|| median(&n_s)).max(f64::MIN_POSITIVE),
        );
        let mut w = Self::from_parts(
            users,
            capped(&n_u, caps.0),
            capped(&n_e, caps.1),
            capped(&n_s, caps.2),
        );
        w.n_u = n_u;
        w.n_e = n_e;
        w.n_s = n_s;
        w.caps = caps;
        w
    }

    /// Weights given directly, e.g. for fixtures. Counts are left empty and
    /// caps at 1.
    pub fn from_parts(users: Vec<UserId>, w_u: Vec<f64>, w_e: Vec<f64>, w_s: Vec<f64>) -> Self {
        assert_eq!(users.len(), w_u.len(), "one weight per user");
        Self {
            users,
            total_u: w_u.iter().sum(),
            total_e: w_e.iter().sum(),
            total_s: w_s.iter().sum(),
            w_u,
            w_e,
            w_s,
            n_u: Vec::new(),
            n_e: Vec::new(),
            n_s: Vec::new(),
            caps: (1.0, 1.0, 1.0),
        }
    }

    pub fn max_w_u(&self) -> f64 {
        self.w_u.iter().copied().fold(0.0, f64::max)
    }
}
