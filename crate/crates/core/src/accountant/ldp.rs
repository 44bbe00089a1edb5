//! Budget formulas for word-level local DP on `k`-dimensional embeddings.
//!
//! Perturbing each of the `k` embedding coordinates of one sentence with an
//! `ε`-DP Laplace mechanism composes to `k·ε`, since every coordinate is
//! derived from the same input. Dropping the whole perturbed embedding with
//! probability `μ` amplifies this to `ln((1−μ)·e^{kε} + μ)`.

use super::AccountantError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpSpec {
    /// Embedding dimension.
    pub k: u32,
    pub eps_per_element: f64,
    /// Dropout rate.
    pub mu: f64,
}

impl LdpSpec {
    pub fn new(k: u32, eps_per_element: f64, mu: f64) -> Result<Self, AccountantError> {
        if k == 0 {
            return Err(AccountantError::Invalid("k must be at least 1".to_string()));
        }
        if !(eps_per_element >= 0.0) {
            return Err(AccountantError::Invalid(format!(
                "per-element epsilon must be >= 0, got {eps_per_element}"
            )));
        }
        super::check_probability("mu", mu)?;
        Ok(Self {
            k,
            eps_per_element,
            mu,
        })
    }
}

pub fn ldp_composed_epsilon(spec: &LdpSpec) -> f64 {
    f64::from(spec.k) * spec.eps_per_element
}

/// `ln((1−μ)·e^{kε} + μ)`, evaluated as a two-term log-sum-exp so it neither
/// overflows for large `kε` nor loses the endpoints `μ = 0` and `μ = 1`.
pub fn ldp_dropout_epsilon(spec: &LdpSpec) -> f64 {
    let keep = (1.0 - spec.mu).ln() + ldp_composed_epsilon(spec);
    let drop = spec.mu.ln();
    let (hi, lo) = if keep >= drop { (keep, drop) } else { (drop, keep) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
