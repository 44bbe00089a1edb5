//! Moments accounting for the subsampled Gaussian mechanism.
//!
//! Privacy loss is tracked as Rényi divergences at a fixed grid of orders,
//! composed linearly over rounds and converted to `(ε, δ)` with
//! `ε = min_α [ D_α + ln(1/δ) / (α − 1) ]`. Everything is in nats.

mod ldp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ldp::{ldp_composed_epsilon, ldp_dropout_epsilon, LdpSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AccountantError {
    #[error("unknown accounting strategy `{0}` (expected user_only, joint_max or joint_mixture)")]
    UnknownStrategy(String),
    #[error("{name} must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
    #[error("Rényi orders must be strictly increasing and greater than 1")]
    Orders,
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// How the joint user/entity sampling is collapsed into the single rate fed
/// to the accountant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `q_u`.
    UserOnly,
    /// `q_u · max(q_e, q_s)`.
    JointMax,
    /// `q_u · (q_e·W_e + q_s·W_s) / (W_e + W_s)`.
    JointMixture,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::UserOnly, Strategy::JointMax, Strategy::JointMixture];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::UserOnly => "user_only",
            Strategy::JointMax => "joint_max",
            Strategy::JointMixture => "joint_mixture",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = AccountantError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "user_only" => Ok(Strategy::UserOnly),
            "joint_max" => Ok(Strategy::JointMax),
            "joint_mixture" => Ok(Strategy::JointMixture),
            _ => Err(AccountantError::UnknownStrategy(s.to_string())),
        }
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<(), AccountantError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AccountantError::Probability { name, value })
    }
}

/// Sampling rate seen by the accountant under `strategy`, clamped to `[0, 1]`.
pub fn effective_rate(
    strategy: Strategy,
    q_u: f64,
    q_e: f64,
    q_s: f64,
    w_e: f64,
    w_s: f64,
) -> Result<f64, AccountantError> {
    check_probability("q_u", q_u)?;
    check_probability("q_e", q_e)?;
    check_probability("q_s", q_s)?;
    if !(w_e >= 0.0 && w_s >= 0.0) {
        return Err(AccountantError::Invalid(format!(
            "entity weight totals must be non-negative, got W_e={w_e}, W_s={w_s}"
        )));
    }
    let q = match strategy {
        Strategy::UserOnly => q_u,
        Strategy::JointMax => q_u * q_e.max(q_s),
        Strategy::JointMixture => {
            if w_e + w_s == 0.0 {
                return Err(AccountantError::Invalid(
                    "joint_mixture needs W_e + W_s > 0".to_string(),
                ));
            }
            q_u * (q_e * w_e + q_s * w_s) / (w_e + w_s)
        }
    };
    Ok(q.clamp(0.0, 1.0))
}

/// `n · ln(p)` with the convention `0 · ln 0 = 0`.
fn xlogy(n: f64, p: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n * p.ln()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn rdp_integer(q: f64, z: f64, alpha: u64) -> f64 {
    let a = alpha as f64;
    let mut log_binom = 0.0;
    let mut terms = Vec::with_capacity(alpha as usize + 1);
    for k in 0..=alpha {
        if k > 0 {
            log_binom += (a - k as f64 + 1.0).ln() - (k as f64).ln();
        }
        let kf = k as f64;
        terms.push(
            log_binom + xlogy(a - kf, 1.0 - q) + xlogy(kf, q) + kf * (kf - 1.0) / (2.0 * z * z),
        );
    }
    (log_sum_exp(&terms) / (a - 1.0)).max(0.0)
}

/// Rényi divergence of order `alpha` for one step of the Gaussian mechanism
/// with sensitivity 1, noise multiplier `z` and Poisson sampling rate `q`.
///
/// Integer orders use the binomial expansion of `E[(P/Q)^α]` for
/// `P = (1−q)·N(0, z²) + q·N(1, z²)` against `Q = N(0, z²)`. A fractional
/// order is charged the value at its ceiling, which dominates it because
/// Rényi divergence is nondecreasing in the order.
pub fn rdp_step(q: f64, z: f64, alpha: f64) -> f64 {
    assert!(alpha > 1.0, "Rényi order must exceed 1");
    if q == 0.0 {
        return 0.0;
    }
    if z == 0.0 {
        return f64::INFINITY;
    }
    rdp_integer(q, z, alpha.ceil() as u64)
}

/// Integer orders 2..=64 plus 1.5, 2.5 and 3.5.
pub fn default_orders() -> Vec<f64> {
    let mut orders: Vec<f64> = (2..=64).map(f64::from).collect();
    orders.extend([1.5, 2.5, 3.5]);
    orders.sort_by(f64::total_cmp);
    orders
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrivSpent {
    pub epsilon: f64,
    /// Minimizing order; `None` when ε is 0 or infinite.
    pub order: Option<f64>,
}

/// Rényi accountant for a fixed `(q_eff, z)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyLedger {
    orders: Vec<f64>,
    step_rdp: Vec<f64>,
    z: f64,
    q_eff: f64,
    steps: u64,
    strategy: Strategy,
}

impl PrivacyLedger {
    pub fn new(q_eff: f64, z: f64, strategy: Strategy) -> Result<Self, AccountantError> {
        Self::with_orders(q_eff, z, strategy, default_orders())
    }

    pub fn with_orders(
        q_eff: f64,
        z: f64,
        strategy: Strategy,
        orders: Vec<f64>,
    ) -> Result<Self, AccountantError> {
        check_probability("q_eff", q_eff)?;
        if !(z >= 0.0) {
            return Err(AccountantError::Invalid(format!("noise multiplier must be >= 0, got {z}")));
        }
        if orders.is_empty() || orders[0] <= 1.0 || orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AccountantError::Orders);
        }
        let step_rdp = orders.iter().map(|&a| rdp_step(q_eff, z, a)).collect();
        Ok(Self {
            orders,
            step_rdp,
            z,
            q_eff,
            steps: 0,
            strategy,
        })
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn q_eff(&self) -> f64 {
        self.q_eff
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Total divergence per order after `steps` rounds.
    pub fn accumulated(&self) -> Vec<f64> {
        let t = self.steps as f64;
        self.step_rdp
            .iter()
            .map(|&r| if self.steps == 0 { 0.0 } else { t * r })
            .collect()
    }

    pub fn accum_priv_spending(&mut self, rounds: u64) {
        self.steps += rounds;
    }

    pub fn get_priv_spent(&self, delta: f64) -> Result<PrivSpent, AccountantError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(AccountantError::Delta(delta));
        }
        let acc = self.accumulated();
        if acc.iter().all(|&a| a == 0.0) {
            return Ok(PrivSpent {
                epsilon: 0.0,
                order: None,
            });
        }
        let log_inv_delta = -delta.ln();
        let best = self
            .orders
            .iter()
            .zip(&acc)
            .map(|(&alpha, &a)| (a + log_inv_delta / (alpha - 1.0), alpha))
            .filter(|(eps, _)| eps.is_finite())
            .min_by(|x, y| x.0.total_cmp(&y.0));
        Ok(match best {
            Some((epsilon, order)) => PrivSpent {
                epsilon,
                order: Some(order),
            },
            None => PrivSpent {
                epsilon: f64::INFINITY,
                order: None,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: u64,
    pub epsilon: f64,
    pub order: Option<f64>,
}

/// ε after each of the rounds `1..=t_max`.
pub fn budget_curve(
    q: f64,
    z: f64,
    delta: f64,
    t_max: u64,
    strategy: Strategy,
) -> Result<Vec<CurvePoint>, AccountantError> {
    let mut ledger = PrivacyLedger::new(q, z, strategy)?;
    let mut out = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        ledger.accum_priv_spending(1);
        let spent = ledger.get_priv_spent(delta)?;
        out.push(CurvePoint {
            t,
            epsilon: spent.epsilon,
            order: spent.order,
        });
    }
    Ok(out)
}
