use std::ops::Range;

use rand_distr::{Distribution, Normal};

use super::{DpError, Mode, TrainConfig, Weights};
use crate::rng::{substream, Purpose};

/// One user's update, `user` indexing [`Weights::users`].
#[derive(Debug, Clone, PartialEq)]
pub struct UserDelta {
    pub user: usize,
    pub delta: Vec<f64>,
}

/// Normalizer of the weighted estimator for a private mode:
///
/// - `uedp_fe_plus`: `q_u·W_u·(q_e·W_e + q_s·W_s)`
/// - `uedp_fe`: `q_u·W_u·q_e·W_e`
/// - `user_level`: `q_u·W_u`
pub fn denominator(weights: &Weights, cfg: &TrainConfig, mode: Mode) -> Result<f64, DpError> {
    let user = cfg.q_u * weights.total_u;
    let d = match mode {
        Mode::UedpFePlus => user * (cfg.q_e * weights.total_e + cfg.q_s * weights.total_s),
        Mode::UedpFe => user * cfg.q_e * weights.total_e,
        Mode::UserLevel => user,
        Mode::Deid | Mode::Noiseless => {
            return Err(DpError::Config {
                field: "mode",
                message: format!("{mode} has no weighted estimator"),
            })
        }
    };
    if d > 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(DpError::ZeroDenominator {
            mode,
            detail: format!(
                "q_u={}, W_u={}, q_e={}, W_e={}, q_s={}, W_s={}",
                cfg.q_u, weights.total_u, cfg.q_e, weights.total_e, cfg.q_s, weights.total_s
            ),
        })
    }
}

/// `Σ w_u·Δ_u / denom`, summed in ascending user order.
pub fn weighted_sum(per_user: &[UserDelta], weights: &Weights, denom: f64, dim: usize) -> Vec<f64> {
    let mut order: Vec<&UserDelta> = per_user.iter().collect();
    order.sort_by_key(|d| d.user);
    let mut out = vec![0.0; dim];
    for d in order {
        let w = weights.w_u[d.user];
        for (o, v) in out.iter_mut().zip(&d.delta) {
            *o += w * v;
        }
    }
    out.iter_mut().for_each(|v| *v /= denom);
    out
}

pub fn aggregate_fe_plus(
    per_user: &[UserDelta],
    weights: &Weights,
    cfg: &TrainConfig,
    dim: usize,
) -> Result<Vec<f64>, DpError> {
    let denom = denominator(weights, cfg, Mode::UedpFePlus)?;
    Ok(weighted_sum(per_user, weights, denom, dim))
}

pub fn aggregate_fe(
    per_user: &[UserDelta],
    weights: &Weights,
    cfg: &TrainConfig,
    dim: usize,
) -> Result<Vec<f64>, DpError> {
    let denom = denominator(weights, cfg, Mode::UedpFe)?;
    Ok(weighted_sum(per_user, weights, denom, dim))
}

/// `Σ n_u·Δ_u / Σ n_u` over the given users.
pub fn federated_average(per_user: &[UserDelta], sizes: &[usize], dim: usize) -> Vec<f64> {
    let mut order: Vec<&UserDelta> = per_user.iter().collect();
    order.sort_by_key(|d| d.user);
    let mut out = vec![0.0; dim];
    let mut total = 0.0;
    for d in order {
        let n = sizes[d.user] as f64;
        total += n;
        for (o, v) in out.iter_mut().zip(&d.delta) {
            *o += n * v;
        }
    }
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// `(q_u·|U| + 1)·max w_u·β` over the mode's estimator denominator.
pub fn sensitivity_bound(weights: &Weights, cfg: &TrainConfig, num_users: usize, mode: Mode) -> Result<f64, DpError> {
    let denom = denominator(weights, cfg, mode)?;
    Ok((cfg.q_u * num_users as f64 + 1.0) * weights.max_w_u() * cfg.beta / denom)
}

/// Standard deviation `σ = z · sensitivity_bound` of the Gaussian noise.
pub fn noise_scale(weights: &Weights, cfg: &TrainConfig, num_users: usize, mode: Mode) -> Result<f64, DpError> {
    Ok(cfg.z * sensitivity_bound(weights, cfg, num_users, mode)?)
}

/// Adds i.i.d. `N(0, σ²)` to every coordinate outside `frozen` and returns
/// the draw. Deterministic in `(seed, round)`.
pub fn add_noise(theta: &mut [f64], frozen: Range<usize>, sigma: f64, seed: u64, round: u64) -> Vec<f64> {
    let mut noise = vec![0.0; theta.len()];
    if sigma == 0.0 {
        return noise;
    }
    let normal = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    let mut rng = substream(seed, round, Purpose::Noise);
    for (i, (t, n)) in theta.iter_mut().zip(noise.iter_mut()).enumerate() {
        if frozen.contains(&i) {
            continue;
        }
        *n = normal.sample(&mut rng);
        *t += *n;
    }
    noise
}
