use proptest::prelude::*;

use uedp::accountant::{ldp_composed_epsilon, ldp_dropout_epsilon, rdp_step, LdpSpec};
use uedp::corpus::partition_users_gaussian;
use uedp::corpus::synthetic::synthetic_corpus;
use uedp::corpus::UserId;
use uedp::dpfed::{
    aggregate_fe, aggregate_fe_plus, clip_fn, l2_norm, noise_scale, sensitivity_bound, weighted_sum, Mode,
    TrainConfig, UserDelta, Weights,
};

/// `ln ∫ N(x; 0, z²)·((1−q) + q·N(x; 1, z²)/N(x; 0, z²))^α dx / (α − 1)` by
/// Simpson's rule in log space.
fn rdp_quadrature(q: f64, z: f64, alpha: f64) -> f64 {
    let lo = -20.0 * z;
    let hi = 20.0 * z + alpha;
    let n = 40_000;
    let h = (hi - lo) / n as f64;
    let log_mix = |x: f64| {
        let t = (2.0 * x - 1.0) / (2.0 * z * z);
        if t > 0.0 {
            t + (q + (1.0 - q) * (-t).exp()).ln()
        } else {
            (1.0 - q + q * t.exp()).ln()
        }
    };
    let logs: Vec<f64> = (0..=n)
        .map(|i| {
            let x = lo + i as f64 * h;
            -x * x / (2.0 * z * z) - (z * (2.0 * std::f64::consts::PI).sqrt()).ln() + alpha * log_mix(x)
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let c = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            c * (l - m).exp()
        })
        .sum();
    ((sum * h / 3.0).ln() + m) / (alpha - 1.0)
}

fn weights(w_u: &[f64], w_e: &[f64], w_s: &[f64]) -> Weights {
    let users = (0..w_u.len()).map(|i| UserId(format!("u{i}"))).collect();
    Weights::from_parts(users, w_u.to_vec(), w_e.to_vec(), w_s.to_vec())
}

proptest! {
    #[test]
    fn clipped_norm_never_exceeds_beta(v in prop::collection::vec(-1e3f64..1e3, 1..20), beta in 1e-3f64..10.0) {
        let c = clip_fn(&v, beta);
        prop_assert!(l2_norm(&c) <= beta * (1.0 + 1e-12));
        if l2_norm(&v) <= beta {
            prop_assert_eq!(c, v);
        } else {
            let k = l2_norm(&v) / beta;
            for (a, b) in c.iter().zip(&v) {
                prop_assert!((a * k - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn partition_keeps_every_sentence_once(n in 1usize..120, mean in 1.0f64..30.0, std in 0.0f64..10.0, seed in any::<u64>()) {
        let corpus = synthetic_corpus(n, 3, 5, 1);
        let parted = partition_users_gaussian(&corpus, mean, std, seed).unwrap();
        prop_assert_eq!(parted.num_sentences(), n);
        let mut seen: Vec<usize> = parted.users().values().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        prop_assert!(parted.users().values().all(|s| !s.is_empty()));
        let mut before: Vec<Vec<String>> = corpus.sentences().iter().map(|s| s.tokens.clone()).collect();
        let mut after: Vec<Vec<String>> = parted.sentences().iter().map(|s| s.tokens.clone()).collect();
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn subsampled_rdp_sits_between_zero_and_the_full_gaussian(q in 1e-4f64..1.0, z in 0.5f64..8.0, alpha in 1.01f64..64.0) {
        let r = rdp_step(q, z, alpha);
        let full = alpha.ceil() / (2.0 * z * z);
        prop_assert!(r >= 0.0);
        prop_assert!(r <= full * (1.0 + 1e-9), "{} > {}", r, full);
    }

    #[test]
    fn integer_orders_match_quadrature(q in 1e-3f64..0.5, z in 0.8f64..5.0, alpha in 2u32..16) {
        let a = f64::from(alpha);
        let r = rdp_step(q, z, a);
        let oracle = rdp_quadrature(q, z, a);
        prop_assert!((r - oracle).abs() <= 0.05 * oracle.max(1e-12) + 1e-12, "{} vs {}", r, oracle);
    }

    #[test]
    fn fractional_orders_are_charged_an_upper_bound(q in 1e-3f64..0.5, z in 0.8f64..5.0, alpha in 1.1f64..12.0) {
        let oracle = rdp_quadrature(q, z, alpha);
        prop_assert!(rdp_step(q, z, alpha) >= oracle * (1.0 - 1e-6) - 1e-12);
    }

    #[test]
    fn dropout_never_costs_more_than_composition(k in 1u32..2000, eps in 1e-4f64..2.0, mu in 0.0f64..=1.0) {
        let spec = LdpSpec::new(k, eps, mu).unwrap();
        prop_assert!(ldp_dropout_epsilon(&spec) <= ldp_composed_epsilon(&spec) * (1.0 + 1e-12));
    }

    #[test]
    fn estimators_are_homogeneous(
        deltas in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..5),
        w in prop::collection::vec(0.01f64..1.0, 5),
        c in -10.0f64..10.0,
    ) {
        let ws = weights(&w[..deltas.len()], &[0.5, 0.25], &[0.75]);
        let cfg = TrainConfig::default();
        let per_user: Vec<UserDelta> = deltas.iter().enumerate().map(|(u, d)| UserDelta { user: u, delta: d.clone() }).collect();
        let scaled: Vec<UserDelta> = per_user.iter().map(|d| UserDelta { user: d.user, delta: d.delta.iter().map(|x| c * x).collect() }).collect();
        for (a, b) in [
            (aggregate_fe_plus(&per_user, &ws, &cfg, 3).unwrap(), aggregate_fe_plus(&scaled, &ws, &cfg, 3).unwrap()),
            (aggregate_fe(&per_user, &ws, &cfg, 3).unwrap(), aggregate_fe(&scaled, &ws, &cfg, 3).unwrap()),
        ] {
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((c * x - y).abs() <= 1e-9 * (c * x).abs().max(1.0));
            }
        }
    }

    #[test]
    fn extended_weight_lowers_the_noise(
        w_u in prop::collection::vec(0.01f64..1.0, 1..6),
        w_s in prop::collection::vec(0.01f64..1.0, 1..6),
        extra in 0.01f64..1.0,
    ) {
        let cfg = TrainConfig::default();
        let before = noise_scale(&weights(&w_u, &[0.5], &w_s), &cfg, w_u.len(), Mode::UedpFePlus).unwrap();
        let mut more = w_s.clone();
        more.push(extra);
        let after = noise_scale(&weights(&w_u, &[0.5], &more), &cfg, w_u.len(), Mode::UedpFePlus).unwrap();
        prop_assert!(after < before);
    }
}

/// Two users of `D` both sampled and both holding `e'`, whose arrival flips
/// their clipped updates. The realized change exceeds the bound built on the
/// expected sample size `q_u·|U| = 1`.
#[test]
fn bound_can_be_exceeded_when_more_users_than_expected_are_sampled() {
    let beta = 1.0;
    let cfg = TrainConfig {
        q_u: 0.5,
        q_e: 1.0,
        beta,
        mode: Mode::UedpFe,
        ..TrainConfig::default()
    };
    // Users 0 and 1 form D, user 2 is u'; one detected entity x in D.
    let mut ws = weights(&[1.0, 1.0], &[1.0], &[]);
    ws.users.push(UserId("u2".into()));
    ws.w_u.push(1.0);
    let denom = uedp::dpfed::denominator(&ws, &cfg, Mode::UedpFe).unwrap();

    // x alone pushes each user along +e1; adding e' pushes harder along -e1.
    let x = [10.0, 0.0];
    let with_prime = [-20.0, 0.0];
    let before: Vec<UserDelta> = (0..2).map(|u| UserDelta { user: u, delta: clip_fn(&x, beta) }).collect();
    let mut after: Vec<UserDelta> = (0..2).map(|u| UserDelta { user: u, delta: clip_fn(&with_prime, beta) }).collect();
    after.push(UserDelta { user: 2, delta: clip_fn(&[0.0, 3.0], beta) });

    let a = weighted_sum(&before, &ws, denom, 2);
    let b = weighted_sum(&after, &ws, denom, 2);
    let change = l2_norm(&[b[0] - a[0], b[1] - a[1]]);
    let bound = sensitivity_bound(&ws, &cfg, 2, Mode::UedpFe).unwrap();
    assert!((bound * denom - 2.0).abs() < 1e-12);
    assert!(change > bound, "{change} <= {bound}");
    // Each holder moves by 2β and u' by β.
    assert!((change * denom - (4.0f64 * 4.0 + 1.0).sqrt()).abs() < 1e-12);
}
