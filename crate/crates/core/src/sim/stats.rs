//! Statistical oracles: the Monte Carlo sweep for the optimal stopping
//! threshold and a Kolmogorov-Smirnov uniformity test for the residual-time
//! samples.

use super::rng::Rng;
use super::RunMetrics;
use crate::{Error, Result};

/// Brute-force oracle for the optimal stopping ratio: simulate the renewal
/// process (geometric inter-opportunity gaps with success probability
/// `1 - p_idle`, residual times uniform on `[0, t_lbt]`) for a grid of
/// candidate thresholds and return the grid argmax of the empirical goodput
/// rate.
///
/// Returns `(best_threshold, best_rate)`.
pub fn monte_carlo_lambda(
    p_idle: f64,
    t_slot: f64,
    t_lbt: f64,
    threshold_grid: usize,
    draws: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(
        threshold_grid >= 2,
        "need at least two candidate thresholds"
    );
    assert!(draws >= 100_000, "need enough draws for a stable argmax");

    let mut best_threshold = 0.0;
    let mut best_rate = f64::NEG_INFINITY;
    for g in 0..threshold_grid {
        let threshold = t_lbt * g as f64 / (threshold_grid - 1) as f64;
        let rate = mc_rate_for_threshold(p_idle, t_slot, t_lbt, threshold, draws, seed);
        if rate > best_rate {
            best_rate = rate;
            best_threshold = threshold;
        }
    }
    (best_threshold, best_rate)
}

/// Empirical goodput rate of one fixed threshold under the simulated
/// renewal process. `monte_carlo_lambda` evaluates this over a grid with
/// common random numbers (same seed for every candidate).
pub fn mc_rate_for_threshold(
    p_idle: f64,
    t_slot: f64,
    t_lbt: f64,
    threshold: f64,
    draws: usize,
    seed: u64,
) -> f64 {
    assert!(p_idle > 0.0 && p_idle < 1.0);
    let phi = 1.0 - p_idle;
    let ln_miss = (1.0 - phi).ln();
    let mut rng = Rng::from_seed_stream(seed, 0x4d43);
    let mut gained = 0.0;
    let mut invested = 0.0;
    for _ in 0..draws {
        // Slots until the next opportunity, geometric with mean 1/phi.
        let u = rng.next_f64();
        let k = if phi >= 1.0 {
            1.0
        } else {
            ((1.0 - u).ln() / ln_miss).floor() + 1.0
        };
        invested += k * t_slot;
        let t_res = rng.next_f64() * t_lbt;
        if t_res < threshold {
            gained += t_lbt - t_res;
            invested += t_lbt;
        }
    }
    if invested > 0.0 {
        gained / invested
    } else {
        0.0
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against the uniform
/// law on `[0, upper]`.
pub fn ks_statistic_uniform(samples: &[f64], upper: f64) -> f64 {
    assert!(!samples.is_empty());
    assert!(upper > 0.0);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = (x / upper).clamp(0.0, 1.0);
        let below = i as f64 / n;
        let above = (i + 1) as f64 / n;
        sup = sup.max((f - below).abs()).max((above - f).abs());
    }
    sup
}

/// Asymptotic critical value of the KS statistic at significance `alpha`:
/// `sqrt(ln(2/alpha) / (2n))`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    assert!(n > 0);
    assert!(alpha > 0.0 && alpha < 1.0);
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// KS statistic of the residual-time samples recorded by a synchronous-mode
/// run against the uniform law on `[0, t_lbt]`.
///
/// Requires at least 10^4 samples for the asymptotic critical values to be
/// meaningful.
pub fn sample_t_res_distribution(metrics: &RunMetrics, t_lbt: f64) -> Result<f64> {
    const MIN_SAMPLES: usize = 10_000;
    if metrics.t_res_samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: metrics.t_res_samples.len(),
            need: MIN_SAMPLES,
        });
    }
    Ok(ks_statistic_uniform(&metrics.t_res_samples, t_lbt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monte_carlo_recovers_closed_form_rate() {
        // beta = 0.5 -> lambda = 0.381966; the optimal empirical rate of
        // return equals lambda.
        let t_lbt = 1000.0;
        let p_idle = 0.5;
        let t_slot = 0.5 * (1.0 - p_idle) * t_lbt;
        let (thr, rate) = monte_carlo_lambda(p_idle, t_slot, t_lbt, 50, 200_000, 11);
        let lambda = 0.3819660112501051;
        assert!((rate - lambda).abs() / lambda < 0.02, "rate {rate}");
        // The optimal threshold is T(1 - lambda).
        assert!(
            (thr - t_lbt * (1.0 - lambda)).abs() < 2.0 * t_lbt / 49.0,
            "thr {thr}"
        );
    }

    #[test]
    fn take_all_is_suboptimal_when_waiting_is_cheap() {
        let t_lbt = 1000.0;
        let p_idle = 0.5;
        let t_slot = 0.5 * (1.0 - p_idle) * t_lbt;
        let (_, best) = monte_carlo_lambda(p_idle, t_slot, t_lbt, 50, 200_000, 3);
        let take_all = mc_rate_for_threshold(p_idle, t_slot, t_lbt, t_lbt, 200_000, 3);
        assert!(take_all < best, "take-all {take_all} vs best {best}");
    }

    #[test]
    fn zero_threshold_never_takes() {
        let rate = mc_rate_for_threshold(0.5, 250.0, 1000.0, 0.0, 100_000, 5);
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn solver_threshold_beats_the_whole_grid() {
        // The stopping rule computed analytically must not lose to any
        // fixed threshold on the 50-point grid (flat optimum: 1% band).
        let t_lbt = 1000.0;
        let p_idle = 0.5;
        for beta in [0.2f64, 0.5, 2.0] {
            let t_slot = beta * (1.0 - p_idle) * t_lbt;
            let lambda = crate::policy::solve_lambda_opt(p_idle, t_slot, t_lbt).unwrap();
            let solver_thr = t_lbt * (1.0 - lambda);
            let solver_rate = mc_rate_for_threshold(p_idle, t_slot, t_lbt, solver_thr, 300_000, 21);
            let (_, best) = monte_carlo_lambda(p_idle, t_slot, t_lbt, 50, 300_000, 21);
            assert!(
                solver_rate >= best * 0.99,
                "beta={beta}: solver rate {solver_rate} vs grid best {best}"
            );
        }
    }

    #[test]
    fn ks_calibration_uniform_passes() {
        let mut rng = Rng::from_seed_stream(17, 2);
        let samples: Vec<f64> = (0..50_000).map(|_| rng.next_f64() * 1000.0).collect();
        let d = ks_statistic_uniform(&samples, 1000.0);
        assert!(d < ks_critical_value(samples.len(), 0.01), "d = {d}");
    }

    #[test]
    fn ks_rejects_degenerate_lattice() {
        // A residual process with zero randomness piles all mass on one
        // point; uniformity must fail decisively.
        let samples = vec![250.0; 20_000];
        let d = ks_statistic_uniform(&samples, 1000.0);
        assert!(d > 0.7, "d = {d}");
        assert!(d > ks_critical_value(samples.len(), 0.01));
    }

    #[test]
    fn ks_statistic_exact_small_case() {
        // Single sample at the midpoint: D = max(0.5, 0.5) = 0.5.
        let d = ks_statistic_uniform(&[500.0], 1000.0);
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn t_res_uniformity_needs_samples() {
        let metrics = RunMetrics {
            t_res_samples: vec![1.0; 10],
            ..RunMetrics::empty(0)
        };
        assert!(matches!(
            sample_t_res_distribution(&metrics, 1000.0),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
