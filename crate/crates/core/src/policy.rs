//! Optimal transmission-policy parameters for an orthogonal LBT contender:
//! the admissible idle-slot budget, the per-opportunity take probability and
//! burst count, and the optimal-stopping threshold for synchronous access.

use crate::analytic::{
    self, slot_stats_heterogeneous, slot_stats_homogeneous, solve_heterogeneous_attempt_rates,
    solve_saturated_attempt_rate, tx_duration, PhyProfile, SlotStats, StationProfile,
};
use crate::{Error, Result};

/// Computed policy quantities for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    /// Largest admissible fraction of idle slots the contender may convert
    /// into holds without degrading WiFi below the one-more-station
    /// reference. May exceed 1 when the hold budget exceeds the number of
    /// opportunities; the excess is spent through back-to-back bursts.
    pub rho_bar: f64,
    /// Per-opportunity take probability.
    pub take_prob_pi: f64,
    /// Bursts transmitted back-to-back per take; at least 1, possibly
    /// fractional (the last burst is truncated).
    pub bursts_per_take_nu: f64,
    /// Optimal long-run goodput ratio of the synchronous stopping rule.
    pub lambda_opt: f64,
    /// Take threshold on the residual time to the next frame boundary,
    /// microseconds.
    pub olaa_threshold: f64,
    /// Channel-hold duration of one burst, microseconds.
    pub t_lbt: f64,
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if self.rho_bar.is_nan() || self.rho_bar < 0.0 {
            return Err(Error::Config("rho_bar must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.take_prob_pi) {
            return Err(Error::Config("take_prob_pi must be in [0, 1]".into()));
        }
        if self.bursts_per_take_nu.is_nan()
            || self.bursts_per_take_nu < 1.0
            || !self.bursts_per_take_nu.is_finite()
        {
            return Err(Error::Config(
                "bursts_per_take_nu must be finite and >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lambda_opt) {
            return Err(Error::Config("lambda_opt must be in [0, 1]".into()));
        }
        if self.t_lbt.is_nan() || self.t_lbt <= 0.0 {
            return Err(Error::Config("t_lbt must be > 0".into()));
        }
        if !(0.0..=self.t_lbt).contains(&self.olaa_threshold) {
            return Err(Error::Config("olaa_threshold must be in [0, t_lbt]".into()));
        }
        Ok(())
    }
}

/// Largest admissible idle-slot fraction for `n` identical saturated
/// stations, from the slot statistics of the n- and (n+1)-station systems.
///
/// `rho = ((T - sigma) / T_LBT) * min(1, P_tx'/p_succ' * p_succ/P_idle - P_tx/P_idle)`
/// where primes denote the (n+1)-station system and T is the frame exchange
/// duration.
pub fn rho_bar_homogeneous(
    stats_n: &SlotStats,
    stats_n1: &SlotStats,
    t: f64,
    t_lbt: f64,
    sigma: f64,
) -> Result<f64> {
    if t.is_nan() || sigma.is_nan() || t <= sigma {
        return Err(Error::Domain(format!(
            "frame duration {t} must exceed the idle slot {sigma}"
        )));
    }
    if t_lbt.is_nan() || t_lbt <= 0.0 {
        return Err(Error::Domain("t_lbt must be > 0".into()));
    }
    let p_succ_n = stats_n.p_succ_per_station[0];
    let p_succ_n1 = stats_n1.p_succ_per_station[0];
    if p_succ_n1 <= 0.0 || stats_n.p_idle <= 0.0 {
        return Err(Error::Domain("degenerate slot statistics".into()));
    }
    let second =
        (stats_n1.p_tx / p_succ_n1) * (p_succ_n / stats_n.p_idle) - stats_n.p_tx / stats_n.p_idle;
    Ok(((t - sigma) / t_lbt) * second.clamp(0.0, 1.0))
}

/// Largest admissible idle-slot fraction in the general case, from the
/// airtime-preservation condition at equality: the aggregate airtime of the
/// protected stations sharing with the contender must be at least their
/// aggregate airtime when a saturated WiFi newcomer is added instead.
///
/// Returns infinity when there is no background airtime to protect.
pub fn rho_bar_heterogeneous(
    stats_actual: &SlotStats,
    stats_plus_one: &SlotStats,
    member_indices: &[usize],
    t_lbt: f64,
) -> Result<f64> {
    if t_lbt.is_nan() || t_lbt <= 0.0 {
        return Err(Error::Domain("t_lbt must be > 0".into()));
    }
    if stats_actual.p_idle <= 0.0 {
        return Err(Error::Domain(
            "degenerate slot statistics: no idle slots".into(),
        ));
    }
    let sum_actual: f64 = member_indices
        .iter()
        .map(|&i| stats_actual.p_succ_per_station[i] * stats_actual.t_succ_per_station[i])
        .sum();
    let sum_plus_one: f64 = member_indices
        .iter()
        .map(|&i| stats_plus_one.p_succ_per_station[i] * stats_plus_one.t_succ_per_station[i])
        .sum();
    if sum_plus_one <= 0.0 {
        // Nothing to protect: full availability.
        return Ok(f64::INFINITY);
    }
    let budget = (sum_actual / sum_plus_one) * stats_plus_one.t_slot - stats_actual.t_slot;
    Ok((budget / (stats_actual.p_idle * t_lbt)).max(0.0))
}

/// Fraction of collision-free opportunities the contender may take:
/// `min(1, rho * P_idle / (1 - P_idle))`.
pub fn take_probability(rho: f64, p_idle: f64) -> Result<f64> {
    if p_idle.is_nan() || p_idle <= 0.0 || p_idle >= 1.0 {
        return Err(Error::Domain(format!(
            "p_idle must be strictly inside (0, 1), got {p_idle}"
        )));
    }
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::Domain("rho must be >= 0".into()));
    }
    Ok((rho * p_idle / (1.0 - p_idle)).min(1.0))
}

/// Bursts transmitted back-to-back per take:
/// `max(1, rho * P_idle / (1 - P_idle))`.
///
/// Fractional values schedule `floor(nu)` full bursts plus one truncated
/// burst, preserving the exact airtime budget.
pub fn bursts_per_take(rho: f64, p_idle: f64) -> Result<f64> {
    if p_idle.is_nan() || p_idle <= 0.0 || p_idle >= 1.0 {
        return Err(Error::Domain(format!(
            "p_idle must be strictly inside (0, 1), got {p_idle}"
        )));
    }
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::Domain("rho must be >= 0".into()));
    }
    Ok((rho * p_idle / (1.0 - p_idle)).max(1.0))
}

/// Exact `E[(Y - lambda*T_LBT)^+]` when the useful time Y is uniform on
/// `[0, T_LBT]`: `T_LBT * (1 - lambda)^2 / 2`.
pub fn expect_plus_uniform(t_lbt: f64) -> impl Fn(f64) -> f64 {
    move |lambda: f64| {
        let c = (1.0 - lambda).max(0.0);
        t_lbt * c * c / 2.0
    }
}

/// `E[(Y - lambda*T_LBT)^+]` for a useful-time density on `[0, t_lbt]`,
/// evaluated with 200-point Gauss-Legendre quadrature.
pub fn expect_plus_from_density<F>(t_lbt: f64, density: F) -> impl Fn(f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let (nodes, weights) = gauss_legendre(200);
    move |lambda: f64| {
        // Integrate over y in [lambda*t_lbt, t_lbt].
        let lo = lambda * t_lbt;
        let hi = t_lbt;
        if lo >= hi {
            return 0.0;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let y = mid + half * x;
            acc += w * (y - lo) * density(y);
        }
        acc * half
    }
}

/// Solve the optimal-stopping fixed point
/// `E[(Y - lambda*T_LBT)^+] = lambda * T_slot / (1 - P_idle)`
/// for the uniform useful-time law.
pub fn solve_lambda_opt(p_idle: f64, t_slot: f64, t_lbt: f64) -> Result<f64> {
    solve_lambda_opt_with(p_idle, t_slot, t_lbt, expect_plus_uniform(t_lbt))
}

/// Solve the fixed point against an arbitrary expectation evaluator.
///
/// The residual `expect(lambda)*(1-P_idle)/T_slot - lambda` is strictly
/// decreasing in lambda, so the root is bracketed in [0, 1] and found by
/// bisection; plain damped iteration of the map oscillates when waiting is
/// cheap (small `T_slot/((1-P_idle) T_LBT)`).
pub fn solve_lambda_opt_with<F>(p_idle: f64, t_slot: f64, t_lbt: f64, expect: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if p_idle.is_nan() || p_idle <= 0.0 || p_idle >= 1.0 {
        return Err(Error::Domain(format!(
            "p_idle must be strictly inside (0, 1), got {p_idle}"
        )));
    }
    if t_slot.is_nan() || t_lbt.is_nan() || t_slot <= 0.0 || t_lbt <= 0.0 {
        return Err(Error::Domain("t_slot and t_lbt must be > 0".into()));
    }
    let cost = t_slot / (1.0 - p_idle);
    let g = |lambda: f64| expect(lambda) / cost - lambda;
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    if g(lo) <= 0.0 {
        // Waiting infinitely expensive relative to the reward.
        return Ok(0.0);
    }
    let mut iterations = 0;
    while hi - lo > 1e-14 && iterations < 10_000 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let lambda = 0.5 * (lo + hi);
    let residual = (expect(lambda) - lambda * cost).abs();
    if residual > 1e-8 * t_lbt {
        return Err(Error::SolverFailure {
            residual,
            iterations,
        });
    }
    Ok(lambda)
}

/// Synchronous take threshold on the residual time to the next frame
/// boundary: the stopping-rule branch capped by the fairness budget.
pub fn olaa_threshold(lambda_opt: f64, take_prob_pi: f64, t_lbt: f64) -> f64 {
    (t_lbt * (1.0 - lambda_opt)).min(take_prob_pi * t_lbt)
}

/// Asynchronous per-opportunity decision: Bernoulli take against an explicit
/// uniform draw.
pub fn orla_decide(rand_u: f64, take_prob_pi: f64) -> bool {
    rand_u < take_prob_pi
}

/// Synchronous per-opportunity decision: take iff the residual time to the
/// next frame boundary is below the threshold.
pub fn olaa_decide(t_res: f64, threshold: f64) -> bool {
    t_res < threshold
}

/// Analysis bundle produced while deriving policy parameters; reused by
/// reporting front ends.
#[derive(Debug, Clone)]
pub struct PolicyDerivation {
    pub params: PolicyParams,
    /// Attempt-rate solution of the operating (background) system.
    pub steady: analytic::SteadyState,
    /// Slot statistics of the operating system, contender absent.
    pub stats: SlotStats,
    /// Slot statistics with one saturated WiFi newcomer added instead.
    pub stats_plus_one: SlotStats,
}

/// Derive the full parameter set protecting `stations` against the reference
/// of adding `newcomer` as one more saturated WiFi transmitter.
///
/// Homogeneous saturated populations use the closed-form bound from the
/// n/(n+1) attempt-rate systems; anything else goes through the
/// airtime-preservation bound on the renewal-reward model.
pub fn derive_policy(
    phy: &PhyProfile,
    stations: &[StationProfile],
    newcomer: &StationProfile,
    t_lbt: f64,
) -> Result<PolicyDerivation> {
    phy.validate()?;
    if t_lbt.is_nan() || t_lbt <= 0.0 {
        return Err(Error::Domain("t_lbt must be > 0".into()));
    }
    if stations.is_empty() {
        return Err(Error::Domain(
            "no background stations: the contender may take every opportunity".into(),
        ));
    }
    let n = stations.len();
    let homogeneous = stations.iter().all(|s| s.is_saturated())
        && stations.iter().all(|s| s == &stations[0])
        && newcomer == &stations[0];

    let (steady, stats, stats_plus_one, rho_bar) = if homogeneous {
        let st = &stations[0];
        let steady = solve_saturated_attempt_rate(n, &st.dcf)?;
        let stats = slot_stats_homogeneous(&steady, phy, st, n);
        let steady1 = solve_saturated_attempt_rate(n + 1, &st.dcf)?;
        let stats1 = slot_stats_homogeneous(&steady1, phy, st, n + 1);
        let t = tx_duration(phy, st);
        let rho = rho_bar_homogeneous(&stats, &stats1, t, t_lbt, phy.slot_sigma)?;
        (steady, stats, stats1, rho)
    } else {
        let steady = solve_heterogeneous_attempt_rates(stations)?;
        let stats = slot_stats_heterogeneous(&steady, stations, phy);
        let mut plus: Vec<StationProfile> = stations.to_vec();
        plus.push(StationProfile {
            arrival_prob_q: 1.0,
            ..*newcomer
        });
        let steady1 = solve_heterogeneous_attempt_rates(&plus)?;
        let stats1 = slot_stats_heterogeneous(&steady1, &plus, phy);
        let members: Vec<usize> = (0..n).collect();
        let rho = rho_bar_heterogeneous(&stats, &stats1, &members, t_lbt)?;
        (steady, stats, stats1, rho)
    };

    let pi = take_probability(rho_bar, stats.p_idle)?;
    let nu = bursts_per_take(rho_bar, stats.p_idle)?;
    if !nu.is_finite() {
        return Err(Error::Domain(
            "degenerate burst schedule: background demand too low to bound".into(),
        ));
    }
    let lambda = solve_lambda_opt(stats.p_idle, stats.t_slot, t_lbt)?;
    let threshold = olaa_threshold(lambda, pi, t_lbt);
    Ok(PolicyDerivation {
        params: PolicyParams {
            rho_bar,
            take_prob_pi: pi,
            bursts_per_take_nu: nu,
            lambda_opt: lambda,
            olaa_threshold: threshold,
            t_lbt,
        },
        steady,
        stats,
        stats_plus_one,
    })
}

/// Take-all parameters for a channel with no WiFi activity to protect.
pub fn take_all_params(t_lbt: f64) -> PolicyParams {
    PolicyParams {
        rho_bar: f64::INFINITY,
        take_prob_pi: 1.0,
        bursts_per_take_nu: 1.0,
        lambda_opt: 0.0,
        olaa_threshold: t_lbt,
        t_lbt,
    }
}

/// Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
