//! Closed-form and fixed-point models of the WiFi MAC: attempt rates, slot
//! statistics, frame durations, throughput and aggregate airtime, for
//! saturated/non-saturated and homogeneous/heterogeneous populations.
//!
//! All durations are in microseconds, rates in Mb/s (= bits per microsecond),
//! frame sizes in bits.

use crate::{Error, Result};

/// PHY-layer timing and overhead constants for an 802.11 channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyProfile {
    /// Idle (empty) MAC slot duration, microseconds.
    pub slot_sigma: f64,
    /// Distributed inter-frame space, microseconds.
    pub difs: f64,
    /// Short inter-frame space, microseconds.
    pub sifs: f64,
    /// LBT inter-frame space, microseconds. Must satisfy SIFS < LIFS < DIFS
    /// so that LBT acquisitions can neither interrupt a data/ACK exchange
    /// nor collide with WiFi contention.
    pub lifs: f64,
    /// PLCP preamble and header duration, microseconds.
    pub t_plcp: f64,
    /// MPDU delimiter field, bits.
    pub l_del: u64,
    /// MAC overhead (header and FCS), bits.
    pub l_mac_oh: u64,
    /// Padding, bits.
    pub l_pad: u64,
    /// ACK frame length, bits.
    pub l_ack: u64,
    /// Control-frame bit rate, Mb/s.
    pub c_ctrl: f64,
}

impl PhyProfile {
    /// 802.11ac defaults at 5 GHz.
    pub fn ieee80211ac() -> Self {
        Self {
            slot_sigma: 9.0,
            difs: 34.0,
            sifs: 16.0,
            lifs: 20.0,
            t_plcp: 40.0,
            l_del: 32,
            l_mac_oh: 288,
            l_pad: 0,
            l_ack: 256,
            c_ctrl: 24.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("slot_sigma", self.slot_sigma),
            ("difs", self.difs),
            ("sifs", self.sifs),
            ("lifs", self.lifs),
            ("t_plcp", self.t_plcp),
            ("c_ctrl", self.c_ctrl),
        ] {
            if v.is_nan() || v <= 0.0 || !v.is_finite() {
                return Err(Error::Config(format!(
                    "phy.{name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(self.sifs < self.lifs && self.lifs < self.difs) {
            return Err(Error::Config(format!(
                "phy inter-frame spaces must satisfy sifs < lifs < difs, got {} / {} / {}",
                self.sifs, self.lifs, self.difs
            )));
        }
        Ok(())
    }
}

/// DCF contention parameters of one transmitter.
///
/// The retry limit equals the maximum backoff stage: the renewal-reward
/// model books attempts at stages `0..=max_backoff_stage`, beyond which the
/// window stays capped at `2^max_backoff_stage * cw_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DcfParams {
    /// Minimum contention window (slots).
    pub cw_min: u64,
    /// Maximum backoff stage m̄; the window at stage j is
    /// `2^min(j, m̄) * cw_min`.
    pub max_backoff_stage: u32,
}

impl DcfParams {
    pub fn new(cw_min: u64, max_backoff_stage: u32) -> Self {
        Self {
            cw_min,
            max_backoff_stage,
        }
    }

    /// Maximum number of retries; equal to the maximum backoff stage.
    pub fn retry_limit(&self) -> u32 {
        self.max_backoff_stage
    }

    /// Contention window at backoff stage `stage`.
    pub fn window_at(&self, stage: u32) -> u64 {
        self.cw_min << stage.min(self.max_backoff_stage)
    }

    /// Mean backoff (slots) drawn at stage `stage`: the mean of the uniform
    /// draw over `{0 .. window-1}`.
    pub fn mean_backoff_at(&self, stage: u32) -> f64 {
        (self.window_at(stage) as f64 - 1.0) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.cw_min < 1 {
            return Err(Error::Config("cw_min must be >= 1".into()));
        }
        if self.max_backoff_stage > 16 {
            return Err(Error::Config(format!(
                "max_backoff_stage {} is unreasonably large (max 16)",
                self.max_backoff_stage
            )));
        }
        Ok(())
    }
}

/// Contention, traffic-load and rate parameters of one WiFi station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationProfile {
    pub dcf: DcfParams,
    /// PHY data bit rate, Mb/s.
    pub data_rate_c: f64,
    /// Number of packets aggregated per burst.
    pub f_agg: u64,
    /// Total payload bits per burst.
    pub payload_b: u64,
    /// Probability that a new burst arrives in a MAC slot while the station
    /// has nothing queued; 1.0 means saturated.
    pub arrival_prob_q: f64,
}

impl StationProfile {
    /// A saturated station with Table-style 802.11ac defaults.
    pub fn saturated(dcf: DcfParams, data_rate_c: f64, f_agg: u64, payload_b: u64) -> Self {
        Self {
            dcf,
            data_rate_c,
            f_agg,
            payload_b,
            arrival_prob_q: 1.0,
        }
    }

    pub fn is_saturated(&self) -> bool {
        self.arrival_prob_q >= 1.0
    }

    pub fn validate(&self) -> Result<()> {
        self.dcf.validate()?;
        if self.data_rate_c.is_nan() || self.data_rate_c <= 0.0 || !self.data_rate_c.is_finite() {
            return Err(Error::Config("data_rate_c must be > 0".into()));
        }
        if self.f_agg < 1 {
            return Err(Error::Config("f_agg must be >= 1".into()));
        }
        if self.payload_b == 0 {
            return Err(Error::Config("payload_b must be > 0".into()));
        }
        if self.arrival_prob_q.is_nan() || self.arrival_prob_q <= 0.0 || self.arrival_prob_q > 1.0 {
            return Err(Error::Config(format!(
                "arrival_prob_q must be in (0, 1], got {}",
                self.arrival_prob_q
            )));
        }
        Ok(())
    }
}

/// Steady-state slot probabilities and durations of a WiFi population.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotStats {
    /// Probability that a MAC slot is idle.
    pub p_idle: f64,
    /// Probability that a MAC slot carries exactly one transmission.
    pub p_succ_total: f64,
    /// Probability that a MAC slot carries a collision.
    pub p_coll: f64,
    /// Probability that a MAC slot is busy (success or collision).
    pub p_tx: f64,
    /// Per-station success probability in a MAC slot.
    pub p_succ_per_station: Vec<f64>,
    /// Mean MAC slot duration, microseconds.
    pub t_slot: f64,
    /// Per-station successful-exchange duration, microseconds.
    pub t_succ_per_station: Vec<f64>,
    /// Expected collision-slot duration, microseconds.
    pub t_coll: f64,
}

/// Jointly solved per-station attempt rates and conditional collision
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub tau_per_station: Vec<f64>,
    pub p_cond_per_station: Vec<f64>,
    /// Worst-case defect of the defining equations at the returned point.
    pub residual: f64,
}

/// Duration of an acknowledgement: preamble plus ACK payload at the control
/// rate.
pub fn ack_duration(phy: &PhyProfile) -> f64 {
    phy.t_plcp + phy.l_ack as f64 / phy.c_ctrl
}

/// Duration of one full successful exchange: preamble, aggregated data burst,
/// SIFS, ACK and the trailing DIFS.
pub fn tx_duration(phy: &PhyProfile, station: &StationProfile) -> f64 {
    let overhead_bits = station.f_agg * (phy.l_del + phy.l_mac_oh + phy.l_pad);
    let data_bits = overhead_bits + station.payload_b;
    phy.t_plcp + data_bits as f64 / station.data_rate_c + phy.sifs + ack_duration(phy) + phy.difs
}

/// Per-slot attempt probability of a saturated station as a function of its
/// conditional collision probability.
///
/// Uses the series form `2 / ((W+1) + p W Σ_{i<m̄} (2p)^i)`, which is the
/// standard binary-exponential-backoff fixed point written so that it stays
/// finite and monotone for all p in [0, 1].
fn saturated_tau_of_p(p: f64, dcf: &DcfParams) -> f64 {
    let w = dcf.cw_min as f64;
    let mut series = 0.0;
    let mut term = 1.0;
    for _ in 0..dcf.max_backoff_stage {
        series += term;
        term *= 2.0 * p;
    }
    2.0 / ((w + 1.0) + p * w * series)
}

const SOLVER_TOL: f64 = 1e-12;
const SOLVER_CAP: u32 = 10_000;

/// Solve the homogeneous saturated attempt-rate system for `n` stations by
/// bisection on the conditional collision probability.
///
/// The scalar residual `p - (1 - (1 - tau(p))^(n-1))` is strictly increasing
/// in p, so bisection over [0, 1] is robust and deterministic.
pub fn solve_saturated_attempt_rate(n: usize, dcf: &DcfParams) -> Result<SteadyState> {
    if n < 1 {
        return Err(Error::Domain("need at least one station".into()));
    }
    dcf.validate()?;

    let f = |p: f64| -> f64 {
        let tau = saturated_tau_of_p(p, dcf);
        p - (1.0 - (1.0 - tau).powi(n as i32 - 1))
    };

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    if f(lo) >= 0.0 {
        // n = 1: no other contenders, the root is exactly p = 0.
        let tau = saturated_tau_of_p(lo, dcf);
        return Ok(SteadyState {
            tau_per_station: vec![tau; n],
            p_cond_per_station: vec![lo; n],
            residual: f(lo).abs(),
        });
    }
    let mut iterations = 0;
    while hi - lo > SOLVER_TOL && iterations < SOLVER_CAP {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let p = 0.5 * (lo + hi);
    let tau = saturated_tau_of_p(p, dcf);
    let residual = f(p).abs();
    if residual > 1e-10 {
        return Err(Error::SolverFailure {
            residual,
            iterations,
        });
    }
    Ok(SteadyState {
        tau_per_station: vec![tau; n],
        p_cond_per_station: vec![p; n],
        residual,
    })
}

/// Slot statistics of `n` identical saturated stations.
///
/// A collision occupies the channel for one full frame exchange, i.e.
/// `t_coll = t_succ` in the homogeneous case.
pub fn slot_stats_homogeneous(
    state: &SteadyState,
    phy: &PhyProfile,
    station: &StationProfile,
    n: usize,
) -> SlotStats {
    assert_eq!(
        state.tau_per_station.len(),
        n,
        "state was solved for a different n"
    );
    let tau = state.tau_per_station[0];
    let p_idle = (1.0 - tau).powi(n as i32);
    let p_succ_one = tau * (1.0 - tau).powi(n as i32 - 1);
    let p_succ_total = n as f64 * p_succ_one;
    let p_coll = (1.0 - p_idle - p_succ_total).max(0.0);
    let p_tx = 1.0 - p_idle;
    let t_s = tx_duration(phy, station);
    let t_slot = p_idle * phy.slot_sigma + p_tx * t_s;
    SlotStats {
        p_idle,
        p_succ_total,
        p_coll,
        p_tx,
        p_succ_per_station: vec![p_succ_one; n],
        t_slot,
        t_succ_per_station: vec![t_s; n],
        t_coll: t_s,
    }
}

/// Saturated per-station throughput in Mb/s: payload bits delivered per mean
/// slot time.
pub fn wifi_throughput_saturated(stats: &SlotStats, station: &StationProfile) -> f64 {
    let p_succ = stats.p_succ_per_station[0];
    p_succ * station.payload_b as f64 / stats.t_slot
}

/// LBT airtime added to the mean slot cycle (microseconds): the fraction
/// `rho` of idle slots converted into holds of duration `t_lbt`.
pub fn lbt_airtime(rho: f64, stats: &SlotStats, t_lbt: f64) -> f64 {
    rho * stats.p_idle * t_lbt
}

/// Solve the renewal-reward attempt-rate system for stations with individual
/// loads, rates and contention parameters.
///
/// Per station, `p_i = 1 - prod_{k != i} (1 - tau_k)` and
/// `tau_i = E[attempts] / E[slots per cycle]` with
/// `E[A] = sum_{j=0..M} p^j` and `E[S] = 1/q + sum_{j=0..M} p^j b_j`,
/// `b_j` being the mean uniform backoff of stage j. Solved by damped
/// fixed-point iteration.
pub fn solve_heterogeneous_attempt_rates(stations: &[StationProfile]) -> Result<SteadyState> {
    if stations.is_empty() {
        return Err(Error::Domain("need at least one station".into()));
    }
    for s in stations {
        s.validate()?;
    }
    let n = stations.len();

    let tau_of_p = |p: f64, st: &StationProfile| -> f64 {
        let m = st.dcf.retry_limit();
        let mut e_a = 0.0;
        let mut e_s = 1.0 / st.arrival_prob_q;
        let mut pj = 1.0;
        for j in 0..=m {
            e_a += pj;
            e_s += pj * st.dcf.mean_backoff_at(j);
            pj *= p;
        }
        (e_a / e_s).clamp(1e-15, 1.0 - 1e-9)
    };

    let mut tau: Vec<f64> = stations
        .iter()
        .map(|s| 2.0 / (s.dcf.cw_min as f64 + 1.0))
        .collect();
    let mut p = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iteration in 0..SOLVER_CAP {
        for (i, p_i) in p.iter_mut().enumerate() {
            let mut prod = 1.0;
            for (k, t) in tau.iter().enumerate() {
                if k != i {
                    prod *= 1.0 - t;
                }
            }
            *p_i = 1.0 - prod;
        }
        residual = 0.0;
        for i in 0..n {
            let next = tau_of_p(p[i], &stations[i]);
            residual = residual.max((next - tau[i]).abs());
            tau[i] = 0.5 * tau[i] + 0.5 * next;
        }
        if residual <= 1e-12 {
            break;
        }
        if iteration == SOLVER_CAP - 1 && residual > 1e-9 {
            return Err(Error::SolverFailure {
                residual,
                iterations: SOLVER_CAP,
            });
        }
    }
    Ok(SteadyState {
        tau_per_station: tau,
        p_cond_per_station: p,
        residual,
    })
}

/// Slot statistics for a heterogeneous population.
///
/// The collision duration is the expected duration of the longest frame among
/// the transmitters actually involved, conditional on a collision; with
/// identical frame durations this reduces to the single-frame duration.
pub fn slot_stats_heterogeneous(
    state: &SteadyState,
    stations: &[StationProfile],
    phy: &PhyProfile,
) -> SlotStats {
    assert_eq!(state.tau_per_station.len(), stations.len());
    let n = stations.len();
    let tau = &state.tau_per_station;

    let p_idle: f64 = tau.iter().map(|t| 1.0 - t).product();
    let t_succ: Vec<f64> = stations.iter().map(|s| tx_duration(phy, s)).collect();
    let p_succ: Vec<f64> = (0..n)
        .map(|i| {
            let mut prod = tau[i];
            for (k, t) in tau.iter().enumerate() {
                if k != i {
                    prod *= 1.0 - t;
                }
            }
            prod
        })
        .collect();
    let p_succ_total: f64 = p_succ.iter().sum();
    let p_coll = (1.0 - p_idle - p_succ_total).max(0.0);
    let p_tx = 1.0 - p_idle;

    // Expected longest involved frame, conditional on a collision. Order
    // stations by frame duration; the longest transmitter is station k iff k
    // transmits, nobody longer does, and at least one shorter does.
    let t_coll = if p_coll > 1e-15 && n >= 2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| t_succ[a].total_cmp(&t_succ[b]));
        let mut weighted = 0.0;
        for (rank, &k) in order.iter().enumerate() {
            let mut none_longer = 1.0;
            for &j in &order[rank + 1..] {
                none_longer *= 1.0 - tau[j];
            }
            let mut none_shorter = 1.0;
            for &j in &order[..rank] {
                none_shorter *= 1.0 - tau[j];
            }
            weighted += t_succ[k] * tau[k] * none_longer * (1.0 - none_shorter);
        }
        weighted / p_coll
    } else {
        t_succ.iter().cloned().fold(0.0, f64::max)
    };

    let t_slot = p_idle * phy.slot_sigma
        + p_succ.iter().zip(&t_succ).map(|(p, t)| p * t).sum::<f64>()
        + p_coll * t_coll;

    SlotStats {
        p_idle,
        p_succ_total,
        p_coll,
        p_tx,
        p_succ_per_station: p_succ,
        t_slot,
        t_succ_per_station: t_succ,
        t_coll,
    }
}

/// Aggregate airtime fraction of the given stations: the share of the mean
/// slot cycle occupied by their successful transmissions.
pub fn aggregate_wifi_airtime(stats: &SlotStats, member_indices: &[usize]) -> f64 {
    member_indices
        .iter()
        .map(|&i| stats.p_succ_per_station[i] * stats.t_succ_per_station[i])
        .sum::<f64>()
        / stats.t_slot
}

/// Convert per-station relative offered loads into per-slot arrival
/// probabilities.
///
/// The offered burst rate is `load * s_sat / payload`, where `s_sat` is the
/// station's throughput when the whole population is saturated; the Poisson
/// relation `q = 1 - exp(-lambda * t_slot)` is evaluated at the saturated
/// slot pace. A relative load >= 1 pins the station to saturation.
pub fn q_for_relative_load(
    phy: &PhyProfile,
    stations: &[StationProfile],
    loads: &[f64],
) -> Result<Vec<f64>> {
    if stations.len() != loads.len() {
        return Err(Error::Domain("one load per station required".into()));
    }
    let saturated: Vec<StationProfile> = stations
        .iter()
        .map(|s| StationProfile {
            arrival_prob_q: 1.0,
            ..*s
        })
        .collect();
    let state = solve_heterogeneous_attempt_rates(&saturated)?;
    let stats = slot_stats_heterogeneous(&state, &saturated, phy);
    let mut out = Vec::with_capacity(loads.len());
    for (i, &load) in loads.iter().enumerate() {
        if load.is_nan() || load <= 0.0 || !load.is_finite() {
            return Err(Error::Domain(format!(
                "relative load must be > 0, got {load}"
            )));
        }
        if load >= 1.0 {
            out.push(1.0);
            continue;
        }
        let s_sat = stats.p_succ_per_station[i] * stations[i].payload_b as f64 / stats.t_slot;
        let lambda = load * s_sat / stations[i].payload_b as f64;
        out.push((1.0 - (-lambda * stats.t_slot).exp()).clamp(1e-9, 1.0));
    }
    Ok(out)
}
