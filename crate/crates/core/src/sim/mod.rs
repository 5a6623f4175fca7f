//! Deterministic, seeded discrete-event simulation of DCF stations plus at
//! most one LBT contender on a shared channel.
//!
//! The channel evolves as a sequence of slots: idle (sigma), WiFi success,
//! WiFi collision (longest involved frame) or an LBT hold. Backoff counters
//! tick once per MAC slot of any kind (a busy slot consumes exactly one
//! tick); collisions double the contention window up to the maximum stage,
//! where it stays capped while the burst is retried. Non-saturated stations
//! draw a Bernoulli arrival check per elapsed slot while they have nothing
//! queued.
//!
//! In the orthogonal modes the contender is offered one decision immediately
//! after every busy WiFi slot, inside the trailing inter-frame space, so its
//! holds can never collide with WiFi. In `laa` mode the contender runs the
//! same DCF state machine as the stations and can collide with them.
//!
//! Time is tracked in integer picoseconds so that the accounting identity
//! idle + success + collision + hold = window holds exactly.

mod rng;
mod stats;

pub use rng::{Rng, SplitMix64};
pub use stats::{
    ks_critical_value, ks_statistic_uniform, mc_rate_for_threshold, monte_carlo_lambda,
    sample_t_res_distribution,
};

use crate::analytic::{tx_duration, DcfParams, PhyProfile, StationProfile};
use crate::policy::{self, PolicyParams};
use crate::{Error, Result};

/// Contender behaviour on the shared channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbtMode {
    /// WiFi stations only.
    None,
    /// The contender is one more WiFi station; the fairness reference.
    WifiLegacy,
    /// CSMA/CA-style contender holding the channel for `t_lbt` per win.
    Laa,
    /// Orthogonal asynchronous contender: Bernoulli take per opportunity.
    Orla,
    /// Orthogonal synchronous contender: residual-time threshold rule.
    Olaa,
}

impl LbtMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LbtMode::None => "none",
            LbtMode::WifiLegacy => "wifi_legacy",
            LbtMode::Laa => "laa",
            LbtMode::Orla => "orla",
            LbtMode::Olaa => "olaa",
        }
    }
}

impl std::str::FromStr for LbtMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(LbtMode::None),
            "wifi_legacy" => Ok(LbtMode::WifiLegacy),
            "laa" => Ok(LbtMode::Laa),
            "orla" => Ok(LbtMode::Orla),
            "olaa" => Ok(LbtMode::Olaa),
            other => Err(Error::Config(format!(
                "unknown lbt mode '{other}' (expected none|wifi_legacy|laa|orla|olaa)"
            ))),
        }
    }
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub phy: PhyProfile,
    pub stations: Vec<StationProfile>,
    pub lbt_mode: LbtMode,
    /// Channel-hold duration of one contender burst, microseconds.
    pub lbt_t_lbt: f64,
    /// Effective contender data rate during a held burst, Mb/s.
    pub lbt_rate: f64,
    /// In `laa` mode, charge the time to the next frame-grid boundary as
    /// reservation overhead inside each hold (synchronous operation).
    pub lbt_sync: bool,
    /// Contention parameters of the contender in `laa`/`wifi_legacy` modes.
    pub lbt_dcf: Option<DcfParams>,
    /// Policy parameters for `orla`/`olaa` modes.
    pub policy: Option<PolicyParams>,
    /// Simulated time, seconds.
    pub sim_duration: f64,
    /// Discarded leading transient, seconds.
    pub warmup: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.phy.validate()?;
        for (i, s) in self.stations.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::Config(format!("stations.{i}: {e}")))?;
        }
        if self.sim_duration.is_nan() || self.sim_duration <= 0.0 || !self.sim_duration.is_finite()
        {
            return Err(Error::Config("sim_duration must be > 0".into()));
        }
        if self.warmup.is_nan() || self.warmup < 0.0 || self.warmup >= self.sim_duration {
            return Err(Error::Config("need sim_duration > warmup >= 0".into()));
        }
        if self.lbt_mode != LbtMode::None {
            if self.lbt_t_lbt.is_nan() || self.lbt_t_lbt <= 0.0 || !self.lbt_t_lbt.is_finite() {
                return Err(Error::Config("lbt_t_lbt must be > 0".into()));
            }
            if self.lbt_rate.is_nan() || self.lbt_rate <= 0.0 || !self.lbt_rate.is_finite() {
                return Err(Error::Config("lbt_rate must be > 0".into()));
            }
        }
        match self.lbt_mode {
            LbtMode::Orla | LbtMode::Olaa => {
                let p = self.policy.as_ref().ok_or_else(|| {
                    Error::Config("orla/olaa modes require policy parameters".into())
                })?;
                p.validate()?;
                if (p.t_lbt - self.lbt_t_lbt).abs() > 1e-6 * self.lbt_t_lbt.max(1.0) {
                    return Err(Error::Config(
                        "policy.t_lbt disagrees with lbt_t_lbt".into(),
                    ));
                }
            }
            LbtMode::Laa | LbtMode::WifiLegacy => {
                let dcf = self
                    .lbt_dcf
                    .ok_or_else(|| Error::Config("laa/wifi_legacy modes require lbt_dcf".into()))?;
                dcf.validate()?;
                if self.lbt_mode == LbtMode::WifiLegacy && self.stations.is_empty() {
                    return Err(Error::Config(
                        "wifi_legacy mode needs a background station to mirror".into(),
                    ));
                }
            }
            LbtMode::None => {}
        }
        Ok(())
    }
}

/// The WiFi profile the contender would use if it joined as one more
/// station: its own contention parameters and bit rate, the background
/// stations' burst shape, saturated.
pub fn contender_wifi_profile(sc: &Scenario) -> Result<StationProfile> {
    let template = sc.stations.first().ok_or_else(|| {
        Error::Config("no background station to derive the WiFi twin from".into())
    })?;
    Ok(StationProfile {
        dcf: sc.lbt_dcf.unwrap_or(template.dcf),
        data_rate_c: sc.lbt_rate,
        f_agg: template.f_agg,
        payload_b: template.payload_b,
        arrival_prob_q: 1.0,
    })
}

/// Per-node and channel-level results over the post-warmup window.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub per_station_goodput: Vec<f64>,
    pub per_station_airtime: Vec<f64>,
    pub per_station_collisions: Vec<u64>,
    pub lbt_goodput: f64,
    /// Fraction of the window occupied by the contender's channel holds
    /// (data, reservation and intra-take gaps).
    pub lbt_airtime: f64,
    pub lbt_takes: u64,
    pub lbt_opportunities: u64,
    /// Collision slots involving the contender; structurally zero in the
    /// orthogonal modes.
    pub lbt_collisions: u64,
    /// Collision slots among WiFi stations only.
    pub wifi_collision_slots: u64,
    pub wifi_success_slots: u64,
    pub idle_slots: u64,
    pub busy_slots: u64,
    pub idle_frac: f64,
    pub collision_frac: f64,
    pub window_us: f64,
    /// Residual times to the next frame boundary observed at each
    /// opportunity (synchronous mode only), microseconds.
    pub t_res_samples: Vec<f64>,
}

impl RunMetrics {
    pub fn empty(n: usize) -> Self {
        Self {
            per_station_goodput: vec![0.0; n],
            per_station_airtime: vec![0.0; n],
            per_station_collisions: vec![0; n],
            lbt_goodput: 0.0,
            lbt_airtime: 0.0,
            lbt_takes: 0,
            lbt_opportunities: 0,
            lbt_collisions: 0,
            wifi_collision_slots: 0,
            wifi_success_slots: 0,
            idle_slots: 0,
            busy_slots: 0,
            idle_frac: 0.0,
            collision_frac: 0.0,
            window_us: 0.0,
            t_res_samples: Vec::new(),
        }
    }

    /// Sum of every accounted fraction; 1 up to float rounding on a valid run.
    pub fn accounted_fraction(&self) -> f64 {
        self.per_station_airtime.iter().sum::<f64>()
            + self.lbt_airtime
            + self.idle_frac
            + self.collision_frac
    }
}

const PS_PER_US: f64 = 1e6;
const PS_PER_S: f64 = 1e12;

fn us_to_ps(us: f64) -> u64 {
    (us * PS_PER_US).round() as u64
}

/// Residual time from `t` to the next boundary of the period grid anchored
/// at zero.
fn grid_residual(t: u64, period: u64) -> u64 {
    (period - t % period) % period
}

const CONTENDER_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone)]
struct Node {
    dcf: DcfParams,
    q: f64,
    hold_ps: u64,
    burst_bits: f64,
    is_contender: bool,
    sync_grid: bool,
    rate: f64,
    rng: Rng,
    pending: bool,
    stage: u32,
    backoff: u64,
}

impl Node {
    fn draw_backoff(&mut self) {
        self.backoff = self.rng.next_below(self.dcf.window_at(self.stage));
    }

    /// Queue the next burst: immediately for a saturated node, otherwise the
    /// per-slot arrival draws take over.
    fn refill(&mut self) {
        if self.q >= 1.0 {
            self.pending = true;
            self.draw_backoff();
        } else {
            self.pending = false;
            self.backoff = 0;
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    idle_slots: u64,
    idle_ps: u64,
    coll_slots: u64,
    coll_ps: u64,
    lbt_coll_slots: u64,
    succ_slots: u64,
    wifi_succ_slots: u64,
    lbt_holds: u64,
    lbt_wall_ps: u64,
    lbt_bits: f64,
    lbt_takes: u64,
    lbt_opportunities: u64,
    node_successes: Vec<u64>,
    node_collisions: Vec<u64>,
    node_attempts: Vec<u64>,
    node_succ_time_ps: Vec<u64>,
    node_bits: Vec<f64>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            node_successes: vec![0; n],
            node_collisions: vec![0; n],
            node_attempts: vec![0; n],
            node_succ_time_ps: vec![0; n],
            node_bits: vec![0.0; n],
            ..Default::default()
        }
    }
}

/// Run one scenario to completion and report post-warmup metrics.
///
/// Identical scenarios (same seed included) produce bit-identical metrics.
pub fn run_scenario(sc: &Scenario) -> Result<RunMetrics> {
    sc.validate()?;

    let sigma_ps = us_to_ps(sc.phy.slot_sigma);
    let lifs_ps = us_to_ps(sc.phy.lifs);
    let t_lbt_ps = if sc.lbt_mode == LbtMode::None {
        0
    } else {
        us_to_ps(sc.lbt_t_lbt)
    };
    let end_ps = (sc.sim_duration * PS_PER_S).round() as u64;
    let warmup_ps = (sc.warmup * PS_PER_S).round() as u64;
    // Every event must advance the clock at the picosecond resolution or
    // the slot loop cannot terminate.
    if sigma_ps == 0 {
        return Err(Error::Config("slot_sigma rounds below 1 ps".into()));
    }
    if sc.lbt_mode != LbtMode::None && t_lbt_ps == 0 {
        return Err(Error::Config("lbt_t_lbt rounds below 1 ps".into()));
    }
    for (i, s) in sc.stations.iter().enumerate() {
        if us_to_ps(tx_duration(&sc.phy, s)) == 0 {
            return Err(Error::Config(format!(
                "stations.{i}: frame duration rounds below 1 ps"
            )));
        }
    }

    let policy_mode = matches!(sc.lbt_mode, LbtMode::Orla | LbtMode::Olaa);
    if policy_mode && sc.stations.is_empty() {
        return run_lbt_only(sc, t_lbt_ps, lifs_ps, end_ps, warmup_ps);
    }

    // Station nodes, then the DCF contender if any.
    let mut nodes: Vec<Node> = sc
        .stations
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut node = Node {
                dcf: s.dcf,
                q: s.arrival_prob_q,
                hold_ps: us_to_ps(tx_duration(&sc.phy, s)),
                burst_bits: s.payload_b as f64,
                is_contender: false,
                sync_grid: false,
                rate: s.data_rate_c,
                rng: Rng::from_seed_stream(sc.seed, i as u64),
                pending: false,
                stage: 0,
                backoff: 0,
            };
            node.refill();
            node
        })
        .collect();

    match sc.lbt_mode {
        LbtMode::WifiLegacy => {
            let twin = contender_wifi_profile(sc)?;
            let mut node = Node {
                dcf: twin.dcf,
                q: 1.0,
                hold_ps: us_to_ps(tx_duration(&sc.phy, &twin)),
                burst_bits: twin.payload_b as f64,
                is_contender: true,
                sync_grid: false,
                rate: twin.data_rate_c,
                rng: Rng::from_seed_stream(sc.seed, CONTENDER_STREAM),
                pending: false,
                stage: 0,
                backoff: 0,
            };
            node.refill();
            nodes.push(node);
        }
        LbtMode::Laa => {
            let dcf = sc.lbt_dcf.expect("validated");
            let mut node = Node {
                dcf,
                q: 1.0,
                hold_ps: t_lbt_ps,
                burst_bits: sc.lbt_t_lbt * sc.lbt_rate,
                is_contender: true,
                sync_grid: sc.lbt_sync,
                rate: sc.lbt_rate,
                rng: Rng::from_seed_stream(sc.seed, CONTENDER_STREAM),
                pending: false,
                stage: 0,
                backoff: 0,
            };
            node.refill();
            nodes.push(node);
        }
        _ => {}
    }

    let params = sc
        .policy
        .unwrap_or_else(|| policy::take_all_params(sc.lbt_t_lbt.max(1.0)));
    let threshold_ps = us_to_ps(params.olaa_threshold);
    let mut lbt_rng = Rng::from_seed_stream(sc.seed, CONTENDER_STREAM);

    let n_nodes = nodes.len();
    let mut tally = Tally::new(n_nodes);
    let mut t_res_samples: Vec<f64> = Vec::new();
    let mut t: u64 = 0;
    let mut warmed = warmup_ps == 0;
    let mut snap = if warmed {
        Some((tally.clone(), 0u64))
    } else {
        None
    };
    let mut transmitters: Vec<usize> = Vec::with_capacity(n_nodes);

    while t < end_ps {
        if !warmed && t >= warmup_ps {
            warmed = true;
            snap = Some((tally.clone(), t));
        }

        transmitters.clear();
        for (i, node) in nodes.iter().enumerate() {
            if node.pending && node.backoff == 0 {
                transmitters.push(i);
            }
        }

        // Backoff counters tick once per MAC slot of any kind: the slot
        // boundary at which a winner starts transmitting is the same
        // boundary at which every bystander decrements, so a busy slot
        // consumes exactly one tick (the countdown then stays frozen for
        // the rest of the hold).
        for node in nodes.iter_mut() {
            if node.pending && node.backoff > 0 {
                node.backoff -= 1;
            }
        }

        let busy = match transmitters.len() {
            0 => {
                t += sigma_ps;
                tally.idle_slots += 1;
                tally.idle_ps += sigma_ps;
                false
            }
            1 => {
                let i = transmitters[0];
                let dur = nodes[i].hold_ps;
                let bits = if nodes[i].sync_grid {
                    // Synchronous hold: reserve to the next frame boundary,
                    // deliver data for the rest of the hold.
                    let t_res = grid_residual(t, t_lbt_ps);
                    (dur.saturating_sub(t_res) as f64 / PS_PER_US) * nodes[i].rate
                } else {
                    nodes[i].burst_bits
                };
                t += dur;
                tally.succ_slots += 1;
                if !nodes[i].is_contender {
                    tally.wifi_succ_slots += 1;
                }
                tally.node_attempts[i] += 1;
                tally.node_successes[i] += 1;
                tally.node_succ_time_ps[i] += dur;
                tally.node_bits[i] += bits;
                let node = &mut nodes[i];
                node.stage = 0;
                node.refill();
                true
            }
            _ => {
                let dur = transmitters
                    .iter()
                    .map(|&i| nodes[i].hold_ps)
                    .max()
                    .unwrap();
                t += dur;
                tally.coll_slots += 1;
                tally.coll_ps += dur;
                if transmitters.iter().any(|&i| nodes[i].is_contender) {
                    tally.lbt_coll_slots += 1;
                }
                for &i in &transmitters {
                    tally.node_attempts[i] += 1;
                    tally.node_collisions[i] += 1;
                    let node = &mut nodes[i];
                    // Window doubles up to the top stage and stays capped
                    // there; the burst is retried until it goes through.
                    node.stage = (node.stage + 1).min(node.dcf.max_backoff_stage);
                    node.draw_backoff();
                }
                true
            }
        };

        // Arrival checks for empty queues, one per elapsed slot.
        for node in nodes.iter_mut() {
            if !node.pending && node.rng.next_f64() < node.q {
                node.pending = true;
                node.stage = 0;
                node.draw_backoff();
            }
        }

        // Orthogonal transmission opportunity inside the trailing
        // inter-frame space of every busy WiFi slot.
        if busy && policy_mode {
            tally.lbt_opportunities += 1;
            match sc.lbt_mode {
                LbtMode::Orla => {
                    let u = lbt_rng.next_f64();
                    if policy::orla_decide(u, params.take_prob_pi) {
                        let (hold_ps, gaps_ps) =
                            orla_hold(params.bursts_per_take_nu, t_lbt_ps, sc.lbt_t_lbt, lifs_ps);
                        t += hold_ps + gaps_ps;
                        tally.lbt_wall_ps += hold_ps + gaps_ps;
                        tally.lbt_bits += (hold_ps as f64 / PS_PER_US) * sc.lbt_rate;
                        tally.lbt_takes += 1;
                        tally.lbt_holds += 1;
                    }
                }
                LbtMode::Olaa => {
                    let t_res = grid_residual(t, t_lbt_ps);
                    if warmed {
                        t_res_samples.push(t_res as f64 / PS_PER_US);
                    }
                    if t_res < threshold_ps {
                        // Contiguous synchronous hold: reservation up to the
                        // boundary, data for the remainder.
                        let (data_ps, _) =
                            orla_hold(params.bursts_per_take_nu, t_lbt_ps, sc.lbt_t_lbt, 0);
                        let hold = data_ps;
                        t += hold;
                        tally.lbt_wall_ps += hold;
                        tally.lbt_bits +=
                            (hold.saturating_sub(t_res) as f64 / PS_PER_US) * sc.lbt_rate;
                        tally.lbt_takes += 1;
                        tally.lbt_holds += 1;
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let (snap, window_start) = snap.unwrap_or((Tally::new(n_nodes), 0));
    finish(sc, tally, snap, window_start, t, t_res_samples)
}

/// Hold layout of one take: total transmission time of the burst schedule
/// and the inter-burst gap time.
fn orla_hold(nu: f64, t_lbt_ps: u64, t_lbt_us: f64, lifs_ps: u64) -> (u64, u64) {
    let full = nu.floor() as u64;
    let frac = nu - nu.floor();
    let mut data_ps = full * t_lbt_ps;
    let mut bursts = full;
    if frac > 1e-12 {
        data_ps += us_to_ps(frac * t_lbt_us);
        bursts += 1;
    }
    let gaps = bursts.saturating_sub(1) * lifs_ps;
    (data_ps, gaps)
}

/// Channel with no WiFi activity: the contender transmits back-to-back
/// holds separated by an inter-frame space.
fn run_lbt_only(
    sc: &Scenario,
    t_lbt_ps: u64,
    lifs_ps: u64,
    end_ps: u64,
    warmup_ps: u64,
) -> Result<RunMetrics> {
    let mut tally = Tally::new(0);
    let mut t: u64 = 0;
    let mut warmed = warmup_ps == 0;
    let mut snap = if warmed {
        Some((tally.clone(), 0u64))
    } else {
        None
    };
    while t < end_ps {
        if !warmed && t >= warmup_ps {
            warmed = true;
            snap = Some((tally.clone(), t));
        }
        t += t_lbt_ps;
        tally.lbt_wall_ps += t_lbt_ps;
        tally.lbt_bits += sc.lbt_t_lbt * sc.lbt_rate;
        tally.lbt_takes += 1;
        tally.lbt_opportunities += 1;
        tally.lbt_holds += 1;
        t += lifs_ps;
        tally.idle_ps += lifs_ps;
    }
    let (snap, window_start) = snap.unwrap_or((Tally::new(0), 0));
    finish(sc, tally, snap, window_start, t, Vec::new())
}

fn finish(
    sc: &Scenario,
    total: Tally,
    snap: Tally,
    window_start: u64,
    window_end: u64,
    t_res_samples: Vec<f64>,
) -> Result<RunMetrics> {
    let window_ps = window_end - window_start;
    if window_ps == 0 {
        return Err(Error::Invariant("empty measurement window".into()));
    }
    let window_us = window_ps as f64 / PS_PER_US;
    let n = sc.stations.len();

    let mut m = RunMetrics::empty(n);
    m.window_us = window_us;
    for i in 0..n {
        let bits = total.node_bits[i] - snap.node_bits[i];
        let succ_ps = total.node_succ_time_ps[i] - snap.node_succ_time_ps[i];
        m.per_station_goodput[i] = bits / window_us;
        m.per_station_airtime[i] = succ_ps as f64 / window_ps as f64;
        m.per_station_collisions[i] = total.node_collisions[i] - snap.node_collisions[i];
    }

    let mut lbt_wall_ps = total.lbt_wall_ps - snap.lbt_wall_ps;
    match sc.lbt_mode {
        LbtMode::Laa | LbtMode::WifiLegacy => {
            // The contender is the last node.
            let c = n;
            let bits = total.node_bits[c] - snap.node_bits[c];
            let succ_ps = total.node_succ_time_ps[c] - snap.node_succ_time_ps[c];
            m.lbt_goodput = bits / window_us;
            m.lbt_airtime = succ_ps as f64 / window_ps as f64;
            m.lbt_takes = total.node_successes[c] - snap.node_successes[c];
            m.lbt_opportunities = total.node_attempts[c] - snap.node_attempts[c];
            m.lbt_collisions = total.lbt_coll_slots - snap.lbt_coll_slots;
            lbt_wall_ps += succ_ps;
        }
        LbtMode::Orla | LbtMode::Olaa => {
            m.lbt_goodput = (total.lbt_bits - snap.lbt_bits) / window_us;
            m.lbt_airtime = lbt_wall_ps as f64 / window_ps as f64;
            m.lbt_takes = total.lbt_takes - snap.lbt_takes;
            m.lbt_opportunities = total.lbt_opportunities - snap.lbt_opportunities;
            m.lbt_collisions = total.lbt_coll_slots - snap.lbt_coll_slots;
        }
        LbtMode::None => {}
    }

    m.wifi_collision_slots =
        (total.coll_slots - snap.coll_slots) - (total.lbt_coll_slots - snap.lbt_coll_slots);
    m.wifi_success_slots = total.wifi_succ_slots - snap.wifi_succ_slots;
    m.idle_slots = total.idle_slots - snap.idle_slots;
    m.busy_slots = (total.succ_slots - snap.succ_slots)
        + (total.coll_slots - snap.coll_slots)
        + (total.lbt_holds - snap.lbt_holds);
    m.idle_frac = (total.idle_ps - snap.idle_ps) as f64 / window_ps as f64;
    m.collision_frac = (total.coll_ps - snap.coll_ps) as f64 / window_ps as f64;
    m.t_res_samples = t_res_samples;

    // Exact conservation in integer time.
    let wifi_succ_ps: u64 = (0..n)
        .map(|i| total.node_succ_time_ps[i] - snap.node_succ_time_ps[i])
        .sum();
    let accounted = (total.idle_ps - snap.idle_ps)
        + (total.coll_ps - snap.coll_ps)
        + wifi_succ_ps
        + lbt_wall_ps;
    if accounted != window_ps {
        return Err(Error::Invariant(format!(
            "time accounting off by {} ps over a {} ps window",
            accounted as i64 - window_ps as i64,
            window_ps
        )));
    }
    if m.lbt_takes > m.lbt_opportunities {
        return Err(Error::Invariant("more takes than opportunities".into()));
    }
    Ok(m)
}
