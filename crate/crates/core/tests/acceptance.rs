//! Acceptance suite: every release gate runs here, one test per criterion,
//! each printing a PASS line with the measured values (visible under
//! `--nocapture`).
//!
//! All runs are seeded and deterministic; tolerances are fixed in the
//! asserts.

use std::sync::OnceLock;

use coexsim_core::analytic::*;
use coexsim_core::policy::*;
use coexsim_core::sim::*;

const TABLE_DCF: (u64, u32) = (16, 4);

fn dcf() -> DcfParams {
    DcfParams::new(TABLE_DCF.0, TABLE_DCF.1)
}

fn station() -> StationProfile {
    StationProfile::saturated(dcf(), 130.0, 1, 12000)
}

fn base_scenario(n: usize, duration: f64) -> Scenario {
    Scenario {
        phy: PhyProfile::ieee80211ac(),
        stations: vec![station(); n],
        lbt_mode: LbtMode::None,
        lbt_t_lbt: 1000.0,
        lbt_rate: 130.0,
        lbt_sync: false,
        lbt_dcf: Some(dcf()),
        policy: None,
        sim_duration: duration,
        warmup: 2.0,
        seed: 1,
    }
}

fn derive_for(sc: &Scenario) -> PolicyParams {
    let twin = contender_wifi_profile(sc).unwrap();
    derive_policy(&sc.phy, &sc.stations, &twin, sc.lbt_t_lbt)
        .unwrap()
        .params
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Shared ORLA/legacy pair for the 5-station, 1500-byte, 1 ms-hold scenario.
fn orla_pair() -> &'static (RunMetrics, RunMetrics, PolicyParams) {
    static PAIR: OnceLock<(RunMetrics, RunMetrics, PolicyParams)> = OnceLock::new();
    PAIR.get_or_init(|| {
        let mut sc = base_scenario(5, 150.0);
        let params = derive_for(&sc);
        sc.lbt_mode = LbtMode::Orla;
        sc.policy = Some(params);
        let orla = run_scenario(&sc).unwrap();
        sc.lbt_mode = LbtMode::WifiLegacy;
        sc.policy = None;
        let legacy = run_scenario(&sc).unwrap();
        (orla, legacy, params)
    })
}

#[test]
fn criterion_01_analytic_simulation_agreement() {
    for n in [2usize, 5, 10] {
        let sc = base_scenario(n, 300.0);
        let m = run_scenario(&sc).unwrap();
        let state = solve_saturated_attempt_rate(n, &dcf()).unwrap();
        let stats = slot_stats_homogeneous(&state, &sc.phy, &station(), n);
        let s = wifi_throughput_saturated(&stats, &station());

        let total = (m.idle_slots + m.wifi_success_slots + m.wifi_collision_slots) as f64;
        let p_idle_sim = m.idle_slots as f64 / total;
        let p_succ_sim = m.wifi_success_slots as f64 / total;
        let goodput_sim = mean(&m.per_station_goodput);

        let e_idle = (p_idle_sim / stats.p_idle - 1.0).abs();
        let e_succ = (p_succ_sim / stats.p_succ_total - 1.0).abs();
        let e_gput = (goodput_sim / s - 1.0).abs();
        assert!(e_idle < 0.01, "n={n}: P_idle off by {:.3}%", e_idle * 100.0);
        assert!(e_succ < 0.01, "n={n}: P_succ off by {:.3}%", e_succ * 100.0);
        assert!(
            e_gput < 0.01,
            "n={n}: goodput off by {:.3}%",
            e_gput * 100.0
        );
        println!(
            "acceptance 01 PASS (n={n}): P_idle {:.3}% P_succ {:.3}% goodput {:.3}% (all < 1%)",
            e_idle * 100.0,
            e_succ * 100.0,
            e_gput * 100.0
        );
    }
}

#[test]
fn criterion_02_single_station_closed_form() {
    let state = solve_saturated_attempt_rate(1, &dcf()).unwrap();
    assert_eq!(state.tau_per_station[0], 2.0 / 17.0);
    assert!(state.residual <= 1e-10);
    println!(
        "acceptance 02 PASS: tau = 2/17 exactly, residual {:.2e}",
        state.residual
    );
}

#[test]
fn criterion_03_orla_fairness() {
    let (orla, legacy, _) = orla_pair();
    let ratio = mean(&orla.per_station_goodput) / mean(&legacy.per_station_goodput);
    assert!(
        (ratio - 1.0).abs() <= 0.02,
        "per-WiFi goodput ratio {ratio:.4} outside +/-2%"
    );
    assert_eq!(orla.lbt_collisions, 0, "orthogonality violated");
    println!(
        "acceptance 03 PASS: per-WiFi goodput ratio {:.4} (|1 - r| <= 2%), contender collisions 0",
        ratio
    );
}

#[test]
fn criterion_04_orla_efficiency() {
    let (orla, legacy, _) = orla_pair();
    let gain = orla.lbt_goodput / legacy.lbt_goodput - 1.0;
    assert!(
        gain >= 0.80,
        "contender gain {:.1}% below +80%",
        gain * 100.0
    );
    println!(
        "acceptance 04 PASS: contender goodput gain {:+.1}% (>= +80%)",
        gain * 100.0
    );
}

#[test]
fn criterion_05_laa_harm_reproduction() {
    // 1 ms holds: airtime imbalance.
    let mut sc = base_scenario(5, 150.0);
    sc.lbt_mode = LbtMode::Laa;
    let laa = run_scenario(&sc).unwrap();
    let wifi_airtime = mean(&laa.per_station_airtime);
    let imbalance = laa.lbt_airtime / wifi_airtime;
    assert!(
        imbalance >= 4.0,
        "airtime imbalance {imbalance:.2} below 4x"
    );

    // 10 ms holds: WiFi goodput collapse and outsized contender gain.
    let mut sc = base_scenario(5, 150.0);
    sc.lbt_mode = LbtMode::Laa;
    sc.lbt_t_lbt = 10_000.0;
    let laa10 = run_scenario(&sc).unwrap();
    sc.lbt_mode = LbtMode::WifiLegacy;
    let legacy10 = run_scenario(&sc).unwrap();
    let loss = 1.0 - mean(&laa10.per_station_goodput) / mean(&legacy10.per_station_goodput);
    let gain = laa10.lbt_goodput / legacy10.lbt_goodput - 1.0;
    assert!(
        (0.80..=0.97).contains(&loss),
        "WiFi loss {:.1}% outside [80%, 97%]",
        loss * 100.0
    );
    assert!(gain >= 8.0, "LAA gain {:+.0}% below +800%", gain * 100.0);
    println!(
        "acceptance 05 PASS: 1ms airtime imbalance {:.2}x (>= 4x); 10ms WiFi loss {:.1}%, LAA gain {:+.0}%",
        imbalance,
        loss * 100.0,
        gain * 100.0
    );
}

#[test]
fn criterion_06_large_burst_inversion() {
    let big = StationProfile::saturated(dcf(), 130.0, 10, 120_000);
    let mut sc = base_scenario(5, 150.0);
    sc.stations = vec![big; 5];

    sc.lbt_mode = LbtMode::Laa;
    sc.lbt_sync = true;
    let laa_sync = run_scenario(&sc).unwrap();

    sc.lbt_sync = false;
    sc.lbt_mode = LbtMode::WifiLegacy;
    let legacy = run_scenario(&sc).unwrap();

    let params = derive_for(&sc);
    sc.lbt_mode = LbtMode::Olaa;
    sc.policy = Some(params);
    let olaa = run_scenario(&sc).unwrap();

    assert!(
        laa_sync.lbt_goodput < legacy.lbt_goodput,
        "synchronous contention-based access should lose to the WiFi twin: {} vs {}",
        laa_sync.lbt_goodput,
        legacy.lbt_goodput
    );
    let ratio = olaa.lbt_goodput / laa_sync.lbt_goodput;
    assert!(ratio >= 1.5, "OLAA/sync-LAA ratio {ratio:.2} below 1.5");
    println!(
        "acceptance 06 PASS: sync-LAA {:.2} < twin {:.2} Mb/s; OLAA {:.2} = {:.2}x sync-LAA (>= 1.5x)",
        laa_sync.lbt_goodput, legacy.lbt_goodput, olaa.lbt_goodput, ratio
    );
}

#[test]
fn criterion_07_olaa_optimality() {
    let t_lbt = 1000.0;
    let p_idle = 0.5;
    for beta in [0.1f64, 0.5, 1.0, 5.0] {
        let t_slot = beta * (1.0 - p_idle) * t_lbt;
        let lambda = solve_lambda_opt(p_idle, t_slot, t_lbt).unwrap();
        let (_, rate) = monte_carlo_lambda(p_idle, t_slot, t_lbt, 50, 500_000, 7);
        let rel = (rate / lambda - 1.0).abs();
        assert!(
            rel < 0.02,
            "beta={beta}: MC rate off by {:.2}%",
            rel * 100.0
        );
    }
    let lambda_half = solve_lambda_opt(p_idle, 0.5 * (1.0 - p_idle) * t_lbt, t_lbt).unwrap();
    assert!(
        (lambda_half - 0.38197).abs() <= 1e-4,
        "closed-form check failed: {lambda_half}"
    );
    println!(
        "acceptance 07 PASS: grid argmax within 2% for beta in {{0.1, 0.5, 1, 5}}; lambda(0.5) = {:.5}",
        lambda_half
    );
}

#[test]
fn criterion_08_residual_time_uniformity() {
    let mut sc = base_scenario(5, 80.0);
    let params = derive_for(&sc);
    sc.lbt_mode = LbtMode::Olaa;
    sc.policy = Some(params);
    let m = run_scenario(&sc).unwrap();
    assert!(
        m.lbt_opportunities >= 100_000,
        "only {} opportunities",
        m.lbt_opportunities
    );
    let d = sample_t_res_distribution(&m, sc.lbt_t_lbt).unwrap();
    let crit = ks_critical_value(m.t_res_samples.len(), 0.01);
    assert!(
        d < crit,
        "KS statistic {d:.5} rejects uniformity (crit {crit:.5})"
    );
    println!(
        "acceptance 08 PASS: KS D = {:.5} < {:.5} over {} samples (alpha = 0.01)",
        d,
        crit,
        m.t_res_samples.len()
    );
}

#[test]
fn criterion_09_non_saturated_gain() {
    let mut sc = base_scenario(5, 150.0);
    let qs = q_for_relative_load(&sc.phy, &sc.stations, &[0.5; 5]).unwrap();
    for (s, q) in sc.stations.iter_mut().zip(&qs) {
        s.arrival_prob_q = *q;
    }
    let params = derive_for(&sc);
    sc.lbt_mode = LbtMode::Orla;
    sc.policy = Some(params);
    let orla = run_scenario(&sc).unwrap();
    sc.lbt_mode = LbtMode::WifiLegacy;
    sc.policy = None;
    let legacy = run_scenario(&sc).unwrap();

    let gain = orla.lbt_goodput / legacy.lbt_goodput - 1.0;
    let ratio = mean(&orla.per_station_goodput) / mean(&legacy.per_station_goodput);
    assert!(gain >= 1.0, "gain {:+.0}% below +100%", gain * 100.0);
    assert!(
        (ratio - 1.0).abs() <= 0.02,
        "per-WiFi goodput ratio {ratio:.4} outside +/-2%"
    );
    println!(
        "acceptance 09 PASS: 50% load gain {:+.0}% (>= +100%), per-WiFi ratio {:.4}",
        gain * 100.0,
        ratio
    );
}

#[test]
fn criterion_10_multi_rate() {
    let rates = [156.0, 130.0, 78.0, 39.0, 13.0];
    let mut sc = base_scenario(5, 150.0);
    sc.stations = rates
        .iter()
        .map(|&c| StationProfile::saturated(dcf(), c, 1, 12000))
        .collect();
    let params = derive_for(&sc);

    sc.lbt_mode = LbtMode::Orla;
    sc.policy = Some(params);
    let orla = run_scenario(&sc).unwrap();
    sc.lbt_mode = LbtMode::Olaa;
    let olaa = run_scenario(&sc).unwrap();
    sc.lbt_mode = LbtMode::WifiLegacy;
    sc.policy = None;
    let legacy = run_scenario(&sc).unwrap();

    let orla_gain = orla.lbt_goodput / legacy.lbt_goodput - 1.0;
    let olaa_gain = olaa.lbt_goodput / legacy.lbt_goodput - 1.0;
    let air = |m: &RunMetrics| m.per_station_airtime.iter().sum::<f64>();
    let preserved_orla = air(&orla) / air(&legacy);
    let preserved_olaa = air(&olaa) / air(&legacy);
    assert!(orla_gain >= 1.5, "ORLA gain {:+.0}%", orla_gain * 100.0);
    assert!(olaa_gain >= 1.2, "OLAA gain {:+.0}%", olaa_gain * 100.0);
    assert!(
        preserved_orla >= 0.98,
        "ORLA airtime preservation {preserved_orla:.4}"
    );
    assert!(
        preserved_olaa >= 0.98,
        "OLAA airtime preservation {preserved_olaa:.4}"
    );
    println!(
        "acceptance 10 PASS: ORLA {:+.0}% OLAA {:+.0}%; WiFi airtime ratios {:.4}/{:.4} (>= 0.98)",
        orla_gain * 100.0,
        olaa_gain * 100.0,
        preserved_orla,
        preserved_olaa
    );
}

#[test]
fn criterion_11_take_rate_identity() {
    let (orla, _, params) = orla_pair();
    assert!(orla.lbt_opportunities >= 100_000);
    let pi = params.take_prob_pi;
    let n = orla.lbt_opportunities as f64;
    let empirical = orla.lbt_takes as f64 / n;
    let sigma = (pi * (1.0 - pi) / n).sqrt();
    let dev = (empirical - pi).abs();
    assert!(
        dev <= 3.0 * sigma,
        "take rate {empirical:.5} vs pi {pi:.5}: {:.2} sigma",
        dev / sigma
    );
    println!(
        "acceptance 11 PASS: take rate {:.5} vs pi {:.5} ({:.2} sigma over {} opportunities)",
        empirical,
        pi,
        dev / sigma,
        orla.lbt_opportunities
    );
}

#[test]
fn criterion_12_determinism_and_conservation() {
    // Every mode: identical seeds give bit-identical metrics and the time
    // accounting closes to within 1e-9.
    let configs: Vec<Scenario> = {
        let mut v = Vec::new();
        let sc = base_scenario(3, 10.0);
        v.push(sc.clone());
        let mut laa = sc.clone();
        laa.lbt_mode = LbtMode::Laa;
        v.push(laa);
        let mut legacy = sc.clone();
        legacy.lbt_mode = LbtMode::WifiLegacy;
        v.push(legacy);
        let mut orla = sc.clone();
        orla.lbt_mode = LbtMode::Orla;
        orla.policy = Some(derive_for(&sc));
        v.push(orla.clone());
        let mut olaa = orla.clone();
        olaa.lbt_mode = LbtMode::Olaa;
        v.push(olaa);
        let mut nonsat = sc.clone();
        for s in nonsat.stations.iter_mut() {
            s.arrival_prob_q = 0.05;
        }
        v.push(nonsat);
        v
    };
    for sc in &configs {
        let a = run_scenario(sc).unwrap();
        let b = run_scenario(sc).unwrap();
        assert_eq!(a, b, "{:?} not reproducible", sc.lbt_mode);
        let accounted = a.accounted_fraction();
        assert!(
            (accounted - 1.0).abs() <= 1e-9,
            "{:?}: accounted fraction {accounted}",
            sc.lbt_mode
        );
    }
    println!(
        "acceptance 12 PASS: {} scenarios bit-identical across repeat runs, accounting closes to 1 +/- 1e-9",
        configs.len()
    );
}
