//! CSV emission and human-readable reports.
//!
//! The per-node schema is fixed:
//! `scenario_id,seed,node_id,node_kind,goodput_mbps,airtime_frac,takes,opportunities,collisions,gain_vs_legacy`.
//! Sweep output appends `axis1_value,axis2_value`. Missing values are left
//! empty, never written as NaN.

use coexsim_core::policy::PolicyDerivation;
use coexsim_core::sim::{LbtMode, RunMetrics, Scenario};

pub const NODE_CSV_HEADER: &str = "scenario_id,seed,node_id,node_kind,goodput_mbps,airtime_frac,takes,opportunities,collisions,gain_vs_legacy";
pub const SWEEP_CSV_HEADER: &str = "scenario_id,seed,node_id,node_kind,goodput_mbps,airtime_frac,takes,opportunities,collisions,gain_vs_legacy,axis1_value,axis2_value";

pub const ANALYZE_CSV_HEADER: &str = "station_id,tau,p_cond,p_succ,t_succ_us,throughput_mbps,p_idle,p_succ_total,p_coll,t_slot_us,rho_bar,pi,nu,lambda_opt,olaa_threshold_us";

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        // Missing/undefined stays empty by contract.
        String::new()
    }
}

fn gain_of(with: f64, reference: f64) -> String {
    if reference > 0.0 && with.is_finite() {
        fmt(with / reference - 1.0)
    } else {
        String::new()
    }
}

/// Per-node CSV rows for one run: one row per station plus one contender
/// row in every mode except `none`. `legacy` supplies the paired reference
/// run for the gain column.
pub fn node_rows(
    id: &str,
    seed: u64,
    metrics: &RunMetrics,
    mode: LbtMode,
    legacy: Option<&RunMetrics>,
    axis: Option<(f64, Option<f64>)>,
) -> Vec<String> {
    let axis_suffix = |row: &mut String| {
        if let Some((a1, a2)) = axis {
            row.push(',');
            row.push_str(&fmt(a1));
            row.push(',');
            if let Some(v) = a2 {
                row.push_str(&fmt(v));
            }
        }
    };
    let mut rows = Vec::new();
    for i in 0..metrics.per_station_goodput.len() {
        let gain = legacy
            .map(|l| gain_of(metrics.per_station_goodput[i], l.per_station_goodput[i]))
            .unwrap_or_default();
        let mut row = format!(
            "{id},{seed},{i},wifi,{},{},,,{},{gain}",
            fmt(metrics.per_station_goodput[i]),
            fmt(metrics.per_station_airtime[i]),
            metrics.per_station_collisions[i],
        );
        axis_suffix(&mut row);
        rows.push(row);
    }
    if mode != LbtMode::None {
        let gain = legacy
            .map(|l| gain_of(metrics.lbt_goodput, l.lbt_goodput))
            .unwrap_or_default();
        let mut row = format!(
            "{id},{seed},{},lbt,{},{},{},{},{},{gain}",
            metrics.per_station_goodput.len(),
            fmt(metrics.lbt_goodput),
            fmt(metrics.lbt_airtime),
            metrics.lbt_takes,
            metrics.lbt_opportunities,
            metrics.lbt_collisions,
        );
        axis_suffix(&mut row);
        rows.push(row);
    }
    rows
}

/// Analysis CSV: one row per station carrying its attempt-rate solution and
/// the system-level slot and policy quantities.
pub fn analyze_rows(derived: &PolicyDerivation, scenario: &Scenario) -> Vec<String> {
    let stats = &derived.stats;
    let p = &derived.params;
    (0..scenario.stations.len())
        .map(|i| {
            let throughput =
                stats.p_succ_per_station[i] * scenario.stations[i].payload_b as f64 / stats.t_slot;
            format!(
                "{i},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt(derived.steady.tau_per_station[i]),
                fmt(derived.steady.p_cond_per_station[i]),
                fmt(stats.p_succ_per_station[i]),
                fmt(stats.t_succ_per_station[i]),
                fmt(throughput),
                fmt(stats.p_idle),
                fmt(stats.p_succ_total),
                fmt(stats.p_coll),
                fmt(stats.t_slot),
                fmt(p.rho_bar),
                fmt(p.take_prob_pi),
                fmt(p.bursts_per_take_nu),
                fmt(p.lambda_opt),
                fmt(p.olaa_threshold),
            )
        })
        .collect()
}

/// Fairness comparison of one scenario against its one-more-station twin.
pub struct Comparison {
    pub per_wifi_policy: f64,
    pub per_wifi_twin: f64,
    pub lbt_policy: f64,
    pub lbt_twin: f64,
    pub wifi_only_per_station: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn build(policy: &RunMetrics, twin: &RunMetrics, wifi_only: &RunMetrics) -> Self {
        let n = policy.per_station_goodput.len().max(1) as f64;
        let per_wifi_policy = policy.per_station_goodput.iter().sum::<f64>() / n;
        let per_wifi_twin = twin.per_station_goodput.iter().sum::<f64>() / n;
        Self {
            per_wifi_policy,
            per_wifi_twin,
            lbt_policy: policy.lbt_goodput,
            lbt_twin: twin.lbt_goodput,
            wifi_only_per_station: wifi_only.per_station_goodput.iter().sum::<f64>() / n,
            pass: per_wifi_policy >= 0.98 * per_wifi_twin,
        }
    }

    pub fn render(&self, mode: LbtMode) -> String {
        let wifi_gain = 100.0 * (self.per_wifi_policy / self.per_wifi_twin - 1.0);
        let lbt_gain = 100.0 * (self.lbt_policy / self.lbt_twin - 1.0);
        format!(
            "fairness comparison ({} vs one-more-station twin, paired seeds)\n\
             per-WiFi goodput   {:>10.4} Mb/s  (twin {:.4}, WiFi-only {:.4})  gain {:+.2}%\n\
             contender goodput  {:>10.4} Mb/s  (twin station {:.4})           gain {:+.2}%\n\
             verdict: {}\n",
            mode.as_str(),
            self.per_wifi_policy,
            self.per_wifi_twin,
            self.wifi_only_per_station,
            wifi_gain,
            self.lbt_policy,
            self.lbt_twin,
            lbt_gain,
            if self.pass { "PASS" } else { "FAIL" },
        )
    }
}

/// gnuplot script that reads only the emitted sweep CSV.
pub fn plot_script(csv_path: &str, axis1_path: &str, outputs: &[String]) -> String {
    let metric = outputs
        .first()
        .map(String::as_str)
        .unwrap_or("goodput_mbps");
    format!(
        "# gnuplot script for {csv_path}\n\
         set datafile separator ','\n\
         set key outside\n\
         set xlabel '{axis1_path}'\n\
         set ylabel '{metric}'\n\
         pick(kind, v) = (strcol('node_kind') eq kind) ? v : NaN\n\
         plot '{csv_path}' using (column('axis1_value')):(pick('lbt', column('{metric}'))) \\\n\
         \t title 'contender' with points pt 7, \\\n\
         \t '' using (column('axis1_value')):(pick('wifi', column('{metric}'))) \\\n\
         \t title 'wifi' with points pt 6\n"
    )
}
