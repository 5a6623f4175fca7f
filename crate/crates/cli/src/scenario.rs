//! Scenario files: flat, line-oriented `key = value` text with dotted keys
//! and `#` comments. Unknown keys are rejected with the offending name.
//!
//! Station fields resolve per index with the precedence
//! `stations.<i>.<field>` > `stations.*.<field>` > `stations.0.<field>` >
//! built-in default, so homogeneous populations need only a template entry
//! plus `stations.count`. Burst size comes either from `payload_b` (total
//! bits per burst) or from `packet_bits` x `f_agg`; offered load either from
//! `arrival_prob_q` directly or from `relative_load` (fraction of the
//! saturation throughput, converted through the analytic model).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use coexsim_core::analytic::{q_for_relative_load, DcfParams, PhyProfile, StationProfile};
use coexsim_core::policy::{derive_policy, take_all_params, PolicyParams};
use coexsim_core::sim::{contender_wifi_profile, LbtMode, Scenario};

/// CLI-level error with the process exit code contract:
/// 2 = parse/configuration, 3 = solver, 4 = simulation invariant, 1 = I/O.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Solver(String),
    SimInvariant(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Solver(_) => 3,
            CliError::SimInvariant(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "{m}"),
            CliError::SimInvariant(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<coexsim_core::Error> for CliError {
    fn from(e: coexsim_core::Error) -> Self {
        use coexsim_core::Error::*;
        match e {
            Config(_) => CliError::Parse(e.to_string()),
            Domain(_) | SolverFailure { .. } | InsufficientSamples { .. } => {
                CliError::Solver(e.to_string())
            }
            Invariant(_) => CliError::SimInvariant(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parsed `key = value` file, last assignment wins.
pub type KvMap = BTreeMap<String, String>;

pub fn parse_kv_text(text: &str, origin: &str) -> CliResult<KvMap> {
    let mut map = KvMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Parse(format!(
                "{origin}:{}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn load_kv_file(path: &Path) -> CliResult<KvMap> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_kv_text(&text, &path.display().to_string())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse::<T>()
        .map_err(|_| CliError::Parse(format!("field {key}: invalid value '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(CliError::Parse(format!(
            "field {key}: expected 0/1/true/false, got '{other}'"
        ))),
    }
}

const STATION_FIELDS: &[&str] = &[
    "cw_min",
    "max_backoff_stage",
    "data_rate_c",
    "f_agg",
    "payload_b",
    "packet_bits",
    "arrival_prob_q",
    "relative_load",
];

const SCALAR_KEYS: &[&str] = &[
    "phy.slot_sigma",
    "phy.difs",
    "phy.sifs",
    "phy.lifs",
    "phy.t_plcp",
    "phy.l_del",
    "phy.l_mac_oh",
    "phy.l_pad",
    "phy.l_ack",
    "phy.c_ctrl",
    "stations.count",
    "lbt.mode",
    "lbt.t_lbt",
    "lbt.rate",
    "lbt.sync",
    "lbt.cw_min",
    "lbt.max_backoff_stage",
    "policy.rho_bar",
    "policy.take_prob_pi",
    "policy.bursts_per_take_nu",
    "policy.lambda_opt",
    "policy.olaa_threshold",
    "sim.duration",
    "sim.warmup",
    "sim.seed",
];

fn check_known_keys(map: &KvMap) -> CliResult<()> {
    for key in map.keys() {
        if SCALAR_KEYS.contains(&key.as_str()) {
            continue;
        }
        if let Some(rest) = key.strip_prefix("stations.") {
            if let Some((idx, field)) = rest.split_once('.') {
                let idx_ok = idx == "*" || idx.parse::<usize>().is_ok();
                if idx_ok && STATION_FIELDS.contains(&field) {
                    continue;
                }
            }
        }
        return Err(CliError::Parse(format!("unknown field {key}")));
    }
    Ok(())
}

/// Station field lookup with the index > star > template precedence.
fn station_value<'a>(map: &'a KvMap, i: usize, field: &str) -> Option<(&'a str, String)> {
    for key in [
        format!("stations.{i}.{field}"),
        format!("stations.*.{field}"),
        format!("stations.0.{field}"),
    ] {
        if let Some(v) = map.get(&key) {
            return Some((v.as_str(), key));
        }
    }
    None
}

/// A scenario resolved from a key-value map, ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub id: String,
}

pub fn resolve(map: &KvMap, id: &str) -> CliResult<Prepared> {
    check_known_keys(map)?;

    let mut phy = PhyProfile::ieee80211ac();
    let f = |key: &str, slot: &mut f64| -> CliResult<()> {
        if let Some(v) = map.get(key) {
            *slot = parse_num(key, v)?;
        }
        Ok(())
    };
    f("phy.slot_sigma", &mut phy.slot_sigma)?;
    f("phy.difs", &mut phy.difs)?;
    f("phy.sifs", &mut phy.sifs)?;
    f("phy.lifs", &mut phy.lifs)?;
    f("phy.t_plcp", &mut phy.t_plcp)?;
    f("phy.c_ctrl", &mut phy.c_ctrl)?;
    let g = |key: &str, slot: &mut u64| -> CliResult<()> {
        if let Some(v) = map.get(key) {
            *slot = parse_num(key, v)?;
        }
        Ok(())
    };
    g("phy.l_del", &mut phy.l_del)?;
    g("phy.l_mac_oh", &mut phy.l_mac_oh)?;
    g("phy.l_pad", &mut phy.l_pad)?;
    g("phy.l_ack", &mut phy.l_ack)?;

    // Station count: explicit key, or the highest indexed entry.
    let explicit_max = map
        .keys()
        .filter_map(|k| {
            k.strip_prefix("stations.")
                .and_then(|rest| rest.split_once('.'))
                .and_then(|(idx, _)| idx.parse::<usize>().ok())
        })
        .max();
    let count: usize = match map.get("stations.count") {
        Some(v) => parse_num("stations.count", v)?,
        None => explicit_max.map(|m| m + 1).unwrap_or(0),
    };
    if count > 1000 {
        return Err(CliError::Parse(format!(
            "stations.count {count} is unreasonably large"
        )));
    }

    let mut stations = Vec::with_capacity(count);
    let mut relative_loads: Vec<Option<f64>> = Vec::with_capacity(count);
    for i in 0..count {
        let num = |field: &str, default: f64| -> CliResult<f64> {
            match station_value(map, i, field) {
                Some((v, key)) => parse_num(&key, v),
                None => Ok(default),
            }
        };
        let int = |field: &str, default: u64| -> CliResult<u64> {
            match station_value(map, i, field) {
                Some((v, key)) => parse_num(&key, v),
                None => Ok(default),
            }
        };
        let cw_min = int("cw_min", 16)?;
        let stage: u32 = match station_value(map, i, "max_backoff_stage") {
            Some((v, key)) => parse_num(&key, v)?,
            None => 4,
        };
        let f_agg = int("f_agg", 1)?;
        let payload_b = match station_value(map, i, "payload_b") {
            Some((v, key)) => parse_num(&key, v)?,
            None => f_agg * int("packet_bits", 12_000)?,
        };
        let q = match station_value(map, i, "arrival_prob_q") {
            Some((v, key)) => Some(parse_num(&key, v)?),
            None => None,
        };
        let rel = match station_value(map, i, "relative_load") {
            Some((v, key)) => Some(parse_num(&key, v)?),
            None => None,
        };
        relative_loads.push(if q.is_none() { rel } else { None });
        stations.push(StationProfile {
            dcf: DcfParams::new(cw_min, stage),
            data_rate_c: num("data_rate_c", 130.0)?,
            f_agg,
            payload_b,
            arrival_prob_q: q.unwrap_or(1.0),
        });
    }

    // Relative offered loads convert through the saturated analytic model.
    if relative_loads.iter().any(Option::is_some) {
        let loads: Vec<f64> = relative_loads.iter().map(|r| r.unwrap_or(1.0)).collect();
        let qs = q_for_relative_load(&phy, &stations, &loads).map_err(CliError::from)?;
        for ((station, q), rel) in stations.iter_mut().zip(qs).zip(&relative_loads) {
            if rel.is_some() {
                station.arrival_prob_q = q;
            }
        }
    }

    let lbt_mode: LbtMode = match map.get("lbt.mode") {
        Some(v) => v.parse().map_err(CliError::from)?,
        None => LbtMode::None,
    };
    let mut lbt_t_lbt = 1000.0;
    f("lbt.t_lbt", &mut lbt_t_lbt)?;
    let mut lbt_rate = 130.0;
    f("lbt.rate", &mut lbt_rate)?;
    let lbt_sync = match map.get("lbt.sync") {
        Some(v) => parse_bool("lbt.sync", v)?,
        None => false,
    };
    let mut lbt_cw = 16u64;
    g("lbt.cw_min", &mut lbt_cw)?;
    let lbt_stage: u32 = match map.get("lbt.max_backoff_stage") {
        Some(v) => parse_num("lbt.max_backoff_stage", v)?,
        None => 4,
    };

    let mut sim_duration = 10.0;
    f("sim.duration", &mut sim_duration)?;
    let mut warmup = 1.0;
    f("sim.warmup", &mut warmup)?;
    let seed: u64 = match map.get("sim.seed") {
        Some(v) => parse_num("sim.seed", v)?,
        None => 1,
    };

    let mut scenario = Scenario {
        phy,
        stations,
        lbt_mode,
        lbt_t_lbt,
        lbt_rate,
        lbt_sync,
        lbt_dcf: Some(DcfParams::new(lbt_cw, lbt_stage)),
        policy: None,
        sim_duration,
        warmup,
        seed,
    };

    if matches!(lbt_mode, LbtMode::Orla | LbtMode::Olaa) {
        scenario.policy = Some(policy_for(&scenario, map)?);
    }
    scenario.validate().map_err(CliError::from)?;
    Ok(Prepared {
        scenario,
        id: id.to_string(),
    })
}

/// Derive the policy parameters for the resolved scenario, then apply any
/// explicit `policy.*` overrides (a `rho_bar` override re-derives the
/// dependent quantities before field-level overrides apply).
fn policy_for(scenario: &Scenario, map: &KvMap) -> CliResult<PolicyParams> {
    use coexsim_core::policy::{bursts_per_take, olaa_threshold, take_probability};

    let mut params = if scenario.stations.is_empty() {
        take_all_params(scenario.lbt_t_lbt)
    } else {
        let twin = contender_wifi_profile(scenario).map_err(CliError::from)?;
        let derived = derive_policy(&scenario.phy, &scenario.stations, &twin, scenario.lbt_t_lbt)
            .map_err(CliError::from)?;
        if let Some(v) = map.get("policy.rho_bar") {
            let rho: f64 = parse_num("policy.rho_bar", v)?;
            let p_idle = derived.stats.p_idle;
            let pi = take_probability(rho, p_idle).map_err(CliError::from)?;
            PolicyParams {
                rho_bar: rho,
                take_prob_pi: pi,
                bursts_per_take_nu: bursts_per_take(rho, p_idle).map_err(CliError::from)?,
                olaa_threshold: olaa_threshold(derived.params.lambda_opt, pi, scenario.lbt_t_lbt),
                ..derived.params
            }
        } else {
            derived.params
        }
    };
    if let Some(v) = map.get("policy.take_prob_pi") {
        params.take_prob_pi = parse_num("policy.take_prob_pi", v)?;
    }
    if let Some(v) = map.get("policy.bursts_per_take_nu") {
        params.bursts_per_take_nu = parse_num("policy.bursts_per_take_nu", v)?;
    }
    if let Some(v) = map.get("policy.lambda_opt") {
        params.lambda_opt = parse_num("policy.lambda_opt", v)?;
    }
    if let Some(v) = map.get("policy.olaa_threshold") {
        params.olaa_threshold = parse_num("policy.olaa_threshold", v)?;
    }
    params.validate().map_err(CliError::from)?;
    Ok(params)
}

/// Format an override value the way the scenario parser expects: integers
/// print without a trailing fraction so integer-typed fields accept them.
pub fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_text(text: &str) -> CliResult<Prepared> {
        let map = parse_kv_text(text, "test").unwrap();
        resolve(&map, "test")
    }

    #[test]
    fn defaults_fill_in_table_values() {
        let p = resolve_text("stations.count = 2\n").unwrap();
        assert_eq!(p.scenario.stations.len(), 2);
        assert_eq!(p.scenario.stations[0].payload_b, 12_000);
        assert_eq!(p.scenario.stations[0].dcf.cw_min, 16);
        assert_eq!(p.scenario.phy.slot_sigma, 9.0);
        assert_eq!(p.scenario.lbt_mode, LbtMode::None);
    }

    #[test]
    fn station_precedence_index_star_template() {
        let p = resolve_text(
            "stations.count = 3\n\
             stations.0.data_rate_c = 156\n\
             stations.*.f_agg = 2\n\
             stations.2.data_rate_c = 13\n",
        )
        .unwrap();
        let s = &p.scenario.stations;
        assert_eq!(s[0].data_rate_c, 156.0);
        assert_eq!(s[1].data_rate_c, 156.0); // template
        assert_eq!(s[2].data_rate_c, 13.0); // index wins
        assert!(s.iter().all(|x| x.f_agg == 2));
        // payload scales with f_agg through packet_bits
        assert!(s.iter().all(|x| x.payload_b == 24_000));
    }

    #[test]
    fn payload_b_overrides_packet_bits() {
        let p =
            resolve_text("stations.count = 1\nstations.0.payload_b = 5000\nstations.0.f_agg = 4\n")
                .unwrap();
        assert_eq!(p.scenario.stations[0].payload_b, 5000);
    }

    #[test]
    fn unknown_field_is_named_in_the_error() {
        let err = resolve_text("stations.0.bogus_field = 1\n").unwrap_err();
        match err {
            CliError::Parse(msg) => assert!(msg.contains("bogus_field"), "{msg}"),
            other => panic!("wrong error {other:?}"),
        }
        let err = resolve_text("stations.count = 1\nlbt.mode = warp\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_number_is_a_parse_error() {
        let err = resolve_text("stations.count = 1\nsim.duration = fast\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn orla_mode_derives_policy() {
        let p = resolve_text("stations.count = 5\nlbt.mode = orla\n").unwrap();
        let params = p.scenario.policy.unwrap();
        assert!(params.rho_bar > 0.0);
        assert!(params.take_prob_pi > 0.0);
    }

    #[test]
    fn rho_bar_override_rederives_dependents() {
        let a = resolve_text("stations.count = 5\nlbt.mode = orla\n").unwrap();
        let b =
            resolve_text("stations.count = 5\nlbt.mode = orla\npolicy.rho_bar = 0.001\n").unwrap();
        let (pa, pb) = (a.scenario.policy.unwrap(), b.scenario.policy.unwrap());
        assert!(pb.rho_bar < pa.rho_bar);
        assert!(pb.take_prob_pi < pa.take_prob_pi);
    }

    #[test]
    fn relative_load_converts_to_arrival_probability() {
        let p = resolve_text("stations.count = 5\nstations.*.relative_load = 0.5\n").unwrap();
        let q = p.scenario.stations[0].arrival_prob_q;
        assert!(q > 0.0 && q < 0.1, "q = {q}");
        let sat = resolve_text("stations.count = 5\nstations.*.relative_load = 1.0\n").unwrap();
        assert_eq!(sat.scenario.stations[0].arrival_prob_q, 1.0);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let p = resolve_text("# a scenario\n\nstations.count = 1 # one station\n").unwrap();
        assert_eq!(p.scenario.stations.len(), 1);
    }

    #[test]
    fn format_value_round_trip() {
        assert_eq!(format_value(5.0), "5");
        assert_eq!(format_value(0.5), "0.5");
        assert_eq!(format_value(10000.0), "10000");
    }
}
