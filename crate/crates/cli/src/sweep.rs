//! Parameter sweeps: a base scenario plus one or two numeric axes, repeated
//! over consecutive seeds, with per-node gains against the paired
//! one-more-station reference run of the same cell and seed.
//!
//! Sweep files reuse the `key = value` format: `base = <scenario file>`
//! and/or inline `base.<scenario key>` entries, `axis1.path`,
//! `axis1.values`, optional `axis2.*`, `repetitions` and `outputs`. Value
//! lists accept comma-separated numbers and `a..b[:step]` inclusive ranges.

use std::path::Path;

use rayon::prelude::*;

use crate::report::node_rows;
use crate::scenario::{format_value, load_kv_file, resolve, CliError, CliResult, KvMap};
use coexsim_core::sim::{run_scenario, LbtMode, RunMetrics};

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: KvMap,
    pub axis1: (String, Vec<f64>),
    pub axis2: Option<(String, Vec<f64>)>,
    pub repetitions: u64,
    pub outputs: Vec<String>,
    pub stem: String,
}

pub fn parse_values(key: &str, text: &str) -> CliResult<Vec<f64>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((range, step)) = split_range(part) {
            let (lo, hi) = range;
            let step = step.unwrap_or(1.0);
            if step.is_nan() || step <= 0.0 || hi < lo {
                return Err(CliError::Parse(format!("field {key}: bad range '{part}'")));
            }
            let mut v = lo;
            while v <= hi + 1e-9 * step {
                out.push(v);
                v += step;
            }
        } else {
            out.push(
                part.parse::<f64>()
                    .map_err(|_| CliError::Parse(format!("field {key}: bad number '{part}'")))?,
            );
        }
    }
    if out.is_empty() {
        return Err(CliError::Parse(format!("field {key}: empty value list")));
    }
    Ok(out)
}

fn split_range(part: &str) -> Option<((f64, f64), Option<f64>)> {
    let (range, step) = match part.split_once(':') {
        Some((r, s)) => (r, Some(s.parse::<f64>().ok()?)),
        None => (part, None),
    };
    let (lo, hi) = range.split_once("..")?;
    Some(((lo.trim().parse().ok()?, hi.trim().parse().ok()?), step))
}

pub fn parse_sweep(path: &Path) -> CliResult<SweepSpec> {
    let map = load_kv_file(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());

    let mut base = match map.get("base") {
        Some(rel) => load_kv_file(&dir.join(rel))?,
        None => KvMap::new(),
    };
    for (k, v) in &map {
        if let Some(inner) = k.strip_prefix("base.") {
            base.insert(inner.to_string(), v.clone());
        }
    }

    let axis1_path = map
        .get("axis1.path")
        .ok_or_else(|| CliError::Parse("sweep file needs axis1.path".into()))?
        .clone();
    let axis1_values = parse_values(
        "axis1.values",
        map.get("axis1.values")
            .ok_or_else(|| CliError::Parse("sweep file needs axis1.values".into()))?,
    )?;
    let axis2 = match (map.get("axis2.path"), map.get("axis2.values")) {
        (Some(p), Some(v)) => Some((p.clone(), parse_values("axis2.values", v)?)),
        (None, None) => None,
        _ => {
            return Err(CliError::Parse(
                "axis2.path and axis2.values must be given together".into(),
            ))
        }
    };
    let repetitions: u64 = match map.get("repetitions") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Parse(format!("field repetitions: bad value '{v}'")))?,
        None => 1,
    };
    if repetitions < 1 {
        return Err(CliError::Parse("repetitions must be >= 1".into()));
    }
    let outputs = map
        .get("outputs")
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
        .unwrap_or_default();

    for key in map.keys() {
        let known = key == "base"
            || key.starts_with("base.")
            || key.starts_with("axis1.")
            || key.starts_with("axis2.")
            || key == "repetitions"
            || key == "outputs";
        if !known {
            return Err(CliError::Parse(format!("unknown field {key}")));
        }
    }

    Ok(SweepSpec {
        base,
        axis1: (axis1_path, axis1_values),
        axis2,
        repetitions,
        outputs,
        stem,
    })
}

struct Cell {
    map: KvMap,
    id: String,
    seed: u64,
    axis1: f64,
    axis2: Option<f64>,
}

/// One run plus, when the contender is under test, its paired
/// one-more-station reference with the same seed.
pub fn run_cell_pair(
    map: &KvMap,
    id: &str,
) -> CliResult<(LbtMode, RunMetrics, Option<RunMetrics>)> {
    let prepared = resolve(map, id)?;
    let metrics = run_scenario(&prepared.scenario).map_err(CliError::from)?;
    let mode = prepared.scenario.lbt_mode;
    let legacy = if matches!(mode, LbtMode::Laa | LbtMode::Orla | LbtMode::Olaa) {
        let mut twin_map = map.clone();
        twin_map.insert("lbt.mode".into(), "wifi_legacy".into());
        let twin = resolve(&twin_map, id)?;
        Some(run_scenario(&twin.scenario).map_err(CliError::from)?)
    } else {
        None
    };
    Ok((mode, metrics, legacy))
}

/// Run every cell and repetition; rows come back in deterministic
/// (axis1, axis2, repetition, node) order regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> CliResult<Vec<String>> {
    let base_seed: u64 = spec
        .base
        .get("sim.seed")
        .map(|v| v.parse().unwrap_or(1))
        .unwrap_or(1);

    let mut cells = Vec::new();
    for &a1 in &spec.axis1.1 {
        let axis2_values: Vec<Option<f64>> = match &spec.axis2 {
            Some((_, vs)) => vs.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        for a2 in axis2_values {
            for rep in 0..spec.repetitions {
                let mut map = spec.base.clone();
                map.insert(spec.axis1.0.clone(), format_value(a1));
                let mut id = format!("{}[{}={}", spec.stem, spec.axis1.0, format_value(a1));
                if let (Some((path, _)), Some(v)) = (&spec.axis2, a2) {
                    map.insert(path.clone(), format_value(v));
                    id.push_str(&format!(";{}={}", path, format_value(v)));
                }
                id.push(']');
                let seed = base_seed + rep;
                map.insert("sim.seed".into(), seed.to_string());
                cells.push(Cell {
                    map,
                    id,
                    seed,
                    axis1: a1,
                    axis2: a2,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(format!("cannot build thread pool: {e}")))?;
    let results: Vec<CliResult<Vec<String>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let (mode, metrics, legacy) = run_cell_pair(&cell.map, &cell.id)?;
                Ok(node_rows(
                    &cell.id,
                    cell.seed,
                    &metrics,
                    mode,
                    legacy.as_ref(),
                    Some((cell.axis1, cell.axis2)),
                ))
            })
            .collect()
    });

    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_list_syntax() {
        assert_eq!(parse_values("k", "1,2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_values("k", "1..4").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            parse_values("k", "1000..3000:1000").unwrap(),
            vec![1000.0, 2000.0, 3000.0]
        );
        assert_eq!(
            parse_values("k", "0.1, 0.5..0.7:0.1").unwrap(),
            vec![0.1, 0.5, 0.6, 0.7]
        );
        assert!(parse_values("k", "oops").is_err());
        assert!(parse_values("k", "5..1").is_err());
    }

    #[test]
    fn sweep_requires_axis() {
        let dir = std::env::temp_dir().join("coexsim_sweep_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("bad.swp");
        std::fs::write(&p, "repetitions = 2\n").unwrap();
        let err = parse_sweep(&p).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
