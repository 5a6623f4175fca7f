//! Command-line front end for the coexistence engine: analytical reports,
//! single simulation runs, parameter sweeps and fairness comparisons.
//!
//! Exit codes: 0 success, 2 parse/configuration error, 3 solver failure,
//! 4 simulation invariant violation, 1 I/O error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use coexsim_core::policy::{derive_policy, PolicyDerivation};
use coexsim_core::sim::{contender_wifi_profile, run_scenario, LbtMode};

use coexsim_cli::report::{
    analyze_rows, node_rows, plot_script, Comparison, ANALYZE_CSV_HEADER, NODE_CSV_HEADER,
    SWEEP_CSV_HEADER,
};
use coexsim_cli::scenario::{load_kv_file, resolve, CliError, CliResult, Prepared};
use coexsim_cli::sweep::{parse_sweep, run_cell_pair, run_sweep};

#[derive(Parser)]
#[command(
    name = "coexsim",
    about = "WiFi / listen-before-talk coexistence: analytical models and discrete-event simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the analytic model for a scenario and report attempt rates,
    /// slot statistics, throughput and the derived policy parameters.
    Analyze {
        /// Scenario file (key = value format).
        #[arg(long)]
        scenario: PathBuf,
        /// Write the CSV report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one simulation and emit one CSV row per node.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep with paired reference runs and gain columns.
    Sweep {
        /// Sweep file (base scenario plus one or two axes).
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for sweep cells (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write a gnuplot script next to --out.
        #[arg(long, requires = "out")]
        emit_plot: bool,
        /// Override the base scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a contender scenario, its one-more-WiFi twin and the WiFi-only
    /// baseline under paired seeds and print the fairness verdict.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze { scenario, out } => cmd_analyze(&scenario, out.as_deref()),
        Command::Simulate {
            scenario,
            seed,
            out,
        } => cmd_simulate(&scenario, seed, out.as_deref()),
        Command::Sweep {
            sweep,
            out,
            jobs,
            emit_plot,
            seed,
        } => cmd_sweep(&sweep, out.as_deref(), jobs, emit_plot, seed),
        Command::Compare {
            scenario,
            seed,
            out,
        } => cmd_compare(&scenario, seed, out.as_deref()),
    }
}

fn scenario_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn load_prepared(path: &Path, seed: Option<u64>) -> CliResult<Prepared> {
    let mut map = load_kv_file(path)?;
    if let Some(s) = seed {
        map.insert("sim.seed".into(), s.to_string());
    }
    resolve(&map, &scenario_id(path))
}

fn write_out(path: Option<&Path>, content: &str) -> CliResult<()> {
    if let Some(p) = path {
        std::fs::write(p, content)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn derivation_for(prepared: &Prepared) -> CliResult<PolicyDerivation> {
    let sc = &prepared.scenario;
    if sc.stations.is_empty() {
        return Err(CliError::Parse(
            "nothing to analyze: the scenario has no stations".into(),
        ));
    }
    let twin = contender_wifi_profile(sc)?;
    Ok(derive_policy(&sc.phy, &sc.stations, &twin, sc.lbt_t_lbt)?)
}

fn cmd_analyze(path: &Path, out: Option<&Path>) -> CliResult<()> {
    let prepared = load_prepared(path, None)?;
    let derived = derivation_for(&prepared)?;
    let mut csv = String::from(ANALYZE_CSV_HEADER);
    csv.push('\n');
    for row in analyze_rows(&derived, &prepared.scenario) {
        csv.push_str(&row);
        csv.push('\n');
    }
    print!("{csv}");
    write_out(out, &csv)
}

fn cmd_simulate(path: &Path, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let prepared = load_prepared(path, seed)?;
    let metrics = run_scenario(&prepared.scenario)?;
    let mut csv = String::from(NODE_CSV_HEADER);
    csv.push('\n');
    for row in node_rows(
        &prepared.id,
        prepared.scenario.seed,
        &metrics,
        prepared.scenario.lbt_mode,
        None,
        None,
    ) {
        csv.push_str(&row);
        csv.push('\n');
    }
    print!("{csv}");
    write_out(out, &csv)
}

fn cmd_sweep(
    path: &Path,
    out: Option<&Path>,
    jobs: Option<usize>,
    emit_plot: bool,
    seed: Option<u64>,
) -> CliResult<()> {
    let mut spec = parse_sweep(path)?;
    if let Some(s) = seed {
        spec.base.insert("sim.seed".into(), s.to_string());
    }
    let rows = run_sweep(&spec, jobs)?;
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    print!("{csv}");
    write_out(out, &csv)?;
    if emit_plot {
        let out = out.expect("clap enforces --out with --emit-plot");
        let gp = out.with_extension("gp");
        let script = plot_script(&out.display().to_string(), &spec.axis1.0, &spec.outputs);
        std::fs::write(&gp, script)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", gp.display())))?;
        eprintln!("plot script written to {}", gp.display());
    }
    Ok(())
}

fn cmd_compare(path: &Path, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let mut map = load_kv_file(path)?;
    if let Some(s) = seed {
        map.insert("sim.seed".into(), s.to_string());
    }
    let id = scenario_id(path);
    let mode = resolve(&map, &id)?.scenario.lbt_mode;
    if !matches!(mode, LbtMode::Laa | LbtMode::Orla | LbtMode::Olaa) {
        return Err(CliError::Parse(format!(
            "nothing to compare: lbt.mode is '{}' (need laa, orla or olaa)",
            mode.as_str()
        )));
    }

    let (mode, metrics, legacy) = run_cell_pair(&map, &id)?;
    let legacy = legacy.expect("contender modes always get a twin run");

    let mut baseline_map = map.clone();
    baseline_map.insert("lbt.mode".into(), "none".into());
    let baseline = resolve(&baseline_map, &id)?;
    let wifi_only = run_scenario(&baseline.scenario)?;

    let comparison = Comparison::build(&metrics, &legacy, &wifi_only);
    print!("{}", comparison.render(mode));

    if out.is_some() {
        let seed = map
            .get("sim.seed")
            .and_then(|v| v.parse().ok())
            .unwrap_or(1);
        let mut csv = String::from(NODE_CSV_HEADER);
        csv.push('\n');
        for row in node_rows(&id, seed, &metrics, mode, Some(&legacy), None) {
            csv.push_str(&row);
            csv.push('\n');
        }
        for row in node_rows(
            &format!("{id}:twin"),
            seed,
            &legacy,
            LbtMode::WifiLegacy,
            None,
            None,
        ) {
            csv.push_str(&row);
            csv.push('\n');
        }
        write_out(out, &csv)?;
    }
    if !comparison.pass {
        // The verdict is data, not an error: report it and exit cleanly.
        eprintln!("note: fairness verdict FAIL (per-WiFi goodput below 98% of the twin run)");
    }
    Ok(())
}
