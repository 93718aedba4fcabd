//! Argument parsing and command dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use edgebatch_core::sim::Scenario;
use edgebatch_core::FormatError;

use crate::bench::{median_ratio, run_pruning_bench, PruningBenchSpec};
use crate::certify::{certify, CertifyOptions, Solvers};
use crate::error::CliError;
use crate::manifest::{manifest_path, RunManifest};
use crate::solve::{cmd_solve, SolvePolicy};
use crate::sweep::{run_sweep, write_rows, write_sweep_csv, SweepAxis, SweepPolicy, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "edgebatch", version, about = "Bandwidth and batch scheduling for multiuser edge inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance file and print the schedule.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "p2-opt")]
        policy: SolvePolicy,
        /// Drop the bandwidth constraint.
        #[arg(long)]
        no_bandwidth: bool,
        #[arg(long)]
        json: bool,
    },
    /// Simulate policies over a parameter grid and emit CSV.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        vary: SweepAxis,
        /// Grid values; defaults depend on the axis.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "full_optimal,ee_suboptimal,ee_optimal")]
        policies: Vec<SweepPolicy>,
        /// Number of seeds, counting up from `--seed`.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// First seed; defaults to the scenario's.
        #[arg(long)]
        seed: Option<u64>,
        /// Write CSV, summary and manifest here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare node visits of pruned and exhaustive tree search.
    BenchPruning {
        scenario: PathBuf,
        #[arg(long = "k", value_delimiter = ',', default_value = "8,16,32")]
        ks: Vec<usize>,
        #[arg(long = "d", value_delimiter = ',', default_value = "3,5")]
        ds: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 50_000_000)]
        node_cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the solvers against brute-force oracles on random instances.
    Certify {
        #[arg(long, default_value_t = 10)]
        k_max: usize,
        #[arg(long, default_value_t = 3)]
        d_max: usize,
        #[arg(long, default_value_t = 1)]
        d_min: usize,
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Where the first failing instance is written.
        #[arg(long, default_value = ".")]
        repro_dir: PathBuf,
    },
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input { path: path.to_path_buf(), reason: e.to_string() })?;
    let schema = |source| CliError::Schema { path: path.to_path_buf(), source };
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| schema(FormatError::Json(e)))?;
    scenario.validate().map_err(|e| schema(FormatError::Model(e)))?;
    Ok(scenario)
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    dispatch(cli.command, &args, out)
}

fn dispatch(command: Command, args: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Solve { instance, policy, no_bandwidth, json } => {
            let report = cmd_solve(&instance, policy, no_bandwidth)?;
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
            } else {
                write!(out, "{}", report.render_text())?;
            }
        }
        Command::Sweep { scenario: path, vary, values, policies, seeds, seed, out: dest } => {
            let scenario = load_scenario(&path)?;
            let first = seed.unwrap_or(scenario.seed);
            let mut spec = SweepSpec::new(scenario, vary);
            if let Some(v) = values {
                spec.values = v;
            }
            spec.policies = policies;
            spec.seeds = (0..seeds).map(|i| first + i).collect();
            let result = run_sweep(&spec)?;
            match dest {
                None => write_sweep_csv(&result.rows, &mut *out)?,
                Some(dest) => {
                    write_sweep_csv(&result.rows, std::fs::File::create(&dest)?)?;
                    write_rows(&result.summary, std::fs::File::create(dest.with_extension("summary.csv"))?)?;
                    RunManifest::new("sweep", args, &[path], &spec.seeds)?.save(&manifest_path(&dest))?;
                    writeln!(out, "wrote {} rows to {}", result.rows.len(), dest.display())?;
                }
            }
        }
        Command::BenchPruning { scenario: path, ks, ds, instances, node_cap, out: dest } => {
            let scenario = load_scenario(&path)?;
            let seeds = vec![scenario.seed];
            let spec = PruningBenchSpec { scenario, ks, ds, instances, node_cap };
            let rows = run_pruning_bench(&spec)?;
            match &dest {
                None => write_rows(&rows, &mut *out)?,
                Some(dest) => {
                    write_rows(&rows, std::fs::File::create(dest)?)?;
                    RunManifest::new("bench-pruning", args, &[path], &seeds)?.save(&manifest_path(dest))?;
                }
            }
            for &k in &spec.ks {
                for &d in &spec.ds {
                    let group: Vec<_> = rows.iter().filter(|r| r.k == k && r.d == d).cloned().collect();
                    let capped = group.iter().filter(|r| r.capped).count();
                    let median = median_ratio(&group).map_or("n/a".to_string(), |m| format!("{m:.2}"));
                    eprintln!("K={k} D={d}: median reduction {median} ({capped} capped)");
                }
            }
        }
        Command::Certify { k_max, d_max, d_min, instances, seed, repro_dir } => {
            let options = CertifyOptions { max_k: k_max, max_d: d_max, min_d: d_min, instances, seed };
            let report = certify(&options, &Solvers::default(), &repro_dir)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
            if !report.passed() {
                let first = report.first_failure.as_ref().expect("failure recorded");
                return Err(CliError::Certification(format!(
                    "{} of {} instances failed; first: instance {} ({}: {}), reproduction {}",
                    report.failures,
                    report.instances,
                    first.instance,
                    first.check,
                    first.detail,
                    report.reproduction.as_ref().map_or(String::new(), |p| p.display().to_string())
                )));
            }
        }
        Command::Replay { manifest } => {
            let m = RunManifest::load(&manifest)?;
            m.verify_inputs()?;
            let argv = std::iter::once("edgebatch".to_string()).chain(m.args.iter().cloned());
            let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.render().to_string()))?;
            if matches!(cli.command, Command::Replay { .. }) {
                return Err(CliError::Usage("a manifest cannot replay another manifest".into()));
            }
            dispatch(cli.command, &m.args, out)?;
        }
    }
    Ok(())
}
