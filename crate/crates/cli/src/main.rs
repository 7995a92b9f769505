//! `cadt`: run workloads through the simulator, check them against the
//! oracles, validate commutativity tables and fuzz.
//!
//! Exit codes: 0 when every check passes, 1 on an oracle violation or a
//! failed run, 2 on an input error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cadt_core::harness::{check_run, fuzz, parse_workload, run_simulated, FuzzConfig, Schedule, Terminal, Workload};
use cadt_core::validate::validate_tables;
use cadt_core::{Exec, Registry};
use clap::{Parser, Subcommand};

/// Largest transaction count the brute-force oracles are run on.
const MAX_FUZZ_TXNS: usize = 5;

#[derive(Parser)]
#[command(name = "cadt", version, about = "Commutativity-based concurrency control for abstract data types")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a workload once and print its trace.
    Run {
        file: PathBuf,
        /// Override the workload's scheduling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the trace to this file instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print event counters.
        #[arg(long)]
        metrics: bool,
    },
    /// Run a workload and apply the serializability and abort oracles.
    Check {
        file: PathBuf,
        /// First seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        runs: u64,
    },
    /// Validate an ADT's commutativity tables, inverses and translations.
    VerifyTables {
        adt: String,
        /// Stack depth, set universe size or rational grid scale.
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
    /// Generate seeded random workloads and check every run.
    Fuzz {
        /// Comma-separated ADT names.
        #[arg(long, default_value = "stack,set,real,boolean", value_delimiter = ',')]
        adts: Vec<String>,
        /// Transactions per workload, `K` or `LO-HI`.
        #[arg(long, default_value = "2-4", value_parser = parse_range)]
        txns: (usize, usize),
        /// Public operations per transaction, `M` or `LO-HI`.
        #[arg(long, default_value = "1-5", value_parser = parse_range)]
        ops: (usize, usize),
        /// Objects per workload, `N` or `LO-HI`.
        #[arg(long, default_value = "1-3", value_parser = parse_range)]
        objects: (usize, usize),
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Random scheduling steps before the deterministic drain.
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// End one random transaction of every workload in abort.
        #[arg(long)]
        abort_one: bool,
        /// Report failing workloads as generated, without shrinking.
        #[arg(long)]
        no_minimize: bool,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let (lo, hi) = match s.split_once('-') {
        Some((lo, hi)) => (parse(lo)?, parse(hi)?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if lo > hi {
        return Err(format!("empty range {s}"));
    }
    Ok((lo, hi))
}

fn load(file: &PathBuf, registry: &Registry) -> Result<Workload> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    parse_workload(&text, registry).with_context(|| format!("{}", file.display()))
}

fn run(file: PathBuf, seed: Option<u64>, trace: Option<PathBuf>, metrics: bool) -> Result<bool> {
    let workload = load(&file, &Registry::builtin())?;
    let outcome = match run_simulated(&workload, seed) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("run failed: {e}");
            return Ok(false);
        }
    };
    match trace {
        Some(path) => std::fs::write(&path, outcome.trace()).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", outcome.trace()),
    }
    for (txn, status) in workload.txns.iter().zip(&outcome.statuses) {
        println!("txn {} {status:?}", txn.name);
    }
    for (object, state) in workload.objects.iter().zip(outcome.final_states()) {
        println!("object {} {}", object.name, object.spec.render_state(&state));
    }
    if metrics {
        print!("{}", outcome.manager.metrics());
    }
    Ok(true)
}

fn check(file: PathBuf, seed: Option<u64>, runs: u64) -> Result<bool> {
    let workload = load(&file, &Registry::builtin())?;
    let base = seed.unwrap_or(match workload.schedule {
        Some(Schedule::Random { seed, .. }) => seed,
        _ => 0,
    });
    let victims: Vec<usize> = (0..workload.txns.len())
        .filter(|&t| workload.txns[t].terminal == Terminal::Abort)
        .collect();
    let mut failed = 0;
    for i in 0..runs {
        let seed = base.wrapping_add(i);
        let report = check_run(&workload, Some(seed), &victims);
        match report.failure {
            None => println!("PASS seed {seed}"),
            Some(reason) => {
                failed += 1;
                println!("FAIL seed {seed}: {reason}");
            }
        }
    }
    println!("runs {runs} passed {} failed {failed}", runs - failed);
    Ok(failed == 0)
}

fn verify_tables(adt: &str, depth: usize) -> Result<bool> {
    let spec = Registry::builtin().get(adt)?;
    let report = validate_tables(&spec, depth, Exec::default());
    println!("{report}");
    Ok(report.is_clean())
}

fn run_fuzz(config: FuzzConfig) -> Result<bool> {
    if config.txns.1 > MAX_FUZZ_TXNS {
        bail!("--txns may not exceed {MAX_FUZZ_TXNS}");
    }
    if config.txns.0 == 0 || config.objects.0 == 0 {
        bail!("--txns and --objects need at least 1");
    }
    let registry = Registry::builtin();
    for adt in &config.adts {
        registry.get(adt)?;
    }
    let summary = fuzz(&config, &registry, Exec::default())?;
    print!("{summary}");
    Ok(summary.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            file,
            seed,
            trace,
            metrics,
        } => run(file, seed, trace, metrics),
        Command::Check { file, seed, runs } => check(file, seed, runs),
        Command::VerifyTables { adt, depth } => verify_tables(&adt, depth),
        Command::Fuzz {
            adts,
            txns,
            ops,
            objects,
            runs,
            seed,
            steps,
            abort_one,
            no_minimize,
        } => run_fuzz(FuzzConfig {
            adts,
            txns,
            ops,
            objects,
            runs,
            seed,
            steps,
            abort_one,
            minimize: !no_minimize,
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
