use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use predlab::harness::{self, ExperimentConfig};
use predlab::Result;

#[derive(Parser)]
#[command(name = "predlab", version, about = "Convergence diagnostics for predictive distributions of dependent sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the scenario registry with ground-truth flags.
    List,
    /// Run a scenario's diagnostic battery and write its output files.
    Run {
        scenario: String,
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Output directory (default: runs/<scenario>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Exact predictive values after a prefix, by enumeration.
    Oracle {
        scenario: String,
        /// Comma-separated points; coordinates of product points joined by ':'.
        #[arg(long, allow_hyphen_values = true)]
        prefix: String,
        /// Test function id (default: the whole standard suite).
        #[arg(long)]
        f: Option<String>,
    },
    /// Re-derive verdicts from the curves stored in an output directory.
    Report { dir: PathBuf },
}

fn list() {
    println!("{:<22} {:<22} {:<6} {:<10} {:<10} {:<10}  basis", "scenario", "model", "cid", "star", "as", "asymp");
    for s in harness::scenarios() {
        let model = match predlab::processes::ProcessModel::new(s.id.clone(), s.model.clone()) {
            Ok(m) => m,
            Err(e) => {
                println!("{:<22} invalid model: {e}", s.id);
                continue;
            }
        };
        let t = &model.truth;
        println!(
            "{:<22} {:<22} {:<6} {:<10} {:<10} {:<10}  {}",
            s.id,
            model.kind.name(),
            t.is_cid,
            t.expected_star.as_str(),
            t.expected_as.as_str(),
            t.expected_asymp_exch.as_str(),
            s.citation
        );
    }
}

fn run(scenario: String, config: Option<PathBuf>, seed: Option<u64>, paths: Option<usize>, out: Option<PathBuf>, threads: Option<usize>) -> Result<bool> {
    let mut cfg = match &config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::for_scenario(&scenario),
    };
    match &cfg.scenario {
        Some(s) if *s != scenario => {
            return Err(predlab::Error::Config(format!("config is for scenario {s}, not {scenario}")));
        }
        _ => cfg.scenario = Some(scenario.clone()),
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if paths.is_some() {
        cfg.paths = paths;
    }
    if out.is_some() {
        cfg.out = out;
    }
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&scenario));
    let record = harness::execute(&cfg, threads)?;
    harness::write_outputs(&record, &dir)?;
    for v in &record.verdicts {
        let expected = v.expected.map_or("-", |d| d.as_str());
        let mark = if v.matches() { "ok" } else { "MISMATCH" };
        print!("{:<14} {:<14} {:<13} expected {:<13} {mark}", v.condition.as_str(), v.f_id, v.decision_str(), expected);
        match &v.error {
            Some(e) => println!("  ({e})"),
            None => println!(),
        }
    }
    for h in &record.hierarchy_violations {
        println!("hierarchy violation: {h}");
    }
    println!("{}: {} in {:.1}s, output in {}", record.scenario(), if record.passed { "PASS" } else { "FAIL" }, record.wall_clock_seconds, dir.display());
    Ok(record.passed)
}

fn oracle(scenario: String, prefix: String, f: Option<String>) -> Result<bool> {
    for v in harness::oracle(&scenario, &prefix, f.as_deref())? {
        println!("{:<16} n={:<3} {} ({})", v.f_id, v.n, harness::format_number(v.value), v.method.as_str());
    }
    Ok(true)
}

fn report(dir: PathBuf) -> Result<bool> {
    let rows = harness::report(&dir)?;
    let mut all = true;
    for r in &rows {
        all &= r.agrees();
        println!("{:<14} {:<14} stored {:<13} derived {:<13} {}", r.condition.as_str(), r.f_id, r.stored, r.derived, if r.agrees() { "ok" } else { "DIFFERS" });
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::List => {
            list();
            Ok(true)
        }
        Command::Run { scenario, config, seed, paths, out, threads } => run(scenario, config, seed, paths, out, threads),
        Command::Oracle { scenario, prefix, f } => oracle(scenario, prefix, f),
        Command::Report { dir } => report(dir),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
