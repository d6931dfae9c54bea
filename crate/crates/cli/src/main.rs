use std::path::PathBuf;
use std::process::ExitCode;

use adaptchi_cli::{exit, run, summary_exit_code, Experiment, ExperimentConfig, Overrides, RunOptions};
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "adaptchi", version, about = "Adaptive bond-dimension DMRG benchmarks")]
struct Cli {
    command: Experiment,
    /// JSON experiment config; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write controller_trace.csv.
    #[arg(long)]
    trace: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let mut cfg = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        experiment: Some(cli.command),
        output_dir: cli.out,
        seed: cli.seed,
    });
    match run(&cfg, RunOptions { trace: cli.trace }) {
        Ok(summary) => {
            for r in &summary.records {
                println!(
                    "{:<28} E/N {:>+.10} wall {:.3}s sweeps {:>2} avg_chi {:.2} max_chi {}{}",
                    r.label,
                    r.energy_per_site,
                    r.median_wall_time,
                    r.sweeps,
                    r.average_chi,
                    r.max_chi_used,
                    r.speedup.map(|s| format!(" speedup {s:.2}x")).unwrap_or_default()
                );
            }
            for c in &summary.checks {
                println!("{} {} = {:.3e} (threshold {:.3e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            for n in &summary.notes {
                println!("note: {n}");
            }
            println!("results in {}", cfg.output_dir.display());
            ExitCode::from(summary_exit_code(&summary) as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
