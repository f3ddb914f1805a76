//! `pinchlab`: runs a check suite and emits a deterministic report.
//! Exit codes: 0 all checks pass, 1 some check failed, 2 configuration
//! or I/O problems.

use clap::Parser;
use pinchlab_cli::config::{parse_config_file, validate, RawConfig};
use pinchlab_cli::report::emit;
use pinchlab_cli::suites::run;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "pinchlab",
    about = "Verified experiments on unitary orbits of pinching operators",
    long_about = "Runs a named check suite over seeded random data and reports every \
                  verified inequality with its measured extreme, bound, and tolerance. \
                  Reports are byte-deterministic per (configuration, seed)."
)]
struct Cli {
    /// Suite: verify | fiber | section | distance | topology-gap | normal-orbit | lipschitz
    #[arg(long)]
    command: Option<String>,
    /// Ambient matrix dimension (2..=32)
    #[arg(long)]
    dim: Option<usize>,
    /// Norm spec: op | s1 | s2 | sp:<p> | kyfan:<k>
    #[arg(long)]
    norm: Option<String>,
    /// Comma-separated block ranks, e.g. 1,2 (complement takes the rest)
    #[arg(long)]
    blocks: Option<String>,
    /// Seed for all randomness in the suite
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per check (for topology-gap: the table depth k_max)
    #[arg(long)]
    trials: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json | csv
    #[arg(long)]
    format: Option<String>,
    /// Optional key=value config file; explicit flags win on conflict
    #[arg(long)]
    config: Option<PathBuf>,
}

fn real_main() -> Result<ExitCode, String> {
    let cli = Cli::parse();

    let file_layer = match &cli.config {
        None => RawConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
            parse_config_file(&text).map_err(|e| e.to_string())?
        }
    };
    let flag_layer = RawConfig {
        command: cli.command,
        dim: cli.dim,
        norm: cli.norm,
        blocks: cli.blocks,
        seed: cli.seed,
        trials: cli.trials,
        out: cli.out,
        format: cli.format,
    };
    let cfg = validate(flag_layer.over(file_layer)).map_err(|e| e.to_string())?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("PINCHLAB_THREADS") {
        let threads: usize = raw
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| format!("PINCHLAB_THREADS must be a positive integer, got `{raw}`"))?;
        pool = pool.num_threads(threads);
    }
    let pool = pool.build().map_err(|e| format!("cannot build thread pool: {e}"))?;

    let report = pool.install(|| run(&cfg)).map_err(|e| e.to_string())?;
    let text = emit(&report, cfg.format);
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write report to {}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    eprintln!(
        "pinchlab {}: {}/{} checks passed in {:.2?}",
        cfg.command.as_str(),
        report.passed(),
        report.checks.len(),
        report.wall_clock,
    );
    Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(message) => {
            eprintln!("pinchlab: {message}");
            ExitCode::from(2)
        }
    }
}
