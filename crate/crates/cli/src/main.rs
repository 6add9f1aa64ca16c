use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use alpp_core::experiment::{oracle_report, run_experiment, write_outputs, RESULTS_FILE, SUMMARY_FILE};
use alpp_core::{ExperimentConfig, Strategy};
use alpp_service::AppState;
use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "alpp", version, about = "Active learning with rationale-weighted committees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the simulated-oracle experiment and write results.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Added to every repetition seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Comma-separated subset of random, qbc, alpp.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
    },
    /// Print the simulated oracle's test accuracy and F1 per repetition.
    OracleReport {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve live annotation sessions over HTTP.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long)]
        state_dir: PathBuf,
        /// Bind address.
        #[arg(long, default_value_t = Ipv4Addr::LOCALHOST.into())]
        host: std::net::IpAddr,
    },
}

fn load_config(path: &PathBuf) -> anyhow::Result<ExperimentConfig> {
    let config = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    config.validate()?;
    Ok(config)
}

fn simulate(config: PathBuf, out: PathBuf, seed_offset: u64, strategies: Option<Vec<Strategy>>) -> anyhow::Result<()> {
    let mut cfg = load_config(&config)?;
    if let Some(s) = strategies {
        if s.is_empty() {
            bail!("--strategies must name at least one strategy");
        }
        cfg.strategies = s;
    }
    cfg.offset_seeds(seed_offset);
    let output = run_experiment(&cfg)?;
    write_outputs(&output, &out)?;

    eprintln!(
        "{} rows kept, {} dropped; wrote {} and {}",
        output.total_rows,
        output.dropped_rows,
        out.join(RESULTS_FILE).display(),
        out.join(SUMMARY_FILE).display()
    );
    for s in &output.result.strategies {
        eprintln!(
            "{:>7}: mean F1 {:.4}, queries to F1 {} = {:.1} ({} of {} reached)",
            s.strategy,
            s.mean_f1,
            s.queries_to_threshold.threshold,
            s.queries_to_threshold.mean_queries,
            s.queries_to_threshold.reached,
            s.repetitions
        );
    }
    for c in &output.result.comparisons {
        if let Some(t) = c.per_query {
            eprintln!(
                "{} vs {}: t = {:.3}, p = {:.3e} (paired over queries)",
                c.strategy, c.baseline, t.statistic, t.p_value
            );
        }
    }
    Ok(())
}

fn oracle(config: PathBuf) -> anyhow::Result<()> {
    let cfg = load_config(&config)?;
    let reports = oracle_report(&cfg)?;
    println!("repetition\tseed\ttrain_rows\ttest_rows\taccuracy\tf1");
    for r in &reports {
        println!(
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}",
            r.repetition, r.seed, r.train_rows, r.test_rows, r.accuracy, r.f1
        );
    }
    let n = reports.len() as f64;
    println!(
        "mean\t\t\t\t{:.4}\t{:.4}",
        reports.iter().map(|r| r.accuracy).sum::<f64>() / n,
        reports.iter().map(|r| r.f1).sum::<f64>() / n
    );
    Ok(())
}

fn serve(config: PathBuf, host: std::net::IpAddr, port: u16, state_dir: PathBuf) -> anyhow::Result<()> {
    let cfg = load_config(&config)?;
    let state = AppState::open(cfg, &state_dir).map_err(|e| anyhow::anyhow!(e.message))?;
    eprintln!("{} session(s) restored from {}", state.session_ids().len(), state_dir.display());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(alpp_service::serve(SocketAddr::new(host, port), state))?;
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            seed_offset,
            strategies,
        } => simulate(config, out, seed_offset, strategies),
        Command::OracleReport { config } => oracle(config),
        Command::Serve {
            config,
            port,
            state_dir,
            host,
        } => serve(config, host, port, state_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
