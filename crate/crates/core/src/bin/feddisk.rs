use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use feddisk::fl::Variant;
use feddisk::pipeline::{self, ExperimentConfig, OUTPUT_DIR_ENV};
use feddisk::Error;

#[derive(Parser)]
#[command(
    name = "feddisk",
    version,
    about = "Two-phase federated training with MADE sample weights"
)]
struct Cli {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    clients: Option<usize>,
    /// Base noise variance `x`.
    #[arg(long, global = true)]
    noise_variance: Option<f64>,
    #[arg(long, global = true)]
    global_iters: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train local and global MADEs and write per-client sample weights.
    Phase1,
    /// Run weighted (or plain) FedAvg classification.
    Phase2 {
        #[arg(long, value_parser = ["feddisk", "feddisk-ab", "fedavg"])]
        variant: String,
    },
    /// Compare finished runs as a CSV table.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the configured dataset as IDX files.
    GenData {
        #[arg(long, default_value = "data")]
        dir: PathBuf,
    },
}

fn config(cli: &Cli) -> feddisk::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(k) = cli.clients {
        cfg.clients = k;
    }
    if let Some(x) = cli.noise_variance {
        cfg.noise_variance = x;
    }
    if let Some(g) = cli.global_iters {
        cfg.classifier.global_iters = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> feddisk::Result<()> {
    match &cli.command {
        Command::Phase1 => {
            let cfg = config(&cli)?;
            let out = pipeline::cmd_phase1(&cfg)?;
            eprintln!(
                "phase1: {} MADE rounds, weights in {}",
                out.log.rounds_run,
                cfg.output_dir.join(pipeline::PHASE1_DIR).display()
            );
        }
        Command::Phase2 { variant } => {
            let cfg = config(&cli)?;
            let variant: Variant = variant.parse()?;
            let report = pipeline::cmd_phase2(&cfg, variant)?;
            eprintln!(
                "{variant}: best accuracy {:.4}, cost {} parameters",
                report.best_accuracy(),
                report.cost.cost_params
            );
        }
        Command::Report { runs, out } => {
            let table = pipeline::cmd_report(runs)?;
            match out {
                Some(p) => pipeline::write_atomic(p, table.as_bytes())?,
                None => print!("{table}"),
            }
        }
        Command::GenData { dir } => {
            let cfg = config(&cli)?;
            let (images, labels) = pipeline::cmd_gen_data(&cfg, dir)?;
            eprintln!("wrote {} and {}", images.display(), labels.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.kind() {
                "config" | "missing-path" | "json" => 2,
                _ => 1,
            };
            let mut body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            if let Error::MissingPath { path } = &e {
                body["path"] = path.display().to_string().into();
            }
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
