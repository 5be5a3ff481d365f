//! `geocomm`: simulate, fit, predict, evaluate and export.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use geocomm_core::io::ExperimentConfig;
use geocomm_core::pipeline;

#[derive(Parser, Debug)]
#[command(name = "geocomm", version, about = "Latent-community spatio-temporal Hawkes models for check-in traces")]
struct Cli {
    /// Experiment config (JSON). Defaults apply to every missing field.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results are identical for any count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Leave timings out of reports so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate a synthetic trace with its true parameters.
    Simulate,
    /// Generate, recover influence and memberships, and compare ablations.
    SynthRecover,
    /// Fit every configured ablation on the training split.
    Fit,
    /// Top-K next-venue hits of the fitted models on the test split.
    Predict,
    /// Category and location losses of the fitted communities.
    EvalCommunities,
    /// Influence edges and thresholded spanning forests.
    ExportNetwork,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = Some(threads);
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    config.deterministic |= cli.deterministic;
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    pipeline::init_thread_pool(config.threads)?;
    let out = config.output_dir.display();
    match cli.command {
        Command::Simulate => {
            let s = pipeline::cmd_simulate(&config)?;
            println!("simulated {} events up to t = {} (truncated: {}) in {out}", s.n_events, s.t_end, s.truncated);
        }
        Command::SynthRecover => {
            let report = pipeline::cmd_synth_recover(&config)?;
            for r in &report.recovery {
                println!("{}: RelErr(A) = {:.5}, RelErr(phi) = {:.5}", pipeline::ablation_name(r.ablation), r.rel_err_a, r.rel_err_phi);
            }
            for row in &report.topk {
                println!("{}: hits {:?} at K {:?} of {}", pipeline::ablation_name(row.ablation), row.hits, row.ks, row.n_test);
            }
            println!("reports written to {out}");
        }
        Command::Fit => {
            for s in pipeline::cmd_fit(&config)? {
                println!("{}: ELBO {:.3} after {} epochs -> {}", pipeline::ablation_name(s.ablation), s.final_elbo, s.epochs, s.path.display());
            }
        }
        Command::Predict => {
            for (ablation, r) in pipeline::cmd_predict(&config)? {
                println!("{}: hits {:?} at K {:?} of {}", pipeline::ablation_name(ablation), r.hits, r.ks, r.n_test);
            }
        }
        Command::EvalCommunities => {
            let report = pipeline::cmd_eval_communities(&config)?;
            println!("{}", serde_json::to_string(&report.category_loss.iter().map(|l| (l.k_cat, l.mean)).collect::<Vec<_>>())?);
            println!("location loss {}", report.location_loss);
        }
        Command::ExportNetwork => {
            for path in pipeline::cmd_export_network(&config)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
