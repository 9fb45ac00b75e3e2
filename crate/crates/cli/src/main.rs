use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use hredq::aggregate::{aggregate_runs, load_run, write_aggregate, DEFAULT_BOOTSTRAP};
use hredq::checkpoint::Checkpoint;
use hredq::{load_config, train, ConfigSources, RunPaths};
use hredq_core::agent::policy_gradcheck;
use hredq_core::env::AnyEnv;
use hredq_core::metrics::evaluate;
use hredq_core::nn::{gradcheck, Architecture};
use hredq_core::rng::{stream, Stream};

#[derive(Parser)]
#[command(
    name = "hredq",
    version,
    about = "Goal-conditioned REDQ with hindsight relabeling and bounded targets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its run directory.
    Train {
        /// `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Named preset such as `redq+her+bq` or `reset(4)+her`.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// `point_reach` or `point_push`.
        #[arg(long)]
        env: Option<String>,
        /// Total environment steps.
        #[arg(long)]
        steps: Option<u64>,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        /// Extra `key=value` settings, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// IQM and bootstrap interval per evaluation step across runs.
    Aggregate {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "success_rate")]
        metric: String,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
        bootstrap: usize,
    },
    /// Compare analytic gradients against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a checkpoint with the deterministic policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            preset,
            seed,
            env,
            steps,
            out,
            overrides,
        } => {
            let mut flags = Vec::new();
            if let Some(s) = seed {
                flags.push(("seed", s.to_string()));
            }
            if let Some(e) = env {
                flags.push(("env", e));
            }
            if let Some(s) = steps {
                flags.push(("total_env_steps", s.to_string()));
            }
            let sources = ConfigSources {
                file: config.as_deref(),
                preset: preset.as_deref(),
                flags,
                overrides: &overrides,
            };
            let (config, expansion) = load_config(&sources)?;
            for (k, v) in &expansion {
                log::info!(
                    "preset {}: {k} = {v}",
                    config.preset.as_deref().unwrap_or("")
                );
            }
            let outcome = train(&config, &expansion, Some(&RunPaths::new(&out)))?;
            if let Some(last) = outcome.records.last() {
                println!(
                    "step {}: success {} return {}",
                    last.env_step, last.success_rate, last.mean_return
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Aggregate {
            runs,
            confidence,
            out,
            metric,
            bootstrap,
        } => {
            let loaded = runs
                .iter()
                .map(|d| load_run(d))
                .collect::<Result<Vec<_>>>()?;
            let agg = aggregate_runs(&loaded, &metric, confidence, bootstrap)?;
            let csv = write_aggregate(&agg, &out)?;
            println!("wrote {} and {}", out.display(), csv.display());
        }
        Command::Gradcheck {
            trials,
            tolerance,
            seed,
        } => {
            let mut rng = stream(seed, Stream::Init);
            let mut worst: f64 = 0.0;
            for _ in 0..trials {
                use rand::Rng;
                let input = rng.random_range(1..=8);
                let mut sizes = vec![input];
                for _ in 0..rng.random_range(1..=3) {
                    sizes.push(rng.random_range(3..=8));
                }
                sizes.push(1);
                let r = gradcheck(&Architecture::relu(sizes, true), 1, tolerance, &mut rng);
                worst = worst.max(r.max_relative_error);
            }
            let critic_ok = worst < tolerance;
            println!("critic networks: {trials} trials, max relative error {worst:.3e}");
            let p = policy_gradcheck(trials, tolerance, &mut rng);
            println!(
                "policy objective: {trials} trials, max relative error {:.3e}",
                p.max_relative_error
            );
            if !(critic_ok && p.passed) {
                bail!("gradient check failed (tolerance {tolerance:e})");
            }
            println!("pass");
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let Some(mut env) = AnyEnv::from_id(&ckpt.env) else {
                bail!("checkpoint names unknown env {:?}", ckpt.env);
            };
            let e = evaluate(
                &ckpt.agent,
                &mut env,
                episodes,
                &mut stream(seed, Stream::Eval),
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            println!(
                "{}",
                serde_json::json!({
                    "env": ckpt.env,
                    "env_step": ckpt.env_step,
                    "episodes": episodes,
                    "mean_return": e.mean_return,
                    "success_rate": e.success_rate,
                })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
