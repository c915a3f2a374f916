//! Thin command-line front end. All logic lives in the library; see the
//! crate examples for programmatic use.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use tokenagent::hopqa::search_registry;
use tokenagent::policy::Checkpoint;
use tokenagent::trainer::{
    evaluate, metrics_to_csv, run_ablation, train, RunConfig, TrainOptions,
};

#[derive(Parser)]
#[command(name = "tokenagent", about = "RL for multi-turn tool-using token agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config; defaults apply for missing fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides config)
    #[arg(long)]
    seed: Option<u64>,
    /// Advantage estimator: ppo | grpo | rloo | reinforce_pp | reinforce_pp_baseline
    #[arg(long)]
    algorithm: Option<String>,
    /// Ablation toggle: compute the loss over feedback tokens too
    #[arg(long)]
    no_loss_mask: bool,
    /// Ablation toggle: run the advantage recursion over all positions
    #[arg(long)]
    no_advantage_mask: bool,
    /// Output directory (default: current directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every training trajectory to trajectories.jsonl
    #[arg(long)]
    dump_trajectories: bool,
    /// Byte-reproducible mode; also zeroes the wall-clock metric column
    #[arg(long)]
    single_thread: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut config: RunConfig = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(alg) = &self.algorithm {
            config.rl.algorithm = alg.parse().map_err(anyhow::Error::msg)?;
        }
        if self.no_loss_mask {
            config.rl.loss_mask_enabled = false;
        }
        if self.no_advantage_mask {
            config.rl.advantage_mask_enabled = false;
        }
        Ok(config)
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn options(&self) -> TrainOptions {
        TrainOptions {
            single_thread: self.single_thread,
            dump_trajectories: self.dump_trajectories,
            verbose: true,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write metrics.csv, eval.jsonl, and a checkpoint
    Train(RunArgs),
    /// Evaluate a checkpoint on the held-out set of a config
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint file from a training run
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run the mask-ablation arms and write ablation.csv
    Ablate(RunArgs),
    /// Print the tool registry as JSON
    DumpManifest,
    /// Render metrics.csv columns to a PNG
    Plot {
        /// metrics.csv from a training run
        #[arg(long)]
        metrics: PathBuf,
        /// Comma-separated column names
        #[arg(long, default_value = "mean_reward,eval_em")]
        columns: String,
        #[arg(long, default_value = "metrics.png")]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let config = args.config()?;
            let dir = args.out_dir()?;
            let result = train(&config, &args.options())?;
            fs::write(dir.join("metrics.csv"), metrics_to_csv(&result.metrics))?;
            fs::write(dir.join("eval.jsonl"), result.final_eval.to_jsonl())?;
            let checkpoint = Checkpoint::new(&result.params, config.seed, config.schedule.updates as u64);
            fs::write(dir.join("checkpoint.json"), serde_json::to_string(&checkpoint)?)?;
            if let Some(dump) = result.trajectory_dump {
                fs::write(dir.join("trajectories.jsonl"), dump)?;
            }
            println!(
                "trained {} updates; final held-out em {:.3}; outputs in {}",
                config.schedule.updates,
                result.final_eval.mean_em,
                dir.display()
            );
        }
        Command::Eval { run, checkpoint } => {
            let config = run.config()?;
            let dir = run.out_dir()?;
            let text = fs::read_to_string(&checkpoint)
                .with_context(|| format!("reading {}", checkpoint.display()))?;
            let ckpt: Checkpoint = serde_json::from_str(&text)?;
            let params = ckpt.into_params()?;
            let task = tokenagent::hopqa::TaskVocab::new(
                config.env.hop.n_entities,
                config.env.hop.n_relations,
            );
            let instances = tokenagent::trainer::eval_instances(&config, &task)?;
            let output = evaluate(&params, &instances, &task, &config.env)?;
            fs::write(dir.join("eval.jsonl"), output.to_jsonl())?;
            println!("held-out em {:.3} over {} instances", output.mean_em, instances.len());
        }
        Command::Ablate(args) => {
            let config = args.config()?;
            let dir = args.out_dir()?;
            let report = run_ablation(&config, &args.options())?;
            fs::write(dir.join("ablation.csv"), report.to_csv())?;
            for (alg, arm, med) in &report.medians {
                println!("{alg} {arm}: median em {med:.3}");
            }
        }
        Command::DumpManifest => {
            println!("{}", serde_json::to_string_pretty(&search_registry().to_config_json())?);
        }
        Command::Plot { metrics, columns, out } => {
            let csv = fs::read_to_string(&metrics)
                .with_context(|| format!("reading {}", metrics.display()))?;
            let cols: Vec<&str> = columns.split(',').map(str::trim).collect();
            tokenagent::plot::plot_csv(&csv, &cols, &out, 640, 400)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
