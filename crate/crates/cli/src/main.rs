use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rllim::data::SyntheticKind;
use rllim::explanation::Method;
use rllim_cli::commands;
use rllim_cli::config::{DatasetSource, ExperimentConfig};
use rllim_cli::output::resolve_output_dir;

#[derive(Parser)]
#[command(name = "rllim", version, about = "Instance-wise weighted local surrogates for black-box models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the config-driven commands; each overrides the matching
/// field of the config file.
#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON); defaults apply to omitted fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; else `output_dir` from the config, else
    /// `$RLLIM_OUTPUT_ROOT/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed for data, training and LIME.
    #[arg(long)]
    seed: Option<u64>,
    /// Synthetic generator, replacing the configured dataset.
    #[arg(long)]
    kind: Option<SyntheticKind>,
    /// Benchmark repetitions (seeds seed, seed+1, ...).
    #[arg(long)]
    runs: Option<usize>,
    /// Selection penalty for a single training run.
    #[arg(long)]
    lambda: Option<f64>,
    /// REINFORCE iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Comma-separated: rl-lim, lime, silo, maple.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
}

#[derive(Subcommand)]
enum Command {
    /// AWD per distance decile for RL-LIM, LIME, SILO and MAPLE on a synthetic dataset.
    SynthBench(Common),
    /// Trains the black box (if needed) and the instance-wise weight estimator.
    Train(Common),
    /// Explains rows with a trained model directory.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Output directory of `train`.
        #[arg(long)]
        model: PathBuf,
        /// CSV of rows to explain; defaults to the test split.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fidelity metrics of each method on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Reuse a trained model directory instead of training.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Trains one estimator per λ of the grid and reports validation fidelity.
    Sweep(Common),
    /// Mean |coefficient| per feature for groups of explained instances.
    SubgroupReport {
        #[arg(long)]
        explanations: PathBuf,
        /// JSON grouping spec.
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut c = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(k) = common.kind {
        c.dataset = match c.dataset {
            DatasetSource::Synthetic {
                train_size,
                probe_size,
                test_size,
                ..
            } => DatasetSource::Synthetic {
                kind: k,
                train_size,
                probe_size,
                test_size,
            },
            DatasetSource::Csv { .. } => DatasetSource::Synthetic {
                kind: k,
                train_size: 1000,
                probe_size: 1000,
                test_size: 1000,
            },
        };
    }
    if let Some(r) = common.runs {
        c.runs = r;
    }
    if let Some(l) = common.lambda {
        c.pipeline.train.lambda = l;
    }
    if let Some(i) = common.iterations {
        c.pipeline.train.iterations = i;
    }
    if let Some(m) = &common.methods {
        c.methods = m.clone();
    }
    Ok(c)
}

fn out_dir(common: &Common, config: &ExperimentConfig, command: &str) -> PathBuf {
    resolve_output_dir(common.out.as_deref(), config.output_dir.as_deref(), command)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::SynthBench(common) => {
            let c = resolve(&common)?;
            let out = out_dir(&common, &c, "synth-bench");
            let s = commands::synth_bench(&c, &out)?;
            println!(
                "{}: RL-LIM below SILO and MAPLE in {}/10 deciles (need {}): {}",
                s.dataset,
                s.deciles_below_both,
                s.min_deciles_won,
                if s.rl_lim_pass { "PASS" } else { "FAIL" }
            );
            println!(
                "{}: LIME minimum decile AWD {:.3} (floor {}): {}",
                s.dataset,
                s.lime_min_awd,
                s.lime_floor,
                if s.lime_pass { "PASS" } else { "FAIL" }
            );
            println!("wrote {}", out.display());
        }
        Command::Train(common) => {
            let c = resolve(&common)?;
            let out = out_dir(&common, &c, "train");
            let s = commands::train(&c, &out)?;
            println!(
                "trained on {} rows ({} probe), final-quartile reward {:.4}; wrote {}",
                s.train_rows,
                s.probe_rows,
                s.final_quartile_reward,
                out.display()
            );
        }
        Command::Explain { common, model, input } => {
            let c = resolve(&common)?;
            let out = out_dir(&common, &c, "explain");
            let n = commands::explain(&c, &model, input.as_deref(), &out)?;
            println!("{n} explanations; wrote {}", out.display());
        }
        Command::Evaluate { common, model } => {
            let c = resolve(&common)?;
            let out = out_dir(&common, &c, "evaluate");
            for r in commands::evaluate(&c, model.as_deref(), &out)? {
                let r2 = r.r2.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into());
                println!("{:7} LMAE {:.4}  R2 {r2}", r.method, r.lmae);
            }
            println!("wrote {}", out.display());
        }
        Command::Sweep(common) => {
            let c = resolve(&common)?;
            let out = out_dir(&common, &c, "sweep");
            let r = commands::sweep(&c, &out)?;
            for row in &r.rows {
                println!(
                    "lambda {:<6} LMAE {:.4}  selection {:.4}{}",
                    row.lambda,
                    row.validation_lmae,
                    row.mean_selection_probability,
                    if row.chosen { "  *" } else { "" }
                );
            }
            println!("wrote {}", out.display());
        }
        Command::SubgroupReport { explanations, groups, out } => {
            let out = resolve_output_dir(out.as_deref(), None, "subgroup-report");
            commands::subgroup_report(&explanations, &groups, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
