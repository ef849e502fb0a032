use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kbgan::commands::{
    cmd_advtrain, cmd_eval, cmd_inspect_negatives, cmd_pretrain, AdvtrainOpts, EvalOpts,
    InspectOpts, PretrainOpts,
};
use kbgan::config::{find_preset, preset_names, Precision};
use kbgan::kgdata::Split;
use kbgan::models::{ModelKind, Norm};
use kbgan::training::TrainConfig;

#[derive(Parser)]
#[command(name = "kbgan", version, about = "Knowledge graph embeddings with adversarial negative sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct TrainFlags {
    /// Embedding dimension per entity row
    #[arg(long)]
    k: Option<usize>,
    /// Hinge margin for the translation model
    #[arg(long)]
    gamma: Option<f64>,
    /// Distance norm for translation scores
    #[arg(long, value_parser = parse_norm)]
    norm: Option<Norm>,
    /// L2 penalty on touched rows (softmax models)
    #[arg(long)]
    lambda: Option<f64>,
    /// Candidate pool size per positive in the adversarial stage
    #[arg(long)]
    ns: Option<usize>,
    /// Candidate pool size for softmax pretraining
    #[arg(long)]
    ns_pretrain: Option<usize>,
    #[arg(long)]
    batches_per_epoch: Option<usize>,
    /// Validate every this many epochs
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    match s {
        "l1" | "L1" | "1" => Ok(Norm::L1),
        "l2" | "L2" | "2" => Ok(Norm::L2),
        other => Err(format!("unknown norm {other:?}, expected l1 or l2")),
    }
}

fn parse_model(s: &str) -> Result<String, String> {
    match s {
        "transe" | "transd" | "distmult" | "complex" => Ok(s.to_string()),
        other => Err(format!(
            "unknown model {other:?}, expected transe, transd, distmult or complex"
        )),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a single model from random initialization
    Pretrain {
        /// Directory holding train.txt, valid.txt, test.txt
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory (config echo, curve, checkpoints)
        #[arg(long)]
        out: PathBuf,
        /// Named hyperparameter preset, e.g. wn18rr-transe
        #[arg(long)]
        preset: Option<String>,
        /// Model family: transe, transd, distmult, complex
        #[arg(long, value_parser = parse_model)]
        model: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Adversarial fine-tuning of a pretrained discriminator
    Advtrain {
        #[arg(long)]
        dataset: PathBuf,
        /// Pretrained softmax generator checkpoint
        #[arg(long = "gen")]
        generator: PathBuf,
        /// Pretrained translation discriminator checkpoint
        #[arg(long = "dis")]
        discriminator: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Filtered ranking evaluation of a checkpoint
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "ckpt")]
        checkpoint: PathBuf,
        /// Split to rank: test, valid, or train (train is a diagnostic)
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Precision::F64)]
        precision: Precision,
    },
    /// Show the generator's preferred negatives next to uniform draws
    InspectNegatives {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "gen")]
        generator: PathBuf,
        /// Optional discriminator for a reward column
        #[arg(long = "dis")]
        discriminator: Option<PathBuf>,
        /// How many training positives to sample
        #[arg(long, default_value_t = 10)]
        examples: usize,
        /// Candidate pool size
        #[arg(long, default_value_t = 20)]
        ns: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional output directory for the table and config echo
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "valid" => Ok(Split::Valid),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split {other:?}")),
    }
}

/// Preset first, explicit flags override, then per-command epoch count.
fn build_config(
    preset: Option<&str>,
    model: Option<&str>,
    flags: &TrainFlags,
) -> anyhow::Result<(ModelKind, TrainConfig)> {
    let mut cfg = TrainConfig::default();
    let mut kind = None;
    if let Some(name) = preset {
        let p = find_preset(name).ok_or_else(|| {
            anyhow::anyhow!(
                "unknown preset {name:?}; available: {}",
                preset_names().join(", ")
            )
        })?;
        kind = Some(p.apply(&mut cfg));
    }
    if let Some(m) = model {
        let norm = flags.norm.unwrap_or(cfg.norm);
        kind = Some(match m {
            "transe" => ModelKind::TransE(norm),
            "transd" => ModelKind::TransD(norm),
            "distmult" => ModelKind::DistMult,
            "complex" => ModelKind::ComplEx,
            _ => unreachable!("validated by clap"),
        });
    }
    let kind =
        kind.ok_or_else(|| anyhow::anyhow!("need either --preset or --model to pick a model"))?;
    if let Some(k) = flags.k {
        cfg.k = k;
    }
    if let Some(g) = flags.gamma {
        cfg.gamma = g;
    }
    if let Some(n) = flags.norm {
        cfg.norm = n;
    }
    if let Some(l) = flags.lambda {
        cfg.lambda = l;
    }
    if let Some(ns) = flags.ns {
        cfg.ns = ns;
    }
    if let Some(ns) = flags.ns_pretrain {
        cfg.ns_pretrain = ns;
    }
    if let Some(b) = flags.batches_per_epoch {
        cfg.batches_per_epoch = b;
    }
    cfg.seed = flags.seed;
    Ok((kind, cfg))
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Pretrain {
            dataset,
            out,
            preset,
            model,
            epochs,
            flags,
        } => {
            let (kind, mut cfg) = build_config(preset.as_deref(), model.as_deref(), &flags)?;
            if let Some(e) = epochs {
                cfg.pretrain_epochs = e;
            }
            if let Some(e) = flags.eval_every {
                cfg.eval_every_pretrain = e;
            }
            cmd_pretrain(&PretrainOpts {
                dataset,
                out,
                kind,
                cfg,
                precision: flags.precision,
                preset,
            })
        }
        Command::Advtrain {
            dataset,
            generator,
            discriminator,
            out,
            epochs,
            flags,
        } => {
            // model families come from the checkpoints; flags only shape the run
            let mut cfg = TrainConfig::default();
            if let Some(g) = flags.gamma {
                cfg.gamma = g;
            }
            if let Some(ns) = flags.ns {
                cfg.ns = ns;
            }
            if let Some(b) = flags.batches_per_epoch {
                cfg.batches_per_epoch = b;
            }
            if let Some(e) = epochs {
                cfg.adv_epochs = e;
            }
            if let Some(e) = flags.eval_every {
                cfg.eval_every_adv = e;
            }
            cfg.seed = flags.seed;
            cmd_advtrain(&AdvtrainOpts {
                dataset,
                generator,
                discriminator,
                out,
                cfg,
                precision: flags.precision,
            })
        }
        Command::Eval {
            dataset,
            checkpoint,
            split,
            out,
            precision,
        } => cmd_eval(&EvalOpts {
            dataset,
            checkpoint,
            split,
            out,
            precision,
        }),
        Command::InspectNegatives {
            dataset,
            generator,
            discriminator,
            examples,
            ns,
            seed,
            out,
        } => cmd_inspect_negatives(&InspectOpts {
            dataset,
            generator,
            discriminator,
            examples,
            ns,
            seed,
            out,
        }),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
