//! Implementations behind the CLI subcommands: wiring, output files, and
//! text reports. All numeric work lives in the core modules.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::adversarial::{adversarial_train, generator_distribution, reward, sample_negative};
use crate::checkpoint::Checkpoint;
use crate::config::Precision;
use crate::evaluation::{evaluate, EvalReport};
use crate::kgdata::{
    compute_bern_stats, load_dataset, sample_candidates, Dataset, FilterIndex, Split,
};
use crate::models::ModelKind;
use crate::real::Real;
use crate::training::{pretrain, TrainConfig, TrainError, TrainReport};

pub struct PretrainOpts {
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub kind: ModelKind,
    pub cfg: TrainConfig,
    pub precision: Precision,
    pub preset: Option<String>,
}

pub struct AdvtrainOpts {
    pub dataset: PathBuf,
    pub generator: PathBuf,
    pub discriminator: PathBuf,
    pub out: PathBuf,
    pub cfg: TrainConfig,
    pub precision: Precision,
}

pub struct EvalOpts {
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub split: Split,
    pub out: PathBuf,
    pub precision: Precision,
}

pub struct InspectOpts {
    pub dataset: PathBuf,
    pub generator: PathBuf,
    pub discriminator: Option<PathBuf>,
    pub examples: usize,
    pub ns: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// `key = value` lines; everything needed to reproduce the run given the
/// same build and precision.
fn write_echo(dir: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        writeln!(text, "{k} = {v}").unwrap();
    }
    fs::write(dir.join("config.txt"), text).context("writing config echo")?;
    Ok(())
}

fn norm_str(norm: crate::models::Norm) -> &'static str {
    match norm {
        crate::models::Norm::L1 => "l1",
        crate::models::Norm::L2 => "l2",
    }
}

fn echo_train_fields(cfg: &TrainConfig) -> Vec<(&'static str, String)> {
    vec![
        ("k", cfg.k.to_string()),
        ("gamma", cfg.gamma.to_string()),
        ("norm", norm_str(cfg.norm).to_string()),
        ("lambda", cfg.lambda.to_string()),
        ("ns", cfg.ns.to_string()),
        ("ns_pretrain", cfg.ns_pretrain.to_string()),
        ("pretrain_epochs", cfg.pretrain_epochs.to_string()),
        ("adv_epochs", cfg.adv_epochs.to_string()),
        ("batches_per_epoch", cfg.batches_per_epoch.to_string()),
        ("eval_every_pretrain", cfg.eval_every_pretrain.to_string()),
        ("eval_every_adv", cfg.eval_every_adv.to_string()),
        ("seed", cfg.seed.to_string()),
    ]
}

fn write_curve(dir: &Path, report: &TrainReport) -> Result<()> {
    let mut text = String::from("epoch\tmrr\thits10\tmean_loss\tbest\n");
    for (i, p) in report.points().iter().enumerate() {
        let best = if Some(i) == report.best_index() { 1 } else { 0 };
        writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}",
            p.epoch, p.mrr, p.hits10, p.mean_loss, best
        )
        .unwrap();
    }
    fs::write(dir.join("curve.tsv"), text).context("writing curve file")?;
    Ok(())
}

fn print_report(report: &TrainReport) {
    for p in report.points() {
        println!(
            "epoch {}: valid mrr_x100 = {:.2}, hits10_x100 = {:.2}, mean_loss = {:.6}",
            p.epoch,
            p.mrr * 100.0,
            p.hits10 * 100.0,
            p.mean_loss
        );
    }
    if let Some(best) = report.best() {
        println!(
            "best epoch = {} (valid mrr_x100 = {:.2})",
            best.epoch,
            best.mrr * 100.0
        );
    }
}

pub fn cmd_pretrain(opts: &PretrainOpts) -> Result<()> {
    let data = load_dataset(&opts.dataset)
        .with_context(|| format!("loading dataset from {}", opts.dataset.display()))?;
    fs::create_dir_all(&opts.out)
        .with_context(|| format!("creating output dir {}", opts.out.display()))?;
    let mut echo = vec![
        ("command", "pretrain".to_string()),
        ("dataset", opts.dataset.display().to_string()),
        ("out", opts.out.display().to_string()),
        ("preset", opts.preset.clone().unwrap_or_else(|| "none".into())),
        ("model", opts.kind.name().to_string()),
        ("precision", opts.precision.as_str().to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
    ];
    echo.extend(echo_train_fields(&opts.cfg));
    write_echo(&opts.out, &echo)?;
    match opts.precision {
        Precision::F32 => run_pretrain::<f32>(opts, &data),
        Precision::F64 => run_pretrain::<f64>(opts, &data),
    }
}

fn run_pretrain<T: Real>(opts: &PretrainOpts, data: &Dataset) -> Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(opts.cfg.seed);
    match pretrain::<T, _>(opts.kind, data, &opts.cfg, &mut rng) {
        Ok(outcome) => {
            write_curve(&opts.out, &outcome.report)?;
            Checkpoint::from_params(&outcome.best, &data.vocab).save(&opts.out.join("best.ckpt"))?;
            Checkpoint::from_params(&outcome.final_params, &data.vocab)
                .save(&opts.out.join("final.ckpt"))?;
            print_report(&outcome.report);
            println!("wrote {} and final.ckpt", opts.out.join("best.ckpt").display());
            Ok(())
        }
        Err(TrainError::Diverged { epoch, report }) => {
            write_curve(&opts.out, &report)?;
            bail!("training diverged at epoch {epoch}; partial curve written");
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_advtrain(opts: &AdvtrainOpts) -> Result<()> {
    let gen_ckpt = Checkpoint::load(&opts.generator)
        .with_context(|| format!("loading generator {}", opts.generator.display()))?;
    let dis_ckpt = Checkpoint::load(&opts.discriminator)
        .with_context(|| format!("loading discriminator {}", opts.discriminator.display()))?;
    if gen_ckpt.vocab != dis_ckpt.vocab {
        bail!("generator and discriminator checkpoints were trained on different vocabularies");
    }
    let raw = load_dataset(&opts.dataset)
        .with_context(|| format!("loading dataset from {}", opts.dataset.display()))?;
    let triples = raw
        .remap(&gen_ckpt.vocab)
        .context("dataset does not match the checkpoints' vocabulary")?;
    let data = Dataset {
        vocab: gen_ckpt.vocab.clone(),
        triples,
    };
    fs::create_dir_all(&opts.out)
        .with_context(|| format!("creating output dir {}", opts.out.display()))?;
    let mut echo = vec![
        ("command", "advtrain".to_string()),
        ("dataset", opts.dataset.display().to_string()),
        ("out", opts.out.display().to_string()),
        ("generator_checkpoint", opts.generator.display().to_string()),
        (
            "discriminator_checkpoint",
            opts.discriminator.display().to_string(),
        ),
        ("generator_model", gen_ckpt.kind.name().to_string()),
        ("generator_k", gen_ckpt.k.to_string()),
        ("discriminator_model", dis_ckpt.kind.name().to_string()),
        ("discriminator_k", dis_ckpt.k.to_string()),
    ];
    if let Some(n) = dis_ckpt.kind.norm() {
        echo.push(("discriminator_norm", norm_str(n).to_string()));
    }
    echo.push(("precision", opts.precision.as_str().to_string()));
    echo.push(("version", env!("CARGO_PKG_VERSION").to_string()));
    // model geometry comes from the checkpoints, so only the knobs the
    // adversarial loop actually reads are echoed here
    echo.extend([
        ("gamma", opts.cfg.gamma.to_string()),
        ("ns", opts.cfg.ns.to_string()),
        ("adv_epochs", opts.cfg.adv_epochs.to_string()),
        ("batches_per_epoch", opts.cfg.batches_per_epoch.to_string()),
        ("eval_every_adv", opts.cfg.eval_every_adv.to_string()),
        ("seed", opts.cfg.seed.to_string()),
    ]);
    write_echo(&opts.out, &echo)?;
    match opts.precision {
        Precision::F32 => run_advtrain::<f32>(opts, &data, &gen_ckpt, &dis_ckpt),
        Precision::F64 => run_advtrain::<f64>(opts, &data, &gen_ckpt, &dis_ckpt),
    }
}

fn run_advtrain<T: Real>(
    opts: &AdvtrainOpts,
    data: &Dataset,
    gen_ckpt: &Checkpoint,
    dis_ckpt: &Checkpoint,
) -> Result<()> {
    let generator: crate::models::ModelParams<T> = gen_ckpt.to_params();
    let discriminator: crate::models::ModelParams<T> = dis_ckpt.to_params();
    let mut rng = ChaCha12Rng::seed_from_u64(opts.cfg.seed);
    match adversarial_train(generator, discriminator, data, &opts.cfg, &mut rng) {
        Ok(outcome) => {
            write_curve(&opts.out, &outcome.report)?;
            Checkpoint::from_params(&outcome.best, &data.vocab).save(&opts.out.join("best.ckpt"))?;
            Checkpoint::from_params(&outcome.final_discriminator, &data.vocab)
                .save(&opts.out.join("final.ckpt"))?;
            Checkpoint::from_params(&outcome.generator, &data.vocab)
                .save(&opts.out.join("generator_final.ckpt"))?;
            print_report(&outcome.report);
            println!("wrote discriminator checkpoints to {}", opts.out.display());
            Ok(())
        }
        Err(TrainError::Diverged { epoch, report }) => {
            write_curve(&opts.out, &report)?;
            bail!("adversarial training diverged at epoch {epoch}; partial curve written");
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_eval(opts: &EvalOpts) -> Result<()> {
    let ckpt = Checkpoint::load(&opts.checkpoint)
        .with_context(|| format!("loading checkpoint {}", opts.checkpoint.display()))?;
    let raw = load_dataset(&opts.dataset)
        .with_context(|| format!("loading dataset from {}", opts.dataset.display()))?;
    let triples = raw
        .remap(&ckpt.vocab)
        .context("checkpoint vocabulary does not cover this dataset")?;
    fs::create_dir_all(&opts.out)
        .with_context(|| format!("creating output dir {}", opts.out.display()))?;
    write_echo(
        &opts.out,
        &[
            ("command", "eval".to_string()),
            ("dataset", opts.dataset.display().to_string()),
            ("out", opts.out.display().to_string()),
            ("checkpoint", opts.checkpoint.display().to_string()),
            ("model", ckpt.kind.name().to_string()),
            ("k", ckpt.k.to_string()),
            ("split", opts.split.as_str().to_string()),
            ("precision", opts.precision.as_str().to_string()),
            ("version", env!("CARGO_PKG_VERSION").to_string()),
        ],
    )?;
    let report = match opts.precision {
        Precision::F32 => {
            let params: crate::models::ModelParams<f32> = ckpt.to_params();
            let filter = FilterIndex::build(&triples);
            evaluate(&params, triples.split(opts.split), &filter)
        }
        Precision::F64 => {
            let params: crate::models::ModelParams<f64> = ckpt.to_params();
            let filter = FilterIndex::build(&triples);
            evaluate(&params, triples.split(opts.split), &filter)
        }
    };
    let split_label = match opts.split {
        Split::Train => "train (diagnostic)".to_string(),
        other => other.as_str().to_string(),
    };
    let mut text = String::new();
    writeln!(text, "split = {split_label}").unwrap();
    writeln!(text, "queries = {}", report.num_queries).unwrap();
    writeln!(text, "mrr = {}", report.mrr).unwrap();
    writeln!(text, "hits10 = {}", report.hits10).unwrap();
    writeln!(text, "mrr_x100 = {:.2}", report.mrr * 100.0).unwrap();
    writeln!(text, "hits10_x100 = {:.2}", report.hits10 * 100.0).unwrap();
    writeln!(text, "tied_competitors = {}", report.tied_competitors).unwrap();
    print!("{text}");
    fs::write(opts.out.join("eval.txt"), &text).context("writing eval report")?;
    write_ranks(&opts.out, &ckpt, &report)?;
    Ok(())
}

fn write_ranks(dir: &Path, ckpt: &Checkpoint, report: &EvalReport) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        fs::File::create(dir.join("ranks.tsv")).context("creating ranks.tsv")?,
    );
    writeln!(out, "head\trelation\ttail\tside\trank\tties")?;
    for r in &report.ranks {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            ckpt.vocab.entity_name(r.triple.h),
            ckpt.vocab.relation_name(r.triple.r),
            ckpt.vocab.entity_name(r.triple.t),
            r.side.as_str(),
            r.rank,
            r.ties
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn cmd_inspect_negatives(opts: &InspectOpts) -> Result<()> {
    let gen_ckpt = Checkpoint::load(&opts.generator)
        .with_context(|| format!("loading generator {}", opts.generator.display()))?;
    if !gen_ckpt.kind.is_softmax() {
        bail!(
            "inspecting negatives requires a softmax generator, got {}",
            gen_ckpt.kind.name()
        );
    }
    let dis_ckpt = match &opts.discriminator {
        Some(path) => {
            let ck = Checkpoint::load(path)
                .with_context(|| format!("loading discriminator {}", path.display()))?;
            if ck.vocab != gen_ckpt.vocab {
                bail!("generator and discriminator checkpoints were trained on different vocabularies");
            }
            Some(ck)
        }
        None => None,
    };
    let raw = load_dataset(&opts.dataset)
        .with_context(|| format!("loading dataset from {}", opts.dataset.display()))?;
    let triples = raw
        .remap(&gen_ckpt.vocab)
        .context("dataset does not match the generator's vocabulary")?;
    let data = Dataset {
        vocab: gen_ckpt.vocab.clone(),
        triples,
    };
    let generator: crate::models::ModelParams<f64> = gen_ckpt.to_params();
    let discriminator: Option<crate::models::ModelParams<f64>> =
        dis_ckpt.as_ref().map(|c| c.to_params());

    let table = inspect_table(&data, &generator, discriminator.as_ref(), opts)?;
    print!("{table}");
    if let Some(out) = &opts.out {
        fs::create_dir_all(out)?;
        write_echo(
            out,
            &[
                ("command", "inspect-negatives".to_string()),
                ("dataset", opts.dataset.display().to_string()),
                ("out", out.display().to_string()),
                ("generator_checkpoint", opts.generator.display().to_string()),
                (
                    "discriminator_checkpoint",
                    opts.discriminator
                        .as_ref()
                        .map(|p| p.display().to_string())
                        .unwrap_or_else(|| "none".into()),
                ),
                ("n_examples", opts.examples.to_string()),
                ("ns", opts.ns.to_string()),
                ("seed", opts.seed.to_string()),
                ("version", env!("CARGO_PKG_VERSION").to_string()),
            ],
        )?;
        fs::write(out.join("negatives.txt"), &table).context("writing negatives table")?;
    }
    Ok(())
}

/// Table-of-contrasts between plain uniform corruption and the generator's
/// preferences: for each sampled positive, the first candidates of the
/// uniform pool next to the generator's highest-probability picks from that
/// pool, plus the negative it actually sampled (with its pool slot, which
/// makes the sampling statistically checkable from the text output).
fn inspect_table(
    data: &Dataset,
    generator: &crate::models::ModelParams<f64>,
    discriminator: Option<&crate::models::ModelParams<f64>>,
    opts: &InspectOpts,
) -> Result<String> {
    let train = &data.triples.train;
    if train.is_empty() {
        bail!("dataset has an empty training split");
    }
    let n_e = data.vocab.num_entities();
    let bern = compute_bern_stats(train, data.vocab.num_relations());
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let mut text = String::new();
    for i in 0..opts.examples {
        let pos = train[rng.random_range(0..train.len())];
        let cands = sample_candidates(pos, opts.ns, &bern, n_e, &mut rng)?;
        let dist = generator_distribution(generator, cands);
        let (slot, p_sampled) = sample_negative(&dist, &mut rng);
        let sampled = dist.candidates.candidates[slot];

        let ename = |tr: &crate::kgdata::Triple| {
            data.vocab
                .entity_name(tr.entity(dist.candidates.side))
                .to_owned()
        };
        writeln!(
            text,
            "# {}: ({}, {}, {})  corrupt={}  sampled={} slot={} p={:.6}",
            i + 1,
            data.vocab.entity_name(pos.h),
            data.vocab.relation_name(pos.r),
            data.vocab.entity_name(pos.t),
            dist.candidates.side.as_str(),
            ename(&sampled),
            slot,
            p_sampled
        )
        .unwrap();
        let header = if discriminator.is_some() {
            "uniform\tgenerator_top\tp\treward"
        } else {
            "uniform\tgenerator_top\tp"
        };
        writeln!(text, "{header}").unwrap();

        let mut order: Vec<usize> = (0..dist.probs.len()).collect();
        order.sort_by(|&a, &b| {
            dist.probs[b]
                .partial_cmp(&dist.probs[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let shown = opts.ns.min(5);
        for (uniform_cand, &top) in dist.candidates.candidates.iter().zip(&order).take(shown) {
            let uniform_name = ename(uniform_cand);
            let top_tr = dist.candidates.candidates[top];
            match discriminator {
                Some(d) => writeln!(
                    text,
                    "{uniform_name}\t{}\t{:.6}\t{:.6}",
                    ename(&top_tr),
                    dist.probs[top],
                    reward(d, top_tr)
                )
                .unwrap(),
                None => {
                    writeln!(text, "{uniform_name}\t{}\t{:.6}", ename(&top_tr), dist.probs[top])
                        .unwrap()
                }
            }
        }
        text.push('\n');
    }
    Ok(text)
}
