//! Losses, the sparse Adam optimizer, and the pretraining loop.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::evaluation::evaluate;
use crate::kgdata::{
    compute_bern_stats, sample_candidates, Dataset, FilterIndex, KgError, Side, Triple,
};
use crate::models::{GradAccumulator, ModelKind, ModelParams, Norm, SparseGradient, Table, TableId};
use crate::real::{softmax_stable, Real};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite gradient at optimizer step {step}")]
    NonFiniteGradient { step: u64 },
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize, report: TrainReport },
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error("{role} must be a {expected} model, got {got}")]
    RoleMismatch {
        role: &'static str,
        expected: &'static str,
        got: &'static str,
    },
    #[error("model tables sized for {model} entities/relations but dataset has {data}")]
    SizeMismatch { model: String, data: String },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

/// Hyperparameters shared by pretraining and the adversarial stage.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub k: usize,
    pub gamma: f64,
    pub norm: Norm,
    pub lambda: f64,
    /// Candidate pool size per positive in the adversarial stage.
    pub ns: usize,
    /// Pool size for softmax pretraining negatives.
    pub ns_pretrain: usize,
    pub pretrain_epochs: usize,
    pub adv_epochs: usize,
    pub batches_per_epoch: usize,
    pub eval_every_pretrain: usize,
    pub eval_every_adv: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 50,
            gamma: 3.0,
            norm: Norm::L1,
            lambda: 0.1,
            ns: 20,
            ns_pretrain: 20,
            pretrain_epochs: 1000,
            adv_epochs: 5000,
            batches_per_epoch: 100,
            eval_every_pretrain: 50,
            eval_every_adv: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.gamma <= 0.0 {
            return Err(TrainError::BadConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.ns == 0 || self.ns_pretrain == 0 {
            return Err(TrainError::BadConfig("ns must be at least 1".into()));
        }
        if self.batches_per_epoch == 0 {
            return Err(TrainError::BadConfig(
                "batches_per_epoch must be at least 1".into(),
            ));
        }
        if self.eval_every_pretrain == 0 || self.eval_every_adv == 0 {
            return Err(TrainError::BadConfig("eval_every must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(TrainError::BadConfig("k must be at least 1".into()));
        }
        if self.lambda < 0.0 {
            return Err(TrainError::BadConfig("lambda must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Margin loss on distances: max(0, gamma + f_pos - f_neg). Zero exactly
/// when the negative is scored at least gamma farther than the positive.
pub fn marginal_loss<T: Real>(f_pos: T, f_neg: T, gamma: T) -> T {
    (gamma + f_pos - f_neg).max(T::zero())
}

/// Negative log probability of the positive under a softmax over
/// {positive} + negatives of goodness values. Max-subtracted, so large
/// magnitudes do not overflow.
pub fn log_softmax_loss<T: Real>(g_pos: T, g_negs: &[T]) -> T {
    let m = g_negs.iter().fold(g_pos, |m, &g| m.max(g));
    let z = g_negs
        .iter()
        .fold((g_pos - m).exp(), |z, &g| z + (g - m).exp());
    -(g_pos - m - z.ln())
}

/// Adam hyperparameters. The step count is global: one tick per mini-batch,
/// shared by all rows, so bias correction matches the dense definition.
#[derive(Clone, Copy, Debug)]
pub struct AdamHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Sparse Adam: first/second moment tables mirroring the parameter tables,
/// updated lazily on exactly the rows a batch touched.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    hyper: AdamHyper,
    ids: Vec<TableId>,
    m: Vec<Table<T>>,
    v: Vec<Table<T>>,
    t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        Self::with_hyper(params, AdamHyper::default())
    }

    pub fn with_hyper(params: &ModelParams<T>, hyper: AdamHyper) -> Self {
        let ids: Vec<TableId> = params.kind().table_ids().to_vec();
        let m = ids
            .iter()
            .map(|&id| Table::zeros(params.table(id).rows(), params.table(id).dim()))
            .collect();
        let v = ids
            .iter()
            .map(|&id| Table::zeros(params.table(id).rows(), params.table(id).dim()))
            .collect();
        AdamState {
            hyper,
            ids,
            m,
            v,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    fn slot(&self, id: TableId) -> usize {
        self.ids
            .iter()
            .position(|&x| x == id)
            .expect("gradient for a table the model does not have")
    }

    /// One optimizer step over the batch gradient. Advances the shared step
    /// counter once; rows absent from the batch keep stale moments, which is
    /// the usual sparse-Adam compromise.
    pub fn step(
        &mut self,
        params: &mut ModelParams<T>,
        grads: &GradAccumulator<T>,
    ) -> Result<(), TrainError> {
        self.t += 1;
        let h = self.hyper;
        let bc1 = 1.0 - h.beta1.powi(self.t.min(i32::MAX as u64) as i32);
        let bc2 = 1.0 - h.beta2.powi(self.t.min(i32::MAX as u64) as i32);
        let alpha = T::from_f64(h.alpha);
        let beta1 = T::from_f64(h.beta1);
        let beta2 = T::from_f64(h.beta2);
        let one_m_beta1 = T::from_f64(1.0 - h.beta1);
        let one_m_beta2 = T::from_f64(1.0 - h.beta2);
        let inv_bc1 = T::from_f64(1.0 / bc1);
        let inv_bc2 = T::from_f64(1.0 / bc2);
        let eps = T::from_f64(h.epsilon);

        for (&(id, row), g) in grads.iter() {
            if !g.iter().all(|x| x.is_finite()) {
                return Err(TrainError::NonFiniteGradient { step: self.t });
            }
            let slot = self.slot(id);
            let m = self.m[slot].row_mut(row);
            let v = self.v[slot].row_mut(row);
            let p = params.table_mut(id).row_mut(row);
            for i in 0..g.len() {
                m[i] = beta1 * m[i] + one_m_beta1 * g[i];
                v[i] = beta2 * v[i] + one_m_beta2 * g[i] * g[i];
                let m_hat = m[i] * inv_bc1;
                let v_hat = v[i] * inv_bc2;
                p[i] = p[i] - alpha * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// One validation measurement during training.
#[derive(Clone, Copy, Debug)]
pub struct EvalPoint {
    pub epoch: usize,
    pub mrr: f64,
    pub hits10: f64,
    pub mean_loss: f64,
}

/// Validation curve plus which point had the best MRR (first on ties).
#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    points: Vec<EvalPoint>,
    best_idx: Option<usize>,
}

impl TrainReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a point; returns true when it strictly improves the best MRR.
    pub fn record(&mut self, p: EvalPoint) -> bool {
        self.points.push(p);
        let idx = self.points.len() - 1;
        let improved = match self.best_idx {
            None => true,
            Some(b) => p.mrr > self.points[b].mrr,
        };
        if improved {
            self.best_idx = Some(idx);
        }
        improved
    }

    pub fn points(&self) -> &[EvalPoint] {
        &self.points
    }

    pub fn best(&self) -> Option<&EvalPoint> {
        self.best_idx.map(|i| &self.points[i])
    }

    pub fn best_index(&self) -> Option<usize> {
        self.best_idx
    }
}

pub struct PretrainOutcome<T> {
    /// Parameters at the best validation MRR seen during training.
    pub best: ModelParams<T>,
    /// Parameters after the final epoch.
    pub final_params: ModelParams<T>,
    pub report: TrainReport,
}

/// Ceil division batch size so `batches_per_epoch` chunks cover the split.
pub(crate) fn batch_size(n: usize, batches_per_epoch: usize) -> usize {
    n.div_ceil(batches_per_epoch).max(1)
}

/// Trains one model from random init on the training split.
///
/// Translation models: margin loss, one corrupted negative per positive
/// (side chosen by per-relation statistics), unit-ball projection after
/// every update. Product models: softmax loss over `ns_pretrain` sampled
/// corruptions plus lazy L2 regularization of the touched rows.
///
/// The best-validation-MRR parameters are retained and returned alongside
/// the final ones. Non-finite losses abort with the partial report.
pub fn pretrain<T: Real, R: Rng + ?Sized>(
    kind: ModelKind,
    data: &Dataset,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<PretrainOutcome<T>, TrainError> {
    cfg.validate()?;
    if cfg.pretrain_epochs == 0 {
        return Err(TrainError::BadConfig("pretrain needs at least 1 epoch".into()));
    }
    let n_e = data.vocab.num_entities();
    let n_r = data.vocab.num_relations();
    let train = &data.triples.train;
    if train.is_empty() {
        return Err(TrainError::BadConfig("empty training split".into()));
    }
    let filter = FilterIndex::build(&data.triples);
    let bern = compute_bern_stats(train, n_r);

    let mut params: ModelParams<T> = ModelParams::init(kind, cfg.k, n_e, n_r, rng);
    let mut adam = AdamState::new(&params);
    let mut report = TrainReport::new();
    let mut best = params.clone();
    let bsz = batch_size(train.len(), cfg.batches_per_epoch);
    let gamma = T::from_f64(cfg.gamma);
    let mut order: Vec<u32> = (0..train.len() as u32).collect();

    for epoch in 1..=cfg.pretrain_epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0f64;
        for chunk in order.chunks(bsz) {
            let mut acc = GradAccumulator::new();
            for &i in chunk {
                let pos = train[i as usize];
                let loss = if kind.is_translation() {
                    translation_example(&params, pos, &bern, n_e, gamma, &mut acc, rng)?
                } else {
                    softmax_example(&params, pos, &bern, n_e, cfg, &mut acc, rng)?
                };
                epoch_loss += loss;
            }
            if !epoch_loss.is_finite() {
                return Err(TrainError::Diverged { epoch, report });
            }
            adam.step(&mut params, &acc)?;
            params.project_rows(acc.touched());
        }
        if epoch % cfg.eval_every_pretrain == 0 || epoch == cfg.pretrain_epochs {
            let ev = evaluate(&params, &data.triples.valid, &filter);
            let point = EvalPoint {
                epoch,
                mrr: ev.mrr,
                hits10: ev.hits10,
                mean_loss: epoch_loss / train.len() as f64,
            };
            if report.record(point) {
                best = params.clone();
            }
        }
    }
    Ok(PretrainOutcome {
        best,
        final_params: params,
        report,
    })
}

/// Margin-loss update for one positive: corrupt the statistically chosen
/// side with a uniform entity; descend only when the margin is violated.
fn translation_example<T: Real, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    pos: Triple,
    bern: &crate::kgdata::BernStats,
    n_e: usize,
    gamma: T,
    acc: &mut GradAccumulator<T>,
    rng: &mut R,
) -> Result<f64, TrainError> {
    let p_head = bern.p_replace_head(pos.r)?;
    let side = if rng.random_bool(p_head) {
        Side::Head
    } else {
        Side::Tail
    };
    let neg = pos.with_entity(side, rng.random_range(0..n_e as u32));
    let loss = marginal_loss(params.score(pos), params.score(neg), gamma);
    if loss > T::zero() {
        acc.add(&params.grad_score(pos), T::one());
        acc.add(&params.grad_score(neg), -T::one());
    }
    Ok(loss.into_f64())
}

/// Softmax-loss update for one positive: the positive competes against
/// `ns_pretrain` sampled corruptions; touched rows get lazy L2 decay.
fn softmax_example<T: Real, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    pos: Triple,
    bern: &crate::kgdata::BernStats,
    n_e: usize,
    cfg: &TrainConfig,
    acc: &mut GradAccumulator<T>,
    rng: &mut R,
) -> Result<f64, TrainError> {
    let cands = sample_candidates(pos, cfg.ns_pretrain, bern, n_e, rng)?;
    let (loss, example) = softmax_loss_grad(params, pos, &cands.candidates, cfg.lambda);
    acc.add(&example, T::one());
    Ok(loss.into_f64())
}

/// Loss and exact gradient of the softmax objective for one positive
/// against a fixed corruption set. The gradient includes the lazy L2
/// term on every row the example touches; the returned loss is the data
/// term alone (curves report it without the penalty).
pub fn softmax_loss_grad<T: Real>(
    params: &ModelParams<T>,
    pos: Triple,
    negatives: &[Triple],
    lambda: f64,
) -> (T, SparseGradient<T>) {
    let g_pos = params.goodness(pos);
    let g_negs: Vec<T> = negatives.iter().map(|&c| params.goodness(c)).collect();
    let loss = log_softmax_loss(g_pos, &g_negs);

    let mut logits = Vec::with_capacity(1 + g_negs.len());
    logits.push(g_pos.into_f64());
    logits.extend(g_negs.iter().map(|g| g.into_f64()));
    let probs = softmax_stable(&logits);

    // dL/dg_pos = p_pos - 1; dL/dg_neg_j = p_j
    let mut example = SparseGradient::new();
    example.add_scaled(&params.goodness_grad(pos), T::from_f64(probs[0] - 1.0));
    for (j, &c) in negatives.iter().enumerate() {
        example.add_scaled(&params.goodness_grad(c), T::from_f64(probs[j + 1]));
    }
    if lambda > 0.0 {
        let touched = example.touched_rows();
        example.add_scaled(&params.l2_reg_gradient(touched, lambda), T::one());
    }
    (loss, example)
}
