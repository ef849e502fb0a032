//! Adversarial stage: a softmax generator proposes negatives, a translation
//! discriminator trains on them, and the generator is updated by one-step
//! policy gradient with the discriminator's negated distance as reward.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::evaluation::evaluate;
use crate::kgdata::{compute_bern_stats, sample_candidates, CandidateSet, Dataset, FilterIndex, Triple};
use crate::models::{GradAccumulator, ModelParams, SparseGradient};
use crate::real::{softmax_stable, Real};
use crate::training::{
    batch_size, marginal_loss, AdamState, EvalPoint, TrainConfig, TrainError, TrainReport,
};

/// Softmax policy of the generator over one candidate pool.
///
/// Probabilities are kept in f64 regardless of model precision so the
/// distribution invariants (strictly positive, sum within 1e-9 of 1) hold
/// even for widely spread scores.
#[derive(Clone, Debug)]
pub struct GeneratorDistribution {
    pub candidates: CandidateSet,
    pub probs: Vec<f64>,
}

/// Softmax over the generator's goodness of each candidate.
pub fn generator_distribution<T: Real>(
    generator: &ModelParams<T>,
    candidates: CandidateSet,
) -> GeneratorDistribution {
    let logits: Vec<f64> = candidates
        .candidates
        .iter()
        .map(|&c| generator.goodness(c).into_f64())
        .collect();
    GeneratorDistribution {
        candidates,
        probs: softmax_stable(&logits),
    }
}

/// Samples a candidate index by inverse CDF on one uniform draw.
pub fn sample_negative<R: Rng + ?Sized>(
    dist: &GeneratorDistribution,
    rng: &mut R,
) -> (usize, f64) {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, &p) in dist.probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return (i, p);
        }
    }
    // numerical leftover mass lands on the last candidate
    let last = dist.probs.len() - 1;
    (last, dist.probs[last])
}

/// Margin-loss gradient for the discriminator on one (positive, negative)
/// pair. Empty when the margin is satisfied.
pub fn discriminator_step<T: Real>(
    discriminator: &ModelParams<T>,
    positive: Triple,
    negative: Triple,
    gamma: f64,
) -> (f64, SparseGradient<T>) {
    let loss = marginal_loss(
        discriminator.score(positive),
        discriminator.score(negative),
        T::from_f64(gamma),
    );
    let mut g = SparseGradient::new();
    if loss > T::zero() {
        g.add_scaled(&discriminator.grad_score(positive), T::one());
        g.add_scaled(&discriminator.grad_score(negative), -T::one());
    }
    (loss.into_f64(), g)
}

/// Reward for a generated negative: the discriminator's negated distance.
/// Negatives the discriminator still scores close (small distance) are the
/// valuable ones, and they get the larger reward.
pub fn reward<T: Real>(discriminator: &ModelParams<T>, negative: Triple) -> f64 {
    -discriminator.score(negative).into_f64()
}

/// Ascent gradient of (reward - baseline) * log p(sampled):
/// grad log p_s = grad g_s - sum_j p_j grad g_j  over generator goodness g.
pub fn generator_step<T: Real>(
    generator: &ModelParams<T>,
    dist: &GeneratorDistribution,
    sampled: usize,
    reward: f64,
    baseline: f64,
) -> SparseGradient<T> {
    let w = reward - baseline;
    let mut g = SparseGradient::new();
    for (j, &cand) in dist.candidates.candidates.iter().enumerate() {
        let indicator = if j == sampled { 1.0 } else { 0.0 };
        let coef = w * (indicator - dist.probs[j]);
        if coef != 0.0 {
            g.add_scaled(&generator.goodness_grad(cand), T::from_f64(coef));
        }
    }
    g
}

/// Constant baseline for the next batch: mean reward of the current one.
pub fn update_baseline(reward_sum: f64, batch_len: usize) -> f64 {
    reward_sum / batch_len as f64
}

#[derive(Debug)]
pub struct AdversarialOutcome<T> {
    /// Discriminator at the best validation MRR.
    pub best: ModelParams<T>,
    /// Discriminator after the final epoch.
    pub final_discriminator: ModelParams<T>,
    /// Generator after the final epoch (useful for inspecting its proposals).
    pub generator: ModelParams<T>,
    pub report: TrainReport,
}

/// Runs the adversarial stage on pretrained models.
///
/// Per positive: sample `ns` uniform corruptions, let the generator's
/// softmax pick one, train the discriminator against it with the margin
/// loss, and push the generator toward picks the discriminator found hard.
/// Both models get fresh optimizers; the baseline starts at zero and is
/// refreshed after every batch. With `adv_epochs == 0` the inputs pass
/// through untouched.
pub fn adversarial_train<T: Real, R: Rng + ?Sized>(
    mut generator: ModelParams<T>,
    mut discriminator: ModelParams<T>,
    data: &Dataset,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<AdversarialOutcome<T>, TrainError> {
    cfg.validate()?;
    if !generator.kind().is_softmax() {
        return Err(TrainError::RoleMismatch {
            role: "generator",
            expected: "softmax (distmult or complex)",
            got: generator.kind().name(),
        });
    }
    if !discriminator.kind().is_translation() {
        return Err(TrainError::RoleMismatch {
            role: "discriminator",
            expected: "translation (transe or transd)",
            got: discriminator.kind().name(),
        });
    }
    let n_e = data.vocab.num_entities();
    let n_r = data.vocab.num_relations();
    for (name, params) in [("generator", &generator), ("discriminator", &discriminator)] {
        if params.num_entities() != n_e || params.num_relations() != n_r {
            return Err(TrainError::SizeMismatch {
                model: format!(
                    "{name}: {}x{}",
                    params.num_entities(),
                    params.num_relations()
                ),
                data: format!("{n_e}x{n_r}"),
            });
        }
    }
    let train = &data.triples.train;
    if train.is_empty() {
        return Err(TrainError::BadConfig("empty training split".into()));
    }
    let filter = FilterIndex::build(&data.triples);
    let bern = compute_bern_stats(train, n_r);

    let mut adam_g = AdamState::new(&generator);
    let mut adam_d = AdamState::new(&discriminator);
    let mut report = TrainReport::new();
    let mut best = discriminator.clone();
    let mut baseline = 0.0f64;
    let bsz = batch_size(train.len(), cfg.batches_per_epoch);
    let mut order: Vec<u32> = (0..train.len() as u32).collect();

    for epoch in 1..=cfg.adv_epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0f64;
        for chunk in order.chunks(bsz) {
            let mut acc_g = GradAccumulator::new();
            let mut acc_d = GradAccumulator::new();
            let mut reward_sum = 0.0f64;
            for &i in chunk {
                let pos = train[i as usize];
                let cands = sample_candidates(pos, cfg.ns, &bern, n_e, rng)?;
                let dist = generator_distribution(&generator, cands);
                let (s, _) = sample_negative(&dist, rng);
                let neg = dist.candidates.candidates[s];

                let (loss, d_grad) = discriminator_step(&discriminator, pos, neg, cfg.gamma);
                epoch_loss += loss;
                acc_d.add(&d_grad, T::one());

                let r = reward(&discriminator, neg);
                reward_sum += r;
                // Adam descends, so the ascent gradient goes in negated
                let ascent = generator_step(&generator, &dist, s, r, baseline);
                acc_g.add(&ascent, -T::one());
            }
            if !epoch_loss.is_finite() {
                return Err(TrainError::Diverged { epoch, report });
            }
            adam_d.step(&mut discriminator, &acc_d)?;
            discriminator.project_rows(acc_d.touched());
            adam_g.step(&mut generator, &acc_g)?;
            baseline = update_baseline(reward_sum, chunk.len());
        }
        if epoch % cfg.eval_every_adv == 0 || epoch == cfg.adv_epochs {
            let ev = evaluate(&discriminator, &data.triples.valid, &filter);
            let point = EvalPoint {
                epoch,
                mrr: ev.mrr,
                hits10: ev.hits10,
                mean_loss: epoch_loss / train.len() as f64,
            };
            if report.record(point) {
                best = discriminator.clone();
            }
        }
    }
    Ok(AdversarialOutcome {
        best,
        final_discriminator: discriminator,
        generator,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgdata::Side;
    use crate::models::{ModelKind, Norm, TableId};
    use crate::synth;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn pool(n: usize) -> CandidateSet {
        CandidateSet {
            positive: Triple::new(0, 0, 1),
            side: Side::Tail,
            candidates: (0..n as u32).map(|e| Triple::new(0, 0, e)).collect(),
        }
    }

    #[test]
    fn distribution_is_positive_and_normalized() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let g: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 6, 12, 2, &mut rng);
        let dist = generator_distribution(&g, pool(12));
        assert_eq!(dist.probs.len(), 12);
        assert!(dist.probs.iter().all(|&p| p > 0.0));
        let sum: f64 = dist.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_scores_give_uniform_distribution() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut g: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 3, 5, 1, &mut rng);
        for x in g.table_mut(TableId::Relation).data_mut() {
            *x = 0.0; // every triple scores 0
        }
        let dist = generator_distribution(&g, pool(5));
        for &p in &dist.probs {
            assert!((p - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_frequencies_match_probabilities() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let g: ModelParams<f64> = ModelParams::init(ModelKind::ComplEx, 4, 10, 2, &mut rng);
        let dist = generator_distribution(&g, pool(10));
        let n = 20_000usize;
        let mut counts = [0usize; 10];
        for _ in 0..n {
            let (i, p) = sample_negative(&dist, &mut rng);
            assert!((p - dist.probs[i]).abs() < 1e-15);
            counts[i] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = dist.probs[i];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let freq = c as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-4,
                "candidate {i}: freq {freq} vs p {p}"
            );
        }
    }

    #[test]
    fn reward_is_negated_discriminator_distance() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let d: ModelParams<f64> =
            ModelParams::init(ModelKind::TransE(Norm::L2), 4, 6, 2, &mut rng);
        let tr = Triple::new(0, 0, 3);
        assert_eq!(reward(&d, tr), -d.score(tr));
        // a closer (harder) negative earns a larger reward
        let scores: Vec<f64> = (0..6).map(|e| d.score(Triple::new(0, 0, e))).collect();
        let rewards: Vec<f64> = (0..6).map(|e| reward(&d, Triple::new(0, 0, e))).collect();
        for i in 0..6 {
            for j in 0..6 {
                if scores[i] < scores[j] {
                    assert!(rewards[i] > rewards[j]);
                }
            }
        }
    }

    #[test]
    fn zero_advantage_produces_no_generator_update() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let g: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 3, 8, 1, &mut rng);
        let dist = generator_distribution(&g, pool(8));
        let step = generator_step(&g, &dist, 2, 0.7, 0.7);
        assert!(step.is_empty() || step.entries().iter().all(|e| e.grad.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn policy_gradient_increases_sampled_candidate_probability() {
        // apply the ascent direction with a tiny step and check p_s rises
        // (positive advantage) or falls (negative advantage)
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let g: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 4, 8, 1, &mut rng);
        for advantage in [1.0, -1.0] {
            let dist = generator_distribution(&g, pool(8));
            let s = 3usize;
            let step = generator_step(&g, &dist, s, advantage, 0.0);
            let mut moved = g.clone();
            let lr = 1e-4;
            for e in step.entries() {
                let row = moved.table_mut(e.table).row_mut(e.row);
                for (x, &dg) in row.iter_mut().zip(&e.grad) {
                    *x += lr * dg;
                }
            }
            let new_dist = generator_distribution(&moved, dist.candidates.clone());
            if advantage > 0.0 {
                assert!(new_dist.probs[s] > dist.probs[s]);
            } else {
                assert!(new_dist.probs[s] < dist.probs[s]);
            }
        }
    }

    #[test]
    fn baseline_is_mean_batch_reward() {
        assert_eq!(update_baseline(6.0, 4), 1.5);
        assert_eq!(update_baseline(-3.0, 3), -1.0);
    }

    #[test]
    fn role_validation_rejects_swapped_models() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let data = synth::planted(&synth::SynthConfig::tiny(1));
        let n_e = data.vocab.num_entities();
        let n_r = data.vocab.num_relations();
        let te: ModelParams<f64> =
            ModelParams::init(ModelKind::TransE(Norm::L1), 4, n_e, n_r, &mut rng);
        let dm: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 4, n_e, n_r, &mut rng);
        let cfg = TrainConfig {
            adv_epochs: 1,
            batches_per_epoch: 4,
            ..TrainConfig::default()
        };
        // translation model offered as generator
        let err = adversarial_train(te.clone(), te.clone(), &data, &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, TrainError::RoleMismatch { role: "generator", .. }));
        // softmax model offered as discriminator
        let err = adversarial_train(dm.clone(), dm.clone(), &data, &cfg, &mut rng).unwrap_err();
        assert!(matches!(
            err,
            TrainError::RoleMismatch { role: "discriminator", .. }
        ));
    }

    #[test]
    fn size_validation_rejects_foreign_models() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let data = synth::planted(&synth::SynthConfig::tiny(1));
        let n_r = data.vocab.num_relations();
        let dm: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 4, 7, n_r, &mut rng);
        let te: ModelParams<f64> = ModelParams::init(
            ModelKind::TransE(Norm::L1),
            4,
            data.vocab.num_entities(),
            n_r,
            &mut rng,
        );
        let cfg = TrainConfig {
            adv_epochs: 1,
            batches_per_epoch: 4,
            ..TrainConfig::default()
        };
        let err = adversarial_train(dm, te, &data, &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, TrainError::SizeMismatch { .. }));
    }

    #[test]
    fn zero_epochs_returns_inputs_untouched() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let data = synth::planted(&synth::SynthConfig::tiny(2));
        let n_e = data.vocab.num_entities();
        let n_r = data.vocab.num_relations();
        let dm: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 4, n_e, n_r, &mut rng);
        let te: ModelParams<f64> =
            ModelParams::init(ModelKind::TransE(Norm::L1), 4, n_e, n_r, &mut rng);
        let before = te.clone();
        let cfg = TrainConfig {
            adv_epochs: 0,
            batches_per_epoch: 4,
            ..TrainConfig::default()
        };
        let out = adversarial_train(dm, te, &data, &cfg, &mut rng).unwrap();
        assert!(out.report.points().is_empty());
        assert_eq!(
            out.final_discriminator.table(TableId::Entity).data(),
            before.table(TableId::Entity).data()
        );
    }
}
