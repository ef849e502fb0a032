//! TransE: score(h, r, t) = || h + r - t ||.

use super::{norm_grad, norm_value, ModelParams, Norm, SparseGradient, TableId};
use crate::kgdata::{Side, Triple};
use crate::real::Real;

fn diff<T: Real>(p: &ModelParams<T>, tr: Triple) -> Vec<T> {
    let h = p.entities.row(tr.h);
    let r = p.relations.row(tr.r);
    let t = p.entities.row(tr.t);
    h.iter()
        .zip(r)
        .zip(t)
        .map(|((&h, &r), &t)| h + r - t)
        .collect()
}

pub(super) fn score<T: Real>(p: &ModelParams<T>, norm: Norm, tr: Triple) -> T {
    norm_value(norm, &diff(p, tr))
}

pub(super) fn grad<T: Real>(p: &ModelParams<T>, norm: Norm, tr: Triple) -> SparseGradient<T> {
    let u = norm_grad(norm, &diff(p, tr));
    let mut g = SparseGradient::new();
    g.push(TableId::Entity, tr.h, u.clone());
    g.push(TableId::Relation, tr.r, u.clone());
    g.push(TableId::Entity, tr.t, u.iter().map(|&x| -x).collect());
    g
}

pub(super) fn candidate_scores<T: Real>(
    p: &ModelParams<T>,
    norm: Norm,
    positive: Triple,
    side: Side,
) -> Vec<T> {
    let r = p.relations.row(positive.r);
    // fixed = h + r when ranking tails, r - t when ranking heads
    let fixed: Vec<T> = match side {
        Side::Tail => p
            .entities
            .row(positive.h)
            .iter()
            .zip(r)
            .map(|(&h, &r)| h + r)
            .collect(),
        Side::Head => p
            .entities
            .row(positive.t)
            .iter()
            .zip(r)
            .map(|(&t, &r)| r - t)
            .collect(),
    };
    let mut out = Vec::with_capacity(p.num_entities());
    let mut d = vec![T::zero(); fixed.len()];
    for e in 0..p.num_entities() as u32 {
        let row = p.entities.row(e);
        match side {
            Side::Tail => {
                for ((d, &f), &x) in d.iter_mut().zip(&fixed).zip(row) {
                    *d = f - x;
                }
            }
            Side::Head => {
                for ((d, &f), &x) in d.iter_mut().zip(&fixed).zip(row) {
                    *d = x + f;
                }
            }
        }
        out.push(norm_value(norm, &d));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::ModelKind;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn tiny(norm: Norm) -> ModelParams<f64> {
        // entities: e0=[1,0], e1=[0,1]; relation r0=[1,1]
        let mut p = ModelParams::init(
            ModelKind::TransE(norm),
            2,
            2,
            1,
            &mut ChaCha12Rng::seed_from_u64(0),
        );
        p.table_mut(TableId::Entity).data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        p.table_mut(TableId::Relation).data_mut().copy_from_slice(&[1.0, 1.0]);
        p
    }

    #[test]
    fn l1_score_matches_hand_value() {
        // d = e0 + r - e1 = [2, 0], so L1 = 2, L2 = 2
        let p = tiny(Norm::L1);
        assert_eq!(p.score(Triple::new(0, 0, 1)), 2.0);
        let p = tiny(Norm::L2);
        assert_eq!(p.score(Triple::new(0, 0, 1)), 2.0);
    }

    #[test]
    fn perfect_translation_scores_zero() {
        let mut p = tiny(Norm::L2);
        p.table_mut(TableId::Relation)
            .data_mut()
            .copy_from_slice(&[-1.0, 1.0]);
        assert_eq!(p.score(Triple::new(0, 0, 1)), 0.0);
    }

    #[test]
    fn l1_gradient_uses_sign_with_zero_at_kink() {
        let p = tiny(Norm::L1);
        // d = [2, 0]: sign = [1, 0]
        let g = p.grad_score(Triple::new(0, 0, 1));
        let by_row = g.fold();
        assert_eq!(by_row[&(TableId::Entity, 0)], vec![1.0, 0.0]);
        assert_eq!(by_row[&(TableId::Relation, 0)], vec![1.0, 0.0]);
        assert_eq!(by_row[&(TableId::Entity, 1)], vec![-1.0, 0.0]);
    }

    #[test]
    fn self_loop_gradient_merges_head_and_tail_contributions() {
        let p = tiny(Norm::L2);
        // (e0, r, e0): d = r = [1,1]; dh and -dt cancel after merging
        let g = p.grad_score(Triple::new(0, 0, 0));
        let by_row = g.fold();
        let h = &by_row[&(TableId::Entity, 0)];
        assert!(h.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn candidate_scores_match_individual_scores() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for norm in [Norm::L1, Norm::L2] {
            let p: ModelParams<f64> =
                ModelParams::init(ModelKind::TransE(norm), 6, 9, 2, &mut rng);
            for side in [Side::Head, Side::Tail] {
                let pos = Triple::new(3, 1, 7);
                let fast = candidate_scores(&p, norm, pos, side);
                for e in 0..9u32 {
                    let slow = p.score(pos.with_entity(side, e));
                    assert!((fast[e as usize] - slow).abs() < 1e-12);
                }
            }
        }
    }
}
