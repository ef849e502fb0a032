//! DistMult: score(h, r, t) = sum_i h_i r_i t_i.

use super::{ModelParams, SparseGradient, TableId};
use crate::kgdata::{Side, Triple};
use crate::real::Real;

pub(super) fn score<T: Real>(p: &ModelParams<T>, tr: Triple) -> T {
    let h = p.entities.row(tr.h);
    let r = p.relations.row(tr.r);
    let t = p.entities.row(tr.t);
    h.iter()
        .zip(r)
        .zip(t)
        .fold(T::zero(), |s, ((&h, &r), &t)| s + h * r * t)
}

pub(super) fn grad<T: Real>(p: &ModelParams<T>, tr: Triple) -> SparseGradient<T> {
    let h = p.entities.row(tr.h);
    let r = p.relations.row(tr.r);
    let t = p.entities.row(tr.t);
    let mut g = SparseGradient::new();
    g.push(
        TableId::Entity,
        tr.h,
        r.iter().zip(t).map(|(&r, &t)| r * t).collect(),
    );
    g.push(
        TableId::Relation,
        tr.r,
        h.iter().zip(t).map(|(&h, &t)| h * t).collect(),
    );
    g.push(
        TableId::Entity,
        tr.t,
        h.iter().zip(r).map(|(&h, &r)| h * r).collect(),
    );
    g
}

pub(super) fn candidate_scores<T: Real>(
    p: &ModelParams<T>,
    positive: Triple,
    side: Side,
) -> Vec<T> {
    let r = p.relations.row(positive.r);
    let fixed_id = positive.entity(match side {
        Side::Head => Side::Tail,
        Side::Tail => Side::Head,
    });
    // w_i = r_i * (fixed entity)_i; each candidate is then one dot product
    let w: Vec<T> = p
        .entities
        .row(fixed_id)
        .iter()
        .zip(r)
        .map(|(&e, &r)| e * r)
        .collect();
    (0..p.num_entities() as u32)
        .map(|e| {
            p.entities
                .row(e)
                .iter()
                .zip(&w)
                .fold(T::zero(), |s, (&x, &w)| s + x * w)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::ModelKind;
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn tiny() -> ModelParams<f64> {
        let mut p = ModelParams::init(
            ModelKind::DistMult,
            2,
            2,
            1,
            &mut ChaCha12Rng::seed_from_u64(0),
        );
        // h=[1,2], t=[3,4]; r=[5,6]
        p.table_mut(TableId::Entity).data_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        p.table_mut(TableId::Relation).data_mut().copy_from_slice(&[5.0, 6.0]);
        p
    }

    #[test]
    fn score_is_the_trilinear_dot() {
        // 1*5*3 + 2*6*4 = 63
        let p = tiny();
        assert_eq!(p.score(Triple::new(0, 0, 1)), 63.0);
    }

    #[test]
    fn score_is_symmetric_in_head_and_tail() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let p: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 6, 9, 3, &mut rng);
        for tr in [Triple::new(0, 0, 1), Triple::new(4, 2, 7)] {
            let flipped = Triple::new(tr.t, tr.r, tr.h);
            // equal up to multiply-order rounding, not bitwise
            assert_relative_eq!(p.score(tr), p.score(flipped), max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_components_are_elementwise_products() {
        let p = tiny();
        let by_row = p.grad_score(Triple::new(0, 0, 1)).fold();
        assert_eq!(by_row[&(TableId::Entity, 0)], vec![15.0, 24.0]); // r.t
        assert_eq!(by_row[&(TableId::Relation, 0)], vec![3.0, 8.0]); // h.t
        assert_eq!(by_row[&(TableId::Entity, 1)], vec![5.0, 12.0]); // h.r
    }

    #[test]
    fn candidate_scores_match_individual_scores() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let p: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 5, 8, 2, &mut rng);
        for side in [Side::Head, Side::Tail] {
            let pos = Triple::new(1, 1, 6);
            let fast = candidate_scores(&p, pos, side);
            for e in 0..8u32 {
                let slow = p.score(pos.with_entity(side, e));
                assert!((fast[e as usize] - slow).abs() < 1e-12);
            }
        }
    }
}
