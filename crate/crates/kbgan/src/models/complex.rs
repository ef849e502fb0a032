//! ComplEx: score(h, r, t) = Re(sum_i h_i r_i conj(t_i)) over complex-valued
//! embeddings. A row of width 2k stores the k real parts then the k
//! imaginary parts. Expanding the real part gives four real dot products:
//!
//!   score = <re_h, re_r, re_t> - <im_h, im_r, re_t>
//!         + <re_h, im_r, im_t> + <im_h, re_r, im_t>
//!
//! The conjugation on t makes the score asymmetric in (h, t), which is the
//! point of the model.

use super::{ModelParams, SparseGradient, TableId};
use crate::kgdata::{Side, Triple};
use crate::real::Real;

fn halves<T>(row: &[T]) -> (&[T], &[T]) {
    row.split_at(row.len() / 2)
}

pub(super) fn score<T: Real>(p: &ModelParams<T>, tr: Triple) -> T {
    let (re_h, im_h) = halves(p.entities.row(tr.h));
    let (re_r, im_r) = halves(p.relations.row(tr.r));
    let (re_t, im_t) = halves(p.entities.row(tr.t));
    let mut s = T::zero();
    for i in 0..re_h.len() {
        s = s + re_h[i] * re_r[i] * re_t[i] - im_h[i] * im_r[i] * re_t[i]
            + re_h[i] * im_r[i] * im_t[i]
            + im_h[i] * re_r[i] * im_t[i];
    }
    s
}

pub(super) fn grad<T: Real>(p: &ModelParams<T>, tr: Triple) -> SparseGradient<T> {
    let (re_h, im_h) = halves(p.entities.row(tr.h));
    let (re_r, im_r) = halves(p.relations.row(tr.r));
    let (re_t, im_t) = halves(p.entities.row(tr.t));
    let k = re_h.len();

    let mut gh = vec![T::zero(); 2 * k];
    let mut gr = vec![T::zero(); 2 * k];
    let mut gt = vec![T::zero(); 2 * k];
    for i in 0..k {
        gh[i] = re_r[i] * re_t[i] + im_r[i] * im_t[i];
        gh[k + i] = re_r[i] * im_t[i] - im_r[i] * re_t[i];
        gr[i] = re_h[i] * re_t[i] + im_h[i] * im_t[i];
        gr[k + i] = re_h[i] * im_t[i] - im_h[i] * re_t[i];
        gt[i] = re_h[i] * re_r[i] - im_h[i] * im_r[i];
        gt[k + i] = re_h[i] * im_r[i] + im_h[i] * re_r[i];
    }
    let mut g = SparseGradient::new();
    g.push(TableId::Entity, tr.h, gh);
    g.push(TableId::Relation, tr.r, gr);
    g.push(TableId::Entity, tr.t, gt);
    g
}

pub(super) fn candidate_scores<T: Real>(
    p: &ModelParams<T>,
    positive: Triple,
    side: Side,
) -> Vec<T> {
    let (re_r, im_r) = halves(p.relations.row(positive.r));
    let fixed_id = positive.entity(match side {
        Side::Head => Side::Tail,
        Side::Tail => Side::Head,
    });
    let (re_f, im_f) = halves(p.entities.row(fixed_id));
    let k = re_r.len();
    // score is linear in the varying entity; w is its coefficient vector,
    // which is exactly the score gradient w.r.t. that entity's row
    let mut w = vec![T::zero(); 2 * k];
    match side {
        Side::Tail => {
            for i in 0..k {
                w[i] = re_f[i] * re_r[i] - im_f[i] * im_r[i];
                w[k + i] = re_f[i] * im_r[i] + im_f[i] * re_r[i];
            }
        }
        Side::Head => {
            for i in 0..k {
                w[i] = re_r[i] * re_f[i] + im_r[i] * im_f[i];
                w[k + i] = re_r[i] * im_f[i] - im_r[i] * re_f[i];
            }
        }
    }
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
