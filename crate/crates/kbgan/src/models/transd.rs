//! TransD: score(h, r, t) = || proj_r(h) + r - proj_r(t) ||  where
//! proj_r(e) = e + (e_p . e) r_p.
//!
//! That projection is the rank-one map (I + r_p e_p^T) e; keeping it in the
//! factored form makes every operation O(k) instead of O(k^2).

use super::{norm_grad, norm_value, ModelParams, Norm, SparseGradient, TableId};
use crate::kgdata::{Side, Triple};
use crate::real::Real;

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// e + (e_p . e) r_p
fn project<T: Real>(e: &[T], e_p: &[T], r_p: &[T]) -> Vec<T> {
    let c = dot(e_p, e);
    e.iter().zip(r_p).map(|(&x, &rp)| x + c * rp).collect()
}

fn diff<T: Real>(p: &ModelParams<T>, tr: Triple) -> Vec<T> {
    let r_p = p.relation_proj.as_ref().unwrap().row(tr.r);
    let ep = p.entity_proj.as_ref().unwrap();
    let h = project(p.entities.row(tr.h), ep.row(tr.h), r_p);
    let t = project(p.entities.row(tr.t), ep.row(tr.t), r_p);
    let r = p.relations.row(tr.r);
    h.iter()
        .zip(r)
        .zip(&t)
        .map(|((&h, &r), &t)| h + r - t)
        .collect()
}

pub(super) fn score<T: Real>(p: &ModelParams<T>, norm: Norm, tr: Triple) -> T {
    norm_value(norm, &diff(p, tr))
}

pub(super) fn grad<T: Real>(p: &ModelParams<T>, norm: Norm, tr: Triple) -> SparseGradient<T> {
    let u = norm_grad(norm, &diff(p, tr));
    let ep = p.entity_proj.as_ref().unwrap();
    let h = p.entities.row(tr.h);
    let t = p.entities.row(tr.t);
    let h_p = ep.row(tr.h);
    let t_p = ep.row(tr.t);
    let r_p = p.relation_proj.as_ref().unwrap().row(tr.r);

    let rp_dot_u = dot(r_p, &u);
    let mut g = SparseGradient::new();
    g.push(
        TableId::Entity,
        tr.h,
        u.iter().zip(h_p).map(|(&u, &hp)| u + rp_dot_u * hp).collect(),
    );
    g.push(
        TableId::EntityProj,
        tr.h,
        h.iter().map(|&x| rp_dot_u * x).collect(),
    );
    g.push(TableId::Relation, tr.r, u.clone());
    let c = dot(h_p, h) - dot(t_p, t);
    g.push(
        TableId::RelationProj,
        tr.r,
        u.iter().map(|&u| c * u).collect(),
    );
    g.push(
        TableId::Entity,
        tr.t,
        u.iter().zip(t_p).map(|(&u, &tp)| -(u + rp_dot_u * tp)).collect(),
    );
    g.push(
        TableId::EntityProj,
        tr.t,
        t.iter().map(|&x| -rp_dot_u * x).collect(),
    );
    g
}

pub(super) fn candidate_scores<T: Real>(
    p: &ModelParams<T>,
    norm: Norm,
    positive: Triple,
    side: Side,
) -> Vec<T> {
    let r_p = p.relation_proj.as_ref().unwrap().row(positive.r);
    let r = p.relations.row(positive.r);
    let ep = p.entity_proj.as_ref().unwrap();
    let fixed_id = positive.entity(match side {
        Side::Head => Side::Tail,
        Side::Tail => Side::Head,
    });
    let fixed = project(p.entities.row(fixed_id), ep.row(fixed_id), r_p);
    // fixed = proj(h) + r when ranking tails, r - proj(t) when ranking heads
    let fixed: Vec<T> = match side {
        Side::Tail => fixed.iter().zip(r).map(|(&f, &r)| f + r).collect(),
        Side::Head => fixed.iter().zip(r).map(|(&f, &r)| r - f).collect(),
    };
    let mut out = Vec::with_capacity(p.num_entities());
    for e in 0..p.num_entities() as u32 {
        let cand = project(p.entities.row(e), ep.row(e), r_p);
        let d: Vec<T> = match side {
            Side::Tail => fixed.iter().zip(&cand).map(|(&f, &c)| f - c).collect(),
            Side::Head => fixed.iter().zip(&cand).map(|(&f, &c)| c + f).collect(),
        };
        out.push(norm_value(norm, &d));
    }
    out
}
