//! Shared oracles for the integration suites: a finite-difference gradient
//! checker and a from-scratch filtered ranking implementation. Both stay
//! deliberately naive so they share no code paths with the library.

#![allow(dead_code)]

use std::collections::HashSet;

use kbgan::kgdata::{Side, Triple, TripleStore};
use kbgan::models::{GradAccumulator, ModelKind, ModelParams, Norm, SparseGradient, TableId};

/// Central difference of `loss` in one coordinate of one table row.
pub fn central_diff(
    params: &mut ModelParams<f64>,
    loss: &mut dyn FnMut(&ModelParams<f64>) -> f64,
    table: TableId,
    row: u32,
    j: usize,
    h: f64,
) -> f64 {
    let orig = params.table(table).row(row)[j];
    params.table_mut(table).row_mut(row)[j] = orig + h;
    let fp = loss(params);
    params.table_mut(table).row_mut(row)[j] = orig - h;
    let fm = loss(params);
    params.table_mut(table).row_mut(row)[j] = orig;
    (fp - fm) / (2.0 * h)
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// Compares an analytic sparse gradient against central differences on
/// every component it claims, and spot-checks that a few rows it does
/// not claim really have zero slope.
pub fn assert_grad_matches_fd(
    params: &mut ModelParams<f64>,
    analytic: &SparseGradient<f64>,
    loss: &mut dyn FnMut(&ModelParams<f64>) -> f64,
    label: &str,
) {
    let mut acc = GradAccumulator::new();
    acc.add(analytic, 1.0);
    let folded: Vec<((TableId, u32), Vec<f64>)> =
        acc.iter().map(|(k, v)| (*k, v.clone())).collect();
    assert!(!folded.is_empty(), "{label}: gradient touched nothing");
    for ((table, row), g) in &folded {
        for (j, &gj) in g.iter().enumerate() {
            let fd = central_diff(params, loss, *table, *row, j, FD_STEP);
            let denom = 1.0f64.max(fd.abs()).max(gj.abs());
            let rel = (fd - gj).abs() / denom;
            assert!(
                rel <= FD_TOL,
                "{label}: {table:?} row {row} comp {j}: analytic {gj} vs fd {fd} (rel {rel:.2e})"
            );
        }
    }
    // rows the gradient skipped must be flat
    let touched: HashSet<(TableId, u32)> = folded.iter().map(|(k, _)| *k).collect();
    let mut checked = 0;
    'outer: for table in [TableId::Entity, TableId::Relation] {
        let rows = params.table(table).rows();
        for row in 0..rows as u32 {
            if touched.contains(&(table, row)) {
                continue;
            }
            let fd = central_diff(params, loss, table, row, 0, FD_STEP);
            assert!(
                fd.abs() <= FD_TOL,
                "{label}: untouched {table:?} row {row} has slope {fd}"
            );
            checked += 1;
            if checked >= 3 {
                break 'outer;
            }
        }
    }
}

/// Naive score reimplementations. Dense loops over raw table data, no
/// sharing with the library's score dispatch.
pub fn naive_goodness(p: &ModelParams<f64>, tr: Triple) -> f64 {
    let k = p.k();
    let d = p.kind().row_dim(k);
    let e = |i: u32| -> Vec<f64> { p.table(TableId::Entity).row(i).to_vec() };
    let r = |i: u32| -> Vec<f64> { p.table(TableId::Relation).row(i).to_vec() };
    match p.kind() {
        ModelKind::TransE(norm) => {
            let (h, rv, t) = (e(tr.h), r(tr.r), e(tr.t));
            let diff: Vec<f64> = (0..d).map(|i| h[i] + rv[i] - t[i]).collect();
            -dist(&diff, norm)
        }
        ModelKind::TransD(norm) => {
            let (h, rv, t) = (e(tr.h), r(tr.r), e(tr.t));
            let hp = p.table(TableId::EntityProj).row(tr.h).to_vec();
            let tp = p.table(TableId::EntityProj).row(tr.t).to_vec();
            let rp = p.table(TableId::RelationProj).row(tr.r).to_vec();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let hproj: Vec<f64> = (0..d).map(|i| h[i] + dot(&hp, &h) * rp[i]).collect();
            let tproj: Vec<f64> = (0..d).map(|i| t[i] + dot(&tp, &t) * rp[i]).collect();
            let diff: Vec<f64> = (0..d).map(|i| hproj[i] + rv[i] - tproj[i]).collect();
            -dist(&diff, norm)
        }
        ModelKind::DistMult => {
            let (h, rv, t) = (e(tr.h), r(tr.r), e(tr.t));
            (0..d).map(|i| h[i] * rv[i] * t[i]).sum()
        }
        ModelKind::ComplEx => {
            let (h, rv, t) = (e(tr.h), r(tr.r), e(tr.t));
            let mut s = 0.0;
            for i in 0..k {
                let (hr, hi) = (h[i], h[k + i]);
                let (rr, ri) = (rv[i], rv[k + i]);
                let (tr_, ti) = (t[i], t[k + i]);
                s += hr * rr * tr_ + hi * rr * ti + hr * ri * ti - hi * ri * tr_;
            }
            s
        }
    }
}

fn dist(diff: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L1 => diff.iter().map(|x| x.abs()).sum(),
        Norm::L2 => diff.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

pub struct NaiveRank {
    pub triple: Triple,
    pub side: Side,
    pub rank: usize,
}

/// Filtered ranks by brute force: try every entity on the corrupted side,
/// drop candidates that appear anywhere in the three splits (except the
/// query entity itself), count how many score strictly better.
pub fn naive_filtered_ranks(
    params: &ModelParams<f64>,
    queries: &[Triple],
    all: &TripleStore,
    n_entities: usize,
) -> Vec<NaiveRank> {
    let known: HashSet<Triple> = all
        .train
        .iter()
        .chain(&all.valid)
        .chain(&all.test)
        .copied()
        .collect();
    let mut out = Vec::new();
    for &q in queries {
        for side in [Side::Head, Side::Tail] {
            let g_true = naive_goodness(params, q);
            let mut better = 0usize;
            for e in 0..n_entities as u32 {
                if e == q.entity(side) {
                    continue;
                }
                let cand = q.with_entity(side, e);
                if known.contains(&cand) {
                    continue;
                }
                if naive_goodness(params, cand) > g_true {
                    better += 1;
                }
            }
            out.push(NaiveRank {
                triple: q,
                side,
                rank: better + 1,
            });
        }
    }
    out
}

pub fn naive_mrr(ranks: &[NaiveRank]) -> f64 {
    ranks.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / ranks.len() as f64
}

pub fn naive_hits10(ranks: &[NaiveRank]) -> f64 {
    ranks.iter().filter(|r| r.rank <= 10).count() as f64 / ranks.len() as f64
}
