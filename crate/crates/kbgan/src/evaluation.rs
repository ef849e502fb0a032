//! Filtered link-prediction evaluation: MRR and Hits@10.

use rayon::prelude::*;

use crate::kgdata::{FilterIndex, Side, Triple};
use crate::models::ModelParams;
use crate::real::Real;

/// Rank of one (triple, side) query.
#[derive(Clone, Copy, Debug)]
pub struct RankResult {
    pub triple: Triple,
    pub side: Side,
    /// 1-based; 1 + number of surviving candidates ranked strictly better.
    pub rank: usize,
    /// Surviving candidates whose goodness exactly ties the true entity.
    /// Ties resolve in the test entity's favor, so nonzero values flag
    /// optimistically inflated ranks (typical for degenerate models).
    pub ties: usize,
}

/// Aggregate metrics over all head and tail queries of a split.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub mrr: f64,
    pub hits10: f64,
    /// Number of (triple, side) queries, i.e. 2 x split size.
    pub num_queries: usize,
    /// Total tied competitors across queries; a tie-heavy report means the
    /// optimistic ranks overstate the model.
    pub tied_competitors: usize,
    pub ranks: Vec<RankResult>,
}

/// Rank from a goodness vector: filtered competitors removed, remaining
/// strictly-better ones counted. `known_true` lists entity ids whose triples
/// are known true for this query (sorted, possibly including `true_entity`).
pub fn rank_from_goodness<T: Real>(
    goodness: &[T],
    true_entity: u32,
    known_true: &[u32],
) -> (usize, usize) {
    let g_true = goodness[true_entity as usize];
    let mut better = 0usize;
    let mut ties = 0usize;
    for (e, &g) in goodness.iter().enumerate() {
        if e as u32 == true_entity {
            continue;
        }
        if g > g_true {
            better += 1;
        } else if g == g_true {
            ties += 1;
        }
    }
    // remove known-true competitors (the filtered protocol); the test entity
    // itself was never counted
    for &e in known_true {
        if e == true_entity {
            continue;
        }
        let g = goodness[e as usize];
        if g > g_true {
            better -= 1;
        } else if g == g_true {
            ties -= 1;
        }
    }
    (better + 1, ties)
}

/// Filtered rank of `triple`'s `side` entity against all entities.
pub fn rank_triple<T: Real>(
    params: &ModelParams<T>,
    triple: Triple,
    side: Side,
    filter: &FilterIndex,
) -> RankResult {
    let goodness = params.candidate_goodness(triple, side);
    let true_entity = triple.entity(side);
    let known = filter.known_entities(triple, side);
    let (rank, ties) = rank_from_goodness(&goodness, true_entity, known);
    RankResult {
        triple,
        side,
        rank,
        ties,
    }
}

/// Evaluates both corruption sides of every triple. Queries run in parallel
/// but results are collected in input order, so the report is deterministic.
pub fn evaluate<T: Real>(
    params: &ModelParams<T>,
    split: &[Triple],
    filter: &FilterIndex,
) -> EvalReport {
    let ranks: Vec<RankResult> = split
        .par_iter()
        .flat_map_iter(|&tr| {
            [
                rank_triple(params, tr, Side::Head, filter),
                rank_triple(params, tr, Side::Tail, filter),
            ]
        })
        .collect();
    summarize(ranks)
}

fn summarize(ranks: Vec<RankResult>) -> EvalReport {
    let n = ranks.len();
    let mrr = ranks.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / n.max(1) as f64;
    let hits10 = ranks.iter().filter(|r| r.rank <= 10).count() as f64 / n.max(1) as f64;
    let tied_competitors = ranks.iter().map(|r| r.ties).sum();
    EvalReport {
        mrr,
        hits10,
        num_queries: n,
        tied_competitors,
        ranks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgdata::TripleStore;
    use crate::models::{ModelKind, Norm, TableId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// 4 entities on a line, relation = +1 shift; distances are exact so
    /// ranks are fully predictable.
    fn line_world() -> (ModelParams<f64>, TripleStore) {
        let mut p = ModelParams::init(
            ModelKind::TransE(Norm::L1),
            1,
            4,
            1,
            &mut ChaCha12Rng::seed_from_u64(0),
        );
        p.table_mut(TableId::Entity)
            .data_mut()
            .copy_from_slice(&[0.0, 0.25, 0.5, 0.75]);
        p.table_mut(TableId::Relation).data_mut().copy_from_slice(&[0.25]);
        let store = TripleStore {
            train: vec![Triple::new(0, 0, 1), Triple::new(1, 0, 2)],
            valid: vec![],
            test: vec![Triple::new(2, 0, 3)],
        };
        (p, store)
    }

    #[test]
    fn perfect_prediction_ranks_first() {
        let (p, store) = line_world();
        let filter = FilterIndex::build(&store);
        let r = rank_triple(&p, Triple::new(2, 0, 3), Side::Tail, &filter);
        assert_eq!(r.rank, 1);
        assert_eq!(r.ties, 0);
    }

    #[test]
    fn filtering_removes_known_true_competitors() {
        // ranking heads for (?, r, e2): e1 is the true head of a train triple
        // and scores better than e2's other candidates; filtered rank of the
        // test head must not count it
        let (p, store) = line_world();
        let mut with_extra = store;
        // make (e0, r, e2) a test triple; e1 is a known-true head for (?, r, e2)
        with_extra.test = vec![Triple::new(0, 0, 2)];
        let filter = FilterIndex::build(&with_extra);
        let raw = {
            let goodness = p.candidate_goodness(Triple::new(0, 0, 2), Side::Head);
            rank_from_goodness(&goodness, 0, &[])
        };
        let filtered = rank_triple(&p, Triple::new(0, 0, 2), Side::Head, &filter);
        assert!(filtered.rank < raw.0);
        assert_eq!(filtered.rank, raw.0 - 1);
    }

    #[test]
    fn rank_is_invariant_under_monotone_transforms() {
        let g: Vec<f64> = vec![0.3, -1.0, 2.0, 0.3, 0.9];
        let squashed: Vec<f64> = g.iter().map(|x| (x / 3.0).tanh()).collect();
        for e in 0..g.len() as u32 {
            assert_eq!(
                rank_from_goodness(&g, e, &[]),
                rank_from_goodness(&squashed, e, &[])
            );
        }
    }

    #[test]
    fn constant_scores_rank_optimistically_with_tie_diagnostic() {
        let g = vec![1.0f64; 6];
        let (rank, ties) = rank_from_goodness(&g, 2, &[]);
        assert_eq!(rank, 1);
        assert_eq!(ties, 5);
    }

    #[test]
    fn mrr_and_hits_aggregate_over_both_sides() {
        let (p, store) = line_world();
        let filter = FilterIndex::build(&store);
        let report = evaluate(&p, &store.test, &filter);
        assert_eq!(report.num_queries, 2);
        assert!(report.mrr > 0.0 && report.mrr <= 1.0);
        assert_eq!(report.ranks.len(), 2);
        // rank <= |E| always
        assert!(report.ranks.iter().all(|r| r.rank >= 1 && r.rank <= 4));
    }
}
