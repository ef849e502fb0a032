//! Score functions and analytic gradients for the four embedding models.
//!
//! Translation models (TransE, TransD) score a triple by the distance
//! between a translated head and the tail: smaller is better. Product
//! models (DistMult, ComplEx) score by a bilinear form: larger is better.
//! [`ModelParams::goodness`] folds both into one "larger is more plausible"
//! orientation so ranking and softmax code never branch on the family.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::kgdata::{Side, Triple};
use crate::real::Real;

mod complex;
mod distmult;
mod transd;
mod transe;

/// Distance norm for the translation models.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Norm {
    L1,
    L2,
}

/// Model family; translation variants carry their distance norm so the
/// combination is valid by construction.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ModelKind {
    TransE(Norm),
    TransD(Norm),
    DistMult,
    ComplEx,
}

impl ModelKind {
    /// Distance-based, trained with the margin loss, usable as discriminator.
    pub fn is_translation(self) -> bool {
        matches!(self, ModelKind::TransE(_) | ModelKind::TransD(_))
    }

    /// Product-based, trained with the softmax loss, usable as generator.
    pub fn is_softmax(self) -> bool {
        !self.is_translation()
    }

    pub fn norm(self) -> Option<Norm> {
        match self {
            ModelKind::TransE(n) | ModelKind::TransD(n) => Some(n),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransE(_) => "transe",
            ModelKind::TransD(_) => "transd",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
        }
    }

    /// Width of one embedding row for dimension parameter `k`. ComplEx rows
    /// hold real and imaginary halves side by side, so they are `2k` wide.
    pub fn row_dim(self, k: usize) -> usize {
        match self {
            ModelKind::ComplEx => 2 * k,
            _ => k,
        }
    }

    pub fn table_ids(self) -> &'static [TableId] {
        match self {
            ModelKind::TransD(_) => &[
                TableId::Entity,
                TableId::Relation,
                TableId::EntityProj,
                TableId::RelationProj,
            ],
            _ => &[TableId::Entity, TableId::Relation],
        }
    }
}

/// Names one parameter table within a model.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum TableId {
    Entity,
    Relation,
    EntityProj,
    RelationProj,
}

impl TableId {
    pub fn code(self) -> u8 {
        match self {
            TableId::Entity => 0,
            TableId::Relation => 1,
            TableId::EntityProj => 2,
            TableId::RelationProj => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TableId::Entity),
            1 => Some(TableId::Relation),
            2 => Some(TableId::EntityProj),
            3 => Some(TableId::RelationProj),
            _ => None,
        }
    }
}

/// Dense row-major parameter table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table<T> {
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Table<T> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Table {
            rows,
            dim,
            data: vec![T::zero(); rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * dim);
        Table { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: u32) -> &[T] {
        let i = i as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: u32) -> &mut [T] {
        let i = i as usize;
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

/// Gradient restricted to the rows one example touches. Rows may repeat
/// (e.g. a self-loop triple contributes to the same entity row twice);
/// consumers merge by (table, row).
#[derive(Clone, Debug)]
pub struct SparseGradient<T> {
    entries: Vec<GradEntry<T>>,
}

#[derive(Clone, Debug)]
pub struct GradEntry<T> {
    pub table: TableId,
    pub row: u32,
    pub grad: Vec<T>,
}

impl<T: Real> Default for SparseGradient<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> SparseGradient<T> {
    pub fn new() -> Self {
        SparseGradient {
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, table: TableId, row: u32, grad: Vec<T>) {
        self.entries.push(GradEntry { table, row, grad });
    }

    pub fn entries(&self) -> &[GradEntry<T>] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scale(&mut self, c: T) {
        for e in &mut self.entries {
            for g in &mut e.grad {
                *g = *g * c;
            }
        }
    }

    /// Appends `other`'s entries scaled by `c`.
    pub fn add_scaled(&mut self, other: &SparseGradient<T>, c: T) {
        for e in &other.entries {
            let grad = e.grad.iter().map(|&g| g * c).collect();
            self.entries.push(GradEntry {
                table: e.table,
                row: e.row,
                grad,
            });
        }
    }

    pub fn touched_rows(&self) -> BTreeSet<(TableId, u32)> {
        self.entries.iter().map(|e| (e.table, e.row)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.grad.iter().all(|g| g.is_finite()))
    }

    /// Merges entries into per-row sums, ordered by (table, row).
    pub fn fold(&self) -> BTreeMap<(TableId, u32), Vec<T>> {
        let mut acc = GradAccumulator::new();
        acc.add(self, T::one());
        acc.rows
    }
}

/// Row-merged batch gradient. Backed by an ordered map so iteration (and
/// therefore every optimizer update) has a fixed, reproducible order.
#[derive(Debug)]
pub struct GradAccumulator<T> {
    rows: BTreeMap<(TableId, u32), Vec<T>>,
}

impl<T: Real> Default for GradAccumulator<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> GradAccumulator<T> {
    pub fn new() -> Self {
        GradAccumulator {
            rows: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, g: &SparseGradient<T>, scale: T) {
        for e in g.entries() {
            let row = self
                .rows
                .entry((e.table, e.row))
                .or_insert_with(|| vec![T::zero(); e.grad.len()]);
            debug_assert_eq!(row.len(), e.grad.len());
            for (acc, &g) in row.iter_mut().zip(&e.grad) {
                *acc = *acc + g * scale;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(TableId, u32), &Vec<T>)> {
        self.rows.iter()
    }

    pub fn touched(&self) -> impl Iterator<Item = (TableId, u32)> + '_ {
        self.rows.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// All parameter tables of one model instance.
#[derive(Clone, Debug)]
pub struct ModelParams<T> {
    kind: ModelKind,
    k: usize,
    entities: Table<T>,
    relations: Table<T>,
    entity_proj: Option<Table<T>>,
    relation_proj: Option<Table<T>>,
}

impl<T: Real> ModelParams<T> {
    /// Uniform init in [-6/sqrt(d), 6/sqrt(d)) per table, d the row width of
    /// that table; translation models are then projected onto the unit ball.
    /// Draws are made in f64 so the stream consumed from `rng` is identical
    /// for both precisions.
    pub fn init<R: Rng + ?Sized>(
        kind: ModelKind,
        k: usize,
        num_entities: usize,
        num_relations: usize,
        rng: &mut R,
    ) -> Self {
        assert!(k >= 1, "embedding dimension must be positive");
        let d = kind.row_dim(k);
        let fill = |rows: usize, dim: usize, rng: &mut R| {
            let bound = 6.0 / (dim as f64).sqrt();
            let data = (0..rows * dim)
                .map(|_| T::from_f64(rng.random_range(-bound..bound)))
                .collect();
            Table::from_vec(rows, dim, data)
        };
        let entities = fill(num_entities, d, rng);
        let relations = fill(num_relations, d, rng);
        let (entity_proj, relation_proj) = if matches!(kind, ModelKind::TransD(_)) {
            (
                Some(fill(num_entities, d, rng)),
                Some(fill(num_relations, d, rng)),
            )
        } else {
            (None, None)
        };
        let mut params = ModelParams {
            kind,
            k,
            entities,
            relations,
            entity_proj,
            relation_proj,
        };
        if kind.is_translation() {
            params.project_constraints();
        }
        params
    }

    pub fn from_tables(kind: ModelKind, k: usize, mut tables: Vec<(TableId, Table<T>)>) -> Self {
        let mut take = |id: TableId| {
            let pos = tables
                .iter()
                .position(|(t, _)| *t == id)
                .unwrap_or_else(|| panic!("missing table {id:?}"));
            tables.swap_remove(pos).1
        };
        let entities = take(TableId::Entity);
        let relations = take(TableId::Relation);
        let (entity_proj, relation_proj) = if matches!(kind, ModelKind::TransD(_)) {
            (Some(take(TableId::EntityProj)), Some(take(TableId::RelationProj)))
        } else {
            (None, None)
        };
        assert!(tables.is_empty(), "unexpected extra tables");
        ModelParams {
            kind,
            k,
            entities,
            relations,
            entity_proj,
            relation_proj,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_entities(&self) -> usize {
        self.entities.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.rows()
    }

    pub fn table(&self, id: TableId) -> &Table<T> {
        match id {
            TableId::Entity => &self.entities,
            TableId::Relation => &self.relations,
            TableId::EntityProj => self.entity_proj.as_ref().expect("no entity projections"),
            TableId::RelationProj => {
                self.relation_proj.as_ref().expect("no relation projections")
            }
        }
    }

    pub fn table_mut(&mut self, id: TableId) -> &mut Table<T> {
        match id {
            TableId::Entity => &mut self.entities,
            TableId::Relation => &mut self.relations,
            TableId::EntityProj => self.entity_proj.as_mut().expect("no entity projections"),
            TableId::RelationProj => {
                self.relation_proj.as_mut().expect("no relation projections")
            }
        }
    }

    /// Raw model score: a distance for translation models, a bilinear form
    /// for product models.
    pub fn score(&self, tr: Triple) -> T {
        match self.kind {
            ModelKind::TransE(norm) => transe::score(self, norm, tr),
            ModelKind::TransD(norm) => transd::score(self, norm, tr),
            ModelKind::DistMult => distmult::score(self, tr),
            ModelKind::ComplEx => complex::score(self, tr),
        }
    }

    /// Gradient of [`score`](Self::score) with respect to every touched row.
    pub fn grad_score(&self, tr: Triple) -> SparseGradient<T> {
        match self.kind {
            ModelKind::TransE(norm) => transe::grad(self, norm, tr),
            ModelKind::TransD(norm) => transd::grad(self, norm, tr),
            ModelKind::DistMult => distmult::grad(self, tr),
            ModelKind::ComplEx => complex::grad(self, tr),
        }
    }

    /// Plausibility: negated distance for translation models, raw score for
    /// product models. Strictly monotone in "the model believes this triple".
    pub fn goodness(&self, tr: Triple) -> T {
        let s = self.score(tr);
        if self.kind.is_translation() {
            -s
        } else {
            s
        }
    }

    /// Gradient of [`goodness`](Self::goodness).
    pub fn goodness_grad(&self, tr: Triple) -> SparseGradient<T> {
        let mut g = self.grad_score(tr);
        if self.kind.is_translation() {
            g.scale(-self.one());
        }
        g
    }

    fn one(&self) -> T {
        T::one()
    }

    /// Goodness of `positive` with the `side` entity replaced by each entity
    /// id in turn. Equals mapping [`goodness`](Self::goodness) over all
    /// corruptions but hoists the fixed-side work out of the loop.
    pub fn candidate_goodness(&self, positive: Triple, side: Side) -> Vec<T> {
        let mut scores = match self.kind {
            ModelKind::TransE(norm) => transe::candidate_scores(self, norm, positive, side),
            ModelKind::TransD(norm) => transd::candidate_scores(self, norm, positive, side),
            ModelKind::DistMult => distmult::candidate_scores(self, positive, side),
            ModelKind::ComplEx => complex::candidate_scores(self, positive, side),
        };
        if self.kind.is_translation() {
            for s in &mut scores {
                *s = -*s;
            }
        }
        scores
    }

    /// Rescales every constrained row onto the L2 unit ball. Product models
    /// are unconstrained (they regularize instead), so this is a no-op there.
    pub fn project_constraints(&mut self) {
        if !self.kind.is_translation() {
            return;
        }
        for &id in self.kind.table_ids() {
            let table = self.table_mut(id);
            for i in 0..table.rows() {
                project_row(table.row_mut(i as u32));
            }
        }
    }

    /// Projects only the given rows; used after sparse updates where
    /// untouched rows already satisfy the constraint.
    pub fn project_rows(&mut self, rows: impl IntoIterator<Item = (TableId, u32)>) {
        if !self.kind.is_translation() {
            return;
        }
        for (id, row) in rows {
            project_row(self.table_mut(id).row_mut(row));
        }
    }

    /// Gradient of lambda * sum of squared norms over exactly the given rows
    /// (the lazy regularization used with sparse batches).
    pub fn l2_reg_gradient(
        &self,
        touched: impl IntoIterator<Item = (TableId, u32)>,
        lambda: f64,
    ) -> SparseGradient<T> {
        let two_lambda = T::from_f64(2.0 * lambda);
        let mut g = SparseGradient::new();
        for (id, row) in touched {
            let grad = self
                .table(id)
                .row(row)
                .iter()
                .map(|&x| x * two_lambda)
                .collect();
            g.push(id, row, grad);
        }
        g
    }

    pub fn all_finite(&self) -> bool {
        self.kind
            .table_ids()
            .iter()
            .all(|&id| self.table(id).data().iter().all(|x| x.is_finite()))
    }

    /// Largest row L2 norm across constrained tables; tests use it to check
    /// the unit-ball invariant. Zero for unconstrained models.
    pub fn max_constrained_norm(&self) -> f64 {
        if !self.kind.is_translation() {
            return 0.0;
        }
        let mut max = 0.0f64;
        for &id in self.kind.table_ids() {
            let table = self.table(id);
            for i in 0..table.rows() {
                max = max.max(l2_norm(table.row(i as u32)).into_f64());
            }
        }
        max
    }
}

fn project_row<T: Real>(row: &mut [T]) {
    let n = l2_norm(row);
    if n > T::one() {
        for x in row.iter_mut() {
            *x = *x / n;
        }
    }
}

pub(crate) fn l2_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt()
}

/// Value of the 1- or 2-norm of `d`.
pub(crate) fn norm_value<T: Real>(norm: Norm, d: &[T]) -> T {
    match norm {
        Norm::L1 => d.iter().fold(T::zero(), |s, &x| s + x.abs()),
        Norm::L2 => l2_norm(d),
    }
}

/// Gradient of [`norm_value`] with respect to `d`. Subgradient 0 is used at
/// the kinks (sign(0) = 0, and the zero vector for L2 at the origin).
pub(crate) fn norm_grad<T: Real>(norm: Norm, d: &[T]) -> Vec<T> {
    match norm {
        Norm::L1 => d
            .iter()
            .map(|&x| {
                if x > T::zero() {
                    T::one()
                } else if x < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            })
            .collect(),
        Norm::L2 => {
            let n = l2_norm(d);
            if n == T::zero() {
                vec![T::zero(); d.len()]
            } else {
                d.iter().map(|&x| x / n).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn init_respects_row_widths_and_constraints() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let te: ModelParams<f64> = ModelParams::init(ModelKind::TransE(Norm::L1), 8, 10, 3, &mut rng);
        assert_eq!(te.table(TableId::Entity).dim(), 8);
        assert!(te.max_constrained_norm() <= 1.0 + 1e-12);

        let cx: ModelParams<f64> = ModelParams::init(ModelKind::ComplEx, 8, 10, 3, &mut rng);
        assert_eq!(cx.table(TableId::Entity).dim(), 16);

        let td: ModelParams<f64> = ModelParams::init(ModelKind::TransD(Norm::L2), 4, 10, 3, &mut rng);
        assert_eq!(td.kind().table_ids().len(), 4);
        assert!(td.max_constrained_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn init_draws_identical_values_for_both_precisions() {
        let mut r1 = ChaCha12Rng::seed_from_u64(9);
        let mut r2 = ChaCha12Rng::seed_from_u64(9);
        let a: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 4, 6, 2, &mut r1);
        let b: ModelParams<f32> = ModelParams::init(ModelKind::DistMult, 4, 6, 2, &mut r2);
        for (x, y) in a
            .table(TableId::Entity)
            .data()
            .iter()
            .zip(b.table(TableId::Entity).data())
        {
            assert_eq!(*x as f32, *y);
        }
    }

    #[test]
    fn accumulator_merges_duplicate_rows_in_order() {
        let mut g = SparseGradient::<f64>::new();
        g.push(TableId::Entity, 3, vec![1.0, 2.0]);
        g.push(TableId::Entity, 3, vec![0.5, -1.0]);
        g.push(TableId::Relation, 0, vec![1.0, 1.0]);
        let mut acc = GradAccumulator::new();
        acc.add(&g, 2.0);
        assert_eq!(acc.len(), 2);
        let rows: Vec<_> = acc.iter().collect();
        assert_eq!(*rows[0].0, (TableId::Entity, 3));
        assert_eq!(rows[0].1, &vec![3.0, 2.0]);
        assert_eq!(*rows[1].0, (TableId::Relation, 0));
    }

    #[test]
    fn projection_leaves_interior_rows_alone() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut p: ModelParams<f64> =
            ModelParams::init(ModelKind::TransE(Norm::L2), 4, 5, 2, &mut rng);
        let before = p.table(TableId::Entity).row(0).to_vec();
        let norm_before = l2_norm(&before);
        p.project_constraints();
        if norm_before <= 1.0 {
            assert_eq!(p.table(TableId::Entity).row(0), before.as_slice());
        }
        assert!(p.max_constrained_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn l2_reg_gradient_is_two_lambda_times_row() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let p: ModelParams<f64> = ModelParams::init(ModelKind::DistMult, 3, 4, 2, &mut rng);
        let g = p.l2_reg_gradient([(TableId::Entity, 1)], 0.1);
        let row = p.table(TableId::Entity).row(1);
        for (got, &x) in g.entries()[0].grad.iter().zip(row) {
            assert!((got - 0.2 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn norm_grad_handles_kinks_with_zero_subgradient() {
        let g1 = norm_grad(Norm::L1, &[0.5f64, 0.0, -2.0]);
        assert_eq!(g1, vec![1.0, 0.0, -1.0]);
        let g2 = norm_grad(Norm::L2, &[0.0f64, 0.0]);
        assert_eq!(g2, vec![0.0, 0.0]);
    }
}
