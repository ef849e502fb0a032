//! Triple files, vocabularies, filter indexes, and negative candidate pools.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: line {line}: expected 3 tab-separated fields, found {found}")]
    MalformedLine {
        file: String,
        line: usize,
        found: usize,
    },
    #[error("{file}: no triples")]
    Empty { file: String },
    #[error("relation id {0} does not occur in the training split")]
    RelationNotInTrain(u32),
    #[error("name {name:?} is not in the vocabulary")]
    UnknownName { name: String },
}

/// One directed edge. Fields are dense ids into a [`Vocabulary`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Triple {
    pub h: u32,
    pub r: u32,
    pub t: u32,
}

/// Which entity slot of a triple is being corrupted or predicted.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Head => "head",
            Side::Tail => "tail",
        }
    }
}

impl Triple {
    pub fn new(h: u32, r: u32, t: u32) -> Self {
        Triple { h, r, t }
    }

    pub fn entity(self, side: Side) -> u32 {
        match side {
            Side::Head => self.h,
            Side::Tail => self.t,
        }
    }

    pub fn with_entity(self, side: Side, e: u32) -> Self {
        match side {
            Side::Head => Triple { h: e, ..self },
            Side::Tail => Triple { t: e, ..self },
        }
    }
}

/// Bidirectional name<->id maps for entities and relations. Ids are dense
/// and assigned in first-appearance order, so loading the same files always
/// produces the same ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: HashMap<String, u32>,
    relation_ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a vocabulary from ordered name lists (checkpoint loading).
    /// Duplicate names would break the bijection.
    pub fn from_names(
        entities: Vec<String>,
        relations: Vec<String>,
    ) -> Result<Self, String> {
        let mut v = Vocabulary::new();
        for name in entities {
            let id = v.entity_names.len() as u32;
            if v.entity_ids.insert(name.clone(), id).is_some() {
                return Err(format!("duplicate entity name {name:?}"));
            }
            v.entity_names.push(name);
        }
        for name in relations {
            let id = v.relation_names.len() as u32;
            if v.relation_ids.insert(name.clone(), id).is_some() {
                return Err(format!("duplicate relation name {name:?}"));
            }
            v.relation_names.push(name);
        }
        Ok(v)
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn entity_name(&self, id: u32) -> &str {
        &self.entity_names[id as usize]
    }

    pub fn relation_name(&self, id: u32) -> &str {
        &self.relation_names[id as usize]
    }

    pub fn entity_id(&self, name: &str) -> Option<u32> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<u32> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    fn intern_entity(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entity_names.len() as u32;
        self.entity_names.push(name.to_owned());
        self.entity_ids.insert(name.to_owned(), id);
        id
    }

    fn intern_relation(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relation_names.len() as u32;
        self.relation_names.push(name.to_owned());
        self.relation_ids.insert(name.to_owned(), id);
        id
    }
}

/// The three canonical splits of a benchmark.
#[derive(Clone, Debug, Default)]
pub struct TripleStore {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl TripleStore {
    pub fn split(&self, which: Split) -> &[Triple] {
        match which {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// A loaded benchmark: splits plus the vocabulary their ids refer to.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub triples: TripleStore,
}

impl Dataset {
    /// Re-expresses all splits in `target` ids. Fails if `target` is missing
    /// any name used here, i.e. the checkpoint was trained on different data.
    pub fn remap(&self, target: &Vocabulary) -> Result<TripleStore, KgError> {
        let map_one = |tr: &Triple| -> Result<Triple, KgError> {
            let h = self.vocab.entity_name(tr.h);
            let r = self.vocab.relation_name(tr.r);
            let t = self.vocab.entity_name(tr.t);
            let miss = |name: &str| KgError::UnknownName {
                name: name.to_owned(),
            };
            Ok(Triple::new(
                target.entity_id(h).ok_or_else(|| miss(h))?,
                target.relation_id(r).ok_or_else(|| miss(r))?,
                target.entity_id(t).ok_or_else(|| miss(t))?,
            ))
        };
        let map_split = |s: &[Triple]| s.iter().map(map_one).collect::<Result<Vec<_>, _>>();
        Ok(TripleStore {
            train: map_split(&self.triples.train)?,
            valid: map_split(&self.triples.valid)?,
            test: map_split(&self.triples.test)?,
        })
    }
}

/// Parses tab-separated `head relation tail` lines. Blank lines are skipped;
/// anything else with a field count other than 3 is an error naming the
/// 1-based line number. New names are interned in field order (head before
/// tail), so ids are reproducible.
pub fn parse_triples<R: BufRead>(
    reader: R,
    file: &str,
    vocab: &mut Vocabulary,
) -> Result<Vec<Triple>, KgError> {
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| KgError::Io {
            path: PathBuf::from(file),
            source,
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(KgError::MalformedLine {
                file: file.to_owned(),
                line: idx + 1,
                found: fields.len(),
            });
        }
        let h = vocab.intern_entity(fields[0]);
        let r = vocab.intern_relation(fields[1]);
        let t = vocab.intern_entity(fields[2]);
        triples.push(Triple::new(h, r, t));
    }
    if triples.is_empty() {
        return Err(KgError::Empty {
            file: file.to_owned(),
        });
    }
    Ok(triples)
}

pub fn load_triples(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Triple>, KgError> {
    let file = File::open(path).map_err(|source| KgError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_triples(BufReader::new(file), &path.display().to_string(), vocab)
}

/// Loads `train.txt`, `valid.txt`, `test.txt` from a directory, building one
/// shared vocabulary (train interned first).
pub fn load_dataset(dir: &Path) -> Result<Dataset, KgError> {
    let mut vocab = Vocabulary::new();
    let train = load_triples(&dir.join("train.txt"), &mut vocab)?;
    let valid = load_triples(&dir.join("valid.txt"), &mut vocab)?;
    let test = load_triples(&dir.join("test.txt"), &mut vocab)?;
    Ok(Dataset {
        vocab,
        triples: TripleStore { train, valid, test },
    })
}

/// Membership index over the union of all splits, used to filter known-true
/// triples out of ranking candidate lists. Duplicates across splits collapse.
#[derive(Debug)]
pub struct FilterIndex {
    all: HashSet<Triple>,
    heads_by_rt: HashMap<(u32, u32), Vec<u32>>,
    tails_by_hr: HashMap<(u32, u32), Vec<u32>>,
}

impl FilterIndex {
    pub fn build(store: &TripleStore) -> Self {
        let mut all = HashSet::new();
        for split in [&store.train, &store.valid, &store.test] {
            all.extend(split.iter().copied());
        }
        let mut heads_by_rt: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        let mut tails_by_hr: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for &tr in &all {
            heads_by_rt.entry((tr.r, tr.t)).or_default().push(tr.h);
            tails_by_hr.entry((tr.h, tr.r)).or_default().push(tr.t);
        }
        for v in heads_by_rt.values_mut() {
            v.sort_unstable();
        }
        for v in tails_by_hr.values_mut() {
            v.sort_unstable();
        }
        FilterIndex {
            all,
            heads_by_rt,
            tails_by_hr,
        }
    }

    /// Number of distinct triples across all splits.
    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    pub fn contains(&self, tr: Triple) -> bool {
        self.all.contains(&tr)
    }

    /// Entities known to be true in `side` of `tr`, the slot being ranked.
    /// Sorted ascending; always includes `tr`'s own entity if `tr` is known.
    pub fn known_entities(&self, tr: Triple, side: Side) -> &[u32] {
        let found = match side {
            Side::Head => self.heads_by_rt.get(&(tr.r, tr.t)),
            Side::Tail => self.tails_by_hr.get(&(tr.h, tr.r)),
        };
        found.map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Clone, Copy, Debug)]
struct BernEntry {
    tph: f64,
    hpt: f64,
    p_head: f64,
}

/// Per-relation head/tail corruption statistics from the training split.
///
/// `tph` is distinct (h,t) pairs per distinct head, `hpt` the same per
/// distinct tail; heads are replaced with probability tph/(tph+hpt), which
/// corrupts the slot with more variety and so is less likely to produce a
/// false negative.
#[derive(Debug)]
pub struct BernStats {
    entries: Vec<Option<BernEntry>>,
}

impl BernStats {
    pub fn tph(&self, r: u32) -> Result<f64, KgError> {
        self.entry(r).map(|e| e.tph)
    }

    pub fn hpt(&self, r: u32) -> Result<f64, KgError> {
        self.entry(r).map(|e| e.hpt)
    }

    pub fn p_replace_head(&self, r: u32) -> Result<f64, KgError> {
        self.entry(r).map(|e| e.p_head)
    }

    fn entry(&self, r: u32) -> Result<BernEntry, KgError> {
        self.entries
            .get(r as usize)
            .copied()
            .flatten()
            .ok_or(KgError::RelationNotInTrain(r))
    }
}

/// Computes corruption statistics over `train`. Duplicate triples count once.
pub fn compute_bern_stats(train: &[Triple], num_relations: usize) -> BernStats {
    let mut pairs: Vec<HashSet<(u32, u32)>> = vec![HashSet::new(); num_relations];
    for &tr in train {
        pairs[tr.r as usize].insert((tr.h, tr.t));
    }
    let entries = pairs
        .into_iter()
        .map(|set| {
            if set.is_empty() {
                return None;
            }
            let heads: HashSet<u32> = set.iter().map(|&(h, _)| h).collect();
            let tails: HashSet<u32> = set.iter().map(|&(_, t)| t).collect();
            let tph = set.len() as f64 / heads.len() as f64;
            let hpt = set.len() as f64 / tails.len() as f64;
            Some(BernEntry {
                tph,
                hpt,
                p_head: tph / (tph + hpt),
            })
        })
        .collect();
    BernStats { entries }
}

/// A positive triple with its pool of candidate negatives, all corrupted on
/// the same side.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub positive: Triple,
    pub side: Side,
    pub candidates: Vec<Triple>,
}

/// Draws the corruption side from the per-relation statistics, then fills the
/// pool with `ns` uniform entity replacements (duplicates and accidental true
/// triples allowed; filtering happens downstream where it matters).
pub fn sample_candidates<R: Rng + ?Sized>(
    positive: Triple,
    ns: usize,
    bern: &BernStats,
    num_entities: usize,
    rng: &mut R,
) -> Result<CandidateSet, KgError> {
    debug_assert!(ns >= 1);
    debug_assert!(num_entities >= 2);
    let p_head = bern.p_replace_head(positive.r)?;
    let side = if rng.random_bool(p_head) {
        Side::Head
    } else {
        Side::Tail
    };
    let candidates = (0..ns)
        .map(|_| {
            let e = rng.random_range(0..num_entities as u32);
            positive.with_entity(side, e)
        })
        .collect();
    Ok(CandidateSet {
        positive,
        side,
        candidates,
    })
}
