//! Knowledge graph embedding trainer with adversarially generated negatives.
//!
//! The crate trains link-prediction models over (head, relation, tail)
//! triples in two stages. Pretraining fits a single model with conventional
//! corrupted-triple negatives. The adversarial stage then pairs a softmax
//! generator (DistMult or ComplEx) with a translation discriminator (TransE
//! or TransD): the generator proposes hard negatives from a small candidate
//! pool, the discriminator trains against them, and the generator is updated
//! with a one-step policy gradient using the discriminator's score as reward.
//!
//! Everything is deterministic for a fixed seed and precision: training,
//! evaluation, and checkpoint bytes reproduce bit-for-bit.

pub mod adversarial;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod evaluation;
pub mod kgdata;
pub mod models;
pub mod real;
pub mod synth;
pub mod training;

pub use kgdata::{Dataset, FilterIndex, Side, Triple, TripleStore, Vocabulary};
pub use models::{ModelKind, ModelParams, Norm};
pub use real::Real;
