//! Named hyperparameter presets for the three standard benchmarks.

use clap::ValueEnum;

use crate::models::{ModelKind, Norm};
use crate::training::TrainConfig;

/// Training precision selected on the command line.
#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

/// One benchmark/model combination with its published hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub kind: ModelKind,
    pub k: usize,
    pub gamma: f64,
    /// L2 regularization weight for the softmax-trained models; the
    /// translation models use norm constraints instead, so zero there.
    pub lambda: f64,
}

/// Every dataset/model pairing. Embedding budget is 50 floats per row:
/// k = 50 for the real-valued models, k = 25 complex dimensions for the
/// model whose rows store two halves. Regularization is 1.0 on fb15k237
/// and 0.1 on the wordnet datasets.
pub const PRESETS: &[Preset] = &[
    preset("fb15k237-transe", ModelKind::TransE(Norm::L1), 50, 3.0, 0.0),
    preset("fb15k237-transd", ModelKind::TransD(Norm::L1), 50, 3.0, 0.0),
    preset("fb15k237-distmult", ModelKind::DistMult, 50, 3.0, 1.0),
    preset("fb15k237-complex", ModelKind::ComplEx, 25, 3.0, 1.0),
    preset("wn18-transe", ModelKind::TransE(Norm::L1), 50, 3.0, 0.0),
    preset("wn18-transd", ModelKind::TransD(Norm::L1), 50, 3.0, 0.0),
    preset("wn18-distmult", ModelKind::DistMult, 50, 3.0, 0.1),
    preset("wn18-complex", ModelKind::ComplEx, 25, 3.0, 0.1),
    preset("wn18rr-transe", ModelKind::TransE(Norm::L1), 50, 3.0, 0.0),
    preset("wn18rr-transd", ModelKind::TransD(Norm::L1), 50, 3.0, 0.0),
    preset("wn18rr-distmult", ModelKind::DistMult, 50, 3.0, 0.1),
    preset("wn18rr-complex", ModelKind::ComplEx, 25, 3.0, 0.1),
];

const fn preset(name: &'static str, kind: ModelKind, k: usize, gamma: f64, lambda: f64) -> Preset {
    Preset {
        name,
        kind,
        k,
        gamma,
        lambda,
    }
}

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

impl Preset {
    /// Writes the preset's values into a config; explicit flags are applied
    /// on top by the caller.
    pub fn apply(&self, cfg: &mut TrainConfig) -> ModelKind {
        cfg.k = self.k;
        cfg.gamma = self.gamma;
        cfg.lambda = self.lambda;
        if let Some(n) = self.kind.norm() {
            cfg.norm = n;
        }
        self.kind
    }
}
