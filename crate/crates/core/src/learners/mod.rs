//! Crash classifiers: training, persistence and per-frame inference.

pub mod adaboost;
pub mod baseline;
pub mod forest;
pub mod gboost;
pub mod mlp;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataprep::Standardizer;
use crate::error::{Error, Result};
use crate::telemetry::{FrameRecord, Samples, SignalDataset};

pub use adaboost::AdaBoost;
pub use baseline::Baseline;
pub use forest::RandomForest;
pub use gboost::GradientBoost;
pub use mlp::Mlp;
pub use svm::Svm;
pub use tree::DecisionTree;

/// Version of the serialized [`ModelArtifact`] layout.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Baseline,
    Adaboost,
    Gboost,
    Rforest,
    Svm,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Baseline,
        ModelKind::Adaboost,
        ModelKind::Gboost,
        ModelKind::Rforest,
        ModelKind::Svm,
        ModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Adaboost => "adaboost",
            ModelKind::Gboost => "gboost",
            ModelKind::Rforest => "rforest",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Whether the model consumes standardized features.
    pub fn standardized(self) -> bool {
        matches!(self, ModelKind::Svm | ModelKind::Mlp)
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            ModelKind::Baseline => &[],
            ModelKind::Adaboost | ModelKind::Gboost => &["n_estimators", "max_depth", "learning_rate"],
            ModelKind::Rforest => &["n_estimators", "max_depth"],
            ModelKind::Svm => &["c"],
            ModelKind::Mlp => &["hidden", "learning_rate", "tol"],
        }
    }

    fn optional(self) -> &'static [&'static str] {
        match self {
            ModelKind::Baseline => &["channel"],
            ModelKind::Adaboost | ModelKind::Gboost => &[],
            ModelKind::Rforest => &["bootstrap", "max_features"],
            ModelKind::Svm => &["gamma", "tol", "max_iter", "cache_mb"],
            ModelKind::Mlp => &[
                "alpha",
                "batch_size",
                "max_iter",
                "n_iter_no_change",
                "early_stopping",
                "validation_fraction",
            ],
        }
    }

    /// Tuned hyperparameters of the reference study.
    pub fn reference_hyper(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            ModelKind::Baseline => &[],
            ModelKind::Adaboost => &[("n_estimators", 80.0), ("max_depth", 2.0), ("learning_rate", 0.6)],
            ModelKind::Gboost => &[("n_estimators", 80.0), ("max_depth", 10.0), ("learning_rate", 0.5)],
            ModelKind::Rforest => &[("n_estimators", 45.0), ("max_depth", 17.0)],
            ModelKind::Svm => &[("c", 120.0)],
            ModelKind::Mlp => &[("hidden", 220.0), ("learning_rate", 0.002), ("tol", 3e-4)],
        };
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown model kind `{s}`")))
    }
}

const INTEGER_HYPER: [&str; 9] = [
    "n_estimators",
    "max_depth",
    "hidden",
    "batch_size",
    "max_iter",
    "cache_mb",
    "n_iter_no_change",
    "max_features",
    "channel",
];

/// Whether a hyperparameter only takes whole values.
pub fn is_integer_hyper(name: &str) -> bool {
    INTEGER_HYPER.contains(&name)
}

/// What to train: kind, hyperparameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hyper: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, hyper: BTreeMap<String, f64>, seed: u64) -> Self {
        Self { kind, hyper, seed }
    }

    pub fn reference(kind: ModelKind, seed: u64) -> Self {
        Self::new(kind, kind.reference_hyper(), seed)
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.hyper.insert(name.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kind;
        for name in k.required() {
            if !self.hyper.contains_key(*name) {
                return Err(Error::validation(format!("{k}: missing hyperparameter `{name}`")));
            }
        }
        for (name, &v) in &self.hyper {
            if !k.required().contains(&name.as_str()) && !k.optional().contains(&name.as_str()) {
                return Err(Error::validation(format!("{k}: unknown hyperparameter `{name}`")));
            }
            if !v.is_finite() {
                return Err(Error::validation(format!("{k}: `{name}` is not finite")));
            }
            let ok = match name.as_str() {
                "learning_rate" | "c" | "tol" => v > 0.0,
                "n_estimators" | "max_depth" | "hidden" | "batch_size" | "max_iter" | "cache_mb" => {
                    v >= 1.0 && v.fract() == 0.0
                }
                "alpha" | "gamma" | "max_features" | "n_iter_no_change" | "channel" => v >= 0.0,
                "bootstrap" | "early_stopping" => v == 0.0 || v == 1.0,
                "validation_fraction" => v > 0.0 && v < 1.0,
                _ => true,
            };
            if !ok {
                return Err(Error::validation(format!("{k}: `{name}` = {v} out of range")));
            }
        }
        Ok(())
    }

    fn get(&self, name: &str) -> Option<f64> {
        self.hyper.get(name).copied()
    }

    fn int(&self, name: &str, default: usize) -> usize {
        self.get(name).map(|v| v as usize).unwrap_or(default)
    }

    /// Rough inference cost, used to break tuning ties toward cheaper models.
    pub fn complexity(&self) -> f64 {
        let g = |n: &str| self.get(n).unwrap_or(0.0);
        match self.kind {
            ModelKind::Baseline => 0.0,
            ModelKind::Adaboost | ModelKind::Gboost | ModelKind::Rforest => {
                g("n_estimators") * g("max_depth")
            }
            ModelKind::Svm => g("c"),
            ModelKind::Mlp => g("hidden"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Fitted {
    Baseline(Baseline),
    Adaboost(AdaBoost),
    Gboost(GradientBoost),
    Rforest(RandomForest),
    Svm(Svm),
    Mlp(Mlp),
}

impl Fitted {
    fn score(&self, row: &[f64]) -> f64 {
        match self {
            Fitted::Baseline(m) => m.score(row),
            Fitted::Adaboost(m) => m.score(row),
            Fitted::Gboost(m) => m.score(row),
            Fitted::Rforest(m) => m.score(row),
            Fitted::Svm(m) => m.score(row),
            Fitted::Mlp(m) => m.score(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    /// SHA-256 of the training matrix and labels.
    pub data_hash: String,
    pub n_samples: usize,
    pub n_positive: usize,
    pub wall_time_s: f64,
}

/// A trained classifier with everything needed for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub standardizer: Standardizer,
    pub model: Fitted,
    pub meta: TrainMeta,
}

/// Content hash of a sample matrix.
pub fn samples_hash(data: &Samples) -> String {
    let mut h = Sha256::new();
    h.update((data.x.nrows() as u64).to_le_bytes());
    h.update((data.x.ncols() as u64).to_le_bytes());
    for v in data.x.iter() {
        h.update(v.to_le_bytes());
    }
    h.update(&data.y);
    format!("{:x}", h.finalize())
}

/// Trains on every frame of `train`.
pub fn train(spec: &ModelSpec, train: &SignalDataset) -> Result<ModelArtifact> {
    train_samples(spec, &train.to_samples())
}

/// Trains on a flat sample matrix; `groups` identify scenarios.
pub fn train_samples(spec: &ModelSpec, data: &Samples) -> Result<ModelArtifact> {
    spec.validate()?;
    let pos = data.positives();
    if data.is_empty() || pos == 0 || pos == data.len() {
        return Err(Error::Training(format!(
            "{}: training data must contain both classes ({pos} of {} positive)",
            spec.kind,
            data.len()
        )));
    }
    if data.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite feature value".into()));
    }
    let start = Instant::now();
    let standardizer = Standardizer::fit(&data.x)?;
    let scaled;
    let x: ArrayView2<f64> = if spec.kind.standardized() {
        scaled = standardizer.apply(&data.x)?;
        scaled.view()
    } else {
        data.x.view()
    };
    let x = x.as_standard_layout();
    let x = x.view();
    let y = &data.y;
    let s = spec;
    let model = match spec.kind {
        ModelKind::Baseline => {
            let ch = s.int("channel", crate::telemetry::FS_LIN_ACC);
            Fitted::Baseline(Baseline::fit_channel(data, ch)?)
        }
        ModelKind::Adaboost => Fitted::Adaboost(AdaBoost::fit(
            x,
            y,
            adaboost::AdaBoostParams {
                n_estimators: s.int("n_estimators", 0),
                max_depth: s.int("max_depth", 0),
                learning_rate: s.hyper["learning_rate"],
            },
            s.seed,
        )?),
        ModelKind::Gboost => Fitted::Gboost(GradientBoost::fit(
            x,
            y,
            gboost::GBoostParams {
                n_estimators: s.int("n_estimators", 0),
                max_depth: s.int("max_depth", 0),
                learning_rate: s.hyper["learning_rate"],
            },
            s.seed,
        )?),
        ModelKind::Rforest => Fitted::Rforest(RandomForest::fit(
            x,
            y,
            forest::ForestParams {
                n_estimators: s.int("n_estimators", 0),
                max_depth: s.int("max_depth", 0),
                bootstrap: s.get("bootstrap").is_none_or(|v| v == 1.0),
                max_features: s.get("max_features").filter(|&v| v >= 1.0).map(|v| v as usize),
            },
            s.seed,
        )?),
        ModelKind::Svm => {
            let d = svm::SvmParams::default();
            Fitted::Svm(Svm::fit(
                x,
                y,
                &svm::SvmParams {
                    c: s.hyper["c"],
                    gamma: s.get("gamma").filter(|&g| g > 0.0),
                    tol: s.get("tol").unwrap_or(d.tol),
                    max_iter: s.int("max_iter", d.max_iter),
                    cache_mb: s.int("cache_mb", d.cache_mb),
                },
            )?)
        }
        ModelKind::Mlp => {
            let d = mlp::MlpParams::default();
            Fitted::Mlp(Mlp::fit(
                x,
                y,
                &data.groups,
                &mlp::MlpParams {
                    hidden: s.int("hidden", d.hidden),
                    learning_rate: s.hyper["learning_rate"],
                    alpha: s.get("alpha").unwrap_or(d.alpha),
                    batch_size: s.int("batch_size", d.batch_size),
                    max_iter: s.int("max_iter", d.max_iter),
                    tol: s.hyper["tol"],
                    n_iter_no_change: s.int("n_iter_no_change", d.n_iter_no_change),
                    early_stopping: s.get("early_stopping").is_none_or(|v| v == 1.0),
                    validation_fraction: s.get("validation_fraction").unwrap_or(d.validation_fraction),
                },
                s.seed,
            )?)
        }
    };
    Ok(ModelArtifact {
        format_version: ARTIFACT_VERSION,
        spec: spec.clone(),
        standardizer,
        model,
        meta: TrainMeta {
            data_hash: samples_hash(data),
            n_samples: data.len(),
            n_positive: pos,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

impl ModelArtifact {
    pub fn n_features(&self) -> usize {
        self.standardizer.n_features()
    }

    /// Crash score of one raw feature row.
    pub fn score_row(&self, row: &[f64]) -> Result<f64> {
        let d = self.n_features();
        if row.len() != d {
            return Err(Error::schema(format!("expected {d} features, got {}", row.len())));
        }
        if self.spec.kind.standardized() {
            let mut buf = [0.0; 64];
            let mut heap;
            let out: &mut [f64] = if d <= buf.len() {
                &mut buf[..d]
            } else {
                heap = vec![0.0; d];
                &mut heap
            };
            self.standardizer.apply_row(ndarray::ArrayView1::from(row), out)?;
            Ok(self.model.score(out))
        } else {
            Ok(self.model.score(row))
        }
    }

    /// Scores every row of a raw feature matrix.
    pub fn score_matrix(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::schema(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        let x = if self.spec.kind.standardized() {
            self.standardizer.apply(x)?
        } else {
            x.as_standard_layout().into_owned()
        };
        Ok(x.rows()
            .into_iter()
            .map(|r| self.model.score(r.as_slice().expect("contiguous")))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let a: ModelArtifact = serde_json::from_str(s)?;
        if a.format_version != ARTIFACT_VERSION {
            return Err(Error::schema(format!(
                "artifact format {} unsupported (expected {ARTIFACT_VERSION})",
                a.format_version
            )));
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Crash score of one frame.
pub fn predict_score(model: &ModelArtifact, frame: &FrameRecord) -> Result<f64> {
    model.score_row(&frame.features)
}

/// Thresholded score; a score equal to the cutoff counts as a crash.
pub fn classify(model: &ModelArtifact, frame: &FrameRecord, cutoff: f64) -> Result<u8> {
    Ok(decide(predict_score(model, frame)?, cutoff))
}

pub fn decide(score: f64, cutoff: f64) -> u8 {
    (score >= cutoff) as u8
}
