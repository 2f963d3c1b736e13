//! Experiment configuration: schema, validation and per-stage hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use motocrash::dynamics::MotoParams;
use motocrash::evaluator::EvalOptions;
use motocrash::learners::{ModelKind, ModelSpec};
use motocrash::scenario::SetId;
use motocrash::tuner::Grid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Bumped whenever an artifact layout changes; part of every stage hash.
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Fallback for every seed that is not set explicitly.
    #[serde(default)]
    pub seed: u64,
    /// Output directory; relative paths resolve against the config file.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub moto: MotoParams,
    #[serde(default)]
    pub prepare: PrepareConfig,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default = "default_models")]
    pub models: BTreeMap<String, ModelConfig>,
    #[serde(default)]
    pub evaluate: EvalOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub seed: Option<u64>,
    pub a1: usize,
    pub a2: usize,
    pub b1: usize,
    pub b2: usize,
    pub b3: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: None,
            a1: SetId::A1.default_size(),
            a2: SetId::A2.default_size(),
            b1: SetId::B1.default_size(),
            b2: SetId::B2.default_size(),
            b3: SetId::B3.default_size(),
        }
    }
}

impl CorpusConfig {
    pub fn sizes(&self) -> BTreeMap<SetId, usize> {
        [
            (SetId::A1, self.a1),
            (SetId::A2, self.a2),
            (SetId::B1, self.b1),
            (SetId::B2, self.b2),
            (SetId::B3, self.b3),
        ]
        .into()
    }

    pub fn total(&self) -> usize {
        self.sizes().values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub split_seed: Option<u64>,
    pub subsample_rate: usize,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            split_seed: None,
            subsample_rate: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    /// When false, models train with their fixed hyperparameters only.
    pub enabled: bool,
    pub folds: usize,
    pub seed: Option<u64>,
    pub max_rounds: usize,
    pub min_improvement: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            folds: 20,
            seed: None,
            max_rounds: 4,
            min_improvement: 1e-4,
        }
    }
}

/// Per-model settings. `hyper` overrides the reference values; `grid` axes are
/// searched and their winners override both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hyper: BTreeMap<String, f64>,
    pub grid: BTreeMap<String, Vec<f64>>,
}

fn default_models() -> BTreeMap<String, ModelConfig> {
    ModelKind::ALL
        .iter()
        .map(|k| (k.name().to_string(), ModelConfig::default()))
        .collect()
}

/// Settings that `--seed` and friends can override.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_json<T: Serialize>(v: &T) -> String {
    sha256_hex(&serde_json::to_vec(v).expect("config values serialize"))
}

impl ExperimentConfig {
    /// Reads and validates a TOML config; every violation is reported at once.
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(vec![format!("cannot read config {}: {e}", path.display())]))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(out) = &cfg.out {
            if out.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.out = Some(base.join(out));
            }
        }
        cfg.apply(ov);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(vec![e.to_string().trim_end().to_string()]))
    }

    /// `--seed` replaces every seed in the file.
    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(s) = ov.seed {
            self.seed = s;
            self.corpus.seed = None;
            self.prepare.split_seed = None;
            self.tune.seed = None;
            self.evaluate.importance_seed = s;
        }
    }

    pub fn corpus_seed(&self) -> u64 {
        self.corpus.seed.unwrap_or(self.seed)
    }

    pub fn split_seed(&self) -> u64 {
        self.prepare.split_seed.unwrap_or(self.seed)
    }

    pub fn fold_seed(&self) -> u64 {
        self.tune.seed.unwrap_or(self.seed)
    }

    /// Configured model kinds in canonical order.
    pub fn kinds(&self) -> Vec<ModelKind> {
        let mut k: Vec<ModelKind> = self.models.keys().filter_map(|n| n.parse().ok()).collect();
        k.sort();
        k
    }

    pub fn model(&self, kind: ModelKind) -> &ModelConfig {
        &self.models[kind.name()]
    }

    /// Reference hyperparameters overlaid with the fixed ones from the file.
    pub fn fixed_spec(&self, kind: ModelKind) -> ModelSpec {
        let mut hyper = kind.reference_hyper();
        hyper.extend(self.model(kind).hyper.clone());
        ModelSpec::new(kind, hyper, self.seed)
    }

    pub fn grid(&self, kind: ModelKind) -> Option<Grid> {
        let axes = &self.model(kind).grid;
        (self.tune.enabled && !axes.is_empty()).then(|| Grid {
            axes: axes.clone(),
            max_rounds: self.tune.max_rounds,
            min_improvement: self.tune.min_improvement,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut v = Vec::new();
        let c = &self.corpus;
        if c.b3 > SetId::B3.default_size() {
            v.push(format!("corpus.b3 = {} exceeds the {} catalog configurations", c.b3, SetId::B3.default_size()));
        }
        // the split keeps half of each trainable set
        let train_crash = c.b1 / 2 + c.b2 / 2;
        let train_safe = c.a1 / 2 + c.a2 / 2;
        if train_crash < 2 || train_safe < 2 {
            v.push(format!(
                "corpus too small: the training half would hold {train_crash} crash and {train_safe} non-crash scenarios (need 2 each)"
            ));
        }
        if let Err(e) = self.moto.validate() {
            v.push(format!("moto: {e}"));
        }
        if self.prepare.subsample_rate < 1 {
            v.push("prepare.subsample_rate must be at least 1".into());
        }
        if self.tune.enabled {
            if self.tune.folds < 2 {
                v.push(format!("tune.folds = {} must be at least 2", self.tune.folds));
            } else if self.tune.folds > train_crash {
                v.push(format!(
                    "tune.folds = {} exceeds the {train_crash} training crash scenarios",
                    self.tune.folds
                ));
            }
            if !(self.tune.min_improvement >= 0.0) {
                v.push("tune.min_improvement must be non-negative".into());
            }
        }
        if self.models.is_empty() {
            v.push("at least one model kind is required under [models]".into());
        }
        for (name, m) in &self.models {
            let Ok(kind) = name.parse::<ModelKind>() else {
                v.push(format!(
                    "models.{name}: unknown model kind (expected one of {})",
                    ModelKind::ALL.map(|k| k.name()).join(", ")
                ));
                continue;
            };
            if let Err(e) = self.fixed_spec(kind).validate() {
                v.push(format!("models.{name}.hyper: {e}"));
            }
            for (axis, vals) in &m.grid {
                if vals.is_empty() || vals.iter().any(|x| !x.is_finite()) {
                    v.push(format!("models.{name}.grid.{axis}: needs finite candidates"));
                    continue;
                }
                for &x in vals {
                    if let Err(e) = self.fixed_spec(kind).with(axis, x).validate() {
                        v.push(format!("models.{name}.grid.{axis}: {e}"));
                        break;
                    }
                }
            }
        }
        let e = &self.evaluate;
        if !(e.cutoff > 0.0 && e.cutoff < 1.0) {
            v.push(format!("evaluate.cutoff = {} must lie in (0, 1)", e.cutoff));
        }
        if e.benchmark_frames == 0 || e.benchmark_repetitions == 0 {
            v.push("evaluate.benchmark_frames and benchmark_repetitions must be positive".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(v))
        }
    }

    /// Hash of everything that shapes the outputs of `stage` and its upstream
    /// stages; unrelated edits leave earlier stages valid.
    pub fn stage_hash(&self, stage: Stage) -> String {
        let prev = stage.upstream().map(|s| self.stage_hash(s));
        let local = match stage {
            Stage::Generate => serde_json::json!({
                "corpus": self.corpus.sizes().iter().map(|(k, v)| (k.name(), v)).collect::<BTreeMap<_, _>>(),
                "seed": self.corpus_seed(),
                "moto": self.moto,
            }),
            Stage::Prepare => serde_json::json!({
                "split_seed": self.split_seed(),
                "rate": self.prepare.subsample_rate,
            }),
            Stage::Tune => serde_json::json!({
                "tune": self.tune,
                "fold_seed": self.fold_seed(),
                "seed": self.seed,
                "models": self.models,
            }),
            Stage::Train => serde_json::json!({ "seed": self.seed }),
            Stage::Evaluate => serde_json::json!({ "evaluate": self.evaluate }),
            Stage::Report => serde_json::json!({}),
        };
        hash_json(&(LAYOUT_VERSION, stage.name(), prev, local))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate,
    Prepare,
    Tune,
    Train,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Generate,
        Stage::Prepare,
        Stage::Tune,
        Stage::Train,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Prepare => "prepare",
            Stage::Tune => "tune",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }

    pub fn upstream(self) -> Option<Stage> {
        let i = Stage::ALL.iter().position(|&s| s == self)?;
        i.checked_sub(1).map(|j| Stage::ALL[j])
    }
}

pub(crate) fn content_hash(bytes: &[u8]) -> String {
    sha256_hex(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_corpus() {
        let c = ExperimentConfig::parse("").unwrap();
        c.validate().unwrap();
        assert_eq!(c.corpus.total(), 345);
        assert_eq!(c.kinds(), ModelKind::ALL.to_vec());
        assert_eq!(c.prepare.subsample_rate, 12);
        assert_eq!(c.tune.folds, 20);
    }

    #[test]
    fn every_violation_is_listed() {
        let c = ExperimentConfig::parse(
            "[corpus]\nb3 = 30\n[prepare]\nsubsample_rate = 0\n[models.svm]\nhyper = { c = -1.0 }\n[models.knn]\n",
        )
        .unwrap();
        let Err(CliError::Validation(v)) = c.validate() else {
            panic!("expected validation errors")
        };
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::parse("[corpus]\na3 = 4\n"),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn stage_hashes_chain() {
        let a = ExperimentConfig::parse("").unwrap();
        let mut b = a.clone();
        b.evaluate.cutoff = 0.6;
        assert_eq!(a.stage_hash(Stage::Train), b.stage_hash(Stage::Train));
        assert_ne!(a.stage_hash(Stage::Evaluate), b.stage_hash(Stage::Evaluate));
        assert_ne!(a.stage_hash(Stage::Report), b.stage_hash(Stage::Report));
        let mut c = a.clone();
        c.apply(&Overrides { seed: Some(7) });
        assert_ne!(a.stage_hash(Stage::Generate), c.stage_hash(Stage::Generate));
    }
}
