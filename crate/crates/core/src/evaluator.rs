//! Model assessment: confusion metrics, ROC, activation calibration,
//! decisional delay, latency and permutation importance.

use std::collections::BTreeMap;
use std::hint::black_box;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataprep::SAMPLE_RATE;
use crate::error::{Error, Result};
use crate::learners::{decide, ModelArtifact, ModelKind};
use crate::scenario::{DelayCategory, SetId};
use crate::telemetry::{channel_names, FrameRecord, Samples, SignalDataset, Stream, N_CHANNELS};

/// Airbag inflation budget (s).
pub const DELAY_BOUND: f64 = 0.012;
/// Train/test accuracy gap above which a model is flagged as overfitted.
pub const OVERFIT_GAP: f64 = 0.03;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub youden: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize, what: &str) -> f64 {
    if den == 0 {
        log::warn!("{what} undefined (zero denominator); reporting 0");
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn from_predictions(truth: &[u8], pred: &[u8]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::Evaluation("empty dataset".into()));
        }
        if truth.len() != pred.len() {
            return Err(Error::Evaluation("truth and prediction lengths differ".into()));
        }
        let mut cm = Self::default();
        for (&t, &p) in truth.iter().zip(pred) {
            match (t, p) {
                (1, 1) => cm.tp += 1,
                (0, 1) => cm.fp += 1,
                (1, _) => cm.fn_ += 1,
                _ => cm.tn += 1,
            }
        }
        Ok(cm)
    }

    pub fn add(&mut self, o: &ConfusionMatrix) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

/// Accuracy, precision and Youden's J (plus the rates behind them).
pub fn scores(cm: &ConfusionMatrix) -> Metrics {
    let recall = ratio(cm.tp, cm.tp + cm.fn_, "recall");
    let specificity = ratio(cm.tn, cm.tn + cm.fp, "specificity");
    Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total(), "accuracy"),
        precision: ratio(cm.tp, cm.tp + cm.fp, "precision"),
        recall,
        specificity,
        youden: recall + specificity - 1.0,
        f1: crate::tuner::f1(cm.tp, cm.fp, cm.fn_),
    }
}

/// Scores of every frame of a stream.
pub fn stream_scores(model: &ModelArtifact, s: &Stream) -> Result<Vec<f64>> {
    let x = Array2::from_shape_fn((s.frames.len(), N_CHANNELS), |(i, c)| s.frames[i].features[c]);
    model.score_matrix(&x)
}

pub fn stream_predictions(model: &ModelArtifact, s: &Stream, cutoff: f64) -> Result<Vec<u8>> {
    Ok(stream_scores(model, s)?.into_iter().map(|v| decide(v, cutoff)).collect())
}

pub fn confusion(model: &ModelArtifact, ds: &SignalDataset, cutoff: f64) -> Result<ConfusionMatrix> {
    confusion_samples(model, &ds.to_samples(), cutoff)
}

pub fn confusion_samples(model: &ModelArtifact, data: &Samples, cutoff: f64) -> Result<ConfusionMatrix> {
    if data.is_empty() {
        return Err(Error::Evaluation("empty dataset".into()));
    }
    let pred: Vec<u8> = model.score_matrix(&data.x)?.into_iter().map(|v| decide(v, cutoff)).collect();
    ConfusionMatrix::from_predictions(&data.y, &pred)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    /// At most `max` points, always keeping both ends.
    pub fn thinned(&self, max: usize) -> Vec<(f64, f64)> {
        let n = self.points.len();
        if n <= max || max < 2 {
            return self.points.clone();
        }
        (0..max).map(|k| self.points[k * (n - 1) / (max - 1)]).collect()
    }
}

/// ROC swept over every distinct score; tied scores move together, so the
/// trapezoid area equals the pairwise ranking probability (ties count half).
pub fn roc_from_scores(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Evaluation("ROC needs both classes".into()));
    }
    if scores.len() != labels.len() || scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("scores must be finite and match labels".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area2 = 0u128; // twice the area in tp*fp units
    let mut k = 0;
    while k < idx.len() {
        let s = scores[idx[k]];
        let (tp0, fp0) = (tp, fp);
        while k < idx.len() && scores[idx[k]] == s {
            if labels[idx[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area2 += ((fp - fp0) * (tp + tp0)) as u128;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve {
        points,
        auc: area2 as f64 / (2.0 * pos as f64 * neg as f64),
    })
}

pub fn roc_auc(model: &ModelArtifact, ds: &SignalDataset) -> Result<RocCurve> {
    let data = ds.to_samples();
    roc_from_scores(&model.score_matrix(&data.x)?, &data.y)
}

/// How many consecutive positive frames declare a crash.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationPolicy {
    pub n_activation: usize,
    pub sample_rate: f64,
}

impl ActivationPolicy {
    pub fn new(n_activation: usize) -> Self {
        Self {
            n_activation: n_activation.max(1),
            sample_rate: SAMPLE_RATE,
        }
    }

    /// Minimum possible decisional delay (s).
    pub fn activation_time(&self) -> f64 {
        self.n_activation as f64 / self.sample_rate
    }
}

pub fn longest_positive_run(pred: &[u8]) -> usize {
    let (mut best, mut run) = (0, 0);
    for &p in pred {
        run = if p == 1 { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

/// First frame completing `n` consecutive positives, counting from `from`.
pub fn first_activation(pred: &[u8], n: usize, from: usize) -> Option<usize> {
    let mut run = 0;
    for (j, &p) in pred.iter().enumerate().skip(from) {
        run = if p == 1 { run + 1 } else { 0 };
        if run >= n {
            return Some(j);
        }
    }
    None
}

/// Smallest activation count with no false activation on the given
/// control predictions.
pub fn calibrate_from_predictions(controls: &[Vec<u8>]) -> ActivationPolicy {
    ActivationPolicy::new(controls.iter().map(|p| longest_positive_run(p)).max().unwrap_or(0) + 1)
}

fn check_control(s: &Stream) -> Result<()> {
    if s.is_crash() || s.frames.iter().any(|f| f.label == 1) {
        return Err(Error::Evaluation(format!(
            "`{}` is not a control scenario",
            s.scenario_id
        )));
    }
    Ok(())
}

pub fn calibrate_activation(model: &ModelArtifact, controls: &[&Stream], cutoff: f64) -> Result<ActivationPolicy> {
    let preds = controls
        .iter()
        .map(|s| {
            check_control(s)?;
            stream_predictions(model, s, cutoff)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(calibrate_from_predictions(&preds))
}

/// Control streams that would trigger under `policy`.
pub fn false_activations(
    model: &ModelArtifact,
    policy: &ActivationPolicy,
    controls: &[&Stream],
    cutoff: f64,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for s in controls {
        check_control(s)?;
        let p = stream_predictions(model, s, cutoff)?;
        if first_activation(&p, policy.n_activation, 0).is_some() {
            out.push(s.scenario_id.clone());
        }
    }
    Ok(out)
}

/// Delay from contact frame `contact` to the end of the first run of `n`
/// positives that starts at or after contact; `None` if never reached.
pub fn delay_from_predictions(pred: &[u8], contact: usize, n: usize, rate: f64) -> Option<f64> {
    first_activation(pred, n, contact).map(|j| (j - contact + 1) as f64 / rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDelay {
    pub scenario_id: String,
    pub category: DelayCategory,
    /// `None` when the crash was never declared.
    pub delay_s: Option<f64>,
    /// Recorded time after contact; missed scenarios count with this value.
    pub censor_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDelay {
    pub scenarios: usize,
    pub detected: usize,
    /// Mean over detected scenarios only.
    pub mean_detected_s: Option<f64>,
    /// Mean with missed scenarios counted at their censoring time.
    pub mean_s: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub policy: ActivationPolicy,
    pub bound_s: f64,
    pub scenarios: Vec<ScenarioDelay>,
    pub categories: BTreeMap<DelayCategory, CategoryDelay>,
}

impl DelayReport {
    pub fn from_delays(policy: ActivationPolicy, scenarios: Vec<ScenarioDelay>) -> Self {
        let mut categories = BTreeMap::new();
        for cat in DelayCategory::ALL {
            let members: Vec<&ScenarioDelay> = scenarios.iter().filter(|s| s.category == cat).collect();
            if members.is_empty() {
                continue;
            }
            let det: Vec<f64> = members.iter().filter_map(|s| s.delay_s).collect();
            let mean_s =
                members.iter().map(|s| s.delay_s.unwrap_or(s.censor_s)).sum::<f64>() / members.len() as f64;
            categories.insert(
                cat,
                CategoryDelay {
                    scenarios: members.len(),
                    detected: det.len(),
                    mean_detected_s: (!det.is_empty()).then(|| det.iter().sum::<f64>() / det.len() as f64),
                    mean_s,
                    within_bound: det.len() == members.len() && mean_s <= DELAY_BOUND,
                },
            );
        }
        Self {
            policy,
            bound_s: DELAY_BOUND,
            scenarios,
            categories,
        }
    }

    pub fn missed(&self) -> usize {
        self.scenarios.iter().filter(|s| s.delay_s.is_none()).count()
    }
}

pub fn decisional_delay(
    model: &ModelArtifact,
    policy: &ActivationPolicy,
    iso: &[&Stream],
    cutoff: f64,
) -> Result<DelayReport> {
    let mut out = Vec::new();
    for s in iso {
        let contact = s
            .contact_index()
            .ok_or_else(|| Error::Evaluation(format!("`{}` has no contact", s.scenario_id)))?;
        let category = s
            .category
            .ok_or_else(|| Error::Evaluation(format!("`{}` has no delay category", s.scenario_id)))?;
        let pred = stream_predictions(model, s, cutoff)?;
        out.push(ScenarioDelay {
            scenario_id: s.scenario_id.clone(),
            category,
            delay_s: delay_from_predictions(&pred, contact, policy.n_activation, policy.sample_rate),
            censor_s: (s.frames.len() - contact) as f64 / policy.sample_rate,
        });
    }
    Ok(DelayReport::from_delays(*policy, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub mean_ms: f64,
    pub std_ms: f64,
    /// Timed classifications.
    pub calls: usize,
}

/// Per-frame latency on the calling thread; one untimed warm-up pass, then
/// repetitions until at least 10⁴ classifications are timed.
pub fn runtime_benchmark(model: &ModelArtifact, frames: &[FrameRecord], repetitions: usize) -> Result<RuntimeStats> {
    if frames.is_empty() {
        return Err(Error::Evaluation("no frames to benchmark".into()));
    }
    for f in frames {
        black_box(model.score_row(black_box(&f.features))?);
    }
    let reps = repetitions.max(10_000usize.div_ceil(frames.len())).max(2);
    let mut per_frame = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        for f in frames {
            black_box(model.score_row(black_box(&f.features))?);
        }
        per_frame.push(t.elapsed().as_secs_f64() * 1e3 / frames.len() as f64);
    }
    let mean = per_frame.iter().sum::<f64>() / reps as f64;
    let var = per_frame.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    Ok(RuntimeStats {
        mean_ms: mean,
        std_ms: var.sqrt(),
        calls: reps * frames.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<String>,
    /// Accuracy on the intact data.
    pub base_score: f64,
    pub repetitions: usize,
    /// Mean accuracy drop per feature.
    pub importance: Vec<f64>,
    /// Spread of the drop across repetitions.
    pub std: Vec<f64>,
}

impl ImportanceReport {
    /// (feature, importance), ascending.
    pub fn sorted(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.features.iter().map(|s| s.as_str()).zip(self.importance.iter().copied()).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v
    }
}

fn accuracy_of(scores: &[f64], y: &[u8], cutoff: f64) -> f64 {
    let ok = scores.iter().zip(y).filter(|(&s, &t)| decide(s, cutoff) == t).count();
    ok as f64 / y.len() as f64
}

/// Drop in accuracy when one column is shuffled, averaged over `n` seeded
/// permutations per feature.
pub fn permutation_importance(
    model: &ModelArtifact,
    data: &Samples,
    n: usize,
    seed: u64,
    cutoff: f64,
) -> Result<ImportanceReport> {
    if data.is_empty() || n == 0 {
        return Err(Error::Evaluation("importance needs frames and n >= 1".into()));
    }
    let base_score = accuracy_of(&model.score_matrix(&data.x)?, &data.y, cutoff);
    let d = data.x.ncols();
    let per_feature: Vec<Result<Vec<f64>>> = (0..d)
        .into_par_iter()
        .map(|c| {
            let mut x = data.x.clone();
            let orig: Vec<f64> = data.x.column(c).to_vec();
            (0..n)
                .map(|k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        seed ^ ((c as u64) << 32) ^ (k as u64).wrapping_mul(0x9E37_79B9),
                    );
                    let mut col = orig.clone();
                    col.shuffle(&mut rng);
                    x.column_mut(c).assign(&ndarray::Array1::from(col));
                    Ok(base_score - accuracy_of(&model.score_matrix(&x)?, &data.y, cutoff))
                })
                .collect()
        })
        .collect();
    let mut importance = Vec::with_capacity(d);
    let mut std = Vec::with_capacity(d);
    for drops in per_feature {
        let drops = drops?;
        let m = drops.iter().sum::<f64>() / n as f64;
        let v = drops.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        importance.push(m);
        std.push(v.sqrt());
    }
    let features = if d == N_CHANNELS {
        channel_names().map(str::to_string).collect()
    } else {
        (0..d).map(|c| format!("f{c}")).collect()
    };
    Ok(ImportanceReport {
        features,
        base_score,
        repetitions: n,
        importance,
        std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitGap {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub gap: f64,
    pub overfitting: bool,
}

pub fn fit_gap(train: &Metrics, test: &Metrics) -> FitGap {
    let gap = train.accuracy - test.accuracy;
    FitGap {
        train_accuracy: train.accuracy,
        test_accuracy: test.accuracy,
        gap,
        overfitting: gap > OVERFIT_GAP,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub cutoff: f64,
    pub importance_repetitions: usize,
    pub importance_seed: u64,
    /// Frames drawn (evenly) from the test set for importance; 0 = all.
    pub importance_max_frames: usize,
    pub benchmark_frames: usize,
    pub benchmark_repetitions: usize,
    /// Maximum ROC points kept in the report.
    pub roc_points: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            cutoff: 0.5,
            importance_repetitions: 5,
            importance_seed: 0,
            importance_max_frames: 20_000,
            benchmark_frames: 2_000,
            benchmark_repetitions: 5,
            roc_points: 200,
        }
    }
}

/// Everything measured for one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub kind: ModelKind,
    pub train_confusion: ConfusionMatrix,
    pub train: Metrics,
    pub test_confusion: ConfusionMatrix,
    pub test: Metrics,
    pub fit_gap: FitGap,
    pub train_auc: f64,
    /// Test-set ROC.
    pub roc: RocCurve,
    pub policy: ActivationPolicy,
    /// Held-out controls that would falsely trigger under the policy.
    pub test_false_activations: Vec<String>,
    pub delay: DelayReport,
    pub runtime: RuntimeStats,
    pub importance: Option<ImportanceReport>,
}

/// Evenly spaced rows, at most `max` (0 keeps all).
pub fn thin_rows(data: &Samples, max: usize) -> Samples {
    if max == 0 || data.len() <= max {
        return data.clone();
    }
    let rows: Vec<usize> = (0..max).map(|k| k * data.len() / max).collect();
    data.select_rows(&rows)
}

/// Runs every assessment.
///
/// `train` is the data the model was fitted on; `controls` are full-rate
/// training-half control streams used for activation calibration; `test` is
/// the held-out half, whose B.3 streams drive the delay analysis.
pub fn evaluate_model(
    model: &ModelArtifact,
    train: &SignalDataset,
    controls: &SignalDataset,
    test: &SignalDataset,
    opts: &EvalOptions,
) -> Result<ModelEvaluation> {
    let train_samples = train.to_samples();
    let train_scores = model.score_matrix(&train_samples.x)?;
    let train_pred: Vec<u8> = train_scores.iter().map(|&s| decide(s, opts.cutoff)).collect();
    let train_cm = ConfusionMatrix::from_predictions(&train_samples.y, &train_pred)?;
    let train_auc = roc_from_scores(&train_scores, &train_samples.y)?.auc;
    let test_samples = test.to_samples();
    let test_scores = model.score_matrix(&test_samples.x)?;
    let pred: Vec<u8> = test_scores.iter().map(|&s| decide(s, opts.cutoff)).collect();
    let test_cm = ConfusionMatrix::from_predictions(&test_samples.y, &pred)?;
    let mut roc = roc_from_scores(&test_scores, &test_samples.y)?;
    roc.points = roc.thinned(opts.roc_points);
    let (train_m, test_m) = (scores(&train_cm), scores(&test_cm));

    let calib: Vec<&Stream> = controls.streams.iter().filter(|s| !s.is_crash()).collect();
    if calib.is_empty() {
        return Err(Error::Evaluation("no control streams for calibration".into()));
    }
    let policy = calibrate_activation(model, &calib, opts.cutoff)?;
    let held: Vec<&Stream> = test.streams.iter().filter(|s| !s.is_crash()).collect();
    let test_false_activations = false_activations(model, &policy, &held, opts.cutoff)?;
    let iso: Vec<&Stream> = test.streams.iter().filter(|s| s.set == SetId::B3).collect();
    let delay = decisional_delay(model, &policy, &iso, opts.cutoff)?;

    let bench: Vec<FrameRecord> = test
        .streams
        .iter()
        .flat_map(|s| s.frames.iter().copied())
        .step_by((test.n_frames() / opts.benchmark_frames.max(1)).max(1))
        .take(opts.benchmark_frames.max(1))
        .collect();
    let runtime = runtime_benchmark(model, &bench, opts.benchmark_repetitions)?;
    let importance = if opts.importance_repetitions > 0 {
        Some(permutation_importance(
            model,
            &thin_rows(&test_samples, opts.importance_max_frames),
            opts.importance_repetitions,
            opts.importance_seed,
            opts.cutoff,
        )?)
    } else {
        None
    };
    Ok(ModelEvaluation {
        kind: model.spec.kind,
        train_confusion: train_cm,
        train: train_m,
        test_confusion: test_cm,
        test: test_m,
        fit_gap: fit_gap(&train_m, &test_m),
        train_auc,
        roc,
        policy,
        test_false_activations,
        delay,
        runtime,
        importance,
    })
}
