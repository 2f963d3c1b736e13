//! The six pipeline stages.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use motocrash::evaluator::{evaluate_model, ModelEvaluation};
use motocrash::learners::{train, ModelArtifact, ModelSpec};
use motocrash::pipeline::{build_corpus, prepare, simulate_stream};
use motocrash::scenario::{read_manifest, write_manifest, ScenarioSpec};
use motocrash::telemetry::{read_dataset, write_dataset, SignalDataset};
use motocrash::tuner::{grid_search, make_folds, Grid, SearchResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{content_hash, ExperimentConfig, Stage};
use crate::report;
use crate::store::{read_json, read_text, with_header, Store, StageWriter};
use crate::CliError;

/// Scenario ids of the split, as written by `prepare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub subsample_rate: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
    /// Training-half controls, replayed at full rate for activation calibration.
    pub controls: Vec<String>,
    /// (non-crash, crash) frames of the subsampled training set.
    pub train_frames: (usize, usize),
}

/// Hyperparameters chosen per model, as written by `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuned {
    pub hyper: BTreeMap<String, f64>,
    /// Mean cross-validated F1 of the winner; `None` when not searched.
    pub cv_f1: Option<f64>,
    pub cells: usize,
    pub failed_cells: usize,
}

pub fn run_stage(cfg: &ExperimentConfig, store: &Store, stage: Stage) -> Result<(), CliError> {
    let hash = cfg.stage_hash(stage);
    let upstream = match stage.upstream() {
        Some(up) => Some(store.require(up, &cfg.stage_hash(up))?),
        None => None,
    };
    if store.up_to_date(stage, &hash, upstream.as_deref()) {
        info!("{}: up to date ({})", stage.name(), &hash[..12]);
        return Ok(());
    }
    let t = Instant::now();
    let mut w = store.begin(stage)?;
    match stage {
        Stage::Generate => generate(cfg, &hash, &mut w)?,
        Stage::Prepare => prepare_stage(cfg, store, &hash, &mut w)?,
        Stage::Tune => tune(cfg, store, &hash, &mut w)?,
        Stage::Train => train_stage(cfg, store, &hash, &mut w)?,
        Stage::Evaluate => evaluate(cfg, store, &hash, &mut w)?,
        Stage::Report => report_stage(cfg, store, &hash, &mut w)?,
    }
    w.finish(&hash, upstream)?;
    info!("{}: done in {:.1}s", stage.name(), t.elapsed().as_secs_f64());
    Ok(())
}

fn scenario_file(id: &str) -> String {
    format!("scenarios/{id}.csv")
}

fn generate(cfg: &ExperimentConfig, hash: &str, w: &mut StageWriter) -> Result<(), CliError> {
    let specs = build_corpus(&cfg.corpus.sizes(), cfg.corpus_seed())?;
    let mut manifest = Vec::new();
    write_manifest(&mut manifest, &specs)?;
    w.write_text("manifest.jsonl", hash, &manifest)?;
    info!("generate: simulating {} scenarios", specs.len());
    fs::create_dir_all(w.dir.join("scenarios")).map_err(|e| CliError::Runtime(e.to_string()))?;
    let dir = w.dir.clone();
    let written: Vec<(String, String)> = specs
        .par_iter()
        .map(|spec| -> Result<(String, String), CliError> {
            let stream = simulate_stream(spec, &cfg.moto)?;
            let mut csv = Vec::new();
            write_dataset(&mut csv, &SignalDataset { streams: vec![stream] })?;
            let bytes = with_header(hash, &csv);
            let rel = scenario_file(&spec.id);
            fs::write(dir.join(&rel), &bytes).map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
            Ok((rel, content_hash(&bytes)))
        })
        .collect::<Result<_, _>>()?;
    for (rel, h) in written {
        w.record(&rel, h);
    }
    Ok(())
}

fn read_scenarios(dir: &Path, ids: &[String], hash: &str) -> Result<SignalDataset, CliError> {
    let streams = ids
        .par_iter()
        .map(|id| -> Result<_, CliError> {
            let body = read_text(&dir.join(scenario_file(id)), hash)?;
            Ok(read_dataset(body.as_slice())?.streams)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SignalDataset {
        streams: streams.into_iter().flatten().collect(),
    })
}

fn manifest(cfg: &ExperimentConfig, store: &Store) -> Result<Vec<ScenarioSpec>, CliError> {
    let path = store.dir(Stage::Generate).join("manifest.jsonl");
    let body = read_text(&path, &cfg.stage_hash(Stage::Generate))?;
    Ok(read_manifest(body.as_slice())?)
}

fn prepare_stage(cfg: &ExperimentConfig, store: &Store, hash: &str, w: &mut StageWriter) -> Result<(), CliError> {
    let ids: Vec<String> = manifest(cfg, store)?.into_iter().map(|s| s.id).collect();
    let ds = read_scenarios(&store.dir(Stage::Generate), &ids, &cfg.stage_hash(Stage::Generate))?;
    let p = prepare(&ds, cfg.split_seed(), cfg.prepare.subsample_rate)?;
    let ids_of = |d: &SignalDataset| d.streams.iter().map(|s| s.scenario_id.clone()).collect::<Vec<_>>();
    let split = SplitManifest {
        seed: cfg.split_seed(),
        subsample_rate: cfg.prepare.subsample_rate,
        train: ids_of(&p.split.train),
        test: ids_of(&p.split.test),
        controls: ids_of(&p.controls),
        train_frames: p.train.class_counts(),
    };
    info!(
        "prepare: {} train / {} test scenarios, {} + {} training frames (non-crash + crash)",
        split.train.len(),
        split.test.len(),
        split.train_frames.0,
        split.train_frames.1
    );
    w.write_json("split.json", hash, &split)?;
    let mut csv = Vec::new();
    write_dataset(&mut csv, &p.train)?;
    w.write_text("train.csv", hash, &csv)
}

struct Inputs {
    split: SplitManifest,
    train: SignalDataset,
}

fn load_prepared(cfg: &ExperimentConfig, store: &Store) -> Result<Inputs, CliError> {
    let h = cfg.stage_hash(Stage::Prepare);
    let dir = store.dir(Stage::Prepare);
    let split = read_json(&dir.join("split.json"), &h)?;
    let body = read_text(&dir.join("train.csv"), &h)?;
    Ok(Inputs {
        split,
        train: read_dataset(body.as_slice())?,
    })
}

fn tune(cfg: &ExperimentConfig, store: &Store, hash: &str, w: &mut StageWriter) -> Result<(), CliError> {
    let needs_data = cfg.kinds().iter().any(|&k| cfg.grid(k).is_some());
    let data = if needs_data { Some(load_prepared(cfg, store)?) } else { None };
    let mut out = BTreeMap::new();
    for kind in cfg.kinds() {
        let fixed = cfg.fixed_spec(kind).hyper;
        let tuned = match (cfg.grid(kind), &data) {
            (Some(grid), Some(inp)) => {
                let plan = make_folds(&inp.train, cfg.tune.folds, cfg.fold_seed())?;
                // fixed values ride along as single-candidate axes
                let mut axes = grid.axes.clone();
                for (k, v) in &fixed {
                    axes.entry(k.clone()).or_insert_with(|| vec![*v]);
                }
                let t = Instant::now();
                let res: SearchResult = grid_search(kind, &Grid { axes, ..grid }, &inp.train, &plan, cfg.seed)?;
                let failed = res.table.iter().filter(|c| c.failed.is_some()).count();
                if failed > 0 {
                    warn!("tune {kind}: {failed} grid cells failed to train and scored 0");
                }
                info!(
                    "tune {kind}: {} cells, best F1 {:.4} with {:?} ({:.1}s)",
                    res.table.len(),
                    res.best_score,
                    res.best,
                    t.elapsed().as_secs_f64()
                );
                w.write_text(&format!("{kind}.csv"), hash, res.to_csv().as_bytes())?;
                Tuned {
                    hyper: res.best.clone(),
                    cv_f1: Some(res.best_score),
                    cells: res.table.len(),
                    failed_cells: failed,
                }
            }
            _ => Tuned {
                hyper: fixed,
                cv_f1: None,
                cells: 0,
                failed_cells: 0,
            },
        };
        out.insert(kind.name().to_string(), tuned);
    }
    w.write_json("tuned.json", hash, &out)
}

fn load_tuned(cfg: &ExperimentConfig, store: &Store) -> Result<BTreeMap<String, Tuned>, CliError> {
    read_json(&store.dir(Stage::Tune).join("tuned.json"), &cfg.stage_hash(Stage::Tune))
}

fn train_stage(cfg: &ExperimentConfig, store: &Store, hash: &str, w: &mut StageWriter) -> Result<(), CliError> {
    let tuned = load_tuned(cfg, store)?;
    let inp = load_prepared(cfg, store)?;
    for kind in cfg.kinds() {
        let t = tuned
            .get(kind.name())
            .ok_or_else(|| CliError::Dependency(format!("tune results lack `{kind}`; rerun `--stage tune`")))?;
        let spec = ModelSpec::new(kind, t.hyper.clone(), cfg.seed);
        let model = train(&spec, &inp.train)?;
        info!("train {kind}: {:.1}s", model.meta.wall_time_s);
        w.write_json(&format!("{kind}.json"), hash, &model)?;
    }
    Ok(())
}

fn evaluate(cfg: &ExperimentConfig, store: &Store, hash: &str, w: &mut StageWriter) -> Result<(), CliError> {
    let inp = load_prepared(cfg, store)?;
    let gen_dir = store.dir(Stage::Generate);
    let gen_hash = cfg.stage_hash(Stage::Generate);
    let test = read_scenarios(&gen_dir, &inp.split.test, &gen_hash)?;
    let controls = read_scenarios(&gen_dir, &inp.split.controls, &gen_hash)?;
    let train_hash = cfg.stage_hash(Stage::Train);
    for kind in cfg.kinds() {
        let model: ModelArtifact = read_json(&store.dir(Stage::Train).join(format!("{kind}.json")), &train_hash)?;
        let t = Instant::now();
        let ev = evaluate_model(&model, &inp.train, &controls, &test, &cfg.evaluate)?;
        info!(
            "evaluate {kind}: AUC {:.4}, Youden {:.4}, n_activation {} ({:.1}s)",
            ev.roc.auc,
            ev.test.youden,
            ev.policy.n_activation,
            t.elapsed().as_secs_f64()
        );
        if ev.fit_gap.overfitting {
            warn!("evaluate {kind}: train/test gap suggests overfitting");
        }
        w.write_json(&format!("{kind}.json"), hash, &ev)?;
    }
    Ok(())
}

fn report_stage(cfg: &ExperimentConfig, store: &Store, hash: &str, w: &mut StageWriter) -> Result<(), CliError> {
    let eval_hash = cfg.stage_hash(Stage::Evaluate);
    let mut evals: Vec<ModelEvaluation> = Vec::new();
    let mut missing = Vec::new();
    for kind in cfg.kinds() {
        match read_json(&store.dir(Stage::Evaluate).join(format!("{kind}.json")), &eval_hash) {
            Ok(ev) => evals.push(ev),
            Err(e) => {
                warn!("report: {kind} skipped: {e}");
                missing.push(kind);
            }
        }
    }
    let tuned = load_tuned(cfg, store).ok();
    let bundle = report::render(&report::ReportInput {
        config_hash: hash,
        evals: &evals,
        missing: &missing,
        tuned: tuned.as_ref(),
    });
    for (name, body) in bundle {
        w.write(&name, &body)?;
    }
    Ok(())
}

