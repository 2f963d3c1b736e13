//! Report bundle: a Markdown summary plus hand-written SVG charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use motocrash::evaluator::{ConfusionMatrix, Metrics, ModelEvaluation};
use motocrash::learners::ModelKind;
use motocrash::scenario::DelayCategory;

use crate::stages::Tuned;

pub struct ReportInput<'a> {
    pub config_hash: &'a str,
    pub evals: &'a [ModelEvaluation],
    pub missing: &'a [ModelKind],
    pub tuned: Option<&'a BTreeMap<String, Tuned>>,
}

const PALETTE: [&str; 6] = ["#7f7f7f", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

fn color(kind: ModelKind) -> &'static str {
    let i = ModelKind::ALL.iter().position(|&k| k == kind).unwrap_or(0);
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Svg {
    w: f64,
    h: f64,
    body: String,
}

impl Svg {
    fn new(w: f64, h: f64) -> Self {
        Self { w, h, body: String::new() }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            esc(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, extra: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="{stroke}" {extra}/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{fill}"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    fn finish(self, hash: &str) -> Vec<u8> {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<!-- config_hash={hash} -->\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.w,
            h = self.h
        )
        .into_bytes()
    }
}

/// Vertical grouped bars; `groups` are x labels, each with one value per series.
fn grouped_bars(title: &str, unit: &str, series: &[(String, &str)], groups: &[(String, Vec<f64>)], hash: &str) -> Vec<u8> {
    let (w, h) = (640.0, 380.0);
    let (l, r, t, b) = (60.0, 150.0, 40.0, 50.0);
    let mut s = Svg::new(w, h);
    s.text(w / 2.0, 22.0, "middle", 15.0, title);
    let vmax = groups
        .iter()
        .flat_map(|g| g.1.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        .max(1e-12);
    let ph = h - t - b;
    let pw = w - l - r;
    let y = |v: f64| t + ph * (1.0 - v / vmax);
    for k in 0..=4 {
        let v = vmax * k as f64 / 4.0;
        s.line(l, y(v), l + pw, y(v), "#ddd", "");
        s.text(l - 6.0, y(v) + 4.0, "end", 11.0, &format!("{v:.3}"));
    }
    s.text(14.0, t + ph / 2.0, "middle", 11.0, unit);
    let gw = pw / groups.len().max(1) as f64;
    let bw = gw * 0.8 / series.len().max(1) as f64;
    for (gi, (label, vals)) in groups.iter().enumerate() {
        let x0 = l + gi as f64 * gw + gw * 0.1;
        for (si, v) in vals.iter().enumerate() {
            if v.is_finite() {
                s.rect(x0 + si as f64 * bw, y(*v), bw * 0.9, t + ph - y(*v), series[si].1);
            }
        }
        s.text(l + (gi as f64 + 0.5) * gw, h - b + 18.0, "middle", 12.0, label);
    }
    s.line(l, t + ph, l + pw, t + ph, "black", "");
    for (si, (name, c)) in series.iter().enumerate() {
        let yy = t + 10.0 + si as f64 * 18.0;
        s.rect(w - r + 15.0, yy - 9.0, 12.0, 12.0, c);
        s.text(w - r + 33.0, yy + 1.0, "start", 12.0, name);
    }
    s.finish(hash)
}

fn roc_svg(evals: &[ModelEvaluation], hash: &str) -> Vec<u8> {
    let (w, h) = (520.0, 420.0);
    let (l, t, side) = (50.0, 30.0, 340.0);
    let mut s = Svg::new(w, h);
    s.text(l + side / 2.0, 20.0, "middle", 15.0, "ROC (test set)");
    let px = |f: f64| l + f * side;
    let py = |f: f64| t + (1.0 - f) * side;
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        s.line(px(v), py(0.0), px(v), py(1.0), "#eee", "");
        s.line(px(0.0), py(v), px(1.0), py(v), "#eee", "");
        s.text(px(v), py(0.0) + 16.0, "middle", 11.0, &format!("{v:.2}"));
        s.text(px(0.0) - 6.0, py(v) + 4.0, "end", 11.0, &format!("{v:.2}"));
    }
    s.line(px(0.0), py(0.0), px(1.0), py(1.0), "#999", r#"stroke-dasharray="4 3""#);
    s.text(l + side / 2.0, py(0.0) + 34.0, "middle", 12.0, "false-positive rate");
    for (i, e) in evals.iter().enumerate() {
        let pts: Vec<String> = e.roc.points.iter().map(|&(f, tp)| format!("{:.2},{:.2}", px(f), py(tp))).collect();
        let _ = writeln!(
            s.body,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            color(e.kind)
        );
        let yy = t + 10.0 + i as f64 * 18.0;
        s.rect(l + side + 20.0, yy - 9.0, 12.0, 12.0, color(e.kind));
        s.text(l + side + 38.0, yy + 1.0, "start", 12.0, &format!("{} {:.3}", e.kind, e.roc.auc));
    }
    s.finish(hash)
}

/// Horizontal bars, largest first.
fn importance_svg(e: &ModelEvaluation, hash: &str) -> Option<Vec<u8>> {
    let imp = e.importance.as_ref()?;
    let mut rows = imp.sorted();
    rows.reverse();
    let (w, row_h, l, t) = (560.0, 18.0, 180.0, 36.0);
    let h = t + row_h * rows.len() as f64 + 20.0;
    let mut s = Svg::new(w, h);
    s.text(w / 2.0, 20.0, "middle", 14.0, &format!("{}: permutation importance (accuracy drop)", e.kind));
    let vmax = rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max).max(1e-12);
    let zero = l + 20.0;
    let scale = (w - zero - 70.0) / vmax;
    for (i, (name, v)) in rows.iter().enumerate() {
        let y = t + i as f64 * row_h;
        s.text(l + 10.0, y + 13.0, "end", 11.0, name);
        let (x, len) = if *v >= 0.0 { (zero, v * scale) } else { (zero + v * scale, -v * scale) };
        s.rect(x, y + 3.0, len, row_h - 6.0, color(e.kind));
        s.text(zero + v.max(0.0) * scale + 4.0, y + 13.0, "start", 10.0, &format!("{v:.4}"));
    }
    s.line(zero, t, zero, h - 20.0, "black", "");
    Some(s.finish(hash))
}

fn metric_cells(m: &Metrics, auc: f64) -> String {
    format!("{auc:.4} | {:.4} | {:.4} | {:.4}", m.accuracy, m.precision, m.youden)
}

fn cm_line(c: &ConfusionMatrix) -> String {
    format!("{} | {} | {} | {}", c.tp, c.fn_, c.fp, c.tn)
}

/// CPU model (when the OS exposes it), architecture and core count.
fn host_description() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|t| {
            t.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown CPU".into());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{cpu} ({} {}, {cores} logical cores)", std::env::consts::OS, std::env::consts::ARCH)
}

/// Raw numbers behind the charts.
fn tables(evals: &[ModelEvaluation], hash: &str) -> Vec<(String, Vec<u8>)> {
    let head = format!("# config_hash={hash}\n");
    let mut roc = head.clone() + "model,fpr,tpr\n";
    let mut delays = head.clone() + "model,scenario_id,category,delay_s,censor_s\n";
    let mut imp = head + "model,feature,importance,std\n";
    for e in evals {
        for (f, t) in &e.roc.points {
            let _ = writeln!(roc, "{},{f},{t}", e.kind);
        }
        for d in &e.delay.scenarios {
            let _ = writeln!(
                delays,
                "{},{},{},{},{}",
                e.kind,
                d.scenario_id,
                d.category.name(),
                d.delay_s.map_or(String::new(), |v| v.to_string()),
                d.censor_s
            );
        }
        if let Some(r) = &e.importance {
            for (i, name) in r.features.iter().enumerate() {
                let _ = writeln!(imp, "{},{name},{},{}", e.kind, r.importance[i], r.std[i]);
            }
        }
    }
    vec![
        ("roc.csv".into(), roc.into_bytes()),
        ("delays.csv".into(), delays.into_bytes()),
        ("importance.csv".into(), imp.into_bytes()),
    ]
}

/// File name → contents.
pub fn render(inp: &ReportInput) -> Vec<(String, Vec<u8>)> {
    let hash = inp.config_hash;
    let evals = inp.evals;
    let mut files = Vec::new();
    let mut md = format!("<!-- config_hash={hash} -->\n# Crash detection report\n\n");
    let mut omitted: Vec<String> = inp.missing.iter().map(|k| format!("model `{k}` (no evaluation)")).collect();

    // 1. scores
    md.push_str("## 1. Scores\n\nmodel | AUC train | acc train | prec train | Youden train | AUC test | acc test | prec test | Youden test | overfit\n---|---|---|---|---|---|---|---|---|---\n");
    let mut csv = format!("# config_hash={hash}\nmodel,split,auc,accuracy,precision,youden,recall,specificity,f1\n");
    for e in evals {
        let _ = writeln!(
            md,
            "{} | {} | {} | {}",
            e.kind,
            metric_cells(&e.train, e.train_auc),
            metric_cells(&e.test, e.roc.auc),
            if e.fit_gap.overfitting { "yes" } else { "no" }
        );
        for (split, m, auc) in [("train", &e.train, e.train_auc), ("test", &e.test, e.roc.auc)] {
            let _ = writeln!(
                csv,
                "{},{split},{auc},{},{},{},{},{},{}",
                e.kind, m.accuracy, m.precision, m.youden, m.recall, m.specificity, m.f1
            );
        }
    }
    files.push(("scores.csv".to_string(), csv.into_bytes()));
    if !evals.is_empty() {
        let series: Vec<(String, &str)> = evals.iter().map(|e| (e.kind.to_string(), color(e.kind))).collect();
        let groups: Vec<(String, Vec<f64>)> = [("AUC", 0), ("accuracy", 1), ("precision", 2), ("Youden", 3)]
            .iter()
            .map(|(name, i)| {
                let vals = evals
                    .iter()
                    .map(|e| [e.roc.auc, e.test.accuracy, e.test.precision, e.test.youden][*i])
                    .collect();
                (name.to_string(), vals)
            })
            .collect();
        files.push(("scores.svg".into(), grouped_bars("Test-set scores", "score", &series, &groups, hash)));
        md.push_str("\n![scores](scores.svg)\n");
    }

    // 2. ROC
    md.push_str("\n## 2. ROC\n\n");
    if evals.is_empty() {
        omitted.push("ROC overlay".into());
    } else {
        files.push(("roc.svg".into(), roc_svg(evals, hash)));
        md.push_str("![roc](roc.svg)\n");
    }

    // 3. delay by category
    md.push_str("\n## 3. Decisional delay by impact category\n\nMissed scenarios count at their censoring time.\n\nmodel | category | detected | mean delay (ms) | mean over detected (ms) | within bound\n---|---|---|---|---|---\n");
    for e in evals {
        for (cat, d) in &e.delay.categories {
            let _ = writeln!(
                md,
                "{} | {} | {}/{} | {:.2} | {} | {}",
                e.kind,
                cat.name(),
                d.detected,
                d.scenarios,
                d.mean_s * 1e3,
                d.mean_detected_s.map_or("-".to_string(), |v| format!("{:.2}", v * 1e3)),
                d.within_bound
            );
        }
    }
    let cats: Vec<DelayCategory> = DelayCategory::ALL
        .into_iter()
        .filter(|c| evals.iter().any(|e| e.delay.categories.get(c).is_some_and(|d| d.scenarios > 0)))
        .collect();
    if cats.is_empty() {
        omitted.push("delay chart (no impact scenarios in the test set)".into());
    } else {
        let series: Vec<(String, &str)> = evals.iter().map(|e| (e.kind.to_string(), color(e.kind))).collect();
        let groups: Vec<(String, Vec<f64>)> = cats
            .iter()
            .map(|c| {
                let vals = evals
                    .iter()
                    .map(|e| e.delay.categories.get(c).map_or(f64::NAN, |d| d.mean_s * 1e3))
                    .collect();
                (c.name().to_string(), vals)
            })
            .collect();
        files.push(("delay.svg".into(), grouped_bars("Mean decisional delay", "ms", &series, &groups, hash)));
        md.push_str("\n![delay](delay.svg)\n");
    }

    // 4. importance
    md.push_str("\n## 4. Permutation importance\n\n");
    for e in evals {
        match importance_svg(e, hash) {
            Some(svg) => {
                let name = format!("importance-{}.svg", e.kind);
                let top: Vec<String> = e
                    .importance
                    .as_ref()
                    .map(|r| {
                        let mut v = r.sorted();
                        v.reverse();
                        v.iter().take(3).map(|(n, x)| format!("{n} ({x:.4})")).collect()
                    })
                    .unwrap_or_default();
                let _ = writeln!(md, "- {}: top features {}\n\n  ![{}]({name})\n", e.kind, top.join(", "), e.kind);
                files.push((name, svg));
            }
            None => omitted.push(format!("importance for `{}` (disabled)", e.kind)),
        }
    }

    // 5. confusion matrices
    md.push_str("\n## 5. Confusion matrices\n\nmodel | split | TP | FN | FP | TN\n---|---|---|---|---|---\n");
    for e in evals {
        let _ = writeln!(md, "{} | train | {}", e.kind, cm_line(&e.train_confusion));
        let _ = writeln!(md, "{} | test | {}", e.kind, cm_line(&e.test_confusion));
    }

    // 6. activation thresholds
    md.push_str("\n## 6. Activation thresholds\n\nmodel | n_activation | activation time (ms) | false activations on held-out controls\n---|---|---|---\n");
    for e in evals {
        let _ = writeln!(
            md,
            "{} | {} | {:.1} | {}",
            e.kind,
            e.policy.n_activation,
            e.policy.activation_time() * 1e3,
            e.test_false_activations.len()
        );
    }

    // 7. runtime
    let _ = write!(
        md,
        "\n## 7. Inference time per frame\n\nSingle thread on {}. Timings vary between runs and hosts.\n\nmodel | mean (µs) | std (µs) | timed calls\n---|---|---|---\n",
        host_description()
    );
    for e in evals {
        let _ = writeln!(
            md,
            "{} | {:.3} | {:.3} | {}",
            e.kind,
            e.runtime.mean_ms * 1e3,
            e.runtime.std_ms * 1e3,
            e.runtime.calls
        );
    }

    if let Some(tuned) = inp.tuned {
        md.push_str("\n## Hyperparameters\n\nmodel | values | CV F1 | cells\n---|---|---|---\n");
        for (k, t) in tuned {
            let vals: Vec<String> = t.hyper.iter().map(|(n, v)| format!("{n}={v}")).collect();
            let _ = writeln!(
                md,
                "{k} | {} | {} | {}",
                vals.join(", "),
                t.cv_f1.map_or("-".into(), |f| format!("{f:.4}")),
                t.cells
            );
        }
    }
    if !omitted.is_empty() {
        md.push_str("\n## Omitted\n\n");
        for o in &omitted {
            let _ = writeln!(md, "- {o}");
        }
    }
    files.extend(tables(evals, hash));
    files.push(("summary.md".into(), md.into_bytes()));
    files
}
