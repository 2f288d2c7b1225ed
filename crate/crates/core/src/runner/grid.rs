//! Runs experiment blocks and renders the result table.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cnn::TrainHistory;
use crate::corpus::Corpus;
use crate::error::{Error, Result, StageExt};
use crate::eval::{evaluate, fmt4, EvalReport};
use crate::preprocess::{preprocess_corpus, Resources};

use super::config::{Classifier, ExperimentConfig, GridConfig};
use super::persist::save_model;
use super::pipeline::{fit_cnn, Pipeline, SparseFeatures};

/// One fitted and evaluated (block, K) pair.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub k: Option<usize>,
    pub report: EvalReport,
    pub total_features: usize,
    pub selected_features: usize,
    pub seconds: f64,
    pub pipeline: Pipeline,
    pub history: Option<TrainHistory>,
}

/// Short stable hash of an experiment block with its seed and K resolved.
pub fn config_digest(config: &ExperimentConfig, seed: u64, k: Option<usize>) -> String {
    let mut resolved = config.clone();
    resolved.seed = Some(seed);
    resolved.k = k.into_iter().collect();
    let text = toml::to_string(&resolved).expect("experiment configs serialize");
    let hash = Sha256::digest(text.as_bytes());
    hash[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// Fits on `train` only and evaluates on `test`, one output per K.
///
/// SVM blocks share vocabulary, idf and chi-squared scores across their K
/// values; K above the vocabulary size is clamped with a warning.
pub fn run_config(
    train: &Corpus,
    test: &Corpus,
    resources: &Resources,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<RunOutput>> {
    config.validate()?;
    let start = Instant::now();
    let train_labels = train.labels().stage("corpus")?;
    let gold = test.labels().stage("corpus")?;
    let train_docs = preprocess_corpus(train, &config.preprocess, resources);
    let test_docs = preprocess_corpus(test, &config.preprocess, resources);
    let pipeline = |predictor| Pipeline {
        preprocess: config.preprocess,
        resources: resources.clone(),
        predictor,
    };

    match &config.classifier {
        Classifier::Svm(svm) => {
            let features = SparseFeatures::fit(&train_docs, train_labels, &config.ngrams)?;
            let shared = start.elapsed().as_secs_f64();
            let ks: Vec<Option<usize>> = if config.k.is_empty() {
                vec![None]
            } else {
                config.k.iter().map(|&k| Some(k)).collect()
            };
            ks.into_iter()
                .map(|k| {
                    let t = Instant::now();
                    let predictor = features.train(k, svm)?;
                    let scores = predictor.scores(&test_docs)?;
                    let pred: Vec<_> = scores.iter().map(|&s| predictor.label_for(s)).collect();
                    let report = evaluate(&gold, &pred).stage("eval")?;
                    Ok(RunOutput {
                        k,
                        report,
                        total_features: predictor.total_features(),
                        selected_features: predictor.selected_features(),
                        seconds: shared + t.elapsed().as_secs_f64(),
                        pipeline: pipeline(predictor),
                        history: None,
                    })
                })
                .collect()
        }
        Classifier::Cnn(cnn) => {
            let (predictor, history) = fit_cnn(&train_docs, &train_labels, cnn, seed)?;
            let scores = predictor.scores(&test_docs)?;
            let pred: Vec<_> = scores.iter().map(|&s| predictor.label_for(s)).collect();
            let report = evaluate(&gold, &pred).stage("eval")?;
            Ok(vec![RunOutput {
                k: None,
                report,
                total_features: predictor.total_features(),
                selected_features: predictor.selected_features(),
                seconds: start.elapsed().as_secs_f64(),
                pipeline: pipeline(predictor),
                history: Some(history),
            }])
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResultRow {
    /// 1-based, numbered across the whole grid.
    pub sn: usize,
    pub block: String,
    pub classifier: &'static str,
    pub k: Option<usize>,
    pub digest: String,
    pub outcome: std::result::Result<EvalReport, String>,
    pub total_features: usize,
    pub selected_features: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GridResult {
    pub rows: Vec<ResultRow>,
    /// Fitted pipeline per row; `None` for error rows.
    pub pipelines: Vec<Option<Pipeline>>,
    pub histories: Vec<Option<TrainHistory>>,
}

/// Runs every block (in parallel); rows keep configuration order. A failing
/// block contributes one error row and the grid carries on.
pub fn run_grid(train: &Corpus, test: &Corpus, resources: &Resources, grid: &GridConfig) -> Result<GridResult> {
    if grid.experiment.is_empty() {
        return Err(Error::Config("grid has no experiments".into()));
    }
    let outcomes: Vec<_> = grid
        .experiment
        .par_iter()
        .map(|cfg| {
            let seed = grid.seed_for(cfg);
            (cfg, seed, run_config(train, test, resources, cfg, seed))
        })
        .collect();

    let mut result = GridResult::default();
    for (cfg, seed, outcome) in outcomes {
        let block = cfg.block_label();
        let classifier = cfg.classifier.kind();
        match outcome {
            Ok(outputs) => {
                for out in outputs {
                    result.rows.push(ResultRow {
                        sn: result.rows.len() + 1,
                        block: block.clone(),
                        classifier,
                        k: out.k,
                        digest: config_digest(cfg, seed, out.k),
                        outcome: Ok(out.report),
                        total_features: out.total_features,
                        selected_features: out.selected_features,
                        seconds: out.seconds,
                    });
                    result.pipelines.push(Some(out.pipeline));
                    result.histories.push(out.history);
                }
            }
            Err(e) => {
                log::error!("experiment `{block}` failed: {e}");
                result.rows.push(ResultRow {
                    sn: result.rows.len() + 1,
                    block,
                    classifier,
                    k: None,
                    digest: config_digest(cfg, seed, None),
                    outcome: Err(e.to_string()),
                    total_features: 0,
                    selected_features: 0,
                    seconds: 0.0,
                });
                result.pipelines.push(None);
                result.histories.push(None);
            }
        }
    }
    Ok(result)
}

pub const TSV_HEADER: [&str; 16] = [
    "sn",
    "block",
    "classifier",
    "k",
    "prec_fake",
    "rec_fake",
    "f1_fake",
    "prec_real",
    "rec_real",
    "f1_real",
    "f1_macro",
    "accuracy",
    "total_features",
    "selected_features",
    "digest",
    "status",
];

fn k_cell(row: &ResultRow) -> String {
    match (row.classifier, row.k) {
        (_, Some(k)) => k.to_string(),
        ("svm", None) => "all".into(),
        _ => "-".into(),
    }
}

fn one_line(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Wall-clock time is left out so equal runs give equal bytes; see
/// [`render_timings`].
pub fn render_tsv(rows: &[ResultRow]) -> String {
    let mut out = TSV_HEADER.join("\t");
    out.push('\n');
    for r in rows {
        let metrics = match &r.outcome {
            Ok(rep) => rep.tsv_fields(),
            Err(_) => vec!["-"; 8].join("\t"),
        };
        let status = match &r.outcome {
            Ok(_) => "ok".to_owned(),
            Err(e) => format!("error: {}", one_line(e)),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.sn,
            one_line(&r.block),
            r.classifier,
            k_cell(r),
            metrics,
            r.total_features,
            r.selected_features,
            r.digest,
            status
        );
    }
    out
}

pub fn render_timings(rows: &[ResultRow]) -> String {
    let mut out = String::from("sn\tseconds\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{:.3}", r.sn, r.seconds);
    }
    out
}

/// Rank 1..=3 of each row's rounded f1_macro among distinct rounded values.
pub fn f1_ranks(rows: &[ResultRow]) -> Vec<Option<usize>> {
    let rounded = |r: &ResultRow| r.outcome.as_ref().ok().map(|rep| fmt4(rep.f1_macro));
    let mut distinct: Vec<String> = rows.iter().filter_map(rounded).collect();
    // fixed-width 4 dp strings of values in [0, 1] order like the numbers
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    distinct.dedup();
    distinct.truncate(3);
    rows.iter()
        .map(|r| rounded(r).and_then(|v| distinct.iter().position(|d| *d == v).map(|p| p + 1)))
        .collect()
}

fn flag(value: String, rank: Option<usize>) -> String {
    match rank {
        Some(1) => format!("**<u>{value}</u>**"),
        Some(2) => format!("<u>{value}</u>"),
        Some(3) => format!("*{value}*"),
        _ => value,
    }
}

/// Column-aligned Markdown table, one header row per block.
pub fn render_markdown(rows: &[ResultRow]) -> String {
    const HEAD: [&str; 11] = [
        "SN", "K", "Prec Fake", "Rec Fake", "F1 Fake", "Prec Real", "Rec Real", "F1 Real", "F1 Macro", "Accuracy",
        "Features",
    ];
    let ranks = f1_ranks(rows);
    let mut body: Vec<Vec<String>> = Vec::new();
    let mut block: Option<&str> = None;
    for (r, rank) in rows.iter().zip(ranks) {
        if block != Some(r.block.as_str()) {
            block = Some(&r.block);
            let mut header = vec![String::new(); HEAD.len()];
            header[1] = format!("**{} ({} features)**", one_line(&r.block), r.total_features);
            body.push(header);
        }
        let mut cells = vec![r.sn.to_string(), k_cell(r)];
        match &r.outcome {
            Ok(rep) => {
                let cols = rep.columns();
                cells.extend(cols[..6].iter().map(|&v| fmt4(v)));
                cells.push(flag(fmt4(rep.f1_macro), rank));
                cells.push(fmt4(rep.accuracy));
                cells.push(r.selected_features.to_string());
            }
            Err(e) => {
                cells.extend(std::iter::repeat("-".to_owned()).take(8));
                cells.push(format!("error: {}", one_line(e)));
            }
        }
        body.push(cells);
    }
    let mut widths: Vec<usize> = HEAD.iter().map(|h| h.chars().count()).collect();
    for cells in &body {
        for (w, c) in widths.iter_mut().zip(cells) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };

    let mut out = String::from(
        "Best F1 Macro is bold and underlined, second best underlined, third best italic.\n\n",
    );
    out.push_str(&line(&HEAD.map(String::from)));
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&line(&rule));
    for cells in &body {
        out.push_str(&line(cells));
    }
    out
}

/// Writes `results.tsv`, `results.md`, `timings.tsv`, and optionally
/// `models/row-NNN.ufnd` plus CNN `history/row-NNN.tsv` files.
pub fn write_outputs(out_dir: &Path, result: &GridResult, save_models: bool) -> Result<()> {
    let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    let write = |p: &Path, s: String| std::fs::write(p, s).map_err(|e| Error::io(p, e));
    mkdir(out_dir)?;
    write(&out_dir.join("results.tsv"), render_tsv(&result.rows))?;
    write(&out_dir.join("results.md"), render_markdown(&result.rows))?;
    write(&out_dir.join("timings.tsv"), render_timings(&result.rows))?;
    if save_models {
        let models = out_dir.join("models");
        mkdir(&models)?;
        for (row, p) in result.rows.iter().zip(&result.pipelines) {
            if let Some(p) = p {
                save_model(models.join(format!("row-{:03}.ufnd", row.sn)), p)?;
            }
        }
    }
    if result.histories.iter().any(Option::is_some) {
        let dir = out_dir.join("history");
        mkdir(&dir)?;
        for (row, h) in result.rows.iter().zip(&result.histories) {
            if let Some(h) = h {
                let mut buf = Vec::new();
                h.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
                write(&dir.join(format!("row-{:03}.tsv", row.sn)), String::from_utf8(buf).expect("ascii"))?;
            }
        }
    }
    Ok(())
}
