//! Corpus, feature and classifier commands.

use std::path::PathBuf;

use dupliq_core::corpus::{self, corpus_stats};
use dupliq_core::featmat::{self, DropList};
use dupliq_core::tfidf::{self, Analyzer, TfidfModel};
use dupliq_learn::spec::Hyperparameters;
use dupliq_learn::{evaluate, feature_importance, grid_search, train, ClassifierModel, ClassifierSpec, Kind};
use serde_json::{json, Map, Value};

use crate::config::{require, set, ExperimentConfig};
use crate::data::{self, LabeledMatrix};
use crate::error::{CliError, CliResult};
use crate::report::{fmt4, table};
use crate::Outcome;

pub fn stats(cfg: &mut ExperimentConfig, data: Option<PathBuf>, clean: bool) -> CliResult<Outcome> {
    set(&mut cfg.paths.data, data);
    let mut t = data::load_table(require(&cfg.paths.data, "--data")?)?;
    let loaded = t.len();
    if clean {
        t = corpus::clean(&t);
    }
    let s = corpus_stats(&t);
    let hist = s.occurrence_histogram();
    let rows = vec![
        vec!["pairs".into(), s.total_pairs.to_string()],
        vec!["duplicates".into(), s.positives.to_string()],
        vec!["non-duplicates".into(), s.negatives.to_string()],
        vec!["distinct questions".into(), s.distinct_questions().to_string()],
        vec!["avg length q1".into(), format!("{:.2}", s.avg_len_q1)],
        vec!["avg length q2".into(), format!("{:.2}", s.avg_len_q2)],
        vec!["total length q1".into(), s.sum_len_q1.to_string()],
        vec!["total length q2".into(), s.sum_len_q2.to_string()],
        vec!["max length q1".into(), s.max_len_q1.to_string()],
        vec!["max length q2".into(), s.max_len_q2.to_string()],
        vec!["short q1".into(), s.short_q1.to_string()],
        vec!["short q2".into(), s.short_q2.to_string()],
    ];
    let histogram: Map<String, Value> = hist.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    Ok(Outcome::ok(
        json!({
            "loaded_pairs": loaded,
            "cleaned": clean,
            "stats": s,
            "distinct_questions": s.distinct_questions(),
            "occurrence_histogram": histogram,
        }),
        table(&["statistic", "value"], &rows),
    ))
}

pub fn clean(cfg: &mut ExperimentConfig, data: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<Outcome> {
    set(&mut cfg.paths.data, data);
    set(&mut cfg.paths.out, out);
    let t = data::load_table(require(&cfg.paths.data, "--data")?)?;
    let out = require(&cfg.paths.out, "--out")?;
    let cleaned = corpus::clean(&t);
    corpus::save_pairs(&cleaned, out)?;
    let removed = t.len() - cleaned.len();
    Ok(Outcome::ok(
        json!({ "input_pairs": t.len(), "output_pairs": cleaned.len(), "removed": removed }),
        format!("{} pairs in, {} out, {removed} removed\n", t.len(), cleaned.len()),
    ))
}

pub fn split(
    cfg: &mut ExperimentConfig,
    data: Option<PathBuf>,
    test_fraction: Option<f64>,
    train_out: Option<PathBuf>,
    test_out: Option<PathBuf>,
) -> CliResult<Outcome> {
    set(&mut cfg.paths.data, data);
    set(&mut cfg.paths.train_out, train_out);
    set(&mut cfg.paths.test_out, test_out);
    if let Some(f) = test_fraction {
        cfg.test_fraction = f;
    }
    let seed = cfg.require_seed("split")?;
    let t = data::load_table(require(&cfg.paths.data, "--data")?)?;
    let train_path = require(&cfg.paths.train_out, "--train-out")?;
    let test_path = require(&cfg.paths.test_out, "--test-out")?;
    let (tr, te) = corpus::stratified_split(&t, cfg.test_fraction, seed)?;
    corpus::save_pairs(&tr, train_path)?;
    corpus::save_pairs(&te, test_path)?;
    let pos = |x: &corpus::PairTable| x.rows().iter().filter(|r| r.is_positive()).count();
    Ok(Outcome::ok(
        json!({
            "train": { "pairs": tr.len(), "positives": pos(&tr) },
            "test": { "pairs": te.len(), "positives": pos(&te) },
        }),
        table(
            &["side", "pairs", "positives"],
            &[
                vec!["train".into(), tr.len().to_string(), pos(&tr).to_string()],
                vec!["test".into(), te.len().to_string(), pos(&te).to_string()],
            ],
        ),
    ))
}

pub fn drop_list(cfg: &ExperimentConfig) -> CliResult<DropList> {
    Ok(DropList::new(&cfg.drop)?)
}

pub fn featurize(
    cfg: &mut ExperimentConfig,
    data: Option<PathBuf>,
    embeddings: crate::args::Embeddings,
    out: Option<PathBuf>,
    drop: Vec<String>,
    drop_low_importance: bool,
) -> CliResult<Outcome> {
    set(&mut cfg.paths.data, data);
    set(&mut cfg.paths.glove, embeddings.glove);
    set(&mut cfg.paths.word2vec, embeddings.word2vec);
    set(&mut cfg.paths.out, out);
    if !drop.is_empty() {
        cfg.drop = drop;
    }
    if drop_low_importance {
        let all = drop_list(cfg)?.union(&DropList::low_importance());
        cfg.drop = all.names().map(str::to_string).collect();
    }
    let drops = drop_list(cfg)?;
    let data_path = require(&cfg.paths.data, "--data")?;
    let out = require(&cfg.paths.out, "--out")?;
    let emb = data::load_embeddings(&cfg.paths, "featurize")?;
    let t = data::load_table(data_path)?;
    let m = featmat::drop_features(&featmat::extract_matrix(&t, &emb), &drops)?;
    featmat::save_matrix(&m, out)?;
    Ok(Outcome::ok(
        json!({ "rows": m.n_rows(), "columns": m.column_names() }),
        format!("{} rows × {} features written\n", m.n_rows(), m.n_cols()),
    ))
}

pub fn fit_tfidf(cfg: &ExperimentConfig, analyzer: Analyzer, t: &corpus::PairTable) -> CliResult<TfidfModel> {
    Ok(tfidf::fit(
        &data::question_corpus(t),
        analyzer,
        cfg.tfidf.range_for(analyzer),
        cfg.tfidf.max_features,
    )?)
}

pub fn tfidf_fit(
    cfg: &mut ExperimentConfig,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    analyzer: Option<Analyzer>,
    ngram: Option<(usize, usize)>,
    max_features: Option<usize>,
) -> CliResult<Outcome> {
    set(&mut cfg.paths.data, data);
    set(&mut cfg.paths.out, out);
    if let Some(a) = analyzer {
        cfg.tfidf.analyzer = a;
    }
    set(&mut cfg.tfidf.ngram_range, ngram);
    if let Some(m) = max_features {
        cfg.tfidf.max_features = m;
    }
    let t = data::load_table(require(&cfg.paths.data, "--data")?)?;
    let out = require(&cfg.paths.out, "--out")?;
    let model = fit_tfidf(cfg, cfg.tfidf.analyzer, &t)?;
    model.save(out)?;
    Ok(Outcome::ok(
        json!({ "terms": model.dim(), "ngram_range": model.ngram_range() }),
        format!("{} terms kept\n", model.dim()),
    ))
}

pub fn tfidf_featurize(
    cfg: &mut ExperimentConfig,
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
) -> CliResult<Outcome> {
    set(&mut cfg.paths.model, model);
    set(&mut cfg.paths.data, data);
    set(&mut cfg.paths.out, out);
    let model = TfidfModel::load(require(&cfg.paths.model, "--model")?)?;
    let t = data::load_table(require(&cfg.paths.data, "--data")?)?;
    let out = require(&cfg.paths.out, "--out")?;
    let m = LabeledMatrix::from_tfidf(&model, &t)?;
    data::save_features(&m, out)?;
    Ok(Outcome::ok(
        json!({ "rows": m.matrix.n_rows(), "columns": m.matrix.n_cols() }),
        format!("{} rows × {} sparse columns written\n", m.matrix.n_rows(), m.matrix.n_cols()),
    ))
}

/// `NAME=VALUE` pairs become hyperparameters; values are read as JSON
/// when they parse, otherwise as strings.
fn parse_settings(settings: &[String]) -> CliResult<Hyperparameters> {
    let mut obj = Map::new();
    for s in settings {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Contract(format!("--set expects NAME=VALUE, got {s:?}")))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.into()));
        obj.insert(k.trim().into(), value);
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Contract(format!("--set: {e}")))
}

fn metrics_row(label: &str, m: &dupliq_learn::Metrics) -> Vec<String> {
    vec![
        label.into(),
        fmt4(m.accuracy),
        fmt4(m.precision),
        fmt4(m.recall),
        fmt4(m.f1),
        fmt4(m.log_loss),
    ]
}

const METRIC_HEADER: [&str; 6] = ["model", "accuracy", "precision", "recall", "f1", "log_loss"];

pub fn train_cmd(
    cfg: &mut ExperimentConfig,
    features: Option<PathBuf>,
    kind: Option<Kind>,
    settings: Vec<String>,
    out: Option<PathBuf>,
) -> CliResult<Outcome> {
    set(&mut cfg.paths.features, features);
    set(&mut cfg.paths.out, out);
    if let Some(kind) = kind {
        cfg.classifier = Some(ClassifierSpec {
            kind,
            hyperparameters: parse_settings(&settings)?,
        });
    } else if !settings.is_empty() {
        let spec = cfg
            .classifier
            .as_mut()
            .ok_or_else(|| CliError::Contract("--set needs --kind or a config classifier".into()))?;
        let mut base = serde_json::to_value(&spec.hyperparameters).expect("serialisable");
        let extra = serde_json::to_value(parse_settings(&settings)?).expect("serialisable");
        if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
            b.extend(e);
        }
        spec.hyperparameters = serde_json::from_value(base).map_err(|e| CliError::Contract(e.to_string()))?;
    }
    let seed = cfg.require_seed("train")?;
    let spec = cfg
        .classifier
        .as_mut()
        .ok_or_else(|| CliError::Contract("missing --kind (or classifier in the config)".into()))?;
    spec.hyperparameters.seed.get_or_insert(seed);
    let spec = spec.clone();
    let m = data::load_features(require(&cfg.paths.features, "--features")?)?;
    let out = require(&cfg.paths.out, "--out")?;
    let model = train(&spec, &m.matrix, &m.labels)?;
    model.save(out)?;
    let fit = evaluate(&model, &m.matrix, &m.labels)?;
    Ok(Outcome::ok(
        json!({ "spec": spec, "rows": m.labels.len(), "train_metrics": fit }),
        table(&METRIC_HEADER, &[metrics_row(&format!("{} (train)", spec.kind), &fit)]),
    ))
}

pub fn eval_cmd(cfg: &mut ExperimentConfig, model: Option<PathBuf>, features: Option<PathBuf>) -> CliResult<Outcome> {
    set(&mut cfg.paths.model, model);
    set(&mut cfg.paths.features, features);
    let model = ClassifierModel::load(require(&cfg.paths.model, "--model")?)?;
    let m = data::load_features(require(&cfg.paths.features, "--features")?)?;
    let metrics = evaluate(&model, &m.matrix, &m.labels)?;
    Ok(Outcome::ok(
        json!({ "kind": model.kind(), "rows": m.labels.len(), "metrics": metrics }),
        table(&METRIC_HEADER, &[metrics_row(model.kind().name(), &metrics)]),
    ))
}

pub fn importance_cmd(
    cfg: &mut ExperimentConfig,
    model: Option<PathBuf>,
    features: Option<PathBuf>,
) -> CliResult<Outcome> {
    set(&mut cfg.paths.model, model);
    set(&mut cfg.paths.features, features);
    let model = ClassifierModel::load(require(&cfg.paths.model, "--model")?)?;
    let m = data::load_features(require(&cfg.paths.features, "--features")?)?;
    let report = feature_importance(&model, &m.matrix, &m.labels, &m.column_names())?;
    let rows: Vec<Vec<String>> = report
        .features
        .iter()
        .enumerate()
        .map(|(i, (name, w))| vec![(i + 1).to_string(), name.clone(), format!("{w:.6}")])
        .collect();
    Ok(Outcome::ok(
        serde_json::to_value(&report).expect("serialisable"),
        table(&["rank", "feature", "weight"], &rows),
    ))
}

pub fn grid_cmd(
    cfg: &mut ExperimentConfig,
    features: Option<PathBuf>,
    grid: Option<PathBuf>,
    val_fraction: Option<f64>,
    out: Option<PathBuf>,
) -> CliResult<Outcome> {
    set(&mut cfg.paths.features, features);
    set(&mut cfg.paths.out, out);
    if let Some(v) = val_fraction {
        cfg.val_fraction = v;
    }
    if let Some(path) = grid {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        cfg.grid = serde_json::from_str(&text).map_err(|e| CliError::Contract(format!("{}: {e}", path.display())))?;
    }
    let seed = cfg.require_seed("grid")?;
    if cfg.grid.is_empty() {
        return Err(CliError::Contract("missing --grid (or grid in the config)".into()));
    }
    for spec in &mut cfg.grid {
        spec.hyperparameters.seed.get_or_insert(seed);
    }
    let m = data::load_features(require(&cfg.paths.features, "--features")?)?;
    let result = grid_search(&cfg.grid, &m.matrix, &m.labels, cfg.val_fraction, seed)?;
    if let Some(out) = &cfg.paths.out {
        train(&result.best, &m.matrix, &m.labels)?.save(out)?;
    }
    let rows: Vec<Vec<String>> = result
        .scores
        .iter()
        .enumerate()
        .map(|(i, (spec, acc))| {
            let params = serde_json::to_string(&spec.hyperparameters).expect("serialisable");
            let mark = if i == result.best_index { "*" } else { "" };
            vec![format!("{i}{mark}"), spec.kind.to_string(), params, fmt4(*acc)]
        })
        .collect();
    Ok(Outcome::ok(
        serde_json::to_value(&result).expect("serialisable"),
        table(&["#", "kind", "hyperparameters", "val_accuracy"], &rows),
    ))
}
