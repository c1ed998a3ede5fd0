//! End-to-end reruns of the classifier tables: clean, sample, split,
//! featurize, train every kind, evaluate on the held-out side.

use std::path::PathBuf;
use std::time::Instant;

use dupliq_core::corpus::{self, PairTable};
use dupliq_core::featmat::{self, DropList};
use dupliq_core::tfidf::Analyzer;
use dupliq_learn::{evaluate, train, ClassifierSpec, Kind, Metrics};
use serde::Serialize;
use serde_json::json;

use crate::args::{Embeddings, Table};
use crate::commands::{drop_list, fit_tfidf};
use crate::config::{require, set, ExperimentConfig};
use crate::data::{self, LabeledMatrix};
use crate::error::CliResult;
use crate::report::{fmt4, table};
use crate::Outcome;

/// Published (accuracy, F1) on the full data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reference {
    pub accuracy: f64,
    pub f1: f64,
}

const fn r(accuracy: f64, f1: f64) -> Reference {
    Reference { accuracy, f1 }
}

/// Engineered features, all 28 columns.
pub fn table5(kind: Kind) -> Reference {
    match kind {
        Kind::Knn => r(0.7275, 0.7031),
        Kind::Adaboost => r(0.7041, 0.6936),
        Kind::Xgb => r(0.7417, 0.7326),
        Kind::Gbm => r(0.7271, 0.7176),
        Kind::DecisionTree => r(0.7054, 0.6992),
        Kind::RandomForest => r(0.7099, 0.7016),
        Kind::ExtraTrees => r(0.7039, 0.6849),
    }
}

/// Engineered features without the eight low-importance columns.
pub fn table6(kind: Kind) -> Reference {
    match kind {
        Kind::Knn => r(0.7311, 0.7076),
        Kind::Adaboost => r(0.7048, 0.6938),
        Kind::Xgb => r(0.7431, 0.7349),
        Kind::Gbm => r(0.7289, 0.7196),
        Kind::DecisionTree => r(0.7054, 0.6992),
        Kind::RandomForest => r(0.7085, 0.7021),
        Kind::ExtraTrees => r(0.7069, 0.6914),
    }
}

/// TF-IDF pair vectors.
pub fn table7(kind: Kind, analyzer: Analyzer) -> Reference {
    match (analyzer, kind) {
        (Analyzer::Word, Kind::Knn) => r(0.7513, 0.7359),
        (Analyzer::Word, Kind::Adaboost) => r(0.6883, 0.6076),
        (Analyzer::Word, Kind::Xgb) => r(0.7881, 0.7596),
        (Analyzer::Word, Kind::Gbm) => r(0.6756, 0.5339),
        (Analyzer::Word, Kind::DecisionTree) => r(0.6677, 0.5651),
        (Analyzer::Word, Kind::RandomForest) => r(0.6284, 0.3866),
        (Analyzer::Word, Kind::ExtraTrees) => r(0.6281, 0.3864),
        (Analyzer::Char, Kind::Knn) => r(0.7845, 0.7543),
        (Analyzer::Char, Kind::Adaboost) => r(0.6871, 0.6201),
        (Analyzer::Char, Kind::Xgb) => r(0.8244, 0.8044),
        (Analyzer::Char, Kind::Gbm) => r(0.6951, 0.6009),
        (Analyzer::Char, Kind::DecisionTree) => r(0.6672, 0.5767),
        (Analyzer::Char, Kind::RandomForest) => r(0.6484, 0.4066),
        (Analyzer::Char, Kind::ExtraTrees) => r(0.6581, 0.4059),
    }
}

/// Row order of the published tables.
pub const TABLE_ORDER: [Kind; 7] = [
    Kind::Knn,
    Kind::Adaboost,
    Kind::Xgb,
    Kind::Gbm,
    Kind::DecisionTree,
    Kind::RandomForest,
    Kind::ExtraTrees,
];

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub kind: Kind,
    pub metrics: Metrics,
    pub reference: Reference,
}

pub struct ReproduceArgs {
    pub table: Table,
    pub data: Option<PathBuf>,
    pub embeddings: Embeddings,
    pub sample: Option<usize>,
    pub test_fraction: Option<f64>,
    pub kinds: Vec<Kind>,
    pub max_features: Option<usize>,
}

fn run_kinds(
    kinds: &[Kind],
    seed: u64,
    train_m: &LabeledMatrix,
    test_m: &LabeledMatrix,
    reference: impl Fn(Kind) -> Reference,
    label: &str,
) -> CliResult<Vec<Row>> {
    let mut rows = Vec::new();
    for &kind in kinds {
        let start = Instant::now();
        let spec = ClassifierSpec::new(kind).with_seed(seed);
        let model = train(&spec, &train_m.matrix, &train_m.labels)?;
        let metrics = evaluate(&model, &test_m.matrix, &test_m.labels)?;
        eprintln!(
            "{label} {kind}: accuracy {:.4} ({:.1}s)",
            metrics.accuracy,
            start.elapsed().as_secs_f64()
        );
        rows.push(Row {
            kind,
            metrics,
            reference: reference(kind),
        });
    }
    Ok(rows)
}

fn rows_table(rows: &[Row], extra: Option<(&str, &[Row])>) -> String {
    let mut header = vec!["classifier", "accuracy", "f1", "paper_acc", "paper_f1"];
    if let Some((name, _)) = extra {
        header.push(name);
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut cells = vec![
                row.kind.to_string(),
                fmt4(row.metrics.accuracy),
                fmt4(row.metrics.f1),
                fmt4(row.reference.accuracy),
                fmt4(row.reference.f1),
            ];
            if let Some((_, base)) = extra {
                cells.push(format!("{:+.4}", row.metrics.accuracy - base[i].metrics.accuracy));
            }
            cells
        })
        .collect();
    table(&header, &body)
}

fn prepare(cfg: &ExperimentConfig, seed: u64) -> CliResult<(usize, usize, PairTable, PairTable)> {
    let raw = data::load_table(require(&cfg.paths.data, "--data")?)?;
    let cleaned = corpus::clean(&raw);
    let sampled = match cfg.sample {
        Some(n) => corpus::stratified_sample(&cleaned, n, seed)?,
        None => cleaned.clone(),
    };
    let (tr, te) = corpus::stratified_split(&sampled, cfg.test_fraction, seed)?;
    Ok((raw.len(), cleaned.len(), tr, te))
}

pub fn reproduce(cfg: &mut ExperimentConfig, a: ReproduceArgs) -> CliResult<Outcome> {
    set(&mut cfg.paths.data, a.data);
    set(&mut cfg.paths.glove, a.embeddings.glove);
    set(&mut cfg.paths.word2vec, a.embeddings.word2vec);
    set(&mut cfg.sample, a.sample);
    if let Some(f) = a.test_fraction {
        cfg.test_fraction = f;
    }
    if let Some(m) = a.max_features {
        cfg.tfidf.max_features = m;
    }
    if a.table == Table::Table6 && cfg.drop.is_empty() {
        cfg.drop = DropList::low_importance().names().map(str::to_string).collect();
    }
    let seed = cfg.require_seed("reproduce")?;
    let kinds: Vec<Kind> = if a.kinds.is_empty() {
        TABLE_ORDER.to_vec()
    } else {
        TABLE_ORDER.into_iter().filter(|k| a.kinds.contains(k)).collect()
    };
    require(&cfg.paths.data, "--data")?;
    // Fail on missing vectors before the slow part.
    let embeddings = match a.table {
        Table::Table7 => None,
        _ => Some(data::load_embeddings(&cfg.paths, "reproduce")?),
    };
    let (raw, cleaned, tr, te) = prepare(cfg, seed)?;
    let mut result = json!({
        "table": a.table.name(),
        "pairs": { "loaded": raw, "cleaned": cleaned, "train": tr.len(), "test": te.len() },
    });
    let text = match a.table {
        Table::Table5 | Table::Table6 => {
            let emb = embeddings.expect("loaded above");
            let full_train = featmat::extract_matrix(&tr, &emb);
            let full_test = featmat::extract_matrix(&te, &emb);
            let full = (
                LabeledMatrix::from_features(&full_train)?,
                LabeledMatrix::from_features(&full_test)?,
            );
            if a.table == Table::Table5 {
                let rows = run_kinds(&kinds, seed, &full.0, &full.1, table5, "table5")?;
                result["features"] = json!(full_train.column_names());
                result["rows"] = json!(rows);
                rows_table(&rows, None)
            } else {
                let drops = drop_list(cfg)?;
                let kept_train = featmat::drop_features(&full_train, &drops)?;
                let kept = (
                    LabeledMatrix::from_features(&kept_train)?,
                    LabeledMatrix::from_features(&featmat::drop_features(&full_test, &drops)?)?,
                );
                let base = run_kinds(&kinds, seed, &full.0, &full.1, table5, "table6 baseline")?;
                let rows = run_kinds(&kinds, seed, &kept.0, &kept.1, table6, "table6")?;
                let deltas: Vec<_> = rows
                    .iter()
                    .zip(&base)
                    .map(|(r, b)| json!({ "kind": r.kind, "accuracy_delta": r.metrics.accuracy - b.metrics.accuracy }))
                    .collect();
                result["features"] = json!(kept_train.column_names());
                result["dropped"] = json!(cfg.drop);
                result["rows"] = json!(rows);
                result["baseline_rows"] = json!(base);
                result["deltas"] = json!(deltas);
                rows_table(&rows, Some(("vs_all_28", &base)))
            }
        }
        Table::Table7 => {
            let mut out = String::new();
            let mut sections = serde_json::Map::new();
            for analyzer in [Analyzer::Word, Analyzer::Char] {
                let model = fit_tfidf(cfg, analyzer, &tr)?;
                let train_m = LabeledMatrix::from_tfidf(&model, &tr)?;
                let test_m = LabeledMatrix::from_tfidf(&model, &te)?;
                let name = match analyzer {
                    Analyzer::Word => "word",
                    Analyzer::Char => "char",
                };
                let rows = run_kinds(&kinds, seed, &train_m, &test_m, |k| table7(k, analyzer), name)?;
                out.push_str(&format!(
                    "{name} n-grams {:?}, {} terms\n",
                    model.ngram_range(),
                    model.dim()
                ));
                out.push_str(&rows_table(&rows, None));
                out.push('\n');
                sections.insert(
                    name.into(),
                    json!({ "ngram_range": model.ngram_range(), "terms": model.dim(), "rows": rows }),
                );
            }
            result["analyzers"] = serde_json::Value::Object(sections);
            out
        }
    };
    Ok(Outcome::ok(result, text))
}
