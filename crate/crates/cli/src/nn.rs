//! Network commands.

use std::path::PathBuf;

use dupliq_core::corpus::{self, PairTable};
use dupliq_core::embed;
use dupliq_neural::{
    architecture_spec, build_architecture, evaluate_network, gradient_check, train_network, Dims, GradCheckOptions,
    Network, Tensor, TrainConfig, Vocabulary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{set, ExperimentConfig};
use crate::data;
use crate::error::{CliError, CliResult};
use crate::report::{fmt4, table};
use crate::Outcome;

/// Toy preset: short sequences, 8-wide embeddings, small batches.
const TOY_SEQ: usize = 5;
const TOY_DIM: usize = 8;
const TOY_BATCH: usize = 20;
const TOY_PAIRS: usize = 200;
/// Word ids 1..=8 for duplicates, 9..=16 otherwise, plus padding.
const TOY_VOCAB: usize = 17;
const FULL_VOCAB: usize = 1000;

fn resolve_dims(cfg: &mut ExperimentConfig) -> Dims {
    let toy = cfg.nn.toy;
    cfg.nn
        .dims
        .get_or_insert_with(|| if toy { Dims::toy(TOY_SEQ, TOY_DIM) } else { Dims::default() })
        .clone()
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect();
    Tensor::new(vec![rows, cols], data).expect("sized")
}

/// Pairs whose words come from disjoint ranges by label; trivially
/// separable, so a working network fits them.
pub fn separable_pairs(n: usize, seq: usize, seed: u64) -> (Tensor, Tensor, Vec<u8>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (mut q1, mut q2, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let label = (i % 2) as u8;
        let lo = if label == 1 { 1 } else { 9 };
        let mut q = || -> Vec<u32> {
            let len = r.gen_range(2.min(seq)..=seq);
            let mut s: Vec<u32> = (0..len).map(|_| r.gen_range(lo..lo + 8)).collect();
            s.resize(seq, 0);
            s
        };
        q1.push(q());
        q2.push(q());
        y.push(label);
    }
    (
        Tensor::from_indices(&q1).expect("equal lengths"),
        Tensor::from_indices(&q2).expect("equal lengths"),
        y,
    )
}

fn describe(net: &Network) -> (serde_json::Value, String) {
    let count = net.param_count();
    let mut rows = Vec::new();
    let mut layers = Vec::new();
    for (i, layer) in net.layers().iter().enumerate() {
        let (trainable, frozen) = layer.spec().param_count();
        rows.push(vec![
            i.to_string(),
            layer.spec().kind().to_string(),
            trainable.to_string(),
            frozen.to_string(),
        ]);
        layers.push(json!({ "kind": layer.spec().kind(), "trainable": trainable, "non_trainable": frozen }));
    }
    let mut text = table(&["layer", "kind", "trainable", "non_trainable"], &rows);
    text.push_str(&format!(
        "branches {}  merge width {}  params {} ({} trainable, {} non-trainable)\n",
        net.n_branches(),
        net.merge_width(),
        count.total(),
        count.trainable,
        count.non_trainable
    ));
    let value = json!({
        "branches": net.n_branches(),
        "merge_width": net.merge_width(),
        "layer_kinds": net.spec().layer_kinds(),
        "layers": layers,
        "params": { "trainable": count.trainable, "non_trainable": count.non_trainable, "total": count.total() },
    });
    (value, text)
}

fn load_vocab_source(cfg: &ExperimentConfig) -> CliResult<Option<PairTable>> {
    cfg.paths.data.as_deref().map(data::load_table).transpose()
}

fn fit_vocab(t: &PairTable) -> Vocabulary {
    Vocabulary::fit(t.rows().iter().flat_map(|r| [r.question1.as_str(), r.question2.as_str()]))
}

/// Pre-trained rows for layouts 2–4: from GloVe when given, seeded random
/// vectors otherwise.
fn pretrained(
    cfg: &mut ExperimentConfig,
    arch: u8,
    vocab: Option<&Vocabulary>,
    vocab_size: usize,
    seed: u64,
) -> CliResult<(Option<Tensor>, &'static str)> {
    if arch < 2 {
        return Ok((None, "none"));
    }
    match (&cfg.paths.glove, vocab) {
        (Some(path), Some(v)) => {
            let table = embed::load_glove_text(path)?;
            if let Some(d) = cfg.nn.dims.as_mut() {
                d.embed_dim = table.dim();
            }
            Ok((Some(v.pretrained_matrix(&table)?), "glove"))
        }
        (Some(_), None) => Err(CliError::Contract("--glove needs --data to build the vocabulary".into())),
        (None, _) => {
            let dim = cfg.nn.dims.as_ref().expect("resolved").embed_dim;
            Ok((Some(random_matrix(vocab_size, dim, seed ^ 0x9e37_79b9)), "random"))
        }
    }
}

fn set_arch(cfg: &mut ExperimentConfig, arch: Option<u8>) -> CliResult<u8> {
    if let Some(a) = arch {
        cfg.nn.arch = a;
    }
    if !(1..=4).contains(&cfg.nn.arch) {
        return Err(CliError::Contract(format!("--arch must be 1, 2, 3 or 4, got {}", cfg.nn.arch)));
    }
    Ok(cfg.nn.arch)
}

pub struct BuildArgs {
    pub arch: Option<u8>,
    pub toy: bool,
    pub vocab_size: Option<usize>,
    pub data: Option<PathBuf>,
    pub glove: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn build(cfg: &mut ExperimentConfig, a: BuildArgs) -> CliResult<Outcome> {
    let arch = set_arch(cfg, a.arch)?;
    cfg.nn.toy |= a.toy;
    set(&mut cfg.nn.vocab_size, a.vocab_size);
    set(&mut cfg.paths.data, a.data);
    set(&mut cfg.paths.glove, a.glove);
    set(&mut cfg.paths.out, a.out);
    let seed = cfg.require_seed("nn-build")?;
    resolve_dims(cfg);
    let vocab = load_vocab_source(cfg)?.map(|t| fit_vocab(&t));
    let vocab_size = match &vocab {
        Some(v) => v.size(),
        None => cfg.nn.vocab_size.unwrap_or(if cfg.nn.toy { TOY_VOCAB } else { FULL_VOCAB }),
    };
    cfg.nn.vocab_size = Some(vocab_size);
    let (matrix, source) = pretrained(cfg, arch, vocab.as_ref(), vocab_size, seed)?;
    let dims = cfg.nn.dims.clone().expect("resolved");
    let net = build_architecture(arch, vocab_size, matrix.as_ref(), Some(dims), seed)?;
    if let Some(out) = &cfg.paths.out {
        net.save(out)?;
        if let Some(v) = &vocab {
            let text = serde_json::to_string(v).expect("serialisable");
            data::write_file(&out.with_extension("vocab.json"), &text)?;
        }
    }
    let (mut value, text) = describe(&net);
    value["arch"] = json!(arch);
    value["vocab_size"] = json!(vocab_size);
    value["pretrained"] = json!(source);
    Ok(Outcome::ok(value, format!("architecture {arch}\n{text}")))
}

pub struct TrainArgs {
    pub arch: Option<u8>,
    pub toy: bool,
    pub data: Option<PathBuf>,
    pub glove: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub out: Option<PathBuf>,
}

pub fn train(cfg: &mut ExperimentConfig, a: TrainArgs) -> CliResult<Outcome> {
    let arch = set_arch(cfg, a.arch)?;
    cfg.nn.toy |= a.toy;
    set(&mut cfg.paths.data, a.data);
    set(&mut cfg.paths.glove, a.glove);
    set(&mut cfg.paths.out, a.out);
    let seed = cfg.require_seed("nn-train")?;
    if cfg.nn.toy && cfg.nn.train.batch_size == TrainConfig::default().batch_size {
        cfg.nn.train.batch_size = TOY_BATCH;
    }
    if let Some(e) = a.epochs {
        cfg.nn.train.epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.nn.train.batch_size = b;
    }
    if let Some(lr) = a.learning_rate {
        cfg.nn.train.learning_rate = lr;
    }
    cfg.nn.train.seed = seed;
    resolve_dims(cfg);

    let pairs = load_vocab_source(cfg)?;
    if pairs.is_none() && !cfg.nn.toy {
        return Err(CliError::Contract("nn-train needs --data, or --toy for synthetic pairs".into()));
    }
    let (vocab, train_x, train_y, test) = match &pairs {
        Some(t) => {
            let (tr, te) = corpus::stratified_split(t, cfg.test_fraction, seed)?;
            let vocab = fit_vocab(&tr);
            let seq = cfg.nn.dims.as_ref().expect("resolved").seq_len;
            let encode = |p: &PairTable| -> CliResult<Vec<Tensor>> {
                Ok(vec![
                    vocab.encode_all(p.rows().iter().map(|r| r.question1.as_str()), seq)?,
                    vocab.encode_all(p.rows().iter().map(|r| r.question2.as_str()), seq)?,
                ])
            };
            let (x, y) = (encode(&tr)?, tr.labels());
            let test = (encode(&te)?, te.labels());
            (Some(vocab), x, y, Some(test))
        }
        None => {
            let seq = cfg.nn.dims.as_ref().expect("resolved").seq_len;
            let (q1, q2, y) = separable_pairs(TOY_PAIRS, seq, seed);
            (None, vec![q1, q2], y, None)
        }
    };
    let vocab_size = vocab.as_ref().map_or(TOY_VOCAB, Vocabulary::size);
    cfg.nn.vocab_size = Some(vocab_size);
    let (matrix, source) = pretrained(cfg, arch, vocab.as_ref(), vocab_size, seed)?;
    let dims = cfg.nn.dims.clone().expect("resolved");
    let mut net = build_architecture(arch, vocab_size, matrix.as_ref(), Some(dims), seed)?;
    let history = train_network(&mut net, &train_x, &train_y, &cfg.nn.train)?;
    let (train_loss, train_acc) = evaluate_network(&net, &train_x, &train_y)?;
    let test_eval = test.map(|(x, y)| evaluate_network(&net, &x, &y)).transpose()?;
    if let Some(out) = &cfg.paths.out {
        net.save(out)?;
        if let Some(v) = &vocab {
            let text = serde_json::to_string(v).expect("serialisable");
            data::write_file(&out.with_extension("vocab.json"), &text)?;
        }
    }
    let mut rows = vec![vec!["train".into(), fmt4(train_loss), fmt4(train_acc)]];
    if let Some((l, acc)) = test_eval {
        rows.push(vec!["test".into(), fmt4(l), fmt4(acc)]);
    }
    Ok(Outcome::ok(
        json!({
            "arch": arch,
            "pretrained": source,
            "examples": train_y.len(),
            "history": history,
            "train": { "loss": train_loss, "accuracy": train_acc },
            "test": test_eval.map(|(l, acc)| json!({ "loss": l, "accuracy": acc })),
        }),
        format!(
            "architecture {arch}, {} epochs\n{}",
            cfg.nn.train.epochs,
            table(&["set", "loss", "accuracy"], &rows)
        ),
    ))
}

/// Toy sizes for the finite-difference check.
const CHECK_SEQ: usize = 4;
const CHECK_DIM: usize = 6;
const CHECK_VOCAB: usize = 14;
const CHECK_BATCH: usize = 6;

pub fn gradcheck(
    cfg: &mut ExperimentConfig,
    arch: Option<u8>,
    samples: usize,
    tolerance: f64,
) -> CliResult<Outcome> {
    let arch = set_arch(cfg, arch)?;
    let seed = cfg.require_seed("nn-gradcheck")?;
    let dims = Dims::toy(CHECK_SEQ, CHECK_DIM);
    cfg.nn.toy = true;
    cfg.nn.dims = Some(dims.clone());
    cfg.nn.vocab_size = Some(CHECK_VOCAB);
    // Validates the layout before drawing any data.
    architecture_spec(arch, CHECK_VOCAB, &dims)?;
    let glove = random_matrix(CHECK_VOCAB, CHECK_DIM, seed ^ 0x9e37_79b9);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = || -> Vec<Vec<u32>> {
        (0..CHECK_BATCH)
            .map(|_| (0..CHECK_SEQ).map(|_| r.gen_range(0..CHECK_VOCAB as u32)).collect())
            .collect()
    };
    let q1 = Tensor::from_indices(&indices())?;
    let q2 = Tensor::from_indices(&indices())?;
    let y: Vec<u8> = (0..CHECK_BATCH).map(|i| (i % 2) as u8).collect();
    let net = build_architecture(arch, CHECK_VOCAB, Some(&glove), Some(dims), seed)?;
    let options = GradCheckOptions { samples, seed };
    let report = gradient_check(&net, &[q1, q2], &y, &options)?;
    let rows: Vec<Vec<String>> = report
        .groups
        .iter()
        .map(|g| {
            vec![
                g.layer.to_string(),
                g.kind.clone(),
                g.param.clone(),
                g.checked.to_string(),
                g.flat.to_string(),
                g.nonsmooth.to_string(),
                format!("{:.3e}", g.max_rel_error),
            ]
        })
        .collect();
    let passed = report.max_rel_error <= tolerance;
    let text = format!(
        "{}max relative error {:.3e} (tolerance {tolerance:.0e}): {}\n",
        table(&["layer", "kind", "param", "checked", "flat", "kink", "max_rel_err"], &rows),
        report.max_rel_error,
        if passed { "ok" } else { "FAILED" }
    );
    let value = json!({ "arch": arch, "tolerance": tolerance, "passed": passed, "report": report });
    let mut outcome = Outcome::ok(value, text);
    if !passed {
        outcome.failure = Some(format!(
            "gradient check failed: max relative error {:.3e} exceeds {tolerance:.0e}",
            report.max_rel_error
        ));
    }
    Ok(outcome)
}
