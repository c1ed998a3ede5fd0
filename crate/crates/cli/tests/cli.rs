mod common;

use std::path::Path;
use std::process::Output;

use common::{arg, dupliq, Fixture};
use serde_json::Value;

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stdout:\n{}\nstderr:\n{}", stdout(o), stderr(o));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dupliq(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(dupliq(dir.path(), &["stats", "--bogus"]).status.code(), Some(1));
    assert_eq!(dupliq(dir.path(), &[]).status.code(), Some(1));
    let help = dupliq(dir.path(), &["--help"]);
    ok(&help);
    assert!(stdout(&help).contains("reproduce"));
    let version = dupliq(dir.path(), &["--version"]);
    ok(&version);
    assert!(stdout(&version).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn missing_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = dupliq(dir.path(), &["stats", "--data", "nope.tsv"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("nope.tsv"));
    let o = dupliq(dir.path(), &["stats", "--data", "x.tsv", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stats_and_clean_report() {
    let f = Fixture::new(200);
    let rep = f.path("stats.json");
    let o = dupliq(f.dir.path(), &["stats", "--data", arg(&f.tsv), "--report", arg(&rep)]);
    ok(&o);
    assert!(stdout(&o).contains("duplicates"));
    let r = report(&rep);
    assert_eq!(r["tool"], "dupliq");
    assert_eq!(r["command"], "stats");
    assert_eq!(r["version"], dupliq_cli::VERSION);
    assert_eq!(r["config"]["paths"]["data"], arg(&f.tsv));
    assert_eq!(r["result"]["stats"]["total_pairs"], 200);
    let table = common::pairs(200, 11);
    let positives = table.rows().iter().filter(|p| p.is_positive()).count();
    assert_eq!(r["result"]["stats"]["positives"], positives);

    let cleaned = f.path("clean.tsv");
    let o = dupliq(f.dir.path(), &["clean", "--data", arg(&f.tsv), "--out", arg(&cleaned)]);
    ok(&o);
    // default report location is the working directory
    let r = report(&f.path("dupliq-clean.json"));
    let expected = dupliq_core::corpus::clean(&table);
    assert_eq!(r["result"]["removed"], 200 - expected.len());
    assert_eq!(dupliq_core::corpus::load_pairs(&cleaned).unwrap(), expected);
}

#[test]
fn split_needs_a_seed() {
    let f = Fixture::new(100);
    let (tr, te) = (f.path("train.tsv"), f.path("test.tsv"));
    let args = ["split", "--data", arg(&f.tsv), "--train-out", arg(&tr), "--test-out", arg(&te)];
    let o = dupliq(f.dir.path(), &args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"));
    let mut seeded = args.to_vec();
    seeded.extend(["--seed", "3", "--test-fraction", "0.25"]);
    ok(&dupliq(f.dir.path(), &seeded));
    let train = dupliq_core::corpus::load_pairs(&tr).unwrap();
    let test = dupliq_core::corpus::load_pairs(&te).unwrap();
    assert_eq!((train.len(), test.len()), (75, 25));
}

#[test]
fn featurize_without_vectors_exits_1() {
    let f = Fixture::new(50);
    let o = dupliq(f.dir.path(), &["featurize", "--data", arg(&f.tsv), "--out", "m.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--glove"), "{}", stderr(&o));
    assert!(!f.path("m.csv").exists());
}

#[test]
fn feature_pipeline_train_eval_importance() {
    let f = Fixture::new(300);
    let (tr, te) = (f.path("train.tsv"), f.path("test.tsv"));
    ok(&dupliq(
        f.dir.path(),
        &["split", "--data", arg(&f.tsv), "--train-out", arg(&tr), "--test-out", arg(&te), "--seed", "1"],
    ));
    for (tsv, csv) in [(&tr, "train.csv"), (&te, "test.csv")] {
        ok(&dupliq(
            f.dir.path(),
            &["featurize", "--data", arg(tsv), "--glove", arg(&f.glove), "--out", csv, "--drop-low-importance"],
        ));
    }
    let header = std::fs::read_to_string(f.path("train.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 28 - 8 + 1);

    let o = dupliq(
        f.dir.path(),
        &["train", "--features", "train.csv", "--kind", "xgb", "--set", "max_depth=3", "--out", "xgb.json", "--seed", "2"],
    );
    ok(&o);
    let r = report(&f.path("dupliq-train.json"));
    assert_eq!(r["result"]["spec"]["hyperparameters"]["max_depth"], 3);
    assert_eq!(r["result"]["spec"]["hyperparameters"]["seed"], 2);

    let o = dupliq(f.dir.path(), &["eval", "--model", "xgb.json", "--features", "test.csv"]);
    ok(&o);
    assert!(stdout(&o).contains("accuracy") && stdout(&o).contains("xgb"));
    let acc = report(&f.path("dupliq-eval.json"))["result"]["metrics"]["accuracy"].as_f64().unwrap();
    assert!(acc > 0.8, "{acc}");

    ok(&dupliq(f.dir.path(), &["importance", "--model", "xgb.json", "--features", "test.csv"]));
    let r = report(&f.path("dupliq-importance.json"));
    assert_eq!(r["result"]["method"], "native_gain");
    assert_eq!(r["result"]["features"].as_array().unwrap().len(), 20);

    // a bad hyperparameter is a contract error
    let o = dupliq(
        f.dir.path(),
        &["train", "--features", "train.csv", "--kind", "knn", "--set", "max_depth=3", "--out", "k.json", "--seed", "2"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tfidf_pipeline_and_grid() {
    let f = Fixture::new(200);
    ok(&dupliq(
        f.dir.path(),
        &["tfidf-fit", "--data", arg(&f.tsv), "--analyzer", "char", "--ngram", "1,3", "--max-features", "500", "--out", "tfidf.json"],
    ));
    assert_eq!(report(&f.path("dupliq-tfidf-fit.json"))["result"]["terms"], 500);
    ok(&dupliq(
        f.dir.path(),
        &["tfidf-featurize", "--model", "tfidf.json", "--data", arg(&f.tsv), "--out", "vec.json"],
    ));
    let grid = r#"[{"kind": "knn", "hyperparameters": {"k": 1}}, {"kind": "knn", "hyperparameters": {"k": 9}}]"#;
    std::fs::write(f.path("grid.json"), grid).unwrap();
    let o = dupliq(
        f.dir.path(),
        &["grid", "--features", "vec.json", "--grid", "grid.json", "--seed", "4", "--out", "best.json"],
    );
    ok(&o);
    let r = report(&f.path("dupliq-grid.json"));
    assert_eq!(r["result"]["scores"].as_array().unwrap().len(), 2);
    ok(&dupliq(f.dir.path(), &["eval", "--model", "best.json", "--features", "vec.json"]));
}

#[test]
fn config_file_with_flag_overrides() {
    let f = Fixture::new(100);
    let config = format!(
        r#"{{"version": 1, "seed": 9, "test_fraction": 0.3, "paths": {{"data": "{}", "train_out": "a.tsv", "test_out": "b.tsv"}}}}"#,
        arg(&f.tsv)
    );
    std::fs::write(f.path("exp.json"), config).unwrap();
    ok(&dupliq(f.dir.path(), &["split", "--config", "exp.json", "--test-fraction", "0.2"]));
    let r = report(&f.path("dupliq-split.json"));
    assert_eq!(r["config"]["seed"], 9);
    assert_eq!(r["config"]["test_fraction"], 0.2);
    assert_eq!(r["result"]["test"]["pairs"], 20);

    std::fs::write(f.path("v2.json"), r#"{"version": 2}"#).unwrap();
    assert_eq!(dupliq(f.dir.path(), &["stats", "--config", "v2.json"]).status.code(), Some(1));
    std::fs::write(f.path("typo.json"), r#"{"version": 1, "sede": 2}"#).unwrap();
    assert_eq!(dupliq(f.dir.path(), &["stats", "--config", "typo.json"]).status.code(), Some(1));
}

#[test]
fn threads_flag_and_env() {
    let f = Fixture::new(60);
    ok(&dupliq(f.dir.path(), &["stats", "--data", arg(&f.tsv), "--threads", "2"]));
    assert_eq!(dupliq(f.dir.path(), &["stats", "--data", arg(&f.tsv), "--threads", "0"]).status.code(), Some(1));
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_dupliq"))
        .current_dir(f.dir.path())
        .args(["stats", "--data", arg(&f.tsv)])
        .env("DUPLIQ_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn nn_commands() {
    let dir = tempfile::tempdir().unwrap();
    for arch in ["1", "2", "3", "4"] {
        let o = dupliq(dir.path(), &["nn-build", "--arch", arch, "--toy", "--seed", "0"]);
        ok(&o);
        let r = report(&dir.path().join("dupliq-nn-build.json"));
        let branches = r["result"]["branches"].as_u64().unwrap();
        assert_eq!(branches, [2, 4, 4, 6][arch.parse::<usize>().unwrap() - 1]);
    }
    let o = dupliq(dir.path(), &["nn-build", "--arch", "5", "--seed", "0"]);
    assert_eq!(o.status.code(), Some(1));

    let o = dupliq(dir.path(), &["nn-gradcheck", "--arch", "2", "--seed", "1"]);
    ok(&o);
    let r = report(&dir.path().join("dupliq-nn-gradcheck.json"));
    assert_eq!(r["result"]["passed"], true);
    assert!(r["result"]["report"]["max_rel_error"].as_f64().unwrap() <= 1e-4);

    let o = dupliq(dir.path(), &["nn-train", "--toy", "--seed", "1", "--out", "net.json"]);
    ok(&o);
    let r = report(&dir.path().join("dupliq-nn-train.json"));
    assert_eq!(r["config"]["nn"]["train"]["batch_size"], 20);
    assert!(r["result"]["train"]["accuracy"].as_f64().unwrap() >= 0.95);
    let net = dupliq_neural::Network::load(dir.path().join("net.json")).unwrap();
    assert_eq!(net.n_branches(), 2);
}

#[test]
fn nn_train_on_pairs_with_glove() {
    let f = Fixture::new(120);
    let o = dupliq(
        f.dir.path(),
        &["nn-train", "--arch", "2", "--toy", "--data", arg(&f.tsv), "--glove", arg(&f.glove), "--epochs", "2", "--seed", "0"],
    );
    ok(&o);
    let r = report(&f.path("dupliq-nn-train.json"));
    assert_eq!(r["result"]["pretrained"], "glove");
    assert_eq!(r["config"]["nn"]["dims"]["embed_dim"], 8);
    assert!(r["result"]["test"]["accuracy"].is_number());
}

#[test]
fn reproduce_tables_on_synthetic_pairs() {
    let f = Fixture::new(400);
    let o = dupliq(
        f.dir.path(),
        &["reproduce", "table5", "--data", arg(&f.tsv), "--glove", arg(&f.glove), "--seed", "7", "--sample", "300"],
    );
    ok(&o);
    assert!(stdout(&o).contains("0.7417"));
    let r = report(&f.path("dupliq-reproduce-table5.json"));
    let rows = r["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    assert_eq!(r["result"]["pairs"]["test"], 60);

    let o = dupliq(f.dir.path(), &["reproduce", "table6", "--data", arg(&f.tsv), "--glove", arg(&f.glove), "--seed", "7"]);
    ok(&o);
    let r = report(&f.path("dupliq-reproduce-table6.json"));
    assert_eq!(r["result"]["features"].as_array().unwrap().len(), 20);
    assert_eq!(r["result"]["deltas"].as_array().unwrap().len(), 7);

    let o = dupliq(
        f.dir.path(),
        &["reproduce", "table7", "--data", arg(&f.tsv), "--seed", "7", "--kinds", "xgb,knn"],
    );
    ok(&o);
    assert!(stdout(&o).contains("0.8244"));
    let r = report(&f.path("dupliq-reproduce-table7.json"));
    assert_eq!(r["result"]["analyzers"]["char"]["rows"].as_array().unwrap().len(), 2);

    // table 5 needs vectors, and fails before doing any work
    let o = dupliq(f.dir.path(), &["reproduce", "table5", "--data", arg(&f.tsv), "--seed", "7"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reproduce_is_byte_identical() {
    let f = Fixture::new(250);
    let run = |name: &str| {
        let rep = f.path(name);
        ok(&dupliq(
            f.dir.path(),
            &["reproduce", "table7", "--data", arg(&f.tsv), "--seed", "5", "--report", arg(&rep), "--threads", "3"],
        ));
        std::fs::read(rep).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}
