use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cm_core::synth::{coding_corpus, ndc_style_corpus};

const GOLDEN_CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/cooc_corpus.csv");
const GOLDEN_PAIRS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/cooc_dice_sentence_min2.csv");

fn cm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cm"))
        .args(args)
        .current_dir(dir)
        .env_remove("CM_CONFIG")
        .env_remove("CM_PORT")
        .env_remove("CM_DATA_DIR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = cm(dir, args);
    assert!(out.status.success(), "cm {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_corpus(dir: &Path, name: &str, docs: &[cm_core::Document]) -> PathBuf {
    let path = dir.join(name);
    cm_core::interchange::export_corpus_csv(docs, &path).unwrap();
    path
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = cm(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(cm(dir.path(), &["lda", "--corpus", "c.csv", "--k", "2", "--sweeps", "9"]).status.code(), Some(2));
    assert_eq!(cm(dir.path(), &["cooc", "--corpus", "c.csv", "--measure", "cosine"]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = cm(dir.path(), &["freq", "--corpus", "missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("cm: "));
}

#[test]
fn every_subcommand_answers_help() {
    let dir = tempfile::tempdir().unwrap();
    let paths: &[&[&str]] = &[
        &["import"], &["dedup"], &["freq"], &["cooc"], &["lda"], &["topics"], &["topics", "show"],
        &["topics", "label"], &["topics", "filter"], &["topics", "by-meta"], &["topics", "coherence"],
        &["topics", "highlight"], &["classify"], &["classify", "train"], &["classify", "eval"],
        &["classify", "simulate"], &["export"], &["serve"],
    ];
    for path in paths {
        let mut args = path.to_vec();
        args.push("--help");
        let out = ok(dir.path(), &args);
        assert!(stdout(&out).contains("Usage: cm"), "{path:?}");
    }
}

#[test]
fn cooc_matches_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pairs.csv");
    ok(
        dir.path(),
        &["cooc", "--corpus", GOLDEN_CORPUS, "--measure", "dice", "--unit", "sentence", "--min-count", "2", "--out", out.to_str().unwrap()],
    );
    assert_eq!(std::fs::read_to_string(out).unwrap(), std::fs::read_to_string(GOLDEN_PAIRS).unwrap());
}

#[test]
fn single_topic_gives_unit_theta() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), "c.csv", &ndc_style_corpus(2, 3, 1));
    let out = ok(dir.path(), &["lda", "--corpus", "c.csv", "--k", "1", "--seed", "7", "--iterations", "20", "--theta", "theta.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: 7"));
    let theta = std::fs::read_to_string(dir.path().join("theta.csv")).unwrap();
    let mut lines = theta.lines();
    assert_eq!(lines.next(), Some("doc_id,topic_0"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.ends_with(",1")), "{theta}");
    assert_eq!(std::fs::read_to_string(dir.path().join("model/theta.csv")).unwrap(), theta);
}

#[test]
fn presets_apply_and_typed_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), "c.csv", &ndc_style_corpus(2, 3, 1));
    std::fs::write(dir.path().join("cm.toml"), "seed = 5\n[lda]\nk = 3\niterations = 10\ntheta = \"preset.csv\"\n").unwrap();
    let out = ok(dir.path(), &["lda", "--corpus", "c.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: 5"));
    let header = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("preset.csv"), "doc_id,topic_0,topic_1,topic_2");

    let out = ok(dir.path(), &["lda", "--corpus", "c.csv", "--k", "2", "--seed", "9", "--theta", "typed.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: 9"));
    assert_eq!(header("typed.csv"), "doc_id,topic_0,topic_1");

    // an explicit --config elsewhere replaces ./cm.toml
    std::fs::write(dir.path().join("other.toml"), "[lda]\nk = 4\niterations = 5\n").unwrap();
    ok(dir.path(), &["--config", "other.toml", "lda", "--corpus", "c.csv", "--theta", "other.csv"]);
    assert_eq!(header("other.csv"), "doc_id,topic_0,topic_1,topic_2,topic_3");
}

#[test]
fn topic_workflow_with_json_output() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), "c.csv", &ndc_style_corpus(3, 4, 2));
    ok(dir.path(), &["lda", "--corpus", "c.csv", "--k", "10", "--alpha", "0.1", "--iterations", "100"]);

    let shown: serde_json::Value = serde_json::from_slice(&ok(dir.path(), &["--json", "topics", "show", "--model", "model", "--n", "3"]).stdout).unwrap();
    assert_eq!(shown.as_array().unwrap().len(), 10);
    assert_eq!(shown[0]["top_words"].as_array().unwrap().len(), 3);

    ok(dir.path(), &["topics", "label", "--model", "model", "--topic", "2", "--label", "water"]);
    let shown: serde_json::Value = serde_json::from_slice(&ok(dir.path(), &["topics", "show", "--model", "model", "--json"]).stdout).unwrap();
    assert_eq!(shown[2]["label"], "water");
    assert!(stdout(&ok(dir.path(), &["topics", "show", "--model", "model"])).contains("2 [water]:"));

    let filtered: Vec<serde_json::Value> =
        serde_json::from_slice(&ok(dir.path(), &["--json", "topics", "filter", "--model", "model", "--topic", "2", "--min-share", "0"]).stdout).unwrap();
    assert_eq!(filtered.len(), 30);
    let groups: Vec<serde_json::Value> = serde_json::from_slice(
        &ok(dir.path(), &["--json", "topics", "by-meta", "--model", "model", "--corpus", "c.csv", "--field", "annex"]).stdout,
    )
    .unwrap();
    let names: Vec<&str> = groups.iter().map(|g| g["group"].as_str().unwrap()).collect();
    assert_eq!(names, ["(missing)", "Annex-I", "Non-Annex"]);
    let coherence: serde_json::Value =
        serde_json::from_slice(&ok(dir.path(), &["--json", "topics", "coherence", "--model", "model", "--corpus", "c.csv"]).stdout).unwrap();
    assert_eq!(coherence["scores"].as_array().unwrap().len(), 10);
    let spans: Vec<serde_json::Value> = serde_json::from_slice(
        &ok(dir.path(), &["--json", "topics", "highlight", "--model", "model", "--corpus", "c.csv", "--doc", "ndc000", "--topic", "0"]).stdout,
    )
    .unwrap();
    assert!(spans.iter().all(|s| s["topic"] == 0));

    let out = cm(dir.path(), &["topics", "filter", "--model", "model", "--topic", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn import_dedup_freq_and_export() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("raw.tsv"),
        "key\tparty\twhen\ttext\n\
         a\tFiji\t22/04/2016\tFiji plans solar power and coastal protection for Suva.\n\
         b\tFiji\t22/04/2016\tFiji plans solar power and coastal protection for Suva.\n\
         c\tChile\tnope\tChile expands wind power.\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("gaz.tsv"), "Fiji\tLOCATION\nSuva\tLOCATION\n").unwrap();
    let report: serde_json::Value = serde_json::from_slice(
        &ok(
            dir.path(),
            &[
                "--json", "import", "raw.tsv", "--delimiter", "\t", "--map", "key=id", "--map", "text=body", "--map", "when=date",
                "--map", "party=metadata:party", "--date-format", "%d/%m/%Y", "--gazetteer", "gaz.tsv", "--out", "corpus.json",
            ],
        )
        .stdout,
    )
    .unwrap();
    assert_eq!(report["accepted"], 2);
    assert_eq!(report["rejected"].as_array().unwrap().len(), 1);
    let docs: Vec<cm_core::Document> = serde_json::from_slice(&std::fs::read(dir.path().join("corpus.json")).unwrap()).unwrap();
    assert_eq!(docs[0].entity_tags.len(), 2);

    let groups: Vec<serde_json::Value> =
        serde_json::from_slice(&ok(dir.path(), &["--json", "dedup", "--corpus", "corpus.json", "--keep-out", "kept.csv"]).stdout).unwrap();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0]["representative"], "a");

    let freq = stdout(&ok(dir.path(), &["freq", "--corpus", "corpus.json", "--blacklist-entities", "LOCATION", "--top", "3"]));
    assert!(freq.starts_with("term,count,doc_freq\n"), "{freq}");
    assert!(!freq.contains("fiji"));
    let series: serde_json::Value =
        serde_json::from_slice(&ok(dir.path(), &["--json", "freq", "--corpus", "corpus.json", "--series", "solar"]).stdout).unwrap();
    assert_eq!(series["points"][0]["count"], 2);

    ok(dir.path(), &["export", "corpus-csv", "--corpus", "corpus.json", "--out", "a.csv"]);
    ok(dir.path(), &["export", "corpus-csv", "--corpus", "a.csv", "--out", "b.csv"]);
    assert_eq!(std::fs::read(dir.path().join("a.csv")).unwrap(), std::fs::read(dir.path().join("b.csv")).unwrap());
    ok(dir.path(), &["export", "qdpx", "--corpus", "a.csv", "--seed", "3", "--out", "p1.qdpx"]);
    ok(dir.path(), &["export", "qdpx", "--corpus", "a.csv", "--seed", "3", "--out", "p2.qdpx"]);
    assert_eq!(std::fs::read(dir.path().join("p1.qdpx")).unwrap(), std::fs::read(dir.path().join("p2.qdpx")).unwrap());
}

#[test]
fn classify_commands() {
    let dir = tempfile::tempdir().unwrap();
    let (docs, gold) = coding_corpus(60, 10, 0.6, 4);
    write_corpus(dir.path(), "c.csv", &docs);
    let mut labels = String::from("doc_id,code_id\n");
    for (d, c) in &gold {
        labels.push_str(&format!("{d},{c}\n"));
    }
    std::fs::write(dir.path().join("gold.csv"), &labels).unwrap();
    let few: String = labels.lines().take(11).map(|l| format!("{l}\n")).collect();
    std::fs::write(dir.path().join("few.csv"), few).unwrap();

    let preds: Vec<serde_json::Value> =
        serde_json::from_slice(&ok(dir.path(), &["--json", "classify", "train", "--corpus", "c.csv", "--labels", "few.csv"]).stdout).unwrap();
    assert_eq!(preds.len(), 50);

    let report: serde_json::Value = serde_json::from_slice(
        &ok(dir.path(), &["--json", "classify", "eval", "--corpus", "c.csv", "--labels", "gold.csv", "--codes", "mitigation,adaptation"]).stdout,
    )
    .unwrap();
    assert_eq!(report["per_class"][0]["code"], "mitigation");
    assert_eq!(report["folds"], 5);

    let curve = stdout(&ok(
        dir.path(),
        &["classify", "simulate", "--corpus", "c.csv", "--gold", "gold.csv", "--strategy", "random:3", "--budget", "5"],
    ));
    assert!(curve.starts_with("labels,accuracy\n"));
    assert_eq!(curve.lines().count(), 1 + 6);

    ok(dir.path(), &["export", "labels-csv", "--labels", "few.csv", "--out", "l.csv"]);
    assert!(std::fs::read_to_string(dir.path().join("l.csv")).unwrap().lines().count() == 11);
}
