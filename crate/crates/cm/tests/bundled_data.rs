//! The walkthrough data under examples/data is generated by the seeded
//! synthetic-corpus functions. These tests keep the files in sync; run with
//! `CM_BLESS=1` to rewrite them.

use std::path::PathBuf;

use cm_core::interchange::write_corpus_csv;
use cm_core::synth::{ndc_gazetteer, ndc_style_corpus};

pub const PER_THEME: usize = 12;
pub const SENTENCES: usize = 6;
pub const SEED: u64 = 2024;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data")
}

fn check(name: &str, expected: Vec<u8>) {
    let path = data_dir().join(name);
    if std::env::var_os("CM_BLESS").is_some() || !path.exists() {
        std::fs::create_dir_all(data_dir()).unwrap();
        std::fs::write(&path, &expected).unwrap();
    }
    let actual = std::fs::read(&path).unwrap();
    assert!(actual == expected, "{} is stale; rerun with CM_BLESS=1", path.display());
}

#[test]
fn corpus_file_matches_generator() {
    let mut csv = Vec::new();
    write_corpus_csv(&ndc_style_corpus(PER_THEME, SENTENCES, SEED), &mut csv).unwrap();
    check("ndc_synthetic.csv", csv);
}

#[test]
fn gazetteer_file_matches_generator() {
    let mut text = String::from("# surface<TAB>kind\n");
    for (surface, kind) in ndc_gazetteer().iter() {
        text.push_str(&format!("{surface}\t{kind}\n"));
    }
    check("ndc_gazetteer.tsv", text.into_bytes());
}
