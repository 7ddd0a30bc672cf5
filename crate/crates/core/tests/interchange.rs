use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;

use cm_core::classify::Codebook;
use cm_core::corpus::{import_csv_reader, Document, ImportMapping};
use cm_core::interchange::{qdpx_bytes, read_qdpx, QdpxProject};
use cm_core::interchange::{corpus_metadata_fields, write_corpus_csv};

fn document() -> impl Strategy<Value = Document> {
    (
        "[a-z0-9]{1,6}",
        "[A-Za-z ,\"]{0,12}",
        "[A-Za-z0-9 ,.;\"'\n\u{e9}\u{4e2d}-]{1,60}",
        prop::option::of((1990i32..2030, 1u32..13, 1u32..29)),
        prop::collection::btree_map("(country|annex|sector)", "[A-Za-z ,\"-]{1,10}", 0..3),
    )
        .prop_map(|(id, title, body, date, meta)| {
            let mut d = Document::new(id, body).with_title(title);
            d.date = date.map(|(y, m, dd)| NaiveDate::from_ymd_opt(y, m, dd).unwrap());
            d.metadata = meta;
            d
        })
}

fn corpus() -> impl Strategy<Value = Vec<Document>> {
    prop::collection::vec(document(), 0..8).prop_map(|docs| {
        let mut seen = std::collections::BTreeSet::new();
        docs.into_iter().filter(|d| seen.insert(d.id.clone())).collect()
    })
}

fn csv(docs: &[Document]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_corpus_csv(docs, &mut buf).unwrap();
    buf
}

proptest! {
    #[test]
    fn corpus_csv_round_trip_is_lossless(docs in corpus()) {
        let bytes = csv(&docs);
        let fields = corpus_metadata_fields(&docs);
        let mapping = ImportMapping::for_corpus_export(fields.iter().map(String::as_str));
        let (back, report) = import_csv_reader(bytes.as_slice(), &mapping).unwrap();
        prop_assert_eq!(report.accepted, docs.len());
        prop_assert_eq!(&back, &docs);
        prop_assert_eq!(csv(&back), bytes);
    }

    #[test]
    fn qdpx_round_trip_is_lossless(docs in corpus(), seed in any::<u64>(), picks in prop::collection::vec(0usize..3, 8)) {
        let codebook = Codebook::from_ids(["adaptation", "mitigation", "finance"]).unwrap();
        let ids: Vec<&str> = codebook.ids().collect();
        let labels: BTreeMap<String, String> =
            docs.iter().zip(&picks).map(|(d, &p)| (d.id.clone(), ids[p].to_string())).collect();
        let project = QdpxProject::from_coding("study", seed, &docs, &codebook, &labels).unwrap();
        let bytes = qdpx_bytes(&project).unwrap();
        prop_assert_eq!(&qdpx_bytes(&project).unwrap(), &bytes);
        let back = read_qdpx(&bytes).unwrap();
        prop_assert!(back.warnings.is_empty());
        prop_assert_eq!(&back.project, &project);
        prop_assert_eq!(qdpx_bytes(&back.project).unwrap(), bytes);
    }
}

#[test]
fn repeated_exports_to_disk_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let docs = vec![
        Document::new("n1", "Adaptation in coastal zones.").with_meta("annex", "Non-Annex"),
        Document::new("n2", "Emission targets, \"net zero\".").with_title("Second"),
    ];
    let codebook = Codebook::from_ids(["x", "y"]).unwrap();
    let labels = BTreeMap::from([("n1".to_string(), "y".to_string())]);
    let project = QdpxProject::from_coding("p", 3, &docs, &codebook, &labels).unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let c = dir.path().join(format!("c{i}.csv"));
        let q = dir.path().join(format!("q{i}.qdpx"));
        cm_core::interchange::export_corpus_csv(&docs, &c).unwrap();
        cm_core::interchange::export_qdpx(&project, &q).unwrap();
        outputs.push((std::fs::read(c).unwrap(), std::fs::read(q).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}
