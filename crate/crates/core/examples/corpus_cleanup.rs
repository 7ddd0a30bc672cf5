//! Import a CSV with a field mapping, tag entities from a gazetteer and find
//! near-duplicate documents.
//!
//! ```text
//! cargo run -p cm-core --example corpus_cleanup
//! ```

use cm_core::corpus::{deduplicate, import_csv_reader, tag_entities, FieldTarget, Gazetteer, ImportMapping};

const CSV: &str = "\
doc,country,submitted,text
fj-1,Fiji,2016-04-22,Fiji will cut emissions from the power sector by 30% with support from the World Bank.
fj-2,Fiji,2016-04-22,Fiji will cut emissions from the power sector by 30% with support from the World Bank!
no-1,Norway,2015-03-27,Norway commits to at least 40% lower emissions by 2030 compared to 1990.
cl-1,Chile,not a date,Chile plans coastal adaptation in Santiago and Valparaiso.
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mapping = ImportMapping::default()
        .map("doc", FieldTarget::Id)
        .map("text", FieldTarget::Body)
        .map("submitted", FieldTarget::Date)
        .map("country", FieldTarget::Metadata("country".into()));
    let (docs, report) = import_csv_reader(CSV.as_bytes(), &mapping)?;
    println!("accepted {} rows, rejected {}", report.accepted, report.rejected.len());
    for r in &report.rejected {
        println!("  row {}: {}", r.row, r.reason);
    }

    let gazetteer = Gazetteer::parse("Fiji\tLOCATION\nNorway\tLOCATION\nWorld Bank\tORGANIZATION\n")?;
    let tagged: Vec<_> = docs.into_iter().map(|d| tag_entities(d, &gazetteer)).collect();
    for d in &tagged {
        let tags: Vec<String> = d.entity_tags.iter().map(|t| format!("{}:{}", t.surface, t.kind.as_str())).collect();
        println!("{:<5} {}", d.id, tags.join(", "));
    }

    for group in deduplicate(&tagged, 0.5)? {
        println!("duplicates of {}:", group.representative);
        for m in &group.members {
            println!("  {} (jaccard {:.3})", m.id, m.similarity);
        }
    }
    Ok(())
}
