//! REFI-QDA project exchange, restricted to codes, plain-text sources and
//! plain-text selections.
//!
//! The archive holds `project.qde` first and then `sources/<guid>.txt` for
//! every source in guid order. Source text is also embedded in the XML.
//! Offsets count Unicode scalar values, the same unit used everywhere else.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Cursor, Read, Write};
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use uuid::Uuid;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use super::{atomic_write, InterchangeError, Result};
use crate::classify::Codebook;
use crate::corpus::Document;
use crate::text::char_len;

const GUID_NAMESPACE: Uuid = Uuid::from_u128(0x6f1c_52a4_93d8_4e0b_a7c1_0d4e_2b8f_9a31);
const QDE: &str = "project.qde";

/// Deterministic RFC 4122 (version 5) guid for the `ordinal`-th entity of
/// `kind` in a project seeded with `seed`.
pub fn guid(seed: u64, kind: &str, ordinal: usize) -> String {
    Uuid::new_v5(&GUID_NAMESPACE, format!("{seed}:{kind}:{ordinal}").as_bytes()).to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QdpxCode {
    pub guid: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QdpxSource {
    pub guid: String,
    pub document_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QdpxSelection {
    pub source_guid: String,
    pub start: usize,
    pub end: usize,
    pub code_guid: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QdpxProject {
    pub name: String,
    pub codes: Vec<QdpxCode>,
    pub sources: Vec<QdpxSource>,
    /// Grouped by source in source order; see [`QdpxProject::canonicalize`].
    pub selections: Vec<QdpxSelection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QdpxImport {
    pub project: QdpxProject,
    pub warnings: Vec<String>,
}

fn is_guid(s: &str) -> bool {
    s.len() == 36 && Uuid::try_parse(s).is_ok()
}

fn invalid(guid: &str, message: impl Into<String>) -> InterchangeError {
    InterchangeError::Invalid { guid: guid.to_string(), message: message.into() }
}

impl QdpxProject {
    pub fn new(name: impl Into<String>) -> Self {
        QdpxProject { name: name.into(), ..Default::default() }
    }

    /// A project with one source per document and one whole-text selection
    /// per labeled document. Empty documents get no selection.
    pub fn from_coding(
        name: impl Into<String>,
        seed: u64,
        corpus: &[Document],
        codebook: &Codebook,
        labels: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut project = QdpxProject::new(name);
        let mut code_guids = HashMap::new();
        for (i, code) in codebook.codes.iter().enumerate() {
            let g = guid(seed, "code", i);
            code_guids.insert(code.id.as_str(), g.clone());
            project.codes.push(QdpxCode { guid: g, name: code.name.clone() });
        }
        for (i, doc) in corpus.iter().enumerate() {
            let g = guid(seed, "source", i);
            if let Some(code) = labels.get(&doc.id) {
                let code_guid = code_guids
                    .get(code.as_str())
                    .ok_or_else(|| InterchangeError::DanglingCodeRef(code.clone()))?;
                let len = char_len(&doc.body);
                if len > 0 {
                    project.selections.push(QdpxSelection {
                        source_guid: g.clone(),
                        start: 0,
                        end: len,
                        code_guid: code_guid.clone(),
                    });
                }
            }
            project.sources.push(QdpxSource { guid: g, document_id: doc.id.clone(), text: doc.body.clone() });
        }
        project.validate()?;
        Ok(project)
    }

    /// Orders selections by the position of their source, keeping the
    /// relative order within a source. This is the order export writes and
    /// import returns.
    pub fn canonicalize(&mut self) {
        let pos: HashMap<&str, usize> = self.sources.iter().enumerate().map(|(i, s)| (s.guid.as_str(), i)).collect();
        let mut keyed: Vec<(usize, QdpxSelection)> = self
            .selections
            .drain(..)
            .map(|s| (pos.get(s.source_guid.as_str()).copied().unwrap_or(usize::MAX), s))
            .collect();
        keyed.sort_by_key(|(p, _)| *p);
        self.selections = keyed.into_iter().map(|(_, s)| s).collect();
    }

    /// Guids well formed and unique, selections inside their source text and
    /// pointing at existing codes.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for g in self.codes.iter().map(|c| &c.guid).chain(self.sources.iter().map(|s| &s.guid)) {
            if !is_guid(g) {
                return Err(invalid(g, "not an RFC 4122 guid"));
            }
            if !seen.insert(g.as_str()) {
                return Err(invalid(g, "duplicate guid"));
            }
        }
        let lengths: HashMap<&str, usize> =
            self.sources.iter().map(|s| (s.guid.as_str(), char_len(&s.text))).collect();
        let codes: HashSet<&str> = self.codes.iter().map(|c| c.guid.as_str()).collect();
        for sel in &self.selections {
            let len = *lengths
                .get(sel.source_guid.as_str())
                .ok_or_else(|| invalid(&sel.source_guid, "selection refers to unknown source"))?;
            if sel.start >= sel.end || sel.end > len {
                return Err(invalid(
                    &sel.source_guid,
                    format!("selection {}..{} outside text of length {len}", sel.start, sel.end),
                ));
            }
            if !codes.contains(sel.code_guid.as_str()) {
                return Err(InterchangeError::DanglingCodeRef(sel.code_guid.clone()));
            }
        }
        Ok(())
    }
}

fn escape(s: &str, attribute: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            '"' if attribute => out.push_str("&quot;"),
            '\n' if attribute => out.push_str("&#10;"),
            '\t' if attribute => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn project_xml(project: &QdpxProject) -> String {
    let a = |s: &str| escape(s, true);
    let mut x = String::new();
    x.push_str("<?xml version=\"1.0\" encoding=\"utf-8\" standalone=\"yes\"?>\n");
    x.push_str(&format!(
        "<Project name=\"{}\" origin=\"cm\" xmlns=\"urn:QDA-XML:project:1.0\">\n",
        a(&project.name)
    ));
    x.push_str("  <CodeBook>\n    <Codes>\n");
    for c in &project.codes {
        x.push_str(&format!("      <Code guid=\"{}\" name=\"{}\" isCodable=\"true\"/>\n", a(&c.guid), a(&c.name)));
    }
    x.push_str("    </Codes>\n  </CodeBook>\n  <Sources>\n");
    for src in &project.sources {
        x.push_str(&format!(
            "    <TextSource guid=\"{}\" name=\"{}\" plainTextPath=\"internal://{}.txt\">\n",
            a(&src.guid),
            a(&src.document_id),
            a(&src.guid)
        ));
        x.push_str(&format!("      <PlainTextContent>{}</PlainTextContent>\n", escape(&src.text, false)));
        for (i, sel) in project.selections.iter().filter(|s| s.source_guid == src.guid).enumerate() {
            let name = |kind: &str| Uuid::new_v5(&GUID_NAMESPACE, format!("{kind}:{}:{i}", src.guid).as_bytes());
            x.push_str(&format!(
                "      <PlainTextSelection guid=\"{}\" startPosition=\"{}\" endPosition=\"{}\">\n",
                name("selection"),
                sel.start,
                sel.end
            ));
            x.push_str(&format!(
                "        <Coding guid=\"{}\">\n          <CodeRef targetGUID=\"{}\"/>\n        </Coding>\n",
                name("coding"),
                a(&sel.code_guid)
            ));
            x.push_str("      </PlainTextSelection>\n");
        }
        x.push_str("    </TextSource>\n");
    }
    x.push_str("  </Sources>\n</Project>\n");
    x
}

fn zip_err(e: zip::result::ZipError) -> InterchangeError {
    InterchangeError::Zip(e.to_string())
}

/// The archive bytes. Timestamps are pinned so equal projects give
/// byte-identical archives.
pub fn qdpx_bytes(project: &QdpxProject) -> Result<Vec<u8>> {
    project.validate()?;
    let mut project = project.clone();
    project.canonicalize();
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default())
        .unix_permissions(0o644);
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    zip.start_file(QDE, options).map_err(zip_err)?;
    zip.write_all(project_xml(&project).as_bytes())?;
    let mut sources: Vec<&QdpxSource> = project.sources.iter().collect();
    sources.sort_by(|a, b| a.guid.cmp(&b.guid));
    for src in sources {
        zip.start_file(format!("sources/{}.txt", src.guid), options).map_err(zip_err)?;
        zip.write_all(src.text.as_bytes())?;
    }
    Ok(zip.finish().map_err(zip_err)?.into_inner())
}

pub fn export_qdpx(project: &QdpxProject, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path, &qdpx_bytes(project)?)?;
    Ok(())
}

pub fn import_qdpx(path: impl AsRef<Path>) -> Result<QdpxImport> {
    read_qdpx(&std::fs::read(path)?)
}

fn xml_err(e: impl std::fmt::Display) -> InterchangeError {
    InterchangeError::MalformedXml(e.to_string())
}

fn attr(e: &BytesStart, name: &str) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(xml_err)?;
        if a.key.local_name().as_ref() == name.as_bytes() {
            return Ok(Some(a.unescape_value().map_err(xml_err)?.into_owned()));
        }
    }
    Ok(None)
}

fn required(e: &BytesStart, element: &str, name: &str) -> Result<String> {
    attr(e, name)?.ok_or_else(|| InterchangeError::MalformedXml(format!("<{element}> without {name}")))
}

struct PendingSource {
    guid: String,
    name: String,
    path: Option<String>,
    text: Option<String>,
}

struct PendingSelection {
    guid: String,
    start: Option<usize>,
    end: Option<usize>,
    codes: Vec<String>,
}

/// Parses an archive. Elements outside the subset are skipped with a
/// warning; selections whose offsets do not fit their source are dropped
/// with a warning.
pub fn read_qdpx(bytes: &[u8]) -> Result<QdpxImport> {
    let mut archive = ZipArchive::new(Cursor::new(bytes)).map_err(zip_err)?;
    let mut xml = String::new();
    match archive.by_name(QDE) {
        Ok(mut f) => {
            f.read_to_string(&mut xml)?;
        }
        Err(zip::result::ZipError::FileNotFound) => return Err(InterchangeError::MissingProjectQde),
        Err(e) => return Err(zip_err(e)),
    }

    let mut warnings = Vec::new();
    let mut ignored: HashSet<String> = HashSet::new();
    let mut project = QdpxProject::default();
    let mut saw_project = false;
    let mut source: Option<PendingSource> = None;
    let mut selection: Option<PendingSelection> = None;
    let mut content: Option<String> = None;
    let mut raw_selections: Vec<(QdpxSelection, String)> = Vec::new();

    let mut reader = Reader::from_str(&xml);
    reader.config_mut().trim_text(false);
    loop {
        let event = reader.read_event().map_err(xml_err)?;
        let (e, empty) = match event {
            Event::Eof => break,
            Event::Text(t) => {
                if let Some(buf) = content.as_mut() {
                    buf.push_str(&t.unescape().map_err(xml_err)?);
                }
                continue;
            }
            Event::CData(t) => {
                if let Some(buf) = content.as_mut() {
                    buf.push_str(&String::from_utf8_lossy(&t));
                }
                continue;
            }
            Event::End(e) => {
                match e.local_name().as_ref() {
                    b"PlainTextContent" => {
                        if let (Some(src), Some(text)) = (source.as_mut(), content.take()) {
                            src.text = Some(text);
                        }
                    }
                    b"PlainTextSelection" => finish_selection(&mut selection, &source, &mut raw_selections, &mut warnings),
                    b"TextSource" => finish_source(&mut source, &mut project, &mut archive)?,
                    _ => {}
                }
                continue;
            }
            Event::Start(e) => (e, false),
            Event::Empty(e) => (e, true),
            _ => continue,
        };
        let local = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
        match local.as_str() {
            "Project" => {
                saw_project = true;
                project.name = attr(&e, "name")?.unwrap_or_default();
            }
            "CodeBook" | "Codes" | "Sources" | "Coding" => {}
            "Code" => project.codes.push(QdpxCode {
                guid: required(&e, "Code", "guid")?,
                name: attr(&e, "name")?.unwrap_or_default(),
            }),
            "TextSource" => {
                source = Some(PendingSource {
                    guid: required(&e, "TextSource", "guid")?,
                    name: attr(&e, "name")?.unwrap_or_default(),
                    path: attr(&e, "plainTextPath")?,
                    text: None,
                });
                if empty {
                    finish_source(&mut source, &mut project, &mut archive)?;
                }
            }
            "PlainTextContent" => {
                if empty {
                    if let Some(src) = source.as_mut() {
                        src.text = Some(String::new());
                    }
                } else {
                    content = Some(String::new());
                }
            }
            "PlainTextSelection" => {
                if source.is_none() {
                    return Err(xml_err("<PlainTextSelection> outside <TextSource>"));
                }
                let guid = attr(&e, "guid")?.unwrap_or_default();
                let offset = |name: &str| -> Result<Option<usize>> { Ok(attr(&e, name)?.and_then(|v| v.parse().ok())) };
                selection = Some(PendingSelection {
                    guid,
                    start: offset("startPosition")?,
                    end: offset("endPosition")?,
                    codes: Vec::new(),
                });
                if empty {
                    finish_selection(&mut selection, &source, &mut raw_selections, &mut warnings);
                }
            }
            "CodeRef" => {
                let target = required(&e, "CodeRef", "targetGUID")?;
                if let Some(sel) = selection.as_mut() {
                    sel.codes.push(target);
                }
            }
            other => {
                if ignored.insert(other.to_string()) {
                    warnings.push(format!("ignored unsupported element <{other}>"));
                }
                if !empty {
                    let name = e.name().as_ref().to_vec();
                    reader.read_to_end(quick_xml::name::QName(&name)).map_err(xml_err)?;
                }
            }
        }
    }
    if !saw_project {
        return Err(xml_err("no <Project> element"));
    }

    let codes: HashSet<&str> = project.codes.iter().map(|c| c.guid.as_str()).collect();
    if let Some((sel, _)) = raw_selections.iter().find(|(s, _)| !codes.contains(s.code_guid.as_str())) {
        return Err(InterchangeError::DanglingCodeRef(sel.code_guid.clone()));
    }
    let lengths: HashMap<&str, usize> =
        project.sources.iter().map(|s| (s.guid.as_str(), char_len(&s.text))).collect();
    let mut selections = Vec::new();
    for (sel, sel_guid) in raw_selections {
        let len = lengths.get(sel.source_guid.as_str()).copied().unwrap_or(0);
        if sel.start < sel.end && sel.end <= len {
            selections.push(sel);
        } else {
            warnings.push(format!(
                "rejected selection {sel_guid}: offsets {}..{} outside source {} of length {len}",
                sel.start, sel.end, sel.source_guid
            ));
        }
    }
    project.selections = selections;
    project.validate()?;
    Ok(QdpxImport { project, warnings })
}

fn finish_selection(
    selection: &mut Option<PendingSelection>,
    source: &Option<PendingSource>,
    out: &mut Vec<(QdpxSelection, String)>,
    warnings: &mut Vec<String>,
) {
    let (Some(sel), Some(src)) = (selection.take(), source.as_ref()) else { return };
    let (Some(start), Some(end)) = (sel.start, sel.end) else {
        warnings.push(format!("rejected selection {}: missing or unreadable offsets", sel.guid));
        return;
    };
    if sel.codes.is_empty() {
        warnings.push(format!("selection {} has no coding; skipped", sel.guid));
    }
    for code in sel.codes {
        out.push((QdpxSelection { source_guid: src.guid.clone(), start, end, code_guid: code }, sel.guid.clone()));
    }
}

fn finish_source<R: Read + std::io::Seek>(
    source: &mut Option<PendingSource>,
    project: &mut QdpxProject,
    archive: &mut ZipArchive<R>,
) -> Result<()> {
    let Some(src) = source.take() else { return Ok(()) };
    let text = match src.text {
        Some(t) => t,
        None => {
            let file = src
                .path
                .as_deref()
                .and_then(|p| p.strip_prefix("internal://"))
                .map(str::to_string)
                .unwrap_or_else(|| format!("{}.txt", src.guid));
            let mut text = String::new();
            archive
                .by_name(&format!("sources/{file}"))
                .map_err(|_| invalid(&src.guid, "source has neither embedded nor archived text"))?
                .read_to_string(&mut text)?;
            text
        }
    };
    project.sources.push(QdpxSource { guid: src.guid, document_id: src.name, text });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project() -> QdpxProject {
        let mut p = QdpxProject::new("demo & co");
        p.codes = vec![
            QdpxCode { guid: guid(1, "code", 0), name: "finance".into() },
            QdpxCode { guid: guid(1, "code", 1), name: "water <risk>".into() },
        ];
        p.sources = vec![
            QdpxSource { guid: guid(1, "source", 0), document_id: "d1".into(), text: "Fünf Ökö-Projekte\r\nin Suva.".into() },
            QdpxSource { guid: guid(1, "source", 1), document_id: "d2".into(), text: "  padded  ".into() },
        ];
        p.selections = vec![
            QdpxSelection { source_guid: guid(1, "source", 0), start: 0, end: 4, code_guid: guid(1, "code", 0) },
            QdpxSelection { source_guid: guid(1, "source", 0), start: 5, end: 17, code_guid: guid(1, "code", 1) },
            QdpxSelection { source_guid: guid(1, "source", 1), start: 2, end: 8, code_guid: guid(1, "code", 1) },
        ];
        p
    }

    #[test]
    fn guids_are_deterministic_and_shaped() {
        assert_eq!(guid(3, "code", 0), guid(3, "code", 0));
        assert_ne!(guid(3, "code", 0), guid(3, "code", 1));
        assert_ne!(guid(3, "code", 0), guid(4, "code", 0));
        let g = Uuid::parse_str(&guid(0, "source", 9)).unwrap();
        assert_eq!(g.get_version_num(), 5);
    }

    #[test]
    fn round_trip_keeps_every_field() {
        let p = project();
        let back = read_qdpx(&qdpx_bytes(&p).unwrap()).unwrap();
        assert!(back.warnings.is_empty(), "{:?}", back.warnings);
        assert_eq!(back.project, p);
        assert_eq!(qdpx_bytes(&p).unwrap(), qdpx_bytes(&back.project).unwrap());
    }

    #[test]
    fn empty_project_round_trips() {
        let p = QdpxProject::new("");
        assert_eq!(read_qdpx(&qdpx_bytes(&p).unwrap()).unwrap().project, p);
    }

    #[test]
    fn archive_entry_order_is_fixed() {
        let bytes = qdpx_bytes(&project()).unwrap();
        let mut archive = ZipArchive::new(Cursor::new(bytes)).unwrap();
        let mut expected = vec![format!("sources/{}.txt", guid(1, "source", 0)), format!("sources/{}.txt", guid(1, "source", 1))];
        expected.sort();
        expected.insert(0, QDE.to_string());
        let names: Vec<String> = (0..archive.len()).map(|i| archive.by_index(i).unwrap().name().to_string()).collect();
        assert_eq!(names, expected);
    }

    #[test]
    fn validation_names_the_offender() {
        let mut p = project();
        p.selections[1].end = 99;
        let err = qdpx_bytes(&p).unwrap_err();
        assert!(err.to_string().contains(&guid(1, "source", 0)), "{err}");
        let mut p = project();
        p.codes[1].guid = "nope".into();
        assert!(matches!(p.validate(), Err(InterchangeError::Invalid { guid, .. }) if guid == "nope"));
    }

    fn zip_with(entries: &[(&str, &str)]) -> Vec<u8> {
        let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
        for (name, body) in entries {
            zip.start_file(*name, SimpleFileOptions::default()).unwrap();
            zip.write_all(body.as_bytes()).unwrap();
        }
        zip.finish().unwrap().into_inner()
    }

    #[test]
    fn missing_qde_is_reported() {
        let err = read_qdpx(&zip_with(&[("sources/x.txt", "hi")])).unwrap_err();
        assert_eq!(err.to_string(), "missing project.qde");
    }

    #[test]
    fn malformed_xml_is_fatal() {
        let bytes = zip_with(&[(QDE, "<Project><CodeBook></Project>")]);
        assert!(matches!(read_qdpx(&bytes), Err(InterchangeError::MalformedXml(_))));
    }

    const SOURCE: &str = "0b8d2f4e-6a1c-4e3b-9f7d-2c5a8e1b4d6f";
    const CODE: &str = "a3c5e7f9-1b2d-4f6a-8c0e-9d7b5a3c1e2f";

    #[test]
    fn hand_built_fixture_parses_to_literal_values() {
        let xml = format!(
            r#"<?xml version="1.0" encoding="utf-8"?>
<Project name="Fixture" xmlns="urn:QDA-XML:project:1.0">
  <Users><User guid="11111111-1111-4111-8111-111111111111" name="ana"/></Users>
  <CodeBook><Codes><Code guid="{CODE}" name="Support" isCodable="true"><Description>money</Description></Code></Codes></CodeBook>
  <Sources>
    <TextSource guid="{SOURCE}" name="ndc-7" plainTextPath="internal://{SOURCE}.txt">
      <PlainTextSelection guid="22222222-2222-4222-8222-222222222222" startPosition="4" endPosition="11">
        <Coding guid="33333333-3333-4333-8333-333333333333"><CodeRef targetGUID="{CODE}"/></Coding>
      </PlainTextSelection>
      <PlainTextSelection guid="44444444-4444-4444-8444-444444444444" startPosition="3" endPosition="500">
        <Coding guid="55555555-5555-4555-8555-555555555555"><CodeRef targetGUID="{CODE}"/></Coding>
      </PlainTextSelection>
    </TextSource>
  </Sources>
</Project>"#
        );
        let bytes = zip_with(&[(QDE, &xml), (&format!("sources/{SOURCE}.txt"), "The funding gap")]);
        let import = read_qdpx(&bytes).unwrap();
        let p = &import.project;
        assert_eq!(p.name, "Fixture");
        assert_eq!(p.codes, vec![QdpxCode { guid: CODE.into(), name: "Support".into() }]);
        assert_eq!(p.sources, vec![QdpxSource { guid: SOURCE.into(), document_id: "ndc-7".into(), text: "The funding gap".into() }]);
        assert_eq!(p.selections, vec![QdpxSelection { source_guid: SOURCE.into(), start: 4, end: 11, code_guid: CODE.into() }]);
        assert!(import.warnings.iter().any(|w| w.contains("<Users>")));
        assert!(import.warnings.iter().any(|w| w.contains("<Description>")));
        assert!(import.warnings.iter().any(|w| w.contains("44444444")));
    }

    #[test]
    fn dangling_code_ref_is_fatal() {
        let xml = format!(
            r#"<Project name="x"><CodeBook><Codes/></CodeBook><Sources><TextSource guid="{SOURCE}" name="a"><PlainTextContent>abc</PlainTextContent><PlainTextSelection guid="g" startPosition="0" endPosition="1"><Coding guid="c"><CodeRef targetGUID="{CODE}"/></Coding></PlainTextSelection></TextSource></Sources></Project>"#
        );
        let err = read_qdpx(&zip_with(&[(QDE, &xml)])).unwrap_err();
        assert!(matches!(err, InterchangeError::DanglingCodeRef(g) if g == CODE));
    }

    #[test]
    fn from_coding_selects_whole_documents() {
        let corpus = vec![Document::new("a", "fund it"), Document::new("b", ""), Document::new("c", "rain")];
        let cb = Codebook::from_ids(["fin", "wat"]).unwrap();
        let labels: BTreeMap<String, String> =
            [("a", "fin"), ("b", "wat"), ("c", "wat")].iter().map(|(d, c)| (d.to_string(), c.to_string())).collect();
        let p = QdpxProject::from_coding("p", 5, &corpus, &cb, &labels).unwrap();
        assert_eq!(p.sources.len(), 3);
        assert_eq!(p.selections.len(), 2);
        assert_eq!((p.selections[0].start, p.selections[0].end), (0, 7));
        assert_eq!(p.selections[1].code_guid, guid(5, "code", 1));
    }
}
