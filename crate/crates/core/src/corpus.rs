//! Documents, import with field mapping, gazetteer entity tagging and
//! content deduplication.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{char_len, char_slice, fold_char, is_word_char};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no body column")]
    NoBodyColumn,
    #[error("more than one column maps to {0}")]
    DuplicateTarget(String),
    #[error("mapped column {0:?} not found in header")]
    UnknownColumn(String),
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("delimiter must be a single ASCII character, got {0:?}")]
    BadDelimiter(char),
    #[error("invalid field target {0:?}")]
    BadTarget(String),
    #[error("invalid entity kind {0:?}")]
    BadEntityKind(String),
    #[error("gazetteer line {line}: {message}")]
    BadGazetteer { line: usize, message: String },
    #[error("threshold {0} outside (0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityKind {
    Location,
    Person,
    Organization,
    Other,
}

impl EntityKind {
    pub const ALL: [EntityKind; 4] = [
        EntityKind::Location,
        EntityKind::Person,
        EntityKind::Organization,
        EntityKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Location => "LOCATION",
            EntityKind::Person => "PERSON",
            EntityKind::Organization => "ORGANIZATION",
            EntityKind::Other => "OTHER",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LOCATION" | "LOC" => Ok(EntityKind::Location),
            "PERSON" | "PER" => Ok(EntityKind::Person),
            "ORGANIZATION" | "ORGANISATION" | "ORG" => Ok(EntityKind::Organization),
            "OTHER" | "MISC" => Ok(EntityKind::Other),
            _ => Err(CorpusError::BadEntityKind(s.to_string())),
        }
    }
}

/// A tagged entity mention. Offsets are scalar values into the body,
/// `start` inclusive and `end` exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub kind: EntityKind,
    pub surface: String,
}

/// One text with its metadata; the atomic analysis unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub date: Option<NaiveDate>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default)]
    pub entity_tags: Vec<EntitySpan>,
}

impl Document {
    pub fn new(id: impl Into<String>, body: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            title: String::new(),
            body: body.into(),
            date: None,
            metadata: BTreeMap::new(),
            entity_tags: Vec::new(),
        }
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn with_date(mut self, date: NaiveDate) -> Self {
        self.date = Some(date);
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Body length in scalar values.
    pub fn len_chars(&self) -> usize {
        char_len(&self.body)
    }

    pub fn slice(&self, start: usize, end: usize) -> &str {
        char_slice(&self.body, start, end)
    }

    /// Checks that every entity span lies inside the body and matches its surface.
    pub fn spans_consistent(&self) -> bool {
        let n = self.len_chars();
        self.entity_tags
            .iter()
            .all(|s| s.start < s.end && s.end <= n && self.slice(s.start, s.end) == s.surface)
    }
}

/// Destination of a source column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FieldTarget {
    Id,
    Title,
    Body,
    Date,
    Metadata(String),
}

impl FromStr for FieldTarget {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id" => Ok(FieldTarget::Id),
            "title" => Ok(FieldTarget::Title),
            "body" => Ok(FieldTarget::Body),
            "date" => Ok(FieldTarget::Date),
            _ => match s.strip_prefix("metadata:") {
                Some(field) if !field.is_empty() => Ok(FieldTarget::Metadata(field.to_string())),
                _ => Err(CorpusError::BadTarget(s.to_string())),
            },
        }
    }
}

impl TryFrom<String> for FieldTarget {
    type Error = CorpusError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FieldTarget> for String {
    fn from(t: FieldTarget) -> String {
        t.to_string()
    }
}

impl fmt::Display for FieldTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldTarget::Id => f.write_str("id"),
            FieldTarget::Title => f.write_str("title"),
            FieldTarget::Body => f.write_str("body"),
            FieldTarget::Date => f.write_str("date"),
            FieldTarget::Metadata(field) => write!(f, "metadata:{field}"),
        }
    }
}

/// How the columns of a delimited file become document fields.
/// Columns that are not mapped are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportMapping {
    /// Source column name → target field.
    pub columns: BTreeMap<String, FieldTarget>,
    #[serde(default = "default_date_format")]
    pub date_format: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_date_format() -> String {
    "%Y-%m-%d".to_string()
}

fn default_delimiter() -> char {
    ','
}

impl Default for ImportMapping {
    fn default() -> Self {
        ImportMapping {
            columns: BTreeMap::new(),
            date_format: default_date_format(),
            delimiter: default_delimiter(),
        }
    }
}

impl ImportMapping {
    pub fn map(mut self, column: impl Into<String>, target: FieldTarget) -> Self {
        self.columns.insert(column.into(), target);
        self
    }

    pub fn delimiter(mut self, delimiter: char) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn date_format(mut self, format: impl Into<String>) -> Self {
        self.date_format = format.into();
        self
    }

    /// The mapping that reads back a file written by
    /// [`crate::interchange::export_corpus_csv`] with the given metadata fields.
    pub fn for_corpus_export<'a>(metadata_fields: impl IntoIterator<Item = &'a str>) -> Self {
        let mut m = ImportMapping::default()
            .map("id", FieldTarget::Id)
            .map("title", FieldTarget::Title)
            .map("date", FieldTarget::Date)
            .map("body", FieldTarget::Body);
        for field in metadata_fields {
            m = m.map(field, FieldTarget::Metadata(field.to_string()));
        }
        m
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let mut has_body = false;
        for target in self.columns.values() {
            match target {
                FieldTarget::Metadata(_) => {}
                FieldTarget::Body if has_body => return Err(CorpusError::DuplicateTarget("body".into())),
                FieldTarget::Body => has_body = true,
                t => {
                    if !seen.insert(t.clone()) {
                        return Err(CorpusError::DuplicateTarget(t.to_string()));
                    }
                }
            }
        }
        if !has_body {
            return Err(CorpusError::NoBodyColumn);
        }
        if !self.delimiter.is_ascii() {
            return Err(CorpusError::BadDelimiter(self.delimiter));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub rows: usize,
    pub accepted: usize,
    pub rejected: Vec<RejectedRow>,
}

impl fmt::Display for ImportReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "rows: {}, accepted: {}, rejected: {}",
            self.rows,
            self.accepted,
            self.rejected.len()
        )?;
        for r in &self.rejected {
            writeln!(f, "  row {}: {}", r.row, r.reason)?;
        }
        Ok(())
    }
}

pub fn import_csv(path: impl AsRef<Path>, mapping: &ImportMapping) -> Result<(Vec<Document>, ImportReport)> {
    let file = std::fs::File::open(path)?;
    import_csv_reader(file, mapping)
}

/// Imports one document per data row.
///
/// Rows with an unparseable date or an empty explicit id are rejected and
/// reported; structural problems (bad mapping, malformed CSV, duplicate ids)
/// fail the whole import. Without an id column, ids are the zero-padded data
/// row ordinals (`000000`, `000001`, ...). Empty metadata cells are not stored.
pub fn import_csv_reader<R: Read>(reader: R, mapping: &ImportMapping) -> Result<(Vec<Document>, ImportReport)> {
    mapping.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CorpusError::MalformedCsv(e.to_string()))?
        .clone();
    let mut plan: Vec<(usize, &FieldTarget)> = Vec::new();
    for (column, target) in &mapping.columns {
        let idx = header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| CorpusError::UnknownColumn(column.clone()))?;
        plan.push((idx, target));
    }
    let has_id = mapping.columns.values().any(|t| *t == FieldTarget::Id);

    let mut docs = Vec::new();
    let mut report = ImportReport::default();
    let mut ids = HashSet::new();
    for (ordinal, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CorpusError::MalformedCsv(e.to_string()))?;
        report.rows += 1;
        let mut doc = Document::new(format!("{ordinal:06}"), "");
        let mut reject = None;
        for &(idx, target) in &plan {
            let value = record.get(idx).unwrap_or("");
            match target {
                FieldTarget::Id => doc.id = value.to_string(),
                FieldTarget::Title => doc.title = value.to_string(),
                FieldTarget::Body => doc.body = value.to_string(),
                FieldTarget::Date => {
                    if !value.trim().is_empty() {
                        match NaiveDate::parse_from_str(value.trim(), &mapping.date_format) {
                            Ok(d) => doc.date = Some(d),
                            Err(_) => reject = Some("date parse".to_string()),
                        }
                    }
                }
                FieldTarget::Metadata(field) => {
                    if !value.is_empty() {
                        doc.metadata.insert(field.clone(), value.to_string());
                    }
                }
            }
        }
        if has_id && doc.id.is_empty() {
            reject = Some("empty id".to_string());
        }
        if let Some(reason) = reject {
            report.rejected.push(RejectedRow { row: ordinal + 1, reason });
            continue;
        }
        if !ids.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    report.accepted = docs.len();
    Ok((docs, report))
}

/// Imports every `.txt` file in `dir` (sorted by name) as one document whose
/// id and title are the file stem.
pub fn import_text_dir(dir: impl AsRef<Path>) -> Result<Vec<Document>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let body = std::fs::read_to_string(&p)?;
            Ok(Document::new(stem.clone(), body).with_title(stem))
        })
        .collect()
}

/// Surface form → entity kind, matched case-insensitively.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    entries: BTreeMap<String, EntityKind>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry; empty (after trimming) surfaces are ignored.
    pub fn insert(&mut self, surface: &str, kind: EntityKind) {
        let key: String = surface.trim().chars().map(fold_char).collect();
        if !key.is_empty() {
            self.entries.insert(key, kind);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, EntityKind)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Parses the `surface<TAB>kind` line format. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut g = Gazetteer::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, kind) = line.split_once('\t').ok_or_else(|| CorpusError::BadGazetteer {
                line: i + 1,
                message: "expected surface<TAB>kind".into(),
            })?;
            let kind = kind.parse().map_err(|_| CorpusError::BadGazetteer {
                line: i + 1,
                message: format!("unknown kind {kind:?}"),
            })?;
            g.insert(surface, kind);
        }
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

impl<'a> FromIterator<(&'a str, EntityKind)> for Gazetteer {
    fn from_iter<I: IntoIterator<Item = (&'a str, EntityKind)>>(iter: I) -> Self {
        let mut g = Gazetteer::new();
        for (s, k) in iter {
            g.insert(s, k);
        }
        g
    }
}

fn is_boundary(chars: &[char], p: usize) -> bool {
    p == 0 || p >= chars.len() || !(is_word_char(chars[p - 1]) && is_word_char(chars[p]))
}

/// Replaces `doc`'s entity tags with the gazetteer matches in its body.
///
/// Matches are case-insensitive, start and end on token boundaries, and are
/// taken leftmost-longest so that spans never overlap.
pub fn tag_entities(mut doc: Document, gazetteer: &Gazetteer) -> Document {
    let chars: Vec<char> = doc.body.chars().collect();
    let folded: Vec<char> = chars.iter().copied().map(fold_char).collect();

    let mut by_first: HashMap<char, Vec<(Vec<char>, EntityKind)>> = HashMap::new();
    for (key, kind) in gazetteer.iter() {
        let key: Vec<char> = key.chars().collect();
        by_first.entry(key[0]).or_default().push((key, kind));
    }
    for candidates in by_first.values_mut() {
        candidates.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    }

    let mut spans = Vec::new();
    let mut p = 0;
    while p < chars.len() {
        let hit = if is_boundary(&chars, p) {
            by_first.get(&folded[p]).and_then(|cands| {
                cands.iter().find(|(key, _)| {
                    let end = p + key.len();
                    end <= chars.len() && folded[p..end] == key[..] && is_boundary(&chars, end)
                })
            })
        } else {
            None
        };
        match hit {
            Some((key, kind)) => {
                let end = p + key.len();
                spans.push(EntitySpan {
                    start: p,
                    end,
                    kind: *kind,
                    surface: chars[p..end].iter().collect(),
                });
                p = end;
            }
            None => p += 1,
        }
    }
    doc.entity_tags = spans;
    doc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateMember {
    pub id: String,
    /// Jaccard similarity of this member's shingles to the representative's.
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateGroup {
    pub representative: String,
    /// All members including the representative, sorted by id.
    pub members: Vec<DuplicateMember>,
}

impl DuplicateGroup {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|m| m.id.as_str())
    }
}

pub const SHINGLE_WORDS: usize = 5;

/// Word-level shingles of a body: lowercased whitespace tokens joined in
/// windows of [`SHINGLE_WORDS`]. Shorter bodies yield their whole word
/// sequence as a single shingle.
pub fn shingles(body: &str) -> BTreeSet<String> {
    let words: Vec<String> = body.split_whitespace().map(str::to_lowercase).collect();
    if words.is_empty() {
        return BTreeSet::new();
    }
    if words.len() < SHINGLE_WORDS {
        return BTreeSet::from([words.join(" ")]);
    }
    words.windows(SHINGLE_WORDS).map(|w| w.join(" ")).collect()
}

/// Jaccard similarity; two empty sets are identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Groups documents whose shingle Jaccard similarity reaches `threshold`,
/// closed transitively. Documents without a partner are omitted. Groups are
/// sorted by representative (the smallest id in the group).
pub fn deduplicate(corpus: &[Document], threshold: f64) -> Result<Vec<DuplicateGroup>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CorpusError::ThresholdOutOfRange(threshold));
    }
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| corpus[a].id.cmp(&corpus[b].id));
    let sets: Vec<BTreeSet<String>> = order.iter().map(|&i| shingles(&corpus[i].body)).collect();

    let mut ds = DisjointSet::new(sets.len());
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if jaccard(&sets[i], &sets[j]) >= threshold {
                ds.union(i, j);
            }
        }
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..sets.len() {
        let root = ds.find(i);
        components.entry(root).or_default().push(i);
    }
    Ok(components
        .into_values()
        .filter(|members| members.len() > 1)
        .map(|members| {
            // sorted position order == id order, so members[0] is the smallest id
            let rep = members[0];
            DuplicateGroup {
                representative: corpus[order[rep]].id.clone(),
                members: members
                    .iter()
                    .map(|&m| DuplicateMember {
                        id: corpus[order[m]].id.clone(),
                        similarity: jaccard(&sets[m], &sets[rep]),
                    })
                    .collect(),
            }
        })
        .collect())
}
