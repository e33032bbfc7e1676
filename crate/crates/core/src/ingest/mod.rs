//! Canonical corpora: patents, publications and the MeSH thesaurus.
//!
//! Every loader is line-oriented and collects per-record problems instead of
//! aborting, so one bad line never hides the rest of a file. Only I/O failures
//! (and thesaurus integrity violations) are hard errors.

mod medline;
mod thesaurus;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use medline::{convert_medline_xml, parse_medline_xml, MedlineError};
pub use thesaurus::{load_mesh_thesaurus, MeshEntry, Thesaurus, ThesaurusError};

use crate::family::parse_publication_number;

/// Languages a patent description (and the thesaurus) can be written in.
///
/// The declaration order is the description priority: English, then German,
/// then French.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    De,
    Fr,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::En, Language::De, Language::Fr];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::De => "de",
            Language::Fr => "fr",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "en" => Some(Language::En),
            "de" => Some(Language::De),
            "fr" => Some(Language::Fr),
            _ => None,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inventor {
    pub name: String,
    #[serde(default)]
    pub country: Option<String>,
}

/// One EP publication as delivered by the patent office.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentDocument {
    pub publication_number: String,
    pub filing_date: NaiveDate,
    #[serde(default)]
    pub inventors: Vec<Inventor>,
    #[serde(default)]
    pub applicants: Vec<String>,
    #[serde(default)]
    pub ipc_codes: Vec<String>,
    #[serde(default)]
    pub description_texts: BTreeMap<Language, String>,
    #[serde(default)]
    pub reference_strings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub last: String,
    #[serde(default)]
    pub fore: String,
    #[serde(default)]
    pub affiliation: Option<String>,
    #[serde(default)]
    pub email: Option<String>,
}

/// One scholarly article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub pub_id: String,
    #[serde(default)]
    pub title: String,
    pub publication_date: NaiveDate,
    #[serde(default)]
    pub authors: Vec<Author>,
    #[serde(default)]
    pub mesh_headings: Vec<String>,
    #[serde(default)]
    pub doi: Option<String>,
    #[serde(default)]
    pub reference_dois: Vec<String>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordErrorKind {
    Parse(String),
    Duplicate(String),
    Validation(String),
}

/// A rejected input line. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub line: usize,
    pub kind: RecordErrorKind,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RecordErrorKind::Parse(msg) => write!(f, "line {}: parse error: {msg}", self.line),
            RecordErrorKind::Duplicate(key) => write!(f, "line {}: duplicate key {key}", self.line),
            RecordErrorKind::Validation(msg) => {
                write!(f, "line {}: validation error: {msg}", self.line)
            }
        }
    }
}

/// Records that loaded plus the lines that were rejected.
#[derive(Debug, Clone)]
pub struct LoadReport<T> {
    pub records: Vec<T>,
    pub errors: Vec<RecordError>,
}

impl<T> LoadReport<T> {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Deserialize)]
struct RawPatent {
    publication_number: Option<String>,
    filing_date: Option<String>,
    #[serde(default)]
    inventors: Vec<Inventor>,
    #[serde(default)]
    applicants: Vec<String>,
    #[serde(default)]
    ipc_codes: Vec<String>,
    #[serde(default)]
    description_texts: BTreeMap<String, String>,
    #[serde(default)]
    reference_strings: Vec<String>,
}

#[derive(Deserialize)]
struct RawPublication {
    pub_id: Option<String>,
    #[serde(default)]
    title: String,
    publication_date: Option<String>,
    #[serde(default)]
    authors: Vec<Author>,
    #[serde(default)]
    mesh_headings: Vec<String>,
    #[serde(default)]
    doi: Option<String>,
    #[serde(default)]
    reference_dois: Vec<String>,
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_patents(path: &Path) -> Result<LoadReport<PatentDocument>, IngestError> {
    let file = open(path)?;
    read_patents(BufReader::new(file)).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_publications(path: &Path) -> Result<LoadReport<PublicationRecord>, IngestError> {
    let file = open(path)?;
    read_publications(BufReader::new(file)).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Runs `convert` on every non-blank line and tracks duplicate keys.
fn read_jsonl<R, T, F>(reader: R, mut convert: F) -> std::io::Result<LoadReport<T>>
where
    R: BufRead,
    F: FnMut(&str) -> Result<(String, T), RecordErrorKind>,
{
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match convert(&line) {
            Ok((key, record)) => {
                if seen.insert(key.clone()) {
                    records.push(record);
                } else {
                    errors.push(RecordError {
                        line: line_no,
                        kind: RecordErrorKind::Duplicate(key),
                    });
                }
            }
            Err(kind) => errors.push(RecordError { line: line_no, kind }),
        }
    }
    Ok(LoadReport { records, errors })
}

pub fn read_patents<R: BufRead>(reader: R) -> std::io::Result<LoadReport<PatentDocument>> {
    read_jsonl(reader, |line| {
        let raw: RawPatent = serde_json::from_str(line).map_err(|e| RecordErrorKind::Parse(e.to_string()))?;
        let doc = validate_patent(raw)?;
        Ok((doc.publication_number.clone(), doc))
    })
}

pub fn read_publications<R: BufRead>(reader: R) -> std::io::Result<LoadReport<PublicationRecord>> {
    read_jsonl(reader, |line| {
        let raw: RawPublication = serde_json::from_str(line).map_err(|e| RecordErrorKind::Parse(e.to_string()))?;
        let record = validate_publication(raw)?;
        Ok((record.pub_id.clone(), record))
    })
}

fn validate_patent(raw: RawPatent) -> Result<PatentDocument, RecordErrorKind> {
    let number = raw
        .publication_number
        .ok_or_else(|| RecordErrorKind::Validation("missing publication_number".into()))?;
    parse_publication_number(&number).map_err(|e| RecordErrorKind::Validation(e.to_string()))?;
    let date = raw
        .filing_date
        .ok_or_else(|| RecordErrorKind::Validation(format!("{number}: missing filing_date")))?;
    let filing_date = NaiveDate::parse_from_str(&date, "%Y-%m-%d")
        .map_err(|_| RecordErrorKind::Validation(format!("{number}: invalid filing_date {date:?}")))?;
    let mut description_texts = BTreeMap::new();
    for (code, text) in raw.description_texts {
        let lang = Language::from_code(&code)
            .ok_or_else(|| RecordErrorKind::Validation(format!("{number}: unknown language key {code:?}")))?;
        description_texts.insert(lang, text);
    }
    Ok(PatentDocument {
        publication_number: number,
        filing_date,
        inventors: raw.inventors,
        applicants: raw.applicants,
        ipc_codes: raw.ipc_codes,
        description_texts,
        reference_strings: raw.reference_strings,
    })
}

fn validate_publication(raw: RawPublication) -> Result<PublicationRecord, RecordErrorKind> {
    let pub_id = raw
        .pub_id
        .filter(|id| !id.trim().is_empty())
        .ok_or_else(|| RecordErrorKind::Validation("missing pub_id".into()))?;
    let date = raw
        .publication_date
        .ok_or_else(|| RecordErrorKind::Validation(format!("{pub_id}: missing publication_date")))?;
    let publication_date = parse_partial_date(&date)
        .ok_or_else(|| RecordErrorKind::Validation(format!("{pub_id}: invalid publication_date {date:?}")))?;
    Ok(PublicationRecord {
        pub_id,
        title: raw.title,
        publication_date,
        authors: raw.authors,
        mesh_headings: dedup_headings(raw.mesh_headings),
        doi: raw.doi,
        reference_dois: raw.reference_dois,
    })
}

/// Drops blank and repeated headings, keeping first occurrences in order.
pub fn dedup_headings(headings: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    headings
        .into_iter()
        .map(|h| h.trim().to_string())
        .filter(|h| !h.is_empty() && seen.insert(h.clone()))
        .collect()
}

/// Parses `YYYY-MM-DD`, `YYYY-MM` or `YYYY`.
///
/// Year-month dates land on the 15th, bare years on July 1st.
pub fn parse_partial_date(s: &str) -> Option<NaiveDate> {
    let parts: Vec<&str> = s.trim().split('-').collect();
    let year: i32 = parts.first()?.parse().ok()?;
    if parts[0].len() != 4 {
        return None;
    }
    match parts.len() {
        1 => NaiveDate::from_ymd_opt(year, 7, 1),
        2 => NaiveDate::from_ymd_opt(year, parts[1].parse().ok()?, 15),
        3 => NaiveDate::from_ymd_opt(year, parts[1].parse().ok()?, parts[2].parse().ok()?),
        _ => None,
    }
}

/// Serializes records as JSONL, one object per line.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, IngestError> {
    let mut buf = String::new();
    open(path)?.read_to_string(&mut buf).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patents(input: &str) -> LoadReport<PatentDocument> {
        read_patents(input.as_bytes()).unwrap()
    }

    const EP_LINE: &str = r#"{"publication_number":"EP00100008A1","filing_date":"2000-03-01","inventors":[{"name":"Klaus Lippert","country":"DE"}],"applicants":["Universitaet Koeln"],"ipc_codes":["A61K 38/17"],"description_texts":{"en":"text"},"reference_strings":[]}"#;

    #[test]
    fn loads_single_patent() {
        let report = patents(EP_LINE);
        assert!(report.is_clean());
        assert_eq!(report.records.len(), 1);
        let doc = &report.records[0];
        assert_eq!(doc.publication_number, "EP00100008A1");
        assert_eq!(doc.filing_date, NaiveDate::from_ymd_opt(2000, 3, 1).unwrap());
        assert_eq!(doc.inventors[0].country.as_deref(), Some("DE"));
    }

    #[test]
    fn rejects_non_ep_number() {
        let line = EP_LINE.replace("EP00100008A1", "US123A1");
        let report = patents(&line);
        assert!(report.records.is_empty());
        assert!(matches!(report.errors[0].kind, RecordErrorKind::Validation(_)));
    }

    #[test]
    fn unknown_language_is_reported_with_line() {
        let bad = EP_LINE
            .replace("EP00100008A1", "EP00100009A1")
            .replace(r#""en":"text""#, r#""it":"testo""#);
        let third = EP_LINE.replace("EP00100008A1", "EP00100010B1");
        let input = format!("{EP_LINE}\n{bad}\n{third}\n");
        let report = patents(&input);
        assert_eq!(report.records.len(), 2);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].line, 2);
        assert!(matches!(report.errors[0].kind, RecordErrorKind::Validation(ref m) if m.contains("\"it\"")));
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        let input = format!("{EP_LINE}\n{{not json\n{EP_LINE}\n");
        let report = patents(&input);
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.errors.len(), 2);
        assert_eq!(report.errors[0].line, 2);
        assert!(matches!(report.errors[0].kind, RecordErrorKind::Parse(_)));
        assert_eq!(report.errors[1].kind, RecordErrorKind::Duplicate("EP00100008A1".into()));
    }

    #[test]
    fn invalid_filing_date() {
        let line = EP_LINE.replace("2000-03-01", "2000-02-30");
        assert!(matches!(patents(&line).errors[0].kind, RecordErrorKind::Validation(_)));
    }

    #[test]
    fn publication_headings_are_deduplicated() {
        let line = r#"{"pub_id":"1","title":"t","publication_date":"2001-01-01","authors":[],"mesh_headings":["Diabetes Mellitus","Diabetes Mellitus"],"doi":null,"reference_dois":[]}"#;
        let report = read_publications(line.as_bytes()).unwrap();
        assert_eq!(report.records[0].mesh_headings, vec!["Diabetes Mellitus"]);
    }

    #[test]
    fn publication_without_id_or_date() {
        let no_id = r#"{"title":"t","publication_date":"2001-01-01"}"#;
        let no_date = r#"{"pub_id":"7","title":"t"}"#;
        let report = read_publications(format!("{no_id}\n{no_date}").as_bytes()).unwrap();
        assert!(report.records.is_empty());
        assert_eq!(report.errors.len(), 2);
        assert!(report
            .errors
            .iter()
            .all(|e| matches!(e.kind, RecordErrorKind::Validation(_))));
    }

    #[test]
    fn publication_fixture_keeps_order() {
        let input: String = (0..200)
            .map(|i| format!("{{\"pub_id\":\"p{i}\",\"title\":\"t\",\"publication_date\":\"2001-02-03\"}}\n"))
            .collect();
        let report = read_publications(input.as_bytes()).unwrap();
        assert_eq!(report.records.len(), 200);
        assert!(report
            .records
            .iter()
            .enumerate()
            .all(|(i, r)| r.pub_id == format!("p{i}")));
    }

    #[test]
    fn partial_dates_use_midpoints() {
        assert_eq!(parse_partial_date("2001-04"), NaiveDate::from_ymd_opt(2001, 4, 15));
        assert_eq!(parse_partial_date("2001"), NaiveDate::from_ymd_opt(2001, 7, 1));
        assert_eq!(parse_partial_date("01-04"), None);
        assert_eq!(parse_partial_date("2001-13"), None);
    }

    #[test]
    fn jsonl_round_trip() {
        let report = patents(EP_LINE);
        let again = patents(&to_jsonl(&report.records));
        assert_eq!(report.records, again.records);
    }
}
