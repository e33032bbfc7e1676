//! Minimal MEDLINE/PubMed XML to [`PublicationRecord`] conversion.
//!
//! Only the handful of elements the pipeline needs are read; everything else
//! is skipped. Records without a usable publication year are dropped with a
//! warning.

use std::path::Path;
use std::sync::LazyLock;

use chrono::NaiveDate;
use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;
use thiserror::Error;

use super::{dedup_headings, read_to_string, Author, IngestError, PublicationRecord};

#[derive(Debug, Error)]
pub enum MedlineError {
    #[error(transparent)]
    Io(#[from] IngestError),
    #[error("malformed XML at byte {position}: {message}")]
    Xml { position: u64, message: String },
}

static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)+").unwrap());

#[derive(Default)]
struct PartialRecord {
    pmid: Option<String>,
    title: String,
    year: Option<i32>,
    month: Option<u32>,
    day: Option<u32>,
    authors: Vec<Author>,
    headings: Vec<String>,
    doi: Option<String>,
    reference_dois: Vec<String>,
}

impl PartialRecord {
    fn finish(self) -> Option<PublicationRecord> {
        let Some(pmid) = self.pmid else {
            log::warn!("skipping MEDLINE citation without PMID");
            return None;
        };
        let Some(year) = self.year else {
            log::warn!("skipping PMID {pmid}: no publication year");
            return None;
        };
        let date = match (self.month, self.day) {
            (Some(m), Some(d)) => NaiveDate::from_ymd_opt(year, m, d),
            (Some(m), None) => NaiveDate::from_ymd_opt(year, m, 15),
            _ => NaiveDate::from_ymd_opt(year, 7, 1),
        };
        let Some(publication_date) = date else {
            log::warn!("skipping PMID {pmid}: invalid publication date");
            return None;
        };
        Some(PublicationRecord {
            pub_id: pmid,
            title: self.title.trim().to_string(),
            publication_date,
            authors: self.authors,
            mesh_headings: dedup_headings(self.headings),
            doi: self.doi,
            reference_dois: self.reference_dois,
        })
    }
}

fn month_number(s: &str) -> Option<u32> {
    if let Ok(n) = s.parse::<u32>() {
        return (1..=12).contains(&n).then_some(n);
    }
    const MONTHS: [&str; 12] = [
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
    ];
    let prefix = s.get(..3)?.to_ascii_lowercase();
    MONTHS.iter().position(|m| *m == prefix).map(|i| i as u32 + 1)
}

pub fn convert_medline_xml(path: &Path) -> Result<Vec<PublicationRecord>, MedlineError> {
    parse_medline_xml(&read_to_string(path)?)
}

pub fn parse_medline_xml(xml: &str) -> Result<Vec<PublicationRecord>, MedlineError> {
    let mut reader = Reader::from_str(xml);
    let mut stack: Vec<String> = Vec::new();
    let mut text = String::new();
    let mut record: Option<(usize, PartialRecord)> = None;
    let mut id_type: Option<String> = None;
    let mut out = Vec::new();

    let err = |reader: &Reader<&[u8]>, message: String| MedlineError::Xml {
        position: reader.buffer_position(),
        message,
    };

    loop {
        let event = reader.read_event().map_err(|e| err(&reader, e.to_string()))?;
        match event {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                text.clear();
                let opens_record = name == "PubmedArticle" || (name == "MedlineCitation" && record.is_none());
                if opens_record {
                    record = Some((stack.len(), PartialRecord::default()));
                }
                if name == "Author" && stack.last().map(String::as_str) == Some("AuthorList") {
                    if let Some((_, rec)) = record.as_mut() {
                        rec.authors.push(Author {
                            last: String::new(),
                            fore: String::new(),
                            affiliation: None,
                            email: None,
                        });
                    }
                }
                if name == "ELocationID" || name == "ArticleId" {
                    let attr = if name == "ELocationID" { "EIdType" } else { "IdType" };
                    id_type = e
                        .try_get_attribute(attr)
                        .ok()
                        .flatten()
                        .map(|a| String::from_utf8_lossy(&a.value).into_owned());
                }
                stack.push(name);
            }
            Event::Text(t) => {
                let decoded = t.decode().map_err(|e| err(&reader, e.to_string()))?;
                text.push_str(&decoded);
            }
            Event::CData(t) => {
                let decoded = t.decode().map_err(|e| err(&reader, e.to_string()))?;
                text.push_str(&decoded);
            }
            Event::GeneralRef(r) => {
                if let Some(ch) = r.resolve_char_ref().map_err(|e| err(&reader, e.to_string()))? {
                    text.push(ch);
                } else {
                    let name = r.decode().map_err(|e| err(&reader, e.to_string()))?;
                    match resolve_predefined_entity(&name) {
                        Some(s) => text.push_str(s),
                        None => return Err(err(&reader, format!("unknown entity &{name};"))),
                    }
                }
            }
            Event::End(_) => {
                let Some(name) = stack.pop() else {
                    return Err(err(&reader, "unexpected closing tag".into()));
                };
                let value = text.trim().to_string();
                let parent = stack.last().map(String::as_str).unwrap_or("");
                let grandparent = stack.len().checked_sub(2).map(|i| stack[i].as_str()).unwrap_or("");
                let in_reference = stack.iter().any(|s| s == "Reference");
                let in_author = stack.iter().any(|s| s == "Author");
                if let Some((depth, rec)) = record.as_mut() {
                    match name.as_str() {
                        "PMID" if parent == "MedlineCitation" && rec.pmid.is_none() => rec.pmid = Some(value.clone()),
                        "ArticleTitle" => rec.title = value.clone(),
                        "Year" if parent == "PubDate" => rec.year = value.parse().ok(),
                        "Month" if parent == "PubDate" => rec.month = month_number(&value),
                        "Day" if parent == "PubDate" => rec.day = value.parse().ok(),
                        "MedlineDate" if parent == "PubDate" => {
                            let mut parts = value.split_whitespace();
                            rec.year = parts.next().and_then(|y| y.get(..4)?.parse().ok());
                            rec.month = parts.next().and_then(month_number);
                        }
                        "LastName" if in_author => {
                            if let Some(a) = rec.authors.last_mut() {
                                a.last = value.clone();
                            }
                        }
                        "ForeName" if in_author => {
                            if let Some(a) = rec.authors.last_mut() {
                                a.fore = value.clone();
                            }
                        }
                        "Initials" if in_author => {
                            if let Some(a) = rec.authors.last_mut() {
                                if a.fore.is_empty() {
                                    a.fore = value.clone();
                                }
                            }
                        }
                        "Affiliation" if in_author => {
                            if let Some(a) = rec.authors.last_mut() {
                                if a.email.is_none() {
                                    a.email = EMAIL.find(&value).map(|m| m.as_str().trim_end_matches('.').to_string());
                                }
                                if a.affiliation.is_none() {
                                    a.affiliation = Some(value.clone());
                                }
                            }
                        }
                        "DescriptorName" if parent == "MeshHeading" => rec.headings.push(value.clone()),
                        "ELocationID" if id_type.as_deref() == Some("doi") => {
                            if rec.doi.is_none() {
                                rec.doi = Some(value.clone());
                            }
                        }
                        "ArticleId" if id_type.as_deref() == Some("doi") => {
                            if in_reference {
                                rec.reference_dois.push(value.clone());
                            } else if grandparent == "PubmedData" && rec.doi.is_none() {
                                rec.doi = Some(value.clone());
                            }
                        }
                        _ => {}
                    }
                    if stack.len() == *depth {
                        let (_, finished) = record.take().expect("record open");
                        if let Some(r) = finished.finish() {
                            out.push(r);
                        }
                    }
                }
                if name == "Author" {
                    if let Some((_, rec)) = record.as_mut() {
                        if rec.authors.last().is_some_and(|a| a.last.is_empty()) {
                            rec.authors.pop();
                        }
                    }
                }
                text.clear();
            }
            Event::Eof => {
                if !stack.is_empty() {
                    return Err(err(
                        &reader,
                        format!("unexpected end of input inside <{}>", stack.join("/")),
                    ));
                }
                break;
            }
            _ => {}
        }
    }
    Ok(out)
}
