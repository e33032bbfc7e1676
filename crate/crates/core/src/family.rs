//! EP patent families: every publication sharing a base number.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Language, PatentDocument};
use crate::names::{NameNormalizer, NormalizedName};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FamilyError {
    #[error("invalid EP publication number {0:?}")]
    BadNumber(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KindCode {
    /// Application.
    A,
    /// Granted specification.
    B,
}

/// `EP00100008A1` split into base `EP00100008`, kind `A`, sequence `1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParsedPublicationNumber {
    pub base: String,
    pub kind: KindCode,
    pub sequence: u8,
}

impl fmt::Display for ParsedPublicationNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            KindCode::A => 'A',
            KindCode::B => 'B',
        };
        write!(f, "{}{}{}", self.base, kind, self.sequence)
    }
}

pub fn parse_publication_number(s: &str) -> Result<ParsedPublicationNumber, FamilyError> {
    let bad = || FamilyError::BadNumber(s.to_string());
    let digits = s.strip_prefix("EP").ok_or_else(bad)?;
    let bytes = digits.as_bytes();
    if bytes.len() < 3 {
        return Err(bad());
    }
    let (body, suffix) = bytes.split_at(bytes.len() - 2);
    if body.is_empty() || !body.iter().all(u8::is_ascii_digit) || !suffix[1].is_ascii_digit() {
        return Err(bad());
    }
    let kind = match suffix[0] {
        b'A' => KindCode::A,
        b'B' => KindCode::B,
        _ => return Err(bad()),
    };
    Ok(ParsedPublicationNumber {
        base: format!("EP{}", std::str::from_utf8(body).expect("ascii digits")),
        kind,
        sequence: suffix[1] - b'0',
    })
}

/// Merged view of all EP documents sharing one base number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentFamily {
    pub family_id: String,
    pub filing_date: NaiveDate,
    pub inventors: Vec<NormalizedName>,
    /// Inventor strings exactly as filed, titles included.
    pub raw_inventors: Vec<String>,
    pub applicants: Vec<String>,
    pub ipc_codes: Vec<String>,
    pub description_texts: BTreeMap<Language, Vec<String>>,
    pub reference_strings: Vec<String>,
    pub member_numbers: Vec<String>,
}

impl PatentFamily {
    pub fn filed_within(&self, from: NaiveDate, to: NaiveDate) -> bool {
        self.filing_date >= from && self.filing_date <= to
    }

    pub fn filing_year(&self) -> i32 {
        use chrono::Datelike;
        self.filing_date.year()
    }
}

fn push_unique(dst: &mut Vec<String>, seen: &mut HashSet<String>, value: &str) {
    if seen.insert(value.to_string()) {
        dst.push(value.to_string());
    }
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Groups documents by base number and merges their fields.
///
/// Members are visited earliest filing first, so when the same normalized
/// inventor appears with different countries the earliest filing wins.
/// Families are returned ordered by `family_id`.
pub fn group_into_families(
    docs: &[PatentDocument],
    normalizer: &NameNormalizer,
) -> Result<Vec<PatentFamily>, FamilyError> {
    let mut groups: BTreeMap<String, Vec<&PatentDocument>> = BTreeMap::new();
    for doc in docs {
        let parsed = parse_publication_number(&doc.publication_number)?;
        groups.entry(parsed.base).or_default().push(doc);
    }
    Ok(groups
        .into_iter()
        .map(|(base, mut members)| {
            members.sort_by(|a, b| (a.filing_date, &a.publication_number).cmp(&(b.filing_date, &b.publication_number)));
            merge(base, &members, normalizer)
        })
        .collect())
}

fn merge(family_id: String, members: &[&PatentDocument], normalizer: &NameNormalizer) -> PatentFamily {
    let mut inventors = Vec::new();
    let mut inventor_keys = HashSet::new();
    let mut raw_inventors = Vec::new();
    let mut raw_seen = HashSet::new();
    let mut applicants = Vec::new();
    let mut applicant_seen = HashSet::new();
    let mut ipc_codes = Vec::new();
    let mut ipc_seen = HashSet::new();
    let mut references = Vec::new();
    let mut reference_seen = HashSet::new();
    let mut texts: BTreeMap<Language, Vec<String>> = BTreeMap::new();
    let mut text_seen: HashSet<(Language, String)> = HashSet::new();

    for doc in members {
        for inventor in &doc.inventors {
            push_unique(&mut raw_inventors, &mut raw_seen, &inventor.name);
            match normalizer.normalize(&inventor.name, inventor.country.as_deref()) {
                Ok(name) => {
                    if inventor_keys.insert(name.canonical()) {
                        inventors.push(name);
                    }
                }
                Err(e) => log::warn!("{}: skipping inventor: {e}", doc.publication_number),
            }
        }
        for a in &doc.applicants {
            push_unique(&mut applicants, &mut applicant_seen, a);
        }
        for c in &doc.ipc_codes {
            push_unique(&mut ipc_codes, &mut ipc_seen, c.trim());
        }
        for r in &doc.reference_strings {
            push_unique(&mut references, &mut reference_seen, r.trim());
        }
        for (lang, text) in &doc.description_texts {
            let key = collapse_whitespace(text);
            if !key.is_empty() && text_seen.insert((*lang, key)) {
                texts.entry(*lang).or_default().push(text.clone());
            }
        }
    }

    PatentFamily {
        family_id,
        filing_date: members[0].filing_date,
        inventors,
        raw_inventors,
        applicants,
        ipc_codes,
        description_texts: texts,
        reference_strings: references,
        member_numbers: members.iter().map(|d| d.publication_number.clone()).collect(),
    }
}
