use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{read_to_string, IngestError, Language};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshEntry {
    pub descriptor_id: String,
    pub language: Language,
    pub term: String,
    pub is_main_heading: bool,
}

#[derive(Debug, Error)]
pub enum ThesaurusError {
    #[error(transparent)]
    Io(#[from] IngestError),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("descriptor {0} has no English main heading")]
    MissingEnglishHeading(String),
    #[error("descriptor {0} has more than one English main heading")]
    DuplicateEnglishHeading(String),
}

/// MeSH descriptors with their English main headings and all entry terms
/// in English, German and French.
#[derive(Debug, Clone, Default)]
pub struct Thesaurus {
    entries: Vec<MeshEntry>,
    headings: BTreeMap<String, String>,
    by_term: HashMap<(Language, String), String>,
}

impl Thesaurus {
    /// Builds the indices and checks that every descriptor resolves to
    /// exactly one English main heading.
    pub fn from_entries(entries: Vec<MeshEntry>) -> Result<Self, ThesaurusError> {
        let mut headings = BTreeMap::new();
        for entry in &entries {
            if entry.language == Language::En
                && entry.is_main_heading
                && headings
                    .insert(entry.descriptor_id.clone(), entry.term.clone())
                    .is_some()
            {
                return Err(ThesaurusError::DuplicateEnglishHeading(entry.descriptor_id.clone()));
            }
        }
        let mut by_term = HashMap::new();
        for entry in &entries {
            if !headings.contains_key(&entry.descriptor_id) {
                return Err(ThesaurusError::MissingEnglishHeading(entry.descriptor_id.clone()));
            }
            by_term
                .entry((entry.language, entry.term.to_lowercase()))
                .or_insert_with(|| entry.descriptor_id.clone());
        }
        Ok(Self {
            entries,
            headings,
            by_term,
        })
    }

    pub fn parse_tsv(input: &str) -> Result<Self, ThesaurusError> {
        let mut entries = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() || (idx == 0 && line.starts_with("descriptor_id\t")) {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let format_err = |message: String| ThesaurusError::Format { line: line_no, message };
            if fields.len() != 4 {
                return Err(format_err(format!("expected 4 columns, got {}", fields.len())));
            }
            let language = Language::from_code(fields[1])
                .ok_or_else(|| format_err(format!("unknown language {:?}", fields[1])))?;
            let is_main_heading = match fields[3].trim() {
                "true" | "1" => true,
                "false" | "0" => false,
                other => return Err(format_err(format!("bad is_main_heading {other:?}"))),
            };
            entries.push(MeshEntry {
                descriptor_id: fields[0].trim().to_string(),
                language,
                term: fields[2].trim().to_string(),
                is_main_heading,
            });
        }
        Self::from_entries(entries)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("descriptor_id\tlanguage\tterm\tis_main_heading\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.descriptor_id, e.language, e.term, e.is_main_heading
            ));
        }
        out
    }

    pub fn entries(&self) -> &[MeshEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn descriptor_count(&self) -> usize {
        self.headings.len()
    }

    pub fn english_heading(&self, descriptor_id: &str) -> Option<&str> {
        self.headings.get(descriptor_id).map(String::as_str)
    }

    /// Case-insensitive exact lookup of a term in one language.
    pub fn descriptor_for(&self, language: Language, term: &str) -> Option<&str> {
        self.by_term.get(&(language, term.to_lowercase())).map(String::as_str)
    }

    pub fn to_english(&self, language: Language, term: &str) -> Option<&str> {
        self.descriptor_for(language, term)
            .and_then(|d| self.english_heading(d))
    }

    pub fn entries_in(&self, language: Language) -> impl Iterator<Item = &MeshEntry> {
        self.entries.iter().filter(move |e| e.language == language)
    }
}

pub fn load_mesh_thesaurus(path: &Path) -> Result<Thesaurus, ThesaurusError> {
    Thesaurus::parse_tsv(&read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "descriptor_id\tlanguage\tterm\tis_main_heading\n";

    #[test]
    fn german_term_resolves_to_english_heading() {
        let tsv = format!(
            "{HEADER}D003924\ten\tDiabetes Mellitus, Type 2\ttrue\nD003924\tde\tDiabetes mellitus Typ 2\tfalse\n"
        );
        let t = Thesaurus::parse_tsv(&tsv).unwrap();
        assert_eq!(
            t.to_english(Language::De, "Diabetes mellitus Typ 2"),
            Some("Diabetes Mellitus, Type 2")
        );
        let again = Thesaurus::parse_tsv(&t.to_tsv()).unwrap();
        assert_eq!(again.entries(), t.entries());
    }

    #[test]
    fn empty_file_is_empty_thesaurus() {
        assert!(Thesaurus::parse_tsv("").unwrap().is_empty());
        assert!(Thesaurus::parse_tsv(HEADER).unwrap().is_empty());
    }

    #[test]
    fn orphan_translation_is_integrity_error() {
        let tsv = format!("{HEADER}D000001\ten\tHeart\ttrue\nD999999\tde\tHerz\tfalse\n");
        match Thesaurus::parse_tsv(&tsv) {
            Err(ThesaurusError::MissingEnglishHeading(id)) => assert_eq!(id, "D999999"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_english_headings_rejected() {
        let tsv = format!("{HEADER}D1\ten\tHeart\ttrue\nD1\ten\tCardiac\ttrue\n");
        assert!(matches!(
            Thesaurus::parse_tsv(&tsv),
            Err(ThesaurusError::DuplicateEnglishHeading(_))
        ));
    }

    #[test]
    fn bad_language_column() {
        let tsv = format!("{HEADER}D1\tit\tCuore\ttrue\n");
        assert!(matches!(
            Thesaurus::parse_tsv(&tsv),
            Err(ThesaurusError::Format { line: 2, .. })
        ));
    }
}
