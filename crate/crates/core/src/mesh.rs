//! MeSH term extraction from patent descriptions.
//!
//! A greedy longest-first n-gram lookup: all windows of the longest indexed
//! length are matched first and their tokens masked, then the next shorter
//! length runs over what is left, down to single tokens.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::PatentFamily;
use crate::ingest::{Language, Thesaurus};

/// Longest n-gram the index holds; longer terms are truncated.
pub const MAX_NGRAM: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeshError {
    #[error("family {0} has no description text")]
    NoText(String),
    #[error("descriptor {0} has no English main heading")]
    UnknownDescriptor(String),
}

/// Splits on whitespace and punctuation; a hyphen between two alphanumeric
/// characters stays inside the token.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let inner_hyphen = c == '-' && !current.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || inner_hyphen {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_acronym(tokens: &[String]) -> bool {
    !tokens.is_empty()
        && tokens.iter().all(|t| {
            let mut letters = t.chars().filter(|c| c.is_alphabetic()).peekable();
            letters.peek().is_some()
                && t.chars().filter(|c| c.is_alphabetic()).count() >= 2
                && letters.all(char::is_uppercase)
        })
}

/// Lookup table from token n-grams to descriptor ids for one language.
#[derive(Debug, Clone)]
pub struct TermIndex {
    language: Language,
    folded: HashMap<Vec<String>, String>,
    acronyms: HashMap<Vec<String>, String>,
    truncated: HashSet<Vec<String>>,
    max_n: usize,
}

/// Indexes all main headings and entry terms of `language`.
pub fn build_term_index(thesaurus: &Thesaurus, language: Language) -> TermIndex {
    let mut index = TermIndex {
        language,
        folded: HashMap::new(),
        acronyms: HashMap::new(),
        truncated: HashSet::new(),
        max_n: 0,
    };
    for entry in thesaurus.entries_in(language) {
        let mut tokens = tokenize(&entry.term);
        if tokens.is_empty() {
            continue;
        }
        let was_truncated = tokens.len() > MAX_NGRAM;
        tokens.truncate(MAX_NGRAM);
        let acronym = is_acronym(&tokens);
        let key: Vec<String> = if acronym {
            tokens
        } else {
            tokens.iter().map(|t| t.to_lowercase()).collect()
        };
        if was_truncated {
            log::debug!("term {:?} truncated to {MAX_NGRAM} tokens", entry.term);
            index.truncated.insert(key.clone());
        }
        index.max_n = index.max_n.max(key.len());
        let table = if acronym {
            &mut index.acronyms
        } else {
            &mut index.folded
        };
        table.entry(key).or_insert_with(|| entry.descriptor_id.clone());
    }
    index
}

/// One n-gram hit. `counted` is false when the descriptor had already been
/// emitted earlier; the tokens are masked either way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermMatch {
    pub descriptor_id: String,
    pub start: usize,
    pub len: usize,
    pub counted: bool,
}

impl TermIndex {
    pub fn language(&self) -> Language {
        self.language
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn len(&self) -> usize {
        self.folded.len() + self.acronyms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_truncated(&self, key: &[String]) -> bool {
        self.truncated.contains(key)
    }

    /// Descriptor for an exact token sequence, applying the same case rules
    /// as extraction.
    pub fn lookup(&self, tokens: &[String]) -> Option<&str> {
        let folded: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        self.folded
            .get(&folded)
            .or_else(|| self.acronyms.get(tokens))
            .map(String::as_str)
    }

    /// Every n-gram hit in scan order: longest n first, left to right.
    pub fn matches(&self, tokens: &[String]) -> Vec<TermMatch> {
        let mut masked = vec![false; tokens.len()];
        let mut emitted = HashSet::new();
        let mut out = Vec::new();
        for n in (1..=self.max_n.min(tokens.len())).rev() {
            let mut i = 0;
            while i + n <= tokens.len() {
                if masked[i..i + n].iter().any(|&m| m) {
                    i += 1;
                    continue;
                }
                match self.lookup(&tokens[i..i + n]) {
                    Some(descriptor) => {
                        let counted = emitted.insert(descriptor.to_string());
                        out.push(TermMatch {
                            descriptor_id: descriptor.to_string(),
                            start: i,
                            len: n,
                            counted,
                        });
                        masked[i..i + n].iter_mut().for_each(|m| *m = true);
                        i += n;
                    }
                    None => i += 1,
                }
            }
        }
        out
    }

    /// Distinct descriptors found in `text`, in first-emission order.
    pub fn extract_descriptors(&self, text: &str) -> Vec<String> {
        self.matches(&tokenize(text))
            .into_iter()
            .filter(|m| m.counted)
            .map(|m| m.descriptor_id)
            .collect()
    }
}

/// Extracted headings of one document: English, sorted, unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedTerms {
    pub doc_id: String,
    pub language_used: Language,
    pub headings: Vec<String>,
}

impl ExtractedTerms {
    pub fn new(doc_id: impl Into<String>, language_used: Language, mut headings: Vec<String>) -> Self {
        headings.sort();
        headings.dedup();
        Self {
            doc_id: doc_id.into(),
            language_used,
            headings,
        }
    }
}

pub fn map_to_english(descriptors: &[String], thesaurus: &Thesaurus) -> Result<Vec<String>, MeshError> {
    descriptors
        .iter()
        .map(|d| {
            thesaurus
                .english_heading(d)
                .map(str::to_string)
                .ok_or_else(|| MeshError::UnknownDescriptor(d.clone()))
        })
        .collect()
}

/// The description in the first available language of English, German,
/// French, with duplicate member texts already removed.
pub fn select_description_language(family: &PatentFamily) -> Result<(Language, String), MeshError> {
    Language::ALL
        .iter()
        .find_map(|lang| {
            family
                .description_texts
                .get(lang)
                .filter(|texts| texts.iter().any(|t| !t.trim().is_empty()))
                .map(|texts| (*lang, texts.join("\n")))
        })
        .ok_or_else(|| MeshError::NoText(family.family_id.clone()))
}

/// Indexes for all three languages, built once per thesaurus.
#[derive(Debug, Clone)]
pub struct MultilingualIndex {
    indexes: Vec<TermIndex>,
}

impl MultilingualIndex {
    pub fn build(thesaurus: &Thesaurus) -> Self {
        Self {
            indexes: Language::ALL
                .iter()
                .map(|&lang| build_term_index(thesaurus, lang))
                .collect(),
        }
    }

    pub fn get(&self, language: Language) -> &TermIndex {
        self.indexes
            .iter()
            .find(|i| i.language() == language)
            .expect("all languages indexed")
    }
}

pub fn extract_terms(
    doc_id: &str,
    language: Language,
    text: &str,
    index: &TermIndex,
    thesaurus: &Thesaurus,
) -> Result<ExtractedTerms, MeshError> {
    let descriptors = index.extract_descriptors(text);
    Ok(ExtractedTerms::new(
        doc_id,
        language,
        map_to_english(&descriptors, thesaurus)?,
    ))
}

/// Language selection plus extraction for one family.
pub fn extract_family_terms(
    family: &PatentFamily,
    indexes: &MultilingualIndex,
    thesaurus: &Thesaurus,
) -> Result<ExtractedTerms, MeshError> {
    let (language, text) = select_description_language(family)?;
    extract_terms(&family.family_id, language, &text, indexes.get(language), thesaurus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::MeshEntry;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn entry(id: &str, lang: Language, term: &str, main: bool) -> MeshEntry {
        MeshEntry {
            descriptor_id: id.into(),
            language: lang,
            term: term.into(),
            is_main_heading: main,
        }
    }

    fn thesaurus() -> Thesaurus {
        use Language::*;
        Thesaurus::from_entries(vec![
            entry("D003924", En, "Diabetes Mellitus, Type 2", true),
            entry("D003924", De, "Diabetes mellitus Typ 2", false),
            entry("D003920", En, "Diabetes Mellitus", true),
            entry("D003920", De, "Diabetes mellitus", false),
            entry("D003921", En, "Diabetes", true),
            entry("D006321", En, "Heart", true),
            entry("D006321", En, "Cardiac", false),
            entry("D006321", De, "Herz", false),
            entry("D014944", En, "WHO", true),
            entry("D007328", En, "Insulin", true),
            entry("D007328", De, "Insulin", false),
            entry("D007328", Fr, "Insuline", false),
        ])
        .expect("fixture")
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenizer_keeps_inner_hyphens() {
        assert_eq!(
            toks("Diabetes Mellitus, Type 2"),
            vec!["Diabetes", "Mellitus", "Type", "2"]
        );
        assert_eq!(toks("anti-TNF therapy - done."), vec!["anti-TNF", "therapy", "done"]);
        assert_eq!(toks("(Herz-Kreislauf)"), vec!["Herz-Kreislauf"]);
    }

    #[test]
    fn multiword_term_indexed_as_ngram() {
        let index = build_term_index(&thesaurus(), Language::En);
        assert_eq!(index.lookup(&toks("diabetes mellitus type 2")), Some("D003924"));
        assert_eq!(index.max_n(), 4);
    }

    #[test]
    fn synonyms_share_descriptor() {
        let index = build_term_index(&thesaurus(), Language::En);
        assert_eq!(index.lookup(&toks("heart")), Some("D006321"));
        assert_eq!(index.lookup(&toks("Cardiac")), Some("D006321"));
    }

    #[test]
    fn empty_thesaurus_gives_empty_index() {
        let t = Thesaurus::from_entries(vec![]).unwrap();
        let index = build_term_index(&t, Language::En);
        assert!(index.is_empty());
        assert!(index.matches(&toks("anything at all")).is_empty());
    }

    #[test]
    fn masking_trace() {
        let index = build_term_index(&thesaurus(), Language::En);
        let m = index.matches(&toks("treatment of diabetes mellitus type 2 and diabetes"));
        assert_eq!(
            m,
            vec![
                TermMatch {
                    descriptor_id: "D003924".into(),
                    start: 2,
                    len: 4,
                    counted: true
                },
                TermMatch {
                    descriptor_id: "D003921".into(),
                    start: 7,
                    len: 1,
                    counted: true
                },
            ]
        );
        let t = extract_terms(
            "x",
            Language::En,
            "treatment of diabetes mellitus type 2 and diabetes",
            &index,
            &thesaurus(),
        )
        .unwrap();
        assert_eq!(t.headings, vec!["Diabetes", "Diabetes Mellitus, Type 2"]);
    }

    #[test]
    fn first_emission_wins() {
        let index = build_term_index(&thesaurus(), Language::En);
        let m = index.matches(&toks("heart cardiac heart"));
        assert_eq!(m.iter().filter(|m| m.counted).count(), 1);
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn acronyms_are_case_sensitive() {
        let index = build_term_index(&thesaurus(), Language::En);
        assert!(index.extract_descriptors("who is there").is_empty());
        assert_eq!(index.extract_descriptors("the WHO report"), vec!["D014944"]);
    }

    #[test]
    fn no_terms_no_headings() {
        let index = build_term_index(&thesaurus(), Language::En);
        let t = extract_terms("x", Language::En, "nothing relevant", &index, &thesaurus()).unwrap();
        assert!(t.headings.is_empty());
    }

    #[test]
    fn german_translation_maps_to_same_headings() {
        let th = thesaurus();
        let idx = MultilingualIndex::build(&th);
        let en = extract_terms(
            "e",
            Language::En,
            "Insulin for the heart in diabetes mellitus type 2",
            idx.get(Language::En),
            &th,
        )
        .unwrap();
        let de = extract_terms(
            "d",
            Language::De,
            "Insulin für das Herz bei Diabetes mellitus Typ 2",
            idx.get(Language::De),
            &th,
        )
        .unwrap();
        assert_eq!(en.headings, de.headings);
    }

    #[test]
    fn map_to_english_cases() {
        let th = thesaurus();
        assert_eq!(
            map_to_english(&["D003924".into()], &th).unwrap(),
            vec!["Diabetes Mellitus, Type 2"]
        );
        assert!(map_to_english(&[], &th).unwrap().is_empty());
        let de = build_term_index(&th, Language::De)
            .lookup(&toks("Diabetes mellitus Typ 2"))
            .unwrap()
            .to_string();
        assert_eq!(map_to_english(&[de], &th).unwrap(), vec!["Diabetes Mellitus, Type 2"]);
        assert_eq!(
            map_to_english(&["D0".into()], &th),
            Err(MeshError::UnknownDescriptor("D0".into()))
        );
    }

    #[test]
    fn long_terms_are_truncated_and_flagged() {
        let long = "one two three four five six seven eight nine ten";
        let th = Thesaurus::from_entries(vec![entry("D1", Language::En, long, true)]).unwrap();
        let index = build_term_index(&th, Language::En);
        assert_eq!(index.max_n(), MAX_NGRAM);
        let key: Vec<String> = toks(long).into_iter().take(MAX_NGRAM).collect();
        assert!(index.is_truncated(&key));
        assert_eq!(index.extract_descriptors(long), vec!["D1"]);
    }

    fn family_with(texts: &[(Language, &str)]) -> PatentFamily {
        let mut description_texts = BTreeMap::new();
        for (l, t) in texts {
            description_texts.insert(*l, vec![t.to_string()]);
        }
        PatentFamily {
            family_id: "EP1".into(),
            filing_date: chrono::NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            inventors: vec![],
            raw_inventors: vec![],
            applicants: vec![],
            ipc_codes: vec![],
            description_texts,
            reference_strings: vec![],
            member_numbers: vec![],
        }
    }

    #[test]
    fn language_priority() {
        let both = family_with(&[(Language::De, "de"), (Language::En, "en")]);
        assert_eq!(select_description_language(&both).unwrap().0, Language::En);
        let fr = family_with(&[(Language::Fr, "fr")]);
        assert_eq!(select_description_language(&fr).unwrap().0, Language::Fr);
        assert_eq!(
            select_description_language(&family_with(&[])),
            Err(MeshError::NoText("EP1".into()))
        );
    }

    proptest! {
        #[test]
        fn output_sorted_unique_and_masking_disjoint(words in prop::collection::vec(
            prop::sample::select(vec!["diabetes", "mellitus", "type", "2", "heart", "WHO", "who", "insulin", "of", "cardiac"]), 0..40)) {
            let th = thesaurus();
            let index = build_term_index(&th, Language::En);
            let text = words.join(" ");
            let matches = index.matches(&tokenize(&text));
            let mut used = HashSet::new();
            for m in &matches {
                for pos in m.start..m.start + m.len {
                    prop_assert!(used.insert(pos), "position {} consumed twice", pos);
                }
            }
            let t = extract_terms("x", Language::En, &text, &index, &th).unwrap();
            prop_assert!(t.headings.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
