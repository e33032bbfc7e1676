//! Common references between patents and publications.
//!
//! Patent citations are free text in no particular style, so they are
//! parsed heuristically and resolved to DOIs through a bibliographic search
//! service. Publications already carry their reference DOIs.

mod resolver;
mod service;

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use resolver::{CacheEntry, CacheError, RerankWeights, ResolutionCache, Resolver, ResolverStats};
pub use service::{CrossrefService, MetadataService, MockService, ServiceError, WorkQuery, WorkRecord};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedCitation {
    pub raw: String,
    pub title_guess: Option<String>,
    pub author_lastnames: Vec<String>,
    pub journal_guess: Option<String>,
    pub year_guess: Option<i32>,
}

impl ParsedCitation {
    /// Enough information to query the service.
    pub fn is_queryable(&self) -> bool {
        self.title_guess.is_some() || (!self.author_lastnames.is_empty() && self.year_guess.is_some())
    }
}

/// A search hit after re-ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoiCandidate {
    pub doi: String,
    pub title: String,
    pub authors: Vec<String>,
    pub year: Option<i32>,
    pub service_rank: usize,
    pub rerank_score: f64,
    pub title_match: bool,
}

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(19\d\d|20[0-2]\d|2030)\b").unwrap());
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"]+)"|“([^”]+)”|«([^»]+)»"#).unwrap());
static INITIALS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\p{Lu}\.?-?){1,3}$").unwrap());
static NAME_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{Lu}[\p{Ll}'’]+(-\p{Lu}?[\p{Ll}]+)?$").unwrap());
static JOURNAL_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(vol|pp|no)\b|\d").unwrap());
static DOI: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^10\.\d{4,9}/\S+$").unwrap());

/// True when the next clause holds two or more words, one of them
/// lower-case: prose rather than another name.
fn title_follows(rest: &[char]) -> bool {
    let clause: String = rest
        .iter()
        .take_while(|c| !matches!(c, ',' | '.' | ';' | ':'))
        .collect();
    let words: Vec<&str> = clause.split_whitespace().collect();
    words.len() >= 2 && words.iter().any(|w| w.starts_with(char::is_lowercase))
}

/// Splits at `.`, `?` or `!` followed by whitespace or the end, except
/// after a single letter (an initial) that is not followed by prose.
fn sentence_segments(text: &str) -> Vec<String> {
    let mut segments = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let at_break = matches!(c, '.' | '?' | '!') && chars.get(i + 1).is_none_or(|n| n.is_whitespace());
        if at_break {
            let last_word_len = current
                .rsplit(|ch: char| !ch.is_alphanumeric())
                .next()
                .map_or(0, |w| w.chars().count());
            if c == '.' && last_word_len == 1 && !title_follows(&chars[i + 1..]) {
                current.push(c);
                continue;
            }
            if c != '.' {
                current.push(c);
            }
            segments.push(std::mem::take(&mut current));
        } else {
            current.push(c);
        }
    }
    segments.push(current);
    segments
        .into_iter()
        .map(|s| {
            s.trim()
                .trim_matches(|c: char| c == ',' || c == ';' || c == ':')
                .trim()
                .to_string()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

fn author_parts(segment: &str) -> Vec<&str> {
    segment
        .split([',', ';', '&'])
        .flat_map(|p| p.split(" and "))
        .map(|p| p.trim().trim_end_matches("et al").trim())
        .filter(|p| !p.is_empty())
        .collect()
}

const PARTICLES: &[&str] = &[
    "van", "von", "de", "der", "den", "du", "da", "di", "del", "la", "le", "ten", "ter", "dos",
];

/// The particle-led tail when there is a particle, else the last word.
fn surname_of(name_words: &[&str]) -> String {
    let start = name_words
        .iter()
        .position(|w| PARTICLES.contains(w))
        .unwrap_or(name_words.len() - 1);
    name_words[start..].join(" ").to_lowercase()
}

/// Last names when the whole segment reads as an author list.
fn parse_author_list(segment: &str) -> Option<Vec<String>> {
    let parts = author_parts(segment);
    if parts.is_empty() {
        return None;
    }
    let mut names = Vec::new();
    let mut any_initials = false;
    let mut pending_surname: Option<String> = None;
    for part in &parts {
        let words: Vec<&str> = part.split_whitespace().collect();
        let initials = words.iter().filter(|w| INITIALS.is_match(w)).count();
        let name_words: Vec<&str> = words.iter().copied().filter(|w| !INITIALS.is_match(w)).collect();
        let valid = |w: &&str| NAME_WORD.is_match(w) || PARTICLES.contains(w);
        if !name_words.iter().all(valid)
            || name_words.len() > 3
            || (!name_words.is_empty() && name_words.iter().all(|w| PARTICLES.contains(w)))
        {
            return None;
        }
        any_initials |= initials > 0;
        match (name_words.is_empty(), pending_surname.take()) {
            // "Smith, J." style: the initials follow the surname after a comma.
            (true, Some(surname)) => names.push(surname),
            (true, None) => return None,
            (false, leftover) => {
                if let Some(s) = leftover {
                    names.push(s);
                }
                let surname = surname_of(&name_words);
                if initials == 0 && name_words.len() == 1 {
                    pending_surname = Some(surname);
                } else {
                    names.push(surname);
                }
            }
        }
    }
    if let Some(s) = pending_surname {
        names.push(s);
    }
    (any_initials || parts.len() > 1).then_some(names)
}

fn content_words(segment: &str) -> usize {
    segment
        .split_whitespace()
        .filter(|w| w.chars().filter(|c| c.is_alphabetic()).count() >= 3)
        .count()
}

fn journal_from(segment: &str) -> Option<String> {
    let cut = JOURNAL_END.find(segment).map_or(segment, |m| &segment[..m.start()]);
    let cut = cut.trim().trim_end_matches([',', ';', ':', '(']).trim();
    (cut.chars().filter(|c| c.is_alphabetic()).count() >= 2).then(|| cut.to_string())
}

fn is_numeric_segment(segment: &str) -> bool {
    let alpha = segment.chars().filter(|c| c.is_alphabetic()).count();
    let digits = segment.chars().filter(|c| c.is_ascii_digit()).count();
    digits > 0 && alpha <= digits / 2
}

/// Heuristic split of a free-text citation into author names, title,
/// journal and year.
pub fn parse_citation(raw: &str) -> ParsedCitation {
    let mut parsed = ParsedCitation {
        raw: raw.to_string(),
        ..Default::default()
    };
    let text = raw.trim();
    if text.is_empty() {
        return parsed;
    }
    parsed.year_guess = YEAR.find_iter(text).last().and_then(|m| m.as_str().parse().ok());

    if let Some((start, end, title)) = QUOTED
        .captures_iter(text)
        .filter_map(|c| {
            let m = c.get(1).or_else(|| c.get(2)).or_else(|| c.get(3))?;
            let whole = c.get(0)?;
            Some((
                whole.start(),
                whole.end(),
                m.as_str().trim().trim_end_matches(['.', ',']).to_string(),
            ))
        })
        .max_by_key(|(_, _, t)| t.chars().count())
    {
        parsed.title_guess = Some(title);
        let before = text[..start].trim().trim_end_matches([',', '.', ':']).trim();
        parsed.author_lastnames = parse_author_list(before).unwrap_or_default();
        parsed.journal_guess = sentence_segments(&text[end..])
            .iter()
            .filter(|s| !is_numeric_segment(s))
            .find_map(|s| journal_from(s));
        return parsed;
    }

    let mut segments = sentence_segments(text);
    if let Some(first) = segments.first() {
        if let Some(names) = parse_author_list(first) {
            parsed.author_lastnames = names;
            segments.remove(0);
        }
    }
    let textual: Vec<&String> = segments.iter().filter(|s| !is_numeric_segment(s)).collect();
    let title_idx = textual
        .iter()
        .enumerate()
        .filter(|(_, s)| content_words(s) >= 2)
        .max_by(|(ia, a), (ib, b)| {
            content_words(a)
                .cmp(&content_words(b))
                .then(a.chars().count().cmp(&b.chars().count()))
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i);
    if let Some(i) = title_idx {
        parsed.title_guess = Some(textual[i].to_string());
        parsed.journal_guess = textual[i + 1..].iter().find_map(|s| journal_from(s));
    }
    parsed
}

/// Lower-case, `doi.org` URL and `doi:` prefixes removed.
pub fn normalize_doi(doi: &str) -> String {
    let lower = doi.trim().to_lowercase();
    let mut s = lower.as_str();
    for prefix in [
        "https://doi.org/",
        "http://doi.org/",
        "https://dx.doi.org/",
        "http://dx.doi.org/",
        "doi:",
    ] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest.trim_start();
            break;
        }
    }
    s.to_string()
}

pub fn is_valid_doi(doi: &str) -> bool {
    DOI.is_match(&normalize_doi(doi))
}

/// Size of the intersection of two DOI lists after normalization.
pub fn count_common_references<A: AsRef<str>, B: AsRef<str>>(family_dois: &[A], publication_dois: &[B]) -> usize {
    let family: HashSet<String> = family_dois.iter().map(|d| normalize_doi(d.as_ref())).collect();
    let publication: HashSet<String> = publication_dois.iter().map(|d| normalize_doi(d.as_ref())).collect();
    family.intersection(&publication).count()
}

/// Lower-case, punctuation replaced by spaces, whitespace collapsed.
pub fn normalize_title(title: &str) -> String {
    title
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_vancouver_style() {
        let p = parse_citation("Smith J, Doe A. Gene therapy advances. Nature Medicine. 2001.");
        assert_eq!(p.title_guess.as_deref(), Some("Gene therapy advances"));
        assert_eq!(p.author_lastnames, vec!["smith", "doe"]);
        assert_eq!(p.journal_guess.as_deref(), Some("Nature Medicine"));
        assert_eq!(p.year_guess, Some(2001));
    }

    #[test]
    fn parses_volume_suffix_and_initials_with_dots() {
        let p = parse_citation(
            "Lippert K.-H., van Dyke T. Insulin receptor signalling in the heart. J Mol Cell Cardiol 1999;31:100-110.",
        );
        assert_eq!(p.author_lastnames, vec!["lippert", "van dyke"]);
        assert_eq!(
            p.title_guess.as_deref(),
            Some("Insulin receptor signalling in the heart")
        );
        assert_eq!(p.journal_guess.as_deref(), Some("J Mol Cell Cardiol"));
        assert_eq!(p.year_guess, Some(1999));
    }

    #[test]
    fn parses_quoted_title() {
        let p = parse_citation("Smith, J., \"Protein folding, revisited.\", Biochemistry, vol. 12, 1998");
        assert_eq!(p.title_guess.as_deref(), Some("Protein folding, revisited"));
        assert_eq!(p.author_lastnames, vec!["smith"]);
        assert_eq!(p.journal_guess.as_deref(), Some("Biochemistry"));
        assert_eq!(p.year_guess, Some(1998));
    }

    #[test]
    fn patent_citation_has_no_title_or_year() {
        let p = parse_citation("EP 0 123 456 A1");
        assert_eq!(p.title_guess, None);
        assert_eq!(p.year_guess, None);
        assert!(!p.is_queryable());
    }

    #[test]
    fn empty_citation() {
        let p = parse_citation("");
        assert_eq!(p, ParsedCitation::default());
    }

    #[test]
    fn doi_normalization() {
        assert_eq!(count_common_references(&["10.1x/a", "10.1x/b"], &["10.1x/b"]), 1);
        assert_eq!(count_common_references::<&str, &str>(&[], &["10.1x/b"]), 0);
        assert_eq!(count_common_references(&["HTTPS://DOI.ORG/10.1X/A"], &["10.1x/a"]), 1);
        assert_eq!(normalize_doi("doi: 10.1000/XyZ"), "10.1000/xyz");
        assert!(is_valid_doi("https://doi.org/10.1000/abc.1"));
        assert!(!is_valid_doi("11.1000/abc"));
    }

    #[test]
    fn title_normalization() {
        assert_eq!(normalize_title("  Gene-Therapy: advances!  "), "gene therapy advances");
    }

    proptest! {
        #[test]
        fn parse_never_panics_and_year_in_range(s in "\\PC{0,120}") {
            let p = parse_citation(&s);
            if let Some(y) = p.year_guess {
                prop_assert!((1900..=2030).contains(&y));
            }
        }

        #[test]
        fn common_refs_bounded(a in prop::collection::vec("10\\.1[0-9]{3}/[a-z]{1,3}", 0..10),
                               b in prop::collection::vec("10\\.1[0-9]{3}/[A-Z]{1,3}", 0..10)) {
            let n = count_common_references(&a, &b);
            let da: HashSet<_> = a.iter().map(|d| normalize_doi(d)).collect();
            let db: HashSet<_> = b.iter().map(|d| normalize_doi(d)).collect();
            prop_assert!(n <= da.len().min(db.len()));
        }
    }
}
