//! Raw candidate pairs from shared normalized names.
//!
//! Families are joined with publications from the filing year and the two
//! following years (blocking), then the novelty window on the exact dates
//! decides which pairs survive.

mod country;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

pub use country::{country_for_tld, country_from_affiliation, extract_country, propagate_first_author_country};

use crate::family::PatentFamily;
use crate::ingest::PublicationRecord;
use crate::names::{dedup_names, NameNormalizer, NormalizedName};

pub const DAYS_PER_YEAR: f64 = 365.25;

/// One (patent family, publication) link and the features computed for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub family_id: String,
    pub pub_id: String,
    pub common_names: Vec<String>,
    pub n_common_names: usize,
    pub country_match_count: usize,
    pub delta_years: f64,
    #[serde(default)]
    pub cosine: Option<f64>,
    #[serde(default)]
    pub n_common_refs: Option<usize>,
    #[serde(default)]
    pub academic: bool,
    #[serde(default)]
    pub allowed_ipc: bool,
}

impl CandidatePair {
    pub fn key(&self) -> (&str, &str) {
        (&self.family_id, &self.pub_id)
    }
}

/// A publication reduced to what blocking needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicationAuthors {
    pub pub_id: String,
    pub publication_date: NaiveDate,
    pub authors: Vec<NormalizedName>,
}

/// Extracts author countries, propagates a lone first-author country,
/// normalizes and deduplicates the author names.
pub fn publication_authors(record: &PublicationRecord, normalizer: &NameNormalizer) -> PublicationAuthors {
    let countries: Vec<Option<String>> = record
        .authors
        .iter()
        .map(|a| extract_country(a.affiliation.as_deref(), a.email.as_deref()))
        .collect();
    let countries = propagate_first_author_country(countries);
    let names = record
        .authors
        .iter()
        .zip(countries)
        .filter_map(
            |(a, c)| match normalizer.normalize_parts(&a.last, &a.fore, c.as_deref()) {
                Ok(n) => Some(n),
                Err(e) => {
                    log::debug!("{}: skipping author: {e}", record.pub_id);
                    None
                }
            },
        )
        .collect();
    PublicationAuthors {
        pub_id: record.pub_id.clone(),
        publication_date: record.publication_date,
        authors: dedup_names(names),
    }
}

pub fn delta_years(filing: NaiveDate, publication: NaiveDate) -> f64 {
    (publication - filing).num_days() as f64 / DAYS_PER_YEAR
}

/// Joins families with publications that share at least one canonical name
/// and were published in the filing year or up to `year_window` years later.
///
/// Pairs where some shared name has a country on both sides come first; each
/// block is ordered by `(family_id, pub_id)`.
pub fn block_join(
    families: &[PatentFamily],
    publications: &[PublicationAuthors],
    year_window: i32,
) -> Vec<CandidatePair> {
    // canonical name -> (publication index, author country)
    let mut index: HashMap<String, Vec<(usize, Option<&str>)>> = HashMap::new();
    for (i, p) in publications.iter().enumerate() {
        for a in &p.authors {
            index
                .entry(a.canonical())
                .or_default()
                .push((i, a.source_country.as_deref()));
        }
    }

    let mut with_country = Vec::new();
    let mut without_country = Vec::new();
    for family in families {
        let year = family.filing_year();
        // publication index -> (names, country matches, any country info)
        let mut hits: BTreeMap<usize, (BTreeSet<String>, usize, bool)> = BTreeMap::new();
        for inventor in &family.inventors {
            let key = inventor.canonical();
            let Some(postings) = index.get(&key) else { continue };
            for &(pi, author_country) in postings {
                let pub_year = publications[pi].publication_date.year();
                if pub_year < year || pub_year > year + year_window {
                    continue;
                }
                let entry = hits.entry(pi).or_default();
                if entry.0.insert(key.clone()) {
                    if let (Some(a), Some(b)) = (inventor.source_country.as_deref(), author_country) {
                        entry.2 = true;
                        if a.eq_ignore_ascii_case(b) {
                            entry.1 += 1;
                        }
                    }
                }
            }
        }
        for (pi, (names, country_matches, has_country)) in hits {
            let publication = &publications[pi];
            let pair = CandidatePair {
                family_id: family.family_id.clone(),
                pub_id: publication.pub_id.clone(),
                n_common_names: names.len(),
                common_names: names.into_iter().collect(),
                country_match_count: country_matches,
                delta_years: delta_years(family.filing_date, publication.publication_date),
                cosine: None,
                n_common_refs: None,
                academic: false,
                allowed_ipc: false,
            };
            if has_country {
                with_country.push(pair);
            } else {
                without_country.push(pair);
            }
        }
    }
    let by_key = |a: &CandidatePair, b: &CandidatePair| a.key().cmp(&b.key());
    with_country.sort_by(by_key);
    without_country.sort_by(by_key);
    with_country.extend(without_country);
    with_country
}

/// Keeps pairs whose publication follows the filing by `min_years` to
/// `max_years`, both ends inclusive.
pub fn date_filter(pairs: Vec<CandidatePair>, min_years: f64, max_years: f64) -> Vec<CandidatePair> {
    pairs
        .into_iter()
        .filter(|p| p.delta_years >= min_years && p.delta_years <= max_years)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Author;
    use std::collections::BTreeMap as Map;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn name(last: &str, initials: &str, country: Option<&str>) -> NormalizedName {
        NormalizedName {
            last: last.into(),
            initials: initials.into(),
            source_country: country.map(str::to_string),
        }
    }

    fn family(id: &str, filed: &str, inventors: Vec<NormalizedName>) -> PatentFamily {
        PatentFamily {
            family_id: id.into(),
            filing_date: date(filed),
            inventors,
            raw_inventors: vec![],
            applicants: vec![],
            ipc_codes: vec![],
            description_texts: Map::new(),
            reference_strings: vec![],
            member_numbers: vec![],
        }
    }

    fn publication(id: &str, published: &str, authors: Vec<NormalizedName>) -> PublicationAuthors {
        PublicationAuthors {
            pub_id: id.into(),
            publication_date: date(published),
            authors,
        }
    }

    #[test]
    fn joins_within_year_window() {
        let f = family("EP1", "2000-03-01", vec![name("lippert", "k", None)]);
        let p = publication("p1", "2001-01-01", vec![name("lippert", "k", None)]);
        let late = publication("p2", "2003-01-01", vec![name("lippert", "k", None)]);
        let pairs = block_join(&[f], &[p, late], 2);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].pub_id, "p1");
        assert_eq!(pairs[0].n_common_names, 1);
        assert_eq!(pairs[0].common_names, vec!["lippert, k"]);
    }

    #[test]
    fn counts_shared_names_and_countries() {
        let f = family(
            "EP1",
            "2000-03-01",
            vec![name("lippert", "k", Some("DE")), name("smith", "j", Some("GB"))],
        );
        let p = publication(
            "p1",
            "2001-01-01",
            vec![
                name("smith", "j", Some("US")),
                name("lippert", "k", Some("DE")),
                name("doe", "a", None),
            ],
        );
        let pairs = block_join(&[f], &[p], 2);
        assert_eq!(pairs[0].n_common_names, 2);
        assert_eq!(pairs[0].country_match_count, 1);
    }

    #[test]
    fn country_pairs_come_first() {
        let fams = vec![
            family("EP1", "2000-03-01", vec![name("a", "a", None)]),
            family("EP2", "2000-03-01", vec![name("b", "b", Some("DE"))]),
        ];
        let pubs = vec![
            publication("p1", "2001-01-01", vec![name("a", "a", Some("DE"))]),
            publication("p2", "2001-01-01", vec![name("b", "b", Some("FR"))]),
        ];
        let pairs = block_join(&fams, &pubs, 2);
        let order: Vec<_> = pairs.iter().map(|p| p.family_id.as_str()).collect();
        assert_eq!(order, vec!["EP2", "EP1"]);
    }

    #[test]
    fn date_window_examples() {
        let make = |pubd: &str| CandidatePair {
            family_id: "EP1".into(),
            pub_id: pubd.into(),
            common_names: vec!["x, y".into()],
            n_common_names: 1,
            country_match_count: 0,
            delta_years: delta_years(date("2000-03-01"), date(pubd)),
            cosine: None,
            n_common_refs: None,
            academic: false,
            allowed_ipc: false,
        };
        let kept = date_filter(
            vec![make("2001-01-01"), make("2000-06-01"), make("2000-03-01")],
            0.5,
            1.5,
        );
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].pub_id, "2001-01-01");
        assert!((kept[0].delta_years - 306.0 / 365.25).abs() < 1e-12);
    }

    #[test]
    fn publication_authors_propagate_country() {
        let record = PublicationRecord {
            pub_id: "p".into(),
            title: "t".into(),
            publication_date: date("2001-01-01"),
            authors: vec![
                Author {
                    last: "Müller".into(),
                    fore: "Jörg".into(),
                    affiliation: Some("Univ. Bonn, Germany".into()),
                    email: None,
                },
                Author {
                    last: "Smith".into(),
                    fore: "J A".into(),
                    affiliation: None,
                    email: None,
                },
                Author {
                    last: "Mueller".into(),
                    fore: "J.".into(),
                    affiliation: None,
                    email: None,
                },
            ],
            mesh_headings: vec![],
            doi: None,
            reference_dois: vec![],
        };
        let pa = publication_authors(&record, &NameNormalizer::default());
        assert_eq!(pa.authors.len(), 2);
        assert_eq!(pa.authors[0].canonical(), "mueller, j");
        assert_eq!(pa.authors[1].canonical(), "smith, ja");
        assert!(pa.authors.iter().all(|a| a.source_country.as_deref() == Some("DE")));
    }
}
