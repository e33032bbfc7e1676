//! Review items, verdict storage and the per-stratum evaluation report.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, NaiveDate, Utc};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::family::PatentFamily;
use crate::ingest::PublicationRecord;
use crate::ranking::{RankedPair, ValidityRule};

/// Stable identifier of a (family, publication) pair.
pub fn pair_id(family_id: &str, pub_id: &str) -> String {
    let mut h = Sha256::new();
    h.update(family_id.as_bytes());
    h.update([0u8]);
    h.update(pub_id.as_bytes());
    hex::encode(&h.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicationMeta {
    pub pub_id: String,
    pub title: String,
    pub authors: Vec<String>,
    pub publication_date: NaiveDate,
    #[serde(rename = "abstract")]
    pub abstract_text: Option<String>,
    pub doi: Option<String>,
    pub reference_dois: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentMeta {
    pub family_id: String,
    /// First line of the first description text.
    pub title: String,
    pub filing_date: NaiveDate,
    pub inventors: Vec<String>,
    pub applicants: Vec<String>,
    pub ipc_codes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub common_names: Vec<String>,
    pub n_common_names: usize,
    pub n_common_refs: Option<usize>,
    pub cosine: Option<f64>,
    pub boosted_cosine: Option<f64>,
    pub academic: bool,
    pub validity_rule: ValidityRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub pair_id: String,
    pub publication: PublicationMeta,
    pub patent: PatentMeta,
    pub features: PairFeatures,
}

pub fn review_item(pair: &RankedPair, family: &PatentFamily, publication: &PublicationRecord) -> ReviewItem {
    let p = &pair.pair;
    let title = family
        .description_texts
        .values()
        .flatten()
        .find_map(|t| t.lines().map(str::trim).find(|l| !l.is_empty()))
        .unwrap_or_default()
        .to_string();
    ReviewItem {
        pair_id: pair_id(&p.family_id, &p.pub_id),
        publication: PublicationMeta {
            pub_id: publication.pub_id.clone(),
            title: publication.title.clone(),
            authors: publication
                .authors
                .iter()
                .map(|a| {
                    format!("{}, {}", a.last, a.fore)
                        .trim_end_matches([',', ' '])
                        .to_string()
                })
                .collect(),
            publication_date: publication.publication_date,
            abstract_text: None,
            doi: publication.doi.clone(),
            reference_dois: publication.reference_dois.clone(),
        },
        patent: PatentMeta {
            family_id: family.family_id.clone(),
            title,
            filing_date: family.filing_date,
            inventors: family.raw_inventors.clone(),
            applicants: family.applicants.clone(),
            ipc_codes: family.ipc_codes.clone(),
        },
        features: PairFeatures {
            common_names: p.common_names.clone(),
            n_common_names: p.n_common_names,
            n_common_refs: p.n_common_refs,
            cosine: p.cosine,
            boosted_cosine: pair.boosted_cosine,
            academic: p.academic,
            validity_rule: pair.validity_rule,
        },
    }
}

/// Review items for all final pairs whose documents are known.
pub fn build_review_items(
    pairs: &[RankedPair],
    families: &[PatentFamily],
    publications: &[PublicationRecord],
) -> Vec<ReviewItem> {
    let fams: HashMap<&str, &PatentFamily> = families.iter().map(|f| (f.family_id.as_str(), f)).collect();
    let pubs: HashMap<&str, &PublicationRecord> = publications.iter().map(|p| (p.pub_id.as_str(), p)).collect();
    pairs
        .iter()
        .filter_map(|r| {
            let f = fams.get(r.pair.family_id.as_str())?;
            let p = pubs.get(r.pair.pub_id.as_str())?;
            Some(review_item(r, f, p))
        })
        .collect()
}

/// Up to `per_stratum` items for each shared-name count, drawn without
/// replacement. Strata are visited in ascending order with one generator,
/// and candidates are ordered by pair id first, so the draw only depends on
/// the item set and the seed.
pub fn stratified_sample(items: &[ReviewItem], per_stratum: usize, seed: u64) -> Vec<ReviewItem> {
    let mut strata: BTreeMap<usize, Vec<&ReviewItem>> = BTreeMap::new();
    for item in items {
        strata.entry(item.features.n_common_names).or_default().push(item);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, mut members) in strata {
        members.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
        let mut chosen: Vec<&ReviewItem> = members.choose_multiple(&mut rng, per_stratum).copied().collect();
        chosen.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
        out.extend(chosen.into_iter().cloned());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ValidPair,
    NoValidPair,
    NotDeterminable,
}

impl std::str::FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "valid_pair" => Ok(Self::ValidPair),
            "no_valid_pair" => Ok(Self::NoValidPair),
            "not_determinable" => Ok(Self::NotDeterminable),
            other => Err(format!("unknown classification {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pair_id: String,
    pub classification: Classification,
    pub reviewer_id: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum VerdictError {
    #[error("verdict journal {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("verdict journal {path} line {line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Latest verdict per (pair, reviewer), optionally backed by an append-only
/// JSONL journal.
#[derive(Debug, Default)]
pub struct VerdictStore {
    latest: RwLock<BTreeMap<(String, String), Verdict>>,
    journal: Option<(PathBuf, Mutex<File>)>,
}

impl VerdictStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, VerdictError> {
        let io = |source| VerdictError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut latest = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let v: Verdict = serde_json::from_str(&line).map_err(|source| VerdictError::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    source,
                })?;
                latest.insert((v.pair_id.clone(), v.reviewer_id.clone()), v);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(Self {
            latest: RwLock::new(latest),
            journal: Some((path.to_path_buf(), Mutex::new(file))),
        })
    }

    pub fn submit(&self, verdict: Verdict) -> Result<Verdict, VerdictError> {
        if let Some((path, file)) = &self.journal {
            let line = serde_json::to_string(&verdict).expect("verdict serializes");
            let mut file = file.lock().unwrap_or_else(|e| e.into_inner());
            writeln!(file, "{line}").map_err(|source| VerdictError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        self.latest
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert((verdict.pair_id.clone(), verdict.reviewer_id.clone()), verdict.clone());
        Ok(verdict)
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        self.latest
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.latest.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n_common_names: usize,
    pub n_reviewed: usize,
    pub valid: f64,
    pub invalid: f64,
    pub not_determinable: f64,
}

/// Verdict fractions per shared-name count. Verdicts for unknown pairs are
/// ignored; strata without verdicts are omitted.
pub fn evaluation_report(verdicts: &[Verdict], items: &[ReviewItem]) -> Vec<ReportRow> {
    let strata: HashMap<&str, usize> = items
        .iter()
        .map(|i| (i.pair_id.as_str(), i.features.n_common_names))
        .collect();
    let mut counts: BTreeMap<usize, [usize; 3]> = BTreeMap::new();
    for v in verdicts {
        let Some(&k) = strata.get(v.pair_id.as_str()) else {
            log::debug!("verdict for unknown pair {}", v.pair_id);
            continue;
        };
        let slot = match v.classification {
            Classification::ValidPair => 0,
            Classification::NoValidPair => 1,
            Classification::NotDeterminable => 2,
        };
        counts.entry(k).or_default()[slot] += 1;
    }
    counts
        .into_iter()
        .map(|(k, [valid, invalid, nd])| {
            let n = valid + invalid + nd;
            let frac = |x: usize| x as f64 / n as f64;
            ReportRow {
                n_common_names: k,
                n_reviewed: n,
                valid: frac(valid),
                invalid: frac(invalid),
                not_determinable: frac(nd),
            }
        })
        .collect()
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("n_common_names,n_reviewed,valid,invalid,not_determinable\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n_common_names, r.n_reviewed, r.valid, r.invalid, r.not_determinable
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn item(id: usize, k: usize) -> ReviewItem {
        ReviewItem {
            pair_id: format!("{id:04}"),
            publication: PublicationMeta {
                pub_id: format!("p{id}"),
                title: String::new(),
                authors: vec![],
                publication_date: NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(),
                abstract_text: None,
                doi: None,
                reference_dois: vec![],
            },
            patent: PatentMeta {
                family_id: "EP1".into(),
                title: String::new(),
                filing_date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
                inventors: vec![],
                applicants: vec![],
                ipc_codes: vec![],
            },
            features: PairFeatures {
                common_names: vec![],
                n_common_names: k,
                n_common_refs: None,
                cosine: None,
                boosted_cosine: None,
                academic: false,
                validity_rule: ValidityRule::Names,
            },
        }
    }

    fn verdict(id: &str, c: Classification, reviewer: &str) -> Verdict {
        Verdict {
            pair_id: id.into(),
            classification: c,
            reviewer_id: reviewer.into(),
            timestamp: Utc::now(),
        }
    }

    #[test]
    fn pair_id_is_stable() {
        assert_eq!(pair_id("EP1", "p1"), pair_id("EP1", "p1"));
        assert_ne!(pair_id("EP1", "p1"), pair_id("EP1p", "1"));
        assert_eq!(pair_id("EP1", "p1").len(), 16);
    }

    #[test]
    fn sampling_sizes_and_determinism() {
        let mut items: Vec<_> = (0..100).map(|i| item(i, 1)).collect();
        items.extend((100..102).map(|i| item(i, 5)));
        let s = stratified_sample(&items, 10, 7);
        assert_eq!(s.iter().filter(|i| i.features.n_common_names == 1).count(), 10);
        assert_eq!(s.iter().filter(|i| i.features.n_common_names == 5).count(), 2);
        assert_eq!(s, stratified_sample(&items, 10, 7));
        assert_ne!(s, stratified_sample(&items, 10, 8));
    }

    #[test]
    fn resubmission_overwrites() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verdicts.jsonl");
        {
            let store = VerdictStore::open(&path).unwrap();
            store.submit(verdict("a", Classification::ValidPair, "r1")).unwrap();
            store.submit(verdict("a", Classification::NoValidPair, "r1")).unwrap();
            store.submit(verdict("a", Classification::ValidPair, "r2")).unwrap();
        }
        let store = VerdictStore::open(&path).unwrap();
        assert_eq!(store.len(), 2);
        let v = store.verdicts();
        assert_eq!(
            v.iter().find(|v| v.reviewer_id == "r1").unwrap().classification,
            Classification::NoValidPair
        );
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);
    }

    #[test]
    fn classification_parsing() {
        assert_eq!("valid_pair".parse::<Classification>(), Ok(Classification::ValidPair));
        assert!("maybe".parse::<Classification>().is_err());
    }

    #[test]
    fn report_fractions() {
        let items: Vec<_> = (0..10).map(|i| item(i, 1)).chain([item(10, 3)]).collect();
        let verdicts: Vec<_> = (0..10)
            .map(|i| {
                let c = if i < 5 {
                    Classification::NoValidPair
                } else {
                    Classification::ValidPair
                };
                verdict(&format!("{i:04}"), c, "r")
            })
            .collect();
        let rows = evaluation_report(&verdicts, &items);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].invalid, 0.5);
        assert_eq!(rows[0].n_reviewed, 10);
        assert!(
            report_csv(&rows).starts_with("n_common_names,n_reviewed,valid,invalid,not_determinable\n1,10,0.5,0.5,0\n")
        );
    }

    proptest! {
        #[test]
        fn sample_has_no_duplicates(n in 0usize..60, per in 1usize..20, seed in any::<u64>()) {
            let items: Vec<_> = (0..n).map(|i| item(i, i % 4 + 1)).collect();
            let s = stratified_sample(&items, per, seed);
            let ids: HashSet<_> = s.iter().map(|i| &i.pair_id).collect();
            prop_assert_eq!(ids.len(), s.len());
        }

        #[test]
        fn report_rows_sum_to_one(classes in prop::collection::vec((0usize..20, 0u8..3), 1..60)) {
            let items: Vec<_> = (0..20).map(|i| item(i, i % 5 + 1)).collect();
            let verdicts: Vec<_> = classes.iter().enumerate().map(|(r, (i, c))| {
                let c = match c { 0 => Classification::ValidPair, 1 => Classification::NoValidPair, _ => Classification::NotDeterminable };
                verdict(&format!("{i:04}"), c, &format!("r{r}"))
            }).collect();
            for row in evaluation_report(&verdicts, &items) {
                prop_assert!((row.valid + row.invalid + row.not_determinable - 1.0).abs() < 1e-9);
            }
        }
    }
}
