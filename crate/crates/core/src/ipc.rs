//! IPC subclass distributions and the patent-class filter.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::family::PatentFamily;
use crate::pairing::CandidatePair;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IpcError {
    #[error("malformed IPC code {0:?}")]
    Malformed(String),
    #[error("empty subset {0}")]
    EmptySubset(String),
}

/// An IPC code cut to section, class and subclass, e.g. `A61K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IpcCode {
    section: char,
    class: u8,
    subclass: char,
}

impl IpcCode {
    pub fn section(&self) -> char {
        self.section
    }

    pub fn class(&self) -> u8 {
        self.class
    }

    pub fn subclass(&self) -> char {
        self.subclass
    }
}

impl fmt::Display for IpcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}{}", self.section, self.class, self.subclass)
    }
}

impl FromStr for IpcCode {
    type Err = IpcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        truncate_ipc(s)
    }
}

impl Serialize for IpcCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IpcCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        truncate_ipc(&s).map_err(serde::de::Error::custom)
    }
}

/// Keeps the first four characters (section, two-digit class, subclass).
pub fn truncate_ipc(raw: &str) -> Result<IpcCode, IpcError> {
    let bad = || IpcError::Malformed(raw.to_string());
    let chars: Vec<char> = raw.trim().chars().take(4).map(|c| c.to_ascii_uppercase()).collect();
    let [section, c1, c2, subclass] = chars[..] else {
        return Err(bad());
    };
    if !('A'..='H').contains(&section) || !subclass.is_ascii_uppercase() {
        return Err(bad());
    }
    let class = match (c1.to_digit(10), c2.to_digit(10)) {
        (Some(a), Some(b)) => (a * 10 + b) as u8,
        _ => return Err(bad()),
    };
    Ok(IpcCode {
        section,
        class,
        subclass,
    })
}

/// Distinct truncated codes of a family; malformed codes are skipped.
pub fn family_codes(family: &PatentFamily) -> BTreeSet<IpcCode> {
    family
        .ipc_codes
        .iter()
        .filter_map(|raw| match truncate_ipc(raw) {
            Ok(code) => Some(code),
            Err(e) => {
                log::debug!("{}: {e}", family.family_id);
                None
            }
        })
        .collect()
}

/// A professor among the inventors or a university among the applicants.
pub fn detect_academic(family: &PatentFamily) -> bool {
    family.raw_inventors.iter().any(|i| i.to_lowercase().contains("prof"))
        || family.applicants.iter().any(|a| a.to_lowercase().contains("univ"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurePairRule {
    pub min_names: usize,
    pub min_country_matches: usize,
    pub min_refs: usize,
    pub min_cosine: f64,
}

impl Default for SurePairRule {
    fn default() -> Self {
        Self {
            min_names: 4,
            min_country_matches: 4,
            min_refs: 4,
            min_cosine: 0.95,
        }
    }
}

impl SurePairRule {
    pub fn is_sure(&self, p: &CandidatePair) -> bool {
        (p.n_common_names >= self.min_names && p.country_match_count >= self.min_country_matches)
            || p.n_common_refs.is_some_and(|r| r >= self.min_refs)
            || p.cosine.is_some_and(|c| c >= self.min_cosine)
    }
}

pub fn select_sure_pairs(pairs: &[CandidatePair], rule: &SurePairRule) -> Vec<CandidatePair> {
    pairs.iter().filter(|p| rule.is_sure(p)).cloned().collect()
}

/// IPC subclass counts and shares of one subset of families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub label: String,
    pub counts: BTreeMap<IpcCode, usize>,
    pub total: usize,
}

impl ClassDistribution {
    pub fn share(&self, code: &IpcCode) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(code).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn shares(&self) -> BTreeMap<IpcCode, f64> {
        self.counts.keys().map(|c| (*c, self.share(c))).collect()
    }
}

/// Counts each distinct subclass of each family once; a family listed
/// several times counts once.
pub fn subset_distribution<'a>(
    families: impl IntoIterator<Item = &'a PatentFamily>,
    label: &str,
) -> Result<ClassDistribution, IpcError> {
    let mut seen = HashSet::new();
    let mut counts: BTreeMap<IpcCode, usize> = BTreeMap::new();
    for family in families {
        if !seen.insert(family.family_id.as_str()) {
            continue;
        }
        for code in family_codes(family) {
            *counts.entry(code).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    if total == 0 {
        return Err(IpcError::EmptySubset(label.to_string()));
    }
    Ok(ClassDistribution {
        label: label.to_string(),
        counts,
        total,
    })
}

/// Families touched by a set of pairs, in pair order.
pub fn families_of<'a>(
    pairs: &[CandidatePair],
    families: &'a HashMap<String, &'a PatentFamily>,
) -> Vec<&'a PatentFamily> {
    pairs
        .iter()
        .filter_map(|p| families.get(&p.family_id).copied())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    pub subset: String,
    pub ipc: IpcCode,
    pub share: f64,
    pub normal_quantile: f64,
}

/// Each distribution's shares in ascending order against standard normal
/// quantiles at plotting positions (i - 0.5) / n.
pub fn qq_plot_data(distributions: &[ClassDistribution]) -> Vec<QqRow> {
    let normal = Normal::standard();
    let mut rows = Vec::new();
    for d in distributions {
        let mut shares: Vec<(IpcCode, f64)> = d.shares().into_iter().collect();
        shares.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let n = shares.len() as f64;
        for (i, (ipc, share)) in shares.into_iter().enumerate() {
            rows.push(QqRow {
                subset: d.label.clone(),
                ipc,
                share,
                normal_quantile: normal.inverse_cdf((i as f64 + 0.5) / n),
            });
        }
    }
    rows
}

pub fn qq_csv(rows: &[QqRow]) -> String {
    let mut out = String::from("subset,ipc,share,normal_quantile\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.subset, r.ipc, r.share, r.normal_quantile));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllowedClassRule {
    pub min_share: f64,
    pub require_above_baseline: bool,
}

impl Default for AllowedClassRule {
    fn default() -> Self {
        Self {
            min_share: 0.015,
            require_above_baseline: true,
        }
    }
}

/// Subclasses frequent among sure pairs and more frequent there than in
/// the baseline.
pub fn allowed_classes(
    sure: &ClassDistribution,
    baseline: &ClassDistribution,
    rule: &AllowedClassRule,
) -> BTreeSet<IpcCode> {
    let allowed: BTreeSet<IpcCode> = sure
        .counts
        .keys()
        .filter(|c| {
            let s = sure.share(c);
            s >= rule.min_share && (!rule.require_above_baseline || s > baseline.share(c))
        })
        .copied()
        .collect();
    if allowed.is_empty() {
        log::warn!("no allowed IPC classes; the class filter passes everything");
    }
    allowed
}

pub fn allowed_to_lines(allowed: &BTreeSet<IpcCode>) -> String {
    allowed.iter().map(|c| format!("{c}\n")).collect()
}

pub fn allowed_from_lines(text: &str) -> Result<BTreeSet<IpcCode>, IpcError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(truncate_ipc)
        .collect()
}

/// Sets `allowed_ipc` on every pair and returns those whose family has an
/// allowed subclass. An empty allowed set lets everything through.
pub fn filter_pairs_by_ipc(
    pairs: &mut [CandidatePair],
    family_codes: &HashMap<String, BTreeSet<IpcCode>>,
    allowed: &BTreeSet<IpcCode>,
) -> Vec<CandidatePair> {
    for p in pairs.iter_mut() {
        p.allowed_ipc = allowed.is_empty()
            || family_codes
                .get(&p.family_id)
                .is_some_and(|codes| codes.iter().any(|c| allowed.contains(c)));
    }
    pairs.iter().filter(|p| p.allowed_ipc).cloned().collect()
}
