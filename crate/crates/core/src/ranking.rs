//! Validity rules that turn filtered candidates into final pairs.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::pairing::CandidatePair;
use crate::threshold::ThresholdSet;

pub const ACADEMIC_BOOST: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityRule {
    /// At least three shared names.
    Names,
    /// At least one shared reference.
    Refs,
    /// Similarity above the combined threshold and among the best three.
    SimilarityTop3,
}

/// Which side the best-three cap applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Best3Scope {
    #[default]
    Both,
    Family,
    Publication,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingParams {
    pub min_names: usize,
    pub min_refs: usize,
    pub top_k: usize,
    pub scope: Best3Scope,
    pub academic_boost: f64,
}

impl Default for RankingParams {
    fn default() -> Self {
        Self {
            min_names: 3,
            min_refs: 1,
            top_k: 3,
            scope: Best3Scope::Both,
            academic_boost: ACADEMIC_BOOST,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    #[serde(flatten)]
    pub pair: CandidatePair,
    pub boosted_cosine: Option<f64>,
    pub validity_rule: ValidityRule,
    /// Worst of the family-side and publication-side ranks among pairs
    /// above the combined threshold; 0 when the pair was not ranked.
    pub rank_within_doc: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingDiagnostics {
    pub input: usize,
    pub valid_names: usize,
    pub valid_refs: usize,
    pub valid_similarity: usize,
    pub missing_cosine: usize,
    pub below_threshold: usize,
    pub outside_top_k: usize,
}

pub fn academic_boost(cosine: f64, academic: bool, boost: f64) -> f64 {
    if academic {
        (cosine + boost).min(1.0)
    } else {
        cosine
    }
}

/// Best first: boosted cosine, then country matches, then ids.
fn rank_order(a: &(f64, &CandidatePair), b: &(f64, &CandidatePair)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(b.1.country_match_count.cmp(&a.1.country_match_count))
        .then(a.1.pub_id.cmp(&b.1.pub_id))
        .then(a.1.family_id.cmp(&b.1.family_id))
}

fn ranks_by<'a>(
    scored: &[(f64, &'a CandidatePair)],
    side: impl Fn(&CandidatePair) -> &str,
) -> HashMap<(&'a str, &'a str), usize> {
    let mut groups: BTreeMap<&str, Vec<(f64, &CandidatePair)>> = BTreeMap::new();
    for &(s, p) in scored {
        groups.entry(side(p)).or_default().push((s, p));
    }
    let mut ranks = HashMap::new();
    for (_, mut group) in groups {
        group.sort_by(rank_order);
        for (i, (_, p)) in group.into_iter().enumerate() {
            ranks.insert(p.key(), i + 1);
        }
    }
    ranks
}

/// Final pairs in input order, each attributed to the first rule it meets.
pub fn apply_validity_rules(
    pairs: &[CandidatePair],
    thresholds: &ThresholdSet,
    params: &RankingParams,
) -> (Vec<RankedPair>, RankingDiagnostics) {
    let mut diag = RankingDiagnostics {
        input: pairs.len(),
        ..Default::default()
    };
    let boosted: Vec<Option<f64>> = pairs
        .iter()
        .map(|p| p.cosine.map(|c| academic_boost(c, p.academic, params.academic_boost)))
        .collect();
    let above: Vec<(f64, &CandidatePair)> = pairs
        .iter()
        .zip(&boosted)
        .filter_map(|(p, b)| b.filter(|&b| b >= thresholds.t_combined).map(|b| (b, p)))
        .collect();
    let by_family = ranks_by(&above, |p| &p.family_id);
    let by_publication = ranks_by(&above, |p| &p.pub_id);

    let mut out = Vec::new();
    for (p, b) in pairs.iter().zip(boosted) {
        let rank = match (by_family.get(&p.key()), by_publication.get(&p.key())) {
            (Some(&f), Some(&q)) => match params.scope {
                Best3Scope::Both => f.max(q),
                Best3Scope::Family => f,
                Best3Scope::Publication => q,
            },
            _ => 0,
        };
        let rule = if p.n_common_names >= params.min_names {
            diag.valid_names += 1;
            Some(ValidityRule::Names)
        } else if p.n_common_refs.is_some_and(|r| r >= params.min_refs) {
            diag.valid_refs += 1;
            Some(ValidityRule::Refs)
        } else if b.is_none() {
            diag.missing_cosine += 1;
            None
        } else if rank == 0 {
            diag.below_threshold += 1;
            None
        } else if rank > params.top_k {
            diag.outside_top_k += 1;
            None
        } else {
            diag.valid_similarity += 1;
            Some(ValidityRule::SimilarityTop3)
        };
        if let Some(validity_rule) = rule {
            out.push(RankedPair {
                pair: p.clone(),
                boosted_cosine: b,
                validity_rule,
                rank_within_doc: rank,
            });
        }
    }
    (out, diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Publications per patent family.
    Patent,
    /// Patent families per publication.
    Publication,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Patent => "patent",
            Side::Publication => "publication",
        }
    }
}

/// Fan-out histograms: how many documents have exactly N partners.
pub fn relationship_histogram<'a, I>(keys: I) -> Histogram
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut per_family: HashMap<&str, usize> = HashMap::new();
    let mut per_publication: HashMap<&str, usize> = HashMap::new();
    for (f, p) in keys {
        *per_family.entry(f).or_default() += 1;
        *per_publication.entry(p).or_default() += 1;
    }
    let hist = |m: HashMap<&str, usize>| {
        let mut h = BTreeMap::new();
        for n in m.into_values() {
            *h.entry(n).or_insert(0) += 1;
        }
        h
    };
    BTreeMap::from([
        (Side::Patent, hist(per_family)),
        (Side::Publication, hist(per_publication)),
    ])
}

/// Documents per partner count, by side.
pub type Histogram = BTreeMap<Side, BTreeMap<usize, usize>>;

/// CSV rows `stage,side,N,count`.
pub fn histogram_csv(stages: &[(&str, Histogram)]) -> String {
    let mut out = String::from("stage,side,N,count\n");
    for (stage, hist) in stages {
        for (side, counts) in hist {
            for (n, count) in counts {
                out.push_str(&format!("{stage},{},{n},{count}\n", side.as_str()));
            }
        }
    }
    out
}
