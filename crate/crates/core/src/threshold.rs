//! Similarity thresholds from the lower whiskers of per-group cosine
//! distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pairing::CandidatePair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("percentile of an empty list")]
    Empty,
    #[error("percentile {0} outside (0, 100)")]
    BadPercent(f64),
    #[error("no group with at least {min_group_size} pairs")]
    Unavailable { min_group_size: usize },
}

/// Inclusive linear-interpolation percentile: rank `p/100 * (n-1)` into the
/// sorted values.
pub fn group_percentile(values: &[f64], p: f64) -> Result<f64, ThresholdError> {
    if values.is_empty() {
        return Err(ThresholdError::Empty);
    }
    if !(p > 0.0 && p < 100.0) {
        return Err(ThresholdError::BadPercent(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(percentile_sorted(&sorted, 50.0))
}

/// How per-group values become one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Median of the per-group lower whiskers.
    #[default]
    GroupMedian,
    /// Lower whisker of all qualifying pairs pooled together.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdParams {
    pub percentile: f64,
    pub min_group_size: usize,
    pub aggregation: Aggregation,
    pub fallback: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self {
            percentile: 5.0,
            min_group_size: 20,
            aggregation: Aggregation::GroupMedian,
            fallback: 0.7,
        }
    }
}

/// Cosines grouped by a per-pair key; pairs without a cosine or without a
/// key are skipped.
pub fn group_cosines(
    pairs: &[CandidatePair],
    key: impl Fn(&CandidatePair) -> Option<usize>,
) -> BTreeMap<usize, Vec<f64>> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for p in pairs {
        if let (Some(k), Some(c)) = (key(p), p.cosine) {
            groups.entry(k).or_default().push(c);
        }
    }
    groups
}

fn names_key(p: &CandidatePair) -> Option<usize> {
    Some(p.n_common_names).filter(|&k| k >= 2)
}

fn refs_key(p: &CandidatePair) -> Option<usize> {
    p.n_common_refs.filter(|&r| r >= 1)
}

fn threshold_from_groups(groups: &BTreeMap<usize, Vec<f64>>, params: &ThresholdParams) -> Result<f64, ThresholdError> {
    let qualifying: Vec<&Vec<f64>> = groups.values().filter(|g| g.len() >= params.min_group_size).collect();
    if qualifying.is_empty() {
        return Err(ThresholdError::Unavailable {
            min_group_size: params.min_group_size,
        });
    }
    match params.aggregation {
        Aggregation::GroupMedian => {
            let lows = qualifying
                .iter()
                .map(|g| group_percentile(g, params.percentile))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(median(&lows).expect("non-empty"))
        }
        Aggregation::Pooled => {
            let pooled: Vec<f64> = qualifying.into_iter().flatten().copied().collect();
            group_percentile(&pooled, params.percentile)
        }
    }
}

/// Threshold from the groups of pairs sharing k >= 2 names.
pub fn compute_threshold_names(pairs: &[CandidatePair], params: &ThresholdParams) -> Result<f64, ThresholdError> {
    threshold_from_groups(&group_cosines(pairs, names_key), params)
}

/// Threshold from the groups of pairs sharing r >= 1 references.
pub fn compute_threshold_refs(pairs: &[CandidatePair], params: &ThresholdParams) -> Result<f64, ThresholdError> {
    threshold_from_groups(&group_cosines(pairs, refs_key), params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub t_names: f64,
    pub t_refs: f64,
    pub t_combined: f64,
    pub names_fallback: bool,
    pub refs_fallback: bool,
}

impl ThresholdSet {
    pub fn new(t_names: f64, t_refs: f64) -> Self {
        Self {
            t_names,
            t_refs,
            t_combined: (t_names + t_refs) / 2.0,
            names_fallback: false,
            refs_fallback: false,
        }
    }

    /// Both thresholds, each replaced by the fallback when unavailable.
    pub fn compute(pairs: &[CandidatePair], params: &ThresholdParams) -> Self {
        let resolve = |r: Result<f64, ThresholdError>, what: &str| match r {
            Ok(t) => (t, false),
            Err(e) => {
                log::warn!("{what} threshold unavailable ({e}); using {}", params.fallback);
                (params.fallback, true)
            }
        };
        let (t_names, names_fallback) = resolve(compute_threshold_names(pairs, params), "name");
        let (t_refs, refs_fallback) = resolve(compute_threshold_refs(pairs, params), "reference");
        Self {
            names_fallback,
            refs_fallback,
            ..Self::new(t_names, t_refs)
        }
    }
}

/// Box-plot summary of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub feature: String,
    pub group: usize,
    pub n: usize,
    /// Lower whisker.
    pub p5: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Upper whisker.
    pub p95: f64,
}

pub fn boxplot_csv(stats: &[GroupStats]) -> String {
    let mut out = String::from("feature,group,n,lower,q1,median,q3,upper\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.feature, s.group, s.n, s.p5, s.q1, s.median, s.q3, s.p95
        ));
    }
    out
}

/// Whiskers at `lower` and `upper` percent, box at the quartiles.
pub fn boxplot_stats(pairs: &[CandidatePair], lower: f64, upper: f64) -> Vec<GroupStats> {
    let mut out = Vec::new();
    for (feature, groups) in [
        ("names", group_cosines(pairs, names_key)),
        ("refs", group_cosines(pairs, refs_key)),
    ] {
        for (group, mut values) in groups {
            values.sort_by(f64::total_cmp);
            out.push(GroupStats {
                feature: feature.into(),
                group,
                n: values.len(),
                p5: percentile_sorted(&values, lower),
                q1: percentile_sorted(&values, 25.0),
                median: percentile_sorted(&values, 50.0),
                q3: percentile_sorted(&values, 75.0),
                p95: percentile_sorted(&values, upper),
            });
        }
    }
    out
}
