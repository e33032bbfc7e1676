use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::service::{MetadataService, ServiceError, WorkQuery, WorkRecord};
use super::{normalize_doi, normalize_title, parse_citation, DoiCandidate, ParsedCitation};
use crate::names::transliterate;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cache {path} line {line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub raw: String,
    pub doi: Option<String>,
    pub resolved_at: DateTime<Utc>,
}

/// Resolutions keyed by the exact raw citation string, optionally backed by
/// an append-only JSONL journal. Later journal lines override earlier ones.
#[derive(Debug, Default)]
pub struct ResolutionCache {
    entries: RwLock<HashMap<String, Option<String>>>,
    journal: Option<(PathBuf, Mutex<File>)>,
}

impl ResolutionCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Replays the journal at `path` (if any) and appends to it from then on.
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io = |source| CacheError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(&line).map_err(|source| CacheError::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    source,
                })?;
                entries.insert(entry.raw, entry.doi);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(Self {
            entries: RwLock::new(entries),
            journal: Some((path.to_path_buf(), Mutex::new(file))),
        })
    }

    pub fn get(&self, raw: &str) -> Option<Option<String>> {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).get(raw).cloned()
    }

    pub fn insert(&self, raw: &str, doi: Option<String>) -> Result<(), CacheError> {
        if let Some((path, file)) = &self.journal {
            let entry = CacheEntry {
                raw: raw.to_string(),
                doi: doi.clone(),
                resolved_at: Utc::now(),
            };
            let line = serde_json::to_string(&entry).expect("cache entry serializes");
            let mut file = file.lock().unwrap_or_else(|e| e.into_inner());
            writeln!(file, "{line}").map_err(|source| CacheError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        self.entries
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(raw.to_string(), doi);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankWeights {
    pub title: f64,
    pub authors: f64,
    pub year: f64,
}

impl Default for RerankWeights {
    fn default() -> Self {
        Self {
            title: 3.0,
            authors: 1.0,
            year: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ResolverStats {
    pub cache_hits: usize,
    pub service_calls: usize,
    pub resolved: usize,
    pub unresolved: usize,
    pub failures: usize,
}

fn surname_key(name: &str) -> String {
    normalize_title(&transliterate(name))
}

/// Scores the service's top results against the parsed citation, best
/// first. Ties keep the service order.
pub fn rerank(citation: &ParsedCitation, results: &[WorkRecord], weights: &RerankWeights) -> Vec<DoiCandidate> {
    let title = citation.title_guess.as_deref().map(normalize_title);
    let cited: Vec<String> = citation.author_lastnames.iter().map(|a| surname_key(a)).collect();
    let mut candidates: Vec<DoiCandidate> = results
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let title_match = title
                .as_ref()
                .is_some_and(|t| !t.is_empty() && *t == normalize_title(&w.title));
            let found: Vec<String> = w.authors.iter().map(|a| surname_key(a)).collect();
            let overlap = cited.iter().filter(|a| found.contains(a)).count();
            let authors_match = !cited.is_empty() && 2 * overlap >= cited.len();
            let year_match = citation.year_guess.is_some() && citation.year_guess == w.year;
            let score = weights.title * f64::from(u8::from(title_match))
                + weights.authors * f64::from(u8::from(authors_match))
                + weights.year * f64::from(u8::from(year_match));
            DoiCandidate {
                doi: normalize_doi(&w.doi),
                title: w.title.clone(),
                authors: w.authors.clone(),
                year: w.year,
                service_rank: i + 1,
                rerank_score: score,
                title_match,
            }
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.rerank_score
            .total_cmp(&a.rerank_score)
            .then(a.service_rank.cmp(&b.service_rank))
    });
    candidates
}

/// Citation-to-DOI resolution through a cache and a search service.
pub struct Resolver<'a> {
    service: &'a dyn MetadataService,
    cache: ResolutionCache,
    weights: RerankWeights,
    max_retries: usize,
    rows: usize,
    cache_hits: AtomicUsize,
    service_calls: AtomicUsize,
    resolved: AtomicUsize,
    unresolved: AtomicUsize,
    failures: AtomicUsize,
}

impl<'a> Resolver<'a> {
    pub fn new(service: &'a dyn MetadataService, cache: ResolutionCache) -> Self {
        Self {
            service,
            cache,
            weights: RerankWeights::default(),
            max_retries: 3,
            rows: 3,
            cache_hits: AtomicUsize::new(0),
            service_calls: AtomicUsize::new(0),
            resolved: AtomicUsize::new(0),
            unresolved: AtomicUsize::new(0),
            failures: AtomicUsize::new(0),
        }
    }

    pub fn with_weights(mut self, weights: RerankWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_max_retries(mut self, retries: usize) -> Self {
        self.max_retries = retries;
        self
    }

    pub fn cache(&self) -> &ResolutionCache {
        &self.cache
    }

    pub fn stats(&self) -> ResolverStats {
        ResolverStats {
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            service_calls: self.service_calls.load(Ordering::Relaxed),
            resolved: self.resolved.load(Ordering::Relaxed),
            unresolved: self.unresolved.load(Ordering::Relaxed),
            failures: self.failures.load(Ordering::Relaxed),
        }
    }

    fn search_with_retries(&self, query: &WorkQuery) -> Result<Vec<WorkRecord>, ServiceError> {
        let mut attempt = 0;
        loop {
            self.service_calls.fetch_add(1, Ordering::Relaxed);
            match self.service.search(query, self.rows) {
                Err(ServiceError::Network(msg)) if attempt < self.max_retries => {
                    attempt += 1;
                    log::debug!("retrying search after network error ({attempt}): {msg}");
                }
                other => return other,
            }
        }
    }

    /// DOI for one raw citation string. Network and response failures give
    /// `None` and are not cached, so a later run can try again.
    pub fn resolve(&self, raw: &str) -> Result<Option<String>, CacheError> {
        if let Some(hit) = self.cache.get(raw) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        let citation = parse_citation(raw);
        let doi = if citation.is_queryable() {
            let query = WorkQuery {
                title: citation.title_guess.clone(),
                authors: citation.author_lastnames.clone(),
                journal: citation.journal_guess.clone(),
                year: citation.year_guess,
            };
            match self.search_with_retries(&query) {
                Ok(results) => rerank(&citation, &results, &self.weights)
                    .into_iter()
                    .next()
                    .filter(|best| best.title_match)
                    .map(|best| best.doi),
                Err(e) => {
                    log::warn!("could not resolve {raw:?}: {e}");
                    self.failures.fetch_add(1, Ordering::Relaxed);
                    return Ok(None);
                }
            }
        } else {
            None
        };
        let counter = if doi.is_some() {
            &self.resolved
        } else {
            &self.unresolved
        };
        counter.fetch_add(1, Ordering::Relaxed);
        self.cache.insert(raw, doi.clone())?;
        Ok(doi)
    }

    /// Distinct DOIs for a list of citation strings, in first-seen order.
    pub fn resolve_all<S: AsRef<str>>(&self, raws: &[S]) -> Result<Vec<String>, CacheError> {
        let mut out: Vec<String> = Vec::new();
        for raw in raws {
            if let Some(doi) = self.resolve(raw.as_ref())? {
                if !out.contains(&doi) {
                    out.push(doi);
                }
            }
        }
        Ok(out)
    }
}
