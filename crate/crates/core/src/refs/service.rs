use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::normalize_title;

/// Fields sent to the bibliographic search.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorkQuery {
    pub title: Option<String>,
    pub authors: Vec<String>,
    pub journal: Option<String>,
    pub year: Option<i32>,
}

/// One search result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkRecord {
    pub doi: String,
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub container_title: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ServiceError {
    /// Worth retrying.
    #[error("network: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

pub trait MetadataService: Send + Sync {
    /// Best matches first, at most `rows`.
    fn search(&self, query: &WorkQuery, rows: usize) -> Result<Vec<WorkRecord>, ServiceError>;

    /// Number of searches issued so far.
    fn calls(&self) -> usize;
}

/// Offline search over a fixed list of works. Ranking is title-word
/// Jaccard similarity plus small author and journal bonuses; the year acts
/// as a filter the way the live service's date filter does.
#[derive(Debug, Default)]
pub struct MockService {
    works: Vec<WorkRecord>,
    calls: AtomicUsize,
}

#[derive(Deserialize)]
struct WorksFile {
    works: Vec<WorkRecord>,
}

impl MockService {
    pub fn new(works: Vec<WorkRecord>) -> Self {
        Self {
            works,
            calls: AtomicUsize::new(0),
        }
    }

    /// Reads `{"works": [...]}`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: WorksFile = serde_json::from_str(text)?;
        Ok(Self::new(file.works))
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn works(&self) -> &[WorkRecord] {
        &self.works
    }

    pub fn to_json(works: &[WorkRecord]) -> String {
        serde_json::json!({ "works": works }).to_string()
    }
}

fn word_set(text: &str) -> HashSet<String> {
    normalize_title(text)
        .split(' ')
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

impl MetadataService for MockService {
    fn search(&self, query: &WorkQuery, rows: usize) -> Result<Vec<WorkRecord>, ServiceError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let query_words = query.title.as_deref().map(word_set).unwrap_or_default();
        let query_authors: HashSet<String> = query.authors.iter().map(|a| normalize_title(a)).collect();
        let mut scored: Vec<(f64, &WorkRecord)> = self
            .works
            .iter()
            .filter(|w| query.year.is_none() || w.year == query.year)
            .filter_map(|w| {
                let words = word_set(&w.title);
                let union = words.union(&query_words).count();
                let title = if union == 0 {
                    0.0
                } else {
                    words.intersection(&query_words).count() as f64 / union as f64
                };
                let authors = w
                    .authors
                    .iter()
                    .filter(|a| query_authors.contains(&normalize_title(a)))
                    .count() as f64;
                let journal = match (&query.journal, &w.container_title) {
                    (Some(a), Some(b)) if normalize_title(a) == normalize_title(b) => 0.1,
                    _ => 0.0,
                };
                let score = title + 0.2 * authors + journal;
                (score > 0.0).then_some((score, w))
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.doi.cmp(&b.1.doi)));
        Ok(scored.into_iter().take(rows).map(|(_, w)| w.clone()).collect())
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Live client for a Crossref-style `/works` endpoint. Calls are serialized
/// and spaced by at least `delay`.
pub struct CrossrefService {
    agent: ureq::Agent,
    base_url: String,
    delay: Duration,
    last_call: Mutex<Option<Instant>>,
    calls: AtomicUsize,
}

impl CrossrefService {
    pub fn new(base_url: impl Into<String>, delay: Duration, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .user_agent(concat!("pplink/", env!("CARGO_PKG_VERSION")))
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            base_url: base_url.into(),
            delay: delay.max(Duration::from_secs(1)),
            last_call: Mutex::new(None),
            calls: AtomicUsize::new(0),
        }
    }

    fn request(&self, query: &WorkQuery, rows: usize) -> Result<String, ServiceError> {
        let mut req = self.agent.get(&self.base_url).query("rows", rows.to_string());
        if let Some(t) = &query.title {
            req = req.query("query.title", t);
        }
        if !query.authors.is_empty() {
            req = req.query("query.author", query.authors.join(" "));
        }
        if let Some(j) = &query.journal {
            req = req.query("query.container-title", j);
        }
        if let Some(y) = query.year {
            req = req.query("filter", format!("from-pub-date:{y},until-pub-date:{y}"));
        }
        let mut response = req.call().map_err(|e| ServiceError::Network(e.to_string()))?;
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| ServiceError::Network(e.to_string()))
    }
}

/// Extracts works from a Crossref `message.items` response.
pub fn parse_crossref_response(body: &str) -> Result<Vec<WorkRecord>, ServiceError> {
    let value: Value = serde_json::from_str(body).map_err(|e| ServiceError::Malformed(e.to_string()))?;
    let items = value
        .pointer("/message/items")
        .and_then(Value::as_array)
        .ok_or_else(|| ServiceError::Malformed("missing message.items".into()))?;
    Ok(items
        .iter()
        .filter_map(|item| {
            let doi = item.get("DOI")?.as_str()?.to_string();
            let title = item
                .get("title")
                .and_then(|t| t.get(0).or(Some(t)))
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            let authors = item
                .get("author")
                .and_then(Value::as_array)
                .map(|a| {
                    a.iter()
                        .filter_map(|p| p.get("family").and_then(Value::as_str).map(str::to_string))
                        .collect()
                })
                .unwrap_or_default();
            let year = ["issued", "published-print", "published-online"]
                .iter()
                .find_map(|k| item.pointer(&format!("/{k}/date-parts/0/0"))?.as_i64())
                .map(|y| y as i32);
            let container_title = item
                .get("container-title")
                .and_then(|t| t.get(0))
                .and_then(Value::as_str)
                .map(str::to_string);
            Some(WorkRecord {
                doi,
                title,
                authors,
                year,
                container_title,
            })
        })
        .collect())
}

impl MetadataService for CrossrefService {
    fn search(&self, query: &WorkQuery, rows: usize) -> Result<Vec<WorkRecord>, ServiceError> {
        let mut last = self.last_call.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(at) = *last {
            let elapsed = at.elapsed();
            if elapsed < self.delay {
                std::thread::sleep(self.delay - elapsed);
            }
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let result = self.request(query, rows);
        *last = Some(Instant::now());
        drop(last);
        parse_crossref_response(&result?)
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn work(doi: &str, title: &str, authors: &[&str], year: i32) -> WorkRecord {
        WorkRecord {
            doi: doi.into(),
            title: title.into(),
            authors: authors.iter().map(|a| a.to_string()).collect(),
            year: Some(year),
            container_title: None,
        }
    }

    #[test]
    fn mock_ranks_by_title_overlap_and_filters_year() {
        let svc = MockService::new(vec![
            work("10.1000/a", "Gene therapy advances", &["Smith"], 2001),
            work("10.1000/b", "Gene therapy", &["Doe"], 2001),
            work("10.1000/c", "Gene therapy advances", &["Smith"], 2002),
            work("10.1000/d", "Unrelated", &["Roe"], 2001),
        ]);
        let q = WorkQuery {
            title: Some("Gene therapy advances".into()),
            authors: vec!["smith".into()],
            journal: None,
            year: Some(2001),
        };
        let hits = svc.search(&q, 3).unwrap();
        let dois: Vec<_> = hits.iter().map(|w| w.doi.as_str()).collect();
        assert_eq!(dois, vec!["10.1000/a", "10.1000/b"]);
        assert_eq!(svc.calls(), 1);
    }

    #[test]
    fn mock_fixture_round_trip() {
        let works = vec![work("10.1000/a", "T", &[], 2001)];
        let svc = MockService::from_json(&MockService::to_json(&works)).unwrap();
        assert_eq!(svc.works(), works.as_slice());
    }

    #[test]
    fn crossref_response_parsing() {
        let body = r#"{"status":"ok","message":{"items":[
            {"DOI":"10.1000/x","title":["A title"],"author":[{"given":"J","family":"Smith"}],
             "issued":{"date-parts":[[2001,5]]},"container-title":["Nature"]},
            {"title":["no doi"]}
        ]}}"#;
        let works = parse_crossref_response(body).unwrap();
        assert_eq!(works.len(), 1);
        assert_eq!(works[0].authors, vec!["Smith"]);
        assert_eq!(works[0].year, Some(2001));
        assert_eq!(works[0].container_title.as_deref(), Some("Nature"));
        assert!(matches!(parse_crossref_response("{}"), Err(ServiceError::Malformed(_))));
        assert!(matches!(
            parse_crossref_response("nope"),
            Err(ServiceError::Malformed(_))
        ));
    }
}
