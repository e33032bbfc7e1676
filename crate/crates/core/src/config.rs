//! Pipeline configuration read from TOML. Every key is optional; missing
//! keys take their default values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ipc::{AllowedClassRule, SurePairRule};
use crate::ranking::RankingParams;
use crate::refs::RerankWeights;
use crate::threshold::ThresholdParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Patent documents, JSONL.
    pub patents: PathBuf,
    /// Publications, JSONL or MEDLINE XML (by `.xml` extension).
    pub publications: PathBuf,
    /// MeSH thesaurus TSV.
    pub mesh: PathBuf,
    /// Works fixture for the offline resolver.
    pub works: PathBuf,
    /// Resolution cache journal; relative paths resolve against the stage
    /// directory.
    pub resolver_cache: PathBuf,
    /// Verdict journal; relative to the stage directory.
    pub verdicts: PathBuf,
    /// Optional token-vector file for the `table` embedding provider.
    pub token_vectors: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            patents: "patents.jsonl".into(),
            publications: "publications.jsonl".into(),
            mesh: "mesh.tsv".into(),
            works: "works.json".into(),
            resolver_cache: "resolver_cache.jsonl".into(),
            verdicts: "verdicts.jsonl".into(),
            token_vectors: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairingConfig {
    /// Publication years considered after the filing year when blocking.
    pub year_window: i32,
    pub min_years: f64,
    pub max_years: f64,
}

impl Default for PairingConfig {
    fn default() -> Self {
        Self {
            year_window: 2,
            min_years: 0.5,
            max_years: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Hashed,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: ProviderKind,
    pub dimension: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Hashed,
            dimension: crate::embed::DEFAULT_DIMENSION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolverMode {
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolverConfig {
    pub mode: ResolverMode,
    pub base_url: String,
    pub delay_secs: f64,
    pub timeout_secs: f64,
    pub max_retries: usize,
    pub weights: RerankWeights,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        Self {
            mode: ResolverMode::Mock,
            base_url: "https://api.crossref.org/works".into(),
            delay_secs: 1.0,
            timeout_secs: 30.0,
            max_retries: 3,
            weights: RerankWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: String,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub paths: Paths,
    pub pairing: PairingConfig,
    pub threshold: ThresholdParams,
    /// Upper whisker reported in the box-plot statistics.
    pub upper_percentile: f64,
    pub embedding: EmbeddingConfig,
    pub resolver: ResolverConfig,
    pub sure_pairs: SurePairRule,
    pub ipc: AllowedClassRule,
    pub ranking: RankingParams,
    pub serve: ServeConfig,
    /// Directory that relative `paths` entries resolve against; set when
    /// loading from a file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: Paths::default(),
            pairing: PairingConfig::default(),
            threshold: ThresholdParams::default(),
            upper_percentile: 95.0,
            embedding: EmbeddingConfig::default(),
            resolver: ResolverConfig::default(),
            sure_pairs: SurePairRule::default(),
            ipc: AllowedClassRule::default(),
            ranking: RankingParams::default(),
            serve: ServeConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: "<string>".into(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config: Config = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// An input path relative to the config file's directory.
    pub fn input(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        let p = &self.pairing;
        if !(p.min_years >= 0.0 && p.min_years <= p.max_years) {
            return fail("pairing: need 0 <= min_years <= max_years");
        }
        if p.year_window < 0 {
            return fail("pairing.year_window must be non-negative");
        }
        let t = &self.threshold;
        if !(t.percentile > 0.0 && t.percentile < 100.0) {
            return fail("threshold.percentile must lie in (0, 100)");
        }
        if !(self.upper_percentile > t.percentile && self.upper_percentile < 100.0) {
            return fail("upper_percentile must lie in (percentile, 100)");
        }
        if t.min_group_size == 0 {
            return fail("threshold.min_group_size must be positive");
        }
        if !(0.0..=1.0).contains(&t.fallback) {
            return fail("threshold.fallback must lie in [0, 1]");
        }
        if self.embedding.dimension == 0 {
            return fail("embedding.dimension must be positive");
        }
        if self.embedding.provider == ProviderKind::Table && self.paths.token_vectors.is_none() {
            return fail("embedding.provider = \"table\" needs paths.token_vectors");
        }
        if self.resolver.mode == ResolverMode::Live {
            if self.resolver.base_url.is_empty() {
                return fail("resolver.base_url is empty");
            }
            if self.resolver.delay_secs < 1.0 {
                return fail("resolver.delay_secs must be at least 1");
            }
        }
        if !(0.0..=1.0).contains(&self.ipc.min_share) {
            return fail("ipc.min_share must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.sure_pairs.min_cosine) {
            return fail("sure_pairs.min_cosine must lie in [0, 1]");
        }
        if self.ranking.top_k == 0 {
            return fail("ranking.top_k must be positive");
        }
        if !(0.0..=1.0).contains(&self.ranking.academic_boost) {
            return fail("ranking.academic_boost must lie in [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c.pairing.min_years, 0.5);
        assert_eq!(c.pairing.max_years, 1.5);
        assert_eq!(c.threshold.percentile, 5.0);
        assert_eq!(c.upper_percentile, 95.0);
        assert_eq!(c.threshold.min_group_size, 20);
        assert_eq!(c.threshold.fallback, 0.7);
        assert_eq!(c.ipc.min_share, 0.015);
        assert_eq!(c.sure_pairs.min_names, 4);
        assert_eq!(c.sure_pairs.min_cosine, 0.95);
        assert_eq!(c.ranking.academic_boost, 0.1);
        assert_eq!(c.ranking.top_k, 3);
        assert_eq!(c.resolver.mode, ResolverMode::Mock);
    }

    #[test]
    fn partial_override() {
        let c = Config::from_toml("seed = 7\n[pairing]\nmax_years = 2.0\n[ranking]\nscope = \"family\"\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.pairing.max_years, 2.0);
        assert_eq!(c.pairing.min_years, 0.5);
        assert_eq!(c.ranking.scope, crate::ranking::Best3Scope::Family);
    }

    #[test]
    fn round_trip() {
        let c = Config::default();
        assert_eq!(
            Config::from_toml(&c.to_toml()).unwrap(),
            Config {
                base_dir: PathBuf::from("."),
                ..c
            }
        );
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            Config::from_toml("[pairing]\nmin_years = 2.0"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            Config::from_toml("[threshold]\npercentile = 0.0"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            Config::from_toml("[embedding]\nprovider = \"table\""),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            Config::from_toml("[resolver]\nmode = \"live\"\ndelay_secs = 0.2"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(Config::from_toml("bogus = 1"), Err(ConfigError::Parse { .. })));
    }
}
