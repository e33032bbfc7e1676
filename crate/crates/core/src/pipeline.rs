//! File-to-file pipeline stages. Each stage reads the outputs of earlier
//! stages from the stage directory and writes its own next to them, so any
//! stage can be re-run on its own.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError, ProviderKind, ResolverMode};
use crate::embed::{cosine_similarity, embed_document, DocumentVector, EmbeddingProvider, HashedProvider, TokenTable};
use crate::family::{group_into_families, PatentFamily};
use crate::ingest::{
    convert_medline_xml, dedup_headings, load_mesh_thesaurus, load_patents, load_publications, to_jsonl, Language,
    PatentDocument, PublicationRecord, Thesaurus,
};
use crate::ipc::{
    allowed_classes, allowed_from_lines, allowed_to_lines, detect_academic, family_codes, filter_pairs_by_ipc, qq_csv,
    qq_plot_data, select_sure_pairs, subset_distribution, ClassDistribution,
};
use crate::mesh::{extract_family_terms, ExtractedTerms, MultilingualIndex};
use crate::names::NameNormalizer;
use crate::pairing::{block_join, date_filter, publication_authors, CandidatePair};
use crate::ranking::{apply_validity_rules, histogram_csv, relationship_histogram, RankedPair};
use crate::refs::{count_common_references, CrossrefService, MetadataService, MockService, ResolutionCache, Resolver};
use crate::review::{build_review_items, evaluation_report, report_csv, VerdictStore};
use crate::threshold::{boxplot_csv, boxplot_stats, ThresholdSet};

/// Stage directory file names.
pub mod files {
    pub const PATENTS: &str = "patents.jsonl";
    pub const PUBLICATIONS: &str = "publications.jsonl";
    pub const MESH: &str = "mesh.tsv";
    pub const INGEST_REPORT: &str = "ingest_report.json";
    pub const FAMILIES: &str = "families.jsonl";
    pub const RAW_PAIRS: &str = "raw_pairs.jsonl";
    pub const CANDIDATE_PAIRS: &str = "candidate_pairs.jsonl";
    pub const PATENT_TERMS: &str = "patent_terms.jsonl";
    pub const PUBLICATION_TERMS: &str = "publication_terms.jsonl";
    pub const COSINE_PAIRS: &str = "pairs_cosine.jsonl";
    pub const FAMILY_DOIS: &str = "family_dois.jsonl";
    pub const FEATURE_PAIRS: &str = "pairs_features.jsonl";
    pub const SURE_PAIRS: &str = "sure_pairs.jsonl";
    pub const DISTRIBUTIONS: &str = "ipc_distributions.json";
    pub const QQ: &str = "ipc_qq.csv";
    pub const ALLOWED_CLASSES: &str = "allowed_classes.txt";
    pub const IPC_PAIRS: &str = "ipc_pairs.jsonl";
    pub const THRESHOLDS: &str = "thresholds.json";
    pub const BOXPLOT: &str = "boxplot.csv";
    pub const FINAL_PAIRS: &str = "final_pairs.jsonl";
    pub const RANKING_DIAGNOSTICS: &str = "ranking_diagnostics.json";
    pub const HISTOGRAM: &str = "histogram.csv";
    pub const REVIEW_ITEMS: &str = "review_items.jsonl";
    pub const REPORT_CSV: &str = "report.csv";
    pub const REPORT_JSON: &str = "report.json";
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: missing input {}", path.display())]
    MissingInput { stage: Stage, path: PathBuf },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    /// Process exit status for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::MissingInput { .. } => 2,
            PipelineError::Config(_) => 3,
            PipelineError::Stage { .. } => 1,
        }
    }

    fn stage(stage: Stage, message: impl fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Families,
    Pairs,
    MeshExtract,
    Embed,
    Refs,
    IpcFilter,
    Rank,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Families,
        Stage::Pairs,
        Stage::MeshExtract,
        Stage::Embed,
        Stage::Refs,
        Stage::IpcFilter,
        Stage::Rank,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Families => "families",
            Stage::Pairs => "pairs",
            Stage::MeshExtract => "mesh-extract",
            Stage::Embed => "embed",
            Stage::Refs => "refs",
            Stage::IpcFilter => "ipc-filter",
            Stage::Rank => "rank",
            Stage::Report => "report",
        }
    }

    pub fn run(self, ctx: &Context) -> Result<StageReport, PipelineError> {
        let report = match self {
            Stage::Ingest => ingest(ctx),
            Stage::Families => families(ctx),
            Stage::Pairs => pairs(ctx),
            Stage::MeshExtract => mesh_extract(ctx),
            Stage::Embed => embed(ctx),
            Stage::Refs => refs(ctx),
            Stage::IpcFilter => ipc_filter(ctx),
            Stage::Rank => rank(ctx),
            Stage::Report => report(ctx),
        }?;
        log::info!("{}: {:?}", self.name(), report.counts);
        Ok(report)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// What a stage produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub counts: BTreeMap<String, usize>,
}

impl StageReport {
    fn count(mut self, key: &str, n: usize) -> Self {
        self.counts.insert(key.to_string(), n);
        self
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.counts.get(key).copied()
    }
}

/// Configuration plus the directory stage files live in.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    pub stage_dir: PathBuf,
}

impl Context {
    pub fn new(config: Config, stage_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        config.validate()?;
        let stage_dir = stage_dir.into();
        std::fs::create_dir_all(&stage_dir)
            .map_err(|e| PipelineError::stage(Stage::Ingest, format!("cannot create {}: {e}", stage_dir.display())))?;
        Ok(Self { config, stage_dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.stage_dir.join(name)
    }

    /// A stage-directory path from the config, relative to the stage dir.
    pub fn stage_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.stage_dir.join(p)
        }
    }
}

fn require(stage: Stage, path: PathBuf) -> Result<PathBuf, PipelineError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(PipelineError::MissingInput { stage, path })
    }
}

fn read_text(stage: Stage, path: PathBuf) -> Result<String, PipelineError> {
    let path = require(stage, path)?;
    std::fs::read_to_string(&path).map_err(|e| PipelineError::stage(stage, format!("{}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(stage: Stage, path: PathBuf) -> Result<Vec<T>, PipelineError> {
    let text = read_text(stage, path.clone())?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| PipelineError::stage(stage, format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn write_text(stage: Stage, path: PathBuf, text: &str) -> Result<(), PipelineError> {
    std::fs::write(&path, text).map_err(|e| PipelineError::stage(stage, format!("{}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(stage: Stage, path: PathBuf, records: &[T]) -> Result<(), PipelineError> {
    write_text(stage, path, &to_jsonl(records))
}

fn write_json<T: Serialize>(stage: Stage, path: PathBuf, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::stage(stage, e))?;
    write_text(stage, path, &(text + "\n"))
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    patents: usize,
    publications: usize,
    mesh_entries: usize,
    errors: Vec<String>,
}

/// Validates the raw inputs and writes normalized copies.
pub fn ingest(ctx: &Context) -> Result<StageReport, PipelineError> {
    let st = Stage::Ingest;
    let cfg = &ctx.config;
    let mut errors = Vec::new();

    let patents_path = require(st, cfg.input(&cfg.paths.patents))?;
    let patents = load_patents(&patents_path).map_err(|e| PipelineError::stage(st, e))?;
    errors.extend(
        patents
            .errors
            .iter()
            .map(|e| format!("{}: {e}", patents_path.display())),
    );

    let pubs_path = require(st, cfg.input(&cfg.paths.publications))?;
    let publications: Vec<PublicationRecord> = if pubs_path.extension().is_some_and(|e| e == "xml") {
        convert_medline_xml(&pubs_path).map_err(|e| PipelineError::stage(st, e))?
    } else {
        let report = load_publications(&pubs_path).map_err(|e| PipelineError::stage(st, e))?;
        errors.extend(report.errors.iter().map(|e| format!("{}: {e}", pubs_path.display())));
        report.records
    };

    let mesh_path = require(st, cfg.input(&cfg.paths.mesh))?;
    let thesaurus = load_mesh_thesaurus(&mesh_path).map_err(|e| PipelineError::stage(st, e))?;

    for e in &errors {
        log::warn!("{e}");
    }
    write_jsonl(st, ctx.path(files::PATENTS), &patents.records)?;
    write_jsonl(st, ctx.path(files::PUBLICATIONS), &publications)?;
    write_text(st, ctx.path(files::MESH), &thesaurus.to_tsv())?;
    let summary = IngestSummary {
        patents: patents.records.len(),
        publications: publications.len(),
        mesh_entries: thesaurus.entries().len(),
        errors,
    };
    write_json(st, ctx.path(files::INGEST_REPORT), &summary)?;
    Ok(StageReport::default()
        .count("patents", summary.patents)
        .count("publications", summary.publications)
        .count("mesh_entries", summary.mesh_entries)
        .count("rejected_records", summary.errors.len()))
}

pub fn families(ctx: &Context) -> Result<StageReport, PipelineError> {
    let st = Stage::Families;
    let docs: Vec<PatentDocument> = read_jsonl(st, ctx.path(files::PATENTS))?;
    let fams = group_into_families(&docs, &NameNormalizer::default()).map_err(|e| PipelineError::stage(st, e))?;
    write_jsonl(st, ctx.path(files::FAMILIES), &fams)?;
    Ok(StageReport::default()
        .count("documents", docs.len())
        .count("families", fams.len()))
}

/// Raw pairs from name blocking, then the novelty date window.
pub fn pairs(ctx: &Context) -> Result<StageReport, PipelineError> {
    let st = Stage::Pairs;
    let fams: Vec<PatentFamily> = read_jsonl(st, ctx.path(files::FAMILIES))?;
    let pubs: Vec<PublicationRecord> = read_jsonl(st, ctx.path(files::PUBLICATIONS))?;
    let normalizer = NameNormalizer::default();
    let authors: Vec<_> = pubs.par_iter().map(|p| publication_authors(p, &normalizer)).collect();
    let academic: HashMap<&str, bool> = fams
        .iter()
        .map(|f| (f.family_id.as_str(), detect_academic(f)))
        .collect();
    let mut raw = block_join(&fams, &authors, ctx.config.pairing.year_window);
    for p in &mut raw {
        p.academic = academic.get(p.family_id.as_str()).copied().unwrap_or(false);
    }
    write_jsonl(st, ctx.path(files::RAW_PAIRS), &raw)?;
    let n_raw = raw.len();
    let candidates = date_filter(raw, ctx.config.pairing.min_years, ctx.config.pairing.max_years);
    write_jsonl(st, ctx.path(files::CANDIDATE_PAIRS), &candidates)?;
    Ok(StageReport::default()
        .count("raw_pairs", n_raw)
        .count("candidate_pairs", candidates.len()))
}

fn load_stage_thesaurus(st: Stage, ctx: &Context) -> Result<Thesaurus, PipelineError> {
    let text = read_text(st, ctx.path(files::MESH))?;
    Thesaurus::parse_tsv(&text).map_err(|e| PipelineError::stage(st, e))
}

/// MeSH headings per family from its description; publications keep their
/// indexed headings.
pub fn mesh_extract(ctx: &Context) -> Result<StageReport, PipelineError> {
    let st = Stage::MeshExtract;
    let fams: Vec<PatentFamily> = read_jsonl(st, ctx.path(files::FAMILIES))?;
    let pubs: Vec<PublicationRecord> = read_jsonl(st, ctx.path(files::PUBLICATIONS))?;
    let thesaurus = load_stage_thesaurus(st, ctx)?;
    let indexes = MultilingualIndex::build(&thesaurus);
    let results: Vec<_> = fams
        .par_iter()
        .map(|f| extract_family_terms(f, &indexes, &thesaurus))
        .collect();
    let mut patent_terms = Vec::new();
    let mut without_text = 0;
    for r in results {
        match r {
            Ok(t) => patent_terms.push(t),
            Err(e) => {
                log::debug!("{e}");
                without_text += 1;
            }
        }
    }
    let publication_terms: Vec<ExtractedTerms> = pubs
        .iter()
        .map(|p| ExtractedTerms::new(&p.pub_id, Language::En, dedup_headings(p.mesh_headings.clone())))
        .collect();
    write_jsonl(st, ctx.path(files::PATENT_TERMS), &patent_terms)?;
    write_jsonl(st, ctx.path(files::PUBLICATION_TERMS), &publication_terms)?;
    Ok(StageReport::default()
        .count("patent_documents", patent_terms.len())
        .count("families_without_text", without_text)
        .count("publication_documents", publication_terms.len()))
}

pub fn embedding_provider(config: &Config) -> Result<Box<dyn EmbeddingProvider>, PipelineError> {
    match config.embedding.provider {
        ProviderKind::Hashed => Ok(Box::new(HashedProvider::new(config.embedding.dimension, config.seed))),
        ProviderKind::Table => {
            let path = config
                .paths
                .token_vectors
                .as_ref()
                .map(|p| config.input(p))
                .ok_or_else(|| ConfigError::Invalid("paths.token_vectors is not set".into()))?;
            let path = require(Stage::Embed, path)?;
            let table = TokenTable::load(&path).map_err(|e| PipelineError::stage(Stage::Embed, e))?;
            Ok(Box::new(table))
        }
    }
}

fn vectors(terms: &[ExtractedTerms], provider: &dyn EmbeddingProvider) -> HashMap<String, DocumentVector> {
    terms
        .par_iter()
        .filter_map(|t| embed_document(&t.doc_id, &t.headings, provider))
        .map(|v| (v.doc_id.clone(), v))
        .collect()
}

/// Cosine similarity of the two heading vectors of every candidate pair.
pub fn embed(ctx: &Context) -> Result<StageReport, PipelineError> {
    let st = Stage::Embed;
    let candidates: Vec<CandidatePair> = read_jsonl(st, ctx.path(files::CANDIDATE_PAIRS))?;
    let patent_terms: Vec<ExtractedTerms> = read_jsonl(st, ctx.path(files::PATENT_TERMS))?;
    let publication_terms: Vec<ExtractedTerms> = read_jsonl(st, ctx.path(files::PUBLICATION_TERMS))?;
    let provider = embedding_provider(&ctx.config)?;
    let fam_vecs = vectors(&patent_terms, provider.as_ref());
    let pub_vecs = vectors(&publication_terms, provider.as_ref());
    let out: Vec<CandidatePair> = candidates
        .into_par_iter()
        .map(|mut p| {
            p.cosine = match (fam_vecs.get(&p.family_id), pub_vecs.get(&p.pub_id)) {
                (Some(a), Some(b)) => cosine_similarity(a, b).ok(),
                _ => None,
            };
            p
        })
        .collect();
    let with_cosine = out.iter().filter(|p| p.cosine.is_some()).count();
    write_jsonl(st, ctx.path(files::COSINE_PAIRS), &out)?;
    Ok(StageReport::default()
        .count("pairs", out.len())
        .count("pairs_with_cosine", with_cosine))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDois {
    pub family_id: String,
    pub dois: Vec<String>,
}

pub fn metadata_service(config: &Config) -> Result<Box<dyn MetadataService>, PipelineError> {
    match config.resolver.mode {
        ResolverMode::Mock => {
            let path = require(Stage::Refs, config.input(&config.paths.works))?;
            let svc = MockService::load(&path).map_err(|e| PipelineError::stage(Stage::Refs, e))?;
            Ok(Box::new(svc))
        }
        ResolverMode::Live => Ok(Box::new(CrossrefService::new(
            config.resolver.base_url.clone(),
            Duration::from_secs_f64(config.resolver.delay_secs),
            Duration::from_secs_f64(config.resolver.timeout_secs),
        ))),
    }
}

/// Resolves patent citations to DOIs and counts the DOIs each pair shares.
pub fn refs(ctx: &Context) -> Result<StageReport, PipelineError> {
    let st = Stage::Refs;
    let pairs: Vec<CandidatePair> = read_jsonl(st, ctx.path(files::COSINE_PAIRS))?;
    let fams: Vec<PatentFamily> = read_jsonl(st, ctx.path(files::FAMILIES))?;
    let pubs: Vec<PublicationRecord> = read_jsonl(st, ctx.path(files::PUBLICATIONS))?;
    let service = metadata_service(&ctx.config)?;
    let cache = ResolutionCache::open(&ctx.stage_path(&ctx.config.paths.resolver_cache))
        .map_err(|e| PipelineError::stage(st, e))?;
    let resolver = Resolver::new(service.as_ref(), cache)
        .with_weights(ctx.config.resolver.weights)
        .with_max_retries(ctx.config.resolver.max_retries);

    let needed: BTreeSet<&str> = pairs.iter().map(|p| p.family_id.as_str()).collect();
    let mut family_dois = Vec::new();
    for f in fams.iter().filter(|f| needed.contains(f.family_id.as_str())) {
        let dois = resolver
            .resolve_all(&f.reference_strings)
            .map_err(|e| PipelineError::stage(st, e))?;
        family_dois.push(FamilyDois {
            family_id: f.family_id.clone(),
            dois,
        });
    }
    let by_family: HashMap<&str, &[String]> = family_dois
        .iter()
        .map(|f| (f.family_id.as_str(), f.dois.as_slice()))
        .collect();
    let by_pub: HashMap<&str, &[String]> = pubs
        .iter()
        .map(|p| (p.pub_id.as_str(), p.reference_dois.as_slice()))
        .collect();
    let out: Vec<CandidatePair> = pairs
        .into_iter()
        .map(|mut p| {
            let f = by_family.get(p.family_id.as_str()).copied().unwrap_or_default();
            let q = by_pub.get(p.pub_id.as_str()).copied().unwrap_or_default();
            p.n_common_refs = Some(count_common_references(f, q));
            p
        })
        .collect();
    let stats = resolver.stats();
    log::info!("resolver: {stats:?}");
    write_jsonl(st, ctx.path(files::FAMILY_DOIS), &family_dois)?;
    write_jsonl(st, ctx.path(files::FEATURE_PAIRS), &out)?;
    Ok(StageReport::default()
        .count("pairs", out.len())
        .count(
            "pairs_with_common_refs",
            out.iter().filter(|p| p.n_common_refs > Some(0)).count(),
        )
        .count("resolved_citations", stats.resolved)
        .count("service_calls", stats.service_calls)
        .count("cache_hits", stats.cache_hits))
}

/// Distributions of the four subsets in a fixed order; empty subsets are
/// left out.
pub fn ipc_distributions(
    fams: &[PatentFamily],
    pairs: &[CandidatePair],
    sure: &[CandidatePair],
) -> Vec<ClassDistribution> {
    let by_id: HashMap<&str, &PatentFamily> = fams.iter().map(|f| (f.family_id.as_str(), f)).collect();
    let of = |ps: &mut dyn Iterator<Item = &CandidatePair>| -> Vec<&PatentFamily> {
        ps.filter_map(|p| by_id.get(p.family_id.as_str()).copied()).collect()
    };
    let subsets: [(&str, Vec<&PatentFamily>); 4] = [
        ("baseline", fams.iter().collect()),
        ("raw_pairs", of(&mut pairs.iter())),
        ("academic_pairs", of(&mut pairs.iter().filter(|p| p.academic))),
        ("sure_pairs", of(&mut sure.iter())),
    ];
    subsets
        .into_iter()
        .filter_map(|(label, members)| match subset_distribution(members, label) {
            Ok(d) => Some(d),
            Err(e) => {
                log::warn!("{e}");
                None
            }
        })
        .collect()
}

/// Allowed classes from the sure pairs against the baseline, then the
/// class filter on all candidate pairs.
pub fn ipc_filter(ctx: &Context) -> Result<StageReport, PipelineError> {
    let st = Stage::IpcFilter;
    let mut pairs: Vec<CandidatePair> = read_jsonl(st, ctx.path(files::FEATURE_PAIRS))?;
    let fams: Vec<PatentFamily> = read_jsonl(st, ctx.path(files::FAMILIES))?;
    let sure = select_sure_pairs(&pairs, &ctx.config.sure_pairs);
    let dists = ipc_distributions(&fams, &pairs, &sure);
    let get = |label: &str| dists.iter().find(|d| d.label == label);
    let allowed = match (get("sure_pairs"), get("baseline")) {
        (Some(s), Some(b)) => allowed_classes(s, b, &ctx.config.ipc),
        _ => {
            log::warn!("no sure pairs; the class filter passes everything");
            BTreeSet::new()
        }
    };
    let codes: HashMap<String, _> = fams.iter().map(|f| (f.family_id.clone(), family_codes(f))).collect();
    let kept = filter_pairs_by_ipc(&mut pairs, &codes, &allowed);
    write_jsonl(st, ctx.path(files::SURE_PAIRS), &sure)?;
    write_json(st, ctx.path(files::DISTRIBUTIONS), &dists)?;
    write_text(st, ctx.path(files::QQ), &qq_csv(&qq_plot_data(&dists)))?;
    write_text(st, ctx.path(files::ALLOWED_CLASSES), &allowed_to_lines(&allowed))?;
    write_jsonl(st, ctx.path(files::IPC_PAIRS), &kept)?;
    Ok(StageReport::default()
        .count("sure_pairs", sure.len())
        .count("allowed_classes", allowed.len())
        .count("pairs_in", pairs.len())
        .count("pairs_kept", kept.len()))
}

/// Reads the allowed-class file written by `ipc-filter`.
pub fn read_allowed_classes(ctx: &Context) -> Result<BTreeSet<crate::ipc::IpcCode>, PipelineError> {
    let text = read_text(Stage::IpcFilter, ctx.path(files::ALLOWED_CLASSES))?;
    allowed_from_lines(&text).map_err(|e| PipelineError::stage(Stage::IpcFilter, e))
}

/// Thresholds from all candidate pairs, validity rules on the class-filtered
/// pairs, and the fan-out histograms of every stage.
pub fn rank(ctx: &Context) -> Result<StageReport, PipelineError> {
    let st = Stage::Rank;
    let cfg = &ctx.config;
    let features: Vec<CandidatePair> = read_jsonl(st, ctx.path(files::FEATURE_PAIRS))?;
    let filtered: Vec<CandidatePair> = read_jsonl(st, ctx.path(files::IPC_PAIRS))?;
    let raw: Vec<CandidatePair> = read_jsonl(st, ctx.path(files::RAW_PAIRS))?;
    let thresholds = ThresholdSet::compute(&features, &cfg.threshold);
    let stats = boxplot_stats(&features, cfg.threshold.percentile, cfg.upper_percentile);
    let (ranked, diagnostics) = apply_validity_rules(&filtered, &thresholds, &cfg.ranking);
    let keys = |ps: &[CandidatePair]| {
        ps.iter()
            .map(|p| (p.family_id.clone(), p.pub_id.clone()))
            .collect::<Vec<_>>()
    };
    let stage_keys = [
        ("raw", keys(&raw)),
        ("candidates", keys(&features)),
        ("ipc_filtered", keys(&filtered)),
        (
            "final",
            ranked
                .iter()
                .map(|r| (r.pair.family_id.clone(), r.pair.pub_id.clone()))
                .collect(),
        ),
    ];
    let hist: Vec<_> = stage_keys
        .iter()
        .map(|(stage, ks)| {
            (
                *stage,
                relationship_histogram(ks.iter().map(|(f, p)| (f.as_str(), p.as_str()))),
            )
        })
        .collect();
    write_json(st, ctx.path(files::THRESHOLDS), &thresholds)?;
    write_text(st, ctx.path(files::BOXPLOT), &boxplot_csv(&stats))?;
    write_jsonl(st, ctx.path(files::FINAL_PAIRS), &ranked)?;
    write_json(st, ctx.path(files::RANKING_DIAGNOSTICS), &diagnostics)?;
    write_text(st, ctx.path(files::HISTOGRAM), &histogram_csv(&hist))?;
    Ok(StageReport::default()
        .count("pairs_in", filtered.len())
        .count("final_pairs", ranked.len()))
}

/// Review items for the final pairs and the evaluation report over the
/// verdicts collected so far.
pub fn report(ctx: &Context) -> Result<StageReport, PipelineError> {
    let st = Stage::Report;
    let ranked: Vec<RankedPair> = read_jsonl(st, ctx.path(files::FINAL_PAIRS))?;
    let fams: Vec<PatentFamily> = read_jsonl(st, ctx.path(files::FAMILIES))?;
    let pubs: Vec<PublicationRecord> = read_jsonl(st, ctx.path(files::PUBLICATIONS))?;
    let items = build_review_items(&ranked, &fams, &pubs);
    let verdicts_path = ctx.stage_path(&ctx.config.paths.verdicts);
    let verdicts = if verdicts_path.exists() {
        VerdictStore::open(&verdicts_path)
            .map_err(|e| PipelineError::stage(st, e))?
            .verdicts()
    } else {
        Vec::new()
    };
    let rows = evaluation_report(&verdicts, &items);
    write_jsonl(st, ctx.path(files::REVIEW_ITEMS), &items)?;
    write_text(st, ctx.path(files::REPORT_CSV), &report_csv(&rows))?;
    write_json(st, ctx.path(files::REPORT_JSON), &rows)?;
    Ok(StageReport::default()
        .count("review_items", items.len())
        .count("verdicts", verdicts.len()))
}

/// Every stage in order.
pub fn run_all(ctx: &Context) -> Result<BTreeMap<Stage, StageReport>, PipelineError> {
    let mut reports = BTreeMap::new();
    for stage in Stage::ALL {
        reports.insert(stage, stage.run(ctx)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>(), Ok(s));
        }
        assert!("nope".parse::<Stage>().is_err());
    }

    #[test]
    fn missing_input_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = Context::new(Config::default(), dir.path()).unwrap();
        let err = families(&ctx).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains(files::PATENTS));
    }
}
