//! Python bindings: the name, family, citation, thesaurus and similarity
//! primitives plus a driver for the staged pipeline.
//!
//! Structured results cross the boundary as JSON and are decoded with the
//! standard `json` module, so Python sees plain dicts and lists.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use pplink_core::config::Config;
use pplink_core::family::KindCode;
use pplink_core::ingest::{Language, Thesaurus};
use pplink_core::mesh::{extract_terms, MultilingualIndex};
use pplink_core::pipeline::{files, read_jsonl, run_all, Context, PipelineError, Stage};
use pplink_core::ranking::RankedPair;
use pplink_core::synth::{generate, Scenario};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pipeline_error(e: PipelineError) -> PyErr {
    match e {
        PipelineError::MissingInput { .. } => PyIOError::new_err(e.to_string()),
        other => value_error(other),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_date(s: &str) -> PyResult<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| value_error(format!("expected YYYY-MM-DD, got {s:?}: {e}")))
}

/// Normalizes a raw person name to `(last, initials, canonical)`.
#[pyfunction]
#[pyo3(signature = (raw, country=None))]
fn normalize_name(raw: &str, country: Option<&str>) -> PyResult<(String, String, String)> {
    let n = pplink_core::names::normalize_name(raw, country).map_err(value_error)?;
    let canonical = n.canonical();
    Ok((n.last, n.initials, canonical))
}

/// Splits an EP publication number into `(base, kind, sequence)`.
#[pyfunction]
fn parse_publication_number(number: &str) -> PyResult<(String, char, u8)> {
    let p = pplink_core::family::parse_publication_number(number).map_err(value_error)?;
    let kind = match p.kind {
        KindCode::A => 'A',
        KindCode::B => 'B',
    };
    Ok((p.base, kind, p.sequence))
}

/// Years from filing to publication, both `YYYY-MM-DD`.
#[pyfunction]
fn delta_years(filing: &str, publication: &str) -> PyResult<f64> {
    Ok(pplink_core::pairing::delta_years(
        parse_date(filing)?,
        parse_date(publication)?,
    ))
}

/// Cosine similarity clamped to [0, 1].
#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    pplink_core::embed::cosine(&a, &b).map_err(value_error)
}

#[pyfunction]
fn normalize_doi(doi: &str) -> String {
    pplink_core::refs::normalize_doi(doi)
}

/// Heuristic fields of a free-text citation as a dict.
#[pyfunction]
fn parse_citation<'py>(py: Python<'py>, raw: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &pplink_core::refs::parse_citation(raw))
}

/// Stable review identifier of a (family, publication) pair.
#[pyfunction]
fn pair_id(family_id: &str, pub_id: &str) -> String {
    pplink_core::review::pair_id(family_id, pub_id)
}

/// Writes a synthetic corpus to `out_dir` and returns its config path.
#[pyfunction]
#[pyo3(signature = (out_dir, scenario="standard", seed=42))]
fn write_synthetic_corpus(out_dir: PathBuf, scenario: &str, seed: u64) -> PyResult<PathBuf> {
    let scenario: Scenario = scenario.parse().map_err(value_error)?;
    generate(scenario, seed)
        .write_to(&out_dir, seed)
        .map_err(|e| PyIOError::new_err(e.to_string()))
}

/// A MeSH-style thesaurus with per-language term indexes.
#[pyclass(name = "Thesaurus", module = "pplink", frozen)]
struct PyThesaurus {
    thesaurus: Thesaurus,
    indexes: MultilingualIndex,
}

#[pymethods]
impl PyThesaurus {
    /// Parses the TSV form: `descriptor_id, language, term, is_main_heading`.
    #[new]
    fn new(tsv: &str) -> PyResult<Self> {
        let thesaurus = Thesaurus::parse_tsv(tsv).map_err(value_error)?;
        let indexes = MultilingualIndex::build(&thesaurus);
        Ok(Self { thesaurus, indexes })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Self::new(&text)
    }

    fn __len__(&self) -> usize {
        self.thesaurus.descriptor_count()
    }

    fn english_heading(&self, descriptor_id: &str) -> Option<String> {
        self.thesaurus.english_heading(descriptor_id).map(str::to_string)
    }

    /// English main headings found in `text`, sorted and unique.
    #[pyo3(signature = (text, language="en"))]
    fn extract(&self, text: &str, language: &str) -> PyResult<Vec<String>> {
        let lang =
            Language::from_code(language).ok_or_else(|| value_error(format!("unknown language {language:?}")))?;
        let terms =
            extract_terms("python", lang, text, self.indexes.get(lang), &self.thesaurus).map_err(value_error)?;
        Ok(terms.headings)
    }
}

/// The staged pipeline over one config and one stage directory.
#[pyclass(name = "Pipeline", module = "pplink", frozen)]
struct PyPipeline {
    ctx: Context,
}

#[pymethods]
impl PyPipeline {
    #[new]
    #[pyo3(signature = (config_path, stage_dir, seed=None))]
    fn new(config_path: PathBuf, stage_dir: PathBuf, seed: Option<u64>) -> PyResult<Self> {
        let mut config = Config::load(&config_path).map_err(value_error)?;
        if let Some(s) = seed {
            config.seed = s;
        }
        Ok(Self {
            ctx: Context::new(config, stage_dir).map_err(pipeline_error)?,
        })
    }

    #[staticmethod]
    fn stages() -> Vec<&'static str> {
        Stage::ALL.iter().map(|s| s.name()).collect()
    }

    /// Runs one stage by name and returns its counts.
    fn run(&self, py: Python<'_>, stage: &str) -> PyResult<BTreeMap<String, usize>> {
        let stage: Stage = stage.parse().map_err(value_error)?;
        let ctx = &self.ctx;
        let report = py.detach(|| stage.run(ctx)).map_err(pipeline_error)?;
        Ok(report.counts)
    }

    /// Runs every stage; returns counts keyed by stage name.
    fn run_all(&self, py: Python<'_>) -> PyResult<BTreeMap<String, BTreeMap<String, usize>>> {
        let ctx = &self.ctx;
        let reports = py.detach(|| run_all(ctx)).map_err(pipeline_error)?;
        Ok(reports
            .into_iter()
            .map(|(s, r)| (s.name().to_string(), r.counts))
            .collect())
    }

    /// Final pairs written by the `rank` stage.
    fn final_pairs<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let ranked: Vec<RankedPair> =
            read_jsonl(Stage::Report, self.ctx.path(files::FINAL_PAIRS)).map_err(pipeline_error)?;
        to_py(py, &ranked)
    }

    /// Path of a stage artifact, e.g. `report.csv`.
    fn path(&self, name: &str) -> PathBuf {
        self.ctx.path(name)
    }
}

#[pymodule]
fn pplink(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize_name, m)?)?;
    m.add_function(wrap_pyfunction!(parse_publication_number, m)?)?;
    m.add_function(wrap_pyfunction!(delta_years, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_doi, m)?)?;
    m.add_function(wrap_pyfunction!(parse_citation, m)?)?;
    m.add_function(wrap_pyfunction!(pair_id, m)?)?;
    m.add_function(wrap_pyfunction!(write_synthetic_corpus, m)?)?;
    m.add_class::<PyThesaurus>()?;
    m.add_class::<PyPipeline>()?;
    Ok(())
}
