//! Synthetic corpora with a known answer key.
//!
//! The generator builds a MeSH-like thesaurus of pseudo-words, patent
//! families and publications, a works fixture for the offline resolver and
//! a truth file listing every planted pair together with the distractors
//! that were placed around them.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::ingest::{to_jsonl, Author, Inventor, Language, MeshEntry, PatentDocument, PublicationRecord, Thesaurus};
use crate::refs::{MockService, WorkRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// 100 families, 250 publications, 40 planted pairs.
    Standard,
    /// One inventor whose name collides with 50 publications, plus one
    /// strongly linked pair elsewhere.
    Homonym,
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Scenario::Standard),
            "homonym" => Ok(Scenario::Homonym),
            other => Err(format!("unknown scenario {other:?} (expected standard or homonym)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// Three to five shared inventor/author names.
    Names,
    /// One shared name plus shared cited works.
    References,
    /// Two shared names and near-identical subject headings.
    Subject,
    /// The strongly linked pair of the homonym scenario.
    Anchor,
    /// Namesake in the same field with overlapping headings.
    SameFieldHomonym,
    /// Namesake on a family outside the medical classes.
    OtherClassHomonym,
    /// Namesake published outside the lag window.
    OutOfWindowHomonym,
    /// Namesake with unrelated headings.
    RandomTopicHomonym,
}

impl PairKind {
    pub fn is_true(self) -> bool {
        matches!(
            self,
            PairKind::Names | PairKind::References | PairKind::Subject | PairKind::Anchor
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPair {
    pub family_id: String,
    pub pub_id: String,
    pub kind: PairKind,
    pub n_shared_names: usize,
    pub delta_years: f64,
}

impl TruthPair {
    pub fn is_true(&self) -> bool {
        self.kind.is_true()
    }
}

/// Facts about a generated corpus that follow from its construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    /// IPC subclasses carried by the medical families.
    pub medical_classes: Vec<String>,
    /// Candidate pairs (inside the lag window) on non-medical families.
    pub other_class_candidates: usize,
    /// Family whose inventor is a common namesake (homonym scenario).
    pub homonym_family: Option<String>,
    pub homonym_links: usize,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub patents: Vec<PatentDocument>,
    pub publications: Vec<PublicationRecord>,
    pub thesaurus: Thesaurus,
    pub works: Vec<WorkRecord>,
    pub truth: Vec<TruthPair>,
    pub expectations: Expectations,
}

pub mod files {
    pub const PATENTS: &str = "patents.jsonl";
    pub const PUBLICATIONS: &str = "publications.jsonl";
    pub const MESH: &str = "mesh.tsv";
    pub const WORKS: &str = "works.json";
    pub const TRUTH: &str = "truth.jsonl";
    pub const EXPECTATIONS: &str = "expectations.json";
    pub const CONFIG: &str = "config.toml";
}

impl SynthCorpus {
    pub fn true_pairs(&self) -> impl Iterator<Item = &TruthPair> {
        self.truth.iter().filter(|t| t.is_true())
    }

    /// Writes the inputs, the answer key and a config pointing at them.
    /// Returns the config path.
    pub fn write_to(&self, dir: &Path, seed: u64) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(files::PATENTS), to_jsonl(&self.patents))?;
        std::fs::write(dir.join(files::PUBLICATIONS), to_jsonl(&self.publications))?;
        std::fs::write(dir.join(files::MESH), self.thesaurus.to_tsv())?;
        std::fs::write(dir.join(files::WORKS), MockService::to_json(&self.works))?;
        std::fs::write(dir.join(files::TRUTH), to_jsonl(&self.truth))?;
        let expectations = serde_json::to_string_pretty(&self.expectations).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(files::EXPECTATIONS), expectations)?;
        let config = Config {
            seed,
            ..Config::default()
        };
        let path = dir.join(files::CONFIG);
        std::fs::write(&path, config.to_toml())?;
        Ok(path)
    }
}

pub fn generate(scenario: Scenario, seed: u64) -> SynthCorpus {
    let mut b = Builder::new(seed);
    match scenario {
        Scenario::Standard => b.standard(),
        Scenario::Homonym => b.homonym(),
    }
    b.finish()
}

const SYLLABLES: [&str; 30] = [
    "kor", "tal", "ne", "fro", "sis", "mab", "ven", "lu", "pra", "dex", "ti", "mo", "ran", "sul", "qui", "bel", "dor",
    "fa", "gen", "hy", "lo", "mi", "nu", "pex", "ro", "sta", "tor", "vi", "zan", "cy",
];

const NAME_SYLLABLES: [&str; 24] = [
    "bar", "ken", "dal", "wig", "ost", "har", "mel", "rup", "tes", "sch", "lin", "gor", "vak", "pel", "dri", "mon",
    "str", "ack", "hal", "bern", "wald", "feld", "berg", "mann",
];

const MEDICAL_IPC: [&str; 2] = ["A61K", "C07K"];
const OTHER_IPC: [&str; 2] = ["H04L", "G06F"];

struct Country {
    code: &'static str,
    name: &'static str,
    city: &'static str,
}

const COUNTRIES: [Country; 8] = [
    Country {
        code: "DE",
        name: "Germany",
        city: "Berlin",
    },
    Country {
        code: "FR",
        name: "France",
        city: "Lyon",
    },
    Country {
        code: "GB",
        name: "United Kingdom",
        city: "Leeds",
    },
    Country {
        code: "US",
        name: "USA",
        city: "Boston",
    },
    Country {
        code: "SE",
        name: "Sweden",
        city: "Uppsala",
    },
    Country {
        code: "CH",
        name: "Switzerland",
        city: "Basel",
    },
    Country {
        code: "NL",
        name: "Netherlands",
        city: "Leiden",
    },
    Country {
        code: "IT",
        name: "Italy",
        city: "Padua",
    },
];

const EN_SENTENCES: [&str; 6] = [
    "The present invention relates to {}.",
    "In one embodiment the composition is used for {}.",
    "Further examples concern {} as described below.",
    "Particular attention is given to {}.",
    "The method may also address {}.",
    "Experiments were carried out on {}.",
];
const DE_SENTENCES: [&str; 4] = [
    "Die Erfindung betrifft {}.",
    "In einer Ausführungsform wird {} verwendet.",
    "Weitere Beispiele betreffen {}.",
    "Versuche wurden mit {} durchgeführt.",
];
const FR_SENTENCES: [&str; 4] = [
    "La présente invention concerne {}.",
    "Dans un mode de réalisation on utilise {}.",
    "Des exemples portent sur {}.",
    "Des essais ont été menés sur {}.",
];
const JOURNALS: [&str; 4] = [
    "Acta Synthetica Medica",
    "Journal of Applied Pseudology",
    "Clinical Letters",
    "Archives of Experimental Therapy",
];

/// Pseudo-word vocabulary arranged as a thesaurus. Some terms nest inside
/// longer ones; every term has German and French surface forms and some
/// have an inverted English synonym.
struct Vocabulary {
    headings: Vec<String>,
    synonyms: Vec<Option<String>>,
    german: Vec<String>,
    french: Vec<String>,
    thesaurus: Thesaurus,
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn template_words() -> HashSet<String> {
    EN_SENTENCES
        .iter()
        .chain(&DE_SENTENCES)
        .chain(&FR_SENTENCES)
        .flat_map(|s| s.split(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl Vocabulary {
    const SINGLES: usize = 40;
    const DOUBLES: usize = 90;
    const TRIPLES: usize = 20;

    fn build(rng: &mut ChaCha8Rng) -> Self {
        let reserved = template_words();
        let mut seen = HashSet::new();
        let mut words = Vec::new();
        while words.len() < 240 {
            let n = rng.random_range(2..=3);
            let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
            if !reserved.contains(&w) && seen.insert(w.clone()) {
                words.push(w);
            }
        }
        let mut next_word = 0;
        let mut fresh = || {
            next_word += 1;
            words[next_word - 1].clone()
        };

        let mut terms: Vec<Vec<String>> = Vec::new();
        for _ in 0..Self::SINGLES {
            terms.push(vec![fresh()]);
        }
        for i in 0..Self::DOUBLES {
            // The first 30 doubles extend a single-word term.
            let head = if i < 30 {
                terms[i % Self::SINGLES][0].clone()
            } else {
                fresh()
            };
            terms.push(vec![head, fresh()]);
        }
        for i in 0..Self::TRIPLES {
            let mut t = terms[Self::SINGLES + i].clone();
            t.push(fresh());
            terms.push(t);
        }

        let mut headings = Vec::new();
        let mut synonyms = Vec::new();
        let mut german = Vec::new();
        let mut french = Vec::new();
        let mut entries = Vec::new();
        let mut english_forms: HashSet<String> = terms.iter().map(|t| t.join(" ")).collect();
        for (i, t) in terms.iter().enumerate() {
            let id = format!("D{:06}", 900_001 + i);
            let heading = t.iter().map(|w| capitalize(w)).collect::<Vec<_>>().join(" ");
            let synonym = if t.len() == 2 && i % 3 == 0 {
                let inv = format!("{} {}", t[1], t[0]);
                english_forms
                    .insert(inv.clone())
                    .then(|| inv.split(' ').map(capitalize).collect::<Vec<_>>().join(" "))
            } else {
                None
            };
            let de = t
                .iter()
                .map(|w| capitalize(&format!("{w}ung")))
                .collect::<Vec<_>>()
                .join(" ");
            let fr = t.iter().rev().map(|w| format!("{w}ique")).collect::<Vec<_>>().join(" ");
            let entry = |language, term: &str, main| MeshEntry {
                descriptor_id: id.clone(),
                language,
                term: term.to_string(),
                is_main_heading: main,
            };
            entries.push(entry(Language::En, &heading, true));
            if let Some(s) = &synonym {
                entries.push(entry(Language::En, s, false));
            }
            entries.push(entry(Language::De, &de, false));
            entries.push(entry(Language::Fr, &fr, false));
            headings.push(heading);
            synonyms.push(synonym);
            german.push(de);
            french.push(fr);
        }
        let thesaurus = Thesaurus::from_entries(entries).expect("generated thesaurus is consistent");
        Vocabulary {
            headings,
            synonyms,
            german,
            french,
            thesaurus,
        }
    }

    fn len(&self) -> usize {
        self.headings.len()
    }
}

#[derive(Debug, Clone)]
struct Person {
    /// Surname as printed on the patent.
    patent_last: String,
    /// Surname as printed in the journal (umlauts spelled out).
    journal_last: String,
    given: String,
    country: usize,
}

struct FamilySpec {
    inventors: Vec<Person>,
    inventor_countries: bool,
    filing: NaiveDate,
    ipc: Vec<&'static str>,
    topic: Vec<usize>,
    languages: Vec<Language>,
    citations: Vec<String>,
    academic: bool,
}

struct PubSpec {
    authors: Vec<Person>,
    date: NaiveDate,
    topic: Vec<usize>,
    reference_dois: Vec<String>,
    /// Unrelated DOIs appended to `reference_dois`.
    random_refs: usize,
}

struct Builder {
    rng: ChaCha8Rng,
    vocab: Vocabulary,
    given: Vec<String>,
    used_surnames: HashSet<String>,
    patents: Vec<PatentDocument>,
    pubs: Vec<PublicationRecord>,
    works: Vec<WorkRecord>,
    truth: Vec<TruthPair>,
    expectations: Expectations,
    family_dates: BTreeMap<String, NaiveDate>,
    next_family: u32,
    next_pub: u32,
    next_work: u32,
}

impl Builder {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = Vocabulary::build(&mut rng);
        let given = include_str!("../data/name_tokens.tsv")
            .lines()
            .filter_map(|l| l.strip_suffix("\tgiven"))
            .filter(|g| g.len() >= 3)
            .map(capitalize)
            .collect();
        Builder {
            rng,
            vocab,
            given,
            used_surnames: HashSet::new(),
            patents: Vec::new(),
            pubs: Vec::new(),
            works: Vec::new(),
            truth: Vec::new(),
            expectations: Expectations::default(),
            family_dates: BTreeMap::new(),
            next_family: 0,
            next_pub: 0,
            next_work: 0,
        }
    }

    fn finish(self) -> SynthCorpus {
        SynthCorpus {
            patents: self.patents,
            publications: self.pubs,
            thesaurus: self.vocab.thesaurus,
            works: self.works,
            truth: self.truth,
            expectations: self.expectations,
        }
    }

    // ---- people -------------------------------------------------------

    fn surname(&mut self) -> (String, String) {
        loop {
            let n = self.rng.random_range(2..=3);
            let parts: Vec<&str> = (0..n).map(|_| *NAME_SYLLABLES.choose(&mut self.rng).unwrap()).collect();
            let plain = parts.concat();
            let umlaut = self.rng.random_bool(0.15);
            let (patent, journal) = if umlaut {
                let head = parts[0];
                let tail = parts[1..].concat();
                (format!("{head}ü{tail}"), format!("{head}ue{tail}"))
            } else {
                (plain.clone(), plain)
            };
            if self.used_surnames.insert(journal.clone()) {
                return (capitalize(&patent), capitalize(&journal));
            }
        }
    }

    fn person(&mut self) -> Person {
        let (patent_last, journal_last) = self.surname();
        Person {
            patent_last,
            journal_last,
            given: self.given.choose(&mut self.rng).unwrap().clone(),
            country: self.rng.random_range(0..COUNTRIES.len()),
        }
    }

    fn people(&mut self, n: usize) -> Vec<Person> {
        (0..n).map(|_| self.person()).collect()
    }

    /// Same surname and first initial, different given name and country.
    fn namesake(&mut self, p: &Person) -> Person {
        let initial = p.given.chars().next().unwrap();
        let mut options: Vec<&String> = self
            .given
            .iter()
            .filter(|g| g.starts_with(initial) && **g != p.given)
            .collect();
        if options.is_empty() {
            options.push(&p.given);
        }
        Person {
            patent_last: p.patent_last.clone(),
            journal_last: p.journal_last.clone(),
            given: (*options.choose(&mut self.rng).unwrap()).clone(),
            country: (p.country + 1 + self.rng.random_range(0..COUNTRIES.len() - 1)) % COUNTRIES.len(),
        }
    }

    // ---- topics and text ----------------------------------------------

    fn topic(&mut self) -> Vec<usize> {
        let n = self.rng.random_range(8..=10);
        let mut t: Vec<usize> = (0..self.vocab.len())
            .collect::<Vec<_>>()
            .choose_multiple(&mut self.rng, n)
            .copied()
            .collect();
        t.sort_unstable();
        t
    }

    /// `topic` with one heading swapped for another.
    fn near_topic(&mut self, topic: &[usize]) -> Vec<usize> {
        let mut t = topic.to_vec();
        let drop = self.rng.random_range(0..t.len());
        t.remove(drop);
        loop {
            let extra = self.rng.random_range(0..self.vocab.len());
            if !topic.contains(&extra) {
                t.push(extra);
                break;
            }
        }
        t.sort_unstable();
        t
    }

    fn description(&mut self, language: Language, topic: &[usize]) -> String {
        let mut order = topic.to_vec();
        order.shuffle(&mut self.rng);
        let mut sentences = Vec::new();
        for d in order {
            let (templates, term): (&[&str], String) = match language {
                Language::En => {
                    let term = match &self.vocab.synonyms[d] {
                        Some(s) if self.rng.random_bool(0.5) => s.clone(),
                        _ => self.vocab.headings[d].clone(),
                    };
                    (&EN_SENTENCES, term.to_lowercase())
                }
                Language::De => (&DE_SENTENCES, self.vocab.german[d].clone()),
                Language::Fr => (&FR_SENTENCES, self.vocab.french[d].clone()),
            };
            let template = templates.choose(&mut self.rng).unwrap();
            sentences.push(template.replace("{}", &term));
        }
        sentences.join(" ")
    }

    fn headings(&self, topic: &[usize]) -> Vec<String> {
        topic.iter().map(|&d| self.vocab.headings[d].clone()).collect()
    }

    fn filing_date(&mut self) -> NaiveDate {
        let start = NaiveDate::from_ymd_opt(1998, 1, 1).unwrap();
        start + Days::new(self.rng.random_range(0..365 * 12))
    }

    fn after(&self, date: NaiveDate, years: f64) -> NaiveDate {
        date + Days::new((years * crate::pairing::DAYS_PER_YEAR).round() as u64)
    }

    // ---- documents ----------------------------------------------------

    fn add_family(&mut self, spec: FamilySpec) -> String {
        self.next_family += 1;
        let base = format!("EP{:07}", 1_000_000 + self.next_family * 37);
        let n_members = self.rng.random_range(1..=3);
        let texts: BTreeMap<Language, String> = spec
            .languages
            .iter()
            .map(|&l| (l, self.description(l, &spec.topic)))
            .collect();
        let inventor = |p: &Person, style: usize, academic: bool| {
            let name = match (style, academic) {
                (0, true) => format!("Prof. Dr. {} {}", p.given, p.patent_last),
                (0, false) => format!("{}, {}", p.patent_last, p.given),
                _ => format!("{} {}", p.given, p.patent_last.to_uppercase()),
            };
            Inventor {
                name,
                country: spec.inventor_countries.then(|| COUNTRIES[p.country].code.to_string()),
            }
        };
        let applicant = if spec.academic {
            "Universität Synthetica".to_string()
        } else {
            format!("{} Pharma AG", spec.inventors[0].patent_last)
        };
        let (first_refs, second_refs) = spec.citations.split_at(spec.citations.len() / 2);
        for (m, kind) in ["A1", "B1", "A2"].iter().enumerate().take(n_members) {
            let mut doc = PatentDocument {
                publication_number: format!("{base}{kind}"),
                filing_date: if m == 2 {
                    spec.filing + Days::new(90)
                } else {
                    spec.filing
                },
                inventors: spec
                    .inventors
                    .iter()
                    .enumerate()
                    .map(|(i, p)| inventor(p, m.min(1), spec.academic && i == 0))
                    .collect(),
                applicants: vec![applicant.clone()],
                ipc_codes: spec.ipc.iter().map(|c| format!("{c} 38/{:02}", 10 + m)).collect(),
                description_texts: BTreeMap::new(),
                reference_strings: Vec::new(),
            };
            match m {
                0 => {
                    doc.description_texts = texts.clone();
                    doc.reference_strings = first_refs.to_vec();
                }
                1 => {
                    if let Some(en) = texts.get(&Language::En) {
                        doc.description_texts.insert(Language::En, en.clone());
                    }
                    doc.reference_strings = second_refs.to_vec();
                }
                _ => {}
            }
            if n_members == 1 {
                doc.reference_strings = spec.citations.clone();
            }
            self.patents.push(doc);
        }
        self.family_dates.insert(base.clone(), spec.filing);
        base
    }

    fn add_publication(&mut self, mut spec: PubSpec) -> String {
        let extra = self.random_dois(spec.random_refs);
        spec.reference_dois.extend(extra);
        self.next_pub += 1;
        let pub_id = format!("{}", 20_000_000 + self.next_pub);
        let headings = self.headings(&spec.topic);
        let title = format!(
            "{} and {} in a synthetic cohort",
            headings[0],
            headings[1 % headings.len()].to_lowercase()
        );
        let only_first = self.rng.random_bool(0.3);
        let authors = spec
            .authors
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let c = &COUNTRIES[p.country];
                Author {
                    last: p.journal_last.clone(),
                    fore: p.given.clone(),
                    affiliation: (i == 0 || !only_first).then(|| {
                        format!(
                            "Department of Pharmacology, {} Institute, {}, {}",
                            p.journal_last, c.city, c.name
                        )
                    }),
                    email: None,
                }
            })
            .collect();
        self.pubs.push(PublicationRecord {
            pub_id: pub_id.clone(),
            title,
            publication_date: spec.date,
            authors,
            mesh_headings: headings,
            doi: Some(format!("10.7777/synth.pub.{}", self.next_pub)),
            reference_dois: spec.reference_dois,
        });
        pub_id
    }

    fn record(&mut self, family_id: &str, pub_id: &str, kind: PairKind, n_shared_names: usize) {
        let filing = self.family_dates[family_id];
        let date = self.pubs.iter().find(|p| p.pub_id == pub_id).unwrap().publication_date;
        self.truth.push(TruthPair {
            family_id: family_id.to_string(),
            pub_id: pub_id.to_string(),
            kind,
            n_shared_names,
            delta_years: crate::pairing::delta_years(filing, date),
        });
    }

    fn in_window(&mut self) -> f64 {
        self.rng.random_range(0.55..1.45)
    }

    fn out_of_window(&mut self) -> f64 {
        if self.rng.random_bool(0.5) {
            self.rng.random_range(0.05..0.42)
        } else {
            self.rng.random_range(1.58..1.9)
        }
    }

    fn medical_ipc(&mut self) -> Vec<&'static str> {
        // Cycled rather than drawn so both classes stay equally common in
        // every subset.
        match self.next_family % 3 {
            0 => vec![MEDICAL_IPC[0]],
            1 => vec![MEDICAL_IPC[1]],
            _ => MEDICAL_IPC.to_vec(),
        }
    }

    fn languages(&mut self, i: usize) -> Vec<Language> {
        match i % 6 {
            0 => vec![Language::De],
            1 => vec![Language::Fr],
            2 => vec![Language::En, Language::De],
            _ => vec![Language::En],
        }
    }

    fn family(&mut self, inventors: Vec<Person>, medical: bool, topic: Vec<usize>) -> FamilySpec {
        let i = self.next_family as usize;
        FamilySpec {
            inventors,
            inventor_countries: self.rng.random_bool(0.5),
            filing: self.filing_date(),
            ipc: if medical {
                self.medical_ipc()
            } else {
                vec![*OTHER_IPC.choose(&mut self.rng).unwrap()]
            },
            topic,
            languages: self.languages(i),
            citations: Vec::new(),
            academic: self.rng.random_bool(0.2),
        }
    }

    fn random_dois(&mut self, n: usize) -> Vec<String> {
        (0..n)
            .map(|_| format!("10.8888/other.{}", self.rng.random_range(0..1_000_000)))
            .collect()
    }

    /// Authors for a publication: `shared` first-listed, then `extra` fresh
    /// people, in shuffled order.
    fn author_list(&mut self, shared: Vec<Person>, extra: usize) -> Vec<Person> {
        let mut a = shared;
        a.extend(self.people(extra));
        a.shuffle(&mut self.rng);
        a
    }

    // ---- cited works ----------------------------------------------------

    fn work(&mut self, year: i32) -> WorkRecord {
        self.next_work += 1;
        let t = self.topic();
        let title = format!(
            "Effects of {} on {} in adult patients",
            self.vocab.headings[t[0]].to_lowercase(),
            self.vocab.headings[t[1]].to_lowercase()
        );
        let n = self.rng.random_range(1..=3);
        let authors = self.people(n).into_iter().map(|p| p.journal_last).collect();
        WorkRecord {
            doi: format!("10.5555/synth.{:05}", self.next_work),
            title: capitalize(&title),
            authors,
            year: Some(year),
            container_title: Some(JOURNALS.choose(&mut self.rng).unwrap().to_string()),
        }
    }

    /// A cited work plus look-alikes that the resolver must rank below it.
    fn cited_work(&mut self) -> WorkRecord {
        let year = self.rng.random_range(1988..2008);
        let w = self.work(year);
        self.next_work += 1;
        let follow_up = WorkRecord {
            doi: format!("10.5555/synth.{:05}", self.next_work),
            title: format!("{}: a follow-up study", w.title),
            ..w.clone()
        };
        self.next_work += 1;
        let other_year = WorkRecord {
            doi: format!("10.5555/synth.{:05}", self.next_work),
            year: Some(year - 3),
            ..w.clone()
        };
        self.works.push(w.clone());
        self.works.push(follow_up);
        self.works.push(other_year);
        w
    }

    fn citation(&mut self, w: &WorkRecord) -> String {
        let year = w.year.unwrap();
        let journal = w.container_title.clone().unwrap();
        let vol = self.rng.random_range(1..60);
        let page = self.rng.random_range(10..900);
        if self.rng.random_bool(0.5) {
            let authors: Vec<String> = w
                .authors
                .iter()
                .map(|a| format!("{a} {}", ["A", "BC", "J", "MK"].choose(&mut self.rng).unwrap()))
                .collect();
            format!(
                "{}. {}. {journal}. {year};{vol}:{page}-{}.",
                authors.join(", "),
                w.title,
                page + 9
            )
        } else {
            format!(
                "{}, {}., \"{}\", {journal}, vol. {vol}, {year}, pp. {page}-{}",
                w.authors[0],
                ["A", "J", "P"].choose(&mut self.rng).unwrap(),
                w.title,
                page + 9
            )
        }
    }

    fn doi_variant(&mut self, doi: &str) -> String {
        match self.rng.random_range(0..3) {
            0 => doi.to_string(),
            1 => format!("https://doi.org/{}", doi.to_uppercase()),
            _ => format!("doi:{doi}"),
        }
    }

    // ---- scenarios ------------------------------------------------------

    fn standard(&mut self) {
        let mut medical = Vec::new();

        // Name-linked pairs: 5 each at k = 3, 4, 5. From k = 4 on, every
        // inventor carries a country and the authors' affiliations agree.
        for i in 0..15 {
            let k = 3 + i / 5;
            let shared = self.people(k);
            let mut inventors = shared.clone();
            inventors.extend(self.people(i % 2));
            let topic = self.topic();
            let mut spec = self.family(inventors, true, topic);
            spec.inventor_countries = k >= 4 || spec.inventor_countries;
            let filing = spec.filing;
            let f = self.add_family(spec);
            let authors = self.author_list(shared, 1 + i % 3);
            let dy = self.in_window();
            let topic = self.topic();
            let p = self.add_publication(PubSpec {
                authors,
                date: self.after(filing, dy),
                topic,
                reference_dois: Vec::new(),
                random_refs: 4,
            });
            self.record(&f, &p, PairKind::Names, k);
            medical.push(f);
        }

        // Citation-linked pairs with a single shared name.
        let shared_refs = [1, 1, 2, 2, 3, 3, 4, 4, 4, 4];
        for r in shared_refs {
            let shared = self.people(1);
            let mut inventors = shared.clone();
            inventors.extend(self.people(2));
            let works: Vec<WorkRecord> = (0..r).map(|_| self.cited_work()).collect();
            let unshared = self.cited_work();
            let mut citations: Vec<String> = works.iter().chain([&unshared]).map(|w| self.citation(w)).collect();
            citations.push(format!("EP 0 {} A1", self.rng.random_range(100_000..999_999)));
            citations.push(format!("WO 99/{:05}", self.rng.random_range(0..99_999)));
            citations.shuffle(&mut self.rng);
            let topic = self.topic();
            let mut spec = self.family(inventors, true, topic);
            spec.citations = citations;
            let filing = spec.filing;
            let f = self.add_family(spec);
            let mut dois: Vec<String> = works.iter().map(|w| w.doi.clone()).collect::<Vec<_>>();
            dois = dois.iter().map(|d| self.doi_variant(d)).collect();
            dois.extend(self.random_dois(5));
            dois.shuffle(&mut self.rng);
            let authors = self.author_list(shared, 3);
            let dy = self.in_window();
            let topic = self.topic();
            let p = self.add_publication(PubSpec {
                authors,
                date: self.after(filing, dy),
                topic,
                reference_dois: dois,
                random_refs: 0,
            });
            self.record(&f, &p, PairKind::References, 1);
            medical.push(f);
        }

        // Subject-linked pairs: two shared names; five with identical
        // headings, ten differing in one heading. Descriptions rotate
        // through German, French and English.
        for i in 0..15 {
            let shared = self.people(2);
            let mut inventors = shared.clone();
            inventors.extend(self.people(1));
            let topic = self.topic();
            let mut spec = self.family(inventors, true, topic.clone());
            spec.languages = match i % 3 {
                0 => vec![Language::De],
                1 => vec![Language::Fr],
                _ => vec![Language::En],
            };
            let filing = spec.filing;
            let f = self.add_family(spec);
            let pub_topic = if i < 5 { topic } else { self.near_topic(&topic) };
            let authors = self.author_list(shared, 2);
            let dy = self.in_window();
            let p = self.add_publication(PubSpec {
                authors,
                date: self.after(filing, dy),
                topic: pub_topic,
                reference_dois: Vec::new(),
                random_refs: 3,
            });
            self.record(&f, &p, PairKind::Subject, 2);
            medical.push(f);
        }
        let planted: Vec<String> = medical.clone();

        // Remaining 30 medical families host distractors or nothing.
        let mut hosts = Vec::new();
        for _ in 0..30 {
            let n = self.rng.random_range(2..=4);
            let inventors = self.people(n);
            let topic = self.topic();
            let spec = self.family(inventors.clone(), true, topic.clone());
            let filing = spec.filing;
            let f = self.add_family(spec);
            hosts.push((f, inventors, topic, filing));
        }

        // Same-field namesakes: overlapping headings on a family that has
        // no true partner. Six share one name, two share two.
        for (i, host) in hosts.iter().take(8).enumerate() {
            let (f, inventors, topic, filing) = host.clone();
            let k = if i < 6 { 1 } else { 2 };
            let names: Vec<Person> = inventors.iter().take(k).map(|p| self.namesake(p)).collect();
            let authors = self.author_list(names, 2);
            let dy = self.in_window();
            let t = self.near_topic(&topic);
            let p = self.add_publication(PubSpec {
                authors,
                date: self.after(filing, dy),
                topic: t,
                reference_dois: Vec::new(),
                random_refs: 3,
            });
            self.record(&f, &p, PairKind::SameFieldHomonym, k);
        }

        // Namesakes out of the lag window, on non-planted medical families.
        for i in 0..12 {
            let (f, inventors, _, filing) = hosts[8 + i].clone();
            let name = self.namesake(&inventors[0]);
            let authors = self.author_list(vec![name], 2);
            let dy = self.out_of_window();
            let topic = self.topic();
            let p = self.add_publication(PubSpec {
                authors,
                date: self.after(filing, dy),
                topic,
                reference_dois: Vec::new(),
                random_refs: 3,
            });
            self.record(&f, &p, PairKind::OutOfWindowHomonym, 1);
        }

        // Namesakes with unrelated headings: ten on planted families, ten on
        // the remaining hosts.
        let mut targets: Vec<String> = planted.choose_multiple(&mut self.rng, 10).cloned().collect();
        targets.extend(hosts[20..30].iter().map(|h| h.0.clone()));
        for f in targets {
            let inventor = self
                .patents
                .iter()
                .find(|d| d.publication_number.starts_with(&f))
                .map(|d| d.inventors[0].name.clone())
                .unwrap();
            let person = self.person_from_inventor(&inventor);
            let name = self.namesake(&person);
            let authors = self.author_list(vec![name], 2);
            let filing = self.family_dates[&f];
            let dy = self.in_window();
            let topic = self.topic();
            let p = self.add_publication(PubSpec {
                authors,
                date: self.after(filing, dy),
                topic,
                reference_dois: Vec::new(),
                random_refs: 3,
            });
            self.record(&f, &p, PairKind::RandomTopicHomonym, 1);
        }

        // Thirty families outside the medical classes; twenty of them
        // collide with a namesake inside the window. Two carry no text.
        for i in 0..30 {
            let n = self.rng.random_range(2..=3);
            let inventors = self.people(n);
            let topic = self.topic();
            let mut spec = self.family(inventors.clone(), false, topic);
            if i >= 28 {
                spec.languages.clear();
            }
            let filing = spec.filing;
            let f = self.add_family(spec);
            if i < 20 {
                let name = self.namesake(&inventors[0]);
                let authors = self.author_list(vec![name], 2);
                let dy = self.in_window();
                let topic = self.topic();
                let p = self.add_publication(PubSpec {
                    authors,
                    date: self.after(filing, dy),
                    topic,
                    reference_dois: Vec::new(),
                    random_refs: 3,
                });
                self.record(&f, &p, PairKind::OtherClassHomonym, 1);
            }
        }
        self.expectations.other_class_candidates = 20;
        self.expectations.medical_classes = MEDICAL_IPC.iter().map(|s| s.to_string()).collect();

        self.background_publications(150);
        for _ in 0..40 {
            let year = self.rng.random_range(1988..2008);
            let w = self.work(year);
            self.works.push(w);
        }
    }

    fn person_from_inventor(&self, raw: &str) -> Person {
        let cleaned = raw.replace("Prof. Dr. ", "");
        let (given, last) = match cleaned.split_once(", ") {
            Some((last, given)) => (given.to_string(), last.to_string()),
            None => {
                let (g, l) = cleaned.rsplit_once(' ').unwrap();
                (g.to_string(), capitalize(&l.to_lowercase()))
            }
        };
        Person {
            journal_last: crate::names::transliterate(&last),
            patent_last: last,
            given,
            country: 0,
        }
    }

    fn background_publications(&mut self, n: usize) {
        for _ in 0..n {
            let k = self.rng.random_range(2..=5);
            let authors = self.people(k);
            let date = self.filing_date() + Days::new(200);
            let topic = self.topic();
            let dois = self.random_dois(4);
            self.add_publication(PubSpec {
                authors,
                date,
                topic,
                reference_dois: dois,
                random_refs: 0,
            });
        }
    }

    fn homonym(&mut self) {
        // The namesake family: one inventor shares surname and initial with
        // an author of fifty in-window publications. Five of those share
        // most headings with the family.
        let common = self.person();
        let mut inventors = vec![common.clone()];
        inventors.extend(self.people(2));
        let topic = self.topic();
        let mut spec = self.family(inventors, true, topic.clone());
        spec.ipc = vec![MEDICAL_IPC[0]];
        spec.languages = vec![Language::En];
        let filing = spec.filing;
        let h = self.add_family(spec);
        for i in 0..50 {
            let name = self.namesake(&common);
            let authors = self.author_list(vec![name], 2);
            let dy = self.in_window();
            let t = if i < 5 { self.near_topic(&topic) } else { self.topic() };
            let p = self.add_publication(PubSpec {
                authors,
                date: self.after(filing, dy),
                topic: t,
                reference_dois: Vec::new(),
                random_refs: 3,
            });
            let kind = if i < 5 {
                PairKind::SameFieldHomonym
            } else {
                PairKind::RandomTopicHomonym
            };
            self.record(&h, &p, kind, 1);
        }
        self.expectations.homonym_family = Some(h);
        self.expectations.homonym_links = 50;

        // The anchor: four shared names, all with agreeing countries.
        let shared = self.people(4);
        let topic = self.topic();
        let mut spec = self.family(shared.clone(), true, topic);
        spec.ipc = MEDICAL_IPC.to_vec();
        spec.inventor_countries = true;
        let filing = spec.filing;
        let a = self.add_family(spec);
        let authors = self.author_list(shared, 1);
        let dy = self.in_window();
        let topic = self.topic();
        let p = self.add_publication(PubSpec {
            authors,
            date: self.after(filing, dy),
            topic,
            reference_dois: Vec::new(),
            random_refs: 3,
        });
        self.record(&a, &p, PairKind::Anchor, 4);

        for _ in 0..10 {
            let n = self.rng.random_range(2..=3);
            let inventors = self.people(n);
            let topic = self.topic();
            let spec = self.family(inventors, false, topic);
            self.add_family(spec);
        }
        self.background_publications(40);
        self.expectations.medical_classes = MEDICAL_IPC.iter().map(|s| s.to_string()).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MultilingualIndex;

    #[test]
    fn deterministic() {
        let a = generate(Scenario::Standard, 9);
        let b = generate(Scenario::Standard, 9);
        assert_eq!(to_jsonl(&a.patents), to_jsonl(&b.patents));
        assert_eq!(to_jsonl(&a.publications), to_jsonl(&b.publications));
        assert_eq!(a.truth, b.truth);
        let c = generate(Scenario::Standard, 10);
        assert_ne!(to_jsonl(&a.patents), to_jsonl(&c.patents));
    }

    #[test]
    fn standard_counts() {
        let c = generate(Scenario::Standard, 1);
        let families: HashSet<String> = c
            .patents
            .iter()
            .map(|p| {
                crate::family::parse_publication_number(&p.publication_number)
                    .unwrap()
                    .base
            })
            .collect();
        assert_eq!(families.len(), 100);
        assert_eq!(c.publications.len(), 250);
        assert_eq!(c.true_pairs().count(), 40);
        assert_eq!(c.truth.len(), 100);
        for t in c.true_pairs() {
            assert!((0.55..=1.45).contains(&t.delta_years), "{t:?}");
        }
        for t in c.truth.iter().filter(|t| t.kind == PairKind::OutOfWindowHomonym) {
            assert!(!(0.5..=1.5).contains(&t.delta_years), "{t:?}");
        }
    }

    #[test]
    fn thesaurus_round_trips_and_text_is_recoverable() {
        let mut b = Builder::new(3);
        let topic = b.topic();
        let th = b.vocab.thesaurus.clone();
        assert_eq!(Thesaurus::parse_tsv(&th.to_tsv()).unwrap().entries(), th.entries());
        let index = MultilingualIndex::build(&th);
        for lang in Language::ALL {
            let text = b.description(lang, &topic);
            let got = crate::mesh::extract_terms("x", lang, &text, index.get(lang), &th).unwrap();
            assert_eq!(
                got.headings,
                {
                    let mut h = b.headings(&topic);
                    h.sort();
                    h
                },
                "{lang:?}: {text}"
            );
        }
    }

    #[test]
    fn write_to_produces_loadable_config() {
        let dir = tempfile::tempdir().unwrap();
        let c = generate(Scenario::Homonym, 2);
        let path = c.write_to(dir.path(), 2).unwrap();
        let config = Config::load(&path).unwrap();
        assert_eq!(config.seed, 2);
        assert!(config.input(&config.paths.works).exists());
        assert!(dir.path().join(files::TRUTH).exists());
    }
}
