//! Person-name normalization to the `last, initials` blocking key.
//!
//! Raw inventor strings carry titles, arbitrary ordering and diacritics;
//! publication authors come pre-split but with the same diacritics. Both are
//! reduced to the same canonical form here: titles removed, transliterated to
//! ASCII, split into given and surname tokens, then lowercased.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_TITLES: &str = include_str!("../data/titles.txt");
const BUNDLED_NAME_TOKENS: &str = include_str!("../data/name_tokens.tsv");

const PARTICLES: &[&str] = &[
    "van", "von", "de", "da", "la", "der", "den", "del", "della", "di", "du", "le", "ten", "ter", "zu", "vom", "zum",
    "dos", "das",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NameError {
    #[error("name {0:?} is empty after normalization")]
    Empty(String),
    #[error("name model line {line}: {message}")]
    Model { line: usize, message: String },
}

/// A person name in blocking-key form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizedName {
    pub last: String,
    pub initials: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_country: Option<String>,
}

impl NormalizedName {
    /// The blocking key, `last + ", " + initials`.
    pub fn canonical(&self) -> String {
        format!("{}, {}", self.last, self.initials)
    }
}

impl fmt::Display for NormalizedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.last, self.initials)
    }
}

fn title_key(token: &str) -> String {
    let lowered = token
        .trim_matches(|c: char| matches!(c, ',' | ';' | '(' | ')'))
        .to_lowercase()
        .replace('.', "-");
    let mut key = String::with_capacity(lowered.len());
    for c in lowered.chars() {
        if c == '-' && key.ends_with('-') {
            continue;
        }
        key.push(c);
    }
    key.trim_matches('-').to_string()
}

/// Academic and honorific titles, matched case-insensitively and
/// independent of dots (`Dr.`, `dr`, `Dipl.-Ing.`).
#[derive(Debug, Clone)]
pub struct TitleLexicon {
    titles: HashSet<String>,
}

impl TitleLexicon {
    /// One title per line; blank lines and `#` comments are skipped.
    pub fn from_lines(input: &str) -> Self {
        let titles = input
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(title_key)
            .collect();
        Self { titles }
    }

    pub fn bundled() -> Self {
        Self::from_lines(BUNDLED_TITLES)
    }

    pub fn len(&self) -> usize {
        self.titles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.titles.is_empty()
    }

    pub fn is_title(&self, token: &str) -> bool {
        let key = title_key(token);
        !key.is_empty() && self.titles.contains(&key)
    }

    pub fn strip(&self, raw: &str) -> String {
        let kept: Vec<&str> = raw.split_whitespace().filter(|t| !self.is_title(t)).collect();
        kept.join(" ")
            .trim_matches(|c: char| c == ',' || c.is_whitespace())
            .to_string()
    }
}

static TITLES: LazyLock<TitleLexicon> = LazyLock::new(TitleLexicon::bundled);
static MODEL: LazyLock<NameOrderModel> = LazyLock::new(NameOrderModel::bundled);

/// Removes academic titles using the bundled lexicon.
pub fn strip_titles(raw: &str) -> String {
    TITLES.strip(raw)
}

/// German umlauts expand to two letters; every other accented letter is
/// reduced to its base letter. The result is always ASCII.
pub fn transliterate(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            c if c.is_ascii() => out.push(c),
            'ä' => out.push_str("ae"),
            'ö' => out.push_str("oe"),
            'ü' => out.push_str("ue"),
            'Ä' => out.push_str("Ae"),
            'Ö' => out.push_str("Oe"),
            'Ü' => out.push_str("Ue"),
            'ß' => out.push_str("ss"),
            'ẞ' => out.push_str("SS"),
            other => {
                if let Some(s) = deunicode::deunicode_char(other) {
                    out.extend(s.chars().filter(char::is_ascii));
                }
            }
        }
    }
    out
}

/// Naive-Bayes token classifier deciding between given name and surname.
#[derive(Debug, Clone)]
pub struct NameOrderModel {
    given: HashMap<String, u32>,
    surname: HashMap<String, u32>,
    given_total: u32,
    surname_total: u32,
    vocabulary: usize,
    smoothing: f64,
}

impl NameOrderModel {
    /// Trains from `token<TAB>class` lines, class being `given` or `surname`.
    pub fn from_tsv(input: &str) -> Result<Self, NameError> {
        let mut given: HashMap<String, u32> = HashMap::new();
        let mut surname: HashMap<String, u32> = HashMap::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with("token\t")) {
                continue;
            }
            let Some((token, class)) = line.split_once('\t') else {
                return Err(NameError::Model {
                    line: idx + 1,
                    message: "expected token<TAB>class".into(),
                });
            };
            let token = transliterate(token.trim()).to_lowercase();
            match class.trim() {
                "given" => *given.entry(token).or_default() += 1,
                "surname" => *surname.entry(token).or_default() += 1,
                other => {
                    return Err(NameError::Model {
                        line: idx + 1,
                        message: format!("unknown class {other:?}"),
                    })
                }
            }
        }
        let vocabulary = given.keys().chain(surname.keys()).collect::<HashSet<_>>().len();
        Ok(Self {
            given_total: given.values().sum(),
            surname_total: surname.values().sum(),
            given,
            surname,
            vocabulary,
            smoothing: 1.0,
        })
    }

    pub fn bundled() -> Self {
        Self::from_tsv(BUNDLED_NAME_TOKENS).expect("bundled name model is valid")
    }

    /// Laplace smoothing constant; must be positive.
    pub fn with_smoothing(mut self, smoothing: f64) -> Self {
        assert!(smoothing > 0.0, "smoothing must be positive");
        self.smoothing = smoothing;
        self
    }

    /// Posterior probability that `token` is a given name. The surname
    /// posterior is the complement.
    pub fn p_given(&self, token: &str) -> f64 {
        let key = token.to_lowercase();
        let v = self.vocabulary as f64;
        let a = self.smoothing;
        let g_tot = self.given_total as f64;
        let s_tot = self.surname_total as f64;
        let total = g_tot + s_tot;
        if total == 0.0 {
            return 0.5;
        }
        let g = *self.given.get(&key).unwrap_or(&0) as f64;
        let s = *self.surname.get(&key).unwrap_or(&0) as f64;
        let joint_g = (g_tot / total) * (g + a) / (g_tot + a * v);
        let joint_s = (s_tot / total) * (s + a) / (s_tot + a * v);
        joint_g / (joint_g + joint_s)
    }

    /// Most probable contiguous split of `tokens` into given names and a
    /// surname, in either order. Ties go to "surname last". Returns a
    /// per-token surname mask.
    fn surname_mask(&self, tokens: &[&str]) -> Vec<bool> {
        let n = tokens.len();
        if n == 1 {
            return vec![true];
        }
        let log_g: Vec<f64> = tokens.iter().map(|t| self.p_given(t).ln()).collect();
        let log_s: Vec<f64> = tokens.iter().map(|t| (1.0 - self.p_given(t)).ln()).collect();
        let score = |given: std::ops::Range<usize>| -> f64 {
            (0..n)
                .map(|i| if given.contains(&i) { log_g[i] } else { log_s[i] })
                .sum()
        };
        // Candidates in tie-break preference order.
        let mut best: Option<(f64, bool, usize)> = None;
        let mut consider = |s: f64, given_first: bool, cut: usize| {
            if best.is_none_or(|(b, _, _)| s > b + 1e-12) {
                best = Some((s, given_first, cut));
            }
        };
        for cut in (1..n).rev() {
            consider(score(0..cut), true, cut);
        }
        for cut in 1..n {
            consider(score(cut..n), false, cut);
        }
        let (_, given_first, cut) = best.expect("at least one split");
        (0..n).map(|i| (i >= cut) == given_first).collect()
    }
}

/// Given names and surname tokens, each in original order.
pub type OrderedName = (Vec<String>, Vec<String>);

/// Splits a raw name string into tokens, with commas as their own tokens.
pub fn name_tokens(raw: &str) -> Vec<String> {
    raw.replace(',', " , ").split_whitespace().map(str::to_string).collect()
}

fn letters(token: &str) -> impl Iterator<Item = char> + '_ {
    token.chars().filter(|c| c.is_alphabetic())
}

/// `J`, `J.`, `J.A.` and `J.-P.` are initials.
fn is_initial(token: &str) -> bool {
    let n = letters(token).count();
    n >= 1
        && (n == 1 || token.contains('.'))
        && letters(token).all(char::is_uppercase)
        && token.split(['.', '-']).all(|p| p.chars().count() <= 1)
}

fn is_all_caps(token: &str) -> bool {
    letters(token).count() >= 2 && letters(token).all(char::is_uppercase)
}

fn is_particle(token: &str) -> bool {
    token.chars().all(|c| c.is_lowercase()) && PARTICLES.contains(&token)
}

/// Orders name tokens into (given, surname).
///
/// Rules fire first: a comma means `surname, given`; a lowercase particle
/// starts the surname; ALL-CAPS tokens are the surname; initials are given
/// names. Whatever the rules leave undecided goes to the Naive-Bayes model.
pub fn order_name(tokens: &[String], model: &NameOrderModel) -> Result<OrderedName, NameError> {
    let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let words: Vec<&str> = tokens.iter().map(String::as_str).filter(|t| *t != ",").collect();
    if words.is_empty() {
        return Err(NameError::Empty(tokens.join(" ")));
    }

    if let Some(pos) = tokens.iter().position(|t| t == ",") {
        let surname: Vec<&str> = tokens[..pos].iter().map(String::as_str).collect();
        let given: Vec<&str> = tokens[pos + 1..]
            .iter()
            .map(String::as_str)
            .filter(|t| *t != ",")
            .collect();
        if !surname.is_empty() && !given.is_empty() {
            return Ok((owned(&given), owned(&surname)));
        }
    }

    if words.len() == 1 {
        return Ok((Vec::new(), owned(&words)));
    }

    if let Some(pos) = (1..words.len() - 1).find(|&i| is_particle(words[i])) {
        return Ok((owned(&words[..pos]), owned(&words[pos..])));
    }

    let candidates: Vec<usize> = (0..words.len()).filter(|&i| !is_initial(words[i])).collect();
    let caps: Vec<usize> = candidates.iter().copied().filter(|&i| is_all_caps(words[i])).collect();
    if !caps.is_empty() && caps.len() < candidates.len() {
        let given: Vec<&str> = (0..words.len())
            .filter(|i| !caps.contains(i))
            .map(|i| words[i])
            .collect();
        let surname: Vec<&str> = caps.iter().map(|&i| words[i]).collect();
        return Ok((owned(&given), owned(&surname)));
    }

    if candidates.is_empty() {
        // Only initials: treat the last one as the surname.
        let (last, rest) = words.split_last().expect("nonempty");
        return Ok((owned(rest), vec![last.to_string()]));
    }
    let mut is_surname = vec![false; words.len()];
    if candidates.len() == 1 {
        is_surname[candidates[0]] = true;
    } else {
        let open: Vec<&str> = candidates.iter().map(|&i| words[i]).collect();
        for (&i, s) in candidates.iter().zip(model.surname_mask(&open)) {
            is_surname[i] = s;
        }
    }
    let pick = |want: bool| -> Vec<String> {
        (0..words.len())
            .filter(|&i| is_surname[i] == want)
            .map(|i| words[i].to_string())
            .collect()
    };
    Ok((pick(false), pick(true)))
}

fn clean_surname(tokens: &[String]) -> String {
    let joined = tokens.join(" ").to_lowercase();
    let filtered: String = joined
        .chars()
        .filter(|c| c.is_ascii_lowercase() || *c == '-' || *c == ' ')
        .collect();
    filtered
        .split_whitespace()
        .map(|t| t.trim_matches('-'))
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn initials_of(given: &[String]) -> String {
    given
        .iter()
        .flat_map(|t| t.split(['-', '.']))
        .filter_map(|part| part.chars().find(|c| c.is_ascii_alphabetic()))
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Title lexicon plus ordering model: everything needed to normalize names.
#[derive(Debug, Clone)]
pub struct NameNormalizer {
    titles: TitleLexicon,
    model: NameOrderModel,
}

impl Default for NameNormalizer {
    fn default() -> Self {
        Self::new(TITLES.clone(), MODEL.clone())
    }
}

impl NameNormalizer {
    pub fn new(titles: TitleLexicon, model: NameOrderModel) -> Self {
        Self { titles, model }
    }

    pub fn model(&self) -> &NameOrderModel {
        &self.model
    }

    pub fn titles(&self) -> &TitleLexicon {
        &self.titles
    }

    pub fn normalize(&self, raw: &str, country: Option<&str>) -> Result<NormalizedName, NameError> {
        let stripped = self.titles.strip(raw);
        let ascii = transliterate(&stripped);
        let tokens = name_tokens(&ascii);
        let (given, surname) = order_name(&tokens, &self.model).map_err(|_| NameError::Empty(raw.to_string()))?;
        self.assemble(raw, &given, &surname, country)
    }

    /// Normalizes an author whose surname and given names arrive in separate
    /// fields, as in bibliographic records.
    pub fn normalize_parts(&self, last: &str, fore: &str, country: Option<&str>) -> Result<NormalizedName, NameError> {
        let surname = name_tokens(&transliterate(&self.titles.strip(last)));
        let mut given = name_tokens(&transliterate(&self.titles.strip(fore)));
        given.retain(|t| t != ",");
        // PubMed `Initials` such as "JA" carry one initial per letter.
        if given.len() == 1 && is_all_caps(&given[0]) && given[0].len() <= 3 {
            given = given[0].chars().map(|c| c.to_string()).collect();
        }
        self.assemble(&format!("{last}, {fore}"), &given, &surname, country)
    }

    fn assemble(
        &self,
        raw: &str,
        given: &[String],
        surname: &[String],
        country: Option<&str>,
    ) -> Result<NormalizedName, NameError> {
        let last = clean_surname(surname);
        if last.is_empty() {
            return Err(NameError::Empty(raw.to_string()));
        }
        let mut initials = initials_of(given);
        if initials.is_empty() {
            initials = last[..1].to_string();
        }
        Ok(NormalizedName {
            last,
            initials,
            source_country: country.map(|c| c.trim().to_ascii_uppercase()),
        })
    }
}

/// Normalizes a raw name with the bundled lexicon and model.
pub fn normalize_name(raw: &str, country: Option<&str>) -> Result<NormalizedName, NameError> {
    NameNormalizer::default().normalize(raw, country)
}

/// Keeps the first occurrence of every canonical rendering, in order.
pub fn dedup_names(names: Vec<NormalizedName>) -> Vec<NormalizedName> {
    let mut seen = HashSet::new();
    names.into_iter().filter(|n| seen.insert(n.canonical())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        name_tokens(s)
    }

    fn order(s: &str) -> (Vec<String>, Vec<String>) {
        order_name(&toks(s), &NameOrderModel::bundled()).unwrap()
    }

    fn nn(last: &str, initials: &str) -> NormalizedName {
        NormalizedName {
            last: last.into(),
            initials: initials.into(),
            source_country: None,
        }
    }

    #[test]
    fn strips_titles() {
        assert_eq!(strip_titles("Prof. Dr. Klaus Lippert"), "Klaus Lippert");
        assert_eq!(strip_titles("Klaus Lippert"), "Klaus Lippert");
        assert_eq!(strip_titles("Mary Smith MBA PhD"), "Mary Smith");
        assert_eq!(strip_titles("Dipl.-Ing. Hans Weber"), "Hans Weber");
        assert_eq!(strip_titles("Smith, Mary, Ph.D."), "Smith, Mary");
        assert_eq!(strip_titles("dr prof"), "");
    }

    #[test]
    fn bundled_lexicon_size() {
        let n = TitleLexicon::bundled().len();
        assert!((40..=60).contains(&n), "{n}");
    }

    #[test]
    fn transliterates() {
        assert_eq!(transliterate("Jörg Müller"), "Joerg Mueller");
        assert_eq!(transliterate("René François"), "Rene Francois");
        assert_eq!(transliterate("Smith"), "Smith");
        assert_eq!(transliterate("Straße Øster Łódź"), "Strasse Oster Lodz");
    }

    #[test]
    fn comma_rule() {
        assert_eq!(order("Lippert, Klaus"), (vec!["Klaus".into()], vec!["Lippert".into()]));
    }

    #[test]
    fn caps_rule() {
        assert_eq!(order("Klaus LIPPERT"), (vec!["Klaus".into()], vec!["LIPPERT".into()]));
        assert_eq!(order("LIPPERT Klaus"), (vec!["Klaus".into()], vec!["LIPPERT".into()]));
    }

    #[test]
    fn particle_rule() {
        assert_eq!(
            order("Jan van Dongen"),
            (vec!["Jan".into()], vec!["van".into(), "Dongen".into()])
        );
    }

    #[test]
    fn bayes_orders_surname_first_names() {
        assert_eq!(order("Lippert Klaus"), (vec!["Klaus".into()], vec!["Lippert".into()]));
        assert_eq!(order("Mueller Hans Peter").1, vec!["Mueller".to_string()]);
    }

    #[test]
    fn unknown_tokens_tie_to_last_surname() {
        assert_eq!(order("Xqzt Wvrk"), (vec!["Xqzt".into()], vec!["Wvrk".into()]));
    }

    #[test]
    fn empty_tokens_error() {
        assert!(matches!(
            order_name(&[], &NameOrderModel::bundled()),
            Err(NameError::Empty(_))
        ));
    }

    #[test]
    fn posteriors_are_complementary() {
        let m = NameOrderModel::bundled();
        for t in ["klaus", "lippert", "frank", "zzz"] {
            let g = m.p_given(t);
            assert!(g > 0.0 && g < 1.0);
            assert!((g + (1.0 - g) - 1.0).abs() < 1e-15);
        }
        assert!(m.p_given("klaus") > 0.5);
        assert!(m.p_given("lippert") < 0.5);
    }

    #[test]
    fn normalizes_names() {
        assert_eq!(normalize_name("Klaus Lippert", None).unwrap(), nn("lippert", "k"));
        assert_eq!(
            normalize_name("Prof. Dr. Jörg A. Müller-Schmidt", None).unwrap(),
            nn("mueller-schmidt", "ja")
        );
        assert!(matches!(normalize_name("Dr.", None), Err(NameError::Empty(_))));
        assert_eq!(normalize_name("Hans Peter Weber", None).unwrap().initials, "hp");
        assert_eq!(normalize_name("Smith", None).unwrap(), nn("smith", "s"));
        assert_eq!(
            normalize_name("Jan van Dongen", Some("nl")).unwrap(),
            NormalizedName {
                last: "van dongen".into(),
                initials: "j".into(),
                source_country: Some("NL".into())
            }
        );
    }

    #[test]
    fn canonical_rendering_is_idempotent() {
        let n = normalize_name("Klaus Lippert", None).unwrap();
        assert_eq!(n.canonical(), "lippert, k");
        assert_eq!(normalize_name(&n.canonical(), None).unwrap(), n);
    }

    #[test]
    fn homonyms_collapse() {
        let a = normalize_name("Klaus Lippert", None).unwrap();
        let b = normalize_name("Karl Lippert", None).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(dedup_names(vec![a.clone(), b]), vec![a]);
    }

    #[test]
    fn parts_normalization_matches_free_text() {
        let norm = NameNormalizer::default();
        assert_eq!(
            norm.normalize_parts("Müller", "Jörg A.", None).unwrap(),
            nn("mueller", "ja")
        );
        assert_eq!(norm.normalize_parts("Smith", "JA", None).unwrap(), nn("smith", "ja"));
        assert_eq!(
            norm.normalize_parts("Lippert", "Klaus", None).unwrap(),
            normalize_name("Prof. Klaus LIPPERT", None).unwrap()
        );
    }

    #[test]
    fn dedup_keeps_order() {
        assert!(dedup_names(vec![]).is_empty());
        let five: Vec<_> = ["a", "b", "c", "d", "e"].iter().map(|l| nn(l, "x")).collect();
        assert_eq!(dedup_names(five.clone()), five);
    }

    proptest! {
        #[test]
        fn transliteration_is_ascii(s in "\\PC{0,40}") {
            prop_assert!(transliterate(&s).is_ascii());
        }

        #[test]
        fn dedup_is_unique_and_shrinks(names in prop::collection::vec(("[a-c]{1,2}", "[a-b]{1,2}"), 0..30)) {
            let input: Vec<_> = names.iter().map(|(l, i)| nn(l, i)).collect();
            let out = dedup_names(input.clone());
            prop_assert!(out.len() <= input.len());
            let keys: HashSet<_> = out.iter().map(NormalizedName::canonical).collect();
            prop_assert_eq!(keys.len(), out.len());
        }

        #[test]
        fn normalized_names_use_restricted_alphabet(s in "[A-Za-zäöüéÅ .,-]{1,30}") {
            if let Ok(n) = normalize_name(&s, None) {
                prop_assert!(!n.last.is_empty() && !n.initials.is_empty());
                prop_assert!(n.last.chars().all(|c| c.is_ascii_lowercase() || c == '-' || c == ' '));
                prop_assert!(n.initials.chars().all(|c| c.is_ascii_lowercase()));
            }
        }
    }
}
