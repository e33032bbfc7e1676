//! ISO 3166-1 alpha-2 country detection from e-mail domains and
//! affiliation text.

use std::collections::HashMap;
use std::sync::LazyLock;

use crate::names::transliterate;

const BUNDLED_COUNTRIES: &str = include_str!("../../data/countries.tsv");

struct CountryTable {
    by_tld: HashMap<String, String>,
    /// (needle, iso, case_sensitive), needles transliterated.
    names: Vec<(String, String, bool)>,
}

static TABLE: LazyLock<CountryTable> = LazyLock::new(|| {
    let mut by_tld = HashMap::new();
    let mut names = Vec::new();
    for line in BUNDLED_COUNTRIES.lines().skip(1) {
        let mut cols = line.split('\t');
        let (Some(iso), Some(tld), Some(list)) = (cols.next(), cols.next(), cols.next()) else {
            continue;
        };
        by_tld.insert(tld.to_string(), iso.to_string());
        for name in list.split('|') {
            let needle = transliterate(name);
            // Short all-caps forms such as "UK" or "USA" only match as written.
            let case_sensitive =
                needle.len() <= 6 && needle.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase);
            let needle = if case_sensitive { needle } else { needle.to_lowercase() };
            names.push((needle, iso.to_string(), case_sensitive));
        }
    }
    CountryTable { by_tld, names }
});

/// Country for a country-code top-level domain such as `de` or `uk`.
pub fn country_for_tld(tld: &str) -> Option<&'static str> {
    TABLE.by_tld.get(&tld.to_ascii_lowercase()).map(String::as_str)
}

fn country_from_email(email: &str) -> Option<String> {
    let domain = email.trim().rsplit_once('@')?.1;
    let tld = domain.trim_end_matches('.').rsplit('.').next()?;
    if tld.len() != 2 {
        return None;
    }
    country_for_tld(tld).map(str::to_string)
}

fn is_boundary(text: &str, idx: usize, before: bool) -> bool {
    let ch = if before {
        text[..idx].chars().next_back()
    } else {
        text[idx..].chars().next()
    };
    ch.is_none_or(|c| !c.is_alphanumeric())
}

/// The country mentioned last in an affiliation; countries conventionally
/// close the address.
pub fn country_from_affiliation(affiliation: &str) -> Option<String> {
    let text = transliterate(affiliation);
    let lower = text.to_lowercase();
    let mut best: Option<(usize, usize, &str)> = None;
    for (needle, iso, case_sensitive) in &TABLE.names {
        let haystack = if *case_sensitive { &text } else { &lower };
        for (start, _) in haystack.match_indices(needle.as_str()) {
            let end = start + needle.len();
            let needle_ends_alnum = needle.chars().last().is_some_and(char::is_alphanumeric);
            if !is_boundary(haystack, start, true) || (needle_ends_alnum && !is_boundary(haystack, end, false)) {
                continue;
            }
            let better = best.is_none_or(|(b_end, b_len, _)| end > b_end || (end == b_end && needle.len() > b_len));
            if better {
                best = Some((end, needle.len(), iso));
            }
        }
    }
    best.map(|(_, _, iso)| iso.to_string())
}

/// E-mail ccTLD first, then the affiliation text; generic domains such as
/// `.com` carry no country.
pub fn extract_country(affiliation: Option<&str>, email: Option<&str>) -> Option<String> {
    email
        .and_then(country_from_email)
        .or_else(|| affiliation.and_then(country_from_affiliation))
}

/// When only the first author has a country, every author gets it.
pub fn propagate_first_author_country(countries: Vec<Option<String>>) -> Vec<Option<String>> {
    let only_first = countries.first().is_some_and(Option::is_some) && countries.iter().skip(1).all(Option::is_none);
    if only_first {
        let first = countries[0].clone();
        vec![first; countries.len()]
    } else {
        countries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &str) -> Option<String> {
        Some(v.to_string())
    }

    #[test]
    fn email_tld() {
        assert_eq!(extract_country(None, Some("x@uni-koeln.de")), s("DE"));
        assert_eq!(extract_country(None, Some("x@ox.ac.uk")), s("GB"));
    }

    #[test]
    fn affiliation_lexicon() {
        assert_eq!(
            extract_country(Some("Karolinska Institutet, Stockholm, Sweden."), None),
            s("SE")
        );
        assert_eq!(extract_country(Some("Universität Wien, Österreich"), None), s("AT"));
        assert_eq!(
            extract_country(Some("Dept. of Medicine, Boston, MA, USA"), None),
            s("US")
        );
        assert_eq!(extract_country(Some("Hôpital Necker, Paris, France"), None), s("FR"));
    }

    #[test]
    fn no_signal() {
        assert_eq!(extract_country(Some("Dept. of Biology"), Some("x@gmail.com")), None);
        assert_eq!(extract_country(Some("Institute of Francesca studies"), None), None);
        assert_eq!(extract_country(Some("Clinic for the uk"), None), None);
    }

    #[test]
    fn email_takes_precedence() {
        assert_eq!(
            extract_country(Some("Karolinska Institutet, Sweden"), Some("a@b.de")),
            s("DE")
        );
        assert_eq!(
            extract_country(Some("Karolinska Institutet, Sweden"), Some("a@b.com")),
            s("SE")
        );
    }

    #[test]
    fn propagation() {
        assert_eq!(
            propagate_first_author_country(vec![s("DE"), None, None]),
            vec![s("DE"), s("DE"), s("DE")]
        );
        assert_eq!(
            propagate_first_author_country(vec![s("DE"), s("SE"), None]),
            vec![s("DE"), s("SE"), None]
        );
        assert_eq!(propagate_first_author_country(vec![None, None]), vec![None, None]);
        assert!(propagate_first_author_country(vec![]).is_empty());
    }
}
