//! Response-word preprocessing: case folding, compound extraction, plural
//! stripping and thesaurus substitution.
//!
//! Pipeline for [`normalize_word`]: trim, lowercase, compound lookup (extract
//! map, then drop set, then unknown multi-token phrases are dropped),
//! singularize, compound lookup again on the singular form, synonym map.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::ErrorCode;

const BUNDLED_RULES: &str = include_str!("../data/rules.tsv");

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("cannot normalize an empty word")]
    Empty,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rules line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("rule `{from}` -> `{to}` chains: `{to}` itself normalizes to `{next}`")]
    Chained { from: String, to: String, next: String },
    #[error("`{0}` is both dropped and mapped as a compound")]
    DropConflict(String),
}

impl ErrorCode for NormalizeError {
    fn code(&self) -> &'static str {
        match self {
            NormalizeError::Empty => "normalize.empty",
            NormalizeError::Io { .. } => "normalize.io",
            NormalizeError::Syntax { .. } => "normalize.syntax",
            NormalizeError::Chained { .. } => "normalize.chained_rule",
            NormalizeError::DropConflict(_) => "normalize.drop_conflict",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizationRules {
    synonyms: BTreeMap<String, String>,
    compounds: BTreeMap<String, String>,
    drops: BTreeSet<String>,
    singular_exceptions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordStatus {
    /// Only trimmed and case-folded.
    Kept,
    /// Rewritten by a compound, plural or synonym rule.
    Mapped,
    /// Phrase without a representative word.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedWord {
    pub raw: String,
    pub normalized: Option<String>,
    pub status: WordStatus,
}

impl NormalizationRules {
    pub fn new(
        synonyms: BTreeMap<String, String>,
        compounds: BTreeMap<String, String>,
        drops: BTreeSet<String>,
        singular_exceptions: BTreeMap<String, String>,
    ) -> Result<Self, NormalizeError> {
        let rules = Self {
            synonyms,
            compounds,
            drops,
            singular_exceptions,
        };
        rules.validate()?;
        Ok(rules)
    }

    /// No substitutions; only case folding and regular plural rules apply.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_RULES).expect("bundled rules are valid")
    }

    pub fn load(path: &Path) -> Result<Self, NormalizeError> {
        let text = fs::read_to_string(path).map_err(|source| NormalizeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// `kind<TAB>from<TAB>to` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, NormalizeError> {
        let mut synonyms = BTreeMap::new();
        let mut compounds = BTreeMap::new();
        let mut drops = BTreeSet::new();
        let mut exceptions = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let syntax = |message: String| NormalizeError::Syntax {
                line: line_no,
                message,
            };
            let from = fields
                .get(1)
                .map(|f| fold(f))
                .filter(|f| !f.is_empty())
                .ok_or_else(|| syntax("missing `from` field".into()))?;
            let to = || {
                match fields.as_slice() {
                    [_, _, to] if !to.trim().is_empty() => Ok(fold(to)),
                    _ => Err(syntax(format!("`{}` rule needs exactly one target", fields[0]))),
                }
            };
            match fields[0] {
                "synonym" => {
                    synonyms.insert(from, to()?);
                }
                "compound" => {
                    compounds.insert(from, to()?);
                }
                "singular_exception" => {
                    exceptions.insert(from, to()?);
                }
                "drop" => {
                    if fields.len() > 3 || fields.get(2).is_some_and(|t| !t.trim().is_empty()) {
                        return Err(syntax("drop rules take no target".into()));
                    }
                    drops.insert(from);
                }
                other => return Err(syntax(format!("unknown rule kind `{other}`"))),
            }
        }
        Self::new(synonyms, compounds, drops, exceptions)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.compounds {
            out += &format!("compound\t{k}\t{v}\n");
        }
        for k in &self.drops {
            out += &format!("drop\t{k}\n");
        }
        for (k, v) in &self.synonyms {
            out += &format!("synonym\t{k}\t{v}\n");
        }
        for (k, v) in &self.singular_exceptions {
            out += &format!("singular_exception\t{k}\t{v}\n");
        }
        out
    }

    fn validate(&self) -> Result<(), NormalizeError> {
        if let Some(d) = self.drops.iter().find(|d| self.compounds.contains_key(*d)) {
            return Err(NormalizeError::DropConflict(d.clone()));
        }
        let targets = self
            .synonyms
            .iter()
            .chain(&self.compounds)
            .chain(&self.singular_exceptions);
        for (from, to) in targets {
            let next = self.apply(to);
            if next.as_deref() != Some(to.as_str()) {
                return Err(NormalizeError::Chained {
                    from: from.clone(),
                    to: to.clone(),
                    next: next.unwrap_or_else(|| "<dropped>".into()),
                });
            }
        }
        Ok(())
    }

    /// Every rewrite target, for vocabulary consistency checks.
    pub fn targets(&self) -> BTreeSet<&str> {
        self.synonyms
            .values()
            .chain(self.compounds.values())
            .chain(self.singular_exceptions.values())
            .map(String::as_str)
            .collect()
    }

    /// Exceptions table first, then the regular plural rules.
    pub fn singularize(&self, word: &str) -> String {
        let mut current = word.to_string();
        loop {
            if let Some(s) = self.singular_exceptions.get(&current) {
                return s.clone();
            }
            match strip_plural(&current) {
                Some(next) => current = next,
                None => return current,
            }
        }
    }

    fn apply(&self, folded: &str) -> Option<String> {
        let stage = |w: &str| -> Option<Option<String>> {
            if let Some(t) = self.compounds.get(w) {
                Some(Some(t.clone()))
            } else if self.drops.contains(w) || is_multi_token(w) {
                Some(None)
            } else {
                None
            }
        };
        let word = match stage(folded) {
            Some(Some(t)) => t,
            Some(None) => return None,
            None => folded.to_string(),
        };
        let singular = self.singularize(&word);
        let word = match stage(&singular) {
            Some(Some(t)) => t,
            Some(None) => return None,
            None => singular,
        };
        Some(self.synonyms.get(&word).cloned().unwrap_or(word))
    }

    /// Light normalization for frequency tables: case folding and
    /// singularization, with multi-word phrases kept intact.
    pub fn frequency_key(&self, raw: &str) -> Option<String> {
        let folded = fold(raw);
        if folded.is_empty() {
            None
        } else if folded.contains(' ') {
            Some(folded)
        } else {
            Some(self.singularize(&folded))
        }
    }
}

fn fold(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn is_multi_token(w: &str) -> bool {
    w.contains([' ', '-', '_', '/'])
}

/// One regular plural-stripping step, or `None` when the word looks singular.
fn strip_plural(w: &str) -> Option<String> {
    let n = w.len();
    if n < 4 || !w.ends_with('s') || !w.is_char_boundary(n - 1) {
        return None;
    }
    if let Some(stem) = w.strip_suffix("ies") {
        if stem.chars().count() >= 2 {
            return Some(format!("{stem}y"));
        }
    }
    if w.ends_with("sses") {
        return Some(w[..n - 2].to_string());
    }
    if let Some(stem) = w.strip_suffix("es") {
        if stem.ends_with('x') || stem.ends_with("ch") || stem.ends_with("sh") {
            return Some(stem.to_string());
        }
    }
    if w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") {
        return None;
    }
    Some(w[..n - 1].to_string())
}

/// Regular plural rules only, without an exceptions table.
pub fn singularize(word: &str) -> String {
    NormalizationRules::empty().singularize(word)
}

pub fn normalize_word(raw: &str, rules: &NormalizationRules) -> Result<NormalizedWord, NormalizeError> {
    let folded = fold(raw);
    if folded.is_empty() {
        return Err(NormalizeError::Empty);
    }
    let normalized = rules.apply(&folded);
    let status = match &normalized {
        None => WordStatus::Dropped,
        Some(w) if *w == folded => WordStatus::Kept,
        Some(_) => WordStatus::Mapped,
    };
    Ok(NormalizedWord {
        raw: raw.to_string(),
        normalized,
        status,
    })
}

/// Normalized token of `raw`, or `None` for blank and dropped entries.
pub fn token(raw: &str, rules: &NormalizationRules) -> Option<String> {
    normalize_word(raw, rules).ok().and_then(|w| w.normalized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(raw: &str) -> Option<String> {
        normalize_word(raw, &NormalizationRules::bundled()).unwrap().normalized
    }

    #[test]
    fn documented_substitutions() {
        assert_eq!(norm("canfly").as_deref(), Some("fly"));
        assert_eq!(norm("car-like").as_deref(), Some("car"));
        assert_eq!(norm("gangly").as_deref(), Some("awkward"));
        assert_eq!(norm("artificial intelligence"), None);
        assert_eq!(norm("Wheels").as_deref(), Some("wheel"));
        assert_eq!(norm("  CHILDREN ").as_deref(), Some("child"));
        assert_eq!(norm("People").as_deref(), Some("person"));
    }

    #[test]
    fn statuses() {
        let r = NormalizationRules::bundled();
        assert_eq!(normalize_word("Cute", &r).unwrap().status, WordStatus::Kept);
        assert_eq!(normalize_word("dogs", &r).unwrap().status, WordStatus::Mapped);
        let dropped = normalize_word("self-driving", &r).unwrap();
        assert_eq!(dropped.status, WordStatus::Dropped);
        assert_eq!(dropped.normalized, None);
        assert_eq!(dropped.raw, "self-driving");
        assert!(matches!(normalize_word("   ", &r), Err(NormalizeError::Empty)));
    }

    #[test]
    fn plural_rules() {
        assert_eq!(singularize("dogs"), "dog");
        assert_eq!(singularize("babies"), "baby");
        assert_eq!(singularize("glass"), "glass");
        assert_eq!(singularize("glasses"), "glass");
        assert_eq!(singularize("boxes"), "box");
        assert_eq!(singularize("watches"), "watch");
        assert_eq!(singularize("ties"), "tie");
        assert_eq!(singularize("dangerous"), "dangerous");
        assert_eq!(singularize("bus"), "bus");
        assert_eq!(singularize("robots"), "robot");
        assert_eq!(singularize("wheels"), "wheel");
    }

    #[test]
    fn rules_file_errors() {
        assert!(matches!(
            NormalizationRules::parse("synonym\ta\tb\nsynonym\tb\tc\n"),
            Err(NormalizeError::Chained { .. })
        ));
        assert!(matches!(
            NormalizationRules::parse("compound\tx-y\tx\ndrop\tx-y\n"),
            Err(NormalizeError::DropConflict(_))
        ));
        assert!(matches!(
            NormalizationRules::parse("synonym\ta\n"),
            Err(NormalizeError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            NormalizationRules::parse("alias\ta\tb\n"),
            Err(NormalizeError::Syntax { .. })
        ));
        // plural target would itself be rewritten
        assert!(NormalizationRules::parse("synonym\tgangly\tcats\n").is_err());
    }

    #[test]
    fn bundled_rules_round_trip() {
        let r = NormalizationRules::bundled();
        assert_eq!(NormalizationRules::parse(&r.to_tsv()).unwrap(), r);
        assert!(r.targets().contains("awkward"));
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in "[A-Za-z -]{1,16}") {
            let rules = NormalizationRules::bundled();
            if let Ok(w) = normalize_word(&raw, &rules) {
                if let Some(n) = w.normalized {
                    prop_assert_eq!(n.trim(), n.as_str());
                    prop_assert!(!n.chars().any(char::is_uppercase));
                    let again = normalize_word(&n, &rules).unwrap();
                    prop_assert_eq!(again.normalized.as_deref(), Some(n.as_str()));
                }
            }
        }

        #[test]
        fn singularize_is_idempotent(w in "[a-z]{1,12}") {
            let once = singularize(&w);
            prop_assert_eq!(singularize(&once), once);
        }
    }
}
