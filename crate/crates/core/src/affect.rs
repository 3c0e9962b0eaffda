//! Valence/arousal/dominance lexicon and affect aggregation at participant,
//! participant-by-robot and robot level.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::StudyDataset;
use crate::normalize::{token, NormalizationRules};
use crate::ErrorCode;

#[derive(Debug, Error)]
pub enum AffectError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected 4 tab-separated fields, found {found}")]
    Arity { line: usize, found: usize },
    #[error("line {line}: `{token}` is not a number")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: value {value} for `{word}` is outside [0, 1]")]
    OutOfRange { line: usize, word: String, value: f64 },
    #[error("line {line}: duplicate word `{word}`")]
    Duplicate { line: usize, word: String },
    #[error("no words given")]
    EmptyInput,
    #[error("none of the {0} words is in the lexicon")]
    NoneCovered(usize),
    #[error("dataset has no word responses")]
    EmptyDataset,
    #[error("unknown grain `{0}` (expected participant, participant_robot or robot)")]
    UnknownGrain(String),
}

impl ErrorCode for AffectError {
    fn code(&self) -> &'static str {
        match self {
            AffectError::Io { .. } => "affect.io",
            AffectError::Arity { .. } => "affect.arity",
            AffectError::NonNumeric { .. } => "affect.non_numeric",
            AffectError::OutOfRange { .. } => "affect.out_of_range",
            AffectError::Duplicate { .. } => "affect.duplicate",
            AffectError::EmptyInput => "affect.empty_input",
            AffectError::NoneCovered(_) => "affect.none_covered",
            AffectError::EmptyDataset => "affect.empty_dataset",
            AffectError::UnknownGrain(_) => "affect.unknown_grain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimension {
    Valence,
    Arousal,
    Dominance,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Valence, Dimension::Arousal, Dimension::Dominance];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Valence => "valence",
            Dimension::Arousal => "arousal",
            Dimension::Dominance => "dominance",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AffectScore {
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
}

impl AffectScore {
    pub fn new(valence: f64, arousal: f64, dominance: f64) -> Self {
        Self {
            valence,
            arousal,
            dominance,
        }
    }

    pub fn get(&self, d: Dimension) -> f64 {
        match d {
            Dimension::Valence => self.valence,
            Dimension::Arousal => self.arousal,
            Dimension::Dominance => self.dominance,
        }
    }

    pub fn sub(&self, other: &AffectScore) -> AffectScore {
        AffectScore::new(
            self.valence - other.valence,
            self.arousal - other.arousal,
            self.dominance - other.dominance,
        )
    }

    pub fn in_unit_cube(&self) -> bool {
        Dimension::ALL.iter().all(|&d| (0.0..=1.0).contains(&self.get(d)))
    }
}

/// Componentwise arithmetic mean, summed in iteration order.
pub fn mean_score<'a>(scores: impl IntoIterator<Item = &'a AffectScore>) -> Option<(AffectScore, usize)> {
    let mut sum = AffectScore::default();
    let mut n = 0usize;
    for s in scores {
        sum.valence += s.valence;
        sum.arousal += s.arousal;
        sum.dominance += s.dominance;
        n += 1;
    }
    (n > 0).then(|| {
        let k = n as f64;
        (AffectScore::new(sum.valence / k, sum.arousal / k, sum.dominance / k), n)
    })
}

/// Word to (valence, arousal, dominance), all in [0, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffectLexicon {
    entries: BTreeMap<String, AffectScore>,
}

impl AffectLexicon {
    pub fn from_entries(entries: BTreeMap<String, AffectScore>) -> Result<Self, AffectError> {
        for (word, s) in &entries {
            if let Some(&d) = Dimension::ALL.iter().find(|&&d| !(0.0..=1.0).contains(&s.get(d))) {
                return Err(AffectError::OutOfRange {
                    line: 0,
                    word: word.clone(),
                    value: s.get(d),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, word: &str) -> Option<&AffectScore> {
        self.entries.get(word)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in word order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &AffectScore)> {
        self.entries.iter().map(|(w, s)| (w.as_str(), s))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("word\tvalence\tarousal\tdominance\n");
        for (w, s) in &self.entries {
            out += &format!("{w}\t{}\t{}\t{}\n", s.valence, s.arousal, s.dominance);
        }
        out
    }
}

pub fn load_vad(path: &Path) -> Result<AffectLexicon, AffectError> {
    let text = fs::read_to_string(path).map_err(|source| AffectError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_vad(&text)
}

/// `word<TAB>valence<TAB>arousal<TAB>dominance` per line. A first line whose
/// second field is not numeric is taken as a header.
pub fn parse_vad(text: &str) -> Result<AffectLexicon, AffectError> {
    let mut entries = BTreeMap::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if std::mem::take(&mut first) && fields.get(1).is_some_and(|f| f.trim().parse::<f64>().is_err()) {
            continue;
        }
        if fields.len() != 4 {
            return Err(AffectError::Arity {
                line: line_no,
                found: fields.len(),
            });
        }
        let word = fields[0].trim().to_lowercase();
        let mut values = [0.0; 3];
        for (slot, token) in values.iter_mut().zip(&fields[1..]) {
            let v: f64 = token.trim().parse().map_err(|_| AffectError::NonNumeric {
                line: line_no,
                token: token.to_string(),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(AffectError::OutOfRange {
                    line: line_no,
                    word: word.clone(),
                    value: v,
                });
            }
            *slot = v;
        }
        if entries.contains_key(&word) {
            return Err(AffectError::Duplicate { line: line_no, word });
        }
        entries.insert(word, AffectScore::new(values[0], values[1], values[2]));
    }
    if entries.is_empty() {
        log::warn!("affect lexicon is empty");
    }
    Ok(AffectLexicon { entries })
}

/// Share of raw response tokens whose normalized form is in the lexicon.
/// Dropped phrases count as uncovered.
pub fn coverage(
    dataset: &StudyDataset,
    rules: &NormalizationRules,
    lexicon: &AffectLexicon,
) -> Result<f64, AffectError> {
    let total = dataset.word_count();
    if total == 0 {
        return Err(AffectError::EmptyDataset);
    }
    let covered = dataset
        .associations()
        .iter()
        .flat_map(|a| a.words())
        .filter(|w| token(w, rules).is_some_and(|t| lexicon.contains(&t)))
        .count();
    Ok(covered as f64 / total as f64)
}

/// Mean affect over the covered words (duplicates count each time).
pub fn mean_affect<S: AsRef<str>>(
    words: &[S],
    lexicon: &AffectLexicon,
) -> Result<(AffectScore, usize), AffectError> {
    if words.is_empty() {
        return Err(AffectError::EmptyInput);
    }
    mean_score(words.iter().filter_map(|w| lexicon.get(w.as_ref()))).ok_or(AffectError::NoneCovered(words.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Grain {
    Participant,
    ParticipantRobot,
    Robot,
}

impl Grain {
    pub fn as_str(self) -> &'static str {
        match self {
            Grain::Participant => "participant",
            Grain::ParticipantRobot => "participant_robot",
            Grain::Robot => "robot",
        }
    }
}

impl fmt::Display for Grain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Grain {
    type Err = AffectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "participant" => Ok(Grain::Participant),
            "participant_robot" | "participant-robot" => Ok(Grain::ParticipantRobot),
            "robot" => Ok(Grain::Robot),
            other => Err(AffectError::UnknownGrain(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AffectKey {
    pub participant: Option<String>,
    pub robot: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffectRow {
    pub key: AffectKey,
    pub score: AffectScore,
    /// Words found in the lexicon.
    pub found: usize,
    /// Raw word entries pooled under this key.
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffectTable {
    pub grain: Grain,
    /// Sorted by key.
    pub rows: Vec<AffectRow>,
    /// Keys without a single covered word.
    pub omitted: Vec<AffectKey>,
}

impl AffectTable {
    pub fn get(&self, participant: Option<&str>, robot: Option<&str>) -> Option<&AffectRow> {
        self.rows
            .iter()
            .find(|r| r.key.participant.as_deref() == participant && r.key.robot.as_deref() == robot)
    }
}

pub fn affect_table(
    dataset: &StudyDataset,
    rules: &NormalizationRules,
    lexicon: &AffectLexicon,
    grain: Grain,
) -> AffectTable {
    let mut pooled: BTreeMap<AffectKey, (Vec<AffectScore>, usize)> = BTreeMap::new();
    for a in dataset.associations() {
        let key = match grain {
            Grain::Participant => AffectKey {
                participant: Some(a.participant_id().to_string()),
                robot: None,
            },
            Grain::ParticipantRobot => AffectKey {
                participant: Some(a.participant_id().to_string()),
                robot: Some(a.robot_id().to_string()),
            },
            Grain::Robot => AffectKey {
                participant: None,
                robot: Some(a.robot_id().to_string()),
            },
        };
        let entry = pooled.entry(key).or_default();
        entry.1 += a.words().len();
        entry
            .0
            .extend(a.words().iter().filter_map(|w| token(w, rules)).filter_map(|t| lexicon.get(&t).copied()));
    }
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for (key, (scores, total)) in pooled {
        match mean_score(&scores) {
            Some((score, found)) => rows.push(AffectRow {
                key,
                score,
                found,
                total,
            }),
            None => omitted.push(key),
        }
    }
    if !omitted.is_empty() {
        log::info!("{} {grain} keys have no covered words", omitted.len());
    }
    AffectTable { grain, rows, omitted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AssociationRecord, RobotManifest};

    fn lex() -> AffectLexicon {
        parse_vad("word\tvalence\tarousal\tdominance\nhappy\t0.9\t0.6\t0.7\nsad\t0.1\t0.3\t0.2\ndog\t0.2\t0.5\t0.4\ncat\t0.4\t0.5\t0.6\n").unwrap()
    }

    #[test]
    fn parses_rows_and_header() {
        let l = lex();
        assert_eq!(l.len(), 4);
        assert_eq!(l.get("happy"), Some(&AffectScore::new(0.9, 0.6, 0.7)));
        let headerless = parse_vad("happy\t0.9\t0.6\t0.7\n").unwrap();
        assert_eq!(headerless.len(), 1);
        assert_eq!(parse_vad(&l.to_tsv()).unwrap(), l);
    }

    #[test]
    fn lexicon_errors() {
        assert!(matches!(parse_vad("x\t1.5\t0\t0\n"), Err(AffectError::OutOfRange { line: 1, .. })));
        assert!(matches!(parse_vad("x\t0.5\t0\n"), Err(AffectError::Arity { line: 1, found: 3 })));
        assert!(matches!(parse_vad("x\t0.5\t0\t0\nx\t0.1\t0\t0\n"), Err(AffectError::Duplicate { line: 2, .. })));
        assert!(matches!(parse_vad("x\t0.5\t0\t0\ny\t0.5\tq\t0\n"), Err(AffectError::NonNumeric { line: 2, .. })));
        assert!(parse_vad("").unwrap().is_empty());
    }

    #[test]
    fn mean_affect_examples() {
        let l = lex();
        let (s, n) = mean_affect(&["dog", "cat"], &l).unwrap();
        assert_eq!(n, 2);
        assert!((s.valence - 0.3).abs() < 1e-15);
        assert_eq!(mean_affect(&["happy", "zzz"], &l).unwrap(), (AffectScore::new(0.9, 0.6, 0.7), 1));
        assert!(matches!(mean_affect(&["zzz"], &l), Err(AffectError::NoneCovered(1))));
        assert!(matches!(mean_affect::<&str>(&[], &l), Err(AffectError::EmptyInput)));
    }

    fn dataset(rows: &[(&str, &str, [&str; 6])]) -> StudyDataset {
        let assoc = rows
            .iter()
            .map(|(p, r, w)| AssociationRecord::new(*p, *r, w.map(String::from).to_vec()).unwrap())
            .collect();
        StudyDataset::new(RobotManifest::bundled(), vec![], assoc, 2).unwrap()
    }

    #[test]
    fn coverage_counts_raw_tokens() {
        let l = lex();
        let r = NormalizationRules::bundled();
        let ds = dataset(&[("p1", "nao", ["Happy", "dogs", "cats", "sad", "zzz", "artificial intelligence"])]);
        assert!((coverage(&ds, &r, &l).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        let all = dataset(&[("p1", "nao", ["happy", "sad", "dog", "cat", "dog", "cat"])]);
        assert_eq!(coverage(&all, &r, &l).unwrap(), 1.0);
        let empty = StudyDataset::new(RobotManifest::bundled(), vec![], vec![], 1).unwrap();
        assert!(matches!(coverage(&empty, &r, &l), Err(AffectError::EmptyDataset)));
    }

    #[test]
    fn grains_pool_as_documented() {
        let l = lex();
        let r = NormalizationRules::bundled();
        let ds = dataset(&[
            ("p1", "nao", ["happy", "happy", "sad", "dog", "cat", "zzz"]),
            ("p1", "aibo", ["zzz", "yyy", "xxx", "www", "vvv", "uuu"]),
            ("p2", "nao", ["sad", "sad", "sad", "sad", "sad", "sad"]),
        ]);
        let pr = affect_table(&ds, &r, &l, Grain::ParticipantRobot);
        assert_eq!(pr.rows.len(), 2);
        assert_eq!(pr.omitted.len(), 1);
        assert_eq!(pr.get(Some("p1"), Some("nao")).unwrap().found, 5);
        let p = affect_table(&ds, &r, &l, Grain::Participant);
        let p1 = p.get(Some("p1"), None).unwrap();
        assert_eq!((p1.found, p1.total), (5, 12));
        let robot = affect_table(&ds, &r, &l, Grain::Robot);
        let nao = robot.get(None, Some("nao")).unwrap();
        assert_eq!(nao.found, 11);
        let expected = (0.9 * 2.0 + 0.1 * 7.0 + 0.2 + 0.4) / 11.0;
        assert!((nao.score.valence - expected).abs() < 1e-12);
        assert!(robot.get(None, Some("aibo")).is_none());
    }

    #[test]
    fn grain_names() {
        assert_eq!("participant-robot".parse::<Grain>().unwrap(), Grain::ParticipantRobot);
        assert!("item".parse::<Grain>().is_err());
    }
}
