//! Study data model: robot manifest, questionnaire scoring, association
//! records, event-log ingestion and balanced robot assignment.

mod assignment;
pub mod events;
mod frequency;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::ErrorCode;

pub use assignment::{generate_assignment, Assignment};
pub use events::{load_dataset, load_dataset_from_reader, write_event_log};
pub use frequency::word_frequency;

/// Number of Likert statements in the attitude questionnaire.
pub const ATTITUDE_ITEMS: usize = 12;
/// Highest item value; responses are scored 0 ("Strongly disagree") to 4 ("Strongly agree").
pub const MAX_ITEM_SCORE: u8 = 4;
/// Words typed per robot image.
pub const WORDS_PER_ROBOT: usize = 6;
/// Robot images shown to each participant.
pub const ROBOTS_PER_PARTICIPANT: usize = 10;

pub const QUESTIONNAIRE_INSTRUCTION: &str =
    "Please select the option that best describes your attitude at the moment:";
pub const QUESTIONNAIRE_STEM: &str = "I want a robot to assist me";

/// Statement completions, in presentation order.
pub const QUESTIONNAIRE_SETTINGS: [&str; ATTITUDE_ITEMS] = [
    "at home",
    "at school",
    "in dangerous locations",
    "in factories",
    "in hospitals",
    "in hotels",
    "in museums",
    "in offices",
    "in police stations",
    "in public transportations",
    "in shopping centers",
    "in sports facilities",
];

/// Response options; the index is the item score.
pub const LIKERT_OPTIONS: [&str; 5] = [
    "Strongly disagree",
    "Disagree",
    "Neither agree or disagree",
    "Agree",
    "Strongly agree",
];

const BUNDLED_MANIFEST: &str = include_str!("../../data/robots.tsv");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: unknown robot id `{robot}`")]
    UnknownRobot { line: usize, robot: String },
    #[error("line {line}: duplicate association for participant `{participant}` and robot `{robot}`")]
    DuplicateAssociation {
        line: usize,
        participant: String,
        robot: String,
    },
    #[error("line {line}: participant `{participant}` submitted a second attitude record")]
    DuplicateAttitude { line: usize, participant: String },
    #[error("line {line}: attitude record of participant `{participant}` has {found} items, expected {ATTITUDE_ITEMS}")]
    AttitudeItemCount {
        line: usize,
        participant: String,
        found: usize,
    },
    #[error("line {line}: association of participant `{participant}` has {found} words, expected {WORDS_PER_ROBOT}")]
    WordCount {
        line: usize,
        participant: String,
        found: usize,
    },
    #[error("line {line}: association of participant `{participant}` has a blank word at position {position}")]
    BlankWord {
        line: usize,
        participant: String,
        position: usize,
    },
    #[error("attitude needs exactly {ATTITUDE_ITEMS} items, got {0}")]
    ItemCount(usize),
    #[error("attitude item {index} has value {value}, expected 0..={MAX_ITEM_SCORE}")]
    ItemOutOfRange { index: usize, value: i64 },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("per-participant count {per_participant} exceeds the {n_robots} available robots")]
    TooManyPerParticipant {
        per_participant: usize,
        n_robots: usize,
    },
    #[error("could not produce a duplicate-free balanced assignment after {0} attempts")]
    AssignmentExhausted(usize),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

impl ErrorCode for CorpusError {
    fn code(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "corpus.io",
            CorpusError::MalformedLine { .. } => "corpus.malformed_line",
            CorpusError::UnknownRobot { .. } => "corpus.unknown_robot",
            CorpusError::DuplicateAssociation { .. } => "corpus.duplicate_association",
            CorpusError::DuplicateAttitude { .. } => "corpus.duplicate_attitude",
            CorpusError::AttitudeItemCount { .. } | CorpusError::ItemCount(_) => {
                "corpus.attitude_item_count"
            }
            CorpusError::WordCount { .. } => "corpus.word_count",
            CorpusError::BlankWord { .. } => "corpus.blank_word",
            CorpusError::ItemOutOfRange { .. } => "corpus.item_out_of_range",
            CorpusError::Manifest { .. } => "corpus.manifest",
            CorpusError::TooManyPerParticipant { .. } => "corpus.too_many_per_participant",
            CorpusError::AssignmentExhausted(_) => "corpus.assignment_exhausted",
            CorpusError::Invalid(_) => "corpus.invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotEntry {
    pub robot_id: String,
    pub display_name: String,
    /// Relative to the manifest file's directory.
    pub image_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotManifest {
    entries: Vec<RobotEntry>,
}

impl RobotManifest {
    pub fn new(entries: Vec<RobotEntry>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.robot_id.is_empty() {
                return Err(CorpusError::Manifest {
                    line: i + 1,
                    message: "empty robot id".into(),
                });
            }
            if e.robot_id != e.robot_id.to_lowercase() || e.robot_id.contains(char::is_whitespace) {
                return Err(CorpusError::Manifest {
                    line: i + 1,
                    message: format!("robot id `{}` is not a lowercase slug", e.robot_id),
                });
            }
            if !seen.insert(e.robot_id.as_str()) {
                return Err(CorpusError::Manifest {
                    line: i + 1,
                    message: format!("duplicate robot id `{}`", e.robot_id),
                });
            }
        }
        Ok(Self { entries })
    }

    /// The 30 robots of the original study.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_MANIFEST).expect("bundled manifest is valid")
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// `robot_id<TAB>display_name<TAB>image_path` per line.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(CorpusError::Manifest {
                    line: i + 1,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            entries.push(RobotEntry {
                robot_id: fields[0].to_string(),
                display_name: fields[1].to_string(),
                image_path: fields[2].to_string(),
            });
        }
        Self::new(entries)
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.robot_id, e.display_name, e.image_path))
            .collect()
    }

    pub fn entries(&self) -> &[RobotEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, robot_id: &str) -> Option<&RobotEntry> {
        self.entries.iter().find(|e| e.robot_id == robot_id)
    }

    pub fn contains(&self, robot_id: &str) -> bool {
        self.get(robot_id).is_some()
    }

    pub fn robot_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.robot_id.as_str())
    }

    pub fn display_name<'a>(&'a self, robot_id: &'a str) -> &'a str {
        self.get(robot_id).map_or(robot_id, |e| e.display_name.as_str())
    }
}

/// Mean of the twelve 0..=4 questionnaire items.
pub fn score_attitude(item_scores: &[i64]) -> Result<f64, CorpusError> {
    validate_items(item_scores)?;
    let total: i64 = item_scores.iter().sum();
    Ok(total as f64 / ATTITUDE_ITEMS as f64)
}

fn validate_items(item_scores: &[i64]) -> Result<[u8; ATTITUDE_ITEMS], CorpusError> {
    if item_scores.len() != ATTITUDE_ITEMS {
        return Err(CorpusError::ItemCount(item_scores.len()));
    }
    let mut items = [0u8; ATTITUDE_ITEMS];
    for (index, (&value, slot)) in item_scores.iter().zip(items.iter_mut()).enumerate() {
        if !(0..=MAX_ITEM_SCORE as i64).contains(&value) {
            return Err(CorpusError::ItemOutOfRange { index, value });
        }
        *slot = value as u8;
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttitudeRecord {
    participant_id: String,
    item_scores: [u8; ATTITUDE_ITEMS],
}

impl AttitudeRecord {
    pub fn new(participant_id: impl Into<String>, item_scores: &[i64]) -> Result<Self, CorpusError> {
        Ok(Self {
            participant_id: participant_id.into(),
            item_scores: validate_items(item_scores)?,
        })
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn item_scores(&self) -> &[u8; ATTITUDE_ITEMS] {
        &self.item_scores
    }

    pub fn mean_score(&self) -> f64 {
        let total: u32 = self.item_scores.iter().map(|&v| v as u32).sum();
        total as f64 / ATTITUDE_ITEMS as f64
    }
}

/// Six words one participant typed for one robot, in text-box order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationRecord {
    participant_id: String,
    robot_id: String,
    words: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordsProblem {
    Count(usize),
    Blank(usize),
}

/// Checks the six-mandatory-words rule; blank positions are 1-based.
pub fn check_words<S: AsRef<str>>(words: &[S]) -> Result<(), WordsProblem> {
    if words.len() != WORDS_PER_ROBOT {
        return Err(WordsProblem::Count(words.len()));
    }
    match words.iter().position(|w| w.as_ref().trim().is_empty()) {
        Some(i) => Err(WordsProblem::Blank(i + 1)),
        None => Ok(()),
    }
}

impl AssociationRecord {
    pub fn new(
        participant_id: impl Into<String>,
        robot_id: impl Into<String>,
        words: Vec<String>,
    ) -> Result<Self, CorpusError> {
        let participant_id = participant_id.into();
        match check_words(&words) {
            Ok(()) => Ok(Self {
                participant_id,
                robot_id: robot_id.into(),
                words,
            }),
            Err(WordsProblem::Count(found)) => Err(CorpusError::WordCount {
                line: 0,
                participant: participant_id,
                found,
            }),
            Err(WordsProblem::Blank(position)) => Err(CorpusError::BlankWord {
                line: 0,
                participant: participant_id,
                position,
            }),
        }
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn robot_id(&self) -> &str {
        &self.robot_id
    }

    /// Raw entries; position `i` in the slice is text box `i + 1`.
    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Validated responses of one study.
///
/// Participants who quit early are retained and listed in
/// [`StudyDataset::incomplete_participants`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudyDataset {
    manifest: RobotManifest,
    attitudes: Vec<AttitudeRecord>,
    associations: Vec<AssociationRecord>,
    incomplete: BTreeSet<String>,
}

impl StudyDataset {
    /// Builds a dataset where completeness means one attitude record plus
    /// `expected_per_participant` associations.
    pub fn new(
        manifest: RobotManifest,
        attitudes: Vec<AttitudeRecord>,
        associations: Vec<AssociationRecord>,
        expected_per_participant: usize,
    ) -> Result<Self, CorpusError> {
        let mut expected = BTreeMap::new();
        for a in &attitudes {
            expected.insert(a.participant_id.clone(), expected_per_participant);
        }
        for a in &associations {
            expected.insert(a.participant_id.clone(), expected_per_participant);
        }
        Self::with_expected(manifest, attitudes, associations, &expected)
    }

    pub(crate) fn with_expected(
        manifest: RobotManifest,
        attitudes: Vec<AttitudeRecord>,
        associations: Vec<AssociationRecord>,
        expected: &BTreeMap<String, usize>,
    ) -> Result<Self, CorpusError> {
        let mut with_attitude = BTreeSet::new();
        for a in &attitudes {
            if !with_attitude.insert(a.participant_id.as_str()) {
                return Err(CorpusError::Invalid(format!(
                    "participant `{}` has more than one attitude record",
                    a.participant_id
                )));
            }
        }
        let mut pairs = BTreeSet::new();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for a in &associations {
            if !manifest.contains(&a.robot_id) {
                return Err(CorpusError::Invalid(format!("unknown robot id `{}`", a.robot_id)));
            }
            if !pairs.insert((a.participant_id.as_str(), a.robot_id.as_str())) {
                return Err(CorpusError::Invalid(format!(
                    "duplicate association for participant `{}` and robot `{}`",
                    a.participant_id, a.robot_id
                )));
            }
            *counts.entry(a.participant_id.as_str()).or_default() += 1;
        }
        let incomplete = expected
            .iter()
            .filter(|(p, &n)| {
                !with_attitude.contains(p.as_str()) || counts.get(p.as_str()).copied().unwrap_or(0) != n
            })
            .map(|(p, _)| p.clone())
            .collect();
        Ok(Self {
            manifest,
            attitudes,
            associations,
            incomplete,
        })
    }

    pub fn manifest(&self) -> &RobotManifest {
        &self.manifest
    }

    pub fn attitudes(&self) -> &[AttitudeRecord] {
        &self.attitudes
    }

    pub fn associations(&self) -> &[AssociationRecord] {
        &self.associations
    }

    pub fn attitude_of(&self, participant_id: &str) -> Option<&AttitudeRecord> {
        self.attitudes.iter().find(|a| a.participant_id == participant_id)
    }

    /// All participant ids, sorted.
    pub fn participants(&self) -> BTreeSet<&str> {
        self.attitudes
            .iter()
            .map(|a| a.participant_id.as_str())
            .chain(self.associations.iter().map(|a| a.participant_id.as_str()))
            .collect()
    }

    pub fn incomplete_participants(&self) -> &BTreeSet<String> {
        &self.incomplete
    }

    pub fn is_complete(&self, participant_id: &str) -> bool {
        !self.incomplete.contains(participant_id) && self.participants().contains(participant_id)
    }

    /// Total raw word entries across all associations.
    pub fn word_count(&self) -> usize {
        self.associations.iter().map(|a| a.words.len()).sum()
    }
}

impl fmt::Display for StudyDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} participants ({} incomplete), {} attitude records, {} associations, {} words, {} robots",
            self.participants().len(),
            self.incomplete.len(),
            self.attitudes.len(),
            self.associations.len(),
            self.word_count(),
            self.manifest.len()
        )
    }
}
