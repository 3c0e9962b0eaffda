//! Distance of robot vectors to a human-related target word, and affect
//! standardized against lexicon words lying at a similar distance.

use std::fmt;
use std::str::FromStr;

use super::{RobotVector, SemanticsError};
use crate::affect::{mean_score, AffectLexicon, AffectScore, Dimension};
use crate::embedding::{cosine_distance, EmbeddingStore};

pub const DEFAULT_TARGET: &str = "person";
pub const DEFAULT_MIN_BASELINE_WORDS: usize = 10;

/// `1 - cos(robot, target)`.
pub fn human_distance(rv: &RobotVector, store: &EmbeddingStore, target: &str) -> Result<f64, SemanticsError> {
    let t = store
        .get(target)
        .ok_or_else(|| SemanticsError::TargetMissing(target.to_string()))?;
    Ok(cosine_distance(&rv.vector, t)?)
}

/// How the half-width of the baseline window is derived from robot distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskMode {
    /// Mean gap between consecutive sorted distinct distances.
    #[default]
    Gap,
    /// Mean absolute difference over all robot pairs.
    Pairwise,
}

impl MaskMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskMode::Gap => "gap",
            MaskMode::Pairwise => "pairwise",
        }
    }
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaskMode {
    type Err = SemanticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gap" => Ok(MaskMode::Gap),
            "pairwise" => Ok(MaskMode::Pairwise),
            other => Err(SemanticsError::UnknownMask(other.to_string())),
        }
    }
}

pub fn mask_width(distances: &[f64], mode: MaskMode) -> Result<f64, SemanticsError> {
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(SemanticsError::DegenerateDistances);
    }
    Ok(match mode {
        MaskMode::Gap => {
            let gaps: f64 = sorted.windows(2).map(|w| w[1] - w[0]).sum();
            gaps / (sorted.len() - 1) as f64
        }
        MaskMode::Pairwise => {
            let n = distances.len();
            let mut total = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    total += (distances[i] - distances[j]).abs();
                }
            }
            total / (n * (n - 1) / 2) as f64
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Standardization {
    /// `raw - baseline`.
    #[default]
    Subtract,
    /// `(raw - baseline) / sd(baseline words)` per component.
    Scaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedAffect {
    pub robot_id: String,
    pub human_distance: f64,
    pub raw: AffectScore,
    pub baseline: AffectScore,
    pub standardized: AffectScore,
    pub baseline_word_count: usize,
    /// Inclusive distance window the baseline words were drawn from.
    pub window: (f64, f64),
}

#[derive(Debug, Clone)]
struct BaselineEntry {
    distance: f64,
    word: String,
    score: AffectScore,
}

/// Lexicon words with vectors, sorted by their distance to the target word.
/// The target itself is excluded.
#[derive(Debug, Clone)]
pub struct BaselineIndex {
    target: String,
    entries: Vec<BaselineEntry>,
}

impl BaselineIndex {
    pub fn build(lexicon: &AffectLexicon, store: &EmbeddingStore, target: &str) -> Result<Self, SemanticsError> {
        let t = store
            .get(target)
            .ok_or_else(|| SemanticsError::TargetMissing(target.to_string()))?;
        let mut entries = Vec::new();
        for (word, score) in lexicon.iter() {
            if word == target {
                continue;
            }
            let Some(v) = store.get(word) else { continue };
            if v.norm() == 0.0 {
                continue;
            }
            entries.push(BaselineEntry {
                distance: cosine_distance(v, t)?,
                word: word.to_string(),
                score: *score,
            });
        }
        if entries.is_empty() {
            return Err(SemanticsError::EmptyBaseline);
        }
        entries.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.word.cmp(&b.word)));
        Ok(Self {
            target: target.to_string(),
            entries,
        })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Words whose distance lies in `[low, high]`, in word order.
    pub fn window(&self, low: f64, high: f64) -> Vec<(&str, &AffectScore)> {
        let start = self.entries.partition_point(|e| e.distance < low);
        let end = self.entries.partition_point(|e| e.distance <= high);
        let mut hits: Vec<&BaselineEntry> = self.entries[start..end.max(start)].iter().collect();
        hits.sort_by(|a, b| a.word.cmp(&b.word));
        hits.into_iter().map(|e| (e.word.as_str(), &e.score)).collect()
    }

    pub fn count_in(&self, low: f64, high: f64) -> usize {
        let start = self.entries.partition_point(|e| e.distance < low);
        let end = self.entries.partition_point(|e| e.distance <= high);
        end.saturating_sub(start)
    }
}

/// Subtracts the mean affect of lexicon words within `distance ± width` of
/// the target from the robot's raw affect.
pub fn standardize_affect(
    robot_id: &str,
    raw: AffectScore,
    distance: f64,
    width: f64,
    index: &BaselineIndex,
    min_words: usize,
    mode: Standardization,
) -> Result<StandardizedAffect, SemanticsError> {
    let (low, high) = (distance - width, distance + width);
    let words = index.window(low, high);
    if words.is_empty() || words.len() < min_words {
        return Err(SemanticsError::SparseBaseline {
            found: words.len(),
            min: min_words,
            low,
            high,
        });
    }
    let (baseline, count) = mean_score(words.iter().map(|(_, s)| *s)).expect("window is non-empty");
    let mut standardized = raw.sub(&baseline);
    if mode == Standardization::Scaled {
        let var = |d: Dimension| {
            words.iter().map(|(_, s)| (s.get(d) - baseline.get(d)).powi(2)).sum::<f64>() / count as f64
        };
        let scale = |x: f64, d: Dimension| {
            let sd = var(d).sqrt();
            if sd > 0.0 {
                x / sd
            } else {
                x
            }
        };
        standardized = AffectScore::new(
            scale(standardized.valence, Dimension::Valence),
            scale(standardized.arousal, Dimension::Arousal),
            scale(standardized.dominance, Dimension::Dominance),
        );
    }
    Ok(StandardizedAffect {
        robot_id: robot_id.to_string(),
        human_distance: distance,
        raw,
        baseline,
        standardized,
        baseline_word_count: count,
        window: (low, high),
    })
}

/// Baseline window sizes obtained with a given target word.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDiagnostic {
    pub target: String,
    /// `None` when the target has no vector.
    pub width: Option<f64>,
    pub min_words: usize,
    pub mean_words: f64,
}

/// Compares candidate target words by how many baseline words fall into
/// each robot's window.
pub fn baseline_diagnostic(
    robots: &[RobotVector],
    lexicon: &AffectLexicon,
    store: &EmbeddingStore,
    targets: &[&str],
    mode: MaskMode,
) -> Vec<TargetDiagnostic> {
    targets
        .iter()
        .map(|&target| {
            let empty = TargetDiagnostic {
                target: target.to_string(),
                width: None,
                min_words: 0,
                mean_words: 0.0,
            };
            let Ok(index) = BaselineIndex::build(lexicon, store, target) else {
                return empty;
            };
            let Ok(distances) = robots
                .iter()
                .map(|r| human_distance(r, store, target))
                .collect::<Result<Vec<_>, _>>()
            else {
                return empty;
            };
            let Ok(width) = mask_width(&distances, mode) else {
                return empty;
            };
            let counts: Vec<usize> = distances.iter().map(|d| index.count_in(d - width, d + width)).collect();
            TargetDiagnostic {
                target: target.to_string(),
                width: Some(width),
                min_words: counts.iter().copied().min().unwrap_or(0),
                mean_words: counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64,
            }
        })
        .collect()
}
