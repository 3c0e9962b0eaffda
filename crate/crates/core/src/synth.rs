//! Seeded synthetic studies with known ground truth, plus the small lexicon
//! and embedding fixtures they are realized from.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::affect::{AffectLexicon, AffectScore, Dimension};
use crate::corpus::{
    generate_assignment, AssociationRecord, AttitudeRecord, CorpusError, RobotEntry, RobotManifest, StudyDataset,
    ATTITUDE_ITEMS, MAX_ITEM_SCORE, WORDS_PER_ROBOT,
};
use crate::embedding::{EmbeddingStore, Vector};
use crate::normalize::{token, NormalizationRules};
use crate::ErrorCode;

/// Smallest lexicon that can realize a spread of affect levels.
pub const MIN_LEXICON: usize = 50;

/// Timestamp of the first event in synthetic logs.
pub const SYNTH_EPOCH: &str = "2023-01-01T00:00:00Z";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("lexicon has {found} usable entries, need at least {min}")]
    LexiconTooSmall { found: usize, min: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl ErrorCode for SynthError {
    fn code(&self) -> &'static str {
        match self {
            SynthError::LexiconTooSmall { .. } => "synth.lexicon_too_small",
            SynthError::Config(_) => "synth.config",
            SynthError::Corpus(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub n_participants: usize,
    pub n_robots: usize,
    pub per_participant: usize,
    pub beta0: f64,
    /// Attitude slope on valence, arousal, dominance.
    pub beta1: [f64; 3],
    pub sigma_u: f64,
    pub sigma: f64,
    /// Standard deviation of latent affect around the lexicon centre.
    pub latent_sd: f64,
    /// Correlation between latent valence and dominance within a pair.
    pub valence_dominance_corr: f64,
    /// Per-word jitter added to the latent level before the lexicon lookup.
    pub word_jitter: f64,
    pub seed: u64,
    pub null_model: bool,
}

impl Default for SynthConfig {
    /// Valence and dominance drive attitude, arousal does not.
    fn default() -> Self {
        Self {
            n_participants: 30,
            n_robots: 30,
            per_participant: 10,
            beta0: -1.0,
            beta1: [3.0, 0.0, 3.0],
            sigma_u: 0.1,
            sigma: 0.2,
            latent_sd: 0.15,
            valence_dominance_corr: 0.8,
            word_jitter: 0.05,
            seed: 1,
            null_model: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.n_participants == 0 || self.n_robots == 0 || self.per_participant == 0 {
            return bad("counts must be at least 1");
        }
        if self.per_participant > self.n_robots {
            return bad("per_participant exceeds n_robots");
        }
        for (name, v) in [
            ("sigma_u", self.sigma_u),
            ("sigma", self.sigma),
            ("latent_sd", self.latent_sd),
            ("word_jitter", self.word_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be a finite value >= 0"));
            }
        }
        if !(-1.0..=1.0).contains(&self.valence_dominance_corr) {
            return bad("valence_dominance_corr must lie in [-1, 1]");
        }
        if !self.beta0.is_finite() || self.beta1.iter().any(|b| !b.is_finite()) {
            return bad("coefficients must be finite");
        }
        Ok(())
    }

    /// Slopes actually used; all zero under the null model, whose intercept
    /// absorbs the slopes' contribution at the lexicon centre.
    pub fn effective_beta1(&self) -> [f64; 3] {
        if self.null_model {
            [0.0; 3]
        } else {
            self.beta1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTruth {
    pub participant: String,
    pub robot: String,
    /// Latent valence, arousal, dominance.
    pub latent: [f64; 3],
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantTruth {
    pub participant: String,
    /// Mean of the participant's pair-level responses before clipping.
    pub y: f64,
    pub clipped: bool,
    /// Mean of the 12 integer items actually recorded.
    pub recorded: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    /// Intercept and slopes actually used.
    pub beta0: f64,
    pub beta1: [f64; 3],
    pub robot_intercepts: BTreeMap<String, f64>,
    pub pairs: Vec<PairTruth>,
    pub participants: Vec<ParticipantTruth>,
}

/// The bundled robots, extended with numbered placeholders when more are
/// requested.
pub fn synth_manifest(n_robots: usize) -> Result<RobotManifest, CorpusError> {
    let bundled = RobotManifest::bundled();
    let mut entries: Vec<RobotEntry> = bundled.entries().iter().take(n_robots).cloned().collect();
    for i in entries.len()..n_robots {
        let id = format!("robot{:03}", i + 1);
        entries.push(RobotEntry {
            display_name: format!("Robot {}", i + 1),
            image_path: format!("images/{id}.jpg"),
            robot_id: id,
        });
    }
    RobotManifest::new(entries)
}

struct Candidate<'a> {
    word: &'a str,
    score: [f64; 3],
}

fn as_array(s: &AffectScore) -> [f64; 3] {
    [s.valence, s.arousal, s.dominance]
}

/// Draws a dataset from the configured generative model.
///
/// Each (participant, robot) pair gets a latent affect triple. Its response
/// `y = beta0 + beta1 . latent + u_robot + e` is averaged over the
/// participant's robots into one attitude, clipped to [0, 4] and rounded to
/// the nearest value twelve integer items can express. The six words of a
/// pair are the lexicon entries nearest to jittered copies of the latent
/// triple, without repeats.
pub fn synth_dataset(config: &SynthConfig, lexicon: &AffectLexicon) -> Result<(StudyDataset, GroundTruth), SynthError> {
    config.validate()?;
    let rules = NormalizationRules::bundled();
    // only words that survive normalization unchanged, so analysis sees what was planted
    let candidates: Vec<Candidate> = lexicon
        .iter()
        .filter(|(w, _)| token(w, &rules).as_deref() == Some(*w))
        .map(|(word, s)| Candidate {
            word,
            score: as_array(s),
        })
        .collect();
    if candidates.len() < MIN_LEXICON.max(WORDS_PER_ROBOT) {
        return Err(SynthError::LexiconTooSmall {
            found: candidates.len(),
            min: MIN_LEXICON,
        });
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut centre = [0.0; 3];
    for c in &candidates {
        for d in 0..3 {
            lo[d] = lo[d].min(c.score[d]);
            hi[d] = hi[d].max(c.score[d]);
            centre[d] += c.score[d];
        }
    }
    centre = centre.map(|s| s / candidates.len() as f64);

    let manifest = synth_manifest(config.n_robots)?;
    let assignment = generate_assignment(config.n_participants, &manifest, config.per_participant, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_a77e);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let beta1 = config.effective_beta1();
    // the null model keeps the alternative's mean attitude
    let beta0 = if config.null_model {
        config.beta0 + (0..3).map(|d| config.beta1[d] * centre[d]).sum::<f64>()
    } else {
        config.beta0
    };

    let mut intercepts = BTreeMap::new();
    for id in manifest.robot_ids() {
        intercepts.insert(id.to_string(), config.sigma_u * std.sample(&mut rng));
    }

    let rho = config.valence_dominance_corr;
    let width = config.n_participants.to_string().len().max(3);
    let mut attitudes = Vec::new();
    let mut associations = Vec::new();
    let mut pairs = Vec::new();
    let mut participants = Vec::new();
    for (p, hand) in assignment.hands.iter().enumerate() {
        let pid = format!("p{:0width$}", p + 1);
        let mut y_sum = 0.0;
        for robot in hand {
            let (z_v, z_a, z_o) = (std.sample(&mut rng), std.sample(&mut rng), std.sample(&mut rng));
            let z = [z_v, z_a, rho * z_v + (1.0 - rho * rho).sqrt() * z_o];
            let latent: [f64; 3] = std::array::from_fn(|d| {
                let (a, b) = (lo[d].max(0.05), hi[d].min(0.95));
                (centre[d] + config.latent_sd * z[d]).clamp(a.min(b), b.max(a))
            });
            let y = beta0
                + (0..3).map(|d| beta1[d] * latent[d]).sum::<f64>()
                + intercepts[robot]
                + config.sigma * std.sample(&mut rng);
            y_sum += y;

            let mut used = BTreeSet::new();
            let mut words = Vec::with_capacity(WORDS_PER_ROBOT);
            for _ in 0..WORDS_PER_ROBOT {
                let target: [f64; 3] = std::array::from_fn(|d| latent[d] + config.word_jitter * std.sample(&mut rng));
                let pick = candidates
                    .iter()
                    .filter(|c| !used.contains(c.word))
                    .min_by(|a, b| dist2(&a.score, &target).total_cmp(&dist2(&b.score, &target)))
                    .expect("lexicon holds more than six usable words");
                used.insert(pick.word);
                words.push(pick.word.to_string());
            }
            associations.push(AssociationRecord::new(pid.clone(), robot.clone(), words)?);
            pairs.push(PairTruth {
                participant: pid.clone(),
                robot: robot.clone(),
                latent,
                y,
            });
        }
        let y = y_sum / hand.len() as f64;
        let clipped = !(0.0..=MAX_ITEM_SCORE as f64).contains(&y);
        let items = items_for_mean(y.clamp(0.0, MAX_ITEM_SCORE as f64), &mut rng);
        let record = AttitudeRecord::new(pid.clone(), &items)?;
        participants.push(ParticipantTruth {
            participant: pid,
            y,
            clipped,
            recorded: record.mean_score(),
        });
        attitudes.push(record);
    }

    let dataset = StudyDataset::new(manifest, attitudes, associations, config.per_participant)?;
    Ok((
        dataset,
        GroundTruth {
            config: config.clone(),
            beta0,
            beta1,
            robot_intercepts: intercepts,
            pairs,
            participants,
        },
    ))
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|d| (a[d] - b[d]).powi(2)).sum()
}

/// Twelve items in `0..=4` whose mean is the representable value nearest `mean`.
fn items_for_mean(mean: f64, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let total = (mean * ATTITUDE_ITEMS as f64).round() as i64;
    let base = total / ATTITUDE_ITEMS as i64;
    let extra = (total % ATTITUDE_ITEMS as i64) as usize;
    let mut items: Vec<i64> = (0..ATTITUDE_ITEMS).map(|i| base + i64::from(i < extra)).collect();
    items.shuffle(rng);
    items
}

/// Everyday words a participant might type for a robot picture. Includes the
/// targets of the bundled normalization rules and the human-related words
/// used as distance anchors.
pub const FIXTURE_WORDS: &[&str] = &[
    "adorable", "alien", "angry", "animal", "arm", "awkward", "baby", "ball", "big", "black", "blue", "bright",
    "calm", "camera", "car", "cartoon", "cat", "child", "clean", "clever", "cold", "colorful", "companion",
    "computer", "cool", "creepy", "curious", "cute", "danger", "dark", "doll", "dog", "dull", "eye", "face",
    "factory", "family", "fast", "fear", "fly", "foot", "friend", "friendly", "fun", "funny", "future", "gentle",
    "gray", "green", "hand", "happy", "hard", "head", "heavy", "help", "helpful", "home", "human", "intelligent",
    "kind", "lamp", "leg", "lens", "light", "little", "lonely", "loud", "love", "machine", "man", "metal",
    "modern", "monster", "mouse", "movie", "music", "news", "odd", "old", "pet", "plastic", "play", "person",
    "people", "red", "robot", "round", "sad", "safe", "scary", "screen", "series", "servant", "sharp", "shiny",
    "silly", "simple", "slow", "small", "smart", "smile", "soft", "species", "spider", "strange", "strong",
    "tall", "technology", "tooth", "toy", "ugly", "useful", "warm", "weird", "wheel", "white", "woman", "work",
];

const CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

/// A lexicon of [`FIXTURE_WORDS`] plus `n_pseudo` consonant-vowel
/// pseudo-words, with seeded uniform valence, arousal and dominance.
/// Pseudo-words end in a vowel so no normalization rule touches them.
pub fn fixture_lexicon(n_pseudo: usize, seed: u64) -> AffectLexicon {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: BTreeSet<String> = FIXTURE_WORDS.iter().map(|w| w.to_string()).collect();
    let target = words.len() + n_pseudo;
    while words.len() < target {
        let syllables = rng.random_range(2..=3);
        let w: String = (0..syllables)
            .flat_map(|_| {
                [
                    CONSONANTS[rng.random_range(0..CONSONANTS.len())],
                    VOWELS[rng.random_range(0..VOWELS.len())],
                ]
            })
            .collect();
        words.insert(w);
    }
    let mut entries = BTreeMap::new();
    for w in words {
        let mut v = || (rng.random_range(0..=1000) as f64) / 1000.0;
        entries.insert(w, AffectScore::new(v(), v(), v()));
    }
    AffectLexicon::from_entries(entries).expect("values drawn inside [0, 1]")
}

/// Vectors whose geometry partly follows affect: a shared offset, an affine
/// image of the (valence, arousal, dominance) triple and isotropic noise.
pub fn fixture_embeddings(lexicon: &AffectLexicon, dim: usize, noise: f64, seed: u64) -> EmbeddingStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let offset: Vec<f64> = (0..dim).map(|_| std.sample(&mut rng)).collect();
    let basis: Vec<Vec<f64>> = Dimension::ALL
        .iter()
        .map(|_| (0..dim).map(|_| std.sample(&mut rng)).collect())
        .collect();
    let mut store = EmbeddingStore::new(dim);
    for (word, score) in lexicon.iter() {
        let s = as_array(score);
        let v: Vec<f64> = (0..dim)
            .map(|i| {
                let affine: f64 = (0..3).map(|d| (s[d] - 0.5) * basis[d][i]).sum();
                // four decimals keeps the text file small and round-trips exactly
                ((offset[i] * 0.5 + affine + noise * std.sample(&mut rng)) * 1e4).round() / 1e4
            })
            .collect();
        store
            .insert(word, Vector::new(v))
            .expect("dimension fixed by construction");
    }
    store
}

/// Parses [`SYNTH_EPOCH`].
pub fn synth_epoch() -> DateTime<Utc> {
    SYNTH_EPOCH.parse().expect("constant timestamp")
}
