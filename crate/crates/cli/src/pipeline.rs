//! Analysis stages composed by the subcommands.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use bodyimage_core::affect::{affect_table, coverage, load_vad, AffectLexicon, AffectTable, Dimension, Grain};
use bodyimage_core::corpus::{load_dataset, word_frequency, RobotManifest, StudyDataset};
use bodyimage_core::embedding::{load_embeddings, EmbeddingStore};
use bodyimage_core::lme::{attitude_affect_data, fit_attitude_affect, AttitudeAffectFit};
use bodyimage_core::normalize::{token, NormalizationRules};
use bodyimage_core::report::{
    emit_figures, emit_tables, sha256_hex, FigureInputs, ReportBundle, ReportWriter, TableInputs,
};
use bodyimage_core::semantics::{
    baseline_diagnostic, cluster, enumerate_cliques, human_distance, knn_graph, mask_width, robot_vectors,
    similarity_matrix, standardize_affect, BaselineIndex, BodyGraph, Clique, ClusterAssignment, MaskMode,
    RobotVector, SimilarityMatrix, Standardization, StandardizedAffect,
};
use bodyimage_core::semantics::human::{DEFAULT_MIN_BASELINE_WORDS, DEFAULT_TARGET};

use crate::error::{CliError, OrCli, Result};

/// Alternative human anchors compared in the baseline diagnostic.
pub const CANDIDATE_TARGETS: [&str; 3] = ["person", "human", "people"];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub responses: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub vad: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub out: PathBuf,
    pub k: usize,
    pub clique_size: usize,
    pub n_clusters: usize,
    pub target_word: String,
    pub mask: MaskMode,
    pub grain: Grain,
    pub seed: u64,
    pub min_baseline_words: usize,
    pub standardization: Standardization,
    /// Keep every embedding row instead of only the needed vocabulary.
    pub full_load: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            responses: None,
            manifest: None,
            embeddings: None,
            vad: None,
            rules: None,
            out: PathBuf::from("report"),
            k: 3,
            clique_size: 4,
            n_clusters: 3,
            target_word: DEFAULT_TARGET.into(),
            mask: MaskMode::Gap,
            grain: Grain::ParticipantRobot,
            seed: 1,
            min_baseline_words: DEFAULT_MIN_BASELINE_WORDS,
            standardization: Standardization::Subtract,
            full_load: false,
        }
    }
}

fn standardization_name(s: Standardization) -> &'static str {
    match s {
        Standardization::Subtract => "subtract",
        Standardization::Scaled => "scaled",
    }
}

impl PipelineConfig {
    /// Effective parameters, echoed in the run header and the bundle manifest.
    pub fn parameters(&self) -> Vec<(String, String)> {
        [
            ("k", self.k.to_string()),
            ("clique_size", self.clique_size.to_string()),
            ("n_clusters", self.n_clusters.to_string()),
            ("target_word", self.target_word.clone()),
            ("mask", self.mask.to_string()),
            ("grain", self.grain.as_str().to_string()),
            ("seed", self.seed.to_string()),
            ("min_baseline_words", self.min_baseline_words.to_string()),
            ("standardization", standardization_name(self.standardization).to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn header(&self, command: &str) -> String {
        let params: Vec<String> = self.parameters().iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("bodyimage {command}: {}", params.join(" "))
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path> {
        let p = path
            .as_deref()
            .ok_or_else(|| CliError::usage(format!("`{command}` needs --{flag}")))?;
        if !p.exists() {
            return Err(CliError::input("cli.missing_input", format!("{flag} file not found: {}", p.display())));
        }
        Ok(p)
    }

    pub fn responses_path(&self, command: &str) -> Result<&Path> {
        self.require(&self.responses, "responses", command)
    }

    pub fn embeddings_path(&self, command: &str) -> Result<&Path> {
        self.require(&self.embeddings, "embeddings", command)
    }

    pub fn vad_path(&self, command: &str) -> Result<&Path> {
        self.require(&self.vad, "vad", command)
    }

    fn optional(&self, path: &Option<PathBuf>, flag: &str) -> Result<()> {
        if let Some(p) = path {
            if !p.exists() {
                return Err(CliError::input("cli.missing_input", format!("{flag} file not found: {}", p.display())));
            }
        }
        Ok(())
    }
}

/// Responses, robots and normalization rules.
pub struct Inputs {
    pub manifest: RobotManifest,
    pub rules: NormalizationRules,
    pub dataset: StudyDataset,
}

pub fn load_inputs(cfg: &PipelineConfig, command: &str) -> Result<Inputs> {
    let responses = cfg.responses_path(command)?;
    cfg.optional(&cfg.manifest, "manifest")?;
    cfg.optional(&cfg.rules, "rules")?;
    let manifest = match &cfg.manifest {
        Some(p) => RobotManifest::load(p).or_cli()?,
        None => RobotManifest::bundled(),
    };
    let rules = match &cfg.rules {
        Some(p) => NormalizationRules::load(p).or_cli()?,
        None => NormalizationRules::bundled(),
    };
    let dataset = load_dataset(responses, &manifest).or_cli()?;
    log::info!("loaded {dataset}");
    Ok(Inputs {
        manifest,
        rules,
        dataset,
    })
}

pub fn load_lexicon(cfg: &PipelineConfig, command: &str) -> Result<AffectLexicon> {
    let lex = load_vad(cfg.vad_path(command)?).or_cli()?;
    if lex.is_empty() {
        return Err(CliError::analysis("affect.empty_lexicon", "affect lexicon has no entries"));
    }
    Ok(lex)
}

/// Every word the analysis can look up: normalized responses, lexicon words
/// and the candidate human anchors.
pub fn vocabulary(inputs: &Inputs, lexicon: Option<&AffectLexicon>, target: &str) -> HashSet<String> {
    let mut vocab: HashSet<String> = inputs
        .dataset
        .associations()
        .iter()
        .flat_map(|a| a.words())
        .filter_map(|w| token(w, &inputs.rules))
        .collect();
    if let Some(lex) = lexicon {
        vocab.extend(lex.iter().map(|(w, _)| w.to_string()));
    }
    vocab.insert(target.to_string());
    vocab.extend(CANDIDATE_TARGETS.iter().map(|s| s.to_string()));
    vocab
}

pub fn load_store(cfg: &PipelineConfig, command: &str, vocab: &HashSet<String>) -> Result<EmbeddingStore> {
    let path = cfg.embeddings_path(command)?;
    let store = load_embeddings(path, (!cfg.full_load).then_some(vocab)).or_cli()?;
    log::info!("loaded {} vectors of dimension {}", store.len(), store.dim());
    Ok(store)
}

pub struct AffectStage {
    pub table: AffectTable,
    pub coverage: f64,
}

pub fn affect_stage(inputs: &Inputs, lexicon: &AffectLexicon, grain: Grain) -> Result<AffectStage> {
    let coverage = coverage(&inputs.dataset, &inputs.rules, lexicon).or_cli()?;
    let table = affect_table(&inputs.dataset, &inputs.rules, lexicon, grain);
    if table.rows.is_empty() {
        return Err(CliError::analysis("affect.none_covered", "no response word is in the affect lexicon"));
    }
    Ok(AffectStage { table, coverage })
}

pub struct LmeStage {
    pub fits: Vec<AttitudeAffectFit>,
    /// `(affect, attitude)` pairs per dimension.
    pub points: BTreeMap<Dimension, Vec<(f64, f64)>>,
}

pub fn lme_stage(inputs: &Inputs, table: &AffectTable) -> Result<LmeStage> {
    let mut fits = Vec::new();
    let mut points = BTreeMap::new();
    for d in Dimension::ALL {
        let fit = fit_attitude_affect(&inputs.dataset, table, d).or_cli()?;
        let (data, _) = attitude_affect_data(&inputs.dataset, table, d).or_cli()?;
        points.insert(d, data.rows().iter().map(|r| (r.x.unwrap_or(0.0), r.y)).collect());
        fits.push(fit);
    }
    Ok(LmeStage { fits, points })
}

pub struct GraphStage {
    pub vectors: Vec<RobotVector>,
    pub similarity: SimilarityMatrix,
    pub graph: BodyGraph,
    pub cliques: Vec<Clique>,
    pub clusters: ClusterAssignment,
}

pub fn graph_stage(inputs: &Inputs, store: &EmbeddingStore, cfg: &PipelineConfig) -> Result<GraphStage> {
    let vectors = robot_vectors(&inputs.dataset, &inputs.rules, store).or_cli()?;
    let similarity = similarity_matrix(&vectors).or_cli()?;
    let graph = knn_graph(&similarity, cfg.k).or_cli()?;
    let cliques = enumerate_cliques(&graph, cfg.clique_size).or_cli()?;
    let clusters = cluster(&similarity, cfg.n_clusters).or_cli()?;
    Ok(GraphStage {
        vectors,
        similarity,
        graph,
        cliques,
        clusters,
    })
}

pub struct HumanStage {
    pub rows: Vec<StandardizedAffect>,
    pub width: f64,
}

pub fn human_stage(
    inputs: &Inputs,
    vectors: &[RobotVector],
    lexicon: &AffectLexicon,
    store: &EmbeddingStore,
    cfg: &PipelineConfig,
) -> Result<HumanStage> {
    let target = cfg.target_word.as_str();
    let distances = vectors
        .iter()
        .map(|rv| human_distance(rv, store, target))
        .collect::<std::result::Result<Vec<_>, _>>()
        .or_cli()?;
    let width = mask_width(&distances, cfg.mask).or_cli()?;
    let index = BaselineIndex::build(lexicon, store, target).or_cli()?;
    let raw = affect_table(&inputs.dataset, &inputs.rules, lexicon, Grain::Robot);
    let mut rows = Vec::with_capacity(vectors.len());
    for (rv, &d) in vectors.iter().zip(&distances) {
        let score = raw
            .get(None, Some(&rv.robot_id))
            .ok_or_else(|| {
                CliError::analysis(
                    "affect.none_covered",
                    format!("robot `{}` has no response word in the affect lexicon", rv.robot_id),
                )
            })?
            .score;
        let row = standardize_affect(
            &rv.robot_id,
            score,
            d,
            width,
            &index,
            cfg.min_baseline_words,
            cfg.standardization,
        )
        .map_err(|e| {
            let mut err = CliError::from_module(e);
            err.message = format!("robot `{}`: {}", rv.robot_id, err.message);
            err
        })?;
        rows.push(row);
    }
    Ok(HumanStage { rows, width })
}

/// Baseline window sizes for the configured target and the usual alternatives.
pub fn target_report(vectors: &[RobotVector], lexicon: &AffectLexicon, store: &EmbeddingStore, cfg: &PipelineConfig) -> String {
    let mut targets: Vec<&str> = vec![cfg.target_word.as_str()];
    targets.extend(CANDIDATE_TARGETS.iter().filter(|t| **t != cfg.target_word));
    let mut out = String::new();
    for d in baseline_diagnostic(vectors, lexicon, store, &targets, cfg.mask) {
        match d.width {
            Some(w) => {
                out += &format!(
                    "target {:<8} width {:.6} baseline words min {} mean {:.1}\n",
                    d.target, w, d.min_words, d.mean_words
                )
            }
            None => out += &format!("target {:<8} unavailable\n", d.target),
        }
    }
    out
}

fn input_digests(cfg: &PipelineConfig) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (name, path) in [
        ("responses", &cfg.responses),
        ("manifest", &cfg.manifest),
        ("rules", &cfg.rules),
        ("vad", &cfg.vad),
        ("embeddings", &cfg.embeddings),
    ] {
        if let Some(p) = path {
            if let Ok(bytes) = fs::read(p) {
                let file = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
                out.push((format!("input.{name}"), file));
                out.push((format!("input.{name}.sha256"), sha256_hex(&bytes)));
            }
        }
    }
    out
}

/// Run metadata for the bundle manifest. No timestamps or absolute paths, so
/// identical inputs give identical manifests.
pub fn metadata(cfg: &PipelineConfig, command: &str) -> Vec<(String, String)> {
    let mut meta = vec![
        ("tool".to_string(), format!("bodyimage {}", env!("CARGO_PKG_VERSION"))),
        ("command".to_string(), command.to_string()),
        ("estimation".to_string(), "maximum likelihood (not REML)".to_string()),
    ];
    meta.extend(cfg.parameters());
    meta.extend(input_digests(cfg));
    meta
}

pub fn writer(cfg: &PipelineConfig) -> Result<ReportWriter> {
    ReportWriter::create(&cfg.out).or_cli()
}

/// Everything `analyze` computes.
pub struct Analysis {
    pub inputs: Inputs,
    pub frequency: Vec<(String, usize)>,
    pub affect: AffectStage,
    pub lme: LmeStage,
    pub graph: GraphStage,
    pub human: HumanStage,
    pub bundle: ReportBundle,
}

/// Full pipeline: every stage, then the complete report bundle.
pub fn analyze(cfg: &PipelineConfig) -> Result<Analysis> {
    let inputs = load_inputs(cfg, "analyze")?;
    cfg.embeddings_path("analyze")?;
    let lexicon = load_lexicon(cfg, "analyze")?;
    let frequency = word_frequency(&inputs.dataset, &inputs.rules);
    let affect = affect_stage(&inputs, &lexicon, cfg.grain)?;
    let lme = lme_stage(&inputs, &affect.table)?;
    let vocab = vocabulary(&inputs, Some(&lexicon), &cfg.target_word);
    let store = load_store(cfg, "analyze", &vocab)?;
    let graph = graph_stage(&inputs, &store, cfg)?;
    let human = human_stage(&inputs, &graph.vectors, &lexicon, &store, cfg)?;

    let mut w = writer(cfg)?;
    emit_tables(
        &mut w,
        TableInputs {
            frequency: Some(&frequency),
            affect: Some(&affect.table),
            fits: Some(&lme.fits),
            clusters: Some(&graph.clusters),
            cliques: Some(&graph.cliques),
            standardized: Some(&human.rows),
        },
    )
    .or_cli()?;
    emit_figures(
        &mut w,
        FigureInputs {
            manifest: Some(&inputs.manifest),
            graph: Some(&graph.graph),
            clusters: Some(&graph.clusters),
            cliques: &graph.cliques,
            attitude_points: Some(&lme.points),
            fits: &lme.fits,
            standardized: Some(&human.rows),
        },
    )
    .or_cli()?;
    let mut meta = metadata(cfg, "analyze");
    meta.push(("coverage".into(), format!("{:.4}", affect.coverage)));
    let bundle = w.finish(meta).or_cli()?;
    Ok(Analysis {
        inputs,
        frequency,
        affect,
        lme,
        graph,
        human,
        bundle,
    })
}

/// Recomputes the digests listed in a bundle manifest; returns the names of
/// files that are missing or changed.
pub fn verify_bundle(dir: &Path) -> Result<(usize, Vec<String>)> {
    let manifest_path = dir.join(bodyimage_core::report::MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| {
        CliError::input("report.io", format!("cannot read {}: {e}", manifest_path.display()))
    })?;
    let mut checked = 0;
    let mut bad = BTreeSet::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let Some((digest, name)) = line.split_once("  ") else {
            return Err(CliError::analysis("report.manifest", format!("malformed manifest line `{line}`")));
        };
        checked += 1;
        match fs::read(dir.join(name)) {
            Ok(bytes) if sha256_hex(&bytes) == digest => {}
            _ => {
                bad.insert(name.to_string());
            }
        }
    }
    Ok((checked, bad.into_iter().collect()))
}
