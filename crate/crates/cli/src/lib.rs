//! Command-line front end: data collection server, synthetic data, and the
//! analysis pipeline.

pub mod error;
pub mod pipeline;

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use bodyimage_core::affect::{load_vad, Grain};
use bodyimage_core::corpus::{word_frequency, write_event_log};
use bodyimage_core::embedding::write_embeddings;
use bodyimage_core::report::{emit_figures, emit_tables, FigureInputs, TableInputs};
use bodyimage_core::semantics::{MaskMode, Standardization};
use bodyimage_core::synth::{fixture_embeddings, fixture_lexicon, synth_dataset, synth_epoch, SynthConfig};
use bodyimage_server::{serve, ServerConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, Result, EXIT_ANALYSIS, EXIT_INPUT, EXIT_USAGE};
use error::OrCli;
use pipeline::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "bodyimage", version, about = "Collect and analyze free associations to robot images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the data collection server.
    Serve(ServeArgs),
    /// Generate a synthetic event log with planted attitude effects.
    Synth(SynthArgs),
    /// Validate an event log and print a summary.
    Ingest(AnalysisArgs),
    /// Run every stage and write the full report bundle.
    Analyze(AnalysisArgs),
    /// Robot similarity graph, cliques and clusters.
    Graph(AnalysisArgs),
    /// Valence/arousal/dominance aggregates.
    Affect(AnalysisArgs),
    /// Attitude against affect mixed models.
    Lme(AnalysisArgs),
    /// Affect standardized by distance to the human target word.
    Humandist(AnalysisArgs),
    /// Verify the file digests of a report bundle.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "BODYIMAGE_HOST", default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, env = "BODYIMAGE_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "BODYIMAGE_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    /// Robot manifest TSV; the bundled 30 robots when omitted.
    #[arg(long, env = "BODYIMAGE_MANIFEST")]
    pub manifest: Option<PathBuf>,
    #[arg(long, env = "BODYIMAGE_IMAGES_DIR")]
    pub images_dir: Option<PathBuf>,
    #[arg(long, env = "BODYIMAGE_CAPACITY", default_value_t = 30)]
    pub capacity: usize,
    #[arg(long, env = "BODYIMAGE_PER_PARTICIPANT", default_value_t = 10)]
    pub per_participant: usize,
    #[arg(long, env = "BODYIMAGE_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "BODYIMAGE_ADMIN_TOKEN", hide_env_values = true)]
    pub admin_token: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, env = "BODYIMAGE_OUT")]
    pub out: PathBuf,
    #[arg(long, env = "BODYIMAGE_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub participants: usize,
    #[arg(long, default_value_t = 30)]
    pub robots: usize,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub beta0: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub beta_valence: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta_arousal: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub beta_dominance: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_u: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    /// Zero every slope.
    #[arg(long)]
    pub null: bool,
    /// Existing VAD lexicon to draw words from; a synthetic one is written
    /// alongside the log when omitted.
    #[arg(long, env = "BODYIMAGE_VAD")]
    pub vad: Option<PathBuf>,
    #[arg(long, default_value_t = 850)]
    pub pseudo_words: usize,
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.6)]
    pub noise: f64,
    /// Seed for the synthetic lexicon and embeddings.
    #[arg(long, default_value_t = 11)]
    pub resource_seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MaskArg {
    Gap,
    Pairwise,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GrainArg {
    Participant,
    ParticipantRobot,
    Robot,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StandardizationArg {
    Subtract,
    Scaled,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// Event log (JSON lines).
    #[arg(long, env = "BODYIMAGE_RESPONSES")]
    pub responses: Option<PathBuf>,
    #[arg(long, env = "BODYIMAGE_MANIFEST")]
    pub manifest: Option<PathBuf>,
    /// word2vec text-format vectors.
    #[arg(long, env = "BODYIMAGE_EMBEDDINGS")]
    pub embeddings: Option<PathBuf>,
    /// VAD lexicon TSV.
    #[arg(long, env = "BODYIMAGE_VAD")]
    pub vad: Option<PathBuf>,
    /// Normalization rules TSV; bundled rules when omitted.
    #[arg(long, env = "BODYIMAGE_RULES")]
    pub rules: Option<PathBuf>,
    #[arg(long, env = "BODYIMAGE_OUT", default_value = "report")]
    pub out: PathBuf,
    #[arg(long, env = "BODYIMAGE_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "BODYIMAGE_K", default_value_t = 3)]
    pub k: usize,
    #[arg(long, env = "BODYIMAGE_CLIQUE_SIZE", default_value_t = 4)]
    pub clique_size: usize,
    #[arg(long, env = "BODYIMAGE_N_CLUSTERS", default_value_t = 3)]
    pub n_clusters: usize,
    #[arg(long, env = "BODYIMAGE_TARGET_WORD", default_value = "person")]
    pub target_word: String,
    #[arg(long, env = "BODYIMAGE_MASK", value_enum, default_value = "gap")]
    pub mask: MaskArg,
    #[arg(long, env = "BODYIMAGE_GRAIN", value_enum, default_value = "participant-robot")]
    pub grain: GrainArg,
    #[arg(long, env = "BODYIMAGE_MIN_BASELINE_WORDS", default_value_t = 10)]
    pub min_baseline_words: usize,
    #[arg(long, env = "BODYIMAGE_STANDARDIZATION", value_enum, default_value = "subtract")]
    pub standardization: StandardizationArg,
    /// Load every embedding row instead of only the needed vocabulary.
    #[arg(long, env = "BODYIMAGE_FULL_LOAD")]
    pub full_load: bool,
}

impl AnalysisArgs {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            responses: self.responses.clone(),
            manifest: self.manifest.clone(),
            embeddings: self.embeddings.clone(),
            vad: self.vad.clone(),
            rules: self.rules.clone(),
            out: self.out.clone(),
            k: self.k,
            clique_size: self.clique_size,
            n_clusters: self.n_clusters,
            target_word: self.target_word.clone(),
            mask: match self.mask {
                MaskArg::Gap => MaskMode::Gap,
                MaskArg::Pairwise => MaskMode::Pairwise,
            },
            grain: match self.grain {
                GrainArg::Participant => Grain::Participant,
                GrainArg::ParticipantRobot => Grain::ParticipantRobot,
                GrainArg::Robot => Grain::Robot,
            },
            seed: self.seed,
            min_baseline_words: self.min_baseline_words,
            standardization: match self.standardization {
                StandardizationArg::Subtract => Standardization::Subtract,
                StandardizationArg::Scaled => Standardization::Scaled,
            },
            full_load: self.full_load,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Bundle directory containing a manifest.
    pub dir: PathBuf,
}

/// Parses arguments and runs the command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Serve(a) => run_serve(a, out),
        Command::Synth(a) => run_synth(a, out),
        Command::Ingest(a) => run_ingest(&a.config(), out),
        Command::Analyze(a) => run_analyze(&a.config(), out),
        Command::Graph(a) => run_graph(&a.config(), out),
        Command::Affect(a) => run_affect(&a.config(), out),
        Command::Lme(a) => run_lme(&a.config(), out),
        Command::Humandist(a) => run_humandist(&a.config(), out),
        Command::Report(a) => run_report(a, out),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::input("cli.io", e.to_string())
}

fn run_serve(a: ServeArgs, out: &mut dyn Write) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::usage(format!("bad listen address: {e}")))?;
    if a.admin_token.is_empty() {
        return Err(CliError::usage("--admin-token must not be empty"));
    }
    let config = ServerConfig {
        data_dir: a.data_dir,
        manifest_path: a.manifest,
        images_root: a.images_dir,
        capacity: a.capacity,
        per_participant: a.per_participant,
        seed: a.seed,
        admin_token: a.admin_token,
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(io_err)?;
    rt.block_on(serve(&config, addr, |bound| {
        let _ = writeln!(out, "listening on http://{bound}");
        let _ = out.flush();
    }))
    .or_cli()
}

fn run_synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let config = SynthConfig {
        n_participants: a.participants,
        n_robots: a.robots,
        beta0: a.beta0,
        beta1: [a.beta_valence, a.beta_arousal, a.beta_dominance],
        sigma_u: a.sigma_u,
        sigma: a.sigma,
        seed: a.seed,
        null_model: a.null,
        ..SynthConfig::default()
    };
    fs::create_dir_all(&a.out).map_err(io_err)?;
    let lexicon = match &a.vad {
        Some(p) => load_vad(p).or_cli()?,
        None => {
            let lex = fixture_lexicon(a.pseudo_words, a.resource_seed);
            let store = fixture_embeddings(&lex, a.dim, a.noise, a.resource_seed + 1);
            fs::write(a.out.join("vad.tsv"), lex.to_tsv()).map_err(io_err)?;
            let mut buf = Vec::new();
            write_embeddings(&store, &mut buf).map_err(io_err)?;
            fs::write(a.out.join("vectors.txt"), buf).map_err(io_err)?;
            lex
        }
    };
    let (dataset, truth) = synth_dataset(&config, &lexicon).or_cli()?;
    let mut log = Vec::new();
    write_event_log(&dataset, synth_epoch(), &mut log).map_err(io_err)?;
    fs::write(a.out.join("responses.jsonl"), log).map_err(io_err)?;
    let truth_json = serde_json::to_string_pretty(&truth).map_err(|e| CliError::analysis("cli.json", e.to_string()))?;
    fs::write(a.out.join("ground_truth.json"), truth_json + "\n").map_err(io_err)?;
    writeln!(out, "wrote {dataset} to {}", a.out.display()).map_err(io_err)?;
    Ok(())
}

fn header(cfg: &PipelineConfig, command: &str) {
    eprintln!("{}", cfg.header(command));
}

fn run_ingest(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<()> {
    let inputs = pipeline::load_inputs(cfg, "ingest")?;
    let d = &inputs.dataset;
    let freq = word_frequency(d, &inputs.rules);
    writeln!(out, "participants {}", d.participants().len()).map_err(io_err)?;
    writeln!(out, "associations {}", d.associations().len()).map_err(io_err)?;
    writeln!(out, "words {}", d.word_count()).map_err(io_err)?;
    writeln!(out, "distinct tokens {}", freq.len()).map_err(io_err)?;
    writeln!(out, "incomplete sessions {}", d.incomplete_participants().len()).map_err(io_err)?;
    for (word, n) in freq.iter().take(10) {
        writeln!(out, "  {n:>4} {word}").map_err(io_err)?;
    }
    Ok(())
}

fn run_analyze(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<()> {
    header(cfg, "analyze");
    let a = pipeline::analyze(cfg)?;
    writeln!(out, "coverage {:.1}%", 100.0 * a.affect.coverage).map_err(io_err)?;
    for f in &a.lme.fits {
        writeln!(out, "{:<9} {}", f.dimension.as_str(), f.lrt).map_err(io_err)?;
    }
    writeln!(out, "cliques {}", a.graph.cliques.len()).map_err(io_err)?;
    writeln!(out, "wrote {} files to {}", a.bundle.files.len(), a.bundle.dir.display()).map_err(io_err)?;
    Ok(())
}

fn run_graph(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<()> {
    header(cfg, "graph");
    let inputs = pipeline::load_inputs(cfg, "graph")?;
    cfg.embeddings_path("graph")?;
    let vocab = pipeline::vocabulary(&inputs, None, &cfg.target_word);
    let store = pipeline::load_store(cfg, "graph", &vocab)?;
    let g = pipeline::graph_stage(&inputs, &store, cfg)?;
    let mut w = pipeline::writer(cfg)?;
    emit_tables(
        &mut w,
        TableInputs {
            clusters: Some(&g.clusters),
            cliques: Some(&g.cliques),
            ..Default::default()
        },
    )
    .or_cli()?;
    emit_figures(
        &mut w,
        FigureInputs {
            manifest: Some(&inputs.manifest),
            graph: Some(&g.graph),
            clusters: Some(&g.clusters),
            cliques: &g.cliques,
            ..Default::default()
        },
    )
    .or_cli()?;
    w.finish(pipeline::metadata(cfg, "graph")).or_cli()?;
    writeln!(out, "{} robots, {} edges, {} cliques", g.graph.nodes.len(), g.graph.edges.len(), g.cliques.len())
        .map_err(io_err)?;
    for c in &g.cliques {
        writeln!(out, "  {}", c.members.join(", ")).map_err(io_err)?;
    }
    Ok(())
}

fn run_affect(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<()> {
    header(cfg, "affect");
    let inputs = pipeline::load_inputs(cfg, "affect")?;
    let lexicon = pipeline::load_lexicon(cfg, "affect")?;
    let stage = pipeline::affect_stage(&inputs, &lexicon, cfg.grain)?;
    let mut w = pipeline::writer(cfg)?;
    emit_tables(
        &mut w,
        TableInputs {
            affect: Some(&stage.table),
            ..Default::default()
        },
    )
    .or_cli()?;
    let mut meta = pipeline::metadata(cfg, "affect");
    meta.push(("coverage".into(), format!("{:.4}", stage.coverage)));
    w.finish(meta).or_cli()?;
    writeln!(
        out,
        "coverage {:.1}%, {} rows, {} omitted",
        100.0 * stage.coverage,
        stage.table.rows.len(),
        stage.table.omitted.len()
    )
    .map_err(io_err)?;
    Ok(())
}

fn run_lme(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<()> {
    header(cfg, "lme");
    let inputs = pipeline::load_inputs(cfg, "lme")?;
    let lexicon = pipeline::load_lexicon(cfg, "lme")?;
    let stage = pipeline::affect_stage(&inputs, &lexicon, cfg.grain)?;
    let lme = pipeline::lme_stage(&inputs, &stage.table)?;
    let mut w = pipeline::writer(cfg)?;
    emit_tables(
        &mut w,
        TableInputs {
            fits: Some(&lme.fits),
            ..Default::default()
        },
    )
    .or_cli()?;
    emit_figures(
        &mut w,
        FigureInputs {
            attitude_points: Some(&lme.points),
            fits: &lme.fits,
            ..Default::default()
        },
    )
    .or_cli()?;
    w.finish(pipeline::metadata(cfg, "lme")).or_cli()?;
    for f in &lme.fits {
        writeln!(
            out,
            "{:<9} beta1 {:.4} sigma_u2 {:.4} {}",
            f.dimension.as_str(),
            f.full.beta1.unwrap_or(f64::NAN),
            f.full.sigma_u2,
            f.lrt
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn run_humandist(cfg: &PipelineConfig, out: &mut dyn Write) -> Result<()> {
    header(cfg, "humandist");
    let inputs = pipeline::load_inputs(cfg, "humandist")?;
    cfg.embeddings_path("humandist")?;
    let lexicon = pipeline::load_lexicon(cfg, "humandist")?;
    let vocab = pipeline::vocabulary(&inputs, Some(&lexicon), &cfg.target_word);
    let store = pipeline::load_store(cfg, "humandist", &vocab)?;
    let vectors = bodyimage_core::semantics::robot_vectors(&inputs.dataset, &inputs.rules, &store).or_cli()?;
    write!(out, "{}", pipeline::target_report(&vectors, &lexicon, &store, cfg)).map_err(io_err)?;
    let human = pipeline::human_stage(&inputs, &vectors, &lexicon, &store, cfg)?;
    let mut w = pipeline::writer(cfg)?;
    emit_tables(
        &mut w,
        TableInputs {
            standardized: Some(&human.rows),
            ..Default::default()
        },
    )
    .or_cli()?;
    emit_figures(
        &mut w,
        FigureInputs {
            standardized: Some(&human.rows),
            ..Default::default()
        },
    )
    .or_cli()?;
    let mut meta = pipeline::metadata(cfg, "humandist");
    meta.push(("mask_width".into(), format!("{:.6}", human.width)));
    w.finish(meta).or_cli()?;
    writeln!(out, "standardized {} robots", human.rows.len()).map_err(io_err)?;
    Ok(())
}

fn run_report(a: ReportArgs, out: &mut dyn Write) -> Result<()> {
    let (checked, bad) = pipeline::verify_bundle(&a.dir)?;
    if bad.is_empty() {
        writeln!(out, "{checked} files verified").map_err(io_err)?;
        Ok(())
    } else {
        Err(CliError::analysis(
            "report.digest_mismatch",
            format!("{} of {checked} files missing or changed: {}", bad.len(), bad.join(", ")),
        ))
    }
}
