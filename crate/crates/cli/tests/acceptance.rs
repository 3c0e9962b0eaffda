//! Acceptance criteria, one printed PASS/FAIL line each. Runs without the
//! libtest harness so the criteria execute sequentially and their timings
//! are not skewed by each other.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use bodyimage_core::affect::{affect_table, AffectScore, Dimension, Grain};
use bodyimage_core::corpus::{load_dataset, RobotManifest};
use bodyimage_core::embedding::Vector;
use bodyimage_core::lme::{chi2_cdf, fit_attitude_affect, fit_lme, fit_lme_at, lrt, LmeData};
use bodyimage_core::normalize::NormalizationRules;
use bodyimage_core::report::ALPHA;
use bodyimage_core::semantics::{
    cluster, enumerate_cliques, knn_graph, similarity_matrix, standardize_affect, BaselineIndex, BodyGraph,
    RobotVector, SemanticsError, Standardization,
};
use bodyimage_core::synth::{fixture_embeddings, fixture_lexicon, synth_dataset, SynthConfig};
use bodyimage_oracles as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Sim {
    y: Vec<f64>,
    x: Vec<f64>,
    groups: Vec<String>,
}

/// Balanced random-intercept data: `n_groups` groups of `per_group` rows,
/// intercept 1.5, covariate standard normal.
fn simulate(seed: u64, n_groups: usize, per_group: usize, beta1: f64, sigma_u: f64, sigma: f64) -> Sim {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).unwrap();
    let (mut y, mut x, mut groups) = (vec![], vec![], vec![]);
    for g in 0..n_groups {
        let u = sigma_u * std.sample(&mut rng);
        for _ in 0..per_group {
            let xi: f64 = std.sample(&mut rng);
            y.push(1.5 + beta1 * xi + u + sigma * std.sample(&mut rng));
            x.push(xi);
            groups.push(format!("g{g:02}"));
        }
    }
    Sim { y, x, groups }
}

fn data(s: &Sim) -> LmeData {
    LmeData::from_columns(&s.y, Some(&s.x), &s.groups).unwrap()
}

fn lme_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut elapsed = Duration::ZERO;
    for seed in 1..=5 {
        let s = simulate(seed, 30, 10, 0.5, 0.3, 0.5);
        let d = data(&s);
        let start = Instant::now();
        let fit = fit_lme(&d, true).map_err(|e| e.to_string())?;
        elapsed += start.elapsed();
        let grid = oracle::grid_ml(&s.y, Some(&s.x), &s.groups, 1e6);
        for (a, b) in [
            (fit.beta0, grid.beta0),
            (fit.beta1.unwrap(), grid.beta1.unwrap()),
            (fit.sigma_u2, grid.sigma_u2),
            (fit.sigma2, grid.sigma2),
        ] {
            worst = worst.max((a - b).abs());
        }
    }

    // sigma_u = 0: noise and covariate centred within groups leave no
    // between-group variation, so the ML optimum is the boundary.
    let mut s = simulate(5, 30, 10, 0.5, 0.0, 0.5);
    for g in 0..30 {
        let r = g * 10..g * 10 + 10;
        let xm = s.x[r.clone()].iter().sum::<f64>() / 10.0;
        let noise: Vec<f64> = r.clone().map(|i| s.y[i] - 1.5 - 0.5 * s.x[i]).collect();
        let nm = noise.iter().sum::<f64>() / 10.0;
        for (k, i) in r.enumerate() {
            s.x[i] -= xm;
            s.y[i] = 1.5 + 0.5 * s.x[i] + noise[k] - nm;
        }
    }
    let start = Instant::now();
    let boundary = fit_lme(&data(&s), true).map_err(|e| e.to_string())?;
    elapsed += start.elapsed();
    let ols = oracle::ols(&s.y, Some(&s.x));
    let forced = fit_lme_at(&data(&s), true, 0.0).map_err(|e| e.to_string())?;
    let mut ols_err: f64 = 0.0;
    for f in [&boundary, &forced] {
        ols_err = ols_err
            .max((f.beta0 - ols.beta0).abs())
            .max((f.beta1.unwrap() - ols.beta1.unwrap()).abs())
            .max((f.sigma2 - ols.sigma2).abs());
    }
    let exact = boundary.theta == 0.0 && boundary.sigma_u2 == 0.0 && ols_err <= 1e-12;
    check(
        worst <= 1e-4 && exact && elapsed < Duration::from_secs(1),
        format!(
            "max |fit - grid| {worst:.2e} (tol 1e-4), theta at sigma_u=0 {}, max |fit - OLS| {ols_err:.1e}, fit time {:.3}s (< 1s)",
            boundary.theta,
            elapsed.as_secs_f64()
        ),
    )
}

fn lrt_calibration() -> Outcome {
    let start = Instant::now();
    let rejections = |beta1: f64, reps: u64, base: u64| -> Result<usize, String> {
        let mut n = 0;
        for r in 0..reps {
            let s = simulate(base + r, 30, 10, beta1, 0.3, 0.5);
            let d = data(&s);
            let full = fit_lme(&d, true).map_err(|e| e.to_string())?;
            let null = fit_lme(&d, false).map_err(|e| e.to_string())?;
            if lrt(&full, &null).map_err(|e| e.to_string())?.significant(ALPHA) {
                n += 1;
            }
        }
        Ok(n)
    };
    let size = rejections(0.0, 1000, 10_000)? as f64 / 1000.0;
    let power = rejections(0.5, 200, 20_000)? as f64 / 200.0;
    let secs = start.elapsed().as_secs_f64();
    check(
        (0.03..=0.07).contains(&size) && power >= 0.8 && secs < 60.0,
        format!("null rejection rate {size:.3} (in [0.03, 0.07]), power {power:.3} (>= 0.8), {secs:.1}s (< 60s)"),
    )
}

fn chi2_accuracy() -> Outcome {
    let ours = chi2_cdf(3.841459, 1).ok_or("chi2 domain")?;
    let numeric = oracle::chi2_cdf_numeric(3.841459, 1);
    let mut monotone = true;
    for df in 1..=4 {
        let mut prev = 0.0;
        for i in 0..1000 {
            let x = 0.05 * i as f64;
            let c = chi2_cdf(x, df).ok_or("chi2 domain")?;
            if c < prev || !(0.0..=1.0).contains(&c) {
                monotone = false;
            }
            prev = c;
        }
    }
    check(
        (ours - 0.95).abs() <= 1e-6 && (numeric - 0.95).abs() <= 1e-6 && (ours - numeric).abs() <= 1e-6 && monotone,
        format!("cdf {ours:.9}, numeric integral {numeric:.9} (tol 1e-6), monotone on 1000-point grid: {monotone}"),
    )
}

fn node(i: usize) -> String {
    format!("n{i:02}")
}

#[allow(clippy::needless_range_loop)]
fn clique_enumeration() -> Outcome {
    let mut mismatches = 0;
    let mut total = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(0.3..0.8);
        let mut adj = [[false; 12]; 12];
        let mut edges = Vec::new();
        for i in 0..12 {
            for j in i + 1..12 {
                if rng.random_bool(p) {
                    adj[i][j] = true;
                    adj[j][i] = true;
                    edges.push((node(i), node(j)));
                }
            }
        }
        let graph = BodyGraph::undirected((0..12).map(node).collect(), edges);
        let ours: BTreeSet<Vec<String>> = enumerate_cliques(&graph, 4)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|c| c.members)
            .collect();
        let brute: BTreeSet<Vec<String>> = oracle::brute_force_cliques(12, &|a, b| adj[a][b], 4)
            .into_iter()
            .map(|c| c.into_iter().map(node).collect())
            .collect();
        total += brute.len();
        if ours != brute {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} of 100 graphs differ from brute force ({total} cliques checked)"),
    )
}

fn random_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<RobotVector> {
    let std = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|i| RobotVector {
            robot_id: node(i),
            vector: Vector::new((0..dim).map(|_| std.sample(rng)).collect()),
            word_count: 6,
        })
        .collect()
}

fn knn_properties() -> Outcome {
    let mut degree_ok = true;
    let mut oracle_ok = true;
    let mut invariant = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let robots = random_vectors(&mut rng, 30, 8);
        let sim = similarity_matrix(&robots).map_err(|e| e.to_string())?;
        let graph = knn_graph(&sim, 3).map_err(|e| e.to_string())?;
        degree_ok &= graph.out_neighbors.len() == 30 && graph.out_neighbors.iter().all(|n| n.len() == 3);
        for (i, nbrs) in graph.out_neighbors.iter().enumerate() {
            let row: Vec<f64> = (0..30).map(|j| sim.get(i, j)).collect();
            let expected: Vec<String> = oracle::top_k(&row, i, 3).into_iter().map(node).collect();
            oracle_ok &= *nbrs == expected;
        }
        let scaled: Vec<RobotVector> = robots
            .iter()
            .map(|r| RobotVector {
                vector: r.vector.scaled(rng.random_range(0.01..100.0)),
                ..r.clone()
            })
            .collect();
        let sim2 = similarity_matrix(&scaled).map_err(|e| e.to_string())?;
        let graph2 = knn_graph(&sim2, 3).map_err(|e| e.to_string())?;
        let argmax_same = graph
            .out_neighbors
            .iter()
            .zip(&graph2.out_neighbors)
            .all(|(a, b)| a[0] == b[0]);
        if argmax_same {
            invariant += 1;
        }
    }
    check(
        degree_ok && oracle_ok && invariant == 100,
        format!(
            "out-degree 3 on all 30 nodes: {degree_ok}, neighbours equal full-sort oracle: {oracle_ok}, argmax unchanged under rescaling in {invariant}/100 trials"
        ),
    )
}

fn baseline_standardization() -> Outcome {
    let lexicon = fixture_lexicon(850, 11);
    let store = fixture_embeddings(&lexicon, 20, 0.6, 12);
    let target = "person";
    let index = BaselineIndex::build(&lexicon, &store, target).map_err(|e| e.to_string())?;
    let entries: Vec<(String, Vec<f64>, [f64; 3])> = lexicon
        .iter()
        .filter_map(|(w, s)| {
            store
                .get(w)
                .map(|v| (w.to_string(), v.as_slice().to_vec(), [s.valence, s.arousal, s.dominance]))
        })
        .collect();
    let t = store.get(target).unwrap().as_slice().to_vec();
    let distances: Vec<f64> = entries.iter().map(|(_, v, _)| oracle::cosine_distance(v, &t)).collect();
    let (lo, hi) = distances
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    let mut self_zero = true;
    let cases = 500;
    for _ in 0..cases {
        let center = rng.random_range(lo..hi);
        let width = rng.random_range(0.0005..0.05);
        let raw = AffectScore::new(rng.random(), rng.random(), rng.random());
        let (count, mean) = oracle::baseline_scan(&entries, target, &t, center, width);
        match standardize_affect("r", raw, center, width, &index, 1, Standardization::Subtract) {
            Ok(row) => {
                let b = row.baseline;
                if row.baseline_word_count != count || [b.valence, b.arousal, b.dominance] != mean {
                    mismatches += 1;
                }
                let again = standardize_affect("r", b, center, width, &index, 1, Standardization::Subtract)
                    .map_err(|e| e.to_string())?;
                let scaled = standardize_affect("r", b, center, width, &index, 1, Standardization::Scaled)
                    .map_err(|e| e.to_string())?;
                for s in [again.standardized, scaled.standardized] {
                    self_zero &= s.valence == 0.0 && s.arousal == 0.0 && s.dominance == 0.0;
                }
            }
            Err(SemanticsError::SparseBaseline { found: 0, .. }) if count == 0 => {}
            Err(_) => mismatches += 1,
        }
    }
    check(
        lexicon.len() <= 1000 && mismatches == 0 && self_zero,
        format!(
            "{mismatches} of {cases} windows differ from full scan over {} words, self-baseline standardizes to zero: {self_zero}",
            entries.len()
        ),
    )
}

fn cluster_recovery() -> Outcome {
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut perfect = 0;
    let fixtures = 20;
    for seed in 0..fixtures {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let dim = 10;
        let centres: Vec<Vec<f64>> = (0..3)
            .map(|c| (0..dim).map(|d| if d % 3 == c { 10.0 } else { 0.0 }).collect())
            .collect();
        let mut robots = Vec::new();
        let mut truth = Vec::new();
        for i in 0..30 {
            let c = rng.random_range(0..3);
            let v: Vec<f64> = centres[c].iter().map(|m| m + 0.5 * std.sample(&mut rng)).collect();
            robots.push(RobotVector {
                robot_id: node(i),
                vector: Vector::new(v),
                word_count: 6,
            });
            truth.push(c);
        }
        let sim = similarity_matrix(&robots).map_err(|e| e.to_string())?;
        let assignment = cluster(&sim, 3).map_err(|e| e.to_string())?;
        let labels: Vec<usize> = (0..30).map(|i| assignment.labels[&node(i)] - 1).collect();
        if oracle::best_permutation_agreement(&labels, &truth) == 1.0 {
            perfect += 1;
        }
    }
    check(
        perfect == fixtures,
        format!("{perfect}/{fixtures} blob fixtures recovered with 100% label agreement"),
    )
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_bodyimage")
}

fn pipeline_determinism() -> Outcome {
    let fx = fixture_dir();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut secs = Vec::new();
    for run in ["a", "b"] {
        let start = Instant::now();
        let status = Command::new(bin())
            .arg("analyze")
            .arg("--responses")
            .arg(fx.join("responses.jsonl"))
            .arg("--embeddings")
            .arg(fx.join("vectors.txt"))
            .arg("--vad")
            .arg(fx.join("vad.tsv"))
            .arg("--out")
            .arg(tmp.path().join(run))
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        secs.push(start.elapsed().as_secs_f64());
        if !status.success() {
            return Err(format!("analyze run {run} exited with {status}"));
        }
    }
    let read_dir = |run: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(tmp.path().join(run))
            .map_err(|e| e.to_string())?
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        Ok(files)
    };
    let (a, b) = (read_dir("a")?, read_dir("b")?);
    let manifest_equal = a.iter().find(|f| f.0 == "manifest.txt") == b.iter().find(|f| f.0 == "manifest.txt")
        && a.iter().any(|f| f.0 == "manifest.txt");
    let slowest = secs.iter().copied().fold(0.0, f64::max);
    check(
        manifest_equal && a == b && slowest < 30.0,
        format!(
            "{} files byte-identical: {}, manifests equal: {manifest_equal}, slowest run {slowest:.2}s (< 30s)",
            a.len(),
            a == b
        ),
    )
}

fn qualitative_pattern() -> Outcome {
    let lexicon = fixture_lexicon(850, 11);
    let rules = NormalizationRules::bundled();
    let mut matches = 0;
    let mut significant = [0usize; 3];
    for seed in 1..=100 {
        let config = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        let (dataset, _) = synth_dataset(&config, &lexicon).map_err(|e| e.to_string())?;
        let table = affect_table(&dataset, &rules, &lexicon, Grain::ParticipantRobot);
        let mut sig = [false; 3];
        for (k, d) in Dimension::ALL.into_iter().enumerate() {
            let fit = fit_attitude_affect(&dataset, &table, d).map_err(|e| e.to_string())?;
            sig[k] = fit.lrt.significant(ALPHA);
            significant[k] += sig[k] as usize;
        }
        if sig == [true, false, true] {
            matches += 1;
        }
    }
    check(
        matches >= 90,
        format!(
            "valence and dominance significant with arousal not in {matches}/100 runs (>= 90); significant counts V {} A {} D {}",
            significant[0], significant[1], significant[2]
        ),
    )
}

const TOKEN: &str = "acceptance-token";

struct Server {
    child: Child,
    base: String,
}

impl Server {
    fn start(data_dir: &Path) -> Result<Self, String> {
        let mut child = Command::new(bin())
            .args(["serve", "--host", "127.0.0.1", "--port", "0", "--admin-token", TOKEN])
            .arg("--data-dir")
            .arg(data_dir)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .map_err(|e| e.to_string())?;
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .ok_or_else(|| format!("unexpected server banner `{}`", line.trim()))?
            .to_string();
        Ok(Self { child, base })
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn post(&self, path: &str, body: Value) -> Result<Value, String> {
        let mut resp = ureq::post(&format!("{}{path}", self.base))
            .send_json(body)
            .map_err(|e| format!("POST {path}: {e}"))?;
        resp.body_mut().read_json().map_err(|e| e.to_string())
    }
}

fn round_trip() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = Server::start(tmp.path())?;
    let created = server.post("/api/session", json!({}))?;
    let id = created["session_id"].as_str().ok_or("no session id")?.to_string();
    let robots: Vec<String> = created["robots"]
        .as_array()
        .ok_or("no robots")?
        .iter()
        .map(|r| r["id"].as_str().unwrap().to_string())
        .collect();
    server.post(&format!("/api/session/{id}/attitude"), json!({"items": [0, 1, 2, 3, 4, 3, 2, 1, 0, 1, 2, 3]}))?;
    let words = |i: usize| json!(["metal", "arm", "cold", "tool", "strong", format!("part{i}")]);
    for (i, robot) in robots.iter().take(5).enumerate() {
        server.post(&format!("/api/session/{id}/association"), json!({"robot": robot, "words": words(i)}))?;
    }

    // kill mid-session, then resume from the persisted log
    server.kill();
    let server = Server::start(tmp.path())?;
    let state: Value = ureq::get(&format!("{}/api/session/{id}", server.base))
        .call()
        .map_err(|e| e.to_string())?
        .body_mut()
        .read_json()
        .map_err(|e| e.to_string())?;
    let resumed = state["answered"] == json!(5);
    for (i, robot) in robots.iter().enumerate().skip(5) {
        server.post(&format!("/api/session/{id}/association"), json!({"robot": robot, "words": words(i)}))?;
    }
    server.kill();

    // a second restart must still export the complete session
    let server = Server::start(tmp.path())?;
    let export = ureq::get(&format!("{}/api/export", server.base))
        .header("Authorization", &format!("Bearer {TOKEN}"))
        .call()
        .map_err(|e| e.to_string())?
        .body_mut()
        .read_to_string()
        .map_err(|e| e.to_string())?;
    server.kill();
    let path = tmp.path().join("exported.jsonl");
    fs::write(&path, export).map_err(|e| e.to_string())?;
    let dataset = load_dataset(&path, &RobotManifest::bundled()).map_err(|e| e.to_string())?;
    let pid = created["participant_id"].as_str().unwrap_or_default();
    let ok = resumed
        && dataset.attitudes().len() == 1
        && dataset.associations().len() == 10
        && dataset.associations().iter().all(|a| a.words().len() == 6 && a.participant_id() == pid)
        && dataset.is_complete(pid);
    check(
        ok,
        format!(
            "resumed after kill with {} answered, re-ingested {} attitude and {} associations of 6 words",
            state["answered"],
            dataset.attitudes().len(),
            dataset.associations().len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("lme-correctness", lme_correctness),
        ("lrt-calibration", lrt_calibration),
        ("chi2-accuracy", chi2_accuracy),
        ("clique-enumeration", clique_enumeration),
        ("knn-graph", knn_properties),
        ("baseline-standardization", baseline_standardization),
        ("cluster-recovery", cluster_recovery),
        ("pipeline-determinism", pipeline_determinism),
        ("qualitative-pattern", qualitative_pattern),
        ("export-ingest-round-trip", round_trip),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let (tag, detail) = match criterion() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{:>2}] {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
