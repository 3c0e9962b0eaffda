//! Analysis artifacts: CSV tables, a DOT graph and two SVG figure files,
//! all listed with SHA-256 digests in `manifest.txt`.
//!
//! Row orders: `frequency.csv` by count descending then word;
//! `affect_<grain>.csv` by key; `lme_fits.csv` by dimension (valence,
//! arousal, dominance) with the full model first; `clusters.csv` by cluster
//! then robot; `cliques.csv` by clique then member; `standardized_affect.csv`
//! in manifest order.
//!
//! SVG schema: each panel is a `<g class="panel" data-dimension=...>` with
//! `<line class="axis">` axes, one `<circle class="marker">` per data point
//! and, in the attitude figure, one `<line class="fit">` that carries
//! `stroke-dasharray` when its test is not significant.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::affect::{AffectTable, Dimension, Grain};
use crate::corpus::RobotManifest;
use crate::lme::AttitudeAffectFit;
use crate::semantics::{BodyGraph, Clique, ClusterAssignment, StandardizedAffect};
use crate::ErrorCode;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const ALPHA: f64 = 0.05;

/// Colours for cluster labels 1, 2, ...; reused cyclically.
const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl ErrorCode for ReportError {
    fn code(&self) -> &'static str {
        match self {
            ReportError::Io { .. } => "report.io",
        }
    }
}

/// Six significant digits, `%.6g` style.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn frequency_csv(frequency: &[(String, usize)]) -> String {
    let mut out = String::from("rank,word,count\n");
    for (i, (word, count)) in frequency.iter().enumerate() {
        let _ = writeln!(out, "{},{},{count}", i + 1, csv_field(word));
    }
    out
}

pub fn affect_file_name(grain: Grain) -> String {
    format!("affect_{}.csv", grain.as_str())
}

pub fn affect_csv(table: &AffectTable) -> String {
    let keys: &[&str] = match table.grain {
        Grain::Participant => &["participant"],
        Grain::ParticipantRobot => &["participant", "robot"],
        Grain::Robot => &["robot"],
    };
    let mut out = format!("{},valence,arousal,dominance,found,total\n", keys.join(","));
    for row in &table.rows {
        let mut fields = Vec::new();
        if let Some(p) = &row.key.participant {
            fields.push(csv_field(p));
        }
        if let Some(r) = &row.key.robot {
            fields.push(csv_field(r));
        }
        for d in Dimension::ALL {
            fields.push(fmt_num(row.score.get(d)));
        }
        fields.push(row.found.to_string());
        fields.push(row.total.to_string());
        out += &fields.join(",");
        out.push('\n');
    }
    out
}

pub fn fits_csv(fits: &[AttitudeAffectFit]) -> String {
    let mut out = String::from("model,dimension,beta0,beta1,sigma_u2,sigma2,loglik,chi2,df,p\n");
    let mut sorted: Vec<&AttitudeAffectFit> = fits.iter().collect();
    sorted.sort_by_key(|f| f.dimension);
    for f in sorted {
        for (model, fit) in [("full", &f.full), ("null", &f.null)] {
            let _ = writeln!(
                out,
                "{model},{},{},{},{},{},{},{},{},{}",
                f.dimension,
                fmt_num(fit.beta0),
                fit.beta1.map(fmt_num).unwrap_or_default(),
                fmt_num(fit.sigma_u2),
                fmt_num(fit.sigma2),
                fmt_num(fit.loglik),
                fmt_num(f.lrt.chi2),
                f.lrt.df,
                fmt_num(f.lrt.p),
            );
        }
    }
    out
}

pub fn clusters_csv(clusters: &ClusterAssignment) -> String {
    let mut rows: Vec<(usize, &str)> = clusters.labels.iter().map(|(id, &l)| (l, id.as_str())).collect();
    rows.sort();
    let mut out = String::from("robot,cluster\n");
    for (label, id) in rows {
        let _ = writeln!(out, "{},{label}", csv_field(id));
    }
    out
}

pub fn cliques_csv(cliques: &[Clique]) -> String {
    let mut out = String::from("clique,robot\n");
    for (i, c) in cliques.iter().enumerate() {
        for m in &c.members {
            let _ = writeln!(out, "{},{}", i + 1, csv_field(m));
        }
    }
    out
}

pub fn standardized_csv(rows: &[StandardizedAffect]) -> String {
    let mut out = String::from("robot,human_distance");
    for prefix in ["raw", "baseline", "standardized"] {
        for d in Dimension::ALL {
            let _ = write!(out, ",{prefix}_{d}");
        }
    }
    out += ",baseline_words,window_low,window_high\n";
    for r in rows {
        let mut fields = vec![csv_field(&r.robot_id), fmt_num(r.human_distance)];
        for score in [&r.raw, &r.baseline, &r.standardized] {
            fields.extend(Dimension::ALL.iter().map(|&d| fmt_num(score.get(d))));
        }
        fields.push(r.baseline_word_count.to_string());
        fields.push(fmt_num(r.window.0));
        fields.push(fmt_num(r.window.1));
        out += &fields.join(",");
        out.push('\n');
    }
    out
}

/// Undirected body graph with nodes coloured by cluster and each clique
/// listed as a commented subgraph.
pub fn body_graph_dot(
    graph: &BodyGraph,
    clusters: Option<&ClusterAssignment>,
    cliques: &[Clique],
    manifest: &RobotManifest,
) -> String {
    let mut out = String::from("graph body_image {\n  layout=circo;\n  node [shape=ellipse, style=filled];\n");
    for id in &graph.nodes {
        let label = manifest.display_name(id);
        match clusters.and_then(|c| c.labels.get(id)) {
            Some(&l) => {
                let colour = PALETTE[(l - 1) % PALETTE.len()];
                let _ = writeln!(
                    out,
                    "  {} [label={}, cluster={l}, fillcolor=\"{colour}\"];",
                    dot_id(id),
                    dot_id(label)
                );
            }
            None => {
                let _ = writeln!(out, "  {} [label={}, fillcolor=\"#ffffff\"];", dot_id(id), dot_id(label));
            }
        }
    }
    for (i, c) in cliques.iter().enumerate() {
        let _ = writeln!(out, "  subgraph clique_{} {{", i + 1);
        let _ = writeln!(out, "    // {}-clique: {}", c.size(), c.members.join(", "));
        let members: Vec<String> = c.members.iter().map(|m| format!("{};", dot_id(m))).collect();
        let _ = writeln!(out, "    {}", members.join(" "));
        out += "  }\n";
    }
    for (a, b) in &graph.edges {
        let _ = writeln!(out, "  {} -- {};", dot_id(a), dot_id(b));
    }
    out += "}\n";
    out
}

/// One scatter panel.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPanel {
    pub dimension: Dimension,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional `(intercept, slope, significant)` fitted line.
    pub fit: Option<(f64, f64, bool)>,
    /// Optional per-point tooltip.
    pub labels: Vec<String>,
}

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 45.0;

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// Panels side by side in one SVG document.
pub fn scatter_svg(title: &str, panels: &[ScatterPanel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let height = PANEL_H + 30.0;
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        width / 2.0,
        xml_escape(title)
    );
    for (i, p) in panels.iter().enumerate() {
        let x0 = i as f64 * PANEL_W;
        let (left, right) = (x0 + MARGIN, x0 + PANEL_W - 10.0);
        let (top, bottom) = (30.0 + 10.0, 30.0 + PANEL_H - MARGIN);
        let (xmin, xmax) = range(p.points.iter().map(|q| q.0));
        let (ymin, ymax) = range(p.points.iter().map(|q| q.1));
        let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * (right - left);
        let sy = |y: f64| bottom - (y - ymin) / (ymax - ymin) * (bottom - top);
        let _ = writeln!(out, "<g class=\"panel\" data-dimension=\"{}\">", p.dimension);
        let _ = writeln!(
            out,
            "<line class=\"axis\" x1=\"{left:.2}\" y1=\"{bottom:.2}\" x2=\"{right:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>"
        );
        let _ = writeln!(
            out,
            "<line class=\"axis\" x1=\"{left:.2}\" y1=\"{top:.2}\" x2=\"{left:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>"
        );
        for (v, anchor_x, anchor) in [(xmin, left, "start"), (xmax, right, "end")] {
            let _ = writeln!(
                out,
                "<text class=\"tick\" x=\"{anchor_x:.2}\" y=\"{:.2}\" text-anchor=\"{anchor}\">{}</text>",
                bottom + 14.0,
                fmt_tick(v)
            );
        }
        for (v, y) in [(ymin, bottom), (ymax, top + 8.0)] {
            let _ = writeln!(
                out,
                "<text class=\"tick\" x=\"{:.2}\" y=\"{y:.2}\" text-anchor=\"end\">{}</text>",
                left - 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            out,
            "<text class=\"label\" x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            (left + right) / 2.0,
            bottom + 30.0,
            xml_escape(&p.x_label)
        );
        let _ = writeln!(
            out,
            "<text class=\"label\" transform=\"translate({:.2} {:.2}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
            x0 + 12.0,
            (top + bottom) / 2.0,
            xml_escape(&p.y_label)
        );
        for (k, &(x, y)) in p.points.iter().enumerate() {
            match p.labels.get(k) {
                Some(l) => {
                    let _ = writeln!(
                        out,
                        "<circle class=\"marker\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#4477aa\" fill-opacity=\"0.6\"><title>{}</title></circle>",
                        sx(x),
                        sy(y),
                        xml_escape(l)
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "<circle class=\"marker\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#4477aa\" fill-opacity=\"0.6\"/>",
                        sx(x),
                        sy(y)
                    );
                }
            }
        }
        if let Some((b0, b1, significant)) = p.fit {
            let dash = if significant { "" } else { " stroke-dasharray=\"6 4\"" };
            let _ = writeln!(
                out,
                "<line class=\"fit\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#cc3311\" stroke-width=\"2\"{dash}/>",
                sx(xmin),
                sy(b0 + b1 * xmin),
                sx(xmax),
                sy(b0 + b1 * xmax)
            );
        }
        out += "</g>\n";
    }
    out += "</svg>\n";
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Attitude against each affect dimension, one panel per fit.
pub fn attitude_affect_panels(points: &BTreeMap<Dimension, Vec<(f64, f64)>>, fits: &[AttitudeAffectFit]) -> Vec<ScatterPanel> {
    Dimension::ALL
        .iter()
        .filter_map(|&d| {
            let pts = points.get(&d)?;
            let fit = fits.iter().find(|f| f.dimension == d);
            Some(ScatterPanel {
                dimension: d,
                x_label: d.as_str().to_string(),
                y_label: "attitude".into(),
                points: pts.clone(),
                fit: fit.map(|f| (f.full.beta0, f.full.beta1.unwrap_or(0.0), f.lrt.significant(ALPHA))),
                labels: Vec::new(),
            })
        })
        .collect()
}

/// Standardized affect against human distance, one marker per robot.
pub fn human_distance_panels(rows: &[StandardizedAffect]) -> Vec<ScatterPanel> {
    Dimension::ALL
        .iter()
        .map(|&d| ScatterPanel {
            dimension: d,
            x_label: "human distance".into(),
            y_label: format!("standardized {d}"),
            points: rows.iter().map(|r| (r.human_distance, r.standardized.get(d))).collect(),
            fit: None,
            labels: rows.iter().map(|r| r.robot_id.clone()).collect(),
        })
        .collect()
}

/// Files written so far and their digests.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub dir: PathBuf,
    pub metadata: Vec<(String, String)>,
    /// File name to lowercase hex SHA-256, in name order.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files into one directory and records their digests.
#[derive(Debug)]
pub struct ReportWriter {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl ReportWriter {
    pub fn create(dir: &Path) -> Result<Self, ReportError> {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, content: &[u8]) -> Result<(), ReportError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.files.insert(name.to_string(), sha256_hex(content));
        Ok(())
    }

    /// Writes `manifest.txt`: `# key: value` metadata lines, then
    /// `<sha256>  <file>` per file.
    pub fn finish(mut self, metadata: Vec<(String, String)>) -> Result<ReportBundle, ReportError> {
        let mut text = String::new();
        for (k, v) in &metadata {
            let _ = writeln!(text, "# {k}: {}", v.replace('\n', " "));
        }
        for (name, digest) in &self.files {
            let _ = writeln!(text, "{digest}  {name}");
        }
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.files.remove(MANIFEST_FILE);
        Ok(ReportBundle {
            dir: self.dir,
            metadata,
            files: self.files,
        })
    }
}

/// Inputs of [`emit_tables`]; absent stages produce no file.
#[derive(Debug, Default, Clone, Copy)]
pub struct TableInputs<'a> {
    pub frequency: Option<&'a [(String, usize)]>,
    pub affect: Option<&'a AffectTable>,
    pub fits: Option<&'a [AttitudeAffectFit]>,
    pub clusters: Option<&'a ClusterAssignment>,
    pub cliques: Option<&'a [Clique]>,
    pub standardized: Option<&'a [StandardizedAffect]>,
}

pub fn emit_tables(writer: &mut ReportWriter, inputs: TableInputs) -> Result<(), ReportError> {
    if let Some(f) = inputs.frequency {
        writer.write("frequency.csv", frequency_csv(f).as_bytes())?;
    }
    if let Some(t) = inputs.affect {
        writer.write(&affect_file_name(t.grain), affect_csv(t).as_bytes())?;
    }
    if let Some(f) = inputs.fits {
        writer.write("lme_fits.csv", fits_csv(f).as_bytes())?;
    }
    if let Some(c) = inputs.clusters {
        writer.write("clusters.csv", clusters_csv(c).as_bytes())?;
    }
    if let Some(c) = inputs.cliques {
        writer.write("cliques.csv", cliques_csv(c).as_bytes())?;
    }
    if let Some(s) = inputs.standardized {
        writer.write("standardized_affect.csv", standardized_csv(s).as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FigureInputs<'a> {
    pub manifest: Option<&'a RobotManifest>,
    pub graph: Option<&'a BodyGraph>,
    pub clusters: Option<&'a ClusterAssignment>,
    pub cliques: &'a [Clique],
    pub attitude_points: Option<&'a BTreeMap<Dimension, Vec<(f64, f64)>>>,
    pub fits: &'a [AttitudeAffectFit],
    pub standardized: Option<&'a [StandardizedAffect]>,
}

pub fn emit_figures(writer: &mut ReportWriter, inputs: FigureInputs) -> Result<(), ReportError> {
    if let (Some(graph), Some(manifest)) = (inputs.graph, inputs.manifest) {
        let dot = body_graph_dot(graph, inputs.clusters, inputs.cliques, manifest);
        writer.write("body_graph.dot", dot.as_bytes())?;
    }
    if let Some(points) = inputs.attitude_points {
        let svg = scatter_svg(
            "Attitude against word affect",
            &attitude_affect_panels(points, inputs.fits),
        );
        writer.write("fig_attitude_affect.svg", svg.as_bytes())?;
    }
    if let Some(rows) = inputs.standardized {
        let svg = scatter_svg("Standardized affect against human distance", &human_distance_panels(rows));
        writer.write("fig_human_distance.svg", svg.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::{AffectKey, AffectRow, AffectScore};
    use crate::lme::{LmeFit, LrtResult};

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(15.577), "15.577");
        assert_eq!(fmt_num(0.123456789), "0.123457");
        assert_eq!(fmt_num(-1234567.0), "-1.23457e+06");
        assert_eq!(fmt_num(123456.4), "123456");
        assert_eq!(fmt_num(999999.7), "1e+06");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(0.00001234), "1.234e-05");
        assert_eq!(fmt_num(2.5e-300), "2.5e-300");
    }

    #[test]
    fn frequency_rows() {
        let csv = frequency_csv(&[("toy".into(), 42), ("cute".into(), 30)]);
        assert_eq!(csv, "rank,word,count\n1,toy,42\n2,cute,30\n");
        assert_eq!(frequency_csv(&[("a,b".into(), 1)]), "rank,word,count\n1,\"a,b\",1\n");
    }

    #[test]
    fn empty_cliques_header_only() {
        assert_eq!(cliques_csv(&[]), "clique,robot\n");
        let c = Clique {
            members: vec!["a".into(), "b".into()],
        };
        assert_eq!(cliques_csv(&[c]), "clique,robot\n1,a\n1,b\n");
    }

    fn fit(beta1: Option<f64>) -> LmeFit {
        LmeFit {
            beta0: 1.0,
            beta1,
            sigma_u2: 0.1,
            sigma2: 0.5,
            theta: 0.2,
            loglik: -100.0,
            converged: true,
            identifiable: true,
            n_rows: 10,
            n_groups: 2,
        }
    }

    fn aaf(d: Dimension, p: f64) -> AttitudeAffectFit {
        AttitudeAffectFit {
            dimension: d,
            grain: Grain::ParticipantRobot,
            full: fit(Some(0.5)),
            null: fit(None),
            lrt: LrtResult { chi2: 1.5, df: 1, p },
            skipped_rows: 0,
        }
    }

    #[test]
    fn fits_table_has_six_rows() {
        let fits: Vec<_> = [Dimension::Dominance, Dimension::Valence, Dimension::Arousal]
            .into_iter()
            .map(|d| aaf(d, 0.2))
            .collect();
        let csv = fits_csv(&fits);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[1], "full,valence,1,0.5,0.1,0.5,-100,1.5,1,0.2");
        assert_eq!(lines[2], "null,valence,1,,0.1,0.5,-100,1.5,1,0.2");
        assert!(lines[5].starts_with("full,dominance"));
    }

    #[test]
    fn affect_columns_follow_grain() {
        let table = AffectTable {
            grain: Grain::Robot,
            rows: vec![AffectRow {
                key: AffectKey {
                    participant: None,
                    robot: Some("aibo".into()),
                },
                score: AffectScore::new(0.5, 0.25, 0.125),
                found: 5,
                total: 6,
            }],
            omitted: vec![],
        };
        assert_eq!(affect_csv(&table), "robot,valence,arousal,dominance,found,total\naibo,0.5,0.25,0.125,5,6\n");
        assert_eq!(affect_file_name(Grain::ParticipantRobot), "affect_participant_robot.csv");
    }

    #[test]
    fn dot_edges_and_colours() {
        let manifest = RobotManifest::bundled();
        let graph = BodyGraph::undirected(
            vec!["aibo".into(), "eilik".into(), "pepper".into()],
            [("eilik".to_string(), "aibo".to_string())],
        );
        let mut labels = BTreeMap::new();
        labels.insert("aibo".to_string(), 1);
        labels.insert("eilik".to_string(), 1);
        labels.insert("pepper".to_string(), 2);
        let clusters = ClusterAssignment {
            labels,
            n_clusters: 2,
            merges: vec![],
            linkage: "average",
        };
        let clique = Clique {
            members: vec!["aibo".into(), "eilik".into()],
        };
        let dot = body_graph_dot(&graph, Some(&clusters), &[clique], &manifest);
        assert!(dot.contains("\"aibo\" -- \"eilik\";"));
        assert!(dot.contains("cluster=2, fillcolor=\"#d95f02\""));
        assert!(dot.contains("// 2-clique: aibo, eilik"));
        assert!(dot.contains("layout=circo"));
        assert_eq!(dot.matches(" -- ").count(), 1);
    }

    #[test]
    fn insignificant_fit_is_dashed() {
        let mut points = BTreeMap::new();
        for d in Dimension::ALL {
            points.insert(d, vec![(0.1, 1.0), (0.5, 2.0), (0.9, 2.5)]);
        }
        let fits = vec![
            aaf(Dimension::Valence, 0.001),
            aaf(Dimension::Arousal, 0.4),
            aaf(Dimension::Dominance, 0.01),
        ];
        let svg = scatter_svg("t", &attitude_affect_panels(&points, &fits));
        assert_eq!(svg.matches("class=\"marker\"").count(), 9);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        let arousal = svg.split("data-dimension=\"arousal\"").nth(1).unwrap();
        let arousal = arousal.split("</g>").next().unwrap();
        assert!(arousal.contains("stroke-dasharray"));
    }

    #[test]
    fn writer_records_digests() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ReportWriter::create(&dir.path().join("out")).unwrap();
        w.write("a.csv", b"x\n").unwrap();
        let bundle = w
            .finish(vec![("seed".into(), "1".into())])
            .unwrap();
        let manifest = fs::read_to_string(dir.path().join("out").join(MANIFEST_FILE)).unwrap();
        assert_eq!(
            manifest,
            format!("# seed: 1\n{}  a.csv\n", sha256_hex(b"x\n"))
        );
        assert_eq!(bundle.files.len(), 1);
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
