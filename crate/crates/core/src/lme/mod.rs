//! Random-intercept linear mixed models fitted by maximum likelihood, and
//! likelihood-ratio tests between nested fixed-effect structures.
//!
//! Model: `y = b0 + b1 x + u[group] + e`, `u ~ N(0, s_u2)`, `e ~ N(0, s2)`.
//! With `theta = s_u2 / s2`, each group's scaled covariance block is
//! `I + theta 11'`, whose inverse is `I - theta / (1 + theta n) 11'` and whose
//! log-determinant is `ln(1 + theta n)`. For fixed `theta` the fixed effects
//! and `s2` have closed forms, so the likelihood is maximized by a 1-D search
//! over `theta`.

pub mod special;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::affect::{AffectTable, Dimension, Grain};
use crate::corpus::StudyDataset;
use crate::ErrorCode;

pub use special::{chi2_cdf, chi2_sf};

pub const THETA_MAX: f64 = 1e6;
const THETA_TOL: f64 = 1e-10;
const GRID_MIN_EXP: f64 = -8.0;
const GRID_STEP_EXP: f64 = 0.25;
const MAX_GOLDEN_ITER: usize = 500;

#[derive(Debug, Error)]
pub enum LmeError {
    #[error("no rows")]
    Empty,
    #[error("row {0} has a non-finite value")]
    NonFinite(usize),
    #[error("row {0} is missing the covariate")]
    MissingCovariate(usize),
    #[error("{rows} rows cannot identify {params} fixed effects")]
    TooFewRows { rows: usize, params: usize },
    #[error("degenerate design: the covariate is constant")]
    DegenerateDesign,
    #[error("the model fits the data exactly; residual variance is zero")]
    PerfectFit,
    #[error("models are not nested: {0}")]
    NotNested(String),
    #[error("fit did not converge")]
    NotConverged,
    #[error("chi-square cdf needs x >= 0 and df >= 1 (got x = {x}, df = {df})")]
    Chi2Domain { x: f64, df: u32 },
    #[error("need at least 2 robots, found {0}")]
    TooFewGroups(usize),
    #[error("affect table at grain `{0}` cannot be paired with participant attitudes")]
    UnsupportedGrain(Grain),
}

impl ErrorCode for LmeError {
    fn code(&self) -> &'static str {
        match self {
            LmeError::Empty => "lme.empty",
            LmeError::NonFinite(_) => "lme.non_finite",
            LmeError::MissingCovariate(_) => "lme.missing_covariate",
            LmeError::TooFewRows { .. } => "lme.too_few_rows",
            LmeError::DegenerateDesign => "lme.degenerate_design",
            LmeError::PerfectFit => "lme.perfect_fit",
            LmeError::NotNested(_) => "lme.not_nested",
            LmeError::NotConverged => "lme.not_converged",
            LmeError::Chi2Domain { .. } => "lme.chi2_domain",
            LmeError::TooFewGroups(_) => "lme.too_few_groups",
            LmeError::UnsupportedGrain(_) => "lme.unsupported_grain",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmeRow {
    pub y: f64,
    pub x: Option<f64>,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmeData {
    rows: Vec<LmeRow>,
    /// Row indices per group, groups in sorted order.
    groups: Vec<Vec<usize>>,
    group_names: Vec<String>,
}

impl LmeData {
    pub fn new(rows: Vec<LmeRow>) -> Result<Self, LmeError> {
        if rows.is_empty() {
            return Err(LmeError::Empty);
        }
        let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in rows.iter().enumerate() {
            if !r.y.is_finite() || r.x.is_some_and(|x| !x.is_finite()) {
                return Err(LmeError::NonFinite(i));
            }
            by_group.entry(r.group.as_str()).or_default().push(i);
        }
        let group_names = by_group.keys().map(|g| g.to_string()).collect();
        let groups = by_group.into_values().collect();
        Ok(Self {
            rows,
            groups,
            group_names,
        })
    }

    pub fn from_columns(y: &[f64], x: Option<&[f64]>, groups: &[String]) -> Result<Self, LmeError> {
        let rows = y
            .iter()
            .zip(groups)
            .enumerate()
            .map(|(i, (&y, g))| LmeRow {
                y,
                x: x.map(|x| x[i]),
                group: g.clone(),
            })
            .collect();
        Self::new(rows)
    }

    pub fn rows(&self) -> &[LmeRow] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    /// Row indices of each group, in the order of [`LmeData::group_names`].
    pub fn group_rows(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmeFit {
    pub beta0: f64,
    pub beta1: Option<f64>,
    pub sigma_u2: f64,
    pub sigma2: f64,
    pub theta: f64,
    pub loglik: f64,
    pub converged: bool,
    /// False when every group has one row, so `theta` cannot be estimated.
    pub identifiable: bool,
    pub n_rows: usize,
    pub n_groups: usize,
}

impl LmeFit {
    pub fn n_fixed(&self) -> usize {
        1 + usize::from(self.beta1.is_some())
    }

    pub fn at_boundary(&self) -> bool {
        self.theta == 0.0
    }
}

/// Closed-form fixed effects and residual variance at a given `theta`.
#[derive(Debug, Clone, Copy)]
struct Profile {
    beta0: f64,
    beta1: Option<f64>,
    sigma2: f64,
    loglik: f64,
}

struct Design<'a> {
    data: &'a LmeData,
    slope: bool,
    y_mean: f64,
    x_mean: f64,
}

impl<'a> Design<'a> {
    fn new(data: &'a LmeData, slope: bool) -> Result<Self, LmeError> {
        let n = data.n_rows();
        let params = 1 + usize::from(slope);
        if n <= params {
            return Err(LmeError::TooFewRows { rows: n, params });
        }
        let y_mean = data.rows.iter().map(|r| r.y).sum::<f64>() / n as f64;
        let mut x_mean = 0.0;
        if slope {
            for (i, r) in data.rows.iter().enumerate() {
                x_mean += r.x.ok_or(LmeError::MissingCovariate(i))?;
            }
            x_mean /= n as f64;
            let spread = data.rows.iter().map(|r| (r.x.unwrap() - x_mean).abs()).fold(0.0, f64::max);
            if spread <= 1e-12 * x_mean.abs().max(1.0) {
                return Err(LmeError::DegenerateDesign);
            }
        }
        Ok(Self {
            data,
            slope,
            y_mean,
            x_mean,
        })
    }

    fn xc(&self, i: usize) -> f64 {
        self.data.rows[i].x.map_or(0.0, |x| x - self.x_mean)
    }

    fn yc(&self, i: usize) -> f64 {
        self.data.rows[i].y - self.y_mean
    }

    fn profile(&self, theta: f64) -> Result<Profile, LmeError> {
        let n = self.data.n_rows() as f64;
        // normal equations in centred coordinates: [a00 a01; a01 a11] b = [b0 b1]
        let (mut a00, mut a01, mut a11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut logdet = 0.0;
        for g in &self.data.groups {
            let m = g.len() as f64;
            let c = theta / (1.0 + theta * m);
            logdet += (1.0 + theta * m).ln();
            let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
            for &i in g {
                let (x, y) = (self.xc(i), self.yc(i));
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
            }
            a00 += m - c * m * m;
            a01 += sx - c * m * sx;
            a11 += sxx - c * sx * sx;
            r0 += sy - c * m * sy;
            r1 += sxy - c * sx * sy;
        }
        let (b0c, b1) = if self.slope {
            let det = a00 * a11 - a01 * a01;
            if det <= 1e-14 * a00 * a11 {
                return Err(LmeError::DegenerateDesign);
            }
            ((a11 * r0 - a01 * r1) / det, Some((a00 * r1 - a01 * r0) / det))
        } else {
            (r0 / a00, None)
        };
        let mut quad = 0.0;
        for g in &self.data.groups {
            let m = g.len() as f64;
            let c = theta / (1.0 + theta * m);
            let (mut ss, mut s) = (0.0, 0.0);
            for &i in g {
                let r = self.yc(i) - b0c - b1.unwrap_or(0.0) * self.xc(i);
                ss += r * r;
                s += r;
            }
            quad += ss - c * s * s;
        }
        let sigma2 = quad / n;
        if sigma2 <= 0.0 || !sigma2.is_finite() {
            return Err(LmeError::PerfectFit);
        }
        let loglik = -0.5 * n * ((2.0 * PI * sigma2).ln() + 1.0) - 0.5 * logdet;
        Ok(Profile {
            beta0: self.y_mean + b0c - b1.unwrap_or(0.0) * self.x_mean,
            beta1: b1,
            sigma2,
            loglik,
        })
    }

    fn fit_at(&self, theta: f64, converged: bool, identifiable: bool) -> Result<LmeFit, LmeError> {
        let p = self.profile(theta)?;
        Ok(LmeFit {
            beta0: p.beta0,
            beta1: p.beta1,
            sigma_u2: theta * p.sigma2,
            sigma2: p.sigma2,
            theta,
            loglik: p.loglik,
            converged,
            identifiable,
            n_rows: self.data.n_rows(),
            n_groups: self.data.n_groups(),
        })
    }
}

/// Profiled log-likelihood at a fixed variance ratio.
pub fn profiled_loglik(data: &LmeData, include_slope: bool, theta: f64) -> Result<f64, LmeError> {
    Design::new(data, include_slope)?.profile(theta).map(|p| p.loglik)
}

/// Fit with the variance ratio held at `theta` (`0` gives ordinary least squares).
pub fn fit_lme_at(data: &LmeData, include_slope: bool, theta: f64) -> Result<LmeFit, LmeError> {
    let identifiable = data.groups.iter().any(|g| g.len() > 1);
    Design::new(data, include_slope)?.fit_at(theta, true, identifiable)
}

/// Maximum-likelihood fit over `theta` in `[0, THETA_MAX]`.
pub fn fit_lme(data: &LmeData, include_slope: bool) -> Result<LmeFit, LmeError> {
    let design = Design::new(data, include_slope)?;
    if data.groups.iter().all(|g| g.len() == 1) {
        // group and residual variance are confounded
        return design.fit_at(0.0, true, false);
    }

    let mut grid = vec![0.0];
    let mut e = GRID_MIN_EXP;
    while 10f64.powf(e) < THETA_MAX {
        grid.push(10f64.powf(e));
        e += GRID_STEP_EXP;
    }
    grid.push(THETA_MAX);
    let values = grid
        .iter()
        .map(|&t| design.profile(t).map(|p| p.loglik))
        .collect::<Result<Vec<f64>, _>>()?;
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v > values[b] { i } else { b });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];

    let f = |t: f64| design.profile(t).map(|p| p.loglik);
    let (theta, converged) = golden_max(f, lo, hi)?;
    let mut choice = (theta, f(theta)?);
    for cand in [grid[best], lo, hi] {
        let v = f(cand)?;
        if v > choice.1 {
            choice = (cand, v);
        }
    }
    design.fit_at(choice.0, converged, true)
}

fn golden_max<F>(f: F, mut a: f64, mut b: f64) -> Result<(f64, bool), LmeError>
where
    F: Fn(f64) -> Result<f64, LmeError>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..MAX_GOLDEN_ITER {
        if (b - a).abs() <= THETA_TOL * (1.0 + a.abs()) {
            return Ok(((a + b) / 2.0, true));
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(((a + b) / 2.0, false))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrtResult {
    pub chi2: f64,
    pub df: u32,
    pub p: f64,
}

impl LrtResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

impl fmt::Display for LrtResult {
    /// `LRT χ² = 15.577, p < .000` for p below .0005, else `p = .147`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = if self.p < 0.0005 {
            "p < .000".to_string()
        } else {
            let s = format!("{:.3}", self.p);
            format!("p = {}", s.strip_prefix('0').unwrap_or(&s))
        };
        write!(f, "LRT χ² = {:.3}, {p}", self.chi2)
    }
}

pub fn lrt(full: &LmeFit, null: &LmeFit) -> Result<LrtResult, LmeError> {
    if full.n_rows != null.n_rows || full.n_groups != null.n_groups {
        return Err(LmeError::NotNested(format!(
            "{} rows / {} groups vs {} rows / {} groups",
            full.n_rows, full.n_groups, null.n_rows, null.n_groups
        )));
    }
    if full.n_fixed() <= null.n_fixed() {
        return Err(LmeError::NotNested("full model must have more fixed effects".into()));
    }
    if !full.converged || !null.converged {
        return Err(LmeError::NotConverged);
    }
    let df = (full.n_fixed() - null.n_fixed()) as u32;
    let chi2 = (2.0 * (full.loglik - null.loglik)).max(0.0);
    let p = chi2_sf(chi2, df).ok_or(LmeError::Chi2Domain { x: chi2, df })?;
    Ok(LrtResult { chi2, df, p })
}

/// Checked chi-square CDF.
pub fn chi2_cdf_checked(x: f64, df: u32) -> Result<f64, LmeError> {
    chi2_cdf(x, df).ok_or(LmeError::Chi2Domain { x, df })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeAffectFit {
    pub dimension: Dimension,
    pub grain: Grain,
    pub full: LmeFit,
    pub null: LmeFit,
    pub lrt: LrtResult,
    /// Affect rows dropped because the participant has no attitude record.
    pub skipped_rows: usize,
}

/// Rows of `(attitude, affect, group)` for one affect dimension.
///
/// At participant-by-robot grain the group is the robot; at participant grain
/// every participant forms its own group, which reduces the model to ordinary
/// least squares.
pub fn attitude_affect_data(
    dataset: &StudyDataset,
    table: &AffectTable,
    dimension: Dimension,
) -> Result<(LmeData, usize), LmeError> {
    if table.grain == Grain::Robot {
        return Err(LmeError::UnsupportedGrain(table.grain));
    }
    let mut rows = Vec::new();
    let mut skipped = 0;
    for row in &table.rows {
        let participant = row.key.participant.as_deref().expect("participant-keyed grain");
        let Some(att) = dataset.attitude_of(participant) else {
            skipped += 1;
            continue;
        };
        let group = match table.grain {
            Grain::ParticipantRobot => row.key.robot.clone().expect("robot-keyed grain"),
            _ => participant.to_string(),
        };
        rows.push(LmeRow {
            y: att.mean_score(),
            x: Some(row.score.get(dimension)),
            group,
        });
    }
    Ok((LmeData::new(rows)?, skipped))
}

/// Full (affect slope) vs null (intercept only) ML fits and their LRT.
pub fn fit_attitude_affect(
    dataset: &StudyDataset,
    table: &AffectTable,
    dimension: Dimension,
) -> Result<AttitudeAffectFit, LmeError> {
    let (data, skipped_rows) = attitude_affect_data(dataset, table, dimension)?;
    if table.grain == Grain::ParticipantRobot && data.n_groups() < 2 {
        return Err(LmeError::TooFewGroups(data.n_groups()));
    }
    let full = fit_lme(&data, true)?;
    let null = fit_lme(&data, false)?;
    let lrt = lrt(&full, &null)?;
    Ok(AttitudeAffectFit {
        dimension,
        grain: table.grain,
        full,
        null,
        lrt,
        skipped_rows,
    })
}
