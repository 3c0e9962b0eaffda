//! Slow, direct reference computations. Each one deliberately avoids the
//! shortcuts taken by the production code so the two can be compared.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

/// Closed-form least squares of `y` on `[1, x]` (or `[1]`), with the ML
/// residual variance `RSS / n` and Gaussian log-likelihood.
#[derive(Debug, Clone, Copy)]
pub struct Ols {
    pub beta0: f64,
    pub beta1: Option<f64>,
    pub sigma2: f64,
    pub loglik: f64,
}

pub fn ols(y: &[f64], x: Option<&[f64]>) -> Ols {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let (beta0, beta1) = match x {
        None => (ybar, None),
        Some(x) => {
            let xbar = x.iter().sum::<f64>() / n;
            let sxx: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
            let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
            let b1 = sxy / sxx;
            (ybar - b1 * xbar, Some(b1))
        }
    };
    let rss: f64 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (v - beta0 - beta1.unwrap_or(0.0) * x.map_or(0.0, |x| x[i])).powi(2))
        .sum();
    let sigma2 = rss / n;
    Ols {
        beta0,
        beta1,
        sigma2,
        loglik: -0.5 * n * ((2.0 * PI * sigma2).ln() + 1.0),
    }
}

fn group_index(groups: &[String]) -> Vec<Vec<usize>> {
    let names: BTreeSet<&String> = groups.iter().collect();
    names
        .into_iter()
        .map(|g| (0..groups.len()).filter(|&i| &groups[i] == g).collect())
        .collect()
}

/// Gaussian log-likelihood of a random-intercept model evaluated with the
/// full `n x n` covariance matrix.
pub fn dense_loglik(
    y: &[f64],
    x: Option<&[f64]>,
    groups: &[String],
    beta0: f64,
    beta1: f64,
    sigma_u2: f64,
    sigma2: f64,
) -> f64 {
    let n = y.len();
    let mut v = DMatrix::<f64>::identity(n, n) * sigma2;
    for i in 0..n {
        for j in 0..n {
            if groups[i] == groups[j] {
                v[(i, j)] += sigma_u2;
            }
        }
    }
    let r = DVector::from_iterator(n, (0..n).map(|i| y[i] - beta0 - beta1 * x.map_or(0.0, |x| x[i])));
    let chol = v.cholesky().expect("covariance is positive definite");
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = r.dot(&chol.solve(&r));
    -0.5 * (n as f64 * (2.0 * PI).ln() + logdet + quad)
}

#[derive(Debug, Clone, Copy)]
pub struct GridFit {
    pub theta: f64,
    pub beta0: f64,
    pub beta1: Option<f64>,
    pub sigma2: f64,
    pub sigma_u2: f64,
    pub loglik: f64,
}

/// GLS at a fixed variance ratio, inverting each group block numerically.
pub fn gls_at(y: &[f64], x: Option<&[f64]>, groups: &[String], theta: f64) -> GridFit {
    let p = if x.is_some() { 2 } else { 1 };
    let n = y.len();
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut logdet = 0.0;
    let blocks: Vec<(Vec<usize>, DMatrix<f64>)> = group_index(groups)
        .into_iter()
        .map(|idx| {
            let m = idx.len();
            let block = DMatrix::<f64>::identity(m, m) + DMatrix::<f64>::from_element(m, m, theta);
            let lu = block.clone().lu();
            logdet += lu.determinant().ln();
            (idx, lu.try_inverse().expect("block is invertible"))
        })
        .collect();
    let design = |i: usize| -> Vec<f64> {
        match x {
            Some(x) => vec![1.0, x[i]],
            None => vec![1.0],
        }
    };
    for (idx, inv) in &blocks {
        let m = idx.len();
        let xb = DMatrix::from_fn(m, p, |r, c| design(idx[r])[c]);
        let yb = DVector::from_iterator(m, idx.iter().map(|&i| y[i]));
        xtx += xb.transpose() * inv * &xb;
        xty += xb.transpose() * inv * yb;
    }
    let beta = xtx.lu().solve(&xty).expect("design has full rank");
    let mut quad = 0.0;
    for (idx, inv) in &blocks {
        let m = idx.len();
        let rb = DVector::from_iterator(
            m,
            idx.iter().map(|&i| {
                let d = design(i);
                y[i] - (0..p).map(|c| d[c] * beta[c]).sum::<f64>()
            }),
        );
        quad += rb.dot(&(inv * &rb));
    }
    let sigma2 = quad / n as f64;
    GridFit {
        theta,
        beta0: beta[0],
        beta1: (p == 2).then(|| beta[1]),
        sigma2,
        sigma_u2: theta * sigma2,
        loglik: -0.5 * n as f64 * ((2.0 * PI * sigma2).ln() + 1.0) - 0.5 * logdet,
    }
}

/// Maximizes [`gls_at`] over `theta` in `[0, theta_max]` by repeated dense
/// grids, each zooming on the best cell of the previous one.
pub fn grid_ml(y: &[f64], x: Option<&[f64]>, groups: &[String], theta_max: f64) -> GridFit {
    // first pass on a log scale, then linear refinement
    let mut candidates = vec![0.0];
    let mut t = 1e-8;
    while t < theta_max {
        candidates.push(t);
        t *= 1.1;
    }
    candidates.push(theta_max);
    let mut best_i = 0;
    let mut fits: Vec<GridFit> = candidates.iter().map(|&t| gls_at(y, x, groups, t)).collect();
    for (i, f) in fits.iter().enumerate() {
        if f.loglik > fits[best_i].loglik {
            best_i = i;
        }
    }
    let mut lo = candidates[best_i.saturating_sub(1)];
    let mut hi = candidates[(best_i + 1).min(candidates.len() - 1)];
    let mut best = fits[best_i];
    for _ in 0..12 {
        let steps = 40;
        fits = (0..=steps)
            .map(|s| gls_at(y, x, groups, lo + (hi - lo) * s as f64 / steps as f64))
            .collect();
        let mut bi = 0;
        for (i, f) in fits.iter().enumerate() {
            if f.loglik > fits[bi].loglik {
                bi = i;
            }
        }
        if fits[bi].loglik >= best.loglik {
            best = fits[bi];
        }
        let cell = (hi - lo) / steps as f64;
        lo = (best.theta - cell).max(0.0);
        hi = (best.theta + cell).min(theta_max);
    }
    best
}

/// Chi-square CDF by adaptive Simpson integration of the density.
///
/// Substitutes `t = s^2` so the `t^(df/2 - 1)` singularity at zero for
/// `df = 1` disappears: the integrand becomes `2 s^(df-1) e^(-s^2/2) / norm`.
pub fn chi2_cdf_numeric(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = df as f64 / 2.0;
    let norm = 2f64.powf(k) * gamma_by_integration(k);
    let f = |s: f64| 2.0 * s.powi(df as i32 - 1) * (-s * s / 2.0).exp() / norm;
    adaptive_simpson(&f, 0.0, x.sqrt(), 1e-13, 60)
}

/// Gamma function for half-integer or integer arguments via recursion.
fn gamma_by_integration(k: f64) -> f64 {
    // Gamma(1) = 1, Gamma(1/2) = sqrt(pi); Gamma(a + 1) = a Gamma(a)
    let (mut g, mut a) = if (k.fract() - 0.5).abs() < 1e-12 {
        (PI.sqrt(), 0.5)
    } else {
        (1.0, 1.0)
    };
    while a < k - 1e-9 {
        g *= a;
        a += 1.0;
    }
    g
}

pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    let (fa, fb, m) = (f(a), f(b), (a + b) / 2.0);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, eps, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

/// Every `size`-subset of `0..n` whose members are pairwise adjacent.
pub fn brute_force_cliques(n: usize, adjacent: &dyn Fn(usize, usize) -> bool, size: usize) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut subset: Vec<usize> = (0..size).collect();
    if size == 0 || size > n {
        return out;
    }
    loop {
        let all = (0..size).all(|i| (i + 1..size).all(|j| adjacent(subset[i], subset[j])));
        if all {
            out.insert(subset.clone());
        }
        // next combination in lexicographic order
        let mut i = size;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if subset[i] < n - size + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        subset[i] += 1;
        for j in i + 1..size {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// The `k` largest entries of `row`, skipping `skip`, by full sort with
/// index as tiebreak.
pub fn top_k(row: &[f64], skip: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).filter(|&j| j != skip).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Plain cosine distance `1 - a.b / (|a| |b|)`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Mean affect of every entry whose distance to `target` lies in
/// `[center - width, center + width]`, scanning all entries.
/// Entries are `(word, vector, [v, a, d])`, summed in word order.
pub fn baseline_scan(
    entries: &[(String, Vec<f64>, [f64; 3])],
    target_word: &str,
    target: &[f64],
    center: f64,
    width: f64,
) -> (usize, [f64; 3]) {
    let mut hits: Vec<&(String, Vec<f64>, [f64; 3])> = entries
        .iter()
        .filter(|(w, v, _)| {
            if w == target_word {
                return false;
            }
            let d = cosine_distance(v, target);
            d >= center - width && d <= center + width
        })
        .collect();
    hits.sort_by(|a, b| a.0.cmp(&b.0));
    let mut sum = [0.0; 3];
    for (_, _, s) in &hits {
        for c in 0..3 {
            sum[c] += s[c];
        }
    }
    let n = hits.len();
    (n, sum.map(|s| s / n as f64))
}

/// Fraction of items on which two labelings agree after the best relabeling.
pub fn best_permutation_agreement(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().copied().max().map_or(0, |m| m + 1);
    let kb = b.iter().copied().max().map_or(0, |m| m + 1);
    let k = ka.max(kb);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        let hits = a.iter().zip(b).filter(|(x, y)| p[**x] == **y).count();
        best = best.max(hits);
    });
    best as f64 / a.len() as f64
}

fn permute(items: &mut Vec<usize>, start: usize, visit: &mut dyn FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// Average linkage by recomputing every cluster-pair distance from the
/// original matrix at each step. Returns flat labels in input order, numbered
/// by first appearance.
pub fn naive_average_linkage(dist: &[Vec<f64>], n_clusters: usize) -> Vec<usize> {
    let n = dist.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > n_clusters {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut total = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        total += dist[i][j];
                    }
                }
                let d = total / (clusters[a].len() * clusters[b].len()) as f64;
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let merged = clusters.remove(best.2);
        clusters[best.1].extend(merged);
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i] == usize::MAX {
            let c = clusters.iter().find(|c| c.contains(&i)).unwrap();
            for &m in c {
                labels[m] = next;
            }
            next += 1;
        }
    }
    labels
}
