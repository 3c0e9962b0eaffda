use std::collections::BTreeMap;

use super::{SemanticsError, SimilarityMatrix};

/// One agglomeration step; cluster members are listed by robot id.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: Vec<String>,
    pub right: Vec<String>,
    /// Average pairwise `1 - similarity` between the two clusters.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Robot id to label in `1..=n_clusters`; label 1 holds the smallest id.
    pub labels: BTreeMap<String, usize>,
    pub n_clusters: usize,
    /// Full dendrogram down to a single cluster.
    pub merges: Vec<Merge>,
    pub linkage: &'static str,
}

impl ClusterAssignment {
    pub fn members(&self, label: usize) -> Vec<&str> {
        self.labels
            .iter()
            .filter(|(_, &l)| l == label)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Average-linkage agglomerative clustering on `1 - similarity`, cut at
/// `n_clusters`. Equal distances merge the pair whose smallest ids sort first.
pub fn cluster(sim: &SimilarityMatrix, n_clusters: usize) -> Result<ClusterAssignment, SemanticsError> {
    let n = sim.len();
    if n_clusters == 0 || n < n_clusters {
        return Err(SemanticsError::TooFewForClusters { n, n_clusters });
    }
    let ids = sim.ids();
    // clusters hold member indices sorted by id
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let sort_members = |c: &mut Vec<usize>| c.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let linkage = |a: &[usize], b: &[usize]| -> f64 {
        let mut total = 0.0;
        for &i in a {
            for &j in b {
                total += 1.0 - sim.get(i, j);
            }
        }
        total / (a.len() * b.len()) as f64
    };

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut cut: Option<Vec<Vec<usize>>> = (n == n_clusters).then(|| clusters.clone());
    while clusters.len() > 1 {
        clusters.sort_by(|a, b| ids[a[0]].cmp(&ids[b[0]]));
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let d = linkage(&clusters[i], &clusters[j]);
                // strict comparison keeps the first (lexicographically smallest) pair on ties
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (distance, i, j) = best.expect("at least two clusters");
        let right = clusters.remove(j);
        let left = std::mem::take(&mut clusters[i]);
        merges.push(Merge {
            left: left.iter().map(|&x| ids[x].clone()).collect(),
            right: right.iter().map(|&x| ids[x].clone()).collect(),
            distance,
        });
        let mut joined = left;
        joined.extend(right);
        sort_members(&mut joined);
        clusters[i] = joined;
        if clusters.len() == n_clusters {
            cut = Some(clusters.clone());
        }
    }

    let mut groups = cut.expect("cut level is reached");
    groups.sort_by(|a, b| ids[a[0]].cmp(&ids[b[0]]));
    let labels = groups
        .iter()
        .enumerate()
        .flat_map(|(label, members)| members.iter().map(move |&m| (ids[m].clone(), label + 1)))
        .collect();
    Ok(ClusterAssignment {
        labels,
        n_clusters,
        merges,
        linkage: "average",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(ids: &[&str], values: Vec<Vec<f64>>) -> SimilarityMatrix {
        SimilarityMatrix::new(ids.iter().map(|s| s.to_string()).collect(), values)
    }

    #[test]
    fn identical_vectors_merge_first() {
        let m = matrix(
            &["a", "b", "c"],
            vec![vec![1.0, 0.2, 1.0], vec![0.2, 1.0, 0.3], vec![1.0, 0.3, 1.0]],
        );
        let c = cluster(&m, 2).unwrap();
        assert_eq!(c.merges[0].left, vec!["a"]);
        assert_eq!(c.merges[0].right, vec!["c"]);
        assert_eq!(c.merges[0].distance, 0.0);
        assert_eq!(c.labels["a"], c.labels["c"]);
        assert_ne!(c.labels["a"], c.labels["b"]);
        assert_eq!(c.merges.len(), 2);
        // average of (1 - 0.2) and (1 - 0.3)
        assert!((c.merges[1].distance - 0.75).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cuts() {
        let m = matrix(
            &["a", "b", "c"],
            vec![vec![1.0, 0.5, 0.1], vec![0.5, 1.0, 0.2], vec![0.1, 0.2, 1.0]],
        );
        let each = cluster(&m, 3).unwrap();
        assert_eq!(each.labels.values().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        let one = cluster(&m, 1).unwrap();
        assert!(one.labels.values().all(|&l| l == 1));
        assert!(matches!(cluster(&m, 4), Err(SemanticsError::TooFewForClusters { .. })));
        assert!(cluster(&m, 0).is_err());
    }

    #[test]
    fn tie_breaks_lexicographically() {
        let m = matrix(
            &["d", "c", "b", "a"],
            vec![
                vec![1.0, 0.5, 0.0, 0.0],
                vec![0.5, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.5],
                vec![0.0, 0.0, 0.5, 1.0],
            ],
        );
        let c = cluster(&m, 2).unwrap();
        assert_eq!(c.merges[0].left, vec!["a"]);
        assert_eq!(c.merges[0].right, vec!["b"]);
        assert_eq!(c.members(1), vec!["a", "b"]);
        assert_eq!(c.members(2), vec!["c", "d"]);
    }
}
