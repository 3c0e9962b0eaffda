use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::SemanticsError;

/// Symmetric cosine-similarity matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    /// # Panics
    /// If `values` is not square with side `ids.len()`.
    pub fn new(ids: Vec<String>, values: Vec<Vec<f64>>) -> Self {
        assert_eq!(values.len(), ids.len(), "matrix rows must match ids");
        assert!(values.iter().all(|r| r.len() == ids.len()), "matrix must be square");
        Self { ids, values }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }
}

/// Robots linked to their `k` most similar other robots.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyGraph {
    pub nodes: Vec<String>,
    /// Per node (same order as `nodes`), its out-neighbours, most similar first.
    pub out_neighbors: Vec<Vec<String>>,
    /// Undirected edges `(a, b)` with `a < b`.
    pub edges: BTreeSet<(String, String)>,
}

impl BodyGraph {
    /// Plain undirected graph without a k-NN origin.
    pub fn undirected(nodes: Vec<String>, edges: impl IntoIterator<Item = (String, String)>) -> Self {
        let edges = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        Self {
            out_neighbors: vec![Vec::new(); nodes.len()],
            nodes,
            edges,
        }
    }

    pub fn connected(&self, a: &str, b: &str) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges
            .iter()
            .any(|(x, y)| x == key.0 && y == key.1)
    }

    pub fn degree(&self, node: &str) -> usize {
        self.edges.iter().filter(|(a, b)| a == node || b == node).count()
    }
}

/// Links each robot to its `k` highest-similarity others; equal similarities
/// go to the lexicographically smaller id.
pub fn knn_graph(sim: &SimilarityMatrix, k: usize) -> Result<BodyGraph, SemanticsError> {
    let n = sim.len();
    if n <= k {
        return Err(SemanticsError::TooFewNodes { n, k });
    }
    let ids = sim.ids();
    let mut out_neighbors = Vec::with_capacity(n);
    let mut edges = BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| {
            sim.get(i, b)
                .partial_cmp(&sim.get(i, a))
                .unwrap_or(Ordering::Equal)
                .then_with(|| ids[a].cmp(&ids[b]))
        });
        let chosen: Vec<String> = others[..k].iter().map(|&j| ids[j].clone()).collect();
        for j in &chosen {
            let a = ids[i].clone();
            edges.insert(if a < *j { (a, j.clone()) } else { (j.clone(), a) });
        }
        out_neighbors.push(chosen);
    }
    Ok(BodyGraph {
        nodes: ids.to_vec(),
        out_neighbors,
        edges,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Clique {
    /// Sorted robot ids.
    pub members: Vec<String>,
}

impl Clique {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Every complete subgraph with exactly `size` nodes in the undirected view,
/// each reported once, sorted.
pub fn enumerate_cliques(graph: &BodyGraph, size: usize) -> Result<Vec<Clique>, SemanticsError> {
    if size < 2 {
        return Err(SemanticsError::CliqueSize(size));
    }
    let mut nodes = graph.nodes.clone();
    nodes.sort();
    let n = nodes.len();
    let index = |id: &str| nodes.binary_search_by(|x| x.as_str().cmp(id)).ok();
    let mut adj = vec![vec![false; n]; n];
    for (a, b) in &graph.edges {
        if let (Some(i), Some(j)) = (index(a), index(b)) {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }

    fn extend(
        adj: &[Vec<bool>],
        current: &mut Vec<usize>,
        candidates: &[usize],
        size: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for (pos, &v) in candidates.iter().enumerate() {
            if candidates.len() - pos < size - current.len() {
                break;
            }
            let next: Vec<usize> = candidates[pos + 1..].iter().copied().filter(|&u| adj[v][u]).collect();
            current.push(v);
            extend(adj, current, &next, size, out);
            current.pop();
        }
    }

    let mut found = Vec::new();
    let all: Vec<usize> = (0..n).collect();
    extend(&adj, &mut Vec::new(), &all, size, &mut found);
    Ok(found
        .into_iter()
        .map(|members| Clique {
            members: members.into_iter().map(|i| nodes[i].clone()).collect(),
        })
        .collect())
}
