//! Undirected graph model and structural analytics.

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected edge stored with `a < b`.
pub type Edge = (usize, usize);

/// Symmetric 0/1 adjacency without self-loops.
///
/// Each undirected edge has an id (its position in [`Adjacency::edges`]), and
/// both directed instances in the CSR arrays point back to that id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n_nodes: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    edge_ids: Vec<usize>,
}

/// Result of building an adjacency from raw pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cleanup {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl Adjacency {
    /// Builds the adjacency from arbitrary (possibly repeated, either
    /// orientation) pairs, dropping self-loops and duplicates.
    pub fn from_pairs(
        n_nodes: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<(Self, Cleanup)> {
        let mut cleanup = Cleanup::default();
        let mut edges = Vec::new();
        let mut raw = 0usize;
        for (i, j) in pairs {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::Structure(format!(
                    "edge ({i}, {j}) references a node outside 0..{n_nodes}"
                )));
            }
            if i == j {
                cleanup.self_loops += 1;
                continue;
            }
            raw += 1;
            edges.push((i.min(j), i.max(j)));
        }
        edges.sort_unstable();
        edges.dedup();
        cleanup.duplicates = raw - edges.len();
        Ok((Self::from_sorted_edges(n_nodes, edges), cleanup))
    }

    /// `edges` must be sorted, unique, and satisfy `a < b < n_nodes`.
    pub(crate) fn from_sorted_edges(n_nodes: usize, edges: Vec<Edge>) -> Self {
        let mut degree = vec![0usize; n_nodes];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n_nodes].to_vec();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        let mut edge_ids = vec![0usize; 2 * edges.len()];
        // Sorted edge order writes each node's neighbours in ascending order.
        for (id, &(a, b)) in edges.iter().enumerate() {
            neighbors[cursor[a]] = b;
            edge_ids[cursor[a]] = id;
            cursor[a] += 1;
        }
        for (id, &(a, b)) in edges.iter().enumerate() {
            neighbors[cursor[b]] = a;
            edge_ids[cursor[b]] = id;
            cursor[b] += 1;
        }
        for v in 0..n_nodes {
            let range = offsets[v]..offsets[v + 1];
            let mut slots: Vec<(usize, usize)> = neighbors[range.clone()]
                .iter()
                .copied()
                .zip(edge_ids[range.clone()].iter().copied())
                .collect();
            slots.sort_unstable();
            for (k, (nb, id)) in slots.into_iter().enumerate() {
                neighbors[range.start + k] = nb;
                edge_ids[range.start + k] = id;
            }
        }
        Self {
            n_nodes,
            edges,
            offsets,
            neighbors,
            edge_ids,
        }
    }

    /// Keeps the edges whose id satisfies `keep`.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(id, _)| keep(*id))
            .map(|(_, e)| *e)
            .collect();
        Self::from_sorted_edges(self.n_nodes, edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Undirected edge ids aligned with [`Adjacency::neighbors`].
    pub fn neighbor_edge_ids(&self, v: usize) -> &[usize] {
        &self.edge_ids[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n_nodes && j < self.n_nodes && self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn edge_id(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.neighbors(i).binary_search(&j).ok()?;
        Some(self.neighbor_edge_ids(i)[k])
    }
}

/// Immutable attributed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Adjacency,
    features: Array2<f64>,
    sensitive: Vec<u8>,
    labels: Option<Vec<u8>>,
}

impl Graph {
    pub fn new(
        adjacency: Adjacency,
        features: Array2<f64>,
        sensitive: Vec<u8>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n = adjacency.n_nodes();
        if features.nrows() != n {
            return Err(Error::Structure(format!(
                "feature matrix has {} rows for {n} nodes",
                features.nrows()
            )));
        }
        if sensitive.len() != n {
            return Err(Error::Structure(format!(
                "sensitive vector has {} entries for {n} nodes",
                sensitive.len()
            )));
        }
        if let Some(bad) = sensitive.iter().position(|&s| s > 1) {
            return Err(Error::Validation(format!(
                "sensitive value {} at node {bad} is not 0/1",
                sensitive[bad]
            )));
        }
        if let Some(y) = &labels {
            if y.len() != n {
                return Err(Error::Structure(format!(
                    "label vector has {} entries for {n} nodes",
                    y.len()
                )));
            }
            if let Some(bad) = y.iter().position(|&v| v > 1) {
                return Err(Error::Validation(format!(
                    "label value {} at node {bad} is not 0/1",
                    y[bad]
                )));
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("feature matrix has non-finite entries".into()));
        }
        Ok(Self {
            adjacency,
            features,
            sensitive,
            labels,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.n_nodes()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.n_edges()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn edges(&self) -> &[Edge] {
        self.adjacency.edges()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Whether the endpoints of `edge` share a sensitive value.
    pub fn same_group(&self, (a, b): Edge) -> bool {
        self.sensitive[a] == self.sensitive[b]
    }

    /// Same graph with node `v` renamed to `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes();
        if perm.len() != n {
            return Err(Error::Structure("permutation length mismatch".into()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Structure("not a permutation".into()));
            }
        }
        let (adjacency, _) = Adjacency::from_pairs(
            n,
            self.edges().iter().map(|&(a, b)| (perm[a], perm[b])),
        )?;
        let mut features = Array2::zeros(self.features.raw_dim());
        let mut sensitive = vec![0; n];
        let mut labels = self.labels.as_ref().map(|_| vec![0; n]);
        for v in 0..n {
            features.row_mut(perm[v]).assign(&self.features.row(v));
            sensitive[perm[v]] = self.sensitive[v];
            if let (Some(out), Some(y)) = (labels.as_mut(), self.labels.as_ref()) {
                out[perm[v]] = y[v];
            }
        }
        Graph::new(adjacency, features, sensitive, labels)
    }
}

/// Directed edge instances partitioned by the endpoints' sensitive values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeGroupCounts {
    pub same: usize,
    pub diff: usize,
    /// Indexed `[s_i][s_j]`.
    pub by_pair: [[usize; 2]; 2],
}

impl EdgeGroupCounts {
    /// Undirected same-attribute edges (`same / 2`).
    pub fn same_undirected(&self) -> usize {
        self.same / 2
    }

    pub fn diff_undirected(&self) -> usize {
        self.diff / 2
    }

    pub fn pair(&self, a: u8, b: u8) -> usize {
        self.by_pair[a as usize][b as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub degrees: Vec<usize>,
    pub d_max: usize,
    pub d_mean: f64,
}

pub fn degree_stats(adjacency: &Adjacency) -> DegreeStats {
    let n = adjacency.n_nodes();
    let degrees: Vec<usize> = (0..n).map(|v| adjacency.degree(v)).collect();
    let d_max = degrees.iter().copied().max().unwrap_or(0);
    let d_mean = if n == 0 {
        0.0
    } else {
        degrees.iter().sum::<usize>() as f64 / n as f64
    };
    DegreeStats {
        degrees,
        d_max,
        d_mean,
    }
}

pub fn edge_group_counts(g: &Graph) -> EdgeGroupCounts {
    let s = g.sensitive();
    let mut by_pair = [[0usize; 2]; 2];
    for &(a, b) in g.edges() {
        by_pair[s[a] as usize][s[b] as usize] += 1;
        by_pair[s[b] as usize][s[a] as usize] += 1;
    }
    EdgeGroupCounts {
        same: by_pair[0][0] + by_pair[1][1],
        diff: by_pair[0][1] + by_pair[1][0],
        by_pair,
    }
}

/// For each edge id: does the edge close at least one triangle whose three
/// nodes share a sensitive value?
pub fn monochromatic_triangle_mask(g: &Graph) -> Vec<bool> {
    let adj = g.adjacency();
    let s = g.sensitive();
    adj.edges()
        .iter()
        .map(|&(a, b)| {
            if s[a] != s[b] {
                return false;
            }
            let group = s[a];
            let (na, nb) = (adj.neighbors(a), adj.neighbors(b));
            let (mut i, mut j) = (0, 0);
            while i < na.len() && j < nb.len() {
                match na[i].cmp(&nb[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        if s[na[i]] == group {
                            return true;
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
            false
        })
        .collect()
}

pub fn monochromatic_triangle_edges(g: &Graph) -> BTreeSet<Edge> {
    monochromatic_triangle_mask(g)
        .into_iter()
        .zip(g.edges())
        .filter_map(|(hit, &e)| hit.then_some(e))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn graph_from(n: usize, pairs: &[(usize, usize)], s: &[u8]) -> Graph {
        let (adj, _) = Adjacency::from_pairs(n, pairs.iter().copied()).unwrap();
        Graph::new(adj, Array2::zeros((n, 1)), s.to_vec(), None).unwrap()
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (3..=max_n).prop_flat_map(|n| {
            (
                prop::collection::vec((0..n, 0..n), 0..(n * n / 2)),
                prop::collection::vec(0u8..2, n),
            )
                .prop_map(move |(pairs, s)| graph_from(n, &pairs, &s))
        })
    }

    #[test]
    fn dedup_and_self_loops() {
        let (adj, cleanup) = Adjacency::from_pairs(2, [(0, 1), (1, 0), (1, 1)]).unwrap();
        assert_eq!(adj.n_edges(), 1);
        assert_eq!(cleanup.self_loops, 1);
        assert_eq!(cleanup.duplicates, 1);
    }

    #[test]
    fn out_of_range_edge_is_structural() {
        let err = Adjacency::from_pairs(2, [(0, 2)]).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn non_binary_sensitive_rejected() {
        let (adj, _) = Adjacency::from_pairs(2, [(0, 1)]).unwrap();
        let err = Graph::new(adj, Array2::zeros((2, 1)), vec![0, 2], None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn path_degrees() {
        let g = graph_from(3, &[(0, 1), (1, 2)], &[0, 0, 0]);
        let d = degree_stats(g.adjacency());
        assert_eq!(d.degrees, vec![1, 2, 1]);
        assert_eq!(d.d_max, 2);
        assert!((d.d_mean - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn edgeless_degrees() {
        let g = graph_from(3, &[], &[0, 1, 0]);
        let d = degree_stats(g.adjacency());
        assert_eq!(d.degrees, vec![0, 0, 0]);
        assert_eq!(d.d_max, 0);
        assert_eq!(d.d_mean, 0.0);
    }

    #[test]
    fn triangle_group_counts() {
        let g = graph_from(3, &[(0, 1), (1, 2), (0, 2)], &[0, 0, 1]);
        let c = edge_group_counts(&g);
        assert_eq!(c.same, 2);
        assert_eq!(c.diff, 4);
        assert_eq!(c.pair(0, 1), c.pair(1, 0));
    }

    #[test]
    fn triangle_membership_cases() {
        let mono = graph_from(3, &[(0, 1), (1, 2), (0, 2)], &[0, 0, 0]);
        assert_eq!(monochromatic_triangle_edges(&mono).len(), 3);
        let mixed = graph_from(3, &[(0, 1), (1, 2), (0, 2)], &[0, 0, 1]);
        assert!(monochromatic_triangle_edges(&mixed).is_empty());
    }

    #[test]
    fn neighbour_edge_ids_point_back() {
        let g = graph_from(5, &[(0, 1), (3, 1), (4, 0), (2, 3), (1, 4)], &[0; 5]);
        let adj = g.adjacency();
        for v in 0..5 {
            for (&u, &id) in adj.neighbors(v).iter().zip(adj.neighbor_edge_ids(v)) {
                let (a, b) = adj.edges()[id];
                assert!((a, b) == (u.min(v), u.max(v)));
            }
            assert!(adj.neighbors(v).windows(2).all(|w| w[0] < w[1]));
        }
    }

    fn recount_degrees(g: &Graph) -> Vec<usize> {
        let mut d = vec![0; g.n_nodes()];
        for &(a, b) in g.edges() {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    proptest! {
        #[test]
        fn adjacency_symmetric_without_loops(g in arb_graph(25)) {
            let adj = g.adjacency();
            for v in 0..g.n_nodes() {
                prop_assert!(!adj.has_edge(v, v));
                for &u in adj.neighbors(v) {
                    prop_assert!(adj.has_edge(u, v));
                }
            }
        }

        #[test]
        fn degrees_match_recount(g in arb_graph(30)) {
            let d = degree_stats(g.adjacency());
            prop_assert_eq!(&d.degrees, &recount_degrees(&g));
            prop_assert_eq!(d.d_max, d.degrees.iter().copied().max().unwrap_or(0));
        }

        #[test]
        fn group_counts_reconcile(g in arb_graph(30)) {
            let c = edge_group_counts(&g);
            prop_assert_eq!(c.same + c.diff, 2 * g.n_edges());
            prop_assert_eq!(c.pair(0, 1), c.pair(1, 0));
            prop_assert_eq!(c.same, c.pair(0, 0) + c.pair(1, 1));
        }
    }
}
