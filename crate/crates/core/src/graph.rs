//! Directed graphs for protocol experiments.
//!
//! Nodes are `0..n`. An edge `src -> dst` means `dst` can receive from `src`;
//! `src` is an in-neighbor of `dst` and `dst` an out-neighbor of `src`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::error::GraphError;

pub const DEFAULT_RESAMPLE_CAP: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Digraph {
    /// Builds a digraph from `(src, dst)` pairs, rejecting self-edges and duplicates.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let mut seen = BTreeSet::new();
        for (src, dst) in edges {
            check_edge(n, src, dst)?;
            if !seen.insert((src, dst)) {
                return Err(GraphError::DuplicateEdge { src, dst });
            }
        }
        Ok(Self::from_sorted_set(n, &seen))
    }

    fn from_sorted_set(n: usize, edges: &BTreeSet<(usize, usize)>) -> Self {
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for &(src, dst) in edges {
            out_adj[src].push(dst);
            in_adj[dst].push(src);
        }
        for list in &mut in_adj {
            list.sort_unstable();
        }
        Digraph {
            out_adj,
            in_adj,
            edge_count: edges.len(),
        }
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(
            n,
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))),
        )
    }

    pub fn node_count(&self) -> usize {
        self.out_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn out_neighbors(&self, node: usize) -> &[usize] {
        &self.out_adj[node]
    }

    pub fn in_neighbors(&self, node: usize) -> &[usize] {
        &self.in_adj[node]
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_adj[node].len()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_adj[node].len()
    }

    pub fn max_out_degree(&self) -> usize {
        self.out_adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Sum of out-degrees, equal to the edge count.
    pub fn total_out_degree(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    /// All edges as `(src, dst)`, sorted by source then destination.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(src, outs)| outs.iter().map(move |&dst| (src, dst)))
    }

    /// Hop distances from `src` along edge direction; `None` if unreachable.
    pub fn distances_from(&self, src: usize) -> Vec<Option<u32>> {
        bfs(&self.out_adj, src)
    }

    pub fn is_strongly_connected(&self) -> bool {
        let forward = bfs(&self.out_adj, 0);
        let backward = bfs(&self.in_adj, 0);
        forward.iter().chain(backward.iter()).all(Option::is_some)
    }

    /// Longest shortest directed path over all ordered node pairs.
    pub fn diameter(&self) -> Result<u32, GraphError> {
        let mut diam = 0;
        for src in 0..self.node_count() {
            for d in self.distances_from(src) {
                diam = diam.max(d.ok_or(GraphError::NotStronglyConnected)?);
            }
        }
        Ok(diam)
    }
}

fn check_edge(n: usize, src: usize, dst: usize) -> Result<(), GraphError> {
    for node in [src, dst] {
        if node >= n {
            return Err(GraphError::NodeOutOfRange { node, n });
        }
    }
    if src == dst {
        return Err(GraphError::SelfEdge { node: src });
    }
    Ok(())
}

fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    dist[src] = Some(0);
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// A strongly connected sample plus the number of rejected draws before it.
#[derive(Debug, Clone)]
pub struct GeneratedGraph {
    pub graph: Digraph,
    pub resamples: u32,
}

/// Erdős–Rényi digraph conditioned on strong connectivity.
///
/// Each ordered pair `(i, j)`, `i != j`, is drawn independently with
/// probability `p` (row-major order); the whole graph is redrawn until it is
/// strongly connected, up to `resample_cap` redraws.
pub fn generate_random_digraph<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    rng: &mut R,
    resample_cap: u32,
) -> Result<GeneratedGraph, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(GraphError::InvalidProbability(p));
    }
    for resamples in 0..=resample_cap {
        let mut edges = BTreeSet::new();
        for src in 0..n {
            for dst in 0..n {
                if src != dst && rng.gen_bool(p) {
                    edges.insert((src, dst));
                }
            }
        }
        let graph = Digraph::from_sorted_set(n, &edges);
        if graph.is_strongly_connected() {
            return Ok(GeneratedGraph { graph, resamples });
        }
    }
    Err(GraphError::ResampleCapExceeded { cap: resample_cap })
}

/// Parses `n m` followed by `m` lines of 1-based `dst src` pairs.
pub fn read_edge_list(text: &str) -> Result<Digraph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_line, header) = lines
        .next()
        .ok_or_else(|| GraphError::Malformed("missing header".into()))?;
    let (n, m) = parse_pair(header).map_err(|e| at(header_line, e))?;
    let mut edges = BTreeSet::new();
    let mut count = 0;
    for (line_no, line) in lines {
        let (dst, src) = parse_pair(line).map_err(|e| at(line_no, e))?;
        if dst == 0 || src == 0 {
            return Err(at(
                line_no,
                GraphError::Malformed("node indices are 1-based".into()),
            ));
        }
        let (src, dst) = (src - 1, dst - 1);
        check_edge(n, src, dst).map_err(|e| at(line_no, e))?;
        if !edges.insert((src, dst)) {
            return Err(at(line_no, GraphError::DuplicateEdge { src, dst }));
        }
        count += 1;
    }
    if count != m {
        return Err(GraphError::Malformed(format!(
            "header declares {m} edges, found {count}"
        )));
    }
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    Ok(Digraph::from_sorted_set(n, &edges))
}

/// Canonical edge list: header, then `dst src` lines sorted by `dst`, then `src`.
pub fn write_edge_list(g: &Digraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", g.node_count(), g.edge_count());
    for dst in 0..g.node_count() {
        for &src in g.in_neighbors(dst) {
            let _ = writeln!(out, "{} {}", dst + 1, src + 1);
        }
    }
    out
}

fn parse_pair(line: &str) -> Result<(usize, usize), GraphError> {
    let mut it = line.split_whitespace();
    let mut next = || -> Result<usize, GraphError> {
        let tok = it
            .next()
            .ok_or_else(|| GraphError::Malformed(format!("expected two integers in {line:?}")))?;
        tok.parse()
            .map_err(|_| GraphError::Malformed(format!("not a nonnegative integer: {tok:?}")))
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(GraphError::Malformed(format!("trailing tokens in {line:?}")));
    }
    Ok((a, b))
}

fn at(line: usize, source: GraphError) -> GraphError {
    GraphError::AtLine {
        line,
        source: Box::new(source),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use proptest::prelude::*;

    /// Reachability by boolean matrix powers, independent of BFS.
    fn matrix_power_diameter(g: &Digraph) -> Option<u32> {
        let n = g.node_count();
        let mut adj = vec![vec![false; n]; n];
        for (s, d) in g.edges() {
            adj[s][d] = true;
        }
        let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
        for k in 1..=n as u32 {
            let mut next = reach.clone();
            for i in 0..n {
                for j in 0..n {
                    if !next[i][j] {
                        next[i][j] = (0..n).any(|l| reach[i][l] && adj[l][j]);
                    }
                }
            }
            reach = next;
            if reach.iter().all(|row| row.iter().all(|&b| b)) {
                return Some(k);
            }
        }
        None
    }

    fn three_cycle() -> Digraph {
        Digraph::cycle(3).unwrap()
    }

    #[test]
    fn cycle_is_strongly_connected_single_edge_is_not() {
        assert!(three_cycle().is_strongly_connected());
        let g = Digraph::from_edges(2, [(0, 1)]).unwrap();
        assert!(!g.is_strongly_connected());
        assert_eq!(g.diameter(), Err(GraphError::NotStronglyConnected));
    }

    #[test]
    fn diameters_of_small_graphs() {
        assert_eq!(three_cycle().diameter().unwrap(), 2);
        assert_eq!(Digraph::complete(4).unwrap().diameter().unwrap(), 1);
    }

    #[test]
    fn rejects_bad_edges() {
        assert_eq!(
            Digraph::from_edges(3, [(1, 1)]),
            Err(GraphError::SelfEdge { node: 1 })
        );
        assert_eq!(
            Digraph::from_edges(3, [(0, 1), (0, 1)]),
            Err(GraphError::DuplicateEdge { src: 0, dst: 1 })
        );
        assert_eq!(
            Digraph::from_edges(3, [(0, 3)]),
            Err(GraphError::NodeOutOfRange { node: 3, n: 3 })
        );
        assert_eq!(Digraph::from_edges(1, []), Err(GraphError::TooFewNodes(1)));
    }

    #[test]
    fn reads_three_cycle() {
        let g = read_edge_list("3 3\n2 1\n3 2\n1 3").unwrap();
        assert_eq!(g, three_cycle());
        assert_eq!(g.out_neighbors(0), &[1]);
        assert_eq!(g.in_neighbors(0), &[2]);
    }

    #[test]
    fn write_is_canonical() {
        let text = "3 3\n2 1\n3 2\n1 3";
        let canonical = "3 3\n1 3\n2 1\n3 2\n";
        let g = read_edge_list(text).unwrap();
        assert_eq!(write_edge_list(&g), canonical);
        assert_eq!(write_edge_list(&read_edge_list(canonical).unwrap()), canonical);
    }

    #[test]
    fn edge_list_errors() {
        let err = read_edge_list("2 1\n1 1\n").unwrap_err();
        assert!(matches!(
            err,
            GraphError::AtLine { line: 2, ref source } if **source == GraphError::SelfEdge { node: 0 }
        ));
        assert!(matches!(
            read_edge_list("2 2\n1 2\n1 2\n").unwrap_err(),
            GraphError::AtLine { line: 3, .. }
        ));
        assert!(matches!(
            read_edge_list("2 1\n3 1\n").unwrap_err(),
            GraphError::AtLine { line: 2, .. }
        ));
        assert!(matches!(
            read_edge_list("2 1\n1 x\n").unwrap_err(),
            GraphError::AtLine { line: 2, .. }
        ));
        assert!(matches!(
            read_edge_list("2 2\n1 2\n").unwrap_err(),
            GraphError::Malformed(_)
        ));
        assert!(read_edge_list("").is_err());
    }

    #[test]
    fn forced_complete_pair() {
        let mut rng = trial_rng(3);
        let gen = generate_random_digraph(2, 1.0, &mut rng, DEFAULT_RESAMPLE_CAP).unwrap();
        assert_eq!(gen.graph.edge_count(), 2);
        assert_eq!(gen.resamples, 0);
        assert_eq!(gen.graph.diameter().unwrap(), 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random_digraph(5, 0.5, &mut trial_rng(11), 1000).unwrap();
        let b = generate_random_digraph(5, 0.5, &mut trial_rng(11), 1000).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.resamples, b.resamples);
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        let mut rng = trial_rng(0);
        assert_eq!(
            generate_random_digraph(1, 0.5, &mut rng, 10).unwrap_err(),
            GraphError::TooFewNodes(1)
        );
        assert_eq!(
            generate_random_digraph(5, 0.0, &mut rng, 10).unwrap_err(),
            GraphError::InvalidProbability(0.0)
        );
        assert_eq!(
            generate_random_digraph(40, 0.001, &mut rng, 5).unwrap_err(),
            GraphError::ResampleCapExceeded { cap: 5 }
        );
    }

    #[test]
    fn twenty_node_samples_are_strongly_connected_and_dense() {
        let mut total_edges = 0;
        for seed in 0..50 {
            let gen = generate_random_digraph(20, 0.5, &mut trial_rng(seed), 1000).unwrap();
            let g = &gen.graph;
            assert!(g.is_strongly_connected());
            assert_eq!(matrix_power_diameter(g), Some(g.diameter().unwrap()));
            total_edges += g.edge_count();
        }
        let mean = total_edges as f64 / 50.0;
        assert!((180.0..200.0).contains(&mean), "mean edge count {mean}");
    }

    fn small_digraph() -> impl Strategy<Value = Digraph> {
        (2usize..=8).prop_flat_map(|n| {
            proptest::collection::vec(proptest::bool::weighted(0.4), n * n).prop_map(move |bits| {
                let edges = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| i != j && bits[i * n + j]);
                Digraph::from_edges(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn edge_list_round_trip(g in small_digraph()) {
            let text = write_edge_list(&g);
            let back = read_edge_list(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(write_edge_list(&back), text);
        }

        #[test]
        fn diameter_matches_matrix_powers(g in small_digraph()) {
            let expected = matrix_power_diameter(&g);
            prop_assert_eq!(g.diameter().ok(), expected);
            prop_assert_eq!(g.is_strongly_connected(), expected.is_some());
            if let Some(d) = expected {
                prop_assert!(d >= 1);
            }
        }

        #[test]
        fn degree_sums_equal_edge_count(g in small_digraph()) {
            let outs: usize = (0..g.node_count()).map(|j| g.out_degree(j)).sum();
            let ins: usize = (0..g.node_count()).map(|j| g.in_degree(j)).sum();
            prop_assert_eq!(outs, g.edge_count());
            prop_assert_eq!(ins, g.edge_count());
        }

        #[test]
        fn generated_graphs_pass_connectivity(seed in any::<u64>(), n in 2usize..12) {
            let gen = generate_random_digraph(n, 0.5, &mut trial_rng(seed), DEFAULT_RESAMPLE_CAP).unwrap();
            prop_assert!(gen.graph.is_strongly_connected());
            for j in 0..n {
                prop_assert!(gen.graph.out_degree(j) >= 1);
                prop_assert!(gen.graph.in_degree(j) >= 1);
            }
        }
    }
}
