//! Exact probabilities for token random walks (self included as a target).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::graph::Digraph;

fn step_prob(g: &Digraph, j: usize) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(1 + g.out_degree(j)))
}

fn targets(g: &Digraph, j: usize) -> impl Iterator<Item = usize> + '_ {
    g.out_neighbors(j).iter().copied().chain(std::iter::once(j))
}

/// Probability that a single token starting at `start` is at `target` at
/// some step in `1..=steps`.
pub fn hit_probability(g: &Digraph, start: usize, target: usize, steps: u32) -> BigRational {
    let n = g.node_count();
    // mass on paths that have not yet visited target
    let mut dist = vec![BigRational::zero(); n];
    dist[start] = BigRational::one();
    let mut hit = BigRational::zero();
    for _ in 0..steps {
        let mut next = vec![BigRational::zero(); n];
        for (j, p) in dist.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let q = p * step_prob(g, j);
            for t in targets(g, j) {
                next[t] += &q;
            }
        }
        hit += &next[target];
        next[target] = BigRational::zero();
        dist = next;
    }
    hit
}

/// Probability that two independent tokens starting at `a` and `b` occupy
/// the same node at some step in `1..=steps`.
pub fn meet_probability(g: &Digraph, a: usize, b: usize, steps: u32) -> BigRational {
    let n = g.node_count();
    let mut dist = vec![BigRational::zero(); n * n];
    dist[a * n + b] = BigRational::one();
    let mut met = BigRational::zero();
    for _ in 0..steps {
        let mut next = vec![BigRational::zero(); n * n];
        for (idx, p) in dist.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let (i, j) = (idx / n, idx % n);
            let q = p * step_prob(g, i) * step_prob(g, j);
            for ti in targets(g, i) {
                for tj in targets(g, j) {
                    next[ti * n + tj] += &q;
                }
            }
        }
        for v in 0..n {
            met += &next[v * n + v];
            next[v * n + v] = BigRational::zero();
        }
        dist = next;
    }
    met
}

/// Minimum of [`hit_probability`] over all ordered `(start, target)` pairs.
pub fn min_hit_probability(g: &Digraph, steps: u32) -> BigRational {
    let n = g.node_count();
    (0..n)
        .flat_map(|s| (0..n).map(move |t| (s, t)))
        .map(|(s, t)| hit_probability(g, s, t, steps))
        .min()
        .expect("graph has nodes")
}

/// Minimum of [`meet_probability`] over all pairs of distinct start nodes.
pub fn min_meet_probability(g: &Digraph, steps: u32) -> BigRational {
    let n = g.node_count();
    (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .map(|(a, b)| meet_probability(g, a, b, steps))
        .min()
        .expect("graph has at least two nodes")
}
