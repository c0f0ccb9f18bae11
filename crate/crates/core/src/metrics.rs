//! Graph statistics: components, diameter, degrees and entropy.
//!
//! The graph routines take a plain adjacency list so they can be exercised on
//! arbitrary graphs, not only on ones realisable as transition graphs.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtgError};
use crate::rtg::{self, TransitionGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtgMetrics {
    pub node_count: usize,
    pub edge_count: usize,
    pub component_count: usize,
    pub largest_component_size: usize,
    pub avg_degree: f64,
    pub max_degree: usize,
    /// Diameter of the largest component.
    pub diameter: usize,
    /// `ln |V|`, nats.
    pub entropy_uniform: f64,
    /// Shannon entropy of the sample-count distribution, nats.
    pub entropy_empirical: f64,
}

pub fn compute_metrics(graph: &TransitionGraph) -> Result<RtgMetrics> {
    let (component_count, _) = connected_components(graph.adjacency());
    let (largest, _) = rtg::largest_component(graph)?;
    let stats = degree_stats(graph.adjacency())?;
    Ok(RtgMetrics {
        node_count: graph.node_count(),
        edge_count: graph.edge_count(),
        component_count,
        largest_component_size: largest.node_count(),
        avg_degree: stats.avg_degree,
        max_degree: stats.max_degree,
        diameter: diameter(largest.adjacency())?,
        entropy_uniform: entropy_uniform(graph.node_count())?,
        entropy_empirical: entropy_empirical(
            &graph.nodes().iter().map(|n| n.sample_count).collect::<Vec<_>>(),
        ),
    })
}

/// Component count and a label per node. Labels are dense and numbered in
/// order of each component's smallest node id.
pub fn connected_components(adjacency: &[Vec<usize>]) -> (usize, Vec<usize>) {
    let n = adjacency.len();
    let mut labels = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut count = 0;
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = count;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if labels[v] == usize::MAX {
                    labels[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    (count, labels)
}

/// BFS distances from `source`; `usize::MAX` marks unreachable nodes.
pub fn bfs_distances(adjacency: &[Vec<usize>], source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adjacency.len()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Largest BFS distance from `source` within its component.
pub fn eccentricity(adjacency: &[Vec<usize>], source: usize) -> usize {
    bfs_distances(adjacency, source)
        .into_iter()
        .filter(|&d| d != usize::MAX)
        .max()
        .unwrap_or(0)
}

/// Exact diameter by BFS from every node. Rejects disconnected graphs.
pub fn diameter(adjacency: &[Vec<usize>]) -> Result<usize> {
    if adjacency.is_empty() {
        return Err(RtgError::Empty("graph"));
    }
    let (components, _) = connected_components(adjacency);
    if components > 1 {
        return Err(RtgError::Disconnected { components });
    }
    Ok((0..adjacency.len())
        .into_par_iter()
        .map(|s| eccentricity(adjacency, s))
        .max()
        .unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub avg_degree: f64,
    pub max_degree: usize,
    pub histogram: BTreeMap<usize, usize>,
}

pub fn degree_stats(adjacency: &[Vec<usize>]) -> Result<DegreeStats> {
    if adjacency.is_empty() {
        return Err(RtgError::Empty("graph"));
    }
    let mut histogram = BTreeMap::new();
    let mut total = 0;
    for adj in adjacency {
        *histogram.entry(adj.len()).or_insert(0) += 1;
        total += adj.len();
    }
    Ok(DegreeStats {
        avg_degree: total as f64 / adjacency.len() as f64,
        max_degree: histogram.keys().next_back().copied().unwrap_or(0),
        histogram,
    })
}

/// `ln |V|`.
pub fn entropy_uniform(node_count: usize) -> Result<f64> {
    if node_count == 0 {
        return Err(RtgError::Empty("graph"));
    }
    Ok((node_count as f64).ln())
}

/// `-sum p ln p` with `p = count / total`; zero counts contribute nothing.
pub fn entropy_empirical(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

#[cfg(test)]
pub(crate) mod fixtures {
    /// Undirected adjacency from an edge list.
    pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }

    pub fn path(n: usize) -> Vec<Vec<usize>> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        adjacency(n, &edges)
    }

    pub fn complete(n: usize) -> Vec<Vec<usize>> {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        adjacency(n, &edges)
    }

    pub fn star(leaves: usize) -> Vec<Vec<usize>> {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        adjacency(leaves + 1, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn component_examples() {
        assert_eq!(connected_components(&path(5)).0, 1);
        assert_eq!(connected_components(&adjacency(4, &[])), (4, vec![0, 1, 2, 3]));
        let (count, labels) = connected_components(&adjacency(4, &[(0, 2), (1, 3)]));
        assert_eq!(count, 2);
        assert_eq!(labels, vec![0, 1, 0, 1]);
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(diameter(&path(5)).unwrap(), 4);
        assert_eq!(diameter(&adjacency(1, &[])).unwrap(), 0);
        assert_eq!(diameter(&complete(4)).unwrap(), 1);
        assert!(matches!(
            diameter(&adjacency(3, &[(0, 1)])),
            Err(RtgError::Disconnected { components: 2 })
        ));
    }

    #[test]
    fn degree_examples() {
        let k4 = degree_stats(&complete(4)).unwrap();
        assert_eq!((k4.avg_degree, k4.max_degree), (3.0, 3));
        let star = degree_stats(&star(5)).unwrap();
        assert_eq!(star.avg_degree, 10.0 / 6.0);
        assert_eq!(star.max_degree, 5);
        assert_eq!(star.histogram, BTreeMap::from([(1, 5), (5, 1)]));
        assert_eq!(degree_stats(&adjacency(1, &[])).unwrap().avg_degree, 0.0);
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy_uniform(4).unwrap() - 1.386294).abs() < 1e-6);
        assert_eq!(entropy_uniform(1).unwrap(), 0.0);
        assert!(entropy_uniform(5).unwrap() > entropy_uniform(4).unwrap());
        assert!((entropy_empirical(&[1, 1, 1, 1]) - 4f64.ln()).abs() < 1e-12);
        assert_eq!(entropy_empirical(&[4]), 0.0);
        // -(0.75 ln 0.75 + 0.25 ln 0.25)
        assert!((entropy_empirical(&[3, 1]) - 0.562335).abs() < 1e-6);
    }

    fn arb_graph() -> impl Strategy<Value = Vec<Vec<usize>>> {
        (1usize..30).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..60).prop_map(move |edges| {
                let edges: Vec<_> = edges.into_iter().filter(|(a, b)| a != b).collect();
                adjacency(n, &edges)
            })
        })
    }

    proptest! {
        #[test]
        fn empirical_entropy_at_most_uniform(counts in prop::collection::vec(1usize..1000, 1..50)) {
            let h = entropy_empirical(&counts);
            prop_assert!(h >= 0.0);
            prop_assert!(h <= entropy_uniform(counts.len()).unwrap() + 1e-12);
        }

        #[test]
        fn diameter_dominates_eccentricities(adj in arb_graph(), picks in prop::collection::vec(any::<prop::sample::Index>(), 3)) {
            let (_, labels) = connected_components(&adj);
            let keep: Vec<usize> = (0..adj.len()).filter(|&i| labels[i] == 0).collect();
            let mut remap = vec![usize::MAX; adj.len()];
            for (k, &i) in keep.iter().enumerate() { remap[i] = k; }
            let sub: Vec<Vec<usize>> = keep.iter().map(|&i| adj[i].iter().map(|&j| remap[j]).collect()).collect();
            let d = diameter(&sub).unwrap();
            for p in picks {
                prop_assert!(eccentricity(&sub, p.index(sub.len())) <= d);
            }
        }

        #[test]
        fn components_invariant_under_relabeling(adj in arb_graph(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let n = adj.len();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut permuted = vec![Vec::new(); n];
            for (i, l) in adj.iter().enumerate() {
                permuted[perm[i]] = l.iter().map(|&j| perm[j]).collect();
            }
            let (c1, l1) = connected_components(&adj);
            let (c2, l2) = connected_components(&permuted);
            prop_assert_eq!(c1, c2);
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(l1[i] == l1[j], l2[perm[i]] == l2[perm[j]]);
                }
            }
        }
    }
}
