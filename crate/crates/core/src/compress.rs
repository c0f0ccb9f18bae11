//! Degree-based pruning of the transition graph and the smoothed function it
//! induces.
//!
//! Surviving regions keep the network's exact output. Each pruned region is
//! replaced by a constant: the mean of `mean_output` over the nearest
//! surviving regions in the graph (its surviving neighbours when it has any,
//! otherwise the first BFS layer through pruned nodes that reaches one).

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtgError};
use crate::net::{self, MlpParams};
use crate::rtg::{ActivationPattern, TransitionGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct Pruning {
    /// Induced subgraph on the survivors.
    pub core: TransitionGraph,
    /// Core id -> original id.
    pub core_ids: Vec<usize>,
    /// Per original node, whether it was removed.
    pub pruned: Vec<bool>,
}

impl Pruning {
    pub fn pruned_count(&self) -> usize {
        self.pruned.iter().filter(|&&p| p).count()
    }

    pub fn pruned_ids(&self) -> Vec<usize> {
        (0..self.pruned.len()).filter(|&i| self.pruned[i]).collect()
    }
}

/// Removes the `floor(fraction * |V|)` nodes of lowest degree, ties broken by
/// pattern order (which is node id order).
pub fn prune_by_degree(graph: &TransitionGraph, fraction: f64) -> Result<Pruning> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(RtgError::Fraction(fraction));
    }
    let n = graph.node_count();
    if n < 2 {
        return Err(RtgError::TooFewNodes { needed: 2, actual: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (graph.degree(i), i));
    let remove = (fraction * n as f64).floor() as usize;
    let mut pruned = vec![false; n];
    for &i in &order[..remove] {
        pruned[i] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !pruned[i]).collect();
    let (core, core_ids) = graph.induced_subgraph(&keep);
    Ok(Pruning {
        core,
        core_ids,
        pruned,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Unweighted mean of neighbouring region outputs.
    #[default]
    Uniform,
    /// Mean weighted by neighbour sample counts.
    SampleCount,
}

/// `f_core`: the original network on surviving regions, a per-region constant
/// on pruned ones.
#[derive(Debug, Clone)]
pub struct CoreModel<'g> {
    graph: &'g TransitionGraph,
    /// `None` for surviving nodes.
    replacement: Vec<Option<f64>>,
    unreachable: usize,
}

impl<'g> CoreModel<'g> {
    pub fn new(graph: &'g TransitionGraph, pruned: &[bool], smoothing: Smoothing) -> Self {
        assert_eq!(pruned.len(), graph.node_count(), "pruned mask length");
        let mut unreachable = 0;
        let replacement = (0..graph.node_count())
            .map(|v| {
                pruned[v].then(|| match nearest_survivors(graph, pruned, v) {
                    Some(layer) => weighted_mean(graph, &layer, smoothing),
                    None => {
                        unreachable += 1;
                        graph.node(v).mean_output
                    }
                })
            })
            .collect();
        Self {
            graph,
            replacement,
            unreachable,
        }
    }

    /// Pruned nodes whose component has no survivor.
    pub fn unreachable_pruned_nodes(&self) -> usize {
        self.unreachable
    }

    /// Smoothed value of a pruned node, `None` if the node survived.
    pub fn replacement(&self, node: usize) -> Option<f64> {
        self.replacement[node]
    }

    /// `f_core` given the pattern and exact output at some point.
    pub fn predict_with(&self, pattern: &ActivationPattern, output: f64) -> Result<f64> {
        let node = self
            .graph
            .find(pattern)
            .ok_or_else(|| RtgError::UnknownPattern(pattern.to_hex()))?;
        Ok(self.replacement[node].unwrap_or(output))
    }

    pub fn predict(&self, params: &MlpParams, x: &[f64]) -> Result<f64> {
        let (output, pattern) = net::evaluate(params, x)?;
        self.predict_with(&pattern, output)
    }
}

// First BFS layer from `start` (walking through pruned nodes only) that
// contains a survivor; returns the survivors of that layer.
fn nearest_survivors(graph: &TransitionGraph, pruned: &[bool], start: usize) -> Option<Vec<usize>> {
    let mut seen = vec![false; graph.node_count()];
    seen[start] = true;
    let mut frontier = VecDeque::from([start]);
    while !frontier.is_empty() {
        let mut next = VecDeque::new();
        let mut survivors = Vec::new();
        for u in frontier {
            for &v in graph.neighbors(u) {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                if pruned[v] {
                    next.push_back(v);
                } else {
                    survivors.push(v);
                }
            }
        }
        if !survivors.is_empty() {
            survivors.sort_unstable();
            return Some(survivors);
        }
        frontier = next;
    }
    None
}

fn weighted_mean(graph: &TransitionGraph, nodes: &[usize], smoothing: Smoothing) -> f64 {
    match smoothing {
        Smoothing::Uniform => {
            nodes.iter().map(|&v| graph.node(v).mean_output).sum::<f64>() / nodes.len() as f64
        }
        Smoothing::SampleCount => {
            let (num, den) = nodes.iter().fold((0.0, 0.0), |(num, den), &v| {
                let node = graph.node(v);
                let w = node.sample_count as f64;
                (num + w * node.mean_output, den + w)
            });
            num / den
        }
    }
}

/// `max |f(x) - f_core(x)|` over `points`.
pub fn sup_error(params: &MlpParams, model: &CoreModel<'_>, points: &[Vec<f64>]) -> Result<f64> {
    let errors: Result<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            let (output, pattern) = net::evaluate(params, x)?;
            Ok((output - model.predict_with(&pattern, output)?).abs())
        })
        .collect();
    Ok(errors?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub pruned_fraction: f64,
    pub pruned_nodes: usize,
    pub surviving_nodes: usize,
    pub surviving_edges: usize,
    pub sup_error: f64,
    pub unreachable_pruned_nodes: usize,
}

/// Prunes, smooths and measures the sup-norm error on `points`.
pub fn compress(
    params: &MlpParams,
    graph: &TransitionGraph,
    points: &[Vec<f64>],
    fraction: f64,
    smoothing: Smoothing,
) -> Result<CompressionReport> {
    let pruning = prune_by_degree(graph, fraction)?;
    let model = CoreModel::new(graph, &pruning.pruned, smoothing);
    Ok(CompressionReport {
        pruned_fraction: fraction,
        pruned_nodes: pruning.pruned_count(),
        surviving_nodes: pruning.core.node_count(),
        surviving_edges: pruning.core.edge_count(),
        sup_error: sup_error(params, &model, points)?,
        unreachable_pruned_nodes: model.unreachable_pruned_nodes(),
    })
}
