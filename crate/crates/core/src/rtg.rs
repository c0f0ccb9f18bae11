//! Activation patterns, region nodes and the transition graph.
//!
//! Nodes are the distinct patterns observed over a sample, ordered
//! lexicographically so ids are reproducible. Two nodes are joined iff their
//! patterns differ in exactly one bit; edges are found by probing the `m`
//! single-bit flips of every node rather than by comparing all pairs.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtgError};
use crate::metrics;
use crate::net::InitScheme;

pub const FORMAT_VERSION: u32 = 1;

/// Fixed-length bit vector. Bit 0 is the most significant bit of the first
/// word, so the derived ordering is lexicographic with bit 0 first.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActivationPattern {
    words: Vec<u64>,
    len: usize,
}

impl ActivationPattern {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut p = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            p.set(i, b);
        }
        p
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bit_str(s: &str) -> Option<Self> {
        let bits: Option<Vec<bool>> = s
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect();
        bits.map(|b| Self::from_bits(&b))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (63 - i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (63 - i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (63 - i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.len)
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect()
    }

    /// `ceil(len / 4)` lowercase hex digits; bit 0 is the high bit of the
    /// first digit and trailing padding bits are zero.
    pub fn to_hex(&self) -> String {
        (0..self.len.div_ceil(4))
            .map(|k| {
                let bit = 4 * k;
                let nibble = (self.words[bit / 64] >> (60 - bit % 64)) & 0xf;
                char::from_digit(nibble as u32, 16).expect("nibble < 16")
            })
            .collect()
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        if hex.len() != len.div_ceil(4) {
            return Err(RtgError::Malformed(format!(
                "pattern '{hex}' has {} hex digits, expected {} for m = {len}",
                hex.len(),
                len.div_ceil(4)
            )));
        }
        let mut p = Self::zeros(len);
        for (k, c) in hex.chars().enumerate() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| RtgError::Malformed(format!("invalid hex digit '{c}' in '{hex}'")))?
                as u64;
            let bit = 4 * k;
            p.words[bit / 64] |= nibble << (60 - bit % 64);
        }
        let pad = 4 * hex.len() - len;
        if pad > 0 {
            let last = hex.chars().last().and_then(|c| c.to_digit(16)).unwrap_or(0);
            if last & ((1 << pad) - 1) != 0 {
                return Err(RtgError::Malformed(format!(
                    "pattern '{hex}' sets padding bits beyond m = {len}"
                )));
            }
        }
        Ok(p)
    }
}

impl fmt::Debug for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActivationPattern({})", self.to_bit_string())
    }
}

impl fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

/// Number of differing bit positions.
pub fn hamming(p: &ActivationPattern, q: &ActivationPattern) -> Result<usize> {
    if p.len != q.len {
        return Err(RtgError::PatternLength {
            left: p.len,
            right: q.len,
        });
    }
    Ok(p.words
        .iter()
        .zip(&q.words)
        .map(|(a, b)| (a ^ b).count_ones() as usize)
        .sum())
}

/// One evaluated input point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub point: Vec<f64>,
    pub output: f64,
    pub pattern: ActivationPattern,
}

impl From<(Vec<f64>, (f64, ActivationPattern))> for Sample {
    fn from((point, (output, pattern)): (Vec<f64>, (f64, ActivationPattern))) -> Self {
        Self {
            point,
            output,
            pattern,
        }
    }
}

/// One observed linear region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionNode {
    pub id: usize,
    pub pattern: ActivationPattern,
    /// Number of samples mapped to this pattern; the region's volume proxy.
    pub sample_count: usize,
    /// First sample encountered with this pattern.
    pub representative: Vec<f64>,
    pub mean_output: f64,
}

/// Network the graph was built from; carried through the graph file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphMeta {
    pub d: usize,
    #[serde(rename = "L")]
    pub depth: usize,
    pub n: usize,
    pub seed: u64,
    /// Written only when it differs from the default scheme.
    #[serde(default, skip_serializing_if = "is_default_init")]
    pub init: InitScheme,
}

fn is_default_init(init: &InitScheme) -> bool {
    *init == InitScheme::default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    m: usize,
    meta: Option<GraphMeta>,
    nodes: Vec<RegionNode>,
    adjacency: Vec<Vec<usize>>,
}

impl TransitionGraph {
    pub fn bit_len(&self) -> usize {
        self.m
    }

    pub fn meta(&self) -> Option<&GraphMeta> {
        self.meta.as_ref()
    }

    pub fn with_meta(mut self, meta: GraphMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn nodes(&self) -> &[RegionNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &RegionNode {
        &self.nodes[id]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    pub fn degree(&self, id: usize) -> usize {
        self.adjacency[id].len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn total_samples(&self) -> usize {
        self.nodes.iter().map(|n| n.sample_count).sum()
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    /// Node id of `pattern`, by binary search over the sorted node list.
    pub fn find(&self, pattern: &ActivationPattern) -> Option<usize> {
        self.nodes.binary_search_by(|node| node.pattern.cmp(pattern)).ok()
    }

    /// Induced subgraph on `keep` (any order, no duplicates). Returns the
    /// subgraph and the new-id -> old-id map; relative node order is preserved.
    pub fn induced_subgraph(&self, keep: &[usize]) -> (TransitionGraph, Vec<usize>) {
        let mut old_ids = keep.to_vec();
        old_ids.sort_unstable();
        old_ids.dedup();
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in old_ids.iter().enumerate() {
            new_id[old] = new;
        }
        let nodes = old_ids
            .iter()
            .enumerate()
            .map(|(new, &old)| RegionNode {
                id: new,
                ..self.nodes[old].clone()
            })
            .collect();
        let adjacency = old_ids
            .iter()
            .map(|&old| {
                self.adjacency[old]
                    .iter()
                    .filter_map(|&j| (new_id[j] != usize::MAX).then_some(new_id[j]))
                    .collect()
            })
            .collect();
        (
            TransitionGraph {
                m: self.m,
                meta: self.meta,
                nodes,
                adjacency,
            },
            old_ids,
        )
    }
}

/// Builds the transition graph over the distinct patterns in `samples`.
pub fn build_rtg<I>(samples: I) -> Result<TransitionGraph>
where
    I: IntoIterator<Item = Sample>,
{
    struct Acc {
        count: usize,
        representative: Vec<f64>,
        mean: f64,
    }

    let mut m = None;
    let mut regions: HashMap<ActivationPattern, Acc> = HashMap::new();
    for s in samples {
        let expected = *m.get_or_insert(s.pattern.len());
        if s.pattern.len() != expected {
            return Err(RtgError::PatternLength {
                left: expected,
                right: s.pattern.len(),
            });
        }
        match regions.get_mut(&s.pattern) {
            Some(acc) => {
                acc.count += 1;
                // Running mean: exact when every output is equal.
                acc.mean += (s.output - acc.mean) / acc.count as f64;
            }
            None => {
                regions.insert(
                    s.pattern,
                    Acc {
                        count: 1,
                        representative: s.point,
                        mean: s.output,
                    },
                );
            }
        }
    }
    let m = m.ok_or(RtgError::Empty("sample set"))?;

    let mut entries: Vec<_> = regions.into_iter().collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let nodes: Vec<RegionNode> = entries
        .into_iter()
        .enumerate()
        .map(|(id, (pattern, acc))| RegionNode {
            id,
            pattern,
            sample_count: acc.count,
            representative: acc.representative,
            mean_output: acc.mean,
        })
        .collect();

    let index: HashMap<&ActivationPattern, usize> = nodes.iter().map(|n| (&n.pattern, n.id)).collect();
    let adjacency = nodes
        .par_iter()
        .map(|node| {
            let mut probe = node.pattern.clone();
            let mut adj = Vec::new();
            for bit in 0..m {
                probe.flip(bit);
                if let Some(&j) = index.get(&probe) {
                    adj.push(j);
                }
                probe.flip(bit);
            }
            adj.sort_unstable();
            adj
        })
        .collect();

    Ok(TransitionGraph {
        m,
        meta: None,
        nodes,
        adjacency,
    })
}

/// Largest connected component, ties going to the component holding the
/// smallest node id. Returns the component and its new-id -> old-id map.
pub fn largest_component(graph: &TransitionGraph) -> Result<(TransitionGraph, Vec<usize>)> {
    if graph.node_count() == 0 {
        return Err(RtgError::Empty("graph"));
    }
    let (count, labels) = metrics::connected_components(graph.adjacency());
    let mut sizes = vec![0usize; count];
    for &l in &labels {
        sizes[l] += 1;
    }
    // Labels are numbered by smallest member, so the first maximum wins ties.
    let best = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
        .expect("non-empty graph has a component");
    let keep: Vec<usize> = (0..graph.node_count()).filter(|&i| labels[i] == best).collect();
    Ok(graph.induced_subgraph(&keep))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    format_version: u32,
    m: usize,
    spec: Option<GraphMeta>,
    nodes: Vec<NodeRecord>,
    edges: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: usize,
    pattern_hex: String,
    count: usize,
    rep: Vec<f64>,
    mean_out: f64,
}

/// Writes the graph as a JSON document.
pub fn serialize(graph: &TransitionGraph) -> Vec<u8> {
    let file = GraphFile {
        format_version: FORMAT_VERSION,
        m: graph.m,
        spec: graph.meta,
        nodes: graph
            .nodes
            .iter()
            .map(|n| NodeRecord {
                id: n.id,
                pattern_hex: n.pattern.to_hex(),
                count: n.sample_count,
                rep: n.representative.clone(),
                mean_out: n.mean_output,
            })
            .collect(),
        edges: graph.edges().into_iter().map(|(i, j)| [i, j]).collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("graph file serializes");
    out.push(b'\n');
    out
}

/// Parses and validates a graph document. Nothing is returned unless the
/// whole document is well formed.
pub fn deserialize(bytes: &[u8]) -> Result<TransitionGraph> {
    let file: GraphFile = serde_json::from_slice(bytes).map_err(|e| RtgError::Parse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(RtgError::Malformed(format!(
            "unsupported format_version {}",
            file.format_version
        )));
    }

    let mut nodes = Vec::with_capacity(file.nodes.len());
    for (pos, rec) in file.nodes.into_iter().enumerate() {
        if rec.id != pos {
            return Err(RtgError::Malformed(format!(
                "nodes[{pos}]: id {} is not dense",
                rec.id
            )));
        }
        if rec.count == 0 {
            return Err(RtgError::Malformed(format!("nodes[{pos}]: count must be >= 1")));
        }
        let pattern = ActivationPattern::from_hex(&rec.pattern_hex, file.m)
            .map_err(|e| RtgError::Malformed(format!("nodes[{pos}]: {e}")))?;
        if let Some(prev) = nodes.last() {
            let prev: &RegionNode = prev;
            if prev.pattern.cmp(&pattern) != Ordering::Less {
                return Err(RtgError::Malformed(format!(
                    "nodes[{pos}]: patterns not in strictly increasing order"
                )));
            }
        }
        nodes.push(RegionNode {
            id: rec.id,
            pattern,
            sample_count: rec.count,
            representative: rec.rep,
            mean_output: rec.mean_out,
        });
    }

    let mut adjacency = vec![Vec::new(); nodes.len()];
    let mut last: Option<[usize; 2]> = None;
    for (pos, &[i, j]) in file.edges.iter().enumerate() {
        if !(i < j && j < nodes.len()) {
            return Err(RtgError::Malformed(format!(
                "edges[{pos}]: [{i}, {j}] needs i < j < {}",
                nodes.len()
            )));
        }
        if last.is_some_and(|l| l >= [i, j]) {
            return Err(RtgError::Malformed(format!(
                "edges[{pos}]: not sorted or duplicated"
            )));
        }
        if hamming(&nodes[i].pattern, &nodes[j].pattern)? != 1 {
            return Err(RtgError::Malformed(format!(
                "edges[{pos}]: patterns of {i} and {j} are not at Hamming distance 1"
            )));
        }
        adjacency[i].push(j);
        adjacency[j].push(i);
        last = Some([i, j]);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }

    Ok(TransitionGraph {
        m: file.m,
        meta: file.spec,
        nodes,
        adjacency,
    })
}
