//! Exact regions of a single hidden layer on a 2-D box.
//!
//! Each neuron of a one-layer network is a line `w . x + b = 0`. The cells of
//! the arrangement restricted to the box are enumerated by clipping the box
//! with one closed half-plane per line, depth first over lines, dropping
//! branches whose polygon has vanished. Two cells are adjacent when their sign
//! vectors differ in one line and their polygons share a segment on it.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtgError};
use crate::net::{self, Matrix, MlpParams, MlpSpec};
use crate::rtg::{self, ActivationPattern, Sample};
use crate::sampler::{self, Domain};

pub const MAX_LINES: usize = 16;
/// Parallel / concurrent tolerance for the genericity check.
pub const GENERIC_TOL: f64 = 1e-9;
/// Cells at or below this area are clipping slivers.
pub const AREA_FLOOR: f64 = 1e-12;
/// Shared boundary shorter than this does not make two cells adjacent.
pub const FACET_MIN_LEN: f64 = 1e-9;
/// Upper end of the doubling search for a sufficient grid resolution.
pub const MAX_SEARCH_RESOLUTION: usize = 1024;

type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2D {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl Line2D {
    pub fn new(normal: [f64; 2], offset: f64) -> Result<Self> {
        if !(normal[0].is_finite() && normal[1].is_finite() && offset.is_finite())
            || normal[0] == 0.0 && normal[1] == 0.0
        {
            return Err(RtgError::Degenerate(format!(
                "line normal {normal:?} with offset {offset} is zero or non-finite"
            )));
        }
        Ok(Self { normal, offset })
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        self.normal[0] * p[0] + self.normal[1] * p[1] + self.offset
    }

    fn norm(&self) -> f64 {
        self.normal[0].hypot(self.normal[1])
    }

    /// Signed Euclidean distance.
    pub fn distance(&self, p: Point) -> f64 {
        self.eval(p) / self.norm()
    }

    /// Coordinate along the line direction.
    fn along(&self, p: Point) -> f64 {
        (-self.normal[1] * p[0] + self.normal[0] * p[1]) / self.norm()
    }

    pub fn intersection(&self, other: &Line2D) -> Option<Point> {
        let det = self.normal[0] * other.normal[1] - self.normal[1] * other.normal[0];
        if det == 0.0 {
            return None;
        }
        Some([
            (self.normal[1] * other.offset - other.normal[1] * self.offset) / det,
            (other.normal[0] * self.offset - self.normal[0] * other.offset) / det,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    /// Bit `k` set iff line `k` is strictly positive on the cell.
    #[serde(with = "pattern_bits")]
    pub signs: ActivationPattern,
    /// Counter-clockwise vertices of the cell clipped to the box.
    pub polygon: Vec<Point>,
    pub area: f64,
}

mod pattern_bits {
    use super::ActivationPattern;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &ActivationPattern, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&p.to_bit_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ActivationPattern, D::Error> {
        let s = String::deserialize(d)?;
        ActivationPattern::from_bit_str(&s).ok_or_else(|| serde::de::Error::custom("expected 0/1 string"))
    }
}

/// Rejects parallel pairs and concurrent triples.
pub fn check_generic(lines: &[Line2D]) -> Result<()> {
    for (i, a) in lines.iter().enumerate() {
        for (j, b) in lines.iter().enumerate().skip(i + 1) {
            let sin = (a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0]) / (a.norm() * b.norm());
            if sin.abs() < GENERIC_TOL {
                return Err(RtgError::Degenerate(format!("lines {i} and {j} are parallel")));
            }
            let p = a.intersection(b).expect("non-parallel lines intersect");
            for (k, c) in lines.iter().enumerate().skip(j + 1) {
                if c.distance(p).abs() < GENERIC_TOL {
                    return Err(RtgError::Degenerate(format!(
                        "lines {i}, {j} and {k} are concurrent"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn box_polygon(domain: &Domain) -> Result<Vec<Point>> {
    if domain.dim() != 2 {
        return Err(RtgError::InvalidDomain(format!(
            "the arrangement oracle is planar, got dimension {}",
            domain.dim()
        )));
    }
    let (lo, hi) = (domain.lower(), domain.upper());
    Ok(vec![
        [lo[0], lo[1]],
        [hi[0], lo[1]],
        [hi[0], hi[1]],
        [lo[0], hi[1]],
    ])
}

/// Keeps the part of a convex polygon where `sign * line(x) >= 0`.
fn clip(polygon: &[Point], line: &Line2D, positive: bool) -> Vec<Point> {
    let side = |p: Point| if positive { line.eval(p) } else { -line.eval(p) };
    let mut out = Vec::with_capacity(polygon.len() + 1);
    for (i, &cur) in polygon.iter().enumerate() {
        let prev = polygon[(i + polygon.len() - 1) % polygon.len()];
        let (dc, dp) = (side(cur), side(prev));
        if (dc >= 0.0) != (dp >= 0.0) {
            let t = dp / (dp - dc);
            push_distinct(
                &mut out,
                [prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])],
            );
        }
        if dc >= 0.0 {
            push_distinct(&mut out, cur);
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

fn push_distinct(out: &mut Vec<Point>, p: Point) {
    if out.last() != Some(&p) {
        out.push(p);
    }
}

/// Shoelace area (positive for counter-clockwise order).
pub fn polygon_area(polygon: &[Point]) -> f64 {
    if polygon.len() < 3 {
        return 0.0;
    }
    let twice: f64 = (0..polygon.len())
        .map(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % polygon.len()]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice
}

/// All cells of the arrangement inside the box, in sign-vector order.
pub fn enumerate_cells(lines: &[Line2D], domain: &Domain) -> Result<Vec<CellRecord>> {
    if lines.len() > MAX_LINES {
        return Err(RtgError::Degenerate(format!(
            "{} lines exceeds the enumeration limit of {MAX_LINES}",
            lines.len()
        )));
    }
    check_generic(lines)?;
    let mut cells = Vec::new();
    let mut signs = ActivationPattern::zeros(lines.len());
    descend(lines, 0, box_polygon(domain)?, &mut signs, &mut cells);
    Ok(cells)
}

fn descend(
    lines: &[Line2D],
    k: usize,
    polygon: Vec<Point>,
    signs: &mut ActivationPattern,
    cells: &mut Vec<CellRecord>,
) {
    let area = polygon_area(&polygon);
    if area <= AREA_FLOOR {
        return;
    }
    if k == lines.len() {
        cells.push(CellRecord {
            signs: signs.clone(),
            polygon,
            area,
        });
        return;
    }
    for positive in [false, true] {
        signs.set(k, positive);
        descend(lines, k + 1, clip(&polygon, &lines[k], positive), signs, cells);
    }
    signs.set(k, false);
}

// Interval along `line` covered by the polygon's vertices lying on it.
fn span_on_line(polygon: &[Point], line: &Line2D) -> Option<(f64, f64)> {
    let ts: Vec<f64> = polygon
        .iter()
        .filter(|p| line.distance(**p).abs() <= GENERIC_TOL)
        .map(|p| line.along(*p))
        .collect();
    if ts.len() < 2 {
        return None;
    }
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

/// Facet adjacencies between cells, as `(i, j)` index pairs with `i < j`.
pub fn oracle_adjacency(cells: &[CellRecord], lines: &[Line2D]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            let (a, b) = (&cells[i], &cells[j]);
            if rtg::hamming(&a.signs, &b.signs).ok() != Some(1) {
                continue;
            }
            let k = (0..lines.len())
                .find(|&k| a.signs.get(k) != b.signs.get(k))
                .expect("one differing line");
            if let (Some(sa), Some(sb)) = (
                span_on_line(&a.polygon, &lines[k]),
                span_on_line(&b.polygon, &lines[k]),
            ) {
                if sa.1.min(sb.1) - sa.0.max(sb.0) > FACET_MIN_LEN {
                    edges.push((i, j));
                }
            }
        }
    }
    edges
}

/// One-hidden-layer network whose neurons are exactly `lines`; the head sums
/// the hidden units.
pub fn network_from_lines(lines: &[Line2D]) -> Result<MlpParams> {
    let spec = MlpSpec::new(2, 1, lines.len())?;
    let first = Matrix::from_rows(&lines.iter().map(|l| l.normal.to_vec()).collect::<Vec<_>>())?;
    let head = Matrix::from_rows(&[vec![1.0; lines.len()]])?;
    MlpParams::from_layers(
        spec,
        vec![first, head],
        vec![lines.iter().map(|l| l.offset).collect(), vec![0.0]],
    )
}

/// Random lines in general position whose pairwise intersections all fall
/// inside the box shrunk by 5%, with every cell of area at least `min_area`.
pub fn generic_lines(n: usize, seed: u64, domain: &Domain, min_area: f64) -> Result<Vec<Line2D>> {
    if n == 0 || n > MAX_LINES {
        return Err(RtgError::Degenerate(format!(
            "line count {n} outside 1..={MAX_LINES}"
        )));
    }
    let poly = box_polygon(domain)?;
    let center = [0.5 * (poly[0][0] + poly[2][0]), 0.5 * (poly[0][1] + poly[2][1])];
    let half = [0.5 * (poly[2][0] - poly[0][0]), 0.5 * (poly[2][1] - poly[0][1])];
    let inner = |p: Point| (0..2).all(|a| (p[a] - center[a]).abs() <= 0.95 * half[a]);
    let spread = 0.3 * half[0].min(half[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..10_000 {
        let lines: Vec<Line2D> = (0..n)
            .map(|k| {
                let theta = std::f64::consts::PI * (k as f64 + rng.gen_range(-0.3..0.3)) / n as f64;
                let normal = [theta.cos(), theta.sin()];
                let shift = rng.gen_range(-spread..spread);
                Line2D {
                    normal,
                    offset: -(normal[0] * center[0] + normal[1] * center[1]) + shift,
                }
            })
            .collect();
        if check_generic(&lines).is_err() {
            continue;
        }
        let crossings_inside = lines.iter().enumerate().all(|(i, a)| {
            lines[i + 1..]
                .iter()
                .all(|b| a.intersection(b).is_some_and(inner))
        });
        if !crossings_inside {
            continue;
        }
        let cells = enumerate_cells(&lines, domain)?;
        if cells.len() == arrangement_cell_count(n) && cells.iter().all(|c| c.area >= min_area) {
            return Ok(lines);
        }
    }
    Err(RtgError::Degenerate(format!(
        "no well-conditioned arrangement of {n} lines found for seed {seed}"
    )))
}

/// `1 + n + C(n, 2)`: cells of `n` generic lines crossing pairwise inside the box.
pub fn arrangement_cell_count(n: usize) -> usize {
    1 + n + n * n.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub lines: usize,
    pub resolution: usize,
    pub oracle_cells: usize,
    pub oracle_edges: usize,
    pub rtg_nodes: usize,
    pub rtg_edges: usize,
    pub nodes_match: bool,
    pub edges_match: bool,
    /// Oracle cells with no grid sample, as bit strings.
    pub missing_cells: Vec<String>,
    /// Sampled patterns the oracle does not know (should never happen).
    pub extra_nodes: Vec<String>,
    pub missing_edges: Vec<(String, String)>,
    pub extra_edges: Vec<(String, String)>,
    /// Smallest power of two per axis at which node and edge sets match.
    pub min_sufficient_resolution: Option<usize>,
}

impl OracleComparison {
    pub fn matches(&self) -> bool {
        self.nodes_match && self.edges_match
    }
}

type EdgeSet = BTreeSet<(ActivationPattern, ActivationPattern)>;

fn sampled_sets(
    params: &MlpParams,
    domain: &Domain,
    resolution: usize,
) -> Result<(BTreeSet<ActivationPattern>, EdgeSet)> {
    let target = resolution
        .checked_mul(resolution)
        .ok_or(RtgError::GridOverflow { resolution, dim: 2 })?;
    let points = sampler::grid_points(domain, target)?;
    let evals = net::forward_batch(params, &points)?;
    let graph = rtg::build_rtg(points.into_iter().zip(evals).map(Sample::from))?;
    let nodes = graph.nodes().iter().map(|n| n.pattern.clone()).collect();
    let edges = graph
        .edges()
        .into_iter()
        .map(|(i, j)| (graph.node(i).pattern.clone(), graph.node(j).pattern.clone()))
        .collect();
    Ok((nodes, edges))
}

/// Compares the sampled transition graph of the network realising `lines`
/// against the exact arrangement at `resolution` points per axis.
pub fn oracle_vs_rtg(lines: &[Line2D], domain: &Domain, resolution: usize) -> Result<OracleComparison> {
    let cells = enumerate_cells(lines, domain)?;
    let oracle_nodes: BTreeSet<ActivationPattern> = cells.iter().map(|c| c.signs.clone()).collect();
    let oracle_edges: EdgeSet = oracle_adjacency(&cells, lines)
        .into_iter()
        .map(|(i, j)| (cells[i].signs.clone(), cells[j].signs.clone()))
        .collect();
    let params = network_from_lines(lines)?;
    let (nodes, edges) = sampled_sets(&params, domain, resolution)?;

    let bits = |p: &ActivationPattern| p.to_bit_string();
    let pair = |e: &(ActivationPattern, ActivationPattern)| (bits(&e.0), bits(&e.1));

    let mut min_sufficient_resolution = None;
    let mut r = 2;
    while r <= MAX_SEARCH_RESOLUTION {
        let (n, e) = sampled_sets(&params, domain, r)?;
        if n == oracle_nodes && e == oracle_edges {
            min_sufficient_resolution = Some(r);
            break;
        }
        r *= 2;
    }

    Ok(OracleComparison {
        lines: lines.len(),
        resolution,
        oracle_cells: oracle_nodes.len(),
        oracle_edges: oracle_edges.len(),
        rtg_nodes: nodes.len(),
        rtg_edges: edges.len(),
        nodes_match: nodes == oracle_nodes,
        edges_match: edges == oracle_edges,
        missing_cells: oracle_nodes.difference(&nodes).map(bits).collect(),
        extra_nodes: nodes.difference(&oracle_nodes).map(bits).collect(),
        missing_edges: oracle_edges.difference(&edges).map(pair).collect(),
        extra_edges: edges.difference(&oracle_edges).map(pair).collect(),
        min_sufficient_resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Domain {
        Domain::unit_box(2)
    }

    fn line(a: f64, b: f64, c: f64) -> Line2D {
        Line2D::new([a, b], c).unwrap()
    }

    // x = 0, y = 0, x + y = 0.5: crossings (0,0), (0,0.5), (0.5,0).
    fn three_lines() -> Vec<Line2D> {
        vec![line(1.0, 0.0, 0.0), line(0.0, 1.0, 0.0), line(1.0, 1.0, -0.5)]
    }

    #[test]
    fn one_line_two_cells() {
        let lines = vec![line(1.0, 0.0, 0.2)];
        let cells = enumerate_cells(&lines, &unit()).unwrap();
        assert_eq!(cells.len(), 2);
        assert!((cells[0].area - 0.8 * 2.0).abs() < 1e-12);
        assert!((cells[1].area - 1.2 * 2.0).abs() < 1e-12);
        assert_eq!(oracle_adjacency(&cells, &lines), vec![(0, 1)]);
    }

    #[test]
    fn three_lines_seven_cells_nine_edges() {
        let lines = three_lines();
        let cells = enumerate_cells(&lines, &unit()).unwrap();
        assert_eq!(cells.len(), 7);
        assert_eq!(
            cells.len() as u128,
            crate::bounds::theorem1_sum_bound(3, 2, 1).unwrap()
        );
        let total: f64 = cells.iter().map(|c| c.area).sum();
        assert!((total - 4.0).abs() < 1e-12);
        // Inner triangle x > 0, y > 0, x + y < 0.5 has area 1/8.
        let inner = cells.iter().find(|c| c.signs.to_bit_string() == "110").unwrap();
        assert!((inner.area - 0.125).abs() < 1e-12);
        // Signs 001 (x<0, y<0, x+y>0.5) are infeasible.
        assert!(cells.iter().all(|c| c.signs.to_bit_string() != "001"));
        let edges = oracle_adjacency(&cells, &lines);
        assert_eq!(edges.len(), 9);
        for &(i, j) in &edges {
            assert_eq!(rtg::hamming(&cells[i].signs, &cells[j].signs).unwrap(), 1);
        }
    }

    #[test]
    fn order_and_sign_convention() {
        let lines = three_lines();
        let cells = enumerate_cells(&lines, &unit()).unwrap();
        assert!(cells.windows(2).all(|w| w[0].signs < w[1].signs));
        for c in &cells {
            let cx = c.polygon.iter().map(|p| p[0]).sum::<f64>() / c.polygon.len() as f64;
            let cy = c.polygon.iter().map(|p| p[1]).sum::<f64>() / c.polygon.len() as f64;
            for (k, l) in lines.iter().enumerate() {
                assert_eq!(l.eval([cx, cy]) > 0.0, c.signs.get(k));
            }
        }
    }

    #[test]
    fn hamming_two_never_adjacent() {
        // Two lines crossing at the origin: opposite quadrants touch at a point only.
        let lines = vec![line(1.0, 0.0, 0.0), line(0.0, 1.0, 0.0)];
        let cells = enumerate_cells(&lines, &unit()).unwrap();
        assert_eq!(cells.len(), 4);
        let edges = oracle_adjacency(&cells, &lines);
        assert_eq!(edges.len(), 4);
        for (i, j) in edges {
            assert_eq!(rtg::hamming(&cells[i].signs, &cells[j].signs).unwrap(), 1);
        }
    }

    #[test]
    fn degenerate_sets_rejected() {
        let parallel = vec![line(1.0, 0.0, 0.0), line(2.0, 0.0, 0.5)];
        assert!(matches!(
            enumerate_cells(&parallel, &unit()),
            Err(RtgError::Degenerate(_))
        ));
        let concurrent = vec![line(1.0, 0.0, 0.0), line(0.0, 1.0, 0.0), line(1.0, 1.0, 0.0)];
        assert!(matches!(
            enumerate_cells(&concurrent, &unit()),
            Err(RtgError::Degenerate(_))
        ));
        assert!(Line2D::new([0.0, 0.0], 1.0).is_err());
        let too_many: Vec<Line2D> = (0..17)
            .map(|k| line((k as f64).cos(), (k as f64).sin(), 0.01 * k as f64))
            .collect();
        assert!(enumerate_cells(&too_many, &unit()).is_err());
        assert!(enumerate_cells(&three_lines(), &Domain::unit_box(3)).is_err());
    }

    #[test]
    fn generated_lines_are_full_arrangements() {
        for n in 1..=8 {
            for seed in 0..3 {
                let lines = generic_lines(n, seed, &unit(), 1e-4).unwrap();
                let cells = enumerate_cells(&lines, &unit()).unwrap();
                assert_eq!(cells.len(), arrangement_cell_count(n));
                let total: f64 = cells.iter().map(|c| c.area).sum();
                assert!((total - 4.0).abs() / 4.0 < 1e-8);
            }
        }
    }

    #[test]
    fn network_realises_lines() {
        let lines = three_lines();
        let params = network_from_lines(&lines).unwrap();
        let (_, p) = net::evaluate(&params, &[0.1, 0.1]).unwrap();
        assert_eq!(p.to_bit_string(), "110");
    }

    #[test]
    fn single_line_matches_at_any_grid() {
        let lines = vec![line(0.3, 1.0, 0.1)];
        for r in [4, 17, 64] {
            let cmp = oracle_vs_rtg(&lines, &unit(), r).unwrap();
            assert!(cmp.matches(), "{cmp:?}");
        }
    }

    #[test]
    fn coarse_grid_reports_missing_cells() {
        let lines = generic_lines(6, 1, &unit(), 1e-4).unwrap();
        let cmp = oracle_vs_rtg(&lines, &unit(), 4).unwrap();
        assert!(!cmp.nodes_match);
        assert!(!cmp.missing_cells.is_empty());
        assert_eq!(cmp.oracle_cells, 22);
        assert!(cmp.extra_nodes.is_empty());
        assert_eq!(cmp.rtg_nodes + cmp.missing_cells.len(), cmp.oracle_cells);
    }
}
