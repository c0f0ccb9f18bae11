//! Combinatorial bounds on region counts and the checks run against them.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RtgError};
use crate::net::{self, MlpParams};
use crate::sampler::{self, Domain};

/// Either an exact integer or a real bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundValue {
    Exact(u128),
    Real(f64),
}

impl BoundValue {
    pub fn as_f64(self) -> f64 {
        match self {
            BoundValue::Exact(v) => v as f64,
            BoundValue::Real(v) => v,
        }
    }
}

impl fmt::Display for BoundValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundValue::Exact(v) => write!(f, "{v}"),
            BoundValue::Real(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub theoretical_value: BoundValue,
    pub empirical_value: f64,
    /// `margin >= 0`.
    pub satisfied: bool,
    /// Bound minus empirical value, in the bound's own units.
    pub margin: f64,
    /// False for degenerate inputs the bound says nothing useful about.
    pub applicable: bool,
}

impl BoundReport {
    fn new(name: &str, theoretical: BoundValue, empirical: f64, margin: f64) -> Self {
        Self {
            bound_name: name.to_string(),
            theoretical_value: theoretical,
            empirical_value: empirical,
            satisfied: margin >= 0.0,
            margin,
            applicable: true,
        }
    }

    /// Passed, or not applicable.
    pub fn ok(&self) -> bool {
        self.satisfied || !self.applicable
    }
}

/// `C(n, k)` in exact arithmetic.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `sum_{i=0}^{d} C(n, i)^L`.
pub fn theorem1_sum_bound(n: usize, d: usize, depth: usize) -> Result<u128> {
    (0..=d as u64).try_fold(0u128, |acc, i| {
        binomial(n as u64, i)
            .and_then(|c| c.checked_pow(depth as u32))
            .and_then(|t| acc.checked_add(t))
            .ok_or(RtgError::Overflow("summation region bound"))
    })
}

/// `(sum_{i=0}^{d} C(n, i))^L`, the per-layer product of single-layer
/// arrangement counts.
pub fn theorem1_product_bound(n: usize, d: usize, depth: usize) -> Result<u128> {
    let per_layer = (0..=d as u64)
        .try_fold(0u128, |acc, i| {
            binomial(n as u64, i).and_then(|c| acc.checked_add(c))
        })
        .ok_or(RtgError::Overflow("product region bound"))?;
    per_layer
        .checked_pow(depth as u32)
        .ok_or(RtgError::Overflow("product region bound"))
}

/// Region count against both the summation and the product form.
pub fn check_theorem1(observed_nodes: f64, n: usize, d: usize, depth: usize) -> Result<[BoundReport; 2]> {
    let sum = theorem1_sum_bound(n, d, depth)?;
    let product = theorem1_product_bound(n, d, depth)?;
    Ok([
        BoundReport::new(
            "theorem1_sum",
            BoundValue::Exact(sum),
            observed_nodes,
            sum as f64 - observed_nodes,
        ),
        BoundReport::new(
            "theorem1_product",
            BoundValue::Exact(product),
            observed_nodes,
            product as f64 - observed_nodes,
        ),
    ])
}

/// Entropy against `ln(d_avg + 1)`.
pub fn check_lemma2(entropy: f64, avg_degree: f64) -> BoundReport {
    let bound = (avg_degree + 1.0).ln();
    BoundReport::new("lemma2", BoundValue::Real(bound), entropy, entropy - bound)
}

/// Distinct activation patterns over `k` random points of `domain`.
pub fn vc_proxy(params: &MlpParams, domain: &Domain, seed: u64, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(RtgError::Empty("vc proxy point set"));
    }
    let points = sampler::random_points(domain, k, seed);
    let mut seen = HashSet::with_capacity(k);
    for x in &points {
        seen.insert(net::evaluate(params, x)?.1);
    }
    Ok(seen.len())
}

/// Pattern-count proxy against the largest component's diameter. A zero
/// diameter (single-node component) is reported as not applicable.
pub fn check_theorem3(vc_proxy: usize, diameter: usize) -> BoundReport {
    let mut report = BoundReport::new(
        "theorem3",
        BoundValue::Exact(diameter as u128),
        vc_proxy as f64,
        diameter as f64 - vc_proxy as f64,
    );
    report.applicable = diameter > 0;
    report
}

/// Fraction of nodes with `deg(v) <= 2 * d_avg`.
pub fn lemma3_fraction(adjacency: &[Vec<usize>]) -> Result<f64> {
    let n = adjacency.len();
    if n == 0 {
        return Err(RtgError::Empty("graph"));
    }
    let total: usize = adjacency.iter().map(Vec::len).sum();
    // deg <= 2 * total / n, compared in integers
    let sparse = adjacency.iter().filter(|a| a.len() * n <= 2 * total).count();
    Ok(sparse as f64 / n as f64)
}

pub fn check_lemma3(fraction: f64) -> BoundReport {
    BoundReport::new("lemma3", BoundValue::Real(0.5), fraction, fraction - 0.5)
}
