//! Deterministic input point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtgError};

/// Axis-aligned box in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(RtgError::InvalidDomain(format!(
                "bound vectors have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (axis, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(RtgError::InvalidDomain(format!(
                    "axis {axis}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval on every axis.
    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    /// `[-1, 1]^dim`.
    pub fn unit_box(dim: usize) -> Self {
        Self::cube(dim.max(1), -1.0, 1.0).expect("[-1, 1] is a valid interval")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }
}

/// Per-axis resolution `ceil(target^(1/d))`, computed in integers.
pub fn grid_resolution(target_count: usize, dim: usize) -> usize {
    if target_count <= 1 || dim == 0 {
        return 1;
    }
    // Float estimate, then fix up so that r^d >= target > (r-1)^d.
    let mut r = (target_count as f64).powf(1.0 / dim as f64).round().max(1.0) as usize;
    let reaches = |r: usize| match r.checked_pow(dim as u32) {
        Some(v) => v >= target_count,
        None => true,
    };
    while !reaches(r) {
        r += 1;
    }
    while r > 1 && reaches(r - 1) {
        r -= 1;
    }
    r
}

/// Endpoint-inclusive lattice with `ceil(target^(1/d))` points per axis, row-major
/// (last axis fastest).
pub fn grid_points(domain: &Domain, target_count: usize) -> Result<Vec<Vec<f64>>> {
    if target_count == 0 {
        return Err(RtgError::Empty("grid target count"));
    }
    let dim = domain.dim();
    let r = grid_resolution(target_count, dim);
    let total = r
        .checked_pow(dim as u32)
        .ok_or(RtgError::GridOverflow { resolution: r, dim })?;
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|a| axis_ticks(domain.lower[a], domain.upper[a], r))
        .collect();

    let mut points = Vec::with_capacity(total);
    let mut index = vec![0usize; dim];
    for _ in 0..total {
        points.push(index.iter().enumerate().map(|(a, &i)| axes[a][i]).collect());
        for a in (0..dim).rev() {
            index[a] += 1;
            if index[a] < r {
                break;
            }
            index[a] = 0;
        }
    }
    Ok(points)
}

// (lo*(r-1-i) + hi*i) / (r-1): exact mirror symmetry when lo = -hi.
fn axis_ticks(lo: f64, hi: f64, r: usize) -> Vec<f64> {
    if r == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let den = (r - 1) as f64;
    (0..r)
        .map(|i| (lo * (r - 1 - i) as f64 + hi * i as f64) / den)
        .collect()
}

/// I.i.d. uniform points in the box. Prefix-stable: the first `k` points of a
/// longer draw equal a draw of `k` with the same seed.
pub fn random_points(domain: &Domain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(&lo, &hi)| rng.gen_range(lo..hi))
                .collect()
        })
        .collect()
}
