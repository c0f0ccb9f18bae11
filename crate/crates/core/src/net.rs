//! Fully connected ReLU MLPs with scalar output.
//!
//! Parameters are stored as dense row-major matrices. Evaluation records the
//! pre-activation of every hidden neuron so that activation patterns can be
//! read off without a second pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtgError};
use crate::rtg::ActivationPattern;

/// Bias entries are drawn uniformly from `[-BIAS_RANGE, BIAS_RANGE]`.
pub const BIAS_RANGE: f64 = 0.1;

/// Shape of an MLP: `input_dim -> width x depth -> 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub depth: usize,
    pub width: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, depth: usize, width: usize) -> Result<Self> {
        let spec = Self {
            input_dim,
            depth,
            width,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.depth == 0 || self.width == 0 {
            return Err(RtgError::InvalidSpec(format!(
                "input_dim, depth and width must be positive (got {}, {}, {})",
                self.input_dim, self.depth, self.width
            )));
        }
        Ok(())
    }

    /// Total number of ReLU units, `depth * width`.
    pub fn relu_count(&self) -> usize {
        self.depth * self.width
    }

    /// `(rows, cols)` of every affine map, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.depth + 1);
        shapes.push((self.width, self.input_dim));
        for _ in 1..self.depth {
            shapes.push((self.width, self.width));
        }
        shapes.push((1, self.width));
        shapes
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(RtgError::DimensionMismatch {
                expected: cols,
                actual: bad.len(),
            });
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn affine_into(&self, bias: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias[i]),
        );
    }
}

/// Weights and biases of an MLP. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    spec: MlpSpec,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Assembles parameters from explicit layers, checking shapes and finiteness.
    pub fn from_layers(spec: MlpSpec, weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        if weights.len() != shapes.len() || biases.len() != shapes.len() {
            return Err(RtgError::InvalidSpec(format!(
                "expected {} layers, got {} weight matrices and {} bias vectors",
                shapes.len(),
                weights.len(),
                biases.len()
            )));
        }
        for ((w, b), &(rows, cols)) in weights.iter().zip(&biases).zip(&shapes) {
            if w.rows != rows || w.cols != cols {
                return Err(RtgError::InvalidSpec(format!(
                    "weight matrix is {}x{}, expected {rows}x{cols}",
                    w.rows, w.cols
                )));
            }
            if b.len() != rows {
                return Err(RtgError::DimensionMismatch {
                    expected: rows,
                    actual: b.len(),
                });
            }
            if !w.data.iter().chain(b).all(|v| v.is_finite()) {
                return Err(RtgError::InvalidSpec("non-finite parameter".into()));
            }
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    /// All-zero parameters; every pre-activation and the output are 0.
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        let weights = shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        let biases = shapes.iter().map(|&(r, _)| vec![0.0; r]).collect();
        Self::from_layers(spec, weights, biases)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    pub output: f64,
    /// One vector per hidden layer, recorded before clamping.
    pub preactivations: Vec<Vec<f64>>,
}

/// Parameter initialisation. Both draw every entry i.i.d. uniform on a
/// symmetric interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Weights on `±sqrt(6 / (fan_in + fan_out))`, biases on `±0.1`.
    Glorot,
    /// Weights and biases on `±1 / sqrt(fan_in)` (the usual `Linear` layer default).
    #[default]
    FanIn,
}

impl InitScheme {
    /// `(weight_limit, bias_limit)` for a layer.
    pub fn limits(self, fan_in: usize, fan_out: usize) -> (f64, f64) {
        match self {
            InitScheme::Glorot => (glorot_limit(fan_in, fan_out), BIAS_RANGE),
            InitScheme::FanIn => {
                let a = 1.0 / (fan_in as f64).sqrt();
                (a, a)
            }
        }
    }
}

/// Seeded ChaCha8 initialisation with the Glorot scheme. Experiments use
/// [`InitScheme::default`] through [`init_mlp_with`].
pub fn init_mlp(spec: &MlpSpec, seed: u64) -> MlpParams {
    init_mlp_with(spec, seed, InitScheme::Glorot)
}

/// Layers are filled in order, each weight matrix row-major followed by its
/// bias vector, so the parameters are fixed by `(spec, seed, scheme)` alone.
pub fn init_mlp_with(spec: &MlpSpec, seed: u64, scheme: InitScheme) -> MlpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(spec.depth + 1);
    let mut biases = Vec::with_capacity(spec.depth + 1);
    for (rows, cols) in spec.layer_shapes() {
        let (w_limit, b_limit) = scheme.limits(cols, rows);
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-w_limit..=w_limit))
            .collect();
        weights.push(Matrix { rows, cols, data });
        biases.push((0..rows).map(|_| rng.gen_range(-b_limit..=b_limit)).collect());
    }
    MlpParams {
        spec: *spec,
        weights,
        biases,
    }
}

/// `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn forward(params: &MlpParams, x: &[f64]) -> Result<ForwardResult> {
    check_input(params, x)?;
    let depth = params.spec.depth;
    let mut preactivations = Vec::with_capacity(depth);
    let mut hidden = x.to_vec();
    let mut z = Vec::with_capacity(params.spec.width);
    for layer in 0..depth {
        params.weights[layer].affine_into(&params.biases[layer], &hidden, &mut z);
        hidden.clear();
        hidden.extend(z.iter().map(|v| v.max(0.0)));
        preactivations.push(z.clone());
    }
    params.weights[depth].affine_into(&params.biases[depth], &hidden, &mut z);
    Ok(ForwardResult {
        output: z[0],
        preactivations,
    })
}

/// Bit `layer * width + neuron` is set iff that pre-activation is strictly positive.
pub fn activation_pattern(result: &ForwardResult) -> ActivationPattern {
    let len = result.preactivations.iter().map(Vec::len).sum();
    let mut pattern = ActivationPattern::zeros(len);
    for (i, z) in result.preactivations.iter().flatten().enumerate() {
        if *z > 0.0 {
            pattern.set(i, true);
        }
    }
    pattern
}

/// Output and pattern without materialising pre-activation vectors.
pub fn evaluate(params: &MlpParams, x: &[f64]) -> Result<(f64, ActivationPattern)> {
    check_input(params, x)?;
    let MlpSpec { depth, width, .. } = params.spec;
    let mut pattern = ActivationPattern::zeros(depth * width);
    let mut hidden = x.to_vec();
    let mut z = Vec::with_capacity(width);
    for layer in 0..depth {
        params.weights[layer].affine_into(&params.biases[layer], &hidden, &mut z);
        hidden.clear();
        for (j, &v) in z.iter().enumerate() {
            if v > 0.0 {
                pattern.set(layer * width + j, true);
            }
            hidden.push(v.max(0.0));
        }
    }
    params.weights[depth].affine_into(&params.biases[depth], &hidden, &mut z);
    Ok((z[0], pattern))
}

/// Evaluates every point; result order matches input order.
pub fn forward_batch(params: &MlpParams, points: &[Vec<f64>]) -> Result<Vec<(f64, ActivationPattern)>> {
    points.par_iter().map(|x| evaluate(params, x)).collect()
}

fn check_input(params: &MlpParams, x: &[f64]) -> Result<()> {
    if x.len() != params.spec.input_dim {
        return Err(RtgError::DimensionMismatch {
            expected: params.spec.input_dim,
            actual: x.len(),
        });
    }
    Ok(())
}
