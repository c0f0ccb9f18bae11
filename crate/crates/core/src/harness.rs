//! Experiment orchestration: configuration, single runs, seed sweeps and
//! their CSV / JSON output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundReport};
use crate::compress::{self, CompressionReport, Smoothing};
use crate::error::{Result, RtgError};
use crate::metrics::{self, RtgMetrics};
use crate::net::{self, InitScheme, MlpParams, MlpSpec};
use crate::rtg::{self, GraphMeta, Sample, TransitionGraph};
use crate::sampler::{self, Domain};
use crate::stats::{self, Aggregate, StdConvention};

/// Mixed into the run seed to draw the VC-proxy points, so they are not the
/// same stream as the weights.
pub const VC_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    /// Number of seeds per configuration; seeds are `base_seed..base_seed + seeds`.
    pub seeds: usize,
    pub base_seed: u64,
    pub input_dim: usize,
    pub grid_target: usize,
    /// `[lower, upper]`, applied to every axis.
    pub domain: [f64; 2],
    pub prune_fraction: f64,
    pub vc_points: usize,
    pub init: InitScheme,
    pub smoothing: Smoothing,
    pub std_convention: StdConvention,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            depths: vec![2, 3, 4],
            widths: vec![4, 8, 16, 32, 64, 128],
            seeds: 5,
            base_seed: 0,
            input_dim: 2,
            grid_target: 100_000,
            domain: [-1.0, 1.0],
            prune_fraction: 0.5,
            vc_points: 10,
            init: InitScheme::default(),
            smoothing: Smoothing::Uniform,
            std_convention: StdConvention::Population,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| RtgError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(RtgError::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        if self.depths.is_empty() || self.widths.is_empty() {
            return Err(RtgError::Config("depths and widths must be non-empty".into()));
        }
        for &d in &self.depths {
            positive("depth", d)?;
        }
        for &w in &self.widths {
            positive("width", w)?;
        }
        positive("seeds", self.seeds)?;
        positive("input_dim", self.input_dim)?;
        positive("grid_target", self.grid_target)?;
        positive("vc_points", self.vc_points)?;
        if !(self.prune_fraction > 0.0 && self.prune_fraction < 1.0) {
            return Err(RtgError::Config(format!(
                "prune_fraction {} outside (0, 1)",
                self.prune_fraction
            )));
        }
        self.domain_box()?;
        Ok(())
    }

    pub fn domain_box(&self) -> Result<Domain> {
        Domain::cube(self.input_dim, self.domain[0], self.domain[1])
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|s| self.base_seed + s).collect()
    }

    /// All `(depth, width, seed)` triples in output order.
    pub fn triples(&self) -> Vec<(usize, usize, u64)> {
        let seeds = self.seed_list();
        let mut out = Vec::new();
        for &d in &self.depths {
            for &w in &self.widths {
                out.extend(seeds.iter().map(|&s| (d, w, s)));
            }
        }
        out
    }
}

/// Network, evaluated grid and transition graph of one configuration.
pub struct BuiltGraph {
    pub params: MlpParams,
    pub graph: TransitionGraph,
}

/// Initialises the network and builds its graph over `points`.
pub fn build_graph(spec: &MlpSpec, seed: u64, init: InitScheme, points: &[Vec<f64>]) -> Result<BuiltGraph> {
    let params = net::init_mlp_with(spec, seed, init);
    let evals = net::forward_batch(&params, points)?;
    let graph = rtg::build_rtg(points.iter().cloned().zip(evals).map(Sample::from))?.with_meta(GraphMeta {
        d: spec.input_dim,
        depth: spec.depth,
        n: spec.width,
        seed,
        init,
    });
    Ok(BuiltGraph { params, graph })
}

/// Everything measured for one `(depth, width, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub metrics: RtgMetrics,
    pub lemma2_margin: f64,
    /// Same check with the sample-fraction entropy; informational.
    pub lemma2_margin_empirical: f64,
    pub lemma3_fraction: f64,
    pub vc_proxy: usize,
    pub theorem3_ok: bool,
    pub theorem3_applicable: bool,
    pub theorem1_sum_bound: u128,
    pub theorem1_product_bound: u128,
    pub bound_reports: Vec<BoundReport>,
    pub compression: Option<CompressionReport>,
}

impl RunRecord {
    /// Every bound check passed (inapplicable ones excluded).
    pub fn bounds_ok(&self) -> bool {
        self.bound_reports.iter().all(BoundReport::ok)
    }

    pub fn sup_error(&self) -> Option<f64> {
        self.compression.as_ref().map(|c| c.sup_error)
    }
}

/// Runs the full pipeline for one configuration on a fresh grid.
pub fn run_config(config: &ExperimentConfig, depth: usize, width: usize, seed: u64) -> Result<RunRecord> {
    let points = sampler::grid_points(&config.domain_box()?, config.grid_target)?;
    run_on_points(config, depth, width, seed, &points).map(|(record, _)| record)
}

/// Runs the pipeline on a precomputed grid; also returns the graph.
pub fn run_on_points(
    config: &ExperimentConfig,
    depth: usize,
    width: usize,
    seed: u64,
    points: &[Vec<f64>],
) -> Result<(RunRecord, TransitionGraph)> {
    let spec = MlpSpec::new(config.input_dim, depth, width)?;
    let BuiltGraph { params, graph } = build_graph(&spec, seed, config.init, points)?;
    let m = metrics::compute_metrics(&graph)?;

    let lemma2 = bounds::check_lemma2(m.entropy_uniform, m.avg_degree);
    let lemma2_empirical = bounds::check_lemma2(m.entropy_empirical, m.avg_degree);
    let lemma3_fraction = bounds::lemma3_fraction(graph.adjacency())?;
    let vc_proxy = bounds::vc_proxy(
        &params,
        &config.domain_box()?,
        seed ^ VC_SEED_SALT,
        config.vc_points,
    )?;
    let theorem3 = bounds::check_theorem3(vc_proxy, m.diameter);
    let [sum, product] = bounds::check_theorem1(m.node_count as f64, width, config.input_dim, depth)?;
    let theorem1_sum_bound = bounds::theorem1_sum_bound(width, config.input_dim, depth)?;
    let theorem1_product_bound = bounds::theorem1_product_bound(width, config.input_dim, depth)?;

    let compression = if graph.node_count() >= 2 {
        Some(compress::compress(
            &params,
            &graph,
            points,
            config.prune_fraction,
            config.smoothing,
        )?)
    } else {
        None
    };

    let record = RunRecord {
        depth,
        width,
        seed,
        grid_points: points.len(),
        lemma2_margin: lemma2.margin,
        lemma2_margin_empirical: lemma2_empirical.margin,
        lemma3_fraction,
        vc_proxy,
        theorem3_ok: theorem3.ok(),
        theorem3_applicable: theorem3.applicable,
        theorem1_sum_bound,
        theorem1_product_bound,
        bound_reports: vec![
            sum,
            product,
            lemma2,
            theorem3,
            bounds::check_lemma3(lemma3_fraction),
        ],
        compression,
        metrics: m,
    };
    Ok((record, graph))
}

/// Per-configuration aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub depth: usize,
    pub width: usize,
    pub runs: Vec<RunRecord>,
    /// Keyed by CSV column; empty with fewer than two seeds.
    pub aggregates: BTreeMap<String, Aggregate>,
}

/// CSV columns, in output order.
pub const CSV_COLUMNS: [&str; 21] = [
    "depth",
    "width",
    "seed",
    "node_count",
    "edge_count",
    "components",
    "largest_component",
    "d_avg",
    "max_degree",
    "diameter",
    "H_uniform",
    "H_empirical",
    "lemma2_margin",
    "lemma3_fraction",
    "vc_proxy",
    "theorem3_ok",
    "theorem1_sum_bound",
    "theorem1_product_bound",
    "sup_error",
    "surviving_nodes",
    "surviving_edges",
];

// Metric columns (everything after depth, width, seed) as reals.
fn metric_values(r: &RunRecord) -> [f64; 18] {
    let c = r.compression.as_ref();
    [
        r.metrics.node_count as f64,
        r.metrics.edge_count as f64,
        r.metrics.component_count as f64,
        r.metrics.largest_component_size as f64,
        r.metrics.avg_degree,
        r.metrics.max_degree as f64,
        r.metrics.diameter as f64,
        r.metrics.entropy_uniform,
        r.metrics.entropy_empirical,
        r.lemma2_margin,
        r.lemma3_fraction,
        r.vc_proxy as f64,
        if r.theorem3_ok { 1.0 } else { 0.0 },
        r.theorem1_sum_bound as f64,
        r.theorem1_product_bound as f64,
        c.map_or(0.0, |c| c.sup_error),
        c.map_or(r.metrics.node_count, |c| c.surviving_nodes) as f64,
        c.map_or(r.metrics.edge_count, |c| c.surviving_edges) as f64,
    ]
}

fn metric_cells(r: &RunRecord) -> Vec<String> {
    let m = &r.metrics;
    let c = r.compression.as_ref();
    vec![
        m.node_count.to_string(),
        m.edge_count.to_string(),
        m.component_count.to_string(),
        m.largest_component_size.to_string(),
        m.avg_degree.to_string(),
        m.max_degree.to_string(),
        m.diameter.to_string(),
        m.entropy_uniform.to_string(),
        m.entropy_empirical.to_string(),
        r.lemma2_margin.to_string(),
        r.lemma3_fraction.to_string(),
        r.vc_proxy.to_string(),
        r.theorem3_ok.to_string(),
        r.theorem1_sum_bound.to_string(),
        r.theorem1_product_bound.to_string(),
        c.map_or(0.0, |c| c.sup_error).to_string(),
        c.map_or(m.node_count, |c| c.surviving_nodes).to_string(),
        c.map_or(m.edge_count, |c| c.surviving_edges).to_string(),
    ]
}

pub fn aggregate_runs(
    depth: usize,
    width: usize,
    runs: Vec<RunRecord>,
    convention: StdConvention,
) -> Result<SweepRecord> {
    let mut aggregates = BTreeMap::new();
    if runs.len() >= 2 {
        let rows: Vec<[f64; 18]> = runs.iter().map(metric_values).collect();
        for (k, name) in CSV_COLUMNS[3..].iter().enumerate() {
            let column: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            aggregates.insert(name.to_string(), stats::aggregate(&column, convention)?);
        }
    }
    Ok(SweepRecord {
        depth,
        width,
        runs,
        aggregates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub config: ExperimentConfig,
    pub grid_points: usize,
    pub records: Vec<SweepRecord>,
    /// Every bound check passed in every run.
    pub all_bounds_ok: bool,
    /// Expected deviations such as disconnected graphs; not failures.
    pub warnings: Vec<String>,
}

/// Options that affect only what is written, not what is computed.
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub save_graphs: Option<PathBuf>,
}

/// Runs every `(depth, width, seed)` triple and aggregates per configuration.
pub fn sweep(config: &ExperimentConfig, options: &SweepOptions) -> Result<SweepOutput> {
    config.validate()?;
    let points = sampler::grid_points(&config.domain_box()?, config.grid_target)?;
    let triples = config.triples();
    let results: Vec<(RunRecord, TransitionGraph)> = triples
        .par_iter()
        .map(|&(d, w, s)| run_on_points(config, d, w, s, &points))
        .collect::<Result<_>>()?;

    if let Some(dir) = &options.save_graphs {
        fs::create_dir_all(dir)?;
        for (record, graph) in &results {
            let name = format!("graph_L{}_n{}_s{}.json", record.depth, record.width, record.seed);
            fs::write(dir.join(name), rtg::serialize(graph))?;
        }
    }

    let mut warnings = Vec::new();
    let mut all_bounds_ok = true;
    for (r, _) in &results {
        if r.metrics.component_count > 1 {
            warnings.push(format!(
                "L={} n={} seed={}: graph has {} components",
                r.depth, r.width, r.seed, r.metrics.component_count
            ));
        }
        for b in r.bound_reports.iter().filter(|b| !b.ok()) {
            all_bounds_ok = false;
            warnings.push(format!(
                "L={} n={} seed={}: {} violated (margin {})",
                r.depth, r.width, r.seed, b.bound_name, b.margin
            ));
        }
    }

    let mut runs = results.into_iter().map(|(r, _)| r);
    let mut records = Vec::new();
    for &d in &config.depths {
        for &w in &config.widths {
            let group: Vec<RunRecord> = runs.by_ref().take(config.seeds).collect();
            records.push(aggregate_runs(d, w, group, config.std_convention)?);
        }
    }

    Ok(SweepOutput {
        config: config.clone(),
        grid_points: points.len(),
        records,
        all_bounds_ok,
        warnings,
    })
}

/// Per-seed rows followed by one `agg` row per configuration whose metric
/// cells are `mean/std/ci95`.
pub fn sweep_csv(output: &SweepOutput) -> String {
    let mut csv = CSV_COLUMNS.join(",");
    csv.push('\n');
    for rec in &output.records {
        for run in &rec.runs {
            let mut cells = vec![run.depth.to_string(), run.width.to_string(), run.seed.to_string()];
            cells.extend(metric_cells(run));
            let _ = writeln!(csv, "{}", cells.join(","));
        }
        if !rec.aggregates.is_empty() {
            let mut cells = vec![rec.depth.to_string(), rec.width.to_string(), "agg".to_string()];
            for name in &CSV_COLUMNS[3..] {
                let a = &rec.aggregates[*name];
                cells.push(format!("{}/{}/{}", a.mean, a.std, a.ci95));
            }
            let _ = writeln!(csv, "{}", cells.join(","));
        }
    }
    csv
}

/// Writes `sweep.csv` and `sweep.json` into `dir`.
pub fn write_outputs(output: &SweepOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.csv"), sweep_csv(output))?;
    let json = serde_json::to_string_pretty(output).map_err(|e| RtgError::Malformed(e.to_string()))?;
    fs::write(dir.join("sweep.json"), json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            depths: vec![2],
            widths: vec![4],
            seeds: 3,
            grid_target: 2_500,
            ..Default::default()
        }
    }

    #[test]
    fn default_triples() {
        let c = ExperimentConfig::default();
        assert_eq!(c.triples().len(), 90);
        assert_eq!(c.seed_list(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn toml_parsing() {
        let c = ExperimentConfig::from_toml("depths = [2]\nwidths = [4, 8]\nseeds = 2\n").unwrap();
        assert_eq!(c.widths, vec![4, 8]);
        assert_eq!(c.grid_target, 100_000);
        assert!(ExperimentConfig::from_toml("depth = [2]").is_err());
        assert!(ExperimentConfig::from_toml("prune_fraction = 1.0").is_err());
        assert!(ExperimentConfig::from_toml("seeds = 0").is_err());
        assert!(ExperimentConfig::from_toml("domain = [1.0, -1.0]").is_err());
        let c =
            ExperimentConfig::from_toml("smoothing = \"sample_count\"\nstd_convention = \"sample\"").unwrap();
        assert_eq!(c.smoothing, Smoothing::SampleCount);
    }

    #[test]
    fn run_is_deterministic() {
        let c = small();
        let a = run_config(&c, 2, 4, 1).unwrap();
        let b = run_config(&c, 2, 4, 1).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert!(a.metrics.node_count as u128 <= a.theorem1_sum_bound);
    }

    #[test]
    fn sweep_shape_and_csv() {
        let out = sweep(&small(), &SweepOptions::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].runs.len(), 3);
        let csv = sweep_csv(&out);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 3 + 1);
        assert_eq!(lines[0].split(',').count(), 21);
        assert!(lines[4].starts_with("2,4,agg,"));
        assert!(lines.iter().all(|l| l.split(',').count() == 21));
    }

    #[test]
    fn single_seed_has_no_aggregate() {
        let c = ExperimentConfig { seeds: 1, ..small() };
        let out = sweep(&c, &SweepOptions::default()).unwrap();
        assert!(out.records[0].aggregates.is_empty());
        assert_eq!(sweep_csv(&out).lines().count(), 2);
    }
}
