use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use relu_rtg::compress::{self, Smoothing};
use relu_rtg::harness::{self, ExperimentConfig, SweepOptions};
use relu_rtg::net::{self, InitScheme, MlpSpec};
use relu_rtg::rtg::{self, TransitionGraph};
use relu_rtg::sampler::{self, Domain};
use relu_rtg::{bounds, metrics, oracle};

#[derive(Parser)]
#[command(name = "rtg", about = "Transition graphs of ReLU networks", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full (depth, width, seed) sweep.
    Sweep {
        /// TOML config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Also write every run's graph under <out-dir>/graphs.
        #[arg(long)]
        save_graphs: bool,
    },
    /// Build a single graph over the default grid.
    Build {
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        points: usize,
        #[arg(long, default_value_t = 2)]
        input_dim: usize,
        #[arg(long, value_enum, default_value_t = Init::FanIn)]
        init: Init,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print graph metrics as JSON.
    Metrics {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Check a graph against the region, entropy, diameter and degree bounds.
    Bounds {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        /// Network seed for the VC proxy (default: from the graph file).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        vc_points: usize,
    },
    /// Prune by degree and report the sup-norm error on the build grid.
    Prune {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Grid size the graph was built with.
        #[arg(long, default_value_t = 100_000)]
        points: usize,
        /// Weight neighbour outputs by sample count.
        #[arg(long)]
        weighted: bool,
    },
    /// Compare a sampled single-layer graph with the exact line arrangement.
    Oracle {
        #[arg(long)]
        lines: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 317)]
        grid: usize,
    },
}

fn load_graph(path: &PathBuf) -> Result<TransitionGraph> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    rtg::deserialize(&bytes).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Init {
    Glorot,
    FanIn,
}

impl From<Init> for InitScheme {
    fn from(init: Init) -> Self {
        match init {
            Init::Glorot => InitScheme::Glorot,
            Init::FanIn => InitScheme::FanIn,
        }
    }
}

/// Rebuilds the network behind a graph: flags first, then the graph's own metadata.
fn resolve_params(
    graph: &TransitionGraph,
    depth: Option<usize>,
    width: Option<usize>,
    seed: Option<u64>,
) -> Result<(MlpSpec, u64, net::MlpParams)> {
    let meta = graph.meta();
    let d = meta.map_or(2, |m| m.d);
    let depth = depth.or(meta.map(|m| m.depth)).context("--depth is required")?;
    let width = width.or(meta.map(|m| m.n)).context("--width is required")?;
    let seed = seed.or(meta.map(|m| m.seed)).context("--seed is required")?;
    if depth * width != graph.bit_len() {
        bail!(
            "depth {depth} x width {width} does not match the graph's pattern length {}",
            graph.bit_len()
        );
    }
    let spec = MlpSpec::new(d, depth, width)?;
    let init = meta.map_or(InitScheme::default(), |m| m.init);
    Ok((spec, seed, net::init_mlp_with(&spec, seed, init)))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep {
            config,
            out_dir,
            save_graphs,
        } => {
            let config = match config {
                Some(path) => {
                    ExperimentConfig::load(&path).with_context(|| format!("loading {}", path.display()))?
                }
                None => ExperimentConfig::default(),
            };
            let options = SweepOptions {
                save_graphs: save_graphs.then(|| out_dir.join("graphs")),
            };
            let output = harness::sweep(&config, &options)?;
            harness::write_outputs(&output, &out_dir)?;
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "{} runs over {} grid points written to {}",
                config.triples().len(),
                output.grid_points,
                out_dir.display()
            );
            Ok(if output.all_bounds_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Build {
            depth,
            width,
            seed,
            points,
            input_dim,
            init,
            out,
        } => {
            let spec = MlpSpec::new(input_dim, depth, width)?;
            let grid = sampler::grid_points(&Domain::unit_box(input_dim), points)?;
            let built = harness::build_graph(&spec, seed, init.into(), &grid)?;
            fs::write(&out, rtg::serialize(&built.graph))?;
            eprintln!(
                "{} nodes, {} edges from {} points -> {}",
                built.graph.node_count(),
                built.graph.edge_count(),
                grid.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics { graph } => {
            print_json(&metrics::compute_metrics(&load_graph(&graph)?)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bounds {
            graph,
            depth,
            width,
            seed,
            vc_points,
        } => {
            let graph = load_graph(&graph)?;
            let (spec, seed, params) = resolve_params(&graph, depth, width, seed)?;
            let m = metrics::compute_metrics(&graph)?;
            let vc = bounds::vc_proxy(
                &params,
                &Domain::unit_box(spec.input_dim),
                seed ^ harness::VC_SEED_SALT,
                vc_points,
            )?;
            let [sum, product] =
                bounds::check_theorem1(m.node_count as f64, spec.width, spec.input_dim, spec.depth)?;
            let reports = vec![
                sum,
                product,
                bounds::check_lemma2(m.entropy_uniform, m.avg_degree),
                bounds::check_theorem3(vc, m.diameter),
                bounds::check_lemma3(bounds::lemma3_fraction(graph.adjacency())?),
            ];
            let ok = reports.iter().all(|r| r.ok());
            print_json(&reports)?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Prune {
            graph,
            fraction,
            depth,
            width,
            seed,
            points,
            weighted,
        } => {
            let graph = load_graph(&graph)?;
            let (spec, _, params) = resolve_params(&graph, depth, width, seed)?;
            let grid = sampler::grid_points(&Domain::unit_box(spec.input_dim), points)?;
            if grid.len() != graph.total_samples() {
                bail!(
                    "graph holds {} samples but --points {points} gives a grid of {}",
                    graph.total_samples(),
                    grid.len()
                );
            }
            let smoothing = if weighted {
                Smoothing::SampleCount
            } else {
                Smoothing::Uniform
            };
            print_json(&compress::compress(&params, &graph, &grid, fraction, smoothing)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { lines, seed, grid } => {
            let domain = Domain::unit_box(2);
            let lines = oracle::generic_lines(lines, seed, &domain, 1e-3)?;
            let cmp = oracle::oracle_vs_rtg(&lines, &domain, grid)?;
            print_json(&json!({ "lines": lines, "comparison": cmp }))?;
            Ok(if cmp.matches() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
