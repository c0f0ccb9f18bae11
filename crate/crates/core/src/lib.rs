//! ReLU transition graphs.
//!
//! Every input of a ReLU MLP has an activation pattern, one bit per hidden
//! neuron. Grouping a dense input sample by pattern gives the observed linear
//! regions; joining regions whose patterns differ in exactly one bit gives the
//! transition graph. This crate builds that graph, measures it (components,
//! diameter, degrees, entropy), checks it against the combinatorial bounds it
//! is expected to satisfy, and prunes it by degree while measuring how far the
//! smoothed function drifts from the original network.
//!
//! ```
//! use relu_rtg::{net, rtg, sampler};
//!
//! let spec = net::MlpSpec::new(2, 2, 4).unwrap();
//! let params = net::init_mlp(&spec, 7);
//! let points = sampler::grid_points(&sampler::Domain::unit_box(2), 2_500).unwrap();
//! let samples = net::forward_batch(&params, &points).unwrap();
//! let graph = rtg::build_rtg(points.into_iter().zip(samples).map(Into::into)).unwrap();
//! assert!(graph.node_count() >= 1);
//! ```

pub mod bounds;
pub mod compress;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod net;
pub mod oracle;
pub mod rtg;
pub mod sampler;
pub mod stats;

pub use error::{Result, RtgError};
