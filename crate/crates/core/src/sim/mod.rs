//! Monte Carlo simulation of linear relaying on a line network.

pub mod engine;
pub mod gains;
pub mod monte_carlo;
pub mod noise;
pub mod rng;
pub mod source;

pub use engine::{LineNetwork, TrialResult};
pub use gains::{precompute_gains, GainTable};
pub use monte_carlo::{run_monte_carlo, DecodeCell, DecodePlan, MonteCarloAggregate, Moments, RunOptions};
pub use noise::NoiseModel;
pub use source::{make_source_process, SourceProcess, SourceRealization, SourceSpec};
