//! Diffusion NLMS over sensor networks with adaptive node sampling.
//!
//! Nodes run adapt-then-combine NLMS with adaptive combination weights.
//! Each node decides per iteration whether to sample its reference signal,
//! driven by a sigmoid-mapped auxiliary variable that trades estimation
//! error against a sampling penalty β. The crate also provides baseline
//! policies, the closed-form steady-state predictions, an operation-count
//! model and a Monte Carlo harness that writes learning curves as CSV.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod network;
pub mod rng;
pub mod sampling;
pub mod signals;

pub use analysis::{
    beta_admissible, duty_cycle_estimate, op_cost_model, sampled_node_bounds, theta_bounds,
    CostRow, OpCount, SteadyStatePrediction, ThetaBounds,
};
pub use config::{load_config, parse_config};
pub use diffusion::NodeEstimator;
pub use error::{Error, Result};
pub use harness::{
    monte_carlo, moving_average, network_msd, prepare, run_realization, Campaign, RunConfig,
    TopologySpec,
};
pub use network::{build_random_geometric, metropolis_weights, uniform_weights, CombinationMatrix, Topology};
pub use sampling::{phi, phi_prime, Policy, SamplerParams, SamplerState};
pub use signals::{init_environment, Environment, EnvironmentSpec, NodeStream, Profile};
