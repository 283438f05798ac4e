//! Streaming data observed by the nodes.
//!
//! Each node owns a tapped delay line fed by white Gaussian input and
//! observes `d_k(n) = u_kᵀ(n) w° + v_k(n)`. The optimal system can be
//! sign-flipped once per run to emulate an abrupt change in the environment.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRole, NETWORK_STREAM};

/// How a per-node quantity (noise variance, input variance, step size) is
/// assigned across the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Uniform { low: f64, high: f64 },
    Explicit(Vec<f64>),
}

impl Profile {
    /// Checks the profile for `nodes` nodes against an admissible range.
    pub fn validate(&self, what: &str, nodes: usize, in_range: impl Fn(f64) -> bool) -> Result<()> {
        let bad = |detail: String| Err(Error::Config(format!("{what}: {detail}")));
        match self {
            Profile::Constant(x) if !in_range(*x) => bad(format!("value {x} out of range")),
            Profile::Uniform { low, high } if low > high => {
                bad(format!("lower bound {low} exceeds upper bound {high}"))
            }
            Profile::Uniform { low, high } if !in_range(*low) || !in_range(*high) => {
                bad(format!("bounds [{low}, {high}] out of range"))
            }
            Profile::Explicit(values) if values.len() != nodes => bad(format!(
                "expected {nodes} values, found {}",
                values.len()
            )),
            Profile::Explicit(values) => match values.iter().find(|&&x| !in_range(x)) {
                Some(x) => bad(format!("value {x} out of range")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Expands the profile into one value per node.
    pub fn draw(&self, nodes: usize, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Profile::Constant(x) => vec![*x; nodes],
            Profile::Uniform { low, high } => (0..nodes)
                .map(|_| low + (high - low) * rng.random::<f64>())
                .collect(),
            Profile::Explicit(values) => values.clone(),
        }
    }
}

/// Static description of the signal environment before any draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub filter_order: usize,
    pub noise_variance: Profile,
    pub input_variance: Profile,
    pub flip_iteration: Option<usize>,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            filter_order: 50,
            noise_variance: Profile::Uniform { low: 0.1, high: 0.4 },
            input_variance: Profile::Constant(1.0),
            flip_iteration: None,
        }
    }
}

/// Drawn environment shared by all nodes of a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub w_opt: Vec<f64>,
    pub sigma2_v: Vec<f64>,
    pub sigma2_u: Vec<f64>,
    pub flip_iteration: Option<usize>,
}

impl Environment {
    pub fn filter_order(&self) -> usize {
        self.w_opt.len()
    }

    pub fn node_count(&self) -> usize {
        self.sigma2_v.len()
    }

    /// Largest measurement-noise variance across nodes.
    pub fn sigma2_max(&self) -> f64 {
        self.sigma2_v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest measurement-noise variance across nodes.
    pub fn sigma2_min(&self) -> f64 {
        self.sigma2_v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Negates w° when `n` is the configured flip iteration. Returns whether
    /// a flip happened.
    pub fn apply_flip(&mut self, n: usize) -> bool {
        if self.flip_iteration != Some(n) {
            return false;
        }
        self.w_opt.iter_mut().for_each(|w| *w = -*w);
        true
    }
}

/// Draws w° uniformly on [−1, 1] and the per-node variance profiles.
pub fn init_environment(spec: &EnvironmentSpec, nodes: usize, seed: u64) -> Result<Environment> {
    if spec.filter_order == 0 {
        return Err(Error::Config("filter order must be at least 1".into()));
    }
    if nodes == 0 {
        return Err(Error::Config("node count must be positive".into()));
    }
    spec.noise_variance
        .validate("noise variance", nodes, |x| x >= 0.0 && x.is_finite())?;
    spec.input_variance
        .validate("input variance", nodes, |x| x > 0.0 && x.is_finite())?;

    let mut w_rng = rng::stream(seed, 0, NETWORK_STREAM, StreamRole::OptimalSystem);
    let w_opt = (0..spec.filter_order)
        .map(|_| w_rng.random_range(-1.0..=1.0))
        .collect();
    let sigma2_v = spec.noise_variance.draw(
        nodes,
        &mut rng::stream(seed, 0, NETWORK_STREAM, StreamRole::NoiseProfile),
    );
    let sigma2_u = spec.input_variance.draw(
        nodes,
        &mut rng::stream(seed, 0, NETWORK_STREAM, StreamRole::InputProfile),
    );
    Ok(Environment {
        w_opt,
        sigma2_v,
        sigma2_u,
        flip_iteration: spec.flip_iteration,
    })
}

/// Per-node regressor delay line with its input and noise generators.
#[derive(Debug, Clone)]
pub struct NodeStream {
    node: usize,
    regressor: Vec<f64>,
    input_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
}

impl NodeStream {
    /// Zero-filled delay line for `node` in realization `realization`.
    pub fn new(node: usize, filter_order: usize, seed: u64, realization: u64) -> Self {
        Self {
            node,
            regressor: vec![0.0; filter_order],
            input_rng: rng::stream(seed, realization, node as u64, StreamRole::Input),
            noise_rng: rng::stream(seed, realization, node as u64, StreamRole::Noise),
        }
    }

    /// Current regressor `[u(n), u(n−1), …, u(n−M+1)]`.
    pub fn regressor(&self) -> &[f64] {
        &self.regressor
    }

    /// Shifts a fresh input sample into the delay line and returns the
    /// regressor together with the noisy reference `d_k(n)`.
    pub fn advance(&mut self, env: &Environment) -> (&[f64], f64) {
        let k = self.node;
        let u: f64 = self.input_rng.sample(StandardNormal);
        let v: f64 = self.noise_rng.sample(StandardNormal);
        self.regressor.rotate_right(1);
        self.regressor[0] = u * env.sigma2_u[k].sqrt();
        let clean: f64 = self
            .regressor
            .iter()
            .zip(&env.w_opt)
            .map(|(u, w)| u * w)
            .sum();
        (&self.regressor, clean + v * env.sigma2_v[k].sqrt())
    }
}
