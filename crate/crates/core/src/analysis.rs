//! Steady-state predictions for adaptive sampling and the per-node
//! operation-count model.
//!
//! In steady state each node alternates between runs of sampled iterations
//! (expected length θ) and idle runs (expected length θ̄), so its sampling
//! probability is approximated by the duty cycle θ/(θ+θ̄). Bounding θ and θ̄
//! from the extreme noise variances bounds the expected number of sampled
//! nodes:
//!
//! ```text
//! V σ²_min / β  ≤  E{V_s}  ≤  V σ²_max / β,      valid for β ≥ σ²_max
//! ```
//!
//! The sampling step size never enters these expressions, and none of the
//! functions here accept it.

use std::ops::{Add, AddAssign};

use serde::Serialize;

use crate::error::{Error, Result};

/// Sampling can only be expected to stop in steady state when β is at least
/// the largest noise variance. Equality is admitted: the bounds then say
/// every node stays sampled.
pub fn beta_admissible(beta: f64, sigma2_max: f64) -> bool {
    beta >= sigma2_max
}

/// Bounds on the expected sampled-run length (θ) and idle-run length (θ̄).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaBounds {
    pub theta_max: f64,
    pub theta_min: f64,
    pub theta_bar_max: f64,
    pub theta_bar_min: f64,
}

fn check(beta: f64, sigma2_min: f64, sigma2_max: f64) -> Result<()> {
    if !(sigma2_min > 0.0 && sigma2_min.is_finite()) {
        return Err(Error::Analysis(format!(
            "sigma2_min must be positive, got {sigma2_min}"
        )));
    }
    if sigma2_min > sigma2_max {
        return Err(Error::Analysis(format!(
            "sigma2_min {sigma2_min} exceeds sigma2_max {sigma2_max}"
        )));
    }
    if !beta_admissible(beta, sigma2_max) || !beta.is_finite() {
        return Err(Error::Analysis(format!(
            "beta {beta} must be at least sigma2_max {sigma2_max}"
        )));
    }
    Ok(())
}

/// Every run lasts at least one iteration. When β = σ²_max the sampled run
/// of the noisiest node is unbounded and `theta_max` is `+∞`.
pub fn theta_bounds(beta: f64, sigma2_min: f64, sigma2_max: f64) -> Result<ThetaBounds> {
    check(beta, sigma2_min, sigma2_max)?;
    let at_least_one = |x: f64| x.max(1.0);
    Ok(ThetaBounds {
        theta_max: at_least_one(sigma2_max / (beta - sigma2_max)),
        theta_min: at_least_one(sigma2_min / (beta - sigma2_min)),
        theta_bar_max: at_least_one((beta - sigma2_min) / sigma2_min),
        theta_bar_min: at_least_one((beta - sigma2_max) / sigma2_max),
    })
}

/// Duty cycle θ/(θ+θ̄). An unbounded sampled run gives 1, an unbounded idle
/// run gives 0.
pub fn duty_cycle_estimate(theta: f64, theta_bar: f64) -> f64 {
    match (theta.is_infinite(), theta_bar.is_infinite()) {
        (true, _) => 1.0,
        (false, true) => 0.0,
        _ => theta / (theta + theta_bar),
    }
}

/// `(V σ²_min/β, V σ²_max/β)`, evaluated directly so the β = σ²_max
/// boundary yields exactly V.
pub fn sampled_node_bounds(
    nodes: usize,
    beta: f64,
    sigma2_min: f64,
    sigma2_max: f64,
) -> Result<(f64, f64)> {
    check(beta, sigma2_min, sigma2_max)?;
    let v = nodes as f64;
    Ok((v * sigma2_min / beta, v * sigma2_max / beta))
}

/// Everything predicted for one `(V, β, σ²_min, σ²_max)` setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStatePrediction {
    pub nodes: usize,
    pub beta: f64,
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub theta: ThetaBounds,
    pub duty_cycle_min: f64,
    pub duty_cycle_max: f64,
    pub sampled_lower: f64,
    pub sampled_upper: f64,
}

impl SteadyStatePrediction {
    pub fn new(nodes: usize, beta: f64, sigma2_min: f64, sigma2_max: f64) -> Result<Self> {
        let theta = theta_bounds(beta, sigma2_min, sigma2_max)?;
        let (sampled_lower, sampled_upper) =
            sampled_node_bounds(nodes, beta, sigma2_min, sigma2_max)?;
        Ok(Self {
            nodes,
            beta,
            sigma2_min,
            sigma2_max,
            theta,
            duty_cycle_min: duty_cycle_estimate(theta.theta_min, theta.theta_bar_max),
            duty_cycle_max: duty_cycle_estimate(theta.theta_max, theta.theta_bar_min),
            sampled_lower,
            sampled_upper,
        })
    }

    pub fn contains(&self, sampled: f64, slack: f64) -> bool {
        sampled >= self.sampled_lower - slack && sampled <= self.sampled_upper + slack
    }
}

/// Multiplication and addition counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub mults: u64,
    pub adds: u64,
}

impl OpCount {
    pub const fn new(mults: u64, adds: u64) -> Self {
        Self { mults, adds }
    }
}

impl Add for OpCount {
    type Output = OpCount;

    fn add(self, rhs: OpCount) -> OpCount {
        OpCount::new(self.mults + rhs.mults, self.adds + rhs.adds)
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: OpCount) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for OpCount {
    fn sum<I: Iterator<Item = OpCount>>(iter: I) -> OpCount {
        iter.fold(OpCount::default(), Add::add)
    }
}

/// Which operation-count row applies to a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostRow {
    /// Diffusion NLMS with adaptive combination weights. An idle node (one
    /// skipped by a baseline sampler) only pays for the combine step.
    Dnlms,
    /// Diffusion NLMS with the adaptive sampling recursion.
    AdaptiveSampling,
}

/// Operations per iteration at one node.
///
/// `neighborhood` is |N_k| (self included), `sampled` is s̄_k and
/// `sampled_neighbors` is Σ_{i∈N_k} s̄_i.
pub fn op_cost_model(
    row: CostRow,
    filter_order: usize,
    neighborhood: usize,
    sampled: bool,
    sampled_neighbors: usize,
) -> OpCount {
    let m = filter_order as u64;
    let n = neighborhood as u64;
    let s = u64::from(sampled);
    let si = sampled_neighbors as u64;
    match row {
        CostRow::Dnlms if sampled => OpCount::new(m * (3 + n) + 4, m * (3 + n) + 3),
        CostRow::Dnlms => OpCount::new(m * n, m * n - m),
        CostRow::AdaptiveSampling => OpCount::new(
            s * (3 * m + 4) + m * n + si + 2,
            s * (4 * m + 2) + m * n - m + n + 2,
        ),
    }
}
