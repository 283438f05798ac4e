//! Adaptive node sampling and the baseline sampling/transmission policies.
//!
//! Each node keeps an auxiliary variable α_k ∈ [−α⁺, α⁺] mapped to a
//! sampling score by a rescaled sigmoid φ, with φ(−α⁺) = 0 and φ(α⁺) = 1.
//! The node is sampled when φ(α_k) ≥ 0.5, i.e. when α_k ≥ 0. After every
//! round α_k follows a stochastic gradient step:
//!
//! ```text
//! α_k ← clamp(α_k + μ_s φ′(α_k) [Σ_{i∈N_k} c_ik ε²_i − β s̄_k], −α⁺, α⁺)
//! ```
//!
//! where ε²_i is the latest squared error node `k` has received from
//! neighbor `i`. A sampled node with small neighborhood error drifts towards
//! idling; an idle node always drifts back towards sampling.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{CostRow, OpCount};
use crate::error::{Error, Result};

/// α⁺ used when a configuration does not set it.
pub const DEFAULT_ALPHA_PLUS: f64 = 4.0;

fn sgm(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Rescaled sigmoid mapping α ∈ [−α⁺, α⁺] onto [0, 1].
pub fn phi(alpha: f64, alpha_plus: f64) -> f64 {
    let low = sgm(-alpha_plus);
    (sgm(alpha) - low) / (sgm(alpha_plus) - low)
}

/// Derivative of [`phi`] with respect to α.
pub fn phi_prime(alpha: f64, alpha_plus: f64) -> f64 {
    let s = sgm(alpha);
    s * (1.0 - s) / (sgm(alpha_plus) - sgm(-alpha_plus))
}

fn default_alpha_plus() -> f64 {
    DEFAULT_ALPHA_PLUS
}

/// Parameters of the adaptive sampling recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerParams {
    pub beta: f64,
    pub mu_s: f64,
    #[serde(default = "default_alpha_plus")]
    pub alpha_plus: f64,
}

impl SamplerParams {
    pub fn new(beta: f64, mu_s: f64) -> Self {
        Self {
            beta,
            mu_s,
            alpha_plus: DEFAULT_ALPHA_PLUS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("beta", self.beta),
            ("mu_s", self.mu_s),
            ("alpha_plus", self.alpha_plus),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("policy.{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

/// Sampling state of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub alpha: f64,
    /// Decision s̄_k for the current round.
    pub sampled: bool,
    /// Latest squared errors ε²_i received from each neighbor, aligned with
    /// the node's neighbor list.
    pub eps2: Vec<f64>,
    pub params: SamplerParams,
}

impl SamplerState {
    /// Starts at α = α⁺, so every node is sampled during the first rounds.
    pub fn new(params: SamplerParams, neighborhood: usize) -> Self {
        Self {
            alpha: params.alpha_plus,
            sampled: true,
            eps2: vec![0.0; neighborhood],
            params,
        }
    }

    /// s̄_k = 1 iff φ(α_k) ≥ 0.5, which is iff α_k ≥ 0.
    pub fn decide(&mut self) -> bool {
        self.sampled = self.alpha >= 0.0;
        self.sampled
    }

    /// Stores e_i² when neighbor `slot` was sampled; otherwise keeps the
    /// previous value.
    pub fn refresh_eps(&mut self, slot: usize, error: f64, sampled: bool) {
        if sampled {
            self.eps2[slot] = error * error;
        }
    }

    /// Neighborhood error Σ_i c_ik ε²_i.
    pub fn weighted_error(&self, weights: &[f64]) -> f64 {
        weights.iter().zip(&self.eps2).map(|(c, e)| c * e).sum()
    }

    /// Gradient step on α_k using the current decision and the combination
    /// weights the node holds (stale when it was not sampled).
    pub fn update_alpha(&mut self, weights: &[f64]) -> f64 {
        let p = self.params;
        let penalty = if self.sampled { p.beta } else { 0.0 };
        let step = p.mu_s * phi_prime(self.alpha, p.alpha_plus) * (self.weighted_error(weights) - penalty);
        self.alpha = (self.alpha + step).clamp(-p.alpha_plus, p.alpha_plus);
        self.alpha
    }
}

/// Operations charged for one α update.
///
/// The weighted error only multiplies fresh terms: Σ_i s̄_i products plus the
/// step-size and derivative factors.
pub const fn alpha_update_ops(neighborhood: usize, sampled_neighbors: usize, sampled: bool) -> OpCount {
    let n = neighborhood as u64;
    OpCount::new(sampled_neighbors as u64 + 2, n + 2 - sampled as u64)
}

/// Which nodes are sampled and which links carry data in a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Every node sampled and transmitting every round.
    Full,
    /// Adaptive sampling; unsampled nodes still forward ψ_k = w_k.
    AsSampling(SamplerParams),
    /// Adaptive sampling where unsampled nodes freeze ψ_k and stay silent.
    AsCensoring(SamplerParams),
    /// Exactly `sampled_nodes` nodes chosen uniformly at random each round.
    #[serde(rename_all = "snake_case")]
    RandomSampling { sampled_nodes: usize },
    /// Each directed link active independently with `link_probability`.
    #[serde(rename_all = "snake_case")]
    ProbabilisticTransmission { link_probability: f64 },
    /// No cooperation: c_kk = 1 and no transmissions.
    NonCooperative,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Full => "full",
            Policy::AsSampling(_) => "as_sampling",
            Policy::AsCensoring(_) => "as_censoring",
            Policy::RandomSampling { .. } => "random_sampling",
            Policy::ProbabilisticTransmission { .. } => "probabilistic_transmission",
            Policy::NonCooperative => "non_cooperative",
        }
    }

    pub fn sampler(&self) -> Option<SamplerParams> {
        match self {
            Policy::AsSampling(p) | Policy::AsCensoring(p) => Some(*p),
            _ => None,
        }
    }

    pub fn censors(&self) -> bool {
        matches!(self, Policy::AsCensoring(_))
    }

    pub fn cost_row(&self) -> CostRow {
        if self.sampler().is_some() {
            CostRow::AdaptiveSampling
        } else {
            CostRow::Dnlms
        }
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        match self {
            Policy::AsSampling(p) | Policy::AsCensoring(p) => p.validate(),
            Policy::RandomSampling { sampled_nodes } if *sampled_nodes > nodes => Err(Error::Config(
                format!("policy.sampled_nodes = {sampled_nodes} exceeds node count {nodes}"),
            )),
            Policy::ProbabilisticTransmission { link_probability: p }
                if !(0.0..=1.0).contains(p) =>
            {
                Err(Error::Config(format!("policy.link_probability = {p} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Whether a transfer from a neighbor with decision `sender_sampled`
    /// reaches the receiver this round. Draws from `rng` only for
    /// probabilistic transmission.
    pub fn link_active(&self, sender_sampled: bool, rng: &mut impl Rng) -> bool {
        match self {
            Policy::Full | Policy::AsSampling(_) | Policy::RandomSampling { .. } => true,
            Policy::AsCensoring(_) => sender_sampled,
            Policy::ProbabilisticTransmission { link_probability } => {
                rng.random_bool(*link_probability)
            }
            Policy::NonCooperative => false,
        }
    }
}

/// Marks exactly `count` of `nodes` as sampled, uniformly at random.
pub fn random_subset(nodes: usize, count: usize, rng: &mut impl Rng) -> Vec<bool> {
    let mut sampled = vec![false; nodes];
    for k in index::sample(rng, nodes, count) {
        sampled[k] = true;
    }
    sampled
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const AP: f64 = DEFAULT_ALPHA_PLUS;

    #[test]
    fn phi_endpoints_and_midpoint() {
        assert!((phi(AP, AP) - 1.0).abs() < 1e-15);
        assert!(phi(-AP, AP).abs() < 1e-15);
        assert!((phi(0.0, AP) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn phi_prime_at_zero() {
        // 0.25 / (sgm(4) − sgm(−4)), sgm(4) = 0.9820137900...
        let expected = 0.25 / (2.0 * 0.982_013_790_037_908 - 1.0);
        assert!((phi_prime(0.0, AP) - expected).abs() < 1e-12);
        assert!((phi_prime(0.0, AP) - 0.25933).abs() < 1e-5);
    }

    #[test]
    fn phi_prime_is_even() {
        for a in [0.3, 1.0, 2.5, 4.0] {
            assert!((phi_prime(a, AP) - phi_prime(-a, AP)).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_prime_matches_central_difference() {
        let h = 1e-5;
        for i in 0..=40 {
            let a = -AP + 2.0 * AP * i as f64 / 40.0;
            let fd = (phi(a + h, AP) - phi(a - h, AP)) / (2.0 * h);
            let exact = phi_prime(a, AP);
            assert!(((fd - exact) / exact).abs() < 1e-6, "alpha {a}: {fd} vs {exact}");
        }
    }

    #[test]
    fn decisions() {
        let mut st = SamplerState::new(SamplerParams::new(0.68, 0.1571), 3);
        assert!(st.decide());
        st.alpha = -1e-9;
        assert!(!st.decide());
        st.alpha = 0.0;
        assert!(st.decide());
    }

    #[test]
    fn decision_threshold_matches_phi() {
        for ap in [0.5, 1.0, 4.0, 10.0] {
            let mut st = SamplerState::new(SamplerParams { alpha_plus: ap, ..SamplerParams::new(1.0, 0.1) }, 1);
            for i in 0..=200 {
                st.alpha = -ap + 2.0 * ap * i as f64 / 200.0;
                assert_eq!(st.decide(), phi(st.alpha, ap) >= 0.5 || st.alpha >= 0.0);
                assert_eq!(st.decide(), st.alpha >= 0.0);
            }
        }
    }

    #[test]
    fn eps_refresh_keeps_stale_values() {
        let mut st = SamplerState::new(SamplerParams::new(0.68, 0.1571), 2);
        assert_eq!(st.eps2, vec![0.0, 0.0]);
        st.refresh_eps(0, 2.0, true);
        assert_eq!(st.eps2[0], 4.0);
        st.refresh_eps(0, 5.0, false);
        assert_eq!(st.eps2[0], 4.0);
    }

    #[test]
    fn sampled_node_with_zero_error_steps_down() {
        let p = SamplerParams::new(0.68, 0.1571);
        let mut st = SamplerState::new(p, 3);
        st.alpha = 0.0;
        st.sampled = true;
        let next = st.update_alpha(&[1.0 / 3.0; 3]);
        assert!((next + p.mu_s * phi_prime(0.0, AP) * p.beta).abs() < 1e-15);
    }

    #[test]
    fn idle_node_steps_up_by_weighted_error() {
        let p = SamplerParams::new(0.68, 0.1571);
        let mut st = SamplerState::new(p, 4);
        st.alpha = 0.0;
        st.sampled = false;
        st.eps2 = vec![0.3; 4];
        let next = st.update_alpha(&[0.25; 4]);
        assert!((next - p.mu_s * phi_prime(0.0, AP) * 0.3).abs() < 1e-15);
    }

    #[test]
    fn alpha_is_clamped() {
        let p = SamplerParams::new(0.68, 10.0);
        let mut st = SamplerState::new(p, 1);
        st.sampled = false;
        st.eps2 = vec![1e6];
        assert_eq!(st.update_alpha(&[1.0]), AP);
        st.sampled = true;
        st.eps2 = vec![0.0];
        st.alpha = -3.9;
        st.update_alpha(&[1.0]);
        assert!(st.alpha >= -AP);
    }

    #[test]
    fn random_subset_has_exact_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for count in 0..=10 {
            let s = random_subset(10, count, &mut rng);
            assert_eq!(s.iter().filter(|&&b| b).count(), count);
        }
        assert!(random_subset(7, 7, &mut rng).into_iter().all(|b| b));
    }

    #[test]
    fn link_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = Policy::AsCensoring(SamplerParams::new(0.68, 0.1571));
        assert!(c.link_active(true, &mut rng));
        assert!(!c.link_active(false, &mut rng));
        assert!(Policy::Full.link_active(false, &mut rng));
        assert!(!Policy::NonCooperative.link_active(true, &mut rng));
        let never = Policy::ProbabilisticTransmission { link_probability: 0.0 };
        assert!((0..100).all(|_| !never.link_active(true, &mut rng)));
    }

    #[test]
    fn policy_validation() {
        assert!(Policy::RandomSampling { sampled_nodes: 21 }.validate(20).is_err());
        assert!(Policy::RandomSampling { sampled_nodes: 20 }.validate(20).is_ok());
        assert!(Policy::ProbabilisticTransmission { link_probability: 1.5 }.validate(20).is_err());
        assert!(Policy::AsSampling(SamplerParams::new(-1.0, 0.1)).validate(20).is_err());
    }

    #[test]
    fn sampling_charges_sum_to_table_row() {
        use crate::analysis::op_cost_model;
        use crate::diffusion::{acw_ops, adapt_ops, combine_ops};
        for (m, n, s, si) in [(50, 4, true, 4), (50, 4, false, 0), (10, 7, true, 2), (3, 1, false, 1)] {
            let mut ops = combine_ops(m, n) + alpha_update_ops(n, si, s);
            if s {
                ops += adapt_ops(m) + acw_ops(m);
            }
            assert_eq!(ops, op_cost_model(CostRow::AdaptiveSampling, m, n, s, si));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn idle_nodes_never_decrease(alpha in -AP..0.0, e in proptest::collection::vec(0.0f64..5.0, 1..8)) {
                let n = e.len();
                let mut st = SamplerState::new(SamplerParams::new(0.68, 0.1571), n);
                st.alpha = alpha;
                st.eps2 = e;
                st.decide();
                prop_assert!(!st.sampled);
                let next = st.update_alpha(&vec![1.0 / n as f64; n]);
                prop_assert!(next >= alpha);
            }

            #[test]
            fn sampled_nodes_below_beta_decrease(alpha in 0.0..AP, e in proptest::collection::vec(0.0f64..0.6, 1..8)) {
                let n = e.len();
                let mut st = SamplerState::new(SamplerParams::new(0.68, 0.1571), n);
                st.alpha = alpha;
                st.eps2 = e;
                st.decide();
                let next = st.update_alpha(&vec![1.0 / n as f64; n]);
                prop_assert!(next < alpha);
            }
        }
    }
}
