//! Adapt-then-combine diffusion NLMS with adaptive combination weights.
//!
//! One round at node `k`:
//!
//! ```text
//! e_k   = d_k − u_kᵀ w_k
//! ψ_k   = w_k + μ̃_k / (δ + ‖u_k‖²) · u_k e_k
//! σ²_jk = (1 − ν_k) σ²_jk + ν_k ‖ψ_j − w_k‖²          j ∈ N_k
//! c_jk  = σ⁻²_jk / Σ_ℓ σ⁻²_ℓk
//! w_k   = Σ_j c_jk ψ_j
//! ```
//!
//! All per-neighbor vectors are aligned with the node's sorted neighbor list.

use crate::analysis::OpCount;
use crate::error::{Error, Result};

/// Smallest disagreement energy used when inverting σ²_jk.
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// Operations charged for the error and adapt steps of a sampled node.
pub const fn adapt_ops(filter_order: usize) -> OpCount {
    let m = filter_order as u64;
    // error: M mults, M adds; step size: M + 1 mults, M adds; update: M + 1 mults, M adds
    OpCount::new(3 * m + 2, 3 * m)
}

/// Operations charged for the combination-weight update of a sampled node.
pub const fn acw_ops(filter_order: usize) -> OpCount {
    OpCount::new(2, filter_order as u64 + 3)
}

/// Operations charged for the combine step over `neighborhood` estimates.
pub const fn combine_ops(filter_order: usize, neighborhood: usize) -> OpCount {
    let (m, n) = (filter_order as u64, neighborhood as u64);
    OpCount::new(m * n, m * n - m)
}

/// Local state of one diffusion node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEstimator {
    /// Combined estimate w_k.
    pub w: Vec<f64>,
    /// Intermediate estimate ψ_k.
    pub psi: Vec<f64>,
    /// Disagreement energies σ²_jk, one per neighbor.
    pub sigma2: Vec<f64>,
    /// Combination weights c_jk, one per neighbor.
    pub weights: Vec<f64>,
    pub mu_tilde: f64,
    pub nu: f64,
    pub delta: f64,
}

impl NodeEstimator {
    /// Zero estimates with combination weights `initial_weights`.
    ///
    /// σ²_jk starts at `1/(|N_k| c_jk)`, so uniform initial weights give
    /// σ²_jk = 1 and the first weight update starts from `initial_weights`.
    pub fn new(
        filter_order: usize,
        initial_weights: &[f64],
        mu_tilde: f64,
        nu: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(mu_tilde > 0.0 && mu_tilde < 2.0) {
            return Err(Error::Config(format!("step size {mu_tilde} outside (0, 2)")));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::Config(format!("forgetting factor {nu} outside (0, 1]")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("regularization {delta} must be positive")));
        }
        if initial_weights.iter().any(|&c| c.is_nan() || c <= 0.0) {
            return Err(Error::Config("initial combination weights must be positive".into()));
        }
        let n = initial_weights.len() as f64;
        Ok(Self {
            w: vec![0.0; filter_order],
            psi: vec![0.0; filter_order],
            sigma2: initial_weights.iter().map(|c| 1.0 / (n * c)).collect(),
            weights: initial_weights.to_vec(),
            mu_tilde,
            nu,
            delta,
        })
    }

    pub fn filter_order(&self) -> usize {
        self.w.len()
    }

    /// e_k = d_k − u_kᵀ w_k.
    pub fn compute_error(&self, u: &[f64], d: f64) -> f64 {
        d - dot(u, &self.w)
    }

    /// Intermediate estimate ψ_k(n+1).
    ///
    /// `error` is `Some(e_k)` for a sampled node. An unsampled node passes
    /// `None` and simply copies w_k(n), with no error or step size computed.
    pub fn adapt(&mut self, u: &[f64], error: Option<f64>) {
        match error {
            Some(e) => {
                let mu = self.mu_tilde / (self.delta + dot(u, u));
                let gain = mu * e;
                for ((psi, w), u) in self.psi.iter_mut().zip(&self.w).zip(u) {
                    *psi = w + gain * u;
                }
            }
            None => self.psi.copy_from_slice(&self.w),
        }
    }

    /// Updates σ²_jk from the neighbors' intermediate estimates and the
    /// current combined estimate, then renormalizes the weights.
    pub fn acw_update<P: AsRef<[f64]>>(&mut self, neighbor_psi: &[P]) {
        debug_assert_eq!(neighbor_psi.len(), self.sigma2.len());
        let nu = self.nu;
        for (sigma2, psi) in self.sigma2.iter_mut().zip(neighbor_psi) {
            let dist: f64 = psi
                .as_ref()
                .iter()
                .zip(&self.w)
                .map(|(p, w)| (p - w) * (p - w))
                .sum();
            *sigma2 = ((1.0 - nu) * *sigma2 + nu * dist).max(SIGMA2_FLOOR);
        }
        let total: f64 = self.sigma2.iter().map(|s| s.recip()).sum();
        for (c, s) in self.weights.iter_mut().zip(&self.sigma2) {
            *c = s.recip() / total;
        }
    }

    /// w_k(n+1) = Σ_j c_jk ψ_j(n+1).
    pub fn combine<P: AsRef<[f64]>>(&mut self, neighbor_psi: &[P]) {
        debug_assert_eq!(neighbor_psi.len(), self.weights.len());
        self.w.fill(0.0);
        for (c, psi) in self.weights.iter().zip(neighbor_psi) {
            for (w, p) in self.w.iter_mut().zip(psi.as_ref()) {
                *w += c * p;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
