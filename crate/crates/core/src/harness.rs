//! Seeded realizations, Monte Carlo campaigns and experiment outputs.
//!
//! A realization is a sequence of synchronous rounds. Each round runs
//! decide → adapt → transmit → ACW update → combine → α update, and every
//! phase reads only state produced by the previous phase.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{CostRow, OpCount, SteadyStatePrediction};
use crate::diffusion::{acw_ops, adapt_ops, combine_ops, NodeEstimator};
use crate::error::{Error, Result};
use crate::network::{build_random_geometric, metropolis_weights, uniform_weights, Topology};
use crate::rng::{self, StreamRole, NETWORK_STREAM};
use crate::sampling::{alpha_update_ops, random_subset, Policy, SamplerState};
use crate::signals::{init_environment, Environment, EnvironmentSpec, NodeStream, Profile};

/// Taps of the reporting moving average.
pub const SMOOTHING_TAPS: usize = 64;

/// Fraction of a segment treated as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.2;

/// Base seed of the default configuration and presets.
pub const DEFAULT_SEED: u64 = 2;

/// Realizations run concurrently before their records are folded into the
/// running sums. Folding happens in realization order, so the result does
/// not depend on the thread schedule.
const REALIZATION_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Geometric { nodes: usize, radius: f64 },
    Pinned(Topology),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    Uniform,
    Metropolis,
}

/// How transmissions are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommCounting {
    /// One event per node-to-neighbor transfer.
    Unicast,
    /// One event per node that transmits to anyone.
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub step_size: Profile,
    pub nu: f64,
    pub delta: f64,
    pub initial_weights: WeightRule,
}

impl Default for DiffusionSpec {
    fn default() -> Self {
        Self {
            step_size: Profile::Uniform { low: 0.2, high: 1.0 },
            nu: 0.2,
            delta: 1e-5,
            initial_weights: WeightRule::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub topology: TopologySpec,
    pub environment: EnvironmentSpec,
    pub diffusion: DiffusionSpec,
    pub policy: Policy,
    pub iterations: usize,
    pub realizations: usize,
    pub seed: u64,
    pub comm_counting: CommCounting,
    pub output_dir: PathBuf,
    /// Also write the per-round sampled bitmap of realization 0.
    pub export_bitmap: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            topology: TopologySpec::Geometric { nodes: 20, radius: 0.35 },
            environment: EnvironmentSpec::default(),
            diffusion: DiffusionSpec::default(),
            policy: Policy::Full,
            iterations: 20_000,
            realizations: 100,
            seed: DEFAULT_SEED,
            comm_counting: CommCounting::Unicast,
            output_dir: PathBuf::from("out"),
            export_bitmap: false,
        }
    }
}

/// Everything fixed for a whole campaign: graph, drawn profiles and w°.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub environment: Environment,
    pub step_sizes: Vec<f64>,
    /// Initial combination weights, aligned with each neighborhood.
    pub initial_weights: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    /// Bounds on the steady-state sampled-node count. `None` unless the
    /// policy runs the adaptive sampler with β ≥ σ²_max and all noise
    /// variances are positive.
    pub fn prediction(&self, policy: &Policy) -> Option<SteadyStatePrediction> {
        let p = policy.sampler()?;
        SteadyStatePrediction::new(
            self.node_count(),
            p.beta,
            self.environment.sigma2_min(),
            self.environment.sigma2_max(),
        )
        .ok()
    }
}

/// Validates `cfg` and draws the campaign-level quantities. `run` and
/// `validate` both go through here.
pub fn prepare(cfg: &RunConfig) -> Result<Scenario> {
    if cfg.iterations == 0 {
        return Err(Error::Config("run.iterations must be at least 1".into()));
    }
    if cfg.realizations == 0 {
        return Err(Error::Config("run.realizations must be at least 1".into()));
    }
    let topology = match &cfg.topology {
        TopologySpec::Geometric { nodes, radius } => {
            if !(*radius > 0.0 && *radius <= 1.0) {
                return Err(Error::Config(format!("topology.radius = {radius} outside (0, 1]")));
            }
            build_random_geometric(*nodes, *radius, cfg.seed)?
        }
        TopologySpec::Pinned(t) => t.clone(),
    };
    let nodes = topology.node_count();
    if let Some(flip) = cfg.environment.flip_iteration {
        if flip == 0 || flip >= cfg.iterations {
            return Err(Error::Config(format!(
                "env.flip_iteration = {flip} must lie in 1..{}",
                cfg.iterations
            )));
        }
    }
    cfg.policy.validate(nodes)?;
    let d = &cfg.diffusion;
    d.step_size
        .validate("step size", nodes, |x| x > 0.0 && x < 2.0)?;
    if !(d.nu > 0.0 && d.nu <= 1.0) {
        return Err(Error::Config(format!("diffusion.nu = {} outside (0, 1]", d.nu)));
    }
    if !(d.delta > 0.0 && d.delta.is_finite()) {
        return Err(Error::Config(format!("diffusion.delta = {} must be positive", d.delta)));
    }
    let environment = init_environment(&cfg.environment, nodes, cfg.seed)?;
    let step_sizes = d.step_size.draw(
        nodes,
        &mut rng::stream(cfg.seed, 0, NETWORK_STREAM, StreamRole::StepProfile),
    );
    let initial_weights = if matches!(cfg.policy, Policy::NonCooperative) {
        vec![vec![1.0]; nodes]
    } else {
        let matrix = match d.initial_weights {
            WeightRule::Uniform => uniform_weights(&topology),
            WeightRule::Metropolis => metropolis_weights(&topology),
        };
        (0..nodes).map(|k| matrix.column(k).to_vec()).collect()
    };
    Ok(Scenario {
        topology,
        environment,
        step_sizes,
        initial_weights,
    })
}

/// Per-round metrics of one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    /// Linear network MSD after the combine step.
    pub msd: f64,
    pub sampled_count: usize,
    pub comms: u64,
    pub mults: u64,
    pub adds: u64,
}

/// (1/V) Σ_k ‖w° − w_k‖².
pub fn network_msd<W: AsRef<[f64]>>(estimates: &[W], w_opt: &[f64]) -> f64 {
    let total: f64 = estimates
        .iter()
        .map(|w| {
            w.as_ref()
                .iter()
                .zip(w_opt)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
        })
        .sum();
    total / estimates.len() as f64
}

/// Causal length-`taps` moving average. The first `taps − 1` outputs
/// average over the samples available so far.
pub fn moving_average(series: &[f64], taps: usize) -> Vec<f64> {
    assert!(taps >= 1, "moving average needs at least one tap");
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for (n, x) in series.iter().enumerate() {
        acc += x;
        if n >= taps {
            acc -= series[n - taps];
        }
        out.push(acc / (n + 1).min(taps) as f64);
    }
    out
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// First index at or after `start` where `series` drops below `threshold`,
/// counting only after it has been at or above the threshold.
pub fn first_crossing_below(series: &[f64], start: usize, threshold: f64) -> Option<usize> {
    let from = start + series.get(start..)?.iter().position(|&x| x >= threshold)?;
    series[from..]
        .iter()
        .position(|&x| x < threshold)
        .map(|i| from + i)
}

/// Runs realization `r` of `cfg` over `scenario`.
pub fn run_realization(cfg: &RunConfig, scenario: &Scenario, r: u64) -> Vec<IterationRecord> {
    run_realization_with(cfg, scenario, r, |_, _| {})
}

/// Like [`run_realization`], calling `observe` with each record and the
/// sampled bitmap of that round.
pub fn run_realization_with(
    cfg: &RunConfig,
    scenario: &Scenario,
    r: u64,
    mut observe: impl FnMut(&IterationRecord, &[bool]),
) -> Vec<IterationRecord> {
    let nodes = scenario.node_count();
    let m = scenario.environment.filter_order();
    let policy = &cfg.policy;
    let cooperative = !matches!(policy, Policy::NonCooperative);
    let hoods: Vec<Vec<usize>> = (0..nodes)
        .map(|k| {
            if cooperative {
                scenario.topology.neighbors(k).to_vec()
            } else {
                vec![k]
            }
        })
        .collect();
    let mut env = scenario.environment.clone();
    let mut streams: Vec<NodeStream> = (0..nodes)
        .map(|k| NodeStream::new(k, m, cfg.seed, r))
        .collect();
    let mut est: Vec<NodeEstimator> = (0..nodes)
        .map(|k| {
            NodeEstimator::new(
                m,
                &scenario.initial_weights[k],
                scenario.step_sizes[k],
                cfg.diffusion.nu,
                cfg.diffusion.delta,
            )
            .expect("parameters checked by prepare")
        })
        .collect();
    let mut samplers: Vec<SamplerState> = match policy.sampler() {
        Some(p) => hoods.iter().map(|h| SamplerState::new(p, h.len())).collect(),
        None => Vec::new(),
    };
    let mut inbox: Vec<Vec<Vec<f64>>> = hoods.iter().map(|h| vec![vec![0.0; m]; h.len()]).collect();
    let mut policy_rngs: Vec<_> = (0..nodes)
        .map(|k| rng::stream(cfg.seed, r, k as u64, StreamRole::Policy))
        .collect();
    let mut subset_rng = rng::stream(cfg.seed, r, NETWORK_STREAM, StreamRole::Policy);

    let mut sampled = vec![true; nodes];
    let mut errors = vec![0.0; nodes];
    let mut sent = vec![false; nodes];
    let mut records = Vec::with_capacity(cfg.iterations);

    for n in 0..cfg.iterations {
        env.apply_flip(n);

        match policy {
            Policy::AsSampling(_) | Policy::AsCensoring(_) => {
                for (s, st) in sampled.iter_mut().zip(&mut samplers) {
                    *s = st.decide();
                }
            }
            Policy::RandomSampling { sampled_nodes } => {
                sampled = random_subset(nodes, *sampled_nodes, &mut subset_rng);
            }
            _ => {}
        }

        let mut ops = OpCount::default();
        for k in 0..nodes {
            let (u, d) = streams[k].advance(&env);
            if sampled[k] {
                let e = est[k].compute_error(u, d);
                est[k].adapt(u, Some(e));
                errors[k] = e;
                ops += adapt_ops(m);
            } else if !policy.censors() {
                est[k].adapt(u, None);
            }
        }

        let mut comms = 0u64;
        sent.fill(false);
        for k in 0..nodes {
            for (slot, &j) in hoods[k].iter().enumerate() {
                let fresh = j == k || policy.link_active(sampled[j], &mut policy_rngs[k]);
                if !fresh {
                    continue;
                }
                inbox[k][slot].copy_from_slice(&est[j].psi);
                if let Some(st) = samplers.get_mut(k) {
                    st.refresh_eps(slot, errors[j], sampled[j]);
                }
                if j != k {
                    comms += 1;
                    sent[j] = true;
                }
            }
        }
        if cfg.comm_counting == CommCounting::Broadcast {
            comms = sent.iter().filter(|&&s| s).count() as u64;
        }

        for k in 0..nodes {
            if sampled[k] {
                est[k].acw_update(&inbox[k]);
                ops += acw_ops(m);
            }
            est[k].combine(&inbox[k]);
            ops += combine_ops(m, hoods[k].len());
        }

        for (k, st) in samplers.iter_mut().enumerate() {
            st.update_alpha(&est[k].weights);
            let fresh = hoods[k].iter().filter(|&&i| sampled[i]).count();
            ops += alpha_update_ops(hoods[k].len(), fresh, sampled[k]);
        }

        let record = IterationRecord {
            n,
            msd: network_msd(
                &est.iter().map(|e| e.w.as_slice()).collect::<Vec<_>>(),
                &env.w_opt,
            ),
            sampled_count: sampled.iter().filter(|&&s| s).count(),
            comms,
            mults: ops.mults,
            adds: ops.adds,
        };
        observe(&record, &sampled);
        records.push(record);
    }
    records
}

/// Network cost the operation-count model predicts for one round, given the
/// sampled bitmap.
pub fn modeled_round_cost(cfg: &RunConfig, scenario: &Scenario, sampled: &[bool]) -> OpCount {
    let m = scenario.environment.filter_order();
    let row = cfg.policy.cost_row();
    (0..scenario.node_count())
        .map(|k| match cfg.policy {
            Policy::NonCooperative => {
                crate::analysis::op_cost_model(CostRow::Dnlms, m, 1, sampled[k], sampled[k] as usize)
            }
            _ => {
                let hood = scenario.topology.neighbors(k);
                let fresh = hood.iter().filter(|&&i| sampled[i]).count();
                crate::analysis::op_cost_model(row, m, hood.len(), sampled[k], fresh)
            }
        })
        .sum()
}

/// Mean of the per-realization records at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AggregateRecord {
    pub n: usize,
    pub msd: f64,
    pub sampled: f64,
    pub comms: f64,
    pub mults: f64,
    pub adds: f64,
}

/// Element-wise mean over realizations.
pub fn aggregate(runs: &[Vec<IterationRecord>]) -> Vec<AggregateRecord> {
    let mut sums = Sums::new(runs.first().map_or(0, Vec::len));
    for run in runs {
        sums.add(run);
    }
    sums.mean(runs.len())
}

struct Sums(Vec<AggregateRecord>);

impl Sums {
    fn new(len: usize) -> Self {
        Self((0..len).map(|n| AggregateRecord { n, ..Default::default() }).collect())
    }

    fn add(&mut self, run: &[IterationRecord]) {
        assert_eq!(run.len(), self.0.len(), "realizations differ in length");
        for (acc, rec) in self.0.iter_mut().zip(run) {
            acc.msd += rec.msd;
            acc.sampled += rec.sampled_count as f64;
            acc.comms += rec.comms as f64;
            acc.mults += rec.mults as f64;
            acc.adds += rec.adds as f64;
        }
    }

    fn mean(mut self, count: usize) -> Vec<AggregateRecord> {
        let c = count as f64;
        for acc in &mut self.0 {
            acc.msd /= c;
            acc.sampled /= c;
            acc.comms /= c;
            acc.mults /= c;
            acc.adds /= c;
        }
        self.0
    }
}

/// Averages over the steady-state window of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentSummary {
    /// First iteration of the window.
    pub start: usize,
    /// One past the last iteration of the window.
    pub end: usize,
    pub sampled: f64,
    pub msd_db: f64,
    pub comms: f64,
}

impl SegmentSummary {
    /// Final [`STEADY_STATE_FRACTION`] of `series[begin..end]`.
    pub fn over(series: &[AggregateRecord], begin: usize, end: usize) -> Self {
        let len = ((end - begin) as f64 * STEADY_STATE_FRACTION).ceil().max(1.0) as usize;
        let start = end - len.min(end - begin);
        let window = &series[start..end];
        let mean = |f: fn(&AggregateRecord) -> f64| window.iter().map(f).sum::<f64>() / window.len() as f64;
        Self {
            start,
            end,
            sampled: mean(|r| r.sampled),
            msd_db: to_db(mean(|r| r.msd)),
            comms: mean(|r| r.comms),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub pre_flip: SegmentSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post_flip: Option<SegmentSummary>,
}

impl SteadyState {
    pub fn of(series: &[AggregateRecord], flip: Option<usize>) -> Self {
        let total = series.len();
        match flip {
            Some(f) if f > 0 && f < total => Self {
                pre_flip: SegmentSummary::over(series, 0, f),
                post_flip: Some(SegmentSummary::over(series, f, total)),
            },
            _ => Self {
                pre_flip: SegmentSummary::over(series, 0, total),
                post_flip: None,
            },
        }
    }
}

/// Result of a Monte Carlo campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub series: Vec<AggregateRecord>,
    pub steady_state: SteadyState,
    pub prediction: Option<SteadyStatePrediction>,
    /// Sampled bitmap of realization 0, when requested.
    pub bitmap: Option<Vec<Vec<bool>>>,
}

impl Campaign {
    pub fn msd_db_smoothed(&self) -> Vec<f64> {
        let msd: Vec<f64> = self.series.iter().map(|r| r.msd).collect();
        moving_average(&msd, SMOOTHING_TAPS).into_iter().map(to_db).collect()
    }
}

/// Runs every realization of `cfg` and averages them.
pub fn monte_carlo(cfg: &RunConfig) -> Result<Campaign> {
    let scenario = prepare(cfg)?;
    let prediction = scenario.prediction(&cfg.policy);
    let mut sums = Sums::new(cfg.iterations);
    let mut bitmap = None;
    let total = cfg.realizations as u64;
    let mut next = 0u64;
    while next < total {
        let batch: Vec<u64> = (next..total.min(next + REALIZATION_BATCH as u64)).collect();
        let runs: Vec<_> = batch
            .par_iter()
            .map(|&r| {
                if r == 0 && cfg.export_bitmap {
                    let mut rows = Vec::with_capacity(cfg.iterations);
                    let rec = run_realization_with(cfg, &scenario, r, |_, s| rows.push(s.to_vec()));
                    (rec, Some(rows))
                } else {
                    (run_realization(cfg, &scenario, r), None)
                }
            })
            .collect();
        for (run, rows) in runs {
            sums.add(&run);
            if rows.is_some() {
                bitmap = rows;
            }
        }
        next += batch.len() as u64;
    }
    let series = sums.mean(cfg.realizations);
    let steady_state = SteadyState::of(&series, cfg.environment.flip_iteration);
    Ok(Campaign {
        config: cfg.clone(),
        scenario,
        series,
        steady_state,
        prediction,
        bitmap,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    seed: u64,
    iterations: usize,
    realizations: usize,
    nodes: usize,
    mean_degree: f64,
    filter_order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    flip_iteration: Option<usize>,
    comm_counting: CommCounting,
    nu: f64,
    delta: f64,
    initial_weights: WeightRule,
    step_sizes: &'a [f64],
    noise_variance: &'a [f64],
    input_variance: &'a [f64],
    w_opt: &'a [f64],
    edges: Vec<[usize; 2]>,
    policy: &'a Policy,
    steady_state: SteadyState,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction: Option<SteadyStatePrediction>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<name>.csv`, `<name>.manifest.toml` and, if recorded,
/// `<name>.sampled.txt` into `dir`. Returns the CSV path.
pub fn write_outputs(campaign: &Campaign, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| Error::Output {
        path: dir.to_path_buf(),
        source,
    })?;
    let cfg = &campaign.config;
    let smoothed = campaign.msd_db_smoothed();
    let mut csv = String::from("n,msd_db,msd_db_smoothed,sampled,comms,mults,adds\n");
    for (rec, s) in campaign.series.iter().zip(&smoothed) {
        writeln!(
            csv,
            "{},{:.6},{:.6},{:.4},{:.4},{:.1},{:.1}",
            rec.n,
            to_db(rec.msd),
            s,
            rec.sampled,
            rec.comms,
            rec.mults,
            rec.adds
        )
        .expect("writing to a String");
    }
    let csv_path = dir.join(format!("{}.csv", cfg.name));
    write_file(&csv_path, &csv)?;

    let scenario = &campaign.scenario;
    let env = &scenario.environment;
    let manifest = Manifest {
        name: &cfg.name,
        seed: cfg.seed,
        iterations: cfg.iterations,
        realizations: cfg.realizations,
        nodes: scenario.node_count(),
        mean_degree: scenario.topology.mean_degree(),
        filter_order: env.filter_order(),
        flip_iteration: env.flip_iteration,
        comm_counting: cfg.comm_counting,
        nu: cfg.diffusion.nu,
        delta: cfg.diffusion.delta,
        initial_weights: cfg.diffusion.initial_weights,
        step_sizes: &scenario.step_sizes,
        noise_variance: &env.sigma2_v,
        input_variance: &env.sigma2_u,
        w_opt: &env.w_opt,
        edges: scenario.topology.edges().into_iter().map(|(j, k)| [j, k]).collect(),
        policy: &cfg.policy,
        steady_state: campaign.steady_state,
        prediction: campaign.prediction,
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
    write_file(&dir.join(format!("{}.manifest.toml", cfg.name)), &text)?;

    if let Some(rows) = &campaign.bitmap {
        let mut out = String::with_capacity(rows.len() * (scenario.node_count() + 1));
        for row in rows {
            out.extend(row.iter().map(|&s| if s { '1' } else { '0' }));
            out.push('\n');
        }
        write_file(&dir.join(format!("{}.sampled.txt", cfg.name)), &out)?;
    }
    Ok(csv_path)
}
