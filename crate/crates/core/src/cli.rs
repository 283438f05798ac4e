//! Command-line interface and experiment presets.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{beta_admissible, SteadyStatePrediction};
use crate::config::load_config;
use crate::error::{Error, Result};
use crate::harness::{monte_carlo, prepare, write_outputs, RunConfig, DEFAULT_SEED};
use crate::sampling::{Policy, SamplerParams};

/// Environment variable overriding every output directory.
pub const OUT_DIR_ENV: &str = "ASDIFF_OUT_DIR";

pub const PRESETS: [&str; 3] = ["fig_msd_cost", "fig_beta_sweep", "fig_censoring"];

/// Values of β/σ²_max covered by the β sweep.
pub const BETA_RATIOS: [f64; 7] = [1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 10.0];

pub const DEFAULT_BETA: f64 = 0.68;
pub const DEFAULT_MU_S: f64 = 0.1571;

#[derive(Debug, Parser)]
#[command(name = "asdiff", version, about = "Adaptive-sampling diffusion NLMS simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the campaign described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides run.output_dir.
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// Run a named experiment preset.
    Preset {
        /// fig_msd_cost, fig_beta_sweep or fig_censoring.
        name: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        realizations: usize,
        #[arg(long, default_value_t = 20_000)]
        iterations: usize,
        #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
        out: PathBuf,
    },
    /// Print the predicted steady-state sampled-node bounds.
    Predict {
        #[arg(long = "V")]
        nodes: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        sigma2_min: f64,
        #[arg(long)]
        sigma2_max: f64,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Shared knobs of every preset.
#[derive(Debug, Clone)]
pub struct PresetOptions {
    pub seed: u64,
    pub realizations: usize,
    pub iterations: usize,
    pub out: PathBuf,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            realizations: 100,
            iterations: 20_000,
            out: PathBuf::from("out"),
        }
    }
}

fn base_config(opts: &PresetOptions, name: &str, policy: Policy, flip: bool) -> RunConfig {
    let mut cfg = RunConfig {
        name: name.into(),
        policy,
        iterations: opts.iterations,
        realizations: opts.realizations,
        seed: opts.seed,
        ..Default::default()
    };
    if flip && opts.iterations >= 2 {
        cfg.environment.flip_iteration = Some(opts.iterations / 2);
    }
    cfg
}

fn adaptive(beta: f64) -> SamplerParams {
    SamplerParams::new(beta, DEFAULT_MU_S)
}

/// Expands a preset into the configs it runs.
pub fn preset_configs(name: &str, opts: &PresetOptions) -> Result<Vec<RunConfig>> {
    let cfg = |n: &str, p: Policy, flip: bool| base_config(opts, n, p, flip);
    match name {
        "fig_msd_cost" => {
            let mut out = vec![
                cfg("full", Policy::Full, true),
                cfg("as_sampling", Policy::AsSampling(adaptive(DEFAULT_BETA)), true),
            ];
            for vs in [5, 10, 15] {
                out.push(cfg(
                    &format!("random_{vs}"),
                    Policy::RandomSampling { sampled_nodes: vs },
                    true,
                ));
            }
            Ok(out)
        }
        "fig_beta_sweep" => {
            let sigma2_max = prepare(&cfg("probe", Policy::Full, false))?
                .environment
                .sigma2_max();
            Ok(BETA_RATIOS
                .iter()
                .map(|r| {
                    cfg(
                        &format!("beta_ratio_{r}"),
                        Policy::AsSampling(adaptive(r * sigma2_max)),
                        false,
                    )
                })
                .collect())
        }
        "fig_censoring" => Ok(vec![
            cfg("full", Policy::Full, true),
            cfg("as_sampling", Policy::AsSampling(adaptive(DEFAULT_BETA)), true),
            cfg("as_censoring", Policy::AsCensoring(adaptive(DEFAULT_BETA)), true),
            cfg(
                "pt_0.25",
                Policy::ProbabilisticTransmission { link_probability: 0.25 },
                true,
            ),
            cfg("non_cooperative", Policy::NonCooperative, true),
        ]),
        other => Err(Error::UnknownPreset(other.into())),
    }
}

/// Runs a preset and writes its outputs under `opts.out/<name>/`. Returns
/// the files written.
pub fn run_preset(name: &str, opts: &PresetOptions) -> Result<Vec<PathBuf>> {
    let configs = preset_configs(name, opts)?;
    for cfg in &configs {
        prepare(cfg)?;
    }
    let dir = opts.out.join(name);
    let mut written = Vec::new();
    let mut bounds = String::from("ratio,beta,lower,upper,measured\n");
    for (i, cfg) in configs.iter().enumerate() {
        let campaign = monte_carlo(cfg)?;
        written.push(write_outputs(&campaign, &dir)?);
        if name == "fig_beta_sweep" {
            let p = campaign.prediction.expect("sweep runs adaptive sampling");
            writeln!(
                bounds,
                "{},{:.6},{:.6},{:.6},{:.6}",
                BETA_RATIOS[i],
                p.beta,
                p.sampled_lower,
                p.sampled_upper,
                campaign.steady_state.pre_flip.sampled
            )
            .expect("writing to a String");
        }
    }
    if name == "fig_beta_sweep" {
        let path = dir.join("bounds.csv");
        fs::write(&path, bounds).map_err(|source| Error::Output {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

fn format_prediction(p: &SteadyStatePrediction) -> String {
    let t = &p.theta;
    format!(
        "V = {}\nbeta = {}\nsigma2_min = {}\nsigma2_max = {}\n\
         theta_max = {:.6}\ntheta_min = {:.6}\ntheta_bar_max = {:.6}\ntheta_bar_min = {:.6}\n\
         duty_cycle_min = {:.6}\nduty_cycle_max = {:.6}\n\
         lower = {:.6}\nupper = {:.6}\n",
        p.nodes,
        p.beta,
        p.sigma2_min,
        p.sigma2_max,
        t.theta_max,
        t.theta_min,
        t.theta_bar_max,
        t.theta_bar_min,
        p.duty_cycle_min,
        p.duty_cycle_max,
        p.sampled_lower,
        p.sampled_upper,
    )
}

fn run_config(config: &Path, out: Option<PathBuf>, stdout: &mut impl Write) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    let campaign = monte_carlo(&cfg)?;
    let csv = write_outputs(&campaign, &cfg.output_dir)?;
    let ss = &campaign.steady_state.pre_flip;
    let _ = writeln!(
        stdout,
        "{}: steady-state msd {:.2} dB, sampled {:.2}, comms {:.2}",
        cfg.name, ss.msd_db, ss.sampled, ss.comms
    );
    let _ = writeln!(stdout, "wrote {}", csv.display());
    Ok(())
}

/// Executes one parsed command, writing user-facing output to `stdout`.
pub fn execute(cli: Cli, stdout: &mut impl Write) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => run_config(&config, out, stdout),
        Command::Preset {
            name,
            seed,
            realizations,
            iterations,
            out,
        } => {
            let opts = PresetOptions {
                seed,
                realizations,
                iterations,
                out,
            };
            for path in run_preset(&name, &opts)? {
                let _ = writeln!(stdout, "wrote {}", path.display());
            }
            Ok(())
        }
        Command::Predict {
            nodes,
            beta,
            sigma2_min,
            sigma2_max,
        } => {
            if !beta_admissible(beta, sigma2_max) {
                return Err(Error::Analysis(format!(
                    "beta = {beta} is below sigma2_max = {sigma2_max}"
                )));
            }
            let p = SteadyStatePrediction::new(nodes, beta, sigma2_min, sigma2_max)?;
            let _ = write!(stdout, "{}", format_prediction(&p));
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let scenario = prepare(&cfg)?;
            let _ = writeln!(
                stdout,
                "ok: {} ({} nodes, mean degree {:.2}, policy {}, {} iterations x {} realizations)",
                cfg.name,
                scenario.node_count(),
                scenario.topology.mean_degree(),
                cfg.policy.name(),
                cfg.iterations,
                cfg.realizations
            );
            Ok(())
        }
    }
}
