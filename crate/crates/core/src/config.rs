//! Run configuration files.
//!
//! A config is flat TOML whose keys carry a section prefix:
//!
//! ```toml
//! run.name = "as"
//! run.iterations = 20000
//! topology.nodes = 20
//! topology.radius = 0.35
//! env.noise_variance = { low = 0.1, high = 0.4 }
//! env.flip_iteration = 10000
//! policy.kind = "as_sampling"
//! policy.beta = 0.68
//! policy.mu_s = 0.1571
//! ```
//!
//! Every key is optional except `policy.kind`; missing keys take the values
//! of [`RunConfig::default`]. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::{CommCounting, RunConfig, TopologySpec, WeightRule};
use crate::network::Topology;
use crate::sampling::{Policy, SamplerParams, DEFAULT_ALPHA_PLUS};
use crate::signals::Profile;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    topology: TopologySection,
    #[serde(default)]
    env: EnvSection,
    #[serde(default)]
    diffusion: DiffusionSection,
    policy: PolicySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    name: Option<String>,
    iterations: Option<usize>,
    realizations: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    comm_counting: Option<CommCounting>,
    export_bitmap: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    nodes: Option<usize>,
    radius: Option<f64>,
    edge_list: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvSection {
    filter_order: Option<usize>,
    noise_variance: Option<Profile>,
    input_variance: Option<Profile>,
    flip_iteration: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffusionSection {
    step_size: Option<Profile>,
    nu: Option<f64>,
    delta: Option<f64>,
    initial_weights: Option<WeightRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyKind {
    Full,
    AsSampling,
    AsCensoring,
    RandomSampling,
    ProbabilisticTransmission,
    NonCooperative,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicySection {
    kind: PolicyKind,
    beta: Option<f64>,
    mu_s: Option<f64>,
    alpha_plus: Option<f64>,
    sampled_nodes: Option<usize>,
    link_probability: Option<f64>,
}

impl PolicySection {
    fn into_policy(self) -> Result<Policy> {
        let given = [
            ("beta", self.beta.is_some()),
            ("mu_s", self.mu_s.is_some()),
            ("alpha_plus", self.alpha_plus.is_some()),
            ("sampled_nodes", self.sampled_nodes.is_some()),
            ("link_probability", self.link_probability.is_some()),
        ];
        let (allowed, required): (&[&str], &[&str]) = match self.kind {
            PolicyKind::Full | PolicyKind::NonCooperative => (&[], &[]),
            PolicyKind::AsSampling | PolicyKind::AsCensoring => {
                (&["beta", "mu_s", "alpha_plus"], &["beta", "mu_s"])
            }
            PolicyKind::RandomSampling => (&["sampled_nodes"], &["sampled_nodes"]),
            PolicyKind::ProbabilisticTransmission => (&["link_probability"], &["link_probability"]),
        };
        for (key, present) in given {
            if present && !allowed.contains(&key) {
                return Err(Error::Config(format!(
                    "policy.{key} does not apply to policy kind {:?}",
                    self.kind
                )));
            }
            if !present && required.contains(&key) {
                return Err(Error::Config(format!(
                    "policy kind {:?} requires policy.{key}",
                    self.kind
                )));
            }
        }
        let sampler = || SamplerParams {
            beta: self.beta.unwrap_or_default(),
            mu_s: self.mu_s.unwrap_or_default(),
            alpha_plus: self.alpha_plus.unwrap_or(DEFAULT_ALPHA_PLUS),
        };
        Ok(match self.kind {
            PolicyKind::Full => Policy::Full,
            PolicyKind::NonCooperative => Policy::NonCooperative,
            PolicyKind::AsSampling => Policy::AsSampling(sampler()),
            PolicyKind::AsCensoring => Policy::AsCensoring(sampler()),
            PolicyKind::RandomSampling => Policy::RandomSampling {
                sampled_nodes: self.sampled_nodes.unwrap_or_default(),
            },
            PolicyKind::ProbabilisticTransmission => Policy::ProbabilisticTransmission {
                link_probability: self.link_probability.unwrap_or_default(),
            },
        })
    }
}

/// Parses config text. `path` is used in diagnostics, and relative edge-list
/// paths are resolved against its directory.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|source| Error::ConfigParse {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = RunConfig::default();

    let run = file.run;
    if let Some(name) = run.name {
        cfg.name = name;
    }
    cfg.iterations = run.iterations.unwrap_or(cfg.iterations);
    cfg.realizations = run.realizations.unwrap_or(cfg.realizations);
    cfg.seed = run.seed.unwrap_or(cfg.seed);
    cfg.comm_counting = run.comm_counting.unwrap_or(cfg.comm_counting);
    cfg.export_bitmap = run.export_bitmap.unwrap_or(cfg.export_bitmap);
    if let Some(dir) = run.output_dir {
        cfg.output_dir = dir;
    }

    let topo = file.topology;
    cfg.topology = match (topo.edge_list, topo.nodes, topo.radius) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(Error::Config(
                "topology.edge_list cannot be combined with topology.nodes or topology.radius"
                    .into(),
            ))
        }
        (Some(edges), None, None) => {
            let full = path.parent().unwrap_or(Path::new("")).join(edges);
            let text = fs::read_to_string(&full).map_err(|source| Error::ConfigRead {
                path: full.clone(),
                source,
            })?;
            TopologySpec::Pinned(Topology::from_edge_list(&text)?)
        }
        (None, nodes, radius) => {
            let TopologySpec::Geometric { nodes: n0, radius: r0 } = cfg.topology else {
                unreachable!("default topology is geometric")
            };
            TopologySpec::Geometric {
                nodes: nodes.unwrap_or(n0),
                radius: radius.unwrap_or(r0),
            }
        }
    };

    let env = file.env;
    let e = &mut cfg.environment;
    e.filter_order = env.filter_order.unwrap_or(e.filter_order);
    if let Some(p) = env.noise_variance {
        e.noise_variance = p;
    }
    if let Some(p) = env.input_variance {
        e.input_variance = p;
    }
    e.flip_iteration = env.flip_iteration;

    let diff = file.diffusion;
    let d = &mut cfg.diffusion;
    if let Some(p) = diff.step_size {
        d.step_size = p;
    }
    d.nu = diff.nu.unwrap_or(d.nu);
    d.delta = diff.delta.unwrap_or(d.delta);
    d.initial_weights = diff.initial_weights.unwrap_or(d.initial_weights);

    cfg.policy = file.policy.into_policy()?;
    Ok(cfg)
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::ConfigRead {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse("policy.kind = \"full\"").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn full_config() {
        let cfg = parse(
            r#"
            run.name = "as"
            run.iterations = 500
            run.realizations = 3
            run.seed = 7
            run.comm_counting = "broadcast"
            topology.nodes = 10
            topology.radius = 0.5
            env.filter_order = 8
            env.noise_variance = { low = 0.05, high = 0.2 }
            env.input_variance = 1.5
            env.flip_iteration = 250
            diffusion.step_size = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]
            diffusion.initial_weights = "metropolis"
            policy.kind = "as_censoring"
            policy.beta = 0.34
            policy.mu_s = 0.2
            "#,
        )
        .unwrap();
        assert_eq!(cfg.name, "as");
        assert_eq!(cfg.topology, TopologySpec::Geometric { nodes: 10, radius: 0.5 });
        assert_eq!(cfg.environment.noise_variance, Profile::Uniform { low: 0.05, high: 0.2 });
        assert_eq!(cfg.environment.input_variance, Profile::Constant(1.5));
        assert_eq!(cfg.environment.flip_iteration, Some(250));
        assert_eq!(cfg.diffusion.step_size, Profile::Explicit(vec![0.5; 10]));
        assert_eq!(cfg.comm_counting, CommCounting::Broadcast);
        assert_eq!(
            cfg.policy,
            Policy::AsCensoring(SamplerParams { beta: 0.34, mu_s: 0.2, alpha_plus: 4.0 })
        );
    }

    #[test]
    fn section_tables_are_equivalent() {
        let dotted = parse("policy.kind = \"random_sampling\"\npolicy.sampled_nodes = 5").unwrap();
        let tables = parse("[policy]\nkind = \"random_sampling\"\nsampled_nodes = 5").unwrap();
        assert_eq!(dotted, tables);
    }

    #[test]
    fn policy_parameters_present_iff_required() {
        assert!(parse("policy.kind = \"as_sampling\"\npolicy.beta = 0.68").is_err());
        assert!(parse("policy.kind = \"full\"\npolicy.beta = 0.68").is_err());
        assert!(parse("policy.kind = \"random_sampling\"").is_err());
        assert!(parse("policy.kind = \"probabilistic_transmission\"\npolicy.sampled_nodes = 3").is_err());
        assert!(parse("policy.kind = \"probabilistic_transmission\"\npolicy.link_probability = 0.3").is_ok());
    }

    #[test]
    fn unknown_keys_and_kinds_rejected() {
        assert!(matches!(
            parse("policy.kind = \"full\"\nrun.iteration = 5"),
            Err(Error::ConfigParse { .. })
        ));
        assert!(parse("policy.kind = \"sometimes\"").is_err());
        assert!(parse("run.iterations = 5").is_err(), "policy.kind is mandatory");
    }

    #[test]
    fn edge_list_resolved_next_to_config() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("ring.txt"), "3\n0 1\n1 2\n2 0\n").unwrap();
        let path = dir.path().join("cfg.toml");
        fs::write(&path, "topology.edge_list = \"ring.txt\"\npolicy.kind = \"full\"").unwrap();
        let cfg = load_config(&path).unwrap();
        let TopologySpec::Pinned(t) = cfg.topology else {
            panic!("expected pinned topology")
        };
        assert_eq!(t.node_count(), 3);
        assert!(parse("topology.edge_list = \"x\"\ntopology.nodes = 3\npolicy.kind = \"full\"").is_err());
    }

    #[test]
    fn missing_file_is_read_error() {
        assert!(matches!(
            load_config(Path::new("/nonexistent/missing.toml")),
            Err(Error::ConfigRead { .. })
        ));
    }
}
