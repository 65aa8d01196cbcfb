//! Experiment driver: instance materialization, solver dispatch, metrics.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use privsub_core::audit::{
    appendix_c_counterexample, exact_at_distribution, exact_em_distribution,
    exact_subsampled_distribution, verify_dp, AuditReport, CounterexampleReport, DpMode,
    DEFAULT_SUPPORT_CAP,
};
use privsub_core::clustering::{self, ClusterInstance, ClusterInstanceFile, CostPower};
use privsub_core::dataset::Dataset;
use privsub_core::heavyhitters::{
    shifting_hh, tau_star, MonitorOracle, Stream,
};
use privsub_core::setcover::{
    cost_set_cov, dp_greedy_scaling, GreedyScalingConfig, SetCoverInstanceFile,
    SetCoverRecordSpec, SetMembership, SetSystem,
};
use privsub_core::submodular::{
    dp_submod_greedy_cardinality, dp_submod_matroid, objective_value, CardinalityGreedyOracle,
    ConstraintSpec, ItemSet, Matroid, SubmodularInstanceFile, UserFn, UserFnSpec,
};
use privsub_core::subsample::rate_for_target;
use privsub_core::{Error, PrivacyParams, RandomSource, Result};

use crate::config::{ExperimentConfig, GeneratorSpec, MetricsRow, Task};
use crate::generate;
use crate::oracles;

/// A materialized problem instance.
pub enum Instance {
    Submodular { dataset: Dataset<UserFn>, matroid: Matroid },
    Setcover { system: SetSystem, dataset: Dataset<SetMembership>, planted_opt: Option<usize> },
    Clustering(ClusterInstance),
    Hh { stream: Stream, k: usize },
}

/// Build the instance from the config: load the file when given, otherwise
/// run the named generator.
pub fn materialize_instance(config: &ExperimentConfig) -> Result<Instance> {
    if let Some(path) = &config.instance {
        let text = std::fs::read_to_string(path)?;
        return match config.task {
            Task::SubmodCardinality | Task::SubmodMatroid => {
                let file = SubmodularInstanceFile::parse(&text)?;
                Ok(Instance::Submodular { dataset: file.dataset()?, matroid: file.matroid()? })
            }
            Task::Setcover => {
                let file = SetCoverInstanceFile::parse(&text)?;
                let (system, dataset) = file.instance()?;
                Ok(Instance::Setcover { system, dataset, planted_opt: None })
            }
            Task::Clustering => {
                let file = ClusterInstanceFile::parse(&text)?;
                Ok(Instance::Clustering(file.instance()?))
            }
            Task::Heavyhitters => Err(Error::InvalidParameter(
                "heavy-hitter streams load via the generator spec (CSV ingestion needs \
                 t/alphabet metadata)"
                    .into(),
            )),
            Task::Audit => Err(Error::InvalidParameter("audit takes no instance".into())),
        };
    }
    let spec = config
        .generator
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("no instance source".into()))?;
    match spec {
        GeneratorSpec::RandomCoverage { m, n, links, constraint, instance_seed } => {
            let dataset = generate::random_coverage(*m, *n, *links, *instance_seed);
            Ok(Instance::Submodular { dataset, matroid: constraint.matroid(*m)? })
        }
        GeneratorSpec::PlantedSetcover { q, n, m, instance_seed } => {
            let (system, dataset, _) = generate::planted_setcover(*q, *n, *m, *instance_seed)?;
            Ok(Instance::Setcover { system, dataset, planted_opt: Some(*q) })
        }
        GeneratorSpec::PlantedClusters { k, m, n, q, instance_seed } => {
            let q = CostPower::from_u8(*q)?;
            Ok(Instance::Clustering(generate::planted_clusters(*k, *m, *n, q, *instance_seed)?))
        }
        GeneratorSpec::PlantedHhStream { k, t, alphabet, n, instance_seed } => {
            let population = n.unwrap_or_else(|| {
                generate::planted_hh_population(
                    *k,
                    *t,
                    *alphabet,
                    config.params.beta,
                    config.params.epsilon,
                )
            });
            let stream =
                generate::planted_hh_stream(*k, *t, *alphabet, population, *instance_seed)?;
            Ok(Instance::Hh { stream, k: *k })
        }
    }
}

/// Serialize an instance in its on-disk interchange format. Returns the
/// contents and a suggested file extension.
pub fn instance_to_file(instance: &Instance) -> Result<(String, &'static str)> {
    match instance {
        Instance::Submodular { dataset, matroid } => {
            let users = dataset
                .values()
                .map(|f| match f {
                    UserFn::Coverage { links } => UserFnSpec::Coverage(links.items().collect()),
                    UserFn::BudgetAdditive { links, weight } => UserFnSpec::Tagged {
                        function: "budget_additive".into(),
                        items: links.items().collect(),
                        weight: Some(*weight),
                    },
                })
                .collect();
            let constraint = match matroid {
                Matroid::Uniform { k, .. } => ConstraintSpec::Cardinality(*k),
                Matroid::Partition { blocks, budgets, .. } => ConstraintSpec::Partition {
                    blocks: blocks.iter().map(|b| b.items().collect()).collect(),
                    budgets: budgets.clone(),
                },
            };
            let file =
                SubmodularInstanceFile { m: matroid.ground_size(), users, constraint };
            Ok((file.to_json()?, "json"))
        }
        Instance::Setcover { system, dataset, .. } => {
            let file = SetCoverInstanceFile {
                m: system.m,
                records: dataset
                    .records()
                    .iter()
                    .map(|r| SetCoverRecordSpec { id: r.id, sets: r.value.clone() })
                    .collect(),
            };
            Ok((file.to_json()?, "json"))
        }
        Instance::Clustering(inst) => {
            let m = inst.metric.size();
            let mut lower = Vec::with_capacity(m * (m - 1) / 2);
            for a in 1..m {
                for b in 0..a {
                    lower.push(inst.metric.distance(a, b));
                }
            }
            let file = ClusterInstanceFile {
                m,
                distances: lower,
                users: inst.dataset.values().copied().collect(),
                k: inst.k,
                q: match inst.q {
                    CostPower::One => 1,
                    CostPower::Two => 2,
                },
            };
            Ok((file.to_json()?, "json"))
        }
        Instance::Hh { stream, .. } => {
            let mut buf = Vec::new();
            stream.to_csv(&mut buf)?;
            Ok((String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))?, "csv"))
        }
    }
}

/// Everything a run produces: rows, their CSV rendering, optional
/// task-specific artifacts, and the audit battery for the audit task.
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub csv: String,
    /// `(file suffix, contents)` side outputs, e.g. a permutation JSON or a
    /// report-log CSV from the first (seed, trial).
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub audit: Option<AuditBattery>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.audit.as_ref().map_or(true, |battery| battery.pass)
    }
}

/// Run the configured experiment over all (seed, trial) pairs.
///
/// Trials fan out across worker threads, each with its own
/// `RandomSource::new(seed, trial)`; rows are merged back in (seed, trial)
/// order so output bytes do not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    if config.task == Task::Audit {
        let battery = run_audit_battery(config.params.epsilon)?;
        let json = serde_json::to_string_pretty(&battery)
            .map_err(|e| Error::Parse(e.to_string()))?
            .into_bytes();
        return Ok(RunOutput {
            rows: Vec::new(),
            csv: String::new(),
            artifacts: vec![("audit.json".into(), json)],
            audit: Some(battery),
        });
    }

    let instance = materialize_instance(config)?;
    let pairs: Vec<(u64, usize)> = config
        .seeds
        .iter()
        .flat_map(|&seed| (0..config.trials).map(move |trial| (seed, trial)))
        .collect();
    let mut results: Vec<((u64, usize), (MetricsRow, Option<Vec<u8>>))> = pairs
        .par_iter()
        .map(|&(seed, trial)| {
            let mut rng = RandomSource::new(seed, trial as u64);
            let started = Instant::now();
            let (mut row, artifact) = run_single(config, &instance, seed, trial, &mut rng)?;
            if config.record_runtime {
                row.runtime_ms = Some(started.elapsed().as_secs_f64() * 1e3);
            }
            if !row.utility.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite utility for seed {seed}, trial {trial}"
                )));
            }
            Ok(((seed, trial), (row, artifact)))
        })
        .collect::<Result<_>>()?;
    results.sort_by_key(|(key, _)| *key);

    let mut rows = Vec::with_capacity(results.len());
    let mut artifacts = Vec::new();
    for (i, (_, (row, artifact))) in results.into_iter().enumerate() {
        if i == 0 {
            if let Some(bytes) = artifact {
                let suffix = match config.task {
                    Task::Setcover => "permutation.json",
                    Task::Heavyhitters => "reports.csv",
                    _ => "artifact.txt",
                };
                artifacts.push((suffix.to_string(), bytes));
            }
        }
        rows.push(row);
    }
    let csv = crate::config::rows_to_csv(&rows)?;
    Ok(RunOutput { rows, csv, artifacts, audit: None })
}

fn run_single(
    config: &ExperimentConfig,
    instance: &Instance,
    seed: u64,
    trial: usize,
    rng: &mut RandomSource,
) -> Result<(MetricsRow, Option<Vec<u8>>)> {
    let p = config.params;
    let mut params = PrivacyParams::new(p.epsilon, p.beta, p.eta)?;
    if let Some(eps0) = p.epsilon0 {
        params = params.with_epsilon0(eps0)?;
    }
    let base = MetricsRow {
        task: config.task.name().to_string(),
        seed,
        trial,
        epsilon: p.epsilon,
        eta: p.eta,
        beta: p.beta,
        n: 0,
        m: 0,
        k: 0,
        utility: f64::NAN,
        opt: None,
        gap: None,
        runtime_ms: None,
    };
    match (config.task, instance) {
        (Task::SubmodCardinality, Instance::Submodular { dataset, matroid }) => {
            let m = matroid.ground_size();
            let k = match matroid {
                Matroid::Uniform { k, .. } => *k,
                _ => {
                    return Err(Error::InvalidParameter(
                        "submod-cardinality needs a cardinality constraint".into(),
                    ))
                }
            };
            let chosen = dp_submod_greedy_cardinality(dataset, m, k, &params, rng)?;
            let utility = objective_value(dataset, chosen);
            let (opt, gap) = if m <= 20 {
                let (_, opt) = oracles::best_k_subset(dataset, m, k);
                let target = (1.0 - (-1.0f64).exp() - p.eta) * opt;
                (Some(opt), Some(target - utility))
            } else {
                (None, None)
            };
            Ok((
                MetricsRow { n: dataset.len(), m, k, utility, opt, gap, ..base },
                None,
            ))
        }
        (Task::SubmodMatroid, Instance::Submodular { dataset, matroid }) => {
            let m = matroid.ground_size();
            let chosen = dp_submod_matroid(dataset, matroid, &params, Some(p.samples), rng)?;
            if !matroid.is_independent(chosen) {
                return Err(Error::ContractViolation(format!(
                    "matroid pipeline emitted dependent set {chosen:?}"
                )));
            }
            let utility = objective_value(dataset, chosen);
            let (opt, gap) = if m <= 20 {
                let (_, opt) = oracles::best_independent_set(dataset, matroid);
                let target = (1.0 - (-1.0f64).exp() - p.eta) * opt;
                (Some(opt), Some(target - utility))
            } else {
                (None, None)
            };
            Ok((
                MetricsRow { n: dataset.len(), m, k: matroid.rank(), utility, opt, gap, ..base },
                None,
            ))
        }
        (Task::Setcover, Instance::Setcover { system, dataset, planted_opt }) => {
            let mut solver_config = GreedyScalingConfig::default();
            if let Some(factor) = p.threshold_factor {
                solver_config.threshold_factor = factor;
            }
            let pi = dp_greedy_scaling(system, dataset, p.epsilon, &solver_config, rng)?;
            let cost = cost_set_cov(&pi, system, dataset)? as f64;
            let opt = planted_opt.map(|q| q as f64).or_else(|| {
                (system.m <= 14)
                    .then(|| oracles::min_cover_size(system, dataset, system.m))
                    .flatten()
                    .map(|q| q as f64)
            });
            let gap = opt.map(|o| cost - o);
            let artifact = serde_json::to_vec_pretty(&pi).map_err(Error::from)?;
            Ok((
                MetricsRow {
                    n: dataset.len(),
                    m: system.m,
                    k: opt.unwrap_or(0.0) as usize,
                    utility: cost,
                    opt,
                    gap,
                    ..base
                },
                Some(artifact),
            ))
        }
        (Task::Clustering, Instance::Clustering(inst)) => {
            let centers = clustering::dp_cluster(inst, &params, rng)?;
            let utility = clustering::cost(inst, &centers);
            let m = inst.metric.size();
            let feasible = binomial(m, inst.k) <= 2_000_000;
            let (opt, gap) = if feasible {
                let (_, opt) = oracles::best_clustering(inst);
                (Some(opt), Some(utility - opt))
            } else {
                (None, None)
            };
            Ok((
                MetricsRow { n: inst.dataset.len(), m, k: inst.k, utility, opt, gap, ..base },
                None,
            ))
        }
        (Task::Heavyhitters, Instance::Hh { stream, k }) => {
            let log = shifting_hh(stream, *k, p.epsilon, p.beta, rng)?;
            let target =
                tau_star(*k, stream.steps(), stream.alphabet(), p.beta, p.epsilon, 1000.0);
            let counts = stream.count_table();
            let mut violations = 0usize;
            for t in 0..stream.steps() {
                for y in 0..stream.alphabet() as u32 {
                    let w = counts[t][y as usize] as f64;
                    let reported = log.contains(t, y);
                    if reported && w <= target {
                        violations += 1;
                    }
                    if w >= 2.0 * target && !reported {
                        violations += 1;
                    }
                }
            }
            let mut buf = Vec::new();
            log.to_csv(&mut buf)?;
            Ok((
                MetricsRow {
                    n: stream.users(),
                    m: stream.alphabet(),
                    k: *k,
                    utility: if violations == 0 { 1.0 } else { 0.0 },
                    opt: None,
                    gap: Some(violations as f64),
                    ..base
                },
                Some(buf),
            ))
        }
        _ => Err(Error::InvalidParameter(format!(
            "instance does not match task {}",
            config.task.name()
        ))),
    }
}

fn binomial(m: usize, k: usize) -> u64 {
    let k = k.min(m - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((m - i) as u64) / (i as u64 + 1);
    }
    acc
}

/// The built-in exact audit battery: add-DP of both engines, two-sided DP
/// of the subsampled greedy, and the no-subsampling counterexample.
#[derive(Debug, Serialize)]
pub struct AuditBattery {
    pub repeated_em_add: AuditReport,
    pub subsampled_em_two_sided: AuditReport,
    pub repeated_at_add: AuditReport,
    pub counterexample: CounterexampleReport,
    pub pass: bool,
}

/// Fixed four-function coverage domain over a 3-item universe used by the
/// exact audits.
pub fn audit_domain() -> Vec<UserFn> {
    vec![
        UserFn::Coverage { links: ItemSet::from_items([0]) },
        UserFn::Coverage { links: ItemSet::from_items([1]) },
        UserFn::Coverage { links: ItemSet::from_items([0, 1]) },
        UserFn::Coverage { links: ItemSet::from_items([2]) },
    ]
}

/// Row domain for the threshold-monitor audit: all streams of one user over
/// two steps and a binary alphabet.
pub fn monitor_domain() -> Vec<Vec<u32>> {
    vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
}

pub fn run_audit_battery(two_sided_epsilon: f64) -> Result<AuditBattery> {
    let ln2 = std::f64::consts::LN_2;
    let domain = audit_domain();
    let oracle = CardinalityGreedyOracle { m: 3, k: 2 };

    let repeated_em_add = verify_dp(
        |d: &Dataset<UserFn>| exact_em_distribution(&oracle, d, ln2, 1.0, DEFAULT_SUPPORT_CAP),
        &domain,
        3,
        ln2,
        DpMode::Add,
    )?;

    let p = rate_for_target(two_sided_epsilon)?;
    let subsampled_em_two_sided = verify_dp(
        |d: &Dataset<UserFn>| {
            exact_subsampled_distribution(
                |ds| exact_em_distribution(&oracle, ds, ln2, 1.0, DEFAULT_SUPPORT_CAP),
                d,
                p,
                DEFAULT_SUPPORT_CAP,
            )
        },
        &domain,
        3,
        two_sided_epsilon,
        DpMode::TwoSided,
    )?;

    let monitor = MonitorOracle { t_len: 2, alphabet: 2, k: 1, tau: 1.4 };
    let repeated_at_add = verify_dp(
        |d: &Dataset<Vec<u32>>| {
            exact_at_distribution(&monitor, d, ln2, 1.0, DEFAULT_SUPPORT_CAP)
        },
        &monitor_domain(),
        2,
        ln2,
        DpMode::Add,
    )?;

    let counterexample = appendix_c_counterexample(2, 1.0, 1.5, 10_000)?;

    let pass = repeated_em_add.pass
        && subsampled_em_two_sided.pass
        && repeated_at_add.pass
        && counterexample.exceeds_strictly;
    Ok(AuditBattery {
        repeated_em_add,
        subsampled_em_two_sided,
        repeated_at_add,
        counterexample,
        pass,
    })
}
