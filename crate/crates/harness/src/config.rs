//! Experiment configuration and the metrics row schema.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use privsub_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SubmodCardinality,
    SubmodMatroid,
    Setcover,
    Clustering,
    Heavyhitters,
    Audit,
}

impl Task {
    pub fn parse(name: &str) -> Result<Task> {
        match name {
            "submod-cardinality" => Ok(Task::SubmodCardinality),
            "submod-matroid" => Ok(Task::SubmodMatroid),
            "setcover" => Ok(Task::Setcover),
            "clustering" => Ok(Task::Clustering),
            "heavyhitters" => Ok(Task::Heavyhitters),
            "audit" => Ok(Task::Audit),
            other => Err(Error::InvalidParameter(format!("unknown task {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Task::SubmodCardinality => "submod-cardinality",
            Task::SubmodMatroid => "submod-matroid",
            Task::Setcover => "setcover",
            Task::Clustering => "clustering",
            Task::Heavyhitters => "heavyhitters",
            Task::Audit => "audit",
        }
    }
}

/// Privacy and accuracy knobs, deserialized from the config file.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ParamSpec {
    pub epsilon: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// One-sided budget override; defaults to ln 2.
    #[serde(default)]
    pub epsilon0: Option<f64>,
    /// Multilinear draws for the matroid pipeline (desk-scale default 200;
    /// the analysis-suggested count is far larger and configurable here).
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Greedy-scaling threshold factor override (pseudocode value 1000).
    #[serde(default)]
    pub threshold_factor: Option<f64>,
}

fn default_beta() -> f64 {
    0.1
}

fn default_eta() -> f64 {
    0.2
}

fn default_samples() -> usize {
    200
}

/// Instance source: either a file or a named generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    RandomCoverage {
        m: usize,
        n: usize,
        links: usize,
        constraint: privsub_core::submodular::ConstraintSpec,
        #[serde(default)]
        instance_seed: u64,
    },
    PlantedSetcover {
        q: usize,
        n: usize,
        m: usize,
        #[serde(default)]
        instance_seed: u64,
    },
    PlantedClusters {
        k: usize,
        m: usize,
        n: usize,
        q: u8,
        #[serde(default)]
        instance_seed: u64,
    },
    PlantedHhStream {
        k: usize,
        t: usize,
        alphabet: usize,
        /// Population override; defaults to the smallest size making the
        /// planted bucket a `2 tau*` heavy hitter.
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        instance_seed: u64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub instance: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    pub params: ParamSpec,
    pub seeds: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Record wall-clock runtimes in the CSV. Off by default so that equal
    /// configs produce byte-identical output files.
    #[serde(default)]
    pub record_runtime: bool,
}

fn default_trials() -> usize {
    1
}

impl ExperimentConfig {
    pub fn parse(json: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("seeds must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.task != Task::Audit && self.instance.is_none() && self.generator.is_none() {
            return Err(Error::InvalidParameter(
                "either an instance path or a generator spec is required".into(),
            ));
        }
        Ok(())
    }
}

/// One result row. The schema is fixed: a header line followed by one row
/// per (seed, trial), every parameter included so rows stand alone.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsRow {
    pub task: String,
    pub seed: u64,
    pub trial: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub beta: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub utility: f64,
    /// Brute-force optimum when the instance size permits.
    pub opt: Option<f64>,
    /// Task-specific shortfall against the optimum-based target; see the
    /// README for the per-task definition.
    pub gap: Option<f64>,
    pub runtime_ms: Option<f64>,
}

/// Serialize rows as CSV with a stable header.
pub fn rows_to_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_with_defaults() {
        let json = r#"{
            "task": "setcover",
            "generator": {"kind": "planted-setcover", "q": 3, "n": 100, "m": 10},
            "params": {"epsilon": 1.0},
            "seeds": [1, 2]
        }"#;
        let config = ExperimentConfig::parse(json).unwrap();
        assert_eq!(config.task, Task::Setcover);
        assert_eq!(config.trials, 1);
        assert_eq!(config.params.beta, 0.1);
        assert!(!config.record_runtime);
    }

    #[test]
    fn config_requires_instance_or_generator() {
        let json = r#"{
            "task": "setcover",
            "params": {"epsilon": 1.0},
            "seeds": [1]
        }"#;
        assert!(ExperimentConfig::parse(json).is_err());
    }

    #[test]
    fn csv_has_stable_header() {
        let rows = vec![MetricsRow {
            task: "setcover".into(),
            seed: 1,
            trial: 0,
            epsilon: 1.0,
            eta: 0.2,
            beta: 0.1,
            n: 10,
            m: 3,
            k: 3,
            utility: 3.0,
            opt: Some(3.0),
            gap: Some(0.0),
            runtime_ms: None,
        }];
        let csv = rows_to_csv(&rows).unwrap();
        assert!(csv.starts_with(
            "task,seed,trial,epsilon,eta,beta,n,m,k,utility,opt,gap,runtime_ms\n"
        ));
    }
}
