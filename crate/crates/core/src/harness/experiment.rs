use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::predicate::Predicate;
use super::stats::{ExperimentStats, SlotMetric, StatsAccumulator, StatsContext};
use super::topospec::{SpecError, TopologySpec};
use crate::proto::{AnyNode, ProtocolError, ProtocolKind, ProtocolParams};
use crate::sim::{derive_seed, SimConfig, Simulation, Trace, TrialRecord};
use crate::sim::engine::DEFAULT_MAX_SLOTS;
use crate::topology::{Topology, TopologyError};

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary.csv";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("record parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn one() -> u64 {
    1
}

fn default_max_slots() -> u64 {
    DEFAULT_MAX_SLOTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub topology: TopologySpec,
    #[serde(default = "one")]
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub cd: bool,
    #[serde(default)]
    pub params: ProtocolParams,
    #[serde(default = "default_max_slots")]
    pub max_slots: u64,
    /// Defaults to the protocol's own range predicate.
    #[serde(default)]
    pub predicate: Option<Predicate>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(protocol: ProtocolKind, topology: TopologySpec, trials: u64, master_seed: u64) -> Self {
        ExperimentConfig {
            protocol,
            topology,
            trials,
            master_seed,
            cd: protocol.requires_cd(),
            params: ProtocolParams::default(),
            max_slots: DEFAULT_MAX_SLOTS,
            predicate: None,
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

/// A grid of experiments. Each `[[run]]` table is a full config; runs
/// without an `out` directory write under `out/NN_protocol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub run: Vec<ExperimentConfig>,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        Ok(toml::from_str(text)?)
    }

    /// Output directory for run `idx`.
    pub fn run_dir(&self, idx: usize) -> Option<PathBuf> {
        let run = &self.run[idx];
        run.out
            .clone()
            .or_else(|| self.out.as_ref().map(|d| d.join(format!("{idx:02}_{}", run.protocol))))
    }
}

/// A validated experiment, ready to run trials.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    topology: Topology,
    predicate: Predicate,
    slot_metric: SlotMetric,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        if config.trials == 0 {
            return Err(ExperimentError::Config("trials must be >= 1".into()));
        }
        if config.max_slots == 0 {
            return Err(ExperimentError::Config("max_slots must be >= 1".into()));
        }
        let topology = config.topology.build()?;
        config.protocol.validate(&topology, &config.params, config.cd)?;
        let predicate = config.predicate.unwrap_or_else(|| Predicate::default_for(config.protocol));
        Ok(Experiment { slot_metric: SlotMetric::default_for(config.protocol), config, topology, predicate })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn predicate(&self) -> Predicate {
        self.predicate
    }

    pub fn with_slot_metric(mut self, metric: SlotMetric) -> Self {
        self.slot_metric = metric;
        self
    }

    pub fn trial_seed(&self, trial: u64) -> u64 {
        derive_seed(self.config.master_seed, trial)
    }

    pub fn sim_config(&self, trial: u64) -> SimConfig {
        SimConfig::new(self.config.cd, self.trial_seed(trial)).with_max_slots(self.config.max_slots)
    }

    pub fn nodes(&self) -> Vec<AnyNode> {
        self.config
            .protocol
            .instantiate(&self.topology, &self.config.params, self.config.cd)
            .expect("validated in Experiment::new")
    }

    fn simulate(&self, trial: u64, trace: bool) -> (TrialRecord, Option<Trace>) {
        let mut config = self.sim_config(trial);
        config.retain_trace = trace;
        let mut sim = Simulation::new(&self.topology, self.nodes(), config).expect("one node per vertex");
        sim.run_to_end();
        let mut record = sim.record();
        record.trial = trial;
        (record, sim.take_trace())
    }

    pub fn run_trial(&self, trial: u64) -> TrialRecord {
        self.simulate(trial, false).0
    }

    pub fn run_trial_traced(&self, trial: u64) -> (TrialRecord, Trace) {
        let (record, trace) = self.simulate(trial, true);
        (record, trace.expect("trace requested"))
    }

    /// Run every trial in parallel and map each record, preserving trial
    /// order in the output.
    pub fn map_trials<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(TrialRecord) -> T + Sync,
    {
        (0..self.config.trials).into_par_iter().map(|t| f(self.run_trial(t))).collect()
    }

    pub fn records(&self) -> Vec<TrialRecord> {
        self.map_trials(|r| r)
    }

    pub fn stats_context(&self) -> StatsContext<'_> {
        StatsContext {
            kind: self.config.protocol,
            topology: &self.topology,
            predicate: self.predicate,
            slot_metric: self.slot_metric,
        }
    }

    pub fn stats_from<'r>(&self, records: impl IntoIterator<Item = &'r TrialRecord>) -> ExperimentStats {
        let ctx = self.stats_context();
        let mut acc = StatsAccumulator::default();
        for r in records {
            acc.add(r, &ctx);
        }
        acc.finish(&ctx, self.config.topology.to_string())
    }

    /// Run all trials and aggregate without keeping the records.
    pub fn summarize(&self) -> ExperimentStats {
        let ctx = self.stats_context();
        let acc = (0..self.config.trials)
            .into_par_iter()
            .fold(StatsAccumulator::default, |mut acc, t| {
                acc.add(&self.run_trial(t), &ctx);
                acc
            })
            .reduce(StatsAccumulator::default, StatsAccumulator::merge);
        acc.finish(&ctx, self.config.topology.to_string())
    }

    /// Run all trials, streaming `trials.jsonl` in trial order, then write
    /// `summary.json` and `summary.csv`.
    pub fn run_to_dir(&self, dir: &Path) -> Result<ExperimentStats, ExperimentError> {
        const CHUNK: u64 = 256;
        fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(File::create(dir.join(TRIALS_FILE))?);
        let ctx = self.stats_context();
        let mut acc = StatsAccumulator::default();
        let mut start = 0;
        while start < self.config.trials {
            let end = (start + CHUNK).min(self.config.trials);
            let chunk: Vec<TrialRecord> = (start..end).into_par_iter().map(|t| self.run_trial(t)).collect();
            for record in &chunk {
                acc.add(record, &ctx);
                serde_json::to_writer(&mut out, record)?;
                out.write_all(b"\n")?;
            }
            start = end;
        }
        out.flush()?;
        let stats = acc.finish(&ctx, self.config.topology.to_string());
        write_summary(dir, &stats)?;
        Ok(stats)
    }
}

pub fn write_summary(dir: &Path, stats: &ExperimentStats) -> Result<(), ExperimentError> {
    fs::write(dir.join(SUMMARY_JSON), serde_json::to_string_pretty(stats)? + "\n")?;
    fs::write(dir.join(SUMMARY_CSV), stats.to_csv())?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>, ExperimentError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok(records)
}
