//! Monte Carlo experiments, success predicates, aggregation and closed-form
//! channel oracles.

pub mod experiment;
pub mod oracle;
pub mod predicate;
pub mod stat_test;
pub mod stats;
pub mod topospec;

pub use experiment::{read_records, Experiment, ExperimentConfig, ExperimentError, SweepConfig};
pub use oracle::{enumerate_channel, p_exactly_one, p_noise, p_silence, Probability};
pub use predicate::{Predicate, Scope};
pub use stat_test::{channel_stat_test, ChannelEvent, Observer, Select, StatTestError, StatTestOutcome, StatTestRun};
pub use stats::{ExperimentStats, SlotMetric, StatsAccumulator, StatsContext};
pub use topospec::{SpecError, TopologySpec};
