//! Binds simulated channel behavior to the closed-form oracles: count how
//! often an event occurs in selected slots and compare against the expected
//! probability with a binomial z-test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proto::Protocol;
use crate::sim::{derive_seed, SimConfig, Simulation};
use crate::topology::{NodeId, Topology};

/// Acceptance band in standard deviations.
pub const Z_BAND: f64 = 4.0;
pub const MIN_SAMPLES: u64 = 100;

/// Decision of a slot filter, made on node states before the slot runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Select {
    Skip,
    Sample,
    /// Nothing further in this trial can match.
    Stop,
}

/// Whose view of the channel is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observer {
    /// All broadcasters in the network; meaningful on a clique.
    Global,
    /// Broadcasters among the neighbors of one node.
    Node(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelEvent {
    Silence,
    ExactlyOne,
    Collision,
}

impl ChannelEvent {
    pub fn matches(self, broadcasters: usize) -> bool {
        match self {
            ChannelEvent::Silence => broadcasters == 0,
            ChannelEvent::ExactlyOne => broadcasters == 1,
            ChannelEvent::Collision => broadcasters >= 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatTestOutcome {
    pub samples: u64,
    pub hits: u64,
    pub observed: f64,
    pub expected: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatTestError {
    #[error("only {0} slots matched the filter (need {MIN_SAMPLES})")]
    InsufficientSamples(u64),
    #[error("expected probability must lie in (0, 1), got {0}")]
    InvalidExpected(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct StatTestRun {
    pub collision_detection: bool,
    pub master_seed: u64,
    pub trials: u64,
    /// Per-trial slot cap.
    pub max_slots: u64,
    pub observer: Observer,
    pub event: ChannelEvent,
    pub expected: f64,
}

/// Run `trials` simulations of `make_nodes()` on `topology`; in every slot the
/// filter selects, record whether `event` happened for `observer`.
pub fn channel_stat_test<P, M, F>(
    topology: &Topology,
    make_nodes: M,
    mut filter: F,
    run: StatTestRun,
) -> Result<StatTestOutcome, StatTestError>
where
    P: Protocol,
    M: Fn() -> Vec<P>,
    F: FnMut(u64, &[P]) -> Select,
{
    if !(run.expected > 0.0 && run.expected < 1.0) {
        return Err(StatTestError::InvalidExpected(run.expected));
    }
    let mut samples = 0u64;
    let mut hits = 0u64;
    for trial in 0..run.trials {
        let config = SimConfig::new(run.collision_detection, derive_seed(run.master_seed, trial))
            .with_max_slots(run.max_slots);
        let mut sim = Simulation::new(topology, make_nodes(), config).expect("one node per vertex");
        while !sim.is_finished() && sim.slot() < run.max_slots {
            let select = filter(sim.slot(), sim.nodes());
            if select == Select::Stop {
                break;
            }
            let view = sim.step();
            if select == Select::Sample {
                let count = match run.observer {
                    Observer::Global => view.broadcaster_count(),
                    Observer::Node(u) => topology
                        .neighbors(u)
                        .iter()
                        .filter(|&&v| view.is_broadcasting(v))
                        .count(),
                };
                samples += 1;
                hits += run.event.matches(count) as u64;
            }
        }
    }
    evaluate(hits, samples, run.expected)
}

/// Binomial z-test of `hits` out of `samples` against `expected`.
pub fn evaluate(hits: u64, samples: u64, expected: f64) -> Result<StatTestOutcome, StatTestError> {
    if samples < MIN_SAMPLES {
        return Err(StatTestError::InsufficientSamples(samples));
    }
    let n = samples as f64;
    let sigma = (n * expected * (1.0 - expected)).sqrt();
    let z = (hits as f64 - n * expected) / sigma;
    Ok(StatTestOutcome {
        samples,
        hits,
        observed: hits as f64 / n,
        expected,
        z,
        pass: z.abs() <= Z_BAND,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_edges() {
        let inside = evaluate(540, 1000, 0.5).unwrap();
        assert!(inside.pass);
        let outside = evaluate(600, 1000, 0.5).unwrap();
        assert!(!outside.pass && outside.z > 4.0);
        assert_eq!(evaluate(5, 99, 0.5), Err(StatTestError::InsufficientSamples(99)));
    }

    #[test]
    fn events() {
        assert!(ChannelEvent::Silence.matches(0));
        assert!(ChannelEvent::ExactlyOne.matches(1));
        assert!(ChannelEvent::Collision.matches(2) && ChannelEvent::Collision.matches(9));
        assert!(!ChannelEvent::Collision.matches(1));
    }
}
