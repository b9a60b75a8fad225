use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::channel::resolve_count;
use super::message::{Feedback, Message, SlotAction};
use super::rng::{node_rng, NodeRng};
use super::trace::{Trace, TraceSlot};
use crate::proto::{Protocol, Status};
use crate::topology::{NodeId, Topology};

pub const DEFAULT_MAX_SLOTS: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("topology has {expected} nodes but {got} protocol instances were supplied")]
    NodeCountMismatch { expected: usize, got: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub collision_detection: bool,
    pub seed: u64,
    pub max_slots: u64,
    /// Keep a full per-slot trace. Off for Monte Carlo sweeps.
    pub retain_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            collision_detection: false,
            seed: 0,
            max_slots: DEFAULT_MAX_SLOTS,
            retain_trace: false,
        }
    }
}

impl SimConfig {
    pub fn new(collision_detection: bool, seed: u64) -> Self {
        SimConfig { collision_detection, seed, ..Default::default() }
    }

    pub fn with_max_slots(mut self, max_slots: u64) -> Self {
        self.max_slots = max_slots;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.retain_trace = true;
        self
    }
}

/// Outcome of one node within a trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeOutcome {
    pub node: NodeId,
    /// Neighbor count of the node in the simulated topology.
    pub degree: usize,
    pub status: Status,
    pub estimate: Option<u64>,
    /// Slots elapsed when an estimate first became available.
    pub estimate_slot: Option<u64>,
    /// Slots elapsed when the node stopped running.
    pub termination_slot: Option<u64>,
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub slots: u64,
    /// Some node was still running when `max_slots` was reached.
    pub cutoff: bool,
    pub nodes: Vec<NodeOutcome>,
}

/// Borrowed view of the slot just executed.
#[derive(Debug, Clone, Copy)]
pub struct SlotView<'a> {
    pub slot: u64,
    /// `None` for nodes that were no longer running.
    pub actions: &'a [Option<SlotAction>],
    /// `Some` exactly for the nodes that listened.
    pub feedback: &'a [Option<Feedback>],
}

impl SlotView<'_> {
    pub fn broadcaster_count(&self) -> usize {
        self.actions
            .iter()
            .filter(|a| matches!(a, Some(SlotAction::Broadcast(_))))
            .count()
    }

    pub fn is_broadcasting(&self, u: NodeId) -> bool {
        matches!(self.actions[u as usize], Some(SlotAction::Broadcast(_)))
    }
}

/// A single synchronous simulation. Nodes are polled in ascending id order;
/// every listener's feedback depends only on the broadcasters among its own
/// neighbors.
pub struct Simulation<'t, P> {
    topology: &'t Topology,
    complete: bool,
    nodes: Vec<P>,
    rngs: Vec<NodeRng>,
    config: SimConfig,
    slot: u64,
    statuses: Vec<Status>,
    estimate_slot: Vec<Option<u64>>,
    termination_slot: Vec<Option<u64>>,
    running: usize,
    actions: Vec<Option<SlotAction>>,
    feedback: Vec<Option<Feedback>>,
    broadcasters: Vec<NodeId>,
    hit_count: Vec<u8>,
    hit_msg: Vec<Option<Message>>,
    trace: Option<Trace>,
}

impl<'t, P: Protocol> Simulation<'t, P> {
    /// Node `u` draws from `node_rng(config.seed, u)`.
    pub fn new(topology: &'t Topology, nodes: Vec<P>, config: SimConfig) -> Result<Self, SimError> {
        let rngs = topology.nodes().map(|u| node_rng(config.seed, u)).collect();
        Self::with_rngs(topology, nodes, rngs, config)
    }

    pub fn with_rngs(
        topology: &'t Topology,
        nodes: Vec<P>,
        rngs: Vec<NodeRng>,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        let n = topology.node_count();
        if nodes.len() != n || rngs.len() != n {
            return Err(SimError::NodeCountMismatch { expected: n, got: nodes.len().min(rngs.len()) });
        }
        if config.max_slots == 0 {
            return Err(SimError::InvalidConfig("max_slots must be >= 1".into()));
        }
        let mut sim = Simulation {
            topology,
            complete: topology.is_complete(),
            nodes,
            rngs,
            config,
            slot: 0,
            statuses: vec![Status::Running; n],
            estimate_slot: vec![None; n],
            termination_slot: vec![None; n],
            running: n,
            actions: vec![None; n],
            feedback: vec![None; n],
            broadcasters: Vec::new(),
            hit_count: vec![0; n],
            hit_msg: vec![None; n],
            trace: config.retain_trace.then(Trace::default),
        };
        sim.refresh_statuses();
        Ok(sim)
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn nodes(&self) -> &[P] {
        &self.nodes
    }

    pub fn topology(&self) -> &Topology {
        self.topology
    }

    pub fn is_finished(&self) -> bool {
        self.running == 0
    }

    pub fn cutoff_reached(&self) -> bool {
        self.running > 0 && self.slot >= self.config.max_slots
    }

    /// Execute one slot. Calling this after every node has stopped executes
    /// an empty slot.
    pub fn step(&mut self) -> SlotView<'_> {
        self.broadcasters.clear();
        for (u, action) in self.actions.iter_mut().enumerate() {
            *action = if self.statuses[u].is_running() {
                let a = self.nodes[u].act(&mut self.rngs[u]);
                if let SlotAction::Broadcast(_) = a {
                    self.broadcasters.push(u as NodeId);
                }
                Some(a)
            } else {
                None
            };
        }

        self.resolve();

        for u in 0..self.nodes.len() {
            if self.actions[u].is_some() {
                self.nodes[u].absorb(self.feedback[u]);
            }
        }
        self.slot += 1;
        self.refresh_statuses();

        if let Some(trace) = self.trace.as_mut() {
            let actions = self
                .actions
                .iter()
                .enumerate()
                .filter_map(|(u, a)| a.map(|a| (u as NodeId, a)))
                .collect();
            let feedback = self
                .feedback
                .iter()
                .enumerate()
                .filter_map(|(u, f)| f.map(|f| (u as NodeId, f)))
                .collect();
            trace.slots.push(TraceSlot { slot: self.slot - 1, actions, feedback });
        }

        SlotView { slot: self.slot - 1, actions: &self.actions, feedback: &self.feedback }
    }

    fn resolve(&mut self) {
        let cd = self.config.collision_detection;
        if self.complete {
            let count = self.broadcasters.len().min(2) as u32;
            let msg = match self.broadcasters.as_slice() {
                [only] => self.actions[*only as usize].and_then(|a| a.message()),
                _ => None,
            };
            let heard = resolve_count(count, msg, cd);
            for (fb, action) in self.feedback.iter_mut().zip(&self.actions) {
                *fb = matches!(action, Some(SlotAction::Listen)).then_some(heard);
            }
            return;
        }

        for &b in &self.broadcasters {
            let msg = self.actions[b as usize].and_then(|a| a.message());
            for &v in self.topology.neighbors(b) {
                let c = &mut self.hit_count[v as usize];
                *c = c.saturating_add(1).min(2);
                self.hit_msg[v as usize] = msg;
            }
        }
        for (u, fb) in self.feedback.iter_mut().enumerate() {
            *fb = matches!(self.actions[u], Some(SlotAction::Listen))
                .then(|| resolve_count(self.hit_count[u] as u32, self.hit_msg[u], cd));
        }
        for &b in &self.broadcasters {
            for &v in self.topology.neighbors(b) {
                self.hit_count[v as usize] = 0;
                self.hit_msg[v as usize] = None;
            }
        }
    }

    fn refresh_statuses(&mut self) {
        for u in 0..self.nodes.len() {
            if self.estimate_slot[u].is_none() && self.nodes[u].estimate().is_some() {
                self.estimate_slot[u] = Some(self.slot);
            }
            if !self.statuses[u].is_running() {
                continue;
            }
            let status = self.nodes[u].status();
            if !status.is_running() {
                self.statuses[u] = status;
                self.termination_slot[u] = Some(self.slot);
                self.running -= 1;
            }
        }
    }

    /// Step until every node has stopped or `max_slots` is reached.
    pub fn run_to_end(&mut self) {
        while !self.is_finished() && self.slot < self.config.max_slots {
            self.step();
        }
    }

    pub fn record(&self) -> TrialRecord {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(u, p)| NodeOutcome {
                node: u as NodeId,
                degree: self.topology.degree(u as NodeId),
                status: self.statuses[u],
                estimate: p.estimate(),
                estimate_slot: self.estimate_slot[u],
                termination_slot: self.termination_slot[u],
            })
            .collect();
        TrialRecord {
            trial: 0,
            seed: self.config.seed,
            slots: self.slot,
            cutoff: self.cutoff_reached(),
            nodes,
        }
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.trace.take()
    }

    pub fn into_nodes(self) -> Vec<P> {
        self.nodes
    }
}

/// Run one simulation to completion (or cutoff).
pub fn run_simulation<P: Protocol>(
    topology: &Topology,
    nodes: Vec<P>,
    config: SimConfig,
) -> Result<(TrialRecord, Option<Trace>), SimError> {
    let mut sim = Simulation::new(topology, nodes, config)?;
    sim.run_to_end();
    let record = sim.record();
    Ok((record, sim.take_trace()))
}
