//! Counting at a single designated node `w`. Only `w` produces an estimate;
//! its neighbors follow its broadcasts and everyone else stays idle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{pow2, reaches, Protocol, ProtocolParams, Status};
use crate::sim::message::{Feedback, Message, MessageKind, SlotAction};
use crate::sim::rng::{coin_pow2, NodeRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterRole {
    Designated,
    Neighbor,
    Bystander,
}

fn initial_status(role: CenterRole) -> Status {
    match role {
        CenterRole::Bystander => Status::Done(None),
        _ => Status::Running,
    }
}

fn stop_with(value: u64) -> SlotAction {
    SlotAction::Broadcast(Message::with_payload(MessageKind::Stop, value))
}

fn beacon_or_idle(rng: &mut NodeRng, exponent: u32) -> SlotAction {
    if coin_pow2(rng, exponent) {
        SlotAction::broadcast(MessageKind::Beacon)
    } else {
        SlotAction::Idle
    }
}

/// Doubly exponential search for an upper bound on `lg n_w`. `w` finishes
/// with `Done(Some(2^(i+1)))`; neighbors learn the same value from the
/// payload of `w`'s stop message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstUpperCenter {
    role: CenterRole,
    iteration: u32,
    second_slot: bool,
    first: Option<Feedback>,
    learned: Option<u64>,
    status: Status,
}

impl EstUpperCenter {
    pub fn new(role: CenterRole) -> Self {
        EstUpperCenter {
            role,
            iteration: 1,
            second_slot: false,
            first: None,
            learned: None,
            status: initial_status(role),
        }
    }

    pub fn role(&self) -> CenterRole {
        self.role
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    /// Upper estimate of `lg n_w`, known to `w` and to its neighbors.
    pub fn lg_estimate(&self) -> Option<u32> {
        self.status
            .estimate()
            .or(self.learned)
            .map(|v| v.min(u32::MAX as u64) as u32)
    }

    fn accepts(&self) -> bool {
        matches!(self.first, Some(Feedback::Silence | Feedback::Received(_)))
    }
}

impl Protocol for EstUpperCenter {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        let exponent = 1u32.checked_shl(self.iteration).unwrap_or(u32::MAX);
        match (self.role, self.second_slot) {
            (CenterRole::Designated, false) => SlotAction::Listen,
            (CenterRole::Designated, true) if self.accepts() => stop_with(pow2(self.iteration + 1)),
            (CenterRole::Neighbor, false) => beacon_or_idle(rng, exponent),
            (CenterRole::Neighbor, true) => SlotAction::Listen,
            _ => SlotAction::Idle,
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        if !self.second_slot {
            self.first = feedback;
            self.second_slot = true;
            return;
        }
        match self.role {
            CenterRole::Designated if self.accepts() => {
                self.status = Status::Done(Some(pow2(self.iteration + 1)));
            }
            CenterRole::Neighbor => {
                if let Some(msg) = feedback.and_then(|f| f.received()).filter(|m| m.is(MessageKind::Stop)) {
                    self.learned = msg.payload;
                    self.status = Status::Done(None);
                }
            }
            _ => {}
        }
        self.iteration += 1;
        self.second_slot = false;
        self.first = None;
    }

    fn status(&self) -> Status {
        self.status
    }
}

/// Guess and verify at `w` without collision detection. Iteration `i` has
/// `l` listening slots at `w` followed by one slot in which `w` may stop
/// everyone with `2^(i+2)`. `l` is fixed or grows as `a*i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountCenterNoCd {
    role: CenterRole,
    fixed_len: Option<u32>,
    multiplier: u32,
    threshold: f64,
    iteration: u32,
    slot: u32,
    hits: u32,
    learned: Option<u64>,
    status: Status,
}

impl CountCenterNoCd {
    /// `l = center_l` in every iteration.
    pub fn constant(role: CenterRole, params: &ProtocolParams) -> Self {
        Self::build(role, Some(params.center_l), params)
    }

    /// `l = phase_multiplier * i` in iteration `i`.
    pub fn high(role: CenterRole, params: &ProtocolParams) -> Self {
        Self::build(role, None, params)
    }

    fn build(role: CenterRole, fixed_len: Option<u32>, params: &ProtocolParams) -> Self {
        CountCenterNoCd {
            role,
            fixed_len,
            multiplier: params.phase_multiplier,
            threshold: params.informed_threshold,
            iteration: 1,
            slot: 0,
            hits: 0,
            learned: None,
            status: initial_status(role),
        }
    }

    pub fn role(&self) -> CenterRole {
        self.role
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    /// Listening slots in the current iteration.
    pub fn listen_len(&self) -> u32 {
        self.fixed_len
            .unwrap_or_else(|| self.multiplier.saturating_mul(self.iteration))
    }

    /// Estimate carried by `w`'s stop message, as seen by a neighbor.
    pub fn learned(&self) -> Option<u64> {
        self.learned
    }

    fn accepts(&self) -> bool {
        reaches(self.hits, self.listen_len(), self.threshold)
    }
}

impl Protocol for CountCenterNoCd {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        let last = self.slot == self.listen_len();
        match (self.role, last) {
            (CenterRole::Designated, false) => SlotAction::Listen,
            (CenterRole::Designated, true) if self.accepts() => stop_with(pow2(self.iteration + 2)),
            (CenterRole::Neighbor, false) => beacon_or_idle(rng, self.iteration),
            (CenterRole::Neighbor, true) => SlotAction::Listen,
            _ => SlotAction::Idle,
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        if self.slot < self.listen_len() {
            if feedback.is_some_and(|f| f.got(MessageKind::Beacon)) {
                self.hits += 1;
            }
            self.slot += 1;
            return;
        }
        match self.role {
            CenterRole::Designated if self.accepts() => {
                self.status = Status::Done(Some(pow2(self.iteration + 2)));
            }
            CenterRole::Neighbor => {
                if let Some(msg) = feedback.and_then(|f| f.received()).filter(|m| m.is(MessageKind::Stop)) {
                    self.learned = msg.payload;
                    self.status = Status::Done(None);
                }
            }
            _ => {}
        }
        self.iteration += 1;
        self.slot = 0;
        self.hits = 0;
    }

    fn status(&self) -> Status {
        self.status
    }
}

/// Binary search on `lg n_w` coordinated by `w`, after [`EstUpperCenter`].
/// Two slots per iteration: neighbors beacon, then `w` announces the move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountCenterCdConst {
    role: CenterRole,
    upper: EstUpperCenter,
    bounds: Option<(u32, u32)>,
    second_slot: bool,
    first: Option<Feedback>,
    learned: Option<u64>,
    status: Status,
}

impl CountCenterCdConst {
    pub fn new(role: CenterRole) -> Self {
        CountCenterCdConst {
            role,
            upper: EstUpperCenter::new(role),
            bounds: None,
            second_slot: false,
            first: None,
            learned: None,
            status: initial_status(role),
        }
    }

    pub fn role(&self) -> CenterRole {
        self.role
    }

    /// Current `(a, b)` once the search has started.
    pub fn bounds(&self) -> Option<(u32, u32)> {
        self.bounds
    }

    pub fn at_iteration_start(&self) -> bool {
        self.bounds.is_some() && !self.second_slot
    }

    pub fn learned(&self) -> Option<u64> {
        self.learned
    }

    fn designated_move(&self, mid: u32) -> SlotAction {
        match self.first {
            Some(Feedback::Silence) => SlotAction::broadcast(MessageKind::OverEst),
            Some(Feedback::Noise) => SlotAction::broadcast(MessageKind::UnderEst),
            _ => stop_with(pow2(mid + 1)),
        }
    }
}

impl Protocol for CountCenterCdConst {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        let Some((lo, hi)) = self.bounds else {
            return self.upper.act(rng);
        };
        let mid = (lo + hi) / 2;
        match (self.role, self.second_slot) {
            (CenterRole::Designated, false) => SlotAction::Listen,
            (CenterRole::Designated, true) => self.designated_move(mid),
            (CenterRole::Neighbor, false) => beacon_or_idle(rng, mid),
            (CenterRole::Neighbor, true) => SlotAction::Listen,
            _ => SlotAction::Idle,
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        let Some((lo, hi)) = self.bounds else {
            self.upper.absorb(feedback);
            if let Some(v) = self.upper.lg_estimate() {
                self.bounds = Some((1, v));
            }
            return;
        };
        if !self.second_slot {
            self.first = feedback;
            self.second_slot = true;
            return;
        }
        self.second_slot = false;
        let mid = (lo + hi) / 2;
        // Both sides read the move from w's broadcast: w from its own first
        // slot, a neighbor from the message it hears now.
        let heard = match self.role {
            CenterRole::Designated => self.designated_move(mid).message(),
            _ => feedback.and_then(|f| f.received()),
        };
        match heard.map(|m| (m.kind, m.payload)) {
            Some((MessageKind::OverEst, _)) => self.bounds = Some((lo, mid - 1)),
            Some((MessageKind::UnderEst, _)) => self.bounds = Some((mid + 1, hi)),
            Some((MessageKind::Stop, payload)) => {
                self.status = if self.role == CenterRole::Designated {
                    Status::Done(payload)
                } else {
                    self.learned = payload;
                    Status::Done(None)
                };
                return;
            }
            _ => {}
        }
        self.first = None;
        if let Some((a, b)) = self.bounds {
            if a > b {
                self.status = Status::Aborted;
            }
        }
    }

    fn status(&self) -> Status {
        self.status
    }
}

/// Random walk over `n_hat_w = 2^e` coordinated by `w`, after
/// [`EstUpperCenter`]. `w` keeps the visit histogram and outputs four times
/// the most visited value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountCenterCdHigh {
    role: CenterRole,
    walk_multiplier: u32,
    upper: EstUpperCenter,
    cap: u32,
    exponent: Option<u32>,
    remaining: u64,
    second_slot: bool,
    first: Option<Feedback>,
    visits: BTreeMap<u32, u64>,
    status: Status,
}

impl CountCenterCdHigh {
    pub fn new(role: CenterRole, params: &ProtocolParams) -> Self {
        CountCenterCdHigh {
            role,
            walk_multiplier: params.walk_multiplier,
            upper: EstUpperCenter::new(role),
            cap: 0,
            exponent: None,
            remaining: 0,
            second_slot: false,
            first: None,
            visits: BTreeMap::new(),
            status: initial_status(role),
        }
    }

    pub fn role(&self) -> CenterRole {
        self.role
    }

    /// `lg n_hat_w` during the walk.
    pub fn exponent(&self) -> Option<u32> {
        self.exponent
    }

    pub fn cap(&self) -> Option<u32> {
        self.exponent.map(|_| self.cap)
    }

    /// Visit counts keyed by `lg n_hat_w`; empty except at `w`.
    pub fn visits(&self) -> &BTreeMap<u32, u64> {
        &self.visits
    }

    pub fn at_iteration_start(&self) -> bool {
        self.exponent.is_some() && !self.second_slot
    }

    fn designated_move(&self) -> MessageKind {
        match self.first {
            Some(Feedback::Silence) => MessageKind::OverEst,
            Some(Feedback::Noise) => MessageKind::UnderEst,
            _ => MessageKind::Continue,
        }
    }

    fn mode(&self) -> u32 {
        let mut best = (0, 0);
        for (&e, &count) in &self.visits {
            if count > best.1 {
                best = (e, count);
            }
        }
        best.0
    }
}

impl Protocol for CountCenterCdHigh {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        let Some(e) = self.exponent else {
            return self.upper.act(rng);
        };
        match (self.role, self.second_slot) {
            (CenterRole::Designated, false) => SlotAction::Listen,
            (CenterRole::Designated, true) => SlotAction::broadcast(self.designated_move()),
            (CenterRole::Neighbor, false) => beacon_or_idle(rng, e),
            (CenterRole::Neighbor, true) => SlotAction::Listen,
            _ => SlotAction::Idle,
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        let Some(e) = self.exponent else {
            self.upper.absorb(feedback);
            if let Some(v) = self.upper.lg_estimate() {
                self.cap = v;
                self.exponent = Some(v);
                self.remaining = self.walk_multiplier as u64 * v as u64;
            }
            return;
        };
        if !self.second_slot {
            self.first = feedback;
            self.second_slot = true;
            return;
        }
        self.second_slot = false;
        let heard = match self.role {
            CenterRole::Designated => {
                *self.visits.entry(e).or_default() += 1;
                Some(self.designated_move())
            }
            _ => feedback.and_then(|f| f.received()).map(|m| m.kind),
        };
        self.exponent = Some(match heard {
            Some(MessageKind::OverEst) => e.saturating_sub(2),
            Some(MessageKind::UnderEst) => (e + 2).min(self.cap),
            _ => e,
        });
        self.first = None;
        self.remaining -= 1;
        if self.remaining == 0 {
            self.status = match self.role {
                CenterRole::Designated => Status::Done(Some(pow2(self.mode() + 2))),
                _ => Status::Done(None),
            };
        }
    }

    fn status(&self) -> Status {
        self.status
    }
}
