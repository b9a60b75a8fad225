//! Counting in multi-hop networks: every node estimates its own degree.

use super::{ceil_lg, pow2, reaches, Protocol, ProtocolError, ProtocolParams, Status};
use crate::sim::message::{Feedback, MessageKind, SlotAction};
use crate::sim::rng::{coin_half, coin_pow2, NodeRng};

/// The guess-and-verify part shared by [`CountAllNoCdA`] and
/// [`CountAllCdA`]: iteration `i` has `a*i` slots, each with a fresh role
/// coin.
#[derive(Debug, Clone, PartialEq)]
struct Guess {
    multiplier: u32,
    threshold: f64,
    iteration: u32,
    slot: u32,
    listened: bool,
    listens: u32,
    hits: u32,
    estimate: Option<u64>,
}

impl Guess {
    fn new(params: &ProtocolParams) -> Self {
        Guess {
            multiplier: params.phase_multiplier,
            threshold: params.allnodes_threshold,
            iteration: 1,
            slot: 0,
            listened: false,
            listens: 0,
            hits: 0,
            estimate: None,
        }
    }

    fn len(&self) -> u32 {
        self.multiplier.saturating_mul(self.iteration)
    }

    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        self.listened = !coin_half(rng);
        if self.listened {
            SlotAction::Listen
        } else if coin_pow2(rng, self.iteration) {
            SlotAction::broadcast(MessageKind::Beacon)
        } else {
            SlotAction::Idle
        }
    }

    /// Returns true once the last slot of the iteration has been absorbed.
    fn absorb(&mut self, feedback: Option<Feedback>) -> bool {
        if let Some(fb) = feedback {
            self.listens += 1;
            if fb.got(MessageKind::Beacon) {
                self.hits += 1;
            }
        }
        self.slot += 1;
        if self.slot < self.len() {
            return false;
        }
        if self.estimate.is_none() && reaches(self.hits, self.listens, self.threshold) {
            self.estimate = Some(pow2(self.iteration + 3));
        }
        true
    }

    fn next_iteration(&mut self) {
        self.iteration += 1;
        self.slot = 0;
        self.listens = 0;
        self.hits = 0;
    }
}

/// Guess and verify with per-slot role coins. The first iteration whose
/// beacon fraction reaches the threshold latches `2^(i+3)`; the node keeps
/// participating and stops only after iteration `lg N_delta` when that bound
/// is known.
#[derive(Debug, Clone, PartialEq)]
pub struct CountAllNoCdA {
    guess: Guess,
    last_iteration: Option<u32>,
    status: Status,
}

impl CountAllNoCdA {
    pub fn new(params: &ProtocolParams) -> Self {
        let last_iteration = params.known_n_delta.map(ceil_lg);
        CountAllNoCdA {
            guess: Guess::new(params),
            last_iteration,
            status: if last_iteration == Some(0) { Status::Done(None) } else { Status::Running },
        }
    }

    pub fn iteration(&self) -> u32 {
        self.guess.iteration
    }

    /// Whether the node listened in the slot it last acted in.
    pub fn listened(&self) -> bool {
        self.guess.listened
    }
}

impl Protocol for CountAllNoCdA {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        self.guess.act(rng)
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        if !self.guess.absorb(feedback) {
            return;
        }
        if self.last_iteration == Some(self.guess.iteration) {
            self.status = Status::Done(self.guess.estimate);
        } else {
            self.guess.next_iteration();
        }
    }

    fn status(&self) -> Status {
        self.status
    }

    fn estimate(&self) -> Option<u64> {
        self.guess.estimate
    }
}

/// [`CountAllNoCdA`] plus one control slot per iteration in which nodes still
/// lacking an estimate broadcast `Continue`. A node with an estimate stops as
/// soon as it hears silence there.
#[derive(Debug, Clone, PartialEq)]
pub struct CountAllCdA {
    guess: Guess,
    control: bool,
    last_iteration: Option<u32>,
    status: Status,
}

impl CountAllCdA {
    pub fn new(params: &ProtocolParams) -> Self {
        let last_iteration = params.known_n_delta.map(ceil_lg);
        CountAllCdA {
            guess: Guess::new(params),
            control: false,
            last_iteration,
            status: if last_iteration == Some(0) { Status::Done(None) } else { Status::Running },
        }
    }

    pub fn iteration(&self) -> u32 {
        self.guess.iteration
    }
}

impl Protocol for CountAllCdA {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        if !self.control {
            self.guess.act(rng)
        } else if self.guess.estimate.is_none() {
            SlotAction::broadcast(MessageKind::Continue)
        } else {
            SlotAction::Listen
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        if !self.control {
            self.control = self.guess.absorb(feedback);
            return;
        }
        self.control = false;
        if let Some(fb) = feedback {
            let keep_going = fb.got(MessageKind::Continue) || fb == Feedback::Noise;
            if !keep_going {
                self.status = Status::Done(self.guess.estimate);
                return;
            }
        }
        if self.last_iteration == Some(self.guess.iteration) {
            self.status = Status::Done(self.guess.estimate);
        } else {
            self.guess.next_iteration();
        }
    }

    fn status(&self) -> Status {
        self.status
    }

    fn estimate(&self) -> Option<u64> {
        self.guess.estimate
    }
}

/// Double counting. `L = c1 * lg N` iterations, each with one role coin and
/// `lg N` sub-iterations of `c2 * lg N` slots. A listener estimates its number
/// of broadcasting neighbors per iteration; the final estimate is the sum of
/// those divided by `L/4`, rounded up.
#[derive(Debug, Clone, PartialEq)]
pub struct CountAllNoCdB {
    lg_n: u32,
    iterations: u32,
    sub_len: u32,
    threshold: f64,
    iteration: u32,
    sub: u32,
    slot: u32,
    listener: bool,
    hits: u32,
    recorded: Option<u64>,
    records: Vec<u64>,
    sum: u64,
    status: Status,
}

impl CountAllNoCdB {
    pub fn new(params: &ProtocolParams) -> Result<Self, ProtocolError> {
        let n = params
            .known_n
            .ok_or(ProtocolError::MissingParam { protocol: "count_all_nocd_b", param: "known_n" })?;
        let lg_n = ceil_lg(n);
        Ok(CountAllNoCdB {
            lg_n,
            iterations: params.double_count_iterations * lg_n,
            sub_len: params.double_count_subiteration * lg_n,
            threshold: params.subiter_threshold,
            iteration: 0,
            sub: 1,
            slot: 0,
            listener: false,
            hits: 0,
            recorded: None,
            records: Vec::new(),
            sum: 0,
            status: Status::Running,
        })
    }

    /// Total slots of a run: `L * lg N * c2 * lg N`.
    pub fn schedule_len(params: &ProtocolParams) -> Option<u64> {
        let lg_n = ceil_lg(params.known_n?) as u64;
        Some(params.double_count_iterations as u64 * lg_n * lg_n * params.double_count_subiteration as u64 * lg_n)
    }

    /// Estimates recorded in the iterations this node listened in, zero where
    /// no sub-iteration fired.
    pub fn records(&self) -> &[u64] {
        &self.records
    }

    pub fn iterations(&self) -> u32 {
        self.iterations
    }

    pub fn is_listener(&self) -> bool {
        self.listener
    }
}

impl Protocol for CountAllNoCdB {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        if self.sub == 1 && self.slot == 0 {
            self.listener = !coin_half(rng);
        }
        if self.listener {
            SlotAction::Listen
        } else if coin_pow2(rng, self.sub) {
            SlotAction::broadcast(MessageKind::Beacon)
        } else {
            SlotAction::Idle
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        if feedback.is_some_and(|f| f.got(MessageKind::Beacon)) {
            self.hits += 1;
        }
        self.slot += 1;
        if self.slot < self.sub_len {
            return;
        }
        if self.listener && self.recorded.is_none() && reaches(self.hits, self.sub_len, self.threshold) {
            self.recorded = Some(pow2(self.sub + 2));
        }
        self.slot = 0;
        self.hits = 0;
        self.sub += 1;
        if self.sub <= self.lg_n {
            return;
        }

        if self.listener {
            let r = self.recorded.unwrap_or(0);
            self.records.push(r);
            self.sum += r;
        }
        self.recorded = None;
        self.sub = 1;
        self.iteration += 1;
        if self.iteration == self.iterations {
            let l = self.iterations as u64;
            let est = (4 * self.sum).div_ceil(l).max(1);
            self.status = Status::Done(Some(est));
        }
    }

    fn status(&self) -> Status {
        self.status
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn known_delta_of_one_finishes_immediately() {
        let params = ProtocolParams { known_n_delta: Some(1), ..Default::default() };
        assert_eq!(CountAllNoCdA::new(&params).status(), Status::Done(None));
    }

    #[test]
    fn nocd_a_stops_after_lg_delta_iterations() {
        let params = ProtocolParams { known_n_delta: Some(4), phase_multiplier: 3, ..Default::default() };
        let mut p = CountAllNoCdA::new(&params);
        let mut rng = NodeRng::seed_from_u64(9);
        let mut slots = 0;
        while p.status().is_running() {
            let a = p.act(&mut rng);
            p.absorb(a.is_listen().then_some(Feedback::Silence));
            slots += 1;
        }
        assert_eq!(slots, 3 + 6);
        assert_eq!(p.status(), Status::Done(None));
    }

    #[test]
    fn nocd_a_latches_first_estimate() {
        let params = ProtocolParams { phase_multiplier: 2, ..Default::default() };
        let mut p = CountAllNoCdA::new(&params);
        let mut rng = NodeRng::seed_from_u64(1);
        let beacon = Some(Feedback::Received(MessageKind::Beacon.into()));
        for _ in 0..2 {
            let a = p.act(&mut rng);
            p.absorb(a.is_listen().then_some(beacon.unwrap()));
        }
        // Every listening slot heard a beacon, unless the node never listened.
        let first = p.estimate();
        for _ in 0..40 {
            let a = p.act(&mut rng);
            p.absorb(a.is_listen().then_some(beacon.unwrap()));
        }
        assert!(p.estimate().is_some());
        if first.is_some() {
            assert_eq!(p.estimate(), Some(16));
        }
        assert!(p.status().is_running());
    }

    #[test]
    fn nocd_b_requires_known_n() {
        assert!(matches!(
            CountAllNoCdB::new(&ProtocolParams::default()),
            Err(ProtocolError::MissingParam { .. })
        ));
    }

    #[test]
    fn nocd_b_schedule_and_zero_records() {
        let params = ProtocolParams {
            known_n: Some(4),
            double_count_iterations: 2,
            double_count_subiteration: 3,
            ..Default::default()
        };
        let mut p = CountAllNoCdB::new(&params).unwrap();
        let mut rng = NodeRng::seed_from_u64(2);
        let mut slots = 0u64;
        while p.status().is_running() {
            let a = p.act(&mut rng);
            p.absorb(a.is_listen().then_some(Feedback::Silence));
            slots += 1;
        }
        assert_eq!(Some(slots), CountAllNoCdB::schedule_len(&params));
        assert_eq!(slots, 4 * 2 * 6);
        assert!(p.records().iter().all(|&r| r == 0));
        assert_eq!(p.status(), Status::Done(Some(1)));
    }
}
