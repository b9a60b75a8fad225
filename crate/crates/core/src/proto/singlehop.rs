//! Counting in a clique: every node estimates the network size.

use std::collections::BTreeMap;

use super::{pow2, reaches, Protocol, ProtocolParams, Status};
use crate::sim::message::{Feedback, MessageKind, SlotAction};
use crate::sim::rng::{coin_one_in, coin_pow2, NodeRng};

/// `2^(2^i)` as a coin exponent, saturating.
fn double_exp(i: u32) -> u32 {
    1u32.checked_shl(i).unwrap_or(u32::MAX)
}

/// Guess `n = 2^i` for i = 1, 2, ...; a beacon heard alone in the first slot
/// of an iteration ends the protocol at `2^(i+2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountShNoCdConst {
    iteration: u32,
    second_slot: bool,
    beaconed: bool,
    heard_beacon: bool,
    heard_stop: bool,
    status: Status,
}

impl CountShNoCdConst {
    pub fn new() -> Self {
        CountShNoCdConst {
            iteration: 1,
            second_slot: false,
            beaconed: false,
            heard_beacon: false,
            heard_stop: false,
            status: Status::Running,
        }
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }
}

impl Default for CountShNoCdConst {
    fn default() -> Self {
        Self::new()
    }
}

impl Protocol for CountShNoCdConst {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        let i = self.iteration;
        if !self.second_slot {
            self.beaconed = coin_pow2(rng, i);
            return if self.beaconed { SlotAction::broadcast(MessageKind::Beacon) } else { SlotAction::Listen };
        }
        if self.heard_beacon {
            let stop = if i < 64 { coin_one_in(rng, pow2(i) - 1) } else { coin_pow2(rng, i) };
            if stop {
                SlotAction::broadcast(MessageKind::Stop)
            } else {
                SlotAction::Idle
            }
        } else if self.beaconed {
            SlotAction::Listen
        } else {
            SlotAction::Idle
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        if !self.second_slot {
            self.heard_beacon = feedback.is_some_and(|f| f.got(MessageKind::Beacon));
            self.second_slot = true;
            return;
        }
        if self.beaconed {
            self.heard_stop = feedback.is_some_and(|f| f.got(MessageKind::Stop));
        }
        if self.heard_beacon || self.heard_stop {
            self.status = Status::Done(Some(pow2(self.iteration + 2)));
        } else {
            self.iteration += 1;
        }
        self.second_slot = false;
        self.beaconed = false;
        self.heard_beacon = false;
        self.heard_stop = false;
    }

    fn status(&self) -> Status {
        self.status
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knowledge {
    Uninformed,
    Informed,
    Stopped,
}

/// Three phases of `a*i` slots per iteration: measure the beacon rate,
/// spread the news among nodes that measured it, then propagate the stop.
#[derive(Debug, Clone, PartialEq)]
pub struct CountShNoCdHigh {
    multiplier: u32,
    threshold: f64,
    iteration: u32,
    phase: u8,
    slot: u32,
    count_listen: u32,
    count_msg: u32,
    knowledge: Knowledge,
    private_estimate: Option<u64>,
    final_estimate: Option<u64>,
    status: Status,
}

impl CountShNoCdHigh {
    pub fn new(params: &ProtocolParams) -> Self {
        CountShNoCdHigh {
            multiplier: params.phase_multiplier,
            threshold: params.informed_threshold,
            iteration: 1,
            phase: 1,
            slot: 0,
            count_listen: 0,
            count_msg: 0,
            knowledge: Knowledge::Uninformed,
            private_estimate: None,
            final_estimate: None,
            status: Status::Running,
        }
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    /// 1, 2 or 3.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn knowledge(&self) -> Knowledge {
        self.knowledge
    }

    pub fn private_estimate(&self) -> Option<u64> {
        self.private_estimate
    }

    fn phase_len(&self) -> u32 {
        self.multiplier.saturating_mul(self.iteration)
    }

    fn stop(&mut self) {
        self.knowledge = Knowledge::Stopped;
        self.final_estimate = Some(pow2(self.iteration + 2));
    }
}

impl Protocol for CountShNoCdHigh {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        let i = self.iteration;
        match self.phase {
            1 => {
                if coin_pow2(rng, i) {
                    SlotAction::broadcast(MessageKind::Beacon)
                } else {
                    SlotAction::Listen
                }
            }
            2 => {
                if self.knowledge == Knowledge::Informed && coin_pow2(rng, i) {
                    SlotAction::broadcast(MessageKind::Informed)
                } else {
                    SlotAction::Listen
                }
            }
            _ => {
                if self.knowledge != Knowledge::Stopped {
                    SlotAction::Listen
                } else if coin_pow2(rng, i) {
                    SlotAction::broadcast(MessageKind::Stop)
                } else {
                    SlotAction::Idle
                }
            }
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        if let Some(fb) = feedback {
            match self.phase {
                1 => {
                    self.count_listen += 1;
                    if fb.got(MessageKind::Beacon) {
                        self.count_msg += 1;
                    }
                }
                2 if fb.got(MessageKind::Informed) => self.stop(),
                3 if fb.got(MessageKind::Stop) => self.stop(),
                _ => {}
            }
        }

        self.slot += 1;
        if self.slot < self.phase_len() {
            return;
        }
        self.slot = 0;
        match self.phase {
            1 => {
                if self.knowledge == Knowledge::Uninformed
                    && reaches(self.count_msg, self.count_listen, self.threshold)
                {
                    self.knowledge = Knowledge::Informed;
                    self.private_estimate = Some(pow2(self.iteration));
                }
                self.count_listen = 0;
                self.count_msg = 0;
                self.phase = 2;
            }
            2 => self.phase = 3,
            _ => {
                if self.knowledge == Knowledge::Stopped {
                    self.status = Status::Done(self.final_estimate);
                } else {
                    self.iteration += 1;
                    self.phase = 1;
                }
            }
        }
    }

    fn status(&self) -> Status {
        self.status
    }
}

/// Doubly exponential search for an upper bound on `lg n`. Finishes with
/// `Done(Some(2^(i+1)))`, an estimate of `lg n` rather than of `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstUpperSh {
    iteration: u32,
    second_slot: bool,
    beaconed: bool,
    first: Option<Feedback>,
    status: Status,
}

impl EstUpperSh {
    pub fn new() -> Self {
        EstUpperSh {
            iteration: 1,
            second_slot: false,
            beaconed: false,
            first: None,
            status: Status::Running,
        }
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    /// The upper estimate of `lg n`, once finished.
    pub fn lg_estimate(&self) -> Option<u32> {
        self.status.estimate().map(|v| v.min(u32::MAX as u64) as u32)
    }

    fn quiet_or_clean(&self) -> bool {
        matches!(self.first, Some(Feedback::Silence | Feedback::Received(_)))
    }
}

impl Default for EstUpperSh {
    fn default() -> Self {
        Self::new()
    }
}

impl Protocol for EstUpperSh {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        if !self.second_slot {
            self.beaconed = coin_pow2(rng, double_exp(self.iteration));
            if self.beaconed {
                SlotAction::broadcast(MessageKind::Beacon)
            } else {
                SlotAction::Listen
            }
        } else if self.beaconed {
            SlotAction::Listen
        } else if self.quiet_or_clean() {
            SlotAction::broadcast(MessageKind::Stop)
        } else {
            SlotAction::Idle
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        if !self.second_slot {
            self.first = feedback;
            self.second_slot = true;
            return;
        }
        let done = if self.beaconed {
            matches!(feedback, Some(Feedback::Noise)) || feedback.is_some_and(|f| f.got(MessageKind::Stop))
        } else {
            self.quiet_or_clean()
        };
        if done {
            self.status = Status::Done(Some(pow2(self.iteration + 1)));
        } else {
            self.iteration += 1;
        }
        self.second_slot = false;
        self.beaconed = false;
        self.first = None;
    }

    fn status(&self) -> Status {
        self.status
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Down,
    Up,
    Hold,
}

/// Four-slot probe shared by the search and walk stages: one beacon slot,
/// then helper slots through which the listeners tell a lone broadcaster what
/// they heard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Probe {
    slot: u8,
    beaconed: bool,
    first: Option<Feedback>,
    echo_silence: bool,
    echo_noise: bool,
}

impl Probe {
    /// Slot 0 of every iteration.
    fn beacon(&mut self, rng: &mut NodeRng, exponent: u32) -> SlotAction {
        self.beaconed = coin_pow2(rng, exponent);
        if self.beaconed {
            SlotAction::broadcast(MessageKind::Beacon)
        } else {
            SlotAction::Listen
        }
    }

    /// What a listener decided in slot 0.
    fn heard(&self) -> Move {
        match self.first {
            Some(Feedback::Silence) => Move::Down,
            Some(Feedback::Noise) => Move::Up,
            _ => Move::Hold,
        }
    }

    fn record(&mut self, feedback: Option<Feedback>) {
        let loud = feedback.is_some_and(|f| !f.is_silence());
        match self.slot {
            0 => self.first = feedback,
            1 => self.echo_silence |= loud,
            2 => self.echo_noise |= loud,
            _ => {}
        }
        self.slot += 1;
    }

    /// The move every node agrees on once the echo slots are done.
    fn decision(&self) -> Move {
        if !self.beaconed {
            self.heard()
        } else if self.echo_silence {
            Move::Down
        } else if self.echo_noise {
            Move::Up
        } else {
            Move::Hold
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Search {
    lo: u32,
    hi: u32,
    probe: Probe,
}

impl Search {
    fn mid(&self) -> u32 {
        (self.lo + self.hi) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ConstStage {
    Upper(EstUpperSh),
    Search(Search),
}

/// Binary search on `lg n` over `[1, V]`, where `V` comes from
/// [`EstUpperSh`]. Four slots per iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountShCdConst {
    stage: ConstStage,
    status: Status,
}

impl CountShCdConst {
    pub fn new() -> Self {
        CountShCdConst { stage: ConstStage::Upper(EstUpperSh::new()), status: Status::Running }
    }

    /// Current `(a, b)` once the search has started.
    pub fn bounds(&self) -> Option<(u32, u32)> {
        match &self.stage {
            ConstStage::Search(s) => Some((s.lo, s.hi)),
            ConstStage::Upper(_) => None,
        }
    }

    /// True at the boundary between two search iterations.
    pub fn at_iteration_start(&self) -> bool {
        matches!(&self.stage, ConstStage::Search(s) if s.probe.slot == 0)
    }
}

impl Default for CountShCdConst {
    fn default() -> Self {
        Self::new()
    }
}

impl Protocol for CountShCdConst {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        match &mut self.stage {
            ConstStage::Upper(up) => up.act(rng),
            ConstStage::Search(s) => {
                let p = &mut s.probe;
                match p.slot {
                    0 => {
                        let m = (s.lo + s.hi) / 2;
                        p.beacon(rng, m)
                    }
                    _ if p.beaconed => SlotAction::Listen,
                    1 if p.heard() == Move::Down => SlotAction::broadcast(MessageKind::OverEst),
                    2 if p.heard() == Move::Up => SlotAction::broadcast(MessageKind::UnderEst),
                    3 if matches!(p.first, Some(Feedback::Received(_))) => {
                        SlotAction::broadcast(MessageKind::Stop)
                    }
                    _ => SlotAction::Idle,
                }
            }
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        match &mut self.stage {
            ConstStage::Upper(up) => {
                up.absorb(feedback);
                if let Some(v) = up.lg_estimate() {
                    self.stage = ConstStage::Search(Search { lo: 1, hi: v, probe: Probe::default() });
                }
            }
            ConstStage::Search(s) => {
                s.probe.record(feedback);
                if s.probe.slot < 4 {
                    return;
                }
                let m = s.mid();
                match s.probe.decision() {
                    Move::Down => s.hi = m - 1,
                    Move::Up => s.lo = m + 1,
                    Move::Hold => {
                        self.status = Status::Done(Some(pow2(m + 1)));
                        return;
                    }
                }
                s.probe = Probe::default();
                if s.lo > s.hi {
                    self.status = Status::Aborted;
                }
            }
        }
    }

    fn status(&self) -> Status {
        self.status
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Walk {
    cap: u32,
    exponent: u32,
    remaining: u64,
    probe: Probe,
    visits: BTreeMap<u32, u64>,
}

impl Walk {
    fn new(cap: u32, iterations: u64) -> Self {
        Walk { cap, exponent: cap, remaining: iterations, probe: Probe::default(), visits: BTreeMap::new() }
    }

    fn apply(&mut self, mv: Move) {
        *self.visits.entry(self.exponent).or_default() += 1;
        match mv {
            Move::Down => self.exponent = self.exponent.saturating_sub(2),
            Move::Up => self.exponent = (self.exponent + 2).min(self.cap),
            Move::Hold => {}
        }
        self.remaining -= 1;
    }

    /// Most visited exponent; ties go to the smaller one.
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

#[derive(Debug, Clone, PartialEq, Eq)]
enum HighStage {
    Upper(EstUpperSh),
    Walk(Walk),
}

/// Random walk over `n_hat = 2^e` starting from the [`EstUpperSh`] bound,
/// moving by factors of four. Outputs four times the most visited value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountShCdHigh {
    walk_multiplier: u32,
    stage: HighStage,
    status: Status,
}

impl CountShCdHigh {
    pub fn new(params: &ProtocolParams) -> Self {
        CountShCdHigh {
            walk_multiplier: params.walk_multiplier,
            stage: HighStage::Upper(EstUpperSh::new()),
            status: Status::Running,
        }
    }

    /// `lg n_hat` during the walk.
    pub fn exponent(&self) -> Option<u32> {
        match &self.stage {
            HighStage::Walk(w) => Some(w.exponent),
            HighStage::Upper(_) => None,
        }
    }

    /// `lg` of the upper bound the walk started from.
    pub fn cap(&self) -> Option<u32> {
        match &self.stage {
            HighStage::Walk(w) => Some(w.cap),
            HighStage::Upper(_) => None,
        }
    }

    /// Visit counts keyed by `lg n_hat`.
    pub fn visits(&self) -> Option<&BTreeMap<u32, u64>> {
        match &self.stage {
            HighStage::Walk(w) => Some(&w.visits),
            HighStage::Upper(_) => None,
        }
    }

    pub fn at_iteration_start(&self) -> bool {
        matches!(&self.stage, HighStage::Walk(w) if w.probe.slot == 0)
    }
}

impl Protocol for CountShCdHigh {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        match &mut self.stage {
            HighStage::Upper(up) => up.act(rng),
            HighStage::Walk(w) => {
                let p = &mut w.probe;
                match p.slot {
                    0 => p.beacon(rng, w.exponent),
                    _ if p.beaconed => SlotAction::Listen,
                    1 if p.heard() == Move::Down => SlotAction::broadcast(MessageKind::SilenceEcho),
                    2 if p.heard() == Move::Up => SlotAction::broadcast(MessageKind::NoiseEcho),
                    _ => SlotAction::Idle,
                }
            }
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        match &mut self.stage {
            HighStage::Upper(up) => {
                up.absorb(feedback);
                if let Some(v) = up.lg_estimate() {
                    let iterations = self.walk_multiplier as u64 * v as u64;
                    self.stage = HighStage::Walk(Walk::new(v, iterations));
                }
            }
            HighStage::Walk(w) => {
                w.probe.record(feedback);
                if w.probe.slot < 3 {
                    return;
                }
                let mv = w.probe.decision();
                w.apply(mv);
                w.probe = Probe::default();
                if w.remaining == 0 {
                    self.status = Status::Done(Some(pow2(w.mode() + 2)));
                }
            }
        }
    }

    fn status(&self) -> Status {
        self.status
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::message::Message;
    use rand::SeedableRng;

    fn rng(seed: u64) -> NodeRng {
        NodeRng::seed_from_u64(seed)
    }

    #[test]
    fn nocd_const_listener_stops_on_lone_beacon() {
        let mut p = CountShNoCdConst::new();
        let mut r = rng(1);
        // Draw until the node listens in slot 1.
        while p.act(&mut r) != SlotAction::Listen {
            p.absorb(None);
            p.act(&mut r);
            p.absorb(None);
        }
        let i = p.iteration();
        p.absorb(Some(Feedback::Received(Message::new(MessageKind::Beacon))));
        p.act(&mut r);
        p.absorb(None);
        assert_eq!(p.status(), Status::Done(Some(pow2(i + 2))));
    }

    #[test]
    fn nocd_const_second_slot_stop_is_certain_at_first_iteration() {
        let mut p = CountShNoCdConst::new();
        let mut r = rng(5);
        loop {
            let a = p.act(&mut r);
            if a == SlotAction::Listen {
                break;
            }
            p.absorb(None);
            p.act(&mut r);
            p.absorb(None);
            p = CountShNoCdConst::new();
        }
        p.absorb(Some(Feedback::Received(Message::new(MessageKind::Beacon))));
        assert_eq!(p.act(&mut r), SlotAction::broadcast(MessageKind::Stop));
    }

    #[test]
    fn est_upper_broadcaster_waits_for_noise_or_stop() {
        // Iteration 1 broadcasts with probability 1/4; find a broadcasting seed.
        let (mut p, mut r) = (0..)
            .map(|seed| {
                let mut r = rng(seed);
                let mut p = EstUpperSh::new();
                let a = p.act(&mut r);
                (p, r, a)
            })
            .find(|(_, _, a)| matches!(a, SlotAction::Broadcast(_)))
            .map(|(p, r, _)| (p, r))
            .unwrap();
        p.absorb(None);
        assert_eq!(p.act(&mut r), SlotAction::Listen);
        p.absorb(Some(Feedback::Silence));
        assert!(p.status().is_running());
        assert_eq!(p.iteration(), 2);
    }

    #[test]
    fn walk_mode_prefers_smaller_on_ties() {
        let mut w = Walk::new(8, 4);
        w.apply(Move::Down); // visit 8
        w.apply(Move::Down); // visit 6
        w.apply(Move::Up); // visit 4
        w.apply(Move::Up); // visit 6
        assert_eq!(w.visits.values().sum::<u64>(), 4);
        assert_eq!(w.mode(), 6);
        let mut t = Walk::new(4, 2);
        t.apply(Move::Down);
        t.apply(Move::Hold);
        assert_eq!(t.mode(), 2);
    }

    #[test]
    fn walk_clamps_at_both_ends() {
        let mut w = Walk::new(4, 10);
        w.apply(Move::Up);
        assert_eq!(w.exponent, 4);
        for _ in 0..5 {
            w.apply(Move::Down);
        }
        assert_eq!(w.exponent, 0);
    }
}
