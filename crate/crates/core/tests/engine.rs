use proptest::prelude::*;
use rand::Rng;
use radiocount::sim::{node_rng, NodeRng, TraceSlot};
use radiocount::{Feedback, Message, MessageKind, Protocol, SimConfig, Simulation, SlotAction, Status, Topology};

/// Broadcasts, listens or idles uniformly at random for a fixed number of slots.
#[derive(Debug, Clone)]
struct Chatter {
    left: u32,
    heard: Vec<Option<Feedback>>,
}

impl Chatter {
    fn new(slots: u32) -> Self {
        Chatter { left: slots, heard: Vec::new() }
    }
}

impl Protocol for Chatter {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        match rng.gen_range(0..3) {
            0 => SlotAction::Broadcast(Message::with_payload(MessageKind::Stop, rng.gen_range(0..4))),
            1 => SlotAction::Listen,
            _ => SlotAction::Idle,
        }
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        self.heard.push(feedback);
        self.left -= 1;
    }

    fn status(&self) -> Status {
        if self.left == 0 {
            Status::Done(None)
        } else {
            Status::Running
        }
    }
}

fn run_chatter(topo: &Topology, slots: u32, cd: bool, seed: u64) -> Vec<TraceSlot> {
    let nodes = vec![Chatter::new(slots); topo.node_count()];
    let mut sim = Simulation::new(topo, nodes, SimConfig::new(cd, seed).with_trace()).unwrap();
    sim.run_to_end();
    sim.take_trace().unwrap().slots
}

/// Independent feedback rule: count the broadcasting neighbors directly.
fn expected_feedback(topo: &Topology, line: &TraceSlot, u: u32, cd: bool) -> Feedback {
    let msgs: Vec<Message> = topo
        .neighbors(u)
        .iter()
        .filter_map(|v| match line.actions.get(v) {
            Some(SlotAction::Broadcast(m)) => Some(*m),
            _ => None,
        })
        .collect();
    match msgs.len() {
        0 => Feedback::Silence,
        1 => Feedback::Received(msgs[0]),
        _ if cd => Feedback::Noise,
        _ => Feedback::Silence,
    }
}

fn graph() -> impl Strategy<Value = Topology> {
    (2usize..24, 0.3f64..0.9, any::<u64>()).prop_map(|(n, p, s)| Topology::random_multihop(n, p, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feedback_depends_only_on_neighbors(topo in graph(), cd: bool, seed: u64) {
        for line in run_chatter(&topo, 40, cd, seed) {
            for (&u, action) in &line.actions {
                let got = line.feedback.get(&u).copied();
                match action {
                    SlotAction::Listen => prop_assert_eq!(got, Some(expected_feedback(&topo, &line, u, cd))),
                    _ => prop_assert_eq!(got, None),
                }
            }
        }
    }

    #[test]
    fn traces_pass_structural_validation(topo in graph(), cd: bool, seed: u64) {
        let trace = radiocount::Trace { slots: run_chatter(&topo, 30, cd, seed) };
        prop_assert!(trace.validate(Some(&topo), Some(cd)).is_empty());
        if !cd {
            let noisy = trace.slots.iter().flat_map(|l| l.feedback.values()).any(|f| *f == Feedback::Noise);
            prop_assert!(!noisy);
        }
    }

    #[test]
    fn relabeling_nodes_relabels_the_run(topo in graph(), cd: bool, seed: u64, shift in 1usize..23) {
        let n = topo.node_count();
        let perm: Vec<u32> = (0..n).map(|u| ((u + shift) % n) as u32).collect();
        let relabeled = Topology::from_edges(n, topo.edges().map(|(a, b)| (perm[a as usize], perm[b as usize])), None)
            .unwrap();
        let config = SimConfig::new(cd, seed);

        let mut a = Simulation::new(&topo, vec![Chatter::new(25); n], config).unwrap();
        a.run_to_end();
        let mut rngs = vec![None; n];
        for u in 0..n {
            rngs[perm[u] as usize] = Some(node_rng(seed, u as u32));
        }
        let rngs = rngs.into_iter().map(Option::unwrap).collect();
        let mut b = Simulation::with_rngs(&relabeled, vec![Chatter::new(25); n], rngs, config).unwrap();
        b.run_to_end();

        for u in 0..n {
            prop_assert_eq!(&a.nodes()[u].heard, &b.nodes()[perm[u] as usize].heard);
        }
    }
}

#[test]
fn single_hop_listeners_hear_the_same_thing() {
    let topo = Topology::clique(12).unwrap();
    for cd in [false, true] {
        for seed in 0..20 {
            for line in run_chatter(&topo, 50, cd, seed) {
                let mut heard = line.feedback.values();
                if let Some(first) = heard.next() {
                    assert!(heard.all(|f| f == first), "slot {}", line.slot);
                }
            }
        }
    }
}

#[test]
fn same_seed_same_trace() {
    let topo = Topology::random_multihop(30, 0.2, 5).unwrap();
    let render = |seed| {
        let nodes = vec![Chatter::new(60); topo.node_count()];
        let mut sim = Simulation::new(&topo, nodes, SimConfig::new(true, seed).with_trace()).unwrap();
        sim.run_to_end();
        sim.take_trace().unwrap().to_jsonl()
    };
    assert_eq!(render(9), render(9));
    assert_ne!(render(9), render(10));
}

#[test]
fn finished_nodes_stop_acting() {
    let topo = Topology::clique(3).unwrap();
    let nodes = vec![Chatter::new(2), Chatter::new(5), Chatter::new(1)];
    let mut sim = Simulation::new(&topo, nodes, SimConfig::new(false, 1).with_trace()).unwrap();
    sim.run_to_end();
    let record = sim.record();
    assert_eq!(record.slots, 5);
    assert!(!record.cutoff);
    let slots: Vec<_> = record.nodes.iter().map(|o| o.termination_slot).collect();
    assert_eq!(slots, [Some(2), Some(5), Some(1)]);
    let trace = sim.take_trace().unwrap();
    let active: Vec<usize> = trace.slots.iter().map(|l| l.actions.len()).collect();
    assert_eq!(active, [3, 2, 1, 1, 1]);
}

#[test]
fn cutoff_is_flagged() {
    let topo = Topology::clique(4).unwrap();
    let nodes = vec![Chatter::new(100); 4];
    let mut sim = Simulation::new(&topo, nodes, SimConfig::new(false, 1).with_max_slots(10)).unwrap();
    sim.run_to_end();
    let record = sim.record();
    assert!(record.cutoff);
    assert_eq!(record.slots, 10);
    assert!(record.nodes.iter().all(|o| o.termination_slot.is_none()));
}

#[test]
fn node_count_must_match() {
    let topo = Topology::clique(4).unwrap();
    let err = Simulation::new(&topo, vec![Chatter::new(1); 3], SimConfig::default()).err();
    assert_eq!(
        err,
        Some(radiocount::sim::SimError::NodeCountMismatch { expected: 4, got: 3 })
    );
}
