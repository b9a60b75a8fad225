//! Per-slot execution traces, serialized as JSON Lines.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::channel::resolve_channel;
use super::message::{Feedback, Message, SlotAction};
use crate::topology::{NodeId, Topology};

/// One line of a trace file: `{"slot":k,"actions":{id:...},"feedback":{id:...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSlot {
    pub slot: u64,
    pub actions: BTreeMap<NodeId, SlotAction>,
    pub feedback: BTreeMap<NodeId, Feedback>,
}

impl TraceSlot {
    pub fn broadcasters(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.actions
            .iter()
            .filter(|(_, a)| matches!(a, SlotAction::Broadcast(_)))
            .map(|(&u, _)| u)
    }

    pub fn listeners(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.actions.iter().filter(|(_, a)| a.is_listen()).map(|(&u, _)| u)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub slots: Vec<TraceSlot>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for slot in &self.slots {
            serde_json::to_writer(&mut out, slot)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, serde_json::Error> {
        let mut slots = Vec::new();
        for line in input.lines() {
            let line = line.map_err(serde_json::Error::io)?;
            if line.trim().is_empty() {
                continue;
            }
            slots.push(serde_json::from_str(&line)?);
        }
        Ok(Trace { slots })
    }
}

/// A way in which a trace disagrees with the channel model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    /// Slot numbers must run 0, 1, 2, ...
    SlotOrder { index: usize, slot: u64 },
    /// A node both broadcast and received feedback.
    HalfDuplex { slot: u64, node: NodeId },
    /// A listener without feedback.
    MissingFeedback { slot: u64, node: NodeId },
    /// Feedback for a node that did not listen.
    UnexpectedFeedback { slot: u64, node: NodeId },
    /// Noise recorded although collision detection was off.
    NoiseWithoutCd { slot: u64, node: NodeId },
    /// Recorded feedback differs from re-resolving the channel.
    Mismatch { slot: u64, node: NodeId, recorded: Feedback, resolved: Feedback },
    /// A node id outside the topology.
    UnknownNode { slot: u64, node: NodeId },
}

impl fmt::Display for TraceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceViolation::SlotOrder { index, slot } => write!(f, "line {index}: slot {slot} out of order"),
            TraceViolation::HalfDuplex { slot, node } => {
                write!(f, "slot {slot}: node {node} broadcast and received feedback")
            }
            TraceViolation::MissingFeedback { slot, node } => write!(f, "slot {slot}: listener {node} has no feedback"),
            TraceViolation::UnexpectedFeedback { slot, node } => {
                write!(f, "slot {slot}: node {node} got feedback without listening")
            }
            TraceViolation::NoiseWithoutCd { slot, node } => {
                write!(f, "slot {slot}: node {node} heard noise without collision detection")
            }
            TraceViolation::Mismatch { slot, node, recorded, resolved } => write!(
                f,
                "slot {slot}: node {node} recorded {recorded:?} but the channel resolves to {resolved:?}"
            ),
            TraceViolation::UnknownNode { slot, node } => write!(f, "slot {slot}: node {node} not in topology"),
        }
    }
}

impl Trace {
    /// Check the structural channel invariants. With `cd = Some(false)` any
    /// noise is a violation; with a topology every listener's feedback is
    /// recomputed from its broadcasting neighbors (which requires `cd`).
    pub fn validate(&self, topology: Option<&Topology>, cd: Option<bool>) -> Vec<TraceViolation> {
        let mut out = Vec::new();
        for (index, line) in self.slots.iter().enumerate() {
            let slot = line.slot;
            if slot != index as u64 {
                out.push(TraceViolation::SlotOrder { index, slot });
            }
            if let Some(topo) = topology {
                let n = topo.node_count() as NodeId;
                out.extend(
                    line.actions
                        .keys()
                        .chain(line.feedback.keys())
                        .filter(|&&u| u >= n)
                        .map(|&node| TraceViolation::UnknownNode { slot, node }),
                );
            }
            for (&node, action) in &line.actions {
                let has = line.feedback.contains_key(&node);
                match action {
                    SlotAction::Broadcast(_) if has => out.push(TraceViolation::HalfDuplex { slot, node }),
                    SlotAction::Listen if !has => out.push(TraceViolation::MissingFeedback { slot, node }),
                    SlotAction::Idle if has => out.push(TraceViolation::UnexpectedFeedback { slot, node }),
                    _ => {}
                }
            }
            for (&node, fb) in &line.feedback {
                if !line.actions.contains_key(&node) {
                    out.push(TraceViolation::UnexpectedFeedback { slot, node });
                }
                if cd == Some(false) && *fb == Feedback::Noise {
                    out.push(TraceViolation::NoiseWithoutCd { slot, node });
                }
            }
            let (Some(topo), Some(cd)) = (topology, cd) else { continue };
            for (&node, &recorded) in &line.feedback {
                if node as usize >= topo.node_count() {
                    continue;
                }
                let around: Vec<(NodeId, Message)> = topo
                    .neighbors(node)
                    .iter()
                    .filter_map(|v| line.actions.get(v).and_then(|a| a.message()).map(|m| (*v, m)))
                    .collect();
                let resolved = resolve_channel(node, &around, cd);
                if resolved != recorded {
                    out.push(TraceViolation::Mismatch { slot, node, recorded, resolved });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::message::MessageKind;

    #[test]
    fn line_shape() {
        let slot = TraceSlot {
            slot: 3,
            actions: BTreeMap::from([
                (0, SlotAction::broadcast(MessageKind::Beacon)),
                (1, SlotAction::Listen),
                (2, SlotAction::Idle),
            ]),
            feedback: BTreeMap::from([(1, Feedback::Received(Message::new(MessageKind::Beacon)))]),
        };
        let line = serde_json::to_string(&slot).unwrap();
        assert_eq!(
            line,
            r#"{"slot":3,"actions":{"0":{"broadcast":{"kind":"beacon"}},"1":"listen","2":"idle"},"feedback":{"1":{"received":{"kind":"beacon"}}}}"#
        );
        let trace = Trace { slots: vec![slot] };
        let back = Trace::read_jsonl(trace.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn validation_flags_each_violation() {
        let topo = Topology::clique(3).unwrap();
        let beacon = Message::new(MessageKind::Beacon);
        let good = TraceSlot {
            slot: 0,
            actions: BTreeMap::from([
                (0, SlotAction::Broadcast(beacon)),
                (1, SlotAction::Listen),
                (2, SlotAction::Idle),
            ]),
            feedback: BTreeMap::from([(1, Feedback::Received(beacon))]),
        };
        let trace = Trace { slots: vec![good.clone()] };
        assert!(trace.validate(Some(&topo), Some(false)).is_empty());

        let mut bad = good.clone();
        bad.feedback.insert(0, Feedback::Silence);
        bad.feedback.insert(1, Feedback::Noise);
        let v = Trace { slots: vec![bad] }.validate(Some(&topo), Some(false));
        assert!(v.contains(&TraceViolation::HalfDuplex { slot: 0, node: 0 }));
        assert!(v.contains(&TraceViolation::NoiseWithoutCd { slot: 0, node: 1 }));
        assert!(v.iter().any(|x| matches!(x, TraceViolation::Mismatch { node: 1, .. })));

        let mut missing = good;
        missing.slot = 4;
        missing.feedback.clear();
        let v = Trace { slots: vec![missing] }.validate(None, None);
        assert_eq!(
            v,
            [
                TraceViolation::SlotOrder { index: 0, slot: 4 },
                TraceViolation::MissingFeedback { slot: 4, node: 1 }
            ]
        );
    }
}
