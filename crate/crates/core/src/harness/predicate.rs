//! Named success predicates. Each encodes the accuracy range a protocol is
//! expected to hit; the version is bumped whenever a definition changes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::proto::{ProtocolKind, Status, Variant};
use crate::sim::TrialRecord;
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Predicate {
    /// Every node Done at the same slot with the same estimate in `[n, 4n]`.
    ShRange4x,
    /// As `sh_range_4x` with range `[n, 64n]`.
    ShRange64x,
    /// Every node Done at the same slot with the same `lg n` estimate `V`,
    /// `V` in `[2^(floor(lg lg n)+1), 2^(floor(lg lg n)+2)]`.
    ShLgRange,
    /// Every node Done with the same `V` and `2^V >= n`.
    ShLgUpper,
    /// Per node: estimate in `[n_u, 4 n_u]`.
    AllRange4x,
    /// Per node of maximum degree: estimate in `[n_u, 4 n_u]`.
    AllRange4xHub,
    /// Every node's estimate in `[n_u, 5 n_u]`.
    AllRange5x,
    /// The designated node's estimate in `[n_w, 4 n_w]`.
    CenterRange4x,
    /// The designated node's estimate in `[n_w, 64 n_w]`.
    CenterRange64x,
    /// The designated node's `lg n_w` estimate in the doubly exponential range.
    CenterLgRange,
    /// The designated node's `lg n_w` estimate `V` with `2^V >= n_w`.
    CenterLgUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// One unit per trial.
    Trial,
    /// One unit per evaluated node.
    Node,
}

impl Predicate {
    pub const ALL: [Predicate; 11] = [
        Predicate::ShRange4x,
        Predicate::ShRange64x,
        Predicate::ShLgRange,
        Predicate::ShLgUpper,
        Predicate::AllRange4x,
        Predicate::AllRange4xHub,
        Predicate::AllRange5x,
        Predicate::CenterRange4x,
        Predicate::CenterRange64x,
        Predicate::CenterLgRange,
        Predicate::CenterLgUpper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::ShRange4x => "sh_range_4x",
            Predicate::ShRange64x => "sh_range_64x",
            Predicate::ShLgRange => "sh_lg_range",
            Predicate::ShLgUpper => "sh_lg_upper",
            Predicate::AllRange4x => "all_range_4x",
            Predicate::AllRange4xHub => "all_range_4x_hub",
            Predicate::AllRange5x => "all_range_5x",
            Predicate::CenterRange4x => "center_range_4x",
            Predicate::CenterRange64x => "center_range_64x",
            Predicate::CenterLgRange => "center_lg_range",
            Predicate::CenterLgUpper => "center_lg_upper",
        }
    }

    pub fn version(self) -> u32 {
        1
    }

    pub fn scope(self) -> Scope {
        match self {
            Predicate::AllRange4x | Predicate::AllRange4xHub => Scope::Node,
            _ => Scope::Trial,
        }
    }

    /// The range each protocol is expected to reproduce.
    pub fn default_for(kind: ProtocolKind) -> Predicate {
        match kind {
            ProtocolKind::CountShNocdConst | ProtocolKind::CountShNocdHigh | ProtocolKind::CountShCdConst => {
                Predicate::ShRange4x
            }
            ProtocolKind::CountShCdHigh => Predicate::ShRange64x,
            ProtocolKind::EstUpperSh => Predicate::ShLgRange,
            ProtocolKind::CountAllNocdA | ProtocolKind::CountAllCdA => Predicate::AllRange4x,
            ProtocolKind::CountAllNocdB => Predicate::AllRange5x,
            ProtocolKind::EstUpperCenter => Predicate::CenterLgRange,
            ProtocolKind::CountCenterCdHigh => Predicate::CenterRange64x,
            ProtocolKind::CountCenterNocdConst
            | ProtocolKind::CountCenterNocdHigh
            | ProtocolKind::CountCenterCdConst => Predicate::CenterRange4x,
        }
    }

    /// `(successes, units)` for one trial.
    pub fn evaluate(self, record: &TrialRecord, topology: &Topology) -> (u64, u64) {
        let n = topology.node_count() as u64;
        let nodes = &record.nodes;
        let estimate_of = |u: NodeId| nodes[u as usize].estimate;
        let in_range = |est: Option<u64>, lo: u64, factor: u64| est.is_some_and(|e| e >= lo && e <= factor * lo);
        let bit = |ok: bool| (ok as u64, 1);
        match self {
            Predicate::ShRange4x => bit(unanimous(record).is_some_and(|e| e >= n && e <= 4 * n)),
            Predicate::ShRange64x => bit(unanimous(record).is_some_and(|e| e >= n && e <= 64 * n)),
            Predicate::ShLgRange => bit(unanimous(record).is_some_and(|v| lg_in_range(v, n))),
            Predicate::ShLgUpper => bit(unanimous(record).is_some_and(|v| lg_covers(v, n))),
            Predicate::AllRange4x => {
                let ok = nodes.iter().filter(|o| in_range(o.estimate, o.degree as u64, 4)).count();
                (ok as u64, nodes.len() as u64)
            }
            Predicate::AllRange4xHub => {
                let hub = topology.max_degree();
                let hubs: Vec<_> = nodes.iter().filter(|o| o.degree == hub).collect();
                let ok = hubs.iter().filter(|o| in_range(o.estimate, o.degree as u64, 4)).count();
                (ok as u64, hubs.len() as u64)
            }
            Predicate::AllRange5x => bit(nodes.iter().all(|o| in_range(o.estimate, o.degree as u64, 5))),
            _ => {
                let Some(w) = topology.designated() else {
                    return (0, 1);
                };
                let n_w = topology.degree(w) as u64;
                let est = estimate_of(w);
                bit(match self {
                    Predicate::CenterRange4x => in_range(est, n_w, 4),
                    Predicate::CenterRange64x => in_range(est, n_w, 64),
                    Predicate::CenterLgRange => est.is_some_and(|v| lg_in_range(v, n_w)),
                    _ => est.is_some_and(|v| lg_covers(v, n_w)),
                })
            }
        }
    }
}

/// The shared estimate when every node is Done at the same slot with the
/// same estimate.
pub fn unanimous(record: &TrialRecord) -> Option<u64> {
    let first = record.nodes.first()?;
    let est = first.estimate?;
    record
        .nodes
        .iter()
        .all(|o| {
            o.status == Status::Done(Some(est)) && o.termination_slot == first.termination_slot
        })
        .then_some(est)
}

/// `floor(lg lg x)` for `x >= 2`.
pub fn floor_lg_lg(x: u64) -> u32 {
    debug_assert!(x >= 2);
    let lg = (x as f64).log2();
    lg.log2().floor().max(0.0) as u32
}

fn lg_in_range(v: u64, x: u64) -> bool {
    if x < 2 {
        return false;
    }
    let k = floor_lg_lg(x);
    v >= 1u64 << (k + 1) && v <= 1u64 << (k + 2)
}

fn lg_covers(v: u64, x: u64) -> bool {
    v >= 64 || (1u64 << v) >= x
}

/// Reference count for ratios: `n` in a single-hop network, the node's
/// degree otherwise.
pub fn target_count(kind: ProtocolKind, topology: &Topology, u: NodeId) -> u64 {
    match kind.variant() {
        Variant::SingleHop => topology.node_count() as u64,
        _ => topology.degree(u) as u64,
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for Predicate {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Predicate> for String {
    fn from(p: Predicate) -> String {
        p.name().to_owned()
    }
}

impl FromStr for Predicate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Predicate::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown predicate `{s}`"))
    }
}
