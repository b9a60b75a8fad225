use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    CenterRole, CountAllCdA, CountAllNoCdA, CountAllNoCdB, CountCenterCdConst, CountCenterCdHigh,
    CountCenterNoCd, CountShCdConst, CountShCdHigh, CountShNoCdConst, CountShNoCdHigh, EstUpperCenter,
    EstUpperSh, Protocol, ProtocolError, ProtocolParams, Status,
};
use crate::sim::message::{Feedback, SlotAction};
use crate::sim::rng::NodeRng;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    CountShNocdConst,
    CountShNocdHigh,
    EstUpperSh,
    CountShCdConst,
    CountShCdHigh,
    CountAllNocdA,
    CountAllNocdB,
    CountAllCdA,
    EstUpperCenter,
    CountCenterNocdConst,
    CountCenterNocdHigh,
    CountCenterCdConst,
    CountCenterCdHigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    SingleHop,
    AllNodes,
    Designated,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 13] = [
        ProtocolKind::CountShNocdConst,
        ProtocolKind::CountShNocdHigh,
        ProtocolKind::EstUpperSh,
        ProtocolKind::CountShCdConst,
        ProtocolKind::CountShCdHigh,
        ProtocolKind::CountAllNocdA,
        ProtocolKind::CountAllNocdB,
        ProtocolKind::CountAllCdA,
        ProtocolKind::EstUpperCenter,
        ProtocolKind::CountCenterNocdConst,
        ProtocolKind::CountCenterNocdHigh,
        ProtocolKind::CountCenterCdConst,
        ProtocolKind::CountCenterCdHigh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::CountShNocdConst => "count_sh_nocd_const",
            ProtocolKind::CountShNocdHigh => "count_sh_nocd_high",
            ProtocolKind::EstUpperSh => "est_upper_sh",
            ProtocolKind::CountShCdConst => "count_sh_cd_const",
            ProtocolKind::CountShCdHigh => "count_sh_cd_high",
            ProtocolKind::CountAllNocdA => "count_all_nocd_a",
            ProtocolKind::CountAllNocdB => "count_all_nocd_b",
            ProtocolKind::CountAllCdA => "count_all_cd_a",
            ProtocolKind::EstUpperCenter => "est_upper_center",
            ProtocolKind::CountCenterNocdConst => "count_center_nocd_const",
            ProtocolKind::CountCenterNocdHigh => "count_center_nocd_high",
            ProtocolKind::CountCenterCdConst => "count_center_cd_const",
            ProtocolKind::CountCenterCdHigh => "count_center_cd_high",
        }
    }

    pub fn requires_cd(self) -> bool {
        matches!(
            self,
            ProtocolKind::EstUpperSh
                | ProtocolKind::CountShCdConst
                | ProtocolKind::CountShCdHigh
                | ProtocolKind::CountAllCdA
                | ProtocolKind::EstUpperCenter
                | ProtocolKind::CountCenterCdConst
                | ProtocolKind::CountCenterCdHigh
        )
    }

    pub fn variant(self) -> Variant {
        match self {
            ProtocolKind::CountShNocdConst
            | ProtocolKind::CountShNocdHigh
            | ProtocolKind::EstUpperSh
            | ProtocolKind::CountShCdConst
            | ProtocolKind::CountShCdHigh => Variant::SingleHop,
            ProtocolKind::CountAllNocdA | ProtocolKind::CountAllNocdB | ProtocolKind::CountAllCdA => {
                Variant::AllNodes
            }
            _ => Variant::Designated,
        }
    }

    /// The estimate is of `lg n` rather than of `n`.
    pub fn estimates_lg(self) -> bool {
        matches!(self, ProtocolKind::EstUpperSh | ProtocolKind::EstUpperCenter)
    }

    pub fn check_cd(self, collision_detection: bool) -> Result<(), ProtocolError> {
        if self.requires_cd() != collision_detection {
            return Err(ProtocolError::CdMismatch { protocol: self.name(), required: self.requires_cd() });
        }
        Ok(())
    }

    /// Everything that can be checked before a run.
    pub fn validate(
        self,
        topology: &Topology,
        params: &ProtocolParams,
        collision_detection: bool,
    ) -> Result<(), ProtocolError> {
        params.validate()?;
        self.check_cd(collision_detection)?;
        match self.variant() {
            Variant::SingleHop if !topology.is_complete() => Err(ProtocolError::RequiresSingleHop(self.name())),
            Variant::Designated if topology.designated().is_none() => {
                Err(ProtocolError::MissingDesignated(self.name()))
            }
            _ if self == ProtocolKind::CountAllNocdB && params.known_n.is_none() => {
                Err(ProtocolError::MissingParam { protocol: self.name(), param: "known_n" })
            }
            _ => Ok(()),
        }
    }

    /// One node per topology vertex, in id order.
    pub fn instantiate(
        self,
        topology: &Topology,
        params: &ProtocolParams,
        collision_detection: bool,
    ) -> Result<Vec<AnyNode>, ProtocolError> {
        self.validate(topology, params, collision_detection)?;
        let roles: Vec<CenterRole> = match topology.designated() {
            Some(w) => topology
                .nodes()
                .map(|u| {
                    if u == w {
                        CenterRole::Designated
                    } else if topology.is_adjacent(u, w) {
                        CenterRole::Neighbor
                    } else {
                        CenterRole::Bystander
                    }
                })
                .collect(),
            None => Vec::new(),
        };
        (0..topology.node_count())
            .map(|u| {
                let role = roles.get(u).copied().unwrap_or(CenterRole::Bystander);
                Ok(match self {
                    ProtocolKind::CountShNocdConst => AnyNode::CountShNoCdConst(CountShNoCdConst::new()),
                    ProtocolKind::CountShNocdHigh => AnyNode::CountShNoCdHigh(CountShNoCdHigh::new(params)),
                    ProtocolKind::EstUpperSh => AnyNode::EstUpperSh(EstUpperSh::new()),
                    ProtocolKind::CountShCdConst => AnyNode::CountShCdConst(CountShCdConst::new()),
                    ProtocolKind::CountShCdHigh => AnyNode::CountShCdHigh(CountShCdHigh::new(params)),
                    ProtocolKind::CountAllNocdA => AnyNode::CountAllNoCdA(CountAllNoCdA::new(params)),
                    ProtocolKind::CountAllNocdB => AnyNode::CountAllNoCdB(CountAllNoCdB::new(params)?),
                    ProtocolKind::CountAllCdA => AnyNode::CountAllCdA(CountAllCdA::new(params)),
                    ProtocolKind::EstUpperCenter => AnyNode::EstUpperCenter(EstUpperCenter::new(role)),
                    ProtocolKind::CountCenterNocdConst => {
                        AnyNode::CountCenterNoCd(CountCenterNoCd::constant(role, params))
                    }
                    ProtocolKind::CountCenterNocdHigh => AnyNode::CountCenterNoCd(CountCenterNoCd::high(role, params)),
                    ProtocolKind::CountCenterCdConst => AnyNode::CountCenterCdConst(CountCenterCdConst::new(role)),
                    ProtocolKind::CountCenterCdHigh => {
                        AnyNode::CountCenterCdHigh(CountCenterCdHigh::new(role, params))
                    }
                })
            })
            .collect()
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = ProtocolError;

    /// Accepts the snake_case name or any spelling that matches it once case
    /// and separators are ignored, e.g. `CountSHnoCDConst`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let squash = |x: &str| -> String {
            x.chars()
                .filter(|c| !matches!(c, '_' | '-' | ' '))
                .flat_map(char::to_lowercase)
                .collect()
        };
        let wanted = squash(s);
        ProtocolKind::ALL
            .into_iter()
            .find(|k| squash(k.name()) == wanted)
            .ok_or_else(|| ProtocolError::Unknown(s.to_string()))
    }
}

/// Any protocol node, for runs whose protocol is chosen at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyNode {
    CountShNoCdConst(CountShNoCdConst),
    CountShNoCdHigh(CountShNoCdHigh),
    EstUpperSh(EstUpperSh),
    CountShCdConst(CountShCdConst),
    CountShCdHigh(CountShCdHigh),
    CountAllNoCdA(CountAllNoCdA),
    CountAllNoCdB(CountAllNoCdB),
    CountAllCdA(CountAllCdA),
    EstUpperCenter(EstUpperCenter),
    CountCenterNoCd(CountCenterNoCd),
    CountCenterCdConst(CountCenterCdConst),
    CountCenterCdHigh(CountCenterCdHigh),
}

macro_rules! dispatch {
    ($self:expr, $p:ident => $body:expr) => {
        match $self {
            AnyNode::CountShNoCdConst($p) => $body,
            AnyNode::CountShNoCdHigh($p) => $body,
            AnyNode::EstUpperSh($p) => $body,
            AnyNode::CountShCdConst($p) => $body,
            AnyNode::CountShCdHigh($p) => $body,
            AnyNode::CountAllNoCdA($p) => $body,
            AnyNode::CountAllNoCdB($p) => $body,
            AnyNode::CountAllCdA($p) => $body,
            AnyNode::EstUpperCenter($p) => $body,
            AnyNode::CountCenterNoCd($p) => $body,
            AnyNode::CountCenterCdConst($p) => $body,
            AnyNode::CountCenterCdHigh($p) => $body,
        }
    };
}

impl Protocol for AnyNode {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction {
        dispatch!(self, p => p.act(rng))
    }

    fn absorb(&mut self, feedback: Option<Feedback>) {
        dispatch!(self, p => p.absorb(feedback))
    }

    fn status(&self) -> Status {
        dispatch!(self, p => p.status())
    }

    fn estimate(&self) -> Option<u64> {
        dispatch!(self, p => p.estimate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!("CountSHnoCDConst".parse::<ProtocolKind>().unwrap(), ProtocolKind::CountShNocdConst);
        assert_eq!("EstUpperCenter".parse::<ProtocolKind>().unwrap(), ProtocolKind::EstUpperCenter);
        assert!("count_sh".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn validation() {
        let clique = Topology::clique(4).unwrap();
        let star = Topology::star(3).unwrap();
        let params = ProtocolParams::default();
        assert!(ProtocolKind::CountShCdConst.validate(&clique, &params, true).is_ok());
        assert_eq!(
            ProtocolKind::CountShCdConst.validate(&clique, &params, false),
            Err(ProtocolError::CdMismatch { protocol: "count_sh_cd_const", required: true })
        );
        assert!(ProtocolKind::CountShNocdConst.validate(&clique, &params, true).is_err());
        assert!(matches!(
            ProtocolKind::CountShNocdConst.validate(&star, &params, false),
            Err(ProtocolError::RequiresSingleHop(_))
        ));
        assert!(matches!(
            ProtocolKind::EstUpperCenter.validate(&clique, &params, true),
            Err(ProtocolError::MissingDesignated(_))
        ));
        assert!(matches!(
            ProtocolKind::CountAllNocdB.validate(&clique, &params, false),
            Err(ProtocolError::MissingParam { .. })
        ));
    }

    #[test]
    fn roles_follow_designated_node() {
        let topo = Topology::from_edges(4, [(0, 1), (1, 2), (2, 3)], Some(1)).unwrap();
        let nodes = ProtocolKind::EstUpperCenter
            .instantiate(&topo, &ProtocolParams::default(), true)
            .unwrap();
        let roles: Vec<_> = nodes
            .iter()
            .map(|n| match n {
                AnyNode::EstUpperCenter(p) => p.role(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(
            roles,
            [CenterRole::Neighbor, CenterRole::Designated, CenterRole::Neighbor, CenterRole::Bystander]
        );
    }
}
