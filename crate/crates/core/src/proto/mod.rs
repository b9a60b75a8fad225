//! Per-node protocol state machines.
//!
//! A node never learns its own id: it is built from [`ProtocolParams`] (and,
//! for the designated-node variants, its [`CenterRole`]) and afterwards sees
//! only its random stream and the feedback of slots in which it listened.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::message::{Feedback, SlotAction};
use crate::sim::rng::NodeRng;

pub mod designated;
pub mod kind;
pub mod multihop;
pub mod singlehop;

pub use designated::{
    CenterRole, CountCenterCdConst, CountCenterCdHigh, CountCenterNoCd, EstUpperCenter,
};
pub use kind::{AnyNode, ProtocolKind, Variant};
pub use multihop::{CountAllCdA, CountAllNoCdA, CountAllNoCdB};
pub use singlehop::{CountShCdConst, CountShCdHigh, CountShNoCdConst, CountShNoCdHigh, EstUpperSh};

/// `1 / (2e)` to 15 significant digits.
pub const INFORMED_THRESHOLD: f64 = 0.183939720585721;
pub const ALL_NODES_THRESHOLD: f64 = 0.1;
pub const SUBITERATION_THRESHOLD: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    /// Finished. Counting nodes carry a positive estimate; helper nodes
    /// (neighbors of a designated node, or nodes that never crossed their
    /// threshold before a forced stop) finish without one.
    Done(Option<u64>),
    /// Binary search ran out of candidates.
    Aborted,
}

impl Status {
    pub fn is_running(&self) -> bool {
        matches!(self, Status::Running)
    }

    pub fn estimate(&self) -> Option<u64> {
        match self {
            Status::Done(e) => *e,
            _ => None,
        }
    }
}

/// One node's protocol logic.
///
/// The engine calls `act` once per slot while the node is running, then
/// `absorb` with `Some(feedback)` if the node listened and `None` otherwise.
pub trait Protocol {
    fn act(&mut self, rng: &mut NodeRng) -> SlotAction;
    fn absorb(&mut self, feedback: Option<Feedback>);
    fn status(&self) -> Status;

    /// Current estimate, including ones latched by protocols that keep
    /// running after estimating.
    fn estimate(&self) -> Option<u64> {
        self.status().estimate()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("unknown protocol `{0}`")]
    Unknown(String),
    #[error("protocol `{protocol}` requires parameter `{param}`")]
    MissingParam { protocol: &'static str, param: &'static str },
    #[error("protocol `{0}` requires a single-hop (complete) topology")]
    RequiresSingleHop(&'static str),
    #[error("protocol `{0}` requires a topology with a designated node")]
    MissingDesignated(&'static str),
    #[error("protocol `{protocol}` requires collision detection {}", if *.required { "on" } else { "off" })]
    CdMismatch { protocol: &'static str, required: bool },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Tunable constants shared by all protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Scales every phase whose length grows with the iteration index.
    pub phase_multiplier: u32,
    /// Random-walk iterations per unit of the upper bound's exponent.
    pub walk_multiplier: u32,
    /// Listening slots per iteration of the constant-probability designated
    /// counter.
    pub center_l: u32,
    /// Double counting: iterations per `lg N`.
    pub double_count_iterations: u32,
    /// Double counting: slots per sub-iteration per `lg N`.
    pub double_count_subiteration: u32,
    pub informed_threshold: f64,
    pub allnodes_threshold: f64,
    pub subiter_threshold: f64,
    pub known_n: Option<u64>,
    pub known_n_delta: Option<u64>,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            phase_multiplier: 24,
            walk_multiplier: 48,
            center_l: 32,
            double_count_iterations: 8,
            double_count_subiteration: 8,
            informed_threshold: INFORMED_THRESHOLD,
            allnodes_threshold: ALL_NODES_THRESHOLD,
            subiter_threshold: SUBITERATION_THRESHOLD,
            known_n: None,
            known_n_delta: None,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let positive = [
            ("phase_multiplier", self.phase_multiplier),
            ("walk_multiplier", self.walk_multiplier),
            ("center_l", self.center_l),
            ("double_count_iterations", self.double_count_iterations),
            ("double_count_subiteration", self.double_count_subiteration),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ProtocolError::InvalidParam(format!("{name} must be >= 1")));
        }
        for (name, t) in [
            ("informed_threshold", self.informed_threshold),
            ("allnodes_threshold", self.allnodes_threshold),
            ("subiter_threshold", self.subiter_threshold),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(ProtocolError::InvalidParam(format!("{name} must be in (0, 1]")));
            }
        }
        if self.known_n.is_some_and(|n| n < 2) {
            return Err(ProtocolError::InvalidParam("known_n must be >= 2".into()));
        }
        if self.known_n_delta.is_some_and(|n| n < 1) {
            return Err(ProtocolError::InvalidParam("known_n_delta must be >= 1".into()));
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ProtocolError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ProtocolError> {
            value
                .parse()
                .map_err(|_| ProtocolError::InvalidParam(format!("{key}={value}")))
        }
        let mut next = self.clone();
        match key {
            "phase_multiplier" => next.phase_multiplier = num(key, value)?,
            "walk_multiplier" => next.walk_multiplier = num(key, value)?,
            "center_l" => next.center_l = num(key, value)?,
            "double_count_iterations" => next.double_count_iterations = num(key, value)?,
            "double_count_subiteration" => next.double_count_subiteration = num(key, value)?,
            "informed_threshold" => next.informed_threshold = num(key, value)?,
            "allnodes_threshold" => next.allnodes_threshold = num(key, value)?,
            "subiter_threshold" => next.subiter_threshold = num(key, value)?,
            "known_n" => next.known_n = Some(num(key, value)?),
            "known_n_delta" => next.known_n_delta = Some(num(key, value)?),
            _ => return Err(ProtocolError::InvalidParam(format!("unknown parameter `{key}`"))),
        }
        next.validate()?;
        *self = next;
        Ok(())
    }
}

/// `2^k`, saturating at `u64::MAX`.
#[inline]
pub fn pow2(k: u32) -> u64 {
    1u64.checked_shl(k).unwrap_or(u64::MAX)
}

/// `ceil(lg x)` for `x >= 1`.
#[inline]
pub fn ceil_lg(x: u64) -> u32 {
    debug_assert!(x >= 1);
    64 - (x - 1).leading_zeros()
}

/// Fraction test used at the end of counting phases. Zero listening slots
/// never pass.
#[inline]
pub(crate) fn reaches(hits: u32, listens: u32, threshold: f64) -> bool {
    listens != 0 && hits as f64 / listens as f64 >= threshold
}
