//! Synchronous radio network simulation and approximate neighbor counting.
//!
//! [`sim`] runs slotted simulations with or without collision detection,
//! [`topology`] builds the graphs they run on, [`proto`] holds one state
//! machine per counting protocol and [`harness`] runs Monte Carlo
//! experiments against closed-form channel probabilities.

pub mod harness;
pub mod proto;
pub mod sim;
pub mod topology;

pub use proto::{AnyNode, Protocol, ProtocolError, ProtocolKind, ProtocolParams, Status};
pub use sim::{run_simulation, Feedback, Message, MessageKind, SimConfig, Simulation, SlotAction, Trace, TrialRecord};
pub use topology::{NodeId, Topology, TopologyError};

/// Floating-point probability used by the simulator-facing oracles.
pub type Prob = f64;
/// Exact probability for enumeration cross-checks.
pub type ExactProb = num_rational::BigRational;
