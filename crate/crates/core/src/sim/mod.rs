//! Synchronous slotted radio channel and the simulation engine.

pub mod channel;
pub mod engine;
pub mod message;
pub mod rng;
pub mod trace;

pub use channel::resolve_channel;
pub use engine::{run_simulation, NodeOutcome, SimConfig, SimError, Simulation, SlotView, TrialRecord};
pub use message::{Feedback, Message, MessageKind, SlotAction};
pub use rng::{derive_seed, node_rng, NodeRng};
pub use trace::{Trace, TraceSlot, TraceViolation};
