use serde::{Deserialize, Serialize};

/// The fixed message vocabulary shared by every protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Beacon,
    Stop,
    Informed,
    OverEst,
    UnderEst,
    Continue,
    SilenceEcho,
    NoiseEcho,
}

impl MessageKind {
    /// Kinds that may carry a small integer payload.
    pub fn carries_payload(self) -> bool {
        matches!(self, MessageKind::Stop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<u64>,
}

impl Message {
    pub const fn new(kind: MessageKind) -> Self {
        Message { kind, payload: None }
    }

    /// Panics if `kind` does not carry a payload.
    pub fn with_payload(kind: MessageKind, payload: u64) -> Self {
        assert!(kind.carries_payload(), "{kind:?} carries no payload");
        Message {
            kind,
            payload: Some(payload),
        }
    }

    pub fn is(&self, kind: MessageKind) -> bool {
        self.kind == kind
    }
}

impl From<MessageKind> for Message {
    fn from(kind: MessageKind) -> Self {
        Message::new(kind)
    }
}

/// What a node does in one slot. Half-duplex: a node either broadcasts or
/// listens, never both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotAction {
    Broadcast(Message),
    Listen,
    Idle,
}

impl SlotAction {
    pub fn broadcast(kind: MessageKind) -> Self {
        SlotAction::Broadcast(Message::new(kind))
    }

    pub fn is_listen(&self) -> bool {
        matches!(self, SlotAction::Listen)
    }

    pub fn message(&self) -> Option<Message> {
        match self {
            SlotAction::Broadcast(m) => Some(*m),
            _ => None,
        }
    }
}

/// What a listener observes on the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Silence,
    Received(Message),
    Noise,
}

impl Feedback {
    pub fn is_silence(&self) -> bool {
        matches!(self, Feedback::Silence)
    }

    pub fn received(&self) -> Option<Message> {
        match self {
            Feedback::Received(m) => Some(*m),
            _ => None,
        }
    }

    /// True when a message of `kind` was received cleanly.
    pub fn got(&self, kind: MessageKind) -> bool {
        matches!(self, Feedback::Received(m) if m.kind == kind)
    }
}
