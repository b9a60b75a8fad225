use super::message::{Feedback, Message};
use crate::topology::NodeId;

/// Resolve what `listener` hears given the neighbors broadcasting this slot.
///
/// Zero broadcasters is silence, exactly one delivers its message, and two or
/// more collide: noise with collision detection, silence without it.
pub fn resolve_channel<'a, I>(_listener: NodeId, broadcasters: I, collision_detection: bool) -> Feedback
where
    I: IntoIterator<Item = &'a (NodeId, Message)>,
{
    let mut iter = broadcasters.into_iter();
    match (iter.next(), iter.next()) {
        (None, _) => Feedback::Silence,
        (Some((_, msg)), None) => Feedback::Received(*msg),
        (Some(_), Some(_)) => collision(collision_detection),
    }
}

/// Same truth table keyed on a saturated broadcaster count (0, 1, or 2+).
#[inline]
pub(crate) fn resolve_count(count: u32, msg: Option<Message>, collision_detection: bool) -> Feedback {
    match count {
        0 => Feedback::Silence,
        1 => Feedback::Received(msg.expect("single broadcaster carries a message")),
        _ => collision(collision_detection),
    }
}

#[inline]
fn collision(collision_detection: bool) -> Feedback {
    if collision_detection {
        Feedback::Noise
    } else {
        Feedback::Silence
    }
}
