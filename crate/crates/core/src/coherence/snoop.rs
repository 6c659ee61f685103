use crate::config::Protocol;

use super::{CoherenceState, MessageKind};

/// What a core does on observing a bus request for a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnoopResponse {
    pub new_state: CoherenceState,
    /// Messages this core puts on the bus in reply.
    pub replies: Vec<MessageKind>,
}

/// Reaction of a core in `state` to a snooped `request` (GetS, GetM or
/// Upgrade) from another core. Non-holders never act.
pub fn remote_snoop(_protocol: Protocol, state: CoherenceState, request: MessageKind) -> SnoopResponse {
    use CoherenceState::*;
    use MessageKind::*;
    let (new_state, replies) = match (request, state) {
        (_, Invalid) => (Invalid, vec![]),
        // remote read: a dirty owner supplies the block and writes it back
        (GetS, Modified) => (Shared, vec![Data, WritebackData]),
        (GetS, Exclusive) => (Shared, vec![]),
        (GetS, Shared) => (Shared, vec![]),
        (GetM | Upgrade, Modified) => (Invalid, vec![InvAck, Data]),
        (GetM | Upgrade, Exclusive | Shared) => (Invalid, vec![InvAck]),
        (other, s) => panic!("{other:?} is not a snoopable request (state {s:?})"),
    };
    SnoopResponse { new_state, replies }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CoherenceState::*;
    use MessageKind::*;

    #[test]
    fn getm_invalidates_sharer() {
        let r = remote_snoop(Protocol::Msi, Shared, GetM);
        assert_eq!(r.new_state, Invalid);
        assert_eq!(r.replies, vec![InvAck]);
    }

    #[test]
    fn gets_downgrades_owner() {
        let r = remote_snoop(Protocol::Msi, Modified, GetS);
        assert_eq!(r.new_state, Shared);
        assert_eq!(r.replies, vec![Data, WritebackData]);
        let r = remote_snoop(Protocol::Mesi, Exclusive, GetS);
        assert_eq!(r.new_state, Shared);
        assert!(r.replies.is_empty());
    }

    #[test]
    fn invalid_ignores_everything() {
        for req in [GetS, GetM, Upgrade] {
            let r = remote_snoop(Protocol::Mesi, Invalid, req);
            assert_eq!(r.new_state, Invalid);
            assert!(r.replies.is_empty());
        }
    }
}
