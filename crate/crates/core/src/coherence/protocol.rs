use crate::config::{Protocol, Transport};

use super::{
    directory_dispatch, remote_snoop, CoherenceMessage, CoherenceState, DirectoryEntry, Endpoint, MessageKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    /// The requester already has the data (hit or permission upgrade).
    Local,
    /// LLC, or memory behind it.
    Llc,
    /// Another core's modified copy.
    Core(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub final_states: Vec<CoherenceState>,
    pub messages: Vec<CoherenceMessage>,
    pub data_source: DataSource,
    /// Cores whose copies were invalidated.
    pub invalidated: Vec<usize>,
    /// Core that wrote its modified block back to the LLC on a downgrade.
    pub owner_writeback: Option<usize>,
}

impl Transaction {
    pub fn count(&self, kind: MessageKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }

    /// True when another core's hierarchy had to act.
    pub fn involved_remote(&self) -> bool {
        !self.invalidated.is_empty() || matches!(self.data_source, DataSource::Core(_))
    }
}

fn hit(states: &[CoherenceState]) -> Transaction {
    Transaction {
        final_states: states.to_vec(),
        messages: Vec::new(),
        data_source: DataSource::Local,
        invalidated: Vec::new(),
        owner_writeback: None,
    }
}

/// Runs one access by `requester` to `block` to completion.
///
/// `states` holds every core's current state for the block. `directory`
/// is the block's directory entry and is consulted only by the directory
/// transport.
pub fn core_request(
    protocol: Protocol,
    transport: Transport,
    requester: usize,
    access: Access,
    block: u64,
    states: &[CoherenceState],
    directory: Option<&DirectoryEntry>,
) -> Transaction {
    use CoherenceState::*;
    let me = Endpoint::Core(requester);
    let current = states[requester];

    let request_kind = match (access, current) {
        (Access::Read, Modified | Exclusive | Shared) | (Access::Write, Modified) => return hit(states),
        (Access::Write, Exclusive) => {
            // silent upgrade
            let mut t = hit(states);
            t.final_states[requester] = Modified;
            return t;
        }
        (Access::Read, Invalid) => MessageKind::GetS,
        (Access::Write, Shared) => MessageKind::Upgrade,
        (Access::Write, Invalid) => MessageKind::GetM,
    };

    let mut t = Transaction {
        final_states: states.to_vec(),
        messages: Vec::new(),
        data_source: DataSource::Local,
        invalidated: Vec::new(),
        owner_writeback: None,
    };

    // cores that will see the request
    let targets: Vec<usize> = match transport {
        Transport::Snoopy => {
            t.messages
                .push(CoherenceMessage::new(request_kind, block, me, Endpoint::Broadcast));
            (0..states.len()).filter(|&c| c != requester).collect()
        }
        Transport::Directory => {
            let request = CoherenceMessage::new(request_kind, block, me, Endpoint::Directory);
            t.messages.push(request);
            let owner_state = directory.and_then(|e| e.owner).map_or(Invalid, |o| states[o]);
            let follow_ups = directory_dispatch(directory, &request, owner_state);
            t.messages.extend(follow_ups.iter().copied());
            if request_kind == MessageKind::GetS {
                // a clean exclusive owner is downgraded in place
                for (c, s) in states.iter().enumerate() {
                    if *s == Exclusive && c != requester {
                        t.final_states[c] = Shared;
                    }
                }
            }
            follow_ups
                .iter()
                .filter_map(|m| match m.dst {
                    Endpoint::Core(c) => Some(c),
                    _ => None,
                })
                .collect()
        }
    };

    for c in targets {
        let resp = remote_snoop(protocol, states[c], request_kind);
        t.final_states[c] = resp.new_state;
        if states[c].is_valid() && resp.new_state == Invalid {
            t.invalidated.push(c);
        }
        for reply in resp.replies {
            let from = Endpoint::Core(c);
            match reply {
                MessageKind::Data => {
                    t.data_source = DataSource::Core(c);
                    t.messages.push(CoherenceMessage::new(reply, block, from, me));
                }
                MessageKind::WritebackData => {
                    t.owner_writeback = Some(c);
                    t.messages
                        .push(CoherenceMessage::new(reply, block, from, Endpoint::Llc));
                }
                _ => t.messages.push(CoherenceMessage::new(reply, block, from, me)),
            }
        }
    }

    let needs_data = request_kind != MessageKind::Upgrade;
    if needs_data && t.data_source == DataSource::Local {
        t.data_source = DataSource::Llc;
        t.messages
            .push(CoherenceMessage::new(MessageKind::Data, block, Endpoint::Llc, me));
    }

    t.final_states[requester] = match access {
        Access::Write => Modified,
        Access::Read => {
            let others_hold = t
                .final_states
                .iter()
                .enumerate()
                .any(|(c, s)| c != requester && s.is_valid());
            if protocol == Protocol::Mesi && !others_hold {
                Exclusive
            } else {
                Shared
            }
        }
    };
    t
}

/// Messages generated when `core` drops its copy in `state`. Only modified
/// data travels; clean copies leave silently.
pub fn evict(core: usize, block: u64, state: CoherenceState) -> Vec<CoherenceMessage> {
    if state == CoherenceState::Modified {
        vec![CoherenceMessage::new(
            MessageKind::WritebackData,
            block,
            Endpoint::Core(core),
            Endpoint::Llc,
        )]
    } else {
        Vec::new()
    }
}
