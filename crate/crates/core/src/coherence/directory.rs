use serde::{Deserialize, Serialize};

use super::{CoherenceMessage, CoherenceState, Endpoint, MessageKind};

/// Presence bits for one block. Kept at the LLC slice that owns the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectoryEntry {
    pub block: u64,
    pub sharers: u64,
    /// The M or E holder, if any; then `sharers` is exactly that core.
    pub owner: Option<usize>,
}

impl DirectoryEntry {
    /// Rebuilds the entry from per-core states; `None` when nobody holds
    /// the block.
    pub fn from_states(block: u64, states: &[CoherenceState]) -> Option<Self> {
        let mut sharers = 0u64;
        let mut owner = None;
        for (core, s) in states.iter().enumerate() {
            if s.is_valid() {
                sharers |= 1 << core;
            }
            if s.is_owner() {
                owner = Some(core);
            }
        }
        (sharers != 0).then_some(DirectoryEntry { block, sharers, owner })
    }

    pub fn has(&self, core: usize) -> bool {
        self.sharers & (1 << core) != 0
    }

    pub fn sharer_list(&self) -> Vec<usize> {
        (0..64).filter(|&c| self.has(c)).collect()
    }

    pub fn is_consistent(&self) -> bool {
        match self.owner {
            Some(o) => self.sharers == 1 << o,
            None => self.sharers != 0,
        }
    }
}

/// Follow-up messages the directory sends for `request`. Only cores with
/// their presence bit set are contacted. `owner_state` is the current state
/// of the entry's owner, if it has one.
///
/// GetS reaches the owner only when it holds the block modified; a clean
/// exclusive owner is downgraded in place and the LLC supplies the data.
pub fn directory_dispatch(
    entry: Option<&DirectoryEntry>,
    request: &CoherenceMessage,
    owner_state: CoherenceState,
) -> Vec<CoherenceMessage> {
    let Some(entry) = entry else {
        return Vec::new();
    };
    let Endpoint::Core(requester) = request.src else {
        return Vec::new();
    };
    match request.kind {
        MessageKind::GetS => match entry.owner {
            Some(o) if o != requester && owner_state == CoherenceState::Modified => {
                vec![CoherenceMessage::new(
                    MessageKind::GetS,
                    entry.block,
                    Endpoint::Directory,
                    Endpoint::Core(o),
                )]
            }
            _ => Vec::new(),
        },
        MessageKind::GetM | MessageKind::Upgrade => entry
            .sharer_list()
            .into_iter()
            .filter(|&c| c != requester)
            .map(|c| CoherenceMessage::new(MessageKind::Inv, entry.block, Endpoint::Directory, Endpoint::Core(c)))
            .collect(),
        _ => Vec::new(),
    }
}
