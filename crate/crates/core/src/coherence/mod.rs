//! MSI and MESI over a snoopy bus or a sharer-set directory.
//!
//! Transactions are atomic: a request runs to completion, and every core's
//! state is stable before and after it. The functions here are pure; the
//! engine applies their results to the caches.

mod directory;
mod protocol;
mod snoop;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use directory::{directory_dispatch, DirectoryEntry};
pub use protocol::{core_request, evict, Access, DataSource, Transaction};
pub use snoop::{remote_snoop, SnoopResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoherenceState {
    Modified,
    Exclusive,
    Shared,
    Invalid,
}

impl CoherenceState {
    pub fn is_valid(self) -> bool {
        self != CoherenceState::Invalid
    }

    /// M or E: sole holder of the block.
    pub fn is_owner(self) -> bool {
        matches!(self, CoherenceState::Modified | CoherenceState::Exclusive)
    }

    pub fn letter(self) -> char {
        match self {
            CoherenceState::Modified => 'M',
            CoherenceState::Exclusive => 'E',
            CoherenceState::Shared => 'S',
            CoherenceState::Invalid => 'I',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    GetS,
    GetM,
    Upgrade,
    Inv,
    InvAck,
    Data,
    WritebackData,
}

impl MessageKind {
    pub const ALL: [MessageKind; 7] = [
        MessageKind::GetS,
        MessageKind::GetM,
        MessageKind::Upgrade,
        MessageKind::Inv,
        MessageKind::InvAck,
        MessageKind::Data,
        MessageKind::WritebackData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::GetS => "GetS",
            MessageKind::GetM => "GetM",
            MessageKind::Upgrade => "Upgrade",
            MessageKind::Inv => "Inv",
            MessageKind::InvAck => "InvAck",
            MessageKind::Data => "Data",
            MessageKind::WritebackData => "WritebackData",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    Core(usize),
    Directory,
    /// The shared LLC / memory side.
    Llc,
    Broadcast,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Core(c) => write!(f, "C{c}"),
            Endpoint::Directory => f.write_str("DIR"),
            Endpoint::Llc => f.write_str("LLC"),
            Endpoint::Broadcast => f.write_str("BCAST"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoherenceMessage {
    pub kind: MessageKind,
    pub block: u64,
    pub src: Endpoint,
    pub dst: Endpoint,
}

impl CoherenceMessage {
    pub fn new(kind: MessageKind, block: u64, src: Endpoint, dst: Endpoint) -> Self {
        CoherenceMessage { kind, block, src, dst }
    }
}

/// Single writer / multiple readers: at most one core in M or E, and an
/// M or E holder excludes every other valid copy.
pub fn swmr_holds(states: &[CoherenceState]) -> bool {
    let owners = states.iter().filter(|s| s.is_owner()).count();
    let valid = states.iter().filter(|s| s.is_valid()).count();
    owners == 0 || (owners == 1 && valid == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use CoherenceState::*;

    #[test]
    fn swmr_examples() {
        assert!(swmr_holds(&[Invalid, Invalid]));
        assert!(swmr_holds(&[Shared, Shared, Shared]));
        assert!(swmr_holds(&[Modified, Invalid]));
        assert!(swmr_holds(&[Invalid, Exclusive]));
        assert!(!swmr_holds(&[Modified, Shared]));
        assert!(!swmr_holds(&[Modified, Modified]));
        assert!(!swmr_holds(&[Exclusive, Shared]));
    }
}
