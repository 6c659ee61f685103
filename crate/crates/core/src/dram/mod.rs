//! Channels, banks and row buffers behind the LLC.

mod address;
mod amat;
mod audit;
mod controller;
mod scheduler;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use address::{capacity, decode_address, encode_address, DecodedAddress};
pub use amat::{amat_summary, AccessStats, AmatReport, LevelStats};
pub use audit::{audit_commands, Violation};
pub use controller::{service, Completion, DramController, DramStats, RowOutcome, ServiceResult, ThreadDramStats};
pub use scheduler::{schedule_next, FairnessTracker, ScheduleContext};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DramError {
    #[error("address {address:#x} beyond memory capacity {limit:#x}")]
    AddressOutOfRange { address: u64, limit: u64 },
    #[error("no memory accesses recorded")]
    NoAccesses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequestKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemRequest {
    pub id: u64,
    pub address: u64,
    pub decoded: DecodedAddress,
    /// rank * banks + bank
    pub bank_slot: usize,
    pub thread: usize,
    pub arrival: u64,
    pub kind: RequestKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankState {
    pub open_row: Option<u64>,
    /// First cycle the bank accepts a new command sequence.
    pub ready: u64,
    pub last_act: Option<u64>,
    pub last_cas: Option<u64>,
    pub last_pre: Option<u64>,
    pub last_access_end: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommandKind {
    Act,
    Rd,
    Wr,
    Pre,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::Rd => "RD",
            CommandKind::Wr => "WR",
            CommandKind::Pre => "PRE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DramCommand {
    pub cycle: u64,
    pub channel: u64,
    pub bank: u64,
    pub kind: CommandKind,
    pub row: u64,
    pub column: Option<u64>,
}

impl fmt::Display for DramCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.cycle,
            self.channel,
            self.bank,
            self.kind.name(),
            self.row
        )?;
        if let Some(col) = self.column {
            write!(f, "/{col}")?;
        }
        Ok(())
    }
}
