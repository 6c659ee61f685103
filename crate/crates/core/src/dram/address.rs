use serde::{Deserialize, Serialize};

use crate::config::{DramGeometry, Interleaving};

use super::DramError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DecodedAddress {
    pub channel: u64,
    pub rank: u64,
    pub bank: u64,
    pub row: u64,
    /// Byte offset within the row.
    pub column: u64,
}

#[derive(Debug, Clone, Copy)]
struct Widths {
    offset: u32,
    column_high: u32,
    channel: u32,
    rank: u32,
    bank: u32,
    row: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    ColumnHigh,
    Channel,
    Rank,
    Bank,
    Row,
}

fn widths(geometry: &DramGeometry, block_size: u64) -> Widths {
    let offset = block_size.trailing_zeros();
    Widths {
        offset,
        column_high: geometry.row_size.trailing_zeros().saturating_sub(offset),
        channel: geometry.channels.trailing_zeros(),
        rank: geometry.ranks.trailing_zeros(),
        bank: geometry.banks.trailing_zeros(),
        row: geometry.rows.trailing_zeros(),
    }
}

/// Field order above the block offset, low to high.
fn layout(scheme: Interleaving) -> [Field; 5] {
    use Field::*;
    match scheme {
        Interleaving::CacheBlockInterleave => [Channel, Rank, Bank, ColumnHigh, Row],
        Interleaving::RowInterleave => [ColumnHigh, Channel, Rank, Bank, Row],
        Interleaving::NonInterleaved => [ColumnHigh, Row, Channel, Rank, Bank],
    }
}

fn width_of(w: &Widths, f: Field) -> u32 {
    match f {
        Field::ColumnHigh => w.column_high,
        Field::Channel => w.channel,
        Field::Rank => w.rank,
        Field::Bank => w.bank,
        Field::Row => w.row,
    }
}

/// Total bytes addressable by the geometry.
pub fn capacity(geometry: &DramGeometry) -> u64 {
    geometry.channels * geometry.ranks * geometry.banks * geometry.rows * geometry.row_size
}

pub fn decode_address(
    address: u64,
    scheme: Interleaving,
    geometry: &DramGeometry,
    block_size: u64,
) -> Result<DecodedAddress, DramError> {
    let limit = capacity(geometry);
    if address >= limit {
        return Err(DramError::AddressOutOfRange { address, limit });
    }
    let w = widths(geometry, block_size);
    let offset = address & ((1 << w.offset) - 1);
    let mut rest = address >> w.offset;
    let mut out = DecodedAddress::default();
    let mut column_high = 0;
    for field in layout(scheme) {
        let bits = width_of(&w, field);
        let value = rest & ((1u64 << bits) - 1);
        rest >>= bits;
        match field {
            Field::ColumnHigh => column_high = value,
            Field::Channel => out.channel = value,
            Field::Rank => out.rank = value,
            Field::Bank => out.bank = value,
            Field::Row => out.row = value,
        }
    }
    out.column = (column_high << w.offset) | offset;
    Ok(out)
}

/// Inverse of [`decode_address`].
pub fn encode_address(decoded: &DecodedAddress, scheme: Interleaving, geometry: &DramGeometry, block_size: u64) -> u64 {
    let w = widths(geometry, block_size);
    let mut address = decoded.column & ((1 << w.offset) - 1);
    let mut shift = w.offset;
    for field in layout(scheme) {
        let value = match field {
            Field::ColumnHigh => decoded.column >> w.offset,
            Field::Channel => decoded.channel,
            Field::Rank => decoded.rank,
            Field::Bank => decoded.bank,
            Field::Row => decoded.row,
        };
        address |= value << shift;
        shift += width_of(&w, field);
    }
    address
}
