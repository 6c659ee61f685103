use serde::{Deserialize, Serialize};

use crate::config::{Interconnect, SliceDecoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceGeometry {
    pub offset_bits: u32,
    pub slice_bits: u32,
    pub decoder: SliceDecoder,
}

/// Which LLC slice owns `address`.
///
/// BitSelect takes the lowest `slice_bits` of the block number. XorHash
/// folds the whole block number into `slice_bits` by XOR-ing successive
/// groups of that width.
pub fn slice_of(address: u64, geometry: &SliceGeometry) -> usize {
    let bits = geometry.slice_bits;
    if bits == 0 {
        return 0;
    }
    let mask = (1u64 << bits) - 1;
    let mut block = address >> geometry.offset_bits;
    match geometry.decoder {
        SliceDecoder::BitSelect => (block & mask) as usize,
        SliceDecoder::XorHash => {
            let mut acc = 0;
            while block != 0 {
                acc ^= block & mask;
                block >>= bits;
            }
            acc as usize
        }
    }
}

/// Slices sit on ring stops; core `c` attaches at stop `c mod stops`, so a
/// core's local slice is zero hops away.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingLayout {
    pub stops: usize,
    pub hop_latency: u64,
    pub attach: Vec<usize>,
}

impl RingLayout {
    pub fn tiled(cores: usize, slices: usize, hop_latency: u64) -> Self {
        RingLayout {
            stops: slices,
            hop_latency,
            attach: (0..cores).map(|c| c % slices).collect(),
        }
    }

    /// Minimal hop count in either direction.
    pub fn hops(&self, core: usize, slice: usize) -> u64 {
        let a = self.attach[core];
        let d = a.abs_diff(slice);
        d.min(self.stops - d) as u64
    }
}

/// LLC access latency from `core` to `slice`.
pub fn nuca_latency(
    core: usize,
    slice: usize,
    base_latency: u64,
    interconnect: &Interconnect,
    ring: &RingLayout,
) -> u64 {
    match *interconnect {
        Interconnect::Bus { bus_cycles } => base_latency + bus_cycles,
        Interconnect::Ring { .. } => base_latency + ring.hops(core, slice) * ring.hop_latency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(decoder: SliceDecoder) -> SliceGeometry {
        SliceGeometry {
            offset_bits: 6,
            slice_bits: 2,
            decoder,
        }
    }

    /// Hand fold: split into 2-bit groups from the least significant end
    /// and XOR them.
    fn hand_fold(block: u64) -> usize {
        let groups: Vec<u64> = (0..32).map(|i| (block >> (2 * i)) & 0b11).collect();
        groups.iter().fold(0, |a, g| a ^ g) as usize
    }

    #[test]
    fn bit_select_examples() {
        let g = geo(SliceDecoder::BitSelect);
        assert_eq!(slice_of(0x0, &g), 0);
        assert_eq!(slice_of(0x40, &g), 1);
        assert_eq!(slice_of(0x80, &g), 2);
        assert_eq!(slice_of(0x100, &g), 0);
    }

    #[test]
    fn xor_hash_examples() {
        let g = geo(SliceDecoder::XorHash);
        assert_eq!(slice_of(0x40, &g), 1);
        // 0x1040 >> 6 = 0b100_0001 -> groups 01,00,00,01 -> 0
        assert_eq!(hand_fold(0x41), 0);
        assert_eq!(slice_of(0x1040, &g), 0);
        for addr in (0..1 << 16).step_by(64) {
            assert_eq!(slice_of(addr, &g), hand_fold(addr >> 6));
        }
    }

    #[test]
    fn bit_select_sweep_is_uniform() {
        let g = geo(SliceDecoder::BitSelect);
        let mut counts = [0; 4];
        for b in 0..4 * 25u64 {
            counts[slice_of(b * 64, &g)] += 1;
        }
        assert_eq!(counts, [25; 4]);
    }

    #[test]
    fn ring_latencies() {
        let ring = RingLayout::tiled(4, 4, 3);
        let ic = Interconnect::Ring { hop_latency: 3 };
        assert_eq!(nuca_latency(0, 0, 30, &ic, &ring), 30);
        assert_eq!(nuca_latency(0, 2, 30, &ic, &ring), 36);
        assert_eq!(nuca_latency(0, 3, 30, &ic, &ring), 33);
        assert_eq!(nuca_latency(2, 2, 30, &ic, &ring), 30);
        let bus = Interconnect::Bus { bus_cycles: 8 };
        assert_eq!(nuca_latency(0, 3, 30, &bus, &ring), 38);
    }
}
