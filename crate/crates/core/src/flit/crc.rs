//! Flit integrity codes.
//!
//! 68B flits use CRC-16/CCITT (generator 0x1021). That generator has an
//! `(x + 1)` factor, so every odd-weight error is caught, and its Hamming
//! distance is 4 for messages far longer than 64 bytes. 256B flits use the
//! 64-bit XZ CRC; each latency-optimized half carries the low 48 bits of the
//! same CRC over its own bytes.

use crc::{Crc, CRC_16_IBM_3740, CRC_64_XZ};

const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);
const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

pub const CRC48_MASK: u64 = (1 << 48) - 1;

pub fn crc16(data: &[u8]) -> u16 {
    CRC16.checksum(data)
}

pub fn crc64(data: &[u8]) -> u64 {
    CRC64.checksum(data)
}

pub fn crc48(data: &[u8]) -> u64 {
    crc64(data) & CRC48_MASK
}
