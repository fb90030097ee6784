//! Redundant 2-byte protocol-ID for 68B flits.
//!
//! Eight 8-bit codewords (four flit kinds, each with and without the EDS
//! marker) with pairwise Hamming distance 4. The 8-bit code is sent twice.
//! A half within distance 1 of a codeword is corrected; anything farther, or
//! two halves that correct to different codewords, is uncorrectable.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Io,
    CacheMem,
    Almp,
    Null,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Io,
        ProtocolKind::CacheMem,
        ProtocolKind::Almp,
        ProtocolKind::Null,
    ];
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Io => "IO",
            ProtocolKind::CacheMem => "CACHEMEM",
            ProtocolKind::Almp => "ALMP",
            ProtocolKind::Null => "NULL",
        })
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "IO" => Ok(ProtocolKind::Io),
            "CACHEMEM" => Ok(ProtocolKind::CacheMem),
            "ALMP" => Ok(ProtocolKind::Almp),
            "NULL" => Ok(ProtocolKind::Null),
            _ => Err(format!("unknown protocol kind {s}")),
        }
    }
}

/// Codewords indexed by `(kind, eds)`. (NULL, no EDS) is the all-zero baseline.
pub const CODEWORDS: [(ProtocolKind, bool, u8); 8] = [
    (ProtocolKind::Null, false, 0x00),
    (ProtocolKind::Null, true, 0x0f),
    (ProtocolKind::Io, false, 0x33),
    (ProtocolKind::Io, true, 0x3c),
    (ProtocolKind::CacheMem, false, 0x55),
    (ProtocolKind::CacheMem, true, 0x5a),
    (ProtocolKind::Almp, false, 0x66),
    (ProtocolKind::Almp, true, 0x69),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Uncorrectable;

pub fn codeword(kind: ProtocolKind, eds: bool) -> u8 {
    CODEWORDS
        .iter()
        .find(|(k, e, _)| *k == kind && *e == eds)
        .map(|c| c.2)
        .expect("every kind has two codewords")
}

pub fn encode_protocol_id(kind: ProtocolKind, eds: bool) -> [u8; 2] {
    let c = codeword(kind, eds);
    [c, c]
}

/// Nearest codeword within distance 1, if any.
pub fn decode_byte(b: u8) -> Option<(ProtocolKind, bool)> {
    CODEWORDS
        .iter()
        .find(|(_, _, c)| (b ^ c).count_ones() <= 1)
        .map(|(k, e, _)| (*k, *e))
}

pub fn decode_protocol_id(bytes: [u8; 2]) -> Result<(ProtocolKind, bool), Uncorrectable> {
    match (decode_byte(bytes[0]), decode_byte(bytes[1])) {
        (Some(a), Some(b)) if a == b => Ok(a),
        _ => Err(Uncorrectable),
    }
}
