//! Flit encoding, decoding and slot packing for the three flit modes.
//!
//! Byte layouts:
//!
//! * `F68`: protocol-ID (2) | four 16-byte slots (64) | CRC-16 (2).
//! * `F256`: hdr (2) | H slot (14) | 14 G slots (224) | G-data mask (2) |
//!   CRC-64 (8) | FEC (6).
//! * `F128LO`, even half: hdr (2) | H (14) | 6 G (96) | HS (10) | CRC-48 (6);
//!   odd half: 7 G (112) | G-data mask (4) | FEC (6) | CRC-48 (6).
//!
//! A header-carrying G slot starts with a format byte (class code in bits
//! 0-1, header count in bits 2-4). The H slot of a 256B flit starts with a
//! 16-bit prefix holding the H format, the HS format and, in LO mode, the
//! data mask for the even-half G slots. In 68B mode the H slot starts with a
//! byte holding the G-data mask and the count of all-data flits that follow,
//! then the H format byte.

pub mod crc;
pub mod gen;
pub mod packer;
pub mod protocol_id;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use protocol_id::{decode_protocol_id, encode_protocol_id, ProtocolKind, Uncorrectable};

pub const SLOT_BYTES: usize = 16;
pub const HS_BYTES: usize = 10;
pub const MAX_HEADERS_PER_SLOT: usize = 4;
pub const FEC_BYTES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlitMode {
    F68,
    F256,
    F128Lo,
}

impl FlitMode {
    pub const ALL: [FlitMode; 3] = [FlitMode::F68, FlitMode::F256, FlitMode::F128Lo];

    pub fn flit_bytes(self) -> usize {
        match self {
            FlitMode::F68 => 68,
            FlitMode::F256 | FlitMode::F128Lo => 256,
        }
    }

    /// Bytes available to opaque IO/ALMP payloads.
    pub fn payload_bytes(self) -> usize {
        match self {
            FlitMode::F68 => 64,
            FlitMode::F256 => 240,
            FlitMode::F128Lo => 236,
        }
    }

    /// Slot kinds of a header-carrying flit, in wire order.
    pub fn slot_kinds(self) -> Vec<SlotKind> {
        use SlotKind::*;
        match self {
            FlitMode::F68 => vec![H, G, G, G],
            FlitMode::F256 => std::iter::once(H).chain(std::iter::repeat_n(G, 14)).collect(),
            FlitMode::F128Lo => {
                let mut v = vec![H];
                v.extend(std::iter::repeat_n(G, 6));
                v.push(Hs);
                v.extend(std::iter::repeat_n(G, 7));
                v
            }
        }
    }

    pub fn g_slots(self) -> usize {
        match self {
            FlitMode::F68 => 3,
            FlitMode::F256 => 14,
            FlitMode::F128Lo => 13,
        }
    }
}

impl fmt::Display for FlitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlitMode::F68 => "F68",
            FlitMode::F256 => "F256",
            FlitMode::F128Lo => "F128LO",
        })
    }
}

impl FromStr for FlitMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "F68" | "68" | "68B" => Ok(FlitMode::F68),
            "F256" | "256" | "256B" => Ok(FlitMode::F256),
            "F128LO" | "128LO" | "LO" | "256LO" => Ok(FlitMode::F128Lo),
            _ => Err(format!("unknown flit mode {s}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotKind {
    /// Header-only.
    H,
    /// Header or data.
    G,
    /// 10-byte small-header slot (256B modes only).
    Hs,
}

/// Header size classes. All headers sharing a slot have the same class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeaderClass {
    /// Requests and data-carrying requests: channel, opcode, tag, line, flags.
    Full,
    /// Responses (NDR, DRS, BISnp/BIRsp, D2H/H2D Rsp).
    Small,
    /// 24-bit H2D/D2H data header.
    DataHdr,
}

impl HeaderClass {
    pub const ALL: [HeaderClass; 3] = [HeaderClass::Full, HeaderClass::Small, HeaderClass::DataHdr];

    pub fn width(self, mode: FlitMode) -> usize {
        match (self, mode) {
            (HeaderClass::Full, _) => 10,
            // 68B response headers carry extra credit-return fields
            (HeaderClass::Small, FlitMode::F68) => 7,
            (HeaderClass::Small, _) => 5,
            (HeaderClass::DataHdr, _) => 3,
        }
    }

    fn code(self) -> u8 {
        match self {
            HeaderClass::Full => 1,
            HeaderClass::Small => 2,
            HeaderClass::DataHdr => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(HeaderClass::Full),
            2 => Some(HeaderClass::Small),
            3 => Some(HeaderClass::DataHdr),
            _ => None,
        }
    }
}

/// Bytes of a slot usable for headers once format fields are removed.
pub fn header_area(mode: FlitMode, kind: SlotKind) -> usize {
    match (mode, kind) {
        (FlitMode::F68, SlotKind::H) => 14,
        (_, SlotKind::H) => 12,
        (_, SlotKind::G) => 15,
        (_, SlotKind::Hs) => HS_BYTES,
    }
}

pub fn slot_capacity(mode: FlitMode, kind: SlotKind, class: HeaderClass) -> usize {
    if mode == FlitMode::F68 && kind == SlotKind::Hs {
        return 0;
    }
    (header_area(mode, kind) / class.width(mode)).min(MAX_HEADERS_PER_SLOT)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    Empty,
    Data([u8; SLOT_BYTES]),
    Headers {
        class: HeaderClass,
        headers: Vec<Vec<u8>>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlitBody {
    /// Header flit laid out per `FlitMode::slot_kinds`.
    Slots(Vec<Slot>),
    /// 68B flit whose 64 bytes are all data.
    AllData([[u8; SLOT_BYTES]; 4]),
    /// IO, ALMP or NULL payload bytes, `payload_bytes` long.
    Opaque(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flit {
    pub mode: FlitMode,
    pub kind: ProtocolKind,
    pub eds: bool,
    /// Reliable-delivery control byte of the 256B hdr; always 0 for 68B.
    pub ctrl: u8,
    /// 68B header flits: number of all-data flits that follow.
    pub data_follow: u8,
    pub body: FlitBody,
}

impl Flit {
    pub fn null(mode: FlitMode) -> Self {
        Flit {
            mode,
            kind: ProtocolKind::Null,
            eds: false,
            ctrl: 0,
            data_follow: 0,
            body: FlitBody::Opaque(vec![0; mode.payload_bytes()]),
        }
    }

    pub fn slots(mode: FlitMode, slots: Vec<Slot>) -> Self {
        Flit {
            mode,
            kind: ProtocolKind::CacheMem,
            eds: false,
            ctrl: 0,
            data_follow: 0,
            body: FlitBody::Slots(slots),
        }
    }

    pub fn all_data(data: [[u8; SLOT_BYTES]; 4]) -> Self {
        Flit {
            mode: FlitMode::F68,
            kind: ProtocolKind::CacheMem,
            eds: false,
            ctrl: 0,
            data_follow: 0,
            body: FlitBody::AllData(data),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FlitError {
    #[error("slot grammar violation: {0}")]
    SlotGrammarViolation(String),
    #[error("CRC mismatch{}", match .half { Some(h) => format!(" in half {h}"), None => String::new() })]
    CrcMismatch { half: Option<u8> },
    #[error("uncorrectable protocol id")]
    Uncorrectable,
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("malformed slot: {0}")]
    Malformed(String),
}

fn grammar(msg: impl Into<String>) -> FlitError {
    FlitError::SlotGrammarViolation(msg.into())
}

fn fmt_byte(slot: &Slot) -> u8 {
    match slot {
        Slot::Headers { class, headers } => class.code() | ((headers.len() as u8) << 2),
        _ => 0,
    }
}

fn parse_fmt(b: u8) -> Result<Option<(HeaderClass, usize)>, FlitError> {
    let code = b & 0x3;
    let count = ((b >> 2) & 0x7) as usize;
    if b >> 5 != 0 {
        return Err(FlitError::Malformed(format!("format byte {b:#04x}")));
    }
    match HeaderClass::from_code(code) {
        None if count == 0 => Ok(None),
        Some(c) if count > 0 => Ok(Some((c, count))),
        _ => Err(FlitError::Malformed(format!("format byte {b:#04x}"))),
    }
}

fn check_headers(mode: FlitMode, kind: SlotKind, slot: &Slot) -> Result<(), FlitError> {
    match slot {
        Slot::Empty => Ok(()),
        Slot::Data(_) if kind == SlotKind::G => Ok(()),
        Slot::Data(_) => Err(grammar(format!("{kind:?} slot cannot carry data"))),
        Slot::Headers { class, headers } => {
            let cap = slot_capacity(mode, kind, *class);
            if headers.is_empty() || headers.len() > cap {
                return Err(grammar(format!(
                    "{} {class:?} headers in {kind:?} slot (capacity {cap})",
                    headers.len()
                )));
            }
            let w = class.width(mode);
            if let Some(h) = headers.iter().find(|h| h.len() != w) {
                return Err(grammar(format!("{class:?} header of {} bytes, expected {w}", h.len())));
            }
            Ok(())
        }
    }
}

fn write_headers(out: &mut [u8], slot: &Slot, mode: FlitMode) {
    if let Slot::Headers { class, headers } = slot {
        let w = class.width(mode);
        for (i, h) in headers.iter().enumerate() {
            out[i * w..(i + 1) * w].copy_from_slice(h);
        }
    }
}

fn read_headers(area: &[u8], fmt: Option<(HeaderClass, usize)>, mode: FlitMode, kind: SlotKind) -> Result<Slot, FlitError> {
    match fmt {
        None => Ok(Slot::Empty),
        Some((class, n)) => {
            if n > slot_capacity(mode, kind, class) {
                return Err(FlitError::Malformed(format!("{n} {class:?} headers in {kind:?}")));
            }
            let w = class.width(mode);
            Ok(Slot::Headers {
                class,
                headers: (0..n).map(|i| area[i * w..(i + 1) * w].to_vec()).collect(),
            })
        }
    }
}

/// Writes a G slot at `out[..16]`, returning whether it carried data.
fn write_g(out: &mut [u8], slot: &Slot, mode: FlitMode) -> bool {
    match slot {
        Slot::Data(d) => {
            out[..SLOT_BYTES].copy_from_slice(d);
            true
        }
        _ => {
            out[0] = fmt_byte(slot);
            write_headers(&mut out[1..SLOT_BYTES], slot, mode);
            false
        }
    }
}

fn read_g(bytes: &[u8], is_data: bool, mode: FlitMode) -> Result<Slot, FlitError> {
    if is_data {
        let mut d = [0u8; SLOT_BYTES];
        d.copy_from_slice(&bytes[..SLOT_BYTES]);
        return Ok(Slot::Data(d));
    }
    let fmt = parse_fmt(bytes[0])?;
    read_headers(&bytes[1..SLOT_BYTES], fmt, mode, SlotKind::G)
}

fn check_slots(mode: FlitMode, slots: &[Slot]) -> Result<(), FlitError> {
    let kinds = mode.slot_kinds();
    if slots.len() != kinds.len() {
        return Err(grammar(format!("{mode} needs {} slots, got {}", kinds.len(), slots.len())));
    }
    for (k, s) in kinds.iter().zip(slots) {
        check_headers(mode, *k, s)?;
    }
    Ok(())
}

pub fn encode_flit(flit: &Flit) -> Result<Vec<u8>, FlitError> {
    let mode = flit.mode;
    match (&flit.body, flit.kind) {
        (FlitBody::Opaque(p), ProtocolKind::Io | ProtocolKind::Almp | ProtocolKind::Null) => {
            if p.len() != mode.payload_bytes() {
                return Err(grammar(format!("{mode} payload must be {} bytes", mode.payload_bytes())));
            }
        }
        (FlitBody::Opaque(_), _) => return Err(grammar("CACHEMEM flits carry slots")),
        (_, ProtocolKind::CacheMem) => {}
        _ => return Err(grammar(format!("{} flits carry an opaque payload", flit.kind))),
    }
    if let FlitBody::Slots(s) = &flit.body {
        check_slots(mode, s)?;
    }
    match mode {
        FlitMode::F68 => encode_68(flit),
        FlitMode::F256 => encode_256(flit),
        FlitMode::F128Lo => encode_lo(flit),
    }
}

fn encode_68(flit: &Flit) -> Result<Vec<u8>, FlitError> {
    if flit.ctrl != 0 {
        return Err(grammar("68B flits have no control byte"));
    }
    if flit.data_follow > 31 {
        return Err(grammar("at most 31 all-data flits may follow"));
    }
    let mut out = vec![0u8; 68];
    out[..2].copy_from_slice(&encode_protocol_id(flit.kind, flit.eds));
    let payload = &mut out[2..66];
    match &flit.body {
        FlitBody::Opaque(p) => payload.copy_from_slice(p),
        FlitBody::AllData(d) => {
            if flit.data_follow != 0 {
                return Err(grammar("all-data flit cannot announce data flits"));
            }
            for (i, s) in d.iter().enumerate() {
                payload[i * 16..(i + 1) * 16].copy_from_slice(s);
            }
        }
        FlitBody::Slots(slots) => {
            let mut mask = 0u8;
            for (i, s) in slots.iter().enumerate().skip(1) {
                if write_g(&mut payload[i * 16..(i + 1) * 16], s, FlitMode::F68) {
                    mask |= 1 << (i - 1);
                }
            }
            payload[0] = mask | (flit.data_follow << 3);
            payload[1] = fmt_byte(&slots[0]);
            write_headers(&mut payload[2..16], &slots[0], FlitMode::F68);
        }
    }
    let c = crc::crc16(&out[2..66]);
    out[66..68].copy_from_slice(&c.to_be_bytes());
    Ok(out)
}

fn hdr_bytes(flit: &Flit) -> [u8; 2] {
    [protocol_id::codeword(flit.kind, flit.eds), flit.ctrl]
}

fn check_256_fields(flit: &Flit) -> Result<(), FlitError> {
    if flit.data_follow != 0 {
        return Err(grammar("data_follow is a 68B field"));
    }
    if matches!(flit.body, FlitBody::AllData(_)) {
        return Err(grammar("all-data flits exist only in 68B mode"));
    }
    Ok(())
}

const STD_MASK_AT: usize = 240;
const STD_CRC_AT: usize = 242;
const LO_EVEN_CRC_AT: usize = 122;
const LO_ODD: usize = 128;
const LO_ODD_MASK_AT: usize = 240;
const LO_ODD_FEC_AT: usize = 244;
const LO_ODD_CRC_AT: usize = 250;

fn encode_256(flit: &Flit) -> Result<Vec<u8>, FlitError> {
    check_256_fields(flit)?;
    let mut out = vec![0u8; 256];
    out[..2].copy_from_slice(&hdr_bytes(flit));
    match &flit.body {
        FlitBody::Opaque(p) => out[2..242].copy_from_slice(p),
        FlitBody::Slots(slots) => {
            let prefix = fmt_byte(&slots[0]) as u16;
            out[2..4].copy_from_slice(&prefix.to_le_bytes());
            write_headers(&mut out[4..16], &slots[0], FlitMode::F256);
            let mut mask = 0u16;
            for (j, s) in slots[1..].iter().enumerate() {
                let at = 16 + 16 * j;
                if write_g(&mut out[at..at + 16], s, FlitMode::F256) {
                    mask |= 1 << j;
                }
            }
            out[STD_MASK_AT..STD_MASK_AT + 2].copy_from_slice(&mask.to_le_bytes());
        }
        FlitBody::AllData(_) => unreachable!(),
    }
    let c = crc::crc64(&out[..STD_CRC_AT]);
    out[STD_CRC_AT..STD_CRC_AT + 8].copy_from_slice(&c.to_be_bytes());
    // FEC bytes stay zero.
    Ok(out)
}

fn lo_g_offset(j: usize) -> usize {
    if j < 6 {
        16 + 16 * j
    } else {
        LO_ODD + 16 * (j - 6)
    }
}

fn encode_lo(flit: &Flit) -> Result<Vec<u8>, FlitError> {
    check_256_fields(flit)?;
    let mut out = vec![0u8; 256];
    out[..2].copy_from_slice(&hdr_bytes(flit));
    match &flit.body {
        FlitBody::Opaque(p) => {
            out[2..122].copy_from_slice(&p[..120]);
            out[LO_ODD..LO_ODD_FEC_AT].copy_from_slice(&p[120..]);
        }
        FlitBody::Slots(slots) => {
            // slots: H, G0..G5, HS, G6..G12
            let g: Vec<&Slot> = slots[1..7].iter().chain(&slots[8..]).collect();
            let hs = &slots[7];
            let mut mask = 0u16;
            for (j, s) in g.iter().enumerate() {
                let at = lo_g_offset(j);
                if write_g(&mut out[at..at + 16], s, FlitMode::F128Lo) {
                    mask |= 1 << j;
                }
            }
            let prefix = fmt_byte(&slots[0]) as u16 | (fmt_byte(hs) as u16) << 5 | (mask & 0x3f) << 10;
            out[2..4].copy_from_slice(&prefix.to_le_bytes());
            write_headers(&mut out[4..16], &slots[0], FlitMode::F128Lo);
            write_headers(&mut out[112..122], hs, FlitMode::F128Lo);
            out[LO_ODD_MASK_AT] = (mask >> 6) as u8;
        }
        FlitBody::AllData(_) => unreachable!(),
    }
    let even = crc::crc48(&out[..LO_EVEN_CRC_AT]);
    out[LO_EVEN_CRC_AT..LO_ODD].copy_from_slice(&even.to_be_bytes()[2..]);
    let odd = crc::crc48(&out[LO_ODD..LO_ODD_FEC_AT]);
    out[LO_ODD_CRC_AT..256].copy_from_slice(&odd.to_be_bytes()[2..]);
    Ok(out)
}

fn read_u48(b: &[u8]) -> u64 {
    b.iter().fold(0u64, |acc, &x| acc << 8 | x as u64)
}

/// CRC validity of the two halves of a latency-optimized flit.
pub fn lo_half_status(bytes: &[u8]) -> Result<[bool; 2], FlitError> {
    if bytes.len() != 256 {
        return Err(FlitError::Length { expected: 256, got: bytes.len() });
    }
    let even = crc::crc48(&bytes[..LO_EVEN_CRC_AT]) == read_u48(&bytes[LO_EVEN_CRC_AT..LO_ODD]);
    let odd = crc::crc48(&bytes[LO_ODD..LO_ODD_FEC_AT]) == read_u48(&bytes[LO_ODD_CRC_AT..]);
    Ok([even, odd])
}

/// Stateful decoder; tracks 68B all-data flits announced by header flits.
#[derive(Clone, Debug)]
pub struct FlitDecoder {
    pub mode: FlitMode,
    pending_all_data: u8,
}

impl FlitDecoder {
    pub fn new(mode: FlitMode) -> Self {
        FlitDecoder { mode, pending_all_data: 0 }
    }

    pub fn pending_all_data(&self) -> u8 {
        self.pending_all_data
    }

    pub fn decode(&mut self, bytes: &[u8]) -> Result<Flit, FlitError> {
        if bytes.len() != self.mode.flit_bytes() {
            return Err(FlitError::Length { expected: self.mode.flit_bytes(), got: bytes.len() });
        }
        match self.mode {
            FlitMode::F68 => self.decode_68(bytes),
            FlitMode::F256 => decode_256(bytes),
            FlitMode::F128Lo => decode_lo(bytes),
        }
    }

    fn decode_68(&mut self, bytes: &[u8]) -> Result<Flit, FlitError> {
        let (kind, eds) = decode_protocol_id([bytes[0], bytes[1]]).map_err(|_| FlitError::Uncorrectable)?;
        let want = u16::from_be_bytes([bytes[66], bytes[67]]);
        if crc::crc16(&bytes[2..66]) != want {
            return Err(FlitError::CrcMismatch { half: None });
        }
        let payload = &bytes[2..66];
        let mut flit = Flit {
            mode: FlitMode::F68,
            kind,
            eds,
            ctrl: 0,
            data_follow: 0,
            body: FlitBody::Opaque(payload.to_vec()),
        };
        if kind != ProtocolKind::CacheMem {
            return Ok(flit);
        }
        if self.pending_all_data > 0 {
            self.pending_all_data -= 1;
            let mut d = [[0u8; 16]; 4];
            for (i, s) in d.iter_mut().enumerate() {
                s.copy_from_slice(&payload[i * 16..(i + 1) * 16]);
            }
            flit.body = FlitBody::AllData(d);
            return Ok(flit);
        }
        let mask = payload[0] & 0x7;
        let follow = payload[0] >> 3;
        let mut slots = vec![read_headers(&payload[2..16], parse_fmt(payload[1])?, FlitMode::F68, SlotKind::H)?];
        for i in 1..4 {
            slots.push(read_g(&payload[i * 16..], mask & (1 << (i - 1)) != 0, FlitMode::F68)?);
        }
        self.pending_all_data = follow;
        flit.data_follow = follow;
        flit.body = FlitBody::Slots(slots);
        Ok(flit)
    }
}

fn decode_hdr(bytes: &[u8]) -> Result<(ProtocolKind, bool, u8), FlitError> {
    let (k, e) = protocol_id::decode_byte(bytes[0]).ok_or(FlitError::Uncorrectable)?;
    Ok((k, e, bytes[1]))
}

fn decode_256(bytes: &[u8]) -> Result<Flit, FlitError> {
    let want = u64::from_be_bytes(bytes[STD_CRC_AT..STD_CRC_AT + 8].try_into().unwrap());
    if crc::crc64(&bytes[..STD_CRC_AT]) != want {
        return Err(FlitError::CrcMismatch { half: None });
    }
    let (kind, eds, ctrl) = decode_hdr(bytes)?;
    let body = if kind == ProtocolKind::CacheMem {
        let prefix = u16::from_le_bytes([bytes[2], bytes[3]]);
        if prefix >> 5 != 0 {
            return Err(FlitError::Malformed(format!("H prefix {prefix:#06x}")));
        }
        let mut slots = vec![read_headers(&bytes[4..16], parse_fmt(prefix as u8)?, FlitMode::F256, SlotKind::H)?];
        let mask = u16::from_le_bytes([bytes[STD_MASK_AT], bytes[STD_MASK_AT + 1]]);
        for j in 0..14 {
            slots.push(read_g(&bytes[16 + 16 * j..], mask & (1 << j) != 0, FlitMode::F256)?);
        }
        FlitBody::Slots(slots)
    } else {
        FlitBody::Opaque(bytes[2..242].to_vec())
    };
    Ok(Flit { mode: FlitMode::F256, kind, eds, ctrl, data_follow: 0, body })
}

fn decode_lo(bytes: &[u8]) -> Result<Flit, FlitError> {
    let [even_ok, odd_ok] = lo_half_status(bytes)?;
    if !even_ok {
        return Err(FlitError::CrcMismatch { half: Some(0) });
    }
    if !odd_ok {
        return Err(FlitError::CrcMismatch { half: Some(1) });
    }
    let (kind, eds, ctrl) = decode_hdr(bytes)?;
    let body = if kind == ProtocolKind::CacheMem {
        let mut slots = decode_lo_even_slots(bytes)?;
        let prefix = u16::from_le_bytes([bytes[2], bytes[3]]);
        let odd_mask = bytes[LO_ODD_MASK_AT];
        if odd_mask >> 7 != 0 {
            return Err(FlitError::Malformed(format!("odd mask {odd_mask:#04x}")));
        }
        let mask = (prefix >> 10) | (odd_mask as u16) << 6;
        for j in 6..13 {
            slots.push(read_g(&bytes[lo_g_offset(j)..], mask & (1 << j) != 0, FlitMode::F128Lo)?);
        }
        FlitBody::Slots(slots)
    } else {
        let mut p = bytes[2..122].to_vec();
        p.extend_from_slice(&bytes[LO_ODD..LO_ODD_FEC_AT]);
        FlitBody::Opaque(p)
    };
    Ok(Flit { mode: FlitMode::F128Lo, kind, eds, ctrl, data_follow: 0, body })
}

/// Decodes the even half of a latency-optimized flit alone: H, six G slots
/// and HS. Usable as soon as the even CRC passes.
pub fn decode_lo_even_slots(bytes: &[u8]) -> Result<Vec<Slot>, FlitError> {
    if !lo_half_status(bytes)?[0] {
        return Err(FlitError::CrcMismatch { half: Some(0) });
    }
    let prefix = u16::from_le_bytes([bytes[2], bytes[3]]);
    let mode = FlitMode::F128Lo;
    let mut slots = vec![read_headers(&bytes[4..16], parse_fmt((prefix & 0x1f) as u8)?, mode, SlotKind::H)?];
    for j in 0..6 {
        slots.push(read_g(&bytes[lo_g_offset(j)..], (prefix >> 10) & (1 << j) != 0, mode)?);
    }
    slots.push(read_headers(&bytes[112..122], parse_fmt(((prefix >> 5) & 0x1f) as u8)?, mode, SlotKind::Hs)?);
    Ok(slots)
}

/// Stateless decode; a 68B CACHEMEM flit is read as a header flit.
pub fn decode_flit(mode: FlitMode, bytes: &[u8]) -> Result<Flit, FlitError> {
    FlitDecoder::new(mode).decode(bytes)
}

/// One trace line: `FLIT <mode> <kind> <hex>`.
pub fn hex_dump(flit: &Flit, bytes: &[u8]) -> String {
    let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    format!("FLIT {} {} {}", flit.mode, flit.kind, hex)
}
