//! Shared message vocabulary: addresses, channels, opcodes and flow-control
//! classes for CXL.io, CXL.cache and CXL.mem.

use std::fmt;

use thiserror::Error;

/// Cache line size in bytes. All coherence state is tracked at this granularity.
pub const LINE_BYTES: u64 = 64;

/// Width of the transaction tag carried by every message.
pub const TAG_BITS: u32 = 16;

/// Width of LD-ID and CacheID fields.
pub const LD_ID_BITS: u32 = 4;
pub const CACHE_ID_BITS: u32 = 4;

/// Width of a port-based-routing ID (SPID/DPID).
pub const PID_BITS: u32 = 12;

/// Width of the HDM-H meta value.
pub const META_BITS: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("opcode {opcode} is not defined at protocol level {level}")]
    UnknownOpcode { opcode: Opcode, level: ProtocolLevel },
    #[error("opcode {opcode} cannot travel on channel {channel}")]
    ChannelMismatch { opcode: Opcode, channel: Channel },
    #[error("malformed message: {0}")]
    Malformed(&'static str),
}

/// A host physical address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(u64);

impl Address {
    pub const fn new(hpa: u64) -> Self {
        Address(hpa)
    }

    pub const fn hpa(self) -> u64 {
        self.0
    }

    /// The 64-byte aligned line address containing `hpa`.
    pub const fn line(self) -> u64 {
        self.0 & !(LINE_BYTES - 1)
    }

    pub const fn line_index(self) -> u64 {
        self.0 / LINE_BYTES
    }

    pub const fn line_addr(self) -> Address {
        Address(self.line())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolLevel {
    Cxl11,
    Cxl20,
    Cxl30,
}

impl fmt::Display for ProtocolLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolLevel::Cxl11 => "1.1",
            ProtocolLevel::Cxl20 => "2.0",
            ProtocolLevel::Cxl30 => "3.0",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Io,
    Cache,
    Mem,
}

/// CXL.io flow-control class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FcClass {
    Posted,
    NonPosted,
    Completion,
}

impl fmt::Display for FcClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FcClass::Posted => "P",
            FcClass::NonPosted => "NP",
            FcClass::Completion => "C",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    D2hReq,
    D2hRsp,
    D2hData,
    H2dReq,
    H2dRsp,
    H2dData,
    M2sReq,
    M2sRwd,
    S2mNdr,
    S2mDrs,
    S2mBisnp,
    M2sBirsp,
    Io { fc: FcClass, vc: u8 },
}

impl Channel {
    /// The six CXL.cache and six CXL.mem channels (what an inter-switch link carries each way).
    pub const CACHE_MEM: [Channel; 12] = [
        Channel::D2hReq,
        Channel::D2hRsp,
        Channel::D2hData,
        Channel::H2dReq,
        Channel::H2dRsp,
        Channel::H2dData,
        Channel::M2sReq,
        Channel::M2sRwd,
        Channel::M2sBirsp,
        Channel::S2mNdr,
        Channel::S2mDrs,
        Channel::S2mBisnp,
    ];

    pub fn protocol(self) -> Protocol {
        match self {
            Channel::D2hReq
            | Channel::D2hRsp
            | Channel::D2hData
            | Channel::H2dReq
            | Channel::H2dRsp
            | Channel::H2dData => Protocol::Cache,
            Channel::Io { .. } => Protocol::Io,
            _ => Protocol::Mem,
        }
    }

    pub fn is_data(self) -> bool {
        matches!(
            self,
            Channel::D2hData | Channel::H2dData | Channel::M2sRwd | Channel::S2mDrs
        )
    }

    /// Response channels that are pre-allocated at the receiver and always drain.
    pub fn is_preallocated(self) -> bool {
        matches!(
            self,
            Channel::H2dRsp
                | Channel::H2dData
                | Channel::D2hRsp
                | Channel::D2hData
                | Channel::S2mNdr
                | Channel::S2mDrs
                | Channel::M2sBirsp
        )
    }

    /// Requires CXL 3.0 features to exist on a link.
    pub fn requires_bi(self) -> bool {
        matches!(self, Channel::S2mBisnp | Channel::M2sBirsp)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::D2hReq => f.write_str("D2H_REQ"),
            Channel::D2hRsp => f.write_str("D2H_RSP"),
            Channel::D2hData => f.write_str("D2H_DATA"),
            Channel::H2dReq => f.write_str("H2D_REQ"),
            Channel::H2dRsp => f.write_str("H2D_RSP"),
            Channel::H2dData => f.write_str("H2D_DATA"),
            Channel::M2sReq => f.write_str("M2S_REQ"),
            Channel::M2sRwd => f.write_str("M2S_RWD"),
            Channel::S2mNdr => f.write_str("S2M_NDR"),
            Channel::S2mDrs => f.write_str("S2M_DRS"),
            Channel::S2mBisnp => f.write_str("S2M_BISNP"),
            Channel::M2sBirsp => f.write_str("M2S_BIRSP"),
            Channel::Io { fc, vc } => write!(f, "IO_{fc}_VC{vc}"),
        }
    }
}

/// MESI cache state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mesi {
    M,
    E,
    S,
    I,
}

impl Mesi {
    pub fn is_valid(self) -> bool {
        self != Mesi::I
    }

    pub fn is_owner(self) -> bool {
        matches!(self, Mesi::M | Mesi::E)
    }
}

impl fmt::Display for Mesi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mesi::M => "M",
            Mesi::E => "E",
            Mesi::S => "S",
            Mesi::I => "I",
        })
    }
}

/// D2H request category; determines the legal response pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum D2hCategory {
    /// GO + data.
    Read,
    /// GO only.
    Read0,
    /// WritePull, then GO.
    Read0Write,
    /// GO_WritePull (evictions).
    Write,
}

/// The fifteen D2H request opcodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum D2hReqOp {
    RdCurr,
    RdOwn,
    RdShared,
    RdAny,
    RdOwnNoData,
    ClFlush,
    CacheFlushed,
    ItoMWr,
    WrCur,
    WoWrInv,
    WoWrInvF,
    WrInv,
    CleanEvict,
    DirtyEvict,
    CleanEvictNoData,
}

impl D2hReqOp {
    pub const ALL: [D2hReqOp; 15] = [
        D2hReqOp::RdCurr,
        D2hReqOp::RdOwn,
        D2hReqOp::RdShared,
        D2hReqOp::RdAny,
        D2hReqOp::RdOwnNoData,
        D2hReqOp::ClFlush,
        D2hReqOp::CacheFlushed,
        D2hReqOp::ItoMWr,
        D2hReqOp::WrCur,
        D2hReqOp::WoWrInv,
        D2hReqOp::WoWrInvF,
        D2hReqOp::WrInv,
        D2hReqOp::CleanEvict,
        D2hReqOp::DirtyEvict,
        D2hReqOp::CleanEvictNoData,
    ];

    pub fn category(self) -> D2hCategory {
        use D2hReqOp::*;
        match self {
            RdCurr | RdOwn | RdShared | RdAny => D2hCategory::Read,
            RdOwnNoData | ClFlush | CacheFlushed => D2hCategory::Read0,
            ItoMWr | WrCur | WoWrInv | WoWrInvF | WrInv => D2hCategory::Read0Write,
            CleanEvict | DirtyEvict | CleanEvictNoData => D2hCategory::Write,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum D2hRspOp {
    RspIHitI,
    RspVHitV,
    RspIHitSE,
    RspSHitSE,
    RspSFwdM,
    RspIFwdM,
    RspVFwdV,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SnpOp {
    SnpData,
    SnpInv,
    SnpCur,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum H2dRspOp {
    /// Global observation with the granted state.
    Go(Mesi),
    GoErr,
    WritePull,
    GoWritePull,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum M2sReqOp {
    MemInv,
    MemRd,
    MemRdData,
    MemRdFwd,
    MemWrFwd,
    MemSpecRd,
    MemInvNt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum M2sRwdOp {
    MemWr,
    MemWrPtl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NdrOp {
    Cmp,
    CmpS,
    CmpE,
    BiConflictAck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BiSnpOp {
    BiSnpCur,
    BiSnpData,
    BiSnpInv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BiRspOp {
    BiRspI,
    BiRspS,
    BiRspE,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IoOp {
    MemRd,
    MemWr,
    CfgRd,
    CfgWr,
    IoRd,
    IoWr,
    Cpl,
    CplD,
    UioWr,
    UioRd,
    UioWrCpl,
    UioRdCpl,
    UioRdCplD,
}

impl IoOp {
    pub fn fc(self) -> FcClass {
        use IoOp::*;
        match self {
            MemWr | UioWr => FcClass::Posted,
            MemRd | CfgRd | CfgWr | IoRd | IoWr | UioRd => FcClass::NonPosted,
            Cpl | CplD | UioWrCpl | UioRdCpl | UioRdCplD => FcClass::Completion,
        }
    }

    pub fn is_uio(self) -> bool {
        use IoOp::*;
        matches!(self, UioWr | UioRd | UioWrCpl | UioRdCpl | UioRdCplD)
    }

    pub fn carries_payload(self) -> bool {
        use IoOp::*;
        matches!(self, MemWr | CfgWr | IoWr | CplD | UioWr | UioRdCplD)
    }
}

/// A protocol-specific opcode. The variant fixes the channel family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    D2hReq(D2hReqOp),
    D2hRsp(D2hRspOp),
    D2hData,
    H2dReq(SnpOp),
    H2dRsp(H2dRspOp),
    H2dData,
    M2sReq(M2sReqOp),
    M2sRwd(M2sRwdOp),
    S2mNdr(NdrOp),
    S2mDrs,
    S2mBisnp(BiSnpOp),
    M2sBirsp(BiRspOp),
    Io(IoOp),
}

impl Opcode {
    /// Native channel. CXL.io opcodes land on VC0 unless they are UIO (VC1).
    pub fn default_channel(self) -> Channel {
        match self {
            Opcode::D2hReq(_) => Channel::D2hReq,
            Opcode::D2hRsp(_) => Channel::D2hRsp,
            Opcode::D2hData => Channel::D2hData,
            Opcode::H2dReq(_) => Channel::H2dReq,
            Opcode::H2dRsp(_) => Channel::H2dRsp,
            Opcode::H2dData => Channel::H2dData,
            Opcode::M2sReq(_) => Channel::M2sReq,
            Opcode::M2sRwd(_) => Channel::M2sRwd,
            Opcode::S2mNdr(_) => Channel::S2mNdr,
            Opcode::S2mDrs => Channel::S2mDrs,
            Opcode::S2mBisnp(_) => Channel::S2mBisnp,
            Opcode::M2sBirsp(_) => Channel::M2sBirsp,
            Opcode::Io(op) => Channel::Io {
                fc: op.fc(),
                vc: u8::from(op.is_uio()),
            },
        }
    }

    /// Every opcode, across all channel families and levels.
    pub fn all() -> Vec<Opcode> {
        use Opcode::*;
        let mut v: Vec<Opcode> = D2hReqOp::ALL.into_iter().map(D2hReq).collect();
        v.extend(
            [
                D2hRspOp::RspIHitI,
                D2hRspOp::RspVHitV,
                D2hRspOp::RspIHitSE,
                D2hRspOp::RspSHitSE,
                D2hRspOp::RspSFwdM,
                D2hRspOp::RspIFwdM,
                D2hRspOp::RspVFwdV,
            ]
            .map(D2hRsp),
        );
        v.push(D2hData);
        v.extend([SnpOp::SnpData, SnpOp::SnpInv, SnpOp::SnpCur].map(H2dReq));
        v.extend([Mesi::M, Mesi::E, Mesi::S, Mesi::I].map(|s| H2dRsp(H2dRspOp::Go(s))));
        v.extend([H2dRspOp::GoErr, H2dRspOp::WritePull, H2dRspOp::GoWritePull].map(H2dRsp));
        v.push(H2dData);
        v.extend(
            [
                M2sReqOp::MemInv,
                M2sReqOp::MemRd,
                M2sReqOp::MemRdData,
                M2sReqOp::MemRdFwd,
                M2sReqOp::MemWrFwd,
                M2sReqOp::MemSpecRd,
                M2sReqOp::MemInvNt,
            ]
            .map(M2sReq),
        );
        v.extend([M2sRwdOp::MemWr, M2sRwdOp::MemWrPtl].map(M2sRwd));
        v.extend([NdrOp::Cmp, NdrOp::CmpS, NdrOp::CmpE, NdrOp::BiConflictAck].map(S2mNdr));
        v.push(S2mDrs);
        v.extend([BiSnpOp::BiSnpCur, BiSnpOp::BiSnpData, BiSnpOp::BiSnpInv].map(S2mBisnp));
        v.extend([BiRspOp::BiRspI, BiRspOp::BiRspS, BiRspOp::BiRspE].map(M2sBirsp));
        use IoOp::*;
        v.extend(
            [MemRd, MemWr, CfgRd, CfgWr, IoRd, IoWr, Cpl, CplD, UioWr, UioRd, UioWrCpl, UioRdCpl, UioRdCplD].map(Io),
        );
        v
    }

    /// Lowest protocol level that defines this opcode.
    pub fn min_level(self) -> ProtocolLevel {
        match self {
            Opcode::S2mBisnp(_) | Opcode::M2sBirsp(_) => ProtocolLevel::Cxl30,
            Opcode::S2mNdr(NdrOp::BiConflictAck) => ProtocolLevel::Cxl30,
            Opcode::Io(op) if op.is_uio() => ProtocolLevel::Cxl30,
            _ => ProtocolLevel::Cxl11,
        }
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Opcode::D2hReq(op) => write!(f, "{op:?}"),
            Opcode::D2hRsp(op) => write!(f, "{op:?}"),
            Opcode::D2hData => f.write_str("Data"),
            Opcode::H2dReq(op) => write!(f, "{op:?}"),
            Opcode::H2dRsp(H2dRspOp::Go(s)) => write!(f, "GO-{s}"),
            Opcode::H2dRsp(H2dRspOp::GoErr) => f.write_str("GO-Err"),
            Opcode::H2dRsp(H2dRspOp::WritePull) => f.write_str("WritePull"),
            Opcode::H2dRsp(H2dRspOp::GoWritePull) => f.write_str("GO_WritePull"),
            Opcode::H2dData => f.write_str("Data"),
            Opcode::M2sReq(op) => write!(f, "{op:?}"),
            Opcode::M2sRwd(op) => write!(f, "{op:?}"),
            Opcode::S2mNdr(op) => write!(f, "{op:?}"),
            Opcode::S2mDrs => f.write_str("MemData"),
            Opcode::S2mBisnp(op) => write!(f, "{op:?}"),
            Opcode::M2sBirsp(op) => write!(f, "{op:?}"),
            Opcode::Io(op) => write!(f, "{op:?}"),
        }
    }
}

/// One protocol-layer transaction unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Message {
    pub channel: Channel,
    pub opcode: Opcode,
    pub address: Option<Address>,
    pub tag: u16,
    pub ld_id: Option<u8>,
    pub cache_id: Option<u8>,
    pub spid: Option<u16>,
    pub dpid: Option<u16>,
    pub meta: Option<u8>,
    pub has_data: bool,
    pub bogus: bool,
    pub poison: bool,
}

impl Message {
    pub fn new(opcode: Opcode, address: Option<Address>, tag: u16) -> Self {
        let channel = opcode.default_channel();
        let has_data = match opcode {
            Opcode::Io(op) => op.carries_payload(),
            _ => channel.is_data(),
        };
        Message {
            channel,
            opcode,
            address: address.map(Address::line_addr),
            tag,
            ld_id: None,
            cache_id: None,
            spid: None,
            dpid: None,
            meta: None,
            has_data,
            bogus: false,
            poison: false,
        }
    }

    pub fn at(opcode: Opcode, addr: u64, tag: u16) -> Self {
        Message::new(opcode, Some(Address::new(addr)), tag)
    }

    pub fn with_ld_id(mut self, ld: u8) -> Self {
        self.ld_id = Some(ld);
        self
    }

    pub fn with_cache_id(mut self, id: u8) -> Self {
        self.cache_id = Some(id);
        self
    }

    pub fn with_meta(mut self, meta: u8) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn with_poison(mut self, poison: bool) -> Self {
        self.poison = poison;
        self
    }

    pub fn line(&self) -> Option<u64> {
        self.address.map(Address::line)
    }

    /// Checks field widths and the data/bogus flag rules.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let data_expected = match self.opcode {
            Opcode::Io(op) => op.carries_payload(),
            _ => self.channel.is_data(),
        };
        if self.has_data != data_expected {
            return Err(ProtocolError::Malformed("has_data disagrees with channel"));
        }
        if self.bogus && self.channel != Channel::D2hData {
            return Err(ProtocolError::Malformed("bogus only valid on D2H data"));
        }
        if self.ld_id.is_some_and(|v| u32::from(v) >= 1 << LD_ID_BITS) {
            return Err(ProtocolError::Malformed("ld_id exceeds 4 bits"));
        }
        if self.cache_id.is_some_and(|v| u32::from(v) >= 1 << CACHE_ID_BITS) {
            return Err(ProtocolError::Malformed("cache_id exceeds 4 bits"));
        }
        for pid in [self.spid, self.dpid].into_iter().flatten() {
            if u32::from(pid) >= 1 << PID_BITS {
                return Err(ProtocolError::Malformed("PID exceeds 12 bits"));
            }
        }
        if self.meta.is_some_and(|m| u32::from(m) >= 1 << META_BITS) {
            return Err(ProtocolError::Malformed("meta exceeds 2 bits"));
        }
        Ok(())
    }
}

/// Returns the message's channel and, for CXL.io, its flow-control class.
pub fn classify_message(
    msg: &Message,
    level: ProtocolLevel,
) -> Result<(Channel, Option<FcClass>), ProtocolError> {
    if msg.opcode.min_level() > level {
        return Err(ProtocolError::UnknownOpcode {
            opcode: msg.opcode,
            level,
        });
    }
    let native = msg.opcode.default_channel();
    match (native, msg.channel) {
        (Channel::Io { fc, .. }, Channel::Io { fc: got, vc }) if fc == got => {
            if let Opcode::Io(op) = msg.opcode {
                // UIO never rides VC0.
                if op.is_uio() && vc == 0 {
                    return Err(ProtocolError::ChannelMismatch {
                        opcode: msg.opcode,
                        channel: msg.channel,
                    });
                }
            }
            Ok((msg.channel, Some(fc)))
        }
        (a, b) if a == b => Ok((a, None)),
        _ => Err(ProtocolError::ChannelMismatch {
            opcode: msg.opcode,
            channel: msg.channel,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_masks_low_bits() {
        let a = Address::new(0x1234_5678);
        assert_eq!(a.line(), 0x1234_5640);
        assert_eq!(a.line() & 63, 0);
        assert_eq!(Address::new(0x40).line_index(), 1);
    }

    #[test]
    fn io_classification() {
        let wr = Message::at(Opcode::Io(IoOp::MemWr), 0x1000, 1);
        let (ch, fc) = classify_message(&wr, ProtocolLevel::Cxl11).unwrap();
        assert_eq!(fc, Some(FcClass::Posted));
        assert_eq!(ch, Channel::Io { fc: FcClass::Posted, vc: 0 });

        let rd = Message::at(Opcode::Io(IoOp::MemRd), 0x1000, 2);
        assert_eq!(
            classify_message(&rd, ProtocolLevel::Cxl11).unwrap().1,
            Some(FcClass::NonPosted)
        );
    }

    #[test]
    fn cache_classification_has_no_fc() {
        let m = Message::at(Opcode::D2hReq(D2hReqOp::DirtyEvict), 0x80, 3);
        assert_eq!(
            classify_message(&m, ProtocolLevel::Cxl11).unwrap(),
            (Channel::D2hReq, None)
        );
    }

    #[test]
    fn bi_needs_cxl3() {
        let m = Message::at(Opcode::S2mBisnp(BiSnpOp::BiSnpInv), 0x80, 3);
        assert!(matches!(
            classify_message(&m, ProtocolLevel::Cxl20),
            Err(ProtocolError::UnknownOpcode { .. })
        ));
        assert!(classify_message(&m, ProtocolLevel::Cxl30).is_ok());
    }

    #[test]
    fn fifteen_d2h_opcodes_in_four_categories() {
        let mut counts = [0; 4];
        for op in D2hReqOp::ALL {
            let i = match op.category() {
                D2hCategory::Read => 0,
                D2hCategory::Read0 => 1,
                D2hCategory::Read0Write => 2,
                D2hCategory::Write => 3,
            };
            counts[i] += 1;
        }
        assert_eq!(counts.iter().sum::<i32>(), 15);
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn validate_rules() {
        let mut m = Message::at(Opcode::S2mDrs, 0x40, 1);
        assert!(m.has_data);
        assert!(m.validate().is_ok());
        m.bogus = true;
        assert!(m.validate().is_err());
        let d = Message::at(Opcode::D2hData, 0x40, 1);
        let mut d2 = d;
        d2.bogus = true;
        assert!(d2.validate().is_ok());
        assert!(Message::at(Opcode::S2mDrs, 0, 0).with_ld_id(16).validate().is_err());
    }
}
