//! Memory device: reads and writes with meta and poison, DCOH tracking and
//! the HDM-D bias flip.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::{DeviceType, HdmKind, HdmRegion, MemError, DEFAULT_MEDIA_LATENCY_NS};
use crate::protocol::{Address, Channel, D2hReqOp, Mesi, Message, M2sReqOp, M2sRwdOp, NdrOp, Opcode, LINE_BYTES};

pub type LineData = [u8; LINE_BYTES as usize];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemLine {
    pub data: LineData,
    pub meta: u8,
    pub poison: bool,
}

impl Default for MemLine {
    fn default() -> Self {
        MemLine { data: [0; LINE_BYTES as usize], meta: 0, poison: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bias {
    /// Host may hold the line shared only.
    HostS,
    /// Host may hold the line in any state.
    HostA,
    /// Device owns coherence; host holds nothing.
    Device,
}

/// Host intent carried by a MemRd to device-coherent memory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MemSnoop {
    #[default]
    None,
    /// Host wants a shared copy.
    SnpData,
    /// Host wants ownership.
    SnpInv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MemReq {
    pub addr: u64,
    pub tag: u16,
    /// New meta value to store, if the request directs an update.
    pub meta: Option<u8>,
    pub snoop: MemSnoop,
}

impl MemReq {
    pub fn read(addr: u64) -> Self {
        MemReq { addr, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemResponse {
    /// S2M messages in send order.
    pub msgs: Vec<Message>,
    pub data: Option<LineData>,
    pub prior_meta: Option<u8>,
    pub poison: bool,
}

/// One hop of a protocol flow transcript.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowStep {
    pub from_device: bool,
    pub channel: Channel,
    pub opcode: Opcode,
    pub line: u64,
}

impl fmt::Display for FlowStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = if self.from_device { "dev->host" } else { "host->dev" };
        write!(f, "{dir} {} {} A={:#x}", self.channel, self.opcode, self.line)
    }
}

#[derive(Clone, Debug)]
pub struct MemDevice {
    pub id: u16,
    pub dtype: DeviceType,
    pub media_latency_ns: u32,
    regions: Vec<HdmRegion>,
    lines: HashMap<u64, MemLine>,
    bias: BTreeMap<u64, Bias>,
    /// Device cache over its own memory (Type-2 only).
    dev_cache: BTreeMap<u64, (Mesi, LineData)>,
}

fn line_of(addr: u64) -> u64 {
    Address::new(addr).line()
}

impl MemDevice {
    pub fn new(id: u16, dtype: DeviceType) -> Self {
        MemDevice {
            id,
            dtype,
            media_latency_ns: DEFAULT_MEDIA_LATENCY_NS,
            regions: Vec::new(),
            lines: HashMap::new(),
            bias: BTreeMap::new(),
            dev_cache: BTreeMap::new(),
        }
    }

    pub fn add_region(&mut self, base: u64, size: u64, kind: HdmKind) -> Result<(), MemError> {
        if kind == HdmKind::HdmD && self.dtype != DeviceType::Type2 {
            return Err(MemError::KindNotAllowed { kind, dtype: self.dtype });
        }
        let r = HdmRegion { base, size, kind, owner: self.id };
        if size == 0 || self.regions.iter().any(|o| o.base < base + size && base < o.base + o.size) {
            return Err(MemError::Overlap { base, size });
        }
        self.regions.push(r);
        Ok(())
    }

    pub fn region(&self, addr: u64) -> Option<&HdmRegion> {
        self.regions.iter().find(|r| r.contains(addr))
    }

    pub fn bias(&self, addr: u64) -> Bias {
        self.bias.get(&line_of(addr)).copied().unwrap_or(Bias::HostA)
    }

    pub fn device_state(&self, addr: u64) -> Mesi {
        self.dev_cache.get(&line_of(addr)).map(|c| c.0).unwrap_or(Mesi::I)
    }

    pub fn line(&self, addr: u64) -> MemLine {
        self.lines.get(&line_of(addr)).copied().unwrap_or_default()
    }

    fn completion(&self, op: NdrOp, addr: u64, tag: u16) -> Message {
        Message::at(Opcode::S2mNdr(op), addr, tag)
    }

    /// M2S MemRd. Returns MemData (plus a Cmp NDR for Type-2 devices). An
    /// unmapped address yields a poisoned error completion.
    pub fn mem_read(&mut self, req: &MemReq) -> MemResponse {
        let line = line_of(req.addr);
        let Some(kind) = self.region(req.addr).map(|r| r.kind) else {
            let m = Message::at(Opcode::S2mDrs, req.addr, req.tag).with_poison(true);
            return MemResponse { msgs: vec![m], data: None, prior_meta: None, poison: true };
        };
        let mut ndr = NdrOp::Cmp;
        if kind == HdmKind::HdmD {
            // DCOH checks the device cache before answering the host.
            if let Some((st, data)) = self.dev_cache.get(&line).copied() {
                if st == Mesi::M {
                    self.lines.entry(line).or_default().data = data;
                }
                match req.snoop {
                    MemSnoop::SnpData => {
                        self.dev_cache.insert(line, (Mesi::S, data));
                    }
                    MemSnoop::SnpInv => {
                        self.dev_cache.remove(&line);
                    }
                    MemSnoop::None => {
                        if st == Mesi::M {
                            self.dev_cache.insert(line, (Mesi::E, data));
                        }
                    }
                }
            }
            match req.snoop {
                MemSnoop::SnpData => {
                    self.bias.insert(line, Bias::HostS);
                    ndr = NdrOp::CmpS;
                }
                MemSnoop::SnpInv => {
                    self.bias.insert(line, Bias::HostA);
                    ndr = NdrOp::CmpE;
                }
                MemSnoop::None => {}
            }
        }
        let stored = self.lines.entry(line).or_default();
        let prior = stored.meta;
        if let Some(m) = req.meta {
            stored.meta = m & 0x3;
        }
        let snapshot = *stored;
        let mut msgs = vec![Message::at(Opcode::S2mDrs, req.addr, req.tag)
            .with_meta(prior)
            .with_poison(snapshot.poison)];
        if self.dtype == DeviceType::Type2 {
            msgs.push(self.completion(ndr, req.addr, req.tag));
        }
        MemResponse { msgs, data: Some(snapshot.data), prior_meta: Some(prior), poison: snapshot.poison }
    }

    /// M2S MemWr with data. Always completes with a Cmp NDR.
    pub fn mem_write(&mut self, req: &MemReq, data: LineData, poison: bool) -> Result<MemResponse, MemError> {
        if self.region(req.addr).is_none() {
            return Err(MemError::OutOfRange(req.addr));
        }
        let line = line_of(req.addr);
        let l = self.lines.entry(line).or_default();
        l.data = data;
        l.poison = poison;
        if let Some(m) = req.meta {
            l.meta = m & 0x3;
        }
        self.dev_cache.remove(&line);
        Ok(MemResponse {
            msgs: vec![self.completion(NdrOp::Cmp, req.addr, req.tag)],
            data: None,
            prior_meta: None,
            poison,
        })
    }

    /// Device-side store to its own memory; needs device bias.
    pub fn device_store(&mut self, addr: u64, data: LineData) -> Result<(), MemError> {
        if self.bias(addr) != Bias::Device {
            return Err(MemError::OutOfRange(addr));
        }
        self.dev_cache.insert(line_of(addr), (Mesi::M, data));
        Ok(())
    }

    /// Moves an HDM-D line to device bias. `host_state` is what the host
    /// caches; `host_data` is its copy if dirty. The host completes the
    /// flip with MemRdFwd on M2S Req rather than a GO on H2D.
    pub fn bias_flip(&mut self, addr: u64, host_state: Mesi, host_data: Option<LineData>) -> Result<Vec<FlowStep>, MemError> {
        let kind = self.region(addr).map(|r| r.kind).ok_or(MemError::OutOfRange(addr))?;
        if kind != HdmKind::HdmD {
            return Err(MemError::KindNotAllowed { kind, dtype: self.dtype });
        }
        if self.bias(addr) == Bias::Device {
            return Ok(Vec::new());
        }
        let line = line_of(addr);
        let step = |from_device, opcode: Opcode| FlowStep { from_device, channel: opcode.default_channel(), opcode, line };
        let mut t = vec![step(true, Opcode::D2hReq(D2hReqOp::RdOwnNoData))];
        if host_state == Mesi::M {
            t.push(step(false, Opcode::M2sRwd(M2sRwdOp::MemWr)));
            let data = host_data.unwrap_or(self.line(addr).data);
            self.lines.entry(line).or_default().data = data;
            t.push(step(true, Opcode::S2mNdr(NdrOp::Cmp)));
        }
        t.push(step(false, Opcode::M2sReq(M2sReqOp::MemRdFwd)));
        self.bias.insert(line, Bias::Device);
        self.dev_cache.insert(line, (Mesi::E, self.line(addr).data));
        Ok(t)
    }
}

/// An M2S request in flight: `(line, is_bias_flip_completion)`.
pub type M2sItem = (u64, bool);

/// Counts interleavings of an M2S request stream that a device may observe.
/// With `ordered_per_line`, requests to the same line keep issue order.
/// Returns `(interleavings, ones where a request issued after a MemRdFwd
/// reached the device before it)`.
pub fn m2s_flip_interleavings(issued: &[M2sItem], ordered_per_line: bool) -> (usize, usize) {
    fn go(left: &mut Vec<(usize, M2sItem)>, seen: &mut Vec<usize>, issued: &[M2sItem], ordered: bool, acc: &mut (usize, usize)) {
        if left.is_empty() {
            acc.0 += 1;
            let early = seen.iter().enumerate().any(|(k, &i)| {
                issued.iter().enumerate().any(|(j, &(line, fwd))| {
                    fwd && j < i && issued[i].0 == line && !seen[..k].contains(&j)
                })
            });
            acc.1 += usize::from(early);
            return;
        }
        for p in 0..left.len() {
            let (i, (line, _)) = left[p];
            if ordered && left[..p].iter().any(|(_, (l, _))| *l == line) {
                continue;
            }
            let item = left.remove(p);
            seen.push(i);
            go(left, seen, issued, ordered, acc);
            seen.pop();
            left.insert(p, item);
        }
    }
    let mut left: Vec<(usize, M2sItem)> = issued.iter().copied().enumerate().collect();
    let mut acc = (0, 0);
    go(&mut left, &mut Vec::new(), issued, ordered_per_line, &mut acc);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> MemDevice {
        let mut d = MemDevice::new(0, DeviceType::Type2);
        d.add_region(0, 1 << 20, HdmKind::HdmD).unwrap();
        d.add_region(1 << 20, 1 << 20, HdmKind::HdmH).unwrap();
        d
    }

    #[test]
    fn meta_read_returns_prior_and_stores_new() {
        let mut d = MemDevice::new(0, DeviceType::Type3);
        d.add_region(0, 4096, HdmKind::HdmH).unwrap();
        d.mem_write(&MemReq { meta: Some(2), ..MemReq::read(64) }, [1; 64], false).unwrap();
        let r = d.mem_read(&MemReq { meta: Some(0), ..MemReq::read(64) });
        assert_eq!(r.prior_meta, Some(2));
        assert_eq!(r.msgs.len(), 1);
        assert_eq!(r.msgs[0].meta, Some(2));
        assert_eq!(d.line(64).meta, 0);
        assert_eq!(r.data, Some([1; 64]));
    }

    #[test]
    fn type2_read_adds_completion() {
        let mut d = t2();
        let r = d.mem_read(&MemReq { snoop: MemSnoop::SnpData, ..MemReq::read(0) });
        assert_eq!(r.msgs.len(), 2);
        assert_eq!(r.msgs[1].opcode, Opcode::S2mNdr(NdrOp::CmpS));
        assert_eq!(d.bias(0), Bias::HostS);
    }

    #[test]
    fn unmapped_read_is_poisoned() {
        let mut d = t2();
        let r = d.mem_read(&MemReq::read(1 << 40));
        assert!(r.poison);
        assert!(r.msgs[0].poison);
        assert!(d.mem_write(&MemReq::read(1 << 40), [0; 64], false).is_err());
    }

    #[test]
    fn poison_is_stored() {
        let mut d = t2();
        d.mem_write(&MemReq::read(128), [0; 64], true).unwrap();
        assert!(d.mem_read(&MemReq::read(128)).poison);
    }

    #[test]
    fn hdm_d_needs_type2() {
        let mut d = MemDevice::new(0, DeviceType::Type3);
        assert!(d.add_region(0, 4096, HdmKind::HdmD).is_err());
    }

    #[test]
    fn bias_flip_with_dirty_host_writes_back_first() {
        let mut d = t2();
        let t = d.bias_flip(0, Mesi::M, Some([9; 64])).unwrap();
        let ops: Vec<String> = t.iter().map(|s| s.opcode.to_string()).collect();
        assert_eq!(ops, ["RdOwnNoData", "MemWr", "Cmp", "MemRdFwd"]);
        assert_eq!(t.last().unwrap().channel, Channel::M2sReq);
        assert_eq!(d.bias(0), Bias::Device);
        assert_eq!(d.line(0).data, [9; 64]);
        assert!(d.bias_flip(0, Mesi::I, None).unwrap().is_empty());
    }

    #[test]
    fn host_read_after_device_store_sees_device_data() {
        let mut d = t2();
        d.bias_flip(0, Mesi::I, None).unwrap();
        d.device_store(0, [5; 64]).unwrap();
        let r = d.mem_read(&MemReq { snoop: MemSnoop::SnpData, ..MemReq::read(0) });
        assert_eq!(r.data, Some([5; 64]));
        assert_eq!(d.device_state(0), Mesi::S);
    }

    #[test]
    fn per_line_order_keeps_reads_behind_the_flip() {
        // MemRdFwd X, MemRd X, MemRd Y, MemRdFwd Y, MemRd Y, MemRd X
        let issued = [(0, true), (0, false), (64, false), (64, true), (64, false), (0, false)];
        let (n, bad) = m2s_flip_interleavings(&issued, true);
        assert!(n > 1);
        assert_eq!(bad, 0);
        let (n2, bad2) = m2s_flip_interleavings(&issued, false);
        assert_eq!(n2, 720);
        assert!(bad2 > 0);
    }
}
