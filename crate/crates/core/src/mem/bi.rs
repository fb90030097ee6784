//! Multi-host sharing of HDM-DB memory through a device directory and
//! Back-Invalidate snoops.
//!
//! Hosts talk to the device over one FIFO per direction per host, so a
//! BISnp never overtakes data the device sent earlier to the same host, and
//! a host writeback always reaches the device before its BIRsp.
//!
//! The directory always covers what hosts hold. It can be briefly larger:
//! a grant is recorded before the data leaves the device, and a sharer
//! stays listed until its BIRsp or eviction notice arrives. Once every
//! queue is drained the two are equal (exact sharer mode).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;

use super::MemError;
use crate::protocol::{BiRspOp, BiSnpOp, Message, M2sReqOp, M2sRwdOp, NdrOp, Opcode};

/// Meta values carried on MemRd/MemWr and MemData.
pub const META_INVALID: u8 = 0;
pub const META_ANY: u8 = 2;
pub const META_SHARED: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[derive(Default)]
pub enum DirState {
    #[default]
    I,
    S,
    E,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Want {
    Shared,
    Exclusive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SharerMode {
    /// One bit per host.
    #[default]
    Exact,
    /// One bit per group of `group` consecutive host ids; snoops every
    /// host of a marked group.
    Coarse { group: u16 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DirEntry {
    pub state: DirState,
    /// Host ids (exact) or group ids (coarse).
    pub bits: BTreeSet<u16>,
    last_use: u64,
}


/// A message between host `host` and the device.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BiMsg {
    pub msg: Message,
    pub host: u16,
    pub value: Option<u64>,
}

impl BiMsg {
    fn new(opcode: Opcode, line: u64, host: u16) -> Self {
        let mut msg = Message::at(opcode, line, 0);
        match opcode.default_channel() {
            crate::protocol::Channel::M2sReq | crate::protocol::Channel::M2sRwd | crate::protocol::Channel::M2sBirsp => {
                msg.spid = Some(host)
            }
            _ => msg.dpid = Some(host),
        }
        BiMsg { msg, host, value: None }
    }

    fn meta(mut self, m: u8) -> Self {
        self.msg.meta = Some(m);
        self
    }

    fn value(mut self, v: u64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn line(&self) -> u64 {
        self.msg.line().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BiEvent {
    Request { host: u16, line: u64, want: Want },
    BiSnp { host: u16, line: u64, op: BiSnpOp },
    BiRsp { host: u16, line: u64, op: BiRspOp },
    Dir { line: u64, state: DirState, sharers: Vec<u16> },
    Data { host: u16, line: u64 },
    Timeout { host: u16, line: u64 },
}

impl fmt::Display for BiEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiEvent::Request { host, line, want } => write!(f, "H{host} MemRd {want:?} A={line:#x}"),
            BiEvent::BiSnp { host, line, op } => write!(f, "{op:?} -> H{host} A={line:#x}"),
            BiEvent::BiRsp { host, line, op } => write!(f, "{op:?} <- H{host} A={line:#x}"),
            BiEvent::Dir { line, state, sharers } => {
                let s: Vec<String> = sharers.iter().map(|h| format!("H{h}")).collect();
                write!(f, "DIR A={line:#x} {state:?}{{{}}}", s.join(","))
            }
            BiEvent::Data { host, line } => write!(f, "MemData -> H{host} A={line:#x}"),
            BiEvent::Timeout { host, line } => write!(f, "timeout H{host} A={line:#x}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct BiTxn {
    req: BiMsg,
    waiting: BTreeSet<(u16, u64)>,
}

/// Device side: directory with optional capacity, media values, per-line
/// serialization.
#[derive(Clone, Debug)]
pub struct BiDevice {
    pub mode: SharerMode,
    host_ids: Vec<u16>,
    dir: BTreeMap<u64, DirEntry>,
    media: BTreeMap<u64, u64>,
    capacity: Option<usize>,
    busy: BTreeMap<u64, BiTxn>,
    victim_of: BTreeMap<u64, u64>,
    queue: VecDeque<BiMsg>,
    clock: u64,
    pub transcript: Vec<BiEvent>,
    /// Writes committed at the device on behalf of non-caching writers.
    pub committed: Vec<(u64, u64)>,
}

impl BiDevice {
    pub fn new(host_ids: Vec<u16>, mode: SharerMode, capacity: Option<usize>) -> Self {
        BiDevice {
            mode,
            host_ids,
            dir: BTreeMap::new(),
            media: BTreeMap::new(),
            capacity,
            busy: BTreeMap::new(),
            victim_of: BTreeMap::new(),
            queue: VecDeque::new(),
            clock: 0,
            transcript: Vec::new(),
            committed: Vec::new(),
        }
    }

    pub fn entry(&self, line: u64) -> DirEntry {
        self.dir.get(&line).cloned().unwrap_or_default()
    }

    pub fn tracked(&self) -> usize {
        self.dir.len()
    }

    fn bit(&self, host: u16) -> u16 {
        match self.mode {
            SharerMode::Exact => host,
            SharerMode::Coarse { group } => host / group.max(1),
        }
    }

    /// Hosts the directory says may hold `line`.
    pub fn sharers(&self, line: u64) -> BTreeSet<u16> {
        let e = self.entry(line);
        self.host_ids.iter().copied().filter(|h| e.bits.contains(&self.bit(*h))).collect()
    }

    pub fn is_quiet(&self) -> bool {
        self.busy.is_empty() && self.queue.is_empty()
    }

    fn is_busy(&self, line: u64) -> bool {
        self.busy.contains_key(&line) || self.victim_of.contains_key(&line)
    }

    fn log_dir(&mut self, line: u64) {
        let e = self.entry(line);
        let sharers = self.sharers(line).into_iter().collect();
        self.transcript.push(BiEvent::Dir { line, state: e.state, sharers });
    }

    fn set_entry(&mut self, line: u64, e: DirEntry) {
        if e.state == DirState::I || e.bits.is_empty() {
            self.dir.remove(&line);
        } else {
            self.dir.insert(line, e);
        }
    }

    fn drop_host(&mut self, line: u64, host: u16) {
        // coarse bits cannot be cleared for one host
        if self.mode != SharerMode::Exact {
            return;
        }
        let mut e = self.entry(line);
        e.bits.remove(&host);
        self.set_entry(line, e);
    }

    pub fn handle(&mut self, m: BiMsg) -> Vec<BiMsg> {
        let mut out = Vec::new();
        let line = m.line();
        match m.msg.opcode {
            Opcode::M2sReq(M2sReqOp::MemRd) => self.admit(m, &mut out),
            Opcode::M2sRwd(_) if m.msg.meta.is_some() => {
                // writeback from a holder; non-caching writes carry no meta
                self.media.insert(line, m.value.unwrap_or(0));
                if m.msg.meta == Some(META_SHARED) {
                    let mut e = self.entry(line);
                    e.state = DirState::S;
                    self.set_entry(line, e);
                } else {
                    self.drop_host(line, m.host);
                }
                out.push(BiMsg::new(Opcode::S2mNdr(NdrOp::Cmp), line, m.host));
            }
            Opcode::M2sRwd(_) => self.admit(m, &mut out),
            Opcode::M2sReq(M2sReqOp::MemInv) => {
                self.drop_host(line, m.host);
                out.push(BiMsg::new(Opcode::S2mNdr(NdrOp::Cmp), line, m.host));
            }
            Opcode::M2sBirsp(op) => self.on_birsp(op, m, &mut out),
            _ => {}
        }
        out
    }

    fn admit(&mut self, m: BiMsg, out: &mut Vec<BiMsg>) {
        if self.is_busy(m.line()) {
            self.queue.push_back(m);
        } else {
            self.start(m, out);
        }
    }

    fn snoop(&mut self, host: u16, line: u64, op: BiSnpOp, waiting: &mut BTreeSet<(u16, u64)>, out: &mut Vec<BiMsg>) {
        waiting.insert((host, line));
        self.transcript.push(BiEvent::BiSnp { host, line, op });
        out.push(BiMsg::new(Opcode::S2mBisnp(op), line, host));
    }

    fn start(&mut self, req: BiMsg, out: &mut Vec<BiMsg>) {
        let line = req.line();
        let host = req.host;
        let is_read = req.msg.opcode == Opcode::M2sReq(M2sReqOp::MemRd);
        let want = if req.msg.meta == Some(META_SHARED) { Want::Shared } else { Want::Exclusive };
        if is_read {
            self.transcript.push(BiEvent::Request { host, line, want });
        }
        let mut waiting = BTreeSet::new();
        if is_read && !self.dir.contains_key(&line) && self.capacity.is_some_and(|c| self.dir.len() >= c) {
            let victim = self
                .dir
                .iter()
                .filter(|(l, _)| !self.is_busy(**l))
                .min_by_key(|(_, e)| e.last_use)
                .map(|(l, _)| *l);
            match victim {
                Some(v) => {
                    for h in self.sharers(v) {
                        self.snoop(h, v, BiSnpOp::BiSnpInv, &mut waiting, out);
                    }
                    self.victim_of.insert(v, line);
                }
                None => {
                    self.queue.push_front(req);
                    return;
                }
            }
        }
        let e = self.entry(line);
        let others: Vec<u16> = self.sharers(line).into_iter().filter(|h| *h != host).collect();
        match (is_read, want) {
            (true, Want::Shared) => {
                if e.state == DirState::E {
                    for h in others {
                        self.snoop(h, line, BiSnpOp::BiSnpData, &mut waiting, out);
                    }
                }
            }
            _ => {
                for h in others {
                    self.snoop(h, line, BiSnpOp::BiSnpInv, &mut waiting, out);
                }
            }
        }
        let done = waiting.is_empty();
        self.busy.insert(line, BiTxn { req, waiting });
        if done {
            self.proceed(line, out);
        }
    }

    fn on_birsp(&mut self, op: BiRspOp, m: BiMsg, out: &mut Vec<BiMsg>) {
        let (line, host) = (m.line(), m.host);
        self.transcript.push(BiEvent::BiRsp { host, line, op });
        match op {
            BiRspOp::BiRspI => self.drop_host(line, host),
            BiRspOp::BiRspS | BiRspOp::BiRspE => {
                let mut e = self.entry(line);
                if e.state == DirState::E {
                    e.state = DirState::S;
                }
                self.set_entry(line, e);
            }
        }
        self.answered(host, line, out);
    }

    fn answered(&mut self, host: u16, line: u64, out: &mut Vec<BiMsg>) {
        let key = if self.busy.get(&line).is_some_and(|t| t.waiting.contains(&(host, line))) {
            line
        } else if let Some(k) = self.victim_of.get(&line) {
            *k
        } else {
            return;
        };
        let Some(t) = self.busy.get_mut(&key) else { return };
        t.waiting.remove(&(host, line));
        if t.waiting.is_empty() {
            self.proceed(key, out);
        }
    }

    fn proceed(&mut self, line: u64, out: &mut Vec<BiMsg>) {
        // a fully invalidated victim leaves the directory
        let victims: Vec<u64> = self.victim_of.iter().filter(|(_, k)| **k == line).map(|(v, _)| *v).collect();
        for v in victims {
            self.dir.remove(&v);
        }
        let req = self.busy[&line].req;
        let host = req.host;
        self.clock += 1;
        if req.msg.opcode == Opcode::M2sReq(M2sReqOp::MemRd) {
            let mut e = self.entry(line);
            let bit = self.bit(host);
            if req.msg.meta == Some(META_SHARED) {
                e.state = DirState::S;
                e.bits.insert(bit);
            } else {
                e.state = DirState::E;
                e.bits = BTreeSet::from([bit]);
            }
            e.last_use = self.clock;
            let shared = e.state == DirState::S;
            self.dir.insert(line, e);
            // directory first, then data
            self.log_dir(line);
            let v = self.media.get(&line).copied().unwrap_or(0);
            self.transcript.push(BiEvent::Data { host, line });
            out.push(BiMsg::new(Opcode::S2mDrs, line, host).meta(if shared { META_SHARED } else { META_ANY }).value(v));
        } else {
            // non-caching write: every copy is gone, commit
            let v = req.value.unwrap_or(0);
            self.media.insert(line, v);
            self.committed.push((line, v));
            self.dir.remove(&line);
            out.push(BiMsg::new(Opcode::S2mNdr(NdrOp::Cmp), line, host));
        }
        self.finish(line, out);
    }

    fn finish(&mut self, line: u64, out: &mut Vec<BiMsg>) {
        self.busy.remove(&line);
        self.victim_of.retain(|_, k| *k != line);
        let mut waiting = std::mem::take(&mut self.queue);
        while let Some(r) = waiting.pop_front() {
            if self.is_busy(r.line()) {
                self.queue.push_back(r);
            } else {
                self.start(r, out);
            }
        }
    }

    /// Gives up on hosts that never answered: they are dropped from the
    /// directory and the stalled requests proceed.
    pub fn expire(&mut self) -> (Vec<MemError>, Vec<BiMsg>) {
        let mut errs = Vec::new();
        let mut out = Vec::new();
        let waiting: Vec<(u16, u64)> = self.busy.values().flat_map(|t| t.waiting.iter().copied()).collect();
        for (host, line) in waiting {
            errs.push(MemError::HostTimeout(host));
            self.transcript.push(BiEvent::Timeout { host, line });
            self.drop_host(line, host);
            if self.mode != SharerMode::Exact {
                self.dir.remove(&line);
            }
            self.answered(host, line, &mut out);
        }
        (errs, out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HostState {
    I,
    S,
    E,
    M,
}

#[derive(Clone, Debug, Default)]
pub struct BiHost {
    pub id: u16,
    lines: BTreeMap<u64, (HostState, u64)>,
    pending: BTreeMap<u64, Option<Want>>,
    /// Drops every BISnp without answering.
    pub unresponsive: bool,
}

impl BiHost {
    pub fn new(id: u16) -> Self {
        BiHost { id, ..Default::default() }
    }

    pub fn state(&self, line: u64) -> HostState {
        self.lines.get(&line).map(|l| l.0).unwrap_or(HostState::I)
    }

    pub fn is_pending(&self, line: u64) -> bool {
        self.pending.contains_key(&line)
    }

    pub fn is_quiet(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn can_read(&self, line: u64, want: Want) -> bool {
        !self.is_pending(line)
            && match want {
                Want::Shared => self.state(line) == HostState::I,
                Want::Exclusive => matches!(self.state(line), HostState::I | HostState::S),
            }
    }

    pub fn read(&mut self, line: u64, want: Want) -> Option<BiMsg> {
        if !self.can_read(line, want) {
            return None;
        }
        self.pending.insert(line, Some(want));
        let meta = if want == Want::Shared { META_SHARED } else { META_ANY };
        Some(BiMsg::new(Opcode::M2sReq(M2sReqOp::MemRd), line, self.id).meta(meta))
    }

    /// Drops a held line, telling the device.
    pub fn evict(&mut self, line: u64) -> Option<BiMsg> {
        if self.is_pending(line) {
            return None;
        }
        let (st, v) = self.lines.remove(&line)?;
        Some(match st {
            HostState::M => BiMsg::new(Opcode::M2sRwd(M2sRwdOp::MemWr), line, self.id).meta(META_INVALID).value(v),
            _ => BiMsg::new(Opcode::M2sReq(M2sReqOp::MemInv), line, self.id).meta(META_INVALID),
        })
    }

    pub fn can_store(&self, line: u64) -> bool {
        !self.is_pending(line) && matches!(self.state(line), HostState::E | HostState::M)
    }

    pub fn store(&mut self, line: u64, v: u64) -> bool {
        if !self.can_store(line) {
            return false;
        }
        self.lines.insert(line, (HostState::M, v));
        true
    }

    /// Non-caching full-line write.
    pub fn write_through(&mut self, line: u64, v: u64) -> Option<BiMsg> {
        if self.is_pending(line) || self.state(line) != HostState::I {
            return None;
        }
        self.pending.insert(line, None);
        Some(BiMsg::new(Opcode::M2sRwd(M2sRwdOp::MemWr), line, self.id).value(v))
    }

    /// Returns replies and, for completed reads, the value received.
    pub fn receive(&mut self, m: &BiMsg) -> (Vec<BiMsg>, Option<u64>) {
        let line = m.line();
        match m.msg.opcode {
            Opcode::S2mDrs => {
                self.pending.remove(&line);
                let st = if m.msg.meta == Some(META_SHARED) { HostState::S } else { HostState::E };
                let v = m.value.unwrap_or(0);
                self.lines.insert(line, (st, v));
                (Vec::new(), Some(v))
            }
            Opcode::S2mNdr(_) => {
                if self.pending.get(&line) == Some(&None) {
                    self.pending.remove(&line);
                }
                (Vec::new(), None)
            }
            Opcode::S2mBisnp(op) => {
                if self.unresponsive {
                    return (Vec::new(), None);
                }
                let mut out = Vec::new();
                let (st, v) = self.lines.get(&line).copied().unwrap_or((HostState::I, 0));
                let keep_shared = op == BiSnpOp::BiSnpData && st != HostState::I;
                if st == HostState::M {
                    let meta = if keep_shared { META_SHARED } else { META_INVALID };
                    out.push(BiMsg::new(Opcode::M2sRwd(M2sRwdOp::MemWr), line, self.id).meta(meta).value(v));
                }
                let rsp = if keep_shared {
                    self.lines.insert(line, (HostState::S, v));
                    BiRspOp::BiRspS
                } else {
                    self.lines.remove(&line);
                    BiRspOp::BiRspI
                };
                out.push(BiMsg::new(Opcode::M2sBirsp(rsp), line, self.id));
                (out, None)
            }
            _ => (Vec::new(), None),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BiAction {
    Read { host: u16, line: u64, want: Want },
    Evict { host: u16, line: u64 },
    Store { host: u16, line: u64 },
    WriteThrough { host: u16, line: u64 },
    DeliverM2s { host: u16 },
    DeliverS2m { host: u16 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BiViolation {
    /// A host holds a line the directory does not list it for.
    Unsound { host: u16, line: u64 },
    /// Drained, yet the directory lists a host that holds nothing.
    Incomplete { line: u64 },
    /// Two owners, or an owner and a sharer, across hosts.
    Swmr { line: u64 },
    StaleRead { host: u16, line: u64 },
}

/// Hosts, device and the per-host queues between them.
#[derive(Clone, Debug)]
pub struct MultiHostSystem {
    pub hosts: Vec<BiHost>,
    pub device: BiDevice,
    m2s: Vec<VecDeque<BiMsg>>,
    s2m: Vec<VecDeque<BiMsg>>,
    latest: BTreeMap<u64, u64>,
    pub violations: Vec<BiViolation>,
}

impl MultiHostSystem {
    /// Hosts are numbered 1..=n.
    pub fn new(n: u16, mode: SharerMode, capacity: Option<usize>) -> Self {
        let ids: Vec<u16> = (1..=n).collect();
        MultiHostSystem {
            hosts: ids.iter().map(|i| BiHost::new(*i)).collect(),
            device: BiDevice::new(ids, mode, capacity),
            m2s: vec![VecDeque::new(); n as usize],
            s2m: vec![VecDeque::new(); n as usize],
            latest: BTreeMap::new(),
            violations: Vec::new(),
        }
    }

    fn idx(host: u16) -> usize {
        host as usize - 1
    }

    pub fn host(&self, id: u16) -> &BiHost {
        &self.hosts[Self::idx(id)]
    }

    pub fn host_mut(&mut self, id: u16) -> &mut BiHost {
        &mut self.hosts[Self::idx(id)]
    }

    pub fn is_quiescent(&self) -> bool {
        self.m2s.iter().all(VecDeque::is_empty)
            && self.s2m.iter().all(VecDeque::is_empty)
            && self.device.is_quiet()
            && self.hosts.iter().all(BiHost::is_quiet)
    }

    fn send_m2s(&mut self, m: BiMsg) {
        self.m2s[Self::idx(m.host)].push_back(m);
    }

    /// Applies an action if it is enabled; returns whether it was.
    pub fn apply(&mut self, a: BiAction) -> bool {
        match a {
            BiAction::Read { host, line, want } => match self.host_mut(host).read(line, want) {
                Some(m) => self.send_m2s(m),
                None => return false,
            },
            BiAction::Evict { host, line } => match self.host_mut(host).evict(line) {
                Some(m) => self.send_m2s(m),
                None => return false,
            },
            BiAction::Store { host, line } => {
                let v = self.latest.get(&line).copied().unwrap_or(0) + 1;
                if !self.host_mut(host).store(line, v) {
                    return false;
                }
                self.latest.insert(line, v);
            }
            BiAction::WriteThrough { host, line } => {
                // value fixed at issue; it becomes visible at commit
                let v = 1_000_000 + self.latest.get(&line).copied().unwrap_or(0);
                match self.host_mut(host).write_through(line, v) {
                    Some(m) => self.send_m2s(m),
                    None => return false,
                }
            }
            BiAction::DeliverM2s { host } => {
                let Some(m) = self.m2s[Self::idx(host)].pop_front() else { return false };
                let before = self.device.committed.len();
                for o in self.device.handle(m) {
                    self.s2m[Self::idx(o.host)].push_back(o);
                }
                for &(l, v) in &self.device.committed[before..] {
                    self.latest.insert(l, v);
                }
            }
            BiAction::DeliverS2m { host } => {
                let Some(m) = self.s2m[Self::idx(host)].pop_front() else { return false };
                let (replies, read) = self.host_mut(host).receive(&m);
                if let Some(v) = read {
                    if v != self.latest.get(&m.line()).copied().unwrap_or(0) {
                        self.violations.push(BiViolation::StaleRead { host, line: m.line() });
                    }
                }
                for r in replies {
                    self.send_m2s(r);
                }
            }
        }
        self.check();
        true
    }

    /// Runs the device timeout path for hosts that never answer.
    pub fn expire(&mut self) -> Vec<MemError> {
        let (errs, out) = self.device.expire();
        for o in out {
            self.s2m[Self::idx(o.host)].push_back(o);
        }
        errs
    }

    fn lines(&self) -> BTreeSet<u64> {
        self.hosts.iter().flat_map(|h| h.lines.keys().copied()).collect()
    }

    fn check(&mut self) {
        for line in self.lines() {
            let sharers = self.device.sharers(line);
            let dir = self.device.entry(line);
            let mut owners = 0;
            let mut holders = 0;
            for h in &self.hosts {
                let st = h.state(line);
                if st == HostState::I {
                    continue;
                }
                holders += 1;
                let owner = matches!(st, HostState::E | HostState::M);
                owners += usize::from(owner);
                if !sharers.contains(&h.id) || (owner && dir.state != DirState::E) {
                    self.violations.push(BiViolation::Unsound { host: h.id, line });
                }
            }
            if owners > 1 || (owners == 1 && holders > 1) {
                self.violations.push(BiViolation::Swmr { line });
            }
        }
    }

    /// At quiescence, exact-mode sharers must equal actual holders.
    pub fn check_complete(&mut self) {
        if self.device.mode != SharerMode::Exact {
            return;
        }
        let lines: BTreeSet<u64> = self.device.dir.keys().copied().chain(self.lines()).collect();
        for line in lines {
            let holders: BTreeSet<u16> =
                self.hosts.iter().filter(|h| h.state(line) != HostState::I).map(|h| h.id).collect();
            if holders != self.device.sharers(line) {
                self.violations.push(BiViolation::Incomplete { line });
            }
        }
    }

    /// Delivers queued messages round-robin until nothing is in flight.
    pub fn drain(&mut self) {
        loop {
            let mut moved = false;
            for h in 1..=self.hosts.len() as u16 {
                moved |= self.apply(BiAction::DeliverM2s { host: h });
                moved |= self.apply(BiAction::DeliverS2m { host: h });
            }
            if !moved {
                break;
            }
        }
    }

    fn enabled(&self, lines: &[u64]) -> Vec<BiAction> {
        let mut v = Vec::new();
        for h in &self.hosts {
            let host = h.id;
            for &line in lines {
                for want in [Want::Shared, Want::Exclusive] {
                    if h.can_read(line, want) {
                        v.push(BiAction::Read { host, line, want });
                    }
                }
                if !h.is_pending(line) && h.state(line) != HostState::I {
                    v.push(BiAction::Evict { host, line });
                }
                if h.can_store(line) {
                    v.push(BiAction::Store { host, line });
                }
                if !h.is_pending(line) && h.state(line) == HostState::I {
                    v.push(BiAction::WriteThrough { host, line });
                }
            }
            if !self.m2s[Self::idx(host)].is_empty() {
                v.push(BiAction::DeliverM2s { host });
            }
            if !self.s2m[Self::idx(host)].is_empty() {
                v.push(BiAction::DeliverS2m { host });
            }
        }
        v
    }

    /// Random workload: `steps` random enabled actions over `lines`, then a
    /// drain and a completeness check.
    pub fn run_random<R: Rng>(&mut self, rng: &mut R, lines: &[u64], steps: usize) {
        for _ in 0..steps {
            let acts = self.enabled(lines);
            if acts.is_empty() {
                break;
            }
            let a = acts[rng.gen_range(0..acts.len())];
            self.apply(a);
        }
        self.drain();
        self.check_complete();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn read(sys: &mut MultiHostSystem, host: u16, want: Want) {
        assert!(sys.apply(BiAction::Read { host, line: 0, want }));
        sys.drain();
    }

    #[test]
    fn shared_then_exclusive_sequence() {
        let mut sys = MultiHostSystem::new(4, SharerMode::Exact, None);
        read(&mut sys, 1, Want::Shared);
        read(&mut sys, 3, Want::Shared);
        read(&mut sys, 4, Want::Exclusive);
        let key: Vec<String> = sys
            .device
            .transcript
            .iter()
            .filter(|e| matches!(e, BiEvent::Dir { .. } | BiEvent::BiSnp { .. }))
            .map(|e| e.to_string())
            .collect();
        assert_eq!(
            key,
            [
                "DIR A=0x0 S{H1}",
                "DIR A=0x0 S{H1,H3}",
                "BiSnpInv -> H1 A=0x0",
                "BiSnpInv -> H3 A=0x0",
                "DIR A=0x0 E{H4}",
            ]
        );
        assert_eq!(sys.host(4).state(0), HostState::E);
        assert_eq!(sys.host(1).state(0), HostState::I);
        assert!(sys.violations.is_empty());
    }

    #[test]
    fn full_directory_evicts_a_victim_first() {
        let mut sys = MultiHostSystem::new(2, SharerMode::Exact, Some(1));
        assert!(sys.apply(BiAction::Read { host: 1, line: 0, want: Want::Shared }));
        sys.drain();
        assert!(sys.apply(BiAction::Read { host: 2, line: 64, want: Want::Shared }));
        sys.drain();
        assert_eq!(sys.host(1).state(0), HostState::I);
        assert_eq!(sys.host(2).state(64), HostState::S);
        assert_eq!(sys.device.tracked(), 1);
        sys.check_complete();
        assert!(sys.violations.is_empty());
    }

    #[test]
    fn dirty_owner_writes_back_before_sharing() {
        let mut sys = MultiHostSystem::new(2, SharerMode::Exact, None);
        read(&mut sys, 1, Want::Exclusive);
        assert!(sys.apply(BiAction::Store { host: 1, line: 0 }));
        read(&mut sys, 2, Want::Shared);
        assert_eq!(sys.host(1).state(0), HostState::S);
        assert_eq!(sys.host(2).state(0), HostState::S);
        assert!(sys.violations.is_empty(), "{:?}", sys.violations);
    }

    #[test]
    fn unresponsive_host_times_out() {
        let mut sys = MultiHostSystem::new(2, SharerMode::Exact, None);
        read(&mut sys, 1, Want::Shared);
        sys.host_mut(1).unresponsive = true;
        read(&mut sys, 2, Want::Exclusive);
        assert_eq!(sys.host(2).state(0), HostState::I);
        let errs = sys.expire();
        assert_eq!(errs, vec![MemError::HostTimeout(1)]);
        sys.drain();
        assert_eq!(sys.host(2).state(0), HostState::E);
    }

    #[test]
    fn random_workloads_keep_directory_sound() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sys = MultiHostSystem::new(4, SharerMode::Exact, Some(2));
            sys.run_random(&mut rng, &[0, 64, 128], 200);
            assert!(sys.violations.is_empty(), "seed {seed}: {:?}", sys.violations);
            assert!(sys.is_quiescent());
        }
    }

    #[test]
    fn coarse_mode_over_snoops_but_stays_sound() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sys = MultiHostSystem::new(4, SharerMode::Coarse { group: 2 }, None);
            sys.run_random(&mut rng, &[0, 64], 200);
            assert!(sys.violations.is_empty(), "seed {seed}: {:?}", sys.violations);
        }
    }
}
