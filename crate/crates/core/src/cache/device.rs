//! Device-side cache controller: MESI lines over host memory, one
//! outstanding request per line.

use std::collections::{BTreeMap, BTreeSet};

use super::{CacheError, CacheMsg};
use crate::protocol::{D2hCategory, D2hReqOp, D2hRspOp, H2dRspOp, Mesi, Opcode, SnpOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pending {
    pub op: D2hReqOp,
    pub tag: u16,
    /// State granted by GO, once seen.
    pub go: Option<Mesi>,
    /// Data received ahead of (or after) GO.
    pub data: Option<u64>,
    /// Value pushed on WritePull for write requests.
    pub write_value: Option<u64>,
}

/// Line data held after an eviction until the host pulls it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EvictBuffer {
    pub value: Option<u64>,
    pub dirty: bool,
    /// A snoop already took the data; the pulled copy must be ignored.
    pub bogus: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DeviceLine {
    pub state: Mesi,
    pub data: Option<u64>,
    pub pending: Option<Pending>,
    pub evict: Option<EvictBuffer>,
}

impl Default for DeviceLine {
    fn default() -> Self {
        DeviceLine {
            state: Mesi::I,
            data: None,
            pending: None,
            evict: None,
        }
    }
}

/// What a device did in response to one incoming message.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Reaction {
    pub out: Vec<CacheMsg>,
    /// A read completed with this value while the line stayed valid.
    pub read_value: Option<u64>,
    pub transition: Option<(Mesi, Mesi)>,
    pub completed: Option<D2hReqOp>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeviceCache {
    pub id: u8,
    lines: BTreeMap<u64, DeviceLine>,
    /// Lines allowed to use CXL.cache; `None` allows all.
    allowed: Option<BTreeSet<u64>>,
    next_tag: u16,
}

impl DeviceCache {
    pub fn new(id: u8) -> Self {
        DeviceCache {
            id,
            lines: BTreeMap::new(),
            allowed: None,
            next_tag: 0,
        }
    }

    pub fn with_permissions(mut self, lines: impl IntoIterator<Item = u64>) -> Self {
        self.allowed = Some(lines.into_iter().collect());
        self
    }

    pub fn line(&self, line: u64) -> DeviceLine {
        self.lines.get(&line).copied().unwrap_or_default()
    }

    pub fn state(&self, line: u64) -> Mesi {
        self.line(line).state
    }

    pub fn lines(&self) -> impl Iterator<Item = (u64, &DeviceLine)> {
        self.lines.iter().map(|(a, l)| (*a, l))
    }

    pub fn is_quiet(&self) -> bool {
        self.lines.values().all(|l| l.pending.is_none())
    }

    fn put(&mut self, line: u64, l: DeviceLine) {
        if l == DeviceLine::default() {
            self.lines.remove(&line);
        } else {
            self.lines.insert(line, l);
        }
    }

    /// Whether `op` may be issued for `line` right now.
    pub fn can_issue(&self, op: D2hReqOp, line: u64) -> bool {
        self.check_issue(op, line).is_ok()
    }

    fn check_issue(&self, op: D2hReqOp, line: u64) -> Result<(), CacheError> {
        use D2hReqOp::*;
        if self.allowed.as_ref().is_some_and(|a| !a.contains(&line)) {
            return Err(CacheError::NotPermitted(line));
        }
        let l = self.line(line);
        if l.pending.is_some() {
            return Err(CacheError::AddressBusy(line));
        }
        let s = l.state;
        let ok = match op {
            RdOwn | RdOwnNoData | RdCurr => matches!(s, Mesi::I | Mesi::S),
            RdShared | RdAny | ClFlush | CacheFlushed => s == Mesi::I,
            ItoMWr | WrCur | WoWrInv | WoWrInvF | WrInv => s == Mesi::I,
            DirtyEvict => s == Mesi::M,
            CleanEvict | CleanEvictNoData => matches!(s, Mesi::E | Mesi::S),
        };
        if ok {
            return Ok(());
        }
        let write = op.category() == D2hCategory::Write;
        let (op, state) = (format!("{op:?}"), s.to_string());
        if write {
            Err(CacheError::IllegalStateForEvict { op, state })
        } else {
            Err(CacheError::IllegalState { op, state })
        }
    }

    /// Issues a D2H request. Write-category requests move the line to I
    /// immediately and park its data in an evict buffer.
    pub fn issue(&mut self, op: D2hReqOp, line: u64) -> Result<CacheMsg, CacheError> {
        self.issue_with_value(op, line, None)
    }

    /// As `issue`; `value` is the data pushed by a Read0-Write request.
    pub fn issue_with_value(&mut self, op: D2hReqOp, line: u64, value: Option<u64>) -> Result<CacheMsg, CacheError> {
        self.check_issue(op, line)?;
        let tag = self.next_tag;
        self.next_tag = self.next_tag.wrapping_add(1);
        let mut l = self.line(line);
        if op.category() == D2hCategory::Write {
            l.evict = Some(EvictBuffer {
                value: l.data,
                dirty: op == D2hReqOp::DirtyEvict,
                bogus: false,
            });
            l.state = Mesi::I;
            l.data = None;
        }
        l.pending = Some(Pending {
            op,
            tag,
            go: None,
            data: None,
            write_value: value,
        });
        self.put(line, l);
        Ok(CacheMsg::new(Opcode::D2hReq(op), line, tag, self.id))
    }

    /// Local store to an owned line (E or M).
    pub fn store(&mut self, line: u64, value: u64) -> Result<(), CacheError> {
        let mut l = self.line(line);
        if l.pending.is_some() || !l.state.is_owner() {
            return Err(CacheError::IllegalState {
                op: "store".into(),
                state: l.state.to_string(),
            });
        }
        l.state = Mesi::M;
        l.data = Some(value);
        self.put(line, l);
        Ok(())
    }

    pub fn can_store(&self, line: u64) -> bool {
        let l = self.line(line);
        l.pending.is_none() && l.state.is_owner()
    }

    pub fn receive(&mut self, m: &CacheMsg) -> Result<Reaction, CacheError> {
        match m.msg.opcode {
            Opcode::H2dReq(snp) => Ok(self.apply_snoop(snp, m)),
            Opcode::H2dRsp(rsp) => self.on_response(rsp, m),
            Opcode::H2dData => self.on_data(m),
            _ => Err(CacheError::Unexpected(m.msg.opcode.to_string())),
        }
    }

    fn rsp(&self, op: D2hRspOp, m: &CacheMsg) -> CacheMsg {
        CacheMsg::new(Opcode::D2hRsp(op), m.line(), m.msg.tag, self.id)
    }

    /// Applies a snoop. Forwarded data rides on the response message.
    pub fn apply_snoop(&mut self, snp: SnpOp, m: &CacheMsg) -> Reaction {
        use D2hRspOp::*;
        let line = m.line();
        let mut l = self.line(line);
        let old = l.state;
        let mut value = None;
        let (rsp, new) = match (snp, old) {
            (_, Mesi::I) => {
                match l.evict.as_mut() {
                    Some(ev) if ev.dirty && !ev.bogus => {
                        // evicted M data not yet pulled: hand it over now
                        ev.bogus = true;
                        value = ev.value;
                        (RspIFwdM, Mesi::I)
                    }
                    _ => (RspIHitI, Mesi::I),
                }
            }
            (SnpOp::SnpInv, Mesi::M) => {
                value = l.data;
                (RspIFwdM, Mesi::I)
            }
            (SnpOp::SnpInv, _) => (RspIHitSE, Mesi::I),
            (SnpOp::SnpData, Mesi::M) => {
                value = l.data;
                (RspSFwdM, Mesi::S)
            }
            (SnpOp::SnpData, _) => (RspSHitSE, Mesi::S),
            (SnpOp::SnpCur, Mesi::M) => {
                value = l.data;
                (RspVFwdV, Mesi::M)
            }
            (SnpOp::SnpCur, _) => (RspVHitV, old),
        };
        l.state = new;
        if new == Mesi::I {
            l.data = None;
        }
        self.put(line, l);
        let mut out = self.rsp(rsp, m);
        out.value = value;
        Reaction {
            out: vec![out],
            transition: (old != new).then_some((old, new)),
            ..Default::default()
        }
    }

    fn pending(&self, m: &CacheMsg) -> Result<(DeviceLine, Pending), CacheError> {
        let l = self.line(m.line());
        match l.pending {
            Some(p) => Ok((l, p)),
            None => Err(CacheError::Unexpected(format!("{} with nothing pending", m.msg.opcode))),
        }
    }

    fn on_response(&mut self, rsp: H2dRspOp, m: &CacheMsg) -> Result<Reaction, CacheError> {
        let line = m.line();
        let (mut l, mut p) = self.pending(m)?;
        let old = l.state;
        let mut r = Reaction::default();
        match (p.op.category(), rsp) {
            (_, H2dRspOp::GoErr) => {
                l.state = Mesi::I;
                l.pending = None;
                r.completed = Some(p.op);
            }
            (D2hCategory::Read, H2dRspOp::Go(s)) => {
                p.go = Some(s);
                if s.is_valid() {
                    l.state = s;
                }
                l.pending = Some(p);
                if p.data.is_some() {
                    self.finish_read(&mut l, p, &mut r);
                }
            }
            (D2hCategory::Read0, H2dRspOp::Go(s)) => {
                l.state = s;
                if s == Mesi::I {
                    l.data = None;
                }
                l.pending = None;
                r.completed = Some(p.op);
            }
            (D2hCategory::Read0Write, H2dRspOp::WritePull) => {
                let v = p.write_value.unwrap_or(0);
                r.out.push(CacheMsg::new(Opcode::D2hData, line, p.tag, self.id).with_value(v));
            }
            (D2hCategory::Read0Write, H2dRspOp::Go(_)) => {
                l.pending = None;
                r.completed = Some(p.op);
            }
            (D2hCategory::Write, H2dRspOp::GoWritePull) => {
                let ev = l.evict.take().unwrap_or(EvictBuffer {
                    value: None,
                    dirty: false,
                    bogus: true,
                });
                let mut d = CacheMsg::new(Opcode::D2hData, line, p.tag, self.id);
                d.value = ev.value;
                d.msg.bogus = ev.bogus || !ev.dirty;
                r.out.push(d);
                l.pending = None;
                r.completed = Some(p.op);
            }
            (D2hCategory::Write, H2dRspOp::Go(_)) => {
                l.evict = None;
                l.pending = None;
                r.completed = Some(p.op);
            }
            _ => return Err(CacheError::Unexpected(format!("{} for {:?}", m.msg.opcode, p.op))),
        }
        if old != l.state {
            r.transition = Some((old, l.state));
        }
        self.put(line, l);
        Ok(r)
    }

    fn on_data(&mut self, m: &CacheMsg) -> Result<Reaction, CacheError> {
        let line = m.line();
        let (mut l, mut p) = self.pending(m)?;
        if p.op.category() != D2hCategory::Read {
            return Err(CacheError::Unexpected(format!("data for {:?}", p.op)));
        }
        p.data = Some(m.value.unwrap_or(0));
        l.pending = Some(p);
        let mut r = Reaction::default();
        if p.go.is_some() {
            self.finish_read(&mut l, p, &mut r);
        }
        self.put(line, l);
        Ok(r)
    }

    fn finish_read(&self, l: &mut DeviceLine, p: Pending, r: &mut Reaction) {
        let v = p.data.unwrap_or(0);
        l.pending = None;
        r.completed = Some(p.op);
        if p.op == D2hReqOp::RdCurr {
            r.read_value = Some(v);
        } else if l.state.is_valid() {
            l.data = Some(v);
            r.read_value = Some(v);
        }
        // otherwise a snoop invalidated the line between GO and data; drop it
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn go(s: Mesi, line: u64, tag: u16) -> CacheMsg {
        CacheMsg::new(Opcode::H2dRsp(H2dRspOp::Go(s)), line, tag, 0)
    }

    fn data(line: u64, tag: u16, v: u64) -> CacheMsg {
        CacheMsg::new(Opcode::H2dData, line, tag, 0).with_value(v)
    }

    #[test]
    fn rdown_from_invalid_awaits_go_and_data() {
        let mut d = DeviceCache::new(0);
        let m = d.issue(D2hReqOp::RdOwn, 0x40).unwrap();
        assert_eq!(m.msg.opcode, Opcode::D2hReq(D2hReqOp::RdOwn));
        assert_eq!(d.issue(D2hReqOp::RdOwn, 0x40), Err(CacheError::AddressBusy(0x40)));
        let r = d.receive(&go(Mesi::E, 0x40, m.msg.tag)).unwrap();
        assert_eq!(r.read_value, None);
        let r = d.receive(&data(0x40, m.msg.tag, 7)).unwrap();
        assert_eq!(r.read_value, Some(7));
        assert_eq!(d.state(0x40), Mesi::E);
    }

    #[test]
    fn data_before_go_is_accepted() {
        let mut d = DeviceCache::new(0);
        let m = d.issue(D2hReqOp::RdShared, 0).unwrap();
        d.receive(&data(0, m.msg.tag, 3)).unwrap();
        let r = d.receive(&go(Mesi::S, 0, m.msg.tag)).unwrap();
        assert_eq!(r.read_value, Some(3));
        assert_eq!(d.state(0), Mesi::S);
    }

    #[test]
    fn upgrade_without_data() {
        let mut d = DeviceCache::new(0);
        let m = d.issue(D2hReqOp::RdShared, 0).unwrap();
        d.receive(&go(Mesi::S, 0, m.msg.tag)).unwrap();
        d.receive(&data(0, m.msg.tag, 1)).unwrap();
        let u = d.issue(D2hReqOp::RdOwnNoData, 0).unwrap();
        let r = d.receive(&go(Mesi::E, 0, u.msg.tag)).unwrap();
        assert_eq!(r.transition, Some((Mesi::S, Mesi::E)));
        assert_eq!(d.line(0).data, Some(1));
    }

    #[test]
    fn dirty_evict_needs_m() {
        let mut d = DeviceCache::new(0);
        assert!(matches!(
            d.issue(D2hReqOp::DirtyEvict, 0),
            Err(CacheError::IllegalStateForEvict { .. })
        ));
    }

    #[test]
    fn snoop_responses() {
        let mut d = DeviceCache::new(0);
        let m = d.issue(D2hReqOp::RdOwn, 0).unwrap();
        d.receive(&go(Mesi::E, 0, m.msg.tag)).unwrap();
        d.receive(&data(0, m.msg.tag, 0)).unwrap();
        let snp = CacheMsg::new(Opcode::H2dReq(SnpOp::SnpInv), 0, 9, 0);
        let r = d.receive(&snp).unwrap();
        assert_eq!(r.out[0].msg.opcode, Opcode::D2hRsp(D2hRspOp::RspIHitSE));
        assert_eq!(d.state(0), Mesi::I);
        let r = d.receive(&snp).unwrap();
        assert_eq!(r.out[0].msg.opcode, Opcode::D2hRsp(D2hRspOp::RspIHitI));
    }

    #[test]
    fn snooped_dirty_evict_marks_pull_bogus() {
        let mut d = DeviceCache::new(0);
        let m = d.issue(D2hReqOp::RdOwn, 0).unwrap();
        d.receive(&go(Mesi::E, 0, m.msg.tag)).unwrap();
        d.receive(&data(0, m.msg.tag, 0)).unwrap();
        d.store(0, 5).unwrap();
        let ev = d.issue(D2hReqOp::DirtyEvict, 0).unwrap();
        assert_eq!(d.state(0), Mesi::I);
        let r = d.receive(&CacheMsg::new(Opcode::H2dReq(SnpOp::SnpInv), 0, 1, 0)).unwrap();
        assert_eq!(r.out[0].msg.opcode, Opcode::D2hRsp(D2hRspOp::RspIFwdM));
        assert_eq!(r.out[0].value, Some(5));
        let pull = CacheMsg::new(Opcode::H2dRsp(H2dRspOp::GoWritePull), 0, ev.msg.tag, 0);
        let r = d.receive(&pull).unwrap();
        assert!(r.out[0].msg.bogus);
        assert!(d.is_quiet());
    }

    #[test]
    fn permission_map_limits_cache_use() {
        let mut d = DeviceCache::new(0).with_permissions([0x40]);
        assert!(d.issue(D2hReqOp::RdShared, 0x40).is_ok());
        assert_eq!(d.issue(D2hReqOp::RdShared, 0x80), Err(CacheError::NotPermitted(0x80)));
    }
}
