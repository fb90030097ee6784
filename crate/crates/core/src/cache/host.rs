//! Host home agent: serializes requests per line, snoops peers through an
//! exact snoop filter and grants GO.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::CacheMsg;
use crate::protocol::{D2hCategory, D2hReqOp, D2hRspOp, H2dRspOp, Mesi, Opcode, SnpOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SfState {
    S,
    /// E or M; the host cannot tell which.
    EorM,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SfEntry {
    pub holders: BTreeMap<u8, SfState>,
    pub last_grant: u64,
}

/// Exact snoop filter with an optional entry bound. The victim on overflow
/// is the least recently granted entry.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SnoopFilter {
    entries: BTreeMap<u64, SfEntry>,
    capacity: Option<usize>,
    clock: u64,
}

impl SnoopFilter {
    pub fn new(capacity: Option<usize>) -> Self {
        SnoopFilter {
            capacity,
            ..Default::default()
        }
    }

    /// Advertised bound on tracked lines.
    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, line: u64) -> bool {
        self.entries.contains_key(&line)
    }

    pub fn holders(&self, line: u64) -> BTreeMap<u8, SfState> {
        self.entries.get(&line).map(|e| e.holders.clone()).unwrap_or_default()
    }

    pub fn holds(&self, line: u64, dev: u8) -> bool {
        self.entries.get(&line).is_some_and(|e| e.holders.contains_key(&dev))
    }

    pub fn is_full(&self) -> bool {
        self.capacity.is_some_and(|c| self.entries.len() >= c)
    }

    pub fn grant(&mut self, line: u64, dev: u8, st: SfState) {
        self.clock += 1;
        let e = self.entries.entry(line).or_default();
        if st == SfState::EorM {
            e.holders.clear();
        }
        e.holders.insert(dev, st);
        e.last_grant = self.clock;
    }

    pub fn downgrade(&mut self, line: u64, dev: u8) {
        if let Some(h) = self.entries.get_mut(&line).and_then(|e| e.holders.get_mut(&dev)) {
            *h = SfState::S;
        }
    }

    pub fn remove(&mut self, line: u64, dev: u8) {
        if let Some(e) = self.entries.get_mut(&line) {
            e.holders.remove(&dev);
            if e.holders.is_empty() {
                self.entries.remove(&line);
            }
        }
    }

    pub fn victim(&self, exclude: &BTreeSet<u64>) -> Option<u64> {
        self.entries
            .iter()
            .filter(|(l, _)| !exclude.contains(l))
            .min_by_key(|(_, e)| e.last_grant)
            .map(|(l, _)| *l)
    }

    pub fn lines(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Txn {
    /// `None` for a host-initiated invalidation.
    req: Option<CacheMsg>,
    snoops: BTreeSet<(u8, u64)>,
    /// Data forwarded by a snooped owner.
    fwd: Option<u64>,
    awaiting_data: bool,
}

/// Messages to send (addressed by `cache_id`) plus writes that became
/// globally visible at the host.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HostOut {
    pub msgs: Vec<CacheMsg>,
    pub writes: Vec<(u64, u64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct HomeAgent {
    pub sf: SnoopFilter,
    mem: BTreeMap<u64, u64>,
    busy: BTreeMap<u64, Txn>,
    /// Victim line -> line whose request is evicting it.
    victim_of: BTreeMap<u64, u64>,
    stalled: VecDeque<CacheMsg>,
}

impl HomeAgent {
    pub fn new(sf_capacity: Option<usize>) -> Self {
        HomeAgent {
            sf: SnoopFilter::new(sf_capacity),
            ..Default::default()
        }
    }

    pub fn memory(&self, line: u64) -> u64 {
        self.mem.get(&line).copied().unwrap_or(0)
    }

    pub fn is_busy(&self, line: u64) -> bool {
        self.busy.contains_key(&line) || self.victim_of.contains_key(&line)
    }

    pub fn stalled(&self) -> usize {
        self.stalled.len()
    }

    pub fn is_quiet(&self) -> bool {
        self.busy.is_empty() && self.stalled.is_empty()
    }

    pub fn handle(&mut self, m: &CacheMsg) -> HostOut {
        let mut out = HostOut::default();
        match m.msg.opcode {
            Opcode::D2hReq(_) => {
                if self.is_busy(m.line()) {
                    self.stalled.push_back(*m);
                } else {
                    self.start(*m, &mut out);
                }
            }
            Opcode::D2hRsp(rsp) => self.on_snoop_response(rsp, m, &mut out),
            Opcode::D2hData => self.on_data(m, &mut out),
            _ => {}
        }
        out
    }

    /// Host-initiated SnpInv of every holder of `line`. `None` if the line
    /// is busy or uncached.
    pub fn invalidate(&mut self, line: u64) -> Option<HostOut> {
        if self.is_busy(line) || !self.sf.contains(line) {
            return None;
        }
        let mut out = HostOut::default();
        let mut t = Txn {
            req: None,
            snoops: BTreeSet::new(),
            fwd: None,
            awaiting_data: false,
        };
        for dev in self.sf.holders(line).keys() {
            t.snoops.insert((*dev, line));
            out.msgs.push(snoop(SnpOp::SnpInv, line, 0, *dev));
        }
        self.busy.insert(line, t);
        Some(out)
    }

    fn start(&mut self, req: CacheMsg, out: &mut HostOut) {
        use D2hReqOp::*;
        let Opcode::D2hReq(op) = req.msg.opcode else { return };
        let line = req.line();
        let dev = req.dev();
        let holders = self.sf.holders(line);
        let others = holders.iter().filter(|(d, _)| **d != dev);
        let snoops: Vec<(SnpOp, u8)> = match op {
            RdShared | RdAny => others.filter(|(_, s)| **s == SfState::EorM).map(|(d, _)| (SnpOp::SnpData, *d)).collect(),
            RdCurr => others.filter(|(_, s)| **s == SfState::EorM).map(|(d, _)| (SnpOp::SnpCur, *d)).collect(),
            RdOwn | RdOwnNoData | ClFlush | ItoMWr | WrCur | WoWrInv | WoWrInvF | WrInv => {
                others.map(|(d, _)| (SnpOp::SnpInv, *d)).collect()
            }
            CacheFlushed | CleanEvict | DirtyEvict | CleanEvictNoData => Vec::new(),
        };
        let allocates = matches!(op, RdShared | RdAny | RdOwn | RdOwnNoData);
        let mut t = Txn {
            req: Some(req),
            snoops: BTreeSet::new(),
            fwd: None,
            awaiting_data: false,
        };
        if allocates && !self.sf.contains(line) && self.sf.is_full() {
            let mut exclude: BTreeSet<u64> = self.busy.keys().copied().collect();
            exclude.extend(self.victim_of.keys());
            exclude.insert(line);
            match self.sf.victim(&exclude) {
                Some(v) => {
                    for d in self.sf.holders(v).keys() {
                        t.snoops.insert((*d, v));
                        out.msgs.push(snoop(SnpOp::SnpInv, v, req.msg.tag, *d));
                    }
                    self.victim_of.insert(v, line);
                }
                None => {
                    self.stalled.push_front(req);
                    return;
                }
            }
        }
        for (op, d) in snoops {
            t.snoops.insert((d, line));
            out.msgs.push(snoop(op, line, req.msg.tag, d));
        }
        let done = t.snoops.is_empty();
        self.busy.insert(line, t);
        if done {
            self.proceed(line, out);
        }
    }

    fn on_snoop_response(&mut self, rsp: D2hRspOp, m: &CacheMsg, out: &mut HostOut) {
        use D2hRspOp::*;
        let (line, dev) = (m.line(), m.dev());
        let key = if self.busy.get(&line).is_some_and(|t| t.snoops.contains(&(dev, line))) {
            line
        } else if let Some(k) = self.victim_of.get(&line) {
            *k
        } else {
            return;
        };
        match rsp {
            RspIHitI | RspIHitSE | RspIFwdM => self.sf.remove(line, dev),
            RspSHitSE | RspSFwdM => self.sf.downgrade(line, dev),
            RspVHitV | RspVFwdV => {}
        }
        if let Some(v) = m.value {
            if matches!(rsp, RspIFwdM | RspSFwdM) {
                self.mem.insert(line, v);
            }
        }
        let Some(t) = self.busy.get_mut(&key) else { return };
        t.snoops.remove(&(dev, line));
        if line == key && m.value.is_some() {
            t.fwd = m.value;
        }
        if t.snoops.is_empty() {
            self.proceed(key, out);
        }
    }

    fn proceed(&mut self, line: u64, out: &mut HostOut) {
        use D2hReqOp::*;
        let Some(req) = self.busy[&line].req else {
            self.finish(line, out);
            return;
        };
        let Opcode::D2hReq(op) = req.msg.opcode else { unreachable!() };
        let dev = req.dev();
        let tag = req.msg.tag;
        let rsp = |r: H2dRspOp| CacheMsg::new(Opcode::H2dRsp(r), line, tag, dev);
        match op.category() {
            D2hCategory::Read => {
                let others = self.sf.holders(line).keys().any(|d| *d != dev);
                let grant = match op {
                    RdCurr => Mesi::I,
                    RdOwn => Mesi::E,
                    RdAny if !others => Mesi::E,
                    _ => Mesi::S,
                };
                match grant {
                    Mesi::E => self.sf.grant(line, dev, SfState::EorM),
                    Mesi::S => self.sf.grant(line, dev, SfState::S),
                    _ => {}
                }
                let v = self.busy[&line].fwd.unwrap_or_else(|| self.memory(line));
                out.msgs.push(rsp(H2dRspOp::Go(grant)));
                out.msgs.push(CacheMsg::new(Opcode::H2dData, line, tag, dev).with_value(v));
                self.finish(line, out);
            }
            D2hCategory::Read0 => {
                if op == RdOwnNoData {
                    self.sf.grant(line, dev, SfState::EorM);
                    out.msgs.push(rsp(H2dRspOp::Go(Mesi::E)));
                } else {
                    self.sf.remove(line, dev);
                    out.msgs.push(rsp(H2dRspOp::Go(Mesi::I)));
                }
                self.finish(line, out);
            }
            D2hCategory::Read0Write => {
                out.msgs.push(rsp(H2dRspOp::WritePull));
                self.busy.get_mut(&line).unwrap().awaiting_data = true;
            }
            D2hCategory::Write => {
                if op == CleanEvictNoData {
                    self.sf.remove(line, dev);
                    out.msgs.push(rsp(H2dRspOp::Go(Mesi::I)));
                    self.finish(line, out);
                } else {
                    out.msgs.push(rsp(H2dRspOp::GoWritePull));
                    self.busy.get_mut(&line).unwrap().awaiting_data = true;
                }
            }
        }
    }

    fn on_data(&mut self, m: &CacheMsg, out: &mut HostOut) {
        let line = m.line();
        let Some(t) = self.busy.get(&line) else { return };
        let Some(req) = t.req.filter(|r| t.awaiting_data && r.dev() == m.dev()) else { return };
        let Opcode::D2hReq(op) = req.msg.opcode else { unreachable!() };
        let dev = req.dev();
        self.sf.remove(line, dev);
        match op.category() {
            D2hCategory::Read0Write => {
                let v = m.value.unwrap_or(0);
                self.mem.insert(line, v);
                out.writes.push((line, v));
                out.msgs.push(CacheMsg::new(Opcode::H2dRsp(H2dRspOp::Go(Mesi::I)), line, req.msg.tag, dev));
            }
            _ => {
                // an evict whose data a snoop already collected is flagged bogus
                if !m.msg.bogus {
                    if let Some(v) = m.value {
                        self.mem.insert(line, v);
                    }
                }
            }
        }
        self.finish(line, out);
    }

    fn finish(&mut self, line: u64, out: &mut HostOut) {
        self.busy.remove(&line);
        let freed: Vec<u64> = self.victim_of.iter().filter(|(_, k)| **k == line).map(|(v, _)| *v).collect();
        for v in freed {
            self.victim_of.remove(&v);
        }
        // retry stalled requests in arrival order
        let mut waiting = std::mem::take(&mut self.stalled);
        while let Some(r) = waiting.pop_front() {
            if self.is_busy(r.line()) {
                self.stalled.push_back(r);
            } else {
                self.start(r, out);
            }
        }
    }
}

fn snoop(op: SnpOp, line: u64, tag: u16, dev: u8) -> CacheMsg {
    CacheMsg::new(Opcode::H2dReq(op), line, tag, dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(op: D2hReqOp, line: u64, dev: u8) -> CacheMsg {
        CacheMsg::new(Opcode::D2hReq(op), line, 0, dev)
    }

    fn ops(o: &HostOut) -> Vec<(u8, String)> {
        o.msgs.iter().map(|m| (m.dev(), m.msg.opcode.to_string())).collect()
    }

    #[test]
    fn rdown_uncached_gets_e_and_data() {
        let mut h = HomeAgent::new(None);
        let o = h.handle(&req(D2hReqOp::RdOwn, 0, 0));
        assert_eq!(ops(&o), vec![(0, "GO-E".into()), (0, "Data".into())]);
        assert_eq!(h.sf.holders(0).get(&0), Some(&SfState::EorM));
    }

    #[test]
    fn rdshared_snoops_exclusive_peer_first() {
        let mut h = HomeAgent::new(None);
        h.handle(&req(D2hReqOp::RdOwn, 0, 0));
        let o = h.handle(&req(D2hReqOp::RdShared, 0, 1));
        assert_eq!(ops(&o), vec![(0, "SnpData".into())]);
        // stalls a third request while the snoop is out
        h.handle(&req(D2hReqOp::RdShared, 0, 2));
        assert_eq!(h.stalled(), 1);
        let rsp = CacheMsg::new(Opcode::D2hRsp(D2hRspOp::RspSHitSE), 0, 0, 0);
        let o = h.handle(&rsp);
        assert_eq!(
            ops(&o),
            vec![(1, "GO-S".into()), (1, "Data".into()), (2, "GO-S".into()), (2, "Data".into())]
        );
        assert_eq!(h.sf.holders(0).len(), 3);
    }

    #[test]
    fn write_pull_then_go() {
        let mut h = HomeAgent::new(None);
        let o = h.handle(&req(D2hReqOp::WrInv, 0, 0));
        assert_eq!(ops(&o), vec![(0, "WritePull".into())]);
        let o = h.handle(&CacheMsg::new(Opcode::D2hData, 0, 0, 0).with_value(9));
        assert_eq!(ops(&o), vec![(0, "GO-I".into())]);
        assert_eq!(o.writes, vec![(0, 9)]);
        assert_eq!(h.memory(0), 9);
    }

    #[test]
    fn bogus_evict_data_is_ignored() {
        let mut h = HomeAgent::new(None);
        h.handle(&req(D2hReqOp::DirtyEvict, 0, 0));
        let mut d = CacheMsg::new(Opcode::D2hData, 0, 0, 0).with_value(4);
        d.msg.bogus = true;
        h.handle(&d);
        assert_eq!(h.memory(0), 0);
        assert!(h.is_quiet());
    }

    #[test]
    fn full_filter_back_invalidates_oldest() {
        let mut h = HomeAgent::new(Some(1));
        h.handle(&req(D2hReqOp::RdShared, 0, 0));
        let o = h.handle(&req(D2hReqOp::RdShared, 64, 1));
        assert_eq!(ops(&o), vec![(0, "SnpInv".into())]);
        let o = h.handle(&CacheMsg::new(Opcode::D2hRsp(D2hRspOp::RspIHitSE), 0, 0, 0));
        assert_eq!(ops(&o), vec![(1, "GO-S".into()), (1, "Data".into())]);
        assert_eq!(h.sf.len(), 1);
        assert!(h.sf.contains(64));
    }
}
