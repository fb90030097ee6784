//! Flit-level network of hosts, switches and memory devices.
//!
//! Every link direction owns a slot packer. Headers enter the packer only
//! while the receiver has a credit for their channel; credits come back one
//! flight time after the message lands. A flit occupies the wire for its
//! serialization time and arrives one flight time later. 68-byte links lose
//! one flit in 375 to control traffic. Switches store and forward whole
//! messages along the route HBR picked when the request was issued.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use super::workload::{Stats, WorkloadSpec};
use super::{Monitor, SimConfig, SimError, SimRecord};
use crate::fabric::qos::contain_error;
use crate::fabric::{DevLoad, Fabric, NodeKind, RateController};
use crate::flit::packer::{Packer, PendingHeader, PlannedSlot};
use crate::flit::{FlitMode, HeaderClass};
use crate::protocol::{Address, Channel, M2sReqOp, M2sRwdOp, Message, NdrOp, Opcode, LINE_BYTES};

pub type Ps = u64;

/// One in every this many 68B flits carries link control, not traffic.
pub const F68_CONTROL_PERIOD: u64 = 375;

/// Events ordered by (time, sequence).
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<(Ps, u64, usize)>>,
    slab: Vec<Option<E>>,
    seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue { heap: BinaryHeap::new(), slab: Vec::new(), seq: 0 }
    }
}

impl<E> EventQueue<E> {
    pub fn push(&mut self, at: Ps, e: E) {
        self.slab.push(Some(e));
        self.heap.push(Reverse((at, self.seq, self.slab.len() - 1)));
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(Ps, E)> {
        let Reverse((t, _, i)) = self.heap.pop()?;
        Some((t, self.slab[i].take().expect("each slot popped once")))
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Serialization time of one flit, rounded up to a whole picosecond.
pub fn flit_time_ps(mode: FlitMode, lanes: u8, gts: u32) -> Ps {
    let bits = mode.flit_bytes() as u64 * 8 * 1000;
    bits.div_ceil(u64::from(lanes) * u64::from(gts))
}

#[derive(Debug)]
enum Ev {
    Issue(usize),
    TxFree(usize),
    Arrive { tx: usize, headers: Vec<u64>, beats: Vec<u64> },
    Credit { tx: usize, ch: Channel },
    Forward(u64),
    DeviceDone(u64),
    Fail(usize),
    Contain(usize),
    /// Answer a request that reached a contained device.
    FailBack { id: u64, dev: usize },
}

#[derive(Clone, Debug)]
struct SimMsg {
    txn: u64,
    msg: Message,
    /// Directed link indices from source to destination.
    route: Vec<usize>,
    hop: usize,
    class: HeaderClass,
    data_slots: u32,
    devload: Option<DevLoad>,
}

#[derive(Debug)]
struct Tx {
    name: String,
    to: usize,
    packer: Packer,
    waiting: VecDeque<u64>,
    credits: BTreeMap<Channel, u32>,
    busy: bool,
    flits: u64,
    ser: Ps,
    flight: Ps,
    data_bytes: u64,
    /// Messages on the wire: (header seen, beats still owed).
    landing: BTreeMap<u64, (bool, u32)>,
}

#[derive(Clone, Debug)]
struct Txn {
    wl: usize,
    read: bool,
    issued: Ps,
    device: usize,
    request: u64,
}

#[derive(Debug, Default)]
struct DeviceState {
    dead: bool,
    contained: bool,
    busy_until: Ps,
    queued: usize,
}

/// (window base, size, device, LD, link route) for one reachable device.
type Target = (Address, u64, usize, Option<u8>, Vec<usize>);

#[derive(Debug)]
struct WlState {
    host: usize,
    next: u64,
    outstanding: usize,
    targets: Vec<Target>,
    rate: Option<RateController>,
    done: Vec<(Ps, bool, bool, Ps)>,
}

pub struct SimResult {
    pub trace: Vec<String>,
    pub stats: Stats,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    fabric: &'a Fabric,
    specs: &'a [WorkloadSpec],
    monitors: &'a mut [Box<dyn Monitor>],
    q: EventQueue<Ev>,
    now: Ps,
    /// Time of the last event that did work; idle fault timers don't count.
    end: Ps,
    txs: Vec<Tx>,
    msgs: BTreeMap<u64, SimMsg>,
    next_msg: u64,
    txns: BTreeMap<u64, Txn>,
    next_txn: u64,
    wls: Vec<WlState>,
    devices: BTreeMap<usize, DeviceState>,
    /// Requests handed to a device and not yet answered, by device.
    edge_out: BTreeMap<usize, BTreeSet<u64>>,
    trace: Vec<String>,
    recent: VecDeque<String>,
}

fn tx_index(link: usize, from_a: bool) -> usize {
    link * 2 + usize::from(!from_a)
}

impl<'a> Engine<'a> {
    fn new(
        fabric: &'a Fabric,
        specs: &'a [WorkloadSpec],
        monitors: &'a mut [Box<dyn Monitor>],
        cfg: &'a SimConfig,
    ) -> Result<Self, SimError> {
        let t = &fabric.topo;
        let mut txs = Vec::new();
        for l in &t.links {
            for (from, to) in [(l.a.node, l.b.node), (l.b.node, l.a.node)] {
                let mut flight = cfg.flight_ps;
                if l.retimer {
                    flight += cfg.retimer_ps;
                }
                txs.push(Tx {
                    name: format!("{}->{}", t.nodes[from].name, t.nodes[to].name),
                    to,
                    packer: Packer::new(cfg.flit),
                    waiting: VecDeque::new(),
                    credits: Channel::CACHE_MEM.iter().map(|&c| (c, cfg.credits)).collect(),
                    busy: false,
                    flits: 0,
                    ser: flit_time_ps(cfg.flit, l.width, l.gts),
                    flight,
                    data_bytes: 0,
                    landing: BTreeMap::new(),
                });
            }
        }
        let mut wls = Vec::new();
        for w in specs {
            let host = t.node(&w.host)?;
            if !t.nodes[host].is_host() {
                return Err(SimError::BadWorkload(format!("{} is not a host", w.host)));
            }
            let only = w.device.as_deref().map(|d| t.node(d)).transpose()?;
            let mut targets = Vec::new();
            for vt in fabric.vh(host).iter().filter(|vt| only.is_none_or(|d| d == vt.device)) {
                let probe = Message::at(Opcode::M2sReq(M2sReqOp::MemRd), vt.base, 0);
                let route = route_links(fabric, host, &probe)?;
                targets.push((Address::new(vt.base), vt.size, vt.device, vt.ld, route));
            }
            if targets.is_empty() {
                return Err(SimError::BadWorkload(format!("{} has no memory bound", w.host)));
            }
            let rate = w.rate_per_us.map(|r| RateController::new(r * w.burst, r));
            wls.push(WlState { host, next: 0, outstanding: 0, targets, rate, done: Vec::new() });
        }
        let devices = (0..t.nodes.len())
            .filter(|&n| matches!(t.nodes[n].kind, NodeKind::Device { .. }))
            .map(|n| (n, DeviceState::default()))
            .collect();
        Ok(Engine {
            cfg,
            fabric,
            specs,
            monitors,
            q: EventQueue::default(),
            now: 0,
            end: 0,
            txs,
            msgs: BTreeMap::new(),
            next_msg: 0,
            txns: BTreeMap::new(),
            next_txn: 0,
            wls,
            devices,
            edge_out: BTreeMap::new(),
            trace: if cfg.trace {
                vec![format!("# rng=ChaCha8 seed={} flit={}", cfg.seed, cfg.flit)]
            } else {
                Vec::new()
            },
            recent: VecDeque::new(),
        })
    }

    fn record(&mut self, node: usize, text: String) -> Result<(), SimError> {
        if !self.cfg.trace && self.monitors.is_empty() {
            return Ok(());
        }
        let rec = SimRecord { t_ps: self.now, node: self.fabric.topo.nodes[node].name.clone(), text };
        let line = rec.to_string();
        for m in self.monitors.iter_mut() {
            if let Err(detail) = m.observe(&rec) {
                let mut prefix: Vec<String> = self.recent.iter().cloned().collect();
                prefix.push(line);
                return Err(SimError::MonitorViolation { monitor: m.name().into(), at_ps: self.now, detail, prefix });
            }
        }
        if self.recent.len() == 32 {
            self.recent.pop_front();
        }
        self.recent.push_back(line.clone());
        if self.cfg.trace {
            self.trace.push(line);
        }
        Ok(())
    }

    fn run(mut self) -> Result<SimResult, SimError> {
        for i in 0..self.wls.len() {
            self.q.push(0, Ev::Issue(i));
        }
        for (dev, at) in &self.cfg.failures {
            let d = self.fabric.topo.node(dev)?;
            self.q.push(*at, Ev::Fail(d));
        }
        while let Some((t, ev)) = self.q.pop() {
            if self.cfg.horizon_ps.is_some_and(|h| t > h) {
                break;
            }
            self.now = t;
            if !matches!(ev, Ev::Fail(_) | Ev::Contain(_)) {
                self.end = t;
            }
            self.step(ev)?;
        }
        let outstanding: usize = self.wls.iter().map(|w| w.outstanding).sum();
        if self.q.is_empty() && outstanding > 0 {
            return Err(SimError::Deadlock { at_ps: self.now, outstanding });
        }
        Ok(self.finish())
    }

    fn step(&mut self, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::Issue(w) => self.issue(w),
            Ev::TxFree(tx) => {
                self.txs[tx].busy = false;
                self.kick(tx);
                Ok(())
            }
            Ev::Arrive { tx, headers, beats } => self.arrive(tx, headers, beats),
            Ev::Credit { tx, ch } => {
                *self.txs[tx].credits.entry(ch).or_default() += 1;
                self.kick(tx);
                Ok(())
            }
            Ev::Forward(id) => self.forward(id),
            Ev::DeviceDone(id) => self.respond(id),
            Ev::Fail(d) => {
                self.devices.get_mut(&d).expect("device").dead = true;
                self.record(d, "fails".into())?;
                if let Some(t) = self.cfg.containment_timeout_ps {
                    self.q.push(self.now + t, Ev::Contain(d));
                }
                Ok(())
            }
            Ev::Contain(d) => self.contain(d),
            Ev::FailBack { id, dev } => self.fail_back(id, dev),
        }
    }

    fn issue(&mut self, w: usize) -> Result<(), SimError> {
        let spec = &self.specs[w];
        let st = &self.wls[w];
        if st.next >= spec.lines {
            return Ok(());
        }
        let gap = match &st.rate {
            Some(rc) => (1e6 / rc.rate).round() as Ps,
            None => 0,
        };
        if st.outstanding >= spec.outstanding {
            if st.rate.is_some() {
                self.q.push(self.now + gap, Ev::Issue(w));
            }
            return Ok(());
        }
        let step = st.next;
        let (ti, r) = spec.pick(self.cfg.seed ^ (w as u64) << 48, step, st.targets.len());
        let (base, size, device, ld, route) = st.targets[ti].clone();
        let host = st.host;
        let read = spec.is_read(step);
        let addr = base.hpa() + (r % (size / LINE_BYTES)) * LINE_BYTES;
        let txn = self.next_txn;
        self.next_txn += 1;
        let op = if read { Opcode::M2sReq(M2sReqOp::MemRd) } else { Opcode::M2sRwd(M2sRwdOp::MemWr) };
        let mut msg = Message::at(op, addr, txn as u16);
        msg.ld_id = ld;
        let id = self.new_msg(txn, msg, route, HeaderClass::Full, if read { 0 } else { 4 });
        self.txns.insert(txn, Txn { wl: w, read, issued: self.now, device, request: id });
        let st = &mut self.wls[w];
        st.next += 1;
        st.outstanding += 1;
        self.record(host, format!("issue {} A={:#x} tag={}", op, addr, txn as u16))?;
        self.send(id)?;
        // Closed loop issues back to back; a rate paces the next request.
        self.q.push(self.now + gap, Ev::Issue(w));
        Ok(())
    }

    fn new_msg(&mut self, txn: u64, msg: Message, route: Vec<usize>, class: HeaderClass, data_slots: u32) -> u64 {
        let id = self.next_msg;
        self.next_msg += 1;
        self.msgs.insert(id, SimMsg { txn, msg, route, hop: 0, class, data_slots, devload: None });
        id
    }

    /// Queues a message on its current hop, or completes it locally.
    fn send(&mut self, id: u64) -> Result<(), SimError> {
        let m = &self.msgs[&id];
        let Some(&tx) = m.route.get(m.hop) else {
            return self.deliver(id);
        };
        let to = self.txs[tx].to;
        let is_req = matches!(m.msg.channel, Channel::M2sReq | Channel::M2sRwd);
        if is_req && self.devices.contains_key(&to) {
            let txn = m.txn;
            if self.devices[&to].contained {
                // queued rather than called, so back-to-back failures don't recurse
                self.q.push(self.now, Ev::FailBack { id, dev: to });
                return Ok(());
            }
            self.edge_out.entry(to).or_default().insert(txn);
        }
        self.txs[tx].waiting.push_back(id);
        self.kick(tx);
        Ok(())
    }

    fn kick(&mut self, tx: usize) {
        let t = &mut self.txs[tx];
        if t.busy {
            return;
        }
        // Admit waiting headers that have credit; order holds per channel.
        let mut blocked = BTreeSet::new();
        let mut keep = VecDeque::new();
        while let Some(id) = t.waiting.pop_front() {
            let m = &self.msgs[&id];
            let ch = m.msg.channel;
            let c = t.credits.entry(ch).or_default();
            if blocked.contains(&ch) || *c == 0 {
                blocked.insert(ch);
                keep.push_back(id);
                continue;
            }
            *c -= 1;
            t.packer.push(PendingHeader { id, class: m.class, data_slots: m.data_slots });
            t.landing.insert(id, (false, m.data_slots));
        }
        t.waiting = keep;
        if t.packer.is_idle() {
            return;
        }
        t.busy = true;
        t.flits += 1;
        let free_at = self.now + t.ser;
        if self.cfg.flit == FlitMode::F68 && t.flits.is_multiple_of(F68_CONTROL_PERIOD) {
            self.q.push(free_at, Ev::TxFree(tx));
            return;
        }
        let plan = t.packer.next_flit();
        let mut headers = Vec::new();
        let mut beats = Vec::new();
        for s in &plan.slots {
            match s {
                PlannedSlot::Headers { ids, .. } => headers.extend(ids),
                PlannedSlot::Data { id, .. } => beats.push(*id),
                PlannedSlot::Empty => {}
            }
        }
        t.data_bytes += beats.len() as u64 * 16;
        self.q.push(free_at, Ev::TxFree(tx));
        self.q.push(free_at + t.flight, Ev::Arrive { tx, headers, beats });
    }

    fn arrive(&mut self, tx: usize, headers: Vec<u64>, beats: Vec<u64>) -> Result<(), SimError> {
        let mut done = Vec::new();
        {
            let t = &mut self.txs[tx];
            for id in headers {
                let e = t.landing.get_mut(&id).expect("header for a landing message");
                e.0 = true;
                if e.1 == 0 {
                    done.push(id);
                }
            }
            for id in beats {
                let e = t.landing.get_mut(&id).expect("beat for a landing message");
                e.1 -= 1;
                if e.0 && e.1 == 0 {
                    done.push(id);
                }
            }
        }
        for id in done {
            self.txs[tx].landing.remove(&id);
            let ch = self.msgs[&id].msg.channel;
            self.q.push(self.now + self.txs[tx].flight, Ev::Credit { tx, ch });
            self.msgs.get_mut(&id).expect("live").hop += 1;
            let to = self.txs[tx].to;
            if self.fabric.topo.nodes[to].is_switch() {
                self.q.push(self.now + self.cfg.switch_ps, Ev::Forward(id));
            } else {
                self.deliver(id)?;
            }
        }
        Ok(())
    }

    fn forward(&mut self, id: u64) -> Result<(), SimError> {
        let m = &self.msgs[&id];
        if m.msg.channel.protocol() == crate::protocol::Protocol::Mem
            && !matches!(m.msg.channel, Channel::M2sReq | Channel::M2sRwd)
        {
            let dev = self.txns[&m.txn].device;
            let txn = m.txn;
            if let Some(s) = self.edge_out.get_mut(&dev) {
                s.remove(&txn);
            }
        }
        self.send(id)
    }

    fn deliver(&mut self, id: u64) -> Result<(), SimError> {
        let m = self.msgs[&id].clone();
        let at = match m.route.last() {
            Some(&tx) => self.txs[tx].to,
            None => self.wls[self.txns[&m.txn].wl].host,
        };
        if let Some(dev) = self.devices.get_mut(&at) {
            if dev.dead {
                // Kept so containment can still answer it.
                if !self.txns.contains_key(&m.txn) {
                    self.msgs.remove(&id);
                }
                return self.record(at, format!("drops {} tag={}", m.msg.opcode, m.msg.tag));
            }
            // Single server when a service time is set, else fixed latency.
            let start = self.now.max(dev.busy_until);
            let done = match self.cfg.service_ps {
                Some(s) => {
                    dev.busy_until = start + s;
                    dev.queued += 1;
                    start + s
                }
                None => self.now + self.cfg.device_ps,
            };
            self.q.push(done, Ev::DeviceDone(id));
            return self.record(at, format!("accepts {} A={} tag={}", m.msg.opcode, addr(&m.msg), m.msg.tag));
        }
        self.complete(id, at)
    }

    fn respond(&mut self, id: u64) -> Result<(), SimError> {
        let req = self.msgs[&id].clone();
        let dev = *req.route.last().map(|&tx| &self.txs[tx].to).expect("devices sit at the end of a route");
        let state = self.devices.get_mut(&dev).expect("device");
        if state.dead {
            // Left for containment to answer.
            return Ok(());
        }
        self.msgs.remove(&id);
        let load = if self.cfg.service_ps.is_some() {
            state.queued -= 1;
            Some(DevLoad::from_occupancy(state.queued, self.cfg.devload_target))
        } else {
            None
        };
        let read = self.txns[&req.txn].read;
        let (op, slots) = if read { (Opcode::S2mDrs, 4) } else { (Opcode::S2mNdr(NdrOp::Cmp), 0) };
        let mut msg = Message::new(op, req.msg.address, req.msg.tag);
        msg.ld_id = req.msg.ld_id;
        let back: Vec<usize> = req.route.iter().rev().map(|&t| t ^ 1).collect();
        let rid = self.new_msg(req.txn, msg, back, HeaderClass::Small, slots);
        self.msgs.get_mut(&rid).expect("just made").devload = load;
        if let Some(s) = self.edge_out.get_mut(&dev) {
            // Direct attach: the host port is the edge.
            if req.route.len() == 1 {
                s.remove(&req.txn);
            }
        }
        self.record(dev, format!("responds {op} tag={}", msg.tag))?;
        self.send(rid)
    }

    fn complete(&mut self, id: u64, host: usize) -> Result<(), SimError> {
        let m = self.msgs.remove(&id).expect("response");
        let Some(txn) = self.txns.remove(&m.txn) else { return Ok(()) };
        // A request answered by containment may still be on the wire.
        if self.msgs.get(&txn.request).is_some_and(|r| r.hop >= r.route.len()) {
            self.msgs.remove(&txn.request);
        }
        let w = &mut self.wls[txn.wl];
        w.outstanding -= 1;
        w.done.push((self.now, txn.read, m.msg.poison, self.now - txn.issued));
        if let (Some(rc), Some(load)) = (w.rate.as_mut(), m.devload) {
            rc.update(load);
        }
        let wl = txn.wl;
        let what = if m.msg.poison { "error completion" } else { "completes" };
        self.record(host, format!("{what} tag={}", m.msg.tag))?;
        if self.wls[wl].rate.is_none() {
            self.issue(wl)?;
        }
        Ok(())
    }

    /// Answers every request stranded at `dev` and refuses new ones.
    fn contain(&mut self, dev: usize) -> Result<(), SimError> {
        self.devices.get_mut(&dev).expect("device").contained = true;
        let stranded: Vec<u64> = self.edge_out.remove(&dev).unwrap_or_default().into_iter().collect();
        self.record(dev, format!("contained with {} outstanding", stranded.len()))?;
        for txn in stranded {
            let Some(t) = self.txns.get(&txn) else { continue };
            let id = t.request;
            let req = self.msgs.get(&id).cloned();
            let req = match req {
                Some(r) => r,
                None => continue,
            };
            self.fail_back_from(&req, dev)?;
        }
        Ok(())
    }

    fn fail_back(&mut self, id: u64, dev: usize) -> Result<(), SimError> {
        let req = self.msgs[&id].clone();
        self.fail_back_from(&req, dev)
    }

    /// Sends a poisoned completion from the port in front of `dev` back to
    /// the requester over the hops the request already took.
    fn fail_back_from(&mut self, req: &SimMsg, dev: usize) -> Result<(), SimError> {
        let taken = req.hop.min(req.route.len().saturating_sub(1));
        let back: Vec<usize> = req.route[..taken].iter().rev().map(|&t| t ^ 1).collect();
        let rsp = contain_error(std::slice::from_ref(&req.msg));
        let Some(&msg) = rsp.first() else { return Ok(()) };
        let class = HeaderClass::Small;
        let slots = if msg.channel == Channel::S2mDrs { 4 } else { 0 };
        let rid = self.new_msg(req.txn, msg, back, class, slots);
        self.record(dev, format!("edge synthesizes {} tag={}", msg.opcode, msg.tag))?;
        self.send(rid)
    }

    fn finish(self) -> SimResult {
        let mut stats = Stats::default();
        let secs = self.end as f64 * 1e-12;
        stats.push("sim_time", "all", self.end as f64 / 1000.0, "ns");
        for t in &self.txs {
            if t.flits > 0 {
                let bw = if secs > 0.0 { t.data_bytes as f64 / secs / 1e9 } else { 0.0 };
                stats.push("link_data_bw", &t.name, bw, "GB/s");
                stats.push("flits", &t.name, t.flits as f64, "count");
            }
        }
        for (w, st) in self.wls.iter().enumerate() {
            let host = &self.specs[w].host;
            let mut done = st.done.clone();
            done.sort_by_key(|d| d.0);
            let n = done.len();
            let ok = done.iter().filter(|d| !d.2).count();
            stats.push("completed", host, ok as f64, "count");
            stats.push("errors", host, (n - ok) as f64, "count");
            if n >= 10 {
                // Steady state: between the 10th and 90th percentile completion.
                let (lo, hi) = (n / 10, n * 9 / 10);
                let span = (done[hi].0 - done[lo].0) as f64 * 1e-12;
                let window = &done[lo + 1..=hi];
                let reads = window.iter().filter(|d| d.1 && !d.2).count() as f64;
                let writes = window.iter().filter(|d| !d.1 && !d.2).count() as f64;
                if span > 0.0 {
                    let gb = LINE_BYTES as f64 / span / 1e9;
                    stats.push("read_bw", host, reads * gb, "GB/s");
                    stats.push("write_bw", host, writes * gb, "GB/s");
                    stats.push("throughput", host, window.len() as f64 / span / 1e6, "req/us");
                }
            }
            if n > 0 {
                let mut lat: Vec<Ps> = done.iter().map(|d| d.3).collect();
                lat.sort_unstable();
                let mean = lat.iter().sum::<Ps>() as f64 / n as f64;
                stats.push("latency_mean", host, mean / 1000.0, "ns");
                stats.push("latency_p50", host, lat[n / 2] as f64 / 1000.0, "ns");
                stats.push("latency_p99", host, lat[(n * 99 / 100).min(n - 1)] as f64 / 1000.0, "ns");
            }
            if let Some(rc) = &st.rate {
                stats.push("final_rate", host, rc.rate, "req/us");
            }
        }
        SimResult { trace: self.trace, stats }
    }
}

fn addr(m: &Message) -> String {
    m.address.map_or_else(|| "-".into(), |a| a.to_string())
}

/// Directed links a request from `host` takes to its device.
fn route_links(f: &Fabric, host: usize, probe: &Message) -> Result<Vec<usize>, SimError> {
    let d = f.route_hbr(host, probe)?;
    let t = &f.topo;
    let first = t.ports(host)[0];
    let mut out = vec![tx_index(first, t.links[first].a.node == host)];
    for (sw, port) in d.hops {
        let l = t.port_link(sw, port).expect("hop port exists");
        out.push(tx_index(l, t.links[l].a.node == sw));
    }
    Ok(out)
}

pub fn run(
    fabric: &Fabric,
    workloads: &[WorkloadSpec],
    monitors: &mut [Box<dyn Monitor>],
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    Engine::new(fabric, workloads, monitors, cfg)?.run()
}
