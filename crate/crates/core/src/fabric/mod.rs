//! Switches, virtual hierarchies and the Fabric Manager.
//!
//! A vPPB id is `ingress_port * 16 + k`: the upper bits name the switch
//! port through which the owning host's hierarchy enters. A switch that has
//! never seen a BIND and has at most one host attached is transparent and
//! forwards every other port into the single hierarchy that reaches it,
//! which is how plain trees are modelled.
//!
//! Host address maps are rebuilt after every FM command by walking each
//! hierarchy depth first. Every target is aligned to its power-of-two
//! size, so a switch port's window is a contiguous range.

pub mod gen;
pub mod pbr;
pub mod qos;
pub mod topology;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use pbr::{build_dpid_tables, flow_key, pbr_route, pbr_walk, DpidTable, EdgePort, FastTable, FlowKey, PbrMessage};
pub use qos::{contain_error, DevLoad, IslCredits, RateController};
pub use topology::{DevKind, FmCommand, NodeKind, Topology, UnbindOption};

use crate::protocol::Message;

/// Most LDs one MLD can be carved into.
pub const MAX_LDS: usize = 16;
/// vPPBs per ingress port.
pub const VPPBS_PER_VH: u16 = 16;
/// Where every host's device address map starts.
pub const HPA_BASE: u64 = 1 << 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FabricError {
    #[error("port {port} of {switch} is already bound")]
    PortAlreadyBound { switch: String, port: u16 },
    #[error("vPPB {vppb} of {switch} is already bound")]
    VppbInUse { switch: String, vppb: u16 },
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("host {0} did not acknowledge the hot-remove")]
    HostUncooperative(String),
    #[error("no route: {0}")]
    NoRoute(String),
    #[error("no FAST segment covers {0:#x}")]
    NoFastSegment(u64),
    #[error("id {0} has no table entry")]
    UnmappedId(u8),
    #[error("{0} LDs requested, at most 16 allowed")]
    TooManyLds(usize),
    #[error("bad fabric config: {0}")]
    BadConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Binding {
    pub port: u16,
    pub ld: Option<u8>,
}

/// Host-visible events and FM replies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Notification {
    HotAdd { host: String, switch: String, vppb: u16 },
    HotRemove { host: String, switch: String, vppb: u16, forced: bool },
    LdsCreated { device: String, count: usize },
    SwitchInfo { switch: String, bound: Vec<(u16, Binding)> },
    Capability { op: String },
}

/// One device or LD in a host's address map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VhTarget {
    pub base: u64,
    pub size: u64,
    pub device: usize,
    pub ld: Option<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Window {
    base: u64,
    end: u64,
    port: u16,
    ld: Option<u8>,
}

/// Where an HBR message ended up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HbrDelivery {
    pub device: usize,
    pub ld: Option<u8>,
    pub hops: Vec<(usize, u16)>,
    /// The message as the device sees it, LD-ID stamped for MLDs.
    pub msg: Message,
}

#[derive(Clone, Debug)]
pub struct Fabric {
    pub topo: Topology,
    vppbs: BTreeMap<usize, BTreeMap<u16, Binding>>,
    managed: BTreeSet<usize>,
    ld_sizes: BTreeMap<usize, Vec<u64>>,
    unresponsive: BTreeSet<usize>,
    vh: BTreeMap<usize, Vec<VhTarget>>,
    /// (switch, ingress port) -> decode windows.
    windows: BTreeMap<(usize, u16), Vec<Window>>,
    /// (switch, ingress port) -> host owning that hierarchy.
    owner: BTreeMap<(usize, u16), usize>,
    pub dpid: BTreeMap<usize, DpidTable>,
    pub log: Vec<Notification>,
}

fn mb(x: u64) -> u64 {
    x << 20
}

impl Fabric {
    /// Builds the fabric and replays the topology's FM script.
    pub fn new(topo: Topology) -> Result<Self, FabricError> {
        let script = topo.script.clone();
        let managed = (0..topo.nodes.len())
            .filter(|&s| {
                topo.nodes[s].is_switch()
                    && topo.ports(s).iter().filter(|&&l| topo.nodes[topo.links[l].other(s).node].is_host()).count() > 1
            })
            .collect();
        let mut f = Fabric {
            topo,
            vppbs: BTreeMap::new(),
            managed,
            ld_sizes: BTreeMap::new(),
            unresponsive: BTreeSet::new(),
            vh: BTreeMap::new(),
            windows: BTreeMap::new(),
            owner: BTreeMap::new(),
            dpid: BTreeMap::new(),
            log: Vec::new(),
        };
        f.rebuild();
        for cmd in &script {
            let n = f.fm_execute(cmd)?;
            f.log.extend(n);
        }
        Ok(f)
    }

    pub fn parse(text: &str) -> Result<Self, FabricError> {
        Fabric::new(Topology::parse(text)?)
    }

    fn name(&self, n: usize) -> String {
        self.topo.nodes[n].name.clone()
    }

    fn switch(&self, name: &str) -> Result<usize, FabricError> {
        let s = self.topo.node(name)?;
        if self.topo.nodes[s].is_switch() {
            Ok(s)
        } else {
            Err(FabricError::UnknownEntity(format!("{name} is not a switch")))
        }
    }

    pub fn set_responsive(&mut self, host: &str, yes: bool) -> Result<(), FabricError> {
        let h = self.topo.node(host)?;
        if yes {
            self.unresponsive.remove(&h);
        } else {
            self.unresponsive.insert(h);
        }
        Ok(())
    }

    /// LD sizes in bytes; one entry for an SLD.
    pub fn ld_sizes(&self, dev: usize) -> Vec<u64> {
        if let Some(v) = self.ld_sizes.get(&dev) {
            return v.clone();
        }
        match self.topo.nodes[dev].kind {
            NodeKind::Device { lds, size_mb, .. } => vec![mb(size_mb) / u64::from(lds); usize::from(lds)],
            _ => Vec::new(),
        }
    }

    fn is_mld(&self, dev: usize) -> bool {
        matches!(self.topo.nodes[dev].kind, NodeKind::Device { kind: DevKind::Mld, .. })
    }

    pub fn bindings(&self, switch: usize) -> impl Iterator<Item = (u16, Binding)> + '_ {
        self.vppbs.get(&switch).into_iter().flatten().map(|(&v, &b)| (v, b))
    }

    /// Ports reachable from `in_port` at switch `s` within one hierarchy.
    fn downstream(&self, s: usize, in_port: u16) -> Vec<Binding> {
        if self.managed.contains(&s) {
            let lo = in_port * VPPBS_PER_VH;
            self.bindings(s).filter(|(v, _)| (lo..lo + VPPBS_PER_VH).contains(v)).map(|(_, b)| b).collect()
        } else {
            let n = self.topo.ports(s).len() as u16;
            let mut out = Vec::new();
            for port in (0..n).filter(|&p| p != in_port) {
                let peer = self.topo.peer(s, port).expect("port exists").node;
                if self.topo.nodes[peer].is_host() {
                    continue;
                }
                if self.is_mld(peer) {
                    out.extend((0..self.ld_sizes(peer).len() as u8).map(|ld| Binding { port, ld: Some(ld) }));
                } else {
                    out.push(Binding { port, ld: None });
                }
            }
            out
        }
    }

    fn rebuild(&mut self) {
        self.vh.clear();
        self.windows.clear();
        self.owner.clear();
        let hosts: Vec<usize> = (0..self.topo.nodes.len()).filter(|&h| self.topo.nodes[h].is_host()).collect();
        for h in hosts {
            let mut targets = Vec::new();
            let mut next = HPA_BASE;
            for l in self.topo.ports(h) {
                let end = self.topo.links[l].other(h);
                if self.topo.nodes[end.node].is_switch() {
                    let mut seen = BTreeSet::new();
                    self.visit(h, end.node, end.port, &mut next, &mut targets, &mut seen);
                } else {
                    // Direct attach: the host's root port decodes it.
                    let mld = self.is_mld(end.node);
                    for (i, size) in self.ld_sizes(end.node).into_iter().enumerate() {
                        let ld = mld.then_some(i as u8);
                        next = place(next, size);
                        targets.push(VhTarget { base: next, size, device: end.node, ld });
                        next += size;
                    }
                }
            }
            self.vh.insert(h, targets);
        }
        self.dpid = build_dpid_tables(&self.topo);
    }

    /// Assigns addresses below (s, in_port) and returns the covered range.
    fn visit(
        &mut self,
        host: usize,
        s: usize,
        in_port: u16,
        next: &mut u64,
        targets: &mut Vec<VhTarget>,
        seen: &mut BTreeSet<usize>,
    ) -> Option<(u64, u64)> {
        if !seen.insert(s) {
            return None;
        }
        self.owner.insert((s, in_port), host);
        let mut wins = Vec::new();
        let mut span: Option<(u64, u64)> = None;
        for b in self.downstream(s, in_port) {
            let Some(peer) = self.topo.peer(s, b.port) else { continue };
            let range = if self.topo.nodes[peer.node].is_switch() {
                self.visit(host, peer.node, peer.port, next, targets, seen)
            } else {
                let sizes = self.ld_sizes(peer.node);
                let size = match b.ld {
                    Some(ld) => sizes.get(usize::from(ld)).copied(),
                    None => sizes.iter().sum::<u64>().into(),
                };
                size.filter(|&z| z > 0).map(|size| {
                    *next = place(*next, size);
                    let base = *next;
                    targets.push(VhTarget { base, size, device: peer.node, ld: b.ld });
                    *next += size;
                    (base, base + size)
                })
            };
            if let Some((lo, hi)) = range {
                wins.push(Window { base: lo, end: hi, port: b.port, ld: b.ld });
                span = Some(span.map_or((lo, hi), |(a, z)| (a.min(lo), z.max(hi))));
            }
        }
        self.windows.insert((s, in_port), wins);
        span
    }

    /// Hosts' address maps.
    pub fn vh(&self, host: usize) -> &[VhTarget] {
        self.vh.get(&host).map_or(&[], Vec::as_slice)
    }

    /// Host that owns the hierarchy entering `switch` at `in_port`.
    pub fn owner(&self, switch: usize, in_port: u16) -> Option<usize> {
        self.owner.get(&(switch, in_port)).copied()
    }

    /// One decode step: egress port and LD stamp at `switch`.
    pub fn route_hbr_at(&self, switch: usize, in_port: u16, msg: &Message) -> Result<(u16, Option<u8>), FabricError> {
        let a = msg.address.ok_or_else(|| FabricError::NoRoute("no address".into()))?.hpa();
        self.windows
            .get(&(switch, in_port))
            .and_then(|ws| ws.iter().find(|w| (w.base..w.end).contains(&a)))
            .map(|w| (w.port, w.ld))
            .ok_or_else(|| FabricError::NoRoute(format!("{a:#x} at {} port {in_port}", self.name(switch))))
    }

    /// Routes a host request to its device hop by hop.
    pub fn route_hbr(&self, host: usize, msg: &Message) -> Result<HbrDelivery, FabricError> {
        let a = msg.address.ok_or_else(|| FabricError::NoRoute("no address".into()))?.hpa();
        let mut ld = None;
        let mut hops = Vec::new();
        for l in self.topo.ports(host) {
            let mut end = self.topo.links[l].other(host);
            if !self.topo.nodes[end.node].is_switch() {
                if self.vh(host).iter().any(|t| t.device == end.node && (t.base..t.base + t.size).contains(&a)) {
                    return Ok(HbrDelivery { device: end.node, ld: None, hops, msg: *msg });
                }
                continue;
            }
            let mut budget = self.topo.nodes.len();
            while let Ok((port, stamp)) = self.route_hbr_at(end.node, end.port, msg) {
                hops.push((end.node, port));
                ld = stamp.or(ld);
                end = self.topo.peer(end.node, port).expect("window port exists");
                if !self.topo.nodes[end.node].is_switch() {
                    let mut m = *msg;
                    m.ld_id = ld;
                    return Ok(HbrDelivery { device: end.node, ld, hops, msg: m });
                }
                budget -= 1;
                if budget == 0 {
                    return Err(FabricError::NoRoute("routing loop".into()));
                }
            }
        }
        Err(FabricError::NoRoute(format!("{a:#x} not mapped for {}", self.name(host))))
    }

    /// Upstream: the host whose hierarchy holds (device, ld).
    pub fn route_hbr_up(&self, device: usize, ld: Option<u8>) -> Result<usize, FabricError> {
        self.vh
            .iter()
            .find(|(_, ts)| ts.iter().any(|t| t.device == device && (t.ld == ld || t.ld.is_none())))
            .map(|(&h, _)| h)
            .ok_or_else(|| FabricError::NoRoute(format!("{} ld {ld:?} is unbound", self.name(device))))
    }

    /// A FAST for `host` when its map is a run of equal power-of-two targets.
    pub fn auto_fast(&self, host: usize) -> Option<FastTable> {
        let ts = self.vh(host);
        let first = ts.first()?;
        let seg = first.size;
        let contiguous = ts.iter().enumerate().all(|(i, t)| t.size == seg && t.base == first.base + i as u64 * seg);
        if !contiguous || !seg.is_power_of_two() {
            return None;
        }
        let map = ts.iter().map(|t| self.topo.nodes[t.device].pid).collect::<Option<Vec<_>>>()?;
        FastTable::new(first.base, seg, map).ok()
    }

    /// Marks a link down or up and redistributes the DPID tables.
    pub fn set_link(&mut self, link: usize, up: bool) -> Result<(), FabricError> {
        let l = self.topo.links.get_mut(link).ok_or_else(|| FabricError::UnknownEntity(format!("link {link}")))?;
        l.up = up;
        self.dpid = build_dpid_tables(&self.topo);
        Ok(())
    }

    pub fn fm_execute(&mut self, cmd: &FmCommand) -> Result<Vec<Notification>, FabricError> {
        match cmd {
            FmCommand::Bind { switch, vppb, port, ld } => self.bind(switch, *vppb, *port, *ld),
            FmCommand::Unbind { switch, vppb, option } => self.unbind(switch, *vppb, *option),
            FmCommand::SetLd { device, gran_mb, ranges } => self.set_ld(device, *gran_mb, ranges),
            FmCommand::Query { switch } => {
                let s = self.switch(switch)?;
                Ok(vec![Notification::SwitchInfo { switch: switch.clone(), bound: self.bindings(s).collect() }])
            }
            FmCommand::Other(op) => Ok(vec![Notification::Capability { op: op.clone() }]),
        }
    }

    fn bind(&mut self, switch: &str, vppb: u16, port: u16, ld: Option<u8>) -> Result<Vec<Notification>, FabricError> {
        let s = self.switch(switch)?;
        let unknown = |what: String| FabricError::UnknownEntity(format!("{switch} {what}"));
        let up = self.topo.peer(s, vppb / VPPBS_PER_VH).ok_or_else(|| unknown(format!("vPPB {vppb}")))?;
        if !(self.topo.nodes[up.node].is_host() || self.topo.nodes[up.node].is_switch()) {
            return Err(unknown(format!("vPPB {vppb} has no upstream port")));
        }
        let dev = self.topo.peer(s, port).ok_or_else(|| unknown(format!("port {port}")))?.node;
        if port == vppb / VPPBS_PER_VH || self.topo.nodes[dev].is_host() {
            return Err(unknown(format!("port {port} is not a downstream port")));
        }
        if self.bindings(s).any(|(v, _)| v == vppb) {
            return Err(FabricError::VppbInUse { switch: switch.into(), vppb });
        }
        if let Some(ld) = ld {
            if !self.is_mld(dev) || usize::from(ld) >= self.ld_sizes(dev).len() {
                return Err(unknown(format!("ld {ld} behind port {port}")));
            }
        }
        // One vPPB per port, or one per LD when the port hosts an MLD.
        let clash = self.bindings(s).any(|(_, b)| b.port == port && (b.ld.is_none() || ld.is_none() || b.ld == ld));
        if clash {
            return Err(FabricError::PortAlreadyBound { switch: switch.into(), port });
        }
        self.managed.insert(s);
        self.vppbs.entry(s).or_default().insert(vppb, Binding { port, ld });
        self.rebuild();
        Ok(self
            .owner(s, vppb / VPPBS_PER_VH)
            .map(|h| Notification::HotAdd { host: self.name(h), switch: switch.into(), vppb })
            .into_iter()
            .collect())
    }

    fn unbind(&mut self, switch: &str, vppb: u16, option: UnbindOption) -> Result<Vec<Notification>, FabricError> {
        let s = self.switch(switch)?;
        if !self.bindings(s).any(|(v, _)| v == vppb) {
            return Err(FabricError::UnknownEntity(format!("{switch} vPPB {vppb} is not bound")));
        }
        let host = self.owner(s, vppb / VPPBS_PER_VH);
        let cooperative = host.is_none_or(|h| !self.unresponsive.contains(&h));
        if !cooperative && option != UnbindOption::Force {
            return Err(FabricError::HostUncooperative(self.name(host.expect("checked above"))));
        }
        self.vppbs.get_mut(&s).expect("bound above").remove(&vppb);
        self.rebuild();
        Ok(host
            .map(|h| Notification::HotRemove {
                host: self.name(h),
                switch: switch.into(),
                vppb,
                forced: option == UnbindOption::Force,
            })
            .into_iter()
            .collect())
    }

    fn set_ld(&mut self, device: &str, gran_mb: u64, ranges: &[u64]) -> Result<Vec<Notification>, FabricError> {
        let d = self.topo.node(device)?;
        let NodeKind::Device { dtype, size_mb, .. } = self.topo.nodes[d].kind else {
            return Err(FabricError::UnknownEntity(format!("{device} is not a device")));
        };
        if ranges.is_empty() || ranges.len() > MAX_LDS {
            return Err(FabricError::TooManyLds(ranges.len()));
        }
        let sizes: Vec<u64> = ranges.iter().map(|&r| mb(r * gran_mb)).collect();
        if sizes.iter().sum::<u64>() > mb(size_mb) || sizes.contains(&0) {
            return Err(FabricError::BadConfig(format!("{device}: LD ranges exceed {size_mb} MB or are empty")));
        }
        let stale = self.vppbs.values().flat_map(|m| m.values()).any(|b| {
            b.ld.is_some_and(|ld| usize::from(ld) >= ranges.len())
                && self.vppbs.iter().any(|(&s, _)| self.topo.peer(s, b.port).is_some_and(|p| p.node == d))
        });
        if stale {
            return Err(FabricError::BadConfig(format!("{device}: bound LD would vanish")));
        }
        self.topo.nodes[d].kind = NodeKind::Device { dtype, kind: DevKind::Mld, lds: ranges.len() as u8, size_mb };
        self.ld_sizes.insert(d, sizes);
        self.rebuild();
        Ok(vec![Notification::LdsCreated { device: device.into(), count: ranges.len() }])
    }

    /// Structural checks: one vPPB per port (per LD for MLDs), PIDs unique
    /// and in range, and a DPID entry for every reachable endpoint.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (&s, m) in &self.vppbs {
            let mut seen = BTreeSet::new();
            for b in m.values() {
                if !seen.insert((b.port, b.ld)) {
                    problems.push(format!("{}: port {} bound twice", self.name(s), b.port));
                }
            }
        }
        let mut pids = BTreeSet::new();
        for n in &self.topo.nodes {
            if let Some(p) = n.pid {
                if usize::from(p) >= pbr::MAX_PIDS || !pids.insert(p) {
                    problems.push(format!("{}: bad or duplicate PID {p}", n.name));
                }
            }
        }
        for (&s, table) in &self.dpid {
            for (i, n) in self.topo.nodes.iter().enumerate() {
                let Some(pid) = n.pid else { continue };
                if self.reachable(s, i) && !table.contains_key(&pid) {
                    problems.push(format!("{}: no route for PID {pid}", self.name(s)));
                }
            }
        }
        problems
    }

    fn reachable(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::from([from]);
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if v != from && !self.topo.nodes[v].is_switch() {
                continue;
            }
            for l in self.topo.ports(v) {
                let link = &self.topo.links[l];
                let w = link.other(v).node;
                if link.up && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        false
    }
}

fn place(next: u64, size: u64) -> u64 {
    let align = size.next_power_of_two();
    next.div_ceil(align) * align
}

/// A global fabric-attached device: shared by any PID that reaches it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Gfd {
    pub pid: u16,
    pub sources: BTreeSet<u16>,
}

impl Gfd {
    pub fn new(pid: u16) -> Self {
        Gfd { pid, sources: BTreeSet::new() }
    }

    /// Accepts a fabric message addressed to this GFD and records its source.
    pub fn accept(&mut self, pmsg: &PbrMessage) -> Result<Message, FabricError> {
        if pmsg.dpid != self.pid {
            return Err(FabricError::NoRoute(format!("DPID {} at GFD {}", pmsg.dpid, self.pid)));
        }
        let spid = pmsg.spid.ok_or(FabricError::UnmappedId(0))?;
        if usize::from(spid) >= pbr::MAX_PIDS {
            return Err(FabricError::BadConfig(format!("SPID {spid} exceeds 12 bits")));
        }
        self.sources.insert(spid);
        Ok(pmsg.inner)
    }
}

#[cfg(test)]
mod tests;
