//! Port-based routing: edge translation between host messages and
//! PID-addressed fabric messages, per-switch DPID tables, and path choice.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::hash::{Hash, Hasher};

use rand::Rng;

use super::topology::Topology;
use super::FabricError;
use crate::protocol::{Channel, Message, Opcode, Protocol, PID_BITS};

/// Highest PID count a 12-bit id space addresses.
pub const MAX_PIDS: usize = 1 << PID_BITS;
/// Depth of the LD-ID and cache-id lookup tables at an edge port.
pub const ID_TABLE_DEPTH: usize = 16;

fn check_pid(pid: u16) -> Result<u16, FabricError> {
    if usize::from(pid) < MAX_PIDS {
        Ok(pid)
    } else {
        Err(FabricError::BadConfig(format!("PID {pid} exceeds 12 bits")))
    }
}

/// Fabric Address Segment Table: equal power-of-two segments from `base`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastTable {
    pub base: u64,
    pub seg_size: u64,
    pub map: Vec<u16>,
}

impl FastTable {
    pub fn new(base: u64, seg_size: u64, map: Vec<u16>) -> Result<Self, FabricError> {
        if !seg_size.is_power_of_two() {
            return Err(FabricError::BadConfig(format!("segment size {seg_size:#x} is not a power of two")));
        }
        for &p in &map {
            check_pid(p)?;
        }
        Ok(FastTable { base, seg_size, map })
    }

    /// PID owning `hpa`. Selects address bits directly, no range compare.
    pub fn lookup(&self, hpa: u64) -> Result<u16, FabricError> {
        let off = hpa.checked_sub(self.base).ok_or(FabricError::NoFastSegment(hpa))?;
        let idx = off >> self.seg_size.trailing_zeros();
        usize::try_from(idx)
            .ok()
            .and_then(|i| self.map.get(i))
            .copied()
            .ok_or(FabricError::NoFastSegment(hpa))
    }

    /// First address of the segment mapped to `pid`.
    pub fn segment_base(&self, pid: u16) -> Option<u64> {
        self.map.iter().position(|&p| p == pid).map(|i| self.base + i as u64 * self.seg_size)
    }
}

/// A message in PID form as it crosses the fabric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PbrMessage {
    pub inner: Message,
    pub dpid: u16,
    pub spid: Option<u16>,
}

/// Translation state of one edge port (host- or device-facing).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgePort {
    /// PID of whatever sits behind this edge.
    pub own_pid: u16,
    pub fast: Option<FastTable>,
    pub ld_table: [Option<u16>; ID_TABLE_DEPTH],
    pub cache_table: [Option<u16>; ID_TABLE_DEPTH],
}

impl EdgePort {
    pub fn new(own_pid: u16) -> Self {
        EdgePort { own_pid, fast: None, ld_table: [None; ID_TABLE_DEPTH], cache_table: [None; ID_TABLE_DEPTH] }
    }

    fn table_pid(table: &[Option<u16>; ID_TABLE_DEPTH], id: u8) -> Result<u16, FabricError> {
        table.get(usize::from(id)).copied().flatten().ok_or(FabricError::UnmappedId(id))
    }

    /// Host message to fabric form. Address-routed traffic goes through the
    /// FAST; responses carry an LD-ID or cache id that indexes a table.
    pub fn to_fabric(&self, msg: &Message) -> Result<PbrMessage, FabricError> {
        let dpid = if let Some(ld) = msg.ld_id {
            Self::table_pid(&self.ld_table, ld)?
        } else if let Some(cid) = msg.cache_id {
            Self::table_pid(&self.cache_table, cid)?
        } else if let Some(a) = msg.address {
            self.fast.as_ref().ok_or(FabricError::NoFastSegment(a.hpa()))?.lookup(a.hpa())?
        } else {
            return Err(FabricError::NoRoute("message has neither address nor id".into()));
        };
        Ok(PbrMessage { inner: *msg, dpid, spid: Some(self.own_pid) })
    }

    /// Strips PIDs. The inner message is untouched, which keeps translation
    /// stateless and the round trip exact.
    pub fn from_fabric(&self, pmsg: &PbrMessage) -> Result<Message, FabricError> {
        if pmsg.dpid != self.own_pid {
            return Err(FabricError::NoRoute(format!("DPID {} delivered to edge {}", pmsg.dpid, self.own_pid)));
        }
        Ok(pmsg.inner)
    }
}

/// Stable path-pinning key: (protocol, channel class, line index or tag).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub protocol: Protocol,
    pub class: Channel,
    pub key: u64,
}

/// `Some` for flows whose order must be preserved end to end.
pub fn flow_key(msg: &Message) -> Option<FlowKey> {
    let line = msg.address.map_or(0, |a| a.line_index());
    let k = |key| Some(FlowKey { protocol: msg.channel.protocol(), class: msg.channel, key });
    match msg.opcode {
        // Legacy CXL.io is ordered per VC; the whole VC is one flow.
        Opcode::Io(op) if !op.is_uio() => k(0),
        // GO and snoop to one line must not cross.
        Opcode::H2dReq(_) | Opcode::H2dRsp(_) => k(line),
        Opcode::S2mNdr(_) => k(u64::from(msg.tag)),
        _ => None,
    }
}

fn hash_key(k: &FlowKey) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    k.hash(&mut h);
    h.finish()
}

/// DPID to egress ports for one switch.
pub type DpidTable = BTreeMap<u16, Vec<u16>>;

/// Shortest-path tables for every switch over the links that are up.
/// Every port on some shortest path is listed, giving multipath for free.
pub fn build_dpid_tables(t: &Topology) -> BTreeMap<usize, DpidTable> {
    let n = t.nodes.len();
    // adjacency over up links: node -> (port, neighbour)
    let mut adj: Vec<Vec<(u16, usize)>> = vec![Vec::new(); n];
    for (i, node) in t.nodes.iter().enumerate() {
        for (port, &l) in t.ports(i).iter().enumerate() {
            let link = &t.links[l];
            if link.up && node.is_switch() {
                adj[i].push((port as u16, link.other(i).node));
            }
        }
    }
    let neighbours = |v: usize| -> Vec<usize> {
        t.ports(v).iter().filter(|&&l| t.links[l].up).map(|&l| t.links[l].other(v).node).collect()
    };
    let mut tables: BTreeMap<usize, DpidTable> =
        (0..n).filter(|&i| t.nodes[i].is_switch()).map(|i| (i, DpidTable::new())).collect();
    for (dst, node) in t.nodes.iter().enumerate() {
        let Some(pid) = node.pid else { continue };
        // BFS from the endpoint; only switches forward.
        let mut dist = vec![usize::MAX; n];
        dist[dst] = 0;
        let mut q = VecDeque::from([dst]);
        while let Some(v) = q.pop_front() {
            if v != dst && !t.nodes[v].is_switch() {
                continue;
            }
            for w in neighbours(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        for (&sw, table) in tables.iter_mut() {
            if dist[sw] == usize::MAX {
                continue;
            }
            let ports: Vec<u16> =
                adj[sw].iter().filter(|&&(_, w)| dist[w] + 1 == dist[sw]).map(|&(p, _)| p).collect();
            if !ports.is_empty() {
                table.insert(pid, ports);
            }
        }
    }
    tables
}

/// Egress port for `pmsg` at a switch holding `table`. Ordered flows hash
/// their key onto one port; everything else draws from `rng`.
pub fn pbr_route<R: Rng>(
    table: &DpidTable,
    pmsg: &PbrMessage,
    key: Option<&FlowKey>,
    rng: &mut R,
) -> Result<u16, FabricError> {
    let ports = table
        .get(&pmsg.dpid)
        .filter(|p| !p.is_empty())
        .ok_or_else(|| FabricError::NoRoute(format!("DPID {} not in table", pmsg.dpid)))?;
    let i = match key {
        Some(k) => (hash_key(k) % ports.len() as u64) as usize,
        None => rng.gen_range(0..ports.len()),
    };
    Ok(ports[i])
}

/// Hop-by-hop delivery of `pmsg` injected at `ingress_switch`. Returns the
/// endpoint node reached and the (switch, port) hops taken.
pub fn pbr_walk<R: Rng>(
    t: &Topology,
    tables: &BTreeMap<usize, DpidTable>,
    ingress_switch: usize,
    pmsg: &PbrMessage,
    rng: &mut R,
) -> Result<(usize, Vec<(usize, u16)>), FabricError> {
    let key = flow_key(&pmsg.inner);
    let mut at = ingress_switch;
    let mut hops = Vec::new();
    let mut visited = BTreeSet::new();
    loop {
        if !visited.insert(at) {
            return Err(FabricError::NoRoute(format!("loop at node {at}")));
        }
        let table = tables.get(&at).ok_or_else(|| FabricError::NoRoute(format!("node {at} is not a switch")))?;
        let port = pbr_route(table, pmsg, key.as_ref(), rng)?;
        hops.push((at, port));
        let next = t.peer(at, port).ok_or_else(|| FabricError::NoRoute(format!("port {port} unconnected")))?.node;
        if !t.nodes[next].is_switch() {
            return if t.nodes[next].pid == Some(pmsg.dpid) {
                Ok((next, hops))
            } else {
                Err(FabricError::NoRoute(format!("reached wrong endpoint {}", t.nodes[next].name)))
            };
        }
        at = next;
    }
}
