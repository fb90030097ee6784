//! Random fabrics and the routing cross-checks run over them.

use rand::seq::SliceRandom;
use rand::Rng;

use super::pbr::pbr_walk;
use super::topology::{DevKind, FmCommand, NodeKind, Topology, UnbindOption};
use super::{Fabric, FabricError, VPPBS_PER_VH};
use crate::protocol::{M2sReqOp, Message, Opcode};

/// A host above a tree of at most `levels` switch levels with at most
/// `max_endpoints` SLDs at the leaves (and possibly at inner switches).
pub fn random_tree<R: Rng>(rng: &mut R, levels: usize, max_endpoints: usize) -> Topology {
    let mut t = Topology::default();
    let h = t.add_node("h0", NodeKind::Host);
    let root = t.add_node("s0", NodeKind::Switch);
    t.add_link(h, root, 16, 32, false);
    let mut frontier = vec![(root, 1)];
    let mut switches = 1;
    let mut devices = 0;
    let target = rng.gen_range(1..=max_endpoints);
    while devices < target {
        let (s, depth) = *frontier.choose(rng).expect("root stays in the frontier");
        if depth < levels && rng.gen_bool(0.3) {
            let c = t.add_node(&format!("s{switches}"), NodeKind::Switch);
            switches += 1;
            t.add_link(s, c, 16, 32, false);
            frontier.push((c, depth + 1));
        } else {
            let d = t.add_node(
                &format!("d{devices}"),
                NodeKind::Device { dtype: 3, kind: DevKind::Sld, lds: 1, size_mb: 1024 },
            );
            devices += 1;
            t.add_link(s, d, 16, 32, false);
        }
    }
    t
}

/// Routes `samples` random in-map addresses with HBR and with PBR (FAST at
/// the host edge, DPID tables in every switch) and counts disagreements.
pub fn pbr_hbr_mismatches<R: Rng>(f: &Fabric, host: usize, samples: usize, rng: &mut R) -> Result<usize, FabricError> {
    let targets = f.vh(host);
    if targets.is_empty() {
        return Ok(0);
    }
    let mut edge = super::EdgePort::new(f.topo.nodes[host].pid.expect("hosts have PIDs"));
    edge.fast = Some(f.auto_fast(host).ok_or_else(|| FabricError::BadConfig("map is not FAST-shaped".into()))?);
    let ingress = f.topo.links[f.topo.ports(host)[0]].other(host).node;
    let mut bad = 0;
    for i in 0..samples {
        let t = targets.choose(rng).expect("non-empty");
        let addr = t.base + rng.gen_range(0..t.size);
        let msg = Message::at(Opcode::M2sReq(M2sReqOp::MemRd), addr, i as u16);
        let hbr = f.route_hbr(host, &msg)?.device;
        let p = edge.to_fabric(&msg)?;
        let (pbr, _) = pbr_walk(&f.topo, &f.dpid, ingress, &p, rng)?;
        if pbr != hbr {
            bad += 1;
        }
    }
    Ok(bad)
}

/// One switch with 2 to 4 hosts and 3 to 6 devices, some of them MLDs.
pub fn random_pool<R: Rng>(rng: &mut R) -> Topology {
    let mut t = Topology::default();
    let s = t.add_node("sw", NodeKind::Switch);
    for i in 0..rng.gen_range(2..=4) {
        let h = t.add_node(&format!("h{i}"), NodeKind::Host);
        t.add_link(s, h, 16, 32, false);
    }
    for i in 0..rng.gen_range(3..=6) {
        let lds = if rng.gen_bool(0.4) { rng.gen_range(2..=4) } else { 1 };
        let kind = if lds > 1 { DevKind::Mld } else { DevKind::Sld };
        let d = t.add_node(&format!("d{i}"), NodeKind::Device { dtype: 3, kind, lds, size_mb: 1024 });
        t.add_link(s, d, 16, 32, false);
    }
    t
}

/// A random BIND/UNBIND sequence over the ports of `t`'s single switch.
pub fn random_bind_script<R: Rng>(t: &Topology, rng: &mut R, len: usize) -> Vec<FmCommand> {
    let s = t.nodes.iter().position(|n| n.is_switch()).expect("pool has a switch");
    let ports = t.ports(s);
    let (mut up, mut down) = (Vec::new(), Vec::new());
    for (p, &l) in ports.iter().enumerate() {
        let peer = t.links[l].other(s).node;
        match t.nodes[peer].kind {
            NodeKind::Host => up.push(p as u16),
            NodeKind::Device { lds, .. } => down.push((p as u16, lds)),
            NodeKind::Switch => {}
        }
    }
    let sw = t.nodes[s].name.clone();
    (0..len)
        .map(|_| {
            let vppb = up.choose(rng).expect("hosts exist") * VPPBS_PER_VH + rng.gen_range(0..4);
            if rng.gen_bool(0.7) {
                let &(port, lds) = down.choose(rng).expect("devices exist");
                let ld = (lds > 1).then(|| rng.gen_range(0..lds));
                FmCommand::Bind { switch: sw.clone(), vppb, port, ld }
            } else {
                FmCommand::Unbind { switch: sw.clone(), vppb, option: UnbindOption::Force }
            }
        })
        .collect()
}

/// Counts messages from one hierarchy that reach an endpoint owned by
/// another, probing every mapped range of every host from every host.
pub fn vh_isolation_violations(f: &Fabric) -> usize {
    let hosts: Vec<usize> = (0..f.topo.nodes.len()).filter(|&h| f.topo.nodes[h].is_host()).collect();
    let mut bad = 0;
    for &src in &hosts {
        for &other in &hosts {
            for t in f.vh(other) {
                for addr in [t.base, t.base + t.size / 2, t.base + t.size - 1] {
                    let msg = Message::at(Opcode::M2sReq(M2sReqOp::MemRd), addr, 0);
                    let Ok(d) = f.route_hbr(src, &msg) else { continue };
                    let mine = f.vh(src).iter().any(|m| m.device == d.device && m.ld == d.ld);
                    let theirs = hosts
                        .iter()
                        .filter(|&&h| h != src)
                        .any(|&h| f.vh(h).iter().any(|m| m.device == d.device && m.ld == d.ld));
                    if !mine || theirs {
                        bad += 1;
                    }
                }
            }
            // Responses from this host's targets must come back to it.
            if src == other {
                for t in f.vh(src) {
                    if f.route_hbr_up(t.device, t.ld).ok() != Some(src) {
                        bad += 1;
                    }
                }
            }
        }
    }
    bad
}
