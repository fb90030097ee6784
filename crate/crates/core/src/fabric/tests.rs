use rand::rngs::StdRng;
use rand::SeedableRng;

use super::gen::*;
use super::*;
use crate::protocol::{M2sReqOp, Opcode};

// Two hosts, one switch, SLD d0, MLD d1 with two LDs, SLD d2 bound to h1.
const POOL: &str = "\
HOST h0
HOST h1
SWITCH s0
DEVICE d0 type=3 kind=SLD
DEVICE d1 type=3 kind=MLD lds=2
DEVICE d2 type=3 kind=SLD
LINK h0 s0 width=16 gts=32
LINK h1 s0 width=16 gts=32
LINK s0 d0 width=16 gts=32
LINK s0 d1 width=16 gts=32
LINK s0 d2 width=16 gts=32
BIND s0 16 4
";

fn rd(addr: u64) -> Message {
    Message::at(Opcode::M2sReq(M2sReqOp::MemRd), addr, 1)
}

fn ids(f: &Fabric) -> (usize, usize, usize, usize, usize) {
    let n = |s| f.topo.node(s).unwrap();
    (n("h0"), n("h1"), n("d0"), n("d1"), n("d2"))
}

#[test]
fn before_binding_only_the_sld_is_visible() {
    let f = Fabric::parse(POOL).unwrap();
    let (h0, h1, _, _, d2) = ids(&f);
    assert!(f.vh(h0).is_empty());
    assert_eq!(f.vh(h1).len(), 1);
    let d = f.route_hbr(h1, &rd(f.vh(h1)[0].base)).unwrap();
    assert_eq!(d.device, d2);
    assert_eq!(d.ld, None);
    assert_eq!(d.hops, vec![(f.topo.node("s0").unwrap(), 4)]);
    assert!(matches!(f.route_hbr(h0, &rd(HPA_BASE)), Err(FabricError::NoRoute(_))));
    assert!(matches!(f.log[..], [Notification::HotAdd { ref host, .. }] if host == "h1"));
}

#[test]
fn fm_binds_device_and_lds() {
    let mut f = Fabric::parse(POOL).unwrap();
    let (h0, h1, d0, d1, _) = ids(&f);
    let bind = |vppb, port, ld| FmCommand::Bind { switch: "s0".into(), vppb, port, ld };
    let n = f.fm_execute(&bind(0, 2, None)).unwrap();
    assert!(matches!(&n[..], [Notification::HotAdd { host, vppb: 0, .. }] if host == "h0"));
    f.fm_execute(&bind(1, 3, Some(0))).unwrap();
    f.fm_execute(&bind(17, 3, Some(1))).unwrap();
    assert_eq!(f.vh(h0).len(), 2);
    assert_eq!(f.vh(h1).len(), 2);
    let ld0 = f.vh(h0).iter().find(|t| t.device == d1).unwrap().clone();
    let got = f.route_hbr(h0, &rd(ld0.base + 0x40)).unwrap();
    assert_eq!((got.device, got.ld, got.msg.ld_id), (d1, Some(0), Some(0)));
    let ld1 = f.vh(h1).iter().find(|t| t.device == d1).unwrap().clone();
    assert_eq!(f.route_hbr(h1, &rd(ld1.base)).unwrap().ld, Some(1));
    assert_eq!(f.route_hbr(h0, &rd(f.vh(h0)[0].base)).unwrap().device, d0);
    assert_eq!(f.route_hbr_up(d1, Some(1)).unwrap(), h1);
    assert!(f.validate().is_empty());
}

#[test]
fn binding_errors() {
    let mut f = Fabric::parse(POOL).unwrap();
    let bind = |vppb, port, ld| FmCommand::Bind { switch: "s0".into(), vppb, port, ld };
    assert!(matches!(f.fm_execute(&bind(0, 4, None)), Err(FabricError::PortAlreadyBound { port: 4, .. })));
    assert!(matches!(f.fm_execute(&bind(16, 2, None)), Err(FabricError::VppbInUse { .. })));
    assert!(matches!(f.fm_execute(&bind(0, 9, None)), Err(FabricError::UnknownEntity(_))));
    assert!(matches!(f.fm_execute(&bind(0, 3, Some(5))), Err(FabricError::UnknownEntity(_))));
    f.fm_execute(&bind(0, 3, Some(0))).unwrap();
    assert!(matches!(f.fm_execute(&bind(17, 3, Some(0))), Err(FabricError::PortAlreadyBound { .. })));
    assert!(matches!(f.fm_execute(&bind(17, 3, None)), Err(FabricError::PortAlreadyBound { .. })));
    let q = f.fm_execute(&FmCommand::Query { switch: "s0".into() }).unwrap();
    assert!(matches!(&q[..], [Notification::SwitchInfo { bound, .. }] if bound.len() == 2));
    assert!(matches!(
        &f.fm_execute(&FmCommand::Other("GetPhysicalPortState".into())).unwrap()[..],
        [Notification::Capability { .. }]
    ));
}

#[test]
fn unbind_options_against_unresponsive_host() {
    let mut f = Fabric::parse(POOL).unwrap();
    let (_, h1, ..) = ids(&f);
    f.set_responsive("h1", false).unwrap();
    for option in [UnbindOption::Wait, UnbindOption::HotRemoveWait] {
        let r = f.fm_execute(&FmCommand::Unbind { switch: "s0".into(), vppb: 16, option });
        assert_eq!(r, Err(FabricError::HostUncooperative("h1".into())));
    }
    assert_eq!(f.vh(h1).len(), 1);
    let n = f.fm_execute(&FmCommand::Unbind { switch: "s0".into(), vppb: 16, option: UnbindOption::Force }).unwrap();
    assert!(matches!(&n[..], [Notification::HotRemove { forced: true, .. }]));
    assert!(f.vh(h1).is_empty());
    assert!(f.fm_execute(&FmCommand::Unbind { switch: "s0".into(), vppb: 16, option: UnbindOption::Force }).is_err());
}

#[test]
fn set_ld_partitions() {
    let mut f = Fabric::parse(POOL).unwrap();
    let (.., d0, _, _) = ids(&f);
    let n = f.fm_execute(&FmCommand::SetLd { device: "d0".into(), gran_mb: 256, ranges: vec![1, 1, 2] }).unwrap();
    assert_eq!(n, vec![Notification::LdsCreated { device: "d0".into(), count: 3 }]);
    assert_eq!(f.ld_sizes(d0), vec![256 << 20, 256 << 20, 512 << 20]);
    let too_many = FmCommand::SetLd { device: "d0".into(), gran_mb: 1, ranges: vec![1; 17] };
    assert_eq!(f.fm_execute(&too_many), Err(FabricError::TooManyLds(17)));
    let too_big = FmCommand::SetLd { device: "d0".into(), gran_mb: 1024, ranges: vec![1, 1] };
    assert!(f.fm_execute(&too_big).is_err());
}

#[test]
fn transparent_tree_routes_every_device() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..20 {
        let f = Fabric::new(random_tree(&mut rng, 3, 16)).unwrap();
        let h = f.topo.node("h0").unwrap();
        let devs = f.topo.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Device { .. })).count();
        assert_eq!(f.vh(h).len(), devs);
        assert!(f.auto_fast(h).is_some());
        assert_eq!(pbr_hbr_mismatches(&f, h, 64, &mut rng).unwrap(), 0);
        assert!(f.validate().is_empty());
    }
}

#[test]
fn random_bind_scripts_keep_hierarchies_apart() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..30 {
        let t = random_pool(&mut rng);
        let script = random_bind_script(&t, &mut rng, 12);
        let mut f = Fabric::new(t).unwrap();
        for c in &script {
            let _ = f.fm_execute(c);
            assert_eq!(vh_isolation_violations(&f), 0, "after {c}");
        }
    }
}

#[test]
fn reroute_after_link_failure() {
    // Two switches joined by two parallel links; d0 hangs off s1.
    let text = "HOST h0\nSWITCH s0\nSWITCH s1\nDEVICE d0 type=3 kind=SLD\n\
        LINK h0 s0 width=16 gts=32\nLINK s0 s1 width=16 gts=32\nLINK s0 s1 width=16 gts=32\nLINK s1 d0 width=16 gts=32\n";
    let mut f = Fabric::parse(text).unwrap();
    let s0 = f.topo.node("s0").unwrap();
    let d0 = f.topo.node("d0").unwrap();
    let pid = f.topo.nodes[d0].pid.unwrap();
    assert_eq!(f.dpid[&s0][&pid], vec![1, 2]);
    let mut rng = StdRng::seed_from_u64(1);
    let uio = Message::at(Opcode::Io(crate::protocol::IoOp::UioRd), 0, 0);
    let p = PbrMessage { inner: uio, dpid: pid, spid: Some(0) };
    f.set_link(1, false).unwrap();
    assert_eq!(f.dpid[&s0][&pid], vec![2]);
    for _ in 0..20 {
        let (at, hops) = pbr_walk(&f.topo, &f.dpid, s0, &p, &mut rng).unwrap();
        assert_eq!(at, d0);
        assert_eq!(hops[0], (s0, 2));
    }
    f.set_link(2, false).unwrap();
    assert!(pbr_walk(&f.topo, &f.dpid, s0, &p, &mut rng).is_err());
    assert!(!f.validate().is_empty() || !f.dpid[&s0].contains_key(&pid));
}

#[test]
fn gfd_accepts_any_twelve_bit_source() {
    let mut g = Gfd::new(9);
    let inner = rd(0);
    for spid in 0..pbr::MAX_PIDS as u16 {
        g.accept(&PbrMessage { inner, dpid: 9, spid: Some(spid) }).unwrap();
    }
    assert_eq!(g.sources.len(), 4096);
    assert!(g.accept(&PbrMessage { inner, dpid: 8, spid: Some(0) }).is_err());
}
