use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cxlsim_core::depgraph::{check_acyclic, DependenceGraph, Node};
use cxlsim_core::fabric::gen::random_tree;
use cxlsim_core::fabric::pbr::{build_dpid_tables, pbr_walk, FastTable, PbrMessage};
use cxlsim_core::fabric::qos::{DevLoad, RateController};
use cxlsim_core::fabric::topology::NodeKind;
use cxlsim_core::fabric::Fabric;
use cxlsim_core::flit::gen::random_flit;
use cxlsim_core::flit::protocol_id::CODEWORDS;
use cxlsim_core::flit::{decode_flit, encode_flit, FlitMode};
use cxlsim_core::io::{next_deliverable, FcClass, IoOp, IoTlp, OrderingMode};
use cxlsim_core::mem::bi::{MultiHostSystem, SharerMode};
use cxlsim_core::perf::latency::{latency_estimate, LatencyPath};
use cxlsim_core::perf::{io_bandwidth, IoMix, LinkConfig};
use cxlsim_core::protocol::{classify_message, Message, Opcode, ProtocolLevel, SnpOp};
use cxlsim_core::sim::scenario::TWO_HIERARCHIES;
use cxlsim_core::sim::{run, SimConfig, WorkloadSpec};

/// Cycle search by transitive closure: some node reaches itself.
fn has_cycle_warshall(nodes: &[Node], edges: &[(usize, usize)]) -> bool {
    let n = nodes.len();
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                let via = reach[k].clone();
                for (r, v) in reach[i].iter_mut().zip(via) {
                    *r |= v;
                }
            }
        }
    }
    (0..n).any(|i| reach[i][i])
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=8).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..20)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn acyclicity_matches_closure_oracle((n, edges) in graph_strategy()) {
        let nodes = &Node::ALL[..n];
        let mut g = DependenceGraph::new();
        for &v in nodes {
            g.add_node(v);
        }
        for &(a, b) in &edges {
            g.add_edge(nodes[a], nodes[b]);
        }
        let verdict = check_acyclic(&g);
        prop_assert_eq!(verdict.is_acyclic(), !has_cycle_warshall(nodes, &edges));
        if let cxlsim_core::depgraph::Verdict::Cycle(c) = verdict {
            // The reported cycle is made of real edges.
            let set: BTreeSet<(Node, Node)> = edges.iter().map(|&(a, b)| (nodes[a], nodes[b])).collect();
            for i in 0..c.len() {
                prop_assert!(set.contains(&(c[i], c[(i + 1) % c.len()])));
            }
        }
    }

    #[test]
    fn flits_roundtrip(seed in any::<u64>(), m in 0usize..3) {
        let mode = FlitMode::ALL[m];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..16 {
            let f = random_flit(&mut rng, mode);
            let bytes = encode_flit(&f).unwrap();
            prop_assert_eq!(bytes.len(), mode.flit_bytes());
            prop_assert_eq!(decode_flit(mode, &bytes).unwrap(), f);
        }
    }

    #[test]
    fn single_payload_flips_are_caught(seed in any::<u64>(), bit in 16usize..68 * 8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_flit(&mut rng, FlitMode::F68);
        let mut b = encode_flit(&f).unwrap();
        b[bit / 8] ^= 1 << (bit % 8);
        prop_assert!(decode_flit(FlitMode::F68, &b).map_or(true, |g| g != f));
    }

    #[test]
    fn completion_at_head_is_never_stuck(kinds in prop::collection::vec(0usize..3, 1..12), relaxed in any::<bool>()) {
        // Non-posted requests ahead are blocked; a queued completion must
        // still be deliverable.
        let ops = [IoOp::MemWr, IoOp::MemRd, IoOp::CplD];
        let mut q: Vec<IoTlp> = kinds.iter().map(|&k| IoTlp::new(ops[k])).collect();
        q.push(IoTlp::new(IoOp::Cpl));
        let np_blocked = |t: &IoTlp| t.fc() == FcClass::NonPosted;
        let got = next_deliverable(&q, OrderingMode::Legacy, relaxed, np_blocked);
        prop_assert!(got.is_some());
        prop_assert_ne!(q[got.unwrap()].fc(), FcClass::NonPosted);
        let uio: Vec<IoTlp> = kinds.iter().map(|&k| IoTlp::new([IoOp::UioWr, IoOp::UioRd, IoOp::UioRdCplD][k])).collect();
        let mut uio = uio;
        uio.push(IoTlp::new(IoOp::UioWrCpl));
        let got = next_deliverable(&uio, OrderingMode::Uio, relaxed, |t| t.fc() != FcClass::Completion);
        prop_assert!(got.is_some());
    }

    #[test]
    fn io_bandwidth_is_monotone(m in 0usize..3, k in 0usize..3, a in 1u32..1024, b in 1u32..1024) {
        let cfg = LinkConfig::x16_32(FlitMode::ALL[m]);
        let mix = [IoMix::Read, IoMix::Write, IoMix::ReadWrite][k];
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(io_bandwidth(&cfg, mix, lo).unwrap() <= io_bandwidth(&cfg, mix, hi).unwrap());
    }

    #[test]
    fn latency_is_additive(parts in prop::collection::vec(0u32..500, 0..8)) {
        let mut p = LatencyPath::new("random");
        for v in &parts {
            p = p.with("part", f64::from(*v));
        }
        prop_assert_eq!(latency_estimate(&p), parts.iter().map(|v| f64::from(*v)).sum::<f64>());
    }

    #[test]
    fn fast_lookup_finds_the_segment_owner(
        shift in 20u32..34,
        pids in prop::collection::vec(0u16..4096, 1..32),
        off in any::<u64>(),
    ) {
        let seg = 1u64 << shift;
        let base = 1u64 << 40;
        let fast = FastTable::new(base, seg, pids.clone()).unwrap();
        let i = (off % pids.len() as u64) as usize;
        let hpa = base + i as u64 * seg + off % seg;
        prop_assert_eq!(fast.lookup(hpa).unwrap(), pids[i]);
        prop_assert!(fast.lookup(base + pids.len() as u64 * seg).is_err());
    }

    #[test]
    fn rate_never_exceeds_nominal(loads in prop::collection::vec(0usize..4, 1..64), burst in 0.1f64..4.0) {
        let nominal = 100.0;
        let mut c = RateController::new(nominal * burst, nominal);
        for l in loads {
            let before = c.rate;
            let load = [DevLoad::Light, DevLoad::Optimal, DevLoad::Moderate, DevLoad::Severe][l];
            let r = c.update(load);
            match load {
                DevLoad::Light => prop_assert!(r >= before && (r <= nominal || r == before)),
                DevLoad::Optimal => prop_assert_eq!(r, before),
                _ => prop_assert!(r < before),
            }
        }
    }

    #[test]
    fn every_opcode_classifies_at_its_level(tag in any::<u16>(), addr in any::<u64>()) {
        for op in Opcode::all() {
            let m = Message::at(op, addr, tag);
            prop_assert!(m.validate().is_ok());
            prop_assert!(classify_message(&m, op.min_level()).is_ok());
            prop_assert!(classify_message(&m, ProtocolLevel::Cxl30).is_ok());
        }
    }

    #[test]
    fn directory_stays_sound(seed in any::<u64>(), cap in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sys = MultiHostSystem::new(4, SharerMode::Exact, Some(cap));
        sys.run_random(&mut rng, &[0, 64, 128], 120);
        prop_assert!(sys.violations.is_empty(), "{:?}", sys.violations);
        prop_assert!(sys.is_quiescent());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordered_flows_keep_one_path(seed in any::<u64>(), line in any::<u64>()) {
        // A random tree with every inter-switch link doubled.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = random_tree(&mut rng, 3, 12);
        let inter: Vec<(usize, usize)> = t
            .links
            .iter()
            .filter(|l| t.nodes[l.a.node].is_switch() && t.nodes[l.b.node].is_switch())
            .map(|l| (l.a.node, l.b.node))
            .collect();
        for (a, b) in inter {
            t.add_link(a, b, 16, 32, false);
        }
        let tables = build_dpid_tables(&t);
        let root = t.node("s0").unwrap();
        let devices: Vec<u16> = t
            .nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Device { .. }))
            .filter_map(|n| n.pid)
            .collect();
        for dpid in devices {
            let snp = PbrMessage { inner: Message::at(Opcode::H2dReq(SnpOp::SnpInv), line << 6, 0), dpid, spid: None };
            let first = pbr_walk(&t, &tables, root, &snp, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            for s in 1..6 {
                let again = pbr_walk(&t, &tables, root, &snp, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
                prop_assert_eq!(&again, &first);
            }
            prop_assert_eq!(t.nodes[first.0].pid, Some(dpid));
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), lines in 10u64..80, mix in 0usize..3) {
        let f = Fabric::parse(TWO_HIERARCHIES).unwrap();
        let cfg = SimConfig { seed, trace: true, ..SimConfig::default() };
        let m = cxlsim_core::perf::MemMix::ALL[mix];
        let w = [WorkloadSpec::new("h0", m, lines), WorkloadSpec::new("h1", m, lines)];
        let a = run(&f, &w, &mut [], &cfg).unwrap();
        let b = run(&f, &w, &mut [], &cfg).unwrap();
        prop_assert_eq!(&a.trace, &b.trace);
        prop_assert_eq!(a.stats.to_csv(), b.stats.to_csv());
        prop_assert_eq!(a.stats.get("completed", "h0"), Some(lines as f64));
    }
}

#[test]
fn protocol_id_codewords_are_four_apart() {
    for (i, a) in CODEWORDS.iter().enumerate() {
        for b in &CODEWORDS[i + 1..] {
            assert!((a.2 ^ b.2).count_ones() >= 4, "{a:?} vs {b:?}");
        }
    }
}
