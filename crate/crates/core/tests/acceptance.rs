//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cxlsim_core::cache::explore::{explore, ExploreConfig};
use cxlsim_core::fabric::gen::{pbr_hbr_mismatches, random_bind_script, random_pool, random_tree, vh_isolation_violations};
use cxlsim_core::fabric::topology::{FmCommand, UnbindOption};
use cxlsim_core::fabric::{Fabric, FabricError};
use cxlsim_core::flit::gen::{random_all_data, random_flit};
use cxlsim_core::flit::protocol_id::CODEWORDS;
use cxlsim_core::flit::{decode_flit, decode_protocol_id, encode_flit, Flit, FlitDecoder, FlitMode, Slot};
use cxlsim_core::io::{explore_io, may_pass, FcClass, IoOp, IoScript, IoTlp, OrderingMode, OrderingVerdict};
use cxlsim_core::mem::bi::{MultiHostSystem, SharerMode};
use cxlsim_core::mem::DeviceType;
use cxlsim_core::perf::latency::{end_to_end_adder, LatencyPath, LINK_FLIGHT_RT_NS, PORT_RT_COMMON_NS};
use cxlsim_core::perf::{
    cache_bandwidth, io_bandwidth, latency_estimate, link_efficiency, mem_bandwidth, uio_bi_tradeoff, CacheMix,
    ClockMode, IoMix, LinkConfig, LinkProtocol, MemMix, UioBiMix, UioBiParams,
};
use cxlsim_core::sim::scenario::{bi_shared_then_exclusive, measure_mem_mix, two_hierarchies};

/// Outcome of one criterion: pass flag, a one-line summary, and detail
/// lines for anything that missed.
struct Outcome {
    pass: bool,
    summary: String,
    misses: Vec<String>,
}

impl Outcome {
    fn from_misses(checked: usize, misses: Vec<String>) -> Self {
        Outcome { pass: misses.is_empty(), summary: format!("{}/{checked} checks ok", checked - misses.len()), misses }
    }
}

fn near(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol + 1e-9
}

fn round_to(x: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (x * s).round() / s
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn link_efficiency_constants() -> Outcome {
    let r = Ratio::new;
    let sync = r(128u64, 130);
    let skp = r(374, 375);
    let framing = r(64, 68);
    let dllp = r(49, 50);
    let mut c68 = LinkConfig::x16_32(FlitMode::F68);
    // (name, computed, oracle, reference value, rounding digits)
    #[allow(clippy::type_complexity)]
    let mut cases: Vec<(&str, Ratio<u64>, Ratio<u64>, f64, i32)> = Vec::new();
    c68.sync_hdr_bypass = false;
    cases.push(("68B cache+mem sync", link_efficiency(&c68, LinkProtocol::CacheMem), sync * skp * framing, 0.924, 3));
    cases.push(("68B io sync", link_efficiency(&c68, LinkProtocol::Io), sync * skp * framing * dllp, 0.906, 3));
    c68.sync_hdr_bypass = true;
    cases.push(("68B cache+mem bypass", link_efficiency(&c68, LinkProtocol::CacheMem), skp * framing, 0.939, 3));
    cases.push(("68B io bypass", link_efficiency(&c68, LinkProtocol::Io), skp * framing * dllp, 0.92, 2));
    let c256 = LinkConfig::x16_32(FlitMode::F256);
    cases.push(("256B cache+mem", link_efficiency(&c256, LinkProtocol::CacheMem), r(15, 16), 0.938, 3));
    let mut misses = Vec::new();
    for (name, got, oracle, quoted, places) in &cases {
        if got != oracle || round_to(to_f64(*got), *places) != *quoted {
            misses.push(format!("{name}: got {got} ({:.4}), want {oracle} ~ {quoted}", to_f64(*got)));
        }
    }
    Outcome::from_misses(cases.len(), misses)
}

// (mix, mode, [t3 m2s, t3 s2m, t2 m2s, t2 s2m])
const MEM_TABLE: [(MemMix, FlitMode, [f64; 4]); 9] = [
    (MemMix::R1W0, FlitMode::F68, [0.0, 53.5, 0.0, 48.1]),
    (MemMix::R1W0, FlitMode::F256, [0.0, 54.0, 0.0, 50.3]),
    (MemMix::R1W0, FlitMode::F128Lo, [0.0, 51.9, 0.0, 49.1]),
    (MemMix::R1W1, FlitMode::F68, [40.1, 40.1, 40.1, 40.1]),
    (MemMix::R1W1, FlitMode::F256, [39.9, 39.9, 39.9, 39.9]),
    (MemMix::R1W1, FlitMode::F128Lo, [39.9, 39.9, 39.9, 39.9]),
    (MemMix::R2W1, FlitMode::F68, [25.3, 50.7, 22.9, 45.8]),
    (MemMix::R2W1, FlitMode::F256, [26.0, 52.1, 24.3, 48.6]),
    (MemMix::R2W1, FlitMode::F128Lo, [25.4, 50.9, 24.3, 47.5]),
];

fn mem_table() -> Outcome {
    let mut misses = Vec::new();
    let mut n = 0;
    for (mix, mode, want) in MEM_TABLE {
        let cfg = LinkConfig::x16_32(mode);
        let (t3m, t3s) = mem_bandwidth(&cfg, mix, DeviceType::Type3);
        let (t2m, t2s) = mem_bandwidth(&cfg, mix, DeviceType::Type2);
        let got = [t3m, t3s, t2m, t2s];
        let names = ["T3 M2S", "T3 S2M", "T2 M2S", "T2 S2M"];
        for i in 0..4 {
            n += 1;
            if !near(got[i], want[i], 0.2) {
                misses.push(format!("{mix} {mode} {}: got {:.2}, want {} +/- 0.2", names[i], got[i], want[i]));
            }
        }
    }
    Outcome::from_misses(n, misses)
}

fn cache_identities() -> Outcome {
    let c68 = LinkConfig::x16_32(FlitMode::F68);
    let c256 = LinkConfig::new(16, 64, FlitMode::F256).expect("valid link");
    let clo = LinkConfig::new(16, 64, FlitMode::F128Lo).expect("valid link");
    let cases = [
        ("68B device read", cache_bandwidth(&c68, CacheMix::DevRead), 56.6),
        ("68B device write", cache_bandwidth(&c68, CacheMix::DevWrite), 40.1),
        ("256B device read", cache_bandwidth(&c256, CacheMix::DevRead), 112.0),
        ("128B LO device read", cache_bandwidth(&clo, CacheMix::DevRead), 104.0),
        ("256B device write", cache_bandwidth(&c256, CacheMix::DevWrite), 73.8),
    ];
    let misses = cases
        .iter()
        .filter(|(_, got, want)| !near(*got, *want, 0.1))
        .map(|(name, got, want)| format!("{name}: got {got:.3}, want {want} +/- 0.1"))
        .collect();
    Outcome::from_misses(cases.len(), misses)
}

// Rows by payload DW; columns read, write, rw per mode in F68, F256, F128Lo order.
const IO_TABLE: [(u32, [f64; 9]); 6] = [
    (1, [9.8, 8.4, 9.1, 14.7, 11.8, 13.1, 14.5, 11.6, 12.9]),
    (4, [26.2, 23.5, 29.4, 33.6, 29.4, 39.2, 33.1, 28.9, 38.6]),
    (16, [44.9, 42.8, 67.3, 49.6, 47.1, 78.5, 48.7, 46.3, 77.1]),
    (64, [54.6, 53.8, 99.2, 56.2, 55.4, 104.6, 55.3, 54.4, 102.8]),
    (256, [57.7, 57.5, 112.5, 58.2, 57.9, 114.1, 57.2, 57.0, 112.2]),
    (1024, [58.6, 58.5, 116.4, 58.7, 58.6, 116.8, 57.7, 57.6, 114.8]),
];

fn io_table() -> Outcome {
    let mut misses = Vec::new();
    let mut n = 0;
    for (dw, row) in IO_TABLE {
        for (m, mode) in FlitMode::ALL.into_iter().enumerate() {
            for (k, mix) in [IoMix::Read, IoMix::Write, IoMix::ReadWrite].into_iter().enumerate() {
                n += 1;
                let want = row[m * 3 + k];
                match io_bandwidth(&LinkConfig::x16_32(mode), mix, dw) {
                    Ok(got) if (got - want).abs() <= 0.03 * want => {}
                    Ok(got) => misses.push(format!("{mode} {mix:?} {dw} DW: got {got:.2}, want {want} +/- 3%")),
                    Err(e) => misses.push(format!("{mode} {mix:?} {dw} DW: {e}")),
                }
            }
        }
    }
    Outcome::from_misses(n, misses)
}

const UIO_BI_D: [u32; 8] = [1, 4, 8, 16, 24, 32, 64, 128];
const UIO_BI_TABLE: [(UioBiMix, f64, [f64; 8]); 4] = [
    (UioBiMix::Read, 0.1, [3.17, 2.69, 2.30, 1.89, 2.34, 2.08, 2.21, 2.29]),
    (UioBiMix::Write, 0.1, [4.13, 3.52, 3.00, 2.42, 3.06, 2.70, 2.88, 2.99]),
    (UioBiMix::Read, 1.0, [1.24, 1.20, 1.16, 1.12, 1.16, 1.14, 1.15, 1.16]),
    (UioBiMix::Write, 1.0, [1.49, 1.45, 1.41, 1.34, 1.41, 1.37, 1.39, 1.40]),
];

fn uio_bi_table() -> Outcome {
    let mut misses = Vec::new();
    let mut n = 0;
    for (mix, x, row) in UIO_BI_TABLE {
        for (d, want) in UIO_BI_D.into_iter().zip(row) {
            n += 1;
            let p = UioBiParams { a: 2, b: 2, c: 2, d, x };
            match uio_bi_tradeoff(&p, mix) {
                Ok(got) if near(got, want, 0.02) => {}
                Ok(got) => misses.push(format!("{mix:?} x={x} d={d}: got {got:.3}, want {want} +/- 0.02")),
                Err(e) => misses.push(format!("{mix:?} x={x} d={d}: {e}")),
            }
        }
    }
    Outcome::from_misses(n, misses)
}

fn latency_paths() -> Outcome {
    let got: Vec<f64> = LatencyPath::canned().iter().map(latency_estimate).collect();
    let want = [170.0, 250.0, 220.0, 270.0];
    let mut misses: Vec<String> = got
        .iter()
        .zip(want)
        .filter(|(g, w)| **g != *w)
        .map(|(g, w)| format!("canned path: got {g} ns, want {w} ns"))
        .collect();
    let adder = end_to_end_adder(ClockMode::Common);
    if adder != 57.0 || PORT_RT_COMMON_NS + PORT_RT_COMMON_NS + LINK_FLIGHT_RT_NS != 57.0 {
        misses.push(format!("end-to-end adder {adder} ns, want 21+21+15 = 57"));
    }
    Outcome::from_misses(5, misses)
}

fn sim_vs_model() -> Outcome {
    let lines = 10_000;
    let mut misses = Vec::new();
    let mut n = 0;
    let mut worst: f64 = 0.0;
    for mode in [FlitMode::F68, FlitMode::F256] {
        for mix in MemMix::ALL {
            let (want_m2s, want_s2m) = mem_bandwidth(&LinkConfig::x16_32(mode), mix, DeviceType::Type3);
            match measure_mem_mix(mode, mix, lines, 1) {
                Ok((m2s, s2m)) => {
                    for (dir, got, want) in [("M2S", m2s, want_m2s), ("S2M", s2m, want_s2m)] {
                        n += 1;
                        let err = if want == 0.0 { got.abs() } else { (got - want).abs() / want };
                        worst = worst.max(err);
                        if err > 0.01 {
                            misses.push(format!("{mode} {mix} {dir}: sim {got:.2} vs model {want:.2}"));
                        }
                    }
                }
                Err(e) => misses.push(format!("{mode} {mix}: {e}")),
            }
        }
    }
    let mut o = Outcome::from_misses(n, misses);
    o.summary = format!("{}, worst deviation {:.2}%", o.summary, worst * 100.0);
    o
}

fn coherence_checking() -> Outcome {
    let cfg = ExploreConfig { devices: 2, depth: 8, host_snoops: true, push_rule: true, ..ExploreConfig::default() };
    let clean = explore(&cfg);
    let broken = explore(&ExploreConfig { push_rule: false, ..cfg });
    let mut misses: Vec<String> = clean.violations.iter().map(|w| format!("violation: {}", w.violation)).collect();
    if clean.truncated {
        misses.push("search truncated".into());
    }
    if broken.violations.is_empty() {
        misses.push("no witness with the GO push rule disabled".into());
    }
    let mut o = Outcome::from_misses(2, misses);
    o.summary = format!(
        "{} states clean, {} witnesses without the push rule",
        clean.states,
        broken.violations.len()
    );
    o
}

fn multi_host_directory() -> Outcome {
    let mut misses = Vec::new();
    let key: Vec<String> = bi_shared_then_exclusive(100_000, 10_000)
        .into_iter()
        .filter_map(|l| {
            let text = l.splitn(3, ' ').nth(2)?.to_string();
            (text.starts_with("DIR") || text.starts_with("BiSnp")).then_some(text)
        })
        .collect();
    let want = ["DIR A=0x0 S{H1}", "DIR A=0x0 S{H1,H3}", "BiSnpInv -> H1 A=0x0", "BiSnpInv -> H3 A=0x0", "DIR A=0x0 E{H4}"];
    if key != want {
        misses.push(format!("transcript {key:?}"));
    }
    let runs = 1000;
    let mut bad = 0;
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sys = MultiHostSystem::new(4, SharerMode::Exact, Some(2));
        sys.run_random(&mut rng, &[0, 64, 128], 200);
        if !sys.violations.is_empty() || !sys.is_quiescent() {
            bad += 1;
            if bad <= 3 {
                misses.push(format!("seed {seed}: {:?}", sys.violations));
            }
        }
    }
    let mut o = Outcome::from_misses(runs as usize + 1, misses);
    o.summary = format!("transcript ok: {}, {}/{runs} random runs sound", key == want, runs as usize - bad);
    o
}

fn legacy_oracle(second: FcClass, first: FcClass, ro: bool) -> OrderingVerdict {
    use FcClass::*;
    use OrderingVerdict::*;
    // Rows: the later transaction; columns: the earlier one. Second entry is
    // the relaxed-ordering variant of the cell.
    let table = [
        // Posted row: vs P, NP, C
        [(MustNotPass, MayPass), (MustAllowPass, MustAllowPass), (MayPass, MustAllowPass)],
        // Non-posted row
        [(MustNotPass, MayPass), (MayPass, MayPass), (MayPass, MayPass)],
        // Completion row
        [(MustNotPass, MayPass), (MustAllowPass, MustAllowPass), (MayPass, MustNotPass)],
    ];
    let idx = |c: FcClass| match c {
        Posted => 0,
        NonPosted => 1,
        Completion => 2,
    };
    let (plain, relaxed) = table[idx(second)][idx(first)];
    if ro {
        relaxed
    } else {
        plain
    }
}

fn uio_oracle(second: FcClass, first: FcClass) -> OrderingVerdict {
    match (second, first) {
        (FcClass::Completion, FcClass::Posted | FcClass::NonPosted) => OrderingVerdict::MustAllowPass,
        _ => OrderingVerdict::MayPass,
    }
}

fn ordering_tables() -> Outcome {
    use IoOp::*;
    let legacy = [MemRd, MemWr, CfgRd, CfgWr, IoRd, IoWr, Cpl, CplD];
    let uio = [UioWr, UioRd, UioWrCpl, UioRdCpl, UioRdCplD];
    let mut misses = Vec::new();
    let mut n = 0;
    for first in legacy {
        for second in legacy {
            for ro in [false, true] {
                n += 1;
                let a = IoTlp::new(first);
                let b = if ro { IoTlp::new(second).ro() } else { IoTlp::new(second) };
                let want = legacy_oracle(second.fc(), first.fc(), ro);
                let got = may_pass(&a, &b, OrderingMode::Legacy);
                if got != want {
                    misses.push(format!("legacy {second:?} after {first:?} ro={ro}: {got}, oracle {want}"));
                }
            }
        }
    }
    for first in uio {
        for second in uio {
            for ro in [false, true] {
                n += 1;
                let b = if ro { IoTlp::new(second).ro() } else { IoTlp::new(second) };
                let want = uio_oracle(second.fc(), first.fc());
                let got = may_pass(&IoTlp::new(first), &b, OrderingMode::Uio);
                if got != want {
                    misses.push(format!("uio {second:?} after {first:?}: {got}, oracle {want}"));
                }
            }
        }
    }
    let sync = explore_io(&IoScript::sync_write_then_read(OrderingMode::Legacy));
    n += 1;
    if sync.outcomes.contains(&vec![0, 0]) || sync.sync_forbidden != 0 {
        misses.push(format!("both-old outcome reachable under legacy rules: {:?}", sync.outcomes));
    }
    let fenced = explore_io(&IoScript::producer_consumer(1, true, OrderingMode::Uio, 2));
    n += 1;
    if fenced.pc_violations != 0 || fenced.max_events > 10 || fenced.executions == 0 {
        misses.push(format!(
            "fenced UIO: {} violations over {} executions of up to {} events",
            fenced.pc_violations, fenced.executions, fenced.max_events
        ));
    }
    let open = explore_io(&IoScript::producer_consumer(1, false, OrderingMode::Uio, 2));
    n += 1;
    if open.pc_violations == 0 {
        misses.push("unfenced UIO shows no producer-consumer violation".into());
    }
    Outcome::from_misses(n, misses)
}

fn flit_integrity() -> Outcome {
    let mut misses = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let per_mode = 100_000;
    for mode in FlitMode::ALL {
        let mut bad = 0;
        for _ in 0..per_mode {
            let f = random_flit(&mut rng, mode);
            let ok = encode_flit(&f).and_then(|b| decode_flit(mode, &b)).is_ok_and(|g| g == f);
            bad += usize::from(!ok);
        }
        if bad > 0 {
            misses.push(format!("{mode}: {bad}/{per_mode} flits failed to round-trip"));
        }
    }
    // Announced all-data flits go through the stateful decoder.
    let mut dec = FlitDecoder::new(FlitMode::F68);
    for _ in 0..1000 {
        let mut hdr = Flit::slots(FlitMode::F68, vec![Slot::Empty; 4]);
        hdr.data_follow = rng.gen_range(0..4);
        let ok = encode_flit(&hdr).and_then(|b| dec.decode(&b)).is_ok_and(|g| g == hdr);
        let data_ok = (0..hdr.data_follow).all(|_| {
            let d = random_all_data(&mut rng);
            encode_flit(&d).and_then(|b| dec.decode(&b)).is_ok_and(|g| g == d)
        });
        if !ok || !data_ok {
            misses.push("68B all-data sequence failed to round-trip".into());
            break;
        }
    }

    // Every 1- and 2-bit error in the 68B payload and CRC is detected.
    let f = random_flit(&mut rng, FlitMode::F68);
    let clean = encode_flit(&f).expect("generated flit encodes");
    let bits: Vec<usize> = (2 * 8..68 * 8).collect();
    let flip = |b: &mut [u8], i: usize| b[i / 8] ^= 1 << (i % 8);
    let detected = |b: &[u8]| decode_flit(FlitMode::F68, b).map_or(true, |g| g != f);
    let (mut tried, mut missed) = (0usize, 0usize);
    for (k, &i) in bits.iter().enumerate() {
        let mut b = clean.clone();
        flip(&mut b, i);
        tried += 1;
        missed += usize::from(!detected(&b));
        for &j in &bits[k + 1..] {
            flip(&mut b, j);
            tried += 1;
            missed += usize::from(!detected(&b));
            flip(&mut b, j);
        }
    }
    if missed > 0 {
        misses.push(format!("{missed}/{tried} 68B payload corruptions went undetected"));
    }

    // Single-bit errors in the protocol ID are corrected, bare and in a flit.
    let mut corrected = 0;
    for (kind, eds, _) in CODEWORDS {
        let mut f = random_flit(&mut rng, FlitMode::F68);
        while f.kind != kind {
            f = random_flit(&mut rng, FlitMode::F68);
        }
        f.eds = eds;
        let bytes = encode_flit(&f).expect("generated flit encodes");
        for pos in 0..16 {
            let mut b = bytes.clone();
            flip(&mut b, pos);
            let bare = decode_protocol_id([b[0], b[1]]) == Ok((kind, eds));
            let whole = decode_flit(FlitMode::F68, &b).is_ok_and(|g| g == f);
            if bare && whole {
                corrected += 1;
            } else {
                misses.push(format!("protocol id {kind} eds={eds} bit {pos} not corrected"));
            }
        }
    }
    let mut o = Outcome::from_misses(3 + 1 + 1 + 128, misses);
    o.summary = format!(
        "{per_mode} flits per mode, {tried} corruptions, {corrected}/128 protocol-id flips corrected"
    );
    o
}

const POOL: &str = "\
HOST h0
HOST h1
SWITCH s0
DEVICE d0 type=3 kind=SLD
DEVICE d1 type=3 kind=SLD
LINK h0 s0 width=16 gts=32
LINK h1 s0 width=16 gts=32
LINK s0 d0 width=16 gts=32
LINK s0 d1 width=16 gts=32
BIND s0 0 2
BIND s0 16 3
";

fn fabric_checks() -> Outcome {
    let mut misses = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(12);

    let mut mismatched = 0;
    for i in 0..100 {
        let r = Fabric::new(random_tree(&mut rng, 3, 16)).and_then(|f| {
            let h = f.topo.node("h0")?;
            pbr_hbr_mismatches(&f, h, 64, &mut rng)
        });
        match r {
            Ok(0) => {}
            Ok(k) => {
                mismatched += 1;
                misses.push(format!("tree {i}: {k} PBR/HBR mismatches"));
            }
            Err(e) => misses.push(format!("tree {i}: {e}")),
        }
    }

    let mut leaks = 0;
    for i in 0..100 {
        let t = random_pool(&mut rng);
        let script = random_bind_script(&t, &mut rng, 12);
        match Fabric::new(t) {
            Ok(mut f) => {
                for c in &script {
                    let _ = f.fm_execute(c);
                    let v = vh_isolation_violations(&f);
                    if v > 0 {
                        leaks += 1;
                        misses.push(format!("script {i}: {v} isolation violations after {c}"));
                        break;
                    }
                }
            }
            Err(e) => misses.push(format!("pool {i}: {e}")),
        }
    }

    let force_ok = Fabric::parse(POOL)
        .and_then(|mut f| {
            f.set_responsive("h1", false)?;
            let h1 = f.topo.node("h1")?;
            let polite = f.fm_execute(&FmCommand::Unbind { switch: "s0".into(), vppb: 16, option: UnbindOption::Wait });
            f.fm_execute(&FmCommand::Unbind { switch: "s0".into(), vppb: 16, option: UnbindOption::Force })?;
            Ok(matches!(polite, Err(FabricError::HostUncooperative(_))) && f.vh(h1).is_empty())
        })
        .unwrap_or(false);
    if !force_ok {
        misses.push("FORCE unbind against an unresponsive host did not succeed".into());
    }

    let lines = 3000;
    let contain = two_hierarchies(lines, 3, None).and_then(|base| Ok((base, two_hierarchies(lines, 3, Some(1_000_000))?)));
    let mut change = f64::NAN;
    match contain {
        Ok((base, hit)) => {
            let get = |s: &cxlsim_core::sim::Stats, m: &str, h: &str| s.get(m, h).unwrap_or(0.0);
            let done = get(&hit, "completed", "h0") + get(&hit, "errors", "h0");
            if done != lines as f64 || get(&hit, "errors", "h0") == 0.0 {
                misses.push(format!("dead endpoint: {done} of {lines} requests answered"));
            }
            let (a, b) = (get(&base, "throughput", "h1"), get(&hit, "throughput", "h1"));
            change = (a - b).abs() / a;
            if change >= 0.02 {
                misses.push(format!("sibling throughput {a:.2} -> {b:.2} req/us"));
            }
        }
        Err(e) => misses.push(format!("containment run: {e}")),
    }
    let mut o = Outcome::from_misses(203, misses);
    o.summary = format!(
        "{}/100 trees equivalent, {}/100 scripts isolated, force unbind {}, sibling change {:.2}%",
        100 - mismatched,
        100 - leaks,
        if force_ok { "ok" } else { "failed" },
        change * 100.0
    );
    o
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        ("link-efficiency constants", link_efficiency_constants),
        ("memory bandwidth table", mem_table),
        ("cache bandwidth identities", cache_identities),
        ("io bandwidth table", io_table),
        ("uio/bi tradeoff table", uio_bi_table),
        ("latency paths", latency_paths),
        ("simulation vs analytical bandwidth", sim_vs_model),
        ("coherence model checking", coherence_checking),
        ("multi-host directory", multi_host_directory),
        ("io ordering tables", ordering_tables),
        ("flit integrity", flit_integrity),
        ("fabric routing, isolation and containment", fabric_checks),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {:>2} {name}: {} [{:.2?}]", i + 1, o.summary, t.elapsed());
        for m in &o.misses {
            println!("        {m}");
        }
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
