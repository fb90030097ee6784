//! Canned runs used by tests, the acceptance suite and the CLI.

use super::engine::{run, EventQueue, Ps};
use super::workload::{Stats, WorkloadSpec};
use super::{SimConfig, SimError};
use crate::fabric::Fabric;
use crate::flit::FlitMode;
use crate::mem::bi::{BiAction, BiEvent, MultiHostSystem, SharerMode, Want};
use crate::perf::MemMix;

/// One host wired straight to one Type-3 SLD, x16 at 32 GT/s.
pub const POINT_TO_POINT: &str = "HOST h0\nDEVICE d0 type=3 kind=SLD\nLINK h0 d0 width=16 gts=32\n";

/// Two hosts behind one switch, each with its own SLD.
pub const TWO_HIERARCHIES: &str = "\
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

/// Steady-state (M2S, S2M) data bandwidth in GB/s of a closed-loop memory
/// mix over a point-to-point link.
pub fn measure_mem_mix(mode: FlitMode, mix: MemMix, lines: u64, seed: u64) -> Result<(f64, f64), SimError> {
    let f = Fabric::parse(POINT_TO_POINT)?;
    let cfg = SimConfig { flit: mode, seed, ..SimConfig::default() };
    let w = WorkloadSpec::new("h0", mix, lines);
    let r = run(&f, &[w], &mut [], &cfg)?;
    Ok((r.stats.get("write_bw", "h0").unwrap_or(0.0), r.stats.get("read_bw", "h0").unwrap_or(0.0)))
}

/// H1 and H3 read a line shared, then H4 asks for it exclusive. Requests
/// are spaced `gap_ps` apart and every message takes `flight_ps`.
pub fn bi_shared_then_exclusive(gap_ps: Ps, flight_ps: Ps) -> Vec<String> {
    #[derive(Debug)]
    enum E {
        Act(BiAction),
        Poll,
    }
    let mut sys = MultiHostSystem::new(4, SharerMode::Exact, None);
    let mut q = EventQueue::default();
    let reads = [(1, Want::Shared), (3, Want::Shared), (4, Want::Exclusive)];
    for (i, (host, want)) in reads.into_iter().enumerate() {
        q.push(i as Ps * gap_ps, E::Act(BiAction::Read { host, line: 0, want }));
    }
    let mut out = Vec::new();
    let mut seen = 0;
    while let Some((t, e)) = q.pop() {
        let moved = match e {
            E::Act(a) => sys.apply(a),
            E::Poll => {
                let mut any = false;
                for h in 1..=4 {
                    any |= sys.apply(BiAction::DeliverM2s { host: h });
                    any |= sys.apply(BiAction::DeliverS2m { host: h });
                }
                any
            }
        };
        if moved {
            q.push(t + flight_ps, E::Poll);
        }
        for ev in &sys.device.transcript[seen..] {
            if !matches!(ev, BiEvent::Request { .. }) {
                out.push(format!("{t} dev {ev}"));
            }
        }
        seen = sys.device.transcript.len();
    }
    out
}

/// Open-loop injection at `burst` times the device's service rate, with
/// DevLoad throttling. Returns the steady-state achieved rate and the
/// nominal rate, both in requests per microsecond.
pub fn devload_closed_loop(burst: f64, lines: u64, seed: u64) -> Result<(f64, f64), SimError> {
    let f = Fabric::parse(POINT_TO_POINT)?;
    let service: Ps = 10_000;
    let nominal = 1e6 / service as f64;
    let cfg = SimConfig { service_ps: Some(service), seed, ..SimConfig::default() };
    let mut w = WorkloadSpec::new("h0", MemMix::R1W0, lines);
    w.rate_per_us = Some(nominal);
    w.burst = burst;
    w.outstanding = usize::MAX;
    let r = run(&f, &[w], &mut [], &cfg)?;
    Ok((r.stats.get("throughput", "h0").unwrap_or(0.0), nominal))
}

/// Two independent hierarchies; optionally d0 dies at `fail_at`.
/// Returns the run's stats.
pub fn two_hierarchies(lines: u64, seed: u64, fail_at: Option<Ps>) -> Result<Stats, SimError> {
    let f = Fabric::parse(TWO_HIERARCHIES)?;
    let cfg = SimConfig {
        seed,
        failures: fail_at.map(|t| ("d0".to_string(), t)).into_iter().collect(),
        ..SimConfig::default()
    };
    let w = [WorkloadSpec::new("h0", MemMix::R1W1, lines), WorkloadSpec::new("h1", MemMix::R1W1, lines)];
    Ok(run(&f, &w, &mut [], &cfg)?.stats)
}
