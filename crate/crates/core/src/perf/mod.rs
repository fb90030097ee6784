//! Closed-form bandwidth and latency calculators.
//!
//! Bandwidths are per direction in GB/s. Efficiencies are exact rationals
//! so the quoted decimal constants can be checked by rounding.

pub mod latency;
pub mod tables;
pub mod uio_bi;

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

use crate::flit::{slot_capacity, FlitMode, HeaderClass, SlotKind};
use crate::mem::DeviceType;

pub use latency::{latency_estimate, LatencyComponent, LatencyPath};
pub use uio_bi::{uio_bi_tradeoff, UioBiMix, UioBiParams};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PerfError {
    #[error("unsupported link width x{0}")]
    Lanes(u8),
    #[error("unsupported data rate {0} GT/s")]
    Rate(u32),
    #[error("parameter out of domain: {0}")]
    Domain(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ClockMode {
    #[default]
    Common,
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LinkConfig {
    pub lanes: u8,
    pub rate_gts: u32,
    pub flit: FlitMode,
    pub sync_hdr_bypass: bool,
    pub clock: ClockMode,
}

impl LinkConfig {
    pub fn new(lanes: u8, rate_gts: u32, flit: FlitMode) -> Result<Self, PerfError> {
        if ![1, 2, 4, 8, 16].contains(&lanes) {
            return Err(PerfError::Lanes(lanes));
        }
        if ![8, 16, 32, 64].contains(&rate_gts) {
            return Err(PerfError::Rate(rate_gts));
        }
        Ok(LinkConfig { lanes, rate_gts, flit, sync_hdr_bypass: true, clock: ClockMode::Common })
    }

    /// x16 at 32 GT/s: 64 GB/s raw per direction.
    pub fn x16_32(flit: FlitMode) -> Self {
        LinkConfig { lanes: 16, rate_gts: 32, flit, sync_hdr_bypass: true, clock: ClockMode::Common }
    }

    pub fn raw_gbs(&self) -> f64 {
        f64::from(self.lanes) * f64::from(self.rate_gts) / 8.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LinkProtocol {
    Io,
    CacheMem,
}

type Q = Ratio<u64>;

fn q(n: u64, d: u64) -> Q {
    Ratio::new(n, d)
}

pub fn link_efficiency(cfg: &LinkConfig, proto: LinkProtocol) -> Q {
    match (cfg.flit, proto) {
        (FlitMode::F68, _) => {
            let sync = if cfg.sync_hdr_bypass { q(1, 1) } else { q(128, 130) };
            let cm = sync * q(374, 375) * q(64, 68);
            match proto {
                LinkProtocol::CacheMem => cm,
                // 2% of the link goes to DLLPs
                LinkProtocol::Io => cm * q(49, 50),
            }
        }
        (_, LinkProtocol::CacheMem) => q(15, 16),
        (FlitMode::F256, LinkProtocol::Io) => q(236, 256),
        (FlitMode::F128Lo, LinkProtocol::Io) => q(232, 256),
    }
}

pub fn to_f64(r: Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MemMix {
    R1W0,
    R1W1,
    R2W1,
}

impl MemMix {
    pub const ALL: [MemMix; 3] = [MemMix::R1W0, MemMix::R1W1, MemMix::R2W1];

    pub fn reads(self) -> u32 {
        match self {
            MemMix::R1W0 | MemMix::R1W1 => 1,
            MemMix::R2W1 => 2,
        }
    }

    pub fn writes(self) -> u32 {
        match self {
            MemMix::R1W0 => 0,
            MemMix::R1W1 | MemMix::R2W1 => 1,
        }
    }
}

impl fmt::Display for MemMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}R{}W", self.reads(), self.writes())
    }
}

impl FromStr for MemMix {
    type Err = PerfError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().trim_start_matches("MEM_") {
            "1R0W" => Ok(MemMix::R1W0),
            "1R1W" => Ok(MemMix::R1W1),
            "2R1W" => Ok(MemMix::R2W1),
            _ => Err(PerfError::Domain(format!("unknown memory mix {s}"))),
        }
    }
}

/// Headers and data slots one repetition of a mix puts on a direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DirLoad {
    pub headers: u32,
    pub data_slots: u32,
}

/// (M2S, S2M) load of one repetition. Reads: MemRd out, DRS plus four data
/// slots back, and a Cmp as well on Type-2. Writes: MemWr plus four data
/// slots out, Cmp back.
pub fn mem_unit(mix: MemMix, dtype: DeviceType) -> (DirLoad, DirLoad) {
    let (r, w) = (mix.reads(), mix.writes());
    let cmp = if dtype == DeviceType::Type2 { r } else { 0 };
    (
        DirLoad { headers: r + w, data_slots: 4 * w },
        DirLoad { headers: r + w + cmp, data_slots: 4 * r },
    )
}

/// Slot budget of one flit for a header class: data-capable slots, header
/// capacity of header-only slots, and headers per data-capable slot.
pub fn slot_budget(mode: FlitMode, class: HeaderClass) -> (f64, f64, f64) {
    let g = slot_capacity(mode, SlotKind::G, class) as f64;
    match mode {
        // all-data flits make every slot available to data
        FlitMode::F68 => (4.0, 0.0, g),
        _ => {
            let free: usize = mode
                .slot_kinds()
                .into_iter()
                .filter(|k| *k != SlotKind::G)
                .map(|k| slot_capacity(mode, k, class))
                .sum();
            (mode.g_slots() as f64, free as f64, g)
        }
    }
}

/// Repetitions per flit a direction can sustain.
fn units_per_flit(mode: FlitMode, class: HeaderClass, load: DirLoad) -> f64 {
    let (g_slots, free, g) = slot_budget(mode, class);
    let (k, m) = (f64::from(load.data_slots), f64::from(load.headers));
    if m == 0.0 {
        return if k == 0.0 { f64::INFINITY } else { g_slots / k };
    }
    let u = (g_slots + free / g) / (k + m / g);
    if m * u >= free {
        u
    } else {
        // headers fit in the header-only slots
        if k == 0.0 {
            f64::INFINITY
        } else {
            g_slots / k
        }
    }
}

/// Data bandwidth carried by one slot per flit.
pub fn slot_gbs(cfg: &LinkConfig) -> f64 {
    match cfg.flit {
        FlitMode::F68 => {
            let bypass = LinkConfig { sync_hdr_bypass: true, ..*cfg };
            to_f64(link_efficiency(&bypass, LinkProtocol::CacheMem)) * cfg.raw_gbs() / 4.0
        }
        _ => cfg.raw_gbs() / 16.0,
    }
}

/// Per-direction (M2S, S2M) data bandwidth for a memory mix with both
/// directions saturated.
pub fn mem_bandwidth(cfg: &LinkConfig, mix: MemMix, dtype: DeviceType) -> (f64, f64) {
    let (m2s, s2m) = mem_unit(mix, dtype);
    let u = units_per_flit(cfg.flit, HeaderClass::Full, m2s).min(units_per_flit(cfg.flit, HeaderClass::Small, s2m));
    let per = slot_gbs(cfg);
    (per * f64::from(m2s.data_slots) * u, per * f64::from(s2m.data_slots) * u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CacheMix {
    DevRead,
    DevWrite,
}

/// Device-side CXL.cache data bandwidth. Reads: four data headers share a
/// slot, so 68B spends one slot per four lines; 256B/LO leave 14 or 13
/// slots for data. Writes: two request slots plus a quarter-slot data
/// header per line (two slots in 68B).
pub fn cache_bandwidth(cfg: &LinkConfig, mix: CacheMix) -> f64 {
    let raw = cfg.raw_gbs();
    match (cfg.flit, mix) {
        (FlitMode::F68, m) => {
            let bypass = LinkConfig { sync_hdr_bypass: true, ..*cfg };
            let eff = to_f64(link_efficiency(&bypass, LinkProtocol::CacheMem));
            let frac = if m == CacheMix::DevRead { 16.0 / 17.0 } else { 4.0 / 6.0 };
            frac * eff * raw
        }
        (FlitMode::F256, CacheMix::DevRead) => 14.0 / 16.0 * raw,
        (FlitMode::F128Lo, CacheMix::DevRead) => 13.0 / 16.0 * raw,
        (_, CacheMix::DevWrite) => 4.0 / 6.5 * to_f64(link_efficiency(cfg, LinkProtocol::CacheMem)) * raw,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IoMix {
    Read,
    Write,
    ReadWrite,
}

impl FromStr for IoMix {
    type Err = PerfError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().trim_start_matches("io_") {
            "read" => Ok(IoMix::Read),
            "write" => Ok(IoMix::Write),
            "rw5050" | "rw" | "50-50" => Ok(IoMix::ReadWrite),
            _ => Err(PerfError::Domain(format!("unknown io mix {s}"))),
        }
    }
}

/// Per-TLP overhead in DW as (completion, request). 68B flits add one DW
/// of framing and LCRC per TLP.
pub fn io_overhead_dw(mode: FlitMode) -> (u32, u32) {
    match mode {
        FlitMode::F68 => (5, 6),
        _ => (3, 4),
    }
}

/// CXL.io data bandwidth. Reads stream completions outbound, writes stream
/// requests inbound; 50-50 counts both directions and is limited by the
/// inbound side, which carries the writes plus the read requests.
pub fn io_bandwidth(cfg: &LinkConfig, mix: IoMix, payload_dw: u32) -> Result<f64, PerfError> {
    if payload_dw == 0 {
        return Err(PerfError::Domain("payload must be at least 1 DW".into()));
    }
    let eff_cfg = LinkConfig { sync_hdr_bypass: true, ..*cfg };
    let base = to_f64(link_efficiency(&eff_cfg, LinkProtocol::Io)) * cfg.raw_gbs();
    let (cpl, req) = io_overhead_dw(cfg.flit);
    let d = f64::from(payload_dw);
    let (cpl, req) = (f64::from(cpl), f64::from(req));
    Ok(match mix {
        IoMix::Read => base * d / (d + cpl),
        IoMix::Write => base * d / (d + req),
        IoMix::ReadWrite => base * 2.0 * d / (d + 2.0 * req),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round(x: f64, places: i32) -> f64 {
        let s = 10f64.powi(places);
        (x * s).round() / s
    }

    #[test]
    fn efficiency_constants() {
        let mut c = LinkConfig::x16_32(FlitMode::F68);
        c.sync_hdr_bypass = false;
        assert_eq!(round(to_f64(link_efficiency(&c, LinkProtocol::CacheMem)), 3), 0.924);
        assert_eq!(round(to_f64(link_efficiency(&c, LinkProtocol::Io)), 3), 0.906);
        c.sync_hdr_bypass = true;
        assert_eq!(round(to_f64(link_efficiency(&c, LinkProtocol::CacheMem)), 3), 0.939);
        assert_eq!(round(to_f64(link_efficiency(&c, LinkProtocol::Io)), 2), 0.92);
        let c = LinkConfig::x16_32(FlitMode::F256);
        assert_eq!(link_efficiency(&c, LinkProtocol::CacheMem), q(15, 16));
    }

    #[test]
    fn read_only_68b() {
        let (m2s, s2m) = mem_bandwidth(&LinkConfig::x16_32(FlitMode::F68), MemMix::R1W0, DeviceType::Type3);
        assert_eq!(m2s, 0.0);
        assert!((s2m - 53.5).abs() < 0.2, "{s2m}");
    }

    #[test]
    fn cache_closed_forms() {
        let c68 = LinkConfig::x16_32(FlitMode::F68);
        let c256 = LinkConfig::new(16, 64, FlitMode::F256).unwrap();
        let clo = LinkConfig::new(16, 64, FlitMode::F128Lo).unwrap();
        assert!((cache_bandwidth(&c68, CacheMix::DevRead) - 56.6).abs() < 0.1);
        assert!((cache_bandwidth(&c68, CacheMix::DevWrite) - 40.1).abs() < 0.1);
        assert_eq!(cache_bandwidth(&c256, CacheMix::DevRead), 112.0);
        assert_eq!(cache_bandwidth(&clo, CacheMix::DevRead), 104.0);
        assert!((cache_bandwidth(&c256, CacheMix::DevWrite) - 73.8).abs() < 0.1);
    }

    #[test]
    fn io_large_payload_approaches_link_efficiency() {
        let c = LinkConfig::x16_32(FlitMode::F68);
        let lim = to_f64(link_efficiency(&c, LinkProtocol::Io)) * 64.0;
        let bw = io_bandwidth(&c, IoMix::Read, 1 << 20).unwrap();
        assert!((bw - lim).abs() < 0.01);
        assert!(io_bandwidth(&c, IoMix::Read, 0).is_err());
    }

    #[test]
    fn bad_link_rejected() {
        assert_eq!(LinkConfig::new(3, 32, FlitMode::F68), Err(PerfError::Lanes(3)));
    }
}
