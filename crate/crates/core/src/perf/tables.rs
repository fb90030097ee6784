//! Tabulated model output as aligned text or CSV.

use std::fmt::Write as _;

use super::latency::{end_to_end_adder, latency_estimate, LatencyPath};
use super::{
    cache_bandwidth, io_bandwidth, mem_bandwidth, uio_bi_tradeoff, CacheMix, ClockMode, IoMix, LinkConfig, MemMix,
    UioBiMix, UioBiParams,
};
use crate::flit::FlitMode;
use crate::mem::DeviceType;

pub const IO_PAYLOADS: [u32; 6] = [1, 4, 16, 64, 256, 1024];
pub const UIO_BI_PAYLOADS: [u32; 8] = [1, 4, 8, 16, 24, 32, 64, 128];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let n = self.header.len();
        let mut w = vec![0; n];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (i, c) in r.iter().enumerate() {
                w[i] = w[i].max(c.len());
            }
        }
        let mut s = String::new();
        for r in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = r.iter().enumerate().map(|(i, c)| format!("{c:>width$}", width = w[i])).collect();
            let _ = writeln!(s, "{}", cells.join("  ").trim_end());
        }
        s
    }
}

fn f1(x: f64) -> String {
    format!("{x:.1}")
}

fn f2(x: f64) -> String {
    format!("{x:.2}")
}

pub fn io_bw_table(mode: FlitMode) -> Table {
    let cfg = LinkConfig::x16_32(mode);
    let mut t = Table::new(&["payload_dw", "read", "write", "rw5050"]);
    for d in IO_PAYLOADS {
        let mut row = vec![d.to_string()];
        for mix in [IoMix::Read, IoMix::Write, IoMix::ReadWrite] {
            row.push(f1(io_bandwidth(&cfg, mix, d).expect("payload is nonzero")));
        }
        t.rows.push(row);
    }
    t
}

pub fn mem_bw_table(mode: FlitMode) -> Table {
    let cfg = LinkConfig::x16_32(mode);
    let mut t = Table::new(&["mix", "t3_m2s", "t3_s2m", "t2_m2s", "t2_s2m"]);
    for mix in MemMix::ALL {
        let (a, b) = mem_bandwidth(&cfg, mix, DeviceType::Type3);
        let (c, d) = mem_bandwidth(&cfg, mix, DeviceType::Type2);
        t.rows.push(vec![mix.to_string(), f1(a), f1(b), f1(c), f1(d)]);
    }
    t
}

/// 68B at x16/32 GT/s; 256B and LO at x16/64 GT/s.
pub fn cache_bw_table(mode: FlitMode) -> Table {
    let rate = if mode == FlitMode::F68 { 32 } else { 64 };
    let cfg = LinkConfig::new(16, rate, mode).expect("x16 is valid");
    let mut t = Table::new(&["mix", "gbs"]);
    t.rows.push(vec!["device_read".into(), f1(cache_bandwidth(&cfg, CacheMix::DevRead))]);
    t.rows.push(vec!["device_write".into(), f1(cache_bandwidth(&cfg, CacheMix::DevWrite))]);
    t
}

pub fn latency_table() -> Table {
    let mut t = Table::new(&["path", "ns"]);
    for p in LatencyPath::canned() {
        t.rows.push(vec![p.label.clone(), format!("{}", latency_estimate(&p))]);
    }
    t.rows.push(vec!["end-to-end link adder".into(), format!("{}", end_to_end_adder(ClockMode::Common))]);
    t
}

/// Ratios for a = b = c = 2 at x = 0.1 and x = 1.0.
pub fn uio_bi_table() -> Table {
    let mut h = vec!["mix".to_string(), "x".to_string()];
    h.extend(UIO_BI_PAYLOADS.iter().map(|d| format!("d{d}")));
    let mut t = Table { header: h, rows: Vec::new() };
    for x in [0.1, 1.0] {
        for (name, mix) in [("read", UioBiMix::Read), ("write", UioBiMix::Write)] {
            let mut row = vec![name.to_string(), format!("{x}")];
            for d in UIO_BI_PAYLOADS {
                let p = UioBiParams { a: 2, b: 2, c: 2, d, x };
                row.push(f2(uio_bi_tradeoff(&p, mix).expect("parameters are in range")));
            }
            t.rows.push(row);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_text_agree_on_shape() {
        let t = mem_bw_table(FlitMode::F68);
        assert_eq!(t.to_csv().lines().count(), 4);
        assert_eq!(t.to_text().lines().count(), 4);
        assert!(t.to_csv().starts_with("mix,t3_m2s"));
    }
}
