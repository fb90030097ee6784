//! Workload descriptions and stats tables.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimError;
use crate::perf::MemMix;

/// Per-host request stream. Parsed from `key=value` lists such as
/// `host=h0,mix=MEM_2R1W,lines=10000,outstanding=256`.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSpec {
    pub host: String,
    pub mix: MemMix,
    /// Requests to issue; each moves one 64-byte line.
    pub lines: u64,
    pub outstanding: usize,
    /// Open-loop injection at this many requests per microsecond, throttled
    /// by DevLoad feedback and never raised above it.
    pub rate_per_us: Option<f64>,
    /// Starting rate as a multiple of `rate_per_us`.
    pub burst: f64,
    /// Only target this device, when set.
    pub device: Option<String>,
}

impl WorkloadSpec {
    pub fn new(host: &str, mix: MemMix, lines: u64) -> Self {
        WorkloadSpec { host: host.into(), mix, lines, outstanding: 256, rate_per_us: None, burst: 1.0, device: None }
    }

    /// Whether request `step` is a read. Mixes repeat reads then writes.
    pub fn is_read(&self, step: u64) -> bool {
        let (r, w) = (u64::from(self.mix.reads()), u64::from(self.mix.writes()));
        step % (r + w) < r
    }

    /// A pure function of (seed, step): which target and which line.
    pub fn pick(&self, seed: u64, step: u64, targets: usize) -> (usize, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ step.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        (rng.gen_range(0..targets.max(1)), rng.gen())
    }
}

impl FromStr for WorkloadSpec {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: &str| SimError::BadWorkload(format!("{m} in '{s}'"));
        let mut w = WorkloadSpec::new("", MemMix::R1W0, 10_000);
        for kv in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            match k {
                "host" => w.host = v.into(),
                "mix" => w.mix = v.parse().map_err(|_| bad("unknown mix"))?,
                "lines" => w.lines = v.parse().map_err(|_| bad("bad line count"))?,
                "outstanding" => w.outstanding = v.parse().map_err(|_| bad("bad outstanding"))?,
                "rate" => w.rate_per_us = Some(v.parse().map_err(|_| bad("bad rate"))?),
                "burst" => w.burst = v.parse().map_err(|_| bad("bad burst"))?,
                "device" => w.device = Some(v.into()),
                _ => return Err(bad("unknown key")),
            }
        }
        if w.host.is_empty() {
            return Err(bad("missing host"));
        }
        if w.outstanding == 0 {
            return Err(bad("outstanding must be positive"));
        }
        Ok(w)
    }
}

/// Parses `;`-separated workloads, or one per line with `#` comments.
pub fn parse_workloads(text: &str) -> Result<Vec<WorkloadSpec>, SimError> {
    text.split([';', '\n'])
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatRow {
    pub metric: String,
    pub scope: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Stats {
    pub rows: Vec<StatRow>,
}

impl Stats {
    pub fn push(&mut self, metric: &str, scope: &str, value: f64, unit: &str) {
        self.rows.push(StatRow { metric: metric.into(), scope: scope.into(), value, unit: unit.into() });
    }

    pub fn get(&self, metric: &str, scope: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.metric == metric && r.scope == scope).map(|r| r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,scope,value,unit\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.4},{}", r.metric, r.scope, r.value, r.unit);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_pattern() {
        let w: WorkloadSpec = "host=h0,mix=MEM_2R1W,lines=30,outstanding=8".parse().unwrap();
        assert_eq!((w.lines, w.outstanding), (30, 8));
        let pat: Vec<bool> = (0..6).map(|i| w.is_read(i)).collect();
        assert_eq!(pat, [true, true, false, true, true, false]);
        assert!("mix=MEM_1R0W".parse::<WorkloadSpec>().is_err());
        assert!("host=h0,speed=3".parse::<WorkloadSpec>().is_err());
        assert_eq!(parse_workloads("host=h0 # a\nhost=h1;host=h2").unwrap().len(), 3);
    }

    #[test]
    fn picks_are_pure() {
        let w = WorkloadSpec::new("h0", MemMix::R1W1, 1);
        assert_eq!(w.pick(7, 42, 3), w.pick(7, 42, 3));
        assert_ne!(w.pick(7, 42, 3).1, w.pick(8, 42, 3).1);
    }

    #[test]
    fn csv_layout() {
        let mut s = Stats::default();
        s.push("read_bw", "h0", 53.4, "GB/s");
        assert_eq!(s.to_csv(), "metric,scope,value,unit\nread_bw,h0,53.4000,GB/s\n");
        assert_eq!(s.get("read_bw", "h0"), Some(53.4));
    }
}
