//! Global coherence monitors: single-writer/multiple-reader, data value and
//! snoop-filter soundness.

use std::collections::BTreeMap;
use std::fmt;

use super::{DeviceCache, HomeAgent};
use crate::protocol::Mesi;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Violation {
    Swmr { line: u64, states: Vec<(u8, Mesi)> },
    StaleRead { dev: u8, line: u64, got: u64, expected: u64 },
    GoPush { dev: u8, line: u64 },
    SilentCaching { dev: u8, line: u64 },
    /// An agent rejected a message it should have been able to handle.
    Unexpected { dev: u8, what: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Swmr { line, states } => {
                write!(f, "SWMR violated on {line:#x}:")?;
                for (d, s) in states {
                    write!(f, " dev{d}={s}")?;
                }
                Ok(())
            }
            Violation::StaleRead { dev, line, got, expected } => {
                write!(f, "dev{dev} read {got} from {line:#x}, latest write is {expected}")
            }
            Violation::GoPush { dev, line } => write!(f, "snoop passed GO to dev{dev} on {line:#x}"),
            Violation::SilentCaching { dev, line } => {
                write!(f, "dev{dev} caches {line:#x} without a snoop-filter entry")
            }
            Violation::Unexpected { dev, what } => write!(f, "dev{dev}: {what}"),
        }
    }
}

/// Tracks the latest globally observed write per line.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CoherenceMonitor {
    latest: BTreeMap<u64, u64>,
}

impl CoherenceMonitor {
    pub fn latest(&self, line: u64) -> u64 {
        self.latest.get(&line).copied().unwrap_or(0)
    }

    pub fn on_write(&mut self, line: u64, value: u64) {
        self.latest.insert(line, value);
    }

    pub fn on_read(&self, dev: u8, line: u64, got: u64) -> Option<Violation> {
        let expected = self.latest(line);
        (got != expected).then_some(Violation::StaleRead { dev, line, got, expected })
    }
}

pub fn check_swmr(devices: &[DeviceCache], line: u64) -> Option<Violation> {
    let states: Vec<(u8, Mesi)> = devices
        .iter()
        .map(|d| (d.id, d.state(line)))
        .filter(|(_, s)| s.is_valid())
        .collect();
    let owners = states.iter().filter(|(_, s)| s.is_owner()).count();
    let bad = owners > 1 || (owners == 1 && states.len() > 1);
    bad.then_some(Violation::Swmr { line, states })
}

pub fn check_snoop_filter(devices: &[DeviceCache], host: &HomeAgent) -> Option<Violation> {
    devices.iter().find_map(|d| {
        d.lines()
            .find(|(line, l)| l.state.is_valid() && !host.sf.holds(*line, d.id))
            .map(|(line, _)| Violation::SilentCaching { dev: d.id, line })
    })
}
