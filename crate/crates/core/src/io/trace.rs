//! Line-based memory traces and the checkers run over them.
//!
//! ```text
//! # comment
//! INIT Data 0
//! WR X 0 Data 1
//! RD Y 0 Flag 1
//! ```
//!
//! Events appear in the order they took effect at memory. The number
//! after the agent is its program-order sequence number. Every write to a
//! location stores a distinct value.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use super::IoError;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TraceEvent {
    Init { loc: String, value: u64 },
    Write { agent: String, seq: u32, loc: String, value: u64 },
    Read { agent: String, seq: u32, loc: String, value: u64 },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Init { loc, value } => write!(f, "INIT {loc} {value}"),
            TraceEvent::Write { agent, seq, loc, value } => write!(f, "WR {agent} {seq} {loc} {value}"),
            TraceEvent::Read { agent, seq, loc, value } => write!(f, "RD {agent} {seq} {loc} {value}"),
        }
    }
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceEvent>, IoError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || IoError::MalformedTrace(format!("line {}: {raw}", n + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad());
        let ev = match f.as_slice() {
            ["INIT", loc, v] => TraceEvent::Init { loc: loc.to_string(), value: num(v)? },
            ["WR", a, s, loc, v] => TraceEvent::Write {
                agent: a.to_string(),
                seq: s.parse().map_err(|_| bad())?,
                loc: loc.to_string(),
                value: num(v)?,
            },
            ["RD", a, s, loc, v] => TraceEvent::Read {
                agent: a.to_string(),
                seq: s.parse().map_err(|_| bad())?,
                loc: loc.to_string(),
                value: num(v)?,
            },
            // the checker command supplies the mode separately
            ["MODE", _] => continue,
            _ => return Err(bad()),
        };
        out.push(ev);
    }
    Ok(out)
}

/// Write order per location: value -> position (init is -1), plus the
/// writer of each value.
struct Order {
    pos: HashMap<(String, u64), i64>,
    writer: HashMap<(String, u64), (String, u32)>,
}

fn write_order(trace: &[TraceEvent]) -> Result<Order, IoError> {
    let mut pos = HashMap::new();
    let mut writer = HashMap::new();
    let mut count: HashMap<&str, i64> = HashMap::new();
    for ev in trace {
        match ev {
            TraceEvent::Init { loc, value } => {
                if pos.insert((loc.clone(), *value), -1).is_some() {
                    return Err(IoError::MalformedTrace(format!("{loc} initialised twice with {value}")));
                }
            }
            TraceEvent::Write { agent, seq, loc, value } => {
                let c = count.entry(loc).or_insert(0);
                if pos.insert((loc.clone(), *value), *c).is_some() {
                    return Err(IoError::MalformedTrace(format!("value {value} written twice to {loc}")));
                }
                writer.insert((loc.clone(), *value), (agent.clone(), *seq));
                *c += 1;
            }
            TraceEvent::Read { .. } => {}
        }
    }
    let inited: HashSet<&str> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Init { loc, .. } => Some(loc.as_str()),
            _ => None,
        })
        .collect();
    for ev in trace {
        if let TraceEvent::Read { loc, value, .. } = ev {
            let key = (loc.clone(), *value);
            if pos.contains_key(&key) {
                continue;
            }
            // without an INIT line the first value read is taken as initial
            if inited.contains(loc.as_str()) || pos.keys().any(|(l, v)| l == loc && *v != *value && pos[&(l.clone(), *v)] < 0) {
                return Err(IoError::MalformedTrace(format!("read of {loc}={value} matches no write")));
            }
            pos.insert(key, -1);
        }
    }
    Ok(Order { pos, writer })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PcViolation {
    pub consumer: String,
    pub flag: String,
    pub data: String,
    /// Value the consumer got for `data`.
    pub stale: u64,
}

/// Finds consumer reads that saw a producer's later write (flag) yet
/// missed one of its earlier writes (data) on a subsequent read.
pub fn check_producer_consumer(trace: &[TraceEvent]) -> Result<Vec<PcViolation>, IoError> {
    let order = write_order(trace)?;
    // writes per producer in program order
    let mut writes: BTreeMap<&str, Vec<(u32, &str, u64)>> = BTreeMap::new();
    let mut reads: BTreeMap<&str, Vec<(u32, &str, u64)>> = BTreeMap::new();
    for ev in trace {
        match ev {
            TraceEvent::Write { agent, seq, loc, value } => writes.entry(agent).or_default().push((*seq, loc, *value)),
            TraceEvent::Read { agent, seq, loc, value } => reads.entry(agent).or_default().push((*seq, loc, *value)),
            TraceEvent::Init { .. } => {}
        }
    }
    for v in writes.values_mut().chain(reads.values_mut()) {
        v.sort();
    }
    let mut out = Vec::new();
    for (consumer, rs) in &reads {
        for (i, (_, floc, fval)) in rs.iter().enumerate() {
            let Some((producer, fseq)) = order.writer.get(&(floc.to_string(), *fval)) else {
                continue;
            };
            for (wseq, dloc, dval) in writes.get(producer.as_str()).into_iter().flatten() {
                if wseq >= fseq || dloc == floc {
                    continue;
                }
                let need = order.pos[&(dloc.to_string(), *dval)];
                for (_, rloc, rval) in &rs[i + 1..] {
                    if rloc == dloc && order.pos[&(rloc.to_string(), *rval)] < need {
                        out.push(PcViolation {
                            consumer: consumer.to_string(),
                            flag: floc.to_string(),
                            data: dloc.to_string(),
                            stale: *rval,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyncPattern {
    /// Each device writes its own indicator, then reads the other's.
    WriteThenRead,
    /// Each device reads the other's indicator, then writes its own.
    ReadThenWrite,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyncReport {
    /// None when the trace is not a two-device synchronization script.
    pub pattern: Option<SyncPattern>,
    /// Whether each device's read saw the other's new value, in agent order.
    pub saw_new: [bool; 2],
    pub acceptable: bool,
}

/// Classifies a two-device synchronization trace. With write-then-read,
/// both devices seeing old values is the forbidden outcome; with
/// read-then-write every outcome is allowed.
pub fn check_sync_patterns(trace: &[TraceEvent]) -> Result<SyncReport, IoError> {
    let order = write_order(trace)?;
    let vacuous = SyncReport { pattern: None, saw_new: [false; 2], acceptable: true };
    let mut per: BTreeMap<&str, Vec<&TraceEvent>> = BTreeMap::new();
    for ev in trace {
        match ev {
            TraceEvent::Write { agent, .. } | TraceEvent::Read { agent, .. } => per.entry(agent).or_default().push(ev),
            TraceEvent::Init { .. } => {}
        }
    }
    if per.len() != 2 {
        return Ok(vacuous);
    }
    let mut shape = Vec::new();
    for evs in per.values() {
        let (mut w, mut r) = (None, None);
        for ev in evs {
            match ev {
                TraceEvent::Write { seq, loc, .. } if w.is_none() => w = Some((*seq, loc.as_str())),
                TraceEvent::Read { seq, loc, value, .. } if r.is_none() => r = Some((*seq, loc.as_str(), *value)),
                _ => return Ok(vacuous),
            }
        }
        let (Some(w), Some(r)) = (w, r) else { return Ok(vacuous) };
        shape.push((w, r));
    }
    let ((w0, r0), (w1, r1)) = (shape[0], shape[1]);
    if w0.1 != r1.1 || w1.1 != r0.1 || w0.1 == w1.1 {
        return Ok(vacuous);
    }
    let pattern = match (w0.0 < r0.0, w1.0 < r1.0) {
        (true, true) => SyncPattern::WriteThenRead,
        (false, false) => SyncPattern::ReadThenWrite,
        _ => return Ok(vacuous),
    };
    let fresh = |(_, loc, v): (u32, &str, u64)| order.pos[&(loc.to_string(), v)] >= 0;
    let saw_new = [fresh(r0), fresh(r1)];
    let acceptable = pattern == SyncPattern::ReadThenWrite || saw_new != [false, false];
    Ok(SyncReport { pattern: Some(pattern), saw_new, acceptable })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(flag: u64, data: u64) -> Vec<TraceEvent> {
        let text = format!(
            "INIT Data 0\nINIT Flag 0\nWR X 0 Data 1\nWR X 1 Flag 1\nRD Y 0 Flag {flag}\nRD Y 1 Data {data}\n"
        );
        parse_trace(&text).unwrap()
    }

    #[test]
    fn producer_consumer_outcomes() {
        assert!(check_producer_consumer(&pc(0, 0)).unwrap().is_empty());
        assert!(check_producer_consumer(&pc(0, 1)).unwrap().is_empty());
        assert!(check_producer_consumer(&pc(1, 1)).unwrap().is_empty());
        let v = check_producer_consumer(&pc(1, 0)).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].data, "Data");
    }

    #[test]
    fn empty_trace_is_clean() {
        assert!(check_producer_consumer(&[]).unwrap().is_empty());
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(parse_trace("WR X Data 1").is_err());
        let t = parse_trace("INIT Flag 0\nRD Y 0 Flag 5").unwrap();
        assert!(check_producer_consumer(&t).is_err());
    }

    #[test]
    fn sync_classification() {
        let t = parse_trace("INIT A 0\nINIT B 0\nRD X 1 B 0\nRD Y 1 A 0\nWR X 0 A 1\nWR Y 0 B 1").unwrap();
        let r = check_sync_patterns(&t).unwrap();
        assert_eq!(r.pattern, Some(SyncPattern::WriteThenRead));
        assert!(!r.acceptable);
        let t = parse_trace("INIT A 0\nINIT B 0\nRD X 0 B 0\nRD Y 0 A 0\nWR X 1 A 1\nWR Y 1 B 1").unwrap();
        let r = check_sync_patterns(&t).unwrap();
        assert_eq!(r.pattern, Some(SyncPattern::ReadThenWrite));
        assert!(r.acceptable);
        let one = parse_trace("WR X 0 A 1\nRD X 1 B 0").unwrap();
        assert_eq!(check_sync_patterns(&one).unwrap().pattern, None);
    }
}
