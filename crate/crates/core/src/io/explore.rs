//! Exhaustive interleavings of small CXL.io programs.
//!
//! Each agent sends its TLPs to one memory over `paths` independent FIFO
//! paths. Within a path a TLP may overtake an earlier one unless the
//! ordering table says it must not. Completions return in any order.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::trace::{check_producer_consumer, check_sync_patterns, TraceEvent};
use super::{may_pass, IoOp, IoTlp, OrderingMode, OrderingVerdict};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IoStep {
    /// `wait` holds the step until every earlier step of the agent has
    /// completed (a source fence or a control dependency).
    Write { loc: String, value: u64, wait: bool },
    Read { loc: String, wait: bool },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IoScript {
    pub agents: Vec<(String, Vec<IoStep>)>,
    pub init: Vec<(String, u64)>,
    pub mode: OrderingMode,
    pub paths: usize,
}

fn w(loc: &str, value: u64, wait: bool) -> IoStep {
    IoStep::Write { loc: loc.into(), value, wait }
}

fn r(loc: &str, wait: bool) -> IoStep {
    IoStep::Read { loc: loc.into(), wait }
}

impl IoScript {
    /// Producer X writes `n_data` data lines then the flag; consumer Y reads
    /// the flag, then (after it returns) the data.
    pub fn producer_consumer(n_data: usize, fence: bool, mode: OrderingMode, paths: usize) -> Self {
        let mut x: Vec<IoStep> = (0..n_data).map(|i| w(&format!("Data{i}"), 1, false)).collect();
        x.push(w("Flag", 1, fence));
        let mut y = vec![r("Flag", false)];
        y.extend((0..n_data).map(|i| r(&format!("Data{i}"), true)));
        let mut init: Vec<(String, u64)> = (0..n_data).map(|i| (format!("Data{i}"), 0)).collect();
        init.push(("Flag".into(), 0));
        IoScript { agents: vec![("X".into(), x), ("Y".into(), y)], init, mode, paths }
    }

    /// Two devices each announce completion, then check the other.
    pub fn sync_write_then_read(mode: OrderingMode) -> Self {
        IoScript {
            agents: vec![
                ("X".into(), vec![w("A", 1, false), r("B", false)]),
                ("Y".into(), vec![w("B", 1, false), r("A", false)]),
            ],
            init: vec![("A".into(), 0), ("B".into(), 0)],
            mode,
            paths: 1,
        }
    }

    /// Two devices each check the other, then announce.
    pub fn sync_read_then_write(mode: OrderingMode) -> Self {
        IoScript {
            agents: vec![
                ("X".into(), vec![r("B", false), w("A", 1, false)]),
                ("Y".into(), vec![r("A", false), w("B", 1, false)]),
            ],
            init: vec![("A".into(), 0), ("B".into(), 0)],
            mode,
            paths: 1,
        }
    }

    fn tlp(&self, step: &IoStep) -> IoTlp {
        let uio = self.mode == OrderingMode::Uio;
        IoTlp::new(match (step, uio) {
            (IoStep::Write { .. }, false) => IoOp::MemWr,
            (IoStep::Write { .. }, true) => IoOp::UioWr,
            (IoStep::Read { .. }, false) => IoOp::MemRd,
            (IoStep::Read { .. }, true) => IoOp::UioRd,
        })
    }

    /// Whether a write needs a completion before it counts as done.
    fn write_completes(&self) -> bool {
        self.mode == OrderingMode::Uio
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct World {
    pc: Vec<usize>,
    outstanding: Vec<usize>,
    /// queues[agent][path] of step indices
    queues: Vec<Vec<Vec<usize>>>,
    cpls: BTreeSet<(usize, usize)>,
    mem: BTreeMap<String, u64>,
    trace: Vec<TraceEvent>,
    events: usize,
}

#[derive(Clone, Debug, Default)]
pub struct IoExploreReport {
    /// Complete executions reached (distinct final traces).
    pub executions: usize,
    /// Read results per execution, keyed (agent, step) in agent order.
    pub outcomes: BTreeSet<Vec<u64>>,
    /// Executions with a producer-consumer violation.
    pub pc_violations: usize,
    /// Executions whose synchronization outcome is forbidden.
    pub sync_forbidden: usize,
    /// Largest number of TLPs (requests plus completions) in one execution.
    pub max_events: usize,
    pub witness: Option<Vec<TraceEvent>>,
}

pub fn explore_io(s: &IoScript) -> IoExploreReport {
    let n = s.agents.len();
    let mut init = World {
        pc: vec![0; n],
        outstanding: vec![0; n],
        queues: vec![vec![Vec::new(); s.paths.max(1)]; n],
        cpls: BTreeSet::new(),
        mem: s.init.iter().cloned().collect(),
        trace: s.init.iter().map(|(loc, value)| TraceEvent::Init { loc: loc.clone(), value: *value }).collect(),
        events: 0,
    };
    init.mem.extend(s.init.iter().cloned());
    let mut report = IoExploreReport::default();
    let mut seen = HashSet::new();
    let mut done = HashSet::new();
    dfs(s, init, &mut seen, &mut done, &mut report);
    report
}

fn dfs(s: &IoScript, wld: World, seen: &mut HashSet<World>, done: &mut HashSet<Vec<TraceEvent>>, rep: &mut IoExploreReport) {
    if !seen.insert(wld.clone()) {
        return;
    }
    let mut moved = false;
    for a in 0..s.agents.len() {
        let steps = &s.agents[a].1;
        // issue the next step on each path
        if let Some(step) = steps.get(wld.pc[a]) {
            let wait = match step {
                IoStep::Write { wait, .. } | IoStep::Read { wait, .. } => *wait,
            };
            let queued: usize = wld.queues[a].iter().map(Vec::len).sum();
            if !wait || (wld.outstanding[a] == 0 && queued == 0) {
                for p in 0..wld.queues[a].len() {
                    let mut n = wld.clone();
                    n.queues[a][p].push(n.pc[a]);
                    n.pc[a] += 1;
                    n.events += 1;
                    if matches!(step, IoStep::Read { .. }) || s.write_completes() {
                        n.outstanding[a] += 1;
                    }
                    moved = true;
                    dfs(s, n, seen, done, rep);
                }
            }
        }
        // deliver a queued TLP at memory
        for p in 0..wld.queues[a].len() {
            let q = &wld.queues[a][p];
            for i in 0..q.len() {
                let second = s.tlp(&steps[q[i]]);
                let blocked = q[..i]
                    .iter()
                    .any(|j| may_pass(&s.tlp(&steps[*j]), &second, s.mode) == OrderingVerdict::MustNotPass);
                if blocked {
                    continue;
                }
                let mut n = wld.clone();
                let idx = n.queues[a][p].remove(i);
                let agent = s.agents[a].0.clone();
                let seq = idx as u32;
                match &steps[idx] {
                    IoStep::Write { loc, value, .. } => {
                        n.mem.insert(loc.clone(), *value);
                        n.trace.push(TraceEvent::Write { agent, seq, loc: loc.clone(), value: *value });
                        if s.write_completes() {
                            n.cpls.insert((a, idx));
                        }
                    }
                    IoStep::Read { loc, .. } => {
                        let value = n.mem.get(loc).copied().unwrap_or(0);
                        n.trace.push(TraceEvent::Read { agent, seq, loc: loc.clone(), value });
                        n.cpls.insert((a, idx));
                    }
                }
                moved = true;
                dfs(s, n, seen, done, rep);
            }
        }
    }
    for c in &wld.cpls {
        let mut n = wld.clone();
        n.cpls.remove(c);
        n.outstanding[c.0] -= 1;
        n.events += 1;
        moved = true;
        dfs(s, n, seen, done, rep);
    }
    if moved || !done.insert(wld.trace.clone()) {
        return;
    }
    finish(s, &wld, rep);
}

fn finish(s: &IoScript, wld: &World, rep: &mut IoExploreReport) {
    rep.executions += 1;
    rep.max_events = rep.max_events.max(wld.events);
    let mut reads: Vec<(usize, usize, u64)> = Vec::new();
    for ev in &wld.trace {
        if let TraceEvent::Read { agent, seq, value, .. } = ev {
            let a = s.agents.iter().position(|(n, _)| n == agent).unwrap_or(0);
            reads.push((a, *seq as usize, *value));
        }
    }
    reads.sort();
    rep.outcomes.insert(reads.iter().map(|r| r.2).collect());
    if check_producer_consumer(&wld.trace).is_ok_and(|v| !v.is_empty()) {
        rep.pc_violations += 1;
        rep.witness.get_or_insert_with(|| wld.trace.clone());
    }
    if check_sync_patterns(&wld.trace).is_ok_and(|r| !r.acceptable) {
        rep.sync_forbidden += 1;
        rep.witness.get_or_insert_with(|| wld.trace.clone());
    }
}
