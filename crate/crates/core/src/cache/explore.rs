//! Exhaustive interleaving exploration of a small host + devices system on
//! one cache line, checking the coherence monitors after every step.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use super::monitor::{check_snoop_filter, check_swmr};
use super::{CacheMsg, CoherenceMonitor, D2hLink, DeviceCache, H2dLink, HomeAgent, Violation};
use crate::protocol::D2hReqOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Issue { dev: u8, op: D2hReqOp },
    /// Local store by an owning device.
    Store { dev: u8 },
    /// Host-initiated SnpInv to every holder.
    HostSnpInv,
    DeliverH2d { dev: u8, pos: usize },
    DeliverD2h { dev: u8, pos: usize },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Issue { dev, op } => write!(f, "dev{dev} issues {op:?}"),
            Action::Store { dev } => write!(f, "dev{dev} stores"),
            Action::HostSnpInv => f.write_str("host sends SnpInv"),
            Action::DeliverH2d { dev, pos } => write!(f, "deliver H2D[{pos}] to dev{dev}"),
            Action::DeliverD2h { dev, pos } => write!(f, "deliver D2H[{pos}] from dev{dev}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExploreConfig {
    pub devices: usize,
    pub depth: usize,
    /// Snoops may not pass an earlier GO to the same line.
    pub push_rule: bool,
    pub alphabet: Vec<D2hReqOp>,
    pub host_snoops: bool,
    pub stores: bool,
    /// Stop once this many distinct states are known.
    pub max_states: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            devices: 2,
            depth: 8,
            push_rule: true,
            alphabet: vec![D2hReqOp::RdShared, D2hReqOp::RdOwn, D2hReqOp::DirtyEvict],
            host_snoops: true,
            stores: true,
            max_states: usize::MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheWorld {
    pub devices: Vec<DeviceCache>,
    pub host: HomeAgent,
    pub h2d: Vec<H2dLink>,
    pub d2h: Vec<D2hLink>,
    pub monitor: CoherenceMonitor,
    pub line: u64,
}

impl CacheWorld {
    pub fn new(devices: usize) -> Self {
        CacheWorld {
            devices: (0..devices as u8).map(DeviceCache::new).collect(),
            host: HomeAgent::new(None),
            h2d: vec![H2dLink::default(); devices],
            d2h: vec![D2hLink::default(); devices],
            monitor: CoherenceMonitor::default(),
            line: 0,
        }
    }

    pub fn actions(&self, cfg: &ExploreConfig) -> Vec<Action> {
        let mut v = Vec::new();
        for d in &self.devices {
            for op in &cfg.alphabet {
                if d.can_issue(*op, self.line) {
                    v.push(Action::Issue { dev: d.id, op: *op });
                }
            }
            if cfg.stores && d.can_store(self.line) {
                v.push(Action::Store { dev: d.id });
            }
        }
        if cfg.host_snoops && !self.host.is_busy(self.line) && self.host.sf.contains(self.line) {
            v.push(Action::HostSnpInv);
        }
        for (i, l) in self.h2d.iter().enumerate() {
            for pos in l.deliverable(cfg.push_rule) {
                v.push(Action::DeliverH2d { dev: i as u8, pos });
            }
        }
        for (i, l) in self.d2h.iter().enumerate() {
            for pos in l.deliverable() {
                v.push(Action::DeliverD2h { dev: i as u8, pos });
            }
        }
        v
    }

    fn route(&mut self, msgs: Vec<CacheMsg>) {
        for m in msgs {
            self.h2d[m.dev() as usize].send(m);
        }
    }

    /// Applies one action, returning the successor and any violations.
    pub fn step(&self, a: Action, cfg: &ExploreConfig) -> (CacheWorld, Vec<Violation>) {
        let mut w = self.clone();
        let mut bad = Vec::new();
        let line = w.line;
        match a {
            Action::Issue { dev, op } => match w.devices[dev as usize].issue(op, line) {
                Ok(m) => w.d2h[dev as usize].send(m),
                Err(e) => bad.push(Violation::Unexpected { dev, what: e.to_string() }),
            },
            Action::Store { dev } => {
                let v = w.monitor.latest(line) + 1;
                if w.devices[dev as usize].store(line, v).is_ok() {
                    w.monitor.on_write(line, v);
                }
            }
            Action::HostSnpInv => {
                if let Some(out) = w.host.invalidate(line) {
                    w.route(out.msgs);
                }
            }
            Action::DeliverH2d { dev, pos } => {
                let link = &mut w.h2d[dev as usize];
                if cfg.push_rule && link.passes_go(pos) {
                    bad.push(Violation::GoPush { dev, line });
                }
                let m = link.take(pos);
                match w.devices[dev as usize].receive(&m) {
                    Ok(r) => {
                        if let Some(v) = r.read_value {
                            bad.extend(w.monitor.on_read(dev, m.line(), v));
                        }
                        for o in r.out {
                            w.d2h[dev as usize].send(o);
                        }
                    }
                    Err(e) => bad.push(Violation::Unexpected { dev, what: e.to_string() }),
                }
            }
            Action::DeliverD2h { dev, pos } => {
                let m = w.d2h[dev as usize].take(pos);
                let out = w.host.handle(&m);
                for (l, v) in out.writes {
                    w.monitor.on_write(l, v);
                }
                w.route(out.msgs);
            }
        }
        bad.extend(check_swmr(&w.devices, line));
        bad.extend(check_snoop_filter(&w.devices, &w.host));
        (w, bad)
    }

    pub fn is_quiescent(&self) -> bool {
        self.h2d.iter().all(H2dLink::is_empty)
            && self.d2h.iter().all(D2hLink::is_empty)
            && self.host.is_quiet()
            && self.devices.iter().all(DeviceCache::is_quiet)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub violation: Violation,
    pub trace: Vec<Action>,
}

#[derive(Clone, Debug, Default)]
pub struct ExploreReport {
    pub states: usize,
    pub transitions: usize,
    pub violations: Vec<Witness>,
    /// The state budget ran out before the depth bound was reached.
    pub truncated: bool,
}

/// Breadth-first search over distinct states up to `cfg.depth` steps.
/// States with a violation are recorded with a shortest trace and not
/// expanded further.
pub fn explore(cfg: &ExploreConfig) -> ExploreReport {
    let (report, _) = bfs(cfg);
    report
}

/// Every state reachable within `cfg.depth` steps, breadth first.
pub fn reachable_bfs(cfg: &ExploreConfig) -> HashSet<CacheWorld> {
    bfs(cfg).1.into_iter().collect()
}

fn bfs(cfg: &ExploreConfig) -> (ExploreReport, Vec<CacheWorld>) {
    let root = CacheWorld::new(cfg.devices);
    let mut nodes: Vec<(CacheWorld, Option<(usize, Action)>)> = vec![(root.clone(), None)];
    let mut index: HashMap<CacheWorld, usize> = HashMap::from([(root, 0)]);
    let mut frontier: VecDeque<(usize, usize)> = VecDeque::from([(0, 0)]);
    let mut report = ExploreReport::default();
    let mut seen_violation: HashSet<Violation> = HashSet::new();
    while let Some((i, depth)) = frontier.pop_front() {
        if depth == cfg.depth {
            continue;
        }
        if nodes.len() >= cfg.max_states {
            report.truncated = true;
            break;
        }
        let state = nodes[i].0.clone();
        for a in state.actions(cfg) {
            report.transitions += 1;
            let (next, bad) = state.step(a, cfg);
            if index.contains_key(&next) {
                continue;
            }
            let j = nodes.len();
            index.insert(next.clone(), j);
            nodes.push((next, Some((i, a))));
            if bad.is_empty() {
                frontier.push_back((j, depth + 1));
                continue;
            }
            for v in bad {
                if seen_violation.insert(v.clone()) {
                    report.violations.push(Witness {
                        violation: v,
                        trace: trace_to(&nodes, j),
                    });
                }
            }
        }
    }
    report.states = nodes.len();
    (report, nodes.into_iter().map(|n| n.0).collect())
}

fn trace_to(nodes: &[(CacheWorld, Option<(usize, Action)>)], mut j: usize) -> Vec<Action> {
    let mut t = Vec::new();
    while let Some((p, a)) = nodes[j].1 {
        t.push(a);
        j = p;
    }
    t.reverse();
    t
}

/// Independent depth-first enumeration of the same reachable set: every
/// action sequence up to `cfg.depth`, pruned only when a state is met again
/// at an equal or greater depth.
pub fn reachable_dfs(cfg: &ExploreConfig) -> HashSet<CacheWorld> {
    fn go(w: &CacheWorld, depth: usize, cfg: &ExploreConfig, best: &mut HashMap<CacheWorld, usize>) {
        if depth == cfg.depth {
            return;
        }
        for a in w.actions(cfg) {
            let (next, bad) = w.step(a, cfg);
            match best.get(&next) {
                Some(d) if *d <= depth + 1 => continue,
                _ => {
                    best.insert(next.clone(), depth + 1);
                }
            }
            if bad.is_empty() {
                go(&next, depth + 1, cfg, best);
            }
        }
    }
    let root = CacheWorld::new(cfg.devices);
    let mut best = HashMap::from([(root.clone(), 0)]);
    go(&root, 0, cfg, &mut best);
    best.into_keys().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shallow_exploration_is_clean() {
        let cfg = ExploreConfig {
            depth: 6,
            ..Default::default()
        };
        let r = explore(&cfg);
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r.states > 100);
    }

    #[test]
    fn bfs_and_dfs_agree_when_shallow() {
        let cfg = ExploreConfig {
            depth: 5,
            ..Default::default()
        };
        assert_eq!(reachable_bfs(&cfg), reachable_dfs(&cfg));
    }

    #[test]
    fn peer_read_of_exclusive_line_ends_shared() {
        let cfg = ExploreConfig::default();
        let mut w = CacheWorld::new(2);
        let script = [
            Action::Issue { dev: 0, op: D2hReqOp::RdOwn },
            Action::DeliverD2h { dev: 0, pos: 0 },
            Action::DeliverH2d { dev: 0, pos: 0 },
            Action::DeliverH2d { dev: 0, pos: 0 },
            Action::Issue { dev: 1, op: D2hReqOp::RdShared },
            Action::DeliverD2h { dev: 1, pos: 0 },
            Action::DeliverH2d { dev: 0, pos: 0 },
            Action::DeliverD2h { dev: 0, pos: 0 },
            Action::DeliverH2d { dev: 1, pos: 0 },
            Action::DeliverH2d { dev: 1, pos: 0 },
        ];
        for a in script {
            let (n, bad) = w.step(a, &cfg);
            assert!(bad.is_empty(), "{a}: {bad:?}");
            w = n;
        }
        assert_eq!(w.devices[0].state(0), crate::protocol::Mesi::S);
        assert_eq!(w.devices[1].state(0), crate::protocol::Mesi::S);
        assert!(w.is_quiescent());
    }
}
