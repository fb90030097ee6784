//! Deterministic discrete-event simulation.
//!
//! Time is integer picoseconds and ties break on insertion order, so equal
//! inputs and seed give byte-identical traces.

pub mod engine;
pub mod scenario;
pub mod workload;

use std::fmt;

use thiserror::Error;

pub use engine::{flit_time_ps, run, EventQueue, Ps, SimResult};
pub use workload::{parse_workloads, Stats, WorkloadSpec};

use crate::cache::explore::{explore, ExploreConfig, ExploreReport};
use crate::fabric::FabricError;
use crate::flit::FlitMode;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("deadlock at {at_ps} ps with {outstanding} requests outstanding")]
    Deadlock { at_ps: Ps, outstanding: usize },
    #[error("monitor {monitor} tripped at {at_ps} ps: {detail}")]
    MonitorViolation { monitor: String, at_ps: Ps, detail: String, prefix: Vec<String> },
    #[error("exploration stopped after {0} states")]
    StateSpaceBudgetExceeded(usize),
    #[error("bad workload: {0}")]
    BadWorkload(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub flit: FlitMode,
    pub seed: u64,
    pub horizon_ps: Option<Ps>,
    /// Receiver buffer credits per channel on every link direction.
    pub credits: u32,
    /// One-way flight per link, plus `retimer_ps` on retimed links.
    pub flight_ps: Ps,
    pub retimer_ps: Ps,
    pub switch_ps: Ps,
    /// Fixed device access latency.
    pub device_ps: Ps,
    /// Single-server service time per request; replaces `device_ps` and
    /// turns on DevLoad reporting.
    pub service_ps: Option<Ps>,
    /// Queue depth the device treats as optimal load.
    pub devload_target: usize,
    /// Devices that stop responding at the given time.
    pub failures: Vec<(String, Ps)>,
    /// How long an edge port waits on a dead device before answering for it.
    pub containment_timeout_ps: Option<Ps>,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            flit: FlitMode::F68,
            seed: 0,
            horizon_ps: None,
            credits: 16,
            flight_ps: 5_000,
            retimer_ps: 5_000,
            switch_ps: 10_000,
            device_ps: 40_000,
            service_ps: None,
            devload_target: 8,
            failures: Vec::new(),
            containment_timeout_ps: Some(1_000_000),
            trace: false,
        }
    }
}

/// One observable step of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimRecord {
    pub t_ps: Ps,
    pub node: String,
    pub text: String,
}

impl fmt::Display for SimRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.t_ps, self.node, self.text)
    }
}

/// Invariant checker fed every record; an `Err` aborts the run.
pub trait Monitor {
    fn name(&self) -> &str;
    fn observe(&mut self, rec: &SimRecord) -> Result<(), String>;
}

/// Coherence exploration with a cap on distinct states.
pub fn explore_bounded(cfg: &ExploreConfig, max_states: usize) -> Result<ExploreReport, SimError> {
    let cfg = ExploreConfig { max_states, ..cfg.clone() };
    let r = explore(&cfg);
    if r.truncated {
        return Err(SimError::StateSpaceBudgetExceeded(max_states));
    }
    Ok(r)
}
