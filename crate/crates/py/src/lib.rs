//! Python bindings: the performance model, fabric parsing and
//! simulation, trace checking and coherence exploration.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cxlsim_core::cache::explore::ExploreConfig;
use cxlsim_core::fabric;
use cxlsim_core::flit::gen::random_flit;
use cxlsim_core::flit::{decode_flit, encode_flit, FlitMode};
use cxlsim_core::io::{check_producer_consumer, check_sync_patterns, parse_trace, OrderingMode};
use cxlsim_core::mem::DeviceType;
use cxlsim_core::perf::{self, tables, IoMix, LinkConfig, MemMix};
use cxlsim_core::sim::{self, parse_workloads, SimConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn flit(s: &str) -> PyResult<FlitMode> {
    s.parse().map_err(value_err)
}

/// Payload bandwidth in GB/s of an x16 32 GT/s link carrying IO traffic.
#[pyfunction]
#[pyo3(signature = (flit_mode, mix, payload_dw))]
fn io_bandwidth(flit_mode: &str, mix: &str, payload_dw: u32) -> PyResult<f64> {
    let mix: IoMix = mix.parse().map_err(value_err)?;
    perf::io_bandwidth(&LinkConfig::x16_32(flit(flit_mode)?), mix, payload_dw).map_err(value_err)
}

/// (M2S, S2M) data bandwidth in GB/s for a memory mix.
#[pyfunction]
#[pyo3(signature = (flit_mode, mix, device_type = "3"))]
fn mem_bandwidth(flit_mode: &str, mix: &str, device_type: &str) -> PyResult<(f64, f64)> {
    let mix: MemMix = mix.parse().map_err(value_err)?;
    let dtype: DeviceType = device_type.parse().map_err(value_err)?;
    Ok(perf::mem_bandwidth(&LinkConfig::x16_32(flit(flit_mode)?), mix, dtype))
}

pub fn render_table(name: &str, flit_mode: FlitMode, csv: bool) -> Result<String, String> {
    let t = match name {
        "io-bw" => tables::io_bw_table(flit_mode),
        "mem-bw" => tables::mem_bw_table(flit_mode),
        "cache-bw" => tables::cache_bw_table(flit_mode),
        "latency" => tables::latency_table(),
        "uio-bi" => tables::uio_bi_table(),
        _ => return Err(format!("unknown table {name}")),
    };
    Ok(if csv { t.to_csv() } else { t.to_text() })
}

/// One of io-bw, mem-bw, cache-bw, latency, uio-bi as text or CSV.
#[pyfunction]
#[pyo3(signature = (name, flit_mode = "68", csv = false))]
fn table(name: &str, flit_mode: &str, csv: bool) -> PyResult<String> {
    render_table(name, flit(flit_mode)?, csv).map_err(value_err)
}

/// Violation messages for a trace; empty when the trace is clean.
pub fn trace_violations(text: &str, mode: OrderingMode) -> Result<Vec<String>, String> {
    let ev = parse_trace(text).map_err(|e| e.to_string())?;
    let mut out: Vec<String> = check_producer_consumer(&ev)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|v| format!("{} saw the new {} but then read stale {}={}", v.consumer, v.flag, v.data, v.stale))
        .collect();
    let sync = check_sync_patterns(&ev).map_err(|e| e.to_string())?;
    if !sync.acceptable && mode == OrderingMode::Legacy {
        out.push("both agents read old values".into());
    }
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (text, mode = "legacy"))]
fn check_trace(text: &str, mode: &str) -> PyResult<Vec<String>> {
    let mode: OrderingMode = mode.parse().map_err(value_err)?;
    trace_violations(text, mode).map_err(value_err)
}

/// Returns (states, witnesses) with each witness rendered as lines.
#[pyfunction]
#[pyo3(signature = (devices = 2, depth = 8, push_rule = true, max_states = 1_000_000))]
fn explore(devices: usize, depth: usize, push_rule: bool, max_states: usize) -> PyResult<(usize, Vec<Vec<String>>)> {
    let cfg = ExploreConfig { devices, depth, push_rule, ..ExploreConfig::default() };
    let r = sim::explore_bounded(&cfg, max_states).map_err(value_err)?;
    let wit = r
        .violations
        .iter()
        .map(|w| std::iter::once(w.violation.to_string()).chain(w.trace.iter().map(|a| a.to_string())).collect())
        .collect();
    Ok((r.states, wit))
}

/// Encodes `count` random flits and returns how many decode unchanged.
#[pyfunction]
#[pyo3(signature = (flit_mode, seed = 0, count = 1000))]
fn flit_roundtrip(flit_mode: &str, seed: u64, count: usize) -> PyResult<usize> {
    let mode = flit(flit_mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for _ in 0..count {
        let f = random_flit(&mut rng, mode);
        let bytes = encode_flit(&f).map_err(value_err)?;
        if decode_flit(mode, &bytes).is_ok_and(|g| g == f) {
            ok += 1;
        }
    }
    Ok(ok)
}

#[pyclass(frozen)]
struct SimResult {
    #[pyo3(get)]
    trace: Vec<String>,
    stats: cxlsim_core::sim::Stats,
}

#[pymethods]
impl SimResult {
    fn get(&self, metric: &str, scope: &str) -> Option<f64> {
        self.stats.get(metric, scope)
    }

    /// {(metric, scope): value}
    fn stats(&self) -> BTreeMap<(String, String), f64> {
        self.stats.rows.iter().map(|r| ((r.metric.clone(), r.scope.clone()), r.value)).collect()
    }

    fn to_csv(&self) -> String {
        self.stats.to_csv()
    }
}

#[pyclass(name = "Fabric")]
struct PyFabric {
    inner: fabric::Fabric,
}

#[pymethods]
impl PyFabric {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyFabric { inner: fabric::Fabric::parse(text).map_err(value_err)? })
    }

    /// Routing and binding problems; empty when the fabric is sound.
    fn validate(&self) -> Vec<String> {
        self.inner.validate()
    }

    fn nodes(&self) -> Vec<String> {
        self.inner.topo.nodes.iter().map(|n| n.name.clone()).collect()
    }

    fn pid(&self, name: &str) -> PyResult<Option<u16>> {
        let i = self.inner.topo.node(name).map_err(value_err)?;
        Ok(self.inner.topo.nodes[i].pid)
    }

    #[pyo3(signature = (workload, seed = 0, flit_mode = "68", horizon_us = None, trace = false))]
    fn simulate(
        &self,
        py: Python<'_>,
        workload: &str,
        seed: u64,
        flit_mode: &str,
        horizon_us: Option<u64>,
        trace: bool,
    ) -> PyResult<SimResult> {
        let specs = parse_workloads(workload).map_err(value_err)?;
        let cfg = SimConfig {
            flit: flit(flit_mode)?,
            seed,
            horizon_ps: horizon_us.map(|us| us * 1_000_000),
            trace,
            ..SimConfig::default()
        };
        let f = &self.inner;
        let r = py.detach(|| sim::run(f, &specs, &mut [], &cfg)).map_err(value_err)?;
        Ok(SimResult { trace: r.trace, stats: r.stats })
    }
}

#[pymodule]
fn cxlsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(io_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(mem_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(table, m)?)?;
    m.add_function(wrap_pyfunction!(check_trace, m)?)?;
    m.add_function(wrap_pyfunction!(explore, m)?)?;
    m.add_function(wrap_pyfunction!(flit_roundtrip, m)?)?;
    m.add_class::<PyFabric>()?;
    m.add_class::<SimResult>()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_by_name() {
        assert!(render_table("mem-bw", FlitMode::F68, true).unwrap().starts_with("mix,"));
        assert!(render_table("nope", FlitMode::F68, true).is_err());
    }

    #[test]
    fn trace_modes() {
        let t = "INIT A 0\nINIT B 0\nRD X 1 B 0\nRD Y 1 A 0\nWR X 0 A 1\nWR Y 0 B 1\n";
        assert_eq!(trace_violations(t, OrderingMode::Legacy).unwrap().len(), 1);
        assert!(trace_violations(t, OrderingMode::Uio).unwrap().is_empty());
    }
}
