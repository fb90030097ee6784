//! `cxlsim`: run scenarios, print model tables, check traces, validate
//! topologies and explore the coherence model.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use cxlsim_core::cache::explore::ExploreConfig;
use cxlsim_core::depgraph::{build_dependence_graph, check_acyclic, LevelSet, Verdict};
use cxlsim_core::fabric::topology::{DevKind, NodeKind};
use cxlsim_core::fabric::Fabric;
use cxlsim_core::flit::FlitMode;
use cxlsim_core::io::{check_producer_consumer, check_sync_patterns, parse_trace, OrderingMode};
use cxlsim_core::perf::tables::{cache_bw_table, io_bw_table, latency_table, mem_bw_table, uio_bi_table, Table};
use cxlsim_core::protocol::D2hReqOp;
use cxlsim_core::sim::{self, parse_workloads, SimConfig, SimError};

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
}

/// What a verb found: clean, or a reportable violation.
enum Outcome {
    Clean,
    Violation,
}

#[derive(Parser)]
#[command(name = "cxlsim", version, about = "CXL protocol simulator and performance model")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a workload over a topology and print statistics.
    Simulate {
        #[arg(long)]
        topology: PathBuf,
        /// Workload file, or inline text such as `host=h0,mix=MEM_2R1W,lines=100`.
        #[arg(long)]
        workload: String,
        #[arg(long, env = "CXLSIM_SEED", default_value_t = 0)]
        seed: u64,
        /// End the run after this many microseconds of simulated time.
        #[arg(long)]
        horizon_us: Option<u64>,
        /// Write the event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value = "68", value_parser = parse_flit)]
        flit: FlitMode,
        /// Fail a device: `NAME@MICROSECONDS`. May repeat.
        #[arg(long = "fail")]
        fail: Vec<String>,
        /// Independent runs with seeds S, S+1, ...
        #[arg(long, default_value_t = 1)]
        repeat: u32,
        #[arg(long)]
        csv: bool,
    },
    /// Print a performance-model table.
    Tables {
        #[arg(long, value_enum)]
        table: TableKind,
        #[arg(long, default_value = "68", value_parser = parse_flit)]
        flit: FlitMode,
        #[arg(long)]
        csv: bool,
    },
    /// Check a memory trace for ordering violations.
    CheckTrace {
        #[arg(long, value_parser = parse_mode)]
        mode: OrderingMode,
        file: PathBuf,
    },
    /// Check a topology for routing completeness and protocol deadlock freedom.
    Validate {
        #[arg(long)]
        topology: PathBuf,
    },
    /// Exhaustively explore the cache coherence model.
    Explore {
        /// `key=value` lines: devices, push_rule, alphabet, host_snoops, stores, max_states.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TableKind {
    IoBw,
    MemBw,
    CacheBw,
    Latency,
    UioBi,
}

fn parse_flit(s: &str) -> Result<FlitMode, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<OrderingMode, String> {
    s.parse().map_err(|_| format!("expected legacy or uio, got {s}"))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn load_fabric(path: &Path) -> Result<Fabric, CliError> {
    Fabric::parse(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(t: &Table, csv: bool) {
    print!("{}", if csv { t.to_csv() } else { t.to_text() });
}

fn simulate(
    topology: &Path,
    workload: &str,
    cfg: SimConfig,
    repeat: u32,
    trace: Option<&Path>,
    csv: bool,
) -> Result<Outcome, CliError> {
    let fabric = load_fabric(topology)?;
    let text = if workload.contains('=') { workload.to_owned() } else { read(Path::new(workload))? };
    let specs = parse_workloads(&text).map_err(|e| CliError::Input(e.to_string()))?;
    let seeds: Vec<u64> = (0..u64::from(repeat.max(1))).map(|i| cfg.seed.wrapping_add(i)).collect();
    // Runs share nothing, so each gets its own thread.
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = SimConfig { seed, ..cfg.clone() };
                let (fabric, specs) = (&fabric, &specs);
                s.spawn(move || sim::run(fabric, specs, &mut [], &cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let mut outcome = Outcome::Clean;
    let mut traces = String::new();
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(r) => {
                if seeds.len() > 1 {
                    println!("# seed={seed}");
                }
                if csv {
                    print!("{}", r.stats.to_csv());
                } else {
                    for row in &r.stats.rows {
                        println!("{:<14} {:<6} {:>14.4} {}", row.metric, row.scope, row.value, row.unit);
                    }
                }
                for l in r.trace {
                    traces.push_str(&l);
                    traces.push('\n');
                }
            }
            Err(e @ (SimError::Deadlock { .. } | SimError::MonitorViolation { .. })) => {
                eprintln!("violation (seed {seed}): {e}");
                outcome = Outcome::Violation;
            }
            Err(e) => return Err(CliError::Input(e.to_string())),
        }
    }
    if let Some(p) = trace {
        fs::write(p, traces).map_err(|source| CliError::Io { path: p.to_owned(), source })?;
    }
    Ok(outcome)
}

fn check_trace(mode: OrderingMode, file: &Path) -> Result<Outcome, CliError> {
    let bad = |e: cxlsim_core::io::IoError| CliError::Input(format!("{}: {e}", file.display()));
    let events = parse_trace(&read(file)?).map_err(bad)?;
    let mut outcome = Outcome::Clean;
    for v in check_producer_consumer(&events).map_err(bad)? {
        println!(
            "violation: {} saw the new {} but then read stale {}={}",
            v.consumer, v.flag, v.data, v.stale
        );
        outcome = Outcome::Violation;
    }
    let sync = check_sync_patterns(&events).map_err(bad)?;
    if let Some(p) = sync.pattern {
        println!("sync pattern {p:?}: saw new {:?}", sync.saw_new);
        // Relaxed ordering permits any outcome.
        if !sync.acceptable && mode == OrderingMode::Legacy {
            println!("violation: both agents read old values");
            outcome = Outcome::Violation;
        }
    }
    if matches!(outcome, Outcome::Clean) {
        println!("ok: {} events", events.len());
    }
    Ok(outcome)
}

fn uses_fabric_features(f: &Fabric) -> bool {
    let t = &f.topo;
    let gfd = t.nodes.iter().any(|n| matches!(n.kind, NodeKind::Device { kind: DevKind::Gfd, .. }));
    let cascaded = t.links.iter().any(|l| t.nodes[l.a.node].is_switch() && t.nodes[l.b.node].is_switch());
    gfd || cascaded || !t.fast.is_empty()
}

fn validate(topology: &Path) -> Result<Outcome, CliError> {
    let f = load_fabric(topology)?;
    let problems = f.validate();
    for p in &problems {
        println!("problem: {p}");
    }
    let (name, levels) = if uses_fabric_features(&f) { ("3.0", LevelSet::CXL30) } else { ("2.0", LevelSet::CXL20) };
    let verdict = check_acyclic(&build_dependence_graph(levels));
    match &verdict {
        Verdict::Acyclic => println!("dependence graph ({name} levels): acyclic"),
        Verdict::Cycle(c) => {
            let names: Vec<String> = c.iter().map(|n| n.to_string()).collect();
            println!("dependence cycle: {}", names.join(" -> "));
        }
    }
    if problems.is_empty() && verdict.is_acyclic() {
        println!("ok: {} nodes, {} links", f.topo.nodes.len(), f.topo.links.len());
        Ok(Outcome::Clean)
    } else {
        Ok(Outcome::Violation)
    }
}

fn parse_bool(k: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Input(format!("{k}: expected a boolean, got {v}"))),
    }
}

fn parse_explore_config(text: &str) -> Result<ExploreConfig, CliError> {
    let mut cfg = ExploreConfig { max_states: 1_000_000, ..ExploreConfig::default() };
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| CliError::Input(format!("expected key=value: {raw}")))?;
        let num = |v: &str| v.parse::<usize>().map_err(|_| CliError::Input(format!("{k}: bad number {v}")));
        match k {
            "devices" => cfg.devices = num(v)?,
            "depth" => cfg.depth = num(v)?,
            "max_states" => cfg.max_states = num(v)?,
            "push_rule" => cfg.push_rule = parse_bool(k, v)?,
            "host_snoops" => cfg.host_snoops = parse_bool(k, v)?,
            "stores" => cfg.stores = parse_bool(k, v)?,
            "alphabet" => {
                cfg.alphabet = v
                    .split(',')
                    .map(|name| {
                        let name = name.trim();
                        D2hReqOp::ALL
                            .iter()
                            .copied()
                            .find(|op| format!("{op:?}").eq_ignore_ascii_case(name))
                            .ok_or_else(|| CliError::Input(format!("unknown request {name}")))
                    })
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(CliError::Input(format!("unknown key {k}"))),
        }
    }
    if cfg.devices == 0 {
        return Err(CliError::Input("devices must be at least 1".into()));
    }
    Ok(cfg)
}

fn explore(config: &Path, depth: Option<usize>) -> Result<Outcome, CliError> {
    let mut cfg = parse_explore_config(&read(config)?)?;
    if let Some(d) = depth {
        cfg.depth = d;
    }
    match sim::explore_bounded(&cfg, cfg.max_states) {
        Ok(r) => {
            println!("states {} transitions {} violations {}", r.states, r.transitions, r.violations.len());
            for w in &r.violations {
                println!("violation: {}", w.violation);
                for a in &w.trace {
                    println!("  {a}");
                }
            }
            Ok(if r.violations.is_empty() { Outcome::Clean } else { Outcome::Violation })
        }
        Err(e @ SimError::StateSpaceBudgetExceeded(_)) => {
            println!("incomplete: {e}");
            Ok(Outcome::Violation)
        }
        Err(e) => Err(CliError::Input(e.to_string())),
    }
}

fn dispatch(cmd: Cmd) -> Result<Outcome, CliError> {
    match cmd {
        Cmd::Simulate { topology, workload, seed, horizon_us, trace, flit, fail, repeat, csv } => {
            let failures = fail
                .iter()
                .map(|f| {
                    let (dev, at) =
                        f.split_once('@').ok_or_else(|| CliError::Input(format!("--fail expects NAME@US, got {f}")))?;
                    let us: u64 = at.parse().map_err(|_| CliError::Input(format!("--fail: bad time {at}")))?;
                    Ok((dev.to_owned(), us * 1_000_000))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let cfg = SimConfig {
                flit,
                seed,
                horizon_ps: horizon_us.map(|us| us * 1_000_000),
                failures,
                trace: trace.is_some(),
                ..SimConfig::default()
            };
            simulate(&topology, &workload, cfg, repeat, trace.as_deref(), csv)
        }
        Cmd::Tables { table, flit, csv } => {
            let t = match table {
                TableKind::IoBw => io_bw_table(flit),
                TableKind::MemBw => mem_bw_table(flit),
                TableKind::CacheBw => cache_bw_table(flit),
                TableKind::Latency => latency_table(),
                TableKind::UioBi => uio_bi_table(),
            };
            emit(&t, csv);
            Ok(Outcome::Clean)
        }
        Cmd::CheckTrace { mode, file } => check_trace(mode, &file),
        Cmd::Validate { topology } => validate(&topology),
        Cmd::Explore { config, depth } => explore(&config, depth),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
