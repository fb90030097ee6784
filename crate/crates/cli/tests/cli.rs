use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn cxlsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cxlsim")).args(args).current_dir(root()).output().expect("spawn cxlsim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn tables_match_golden_csvs() {
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut cases: Vec<(String, Vec<&str>)> = Vec::new();
    for t in ["io-bw", "mem-bw", "cache-bw"] {
        for f in ["68", "256", "lo"] {
            cases.push((format!("{t}-{f}.csv"), vec![t, f]));
        }
    }
    cases.push(("latency.csv".into(), vec!["latency", "68"]));
    cases.push(("uio-bi.csv".into(), vec!["uio-bi", "68"]));
    assert_eq!(cases.len(), 11);
    for (file, a) in cases {
        let o = cxlsim(&["tables", "--table", a[0], "--flit", a[1], "--csv"]);
        assert!(o.status.success(), "{file}");
        let want = std::fs::read(golden.join(&file)).unwrap();
        assert_eq!(o.stdout, want, "{file} drifted");
    }
}

#[test]
fn text_tables_are_aligned() {
    let o = cxlsim(&["tables", "--table", "mem-bw", "--flit", "68"]);
    let out = stdout(&o);
    let widths: Vec<usize> = out.lines().map(str::len).collect();
    assert_eq!(widths.len(), 4);
    assert!(widths.iter().all(|&w| w == widths[0]), "{out}");
}

#[test]
fn shipped_fabric_topology_validates() {
    for t in ["p2p", "pool", "fabric3"] {
        let o = cxlsim(&["validate", "--topology", &format!("scenarios/{t}.topo")]);
        assert_eq!(o.status.code(), Some(0), "{t}: {}", stdout(&o));
    }
    assert!(stdout(&cxlsim(&["validate", "--topology", "scenarios/fabric3.topo"])).contains("3.0 levels"));
}

#[test]
fn stale_data_after_new_flag_exits_1() {
    for mode in ["legacy", "uio"] {
        let o = cxlsim(&["check-trace", "--mode", mode, "scenarios/pc-stale.trace"]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stdout(&o).contains("violation: Y saw the new Flag but then read stale Data=0"));
    }
    let o = cxlsim(&["check-trace", "--mode", "legacy", "scenarios/pc-ok.trace"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn both_old_sync_outcome_depends_on_mode() {
    let legacy = cxlsim(&["check-trace", "--mode", "legacy", "scenarios/sync-both-old.trace"]);
    assert_eq!(legacy.status.code(), Some(1));
    let uio = cxlsim(&["check-trace", "--mode", "uio", "scenarios/sync-both-old.trace"]);
    assert_eq!(uio.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cxlsim(&["tables", "--table", "io-bw", "--nope"]).status.code(), Some(2));
    assert_eq!(cxlsim(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cxlsim(&["tables", "--table", "io-bw", "--flit", "99"]).status.code(), Some(2));
    assert_eq!(cxlsim(&["validate", "--topology", "scenarios/missing.topo"]).status.code(), Some(2));
    let o = cxlsim(&["check-trace", "--mode", "strict", "scenarios/pc-ok.trace"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected legacy or uio"));
}

#[test]
fn explore_reports_witnesses_without_the_push_rule() {
    let ok = cxlsim(&["explore", "--config", "scenarios/explore.cfg"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let bad = cxlsim(&["explore", "--config", "scenarios/explore-no-push.cfg", "--depth", "8"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("violation:"));
}

#[test]
fn simulate_is_reproducible_from_the_seed() {
    let dir = std::env::temp_dir().join(format!("cxlsim-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run = |name: &str, seed: &str| {
        let trace = dir.join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_cxlsim"))
            .args(["simulate", "--topology", "scenarios/pool.topo", "--workload", "scenarios/mixed.wl", "--csv", "--trace"])
            .arg(&trace)
            .current_dir(root())
            .env("CXLSIM_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (o.stdout, std::fs::read_to_string(trace).unwrap())
    };
    let (a, ta) = run("a.trace", "7");
    let (b, tb) = run("b.trace", "7");
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert!(ta.starts_with("# rng=ChaCha8 seed=7 flit=F68\n"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn failed_device_without_answers_is_contained() {
    let o = cxlsim(&[
        "simulate",
        "--topology",
        "scenarios/p2p.topo",
        "--workload",
        "host=h0,mix=MEM_1R0W,lines=3000",
        "--fail",
        "d0@1",
        "--csv",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let errors: f64 = out
        .lines()
        .find(|l| l.starts_with("errors,h0,"))
        .and_then(|l| l.split(',').nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!(errors > 0.0, "{out}");
}
