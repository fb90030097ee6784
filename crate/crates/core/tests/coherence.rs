use cxlsim_core::cache::explore::{explore, reachable_bfs, reachable_dfs, ExploreConfig};
use cxlsim_core::cache::Violation;

#[test]
fn depth_eight_two_devices_has_no_violation() {
    let cfg = ExploreConfig::default();
    let r = explore(&cfg);
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    eprintln!("states {}", r.states);
    assert!(r.states > 200, "{}", r.states);
}

#[test]
fn reachable_sets_agree_at_depth_eight() {
    let cfg = ExploreConfig::default();
    assert_eq!(reachable_bfs(&cfg), reachable_dfs(&cfg));
}

#[test]
fn without_go_push_two_owners_are_reachable() {
    let cfg = ExploreConfig {
        push_rule: false,
        ..Default::default()
    };
    let r = explore(&cfg);
    let w = r
        .violations
        .iter()
        .find(|w| matches!(w.violation, Violation::Swmr { .. }))
        .expect("SWMR witness");
    assert!(w.trace.len() <= 8);
}

#[test]
fn deeper_search_with_three_devices_stays_clean() {
    let cfg = ExploreConfig {
        devices: 3,
        depth: 12,
        ..Default::default()
    };
    let r = explore(&cfg);
    eprintln!("states {}", r.states);
    assert!(r.violations.is_empty(), "{:?}", r.violations);
}
