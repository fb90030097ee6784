//! Idle-latency composition. A path is a list of named components and its
//! latency is their sum.

use std::fmt;

use super::ClockMode;

pub const CPU_LOAD_TO_USE_NS: f64 = 100.0;
pub const PORT_RT_COMMON_NS: f64 = 21.0;
pub const PORT_RT_INDEPENDENT_NS: f64 = 25.0;
/// Round-trip flight time across a link with retimers.
pub const LINK_FLIGHT_RT_NS: f64 = 15.0;
pub const CXL_STACK_RT_NS: f64 = 50.0;
pub const WIRE_FLIGHT_NS: f64 = 10.0;
pub const RETIMER_RT_NS: f64 = 10.0;
pub const SWITCH_ARB_NS: f64 = 10.0;
/// Switch with its link flight times, as budgeted for a memory access.
pub const SWITCH_WITH_LINKS_NS: f64 = 70.0;
pub const SWITCH_OR_SMC_NS: f64 = 40.0;
pub const DEVICE_PIN_TO_PIN_NS: f64 = 80.0;
pub const SNOOP_RESPONSE_NS: f64 = 50.0;

pub fn port_round_trip(clock: ClockMode) -> f64 {
    match clock {
        ClockMode::Common => PORT_RT_COMMON_NS,
        ClockMode::Independent => PORT_RT_INDEPENDENT_NS,
    }
}

/// Port round trip on both ends plus link flight.
pub fn end_to_end_adder(clock: ClockMode) -> f64 {
    2.0 * port_round_trip(clock) + LINK_FLIGHT_RT_NS
}

/// Two port round trips, arbitration and lookup, and wire flight.
pub fn switch_round_trip(clock: ClockMode) -> f64 {
    2.0 * port_round_trip(clock) + SWITCH_ARB_NS + WIRE_FLIGHT_NS
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatencyComponent {
    pub name: &'static str,
    pub ns: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LatencyPath {
    pub label: String,
    pub components: Vec<LatencyComponent>,
}

impl LatencyPath {
    pub fn new(label: &str) -> Self {
        LatencyPath { label: label.into(), components: Vec::new() }
    }

    pub fn with(mut self, name: &'static str, ns: f64) -> Self {
        self.components.push(LatencyComponent { name, ns });
        self
    }

    /// CPU to a directly attached Type-3 memory device.
    pub fn direct_type3() -> Self {
        LatencyPath::new("CPU to direct-attached Type-3")
            .with("cpu load-to-use", CPU_LOAD_TO_USE_NS)
            .with("cxl stack round trip", CXL_STACK_RT_NS)
            .with("wire flight", WIRE_FLIGHT_NS)
            .with("retimer round trip", RETIMER_RT_NS)
    }

    /// CPU to Type-3 memory behind one switch.
    pub fn switched_type3() -> Self {
        LatencyPath::new("CPU to Type-3 through a switch")
            .with("cpu load-to-use", CPU_LOAD_TO_USE_NS)
            .with("switch with link flight", SWITCH_WITH_LINKS_NS)
            .with("device pin-to-pin", DEVICE_PIN_TO_PIN_NS)
    }

    /// Message to a peer through `switches` switches or SMCs.
    pub fn peer_message(switches: u32) -> Self {
        let mut p = LatencyPath::direct_type3();
        p.label = format!("peer message across {switches} switch(es)");
        for _ in 0..switches {
            p = p.with("switch or smc", SWITCH_OR_SMC_NS).with("one-way flight with retimer", WIRE_FLIGHT_NS);
        }
        p
    }

    pub fn canned() -> Vec<LatencyPath> {
        vec![
            LatencyPath::direct_type3(),
            LatencyPath::switched_type3(),
            LatencyPath::peer_message(1),
            LatencyPath::peer_message(2),
        ]
    }
}

impl fmt::Display for LatencyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(|c| format!("{} {}", c.name, c.ns)).collect();
        write!(f, "{}: {} = {} ns", self.label, parts.join(" + "), latency_estimate(self))
    }
}

pub fn latency_estimate(path: &LatencyPath) -> f64 {
    path.components.iter().map(|c| c.ns).sum()
}
