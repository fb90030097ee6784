//! CXL.io ordering: flow-control classes, pass/no-pass tables for legacy
//! and UIO virtual channels, UIO write completion tracking at the source,
//! and trace checkers.

pub mod explore;
pub mod trace;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

pub use crate::protocol::{FcClass, IoOp};
pub use explore::{explore_io, IoScript, IoStep, IoExploreReport};
pub use trace::{check_producer_consumer, check_sync_patterns, parse_trace, SyncPattern, SyncReport, TraceEvent};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum IoError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("UIO transaction on VC0")]
    UioOnVc0,
    #[error("virtual channel {0} out of range")]
    BadVc(u8),
    #[error("UIO write {0} completed twice or was never issued")]
    UnexpectedCompletion(u16),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrderingVerdict {
    MustNotPass,
    MustAllowPass,
    MayPass,
}

impl fmt::Display for OrderingVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderingVerdict::MustNotPass => "No",
            OrderingVerdict::MustAllowPass => "Yes",
            OrderingVerdict::MayPass => "Y/N",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum OrderingMode {
    #[default]
    Legacy,
    Uio,
}

impl FromStr for OrderingMode {
    type Err = IoError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "legacy" => Ok(OrderingMode::Legacy),
            "uio" => Ok(OrderingMode::Uio),
            _ => Err(IoError::MalformedTrace(format!("unknown ordering mode {s}"))),
        }
    }
}

/// Number of virtual channels on a CXL.io link.
pub const IO_VCS: u8 = 2;
/// VC used by UIO traffic unless configured otherwise.
pub const UIO_DEFAULT_VC: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IoTlp {
    pub kind: IoOp,
    pub relaxed_ordering: bool,
    pub vc: u8,
    pub payload_dw: u32,
}

impl IoTlp {
    pub fn new(kind: IoOp) -> Self {
        IoTlp {
            kind,
            relaxed_ordering: false,
            vc: if kind.is_uio() { UIO_DEFAULT_VC } else { 0 },
            payload_dw: if kind.carries_payload() { 16 } else { 0 },
        }
    }

    pub fn ro(mut self) -> Self {
        self.relaxed_ordering = true;
        self
    }

    pub fn fc(&self) -> FcClass {
        self.kind.fc()
    }

    pub fn validate(&self) -> Result<(), IoError> {
        if self.vc > 7 {
            return Err(IoError::BadVc(self.vc));
        }
        if self.kind.is_uio() && self.vc == 0 {
            return Err(IoError::UioOnVc0);
        }
        Ok(())
    }
}

/// Whether `second` may overtake the earlier `first` on the same VC.
pub fn may_pass(first: &IoTlp, second: &IoTlp, mode: OrderingMode) -> OrderingVerdict {
    use FcClass::*;
    use OrderingVerdict::*;
    match mode {
        OrderingMode::Uio => match (first.fc(), second.fc()) {
            (Posted | NonPosted, Completion) => MustAllowPass,
            _ => MayPass,
        },
        OrderingMode::Legacy => {
            let ro = second.relaxed_ordering;
            match (second.fc(), first.fc()) {
                (_, Posted) => {
                    if ro {
                        MayPass
                    } else {
                        MustNotPass
                    }
                }
                (Posted | Completion, NonPosted) => MustAllowPass,
                (NonPosted, NonPosted) => MayPass,
                (Posted, Completion) => {
                    if ro {
                        MustAllowPass
                    } else {
                        MayPass
                    }
                }
                (NonPosted, Completion) => MayPass,
                (Completion, Completion) => {
                    if ro {
                        MustNotPass
                    } else {
                        MayPass
                    }
                }
            }
        }
    }
}

/// Seeded resolution of MAY_PASS cells: pass with probability `prob`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PassPolicy {
    pub prob: f64,
}

impl PassPolicy {
    pub fn allows<R: Rng>(&self, v: OrderingVerdict, rng: &mut R) -> bool {
        match v {
            OrderingVerdict::MustNotPass => false,
            OrderingVerdict::MustAllowPass => true,
            OrderingVerdict::MayPass => self.prob > 0.0 && rng.gen_bool(self.prob.min(1.0)),
        }
    }
}

/// Index of the TLP a receiver should take next from `queue`, skipping
/// those it cannot accept (`blocked`). A TLP is eligible once it may pass
/// every earlier TLP still queued. The MAY_PASS cells count as passable
/// only when `relaxed` is set.
pub fn next_deliverable(
    queue: &[IoTlp],
    mode: OrderingMode,
    relaxed: bool,
    blocked: impl Fn(&IoTlp) -> bool,
) -> Option<usize> {
    (0..queue.len()).find(|&i| {
        !blocked(&queue[i])
            && queue[..i].iter().all(|f| match may_pass(f, &queue[i], mode) {
                OrderingVerdict::MustNotPass => false,
                OrderingVerdict::MustAllowPass => true,
                OrderingVerdict::MayPass => relaxed,
            })
    })
}

/// Source-side bookkeeping of outstanding UIO writes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UioSource {
    outstanding: BTreeSet<u16>,
}

impl UioSource {
    pub fn issue_write(&mut self, tag: u16) {
        self.outstanding.insert(tag);
    }

    pub fn complete(&mut self, tag: u16) -> Result<(), IoError> {
        if self.outstanding.remove(&tag) {
            Ok(())
        } else {
            Err(IoError::UnexpectedCompletion(tag))
        }
    }

    pub fn pending(&self) -> usize {
        self.outstanding.len()
    }

    /// A flag write may go out once every earlier data write is complete.
    pub fn may_emit_flag(&self) -> bool {
        uio_source_fence(&self.outstanding)
    }
}

pub fn uio_source_fence(pending: &BTreeSet<u16>) -> bool {
    pending.is_empty()
}
