//! CXL.cache agents: a device cache over host memory and the host home
//! agent with an exact snoop filter.
//!
//! Data is modelled as a per-line version number rather than 64 raw bytes;
//! that is all the value-coherence monitor needs.

pub mod device;
pub mod explore;
pub mod host;
pub mod link;
pub mod monitor;

use thiserror::Error;

use crate::protocol::{Address, Message, Opcode};

pub use device::DeviceCache;
pub use host::HomeAgent;
pub use link::{D2hLink, H2dLink};
pub use monitor::{CoherenceMonitor, Violation};

/// A message plus the line value it carries, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CacheMsg {
    pub msg: Message,
    pub value: Option<u64>,
}

impl CacheMsg {
    pub fn new(opcode: Opcode, line: u64, tag: u16, dev: u8) -> Self {
        CacheMsg {
            msg: Message::new(opcode, Some(Address::new(line)), tag).with_cache_id(dev),
            value: None,
        }
    }

    pub fn with_value(mut self, v: u64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn line(&self) -> u64 {
        self.msg.line().unwrap_or(0)
    }

    pub fn dev(&self) -> u8 {
        self.msg.cache_id.unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CacheError {
    #[error("request already outstanding for line {0:#x}")]
    AddressBusy(u64),
    #[error("{op} not legal from state {state}")]
    IllegalStateForEvict { op: String, state: String },
    #[error("{op} not legal from state {state}")]
    IllegalState { op: String, state: String },
    #[error("line {0:#x} is limited to CXL.io")]
    NotPermitted(u64),
    #[error("unexpected message {0}")]
    Unexpected(String),
}
