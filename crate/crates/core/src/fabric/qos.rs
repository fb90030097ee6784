//! Load feedback, inter-switch link credits and error containment.

use std::collections::BTreeMap;

use super::FabricError;
use crate::protocol::{Channel, FcClass, H2dRspOp, IoOp, M2sReqOp, Message, NdrOp, Opcode};

/// Device load reported in memory responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DevLoad {
    Light,
    Optimal,
    Moderate,
    Severe,
}

impl DevLoad {
    /// Classifies queue occupancy against a target depth.
    pub fn from_occupancy(queued: usize, target: usize) -> Self {
        let t = target.max(1);
        if queued * 2 < t {
            DevLoad::Light
        } else if queued <= t {
            DevLoad::Optimal
        } else if queued <= 2 * t {
            DevLoad::Moderate
        } else {
            DevLoad::Severe
        }
    }
}

/// Per-source injection-rate controller, updated on every response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateController {
    /// Requests per microsecond.
    pub rate: f64,
    pub nominal: f64,
    pub increase: f64,
    pub moderate: f64,
    pub severe: f64,
}

impl RateController {
    pub fn new(rate: f64, nominal: f64) -> Self {
        RateController { rate, nominal, increase: 1.1, moderate: 0.8, severe: 0.5 }
    }

    pub fn update(&mut self, load: DevLoad) -> f64 {
        self.rate = match load {
            DevLoad::Light => (self.rate * self.increase).min(self.nominal).max(self.rate),
            DevLoad::Optimal => self.rate,
            DevLoad::Moderate => self.rate * self.moderate,
            DevLoad::Severe => self.rate * self.severe,
        };
        self.rate
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Upstream,
    Downstream,
}

/// Link-layer credits of an inter-switch link: one independent pool per
/// channel and direction, so no channel can drain another's credits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IslCredits {
    pools: BTreeMap<(Direction, Channel), (u32, u32)>,
}

impl IslCredits {
    pub fn new(per_channel: u32) -> Self {
        let pools = [Direction::Upstream, Direction::Downstream]
            .into_iter()
            .flat_map(|d| Channel::CACHE_MEM.into_iter().map(move |c| ((d, c), (per_channel, per_channel))))
            .collect();
        IslCredits { pools }
    }

    pub fn channels(&self) -> impl Iterator<Item = (Direction, Channel)> + '_ {
        self.pools.keys().copied()
    }

    pub fn available(&self, dir: Direction, ch: Channel) -> Option<u32> {
        self.pools.get(&(dir, ch)).map(|p| p.0)
    }

    pub fn take(&mut self, dir: Direction, ch: Channel) -> Result<(), FabricError> {
        let p = self.pools.get_mut(&(dir, ch)).ok_or_else(|| FabricError::NoRoute(format!("{ch} not carried")))?;
        if p.0 == 0 {
            return Err(FabricError::NoRoute(format!("{ch} {dir:?} out of credits")));
        }
        p.0 -= 1;
        Ok(())
    }

    pub fn give(&mut self, dir: Direction, ch: Channel) {
        if let Some(p) = self.pools.get_mut(&(dir, ch)) {
            p.0 = (p.0 + 1).min(p.1);
        }
    }
}

/// Error completions for requests stranded at a dead endpoint, so the
/// requester never times out. Posted writes need none.
pub fn contain_error(outstanding: &[Message]) -> Vec<Message> {
    outstanding
        .iter()
        .filter_map(|req| {
            let op = match req.opcode {
                Opcode::M2sReq(M2sReqOp::MemRd | M2sReqOp::MemRdData) => Opcode::S2mDrs,
                Opcode::M2sReq(_) | Opcode::M2sRwd(_) => Opcode::S2mNdr(NdrOp::Cmp),
                Opcode::D2hReq(_) => Opcode::H2dRsp(H2dRspOp::GoErr),
                Opcode::Io(op) if op.fc() == FcClass::NonPosted => Opcode::Io(if op.is_uio() {
                    IoOp::UioRdCpl
                } else {
                    IoOp::Cpl
                }),
                Opcode::Io(IoOp::UioWr) => Opcode::Io(IoOp::UioWrCpl),
                _ => return None,
            };
            let mut rsp = Message::new(op, req.address, req.tag).with_poison(true);
            rsp.ld_id = req.ld_id;
            rsp.cache_id = req.cache_id;
            Some(rsp)
        })
        .collect()
}
