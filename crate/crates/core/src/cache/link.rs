//! In-flight message queues between host and one device.
//!
//! Each channel is FIFO and channels are otherwise independent, except that
//! on H2D a snoop may not overtake an earlier GO to the same line.

use std::collections::VecDeque;

use super::CacheMsg;
use crate::protocol::{H2dRspOp, Opcode};

fn is_go(m: &CacheMsg) -> bool {
    matches!(
        m.msg.opcode,
        Opcode::H2dRsp(H2dRspOp::Go(_) | H2dRspOp::GoErr | H2dRspOp::GoWritePull)
    )
}

fn is_snoop(m: &CacheMsg) -> bool {
    matches!(m.msg.opcode, Opcode::H2dReq(_))
}

/// Queue in send order; the channel heads are the deliverable candidates.
fn heads(q: &VecDeque<CacheMsg>) -> Vec<usize> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for (i, m) in q.iter().enumerate() {
        if !seen.contains(&m.msg.channel) {
            seen.push(m.msg.channel);
            out.push(i);
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct H2dLink {
    queue: VecDeque<CacheMsg>,
}

impl H2dLink {
    pub fn send(&mut self, m: CacheMsg) {
        self.queue.push_back(m);
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    /// Whether a snoop at `pos` would pass an earlier GO for its line.
    pub fn passes_go(&self, pos: usize) -> bool {
        let m = &self.queue[pos];
        is_snoop(m) && self.queue.iter().take(pos).any(|g| is_go(g) && g.line() == m.line())
    }

    /// Positions that may be delivered next. With `push_rule` off, snoops
    /// may overtake GOs.
    pub fn deliverable(&self, push_rule: bool) -> Vec<usize> {
        heads(&self.queue)
            .into_iter()
            .filter(|p| !push_rule || !self.passes_go(*p))
            .collect()
    }

    pub fn take(&mut self, pos: usize) -> CacheMsg {
        self.queue.remove(pos).expect("position in range")
    }

    pub fn iter(&self) -> impl Iterator<Item = &CacheMsg> {
        self.queue.iter()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct D2hLink {
    queue: VecDeque<CacheMsg>,
}

impl D2hLink {
    pub fn send(&mut self, m: CacheMsg) {
        self.queue.push_back(m);
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn deliverable(&self) -> Vec<usize> {
        heads(&self.queue)
    }

    pub fn take(&mut self, pos: usize) -> CacheMsg {
        self.queue.remove(pos).expect("position in range")
    }
}
