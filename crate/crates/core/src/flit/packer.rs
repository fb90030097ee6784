//! Greedy slot packer, one instance per link direction.
//!
//! Rules, applied one flit at a time:
//!
//! * 68B: with at least four data slots owed, send an all-data flit.
//!   Otherwise send a header flit: headers in slot 0, then each G slot
//!   carries owed data if any, else more headers.
//! * 256B/LO: H and HS carry headers only; each G slot carries owed data if
//!   any, else headers, so no G slot idles while there is something to send.
//! * A header is placed before any of its data. Data-bearing headers pick
//!   the class of a slot first. In 256B modes a data-bearing header is held
//!   back while it would push more than five lines of data in flight.

use std::collections::VecDeque;

use super::{slot_capacity, Flit, FlitMode, HeaderClass, Slot, SlotKind, SLOT_BYTES};

pub type MsgId = u64;

/// Data slots in a 64-byte line.
pub const LINE_SLOTS: u32 = 4;
pub const MAX_LINES_IN_FLIGHT: u32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingHeader {
    pub id: MsgId,
    pub class: HeaderClass,
    /// Data slots that follow this header (0 or 4 for a line).
    pub data_slots: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlannedSlot {
    Empty,
    Data { id: MsgId, beat: u32 },
    Headers { class: HeaderClass, ids: Vec<MsgId> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlitPlan {
    pub mode: FlitMode,
    pub all_data: bool,
    /// Nothing to send.
    pub null: bool,
    /// 68B header flits: all-data flits that will follow this one.
    pub data_follow: u8,
    pub slots: Vec<PlannedSlot>,
}

impl FlitPlan {
    pub fn data_slots(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, PlannedSlot::Data { .. })).count()
    }

    pub fn header_count(&self) -> usize {
        self.slots
            .iter()
            .map(|s| match s {
                PlannedSlot::Headers { ids, .. } => ids.len(),
                _ => 0,
            })
            .sum()
    }

    /// Ids of every header placed, in slot order.
    pub fn header_ids(&self) -> impl Iterator<Item = MsgId> + '_ {
        self.slots.iter().flat_map(|s| match s {
            PlannedSlot::Headers { ids, .. } => ids.clone(),
            _ => Vec::new(),
        })
    }

    /// Builds a concrete flit with synthetic header and data bytes derived
    /// from message ids.
    pub fn to_flit(&self) -> Flit {
        if self.null {
            return Flit::null(self.mode);
        }
        let fill = |s: &PlannedSlot| match s {
            PlannedSlot::Empty => Slot::Empty,
            PlannedSlot::Data { id, beat } => {
                let mut d = [0u8; SLOT_BYTES];
                d[..8].copy_from_slice(&id.to_le_bytes());
                d[8..12].copy_from_slice(&beat.to_le_bytes());
                Slot::Data(d)
            }
            PlannedSlot::Headers { class, ids } => Slot::Headers {
                class: *class,
                headers: ids
                    .iter()
                    .map(|id| id.to_le_bytes()[..class.width(self.mode).min(8)].to_vec())
                    .map(|mut v| {
                        v.resize(class.width(self.mode), 0);
                        v
                    })
                    .collect(),
            },
        };
        if self.all_data {
            let mut d = [[0u8; SLOT_BYTES]; 4];
            for (i, s) in self.slots.iter().enumerate() {
                if let Slot::Data(x) = fill(s) {
                    d[i] = x;
                }
            }
            return Flit::all_data(d);
        }
        let mut f = Flit::slots(self.mode, self.slots.iter().map(fill).collect());
        f.data_follow = self.data_follow;
        f
    }
}

#[derive(Clone, Debug)]
pub struct Packer {
    pub mode: FlitMode,
    headers: VecDeque<PendingHeader>,
    /// (message, next beat, beats left)
    data: VecDeque<(MsgId, u32, u32)>,
}

impl Packer {
    pub fn new(mode: FlitMode) -> Self {
        Packer { mode, headers: VecDeque::new(), data: VecDeque::new() }
    }

    pub fn push(&mut self, h: PendingHeader) {
        self.headers.push_back(h);
    }

    pub fn pending_headers(&self) -> usize {
        self.headers.len()
    }

    pub fn data_backlog(&self) -> u32 {
        self.data.iter().map(|d| d.2).sum()
    }

    pub fn is_idle(&self) -> bool {
        self.headers.is_empty() && self.data.is_empty()
    }

    fn take_data(&mut self) -> Option<PlannedSlot> {
        let front = self.data.front_mut()?;
        let slot = PlannedSlot::Data { id: front.0, beat: front.1 };
        front.1 += 1;
        front.2 -= 1;
        if front.2 == 0 {
            self.data.pop_front();
        }
        Some(slot)
    }

    fn admits(&self, h: &PendingHeader) -> bool {
        self.mode == FlitMode::F68
            || h.data_slots == 0
            || self.data_backlog() + h.data_slots <= MAX_LINES_IN_FLIGHT * LINE_SLOTS
    }

    /// Fills one header slot. Returns `Empty` when nothing can be placed.
    fn take_headers(&mut self, kind: SlotKind) -> PlannedSlot {
        let lead = self
            .headers
            .iter()
            .find(|h| h.data_slots > 0 && self.admits(h) && slot_capacity(self.mode, kind, h.class) > 0)
            .or_else(|| self.headers.iter().find(|h| slot_capacity(self.mode, kind, h.class) > 0))
            .map(|h| h.class);
        let Some(class) = lead else {
            return PlannedSlot::Empty;
        };
        let cap = slot_capacity(self.mode, kind, class);
        let mut ids = Vec::new();
        let mut i = 0;
        while i < self.headers.len() && ids.len() < cap {
            let h = self.headers[i];
            if h.class != class {
                i += 1;
                continue;
            }
            if !self.admits(&h) {
                break;
            }
            self.headers.remove(i);
            if h.data_slots > 0 {
                self.data.push_back((h.id, 0, h.data_slots));
            }
            ids.push(h.id);
        }
        if ids.is_empty() {
            PlannedSlot::Empty
        } else {
            PlannedSlot::Headers { class, ids }
        }
    }

    pub fn next_flit(&mut self) -> FlitPlan {
        let mode = self.mode;
        let mut plan = FlitPlan { mode, all_data: false, null: false, data_follow: 0, slots: Vec::new() };
        if self.is_idle() {
            plan.null = true;
            return plan;
        }
        if mode == FlitMode::F68 && self.data_backlog() >= LINE_SLOTS {
            plan.all_data = true;
            plan.slots = (0..4).map(|_| self.take_data().expect("backlog")).collect();
            return plan;
        }
        for kind in mode.slot_kinds() {
            let s = match kind {
                SlotKind::H | SlotKind::Hs => self.take_headers(kind),
                SlotKind::G => match self.take_data() {
                    Some(d) => d,
                    None => self.take_headers(kind),
                },
            };
            plan.slots.push(s);
        }
        if mode == FlitMode::F68 {
            plan.data_follow = (self.data_backlog() / LINE_SLOTS).min(31) as u8;
        }
        plan
    }
}

/// Plans the next flit from the packer's queues.
pub fn pack_slots_greedy(packer: &mut Packer) -> FlitPlan {
    packer.next_flit()
}
