//! Random well-formed flits for fuzzing.

use rand::Rng;

use super::{slot_capacity, Flit, FlitBody, FlitMode, HeaderClass, ProtocolKind, Slot, SLOT_BYTES};

fn random_slot<R: Rng>(rng: &mut R, mode: FlitMode, kind: super::SlotKind) -> Slot {
    let classes: Vec<HeaderClass> =
        HeaderClass::ALL.into_iter().filter(|c| slot_capacity(mode, kind, *c) > 0).collect();
    let can_data = kind == super::SlotKind::G;
    match rng.gen_range(0..3) {
        0 => Slot::Empty,
        1 if can_data => Slot::Data(rng.gen()),
        _ if classes.is_empty() => Slot::Empty,
        _ => {
            let class = classes[rng.gen_range(0..classes.len())];
            let n = rng.gen_range(1..=slot_capacity(mode, kind, class));
            let w = class.width(mode);
            Slot::Headers { class, headers: (0..n).map(|_| (0..w).map(|_| rng.gen()).collect()).collect() }
        }
    }
}

/// A flit `encode_flit` accepts and a fresh decoder reads back unchanged.
/// 68B header flits never announce all-data flits here.
pub fn random_flit<R: Rng>(rng: &mut R, mode: FlitMode) -> Flit {
    let eds = rng.gen_bool(0.1);
    let kind = ProtocolKind::ALL[rng.gen_range(0..4)];
    let mut f = Flit::null(mode);
    f.kind = kind;
    f.eds = eds;
    if mode != FlitMode::F68 {
        f.ctrl = rng.gen();
    }
    f.body = if kind == ProtocolKind::CacheMem {
        FlitBody::Slots(mode.slot_kinds().into_iter().map(|k| random_slot(rng, mode, k)).collect())
    } else {
        FlitBody::Opaque((0..mode.payload_bytes()).map(|_| rng.gen()).collect())
    };
    f
}

/// A 68B all-data flit with random contents.
pub fn random_all_data<R: Rng>(rng: &mut R) -> Flit {
    let mut d = [[0u8; SLOT_BYTES]; 4];
    for s in &mut d {
        rng.fill(s);
    }
    Flit::all_data(d)
}
