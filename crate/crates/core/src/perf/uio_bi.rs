//! Link traffic of device accesses to host-managed device memory: the host
//! bounce flow against direct UIO with Back-Invalidate snoops.
//!
//! CXL.io traffic is counted in DW with 10% framing overhead. CXL.mem
//! traffic is counted in 16-byte slots (4 DW each) with 1/15 overhead.

use super::PerfError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UioBiMix {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UioBiParams {
    /// Hops between device and CPU.
    pub a: u32,
    /// Hops between CPU and memory.
    pub b: u32,
    /// Hops between device and memory.
    pub c: u32,
    /// Payload in DW.
    pub d: u32,
    /// Fraction of accesses needing a BISnp.
    pub x: f64,
}

impl UioBiParams {
    fn check(&self) -> Result<(), PerfError> {
        if self.a == 0 || self.b == 0 || self.c == 0 {
            return Err(PerfError::Domain("hop counts must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(PerfError::Domain("payload must be at least 1 DW".into()));
        }
        if !(0.0..=1.0).contains(&self.x) {
            return Err(PerfError::Domain(format!("BI fraction {} outside [0, 1]", self.x)));
        }
        Ok(())
    }
}

const IO_OVERHEAD: f64 = 1.1;
const SLOT_DW: f64 = 4.0 * 16.0 / 15.0;

fn total(io_dw: f64, slots: f64) -> f64 {
    io_dw * IO_OVERHEAD + slots * SLOT_DW
}

/// Existing-flow DW divided by UIO/BI-flow DW.
pub fn uio_bi_tradeoff(p: &UioBiParams, mix: UioBiMix) -> Result<f64, PerfError> {
    p.check()?;
    let (a, b, c, d, x) = (f64::from(p.a), f64::from(p.b), f64::from(p.c), f64::from(p.d), p.x);
    let lines = f64::from(p.d.div_ceil(16));
    let (existing, bi) = match mix {
        UioBiMix::Read => (
            // MemRd out, completion back; then MemRd per line and DRS + 4 data
            total(5.0 * a + (4.0 + d) * a, b * lines + 5.0 * b * lines),
            // BIRsp packs three to a slot
            total(5.0 * c + (4.0 + d) * c, x / 3.0 * c * lines + x * c * lines),
        ),
        UioBiMix::Write => (
            // Rd + Wr requests and 4 data out; DRS + NDR + data back
            total((5.0 + d) * a + 4.0 * a, 6.0 * b * lines + 14.0 / 3.0 * b * lines),
            // Req, a third of a BIRsp slot and 4 data; BISnp shares with NDR
            total((5.0 + d) * c + 4.0 * c, 16.0 / 3.0 * x * c * lines + x * c * lines),
        ),
    };
    Ok(existing / bi)
}
