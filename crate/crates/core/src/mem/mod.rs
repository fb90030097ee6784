//! CXL.mem device side: HDM regions, per-line meta and poison, device
//! coherence (bias) for HDM-D, and the multi-host Back-Invalidate directory
//! for HDM-DB.

pub mod bi;
pub mod device;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use bi::{BiDevice, MultiHostSystem, SharerMode};
pub use device::{Bias, MemDevice, MemReq, MemResponse, MemSnoop};

/// Default pin-to-pin media access budget.
pub const DEFAULT_MEDIA_LATENCY_NS: u32 = 80;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("address {0:#x} is outside every HDM region of this device")]
    OutOfRange(u64),
    #[error("region {base:#x}+{size:#x} overlaps an existing region")]
    Overlap { base: u64, size: u64 },
    #[error("{kind} regions are not allowed on a {dtype} device")]
    KindNotAllowed { kind: HdmKind, dtype: DeviceType },
    #[error("host {0} did not answer a back-invalidate")]
    HostTimeout(u16),
    #[error("bad device attribute record: {0}")]
    BadAttr(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HdmKind {
    /// Host-only coherent.
    HdmH,
    /// Device coherent through bias flips.
    HdmD,
    /// Device coherent through Back-Invalidate.
    HdmDb,
}

impl fmt::Display for HdmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HdmKind::HdmH => "HDM-H",
            HdmKind::HdmD => "HDM-D",
            HdmKind::HdmDb => "HDM-DB",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeviceType {
    /// Caching accelerator with memory.
    Type2,
    /// Memory expander.
    Type3,
}

impl fmt::Display for DeviceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceType::Type2 => "Type-2",
            DeviceType::Type3 => "Type-3",
        })
    }
}

impl FromStr for DeviceType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "2" | "type2" | "type-2" | "t2" => Ok(DeviceType::Type2),
            "3" | "type3" | "type-3" | "t3" => Ok(DeviceType::Type3),
            _ => Err(format!("unknown device type {s}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HdmRegion {
    pub base: u64,
    pub size: u64,
    pub kind: HdmKind,
    pub owner: u16,
}

impl HdmRegion {
    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr - self.base < self.size
    }

    fn overlaps(&self, o: &HdmRegion) -> bool {
        self.base < o.base + o.size && o.base < self.base + self.size
    }
}

/// Host-side set of programmed HDM decoders; regions never overlap.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RegionMap {
    regions: Vec<HdmRegion>,
}

impl RegionMap {
    pub fn insert(&mut self, r: HdmRegion) -> Result<(), MemError> {
        if r.size == 0 || self.regions.iter().any(|o| o.overlaps(&r)) {
            return Err(MemError::Overlap { base: r.base, size: r.size });
        }
        self.regions.push(r);
        self.regions.sort_by_key(|r| r.base);
        Ok(())
    }

    pub fn find(&self, addr: u64) -> Option<&HdmRegion> {
        self.regions.iter().find(|r| r.contains(addr))
    }

    pub fn regions(&self) -> &[HdmRegion] {
        &self.regions
    }
}

/// Device attribute record used to program HDM decoders.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DevAttr {
    pub device: u16,
    pub latency_ns: u32,
    pub bandwidth_gbs: f64,
    pub size_mb: u64,
}

impl fmt::Display for DevAttr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "DEVATTR device={} latency_ns={} bandwidth_gbs={} size_mb={}",
            self.device, self.latency_ns, self.bandwidth_gbs, self.size_mb
        )
    }
}

impl FromStr for DevAttr {
    type Err = MemError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MemError::BadAttr(s.to_string());
        let mut it = s.split_whitespace();
        if it.next() != Some("DEVATTR") {
            return Err(bad());
        }
        let (mut device, mut lat, mut bw, mut size) = (None, None, None, None);
        for kv in it {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            match k {
                "device" => device = Some(v.parse().map_err(|_| bad())?),
                "latency_ns" => lat = Some(v.parse().map_err(|_| bad())?),
                "bandwidth_gbs" => bw = Some(v.parse().map_err(|_| bad())?),
                "size_mb" => size = Some(v.parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        Ok(DevAttr {
            device: device.ok_or_else(bad)?,
            latency_ns: lat.ok_or_else(bad)?,
            bandwidth_gbs: bw.ok_or_else(bad)?,
            size_mb: size.ok_or_else(bad)?,
        })
    }
}

/// HDM decoder alignment.
pub const HDM_ALIGN: u64 = 256 << 20;

/// Assigns each device a free, aligned HPA range starting at `base`.
pub fn program_hdm_decoders(attrs: &[DevAttr], base: u64, kind: HdmKind) -> Result<RegionMap, MemError> {
    let mut map = RegionMap::default();
    let mut next = base.next_multiple_of(HDM_ALIGN);
    for a in attrs {
        let size = (a.size_mb << 20).next_multiple_of(HDM_ALIGN);
        map.insert(HdmRegion {
            base: next,
            size,
            kind,
            owner: a.device,
        })?;
        next += size;
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn devattr_roundtrip() {
        let line = "DEVATTR device=3 latency_ns=170 bandwidth_gbs=64 size_mb=1024";
        let a: DevAttr = line.parse().unwrap();
        assert_eq!(a.device, 3);
        assert_eq!(a.to_string(), line);
        assert!("DEVATTR device=3".parse::<DevAttr>().is_err());
    }

    #[test]
    fn decoders_are_disjoint_and_aligned() {
        let attrs = [
            DevAttr { device: 0, latency_ns: 170, bandwidth_gbs: 64.0, size_mb: 100 },
            DevAttr { device: 1, latency_ns: 250, bandwidth_gbs: 32.0, size_mb: 512 },
        ];
        let m = program_hdm_decoders(&attrs, 1 << 32, HdmKind::HdmH).unwrap();
        let r = m.regions();
        assert_eq!(r[0].base % HDM_ALIGN, 0);
        assert_eq!(r[1].base, r[0].base + r[0].size);
        assert_eq!(m.find(r[1].base).unwrap().owner, 1);
    }

    #[test]
    fn overlap_rejected() {
        let mut m = RegionMap::default();
        let r = HdmRegion { base: 0, size: 4096, kind: HdmKind::HdmH, owner: 0 };
        m.insert(r).unwrap();
        assert!(m.insert(HdmRegion { base: 2048, ..r }).is_err());
    }
}
