//! Line-oriented topology files.
//!
//! ```text
//! HOST h0
//! SWITCH s0
//! DEVICE d0 type=3 kind=MLD lds=2 [size_mb=2048]
//! LINK h0 s0 width=16 gts=32 [retimer]
//! FAST s0 base=0x100000000 segsize=0x40000000 map=2,3
//! BIND s0 0 1 [ld]
//! UNBIND s0 0 FORCE
//! SETLD d0 256 4,4
//! ```
//!
//! Switch ports are numbered per switch in LINK order. FM command lines
//! are kept in order and replayed by [`super::Fabric::new`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::pbr::FastTable;
use super::FabricError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DevKind {
    Sld,
    Mld,
    Gfd,
}

impl FromStr for DevKind {
    type Err = FabricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SLD" => Ok(DevKind::Sld),
            "MLD" => Ok(DevKind::Mld),
            "GFD" => Ok(DevKind::Gfd),
            _ => Err(FabricError::BadConfig(format!("unknown device kind {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Host,
    Switch,
    Device { dtype: u8, kind: DevKind, lds: u8, size_mb: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// 12-bit fabric id; switches have none.
    pub pid: Option<u16>,
}

impl Node {
    pub fn is_switch(&self) -> bool {
        self.kind == NodeKind::Switch
    }

    pub fn is_host(&self) -> bool {
        self.kind == NodeKind::Host
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkEnd {
    pub node: usize,
    /// Port number on a switch; 0 on hosts and devices.
    pub port: u16,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub a: LinkEnd,
    pub b: LinkEnd,
    pub width: u8,
    pub gts: u32,
    pub retimer: bool,
    pub up: bool,
}

impl Link {
    pub fn other(&self, node: usize) -> LinkEnd {
        if self.a.node == node {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnbindOption {
    Wait,
    HotRemoveWait,
    Force,
}

impl FromStr for UnbindOption {
    type Err = FabricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "WAIT" => Ok(UnbindOption::Wait),
            "HOT_REMOVE_WAIT" => Ok(UnbindOption::HotRemoveWait),
            "FORCE" => Ok(UnbindOption::Force),
            _ => Err(FabricError::BadConfig(format!("unknown unbind option {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FmCommand {
    Bind { switch: String, vppb: u16, port: u16, ld: Option<u8> },
    Unbind { switch: String, vppb: u16, option: UnbindOption },
    /// Partition `device` into LDs of `ranges[i]` granules each.
    SetLd { device: String, gran_mb: u64, ranges: Vec<u64> },
    /// Switch state query.
    Query { switch: String },
    /// Any other CCI op; accepted and answered with a capability record.
    Other(String),
}

impl fmt::Display for FmCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FmCommand::Bind { switch, vppb, port, ld } => {
                write!(f, "BIND {switch} {vppb} {port}")?;
                match ld {
                    Some(ld) => write!(f, " {ld}"),
                    None => Ok(()),
                }
            }
            FmCommand::Unbind { switch, vppb, option } => {
                let o = match option {
                    UnbindOption::Wait => "WAIT",
                    UnbindOption::HotRemoveWait => "HOT_REMOVE_WAIT",
                    UnbindOption::Force => "FORCE",
                };
                write!(f, "UNBIND {switch} {vppb} {o}")
            }
            FmCommand::SetLd { device, gran_mb, ranges } => {
                let r: Vec<String> = ranges.iter().map(u64::to_string).collect();
                write!(f, "SETLD {device} {gran_mb} {}", r.join(","))
            }
            FmCommand::Query { switch } => write!(f, "QUERY {switch}"),
            FmCommand::Other(op) => write!(f, "CCI {op}"),
        }
    }
}

fn bad(n: usize, line: &str) -> FabricError {
    FabricError::BadConfig(format!("line {n}: {line}"))
}

pub fn parse_fm_command(line: &str) -> Result<Option<FmCommand>, FabricError> {
    let f: Vec<&str> = line.split_whitespace().collect();
    let e = || FabricError::BadConfig(line.to_string());
    let num = |s: &str| s.parse::<u16>().map_err(|_| e());
    Ok(Some(match f.as_slice() {
        ["BIND", sw, vppb, port] => FmCommand::Bind { switch: sw.to_string(), vppb: num(vppb)?, port: num(port)?, ld: None },
        ["BIND", sw, vppb, port, ld] => FmCommand::Bind {
            switch: sw.to_string(),
            vppb: num(vppb)?,
            port: num(port)?,
            ld: Some(ld.parse().map_err(|_| e())?),
        },
        ["UNBIND", sw, vppb, opt] => FmCommand::Unbind { switch: sw.to_string(), vppb: num(vppb)?, option: opt.parse()? },
        ["SETLD", dev, gran, ranges] => FmCommand::SetLd {
            device: dev.to_string(),
            gran_mb: gran.parse().map_err(|_| e())?,
            ranges: ranges.split(',').map(|r| r.parse().map_err(|_| e())).collect::<Result<_, _>>()?,
        },
        ["QUERY", sw] => FmCommand::Query { switch: sw.to_string() },
        ["CCI", op] => FmCommand::Other(op.to_string()),
        _ => return Ok(None),
    }))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    /// FAST per switch node.
    pub fast: BTreeMap<usize, FastTable>,
    pub script: Vec<FmCommand>,
}

fn kv<'a>(fields: &[&'a str]) -> BTreeMap<&'a str, &'a str> {
    fields.iter().filter_map(|f| f.split_once('=')).collect()
}

fn hex(s: &str) -> Option<u64> {
    match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

impl Topology {
    pub fn node(&self, name: &str) -> Result<usize, FabricError> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| FabricError::UnknownEntity(name.to_string()))
    }

    pub fn add_node(&mut self, name: &str, kind: NodeKind) -> usize {
        let pid = if kind == NodeKind::Switch {
            None
        } else {
            Some(self.nodes.iter().filter(|n| n.pid.is_some()).count() as u16)
        };
        self.nodes.push(Node { name: name.to_string(), kind, pid });
        self.nodes.len() - 1
    }

    pub fn add_link(&mut self, a: usize, b: usize, width: u8, gts: u32, retimer: bool) -> usize {
        let end = |t: &Topology, n: usize| LinkEnd { node: n, port: t.ports(n).len() as u16 };
        let link = Link { a: end(self, a), b: end(self, b), width, gts, retimer, up: true };
        self.links.push(link);
        self.links.len() - 1
    }

    /// Link indices attached to `node`, in port order.
    pub fn ports(&self, node: usize) -> Vec<usize> {
        let mut v: Vec<(u16, usize)> = self
            .links
            .iter()
            .enumerate()
            .filter_map(|(i, l)| {
                if l.a.node == node {
                    Some((l.a.port, i))
                } else if l.b.node == node {
                    Some((l.b.port, i))
                } else {
                    None
                }
            })
            .collect();
        v.sort();
        v.into_iter().map(|x| x.1).collect()
    }

    /// The link behind `port` of a switch.
    pub fn port_link(&self, switch: usize, port: u16) -> Option<usize> {
        self.ports(switch).get(port as usize).copied()
    }

    /// What sits behind a switch port.
    pub fn peer(&self, switch: usize, port: u16) -> Option<LinkEnd> {
        self.port_link(switch, port).map(|l| self.links[l].other(switch))
    }

    pub fn by_pid(&self, pid: u16) -> Option<usize> {
        self.nodes.iter().position(|n| n.pid == Some(pid))
    }

    pub fn parse(text: &str) -> Result<Topology, FabricError> {
        let mut t = Topology::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let n = i + 1;
            if let Some(cmd) = parse_fm_command(line)? {
                t.script.push(cmd);
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                ["HOST", name] => {
                    t.add_node(name, NodeKind::Host);
                }
                ["SWITCH", name] => {
                    t.add_node(name, NodeKind::Switch);
                }
                ["DEVICE", name, rest @ ..] => {
                    let m = kv(rest);
                    let dtype: u8 = m.get("type").and_then(|v| v.parse().ok()).ok_or_else(|| bad(n, raw))?;
                    if !(1..=3).contains(&dtype) {
                        return Err(bad(n, raw));
                    }
                    let kind: DevKind = m.get("kind").copied().unwrap_or("SLD").parse()?;
                    let lds: u8 = m.get("lds").map(|v| v.parse()).transpose().map_err(|_| bad(n, raw))?.unwrap_or(1);
                    if lds == 0 || usize::from(lds) > super::MAX_LDS || (kind != DevKind::Mld && lds != 1) {
                        return Err(FabricError::TooManyLds(usize::from(lds)));
                    }
                    let size_mb = m.get("size_mb").map(|v| v.parse()).transpose().map_err(|_| bad(n, raw))?.unwrap_or(1024);
                    t.add_node(name, NodeKind::Device { dtype, kind, lds, size_mb });
                }
                ["LINK", a, b, rest @ ..] => {
                    let (a, b) = (t.node(a)?, t.node(b)?);
                    let m = kv(rest);
                    let width = m.get("width").and_then(|v| v.parse().ok()).unwrap_or(16);
                    let gts = m.get("gts").and_then(|v| v.parse().ok()).unwrap_or(32);
                    if ![1, 2, 4, 8, 16].contains(&width) || ![32, 64].contains(&gts) {
                        return Err(bad(n, raw));
                    }
                    let retimer = rest.contains(&"retimer");
                    t.add_link(a, b, width, gts, retimer);
                }
                ["FAST", sw, rest @ ..] => {
                    let s = t.node(sw)?;
                    let m = kv(rest);
                    let base = m.get("base").and_then(|v| hex(v)).ok_or_else(|| bad(n, raw))?;
                    let seg = m.get("segsize").and_then(|v| hex(v)).ok_or_else(|| bad(n, raw))?;
                    let map = m
                        .get("map")
                        .ok_or_else(|| bad(n, raw))?
                        .split(',')
                        .map(|p| p.parse::<u16>().map_err(|_| bad(n, raw)))
                        .collect::<Result<Vec<_>, _>>()?;
                    t.fast.insert(s, FastTable::new(base, seg, map)?);
                }
                _ => return Err(bad(n, raw)),
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG: &str = "HOST h0\nHOST h1\nSWITCH s0\nDEVICE d0 type=3 kind=SLD\nDEVICE d1 type=3 kind=MLD lds=2\n\
        LINK h0 s0 width=16 gts=32\nLINK h1 s0 width=16 gts=32\nLINK s0 d0 width=16 gts=32\nLINK s0 d1 width=16 gts=32 retimer\n\
        BIND s0 0 2\nBIND s0 1 3 0\n";

    #[test]
    fn parses_nodes_links_and_script() {
        let t = Topology::parse(FIG).unwrap();
        assert_eq!(t.nodes.len(), 5);
        let s0 = t.node("s0").unwrap();
        assert_eq!(t.peer(s0, 3).unwrap().node, t.node("d1").unwrap());
        assert!(t.links[3].retimer);
        assert_eq!(t.script.len(), 2);
        assert_eq!(t.script[1].to_string(), "BIND s0 1 3 0");
        assert_eq!(t.nodes[t.node("d0").unwrap()].pid, Some(2));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Topology::parse("HOST").is_err());
        assert!(Topology::parse("DEVICE d type=4").is_err());
        assert!(Topology::parse("DEVICE d type=3 kind=MLD lds=17").is_err());
        assert!(Topology::parse("LINK a b").is_err());
    }
}
