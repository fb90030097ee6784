//! Protocol dependence graph and deadlock-freedom check.
//!
//! Nodes are channel groups; an edge `a -> b` means traffic on `a` may block
//! waiting for `b` to make progress. The configuration is deadlock free when
//! the graph has no cycle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    /// CXL.cache D2H Req.
    L1Req,
    /// CXL.cache H2D Req (snoops).
    L1Snp,
    /// CXL.cache H2D/D2H Rsp and Data, pre-allocated.
    L1Rsp,
    L2Req,
    L2Snp,
    L2Rsp,
    /// CXL.mem M2S Req.
    L3Req,
    /// CXL.mem M2S RwD.
    L3RwD,
    /// CXL.mem S2M NDR/DRS and M2S BIRsp, pre-allocated.
    L3Rsp,
    /// CXL.mem S2M BISnp.
    L3BISnp,
}

impl Node {
    pub const ALL: [Node; 10] = [
        Node::L1Req,
        Node::L1Snp,
        Node::L1Rsp,
        Node::L2Req,
        Node::L2Snp,
        Node::L2Rsp,
        Node::L3Req,
        Node::L3RwD,
        Node::L3Rsp,
        Node::L3BISnp,
    ];
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Node::L1Req => "L1-Req",
            Node::L1Snp => "L1-Snp",
            Node::L1Rsp => "L1-Rsp",
            Node::L2Req => "L2-Req",
            Node::L2Snp => "L2-Snp",
            Node::L2Rsp => "L2-Rsp",
            Node::L3Req => "L3-Req",
            Node::L3RwD => "L3-RwD",
            Node::L3Rsp => "L3-Rsp",
            Node::L3BISnp => "L3-BISnp",
        })
    }
}

/// Which protocol levels are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LevelSet {
    pub cache: bool,
    pub host_l2: bool,
    pub mem: bool,
    pub back_invalidate: bool,
}

impl LevelSet {
    pub const CXL11: LevelSet = LevelSet {
        cache: true,
        host_l2: true,
        mem: true,
        back_invalidate: false,
    };
    pub const CXL20: LevelSet = LevelSet::CXL11;
    pub const CXL30: LevelSet = LevelSet {
        cache: true,
        host_l2: true,
        mem: true,
        back_invalidate: true,
    };
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DependenceGraph {
    edges: BTreeMap<Node, BTreeSet<Node>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Acyclic,
    /// Node sequence of a cycle; the first node is repeated implicitly.
    Cycle(Vec<Node>),
}

impl Verdict {
    pub fn is_acyclic(&self) -> bool {
        matches!(self, Verdict::Acyclic)
    }
}

impl DependenceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, n: Node) {
        self.edges.entry(n).or_default();
    }

    pub fn add_edge(&mut self, from: Node, to: Node) {
        self.add_node(to);
        self.edges.entry(from).or_default().insert(to);
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.edges.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Node, Node)> + '_ {
        self.edges
            .iter()
            .flat_map(|(a, bs)| bs.iter().map(move |b| (*a, *b)))
    }

    pub fn successors(&self, n: Node) -> impl Iterator<Item = Node> + '_ {
        self.edges.get(&n).into_iter().flatten().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn check_acyclic(&self) -> Verdict {
        check_acyclic(self)
    }
}

pub fn build_dependence_graph(cfg: LevelSet) -> DependenceGraph {
    use Node::*;
    let mut g = DependenceGraph::new();
    if cfg.cache {
        // A request may need a snoop issued and completed before it finishes.
        g.add_edge(L1Req, L1Snp);
        g.add_edge(L1Req, L1Rsp);
        g.add_edge(L1Snp, L1Rsp);
    }
    if cfg.host_l2 {
        g.add_edge(L2Req, L2Snp);
        g.add_edge(L2Req, L2Rsp);
        g.add_edge(L2Snp, L2Rsp);
        if cfg.cache {
            g.add_edge(L1Req, L2Req);
            g.add_edge(L2Snp, L1Snp);
        }
    }
    if cfg.mem {
        g.add_edge(L3Req, L3Rsp);
        g.add_edge(L3RwD, L3Rsp);
        if cfg.host_l2 {
            g.add_edge(L2Req, L3Req);
            g.add_edge(L2Req, L3RwD);
        }
        if cfg.back_invalidate {
            // The device may need to back-invalidate host caches before
            // completing a request; BIRsp is folded into L3-Rsp.
            g.add_edge(L3Req, L3BISnp);
            g.add_edge(L3RwD, L3BISnp);
            g.add_edge(L3BISnp, L3Rsp);
        }
    }
    g
}

/// Iterative three-colour DFS; returns the first back-edge cycle found.
pub fn check_acyclic(g: &DependenceGraph) -> Verdict {
    #[derive(Clone, Copy, PartialEq)]
    enum Colour {
        White,
        Grey,
        Black,
    }
    let mut colour: BTreeMap<Node, Colour> = g.nodes().map(|n| (n, Colour::White)).collect();
    for root in g.nodes() {
        if colour[&root] != Colour::White {
            continue;
        }
        let mut path: Vec<Node> = vec![root];
        let mut iters: Vec<Vec<Node>> = vec![g.successors(root).collect()];
        colour.insert(root, Colour::Grey);
        while let Some(frontier) = iters.last_mut() {
            match frontier.pop() {
                Some(next) => match colour[&next] {
                    Colour::White => {
                        colour.insert(next, Colour::Grey);
                        path.push(next);
                        iters.push(g.successors(next).collect());
                    }
                    Colour::Grey => {
                        let start = path.iter().position(|&n| n == next).unwrap();
                        return Verdict::Cycle(path[start..].to_vec());
                    }
                    Colour::Black => {}
                },
                None => {
                    let done = path.pop().unwrap();
                    colour.insert(done, Colour::Black);
                    iters.pop();
                }
            }
        }
    }
    Verdict::Acyclic
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_graphs_are_acyclic() {
        for cfg in [LevelSet::CXL11, LevelSet::CXL20, LevelSet::CXL30] {
            assert_eq!(build_dependence_graph(cfg).check_acyclic(), Verdict::Acyclic);
        }
    }

    #[test]
    fn request_depends_on_snoop() {
        let g = build_dependence_graph(LevelSet::CXL11);
        assert!(g.successors(Node::L1Req).any(|n| n == Node::L1Snp));
        assert!(!g.nodes().any(|n| n == Node::L3BISnp));
        let g3 = build_dependence_graph(LevelSet::CXL30);
        assert!(g3.successors(Node::L3Req).any(|n| n == Node::L3BISnp));
    }

    #[test]
    fn empty_config_gives_empty_graph() {
        assert!(build_dependence_graph(LevelSet::default()).is_empty());
    }

    #[test]
    fn injected_response_to_request_edge_is_a_cycle() {
        let mut g = build_dependence_graph(LevelSet::CXL11);
        g.add_edge(Node::L3Rsp, Node::L3Req);
        match g.check_acyclic() {
            Verdict::Cycle(c) => {
                assert!(c.contains(&Node::L3Req));
                // consecutive nodes are real edges, and the cycle closes
                for w in c.windows(2) {
                    assert!(g.successors(w[0]).any(|n| n == w[1]));
                }
                assert!(g.successors(*c.last().unwrap()).any(|n| n == c[0]));
            }
            Verdict::Acyclic => panic!("cycle not found"),
        }
    }

    #[test]
    fn single_node_no_edges() {
        let mut g = DependenceGraph::new();
        g.add_node(Node::L1Req);
        assert!(g.check_acyclic().is_acyclic());
        g.add_edge(Node::L1Req, Node::L1Req);
        assert_eq!(g.check_acyclic(), Verdict::Cycle(vec![Node::L1Req]));
    }
}
