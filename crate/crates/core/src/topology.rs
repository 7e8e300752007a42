//! Static network graph: nodes, bidirectional capacity-labelled links and
//! the line-oriented topology file format.
//!
//! Grammar (one directive per line, `#` starts a comment, blank lines are
//! ignored):
//!
//! ```text
//! node <id>
//! link <a> <b> <capacity_bps>
//! ```
//!
//! Every `node` line must precede the `link` lines that reference it, node
//! ids must form the dense range `0..N`, and any other directive is a parse
//! error.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

/// The default eight-node topology shipped with the crate.
pub const NETWORK1: &str = include_str!("../topologies/network1.topo");

/// Source/destination pair used by the single-flow experiments on [`NETWORK1`].
pub const NETWORK1_MEASUREMENT_PAIR: (NodeId, NodeId) = (NodeId(0), NodeId(2));

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(NodeId)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Bidirectional link. Each direction is an independent channel with the
/// same capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    /// Bits per second.
    pub capacity: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TopologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("node ids are not dense: node {0} is missing")]
    MissingNode(NodeId),
    #[error("link references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate link {0}-{1}")]
    DuplicateLink(NodeId, NodeId),
    #[error("link {0}-{1} has non-positive capacity {2}")]
    NonPositiveCapacity(NodeId, NodeId, f64),
    #[error("graph is disconnected: node {0} is unreachable from node 0")]
    Disconnected(NodeId),
    #[error("topology has no nodes")]
    Empty,
    #[error("no link between {0} and {1}")]
    NoSuchLink(NodeId, NodeId),
}

#[derive(Debug, Clone)]
pub struct Topology {
    links: Vec<Link>,
    adjacency: Vec<BTreeSet<NodeId>>,
    capacities: BTreeMap<(NodeId, NodeId), f64>,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Topology {
    /// Builds and validates a topology from an explicit node count and link
    /// list.
    pub fn new(node_count: usize, links: Vec<Link>) -> Result<Self, TopologyError> {
        if node_count == 0 {
            return Err(TopologyError::Empty);
        }
        let mut adjacency = vec![BTreeSet::new(); node_count];
        let mut capacities = BTreeMap::new();
        for l in &links {
            for n in [l.a, l.b] {
                if n.index() >= node_count {
                    return Err(TopologyError::UnknownNode(n));
                }
            }
            if l.a == l.b {
                return Err(TopologyError::SelfLoop(l.a));
            }
            if !(l.capacity > 0.0) || !l.capacity.is_finite() {
                return Err(TopologyError::NonPositiveCapacity(l.a, l.b, l.capacity));
            }
            if capacities.insert(key(l.a, l.b), l.capacity).is_some() {
                return Err(TopologyError::DuplicateLink(l.a, l.b));
            }
            adjacency[l.a.index()].insert(l.b);
            adjacency[l.b.index()].insert(l.a);
        }
        let topo = Topology {
            links,
            adjacency,
            capacities,
        };
        if let Some(n) = topo.first_unreachable() {
            return Err(TopologyError::Disconnected(n));
        }
        Ok(topo)
    }

    /// Parses the topology file format described in the module docs.
    pub fn parse(source: &str) -> Result<Self, TopologyError> {
        let mut declared: BTreeSet<NodeId> = BTreeSet::new();
        let mut links = Vec::new();
        for (idx, raw) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| TopologyError::Parse { line: line_no, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let node_arg = |s: &str| {
                s.parse::<NodeId>()
                    .map_err(|_| parse_err(format!("invalid node id `{s}`")))
            };
            match fields[0] {
                "node" => {
                    if fields.len() != 2 {
                        return Err(parse_err("expected `node <id>`".into()));
                    }
                    let id = node_arg(fields[1])?;
                    if !declared.insert(id) {
                        return Err(TopologyError::DuplicateNode(id));
                    }
                }
                "link" => {
                    if fields.len() != 4 {
                        return Err(parse_err("expected `link <a> <b> <capacity_bps>`".into()));
                    }
                    let a = node_arg(fields[1])?;
                    let b = node_arg(fields[2])?;
                    let capacity: f64 = fields[3]
                        .parse()
                        .map_err(|_| parse_err(format!("invalid capacity `{}`", fields[3])))?;
                    for n in [a, b] {
                        if !declared.contains(&n) {
                            return Err(TopologyError::UnknownNode(n));
                        }
                    }
                    links.push(Link { a, b, capacity });
                }
                other => return Err(parse_err(format!("unknown directive `{other}`"))),
            }
        }
        let count = declared.len();
        if let Some(missing) = (0..count as u32).map(NodeId).find(|n| !declared.contains(n)) {
            return Err(TopologyError::MissingNode(missing));
        }
        Topology::new(count, links)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.adjacency.len() as u32).map(NodeId)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn contains(&self, k: NodeId) -> bool {
        k.index() < self.adjacency.len()
    }

    pub fn neighbors(&self, k: NodeId) -> Result<&BTreeSet<NodeId>, TopologyError> {
        self.adjacency
            .get(k.index())
            .ok_or(TopologyError::UnknownNode(k))
    }

    /// Capacity of the link between `k` and `i`; symmetric in its arguments.
    pub fn link_capacity(&self, k: NodeId, i: NodeId) -> Result<f64, TopologyError> {
        self.capacities
            .get(&key(k, i))
            .copied()
            .ok_or(TopologyError::NoSuchLink(k, i))
    }

    /// Capacities of every link incident to `k`, keyed by neighbour.
    pub fn incident_capacities(&self, k: NodeId) -> BTreeMap<NodeId, f64> {
        self.adjacency[k.index()]
            .iter()
            .map(|&i| (i, self.capacities[&key(k, i)]))
            .collect()
    }

    /// Directed channels, two per physical link, in deterministic order.
    pub fn directed_links(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.links.len() * 2);
        for (k, nbrs) in self.adjacency.iter().enumerate() {
            for &i in nbrs {
                out.push((NodeId(k as u32), i));
            }
        }
        out
    }

    fn first_unreachable(&self) -> Option<NodeId> {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([NodeId(0)]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for &i in &self.adjacency[k.index()] {
                if !seen[i.index()] {
                    seen[i.index()] = true;
                    queue.push_back(i);
                }
            }
        }
        seen.iter().position(|s| !s).map(|p| NodeId(p as u32))
    }

    pub fn is_connected(&self) -> bool {
        self.first_unreachable().is_none()
    }

    /// Maximum number of internally node-disjoint paths between `s` and `t`
    /// (unit-capacity max-flow on the vertex-split graph). Adjacent pairs
    /// count their direct link as one path.
    pub fn node_disjoint_paths(&self, s: NodeId, t: NodeId) -> usize {
        if s == t {
            return 0;
        }
        let n = self.node_count();
        // in(v) = 2v, out(v) = 2v + 1
        let size = 2 * n;
        let mut cap = vec![vec![0i32; size]; size];
        for v in 0..n {
            let inner = if v == s.index() || v == t.index() { n as i32 } else { 1 };
            cap[2 * v][2 * v + 1] = inner;
        }
        for (k, nbrs) in self.adjacency.iter().enumerate() {
            for &i in nbrs {
                cap[2 * k + 1][2 * i.index()] = 1;
            }
        }
        let source = 2 * s.index() + 1;
        let sink = 2 * t.index();
        let mut flow = 0;
        loop {
            let mut parent = vec![usize::MAX; size];
            parent[source] = source;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                for v in 0..size {
                    if parent[v] == usize::MAX && cap[u][v] > 0 {
                        parent[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if parent[sink] == usize::MAX {
                return flow;
            }
            let mut v = sink;
            while v != source {
                let u = parent[v];
                cap[u][v] -= 1;
                cap[v][u] += 1;
                v = u;
            }
            flow += 1;
        }
    }

    /// Serialises back into the topology file format.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for n in self.nodes() {
            s.push_str(&format!("node {n}\n"));
        }
        for l in &self.links {
            s.push_str(&format!("link {} {} {}\n", l.a, l.b, l.capacity));
        }
        s
    }

    /// Path graph `0 - 1 - ... - (n-1)` with uniform capacity.
    pub fn path(n: usize, capacity: f64) -> Result<Self, TopologyError> {
        let links = (1..n as u32)
            .map(|i| Link {
                a: NodeId(i - 1),
                b: NodeId(i),
                capacity,
            })
            .collect();
        Topology::new(n, links)
    }

    /// Random connected topology: a random spanning tree plus up to
    /// `extra_links` additional distinct links. Capacities are drawn from
    /// `capacities`.
    pub fn random_connected<R: Rng + ?Sized>(
        n: usize,
        extra_links: usize,
        capacities: &[f64],
        rng: &mut R,
    ) -> Self {
        assert!(n >= 1 && !capacities.is_empty());
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.shuffle(rng);
        let mut present = BTreeSet::new();
        let mut links = Vec::new();
        let mut add = |a: u32, b: u32, rng: &mut R, links: &mut Vec<Link>| {
            let k = key(NodeId(a), NodeId(b));
            if a != b && present.insert(k) {
                links.push(Link {
                    a: k.0,
                    b: k.1,
                    capacity: capacities[rng.random_range(0..capacities.len())],
                });
            }
        };
        for i in 1..n {
            let j = rng.random_range(0..i);
            add(order[i], order[j], rng, &mut links);
        }
        let max_links = n * (n - 1) / 2;
        let mut attempts = 0;
        while links.len() < (n - 1 + extra_links).min(max_links) && attempts < 100 * n * n {
            attempts += 1;
            let a = rng.random_range(0..n as u32);
            let b = rng.random_range(0..n as u32);
            add(a, b, rng, &mut links);
        }
        Topology::new(n, links).expect("spanning tree construction is always connected")
    }
}
