//! Data-plane next-hop selection.
//!
//! In multipath mode a packet goes to forward neighbour `i` with
//! probability `C_ki / C_k`, drawn independently per packet. The two
//! baselines run the same control plane but restrict the choice: single
//! path uses only the best successor, ECMP spreads uniformly over the
//! successors whose capacity ties with the best.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::protocol::DestinationEntry;
use crate::topology::NodeId;

pub const DEFAULT_ECMP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoutingMode {
    Mp,
    Sp,
    /// `tolerance` is relative to the best capacity.
    Ecmp { tolerance: f64 },
}

impl RoutingMode {
    pub fn ecmp() -> Self {
        RoutingMode::Ecmp {
            tolerance: DEFAULT_ECMP_TOLERANCE,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RoutingMode::Mp => "MP",
            RoutingMode::Sp => "SP",
            RoutingMode::Ecmp { .. } => "ECMP",
        }
    }

    /// MP, SP and ECMP (default tolerance), in that order.
    pub fn all() -> [RoutingMode; 3] {
        [RoutingMode::Mp, RoutingMode::Sp, RoutingMode::ecmp()]
    }
}

impl fmt::Display for RoutingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoutingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mp" => Ok(RoutingMode::Mp),
            "sp" => Ok(RoutingMode::Sp),
            "ecmp" => Ok(RoutingMode::ecmp()),
            other => Err(format!("unknown routing mode `{other}` (expected mp, sp or ecmp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitEntry {
    pub next_hop: NodeId,
    /// Capacity to the destination through `next_hop`.
    pub capacity: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitTable {
    pub destination: NodeId,
    /// Sorted by next hop.
    pub entries: Vec<SplitEntry>,
}

impl SplitTable {
    /// True when every ratio is zero (total capacity zero).
    pub fn is_degenerate(&self) -> bool {
        self.entries.iter().all(|e| e.ratio == 0.0)
    }
}

/// Split ratios for a main-table row. With zero total capacity every ratio
/// is zero and selection falls back to raw capacities.
pub fn split_table(entry: &DestinationEntry) -> SplitTable {
    let total = entry.total_capacity;
    let entries = entry
        .forward_set
        .iter()
        .map(|&i| {
            let capacity = entry.per_forward_capacity.get(&i).copied().unwrap_or(0.0);
            SplitEntry {
                next_hop: i,
                capacity,
                ratio: if total > 0.0 { capacity / total } else { 0.0 },
            }
        })
        .collect();
    SplitTable {
        destination: entry.destination,
        entries,
    }
}

/// Highest capacity, lowest node id among ties.
fn best_successor(table: &SplitTable) -> NodeId {
    let mut best = table.entries[0];
    for e in &table.entries[1..] {
        if e.capacity > best.capacity {
            best = *e;
        }
    }
    best.next_hop
}

/// Picks the next hop for one packet. Returns `None` only for an empty table.
pub fn select_next_hop<R: Rng + ?Sized>(
    table: &SplitTable,
    mode: RoutingMode,
    rng: &mut R,
) -> Option<NodeId> {
    if table.entries.is_empty() {
        return None;
    }
    if table.entries.len() == 1 {
        return Some(table.entries[0].next_hop);
    }
    let hop = match mode {
        RoutingMode::Sp => best_successor(table),
        RoutingMode::Mp => {
            let mass: f64 = table.entries.iter().map(|e| e.ratio).sum();
            if !(mass > 0.0) {
                return Some(best_successor(table));
            }
            let mut draw = rng.random::<f64>() * mass;
            let mut chosen = None;
            for e in &table.entries {
                if e.ratio <= 0.0 {
                    continue;
                }
                chosen = Some(e.next_hop);
                if draw < e.ratio {
                    break;
                }
                draw -= e.ratio;
            }
            chosen.expect("positive mass implies a positive ratio")
        }
        RoutingMode::Ecmp { tolerance } => {
            let best = table
                .entries
                .iter()
                .map(|e| e.capacity)
                .fold(f64::NEG_INFINITY, f64::max);
            if !(best > 0.0) {
                return Some(table.entries[0].next_hop);
            }
            let floor = best * (1.0 - tolerance);
            let tied: Vec<NodeId> = table
                .entries
                .iter()
                .filter(|e| e.capacity >= floor)
                .map(|e| e.next_hop)
                .collect();
            if tied.len() == 1 {
                tied[0]
            } else {
                tied[rng.random_range(0..tied.len())]
            }
        }
    };
    Some(hop)
}
