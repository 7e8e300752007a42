//! Neighbour table and main table rows, plus the link-level capacity
//! arithmetic they are built from.

use std::collections::{BTreeMap, BTreeSet};

use crate::topology::NodeId;

use super::ProtocolError;

/// One row of the neighbour table: `[j, C_kj, u_kj]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEntry {
    pub neighbor: NodeId,
    /// Bits per second.
    pub link_capacity: f64,
    /// Busy fraction of the queue towards `neighbor`, in `[0, 1]`.
    pub utilization: f64,
}

impl NeighborEntry {
    pub fn available_capacity(&self) -> f64 {
        available_capacity(self.utilization, self.link_capacity)
    }
}

/// One row of the main table. The backward set is implicit: every
/// neighbour not in `forward_set`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DestinationEntry {
    pub destination: NodeId,
    pub forward_set: BTreeSet<NodeId>,
    /// Capacity to the destination via each forward neighbour.
    pub per_forward_capacity: BTreeMap<NodeId, f64>,
    /// Sum of `per_forward_capacity`.
    pub total_capacity: f64,
    /// Latest backward-tagged announcement from each neighbour.
    pub learned_backward_capacity: BTreeMap<NodeId, f64>,
    /// Latest forward-tagged (poisoned) announcement from each neighbour.
    pub learned_forward_capacity: BTreeMap<NodeId, f64>,
}

impl DestinationEntry {
    pub fn new(destination: NodeId) -> Self {
        DestinationEntry {
            destination,
            ..Default::default()
        }
    }

    pub fn is_forward(&self, n: NodeId) -> bool {
        self.forward_set.contains(&n)
    }

    /// Fresh sum of the per-forward capacities.
    pub fn summed_capacity(&self) -> f64 {
        self.per_forward_capacity.values().sum()
    }

    /// Records an announcement; a neighbour has at most one live tag.
    pub(crate) fn learn(&mut self, from: NodeId, capacity: f64, backward: bool) {
        if backward {
            self.learned_forward_capacity.remove(&from);
            self.learned_backward_capacity.insert(from, capacity);
        } else {
            self.learned_backward_capacity.remove(&from);
            self.learned_forward_capacity.insert(from, capacity);
        }
    }

    pub(crate) fn forget(&mut self, n: NodeId) {
        self.forward_set.remove(&n);
        self.per_forward_capacity.remove(&n);
        self.learned_backward_capacity.remove(&n);
        self.learned_forward_capacity.remove(&n);
    }
}

/// Busy-time ratio over an observation window, clamped to `[0, 1]`.
pub fn utilization_from_busy_time(busy: f64, window: f64) -> Result<f64, ProtocolError> {
    if !(window > 0.0) {
        return Err(ProtocolError::EmptyWindow);
    }
    Ok((busy / window).clamp(0.0, 1.0))
}

/// `(1 - u) * c`.
pub fn available_capacity(utilization: f64, capacity: f64) -> f64 {
    (1.0 - utilization) * capacity
}
