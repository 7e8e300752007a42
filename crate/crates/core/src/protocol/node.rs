//! Per-router state machine.
//!
//! Handlers mutate the state in place and return the effects (packets to
//! send, timers to arm) for the driver to carry out. Time only enters
//! through the `now` argument; the state never reads a clock.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use log::{debug, info, warn};

use crate::topology::NodeId;

use super::config::ProtocolConfig;
use super::packet::{ControlPacket, Direction, RequestId, UpdateEntry, Verdict};
use super::tables::{DestinationEntry, NeighborEntry};
use super::ProtocolError;

/// Absolute tolerance, in bits per second, for capacity sums in invariant checks.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimerKind {
    Hello,
    NeighborUpdate,
    NeighborRemove(NodeId),
    Timeout(NodeId),
    Move {
        destination: NodeId,
        neighbor: NodeId,
    },
}

impl fmt::Display for TimerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimerKind::Hello => write!(f, "HELLO"),
            TimerKind::NeighborUpdate => write!(f, "UPDATE"),
            TimerKind::NeighborRemove(j) => write!(f, "REMOVE\t{j}"),
            TimerKind::Timeout(j) => write!(f, "TIMEOUT\t{j}"),
            TimerKind::Move {
                destination,
                neighbor,
            } => write!(f, "MOVE\t{destination}\t{neighbor}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Send { to: NodeId, packet: ControlPacket },
    Arm { timer: TimerKind, at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingMove {
    pub request_id: RequestId,
    pub deadline: f64,
}

/// Handshake counters, mostly for diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub requests_sent: u64,
    pub requests_resent: u64,
    pub requests_accepted: u64,
    pub requests_rejected: u64,
    pub moves_committed: u64,
    pub moves_declined: u64,
    /// Accepted moves the requester refused to commit because the cycle
    /// guard reported a forwarding loop.
    pub guard_blocked: u64,
    pub stale_responses: u64,
    pub ignored_packets: u64,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    id: NodeId,
    config: ProtocolConfig,
    neighbor_table: BTreeMap<NodeId, NeighborEntry>,
    main_table: BTreeMap<NodeId, DestinationEntry>,
    pending_moves: BTreeMap<(NodeId, NodeId), PendingMove>,
    holddown: BTreeMap<(NodeId, NodeId), f64>,
    timer_deadlines: BTreeMap<TimerKind, f64>,
    next_request_id: u64,
    stats: NodeStats,
}

fn via_capacity(
    neighbors: &BTreeMap<NodeId, NeighborEntry>,
    entry: &DestinationEntry,
    via: NodeId,
) -> f64 {
    let avail = neighbors
        .get(&via)
        .map(NeighborEntry::available_capacity)
        .unwrap_or(0.0);
    if via == entry.destination {
        avail
    } else {
        let downstream = entry
            .learned_backward_capacity
            .get(&via)
            .copied()
            .unwrap_or(0.0);
        avail.min(downstream)
    }
}

impl NodeState {
    /// Fresh router: every neighbour is a known destination reached directly.
    pub fn new(id: NodeId, capacities: &BTreeMap<NodeId, f64>, config: ProtocolConfig) -> Self {
        let neighbor_table: BTreeMap<_, _> = capacities
            .iter()
            .map(|(&j, &c)| {
                (
                    j,
                    NeighborEntry {
                        neighbor: j,
                        link_capacity: c,
                        utilization: 0.0,
                    },
                )
            })
            .collect();
        let mut state = NodeState {
            id,
            config,
            neighbor_table,
            main_table: BTreeMap::new(),
            pending_moves: BTreeMap::new(),
            holddown: BTreeMap::new(),
            timer_deadlines: BTreeMap::new(),
            next_request_id: 0,
            stats: NodeStats::default(),
        };
        let direct: Vec<NodeId> = capacities.keys().copied().collect();
        for d in direct {
            state.install_direct_route(d);
        }
        state
    }

    fn install_direct_route(&mut self, d: NodeId) {
        let entry = self
            .main_table
            .entry(d)
            .or_insert_with(|| DestinationEntry::new(d));
        entry.forward_set.insert(d);
        self.recompute(d);
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn neighbor_table(&self) -> &BTreeMap<NodeId, NeighborEntry> {
        &self.neighbor_table
    }

    pub fn main_table(&self) -> &BTreeMap<NodeId, DestinationEntry> {
        &self.main_table
    }

    pub fn entry(&self, d: NodeId) -> Option<&DestinationEntry> {
        self.main_table.get(&d)
    }

    pub fn forward_set(&self, d: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.main_table.get(&d).map(|e| &e.forward_set)
    }

    pub fn pending_moves(&self) -> &BTreeMap<(NodeId, NodeId), PendingMove> {
        &self.pending_moves
    }

    pub fn timer_deadline(&self, kind: TimerKind) -> Option<f64> {
        self.timer_deadlines.get(&kind).copied()
    }

    pub fn stats(&self) -> &NodeStats {
        &self.stats
    }

    /// Mutable access to a main-table row, for tests that need to stage a
    /// particular state. Callers must keep the row consistent.
    #[doc(hidden)]
    pub fn entry_mut_for_test(&mut self, d: NodeId) -> &mut DestinationEntry {
        self.main_table
            .entry(d)
            .or_insert_with(|| DestinationEntry::new(d))
    }

    /// Recomputes every row; exposed for tests that staged state by hand.
    #[doc(hidden)]
    pub fn refresh_tables(&mut self) {
        self.recompute_all();
    }

    /// Arms the periodic timers and the per-neighbour liveness timers.
    pub fn start(&mut self, now: f64, first_hello: f64, first_update: f64) -> Vec<Effect> {
        let mut out = Vec::new();
        self.arm(&mut out, TimerKind::Hello, first_hello);
        self.arm(&mut out, TimerKind::NeighborUpdate, first_update);
        let remove_at = now + self.config.timers.neighbor_remove_interval();
        let timeout_at = now + self.config.timers.timeout_interval();
        let nbrs: Vec<NodeId> = self.neighbor_table.keys().copied().collect();
        for j in nbrs {
            self.arm(&mut out, TimerKind::NeighborRemove(j), remove_at);
            self.arm(&mut out, TimerKind::Timeout(j), timeout_at);
        }
        out
    }

    pub fn set_utilization(&mut self, j: NodeId, u: f64) -> Result<(), ProtocolError> {
        if u.is_nan() {
            return Err(ProtocolError::InvalidUtilization(u));
        }
        let entry = self
            .neighbor_table
            .get_mut(&j)
            .ok_or(ProtocolError::UnknownNeighbor(j))?;
        entry.utilization = u.clamp(0.0, 1.0);
        Ok(())
    }

    /// Capacity to `d` through neighbour `i`: the available capacity of the
    /// link when `i` is `d`, otherwise the smaller of that and the capacity
    /// `i` last announced as backward. Nothing announced counts as zero.
    pub fn path_capacity(&self, i: NodeId, d: NodeId) -> Result<f64, ProtocolError> {
        let nb = self
            .neighbor_table
            .get(&i)
            .ok_or(ProtocolError::UnknownNeighbor(i))?;
        if i == d {
            return Ok(nb.available_capacity());
        }
        let downstream = self
            .main_table
            .get(&d)
            .and_then(|e| e.learned_backward_capacity.get(&i))
            .copied()
            .unwrap_or(0.0);
        Ok(nb.available_capacity().min(downstream))
    }

    /// Total capacity to `d` over the forward set; zero for unknown destinations.
    pub fn total_capacity(&self, d: NodeId) -> f64 {
        self.main_table
            .get(&d)
            .map(|e| e.total_capacity)
            .unwrap_or(0.0)
    }

    fn recompute(&mut self, d: NodeId) -> bool {
        let Some(entry) = self.main_table.get_mut(&d) else {
            return false;
        };
        let per: BTreeMap<NodeId, f64> = entry
            .forward_set
            .iter()
            .map(|&i| (i, via_capacity(&self.neighbor_table, entry, i)))
            .collect();
        let total: f64 = per.values().sum();
        let changed = per != entry.per_forward_capacity || total != entry.total_capacity;
        entry.per_forward_capacity = per;
        entry.total_capacity = total;
        changed
    }

    fn recompute_all(&mut self) -> bool {
        let dests: Vec<NodeId> = self.main_table.keys().copied().collect();
        let mut changed = false;
        for d in dests {
            changed |= self.recompute(d);
        }
        changed
    }

    /// The update sent to `recipient`: the full total for destinations where
    /// the recipient is backward, the total minus the via-recipient share
    /// where it is forward, and an infinite self entry.
    pub fn build_neighbor_update(&self, recipient: NodeId) -> ControlPacket {
        let mut entries = Vec::with_capacity(self.main_table.len() + 1);
        let mut self_pending = true;
        for (&d, e) in &self.main_table {
            if self_pending && d > self.id {
                entries.push(self.self_entry());
                self_pending = false;
            }
            let entry = match e.per_forward_capacity.get(&recipient) {
                Some(&share) => UpdateEntry {
                    destination: d,
                    capacity: (e.total_capacity - share).max(0.0),
                    direction: Direction::Forward,
                },
                None => UpdateEntry {
                    destination: d,
                    capacity: e.total_capacity,
                    direction: Direction::Backward,
                },
            };
            entries.push(entry);
        }
        if self_pending {
            entries.push(self.self_entry());
        }
        ControlPacket::NeighborUpdate {
            sender: self.id,
            entries,
        }
    }

    fn self_entry(&self) -> UpdateEntry {
        UpdateEntry {
            destination: self.id,
            capacity: f64::INFINITY,
            direction: Direction::Backward,
        }
    }

    fn fan_out(&self, out: &mut Vec<Effect>) {
        for &j in self.neighbor_table.keys() {
            out.push(Effect::Send {
                to: j,
                packet: self.build_neighbor_update(j),
            });
        }
    }

    fn arm(&mut self, out: &mut Vec<Effect>, timer: TimerKind, at: f64) {
        self.timer_deadlines.insert(timer, at);
        out.push(Effect::Arm { timer, at });
    }

    /// Whether `l`, currently backward for `d`, should be asked to become
    /// forward: the smaller of its announced capacity and the link's
    /// available capacity must exceed `K` times the current total. Either
    /// tag counts, since both exclude whatever `l` routes through this node.
    pub fn evaluate_move_condition(&self, l: NodeId, d: NodeId) -> Result<bool, ProtocolError> {
        let nb = self
            .neighbor_table
            .get(&l)
            .ok_or(ProtocolError::UnknownNeighbor(l))?;
        if d == self.id {
            return Ok(false);
        }
        let Some(entry) = self.main_table.get(&d) else {
            return Ok(false);
        };
        if entry.is_forward(l) {
            return Err(ProtocolError::AlreadyForward {
                neighbor: l,
                destination: d,
            });
        }
        let total = entry.total_capacity;
        let announced = entry
            .learned_forward_capacity
            .get(&l)
            .or_else(|| entry.learned_backward_capacity.get(&l))
            .copied();
        let Some(announced) = announced else {
            return Ok(false);
        };
        Ok(announced.min(nb.available_capacity()) > self.config.timers.k_threshold * total)
    }

    fn may_request(&self, d: NodeId, l: NodeId, now: f64) -> bool {
        !self.pending_moves.contains_key(&(d, l))
            && self.holddown.get(&(d, l)).is_none_or(|&until| now >= until)
    }

    fn send_request(&mut self, out: &mut Vec<Effect>, d: NodeId, l: NodeId, now: f64) {
        self.stats.requests_sent += 1;
        let request_id = RequestId(self.next_request_id);
        self.next_request_id += 1;
        let deadline = now + self.config.timers.move_timeout;
        self.pending_moves
            .insert((d, l), PendingMove { request_id, deadline });
        self.arm(
            out,
            TimerKind::Move {
                destination: d,
                neighbor: l,
            },
            deadline,
        );
        out.push(Effect::Send {
            to: l,
            packet: ControlPacket::ForwardMoveRequest {
                sender: self.id,
                destination: d,
                request_id,
            },
        });
    }

    /// Dispatches any control packet. `closes_cycle(d, from, to)` must report
    /// whether adding the edge `from -> to` to the forwarding graph for `d`
    /// would create a loop; it is consulted only when committing a move.
    pub fn handle_packet(
        &mut self,
        packet: &ControlPacket,
        now: f64,
        closes_cycle: &dyn Fn(NodeId, NodeId, NodeId) -> bool,
    ) -> Vec<Effect> {
        match packet {
            ControlPacket::Hello {
                sender,
                link_capacity_hint,
                ack,
            } => self.handle_hello(*sender, *link_capacity_hint, *ack, now),
            ControlPacket::NeighborUpdate { sender, entries } => {
                self.handle_neighbor_update(*sender, entries, now)
            }
            ControlPacket::ForwardMoveRequest {
                sender,
                destination,
                request_id,
            } => self.handle_move_request(*sender, *destination, *request_id, now),
            ControlPacket::ForwardMoveResponse {
                sender,
                destination,
                request_id,
                verdict,
            } => self.handle_move_response(
                *sender,
                *destination,
                *request_id,
                *verdict,
                now,
                closes_cycle,
            ),
        }
    }

    pub fn handle_neighbor_update(
        &mut self,
        sender: NodeId,
        entries: &[UpdateEntry],
        now: f64,
    ) -> Vec<Effect> {
        if !self.neighbor_table.contains_key(&sender) {
            warn!("node {}: update from unknown neighbour {sender}", self.id);
            self.stats.ignored_packets += 1;
            return Vec::new();
        }
        let mut out = Vec::new();
        let timeout_at = now + self.config.timers.timeout_interval();
        self.arm(&mut out, TimerKind::Timeout(sender), timeout_at);

        let mut changed = false;
        for e in entries {
            let d = e.destination;
            if d == self.id || d == sender {
                continue;
            }
            let row = self.main_table.entry(d).or_insert_with(|| {
                changed = true;
                DestinationEntry::new(d)
            });
            row.learn(sender, e.capacity, e.direction == Direction::Backward);
            changed |= self.recompute(d);
        }

        for e in entries {
            let d = e.destination;
            if d == self.id || d == sender || self.main_table[&d].is_forward(sender) {
                continue;
            }
            if self.may_request(d, sender, now)
                && self.evaluate_move_condition(sender, d).unwrap_or(false)
            {
                self.send_request(&mut out, d, sender, now);
            }
        }

        if changed {
            self.fan_out(&mut out);
        }
        out
    }

    /// Accept when, after dropping the requester from the forward set, the
    /// node still has a forward neighbour (or is the destination) and keeps
    /// at least `acceptance_floor` of its current total capacity. While this
    /// node has its own request to the same neighbour for the same
    /// destination outstanding, the lower node id's request wins.
    pub fn decide_move_request(&self, sender: NodeId, d: NodeId) -> Verdict {
        if !self.neighbor_table.contains_key(&sender) {
            return Verdict::Reject;
        }
        if d == self.id {
            return Verdict::Accept;
        }
        if self.pending_moves.contains_key(&(d, sender)) && self.id < sender {
            return Verdict::Reject;
        }
        let Some(entry) = self.main_table.get(&d) else {
            return Verdict::Reject;
        };
        let remaining: f64 = entry
            .per_forward_capacity
            .iter()
            .filter(|(&i, _)| i != sender)
            .map(|(_, &c)| c)
            .sum();
        let keeps_forward = entry.forward_set.iter().any(|&i| i != sender);
        if keeps_forward && remaining >= self.config.acceptance_floor * entry.total_capacity {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }

    pub fn handle_move_request(
        &mut self,
        sender: NodeId,
        d: NodeId,
        request_id: RequestId,
        now: f64,
    ) -> Vec<Effect> {
        let verdict = self.decide_move_request(sender, d);
        let mut out = Vec::new();
        match verdict {
            Verdict::Accept => {
                self.stats.requests_accepted += 1;
                if d != self.id {
                    let row = self.main_table.get_mut(&d).expect("accept implies a row");
                    let was_forward = row.forward_set.remove(&sender);
                    row.per_forward_capacity.remove(&sender);
                    self.holddown
                        .insert((d, sender), now + self.config.move_holddown);
                    if self.recompute(d) || was_forward {
                        self.fan_out(&mut out);
                    }
                }
            }
            Verdict::Reject => self.stats.requests_rejected += 1,
        }
        debug!("node {}: move request {sender}/{d} -> {verdict:?}", self.id);
        out.insert(
            0,
            Effect::Send {
                to: sender,
                packet: ControlPacket::ForwardMoveResponse {
                    sender: self.id,
                    destination: d,
                    request_id,
                    verdict,
                },
            },
        );
        out
    }

    pub fn handle_move_response(
        &mut self,
        sender: NodeId,
        d: NodeId,
        request_id: RequestId,
        verdict: Verdict,
        now: f64,
        closes_cycle: &dyn Fn(NodeId, NodeId, NodeId) -> bool,
    ) -> Vec<Effect> {
        match self.pending_moves.get(&(d, sender)) {
            Some(p) if p.request_id == request_id => {}
            _ => {
                self.stats.stale_responses += 1;
                return Vec::new();
            }
        }
        self.pending_moves.remove(&(d, sender));
        self.timer_deadlines.remove(&TimerKind::Move {
            destination: d,
            neighbor: sender,
        });
        if verdict == Verdict::Reject {
            self.stats.moves_declined += 1;
            self.holddown
                .insert((d, sender), now + self.config.move_holddown);
            return Vec::new();
        }
        if !self.neighbor_table.contains_key(&sender) {
            return Vec::new();
        }
        let id = self.id;
        let row = self
            .main_table
            .entry(d)
            .or_insert_with(|| DestinationEntry::new(d));
        if row.is_forward(sender) {
            return Vec::new();
        }
        if closes_cycle(d, id, sender) {
            self.stats.guard_blocked += 1;
            self.holddown
                .insert((d, sender), now + self.config.move_holddown);
            info!("node {id}: cycle guard refused forward move {id}->{sender} for {d}");
            return Vec::new();
        }
        // The poisoned value is what the responder keeps after dropping us.
        if !row.learned_backward_capacity.contains_key(&sender) {
            let v = row
                .learned_forward_capacity
                .remove(&sender)
                .unwrap_or(0.0);
            row.learned_backward_capacity.insert(sender, v);
        }
        row.forward_set.insert(sender);
        self.recompute(d);
        self.stats.moves_committed += 1;
        let mut out = Vec::new();
        self.fan_out(&mut out);
        out
    }

    /// Handles a Hello. Unacknowledged Hellos are answered once; the answer
    /// carries `ack` so it is not answered again.
    pub fn handle_hello(
        &mut self,
        sender: NodeId,
        link_capacity_hint: Option<f64>,
        ack: bool,
        now: f64,
    ) -> Vec<Effect> {
        let mut out = Vec::new();
        match self.neighbor_table.get_mut(&sender) {
            Some(nb) => {
                if let Some(c) = link_capacity_hint {
                    if c != nb.link_capacity {
                        nb.link_capacity = c;
                        if self.recompute_all() {
                            self.fan_out(&mut out);
                        }
                    }
                }
            }
            None => {
                let Some(c) = link_capacity_hint else {
                    warn!("node {}: Hello from new neighbour {sender} without capacity", self.id);
                    self.stats.ignored_packets += 1;
                    return out;
                };
                self.neighbor_table.insert(
                    sender,
                    NeighborEntry {
                        neighbor: sender,
                        link_capacity: c,
                        utilization: 0.0,
                    },
                );
                self.install_direct_route(sender);
                let timeout_at = now + self.config.timers.timeout_interval();
                self.arm(&mut out, TimerKind::Timeout(sender), timeout_at);
                self.fan_out(&mut out);
            }
        }
        let remove_at = now + self.config.timers.neighbor_remove_interval();
        self.arm(&mut out, TimerKind::NeighborRemove(sender), remove_at);
        if !ack {
            out.push(Effect::Send {
                to: sender,
                packet: ControlPacket::Hello {
                    sender: self.id,
                    link_capacity_hint: Some(self.neighbor_table[&sender].link_capacity),
                    ack: true,
                },
            });
        }
        out
    }

    /// Fires `kind` if its recorded deadline is exactly `now`; superseded
    /// deadlines are ignored.
    pub fn on_timer(&mut self, kind: TimerKind, now: f64) -> Vec<Effect> {
        if self.timer_deadlines.get(&kind) != Some(&now) {
            return Vec::new();
        }
        self.timer_deadlines.remove(&kind);
        let mut out = Vec::new();
        let timers = self.config.timers.clone();
        match kind {
            TimerKind::Hello => {
                for nb in self.neighbor_table.values() {
                    out.push(Effect::Send {
                        to: nb.neighbor,
                        packet: ControlPacket::Hello {
                            sender: self.id,
                            link_capacity_hint: Some(nb.link_capacity),
                            ack: false,
                        },
                    });
                }
                self.arm(&mut out, TimerKind::Hello, now + timers.hello_period);
            }
            TimerKind::NeighborUpdate => {
                self.recompute_all();
                self.fan_out(&mut out);
                self.arm(&mut out, TimerKind::NeighborUpdate, now + timers.update_period);
            }
            TimerKind::NeighborRemove(j) => {
                self.remove_neighbor(j);
                self.recompute_all();
                self.fan_out(&mut out);
            }
            TimerKind::Timeout(j) => {
                for row in self.main_table.values_mut() {
                    if let Some(v) = row.learned_backward_capacity.get_mut(&j) {
                        *v = 0.0;
                    }
                    if let Some(v) = row.learned_forward_capacity.get_mut(&j) {
                        *v = 0.0;
                    }
                }
                if self.recompute_all() {
                    self.fan_out(&mut out);
                }
            }
            TimerKind::Move {
                destination,
                neighbor,
            } => {
                if self.pending_moves.remove(&(destination, neighbor)).is_some() {
                    self.stats.requests_resent += 1;
                    self.send_request(&mut out, destination, neighbor, now);
                }
            }
        }
        out
    }

    fn remove_neighbor(&mut self, j: NodeId) {
        self.neighbor_table.remove(&j);
        for row in self.main_table.values_mut() {
            row.forget(j);
        }
        self.pending_moves.retain(|&(_, l), _| l != j);
        self.holddown.retain(|&(_, l), _| l != j);
        self.timer_deadlines.retain(|k, _| match *k {
            TimerKind::Timeout(x) | TimerKind::NeighborRemove(x) => x != j,
            TimerKind::Move { neighbor, .. } => neighbor != j,
            _ => true,
        });
    }

    /// Local consistency: forward sets within the neighbour table, capacity
    /// keys matching forward sets, stored totals equal to fresh sums, and
    /// no row for the node itself.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.main_table.contains_key(&self.id) {
            return Err(format!("node {} holds a row for itself", self.id));
        }
        for (&d, row) in &self.main_table {
            if let Some(i) = row
                .forward_set
                .iter()
                .find(|i| !self.neighbor_table.contains_key(i))
            {
                return Err(format!(
                    "node {}: forward neighbour {i} for {d} is not a neighbour",
                    self.id
                ));
            }
            if !row.per_forward_capacity.keys().eq(row.forward_set.iter()) {
                return Err(format!(
                    "node {}: capacity keys differ from forward set for {d}",
                    self.id
                ));
            }
            let fresh = row.summed_capacity();
            if (fresh - row.total_capacity).abs() > CAPACITY_TOLERANCE {
                return Err(format!(
                    "node {}: stale total for {d}: stored {} vs sum {fresh}",
                    self.id, row.total_capacity
                ));
            }
            for (&i, &c) in &row.per_forward_capacity {
                let expect = via_capacity(&self.neighbor_table, row, i);
                if (expect - c).abs() > CAPACITY_TOLERANCE {
                    return Err(format!(
                        "node {}: stale via-{i} capacity for {d}: {c} vs {expect}",
                        self.id
                    ));
                }
            }
        }
        for nb in self.neighbor_table.values() {
            if !(0.0..=1.0).contains(&nb.utilization) {
                return Err(format!(
                    "node {}: utilisation {} towards {} out of range",
                    self.id, nb.utilization, nb.neighbor
                ));
            }
        }
        Ok(())
    }
}
