use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use crate::protocol::{ControlPacket, TimerKind};
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// A new packet from flow `flow` appears at its source.
    DataArrival { flow: usize },
    /// The server of directed link `link` finishes its head packet.
    ServiceComplete { link: usize },
    ControlDeliver {
        from: NodeId,
        to: NodeId,
        packet: ControlPacket,
    },
    TimerFire { node: NodeId, timer: TimerKind },
    /// Closes a utilisation measurement window.
    MeasureTick,
    WarmupEnd,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::DataArrival { flow } => write!(f, "ARRIVAL\t{flow}"),
            EventKind::ServiceComplete { link } => write!(f, "SERVICE\t{link}"),
            EventKind::ControlDeliver { from, to, packet } => {
                write!(f, "CTRL\t{from}\t{to}\t{packet}")
            }
            EventKind::TimerFire { node, timer } => write!(f, "TIMER\t{node}\t{timer}"),
            EventKind::MeasureTick => f.write_str("MEASURE"),
            EventKind::WarmupEnd => f.write_str("WARMUP_END"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Shortest round-trip form, so traced times are exact.
        write!(f, "{}\t{}\t{}", self.time, self.seq, self.kind)
    }
}

/// Heap entry ordered so that the earliest `(time, seq)` pops first.
struct Entry(Event);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .time
            .total_cmp(&self.0.time)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

/// Future event list. Sequence numbers are handed out at scheduling time,
/// so simultaneous events run in the order they were scheduled.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event { time, seq, kind }));
        seq
    }

    /// Pops the next event if it is due no later than `horizon`.
    pub fn pop_until(&mut self, horizon: f64) -> Option<Event> {
        if self.heap.peek()?.0.time > horizon {
            return None;
        }
        self.heap.pop().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
