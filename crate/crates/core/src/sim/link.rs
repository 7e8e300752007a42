use std::collections::VecDeque;

use crate::protocol::utilization_from_busy_time;
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub id: u64,
    pub flow: usize,
    pub source: NodeId,
    pub destination: NodeId,
    /// Size in bits.
    pub size: f64,
    pub created_at: f64,
    pub hop_count: u32,
}

/// Output queue and server for one direction of a link. The packet at the
/// head of the FIFO is the one in service.
#[derive(Debug, Clone)]
pub struct LinkQueue {
    pub from: NodeId,
    pub to: NodeId,
    fifo: VecDeque<DataPacket>,
    /// Start of the busy stretch not yet credited to the accumulators.
    busy_since: Option<f64>,
    window_busy: f64,
    window_start: f64,
    last_sample: f64,
    metric_busy: f64,
    capacity_limit: Option<usize>,
}

impl LinkQueue {
    pub fn new(from: NodeId, to: NodeId, capacity_limit: Option<usize>) -> Self {
        LinkQueue {
            from,
            to,
            fifo: VecDeque::new(),
            busy_since: None,
            window_busy: 0.0,
            window_start: 0.0,
            last_sample: 0.0,
            metric_busy: 0.0,
            capacity_limit,
        }
    }

    pub fn is_busy(&self) -> bool {
        self.busy_since.is_some()
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn packets(&self) -> impl Iterator<Item = &DataPacket> {
        self.fifo.iter()
    }

    /// Credits busy time up to `now` to both accumulators.
    pub fn settle(&mut self, now: f64) {
        if let Some(since) = self.busy_since {
            let dt = now - since;
            self.window_busy += dt;
            self.metric_busy += dt;
            self.busy_since = Some(now);
        }
    }

    /// Appends `pkt`; returns it back if the queue is full. The caller
    /// starts service when the queue was idle.
    pub fn enqueue(&mut self, pkt: DataPacket) -> Result<(), DataPacket> {
        if self.capacity_limit.is_some_and(|l| self.fifo.len() >= l) {
            return Err(pkt);
        }
        self.fifo.push_back(pkt);
        Ok(())
    }

    pub fn begin_service(&mut self, now: f64) {
        debug_assert!(!self.fifo.is_empty());
        self.busy_since = Some(now);
    }

    /// Removes the packet in service. The server stays busy if another
    /// packet is waiting.
    pub fn complete_service(&mut self, now: f64) -> DataPacket {
        self.settle(now);
        let pkt = self.fifo.pop_front().expect("service completes on a nonempty queue");
        if self.fifo.is_empty() {
            self.busy_since = None;
        }
        pkt
    }

    /// Busy fraction since the previous sample, after which a new window
    /// starts. An empty window repeats the previous value.
    pub fn sample_utilization(&mut self, now: f64) -> f64 {
        self.settle(now);
        if let Ok(u) = utilization_from_busy_time(self.window_busy, now - self.window_start) {
            self.last_sample = u;
        }
        self.window_busy = 0.0;
        self.window_start = now;
        self.last_sample
    }

    /// Busy seconds since the last call, for the reported statistics.
    pub fn take_metric_busy(&mut self, now: f64) -> f64 {
        self.settle(now);
        std::mem::take(&mut self.metric_busy)
    }
}
