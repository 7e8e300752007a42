//! Deterministic discrete-event simulation of the routing protocol under
//! Poisson traffic.
//!
//! Every directed link has its own FIFO queue and exponential server.
//! Control packets bypass the data queues and arrive after a fixed latency.
//! A run is single-threaded and fully determined by its inputs: each source
//! of randomness (per-flow arrivals, per-link service, per-node routing
//! draws, control loss, timer phases) has its own substream of the run
//! seed, so changing the routing mode never perturbs the offered traffic.

mod event;
mod link;
mod traffic;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::forwarding::{select_next_hop, split_table, RoutingMode};
use crate::metrics::RunMetrics;
use crate::protocol::{
    ConfigError, ControlPacket, Effect, NodeState, NodeStats, PacketKind, ProtocolConfig,
    ProtocolError, TimerKind, Verdict,
};
use crate::topology::{NodeId, Topology, TopologyError};

pub use event::{Event, EventKind, EventQueue};
pub use link::{DataPacket, LinkQueue};
pub use traffic::{Flow, FlowSource, SizeLaw, TrafficSpec};

/// Events kept for the report attached to an invariant violation.
const RECENT_EVENTS: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    State(#[from] ProtocolError),
    #[error("invariant violated at t={time}: {message}")]
    Invariant {
        time: f64,
        message: String,
        /// The events leading up to the violation, oldest first, in trace format.
        recent: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stream {
    Traffic = 1,
    Service = 2,
    Routing = 3,
    Control = 4,
    Phase = 5,
}

/// Independent random stream `index` of kind `purpose` under `seed`.
pub(crate) fn substream(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    /// One-way delivery latency of control packets, in seconds.
    pub latency: f64,
    /// Probability that a control packet is lost.
    pub loss: f64,
    /// Packet kinds subject to loss; empty means all kinds.
    pub loss_kinds: BTreeSet<PacketKind>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            latency: 0.001,
            loss: 0.0,
            loss_kinds: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mode: RoutingMode,
    pub protocol: ProtocolConfig,
    pub traffic: TrafficSpec,
    pub control: ControlConfig,
    /// Packets reaching this many hops are dropped as loop suspects.
    pub hop_limit: u32,
    /// Per-link queue bound in packets; unbounded when `None`.
    pub queue_limit: Option<usize>,
    /// Run the global consistency checks after every protocol event.
    pub check_invariants: bool,
    /// Record one line per event in [`RunReport::trace`].
    pub trace: bool,
}

impl SimConfig {
    pub fn new(mode: RoutingMode, traffic: TrafficSpec) -> Self {
        SimConfig {
            mode,
            protocol: ProtocolConfig::default(),
            traffic,
            control: ControlConfig::default(),
            hop_limit: 64,
            queue_limit: None,
            check_invariants: true,
            trace: false,
        }
    }

    /// Warmup of five update periods, the default used by scenarios.
    pub fn default_warmup(protocol: &ProtocolConfig) -> f64 {
        5.0 * protocol.timers.update_period
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), SimError> {
        self.protocol.validate()?;
        self.traffic.validate(topology)?;
        if let RoutingMode::Ecmp { tolerance } = self.mode {
            if !(0.0..1.0).contains(&tolerance) {
                return Err(SimError::Config(format!(
                    "ECMP tolerance must lie in [0, 1), got {tolerance}"
                )));
            }
        }
        if !(self.control.latency >= 0.0 && self.control.latency.is_finite()) {
            return Err(SimError::Config(format!(
                "control latency must be non-negative, got {}",
                self.control.latency
            )));
        }
        if !(0.0..=1.0).contains(&self.control.loss) {
            return Err(SimError::Config(format!(
                "control loss must lie in [0, 1], got {}",
                self.control.loss
            )));
        }
        if self.hop_limit == 0 {
            return Err(SimError::Config("hop limit must be at least 1".into()));
        }
        if self.queue_limit == Some(0) {
            return Err(SimError::Config("queue limit must be at least 1".into()));
        }
        Ok(())
    }
}

/// Whole-run packet accounting for one flow. At the end of a run
/// `injected == delivered + dropped + in_flight`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowStats {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

/// Nodes lacking a forward neighbour for some destination at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MinForwardSnapshot {
    pub time: f64,
    /// `(node, destination)` pairs with an empty forward set.
    pub missing: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub metrics: RunMetrics,
    pub flows: Vec<FlowStats>,
    /// Taken at the end of warmup and at the end of the run.
    pub snapshots: Vec<MinForwardSnapshot>,
    /// Protocol counters summed over all nodes.
    pub protocol: NodeStats,
    pub control_sent: u64,
    pub control_lost: u64,
    /// Packets dropped because the node had no route yet.
    pub no_route_drops: u64,
    pub queue_drops: u64,
    pub events: u64,
    /// Forward sets at the end of the run, by node then destination.
    pub forward_sets: BTreeMap<NodeId, BTreeMap<NodeId, BTreeSet<NodeId>>>,
    pub trace: Vec<String>,
}

impl RunReport {
    /// True when both snapshots found a forward neighbour everywhere.
    pub fn min_forward_holds(&self) -> bool {
        self.snapshots.iter().all(|s| s.missing.is_empty())
    }
}

/// Runs one simulation to completion.
pub fn run(topology: &Topology, config: &SimConfig) -> Result<RunReport, SimError> {
    Simulation::new(topology, config.clone())?.run()
}

/// Whether `target` can be reached from `start` along forward edges for `d`.
fn reaches(nodes: &[NodeState], d: NodeId, start: NodeId, target: NodeId) -> bool {
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![start];
    while let Some(k) = stack.pop() {
        if k == target {
            return true;
        }
        if std::mem::replace(&mut seen[k.index()], true) {
            continue;
        }
        if let Some(f) = nodes[k.index()].forward_set(d) {
            stack.extend(f.iter().copied());
        }
    }
    false
}

/// Forward-graph cycle for destination `d`, if any, as a list of nodes.
fn find_cycle(nodes: &[NodeState], d: NodeId) -> Option<Vec<NodeId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    fn visit(
        nodes: &[NodeState],
        d: NodeId,
        k: NodeId,
        marks: &mut [Mark],
        path: &mut Vec<NodeId>,
    ) -> bool {
        marks[k.index()] = Mark::Open;
        path.push(k);
        if let Some(f) = nodes[k.index()].forward_set(d) {
            for &i in f {
                let mark = marks[i.index()];
                if mark == Mark::Open {
                    path.push(i);
                    return true;
                }
                if mark == Mark::New && visit(nodes, d, i, marks, path) {
                    return true;
                }
            }
        }
        marks[k.index()] = Mark::Done;
        path.pop();
        false
    }
    let mut marks = vec![Mark::New; nodes.len()];
    for k in 0..nodes.len() {
        let mut path = Vec::new();
        if marks[k] == Mark::New && visit(nodes, d, NodeId(k as u32), &mut marks, &mut path) {
            let last = *path.last().expect("cycle path is nonempty");
            let start = path.iter().position(|&n| n == last).expect("cycle closes");
            return Some(path[start..].to_vec());
        }
    }
    None
}

struct Simulation {
    config: SimConfig,
    topology: Topology,
    now: f64,
    queue: EventQueue,
    nodes: Vec<NodeState>,
    links: Vec<LinkQueue>,
    link_index: BTreeMap<(NodeId, NodeId), usize>,
    outgoing: Vec<Vec<usize>>,
    sources: Vec<FlowSource>,
    service: Exp<f64>,
    service_rngs: Vec<ChaCha8Rng>,
    routing_rngs: Vec<ChaCha8Rng>,
    control_rng: ChaCha8Rng,
    next_packet: u64,
    measuring: bool,
    last_tick: f64,
    metrics: RunMetrics,
    flows: Vec<FlowStats>,
    snapshots: Vec<MinForwardSnapshot>,
    control_sent: u64,
    control_lost: u64,
    no_route_drops: u64,
    queue_drops: u64,
    events: u64,
    recent: VecDeque<Event>,
    trace: Vec<String>,
    note: String,
}

impl Simulation {
    fn new(topology: &Topology, config: SimConfig) -> Result<Self, SimError> {
        config.validate(topology)?;
        let seed = config.traffic.seed;
        let directed = topology.directed_links();
        let link_index: BTreeMap<_, _> = directed.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let mut outgoing = vec![Vec::new(); topology.node_count()];
        for (i, &(a, _)) in directed.iter().enumerate() {
            outgoing[a.index()].push(i);
        }
        let links = directed
            .iter()
            .map(|&(a, b)| LinkQueue::new(a, b, config.queue_limit))
            .collect();
        let nodes = topology
            .nodes()
            .map(|k| NodeState::new(k, &topology.incident_capacities(k), config.protocol.clone()))
            .collect();
        let sources = config
            .traffic
            .flows
            .iter()
            .enumerate()
            .map(|(i, f)| FlowSource::new(f.clone(), i, seed))
            .collect();
        let mut metrics = RunMetrics::empty(config.mode, config.traffic.load_point());
        metrics.sim_time = config.traffic.duration - config.traffic.warmup;
        for &l in &directed {
            metrics.per_link_utilization.insert(l, Vec::new());
        }
        Ok(Simulation {
            service: Exp::new(config.traffic.service_rate).expect("validated service rate"),
            service_rngs: (0..directed.len())
                .map(|i| substream(seed, Stream::Service, i as u64))
                .collect(),
            routing_rngs: topology
                .nodes()
                .map(|k| substream(seed, Stream::Routing, k.0 as u64))
                .collect(),
            control_rng: substream(seed, Stream::Control, 0),
            flows: vec![FlowStats::default(); config.traffic.flows.len()],
            topology: topology.clone(),
            now: 0.0,
            queue: EventQueue::new(),
            nodes,
            links,
            link_index,
            outgoing,
            sources,
            next_packet: 0,
            measuring: false,
            last_tick: 0.0,
            metrics,
            snapshots: Vec::new(),
            control_sent: 0,
            control_lost: 0,
            no_route_drops: 0,
            queue_drops: 0,
            events: 0,
            recent: VecDeque::new(),
            trace: Vec::new(),
            note: String::new(),
            config,
        })
    }

    fn run(mut self) -> Result<RunReport, SimError> {
        self.bootstrap();
        let horizon = self.config.traffic.duration;
        while let Some(ev) = self.queue.pop_until(horizon) {
            self.now = ev.time;
            self.events += 1;
            if self.config.check_invariants {
                if self.recent.len() == RECENT_EVENTS {
                    self.recent.pop_front();
                }
                self.recent.push_back(ev.clone());
            }
            let touched = self.dispatch(&ev)?;
            if self.config.trace {
                let line = format!("{ev}{}", self.note);
                self.trace.push(line);
            }
            self.note.clear();
            if let Some(k) = touched {
                if self.config.check_invariants {
                    self.check_node(k)?;
                }
            }
        }
        self.now = horizon;
        self.finish()
    }

    fn bootstrap(&mut self) {
        let t = &self.config.traffic;
        let (warmup, duration) = (t.warmup, t.duration);
        self.queue.schedule(warmup, EventKind::WarmupEnd);
        // Equal windows, so per-link averages are plain sample means.
        let period = self.config.protocol.timers.update_period;
        let windows = ((duration - warmup) / period).ceil().max(1.0) as usize;
        let width = (duration - warmup) / windows as f64;
        for w in 1..=windows {
            let at = if w == windows {
                duration
            } else {
                warmup + w as f64 * width
            };
            self.queue.schedule(at, EventKind::MeasureTick);
        }

        let timers = self.config.protocol.timers.clone();
        let seed = self.config.traffic.seed;
        for k in 0..self.nodes.len() {
            let mut phase = substream(seed, Stream::Phase, k as u64);
            let hello = phase.random::<f64>() * timers.hello_period;
            let update = phase.random::<f64>() * timers.update_period;
            let effects = self.nodes[k].start(0.0, hello, update);
            self.apply(NodeId(k as u32), effects);
        }
        for i in 0..self.sources.len() {
            let gap = self.sources[i].next_gap();
            self.queue.schedule(gap, EventKind::DataArrival { flow: i });
        }
    }

    /// Handles one event; returns the node whose protocol state it touched.
    fn dispatch(&mut self, ev: &Event) -> Result<Option<NodeId>, SimError> {
        match &ev.kind {
            EventKind::DataArrival { flow } => {
                self.on_arrival(*flow);
                Ok(None)
            }
            EventKind::ServiceComplete { link } => {
                self.on_service(*link);
                Ok(None)
            }
            EventKind::ControlDeliver { from, to, packet } => {
                self.on_control(*from, *to, packet);
                Ok(Some(*to))
            }
            EventKind::TimerFire { node, timer } => {
                self.on_timer(*node, *timer)?;
                Ok(Some(*node))
            }
            EventKind::MeasureTick => {
                self.on_measure();
                Ok(None)
            }
            EventKind::WarmupEnd => {
                self.on_warmup_end()?;
                Ok(None)
            }
        }
    }

    fn on_arrival(&mut self, flow: usize) {
        let size = self.sources[flow].next_size();
        let gap = self.sources[flow].next_gap();
        self.queue
            .schedule(self.now + gap, EventKind::DataArrival { flow });
        let f = &self.sources[flow].flow;
        let pkt = DataPacket {
            id: self.next_packet,
            flow,
            source: f.source,
            destination: f.destination,
            size,
            created_at: self.now,
            hop_count: 0,
        };
        self.next_packet += 1;
        self.flows[flow].injected += 1;
        if self.measuring {
            self.metrics.injected += 1;
        }
        if self.config.trace {
            self.note = format!("\tpkt={}", pkt.id);
        }
        self.forward(pkt.source, pkt);
    }

    fn on_service(&mut self, link: usize) {
        let pkt = self.links[link].complete_service(self.now);
        if !self.links[link].is_empty() {
            self.start_service(link);
        }
        let to = self.links[link].to;
        if self.config.trace {
            self.note = format!("\tpkt={}", pkt.id);
        }
        self.forward(to, pkt);
    }

    fn start_service(&mut self, link: usize) {
        self.links[link].begin_service(self.now);
        let s = self.service.sample(&mut self.service_rngs[link]);
        self.queue
            .schedule(self.now + s, EventKind::ServiceComplete { link });
    }

    fn drop_packet(&mut self, pkt: &DataPacket) {
        self.flows[pkt.flow].dropped += 1;
        if pkt.created_at >= self.config.traffic.warmup && self.measuring {
            self.metrics.dropped += 1;
        }
    }

    /// `pkt` has arrived at node `k`.
    fn forward(&mut self, k: NodeId, mut pkt: DataPacket) {
        if pkt.destination == k {
            self.flows[pkt.flow].delivered += 1;
            if self.measuring && pkt.created_at >= self.config.traffic.warmup {
                self.metrics.delivered += 1;
                self.metrics.delay_samples.push(self.now - pkt.created_at);
            }
            if self.config.trace {
                self.note.push_str("\tdelivered");
            }
            return;
        }
        if pkt.hop_count >= self.config.hop_limit {
            self.metrics.hop_limit_drops += 1;
            self.drop_packet(&pkt);
            if self.config.trace {
                self.note.push_str("\thop-limit");
            }
            return;
        }
        let hop = self.nodes[k.index()]
            .entry(pkt.destination)
            .map(split_table)
            .and_then(|t| select_next_hop(&t, self.config.mode, &mut self.routing_rngs[k.index()]));
        let Some(next) = hop else {
            self.no_route_drops += 1;
            self.drop_packet(&pkt);
            if self.config.trace {
                self.note.push_str("\tno-route");
            }
            return;
        };
        if self.config.trace {
            self.note.push_str(&format!("\t{k}->{next}"));
        }
        pkt.hop_count += 1;
        let link = self.link_index[&(k, next)];
        let was_idle = self.links[link].is_empty();
        match self.links[link].enqueue(pkt) {
            Ok(()) if was_idle => self.start_service(link),
            Ok(()) => {}
            Err(pkt) => {
                self.queue_drops += 1;
                self.drop_packet(&pkt);
            }
        }
    }

    fn apply(&mut self, k: NodeId, effects: Vec<Effect>) {
        for effect in effects {
            match effect {
                Effect::Send { to, packet } => {
                    self.control_sent += 1;
                    let c = &self.config.control;
                    let lossy = c.loss > 0.0
                        && (c.loss_kinds.is_empty() || c.loss_kinds.contains(&packet.kind()));
                    if lossy && self.control_rng.random::<f64>() < c.loss {
                        self.control_lost += 1;
                        debug!("t={}: lost {packet} from {k} to {to}", self.now);
                        continue;
                    }
                    self.queue.schedule(
                        self.now + self.config.control.latency,
                        EventKind::ControlDeliver {
                            from: k,
                            to,
                            packet,
                        },
                    );
                }
                Effect::Arm { timer, at } => {
                    if at <= self.config.traffic.duration {
                        self.queue
                            .schedule(at, EventKind::TimerFire { node: k, timer });
                    }
                }
            }
        }
    }

    fn on_control(&mut self, from: NodeId, to: NodeId, packet: &ControlPacket) {
        // A committed move adds `to -> from`; it closes a loop exactly when
        // `to` is already reachable from `from`.
        let blocked = match packet {
            ControlPacket::ForwardMoveResponse {
                destination,
                verdict: Verdict::Accept,
                ..
            } => reaches(&self.nodes, *destination, from, to),
            _ => false,
        };
        let guard = move |_: NodeId, _: NodeId, _: NodeId| blocked;
        let effects = self.nodes[to.index()].handle_packet(packet, self.now, &guard);
        self.apply(to, effects);
    }

    fn on_timer(&mut self, k: NodeId, timer: TimerKind) -> Result<(), SimError> {
        let node = &self.nodes[k.index()];
        if node.timer_deadline(timer) != Some(self.now) {
            return Ok(());
        }
        if timer == TimerKind::NeighborUpdate {
            for &l in &self.outgoing[k.index()] {
                let u = self.links[l].sample_utilization(self.now);
                let to = self.links[l].to;
                if self.nodes[k.index()].neighbor_table().contains_key(&to) {
                    self.nodes[k.index()].set_utilization(to, u)?;
                }
            }
        }
        let effects = self.nodes[k.index()].on_timer(timer, self.now);
        self.apply(k, effects);
        Ok(())
    }

    fn on_measure(&mut self) {
        let width = self.now - self.last_tick;
        self.last_tick = self.now;
        for link in &mut self.links {
            let busy = link.take_metric_busy(self.now);
            if width > 0.0 {
                let u = (busy / width).clamp(0.0, 1.0);
                self.metrics
                    .per_link_utilization
                    .get_mut(&(link.from, link.to))
                    .expect("every link has a sample list")
                    .push(u);
            }
        }
    }

    fn on_warmup_end(&mut self) -> Result<(), SimError> {
        self.measuring = true;
        self.last_tick = self.now;
        for link in &mut self.links {
            link.take_metric_busy(self.now);
        }
        let snap = self.snapshot();
        if !snap.missing.is_empty() {
            info!(
                "t={}: {} node/destination pairs without a forward neighbour",
                self.now,
                snap.missing.len()
            );
        }
        self.snapshots.push(snap);
        if self.config.check_invariants {
            self.check_global()?;
        }
        Ok(())
    }

    fn snapshot(&self) -> MinForwardSnapshot {
        let mut missing = Vec::new();
        for k in self.topology.nodes() {
            for d in self.topology.nodes().filter(|&d| d != k) {
                if self.nodes[k.index()].forward_set(d).is_none_or(BTreeSet::is_empty) {
                    missing.push((k, d));
                }
            }
        }
        MinForwardSnapshot {
            time: self.now,
            missing,
        }
    }

    fn violation(&self, message: String) -> SimError {
        SimError::Invariant {
            time: self.now,
            message,
            recent: self.recent.iter().map(Event::to_string).collect(),
        }
    }

    /// Checks node `k` after its state changed: local consistency,
    /// antisymmetry with its neighbours, and no forwarding loop through it.
    fn check_node(&self, k: NodeId) -> Result<(), SimError> {
        let node = &self.nodes[k.index()];
        node.check_invariants().map_err(|m| self.violation(m))?;
        for (&d, row) in node.main_table() {
            for &i in &row.forward_set {
                if self.nodes[i.index()]
                    .forward_set(d)
                    .is_some_and(|f| f.contains(&k))
                {
                    return Err(self.violation(format!(
                        "{k} and {i} are forward to each other for destination {d}"
                    )));
                }
                if i != d && reaches(&self.nodes, d, i, k) {
                    let cycle = find_cycle(&self.nodes, d).unwrap_or_default();
                    return Err(self.violation(format!(
                        "forwarding loop for destination {d} through {k}: {cycle:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_global(&self) -> Result<(), SimError> {
        for k in self.topology.nodes() {
            self.nodes[k.index()]
                .check_invariants()
                .map_err(|m| self.violation(m))?;
        }
        for d in self.topology.nodes() {
            if let Some(cycle) = find_cycle(&self.nodes, d) {
                return Err(self.violation(format!(
                    "forwarding loop for destination {d}: {cycle:?}"
                )));
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<RunReport, SimError> {
        if self.config.check_invariants {
            self.check_global()?;
        }
        self.snapshots.push(self.snapshot());
        for link in &self.links {
            for p in link.packets() {
                self.flows[p.flow].in_flight += 1;
            }
        }
        let mut protocol = NodeStats::default();
        for n in &self.nodes {
            let s = n.stats();
            protocol.requests_sent += s.requests_sent;
            protocol.requests_resent += s.requests_resent;
            protocol.requests_accepted += s.requests_accepted;
            protocol.requests_rejected += s.requests_rejected;
            protocol.moves_committed += s.moves_committed;
            protocol.moves_declined += s.moves_declined;
            protocol.guard_blocked += s.guard_blocked;
            protocol.stale_responses += s.stale_responses;
            protocol.ignored_packets += s.ignored_packets;
        }
        let forward_sets = self
            .nodes
            .iter()
            .map(|n| {
                let rows = n
                    .main_table()
                    .iter()
                    .map(|(&d, row)| (d, row.forward_set.clone()))
                    .collect();
                (n.id(), rows)
            })
            .collect();
        Ok(RunReport {
            metrics: self.metrics,
            flows: self.flows,
            snapshots: self.snapshots,
            protocol,
            control_sent: self.control_sent,
            control_lost: self.control_lost,
            no_route_drops: self.no_route_drops,
            queue_drops: self.queue_drops,
            events: self.events,
            forward_sets,
            trace: self.trace,
        })
    }
}
