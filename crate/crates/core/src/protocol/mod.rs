//! Per-node loop-free multipath routing: neighbour and main tables,
//! forward/backward sets, capacity announcements, the move handshake and
//! timers.

mod config;
mod node;
mod packet;
mod tables;


pub use config::{ConfigError, ProtocolConfig, TimerConfig};
pub use node::{Effect, NodeState, NodeStats, PendingMove, TimerKind, CAPACITY_TOLERANCE};
pub use packet::{
    ControlPacket, Direction, PacketKind, PacketParseError, RequestId, UpdateEntry, Verdict,
};
pub use tables::{available_capacity, utilization_from_busy_time, DestinationEntry, NeighborEntry};

use crate::topology::NodeId;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProtocolError {
    #[error("{0} is not a neighbour")]
    UnknownNeighbor(NodeId),
    #[error("{neighbor} is already a forward neighbour for {destination}")]
    AlreadyForward {
        neighbor: NodeId,
        destination: NodeId,
    },
    #[error("observation window is empty")]
    EmptyWindow,
    #[error("invalid utilisation {0}")]
    InvalidUtilization(f64),
}
