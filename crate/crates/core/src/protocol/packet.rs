//! Control packets and their canonical one-line textual form.
//!
//! Trace lines are tab-separated:
//!
//! ```text
//! HELLO      <sender> <capacity_hint|-> <ack:0|1>
//! UPDATE     <sender> <dest>:<capacity>:<B|F> ...
//! MOVE_REQ   <sender> <dest> <request_id>
//! MOVE_RESP  <sender> <dest> <request_id> <ACCEPT|REJECT>
//! ```
//!
//! Capacities are printed with Rust's shortest round-trip float repr, so a
//! parsed line reproduces the packet exactly.

use std::fmt;
use std::str::FromStr;

use crate::format::parse_f64;
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId(pub u64);

/// Which announcement rule produced a NeighborUpdate entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Recipient is in the announcer's backward set: full total capacity.
    Backward,
    /// Recipient is one of the announcer's forward neighbours: total minus
    /// the share routed through the recipient.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateEntry {
    pub destination: NodeId,
    pub capacity: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlPacket {
    Hello {
        sender: NodeId,
        link_capacity_hint: Option<f64>,
        /// Set on the reverse Hello that acknowledges a received one.
        ack: bool,
    },
    NeighborUpdate {
        sender: NodeId,
        entries: Vec<UpdateEntry>,
    },
    ForwardMoveRequest {
        sender: NodeId,
        destination: NodeId,
        request_id: RequestId,
    },
    ForwardMoveResponse {
        sender: NodeId,
        destination: NodeId,
        request_id: RequestId,
        verdict: Verdict,
    },
}

/// Packet type selector, used by the control-loss knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketKind {
    Hello,
    NeighborUpdate,
    MoveRequest,
    MoveResponse,
}

impl FromStr for PacketKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hello" => Ok(PacketKind::Hello),
            "update" | "neighbor_update" => Ok(PacketKind::NeighborUpdate),
            "move_request" => Ok(PacketKind::MoveRequest),
            "move_response" => Ok(PacketKind::MoveResponse),
            other => Err(format!("unknown packet kind `{other}`")),
        }
    }
}

impl ControlPacket {
    pub fn sender(&self) -> NodeId {
        match self {
            ControlPacket::Hello { sender, .. }
            | ControlPacket::NeighborUpdate { sender, .. }
            | ControlPacket::ForwardMoveRequest { sender, .. }
            | ControlPacket::ForwardMoveResponse { sender, .. } => *sender,
        }
    }

    pub fn kind(&self) -> PacketKind {
        match self {
            ControlPacket::Hello { .. } => PacketKind::Hello,
            ControlPacket::NeighborUpdate { .. } => PacketKind::NeighborUpdate,
            ControlPacket::ForwardMoveRequest { .. } => PacketKind::MoveRequest,
            ControlPacket::ForwardMoveResponse { .. } => PacketKind::MoveResponse,
        }
    }
}

impl fmt::Display for ControlPacket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlPacket::Hello {
                sender,
                link_capacity_hint,
                ack,
            } => {
                write!(f, "HELLO\t{sender}\t")?;
                match link_capacity_hint {
                    Some(c) => write!(f, "{c}")?,
                    None => write!(f, "-")?,
                }
                write!(f, "\t{}", u8::from(*ack))
            }
            ControlPacket::NeighborUpdate { sender, entries } => {
                write!(f, "UPDATE\t{sender}")?;
                for e in entries {
                    let tag = match e.direction {
                        Direction::Backward => 'B',
                        Direction::Forward => 'F',
                    };
                    write!(f, "\t{}:{}:{}", e.destination, e.capacity, tag)?;
                }
                Ok(())
            }
            ControlPacket::ForwardMoveRequest {
                sender,
                destination,
                request_id,
            } => write!(f, "MOVE_REQ\t{sender}\t{destination}\t{}", request_id.0),
            ControlPacket::ForwardMoveResponse {
                sender,
                destination,
                request_id,
                verdict,
            } => {
                let v = match verdict {
                    Verdict::Accept => "ACCEPT",
                    Verdict::Reject => "REJECT",
                };
                write!(f, "MOVE_RESP\t{sender}\t{destination}\t{}\t{v}", request_id.0)
            }
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("malformed control packet line: {0}")]
pub struct PacketParseError(pub String);

impl FromStr for ControlPacket {
    type Err = PacketParseError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let err = || PacketParseError(line.to_string());
        let fields: Vec<&str> = line.split('\t').collect();
        let node = |s: &str| s.parse::<NodeId>().map_err(|_| err());
        let id = |s: &str| s.parse::<u64>().map(RequestId).map_err(|_| err());
        match fields.as_slice() {
            ["HELLO", sender, hint, ack] => Ok(ControlPacket::Hello {
                sender: node(sender)?,
                link_capacity_hint: match *hint {
                    "-" => None,
                    h => Some(parse_f64(h).ok_or_else(err)?),
                },
                ack: match *ack {
                    "0" => false,
                    "1" => true,
                    _ => return Err(err()),
                },
            }),
            ["UPDATE", sender, rest @ ..] => {
                let mut entries = Vec::with_capacity(rest.len());
                for item in rest {
                    let parts: Vec<&str> = item.split(':').collect();
                    let [d, c, tag] = parts.as_slice() else {
                        return Err(err());
                    };
                    entries.push(UpdateEntry {
                        destination: node(d)?,
                        capacity: parse_f64(c).ok_or_else(err)?,
                        direction: match *tag {
                            "B" => Direction::Backward,
                            "F" => Direction::Forward,
                            _ => return Err(err()),
                        },
                    });
                }
                Ok(ControlPacket::NeighborUpdate {
                    sender: node(sender)?,
                    entries,
                })
            }
            ["MOVE_REQ", sender, d, rid] => Ok(ControlPacket::ForwardMoveRequest {
                sender: node(sender)?,
                destination: node(d)?,
                request_id: id(rid)?,
            }),
            ["MOVE_RESP", sender, d, rid, v] => Ok(ControlPacket::ForwardMoveResponse {
                sender: node(sender)?,
                destination: node(d)?,
                request_id: id(rid)?,
                verdict: match *v {
                    "ACCEPT" => Verdict::Accept,
                    "REJECT" => Verdict::Reject,
                    _ => return Err(err()),
                },
            }),
            _ => Err(err()),
        }
    }
}
