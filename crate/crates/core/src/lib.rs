//! Loop-free multipath distance-vector routing, simulated.
//!
//! Each router keeps, per destination, a *forward set* of next hops and
//! treats every other neighbour as backward. Routers announce available
//! capacity towards each destination, grow their forward sets through a
//! two-way handshake, and split traffic across forward neighbours in
//! proportion to the capacity reachable through each. Traffic never flows
//! to a backward neighbour, so the per-destination forwarding graph stays
//! acyclic.
//!
//! The crate is layered:
//!
//! - [`topology`]: static graph and its file format.
//! - [`protocol`]: the per-node state machine, free of any clock.
//! - [`forwarding`]: next-hop choice in multipath, single-path and ECMP modes.
//! - [`sim`]: the deterministic discrete-event kernel driving it all.
//! - [`metrics`]: post-processing of a run into the reported statistics and CSVs.
//! - [`scenario`]: scenario and sweep files, and the runners used by the CLI.

pub mod format;
pub mod forwarding;
pub mod metrics;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod topology;

pub use topology::{NodeId, Topology};
