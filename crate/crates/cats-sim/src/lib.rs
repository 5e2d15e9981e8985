//! Deterministic discrete-event simulator for priority-aware transport
//! scheduling.
//!
//! The library models a single sender/receiver pair over a dumbbell path
//! and compares two ways of draining a web-style workload:
//!
//! * **cats**: a conductor intercepts application writes into five
//!   priority queues and feeds the transport one MSS slice at a time,
//!   strict priority tempered by a hysteresis debt ledger so low levels
//!   cannot starve ([`conductor`]).
//! * **baseline**: writes flow through a FIFO backlog in submission
//!   order, the usual socket-buffer picture.
//!
//! Both share the same transport (cumulative-ACK reliability, RTO with
//! exponential backoff, fast retransmit), a model congestion controller
//! ([`cc`]), drop-tail links ([`net`]), and metrics ([`metrics`]).
//! [`experiment`] ties it all together behind a TOML config.
//!
//! Every run is a pure function of its configuration: same config, same
//! report, byte for byte.
//!
//! Start with `examples/priority_inversion.rs`, which reproduces the
//! headline result, then `examples/qoe_compare.rs` for the full metric
//! table. The other examples each exercise one subsystem:
//! `debt_mechanics` and `fairness_starvation` for the ledger,
//! `load_shedding` for congestion shedding, `cc_startup` for the
//! controller, `lossy_link` for retransmission, `throughput_profile`
//! and `custom_workload` for measurement plumbing.

pub mod cc;
pub mod conductor;
pub mod experiment;
pub mod metrics;
pub mod net;
pub mod sim;
pub mod transport;
pub mod wire;
pub mod workload;
