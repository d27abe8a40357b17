//! Core analyses for multi-version software transactional memory histories.
//!
//! The crate models transactional histories as flat event sequences and
//! builds everything else on top of that single currency:
//!
//! - [`history`]: events, well-formedness, completion, validity/legality.
//! - [`conflict`]: single-version and multi-version conflict extraction and
//!   the satisfaction relation between a candidate history and a conflict
//!   order.
//! - [`graph`]: the multi-version conflict graph, cycle detection,
//!   serialization witnesses, and DOT export.
//! - [`oracle`]: brute-force deciders for opacity classes, the fast
//!   graph-based decider, a combined classifier, and seeded generators for
//!   differential testing.
//! - [`scheduler`]: a deterministic simulator of the online multi-version
//!   scheduling rules, driven by explicit interleaving scripts.
//! - [`gc`]: garbage collection of committed transactions and their
//!   versions, with acyclicity preservation.
//!
//! The crate is `no_std` (it allocates but performs no IO); text formats,
//! JSON, and the command-line front end live in the companion `mvcheck`
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod conflict;
pub mod fixtures;
pub mod gc;
pub mod graph;
pub mod history;
pub mod oracle;
pub mod scheduler;

pub use conflict::{ConflictKind, ConflictPair, ConflictSet, OpRef};
pub use graph::{Cycle, EdgeReason, Mvcg};
pub use history::{CommitRef, Event, History, TxnId, TxnStatus};
pub use oracle::{ClassificationReport, GenSpec, Verdict, Witness};
pub use scheduler::{Scheduler, WorkloadStep};
