//! Commutativity-based concurrency control and recovery for abstract data
//! types.
//!
//! Objects are kept as a single, always up-to-date copy. Each user-level
//! (public) operation is translated into a private operation whose
//! out-parameters are rich enough to derive its inverse. A per-object monitor
//! admits a private operation only when it commutes, per the ADT's in- and
//! out-commutativity tables, with every other active operation; it may also
//! return the operation's results without running it when they can be deduced
//! from results already observed. Transactions follow strict two-phase
//! locking and abort by applying inverses in reverse order.
//!
//! Module map:
//!
//! - [`value`], [`adt`]: the value model and the two-level interface.
//! - [`commutativity`], [`validate`]: commutativity tables, deduction, and a
//!   brute-force validator for them.
//! - [`builtin`]: STACK, SET, REAL and BOOLEAN.
//! - [`monitor`]: the per-object four-step protocol.
//! - [`txn`], [`history`]: transactions, deadlock handling, event history.
//! - [`harness`]: workload files, the deterministic simulator, oracles and
//!   the fuzzer.

pub mod adt;
pub mod builtin;
pub mod commutativity;
pub mod error;
pub mod exec;
pub mod harness;
pub mod history;
pub mod ids;
pub mod monitor;
pub mod txn;
pub mod validate;
pub mod value;

pub use adt::{AdtSpec, Inverse, PrivateCall, PrivateInvocation, PublicInvocation, Translated};
pub use builtin::{register_builtin, Registry};
pub use commutativity::{CommutTables, OutVerdict};
pub use error::{AdtError, MonitorError, TxnError};
pub use exec::Exec;
pub use ids::{InvocationId, ObjectId, TxnId};
pub use txn::TxnManager;
pub use value::{Item, Report, Value};
