//! Workloads, the deterministic simulator, oracles and the fuzzer.

pub mod fuzz;
pub mod oracle;
pub mod replay;
pub mod sim;
pub mod workload;

pub use fuzz::{check_case, check_run, fuzz, generate_case, FuzzCase, FuzzConfig, FuzzFailure, FuzzSummary};
pub use oracle::{abort_transparency, check_abort_transparency, check_serializable, Verdict};
pub use replay::{replay_trace, ReplayError, ReplayReport};
pub use sim::{run_simulated, RunOutcome, SimError};
pub use workload::{parse_workload, Schedule, Terminal, Workload, WorkloadError};
