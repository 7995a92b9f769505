use thiserror::Error;

use crate::ids::{InvocationId, ObjectId, TxnId};
use crate::value::Tag;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expected {tag}, found `{token}`")]
pub struct ParseValueError {
    pub tag: Tag,
    pub token: String,
}

impl ParseValueError {
    pub fn new(tag: Tag, token: &str) -> Self {
        ParseValueError {
            tag,
            token: token.to_string(),
        }
    }
}

/// Errors raised by ADT descriptions and their reference implementations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdtError {
    #[error("unknown ADT `{0}`")]
    UnknownAdt(String),
    #[error("{adt} has no operation `{op}`")]
    UnknownOp { adt: String, op: String },
    #[error("{op} takes {expected} argument(s), got {found}")]
    ArityMismatch {
        op: String,
        expected: usize,
        found: usize,
    },
    #[error("{op} argument {index}: expected {expected}, found {found}")]
    TagMismatch {
        op: String,
        index: usize,
        expected: Tag,
        found: Tag,
    },
    #[error("no {kind} rule of {adt} matches {op}")]
    NoRuleMatches {
        adt: String,
        kind: &'static str,
        op: String,
    },
    #[error("{count} {kind} rules of {adt} match {op}")]
    AmbiguousRules {
        adt: String,
        kind: &'static str,
        op: String,
        count: usize,
    },
    #[error("precondition of {op} violated: {reason}")]
    PreconditionViolated { op: String, reason: String },
    #[error("bad initial state literal `{literal}` for {adt}")]
    BadStateLiteral { adt: String, literal: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("invocation {0} is not registered in this monitor")]
    UnknownInvocation(InvocationId),
    #[error("invocation {0} is not in execution")]
    NotInExecution(InvocationId),
    #[error("invocation {0} would execute a second time")]
    ExecutedTwice(InvocationId),
    #[error(transparent)]
    Adt(#[from] AdtError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxnError {
    #[error("unknown transaction {0}")]
    UnknownTxn(TxnId),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("transaction {0} is not active")]
    NotActive(TxnId),
    #[error("transaction {0} was aborted")]
    TransactionAborted(TxnId),
    #[error("transaction {0} already has an operation in flight")]
    OperationPending(TxnId),
    #[error("transaction {0} has no admitted operation to execute")]
    NothingToProceed(TxnId),
    #[error(transparent)]
    Adt(#[from] AdtError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
}
