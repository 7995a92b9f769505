//! Global event history and derived metrics.
//!
//! Trace lines look like
//! `<index> <kind> txn=<name> obj=<name|-> op=<OP|-> in=[...] out=[...] inv=<id|->`.
//! `COMMIT` and `ABORT` appear once per released invocation (with `obj`,
//! `op` and `inv` set) and once for the transaction itself (`obj=-`).

use std::collections::BTreeMap;
use std::fmt;

use crate::adt::OpName;
use crate::ids::{InvocationId, ObjectId, TxnId};
use crate::value::{render_params, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Begin,
    Invoke,
    Block,
    Wake,
    Exec,
    Deduce,
    NullOp,
    Commit,
    Abort,
    Inverse,
    Withdraw,
    Victim,
}

impl EventKind {
    pub const ALL: [EventKind; 12] = [
        EventKind::Begin,
        EventKind::Invoke,
        EventKind::Block,
        EventKind::Wake,
        EventKind::Exec,
        EventKind::Deduce,
        EventKind::NullOp,
        EventKind::Commit,
        EventKind::Abort,
        EventKind::Inverse,
        EventKind::Withdraw,
        EventKind::Victim,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Begin => "BEGIN",
            EventKind::Invoke => "INVOKE",
            EventKind::Block => "BLOCK",
            EventKind::Wake => "WAKE",
            EventKind::Exec => "EXEC",
            EventKind::Deduce => "DEDUCE",
            EventKind::NullOp => "NULLOP",
            EventKind::Commit => "COMMIT",
            EventKind::Abort => "ABORT",
            EventKind::Inverse => "INVERSE",
            EventKind::Withdraw => "WITHDRAW",
            EventKind::Victim => "VICTIM",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub kind: EventKind,
    pub txn: TxnId,
    pub object: Option<ObjectId>,
    pub invocation: Option<InvocationId>,
    pub op: Option<OpName>,
    pub inputs: Vec<Value>,
    pub outputs: Vec<Value>,
}

impl Event {
    pub fn txn(kind: EventKind, txn: TxnId) -> Self {
        Event {
            kind,
            txn,
            object: None,
            invocation: None,
            op: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn invocation(kind: EventKind, txn: TxnId, object: ObjectId, invocation: InvocationId, op: OpName) -> Self {
        Event {
            kind,
            txn,
            object: Some(object),
            invocation: Some(invocation),
            op: Some(op),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn with_inputs(mut self, inputs: Vec<Value>) -> Self {
        self.inputs = inputs;
        self
    }

    pub fn with_outputs(mut self, outputs: Vec<Value>) -> Self {
        self.outputs = outputs;
        self
    }

    /// True for the transaction-level COMMIT/ABORT (not a release of a
    /// single invocation).
    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, EventKind::Commit | EventKind::Abort) && self.invocation.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    events: Vec<Event>,
}

impl History {
    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Renders the trace, one line per event, naming transactions and
    /// objects through the given lookups.
    pub fn render(&self, txn_name: impl Fn(TxnId) -> String, object_name: impl Fn(ObjectId) -> String) -> String {
        let mut out = String::new();
        for (index, e) in self.events.iter().enumerate() {
            let obj = e.object.map(&object_name).unwrap_or_else(|| "-".into());
            let inv = e.invocation.map(|i| i.0.to_string()).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{index} {} txn={} obj={obj} op={} in={} out={} inv={inv}\n",
                e.kind,
                txn_name(e.txn),
                e.op.unwrap_or("-"),
                render_params(&e.inputs),
                render_params(&e.outputs),
            ));
        }
        out
    }
}

/// Counters derived from a history, plus per-object peak concurrency.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    pub invocations: usize,
    pub executions: usize,
    pub deductions: usize,
    pub withdrawals: usize,
    pub null_ops: usize,
    pub blocks: usize,
    pub wakeups: usize,
    pub commits: usize,
    pub aborts: usize,
    pub deadlock_victims: usize,
    pub inverses: usize,
    /// Object name to the peak size of its in-execution set.
    pub max_in_execution: BTreeMap<String, usize>,
}

impl Metrics {
    pub fn from_history(history: &History) -> Self {
        let mut m = Metrics::default();
        for e in history.events() {
            match e.kind {
                EventKind::Invoke => m.invocations += 1,
                EventKind::Exec => m.executions += 1,
                EventKind::Deduce => m.deductions += 1,
                EventKind::Withdraw => m.withdrawals += 1,
                EventKind::NullOp => m.null_ops += 1,
                EventKind::Block => m.blocks += 1,
                EventKind::Wake => m.wakeups += 1,
                EventKind::Commit if e.is_terminal() => m.commits += 1,
                EventKind::Abort if e.is_terminal() => m.aborts += 1,
                EventKind::Victim => m.deadlock_victims += 1,
                EventKind::Inverse => m.inverses += 1,
                _ => {}
            }
        }
        m
    }

    /// Invocations that obtained their out-params.
    pub fn admitted(&self) -> usize {
        self.invocations - self.withdrawals
    }

    /// Executions plus deductions account for every admitted invocation,
    /// and nothing wakes that did not block first.
    pub fn is_consistent(&self) -> bool {
        self.executions + self.deductions == self.admitted() && self.blocks >= self.wakeups
    }
}

impl std::ops::AddAssign<&Metrics> for Metrics {
    fn add_assign(&mut self, other: &Metrics) {
        self.invocations += other.invocations;
        self.executions += other.executions;
        self.deductions += other.deductions;
        self.withdrawals += other.withdrawals;
        self.null_ops += other.null_ops;
        self.blocks += other.blocks;
        self.wakeups += other.wakeups;
        self.commits += other.commits;
        self.aborts += other.aborts;
        self.deadlock_victims += other.deadlock_victims;
        self.inverses += other.inverses;
        for (object, peak) in &other.max_in_execution {
            let entry = self.max_in_execution.entry(object.clone()).or_default();
            *entry = (*entry).max(*peak);
        }
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invocations {}", self.invocations)?;
        writeln!(f, "executions {}", self.executions)?;
        writeln!(f, "deductions {}", self.deductions)?;
        writeln!(f, "null_ops {}", self.null_ops)?;
        writeln!(f, "blocks {}", self.blocks)?;
        writeln!(f, "wakeups {}", self.wakeups)?;
        writeln!(f, "withdrawals {}", self.withdrawals)?;
        writeln!(f, "inverses {}", self.inverses)?;
        writeln!(f, "commits {}", self.commits)?;
        writeln!(f, "aborts {}", self.aborts)?;
        writeln!(f, "deadlock_victims {}", self.deadlock_victims)?;
        for (object, peak) in &self.max_in_execution {
            writeln!(f, "max_in_execution {object} {peak}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_line_format() {
        let mut h = History::default();
        h.push(Event::txn(EventKind::Begin, TxnId(1)));
        h.push(
            Event::invocation(EventKind::Deduce, TxnId(2), ObjectId(0), InvocationId(4), "POP")
                .with_outputs(vec![Value::Unit, Value::Report(crate::value::Report::EmptyStack)]),
        );
        let text = h.render(|t| t.to_string(), |_| "S".into());
        assert_eq!(
            text,
            "0 BEGIN txn=T1 obj=- op=- in=[] out=[] inv=-\n\
             1 DEDUCE txn=T2 obj=S op=POP in=[] out=[⊥,EmptyStack] inv=4\n"
        );
    }

    #[test]
    fn kinds_round_trip() {
        for k in EventKind::ALL {
            assert_eq!(EventKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(EventKind::parse("NOPE"), None);
    }

    #[test]
    fn metrics_count_terminal_events_only() {
        let mut h = History::default();
        h.push(Event::invocation(EventKind::Invoke, TxnId(1), ObjectId(0), InvocationId(1), "PUSH"));
        h.push(Event::invocation(EventKind::Exec, TxnId(1), ObjectId(0), InvocationId(1), "PUSH"));
        h.push(Event::invocation(EventKind::Commit, TxnId(1), ObjectId(0), InvocationId(1), "PUSH"));
        h.push(Event::txn(EventKind::Commit, TxnId(1)));
        let m = Metrics::from_history(&h);
        assert_eq!((m.commits, m.executions, m.admitted()), (1, 1, 1));
        assert!(m.is_consistent());
    }
}
