//! Transactions under strict two-phase locking.
//!
//! A transaction issues public calls one at a time. Each call is translated;
//! NULL calls return at once with no monitor interaction. Otherwise the
//! private invocation enters the object's monitor and is either deduced,
//! admitted (`Ready`, to be executed by [`TxnManager::proceed`]) or
//! suspended. Nothing is released before the transaction ends: commit
//! releases every registered invocation, abort first applies the logged
//! inverses in reverse order.
//!
//! Whenever an invocation suspends, the waits-for graph between transactions
//! is rebuilt from the monitors and every cycle is broken by aborting its
//! youngest transaction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::adt::{AdtSpec, Inverse, OpName, ParamFn, PrivateCall, PrivateInvocation, PublicInvocation, Translated};
use crate::error::TxnError;
use crate::history::{Event, EventKind, History, Metrics};
use crate::ids::{InvocationId, ObjectId, TxnId};
use crate::monitor::{Admission, ObjectMonitor};
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxnStatus {
    Active,
    Committing,
    Committed,
    Aborting,
    Aborted,
}

/// A logged invocation whose inverse is not NULL.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndoEntry {
    pub object: ObjectId,
    pub invocation: InvocationId,
    pub direct: PrivateCall,
    pub inverse: PrivateCall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PendingState {
    /// Suspended in in-control, waiting for a signal.
    Blocked,
    /// Admitted to execution; runs on the next `proceed`.
    Ready,
}

#[derive(Clone, Debug)]
struct Pending {
    object: ObjectId,
    invocation: InvocationId,
    out_mapping: ParamFn,
    state: PendingState,
}

#[derive(Clone, Debug)]
pub struct TransactionRecord {
    pub id: TxnId,
    pub name: String,
    pub status: TxnStatus,
    pub undo_log: Vec<UndoEntry>,
    /// Invocations still registered in some monitor.
    registered: BTreeSet<(ObjectId, InvocationId)>,
    pending: Option<Pending>,
}

impl TransactionRecord {
    pub fn registered(&self) -> impl Iterator<Item = &(ObjectId, InvocationId)> {
        self.registered.iter()
    }

    pub fn pending(&self) -> Option<(ObjectId, InvocationId, PendingState)> {
        self.pending.as_ref().map(|p| (p.object, p.invocation, p.state))
    }
}

/// Outcome of issuing or continuing a public call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Progress {
    /// The call returned these public out-params.
    Completed(Vec<Value>),
    /// Admitted; `proceed` executes it.
    Ready,
    /// Suspended until another transaction releases or executes.
    Suspended,
}

#[derive(Debug, Default)]
pub struct TxnManager {
    objects: Vec<ObjectMonitor>,
    txns: BTreeMap<TxnId, TransactionRecord>,
    next_txn: u64,
    next_invocation: u64,
    history: History,
}

impl TxnManager {
    pub fn new() -> Self {
        TxnManager::default()
    }

    pub fn add_object(&mut self, name: impl Into<String>, spec: Arc<AdtSpec>, initial: Value) -> ObjectId {
        let id = ObjectId(self.objects.len());
        self.objects.push(ObjectMonitor::new(id, name, spec, initial));
        id
    }

    pub fn object(&self, id: ObjectId) -> Result<&ObjectMonitor, TxnError> {
        self.objects.get(id.0).ok_or(TxnError::UnknownObject(id))
    }

    pub fn objects(&self) -> &[ObjectMonitor] {
        &self.objects
    }

    pub fn object_by_name(&self, name: &str) -> Option<ObjectId> {
        self.objects.iter().find(|o| o.name() == name).map(ObjectMonitor::id)
    }

    pub fn begin(&mut self) -> TxnId {
        let name = TxnId(self.next_txn + 1).to_string();
        self.begin_named(name)
    }

    pub fn begin_named(&mut self, name: impl Into<String>) -> TxnId {
        self.next_txn += 1;
        let id = TxnId(self.next_txn);
        self.txns.insert(
            id,
            TransactionRecord {
                id,
                name: name.into(),
                status: TxnStatus::Active,
                undo_log: Vec::new(),
                registered: BTreeSet::new(),
                pending: None,
            },
        );
        self.history.push(Event::txn(EventKind::Begin, id));
        id
    }

    pub fn record(&self, txn: TxnId) -> Result<&TransactionRecord, TxnError> {
        self.txns.get(&txn).ok_or(TxnError::UnknownTxn(txn))
    }

    pub fn status(&self, txn: TxnId) -> Result<TxnStatus, TxnError> {
        Ok(self.record(txn)?.status)
    }

    pub fn pending_state(&self, txn: TxnId) -> Option<PendingState> {
        self.txns.get(&txn)?.pending.as_ref().map(|p| p.state)
    }

    fn active(&self, txn: TxnId) -> Result<&TransactionRecord, TxnError> {
        let rec = self.record(txn)?;
        match rec.status {
            TxnStatus::Active => Ok(rec),
            TxnStatus::Aborted | TxnStatus::Aborting => Err(TxnError::TransactionAborted(txn)),
            _ => Err(TxnError::NotActive(txn)),
        }
    }

    /// Issues a public call. Returns the public outs when the call completes
    /// without execution (NULL translation or deduction).
    pub fn perform(&mut self, txn: TxnId, object: ObjectId, call: &PublicInvocation) -> Result<Progress, TxnError> {
        if self.active(txn)?.pending.is_some() {
            return Err(TxnError::OperationPending(txn));
        }
        let spec = self.object(object)?.spec().clone();
        let public_op = spec.check_public(call)?.name;
        let (private, out_mapping) = match spec.translate_public(call)? {
            Translated::NullDirect(outs) => {
                self.history.push(Event {
                    kind: EventKind::NullOp,
                    txn,
                    object: Some(object),
                    invocation: None,
                    op: Some(public_op),
                    inputs: call.args.clone(),
                    outputs: outs.clone(),
                });
                return Ok(Progress::Completed(outs));
            }
            Translated::Private { call, out_mapping } => (call, out_mapping),
        };

        self.next_invocation += 1;
        let id = InvocationId(self.next_invocation);
        let op = private.op;
        self.history
            .push(Event::invocation(EventKind::Invoke, txn, object, id, op).with_inputs(private.args.clone()));
        let inv = PrivateInvocation::new(id, txn, object, private);
        let admission = self.objects[object.0].enter(inv);
        let rec = self.txns.get_mut(&txn).expect("checked active");
        rec.registered.insert((object, id));
        match admission {
            Admission::Deduced(outs) => {
                self.history
                    .push(Event::invocation(EventKind::Deduce, txn, object, id, op).with_outputs(outs.clone()));
                Ok(Progress::Completed(out_mapping(&outs)))
            }
            Admission::Admitted => {
                rec.pending = Some(Pending {
                    object,
                    invocation: id,
                    out_mapping,
                    state: PendingState::Ready,
                });
                Ok(Progress::Ready)
            }
            Admission::Blocked { .. } => {
                rec.pending = Some(Pending {
                    object,
                    invocation: id,
                    out_mapping,
                    state: PendingState::Blocked,
                });
                self.history.push(Event::invocation(EventKind::Block, txn, object, id, op));
                let victims = self.detect_and_resolve_deadlock();
                if victims.contains(&txn) {
                    return Err(TxnError::TransactionAborted(txn));
                }
                // a victim's release may already have woken this invocation
                match self.pending_state(txn) {
                    Some(PendingState::Ready) => Ok(Progress::Ready),
                    _ => Ok(Progress::Suspended),
                }
            }
        }
    }

    /// Executes the admitted invocation of `txn` (steps 3 and 4) and
    /// completes its public call.
    pub fn proceed(&mut self, txn: TxnId) -> Result<Vec<Value>, TxnError> {
        let rec = self.active(txn)?;
        match &rec.pending {
            Some(p) if p.state == PendingState::Ready => {}
            _ => return Err(TxnError::NothingToProceed(txn)),
        }
        self.run_ready(txn)
    }

    fn run_ready(&mut self, txn: TxnId) -> Result<Vec<Value>, TxnError> {
        let pending = self
            .txns
            .get_mut(&txn)
            .and_then(|r| r.pending.take())
            .ok_or(TxnError::NothingToProceed(txn))?;
        let (object, id) = (pending.object, pending.invocation);
        let monitor = &mut self.objects[object.0];
        let outs = monitor.execute(id)?;
        let call = monitor.invocation(id).expect("registered").call.clone();
        self.history.push(
            Event::invocation(EventKind::Exec, txn, object, id, call.op)
                .with_inputs(call.args.clone())
                .with_outputs(outs.clone()),
        );
        let woken = self.objects[object.0].out_control(id)?;
        self.wake(object, woken);
        let inverse = self.objects[object.0].spec().determine_inverse(&call, &outs)?;
        if let Inverse::Apply(inverse) = inverse {
            let rec = self.txns.get_mut(&txn).expect("known txn");
            rec.undo_log.push(UndoEntry {
                object,
                invocation: id,
                direct: call,
                inverse,
            });
        }
        Ok((pending.out_mapping)(&outs))
    }

    fn wake(&mut self, object: ObjectId, woken: Vec<InvocationId>) {
        for id in woken {
            let monitor = &self.objects[object.0];
            let inv = monitor.invocation(id).expect("woken invocation is registered");
            let (txn, op) = (inv.txn, inv.call.op);
            self.history.push(Event::invocation(EventKind::Wake, txn, object, id, op));
            let pending = self
                .txns
                .get_mut(&txn)
                .and_then(|r| r.pending.as_mut())
                .expect("woken invocation is pending");
            debug_assert_eq!(pending.invocation, id);
            pending.state = PendingState::Ready;
        }
    }

    fn release(&mut self, txn: TxnId, object: ObjectId, id: InvocationId, kind: EventKind) -> Result<(), TxnError> {
        let op: OpName = self.objects[object.0].invocation(id).expect("registered").call.op;
        let woken = self.objects[object.0].commit_or_reject(id)?;
        self.history.push(Event::invocation(kind, txn, object, id, op));
        self.txns.get_mut(&txn).expect("known txn").registered.remove(&(object, id));
        self.wake(object, woken);
        Ok(())
    }

    /// Releases every invocation of `txn` in ascending (object, invocation)
    /// order.
    pub fn commit(&mut self, txn: TxnId) -> Result<(), TxnError> {
        let rec = self.active(txn)?;
        if rec.pending.is_some() {
            return Err(TxnError::OperationPending(txn));
        }
        let registered: Vec<_> = rec.registered.iter().copied().collect();
        self.txns.get_mut(&txn).expect("known txn").status = TxnStatus::Committing;
        for (object, id) in registered {
            self.release(txn, object, id, EventKind::Commit)?;
        }
        self.txns.get_mut(&txn).expect("known txn").status = TxnStatus::Committed;
        self.history.push(Event::txn(EventKind::Commit, txn));
        Ok(())
    }

    /// Rolls `txn` back: withdraws its blocked invocation, finishes an
    /// admitted one, undoes the log in reverse order and releases the rest.
    pub fn abort(&mut self, txn: TxnId) -> Result<(), TxnError> {
        let status = self.status(txn)?;
        if status != TxnStatus::Active {
            return Err(if matches!(status, TxnStatus::Aborted | TxnStatus::Aborting) {
                TxnError::TransactionAborted(txn)
            } else {
                TxnError::NotActive(txn)
            });
        }
        self.txns.get_mut(&txn).expect("known txn").status = TxnStatus::Aborting;
        match self.txns[&txn].pending.as_ref().map(|p| (p.object, p.invocation, p.state)) {
            Some((object, id, PendingState::Blocked)) => {
                let op = self.objects[object.0].invocation(id).expect("registered").call.op;
                let woken = self.objects[object.0].withdraw_blocked(id)?;
                self.history.push(Event::invocation(EventKind::Withdraw, txn, object, id, op));
                let rec = self.txns.get_mut(&txn).expect("known txn");
                rec.registered.remove(&(object, id));
                rec.pending = None;
                self.wake(object, woken);
            }
            Some((_, _, PendingState::Ready)) => {
                self.run_ready(txn)?;
            }
            None => {}
        }
        let log = std::mem::take(&mut self.txns.get_mut(&txn).expect("known txn").undo_log);
        for entry in log.iter().rev() {
            let outs = self.objects[entry.object.0].apply_inverse(&entry.inverse)?;
            self.history.push(
                Event::invocation(EventKind::Inverse, txn, entry.object, entry.invocation, entry.inverse.op)
                    .with_inputs(entry.inverse.args.clone())
                    .with_outputs(outs),
            );
            self.release(txn, entry.object, entry.invocation, EventKind::Abort)?;
        }
        let rest: Vec<_> = self.txns[&txn].registered.iter().copied().collect();
        for (object, id) in rest {
            self.release(txn, object, id, EventKind::Abort)?;
        }
        let rec = self.txns.get_mut(&txn).expect("known txn");
        rec.undo_log = log;
        rec.status = TxnStatus::Aborted;
        self.history.push(Event::txn(EventKind::Abort, txn));
        Ok(())
    }

    /// Transaction-level waits-for edges, rebuilt from the monitors.
    pub fn waits_for(&self) -> BTreeMap<TxnId, BTreeSet<TxnId>> {
        let mut graph: BTreeMap<TxnId, BTreeSet<TxnId>> = BTreeMap::new();
        for rec in self.txns.values() {
            let Some(p) = rec.pending.as_ref().filter(|p| p.state == PendingState::Blocked) else {
                continue;
            };
            let monitor = &self.objects[p.object.0];
            for blocker in monitor.control().blockers_of(p.invocation) {
                let owner = monitor.owner(blocker).expect("blocker is registered");
                assert_ne!(owner, rec.id, "transaction {} waits for itself", rec.id);
                graph.entry(rec.id).or_default().insert(owner);
            }
        }
        graph
    }

    /// Aborts the youngest transaction of each waits-for cycle until none
    /// remains. Returns the victims in the order they were chosen.
    pub fn detect_and_resolve_deadlock(&mut self) -> Vec<TxnId> {
        let mut victims = Vec::new();
        while let Some(cycle) = find_cycle(&self.waits_for()) {
            let victim = *cycle.iter().max().expect("cycle is non-empty");
            self.history.push(Event::txn(EventKind::Victim, victim));
            self.abort(victim).expect("victim is active");
            victims.push(victim);
        }
        victims
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn metrics(&self) -> Metrics {
        let mut m = Metrics::from_history(&self.history);
        for o in &self.objects {
            m.max_in_execution.insert(o.name().to_string(), o.max_in_execution());
        }
        m
    }

    pub fn txn_name(&self, txn: TxnId) -> String {
        self.txns.get(&txn).map_or_else(|| txn.to_string(), |r| r.name.clone())
    }

    pub fn trace_text(&self) -> String {
        self.history
            .render(|t| self.txn_name(t), |o| self.objects[o.0].name().to_string())
    }

    /// Current state of every object, by name, in declaration order.
    pub fn final_states(&self) -> Vec<(String, Value)> {
        self.objects
            .iter()
            .map(|o| (o.name().to_string(), o.state().clone()))
            .collect()
    }

    /// Objects whose monitor still holds registrations.
    pub fn residual_registrations(&self) -> Vec<ObjectId> {
        self.objects.iter().filter(|o| !o.is_idle()).map(ObjectMonitor::id).collect()
    }
}

/// First cycle found by a depth-first search visiting nodes and successors
/// in ascending order.
fn find_cycle(graph: &BTreeMap<TxnId, BTreeSet<TxnId>>) -> Option<Vec<TxnId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        OnStack,
        Done,
    }
    fn visit(
        node: TxnId,
        graph: &BTreeMap<TxnId, BTreeSet<TxnId>>,
        marks: &mut BTreeMap<TxnId, Mark>,
        stack: &mut Vec<TxnId>,
    ) -> Option<Vec<TxnId>> {
        marks.insert(node, Mark::OnStack);
        stack.push(node);
        for next in graph.get(&node).into_iter().flatten() {
            match marks.get(next) {
                Some(Mark::OnStack) => {
                    let start = stack.iter().position(|n| n == next).expect("on stack");
                    return Some(stack[start..].to_vec());
                }
                Some(Mark::Done) => {}
                None => {
                    if let Some(cycle) = visit(*next, graph, marks, stack) {
                        return Some(cycle);
                    }
                }
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for node in graph.keys() {
        if !marks.contains_key(node) {
            if let Some(cycle) = visit(*node, graph, &mut marks, &mut Vec::new()) {
                return Some(cycle);
            }
        }
    }
    None
}
