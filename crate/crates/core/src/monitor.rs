//! Per-object monitor implementing the four-step protocol.
//!
//! Each private invocation on an object goes through:
//!
//! 1. deduction: if its out-params follow from the results of executed
//!    operations, it is registered as executed and returns without running;
//! 2. in-control: it is compared with every blocked, in-execution and
//!    executed operation of other transactions, and waits until all
//!    conflicting ones have gone away;
//! 3. execution on the single copy of the object;
//! 4. out-control: with its out-params now known, operations blocked on it
//!    are re-tested with out-commutativity and released where possible.
//!
//! Commit or reject later removes the invocation and releases its
//! dependents. Steps 1, 2 and 4 and commit/reject/withdraw are the monitor's
//! entry sections; this type is a plain state machine, so callers provide
//! mutual exclusion (the simulator runs one entry at a time). A suspended
//! invocation is "signalled" by moving it from `blocked` to `in_execution`;
//! the entry points return the ids signalled, in ascending order.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::adt::{AdtSpec, Lifecycle, Origin, PrivateCall, PrivateInvocation};
use crate::commutativity::OutVerdict;
use crate::error::MonitorError;
use crate::ids::{InvocationId, ObjectId, TxnId};
use crate::value::Value;

/// Classification and dependency bookkeeping of one object.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonitorState {
    pub blocked: BTreeSet<InvocationId>,
    pub in_execution: BTreeSet<InvocationId>,
    pub executed: BTreeSet<InvocationId>,
    /// Number of operations each blocked invocation still waits for.
    pub waiting_for: BTreeMap<InvocationId, usize>,
    /// Operations blocked by a given operation.
    pub blocks: BTreeMap<InvocationId, BTreeSet<InvocationId>>,
}

impl MonitorState {
    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
            && self.in_execution.is_empty()
            && self.executed.is_empty()
            && self.waiting_for.is_empty()
            && self.blocks.values().all(BTreeSet::is_empty)
    }

    pub fn contains(&self, id: InvocationId) -> bool {
        self.blocked.contains(&id) || self.in_execution.contains(&id) || self.executed.contains(&id)
    }

    pub fn add_edge(&mut self, blocker: InvocationId, waiter: InvocationId) {
        if self.blocks.entry(blocker).or_default().insert(waiter) {
            *self.waiting_for.entry(waiter).or_default() += 1;
        }
    }

    /// Removes one edge; returns true when `waiter` has nothing left to
    /// wait for.
    pub fn remove_edge(&mut self, blocker: InvocationId, waiter: InvocationId) -> bool {
        let removed = self.blocks.get_mut(&blocker).is_some_and(|s| s.remove(&waiter));
        if !removed {
            return false;
        }
        match self.waiting_for.get_mut(&waiter) {
            Some(count) if *count > 1 => {
                *count -= 1;
                false
            }
            Some(_) => {
                self.waiting_for.remove(&waiter);
                true
            }
            None => false,
        }
    }

    /// Operations `waiter` is blocked on.
    pub fn blockers_of(&self, waiter: InvocationId) -> Vec<InvocationId> {
        self.blocks
            .iter()
            .filter(|(_, ws)| ws.contains(&waiter))
            .map(|(b, _)| *b)
            .collect()
    }

    /// Structural invariants that must hold after every entry section.
    pub fn check_invariants(&self) -> Result<(), String> {
        for id in &self.blocked {
            if self.in_execution.contains(id) || self.executed.contains(id) {
                return Err(format!("invocation {id} classified twice"));
            }
        }
        if let Some(id) = self.in_execution.intersection(&self.executed).next() {
            return Err(format!("invocation {id} both in execution and executed"));
        }
        let mut in_degree: BTreeMap<InvocationId, usize> = BTreeMap::new();
        for (blocker, waiters) in &self.blocks {
            if !waiters.is_empty() && !self.contains(*blocker) {
                return Err(format!("blocker {blocker} is not an active or blocked invocation"));
            }
            for w in waiters {
                if w <= blocker {
                    return Err(format!("edge {blocker} -> {w} points backwards in arrival order"));
                }
                *in_degree.entry(*w).or_default() += 1;
            }
        }
        for (w, count) in &self.waiting_for {
            if in_degree.get(w).copied().unwrap_or(0) != *count {
                return Err(format!(
                    "waiting_for({w}) = {count} but {} edges point at it",
                    in_degree.get(w).copied().unwrap_or(0)
                ));
            }
            if *count > 0 && !self.blocked.contains(w) {
                return Err(format!("invocation {w} waits but is not blocked"));
            }
        }
        for (w, degree) in &in_degree {
            if self.waiting_for.get(w) != Some(degree) {
                return Err(format!("invocation {w} has {degree} blockers but no matching count"));
            }
        }
        for w in &self.blocked {
            if self.waiting_for.get(w).copied().unwrap_or(0) == 0 {
                return Err(format!("invocation {w} is blocked on nothing"));
            }
        }
        Ok(())
    }
}

/// Result of steps (1) and (2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Admission {
    /// Out-params deduced; the invocation is registered as executed and
    /// never runs.
    Deduced(Vec<Value>),
    /// Admitted into execution.
    Admitted,
    /// Suspended until signalled.
    Blocked { waiting_for: usize },
}

/// A shared object: the single up-to-date copy of its state plus its
/// monitor.
#[derive(Debug)]
pub struct ObjectMonitor {
    id: ObjectId,
    name: String,
    spec: Arc<AdtSpec>,
    state: Value,
    control: MonitorState,
    invocations: BTreeMap<InvocationId, PrivateInvocation>,
    /// Step-(3) runs per invocation. Kept after release for auditing.
    executions: BTreeMap<InvocationId, u32>,
    max_in_execution: usize,
}

impl ObjectMonitor {
    pub fn new(id: ObjectId, name: impl Into<String>, spec: Arc<AdtSpec>, initial: Value) -> Self {
        ObjectMonitor {
            id,
            name: name.into(),
            spec,
            state: initial,
            control: MonitorState::default(),
            invocations: BTreeMap::new(),
            executions: BTreeMap::new(),
            max_in_execution: 0,
        }
    }

    pub fn id(&self) -> ObjectId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> &Arc<AdtSpec> {
        &self.spec
    }

    pub fn state(&self) -> &Value {
        &self.state
    }

    pub fn control(&self) -> &MonitorState {
        &self.control
    }

    pub fn invocation(&self, id: InvocationId) -> Option<&PrivateInvocation> {
        self.invocations.get(&id)
    }

    pub fn execution_count(&self, id: InvocationId) -> u32 {
        self.executions.get(&id).copied().unwrap_or(0)
    }

    pub fn execution_counts(&self) -> &BTreeMap<InvocationId, u32> {
        &self.executions
    }

    pub fn max_in_execution(&self) -> usize {
        self.max_in_execution
    }

    pub fn owner(&self, id: InvocationId) -> Option<TxnId> {
        self.invocations.get(&id).map(|inv| inv.txn)
    }

    fn call(&self, id: &InvocationId) -> &PrivateCall {
        &self.invocations[id].call
    }

    fn outputs(&self, id: &InvocationId) -> &[Value] {
        self.invocations[id]
            .outputs
            .as_deref()
            .expect("executed invocation has outputs")
    }

    fn other_txn(&self, id: &InvocationId, txn: TxnId) -> bool {
        self.invocations[id].txn != txn
    }

    /// Steps (1) and (2), merged into a single entry section.
    pub fn enter(&mut self, mut inv: PrivateInvocation) -> Admission {
        debug_assert_eq!(inv.object, self.id);
        let id = inv.id;
        let tables = &self.spec.tables;

        let executed = self.control.executed.iter().map(|e| (self.call(e), self.outputs(e)));
        let pending = self
            .control
            .blocked
            .iter()
            .chain(&self.control.in_execution)
            .map(|p| self.call(p));
        if let Some(outs) = tables.try_deduce(executed, pending, &inv.call) {
            inv.outputs = Some(outs.clone());
            inv.origin = Some(Origin::Deduced);
            inv.lifecycle = Lifecycle::Executed;
            self.invocations.insert(id, inv);
            self.executions.insert(id, 0);
            self.control.executed.insert(id);
            self.assert_invariants();
            return Admission::Deduced(outs);
        }

        let mut blockers = Vec::new();
        for b in self.control.blocked.iter().chain(&self.control.in_execution) {
            if self.other_txn(b, inv.txn) && !tables.commute_with_in(self.call(b), &inv.call) {
                blockers.push(*b);
            }
        }
        for e in &self.control.executed {
            if self.other_txn(e, inv.txn)
                && tables.commute_with_in_out(self.call(e), self.outputs(e), &inv.call) == OutVerdict::NoCommute
            {
                blockers.push(*e);
            }
        }
        self.executions.insert(id, 0);
        let admission = if blockers.is_empty() {
            inv.lifecycle = Lifecycle::InExecution;
            self.invocations.insert(id, inv);
            self.control.in_execution.insert(id);
            self.max_in_execution = self.max_in_execution.max(self.control.in_execution.len());
            debug_assert!(self.admission_conflicts(id).is_empty());
            Admission::Admitted
        } else {
            inv.lifecycle = Lifecycle::Blocked;
            self.invocations.insert(id, inv);
            for b in &blockers {
                self.control.add_edge(*b, id);
            }
            self.control.blocked.insert(id);
            Admission::Blocked {
                waiting_for: blockers.len(),
            }
        };
        self.assert_invariants();
        admission
    }

    /// Step (3): runs the invocation on the single copy. At most once.
    pub fn execute(&mut self, id: InvocationId) -> Result<Vec<Value>, MonitorError> {
        if !self.control.in_execution.contains(&id) {
            return Err(if self.invocations.contains_key(&id) {
                MonitorError::NotInExecution(id)
            } else {
                MonitorError::UnknownInvocation(id)
            });
        }
        let count = self.executions.entry(id).or_default();
        if *count > 0 {
            return Err(MonitorError::ExecutedTwice(id));
        }
        let inv = self.invocations.get_mut(&id).expect("registered");
        let (next, outs) = self.spec.apply(&self.state, &inv.call)?;
        *count += 1;
        self.state = next;
        inv.outputs = Some(outs.clone());
        inv.origin = Some(Origin::Executed);
        Ok(outs)
    }

    /// Step (4): reclassifies the executed invocation and releases the
    /// operations it blocked where its outs dissolve the conflict.
    pub fn out_control(&mut self, id: InvocationId) -> Result<Vec<InvocationId>, MonitorError> {
        if !self.control.in_execution.remove(&id) {
            return Err(MonitorError::NotInExecution(id));
        }
        if self.invocations[&id].outputs.is_none() {
            self.control.in_execution.insert(id);
            return Err(MonitorError::NotInExecution(id));
        }
        self.control.executed.insert(id);
        self.invocations.get_mut(&id).expect("registered").lifecycle = Lifecycle::Executed;
        let waiters: Vec<_> = self
            .control
            .blocks
            .get(&id)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        let mut runnable = Vec::new();
        for w in waiters {
            let verdict = self
                .spec
                .tables
                .commute_with_in_out(self.call(&id), self.outputs(&id), self.call(&w));
            if verdict.commutes() && self.control.remove_edge(id, w) {
                runnable.push(w);
            }
        }
        let woken = self.signal(runnable);
        self.assert_invariants();
        Ok(woken)
    }

    /// Forgets an executed (or deduced) invocation at commit, or at reject
    /// after its inverse has been applied.
    pub fn commit_or_reject(&mut self, id: InvocationId) -> Result<Vec<InvocationId>, MonitorError> {
        if !self.control.executed.remove(&id) {
            return Err(MonitorError::UnknownInvocation(id));
        }
        let mut runnable = Vec::new();
        for w in self.control.blocks.remove(&id).unwrap_or_default() {
            self.control.blocks.entry(id).or_default().insert(w);
            if self.control.remove_edge(id, w) {
                runnable.push(w);
            }
        }
        self.control.blocks.remove(&id);
        if let Some(mut inv) = self.invocations.remove(&id) {
            inv.lifecycle = Lifecycle::Finished;
        }
        let woken = self.signal(runnable);
        self.assert_invariants();
        Ok(woken)
    }

    /// Erases a blocked invocation of an aborting transaction. It has
    /// observed nothing, so only its edges need fixing up.
    pub fn withdraw_blocked(&mut self, id: InvocationId) -> Result<Vec<InvocationId>, MonitorError> {
        if !self.control.blocked.remove(&id) {
            return Err(MonitorError::UnknownInvocation(id));
        }
        for waiters in self.control.blocks.values_mut() {
            waiters.remove(&id);
        }
        self.control.blocks.retain(|_, ws| !ws.is_empty());
        self.control.waiting_for.remove(&id);
        let mut runnable = Vec::new();
        for w in self.control.blocks.get(&id).cloned().unwrap_or_default() {
            if self.control.remove_edge(id, w) {
                runnable.push(w);
            }
        }
        self.control.blocks.remove(&id);
        self.invocations.remove(&id);
        let woken = self.signal(runnable);
        self.assert_invariants();
        Ok(woken)
    }

    /// Applies an inverse directly to the single copy, bypassing admission.
    pub fn apply_inverse(&mut self, call: &PrivateCall) -> Result<Vec<Value>, MonitorError> {
        let (next, outs) = self.spec.apply(&self.state, call)?;
        self.state = next;
        Ok(outs)
    }

    /// True when no invocation is registered.
    pub fn is_idle(&self) -> bool {
        self.control.is_empty() && self.invocations.is_empty()
    }

    fn signal(&mut self, mut ids: Vec<InvocationId>) -> Vec<InvocationId> {
        ids.sort_unstable();
        for id in &ids {
            self.control.blocked.remove(id);
            self.control.waiting_for.remove(id);
            self.control.in_execution.insert(*id);
            if let Some(inv) = self.invocations.get_mut(id) {
                inv.lifecycle = Lifecycle::InExecution;
            }
            debug_assert!(self.admission_conflicts(*id).is_empty());
        }
        self.max_in_execution = self.max_in_execution.max(self.control.in_execution.len());
        ids
    }

    /// Active operations of other transactions that `id` fails to commute
    /// with. Empty for every admitted invocation.
    pub fn admission_conflicts(&self, id: InvocationId) -> Vec<InvocationId> {
        let inv = &self.invocations[&id];
        let tables = &self.spec.tables;
        let mut conflicts = Vec::new();
        for other in self.control.in_execution.iter().chain(&self.control.executed) {
            if *other == id || !self.other_txn(other, inv.txn) {
                continue;
            }
            let ok = if self.control.executed.contains(other) {
                tables.commute_with_in_out(self.call(other), self.outputs(other), &inv.call).commutes()
            } else {
                tables.commute_with_in(self.call(other), &inv.call)
            };
            if !ok {
                conflicts.push(*other);
            }
        }
        conflicts
    }

    fn assert_invariants(&self) {
        if cfg!(debug_assertions) {
            if let Err(e) = self.control.check_invariants() {
                panic!("monitor of {} broke an invariant: {e}", self.name);
            }
        }
    }
}
