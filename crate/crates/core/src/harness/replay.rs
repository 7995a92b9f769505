//! Trace self-validation.
//!
//! Rebuilds every object's monitor state from the event history alone,
//! recomputing each admission decision from the commutativity tables and
//! each execution from the reference semantics, and checks the structural
//! invariants after every event. Any disagreement between what the trace
//! says and what the reconstruction predicts is reported with the index of
//! the offending event.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::adt::{AdtSpec, Inverse, PrivateCall, PublicInvocation, Translated};
use crate::commutativity::OutVerdict;
use crate::history::{Event, EventKind, History};
use crate::ids::{InvocationId, ObjectId, TxnId};
use crate::monitor::MonitorState;
use crate::value::{render_params, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event {index}: {message}")]
pub struct ReplayError {
    /// Index of the offending event (the history length for end-of-trace
    /// problems).
    pub index: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub events: usize,
    pub invocations: usize,
    pub executions: usize,
    pub deductions: usize,
    pub null_ops: usize,
    /// Monitor states checked against the invariants.
    pub invariant_checks: usize,
}

struct Shadow {
    spec: Arc<AdtSpec>,
    state: Value,
    control: MonitorState,
    calls: BTreeMap<InvocationId, (TxnId, PrivateCall)>,
    outs: BTreeMap<InvocationId, Vec<Value>>,
}

enum Expected {
    Deduce(Vec<Value>),
    Block(Vec<InvocationId>),
    Admit,
}

#[derive(Default)]
struct TxnShadow {
    begun: bool,
    ended: bool,
    /// Kind of the first per-invocation release, once releasing started.
    releasing: Option<EventKind>,
}

struct Replay {
    objects: Vec<Shadow>,
    txns: BTreeMap<TxnId, TxnShadow>,
    admission: Option<(ObjectId, InvocationId, Expected)>,
    wakes: VecDeque<(ObjectId, InvocationId)>,
    exec_counts: BTreeMap<(ObjectId, InvocationId), u32>,
    deduced: BTreeSet<(ObjectId, InvocationId)>,
    report: ReplayReport,
    index: usize,
}

type Check = Result<(), String>;

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

impl Replay {
    fn object(&mut self, e: &Event) -> Result<(ObjectId, InvocationId), String> {
        let obj = e.object.ok_or("event without object")?;
        ensure(obj.0 < self.objects.len(), || format!("unknown object {obj}"))?;
        let inv = e.invocation.ok_or("event without invocation")?;
        Ok((obj, inv))
    }

    fn call_of(&self, obj: ObjectId, inv: InvocationId) -> Result<&(TxnId, PrivateCall), String> {
        self.objects[obj.0]
            .calls
            .get(&inv)
            .ok_or_else(|| format!("invocation {inv} unknown on object {obj}"))
    }

    fn check_owner(&self, e: &Event, obj: ObjectId, inv: InvocationId) -> Check {
        let (txn, call) = self.call_of(obj, inv)?;
        ensure(*txn == e.txn, || format!("invocation {inv} belongs to {txn}, not {}", e.txn))?;
        ensure(e.kind == EventKind::Inverse || Some(call.op) == e.op, || {
            format!("invocation {inv} is {} but the event says {:?}", call.op, e.op)
        })
    }

    fn txn_active(&self, txn: TxnId) -> Check {
        let t = self.txns.get(&txn).ok_or_else(|| format!("{txn} never began"))?;
        ensure(!t.ended, || format!("{txn} already ended"))?;
        ensure(t.releasing.is_none(), || format!("{txn} issues work after releasing (not strict)"))
    }

    /// Signals, atomically with the releasing event: the woken invocations
    /// move to in-execution now, and the trace must announce them next.
    fn queue_wakes(&mut self, obj: ObjectId, mut woken: Vec<InvocationId>) {
        woken.sort_unstable();
        let control = &mut self.objects[obj.0].control;
        for w in &woken {
            control.blocked.remove(w);
            control.in_execution.insert(*w);
        }
        self.wakes.extend(woken.into_iter().map(|w| (obj, w)));
    }

    fn release(&mut self, obj: ObjectId, inv: InvocationId) -> Check {
        let o = &mut self.objects[obj.0];
        ensure(o.control.executed.remove(&inv), || format!("invocation {inv} released while not executed"))?;
        let mut woken = Vec::new();
        for w in o.control.blocks.get(&inv).cloned().unwrap_or_default() {
            if o.control.remove_edge(inv, w) {
                woken.push(w);
            }
        }
        o.control.blocks.remove(&inv);
        o.calls.remove(&inv);
        o.outs.remove(&inv);
        self.queue_wakes(obj, woken);
        Ok(())
    }

    fn resolve_admission(&mut self, e: &Event) -> Check {
        let Some((obj, inv, expected)) = self.admission.take() else {
            return Ok(());
        };
        let names_it = e.object == Some(obj) && e.invocation == Some(inv);
        match expected {
            Expected::Deduce(outs) => {
                ensure(names_it && e.kind == EventKind::Deduce, || {
                    format!("invocation {inv} should have been deduced as {}", render_params(&outs))
                })?;
                ensure(e.outputs == outs, || {
                    format!(
                        "deduced {} but the tables give {}",
                        render_params(&e.outputs),
                        render_params(&outs)
                    )
                })?;
                let o = &mut self.objects[obj.0];
                o.control.executed.insert(inv);
                o.outs.insert(inv, outs);
                self.deduced.insert((obj, inv));
                self.report.deductions += 1;
            }
            Expected::Block(blockers) => {
                ensure(names_it && e.kind == EventKind::Block, || {
                    format!("invocation {inv} should block on {blockers:?}")
                })?;
                let o = &mut self.objects[obj.0];
                for b in blockers {
                    o.control.add_edge(b, inv);
                }
                o.control.blocked.insert(inv);
            }
            Expected::Admit => {
                ensure(!(names_it && matches!(e.kind, EventKind::Deduce | EventKind::Block)), || {
                    format!("invocation {inv} should have been admitted, trace says {}", e.kind)
                })?;
                self.objects[obj.0].control.in_execution.insert(inv);
            }
        }
        Ok(())
    }

    fn predict(&self, obj: ObjectId, txn: TxnId, call: &PrivateCall) -> Expected {
        let o = &self.objects[obj.0];
        let tables = &o.spec.tables;
        let executed = o.control.executed.iter().map(|id| (&o.calls[id].1, o.outs[id].as_slice()));
        let pending = o
            .control
            .blocked
            .iter()
            .chain(&o.control.in_execution)
            .map(|id| &o.calls[id].1);
        if let Some(outs) = tables.try_deduce(executed, pending, call) {
            return Expected::Deduce(outs);
        }
        let mut blockers = BTreeSet::new();
        for id in o.control.blocked.iter().chain(&o.control.in_execution) {
            let (owner, other) = &o.calls[id];
            if *owner != txn && !tables.commute_with_in(other, call) {
                blockers.insert(*id);
            }
        }
        for id in &o.control.executed {
            let (owner, other) = &o.calls[id];
            if *owner != txn && tables.commute_with_in_out(other, &o.outs[id], call) == OutVerdict::NoCommute {
                blockers.insert(*id);
            }
        }
        if blockers.is_empty() {
            Expected::Admit
        } else {
            Expected::Block(blockers.into_iter().collect())
        }
    }

    fn event(&mut self, e: &Event) -> Check {
        if e.kind == EventKind::Wake {
            let (obj, inv) = self.object(e)?;
            let front = self.wakes.pop_front();
            ensure(front == Some((obj, inv)), || format!("unexpected WAKE of {inv}; expected {front:?}"))?;
            return self.check_owner(e, obj, inv);
        }
        if let Some((obj, inv)) = self.wakes.front() {
            return Err(format!("missing WAKE of invocation {inv} on object {obj} before {}", e.kind));
        }
        self.resolve_admission(e)?;

        match e.kind {
            EventKind::Begin => {
                let t = self.txns.entry(e.txn).or_default();
                ensure(!t.begun, || format!("{} begins twice", e.txn))?;
                t.begun = true;
            }
            EventKind::NullOp => {
                self.txn_active(e.txn)?;
                ensure(e.invocation.is_none(), || "NULLOP carries an invocation".into())?;
                let obj = e.object.ok_or("NULLOP without object")?;
                let spec = &self.objects.get(obj.0).ok_or("NULLOP on unknown object")?.spec;
                let public = PublicInvocation::new(e.op.unwrap_or("-"), e.inputs.clone());
                match spec.translate_public(&public).map_err(|err| err.to_string())? {
                    Translated::NullDirect(outs) => {
                        ensure(outs == e.outputs, || format!("NULLOP outs {}", render_params(&e.outputs)))?
                    }
                    Translated::Private { call, .. } => return Err(format!("NULLOP for a call that translates to {call}")),
                }
                self.report.null_ops += 1;
            }
            EventKind::Invoke => {
                self.txn_active(e.txn)?;
                let (obj, inv) = self.object(e)?;
                let op = e.op.ok_or("INVOKE without op")?;
                let spec = self.objects[obj.0].spec.clone();
                let call = PrivateCall::new(op, e.inputs.clone());
                spec.check_private(&call).map_err(|err| err.to_string())?;
                ensure(!self.exec_counts.contains_key(&(obj, inv)), || format!("invocation id {inv} reused"))?;
                let expected = self.predict(obj, e.txn, &call);
                self.objects[obj.0].calls.insert(inv, (e.txn, call));
                self.exec_counts.insert((obj, inv), 0);
                self.admission = Some((obj, inv, expected));
                self.report.invocations += 1;
            }
            EventKind::Deduce | EventKind::Block => {
                // consumed by resolve_admission; reaching here means no
                // INVOKE preceded it
                let (obj, inv) = self.object(e)?;
                self.check_owner(e, obj, inv)?;
                let o = &self.objects[obj.0];
                let consistent = match e.kind {
                    EventKind::Deduce => o.control.executed.contains(&inv) && self.deduced.contains(&(obj, inv)),
                    _ => o.control.blocked.contains(&inv),
                };
                ensure(consistent, || format!("{} of {inv} without a matching INVOKE", e.kind))?;
            }
            EventKind::Exec => {
                self.txn_active(e.txn)?;
                let (obj, inv) = self.object(e)?;
                self.check_owner(e, obj, inv)?;
                let count = self.exec_counts.get_mut(&(obj, inv)).ok_or("EXEC of unknown invocation")?;
                *count += 1;
                ensure(*count == 1, || format!("invocation {inv} executed {count} times"))?;
                ensure(!self.deduced.contains(&(obj, inv)), || format!("deduced invocation {inv} executed"))?;
                let o = &mut self.objects[obj.0];
                ensure(o.control.in_execution.remove(&inv), || format!("invocation {inv} executed while not admitted"))?;
                let call = o.calls[&inv].1.clone();
                ensure(call.args == e.inputs, || format!("EXEC in-params differ from INVOKE for {inv}"))?;
                let (next, outs) = o.spec.apply(&o.state, &call).map_err(|err| err.to_string())?;
                ensure(outs == e.outputs, || {
                    format!(
                        "EXEC of {call} reported {} but the reference gives {}",
                        render_params(&e.outputs),
                        render_params(&outs)
                    )
                })?;
                o.state = next;
                o.control.executed.insert(inv);
                let mut woken = Vec::new();
                for w in o.control.blocks.get(&inv).cloned().unwrap_or_default() {
                    if o.spec.tables.commute_with_in_out(&call, &outs, &o.calls[&w].1).commutes()
                        && o.control.remove_edge(inv, w)
                    {
                        woken.push(w);
                    }
                }
                o.outs.insert(inv, outs);
                self.queue_wakes(obj, woken);
                self.report.executions += 1;
            }
            EventKind::Inverse => {
                let (obj, inv) = self.object(e)?;
                self.check_owner(e, obj, inv)?;
                ensure(!self.deduced.contains(&(obj, inv)), || format!("inverse of deduced invocation {inv}"))?;
                let o = &mut self.objects[obj.0];
                ensure(o.control.executed.contains(&inv), || format!("inverse of unexecuted invocation {inv}"))?;
                let call = &o.calls[&inv].1;
                let inverse = o.spec.determine_inverse(call, &o.outs[&inv]).map_err(|err| err.to_string())?;
                let Inverse::Apply(inverse) = inverse else {
                    return Err(format!("invocation {inv} has a NULL inverse but was undone"));
                };
                ensure(Some(inverse.op) == e.op && inverse.args == e.inputs, || {
                    format!("inverse of {call} is {inverse}, trace applied {:?}", e.op)
                })?;
                let (next, outs) = o.spec.apply(&o.state, &inverse).map_err(|err| err.to_string())?;
                ensure(outs == e.outputs, || format!("inverse {inverse} outs differ"))?;
                o.state = next;
                let t = self.txns.get_mut(&e.txn).ok_or("unknown txn")?;
                ensure(t.releasing.is_none_or(|k| k == EventKind::Abort), || "inverse during commit".into())?;
                t.releasing = Some(EventKind::Abort);
            }
            EventKind::Withdraw => {
                let (obj, inv) = self.object(e)?;
                self.check_owner(e, obj, inv)?;
                let o = &mut self.objects[obj.0];
                ensure(o.control.blocked.remove(&inv), || format!("withdrawn invocation {inv} was not blocked"))?;
                for b in o.control.blockers_of(inv) {
                    o.control.remove_edge(b, inv);
                }
                let mut woken = Vec::new();
                for w in o.control.blocks.get(&inv).cloned().unwrap_or_default() {
                    if o.control.remove_edge(inv, w) {
                        woken.push(w);
                    }
                }
                o.control.blocks.remove(&inv);
                o.calls.remove(&inv);
                self.queue_wakes(obj, woken);
            }
            EventKind::Commit | EventKind::Abort if e.is_terminal() => {
                let t = self.txns.get_mut(&e.txn).ok_or_else(|| format!("{} never began", e.txn))?;
                ensure(!t.ended, || format!("{} ends twice", e.txn))?;
                ensure(t.releasing.is_none_or(|k| k == e.kind), || format!("{} released with the other kind", e.txn))?;
                t.ended = true;
                for (k, o) in self.objects.iter().enumerate() {
                    ensure(o.calls.values().all(|(owner, _)| *owner != e.txn), || {
                        format!("{} ended with invocations left on object #{k}", e.txn)
                    })?;
                }
            }
            EventKind::Commit | EventKind::Abort => {
                let (obj, inv) = self.object(e)?;
                self.check_owner(e, obj, inv)?;
                let t = self.txns.get_mut(&e.txn).ok_or("unknown txn")?;
                ensure(t.releasing.is_none_or(|k| k == e.kind), || format!("{} mixes COMMIT and ABORT", e.txn))?;
                t.releasing = Some(e.kind);
                self.release(obj, inv)?;
            }
            EventKind::Victim => {
                self.txn_active(e.txn)?;
            }
            EventKind::Wake => unreachable!(),
        }
        Ok(())
    }

    fn check_all(&mut self) -> Check {
        for (k, o) in self.objects.iter().enumerate() {
            o.control
                .check_invariants()
                .map_err(|err| format!("object #{k}: {err}"))?;
            self.report.invariant_checks += 1;
        }
        Ok(())
    }

    fn finish(&mut self, finals: Option<&[Value]>) -> Check {
        if let Some((obj, inv)) = self.wakes.front() {
            return Err(format!("trace ends before WAKE of {inv} on {obj}"));
        }
        if let Some((_, inv, expected)) = self.admission.take() {
            ensure(matches!(expected, Expected::Admit), || format!("trace ends inside admission of {inv}"))?;
        }
        let all_ended = self.txns.values().all(|t| t.ended);
        for ((obj, inv), count) in &self.exec_counts {
            ensure(*count <= 1, || format!("invocation {inv} on {obj} executed {count} times"))?;
            if self.deduced.contains(&(*obj, *inv)) {
                ensure(*count == 0, || format!("deduced invocation {inv} executed"))?;
            }
        }
        if all_ended {
            for (k, o) in self.objects.iter().enumerate() {
                ensure(o.control.is_empty() && o.calls.is_empty(), || {
                    format!("object #{k} keeps registrations after every transaction ended")
                })?;
            }
        }
        if let Some(finals) = finals {
            for (k, o) in self.objects.iter().enumerate() {
                ensure(o.state == finals[k], || {
                    format!(
                        "reconstructed state of object #{k} is {} but the run ended with {}",
                        o.spec.render_state(&o.state),
                        o.spec.render_state(&finals[k])
                    )
                })?;
            }
        }
        Ok(())
    }
}

/// Replays `history` over objects given as (name, spec, initial state),
/// in object-id order. When `finals` is given, the reconstructed final
/// states must equal it.
pub fn replay_trace(
    objects: &[(String, Arc<AdtSpec>, Value)],
    history: &History,
    finals: Option<&[Value]>,
) -> Result<ReplayReport, ReplayError> {
    let mut replay = Replay {
        objects: objects
            .iter()
            .map(|(_, spec, initial)| Shadow {
                spec: spec.clone(),
                state: initial.clone(),
                control: MonitorState::default(),
                calls: BTreeMap::new(),
                outs: BTreeMap::new(),
            })
            .collect(),
        txns: BTreeMap::new(),
        admission: None,
        wakes: VecDeque::new(),
        exec_counts: BTreeMap::new(),
        deduced: BTreeSet::new(),
        report: ReplayReport::default(),
        index: 0,
    };
    for (index, e) in history.events().iter().enumerate() {
        replay.index = index;
        replay
            .event(e)
            .and_then(|()| replay.check_all())
            .map_err(|message| ReplayError { index, message })?;
        replay.report.events += 1;
    }
    replay.finish(finals).map_err(|message| ReplayError {
        index: history.len(),
        message,
    })?;
    Ok(replay.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::Registry;
    use crate::harness::sim::{run_simulated, RunOutcome};
    use crate::harness::workload::parse_workload;

    fn replay(text: &str, seed: u64) -> (RunOutcome, Result<ReplayReport, ReplayError>) {
        let w = parse_workload(text, &Registry::builtin()).unwrap();
        let out = run_simulated(&w, Some(seed)).unwrap();
        let result = replay_trace(&RunOutcome::object_table(&w), out.manager.history(), Some(&out.final_states()));
        (out, result)
    }

    const MIXED: &str = "object S stack\nobject Q set {a}\nobject R real 2\n\
        txn T1\n op S PUSH a\n op Q INSERT a\n op R MULTIPLY 1\nend commit\n\
        txn T2\n op S PUSH b\n op Q CARD\n op R ADD 1\nend abort\n\
        txn T3\n op S POP\n op Q DELETE a\n op R READ\nend commit";

    #[test]
    fn simulated_runs_replay_cleanly() {
        for seed in 0..100 {
            let (_, result) = replay(MIXED, seed);
            let report = result.unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(report.invariant_checks >= report.events);
            assert_eq!(report.null_ops, 1);
        }
    }

    #[test]
    fn tampered_exec_outs_detected() {
        let w = parse_workload("object S stack [a]\ntxn T1\n op S POP\nend commit", &Registry::builtin()).unwrap();
        let out = run_simulated(&w, Some(0)).unwrap();
        let mut events = out.manager.history().events().to_vec();
        let exec = events.iter_mut().find(|e| e.kind == EventKind::Exec).unwrap();
        exec.outputs[0] = Value::item("b");
        let mut h = History::default();
        events.into_iter().for_each(|e| h.push(e));
        let err = replay_trace(&RunOutcome::object_table(&w), &h, None).unwrap_err();
        assert!(err.message.contains("reference gives"), "{err}");
    }

    #[test]
    fn dropped_block_detected() {
        let w = parse_workload(
            "object S stack\ntxn T1\n op S PUSH a\nend commit\ntxn T2\n op S PUSH b\nend commit\nschedule steps T1 T2",
            &Registry::builtin(),
        )
        .unwrap();
        let out = run_simulated(&w, None).unwrap();
        let mut h = History::default();
        for e in out.manager.history().events() {
            if !matches!(e.kind, EventKind::Block | EventKind::Wake) {
                h.push(e.clone());
            }
        }
        let err = replay_trace(&RunOutcome::object_table(&w), &h, None).unwrap_err();
        assert!(err.message.contains("should block"), "{err}");
    }

    #[test]
    fn early_release_is_not_strict() {
        let w = parse_workload(
            "object S stack\ntxn T1\n op S PUSH a\n op S PUSH b\nend commit",
            &Registry::builtin(),
        )
        .unwrap();
        let out = run_simulated(&w, Some(0)).unwrap();
        let events = out.manager.history().events();
        // move T1's first per-invocation COMMIT right after its first EXEC
        let mut reordered: Vec<Event> = Vec::new();
        let release = events.iter().find(|e| e.kind == EventKind::Commit && !e.is_terminal()).unwrap().clone();
        for e in events {
            if *e == release {
                continue;
            }
            reordered.push(e.clone());
            if e.kind == EventKind::Exec && e.invocation == release.invocation {
                reordered.push(release.clone());
            }
        }
        let mut h = History::default();
        reordered.into_iter().for_each(|e| h.push(e));
        let err = replay_trace(&RunOutcome::object_table(&w), &h, None).unwrap_err();
        assert!(err.message.contains("not strict"), "{err}");
    }
}
