//! In- and out-commutativity relations between private operations.
//!
//! In-commutativity is decided from in-parameters only and is used while
//! neither operation has run. Out-commutativity is asymmetric: the first
//! operation has executed and its out-parameters are known, which removes
//! pseudo-conflicts and can determine the incoming operation's results
//! without running it. A missing entry always means "conflict".

use crate::adt::{OpName, PrivateCall};
use crate::value::Value;

pub type PairPredicate = fn(&[Value], &[Value]) -> bool;
/// Condition over (executed in-params, executed out-params, incoming in-params).
pub type OutPredicate = fn(&[Value], &[Value], &[Value]) -> bool;
/// Deduced incoming out-params from the same three lists.
pub type Deduction = fn(&[Value], &[Value], &[Value]) -> Vec<Value>;

/// `a` and `b` commute whenever `when(a.args, b.args)` holds. Queried in
/// either orientation.
#[derive(Clone, Debug)]
pub struct InCommutEntry {
    pub a: OpName,
    pub b: OpName,
    pub when: PairPredicate,
}

#[derive(Clone, Debug)]
pub struct OutCommutEntry {
    pub executed: OpName,
    pub incoming: OpName,
    pub when: OutPredicate,
    pub deduce: Option<Deduction>,
}

#[derive(Clone, Debug, Default)]
pub struct CommutTables {
    pub in_entries: Vec<InCommutEntry>,
    pub out_entries: Vec<OutCommutEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OutVerdict {
    NoCommute,
    /// Commutes; carries the deduced incoming out-params when the matching
    /// entry defines a deduction.
    Commute(Option<Vec<Value>>),
}

impl OutVerdict {
    pub fn commutes(&self) -> bool {
        matches!(self, OutVerdict::Commute(_))
    }
}

impl CommutTables {
    pub fn commute_with_in(&self, a: &PrivateCall, b: &PrivateCall) -> bool {
        self.in_entries.iter().any(|e| {
            (e.a == a.op && e.b == b.op && (e.when)(&a.args, &b.args))
                || (e.a == b.op && e.b == a.op && (e.when)(&b.args, &a.args))
        })
    }

    /// Out-commutativity of `incoming` after `executed` produced `outputs`.
    ///
    /// Out-table entries are consulted first since they may carry a
    /// deduction. An in-commuting pair commutes whatever the outs are, so the
    /// in-table is the fallback.
    pub fn commute_with_in_out(&self, executed: &PrivateCall, outputs: &[Value], incoming: &PrivateCall) -> OutVerdict {
        let entry = self.out_entries.iter().find(|e| {
            e.executed == executed.op
                && e.incoming == incoming.op
                && (e.when)(&executed.args, outputs, &incoming.args)
        });
        match entry {
            Some(e) => OutVerdict::Commute(e.deduce.map(|d| d(&executed.args, outputs, &incoming.args))),
            None if self.commute_with_in(executed, incoming) => OutVerdict::Commute(None),
            None => OutVerdict::NoCommute,
        }
    }

    /// Step (1) of the object protocol: tries to determine `incoming`'s
    /// out-params without executing it.
    ///
    /// Succeeds only when every executed operation out-commutes with a
    /// deduction, all deductions agree, and every pending (blocked or in
    /// execution) operation in-commutes with `incoming`.
    pub fn try_deduce<'a, E, P>(&self, executed: E, pending: P, incoming: &PrivateCall) -> Option<Vec<Value>>
    where
        E: IntoIterator<Item = (&'a PrivateCall, &'a [Value])>,
        P: IntoIterator<Item = &'a PrivateCall>,
    {
        let mut deduced: Option<Vec<Value>> = None;
        for (call, outs) in executed {
            match self.commute_with_in_out(call, outs, incoming) {
                OutVerdict::Commute(Some(d)) => match &deduced {
                    Some(prev) if *prev != d => return None,
                    Some(_) => {}
                    None => deduced = Some(d),
                },
                _ => return None,
            }
        }
        let deduced = deduced?;
        pending
            .into_iter()
            .all(|p| self.commute_with_in(p, incoming))
            .then_some(deduced)
    }
}
