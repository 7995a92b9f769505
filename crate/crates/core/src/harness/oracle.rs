//! Brute-force oracles over finished runs.
//!
//! A run is serializable when some order of its committed transactions,
//! replayed one after another through the reference semantics from the
//! initial states, reproduces every committed call's public outs and every
//! object's final state.

use std::fmt;

use crate::txn::TxnStatus;
use crate::value::Value;

use super::sim::{run_simulated, RunOutcome};
use super::workload::{Terminal, Workload};

/// Largest committed set the permutation search accepts.
pub const MAX_COMMITTED: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Committed transactions in a serial order that explains the run.
    Accepted { witness: Vec<String> },
    Rejected { reason: String },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted { .. })
    }

    fn reject(reason: impl Into<String>) -> Self {
        Verdict::Rejected { reason: reason.into() }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accepted { witness } => write!(f, "serializable as [{}]", witness.join(" ")),
            Verdict::Rejected { reason } => write!(f, "rejected: {reason}"),
        }
    }
}

struct Search<'a> {
    workload: &'a Workload,
    committed: &'a [usize],
    observed: &'a [Vec<Vec<Value>>],
    finals: &'a [Value],
    /// Deepest failing prefix seen, for the counterexample.
    best: (usize, String),
}

impl Search<'_> {
    /// Replays transaction `i` on `states`; `Err` describes the first
    /// mismatch.
    fn replay(&self, i: usize, states: &mut [Value]) -> Result<(), String> {
        let txn = &self.workload.txns[i];
        for (k, step) in txn.ops.iter().enumerate() {
            let spec = &self.workload.objects[step.object].spec;
            let (next, outs) = spec
                .apply_public(&states[step.object], &step.call)
                .map_err(|e| format!("{} op {}: {e}", txn.name, k + 1))?;
            if outs != self.observed[i][k] {
                return Err(format!(
                    "{} op {} {} returned {} but serially yields {}",
                    txn.name,
                    k + 1,
                    step.call.op,
                    crate::value::render_params(&self.observed[i][k]),
                    crate::value::render_params(&outs)
                ));
            }
            states[step.object] = next;
        }
        Ok(())
    }

    fn dfs(&mut self, order: &mut Vec<usize>, states: &[Value]) -> bool {
        if order.len() == self.committed.len() {
            if let Some(k) = (0..states.len()).find(|k| states[*k] != self.finals[*k]) {
                let o = &self.workload.objects[k];
                let reason = format!(
                    "final state of {} is {} but the serial order ends with {}",
                    o.name,
                    o.spec.render_state(&self.finals[k]),
                    o.spec.render_state(&states[k])
                );
                if order.len() >= self.best.0 {
                    self.best = (order.len(), reason);
                }
                return false;
            }
            return true;
        }
        for &i in self.committed {
            if order.contains(&i) {
                continue;
            }
            let mut next = states.to_vec();
            match self.replay(i, &mut next) {
                Ok(()) => {
                    order.push(i);
                    if self.dfs(order, &next) {
                        return true;
                    }
                    order.pop();
                }
                Err(reason) => {
                    if order.len() >= self.best.0 {
                        self.best = (order.len(), reason);
                    }
                }
            }
        }
        false
    }
}

/// Searches for a serial order of the committed transactions.
pub fn check_serializable(workload: &Workload, outcome: &RunOutcome) -> Verdict {
    let committed = outcome.committed();
    if committed.len() > MAX_COMMITTED {
        return Verdict::reject(format!(
            "{} committed transactions exceed the search bound of {MAX_COMMITTED}",
            committed.len()
        ));
    }
    for &i in &committed {
        let txn = &workload.txns[i];
        if outcome.observed[i].len() != txn.ops.len() {
            return Verdict::reject(format!(
                "{} committed after {} of {} calls",
                txn.name,
                outcome.observed[i].len(),
                txn.ops.len()
            ));
        }
    }
    let finals = outcome.final_states();
    let initial: Vec<Value> = workload.objects.iter().map(|o| o.initial.clone()).collect();
    let mut search = Search {
        workload,
        committed: &committed,
        observed: &outcome.observed,
        finals: &finals,
        best: (0, String::from("no serial order matches")),
    };
    let mut order = Vec::new();
    if search.dfs(&mut order, &initial) {
        Verdict::Accepted {
            witness: order.iter().map(|i| workload.txns[*i].name.clone()).collect(),
        }
    } else {
        Verdict::reject(search.best.1)
    }
}

/// Checks that the aborted `victim` left no trace on an existing run: the
/// committed set alone is serializable, the victim is aborted and every
/// monitor is empty.
pub fn abort_transparency(workload: &Workload, outcome: &RunOutcome, victim: usize) -> Verdict {
    let name = &workload.txns[victim].name;
    if workload.txns[victim].terminal != Terminal::Abort {
        return Verdict::reject(format!("{name} does not end in abort"));
    }
    if outcome.statuses[victim] != TxnStatus::Aborted {
        return Verdict::reject(format!("{name} ended {:?}", outcome.statuses[victim]));
    }
    let residue = outcome.manager.residual_registrations();
    if !residue.is_empty() {
        let names: Vec<_> = residue
            .iter()
            .map(|o| workload.objects[o.0].name.as_str())
            .collect();
        return Verdict::reject(format!("registrations left on {}", names.join(", ")));
    }
    check_serializable(workload, outcome)
}

/// Runs `workload` and applies [`abort_transparency`].
pub fn check_abort_transparency(workload: &Workload, seed: Option<u64>, victim: usize) -> Verdict {
    match run_simulated(workload, seed) {
        Ok(outcome) => abort_transparency(workload, &outcome, victim),
        Err(e) => Verdict::reject(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::Registry;
    use crate::harness::workload::parse_workload;

    fn workload(text: &str) -> Workload {
        parse_workload(text, &Registry::builtin()).unwrap()
    }

    #[test]
    fn serial_history_accepted_in_identity_order() {
        let w = workload(
            "object S stack\ntxn T1\n op S PUSH a\n op S POP\nend commit\ntxn T2\n op S EMPTY\nend commit\n\
             schedule steps T1 T1 T1 T1 T1 T2 T2",
        );
        let out = run_simulated(&w, None).unwrap();
        assert_eq!(
            check_serializable(&w, &out),
            Verdict::Accepted {
                witness: vec!["T1".into(), "T2".into()]
            }
        );
    }

    #[test]
    fn commuting_pushes_accepted() {
        let w = workload("object S stack\ntxn T1\n op S PUSH a\nend commit\ntxn T2\n op S PUSH a\nend commit");
        for seed in 0..20 {
            let out = run_simulated(&w, Some(seed)).unwrap();
            assert!(check_serializable(&w, &out).is_accepted());
        }
    }

    #[test]
    fn tampered_outs_rejected() {
        let w = workload("object S stack [a]\ntxn T1\n op S POP\nend commit");
        let mut out = run_simulated(&w, None).unwrap();
        out.observed[0][0] = vec![Value::item("b"), Value::Report(crate::value::Report::Ok)];
        let v = check_serializable(&w, &out);
        assert!(!v.is_accepted());
        assert!(v.to_string().contains("T1 op 1 POP returned [b,Ok]"), "{v}");
    }

    #[test]
    fn single_txn_abort_restores_initial_state() {
        let w = workload(
            "object S set {a}\nobject R real 3\ntxn T1\n op S INSERT b\n op S DELETE a\n op R MULTIPLY -1/2\n op R ADD 5\nend abort",
        );
        let v = check_abort_transparency(&w, Some(0), 0);
        assert_eq!(v, Verdict::Accepted { witness: vec![] });
        let out = run_simulated(&w, Some(0)).unwrap();
        assert_eq!(out.final_states(), vec![Value::items(["a"]), Value::int(3)]);
    }

    #[test]
    fn victim_insert_undone_reader_unaffected() {
        let w = workload(
            "object S set\ntxn V\n op S INSERT x\nend abort\ntxn R\n op S IN y\nend commit\n\
             schedule steps V V R R V R",
        );
        let out = run_simulated(&w, None).unwrap();
        assert_eq!(out.observed[1], vec![vec![Value::Boolean(false)]]);
        assert!(abort_transparency(&w, &out, 0).is_accepted());
        assert_eq!(out.final_states(), vec![Value::items(Vec::<&str>::new())]);
    }

    #[test]
    fn victim_must_end_in_abort() {
        let w = workload("object S set\ntxn V\n op S INSERT x\nend commit");
        assert!(!check_abort_transparency(&w, None, 0).is_accepted());
    }
}
