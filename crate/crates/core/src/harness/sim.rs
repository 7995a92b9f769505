//! Deterministic cooperative simulator.
//!
//! Every transaction of the workload begins up front, in declaration order.
//! The scheduler then repeatedly picks a runnable transaction and advances it
//! by one step:
//!
//! - issue its next public call (translation plus steps 1 and 2), or
//! - execute its admitted call (steps 3 and 4), or
//! - run its terminal commit or abort.
//!
//! A transaction is runnable unless its current call is suspended or it has
//! ended. Picks come from the explicit schedule, or uniformly at random from
//! a seeded generator for a bounded number of steps. Whatever remains after
//! that is drained deterministically, lowest transaction first.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adt::AdtSpec;
use crate::error::TxnError;
use crate::ids::{InvocationId, ObjectId, TxnId};
use crate::txn::{PendingState, Progress, TxnManager, TxnStatus};
use crate::value::Value;

use super::workload::{Schedule, Terminal, Workload};

/// Random-schedule step budget when the workload does not give one.
pub const DEFAULT_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("schedule stuck at step {step}: no transaction can run but {waiting} still wait")]
    ScheduleStuck { step: usize, waiting: usize },
    #[error("transaction {txn}: {source}")]
    Txn {
        txn: String,
        #[source]
        source: TxnError,
    },
}

/// Everything a run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub manager: TxnManager,
    /// Transaction ids, indexed like the workload's transactions.
    pub txn_ids: Vec<TxnId>,
    /// Public out-params of each completed call, per transaction.
    pub observed: Vec<Vec<Vec<Value>>>,
    pub statuses: Vec<TxnStatus>,
    pub seed: u64,
}

impl RunOutcome {
    pub fn trace(&self) -> String {
        self.manager.trace_text()
    }

    pub fn final_states(&self) -> Vec<Value> {
        self.manager.objects().iter().map(|o| o.state().clone()).collect()
    }

    pub fn committed(&self) -> Vec<usize> {
        (0..self.statuses.len())
            .filter(|i| self.statuses[*i] == TxnStatus::Committed)
            .collect()
    }

    /// Step-(3) runs of every invocation that went through a monitor.
    pub fn execution_counts(&self) -> BTreeMap<(ObjectId, InvocationId), u32> {
        let mut counts = BTreeMap::new();
        for o in self.manager.objects() {
            for (inv, n) in o.execution_counts() {
                counts.insert((o.id(), *inv), *n);
            }
        }
        counts
    }

    /// Name, spec and initial state of every object, in declaration order.
    pub fn object_table(workload: &Workload) -> Vec<(String, Arc<AdtSpec>, Value)> {
        workload
            .objects
            .iter()
            .map(|o| (o.name.clone(), o.spec.clone(), o.initial.clone()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Running,
    Done,
}

struct Sim<'w> {
    workload: &'w Workload,
    manager: TxnManager,
    ids: Vec<TxnId>,
    pc: Vec<usize>,
    phase: Vec<Phase>,
    observed: Vec<Vec<Vec<Value>>>,
}

impl Sim<'_> {
    fn runnable(&self, i: usize) -> bool {
        self.phase[i] == Phase::Running && self.manager.pending_state(self.ids[i]) != Some(PendingState::Blocked)
    }

    fn runnable_set(&mut self) -> Vec<usize> {
        // transactions aborted as deadlock victims end here
        for i in 0..self.ids.len() {
            if self.phase[i] == Phase::Running && self.manager.status(self.ids[i]) == Ok(TxnStatus::Aborted) {
                self.phase[i] = Phase::Done;
            }
        }
        (0..self.ids.len()).filter(|i| self.runnable(*i)).collect()
    }

    fn fail(&self, i: usize, source: TxnError) -> SimError {
        SimError::Txn {
            txn: self.workload.txns[i].name.clone(),
            source,
        }
    }

    fn step(&mut self, i: usize) -> Result<(), SimError> {
        let txn = self.ids[i];
        let decl = &self.workload.txns[i];
        if self.manager.pending_state(txn) == Some(PendingState::Ready) {
            let outs = self.manager.proceed(txn).map_err(|e| self.fail(i, e))?;
            self.observed[i].push(outs);
            self.pc[i] += 1;
            return Ok(());
        }
        if let Some(step) = decl.ops.get(self.pc[i]) {
            match self.manager.perform(txn, ObjectId(step.object), &step.call) {
                Ok(Progress::Completed(outs)) => {
                    self.observed[i].push(outs);
                    self.pc[i] += 1;
                }
                Ok(Progress::Ready | Progress::Suspended) => {}
                Err(TxnError::TransactionAborted(_)) => self.phase[i] = Phase::Done,
                Err(e) => return Err(self.fail(i, e)),
            }
            return Ok(());
        }
        let end = match decl.terminal {
            Terminal::Commit => self.manager.commit(txn),
            Terminal::Abort => self.manager.abort(txn),
        };
        end.map_err(|e| self.fail(i, e))?;
        self.phase[i] = Phase::Done;
        Ok(())
    }

    fn waiting(&self) -> usize {
        self.phase.iter().filter(|p| **p == Phase::Running).count()
    }
}

/// Runs `workload`. `seed` overrides the workload's own schedule seed.
pub fn run_simulated(workload: &Workload, seed: Option<u64>) -> Result<RunOutcome, SimError> {
    let mut manager = TxnManager::new();
    for o in &workload.objects {
        manager.add_object(o.name.clone(), o.spec.clone(), o.initial.clone());
    }
    let ids: Vec<TxnId> = workload.txns.iter().map(|t| manager.begin_named(t.name.clone())).collect();
    let n = ids.len();
    let mut sim = Sim {
        workload,
        manager,
        ids,
        pc: vec![0; n],
        phase: vec![Phase::Running; n],
        observed: vec![Vec::new(); n],
    };

    let (effective_seed, steps) = match &workload.schedule {
        Some(Schedule::Random { seed: s, steps }) => (seed.unwrap_or(*s), *steps),
        _ => (seed.unwrap_or(0), DEFAULT_STEPS),
    };
    let mut step_index = 0;
    match &workload.schedule {
        Some(Schedule::Explicit(tokens)) => {
            // A token naming a suspended or finished transaction is skipped.
            for &i in tokens {
                let runnable = sim.runnable_set();
                if runnable.is_empty() {
                    break;
                }
                if runnable.contains(&i) {
                    sim.step(i)?;
                }
                step_index += 1;
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(effective_seed);
            for _ in 0..steps {
                let runnable = sim.runnable_set();
                if runnable.is_empty() {
                    break;
                }
                let pick = runnable[rng.random_range(0..runnable.len())];
                sim.step(pick)?;
                step_index += 1;
            }
        }
    }
    loop {
        let runnable = sim.runnable_set();
        match runnable.first() {
            Some(&i) => sim.step(i)?,
            None if sim.waiting() == 0 => break,
            None => {
                return Err(SimError::ScheduleStuck {
                    step: step_index,
                    waiting: sim.waiting(),
                })
            }
        }
        step_index += 1;
    }

    let statuses = sim
        .ids
        .iter()
        .map(|t| sim.manager.status(*t).expect("known txn"))
        .collect();
    Ok(RunOutcome {
        manager: sim.manager,
        txn_ids: sim.ids,
        observed: sim.observed,
        statuses,
        seed: effective_seed,
    })
}
