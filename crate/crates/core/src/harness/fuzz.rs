//! Seeded random workloads checked against every oracle.
//!
//! Workload `i` of a campaign is generated from its own ChaCha stream of the
//! campaign seed, so cases are independent of each other and of the order
//! they run in; the batch fans out through [`Exec`].

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adt::PublicInvocation;
use crate::builtin::Registry;
use crate::error::AdtError;
use crate::exec::Exec;
use crate::history::{EventKind, Metrics};

use super::oracle::{abort_transparency, check_serializable};
use super::replay::replay_trace;
use super::sim::{run_simulated, RunOutcome};
use super::workload::{ObjectDecl, OpStep, Schedule, Terminal, TxnDecl, Workload};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzConfig {
    pub adts: Vec<String>,
    /// Inclusive ranges.
    pub txns: (usize, usize),
    pub ops: (usize, usize),
    pub objects: (usize, usize),
    pub runs: usize,
    pub seed: u64,
    /// Random scheduling steps before the deterministic drain.
    pub steps: usize,
    /// Make one random transaction of each workload end in abort and check
    /// abort transparency for it.
    pub abort_one: bool,
    pub minimize: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            adts: ["stack", "set", "real", "boolean"].map(String::from).to_vec(),
            txns: (2, 4),
            ops: (1, 5),
            objects: (1, 3),
            runs: 100,
            seed: 1,
            steps: 200,
            abort_one: false,
            minimize: true,
        }
    }
}

/// A generated workload and, in abort mode, its designated victim.
#[derive(Clone, Debug)]
pub struct FuzzCase {
    pub index: usize,
    pub workload: Workload,
    pub victim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzFailure {
    pub index: usize,
    pub reason: String,
    /// Smallest failing workload found, in file format.
    pub workload: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FuzzSummary {
    pub runs: usize,
    pub passed: usize,
    pub failures: Vec<FuzzFailure>,
    pub metrics: Metrics,
    pub replayed_events: usize,
    pub invariant_checks: usize,
    /// Largest execution count of any invocation (exactly-once: at most 1).
    pub max_executions: u32,
}

impl FuzzSummary {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.passed == self.runs
    }
}

impl fmt::Display for FuzzSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "runs {} passed {} failed {}", self.runs, self.passed, self.failures.len())?;
        write!(f, "{}", self.metrics)?;
        for failure in &self.failures {
            writeln!(f, "FAIL run {}: {}", failure.index, failure.reason)?;
            for line in failure.workload.lines() {
                writeln!(f, "  | {line}")?;
            }
        }
        Ok(())
    }
}

fn pick_in(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi.max(lo))
}

/// Builds workload `index` of the campaign.
pub fn generate_case(config: &FuzzConfig, registry: &Registry, index: usize) -> Result<FuzzCase, AdtError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let mut objects = Vec::new();
    for k in 0..pick_in(&mut rng, config.objects).max(1) {
        let adt = config
            .adts
            .choose(&mut rng)
            .ok_or_else(|| AdtError::UnknownAdt(String::new()))?;
        let spec = registry.get(adt)?;
        let states = spec.semantics.sample_states();
        let initial = states
            .choose(&mut rng)
            .cloned()
            .unwrap_or_else(|| spec.semantics.initial_state());
        objects.push(ObjectDecl {
            name: format!("O{}", k + 1),
            adt: adt.clone(),
            spec,
            initial,
        });
    }
    let mut txns = Vec::new();
    for t in 0..pick_in(&mut rng, config.txns) {
        let mut ops = Vec::new();
        for _ in 0..pick_in(&mut rng, config.ops) {
            let object = rng.random_range(0..objects.len());
            let spec = &objects[object].spec;
            let op = spec.public_ops.choose(&mut rng).expect("ADT has operations").name;
            let args = spec.semantics.public_args(op).choose(&mut rng).cloned().unwrap_or_default();
            ops.push(OpStep {
                object,
                call: PublicInvocation::new(op, args),
            });
        }
        txns.push(TxnDecl {
            name: format!("T{}", t + 1),
            ops,
            terminal: Terminal::Commit,
        });
    }
    let schedule = Some(Schedule::Random {
        seed: rng.random(),
        steps: config.steps,
    });
    // drawn in both modes so that abort mode reuses the very same workloads
    let pick = rng.random_range(0..txns.len().max(1));
    let victim = (config.abort_one && !txns.is_empty()).then_some(pick);
    if let Some(v) = victim {
        txns[v].terminal = Terminal::Abort;
    }
    Ok(FuzzCase {
        index,
        workload: Workload { objects, txns, schedule },
        victim,
    })
}

/// What a single checked run contributed.
#[derive(Clone, Debug, Default)]
pub struct CaseReport {
    pub failure: Option<String>,
    pub metrics: Metrics,
    pub replayed_events: usize,
    pub invariant_checks: usize,
    pub max_executions: u32,
}

/// Exactly-once bookkeeping straight from the monitors: every invocation
/// ran at most once and deduced ones never ran.
fn exactly_once(outcome: &RunOutcome) -> Result<u32, String> {
    let deduced: BTreeSet<_> = outcome
        .manager
        .history()
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::Deduce)
        .filter_map(|e| Some((e.object?, e.invocation?)))
        .collect();
    let mut max = 0;
    for ((obj, inv), count) in outcome.execution_counts() {
        max = max.max(count);
        if count > 1 {
            return Err(format!("invocation {inv} on {obj} executed {count} times"));
        }
        if deduced.contains(&(obj, inv)) && count != 0 {
            return Err(format!("deduced invocation {inv} on {obj} executed"));
        }
    }
    Ok(max)
}

/// Runs one workload through the simulator and every oracle.
pub fn check_case(workload: &Workload, victim: Option<usize>) -> CaseReport {
    check_run(workload, None, victim.as_slice())
}

/// Like [`check_case`], with an optional seed override and abort
/// transparency checked for each listed victim.
pub fn check_run(workload: &Workload, seed: Option<u64>, victims: &[usize]) -> CaseReport {
    let mut report = CaseReport::default();
    let outcome = match run_simulated(workload, seed) {
        Ok(o) => o,
        Err(e) => {
            report.failure = Some(format!("simulation: {e}"));
            return report;
        }
    };
    report.metrics = outcome.manager.metrics();
    let objects = RunOutcome::object_table(workload);
    match replay_trace(&objects, outcome.manager.history(), Some(&outcome.final_states())) {
        Ok(r) => {
            report.replayed_events = r.events;
            report.invariant_checks = r.invariant_checks;
        }
        Err(e) => {
            report.failure = Some(format!("trace replay: {e}"));
            return report;
        }
    }
    match exactly_once(&outcome) {
        Ok(max) => report.max_executions = max,
        Err(e) => {
            report.failure = Some(format!("exactly-once: {e}"));
            return report;
        }
    }
    if !report.metrics.is_consistent() {
        report.failure = Some(format!("inconsistent metrics:\n{}", report.metrics));
        return report;
    }
    let verdict = check_serializable(workload, &outcome);
    if !verdict.is_accepted() {
        report.failure = Some(format!("serializability: {verdict}"));
        return report;
    }
    for &v in victims {
        let verdict = abort_transparency(workload, &outcome, v);
        if !verdict.is_accepted() {
            report.failure = Some(format!("abort transparency for {}: {verdict}", workload.txns[v].name));
            break;
        }
    }
    report
}

fn without_txn(case: &FuzzCase, t: usize) -> FuzzCase {
    let mut next = case.clone();
    next.workload.txns.remove(t);
    next.victim = match case.victim {
        Some(v) if v == t => None,
        Some(v) if v > t => Some(v - 1),
        other => other,
    };
    next
}

/// Greedily drops transactions and calls while the case keeps failing.
pub fn minimize(case: &FuzzCase) -> FuzzCase {
    let mut best = case.clone();
    let fails = |c: &FuzzCase| check_case(&c.workload, c.victim).failure.is_some();
    loop {
        let mut shrunk = false;
        for t in (0..best.workload.txns.len()).rev() {
            let candidate = without_txn(&best, t);
            if fails(&candidate) {
                best = candidate;
                shrunk = true;
            }
        }
        for t in 0..best.workload.txns.len() {
            for k in (0..best.workload.txns[t].ops.len()).rev() {
                let mut candidate = best.clone();
                candidate.workload.txns[t].ops.remove(k);
                if fails(&candidate) {
                    best = candidate;
                    shrunk = true;
                }
            }
        }
        if !shrunk {
            return best;
        }
    }
}

/// Generates and checks `config.runs` workloads.
pub fn fuzz(config: &FuzzConfig, registry: &Registry, exec: Exec) -> Result<FuzzSummary, AdtError> {
    let cases = exec
        .map_range(config.runs, |i| generate_case(config, registry, i))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let reports = exec.map(&cases, |c| check_case(&c.workload, c.victim));
    let mut summary = FuzzSummary {
        runs: config.runs,
        ..FuzzSummary::default()
    };
    for (case, report) in cases.iter().zip(&reports) {
        summary.metrics += &report.metrics;
        summary.replayed_events += report.replayed_events;
        summary.invariant_checks += report.invariant_checks;
        summary.max_executions = summary.max_executions.max(report.max_executions);
        match &report.failure {
            None => summary.passed += 1,
            Some(reason) => {
                let shown = if config.minimize { minimize(case) } else { case.clone() };
                summary.failures.push(FuzzFailure {
                    index: case.index,
                    reason: reason.clone(),
                    workload: shown.workload.to_text(),
                });
            }
        }
    }
    Ok(summary)
}
