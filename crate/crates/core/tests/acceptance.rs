//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a nonzero status if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use cadt_core::harness::workload::{ObjectDecl, OpStep, TxnDecl};
use cadt_core::harness::{
    abort_transparency, check_serializable, generate_case, parse_workload, replay_trace, run_simulated, FuzzCase,
    FuzzConfig, ReplayReport, RunOutcome, Schedule, Terminal, Workload,
};
use cadt_core::history::EventKind;
use cadt_core::txn::TxnStatus;
use cadt_core::validate::{validate_tables, CheckKind};
use cadt_core::{AdtSpec, Exec, PrivateCall, PublicInvocation, Registry, Report, Value};

const CORPUS_RUNS: usize = 1000;
const CORPUS_SEED: u64 = 1;

type Check = Result<String, String>;
type Criterion = (&'static str, fn(&Corpus) -> Check);

struct Run {
    case: FuzzCase,
    outcome: RunOutcome,
}

#[derive(Default)]
struct Corpus {
    registry: OnceLock<Registry>,
    plain: OnceLock<Vec<Run>>,
    aborting: OnceLock<Vec<Run>>,
    replays: OnceLock<Result<Vec<ReplayReport>, String>>,
}

impl Corpus {
    fn registry(&self) -> &Registry {
        self.registry.get_or_init(Registry::builtin)
    }

    fn config(abort_one: bool) -> FuzzConfig {
        FuzzConfig {
            runs: CORPUS_RUNS,
            seed: CORPUS_SEED,
            abort_one,
            minimize: false,
            ..FuzzConfig::default()
        }
    }

    fn build(&self, abort_one: bool) -> Result<Vec<Run>, String> {
        let config = Self::config(abort_one);
        (0..config.runs)
            .map(|i| {
                let case = generate_case(&config, self.registry(), i).map_err(|e| format!("case {i}: {e}"))?;
                let outcome = run_simulated(&case.workload, None).map_err(|e| format!("case {i}: {e}"))?;
                Ok(Run { case, outcome })
            })
            .collect()
    }

    fn runs(&self, abort_one: bool) -> Result<&[Run], String> {
        let cell = if abort_one { &self.aborting } else { &self.plain };
        if let Some(runs) = cell.get() {
            return Ok(runs);
        }
        let built = self.build(abort_one)?;
        Ok(cell.get_or_init(|| built))
    }

    fn all_runs(&self) -> Result<impl Iterator<Item = &Run>, String> {
        Ok(self.runs(false)?.iter().chain(self.runs(true)?))
    }

    fn replays(&self) -> Result<&[ReplayReport], String> {
        if let Some(r) = self.replays.get() {
            return r.as_deref().map_err(Clone::clone);
        }
        let replayed = self.all_runs().and_then(|runs| {
            runs.map(|run| {
                let objects = RunOutcome::object_table(&run.case.workload);
                replay_trace(&objects, run.outcome.manager.history(), Some(&run.outcome.final_states()))
                    .map_err(|e| format!("case {} victim {:?}: {e}", run.case.index, run.case.victim))
            })
            .collect::<Result<Vec<_>, _>>()
        });
        self.replays.get_or_init(|| replayed).as_deref().map_err(Clone::clone)
    }
}

fn within(limit: Duration, start: Instant, detail: String) -> Check {
    let elapsed = start.elapsed();
    if elapsed < limit {
        Ok(format!("{detail} in {:.2?}", elapsed))
    } else {
        Err(format!("{detail} but took {:.2?} (limit {:?})", elapsed, limit))
    }
}

fn parse(text: &str, registry: &Registry) -> Result<Workload, String> {
    parse_workload(text, registry).map_err(|e| e.to_string())
}

fn golden(name: &str, actual: &str, expected: &str) -> Result<(), String> {
    if actual == expected {
        Ok(())
    } else {
        Err(format!("{name} trace differs from golden:\n{actual}"))
    }
}

fn table_soundness(_: &Corpus) -> Check {
    let limit = Duration::from_secs(10);
    let mut lines = Vec::new();
    for (adt, bound) in [("stack", 3), ("set", 3), ("boolean", 1), ("real", 3)] {
        let spec = cadt_core::register_builtin(adt).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let report = validate_tables(&spec, bound, Exec::default());
        if report.violation_count() != 0 {
            return Err(format!("{adt}: {} violations\n{report}", report.violation_count()));
        }
        if adt == "real" && report.states < 1000 {
            return Err(format!("real grid has only {} states", report.states));
        }
        // every in-table entry that can say "commute" must have been exercised
        let calls: Vec<PrivateCall> = spec
            .direct_ops()
            .flat_map(|op| {
                spec.semantics
                    .private_args(op.name)
                    .into_iter()
                    .map(|args| PrivateCall::new(op.name, args))
            })
            .collect();
        let mut entries = BTreeSet::new();
        for p in &calls {
            if report.class(CheckKind::Inverse, p.op, None).map_or(0, |c| c.checked) == 0 {
                return Err(format!("{adt}: no inverse check for {}", p.op));
            }
            for q in &calls {
                if spec.tables.commute_with_in(p, q)
                    && report.class(CheckKind::InCommute, p.op, Some(q.op)).map_or(0, |c| c.checked) == 0
                {
                    return Err(format!("{adt}: in-entry {}/{} never checked", p.op, q.op));
                }
                entries.insert((p.op, q.op));
            }
        }
        let covered = entries
            .iter()
            .filter(|(a, b)| {
                [CheckKind::InCommute, CheckKind::OutCommute]
                    .iter()
                    .any(|&k| report.class(k, a, Some(b)).is_some())
            })
            .count();
        let checked: usize = report.classes.iter().map(|c| c.checked).sum();
        lines.push(within(
            limit,
            start,
            format!(
                "{adt}: {} states, {checked} checks, {covered}/{} op pairs with commuting entries, 0 violations",
                report.states,
                entries.len()
            ),
        )?);
    }
    Ok(lines.join("; "))
}

fn serializability_fuzz(corpus: &Corpus) -> Check {
    let start = Instant::now();
    let runs = corpus.runs(false)?;
    let mut adts = BTreeSet::new();
    for run in runs {
        adts.extend(run.case.workload.objects.iter().map(|o| o.adt.clone()));
        let verdict = check_serializable(&run.case.workload, &run.outcome);
        if !verdict.is_accepted() {
            return Err(format!("case {}: {verdict}\n{}", run.case.index, run.case.workload.to_text()));
        }
    }
    let adts: Vec<_> = adts.into_iter().collect();
    within(
        Duration::from_secs(120),
        start,
        format!("{}/{} serializable over {}", runs.len(), CORPUS_RUNS, adts.join("+")),
    )
}

fn abort_transparency_fuzz(corpus: &Corpus) -> Check {
    let start = Instant::now();
    let runs = corpus.runs(true)?;
    let plain = corpus.runs(false)?;
    for (run, base) in runs.iter().zip(plain) {
        let victim = run.case.victim.ok_or_else(|| format!("case {} has no victim", run.case.index))?;
        let mut expected = base.case.workload.clone();
        expected.txns[victim].terminal = Terminal::Abort;
        if expected.to_text() != run.case.workload.to_text() {
            return Err(format!("case {} is not the plain workload with one abort", run.case.index));
        }
        let verdict = abort_transparency(&run.case.workload, &run.outcome, victim);
        if !verdict.is_accepted() {
            return Err(format!("case {}: {verdict}\n{}", run.case.index, run.case.workload.to_text()));
        }
    }
    within(
        Duration::from_secs(180),
        start,
        format!("{}/{} transparent aborts", runs.len(), CORPUS_RUNS),
    )
}

fn exactly_once(corpus: &Corpus) -> Check {
    let (mut executed, mut deduced, mut null_ops) = (0, 0, 0);
    for run in corpus.all_runs()? {
        let events = run.outcome.manager.history().events();
        let deductions: BTreeSet<_> = events
            .iter()
            .filter(|e| e.kind == EventKind::Deduce)
            .map(|e| (e.object, e.invocation))
            .collect();
        let mut counts = BTreeMap::new();
        for e in events.iter().filter(|e| e.kind == EventKind::Exec) {
            *counts.entry((e.object, e.invocation)).or_insert(0u32) += 1;
        }
        if let Some((key, n)) = counts.iter().find(|(_, &n)| n > 1) {
            return Err(format!("case {}: {key:?} executed {n} times", run.case.index));
        }
        if let Some(key) = deductions.iter().find(|k| counts.contains_key(k)) {
            return Err(format!("case {}: deduced {key:?} was executed", run.case.index));
        }
        for (&key, &n) in &run.outcome.execution_counts() {
            let expected = counts.get(&(Some(key.0), Some(key.1))).copied().unwrap_or(0);
            if n != expected {
                return Err(format!("case {}: counter {n} for {key:?} but {expected} EXEC events", run.case.index));
            }
        }
        // each issued public op is either an invocation or a NULL operation
        for (t, txn) in run.case.workload.txns.iter().enumerate() {
            let id = run.outcome.txn_ids[t];
            let issued = events
                .iter()
                .filter(|e| e.txn == id && matches!(e.kind, EventKind::Invoke | EventKind::NullOp))
                .count();
            if run.outcome.statuses[t] == TxnStatus::Committed && issued != txn.ops.len() {
                return Err(format!("case {}: {} issued {issued} of {} ops", run.case.index, txn.name, txn.ops.len()));
            }
            if issued > txn.ops.len() {
                return Err(format!("case {}: {} issued {issued} ops", run.case.index, txn.name));
            }
        }
        executed += counts.len();
        deduced += deductions.len();
        null_ops += events.iter().filter(|e| e.kind == EventKind::NullOp).count();
    }
    let replays = corpus.replays()?;
    let replayed_null: usize = replays.iter().map(|r| r.null_ops).sum();
    if replayed_null != null_ops {
        return Err(format!("replay saw {replayed_null} NULL operations, history has {null_ops}"));
    }
    Ok(format!(
        "{executed} executions at most once, {deduced} deductions never executed, {null_ops} NULL ops without monitor events"
    ))
}

fn deduction_scenario(corpus: &Corpus) -> Check {
    let w = parse(
        "object S stack\ntxn T1\n op S EMPTY\nend commit\ntxn T2\n op S POP\nend commit\nschedule steps T1 T1 T2",
        corpus.registry(),
    )?;
    let out = run_simulated(&w, None).map_err(|e| e.to_string())?;
    golden("deduction", &out.trace(), include_str!("golden/deduce_pop.trace"))?;
    let history = out.manager.history();
    let t2 = out.txn_ids[1];
    let deduce = history
        .events()
        .iter()
        .find(|e| e.kind == EventKind::Deduce && e.txn == t2)
        .ok_or("no DEDUCE event for T2")?;
    if deduce.outputs != vec![Value::Unit, Value::Report(Report::EmptyStack)] {
        return Err(format!("deduced outs {:?}", deduce.outputs));
    }
    if history.events().iter().any(|e| e.kind == EventKind::Block && e.txn == t2) {
        return Err("T2 blocked".into());
    }
    let pop = (deduce.object.unwrap(), deduce.invocation.unwrap());
    let count = out.execution_counts().get(&pop).copied().unwrap_or(0);
    if count != 0 {
        return Err(format!("POP executed {count} times"));
    }
    Ok("DEDUCE out=[⊥,EmptyStack], T2 never blocked, POP executed 0 times".into())
}

fn set_hints(corpus: &Corpus) -> Check {
    let insert = parse(
        "object Q set {x}\ntxn T1\n op Q INSERT x\nend commit\ntxn T2\n op Q INSERT x\nend commit\nschedule steps T1 T1 T2",
        corpus.registry(),
    )?;
    let out = run_simulated(&insert, None).map_err(|e| e.to_string())?;
    golden("INSERT/INSERT", &out.trace(), include_str!("golden/set_insert_already_in.trace"))?;
    let already_in = vec![Value::Report(Report::AlreadyIn)];
    if out.observed[1] != vec![already_in] {
        return Err(format!("second INSERT observed {:?}", out.observed[1]));
    }
    let card = parse(
        "object Q set {x}\ntxn T1\n op Q CARD\nend commit\ntxn T2\n op Q INSERT y\nend commit\nschedule steps T1 T1 T2",
        corpus.registry(),
    )?;
    let out = run_simulated(&card, None).map_err(|e| e.to_string())?;
    golden("CARD/INSERT", &out.trace(), include_str!("golden/set_card_blocks_insert.trace"))?;
    Ok("concurrent INSERT(x) deduced AlreadyIn; CARD blocked INSERT(y) until commit".into())
}

fn deadlock(corpus: &Corpus) -> Check {
    let text = "object A stack\nobject B stack\n\
                txn T1\n op A PUSH a\n op B PUSH b\nend commit\n\
                txn T2\n op B PUSH c\n op A PUSH d\nend commit\n";
    let mut w = parse(&format!("{text}schedule steps T1 T1 T2 T2 T1 T2"), corpus.registry())?;
    let check = |w: &Workload, seed: Option<u64>| -> Result<(usize, String), String> {
        let out = run_simulated(w, seed).map_err(|e| e.to_string())?;
        let again = run_simulated(w, seed).map_err(|e| e.to_string())?;
        if out.trace() != again.trace() {
            return Err(format!("seed {seed:?}: nondeterministic trace"));
        }
        let victims: Vec<_> = out
            .manager
            .history()
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::Victim)
            .map(|e| e.txn)
            .collect();
        if victims.len() > 1 || victims.iter().any(|&v| v != out.txn_ids[1]) {
            return Err(format!("seed {seed:?}: victims {victims:?}"));
        }
        if out.statuses[0] != TxnStatus::Committed {
            return Err(format!("seed {seed:?}: T1 ended {:?}", out.statuses[0]));
        }
        let verdict = check_serializable(w, &out);
        if !verdict.is_accepted() {
            return Err(format!("seed {seed:?}: {verdict}"));
        }
        Ok((victims.len(), out.trace()))
    };
    let (victims, trace) = check(&w, None)?;
    if victims != 1 {
        return Err("explicit crossed schedule produced no VICTIM".into());
    }
    golden("crossed deadlock", &trace, include_str!("golden/crossed_deadlock.trace"))?;
    let mut deadlocked = 0;
    const SEEDS: u64 = 300;
    for seed in 0..SEEDS {
        w.schedule = Some(Schedule::Random { seed, steps: 100 });
        deadlocked += check(&w, None)?.0;
    }
    if deadlocked == 0 {
        return Err("no random schedule deadlocked".into());
    }
    Ok(format!(
        "one VICTIM (T2), T1 committed, serializable; {deadlocked}/{SEEDS} random schedules deadlocked, all resolved the same way"
    ))
}

fn single_txn_abort(spec: &Arc<AdtSpec>, initial: &Value, calls: &[PublicInvocation]) -> Result<RunOutcome, String> {
    let w = Workload {
        objects: vec![ObjectDecl {
            name: "O".into(),
            adt: spec.name.into(),
            spec: spec.clone(),
            initial: initial.clone(),
        }],
        txns: vec![TxnDecl {
            name: "T1".into(),
            ops: calls.iter().map(|c| OpStep { object: 0, call: c.clone() }).collect(),
            terminal: Terminal::Abort,
        }],
        schedule: None,
    };
    let out = run_simulated(&w, Some(0)).map_err(|e| e.to_string())?;
    if out.statuses != vec![TxnStatus::Aborted] {
        return Err(format!("statuses {:?}", out.statuses));
    }
    if out.final_states() != vec![initial.clone()] {
        return Err(format!(
            "{} from {initial}: {:?} left {}",
            spec.name,
            calls,
            out.final_states()[0]
        ));
    }
    Ok(out)
}

fn inverse_exactness(corpus: &Corpus) -> Check {
    let registry = corpus.registry();
    let mut summary = Vec::new();
    for name in registry.names() {
        let spec = registry.get(name).map_err(|e| e.to_string())?;
        let calls: Vec<PublicInvocation> = spec
            .public_ops
            .iter()
            .flat_map(|op| {
                spec.semantics
                    .public_args(op.name)
                    .into_iter()
                    .map(|args| PublicInvocation::new(op.name, args))
            })
            .collect();
        let (mut executed, mut inverses) = (BTreeSet::new(), BTreeSet::new());
        let mut runs = 0;
        for initial in spec.semantics.sample_states() {
            let sequences = calls
                .iter()
                .map(|c| vec![c.clone()])
                .chain(calls.iter().flat_map(|a| calls.iter().map(move |b| vec![a.clone(), b.clone()])));
            for seq in sequences {
                let out = single_txn_abort(&spec, &initial, &seq)?;
                for e in out.manager.history().events() {
                    match e.kind {
                        EventKind::Exec => executed.extend(e.op),
                        EventKind::Inverse => inverses.extend(e.op),
                        _ => {}
                    }
                }
                runs += 1;
            }
        }
        for op in &spec.private_ops {
            let seen = if op.inverse_only { &inverses } else { &executed };
            if !seen.contains(op.name) {
                return Err(format!("{name}: private op {} never exercised", op.name));
            }
        }
        summary.push(format!("{name} {runs} runs over {} private ops", spec.private_ops.len()));
    }
    Ok(format!("every abort restored the initial state ({})", summary.join(", ")))
}

fn monitor_invariants(corpus: &Corpus) -> Check {
    let replays = corpus.replays()?;
    let events: usize = replays.iter().map(|r| r.events).sum();
    let checks: usize = replays.iter().map(|r| r.invariant_checks).sum();
    if checks < events {
        return Err(format!("{checks} invariant checks for {events} events"));
    }
    Ok(format!("{} traces, {events} events, {checks} invariant checks, 0 failures", replays.len()))
}

fn determinism(corpus: &Corpus) -> Check {
    let config = FuzzConfig {
        runs: 100,
        seed: 10,
        minimize: false,
        ..FuzzConfig::default()
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for i in 0..config.runs {
        let case = generate_case(&config, corpus.registry(), i).map_err(|e| e.to_string())?;
        let seed = Some(i as u64 * 31 + 7);
        let mut files = Vec::new();
        for attempt in 0..2 {
            let out = run_simulated(&case.workload, seed).map_err(|e| e.to_string())?;
            let path = dir.path().join(format!("run{i}-{attempt}.trace"));
            std::fs::write(&path, out.trace()).map_err(|e| e.to_string())?;
            files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        if files[0] != files[1] {
            return Err(format!("workload {i} produced different traces"));
        }
    }
    Ok(format!("{} workloads produced byte-identical trace files", config.runs))
}

fn main() -> ExitCode {
    let corpus = Corpus::default();
    let criteria: [Criterion; 10] = [
        ("table soundness", table_soundness),
        ("serializability fuzz", serializability_fuzz),
        ("abort transparency", abort_transparency_fuzz),
        ("exactly-once", exactly_once),
        ("deduction scenario", deduction_scenario),
        ("set hints", set_hints),
        ("deadlock", deadlock),
        ("inverse exactness", inverse_exactness),
        ("monitor invariants", monitor_invariants),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        match criterion(&corpus) {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
