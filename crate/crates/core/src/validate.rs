//! Brute-force validation of an ADT description against its reference
//! semantics.
//!
//! For every enumerated state and every pair of private invocations drawn
//! from the bounded parameter domains, the validator checks that:
//!
//! - in-commuting pairs produce the same final state and the same out-params
//!   for both operations in either order;
//! - out-commuting pairs (first operation executed from that state) do the
//!   same, and any deduced out-params equal the real ones;
//! - in-commutativity implies out-commutativity whatever the outs;
//! - exactly one inverse rule matches each execution, and applying the
//!   inverse restores the state;
//! - exactly one translation rule matches each sampled public call.
//!
//! Every enumerated state is its own "consistent state" for the
//! out-commutativity check, so sweeping all states covers every state that
//! could have produced a given observation.

use std::collections::BTreeMap;
use std::fmt;

use crate::adt::{AdtSpec, Inverse, OpName, PrivateCall, PublicInvocation};
use crate::commutativity::OutVerdict;
use crate::exec::Exec;
use crate::value::{render_params, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKind {
    Translation,
    Inverse,
    InCommute,
    OutCommute,
    Containment,
}

impl CheckKind {
    fn label(self) -> &'static str {
        match self {
            CheckKind::Translation => "translate",
            CheckKind::Inverse => "inverse",
            CheckKind::InCommute => "in",
            CheckKind::OutCommute => "out",
            CheckKind::Containment => "in=>out",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    /// Rendered state the failing check started from (`-` if state-free).
    pub state: String,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ClassReport {
    pub kind: CheckKind,
    pub first: OpName,
    pub second: Option<OpName>,
    pub checked: usize,
    pub violations: Vec<Counterexample>,
}

impl ClassReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ClassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} {}", self.kind.label(), self.first)?;
        if let Some(second) = self.second {
            write!(f, "/{second}")?;
        }
        write!(f, " checked={}", self.checked)?;
        if let Some(cx) = self.violations.first() {
            write!(
                f,
                " violations={} counterexample: state={} {}",
                self.violations.len(),
                cx.state,
                cx.detail
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub adt: String,
    pub bound: usize,
    pub states: usize,
    pub classes: Vec<ClassReport>,
}

impl ValidationReport {
    pub fn violation_count(&self) -> usize {
        self.classes.iter().map(|c| c.violations.len()).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.violation_count() == 0
    }

    pub fn class(&self, kind: CheckKind, first: &str, second: Option<&str>) -> Option<&ClassReport> {
        self.classes
            .iter()
            .find(|c| c.kind == kind && c.first == first && c.second == second)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ClassReport> {
        self.classes.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for class in &self.classes {
            writeln!(f, "{class}")?;
        }
        write!(
            f,
            "{} adt={} bound={} states={} classes={} violations={}",
            if self.is_clean() { "PASS" } else { "FAIL" },
            self.adt,
            self.bound,
            self.states,
            self.classes.len(),
            self.violation_count()
        )
    }
}

type ClassKey = (CheckKind, OpName, Option<OpName>);

#[derive(Default)]
struct Tally {
    classes: BTreeMap<ClassKey, (usize, Vec<Counterexample>)>,
}

impl Tally {
    fn record(&mut self, key: ClassKey, outcome: Result<(), Counterexample>) {
        let entry = self.classes.entry(key).or_default();
        entry.0 += 1;
        if let Err(cx) = outcome {
            entry.1.push(cx);
        }
    }

    fn merge(&mut self, other: Tally) {
        for (key, (checked, violations)) in other.classes {
            let entry = self.classes.entry(key).or_default();
            entry.0 += checked;
            entry.1.extend(violations);
        }
    }
}

struct Pair<'a> {
    spec: &'a AdtSpec,
    state: &'a Value,
    p: &'a PrivateCall,
    q: &'a PrivateCall,
}

impl Pair<'_> {
    fn fail(&self, detail: String) -> Counterexample {
        Counterexample {
            state: self.spec.render_state(self.state),
            detail: format!("p={} q={}: {detail}", self.p, self.q),
        }
    }

    fn run(&self, first: &PrivateCall, second: &PrivateCall) -> Result<(Value, Vec<Value>, Vec<Value>), Counterexample> {
        let (mid, o1) = self
            .spec
            .apply(self.state, first)
            .map_err(|e| self.fail(e.to_string()))?;
        let (end, o2) = self.spec.apply(&mid, second).map_err(|e| self.fail(e.to_string()))?;
        Ok((end, o1, o2))
    }

    /// Both orders from this state agree on final state and on both
    /// operations' outs. Returns q's outs.
    fn order_independent(&self) -> Result<Vec<Value>, Counterexample> {
        let (end_pq, p_first, q_second) = self.run(self.p, self.q)?;
        let (end_qp, q_first, p_second) = self.run(self.q, self.p)?;
        let render = |v: &Value| self.spec.render_state(v);
        if end_pq != end_qp {
            return Err(self.fail(format!("final states differ ({} vs {})", render(&end_pq), render(&end_qp))));
        }
        if p_first != p_second {
            return Err(self.fail(format!(
                "p outs differ ({} vs {})",
                render_params(&p_first),
                render_params(&p_second)
            )));
        }
        if q_second != q_first {
            return Err(self.fail(format!(
                "q outs differ ({} vs {})",
                render_params(&q_second),
                render_params(&q_first)
            )));
        }
        Ok(q_second)
    }
}

fn direct_invocations(spec: &AdtSpec) -> Vec<PrivateCall> {
    spec.direct_ops()
        .flat_map(|op| {
            spec.semantics
                .private_args(op.name)
                .into_iter()
                .map(move |args| PrivateCall::new(op.name, args))
        })
        .collect()
}

fn check_state(spec: &AdtSpec, state: &Value, invocations: &[PrivateCall]) -> Tally {
    let mut tally = Tally::default();
    let tables = &spec.tables;
    let render = spec.render_state(state);
    for p in invocations {
        let inv_key = (CheckKind::Inverse, p.op, None);
        let (after, outs) = match spec.apply(state, p) {
            Ok(r) => r,
            Err(e) => {
                tally.record(
                    inv_key,
                    Err(Counterexample {
                        state: render.clone(),
                        detail: format!("p={p}: {e}"),
                    }),
                );
                continue;
            }
        };
        let restored = match spec.determine_inverse(p, &outs) {
            Ok(Inverse::Null) => Ok(after.clone()),
            Ok(Inverse::Apply(inv)) => spec.apply(&after, &inv).map(|(s, _)| s).map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        let inverse_outcome = match restored {
            Ok(s) if s == *state => Ok(()),
            Ok(s) => Err(format!(
                "outs={} inverse leaves {}",
                render_params(&outs),
                spec.render_state(&s)
            )),
            Err(e) => Err(format!("outs={}: {e}", render_params(&outs))),
        };
        tally.record(
            inv_key,
            inverse_outcome.map_err(|detail| Counterexample {
                state: render.clone(),
                detail: format!("p={p} {detail}"),
            }),
        );

        for q in invocations {
            let pair = Pair { spec, state, p, q };
            let in_commutes = tables.commute_with_in(p, q);
            if in_commutes {
                tally.record(
                    (CheckKind::InCommute, p.op, Some(q.op)),
                    pair.order_independent().map(|_| ()),
                );
            }
            let verdict = tables.commute_with_in_out(p, &outs, q);
            if in_commutes {
                tally.record(
                    (CheckKind::Containment, p.op, Some(q.op)),
                    if verdict.commutes() {
                        Ok(())
                    } else {
                        Err(pair.fail(format!("no out-commutation after outs={}", render_params(&outs))))
                    },
                );
            }
            if let OutVerdict::Commute(deduced) = verdict {
                let outcome = pair.order_independent().and_then(|q_outs| match deduced {
                    Some(d) if d != q_outs => Err(pair.fail(format!(
                        "after outs={} deduced {} but execution gives {}",
                        render_params(&outs),
                        render_params(&d),
                        render_params(&q_outs)
                    ))),
                    _ => Ok(()),
                });
                tally.record((CheckKind::OutCommute, p.op, Some(q.op)), outcome);
            }
        }
    }
    tally
}

fn check_translations(spec: &AdtSpec) -> Tally {
    let mut tally = Tally::default();
    for op in &spec.public_ops {
        for args in spec.semantics.public_args(op.name) {
            let call = PublicInvocation::new(op.name, args);
            let outcome = spec
                .translate_public(&call)
                .map_err(|e| e.to_string())
                .and_then(|t| match t {
                    crate::adt::Translated::Private { call: private, .. } => {
                        spec.check_private(&private).map(|_| ()).map_err(|e| e.to_string())
                    }
                    crate::adt::Translated::NullDirect(_) => Ok(()),
                })
                .map_err(|detail| Counterexample {
                    state: "-".into(),
                    detail: format!("{}{}: {detail}", op.name, render_params(&call.args)),
                });
            tally.record((CheckKind::Translation, op.name, None), outcome);
        }
    }
    tally
}

/// Validates every table entry, inverse rule and translation rule of `spec`
/// over the states enumerated up to `bound`.
pub fn validate_tables(spec: &AdtSpec, bound: usize, exec: Exec) -> ValidationReport {
    let states = spec.semantics.enumerate_states(bound);
    let invocations = direct_invocations(spec);
    let mut tally = check_translations(spec);
    for per_state in exec.map(&states, |s| check_state(spec, s, &invocations)) {
        tally.merge(per_state);
    }
    ValidationReport {
        adt: spec.name.to_string(),
        bound,
        states: states.len(),
        classes: tally
            .classes
            .into_iter()
            .map(|((kind, first, second), (checked, violations))| ClassReport {
                kind,
                first,
                second,
                checked,
                violations,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::commutativity::InCommutEntry;

    #[test]
    fn stack_tables_are_sound() {
        let report = validate_tables(&builtin::stack::spec(), 3, Exec::default());
        assert_eq!(report.states, 15);
        assert!(report.is_clean(), "{report}");
        // every published out-entry got exercised
        for (a, b) in [
            ("POP", "POP"),
            ("POP", "EMPTY"),
            ("POP", "CLEAR"),
            ("EMPTY", "POP"),
            ("EMPTY", "EMPTY"),
            ("EMPTY", "CLEAR"),
            ("CLEAR", "POP"),
            ("CLEAR", "EMPTY"),
            ("CLEAR", "CLEAR"),
        ] {
            let class = report.class(CheckKind::OutCommute, a, Some(b)).unwrap();
            assert!(class.checked > 0);
        }
    }

    #[test]
    fn corrupted_entry_is_caught_on_the_empty_stack() {
        let mut spec = builtin::stack::spec();
        spec.tables.in_entries.push(InCommutEntry {
            a: "POP",
            b: "PUSH",
            when: |_, _| true,
        });
        let report = validate_tables(&spec, 3, Exec::Sequential);
        assert!(!report.is_clean());
        let class = report.class(CheckKind::InCommute, "POP", Some("PUSH")).unwrap();
        assert_eq!(class.violations[0].state, "[]");
        assert!(report.to_string().contains("FAIL in POP/PUSH"));
    }

    #[test]
    fn strategies_agree() {
        let spec = builtin::set::spec();
        let a = validate_tables(&spec, 3, Exec::Sequential).to_string();
        let b = validate_tables(&spec, 3, Exec::default()).to_string();
        assert_eq!(a, b);
    }

    #[test]
    fn all_builtins_clean() {
        for name in builtin::BUILTIN_NAMES {
            let spec = builtin::register_builtin(name).unwrap();
            let bound = if name == "real" { 1 } else { 3 };
            let report = validate_tables(&spec, bound, Exec::default());
            assert!(report.is_clean(), "{name}:\n{report}");
        }
    }

    #[test]
    fn broken_inverse_is_caught() {
        let mut spec = builtin::set::spec();
        // claim INSERT reporting Ok needs no undo
        spec.inverses.retain(|r| !(r.direct_op == "INSERT" && r.inverse.is_some()));
        let report = validate_tables(&spec, 2, Exec::Sequential);
        let class = report.class(CheckKind::Inverse, "INSERT", None).unwrap();
        assert!(!class.passed());
    }
}
