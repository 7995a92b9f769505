//! STACK with `PUSH`, `POP`, `EMPTY` and `CLEAR`.
//!
//! The commutativity tables hold two in-entries and nine out-entries.
//! `CLEAR` returns the removed contents as a hidden out-parameter so that its
//! inverse, `RESTORE`, can be built from in/out-params alone.

use crate::adt::{
    always, always_io, no_params, same_outs, AdtSpec, OpName, PrivateCall, PrivateOp, PublicOp, Semantics,
    TranslationRule, TranslationTarget, InverseRule,
};
use crate::commutativity::{CommutTables, InCommutEntry, OutCommutEntry};
use crate::error::AdtError;
use crate::value::{parse_item_list, Item, Report, Tag, Value};

use super::{first_eq, report, report_is, sequences};

const ALPHABET: [&str; 2] = ["a", "b"];

struct StackSemantics;

fn contents(state: &Value) -> &[Item] {
    state.as_items().expect("stack state is an item sequence")
}

impl Semantics for StackSemantics {
    fn initial_state(&self) -> Value {
        Value::Items(Vec::new())
    }

    fn parse_state(&self, literal: &str) -> Option<Value> {
        parse_item_list(literal, '[', ']').ok().map(Value::Items)
    }

    fn apply(&self, state: &Value, call: &PrivateCall) -> Result<(Value, Vec<Value>), AdtError> {
        let mut items = contents(state).to_vec();
        let outs = match call.op {
            "PUSH" => {
                items.push(call.args[0].as_item().expect("PUSH takes an item").clone());
                vec![]
            }
            "POP" => match items.pop() {
                Some(x) => vec![Value::Item(x), report(Report::Ok)],
                None => vec![Value::Unit, report(Report::EmptyStack)],
            },
            "EMPTY" => vec![Value::Boolean(items.is_empty())],
            "CLEAR" => {
                if items.is_empty() {
                    vec![report(Report::AlreadyEmpty), Value::Items(vec![])]
                } else {
                    vec![report(Report::Ok), Value::Items(std::mem::take(&mut items))]
                }
            }
            "RESTORE" => {
                items.extend_from_slice(call.args[0].as_items().expect("RESTORE takes items"));
                vec![]
            }
            other => unreachable!("unchecked stack op {other}"),
        };
        Ok((Value::Items(items), outs))
    }

    fn enumerate_states(&self, bound: usize) -> Vec<Value> {
        sequences(&ALPHABET, bound).into_iter().map(Value::Items).collect()
    }

    fn private_args(&self, op: OpName) -> Vec<Vec<Value>> {
        match op {
            "PUSH" => ALPHABET.iter().map(|x| vec![Value::item(x)]).collect(),
            "RESTORE" => vec![vec![Value::items(["a"])], vec![Value::items(["b", "a"])]],
            _ => vec![vec![]],
        }
    }

    fn public_args(&self, op: OpName) -> Vec<Vec<Value>> {
        match op {
            "PUSH" => ["a", "b", "c"].iter().map(|x| vec![Value::item(x)]).collect(),
            _ => vec![vec![]],
        }
    }
}

fn push_args(ins: &[Value]) -> Vec<Value> {
    ins.to_vec()
}

fn report_only(outs: &[Value]) -> Vec<Value> {
    vec![outs[0].clone()]
}

fn popped_item(_: &[Value], outs: &[Value]) -> Vec<Value> {
    vec![outs[0].clone()]
}

fn cleared_items(_: &[Value], outs: &[Value]) -> Vec<Value> {
    vec![outs[1].clone()]
}

fn pop_ok(_: &[Value], outs: &[Value]) -> bool {
    report_is(&outs[1], Report::Ok)
}

fn pop_empty(_: &[Value], outs: &[Value]) -> bool {
    report_is(&outs[1], Report::EmptyStack)
}

fn clear_ok(_: &[Value], outs: &[Value]) -> bool {
    report_is(&outs[0], Report::Ok)
}

fn clear_already_empty(_: &[Value], outs: &[Value]) -> bool {
    report_is(&outs[0], Report::AlreadyEmpty)
}

fn any_pair(_: &[Value], _: &[Value]) -> bool {
    true
}

// Out-table conditions and deductions, over (executed ins, executed outs, incoming ins).

fn popped_empty(_: &[Value], outs: &[Value], _: &[Value]) -> bool {
    report_is(&outs[1], Report::EmptyStack)
}

fn was_empty(_: &[Value], outs: &[Value], _: &[Value]) -> bool {
    outs[0] == Value::Boolean(true)
}

fn cleared_nothing(_: &[Value], outs: &[Value], _: &[Value]) -> bool {
    report_is(&outs[0], Report::AlreadyEmpty)
}

fn unconditional(_: &[Value], _: &[Value], _: &[Value]) -> bool {
    true
}

fn pop_reports_empty(_: &[Value], _: &[Value], _: &[Value]) -> Vec<Value> {
    vec![Value::Unit, report(Report::EmptyStack)]
}

fn empty_reports_true(_: &[Value], _: &[Value], _: &[Value]) -> Vec<Value> {
    vec![Value::Boolean(true)]
}

fn clear_reports_already_empty(_: &[Value], _: &[Value], _: &[Value]) -> Vec<Value> {
    vec![report(Report::AlreadyEmpty), Value::Items(vec![])]
}

fn same_report(_: &[Value], outs: &[Value], _: &[Value]) -> Vec<Value> {
    vec![outs[0].clone()]
}

fn out_entry(
    executed: OpName,
    incoming: OpName,
    when: crate::commutativity::OutPredicate,
    deduce: crate::commutativity::Deduction,
) -> OutCommutEntry {
    OutCommutEntry {
        executed,
        incoming,
        when,
        deduce: Some(deduce),
    }
}

pub fn spec() -> AdtSpec {
    let private = |name, op: OpName, args| TranslationRule {
        public_op: name,
        when: always,
        target: TranslationTarget::Private { op, args },
        out_mapping: same_outs,
    };
    AdtSpec {
        name: "stack",
        public_ops: vec![
            PublicOp { name: "PUSH", inputs: &[Tag::Item] },
            PublicOp { name: "POP", inputs: &[] },
            PublicOp { name: "EMPTY", inputs: &[] },
            PublicOp { name: "CLEAR", inputs: &[] },
        ],
        private_ops: vec![
            PrivateOp { name: "PUSH", inputs: &[Tag::Item], inverse_only: false },
            PrivateOp { name: "POP", inputs: &[], inverse_only: false },
            PrivateOp { name: "EMPTY", inputs: &[], inverse_only: false },
            PrivateOp { name: "CLEAR", inputs: &[], inverse_only: false },
            PrivateOp { name: "RESTORE", inputs: &[Tag::Items], inverse_only: true },
        ],
        translations: vec![
            private("PUSH", "PUSH", push_args),
            private("POP", "POP", no_params),
            private("EMPTY", "EMPTY", no_params),
            TranslationRule {
                out_mapping: report_only,
                ..private("CLEAR", "CLEAR", no_params)
            },
        ],
        inverses: vec![
            InverseRule { direct_op: "PUSH", when: always_io, inverse: Some(("POP", |_, _| vec![])) },
            InverseRule { direct_op: "POP", when: pop_ok, inverse: Some(("PUSH", popped_item)) },
            InverseRule { direct_op: "POP", when: pop_empty, inverse: None },
            InverseRule { direct_op: "EMPTY", when: always_io, inverse: None },
            InverseRule { direct_op: "CLEAR", when: clear_ok, inverse: Some(("RESTORE", cleared_items)) },
            InverseRule { direct_op: "CLEAR", when: clear_already_empty, inverse: None },
        ],
        tables: CommutTables {
            in_entries: vec![
                InCommutEntry { a: "PUSH", b: "PUSH", when: first_eq },
                InCommutEntry { a: "EMPTY", b: "EMPTY", when: any_pair },
            ],
            out_entries: vec![
                out_entry("POP", "POP", popped_empty, pop_reports_empty),
                out_entry("POP", "EMPTY", popped_empty, empty_reports_true),
                out_entry("POP", "CLEAR", popped_empty, clear_reports_already_empty),
                out_entry("EMPTY", "POP", was_empty, pop_reports_empty),
                out_entry("EMPTY", "EMPTY", unconditional, same_report),
                out_entry("EMPTY", "CLEAR", was_empty, clear_reports_already_empty),
                out_entry("CLEAR", "POP", cleared_nothing, pop_reports_empty),
                out_entry("CLEAR", "EMPTY", cleared_nothing, empty_reports_true),
                out_entry("CLEAR", "CLEAR", cleared_nothing, clear_reports_already_empty),
            ],
        },
        semantics: Box::new(StackSemantics),
    }
}
