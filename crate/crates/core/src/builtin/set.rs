//! SET with `INSERT`, `DELETE`, `IN` and `CARD`.
//!
//! The state is the sorted item list. Reports carry enough information to
//! undo: an `INSERT` reporting `AlreadyIn` changed nothing and has a NULL
//! inverse.

use std::collections::BTreeSet;

use crate::adt::{
    always, same_outs, AdtSpec, InverseRule, OpName, PrivateCall, PrivateOp, PublicOp, Semantics, TranslationRule,
    TranslationTarget,
};
use crate::commutativity::{CommutTables, Deduction, InCommutEntry, OutCommutEntry, OutPredicate};
use crate::error::AdtError;
use crate::value::{parse_item_list, Item, Report, Tag, Value};

use super::{first_ne, report, report_is};

const ITEM_DOMAIN: [&str; 4] = ["a", "b", "c", "d"];

struct SetSemantics;

fn universe(n: usize) -> Vec<Item> {
    (0..n)
        .map(|i| match u8::try_from(i) {
            Ok(i) if i < 26 => Item::new(char::from(b'a' + i).to_string()),
            _ => Item::new(format!("i{i}")),
        })
        .collect()
}

impl SetSemantics {
    fn members(state: &Value) -> BTreeSet<Item> {
        state
            .as_items()
            .expect("set state is an item sequence")
            .iter()
            .cloned()
            .collect()
    }
}

impl Semantics for SetSemantics {
    fn initial_state(&self) -> Value {
        Value::Items(Vec::new())
    }

    fn parse_state(&self, literal: &str) -> Option<Value> {
        let items = parse_item_list(literal, '{', '}').ok()?;
        let set: BTreeSet<Item> = items.into_iter().collect();
        Some(Value::Items(set.into_iter().collect()))
    }

    fn render_state(&self, state: &Value) -> String {
        let s = state.to_string();
        format!("{{{}}}", &s[1..s.len() - 1])
    }

    fn apply(&self, state: &Value, call: &PrivateCall) -> Result<(Value, Vec<Value>), AdtError> {
        let mut members = Self::members(state);
        let outs = match call.op {
            "INSERT" => {
                let x = call.args[0].as_item().expect("INSERT takes an item").clone();
                if members.insert(x) {
                    vec![report(Report::Ok)]
                } else {
                    vec![report(Report::AlreadyIn)]
                }
            }
            "DELETE" => {
                let x = call.args[0].as_item().expect("DELETE takes an item");
                if members.remove(x) {
                    vec![report(Report::Ok)]
                } else {
                    vec![report(Report::NotFound)]
                }
            }
            "IN" => vec![Value::Boolean(
                members.contains(call.args[0].as_item().expect("IN takes an item")),
            )],
            "CARD" => vec![Value::Nat(members.len() as u64)],
            other => unreachable!("unchecked set op {other}"),
        };
        Ok((Value::Items(members.into_iter().collect()), outs))
    }

    fn enumerate_states(&self, bound: usize) -> Vec<Value> {
        let universe = universe(bound);
        (0u64..1 << bound.min(20))
            .map(|mask| {
                Value::Items(
                    universe
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, x)| x.clone())
                        .collect(),
                )
            })
            .collect()
    }

    fn private_args(&self, op: OpName) -> Vec<Vec<Value>> {
        match op {
            "CARD" => vec![vec![]],
            _ => ITEM_DOMAIN.iter().map(|x| vec![Value::item(x)]).collect(),
        }
    }

    fn public_args(&self, op: OpName) -> Vec<Vec<Value>> {
        self.private_args(op)
    }
}

fn is_report(outs: &[Value], r: Report) -> bool {
    report_is(&outs[0], r)
}

fn same_item(a: &[Value], _: &[Value], b: &[Value]) -> bool {
    a[0] == b[0]
}

fn out_entry(executed: OpName, incoming: OpName, when: OutPredicate, deduce: Option<Deduction>) -> OutCommutEntry {
    OutCommutEntry {
        executed,
        incoming,
        when,
        deduce,
    }
}

pub fn spec() -> AdtSpec {
    let identity = |name: OpName| TranslationRule {
        public_op: name,
        when: always,
        target: TranslationTarget::Private {
            op: name,
            args: <[Value]>::to_vec,
        },
        out_mapping: same_outs,
    };
    let in_entry = |a, b, when| InCommutEntry { a, b, when };
    let any = |_: &[Value], _: &[Value]| true;
    AdtSpec {
        name: "set",
        public_ops: vec![
            PublicOp { name: "INSERT", inputs: &[Tag::Item] },
            PublicOp { name: "DELETE", inputs: &[Tag::Item] },
            PublicOp { name: "IN", inputs: &[Tag::Item] },
            PublicOp { name: "CARD", inputs: &[] },
        ],
        private_ops: vec![
            PrivateOp { name: "INSERT", inputs: &[Tag::Item], inverse_only: false },
            PrivateOp { name: "DELETE", inputs: &[Tag::Item], inverse_only: false },
            PrivateOp { name: "IN", inputs: &[Tag::Item], inverse_only: false },
            PrivateOp { name: "CARD", inputs: &[], inverse_only: false },
        ],
        translations: ["INSERT", "DELETE", "IN", "CARD"].into_iter().map(identity).collect(),
        inverses: vec![
            InverseRule {
                direct_op: "INSERT",
                when: |_, outs| is_report(outs, Report::Ok),
                inverse: Some(("DELETE", |ins, _| ins.to_vec())),
            },
            InverseRule {
                direct_op: "INSERT",
                when: |_, outs| is_report(outs, Report::AlreadyIn),
                inverse: None,
            },
            InverseRule {
                direct_op: "DELETE",
                when: |_, outs| is_report(outs, Report::Ok),
                inverse: Some(("INSERT", |ins, _| ins.to_vec())),
            },
            InverseRule {
                direct_op: "DELETE",
                when: |_, outs| is_report(outs, Report::NotFound),
                inverse: None,
            },
            InverseRule { direct_op: "IN", when: |_, _| true, inverse: None },
            InverseRule { direct_op: "CARD", when: |_, _| true, inverse: None },
        ],
        tables: CommutTables {
            in_entries: vec![
                in_entry("INSERT", "INSERT", first_ne),
                in_entry("DELETE", "DELETE", first_ne),
                in_entry("INSERT", "DELETE", first_ne),
                in_entry("IN", "INSERT", first_ne),
                in_entry("IN", "DELETE", first_ne),
                in_entry("IN", "IN", any),
                in_entry("CARD", "CARD", any),
                in_entry("CARD", "IN", any),
            ],
            out_entries: vec![
                out_entry(
                    "INSERT",
                    "INSERT",
                    |a, o, b| is_report(o, Report::AlreadyIn) && same_item(a, o, b),
                    Some(|_, _, _| vec![report(Report::AlreadyIn)]),
                ),
                out_entry(
                    "INSERT",
                    "IN",
                    |a, o, b| is_report(o, Report::AlreadyIn) && same_item(a, o, b),
                    Some(|_, _, _| vec![Value::Boolean(true)]),
                ),
                out_entry("INSERT", "CARD", |_, o, _| is_report(o, Report::AlreadyIn), None),
                out_entry(
                    "DELETE",
                    "DELETE",
                    |a, o, b| is_report(o, Report::NotFound) && same_item(a, o, b),
                    Some(|_, _, _| vec![report(Report::NotFound)]),
                ),
                out_entry(
                    "DELETE",
                    "IN",
                    |a, o, b| is_report(o, Report::NotFound) && same_item(a, o, b),
                    Some(|_, _, _| vec![Value::Boolean(false)]),
                ),
                out_entry("DELETE", "CARD", |_, o, _| is_report(o, Report::NotFound), None),
                out_entry("IN", "IN", same_item, Some(|_, o, _| o.to_vec())),
                out_entry(
                    "IN",
                    "INSERT",
                    |a, o, b| o[0] == Value::Boolean(true) && same_item(a, o, b),
                    Some(|_, _, _| vec![report(Report::AlreadyIn)]),
                ),
                out_entry(
                    "IN",
                    "DELETE",
                    |a, o, b| o[0] == Value::Boolean(false) && same_item(a, o, b),
                    Some(|_, _, _| vec![report(Report::NotFound)]),
                ),
                out_entry("CARD", "CARD", |_, _, _| true, Some(|_, o, _| o.to_vec())),
                out_entry(
                    "CARD",
                    "IN",
                    |_, o, _| o[0] == Value::Nat(0),
                    Some(|_, _, _| vec![Value::Boolean(false)]),
                ),
            ],
        },
        semantics: Box::new(SetSemantics),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adt::Inverse;

    #[test]
    fn insert_reports() {
        let s = spec();
        let x = PrivateCall::new("INSERT", vec![Value::item("x")]);
        let (state, outs) = s.apply(&Value::items(["x"]), &x).unwrap();
        assert_eq!(state, Value::items(["x"]));
        assert_eq!(outs, vec![report(Report::AlreadyIn)]);
        assert_eq!(s.determine_inverse(&x, &outs).unwrap(), Inverse::Null);
        let (state, outs) = s.apply(&Value::items(["y"]), &x).unwrap();
        assert_eq!(state, Value::items(["x", "y"]));
        assert_eq!(
            s.determine_inverse(&x, &outs).unwrap(),
            Inverse::Apply(PrivateCall::new("DELETE", vec![Value::item("x")]))
        );
    }

    #[test]
    fn card_conflicts_with_updates() {
        let t = spec().tables;
        let card = PrivateCall::new("CARD", vec![]);
        for op in ["INSERT", "DELETE"] {
            let upd = PrivateCall::new(op, vec![Value::item("a")]);
            assert!(!t.commute_with_in(&card, &upd));
            for n in 0..3 {
                assert!(!t.commute_with_in_out(&card, &[Value::Nat(n)], &upd).commutes());
            }
        }
    }

    #[test]
    fn already_in_deduces_already_in() {
        let t = spec().tables;
        let ins = PrivateCall::new("INSERT", vec![Value::item("x")]);
        assert_eq!(
            t.try_deduce([(&ins, &[report(Report::AlreadyIn)][..])], [], &ins),
            Some(vec![report(Report::AlreadyIn)])
        );
        assert_eq!(t.try_deduce([(&ins, &[report(Report::Ok)][..])], [], &ins), None);
    }

    #[test]
    fn states_and_literals() {
        assert_eq!(SetSemantics.enumerate_states(2).len(), 4);
        assert_eq!(SetSemantics.enumerate_states(3).len(), 8);
        let st = SetSemantics.parse_state("{b, a, b}").unwrap();
        assert_eq!(st, Value::items(["a", "b"]));
        assert_eq!(SetSemantics.render_state(&st), "{a,b}");
    }
}
