//! BOOLEAN: six public operations over three private ones.
//!
//! `OR(false)`, `AND(true)` and `XOR(false)` are NULL; `OR(true)` and
//! `AND(false)` become `SETTO`; `XOR(true)` becomes `NOT`. Public operations
//! other than `READ` return nothing.

use crate::adt::{
    always, no_params, same_outs, AdtSpec, InverseRule, OpName, ParamFn, ParamPredicate, PrivateCall, PrivateOp,
    PublicOp, Semantics, TranslationRule, TranslationTarget,
};
use crate::commutativity::{CommutTables, InCommutEntry};
use crate::error::AdtError;
use crate::value::{Tag, Value};

use super::register_out_entries;

struct BooleanSemantics;

impl Semantics for BooleanSemantics {
    fn initial_state(&self) -> Value {
        Value::Boolean(false)
    }

    fn parse_state(&self, literal: &str) -> Option<Value> {
        match literal {
            "true" => Some(Value::Boolean(true)),
            "false" => Some(Value::Boolean(false)),
            _ => None,
        }
    }

    fn apply(&self, state: &Value, call: &PrivateCall) -> Result<(Value, Vec<Value>), AdtError> {
        let b = state.as_bool().expect("boolean state");
        Ok(match call.op {
            "NOT" => (Value::Boolean(!b), vec![]),
            "SETTO" => (call.args[0].clone(), vec![state.clone()]),
            "READ" => (state.clone(), vec![state.clone()]),
            other => unreachable!("unchecked boolean op {other}"),
        })
    }

    fn enumerate_states(&self, _bound: usize) -> Vec<Value> {
        vec![Value::Boolean(false), Value::Boolean(true)]
    }

    fn private_args(&self, op: OpName) -> Vec<Vec<Value>> {
        match op {
            "SETTO" => vec![vec![Value::Boolean(false)], vec![Value::Boolean(true)]],
            _ => vec![vec![]],
        }
    }

    fn public_args(&self, op: OpName) -> Vec<Vec<Value>> {
        match op {
            "NOT" | "READ" => vec![vec![]],
            _ => vec![vec![Value::Boolean(false)], vec![Value::Boolean(true)]],
        }
    }
}

fn arg_is(ins: &[Value], b: bool) -> bool {
    ins[0] == Value::Boolean(b)
}

fn constant_true(_: &[Value]) -> Vec<Value> {
    vec![Value::Boolean(true)]
}

fn constant_false(_: &[Value]) -> Vec<Value> {
    vec![Value::Boolean(false)]
}

pub fn spec() -> AdtSpec {
    fn rule(public_op: OpName, when: ParamPredicate, op: OpName, args: ParamFn, out_mapping: ParamFn) -> TranslationRule {
        TranslationRule {
            public_op,
            when,
            target: TranslationTarget::Private { op, args },
            out_mapping,
        }
    }
    fn null(public_op: OpName, when: ParamPredicate) -> TranslationRule {
        TranslationRule {
            public_op,
            when,
            target: TranslationTarget::Null(no_params),
            out_mapping: same_outs,
        }
    }
    AdtSpec {
        name: "boolean",
        public_ops: vec![
            PublicOp { name: "AND", inputs: &[Tag::Boolean] },
            PublicOp { name: "OR", inputs: &[Tag::Boolean] },
            PublicOp { name: "XOR", inputs: &[Tag::Boolean] },
            PublicOp { name: "NOT", inputs: &[] },
            PublicOp { name: "SETTO", inputs: &[Tag::Boolean] },
            PublicOp { name: "READ", inputs: &[] },
        ],
        private_ops: vec![
            PrivateOp { name: "NOT", inputs: &[], inverse_only: false },
            PrivateOp { name: "SETTO", inputs: &[Tag::Boolean], inverse_only: false },
            PrivateOp { name: "READ", inputs: &[], inverse_only: false },
        ],
        translations: vec![
            null("AND", |ins| arg_is(ins, true)),
            rule("AND", |ins| arg_is(ins, false), "SETTO", constant_false, no_params),
            null("OR", |ins| arg_is(ins, false)),
            rule("OR", |ins| arg_is(ins, true), "SETTO", constant_true, no_params),
            null("XOR", |ins| arg_is(ins, false)),
            rule("XOR", |ins| arg_is(ins, true), "NOT", no_params, no_params),
            rule("NOT", always, "NOT", no_params, no_params),
            rule("SETTO", always, "SETTO", <[Value]>::to_vec, no_params),
            rule("READ", always, "READ", no_params, same_outs),
        ],
        inverses: vec![
            InverseRule { direct_op: "NOT", when: |_, _| true, inverse: Some(("NOT", |_, _| vec![])) },
            InverseRule {
                direct_op: "SETTO",
                when: |ins, outs| ins[0] != outs[0],
                inverse: Some(("SETTO", |_, outs| outs.to_vec())),
            },
            InverseRule { direct_op: "SETTO", when: |ins, outs| ins[0] == outs[0], inverse: None },
            InverseRule { direct_op: "READ", when: |_, _| true, inverse: None },
        ],
        tables: CommutTables {
            in_entries: vec![
                InCommutEntry { a: "NOT", b: "NOT", when: |_, _| true },
                InCommutEntry { a: "READ", b: "READ", when: |_, _| true },
            ],
            out_entries: register_out_entries(),
        },
        semantics: Box::new(BooleanSemantics),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adt::{PublicInvocation, Translated};

    fn translate(op: &str, args: Vec<Value>) -> Translated {
        spec().translate_public(&PublicInvocation::new(op, args)).unwrap()
    }

    #[test]
    fn six_public_ops_three_private() {
        let t = |op, b| translate(op, vec![Value::Boolean(b)]);
        assert!(matches!(t("OR", false), Translated::NullDirect(_)));
        assert!(matches!(t("AND", true), Translated::NullDirect(_)));
        assert!(matches!(t("XOR", false), Translated::NullDirect(_)));
        let private = |tr: Translated| match tr {
            Translated::Private { call, .. } => call,
            Translated::NullDirect(_) => panic!("expected private"),
        };
        assert_eq!(private(t("AND", false)), PrivateCall::new("SETTO", vec![Value::Boolean(false)]));
        assert_eq!(private(t("OR", true)), PrivateCall::new("SETTO", vec![Value::Boolean(true)]));
        assert_eq!(private(t("XOR", true)), PrivateCall::new("NOT", vec![]));
        assert_eq!(private(translate("NOT", vec![])).op, "NOT");
    }

    #[test]
    fn public_updates_return_nothing() {
        let s = spec();
        let (state, outs) = s
            .apply_public(&Value::Boolean(true), &PublicInvocation::new("SETTO", vec![Value::Boolean(false)]))
            .unwrap();
        assert_eq!(state, Value::Boolean(false));
        assert!(outs.is_empty());
        let (_, outs) = s.apply_public(&state, &PublicInvocation::new("READ", vec![])).unwrap();
        assert_eq!(outs, vec![Value::Boolean(false)]);
    }
}
