//! REAL: an exact rational register.
//!
//! Public `MULTIPLY` and `ADD` split by argument into private `SETTO`,
//! `MULTIPLY`, `DIVIDE`, `ADD`, `SUB` or NULL, so that private `ADD`/`SUB`
//! amounts are strictly positive and multiplication by zero (which has no
//! mathematical inverse) becomes a `SETTO` undone through its before-image.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adt::{
    always, no_params, same_outs, AdtSpec, InverseRule, OpName, ParamFn, ParamPredicate, PrivateCall, PrivateOp,
    PublicOp, Semantics, TranslationRule, TranslationTarget,
};
use crate::commutativity::{CommutTables, InCommutEntry, OutCommutEntry};
use crate::error::AdtError;
use crate::value::{abs_ge_one, parse_rational, Tag, Value};

use super::register_out_entries;

/// Seed of the validation grid. Fixed so reports are reproducible.
const GRID_SEED: u64 = 0x0005_EED0_F0AD;
/// Grid states drawn per unit of validation bound.
const GRID_PER_BOUND: usize = 350;

struct RealSemantics;

fn rat(v: &Value) -> &BigRational {
    v.as_rational().expect("real parameter is rational")
}

fn precondition(op: &str, reason: &str) -> AdtError {
    AdtError::PreconditionViolated {
        op: op.to_string(),
        reason: reason.to_string(),
    }
}

/// Values on which the MULTIPLY/ADD translation partitions.
fn boundary_values() -> Vec<Value> {
    vec![
        Value::int(0),
        Value::int(1),
        Value::int(-1),
        Value::ratio(1, 2),
        Value::ratio(-1, 2),
        Value::int(2),
        Value::int(-2),
    ]
}

impl Semantics for RealSemantics {
    fn initial_state(&self) -> Value {
        Value::int(0)
    }

    fn parse_state(&self, literal: &str) -> Option<Value> {
        parse_rational(literal).ok().map(Value::Rational)
    }

    fn apply(&self, state: &Value, call: &PrivateCall) -> Result<(Value, Vec<Value>), AdtError> {
        let x = rat(state);
        let arg = call.args.first().map(rat);
        let (next, outs) = match (call.op, arg) {
            ("ADD", Some(a)) | ("SUB", Some(a)) if !a.is_positive() => {
                return Err(precondition(call.op, "amount must be strictly positive"));
            }
            ("MULTIPLY", Some(m)) | ("DIVIDE", Some(m)) if !abs_ge_one(m) => {
                return Err(precondition(call.op, "factor must have absolute value at least 1"));
            }
            ("ADD", Some(a)) => (x + a, vec![]),
            ("SUB", Some(a)) => (x - a, vec![]),
            ("MULTIPLY", Some(m)) => (x * m, vec![]),
            ("DIVIDE", Some(d)) => (x / d, vec![]),
            ("SETTO", Some(v)) => (v.clone(), vec![state.clone()]),
            ("READ", None) => (x.clone(), vec![state.clone()]),
            (other, _) => unreachable!("unchecked real op {other}"),
        };
        Ok((Value::Rational(next), outs))
    }

    fn sample_states(&self) -> Vec<Value> {
        let mut states = boundary_values();
        states.extend([Value::int(3), Value::ratio(3, 2), Value::ratio(-5, 3)]);
        states
    }

    fn enumerate_states(&self, bound: usize) -> Vec<Value> {
        let mut states = boundary_values();
        let mut seen: BTreeSet<Value> = states.iter().cloned().collect();
        let target = states.len() + bound * GRID_PER_BOUND;
        let mut rng = ChaCha8Rng::seed_from_u64(GRID_SEED);
        let mut attempts = 0;
        while states.len() < target && attempts < target * 20 {
            attempts += 1;
            let v = Value::Rational(BigRational::new(
                BigInt::from(rng.random_range(-200i64..=200)),
                BigInt::from(rng.random_range(1i64..=16)),
            ));
            if seen.insert(v.clone()) {
                states.push(v);
            }
        }
        states
    }

    fn private_args(&self, op: OpName) -> Vec<Vec<Value>> {
        let vals = match op {
            "ADD" | "SUB" => vec![Value::ratio(1, 2), Value::int(1), Value::int(2), Value::int(3)],
            "MULTIPLY" => vec![Value::int(-1), Value::int(2), Value::int(-2), Value::ratio(3, 2)],
            "DIVIDE" => vec![Value::int(2), Value::int(-2), Value::ratio(3, 2), Value::int(-1)],
            "SETTO" => vec![Value::int(0), Value::int(1), Value::ratio(-1, 2), Value::int(2)],
            _ => return vec![vec![]],
        };
        vals.into_iter().map(|v| vec![v]).collect()
    }

    fn public_args(&self, op: OpName) -> Vec<Vec<Value>> {
        let vals = match op {
            "MULTIPLY" => vec![
                Value::int(0),
                Value::int(1),
                Value::int(-1),
                Value::int(2),
                Value::int(-3),
                Value::ratio(1, 2),
                Value::ratio(-1, 2),
                Value::ratio(3, 2),
                Value::ratio(2, 3),
            ],
            "ADD" => vec![
                Value::int(0),
                Value::int(1),
                Value::int(-1),
                Value::ratio(1, 2),
                Value::ratio(-3, 2),
            ],
            "SETTO" => vec![Value::int(0), Value::ratio(1, 2)],
            _ => return vec![vec![]],
        };
        vals.into_iter().map(|v| vec![v]).collect()
    }
}

fn is_zero(ins: &[Value]) -> bool {
    rat(&ins[0]).is_zero()
}

fn is_one(ins: &[Value]) -> bool {
    rat(&ins[0]).is_one()
}

fn scales_up(ins: &[Value]) -> bool {
    abs_ge_one(rat(&ins[0])) && !is_one(ins)
}

fn scales_down(ins: &[Value]) -> bool {
    !is_zero(ins) && !abs_ge_one(rat(&ins[0]))
}

fn positive(ins: &[Value]) -> bool {
    rat(&ins[0]).is_positive()
}

fn negative(ins: &[Value]) -> bool {
    rat(&ins[0]).is_negative()
}

fn set_to_zero(_: &[Value]) -> Vec<Value> {
    vec![Value::int(0)]
}

fn reciprocal(ins: &[Value]) -> Vec<Value> {
    vec![Value::Rational(rat(&ins[0]).recip())]
}

fn negated(ins: &[Value]) -> Vec<Value> {
    vec![Value::Rational(-rat(&ins[0]))]
}

fn first_arg(ins: &[Value]) -> Vec<Value> {
    ins.to_vec()
}

fn read_zero(_: &[Value], outs: &[Value], _: &[Value]) -> bool {
    rat(&outs[0]).is_zero()
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
    let unconditional = |a, b| InCommutEntry {
        a,
        b,
        when: |_, _| true,
    };
    let mut out_entries = register_out_entries();
    for incoming in ["MULTIPLY", "DIVIDE"] {
        out_entries.push(OutCommutEntry {
            executed: "READ",
            incoming,
            when: read_zero,
            deduce: None,
        });
    }

    AdtSpec {
        name: "real",
        public_ops: vec![
            PublicOp { name: "MULTIPLY", inputs: &[Tag::Rational] },
            PublicOp { name: "ADD", inputs: &[Tag::Rational] },
            PublicOp { name: "READ", inputs: &[] },
            PublicOp { name: "SETTO", inputs: &[Tag::Rational] },
        ],
        private_ops: ["MULTIPLY", "DIVIDE", "ADD", "SUB", "SETTO"]
            .into_iter()
            .map(|name| PrivateOp { name, inputs: &[Tag::Rational], inverse_only: false })
            .chain([PrivateOp { name: "READ", inputs: &[], inverse_only: false }])
            .collect(),
        translations: vec![
            rule("MULTIPLY", is_zero, "SETTO", set_to_zero, no_params),
            null("MULTIPLY", is_one),
            rule("MULTIPLY", scales_up, "MULTIPLY", first_arg, same_outs),
            rule("MULTIPLY", scales_down, "DIVIDE", reciprocal, same_outs),
            rule("ADD", positive, "ADD", first_arg, same_outs),
            rule("ADD", negative, "SUB", negated, same_outs),
            null("ADD", is_zero),
            rule("READ", always, "READ", no_params, same_outs),
            rule("SETTO", always, "SETTO", first_arg, no_params),
        ],
        inverses: vec![
            InverseRule { direct_op: "ADD", when: |_, _| true, inverse: Some(("SUB", |ins, _| ins.to_vec())) },
            InverseRule { direct_op: "SUB", when: |_, _| true, inverse: Some(("ADD", |ins, _| ins.to_vec())) },
            InverseRule {
                direct_op: "MULTIPLY",
                when: |_, _| true,
                inverse: Some(("DIVIDE", |ins, _| ins.to_vec())),
            },
            InverseRule {
                direct_op: "DIVIDE",
                when: |_, _| true,
                inverse: Some(("MULTIPLY", |ins, _| ins.to_vec())),
            },
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
                unconditional("ADD", "ADD"),
                unconditional("ADD", "SUB"),
                unconditional("SUB", "SUB"),
                unconditional("MULTIPLY", "MULTIPLY"),
                unconditional("MULTIPLY", "DIVIDE"),
                unconditional("DIVIDE", "DIVIDE"),
                unconditional("READ", "READ"),
            ],
            out_entries,
        },
        semantics: Box::new(RealSemantics),
    }
}
