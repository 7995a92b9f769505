//! The two-level operation interface.
//!
//! Users call *public* operations. Each public invocation is translated, from
//! its in-parameters alone, into at most one *private* operation; the private
//! operations are the only ones that are executed, checked for commutativity
//! and undone. A public call whose translation is `NULL` does nothing and is
//! invisible to concurrency control.
//!
//! Private operations return every out-parameter needed to undo them, hidden
//! ones included, so the inverse of an executed invocation is a pure function
//! of its in- and out-parameters.

use std::fmt;

use crate::commutativity::CommutTables;
use crate::error::AdtError;
use crate::ids::{InvocationId, ObjectId, TxnId};
use crate::value::{render_params, Tag, Value};

pub type OpName = &'static str;

/// Maps a parameter list to another parameter list.
pub type ParamFn = fn(&[Value]) -> Vec<Value>;
/// Condition over a single parameter list.
pub type ParamPredicate = fn(&[Value]) -> bool;
/// Condition over an (in-params, out-params) pair.
pub type InOutPredicate = fn(&[Value], &[Value]) -> bool;
/// Argument builder over an (in-params, out-params) pair.
pub type InOutFn = fn(&[Value], &[Value]) -> Vec<Value>;

#[derive(Clone, Debug)]
pub struct PublicOp {
    pub name: OpName,
    pub inputs: &'static [Tag],
}

#[derive(Clone, Debug)]
pub struct PrivateOp {
    pub name: OpName,
    pub inputs: &'static [Tag],
    /// Only ever applied as an inverse; never issued through translation.
    pub inverse_only: bool,
}

/// A private operation together with its in-parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrivateCall {
    pub op: OpName,
    pub args: Vec<Value>,
}

impl PrivateCall {
    pub fn new(op: OpName, args: Vec<Value>) -> Self {
        PrivateCall { op, args }
    }
}

impl fmt::Display for PrivateCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.op)
        } else {
            let params = render_params(&self.args);
            write!(f, "{}({})", self.op, &params[1..params.len() - 1])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicInvocation {
    pub op: String,
    pub args: Vec<Value>,
}

impl PublicInvocation {
    pub fn new(op: impl Into<String>, args: Vec<Value>) -> Self {
        PublicInvocation { op: op.into(), args }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum TranslationTarget {
    /// The call does nothing; the function yields the constant public outs.
    Null(ParamFn),
    Private { op: OpName, args: ParamFn },
}

#[derive(Clone, Debug)]
pub struct TranslationRule {
    pub public_op: OpName,
    pub when: ParamPredicate,
    pub target: TranslationTarget,
    /// Private out-params to public out-params (strips hidden outs).
    pub out_mapping: ParamFn,
}

#[derive(Clone, Debug)]
pub enum Translated {
    NullDirect(Vec<Value>),
    Private {
        call: PrivateCall,
        out_mapping: ParamFn,
    },
}

#[derive(Clone, Debug)]
pub struct InverseRule {
    pub direct_op: OpName,
    pub when: InOutPredicate,
    /// `None` is the NULL inverse.
    pub inverse: Option<(OpName, InOutFn)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inverse {
    Null,
    Apply(PrivateCall),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Executed,
    Deduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lifecycle {
    New,
    Blocked,
    InExecution,
    Executed,
    Finished,
}

/// One invocation of a private operation on one object.
#[derive(Clone, Debug)]
pub struct PrivateInvocation {
    pub id: InvocationId,
    pub txn: TxnId,
    pub object: ObjectId,
    pub call: PrivateCall,
    /// `None` while the invocation is new, blocked or in execution.
    pub outputs: Option<Vec<Value>>,
    pub origin: Option<Origin>,
    pub lifecycle: Lifecycle,
}

impl PrivateInvocation {
    pub fn new(id: InvocationId, txn: TxnId, object: ObjectId, call: PrivateCall) -> Self {
        PrivateInvocation {
            id,
            txn,
            object,
            call,
            outputs: None,
            origin: None,
            lifecycle: Lifecycle::New,
        }
    }
}

/// Reference sequential semantics of an ADT, plus the bounded domains the
/// table validator sweeps.
pub trait Semantics: Send + Sync {
    fn initial_state(&self) -> Value;

    /// Parses a workload initial-state literal.
    fn parse_state(&self, literal: &str) -> Option<Value>;

    fn render_state(&self, state: &Value) -> String {
        state.to_string()
    }

    /// Executes a private operation. Pure and deterministic.
    fn apply(&self, state: &Value, call: &PrivateCall) -> Result<(Value, Vec<Value>), AdtError>;

    /// Every state up to `bound` (depth, universe size or grid scale).
    fn enumerate_states(&self, bound: usize) -> Vec<Value>;

    /// Small pool of initial states for generated workloads.
    fn sample_states(&self) -> Vec<Value> {
        self.enumerate_states(2)
    }

    /// Bounded in-parameter domain of a private operation.
    fn private_args(&self, op: OpName) -> Vec<Vec<Value>>;

    /// Bounded in-parameter domain of a public operation, covering every
    /// translation boundary.
    fn public_args(&self, op: OpName) -> Vec<Vec<Value>>;
}

/// Full behavioral description of an ADT.
pub struct AdtSpec {
    pub name: &'static str,
    pub public_ops: Vec<PublicOp>,
    pub private_ops: Vec<PrivateOp>,
    pub translations: Vec<TranslationRule>,
    pub inverses: Vec<InverseRule>,
    pub tables: CommutTables,
    pub semantics: Box<dyn Semantics>,
}

impl fmt::Debug for AdtSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdtSpec")
            .field("name", &self.name)
            .field("public_ops", &self.public_ops)
            .field("private_ops", &self.private_ops)
            .finish_non_exhaustive()
    }
}

fn check_signature(op: &str, inputs: &[Tag], args: &[Value]) -> Result<(), AdtError> {
    if inputs.len() != args.len() {
        return Err(AdtError::ArityMismatch {
            op: op.to_string(),
            expected: inputs.len(),
            found: args.len(),
        });
    }
    for (index, (tag, arg)) in inputs.iter().zip(args).enumerate() {
        if arg.tag() != *tag {
            return Err(AdtError::TagMismatch {
                op: op.to_string(),
                index,
                expected: *tag,
                found: arg.tag(),
            });
        }
    }
    Ok(())
}

impl AdtSpec {
    pub fn public_op(&self, name: &str) -> Option<&PublicOp> {
        self.public_ops.iter().find(|op| op.name == name)
    }

    pub fn private_op(&self, name: &str) -> Option<&PrivateOp> {
        self.private_ops.iter().find(|op| op.name == name)
    }

    /// Private operations that may be issued directly (not inverse-only).
    pub fn direct_ops(&self) -> impl Iterator<Item = &PrivateOp> {
        self.private_ops.iter().filter(|op| !op.inverse_only)
    }

    fn unknown_op(&self, op: &str) -> AdtError {
        AdtError::UnknownOp {
            adt: self.name.to_string(),
            op: op.to_string(),
        }
    }

    /// Checks a public call against its declared signature.
    pub fn check_public(&self, call: &PublicInvocation) -> Result<&PublicOp, AdtError> {
        let op = self.public_op(&call.op).ok_or_else(|| self.unknown_op(&call.op))?;
        check_signature(op.name, op.inputs, &call.args)?;
        Ok(op)
    }

    pub fn check_private(&self, call: &PrivateCall) -> Result<&PrivateOp, AdtError> {
        let op = self.private_op(call.op).ok_or_else(|| self.unknown_op(call.op))?;
        check_signature(op.name, op.inputs, &call.args)?;
        Ok(op)
    }

    /// Selects the private operation a public call maps to. Never reads
    /// object state: a `NULL` translation is decided from in-params alone.
    pub fn translate_public(&self, call: &PublicInvocation) -> Result<Translated, AdtError> {
        let op = self.check_public(call)?;
        let mut matching = self
            .translations
            .iter()
            .filter(|rule| rule.public_op == op.name && (rule.when)(&call.args));
        let rule = matching.next().ok_or_else(|| AdtError::NoRuleMatches {
            adt: self.name.to_string(),
            kind: "translation",
            op: call.op.clone(),
        })?;
        let extra = matching.count();
        if extra > 0 {
            return Err(AdtError::AmbiguousRules {
                adt: self.name.to_string(),
                kind: "translation",
                op: call.op.clone(),
                count: extra + 1,
            });
        }
        Ok(match rule.target {
            TranslationTarget::Null(outs) => Translated::NullDirect(outs(&call.args)),
            TranslationTarget::Private { op, args } => Translated::Private {
                call: PrivateCall::new(op, args(&call.args)),
                out_mapping: rule.out_mapping,
            },
        })
    }

    /// Determines the inverse of an executed private invocation from its in-
    /// and out-parameters.
    pub fn determine_inverse(&self, call: &PrivateCall, outputs: &[Value]) -> Result<Inverse, AdtError> {
        let mut matching = self
            .inverses
            .iter()
            .filter(|rule| rule.direct_op == call.op && (rule.when)(&call.args, outputs));
        let rule = matching.next().ok_or_else(|| AdtError::NoRuleMatches {
            adt: self.name.to_string(),
            kind: "inverse",
            op: call.to_string(),
        })?;
        let extra = matching.count();
        if extra > 0 {
            return Err(AdtError::AmbiguousRules {
                adt: self.name.to_string(),
                kind: "inverse",
                op: call.to_string(),
                count: extra + 1,
            });
        }
        Ok(match rule.inverse {
            None => Inverse::Null,
            Some((op, args)) => Inverse::Apply(PrivateCall::new(op, args(&call.args, outputs))),
        })
    }

    /// Executes a private call through the reference semantics after
    /// checking its signature.
    pub fn apply(&self, state: &Value, call: &PrivateCall) -> Result<(Value, Vec<Value>), AdtError> {
        self.check_private(call)?;
        self.semantics.apply(state, call)
    }

    /// Serial reference execution of a public call: translate, apply, map
    /// the outs back to the public interface.
    pub fn apply_public(&self, state: &Value, call: &PublicInvocation) -> Result<(Value, Vec<Value>), AdtError> {
        match self.translate_public(call)? {
            Translated::NullDirect(outs) => Ok((state.clone(), outs)),
            Translated::Private { call, out_mapping } => {
                let (next, outs) = self.apply(state, &call)?;
                Ok((next, out_mapping(&outs)))
            }
        }
    }

    pub fn parse_state(&self, literal: Option<&str>) -> Result<Value, AdtError> {
        match literal {
            None => Ok(self.semantics.initial_state()),
            Some(lit) => self
                .semantics
                .parse_state(lit)
                .ok_or_else(|| AdtError::BadStateLiteral {
                    adt: self.name.to_string(),
                    literal: lit.to_string(),
                }),
        }
    }

    pub fn render_state(&self, state: &Value) -> String {
        self.semantics.render_state(state)
    }
}

/// Identity out-mapping.
pub fn same_outs(outs: &[Value]) -> Vec<Value> {
    outs.to_vec()
}

/// Empty parameter list.
pub fn no_params(_: &[Value]) -> Vec<Value> {
    Vec::new()
}

pub fn always(_: &[Value]) -> bool {
    true
}

pub fn always_io(_: &[Value], _: &[Value]) -> bool {
    true
}
