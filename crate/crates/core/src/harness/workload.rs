//! Line-oriented workload files.
//!
//! ```text
//! # comment
//! object S stack [a]
//! object R real 3/2
//! txn T1
//!   op S PUSH b
//!   op R ADD -1/2
//! end commit
//! schedule seed 7 steps 100      # or: schedule steps T1 T1 T2
//! ```

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::adt::{AdtSpec, PublicInvocation};
use crate::builtin::Registry;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct WorkloadError {
    /// 1-based line, or `None` for whole-file problems.
    pub line: Option<usize>,
    pub message: String,
}

impl WorkloadError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        WorkloadError {
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for WorkloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ObjectDecl {
    pub name: String,
    pub adt: String,
    pub spec: Arc<AdtSpec>,
    pub initial: Value,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpStep {
    pub object: usize,
    pub call: PublicInvocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Terminal {
    Commit,
    Abort,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxnDecl {
    pub name: String,
    pub ops: Vec<OpStep>,
    pub terminal: Terminal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Schedule {
    Random { seed: u64, steps: usize },
    /// Transaction indices, one per scheduling step.
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub objects: Vec<ObjectDecl>,
    pub txns: Vec<TxnDecl>,
    pub schedule: Option<Schedule>,
}

impl Workload {
    pub fn txn_index(&self, name: &str) -> Option<usize> {
        self.txns.iter().position(|t| t.name == name)
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    /// Serializes back to the file format. `parse(to_text(w))` is `w`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for o in &self.objects {
            out.push_str(&format!("object {} {} {}\n", o.name, o.adt, o.spec.render_state(&o.initial)));
        }
        for t in &self.txns {
            out.push_str(&format!("txn {}\n", t.name));
            for step in &t.ops {
                out.push_str(&format!("  op {} {}", self.objects[step.object].name, step.call.op));
                for a in &step.call.args {
                    out.push_str(&format!(" {a}"));
                }
                out.push('\n');
            }
            let end = match t.terminal {
                Terminal::Commit => "commit",
                Terminal::Abort => "abort",
            };
            out.push_str(&format!("end {end}\n"));
        }
        match &self.schedule {
            Some(Schedule::Random { seed, steps }) => out.push_str(&format!("schedule seed {seed} steps {steps}\n")),
            Some(Schedule::Explicit(steps)) => {
                out.push_str("schedule steps");
                for i in steps {
                    out.push_str(&format!(" {}", self.txns[*i].name));
                }
                out.push('\n');
            }
            None => {}
        }
        out
    }
}

fn parse_number<T: std::str::FromStr>(line: usize, what: &str, token: Option<&str>) -> Result<T, WorkloadError> {
    let token = token.ok_or_else(|| WorkloadError::at(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| WorkloadError::at(line, format!("bad {what} `{token}`")))
}

pub fn parse_workload(text: &str, registry: &Registry) -> Result<Workload, WorkloadError> {
    let mut objects: Vec<ObjectDecl> = Vec::new();
    let mut txns: Vec<TxnDecl> = Vec::new();
    let mut open: Option<(usize, String, Vec<OpStep>)> = None;
    let mut schedule_tokens: Option<(usize, Vec<String>)> = None;
    let mut schedule = None;

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&keyword, rest)) = tokens.split_first() else {
            continue;
        };
        match keyword {
            "object" => {
                if open.is_some() {
                    return Err(WorkloadError::at(line, "object declared inside a transaction"));
                }
                let (name, adt, literal) = match rest {
                    [name, adt] => (*name, *adt, None),
                    [name, adt, literal] => (*name, *adt, Some(*literal)),
                    _ => return Err(WorkloadError::at(line, "expected `object <name> <adt> [<initial>]`")),
                };
                if objects.iter().any(|o| o.name == name) {
                    return Err(WorkloadError::at(line, format!("object `{name}` declared twice")));
                }
                let spec = registry.get(adt).map_err(|e| WorkloadError::at(line, e.to_string()))?;
                let initial = spec
                    .parse_state(literal)
                    .map_err(|e| WorkloadError::at(line, e.to_string()))?;
                objects.push(ObjectDecl {
                    name: name.to_string(),
                    adt: adt.to_string(),
                    spec,
                    initial,
                });
            }
            "txn" => {
                if let Some((start, name, _)) = &open {
                    return Err(WorkloadError::at(line, format!("txn `{name}` (line {start}) has no `end`")));
                }
                let [name] = rest else {
                    return Err(WorkloadError::at(line, "expected `txn <name>`"));
                };
                if txns.iter().any(|t| t.name == *name) {
                    return Err(WorkloadError::at(line, format!("txn `{name}` declared twice")));
                }
                open = Some((line, name.to_string(), Vec::new()));
            }
            "op" => {
                let Some((_, _, ops)) = open.as_mut() else {
                    return Err(WorkloadError::at(line, "`op` outside a transaction"));
                };
                let [object, op, args @ ..] = rest else {
                    return Err(WorkloadError::at(line, "expected `op <object> <OP> [<arg> ...]`"));
                };
                let obj = objects
                    .iter()
                    .position(|o| o.name == *object)
                    .ok_or_else(|| WorkloadError::at(line, format!("undeclared object `{object}`")))?;
                let spec = &objects[obj].spec;
                let public = spec
                    .public_op(op)
                    .ok_or_else(|| WorkloadError::at(line, format!("{} has no operation `{op}`", spec.name)))?;
                if public.inputs.len() != args.len() {
                    return Err(WorkloadError::at(
                        line,
                        format!("{op} takes {} argument(s), got {}", public.inputs.len(), args.len()),
                    ));
                }
                let values = public
                    .inputs
                    .iter()
                    .zip(args.iter())
                    .map(|(tag, token)| Value::parse_as(*tag, token))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| WorkloadError::at(line, format!("{op}: {e}")))?;
                ops.push(OpStep {
                    object: obj,
                    call: PublicInvocation::new(*op, values),
                });
            }
            "end" => {
                let Some((_, name, ops)) = open.take() else {
                    return Err(WorkloadError::at(line, "`end` without a transaction"));
                };
                let terminal = match rest {
                    ["commit"] => Terminal::Commit,
                    ["abort"] => Terminal::Abort,
                    _ => return Err(WorkloadError::at(line, "expected `end commit` or `end abort`")),
                };
                txns.push(TxnDecl { name, ops, terminal });
            }
            "schedule" => {
                if schedule.is_some() || schedule_tokens.is_some() {
                    return Err(WorkloadError::at(line, "schedule given twice"));
                }
                match rest {
                    ["seed", seed, "steps", steps] => {
                        schedule = Some(Schedule::Random {
                            seed: parse_number(line, "seed", Some(seed))?,
                            steps: parse_number(line, "step count", Some(steps))?,
                        });
                    }
                    ["steps", names @ ..] => {
                        schedule_tokens = Some((line, names.iter().map(|s| s.to_string()).collect()));
                    }
                    _ => {
                        return Err(WorkloadError::at(
                            line,
                            "expected `schedule seed <N> steps <M>` or `schedule steps <txn> ...`",
                        ))
                    }
                }
            }
            other => return Err(WorkloadError::at(line, format!("unknown directive `{other}`"))),
        }
    }

    if let Some((start, name, _)) = open {
        return Err(WorkloadError::at(start, format!("txn `{name}` has no `end`")));
    }
    if objects.is_empty() {
        return Err(WorkloadError {
            line: None,
            message: "no objects".into(),
        });
    }
    if let Some((line, names)) = schedule_tokens {
        let steps = names
            .iter()
            .map(|n| {
                txns.iter()
                    .position(|t| t.name == *n)
                    .ok_or_else(|| WorkloadError::at(line, format!("schedule names undeclared txn `{n}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        schedule = Some(Schedule::Explicit(steps));
    }
    Ok(Workload { objects, txns, schedule })
}
